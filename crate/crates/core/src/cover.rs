//! The explicit cover `G = G_0 ∪ G_{k+1} ∪ ... ∪ G_{kr - ⌈r/2⌉}` of the
//! upset of `g = (1/r) * 1_H`.
//!
//! * `G_0` holds the unions of all matchings of `⌈r/2⌉` edges of `H`.
//! * `G_j` is either every `j`-subset of the ground set (full level, when
//!   `n p / j <= e^2`) or only the `j`-subsets that contain at least `r`
//!   edges (restricted level). Restricted levels are never materialised.

use std::collections::HashSet;
use std::f64::consts::E;
use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::seed::SeedSpec;
use crate::subsets::{enumerate_matchings_in, SubsetMask};

/// `e^2`, the full/restricted cut-off for `n p / j`.
pub const E_SQUARED: f64 = E * E;

/// `4 e^3`, the smallest covering constant the weight bounds are stated for.
pub fn default_covering_constant() -> f64 {
    4.0 * E.powi(3)
}

/// Backtracking nodes allowed when enumerating matchings for `G_0`.
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// Relative band around `e^2` inside which a level is flagged as near-tie.
const BOUNDARY_BAND: f64 = 1e-12;

/// Largest ground set the exhaustive covering check accepts.
pub const EXHAUSTIVE_LIMIT: u32 = 22;

pub fn half_up(r: u32) -> u32 {
    r.div_ceil(2)
}

/// Level indices `k+1 ..= k r - ⌈r/2⌉` (empty when `r <= 1`).
pub fn level_range(k: u32, r: u32) -> RangeInclusive<u32> {
    let hi = (k * r).saturating_sub(half_up(r));
    #[allow(clippy::reversed_empty_ranges)]
    if hi < k + 1 {
        return 1..=0;
    }
    k + 1..=hi
}

/// The density solving `w(g, p) = m p^k / r = 1`, or `p = 1` with an empty
/// upset when even `w(g, 1) < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalDensity {
    pub p: f64,
    pub upset_empty: bool,
}

pub fn compute_p(r: u32, m: u64, k: u32) -> CriticalDensity {
    if m < u64::from(r) {
        return CriticalDensity {
            p: 1.0,
            upset_empty: true,
        };
    }
    let p = if m == u64::from(r) {
        1.0
    } else {
        (f64::from(r) / m as f64).powf(1.0 / f64::from(k))
    };
    CriticalDensity { p, upset_empty: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelMode {
    Full,
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSpec {
    pub j: u32,
    pub mode: LevelMode,
    /// `n p / j`
    pub ratio: f64,
    pub near_boundary: bool,
}

impl LevelSpec {
    pub fn classify(n: u32, p: f64, j: u32) -> Self {
        let ratio = f64::from(n) * p / f64::from(j);
        let near_boundary = (ratio - E_SQUARED).abs() <= BOUNDARY_BAND * E_SQUARED;
        let mode = if ratio <= E_SQUARED || near_boundary {
            LevelMode::Full
        } else {
            LevelMode::Restricted
        };
        LevelSpec {
            j,
            mode,
            ratio,
            near_boundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverKind {
    /// `m < r`: the upset of `g` is empty and so is the cover.
    Empty,
    /// `r <= 1`: the support itself.
    Support,
    Constructed,
}

#[derive(Debug, Clone)]
pub struct Cover {
    pub n: u32,
    pub k: u32,
    pub r: u32,
    pub kind: CoverKind,
    pub g0_sets: Vec<SubsetMask>,
    pub levels: Vec<LevelSpec>,
    pub covering_constant: f64,
    pub density: CriticalDensity,
    pub matching_nodes: u64,
}

/// JSON summary of a cover.
#[derive(Debug, Clone, Serialize)]
pub struct CoverSummary {
    pub p: f64,
    pub upset_empty: bool,
    #[serde(rename = "L")]
    pub covering_constant: f64,
    pub g0_count: usize,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub j: u32,
    pub mode: LevelMode,
}

impl Cover {
    pub fn summary(&self) -> CoverSummary {
        CoverSummary {
            p: self.density.p,
            upset_empty: self.density.upset_empty,
            covering_constant: self.covering_constant,
            g0_count: self.g0_sets.len(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelSummary { j: l.j, mode: l.mode })
                .collect(),
        }
    }

    /// `k ⌈r/2⌉`, the size of every `G_0` member.
    pub fn g0_set_size(&self) -> u32 {
        self.k * half_up(self.r)
    }
}

pub fn build_cover(h: &Hypergraph, r: u32, covering_constant: f64) -> Result<Cover> {
    build_cover_with_budget(h, r, covering_constant, DEFAULT_NODE_BUDGET)
}

pub fn build_cover_with_budget(h: &Hypergraph, r: u32, covering_constant: f64, budget: u64) -> Result<Cover> {
    if r == 0 {
        return Err(Error::Domain("r must be at least 1".into()));
    }
    if !(covering_constant.is_finite() && covering_constant > 0.0) {
        return Err(Error::Domain(format!(
            "covering constant {covering_constant} must be positive"
        )));
    }
    let (n, k) = (h.n(), h.k());
    let density = compute_p(r, h.m(), k);
    let mut cover = Cover {
        n,
        k,
        r,
        kind: CoverKind::Empty,
        g0_sets: vec![],
        levels: vec![],
        covering_constant,
        density,
        matching_nodes: 0,
    };
    if density.upset_empty {
        return Ok(cover);
    }
    cover.kind = if r <= 1 {
        CoverKind::Support
    } else {
        CoverKind::Constructed
    };

    let mut seen: HashSet<SubsetMask> = HashSet::new();
    let mut it = enumerate_matchings_in(n, h.edges(), half_up(r) as usize);
    loop {
        let next = it.next();
        if it.nodes() > budget {
            return Err(Error::Budget {
                budget,
                nodes: it.nodes(),
                found: seen.len(),
            });
        }
        match next {
            Some(mm) => {
                let mut u = SubsetMask::empty(n);
                for e in &mm.edges {
                    u.union_with(e);
                }
                seen.insert(u);
            }
            None => break,
        }
    }
    cover.matching_nodes = it.nodes();
    let mut g0: Vec<SubsetMask> = seen.into_iter().collect();
    g0.sort();
    cover.g0_sets = g0;
    cover.levels = level_range(k, r)
        .map(|j| LevelSpec::classify(n, density.p, j))
        .collect();
    Ok(cover)
}

/// Some `r` edges inside `s` have a union of at most `j` vertices (so a
/// `j`-subset of `s` holding `r` edges exists once `|s| >= j`).
pub fn has_dense_subset(h: &Hypergraph, s: &SubsetMask, r: u32, j: u32) -> bool {
    let inside: Vec<&SubsetMask> = h.edges_inside(s).collect();
    if (inside.len() as u64) < u64::from(r) || s.len() < j {
        return false;
    }
    if r == 0 {
        return true;
    }
    let mut all = SubsetMask::empty(h.n());
    inside.iter().for_each(|e| all.union_with(e));
    if all.len() <= j {
        return true;
    }
    fn search(inside: &[&SubsetMask], start: usize, left: u32, acc: &SubsetMask, j: u32) -> bool {
        if left == 0 {
            return true;
        }
        for i in start..inside.len() {
            if inside.len() - i < left as usize {
                break;
            }
            let u = acc.union(inside[i]);
            if u.len() <= j && search(inside, i + 1, left - 1, &u, j) {
                return true;
            }
        }
        false
    }
    search(&inside, 0, r, &SubsetMask::empty(h.n()), j)
}

/// `S` lies in the upset of the cover.
pub fn member_upset_cover(s: &SubsetMask, cover: &Cover, h: &Hypergraph, r: u32) -> bool {
    if cover.kind == CoverKind::Empty {
        return false;
    }
    if cover.g0_sets.iter().any(|u| u.is_subset_of(s)) {
        return true;
    }
    let size = s.len();
    cover.levels.iter().any(|l| {
        size >= l.j
            && match l.mode {
                LevelMode::Full => true,
                LevelMode::Restricted => has_dense_subset(h, s, r, l.j),
            }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringReport {
    pub mode: &'static str,
    pub n: u32,
    pub k: u32,
    pub r: u32,
    pub m: u64,
    pub checked: u64,
    pub members_of_g: u64,
    pub violations: u64,
    /// Up to [`MAX_REPORTED`] violating sets.
    pub examples: Vec<Vec<u32>>,
    pub cover: CoverSummary,
}

impl CoveringReport {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

pub const MAX_REPORTED: usize = 20;

/// Checks `<g> ⊆ <G>` on every subset of the ground set (`n <= 22`).
///
/// Both upsets are computed for all `2^n` sets at once with subset-sum
/// transforms: edge counts by a sum over subsets, and cover membership by an
/// OR over subsets of the generator indicator.
pub fn verify_covering_exhaustive(h: &Hypergraph, r: u32, covering_constant: f64) -> Result<CoveringReport> {
    let n = h.n();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Capacity(format!(
            "exhaustive covering check limited to n <= {EXHAUSTIVE_LIMIT}, got {n}"
        )));
    }
    let cover = build_cover(h, r, covering_constant)?;
    let size = 1usize << n;
    let mut count = vec![0u32; size];
    for e in h.edges() {
        count[e.as_u64().expect("n <= 22") as usize] += 1;
    }
    for bit in 0..n {
        let b = 1usize << bit;
        for s in 0..size {
            if s & b != 0 {
                count[s] += count[s ^ b];
            }
        }
    }

    let mut gen = vec![false; size];
    if cover.kind != CoverKind::Empty {
        for u in &cover.g0_sets {
            gen[u.as_u64().expect("n <= 22") as usize] = true;
        }
        let mut full = [false; 64];
        let mut restricted = [false; 64];
        for l in &cover.levels {
            if l.j as usize >= 64 {
                continue;
            }
            match l.mode {
                LevelMode::Full => full[l.j as usize] = true,
                LevelMode::Restricted => restricted[l.j as usize] = true,
            }
        }
        for (s, g) in gen.iter_mut().enumerate() {
            let pc = s.count_ones() as usize;
            if full[pc] || (restricted[pc] && count[s] >= r) {
                *g = true;
            }
        }
        for bit in 0..n {
            let b = 1usize << bit;
            for s in 0..size {
                if s & b != 0 && !gen[s] && gen[s ^ b] {
                    gen[s] = true;
                }
            }
        }
    }

    let mut members = 0u64;
    let mut violations = 0u64;
    let mut examples = Vec::new();
    for s in 0..size {
        if count[s] >= r {
            members += 1;
            if !gen[s] {
                violations += 1;
                if examples.len() < MAX_REPORTED {
                    examples.push(SubsetMask::from_u64(n, s as u64).to_vec());
                }
            }
        }
    }
    Ok(CoveringReport {
        mode: "exhaustive",
        n,
        k: h.k(),
        r,
        m: h.m(),
        checked: size as u64,
        members_of_g: members,
        violations,
        examples,
        cover: cover.summary(),
    })
}

/// Spot-checks `<g> ⊆ <G>` on random members of `<g>`: the union of `r`
/// distinct random edges, padded with each remaining vertex independently
/// with probability `u^2` (`u` uniform per trial). Trial 0 is the whole
/// ground set.
pub fn verify_covering_sampled(
    h: &Hypergraph,
    r: u32,
    covering_constant: f64,
    trials: u64,
    seed: &SeedSpec,
) -> Result<CoveringReport> {
    let cover = build_cover(h, r, covering_constant)?;
    let mut report = CoveringReport {
        mode: "sampled",
        n: h.n(),
        k: h.k(),
        r,
        m: h.m(),
        checked: 0,
        members_of_g: 0,
        violations: 0,
        examples: vec![],
        cover: cover.summary(),
    };
    if cover.kind == CoverKind::Empty || trials == 0 {
        return Ok(report);
    }
    let n = h.n();
    let edges = h.edges();
    let outcomes: Vec<(bool, Option<Vec<u32>>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = if t == 0 {
                SubsetMask::full(n)
            } else {
                let mut rng = seed.child(t).rng();
                let mut idx: Vec<usize> = (0..edges.len()).collect();
                let mut s = SubsetMask::empty(n);
                for i in 0..r as usize {
                    let pick = rng.random_range(i..idx.len());
                    idx.swap(i, pick);
                    s.union_with(&edges[idx[i]]);
                }
                let u: f64 = rng.random();
                let pad = u * u;
                for v in 0..n {
                    if !s.contains(v) && rng.random_bool(pad) {
                        s.insert(v);
                    }
                }
                s
            };
            let member = h.count_inside(&s) >= u64::from(r);
            let covered = member_upset_cover(&s, &cover, h, r);
            (member, (member && !covered).then(|| s.to_vec()))
        })
        .collect();
    for (member, bad) in outcomes {
        report.checked += 1;
        report.members_of_g += u64::from(member);
        if let Some(s) = bad {
            report.violations += 1;
            if report.examples.len() < MAX_REPORTED {
                report.examples.push(s);
            }
        }
    }
    Ok(report)
}
