//! Weights `w(·, p)` of the cover and its parts, exact, closed form and
//! Monte Carlo, plus the first and second moments of a restricted level over
//! the uniform `m`-edge model.
//!
//! Every weight is carried as a [`LogScalar`] so `(p/L)^j` never underflows
//! before the comparison it feeds.

use std::collections::HashSet;
use std::f64::consts::E;

use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{half_up, Cover, CoverKind, CoverSummary, LevelMode};
use crate::error::{Error, Result};
use crate::exactmath::{binom, binom_u64, ln_binom, rational_from_uint, serialize_rational, BigRational, LogScalar};
use crate::hypergeom::{cov_overlap, tail, HypergeomParams};
use crate::hypergraph::{GFunction, Hypergraph};
use crate::seed::SeedSpec;
use crate::stats::{hoeffding_interval, MC_CONFIDENCE};
use crate::subsets::{ksubset_words, SubsetMask};

/// Exact restricted-level enumeration stays below this many `j`-subsets.
pub const RESTRICTED_ENUMERATION_LIMIT: u64 = 10_000_000;
/// ... and below this ground-set size.
pub const RESTRICTED_MAX_N: u32 = 24;
/// Exact moments need `C(n, k)` at most this.
pub const EXACT_MOMENT_LIMIT: u64 = 10_000;
pub const MIN_MC_TRIALS: u64 = 100;
const MC_CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Exact,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightEstimate {
    pub value: f64,
    pub kind: WeightKind,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    #[serde(skip)]
    pub log_value: LogScalar,
}

impl WeightEstimate {
    pub fn point(log_value: LogScalar, kind: WeightKind) -> Self {
        let v = log_value.to_f64();
        WeightEstimate {
            value: v,
            kind,
            ci_low: v,
            ci_high: v,
            trials: 0,
            log_value,
        }
    }

    pub fn zero(kind: WeightKind) -> Self {
        Self::point(LogScalar::ZERO, kind)
    }
}

/// `w(g, p) = m p^k / r`.
pub fn weight_g(g: &GFunction, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let h = &g.hypergraph;
    h.m() as f64 * p.powi(h.k() as i32) / f64::from(g.r)
}

fn ln_p(p_eval: f64) -> LogScalar {
    LogScalar::from_f64(p_eval)
}

/// `|G_0| p_eval^(k ⌈r/2⌉)`.
pub fn weight_g0(cover: &Cover, p_eval: f64) -> WeightEstimate {
    let count = LogScalar::from_f64(cover.g0_sets.len() as f64);
    WeightEstimate::point(count * ln_p(p_eval).powi(cover.g0_set_size()), WeightKind::Exact)
}

/// `C(n, j) p_eval^j`.
pub fn weight_level_full(n: u32, j: u32, p_eval: f64) -> Result<WeightEstimate> {
    if j > n {
        return Err(Error::Domain(format!("level {j} exceeds ground set size {n}")));
    }
    let c = LogScalar::from_ln(ln_binom(u64::from(n), u64::from(j)));
    Ok(WeightEstimate::point(c * ln_p(p_eval).powi(j), WeightKind::ClosedForm))
}

fn count_at_least(edge_words: &[u64], s: u64, r: u32) -> bool {
    if r == 0 {
        return true;
    }
    let mut c = 0;
    for &e in edge_words {
        if e & !s == 0 {
            c += 1;
            if c >= r {
                return true;
            }
        }
    }
    false
}

fn restricted_guard(n: u32, j: u32) -> Result<()> {
    let total = binom_u64(u64::from(n), u64::from(j)).unwrap_or(u64::MAX);
    if n > RESTRICTED_MAX_N || total > RESTRICTED_ENUMERATION_LIMIT {
        return Err(Error::Capacity(format!(
            "exact level enumeration needs n <= {RESTRICTED_MAX_N} and C(n,j) <= {RESTRICTED_ENUMERATION_LIMIT} \
             (n={n}, j={j}); use the Monte Carlo estimator"
        )));
    }
    Ok(())
}

pub fn restricted_exact_feasible(n: u32, j: u32) -> bool {
    restricted_guard(n, j).is_ok()
}

/// Number of `j`-subsets holding at least `r` edges of `h`.
pub fn restricted_count(h: &Hypergraph, r: u32, j: u32) -> Result<u64> {
    restricted_guard(h.n(), j)?;
    let words = h.edge_words().expect("n <= 24");
    let count = ksubset_words(h.n(), j)?
        .par_bridge()
        .filter(|&s| count_at_least(&words, s, r))
        .count();
    Ok(count as u64)
}

/// `|{S ∈ C(X, j) : S holds >= r edges}| p_eval^j` by enumeration.
pub fn weight_level_restricted_exact(h: &Hypergraph, r: u32, j: u32, p_eval: f64) -> Result<WeightEstimate> {
    let count = restricted_count(h, r, j)?;
    let c = LogScalar::from_f64(count as f64);
    Ok(WeightEstimate::point(c * ln_p(p_eval).powi(j), WeightKind::Exact))
}

/// Uniform `j`-subset of `{0..n}` (Floyd's algorithm).
fn random_subset<R: Rng>(rng: &mut R, n: u32, j: u32) -> SubsetMask {
    let mut s = SubsetMask::empty(n);
    for i in n - j..n {
        let t = rng.random_range(0..=i);
        if s.contains(t) {
            s.insert(i);
        } else {
            s.insert(t);
        }
    }
    s
}

struct EdgeIndex<'a> {
    h: &'a Hypergraph,
    set: HashSet<&'a SubsetMask>,
    by_subsets: bool,
}

impl<'a> EdgeIndex<'a> {
    fn new(h: &'a Hypergraph, j: u32) -> Self {
        let sub = binom_u64(u64::from(j), u64::from(h.k())).unwrap_or(u64::MAX);
        EdgeIndex {
            h,
            set: h.edges().iter().collect(),
            by_subsets: sub < h.m(),
        }
    }

    fn holds(&self, s: &SubsetMask, r: u32) -> bool {
        if !self.by_subsets {
            return self.h.edges_inside(s).take(r as usize).count() >= r as usize;
        }
        let elems = s.to_vec();
        let n = self.h.n();
        let mut found = 0;
        for w in ksubset_words(elems.len() as u32, self.h.k()).expect("j <= 64") {
            let e = SubsetMask::from_elements(n, (0..elems.len()).filter(|i| w >> i & 1 == 1).map(|i| elems[i]))
                .expect("elements in range");
            if self.set.contains(&e) {
                found += 1;
                if found >= r {
                    return true;
                }
            }
        }
        r == 0
    }
}

/// `C(n, j) p_eval^j` times the fraction of uniform random `j`-subsets that
/// hold at least `r` edges, with a Hoeffding interval at 99.9%.
pub fn weight_level_restricted_mc(
    h: &Hypergraph,
    r: u32,
    j: u32,
    p_eval: f64,
    trials: u64,
    seed: &SeedSpec,
) -> Result<WeightEstimate> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least {MIN_MC_TRIALS} trials, got {trials}"
        )));
    }
    let n = h.n();
    if j > n {
        return Err(Error::Domain(format!("level {j} exceeds ground set size {n}")));
    }
    let possible = binom_u64(u64::from(j), u64::from(h.k())).unwrap_or(u64::MAX) >= u64::from(r);
    let hits: u64 = if !possible {
        0
    } else {
        let index = EdgeIndex::new(h, j);
        let chunks = trials.div_ceil(MC_CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = seed.child(c).rng();
                let len = MC_CHUNK.min(trials - c * MC_CHUNK);
                (0..len)
                    .filter(|_| index.holds(&random_subset(&mut rng, n, j), r))
                    .count() as u64
            })
            .sum()
    };
    let prefactor = LogScalar::from_ln(ln_binom(u64::from(n), u64::from(j))) * ln_p(p_eval).powi(j);
    let (lo, hi) = hoeffding_interval(hits, trials, MC_CONFIDENCE);
    let log_value = prefactor * LogScalar::from_f64(hits as f64 / trials as f64);
    Ok(WeightEstimate {
        value: log_value.to_f64(),
        kind: WeightKind::MonteCarlo,
        ci_low: (prefactor * LogScalar::from_f64(lo)).to_f64(),
        ci_high: (prefactor * LogScalar::from_f64(hi)).to_f64(),
        trials,
        log_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Exact,
    MonteCarlo,
    Auto,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartWeight {
    pub part: String,
    pub j: Option<u32>,
    pub mode: Option<LevelMode>,
    #[serde(flatten)]
    pub estimate: WeightEstimate,
    /// Per-part slot in the final union bound: `2e^3/L` for `G_0`,
    /// `(2e^3/L)^j` for level `j`.
    pub target: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverWeight {
    #[serde(flatten)]
    pub cover: CoverSummary,
    pub p_eval: f64,
    pub total: WeightEstimate,
    pub parts: Vec<PartWeight>,
}

/// `w(G, p/L)` as the sum of its parts. Parts are disjoint (each has its own
/// set size) so the weights add; interval endpoints add as well.
pub fn weight_cover(
    h: &Hypergraph,
    r: u32,
    cover: &Cover,
    mode: WeightMode,
    trials: u64,
    seed: &SeedSpec,
) -> Result<CoverWeight> {
    let l = cover.covering_constant;
    let p_eval = cover.density.p / l;
    let mut parts = Vec::new();
    if cover.kind != CoverKind::Empty {
        parts.push(PartWeight {
            part: "G0".into(),
            j: None,
            mode: None,
            estimate: weight_g0(cover, p_eval),
            target: 2.0 * E.powi(3) / l,
        });
        for level in &cover.levels {
            let j = level.j;
            let estimate = match level.mode {
                LevelMode::Full => weight_level_full(h.n(), j, p_eval)?,
                LevelMode::Restricted => match mode {
                    WeightMode::Exact => weight_level_restricted_exact(h, r, j, p_eval)?,
                    WeightMode::MonteCarlo => {
                        weight_level_restricted_mc(h, r, j, p_eval, trials, &seed.child(u64::from(j)))?
                    }
                    WeightMode::Auto if restricted_exact_feasible(h.n(), j) => {
                        weight_level_restricted_exact(h, r, j, p_eval)?
                    }
                    WeightMode::Auto => weight_level_restricted_mc(h, r, j, p_eval, trials, &seed.child(u64::from(j)))?,
                },
            };
            parts.push(PartWeight {
                part: format!("G{j}"),
                j: Some(j),
                mode: Some(level.mode),
                estimate,
                target: (2.0 * E.powi(3) / l).powi(j as i32),
            });
        }
    }
    let mut total = WeightEstimate::zero(WeightKind::Exact);
    for part in &parts {
        let e = &part.estimate;
        total.log_value = total.log_value + e.log_value;
        total.ci_low += e.ci_low;
        total.ci_high += e.ci_high;
        total.trials = total.trials.max(e.trials);
        if e.kind == WeightKind::MonteCarlo {
            total.kind = WeightKind::MonteCarlo;
        }
    }
    total.value = total.log_value.to_f64();
    if total.kind != WeightKind::MonteCarlo {
        total.ci_low = total.value;
        total.ci_high = total.value;
    }
    Ok(CoverWeight {
        cover: cover.summary(),
        p_eval,
        total,
        parts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedWeight {
    pub value: f64,
    /// The value is the tail-bound upper estimate, not the exact mean.
    pub bound_only: bool,
    #[serde(skip)]
    pub log_value: LogScalar,
}

fn check_level(n: u32, k: u32, m: u64, j: u32) -> Result<()> {
    if j < k + 1 || j > n {
        return Err(Error::Precondition(format!("level {j} outside {}..={n}", k + 1)));
    }
    let edges_fit = binom_u64(u64::from(n), u64::from(k)).is_none_or(|t| m <= t);
    if !edges_fit {
        return Err(Error::Precondition(format!("m = {m} exceeds C({n},{k})")));
    }
    Ok(())
}

/// `C(n, j) P(Hyp(C(n,k), C(j,k), m) >= r)`, the expected number of
/// `j`-subsets holding at least `r` of the `m` uniform edges.
pub fn expected_restricted_count(n: u32, k: u32, m: u64, r: u32, j: u32) -> Result<BigRational> {
    check_level(n, k, m, j)?;
    let total =
        binom_u64(u64::from(n), u64::from(k)).ok_or_else(|| Error::Capacity(format!("C({n},{k}) exceeds 64 bits")))?;
    let inside = binom_u64(u64::from(j), u64::from(k)).expect("j <= n");
    let params = HypergeomParams::new(total, inside, m)?;
    Ok(rational_from_uint(binom(u64::from(n), u64::from(j))) * tail(&params, u64::from(r)))
}

/// `E[w(G_j, p/L)]` for a restricted level under the uniform `m`-edge model.
///
/// Exact when `C(n,k) <= 10^4`; otherwise the upper estimate
/// `C(n,j) (C(j,k)/C(n,k))^r C(m,r) (p/L)^j`, flagged `bound_only`.
pub fn expected_weight_level(n: u32, k: u32, m: u64, r: u32, j: u32, covering_constant: f64) -> Result<ExpectedWeight> {
    check_level(n, k, m, j)?;
    let density = crate::cover::compute_p(r, m, k);
    let zero = ExpectedWeight {
        value: 0.0,
        bound_only: false,
        log_value: LogScalar::ZERO,
    };
    let inside = binom_u64(u64::from(j), u64::from(k)).unwrap_or(u64::MAX);
    if density.upset_empty || u64::from(r) > inside.min(m) {
        return Ok(zero);
    }
    let scale = ln_p(density.p / covering_constant).powi(j);
    let exact = binom_u64(u64::from(n), u64::from(k)).is_some_and(|t| t <= EXACT_MOMENT_LIMIT);
    if exact {
        let c = expected_restricted_count(n, k, m, r, j)?;
        let log_value = LogScalar::from_rational(&c) * scale;
        return Ok(ExpectedWeight {
            value: log_value.to_f64(),
            bound_only: false,
            log_value,
        });
    }
    let (nn, kk, jj, rr) = (u64::from(n), u64::from(k), u64::from(j), u64::from(r));
    let ln = ln_binom(nn, jj) + f64::from(r) * (ln_binom(jj, kk) - ln_binom(nn, kk)) + ln_binom(m, rr);
    let log_value = LogScalar::from_ln(ln) * scale;
    Ok(ExpectedWeight {
        value: log_value.to_f64(),
        bound_only: true,
        log_value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelVariance {
    /// `Var(w(G_j, p/L))`
    pub value: f64,
    /// Variance of the number of `j`-subsets holding at least `r` edges.
    #[serde(serialize_with = "serialize_rational")]
    pub count_variance: BigRational,
    /// Contribution of the pairs sharing fewer than `k` vertices.
    #[serde(serialize_with = "serialize_rational")]
    pub small_overlap_part: BigRational,
}

/// `Var(w(G_j, p/L))` summed exactly over the overlap `ℓ = |S_1 ∩ S_2|`.
pub fn exact_variance_level(n: u32, k: u32, m: u64, r: u32, j: u32, covering_constant: f64) -> Result<LevelVariance> {
    check_level(n, k, m, j)?;
    let total = binom_u64(u64::from(n), u64::from(k)).unwrap_or(u64::MAX);
    if total > EXACT_MOMENT_LIMIT {
        return Err(Error::Capacity(format!(
            "exact variance needs C(n,k) <= {EXACT_MOMENT_LIMIT}, got C({n},{k}) = {total}"
        )));
    }
    let (nn, jj, kk) = (u64::from(n), u64::from(j), u64::from(k));
    let pairs: Vec<(u64, BigRational)> = (0..=jj)
        .into_par_iter()
        .filter(|&ell| 2 * jj - ell <= nn)
        .map(|ell| {
            let mult = binom(nn, jj) * binom(jj, ell) * binom(nn - jj, jj - ell);
            cov_overlap(nn, jj, ell, kk, m, u64::from(r)).map(|c| (ell, rational_from_uint(mult) * c))
        })
        .collect::<Result<_>>()?;
    let mut count_variance = BigRational::zero();
    let mut small_overlap_part = BigRational::zero();
    for (ell, term) in pairs {
        if ell < kk {
            small_overlap_part += &term;
        }
        count_variance += term;
    }
    let density = crate::cover::compute_p(r, m, k);
    let scale = ln_p(density.p / covering_constant).powi(2 * j);
    let value = (LogScalar::from_rational(&count_variance) * scale).to_f64();
    Ok(LevelVariance {
        value,
        count_variance,
        small_overlap_part,
    })
}

/// `C(m, ⌈r/2⌉) (p/L)^(k ⌈r/2⌉)`, the counting bound on `w(G_0, p/L)`.
pub fn g0_counting_bound(k: u32, m: u64, r: u32, covering_constant: f64) -> LogScalar {
    let c = half_up(r);
    let p = crate::cover::compute_p(r, m, k).p;
    LogScalar::from_ln(ln_binom(m, u64::from(c))) * ln_p(p / covering_constant).powi(k * c)
}
