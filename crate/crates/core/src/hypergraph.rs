//! k-uniform hypergraphs, the two random models, and the fractional function
//! `g = (1/r) * 1_H`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactmath::{binom_u128, binom_u64};
use crate::seed::SeedSpec;
use crate::stats::{chi_square_uniform, ChiSquareResult};
use crate::subsets::{colex_rank, colex_unrank, SubsetMask};

/// A k-uniform hypergraph on `{0..n}` with edges kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    n: u32,
    k: u32,
    edges: Vec<SubsetMask>,
}

/// JSON interchange form: 0-based vertices ascending inside each edge,
/// edges in lexicographic order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypergraphDoc {
    pub n: u32,
    pub k: u32,
    pub edges: Vec<Vec<u32>>,
}

impl Hypergraph {
    /// Validates and sorts; duplicate edges are an error.
    pub fn new(n: u32, k: u32, mut edges: Vec<SubsetMask>) -> Result<Self> {
        for e in &edges {
            if e.width() != n {
                return Err(Error::Validation(format!("edge {e:?} has width {} != {n}", e.width())));
            }
            if e.len() != k {
                return Err(Error::Validation(format!("edge {e:?} does not have {k} vertices")));
            }
        }
        edges.sort();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Hypergraph { n, k, edges })
    }

    pub fn empty(n: u32, k: u32) -> Self {
        Hypergraph { n, k, edges: vec![] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u64 {
        self.edges.len() as u64
    }

    pub fn edges(&self) -> &[SubsetMask] {
        &self.edges
    }

    /// Raw words of the edges when `n <= 64`.
    pub fn edge_words(&self) -> Option<Vec<u64>> {
        self.edges.iter().map(SubsetMask::as_u64).collect()
    }

    /// Number of edges contained in `s`.
    pub fn count_inside(&self, s: &SubsetMask) -> u64 {
        self.edges.iter().filter(|e| e.is_subset_of(s)).count() as u64
    }

    /// Edges contained in `s`.
    pub fn edges_inside<'a>(&'a self, s: &'a SubsetMask) -> impl Iterator<Item = &'a SubsetMask> + 'a {
        self.edges.iter().filter(move |e| e.is_subset_of(s))
    }

    pub fn to_doc(&self) -> HypergraphDoc {
        HypergraphDoc {
            n: self.n,
            k: self.k,
            edges: self.edges.iter().map(SubsetMask::to_vec).collect(),
        }
    }

    pub fn from_doc(doc: &HypergraphDoc) -> Result<Self> {
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            if e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!("edge {e:?} is not strictly ascending")));
            }
            edges.push(SubsetMask::from_elements(doc.n, e.iter().copied())?);
        }
        Hypergraph::new(doc.n, doc.k, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HypergraphDoc = serde_json::from_str(text)?;
        Hypergraph::from_doc(&doc)
    }
}

/// `g = (1/r) * 1_H`.
#[derive(Debug, Clone)]
pub struct GFunction {
    pub hypergraph: Hypergraph,
    pub r: u32,
}

impl GFunction {
    pub fn new(hypergraph: Hypergraph, r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("r must be at least 1".into()));
        }
        Ok(GFunction { hypergraph, r })
    }
}

/// `S` is in the upset of `g` iff it contains at least `r` edges.
pub fn member_upset_g(s: &SubsetMask, g: &GFunction) -> bool {
    let mut hits = 0u32;
    for e in g.hypergraph.edges() {
        if e.is_subset_of(s) {
            hits += 1;
            if hits >= g.r {
                return true;
            }
        }
    }
    false
}

fn edge_total(n: u32, k: u32) -> Result<u128> {
    binom_u128(u64::from(n), u64::from(k)).ok_or_else(|| Error::Capacity(format!("C({n},{k}) exceeds 128 bits")))
}

/// Uniform `m`-edge hypergraph: `m` distinct colex ranks drawn by a partial
/// Fisher-Yates shuffle over the implicit array `0..C(n,k)`, with displaced
/// entries kept in a hash map, then unranked.
pub fn sample_hnm(n: u32, k: u32, m: u64, seed: &SeedSpec) -> Result<Hypergraph> {
    let total = edge_total(n, k)?;
    if u128::from(m) > total {
        return Err(Error::Capacity(format!("m = {m} exceeds C({n},{k}) = {total}")));
    }
    let mut rng = seed.rng();
    let mut displaced: HashMap<u128, u128> = HashMap::with_capacity(2 * m as usize);
    let mut edges = Vec::with_capacity(m as usize);
    for i in 0..u128::from(m) {
        let j = rng.random_range(i..total);
        let at_j = displaced.get(&j).copied().unwrap_or(j);
        let at_i = displaced.get(&i).copied().unwrap_or(i);
        displaced.insert(j, at_i);
        edges.push(colex_unrank(n, k, at_j)?);
    }
    Hypergraph::new(n, k, edges)
}

/// Binomial model: each k-subset independently with probability `q`.
/// Ranks are visited with geometric skips, so the cost is proportional to
/// the number of edges produced.
pub fn sample_hnq(n: u32, k: u32, q: f64, seed: &SeedSpec) -> Result<Hypergraph> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("edge probability {q} outside [0, 1]")));
    }
    let total = edge_total(n, k)?;
    let mut edges = Vec::new();
    if q == 0.0 {
        return Ok(Hypergraph::empty(n, k));
    }
    if q == 1.0 {
        if total > 1 << 26 {
            return Err(Error::Capacity(format!("complete hypergraph with {total} edges")));
        }
        for rank in 0..total {
            edges.push(colex_unrank(n, k, rank)?);
        }
        return Hypergraph::new(n, k, edges);
    }
    let mut rng = seed.rng();
    let ln_miss = (-q).ln_1p();
    let mut next: u128 = 0;
    loop {
        // Number of failures before the next success; u in (0, 1].
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / ln_miss).floor();
        if !gap.is_finite() || gap >= (total - next) as f64 {
            break;
        }
        next += gap as u128;
        if next >= total {
            break;
        }
        edges.push(colex_unrank(n, k, next)?);
        next += 1;
        if next >= total {
            break;
        }
    }
    Hypergraph::new(n, k, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalBucket {
    pub m: u64,
    pub samples: u64,
    pub outcomes: u64,
    pub chi_square: ChiSquareResult,
    pub status: BucketStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalReport {
    pub n: u32,
    pub k: u32,
    pub q: f64,
    pub trials: u64,
    pub alpha: f64,
    pub buckets: Vec<ConditionalBucket>,
}

impl ConditionalReport {
    /// No bucket failed; inconclusive buckets do not count against.
    pub fn passes(&self) -> bool {
        self.buckets.iter().all(|b| b.status != BucketStatus::Fail)
    }
}

/// Minimum expected count per cell for a bucket to be judged.
const MIN_EXPECTED_PER_CELL: f64 = 5.0;

/// Samples `H(n,q)` `trials` times and, for every observed edge count `m`,
/// tests whether the edge sets with `m` edges are uniformly distributed, i.e.
/// whether `H(n,q)` conditioned on `m` edges is `H(n,m)`.
pub fn conditional_equivalence_test(
    n: u32,
    k: u32,
    q: f64,
    trials: u64,
    master_seed: u64,
    alpha: f64,
) -> Result<ConditionalReport> {
    let total = binom_u64(u64::from(n), u64::from(k)).unwrap_or(u64::MAX);
    if total > 12 {
        return Err(Error::Capacity(format!("C({n},{k}) = {total} > 12 edge slots")));
    }
    let cells = 1usize << total;
    let counts = (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; cells],
            |mut acc, t| -> Result<Vec<u64>> {
                let h = sample_hnq(n, k, q, &SeedSpec::new(master_seed, t))?;
                let mut idx = 0usize;
                for e in h.edges() {
                    idx |= 1 << colex_rank(e).expect("small rank");
                }
                acc[idx] += 1;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let mut buckets = Vec::new();
    for m in 0..=total {
        let cell_counts: Vec<u64> = (0..cells)
            .filter(|&o| u64::from((o as u64).count_ones()) == m)
            .map(|o| counts[o])
            .collect();
        let samples: u64 = cell_counts.iter().sum();
        if samples == 0 {
            continue;
        }
        let chi = chi_square_uniform(&cell_counts);
        let expected = samples as f64 / cell_counts.len() as f64;
        let status = if cell_counts.len() > 1 && expected < MIN_EXPECTED_PER_CELL {
            BucketStatus::Inconclusive
        } else if chi.p_value >= alpha {
            BucketStatus::Pass
        } else {
            BucketStatus::Fail
        };
        buckets.push(ConditionalBucket {
            m,
            samples,
            outcomes: cell_counts.len() as u64,
            chi_square: chi,
            status,
        });
    }
    Ok(ConditionalReport {
        n,
        k,
        q,
        trials,
        alpha,
        buckets,
    })
}
