//! Expectation threshold `q(F)` and fractional expectation threshold
//! `q_f(F)` of small explicit monotone families.

pub mod lp;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::subsets::SubsetMask;

/// Largest ground set for the fractional problem.
pub const FRACTIONAL_MAX_N: u32 = 14;
/// Largest ground set for the integer problem.
pub const INTEGER_MAX_N: u32 = 10;
pub const MIN_TOL: f64 = 1e-6;
/// Branch-and-bound node budget.
pub const INTEGER_NODE_BUDGET: u64 = 2_000_000;
const FEASIBILITY_SLACK: f64 = 1e-9;

/// The upset generated by an antichain of minimal sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneFamily {
    n: u32,
    minimal_sets: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub n: u32,
    pub minimal_sets: Vec<Vec<u32>>,
}

impl MonotoneFamily {
    pub fn new(n: u32, sets: Vec<SubsetMask>) -> Result<Self> {
        if n > 63 {
            return Err(Error::Capacity(format!("families limited to n <= 63, got {n}")));
        }
        if sets.is_empty() {
            return Err(Error::Validation("a family needs at least one minimal set".into()));
        }
        let mut words = Vec::with_capacity(sets.len());
        for s in &sets {
            if s.width() != n {
                return Err(Error::Validation(format!("set {s:?} is not over {n} elements")));
            }
            if s.is_empty() {
                return Err(Error::Validation("the empty set has no cover by nonempty sets".into()));
            }
            words.push(s.as_u64().expect("n <= 63"));
        }
        words.sort_unstable();
        for (i, &a) in words.iter().enumerate() {
            for &b in &words[i + 1..] {
                if a & b == a || a & b == b {
                    return Err(Error::Validation(format!(
                        "minimal sets {:?} and {:?} are comparable; not an antichain",
                        SubsetMask::from_u64(n, a),
                        SubsetMask::from_u64(n, b)
                    )));
                }
            }
        }
        Ok(MonotoneFamily { n, minimal_sets: words })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn minimal_sets(&self) -> Vec<SubsetMask> {
        self.minimal_sets
            .iter()
            .map(|&w| SubsetMask::from_u64(self.n, w))
            .collect()
    }

    /// `S` lies in the family.
    pub fn contains(&self, s: &SubsetMask) -> bool {
        let w = s.as_u64().expect("n <= 63");
        self.minimal_sets.iter().any(|&m| m & !w == 0)
    }

    pub fn to_doc(&self) -> FamilyDoc {
        FamilyDoc {
            n: self.n,
            minimal_sets: self.minimal_sets().iter().map(|s| s.to_vec()).collect(),
        }
    }

    pub fn from_doc(doc: &FamilyDoc) -> Result<Self> {
        let sets = doc
            .minimal_sets
            .iter()
            .map(|s| SubsetMask::from_elements(doc.n, s.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.n, sets)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FamilyDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("plain data")
    }
}

/// Antichain of the minimal members among `draws` uniform nonempty subsets.
pub fn random_antichain(n: u32, draws: usize, seed: &SeedSpec) -> Result<MonotoneFamily> {
    if n == 0 || n > 63 {
        return Err(Error::Domain(format!("random antichains need 1 <= n <= 63, got {n}")));
    }
    let mut rng = seed.rng();
    let top = (1u64 << n) - 1;
    let drawn: BTreeSet<u64> = (0..draws.max(1)).map(|_| rng.random_range(1..=top)).collect();
    let minimal: Vec<SubsetMask> = drawn
        .iter()
        .filter(|&&a| !drawn.iter().any(|&b| b != a && b & a == b))
        .map(|&a| SubsetMask::from_u64(n, a))
        .collect();
    MonotoneFamily::new(n, minimal)
}

/// Which sets may carry weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    /// Nonempty subsets of minimal sets.
    SubsetsOfMinimal,
    /// Every nonempty subset of the ground set.
    All,
}

fn pool_words(f: &MonotoneFamily, pool: Pool) -> Vec<u64> {
    let mut out = BTreeSet::new();
    match pool {
        Pool::All => out.extend(1..(1u64 << f.n)),
        Pool::SubsetsOfMinimal => {
            for &s in &f.minimal_sets {
                let mut t = s;
                while t != 0 {
                    out.insert(t);
                    t = (t - 1) & s;
                }
            }
        }
    }
    out.into_iter().collect()
}

fn set_weight(t: u64, p: f64) -> f64 {
    p.powi(t.count_ones() as i32)
}

/// Constraint rows: for each minimal set, the candidate columns inside it.
fn covering_rows(minimal: &[u64], cands: &[u64]) -> Vec<Vec<usize>> {
    minimal
        .iter()
        .map(|&s| (0..cands.len()).filter(|&i| cands[i] & s == cands[i]).collect())
        .collect()
}

/// `g: 2^X -> [0,1]` stored on its support.
#[derive(Debug, Clone, Serialize)]
pub struct FractionalCover {
    pub values: Vec<(Vec<u32>, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FractionalResult {
    pub weight: f64,
    /// Optimal value of the dual packing LP.
    pub lower_bound: f64,
    /// Smallest `Σ_{T⊆S} g(T) - 1` over minimal `S`, checked directly.
    pub min_slack: f64,
    pub witness: FractionalCover,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p = {p} outside (0, 1]")));
    }
    Ok(())
}

/// `min w(g, p)` over `g` with `F ⊆ <g>`.
pub fn min_fractional_weight(f: &MonotoneFamily, p: f64) -> Result<FractionalResult> {
    min_fractional_weight_in(f, p, Pool::SubsetsOfMinimal)
}

pub fn min_fractional_weight_in(f: &MonotoneFamily, p: f64, pool: Pool) -> Result<FractionalResult> {
    if f.n > FRACTIONAL_MAX_N {
        return Err(Error::Capacity(format!(
            "fractional threshold limited to n <= {FRACTIONAL_MAX_N}, got {}",
            f.n
        )));
    }
    check_p(p)?;
    let cands = pool_words(f, pool);
    let cost: Vec<f64> = cands.iter().map(|&t| set_weight(t, p)).collect();
    let rows = covering_rows(&f.minimal_sets, &cands);
    let sol = lp::solve_covering(&rows, &cost)?;
    let mut g = sol.x;

    // Direct re-check, independent of the pivoting; top up any shortfall on
    // the minimal set itself.
    for &s in &f.minimal_sets {
        let covered: f64 = cands.iter().zip(&g).filter(|(&t, _)| t & s == t).map(|(_, v)| v).sum();
        if covered < 1.0 - FEASIBILITY_SLACK {
            let i = cands.binary_search(&s).expect("minimal set is in every pool");
            g[i] = (g[i] + 1.0 - covered).min(1.0);
        }
    }
    let min_slack = f
        .minimal_sets
        .iter()
        .map(|&s| {
            cands
                .iter()
                .zip(&g)
                .filter(|(&t, _)| t & s == t)
                .map(|(_, v)| v)
                .sum::<f64>()
                - 1.0
        })
        .fold(f64::INFINITY, f64::min);
    let weight = cost.iter().zip(&g).map(|(c, v)| c * v).sum();
    let values = cands
        .iter()
        .zip(&g)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (SubsetMask::from_u64(f.n, t).to_vec(), v))
        .collect();
    Ok(FractionalResult {
        weight,
        lower_bound: sol.dual_value,
        min_slack,
        witness: FractionalCover { values },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegerResult {
    pub weight: f64,
    pub witness: Vec<Vec<u32>>,
    pub nodes: u64,
}

/// Nonempty intersections of nonempty subfamilies of the minimal sets.
/// Replacing a cover member `T` by the intersection of the minimal sets
/// containing it keeps coverage and cannot raise `p^|T|`, so these suffice.
fn intersection_closure(minimal: &[u64]) -> Vec<u64> {
    let mut closed: BTreeSet<u64> = minimal.iter().copied().collect();
    let mut frontier: Vec<u64> = closed.iter().copied().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &a in &frontier {
            for &s in minimal {
                let c = a & s;
                if c != 0 && closed.insert(c) {
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    closed.into_iter().collect()
}

struct Search<'a> {
    minimal: &'a [u64],
    cands: Vec<u64>,
    cost: Vec<f64>,
    /// `inside[s]`: candidates contained in minimal set `s`, cheapest first.
    inside: Vec<Vec<usize>>,
    best: f64,
    best_set: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn lower_bound(&self, uncovered: &[usize], excluded: &[bool]) -> Option<f64> {
        let mut cols: HashMap<usize, usize> = HashMap::new();
        let mut rows = Vec::with_capacity(uncovered.len());
        for &s in uncovered {
            let row: Vec<usize> = self.inside[s]
                .iter()
                .filter(|&&t| !excluded[t])
                .map(|&t| {
                    let next = cols.len();
                    *cols.entry(t).or_insert(next)
                })
                .collect();
            if row.is_empty() {
                return None;
            }
            rows.push(row);
        }
        let mut cost = vec![0.0; cols.len()];
        for (&t, &c) in &cols {
            cost[c] = self.cost[t];
        }
        lp::solve_covering(&rows, &cost).ok().map(|s| s.dual_value)
    }

    fn run(&mut self, chosen: &mut Vec<usize>, cost: f64, excluded: &mut Vec<bool>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget {
                budget: self.budget,
                nodes: self.nodes,
                found: self.best_set.len(),
            });
        }
        let uncovered: Vec<usize> = (0..self.minimal.len())
            .filter(|&s| !chosen.iter().any(|&t| self.cands[t] & self.minimal[s] == self.cands[t]))
            .collect();
        if uncovered.is_empty() {
            if cost < self.best {
                self.best = cost;
                self.best_set = chosen.clone();
            }
            return Ok(());
        }
        let Some(lb) = self.lower_bound(&uncovered, excluded) else {
            return Ok(());
        };
        if cost + lb >= self.best - 1e-12 * self.best.max(1.0) {
            return Ok(());
        }
        let &branch = uncovered
            .iter()
            .min_by_key(|&&s| self.inside[s].iter().filter(|&&t| !excluded[t]).count())
            .expect("nonempty");
        let options: Vec<usize> = self.inside[branch].iter().copied().filter(|&t| !excluded[t]).collect();
        let mut newly = Vec::new();
        for t in options {
            chosen.push(t);
            let r = self.run(chosen, cost + self.cost[t], excluded);
            chosen.pop();
            r?;
            excluded[t] = true;
            newly.push(t);
        }
        for t in newly {
            excluded[t] = false;
        }
        Ok(())
    }
}

/// `min w(G, p)` over families `G` of nonempty sets with `F ⊆ <G>`.
pub fn min_integer_weight(f: &MonotoneFamily, p: f64) -> Result<IntegerResult> {
    if f.n > INTEGER_MAX_N {
        return Err(Error::Capacity(format!(
            "integer threshold limited to n <= {INTEGER_MAX_N}, got {}",
            f.n
        )));
    }
    check_p(p)?;
    let cands = intersection_closure(&f.minimal_sets);
    let cost: Vec<f64> = cands.iter().map(|&t| set_weight(t, p)).collect();
    let inside: Vec<Vec<usize>> = f
        .minimal_sets
        .iter()
        .map(|&s| {
            let mut v: Vec<usize> = (0..cands.len()).filter(|&i| cands[i] & s == cands[i]).collect();
            v.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
            v
        })
        .collect();
    // The minimal sets themselves form a feasible cover.
    let start: Vec<usize> = f
        .minimal_sets
        .iter()
        .map(|s| cands.binary_search(s).expect("minimal sets are candidates"))
        .collect();
    let mut search = Search {
        minimal: &f.minimal_sets,
        best: start.iter().map(|&i| cost[i]).sum(),
        best_set: start,
        cands,
        cost,
        inside,
        nodes: 0,
        budget: INTEGER_NODE_BUDGET,
    };
    let mut excluded = vec![false; search.cands.len()];
    search.run(&mut Vec::new(), 0.0, &mut excluded)?;
    let mut witness: Vec<Vec<u32>> = search
        .best_set
        .iter()
        .map(|&i| SubsetMask::from_u64(f.n, search.cands[i]).to_vec())
        .collect();
    witness.sort();
    Ok(IntegerResult {
        weight: search.best,
        witness,
        nodes: search.nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Integer,
    Fractional,
}

/// Final bisection bracket: the predicate holds at `lo` and fails at `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn min_weight(f: &MonotoneFamily, kind: ThresholdKind, p: f64) -> Result<f64> {
    match kind {
        ThresholdKind::Integer => min_integer_weight(f, p).map(|r| r.weight),
        ThresholdKind::Fractional => min_fractional_weight(f, p).map(|r| r.weight),
    }
}

pub fn bisection_steps(tol: f64) -> u32 {
    (1.0 / tol).log2().ceil() as u32 + 2
}

/// Largest `p` with `min_weight(F, p) <= 1/2`, by bisection on `[0, 1]`.
pub fn q_threshold(f: &MonotoneFamily, kind: ThresholdKind, tol: f64) -> Result<Threshold> {
    if !(MIN_TOL..1.0).contains(&tol) {
        return Err(Error::Domain(format!("tol = {tol} must lie in [{MIN_TOL}, 1)")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..bisection_steps(tol) {
        let mid = 0.5 * (lo + hi);
        if min_weight(f, kind, mid)? <= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold {
        value: 0.5 * (lo + hi),
        lo,
        hi,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub q: f64,
    pub q_f: f64,
    pub ratio: f64,
    pub tol: f64,
    pub q_bracket: Threshold,
    pub q_f_bracket: Threshold,
    /// `[q_f.lo / q.hi, q_f.hi / q.lo]`
    pub ratio_interval: (f64, f64),
    /// False when `q < 2 tol`, where the ratio interval is too wide to use.
    pub ratio_reliable: bool,
}

pub fn talagrand_ratio(f: &MonotoneFamily, tol: f64) -> Result<ThresholdReport> {
    let q = q_threshold(f, ThresholdKind::Integer, tol)?;
    let qf = q_threshold(f, ThresholdKind::Fractional, tol)?;
    let ratio_interval = (qf.lo / q.hi, if q.lo > 0.0 { qf.hi / q.lo } else { f64::INFINITY });
    Ok(ThresholdReport {
        q: q.value,
        q_f: qf.value,
        ratio: qf.value / q.value,
        tol,
        q_bracket: q,
        q_f_bracket: qf,
        ratio_interval,
        ratio_reliable: q.value >= 2.0 * tol,
    })
}
