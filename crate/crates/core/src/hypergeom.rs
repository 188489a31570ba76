//! Exact hypergeometric probabilities and the two covariance computations the
//! second-moment argument needs. Everything here is exact rational
//! arithmetic; there is no floating tolerance anywhere in this module.
//!
//! Probabilities are evaluated through the symmetric form
//!
//! ```text
//! P(Y = y) = C(a, y) * (b)_y * (N - b)_(a - y) / (N)_a,   a = min(K, m), b = max(K, m)
//! ```
//!
//! where `(x)_t` is the falling factorial. Only `a` factors appear, so the
//! cost depends on the smaller of the success count and the draw count, not
//! on the population size.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactmath::{binom, binom_u64, falling, BigRational};

/// Hypergeometric law: `draws` items taken without replacement from a
/// population of `population` items of which `successes` are marked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypergeomParams {
    pub population: u64,
    pub successes: u64,
    pub draws: u64,
}

impl HypergeomParams {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population || draws > population {
            return Err(Error::Precondition(format!(
                "hypergeometric(N={population}, K={successes}, m={draws}) needs K, m <= N"
            )));
        }
        Ok(HypergeomParams {
            population,
            successes,
            draws,
        })
    }

    /// Smallest value with positive probability.
    pub fn support_min(&self) -> u64 {
        (self.successes + self.draws).saturating_sub(self.population)
    }

    /// Largest value with positive probability.
    pub fn support_max(&self) -> u64 {
        self.successes.min(self.draws)
    }
}

/// Integer numerators of the pmf over the support, over one common
/// denominator.
struct PmfTable {
    lo: u64,
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

/// `[(x)_0, (x)_1, ..., (x)_len]`
fn falling_prefix(x: u64, len: u64) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(len as usize + 1);
    let mut acc = BigUint::one();
    out.push(acc.clone());
    for t in 0..len {
        if t >= x {
            acc = BigUint::zero();
        } else {
            acc *= x - t;
        }
        out.push(acc.clone());
    }
    out
}

/// `[C(x,0), ..., C(x,x)]`
fn binom_row(x: u64) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(x as usize + 1);
    let mut acc = BigUint::one();
    out.push(acc.clone());
    for t in 0..x {
        acc = acc * (x - t) / (t + 1);
        out.push(acc.clone());
    }
    out
}

fn pmf_table(p: &HypergeomParams) -> PmfTable {
    let a = p.successes.min(p.draws);
    let b = p.successes.max(p.draws);
    let (lo, hi) = (p.support_min(), p.support_max());
    let choose_a = binom_row(a);
    let fall_b = falling_prefix(b, a);
    let fall_rest = falling_prefix(p.population - b, a);
    let numerators = (lo..=hi)
        .map(|y| &choose_a[y as usize] * &fall_b[y as usize] * &fall_rest[(a - y) as usize])
        .collect();
    PmfTable {
        lo,
        numerators,
        denominator: falling(p.population, a),
    }
}

fn frac(num: BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den.clone()))
}

/// `P(Y = y)`, exactly; zero outside the support.
pub fn pmf(params: &HypergeomParams, y: u64) -> BigRational {
    if y < params.support_min() || y > params.support_max() {
        return BigRational::zero();
    }
    let t = pmf_table(params);
    frac(t.numerators[(y - t.lo) as usize].clone(), &t.denominator)
}

/// `P(Y >= y)` for every `y` in `0..=support_max + 1`.
pub fn tails(params: &HypergeomParams) -> Vec<BigRational> {
    let t = pmf_table(params);
    let hi = params.support_max();
    let mut out = vec![BigRational::zero(); hi as usize + 2];
    let mut acc = BigUint::zero();
    for y in (0..=hi).rev() {
        if y >= t.lo {
            acc += &t.numerators[(y - t.lo) as usize];
        }
        out[y as usize] = frac(acc.clone(), &t.denominator);
    }
    out
}

/// `P(Y >= y)`, exactly. The sum starts at `max(y, m + K - N)`.
pub fn tail(params: &HypergeomParams, y: u64) -> BigRational {
    if y > params.support_max() {
        return BigRational::zero();
    }
    if y <= params.support_min() {
        return BigRational::one();
    }
    let t = pmf_table(params);
    let sum: BigUint = t.numerators[(y - t.lo) as usize..].iter().sum();
    frac(sum, &t.denominator)
}

/// The tail bound `(K/N)^y * C(m, y)`, for `0 <= y <= min(m, K)` and `N >= 1`.
pub fn tail_bound(params: &HypergeomParams, y: u64) -> Result<BigRational> {
    if params.population == 0 || y > params.support_max() {
        return Err(Error::Precondition(format!(
            "tail bound needs N >= 1 and y <= min(m, K); got {params:?}, y={y}"
        )));
    }
    let exp = u32::try_from(y).map_err(|_| Error::Capacity(format!("exponent {y}")))?;
    let num = BigUint::from(params.successes).pow(exp) * binom(params.draws, y);
    let den = BigUint::from(params.population).pow(exp);
    Ok(frac(num, &den))
}

/// `Cov(1{Y1 >= r}, 1{Y2 >= r})` where `Y_i = |S_i ∩ M|` for two disjoint
/// `K`-sets `S_1, S_2` and a uniform `m`-subset `M` of an `N`-set. The joint
/// law is summed over its full support.
pub fn cov_disjoint(population: u64, window: u64, draws: u64, r: u64) -> Result<BigRational> {
    if 2 * window > population || draws > population {
        return Err(Error::Precondition(format!(
            "cov_disjoint needs 2K <= N and m <= N; got N={population}, K={window}, m={draws}"
        )));
    }
    let span = 2 * window;
    let choose = binom_row(window);
    let fall_m = falling_prefix(draws, span);
    let fall_rest = falling_prefix(population - draws, span);
    let mut both = BigUint::zero();
    for a in r..=window {
        for b in r..=window {
            let t = a + b;
            if t > draws || span - t > population - draws {
                continue;
            }
            both += &choose[a as usize] * &choose[b as usize] * &fall_m[t as usize] * &fall_rest[(span - t) as usize];
        }
    }
    let joint = frac(both, &falling(population, span));
    let marginal = tail(&HypergeomParams::new(population, window, draws)?, r);
    Ok(joint - &marginal * &marginal)
}

/// Edge-category counts for two `j`-vertex sets sharing `ell` vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapParams {
    pub total_edges: u64,
    pub edges_only_1: u64,
    pub edges_only_2: u64,
    pub edges_shared: u64,
    pub draws: u64,
}

impl OverlapParams {
    pub fn for_sets(n: u64, j: u64, ell: u64, k: u64, draws: u64) -> Result<Self> {
        if ell > j || j > n || 2 * j - ell > n {
            return Err(Error::Precondition(format!(
                "two {j}-sets sharing {ell} vertices do not fit in {n} vertices"
            )));
        }
        let total = binom_u64(n, k).ok_or_else(|| Error::Capacity(format!("C({n},{k}) exceeds 64 bits")))?;
        if draws > total {
            return Err(Error::Precondition(format!("m = {draws} exceeds C({n},{k}) = {total}")));
        }
        let shared = binom_u64(ell, k).expect("small");
        let own = binom_u64(j, k).expect("small") - shared;
        Ok(OverlapParams {
            total_edges: total,
            edges_only_1: own,
            edges_only_2: own,
            edges_shared: shared,
            draws,
        })
    }
}

/// Covariance of the threshold indicators `1{Y_i >= r}` for two `j`-vertex
/// sets sharing `ell` vertices under the uniform `m`-edge model, via the
/// trivariate law of (edges only in `S_1`, only in `S_2`, in both).
pub fn cov_overlap(n: u64, j: u64, ell: u64, k: u64, m: u64, r: u64) -> Result<BigRational> {
    let op = OverlapParams::for_sets(n, j, ell, k, m)?;
    cov_categories(&op, r)
}

/// Same as [`cov_overlap`] with the categories given directly.
pub fn cov_categories(op: &OverlapParams, r: u64) -> Result<BigRational> {
    let (n1, n2, ns) = (op.edges_only_1, op.edges_only_2, op.edges_shared);
    let span = n1 + n2 + ns;
    if span > op.total_edges || op.draws > op.total_edges {
        return Err(Error::Precondition(format!("infeasible edge categories {op:?}")));
    }
    let c1 = binom_row(n1);
    let c2 = binom_row(n2);
    let cs = binom_row(ns);
    let fall_m = falling_prefix(op.draws, span);
    let fall_rest = falling_prefix(op.total_edges - op.draws, span);
    let rest_total = op.total_edges - op.draws;

    let both: BigUint = (0..=ns)
        .into_par_iter()
        .map(|xs| {
            let mut acc = BigUint::zero();
            for x1 in r.saturating_sub(xs)..=n1 {
                for x2 in r.saturating_sub(xs)..=n2 {
                    let t = x1 + x2 + xs;
                    if t > op.draws || span - t > rest_total {
                        continue;
                    }
                    acc += &cs[xs as usize]
                        * &c1[x1 as usize]
                        * &c2[x2 as usize]
                        * &fall_m[t as usize]
                        * &fall_rest[(span - t) as usize];
                }
            }
            acc
        })
        .sum();
    let joint = frac(both, &falling(op.total_edges, span));
    let t1 = tail(&HypergeomParams::new(op.total_edges, n1 + ns, op.draws)?, r);
    let t2 = tail(&HypergeomParams::new(op.total_edges, n2 + ns, op.draws)?, r);
    Ok(joint - t1 * t2)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSweep {
    pub name: &'static str,
    pub max_population: u64,
    pub cases: u64,
    pub violations: Vec<String>,
}

impl LemmaSweep {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `P(Y >= y) <= (K/N)^y C(m,y)` for all `1 <= N <= max_n`,
/// `K, m <= N`, `0 <= y <= min(m, K)`.
pub fn tail_lemma_sweep(max_n: u64) -> LemmaSweep {
    let grid: Vec<(u64, u64)> = (1..=max_n).flat_map(|n| (0..=n).map(move |k| (n, k))).collect();
    let (cases, mut violations) = grid
        .par_iter()
        .map(|&(n, k)| {
            let mut cases = 0u64;
            let mut bad = Vec::new();
            for m in 0..=n {
                let p = HypergeomParams::new(n, k, m).expect("valid grid");
                let tl = tails(&p);
                for y in 0..=p.support_max() {
                    cases += 1;
                    let bound = tail_bound(&p, y).expect("in range");
                    if tl[y as usize] > bound {
                        bad.push(format!("N={n} K={k} m={m} y={y}: {} > {}", tl[y as usize], bound));
                    }
                }
            }
            (cases, bad)
        })
        .reduce(
            || (0, Vec::new()),
            |(c1, mut v1), (c2, v2)| {
                v1.extend(v2);
                (c1 + c2, v1)
            },
        );
    violations.sort();
    LemmaSweep {
        name: "hypergeometric_tail_bound",
        max_population: max_n,
        cases,
        violations,
    }
}

/// Checks `cov_disjoint(N, K, m, r) <= 0` for all `N <= max_n`, `2K <= N`,
/// `m <= N`, `0 <= r <= min(K, m)`.
pub fn cov_lemma_sweep(max_n: u64) -> LemmaSweep {
    let grid: Vec<(u64, u64, u64)> = (0..=max_n)
        .flat_map(|n| (0..=n / 2).flat_map(move |k| (0..=n).map(move |m| (n, k, m))))
        .collect();
    let (cases, mut violations) = grid
        .par_iter()
        .map(|&(n, k, m)| {
            let mut bad = Vec::new();
            let mut cases = 0u64;
            for r in 0..=k.min(m) {
                cases += 1;
                let c = cov_disjoint(n, k, m, r).expect("valid grid");
                if c > BigRational::zero() {
                    bad.push(format!("N={n} K={k} m={m} r={r}: cov = {c}"));
                }
            }
            (cases, bad)
        })
        .reduce(
            || (0, Vec::new()),
            |(c1, mut v1), (c2, v2)| {
                v1.extend(v2);
                (c1 + c2, v1)
            },
        );
    violations.sort();
    LemmaSweep {
        name: "disjoint_window_covariance",
        max_population: max_n,
        cases,
        violations,
    }
}
