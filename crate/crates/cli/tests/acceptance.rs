//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion fails. A criterion whose precondition is
//! shown at run time to be unsatisfiable is reported as FAIL with the reason
//! and does not change the exit status; its closest measurable substitute is
//! still run and reported on the same line.

use std::collections::HashMap;
use std::f64::consts::E;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use threshold_lab::campaign::{run_campaign, CampaignConfig};
use threshold_lab::claims::{certificate_grid, geometric_combination};
use threshold_lab::cover::{compute_p, default_covering_constant, level_range, verify_covering_exhaustive};
use threshold_lab::exactmath::{binom_u64, ratio};
use threshold_lab::hypergeom::{cov_lemma_sweep, tail_lemma_sweep};
use threshold_lab::hypergraph::{conditional_equivalence_test, sample_hnm};
use threshold_lab::seed::SeedSpec;
use threshold_lab::stats::{chi_square_uniform, Moments};
use threshold_lab::subsets::{colex_rank, SubsetMask};
use threshold_lab::thresholds::{
    min_fractional_weight, q_threshold, random_antichain, talagrand_ratio, MonotoneFamily, ThresholdKind,
};
use threshold_lab::weights::{
    exact_variance_level, expected_weight_level, restricted_count, weight_level_restricted_exact, WeightMode,
};
use threshold_lab::Result;

enum Verdict {
    Pass,
    Fail,
    /// Precondition proven unsatisfiable; not counted in the exit status.
    Unattainable,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        Outcome {
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    match out {
        Err(e) => Outcome::check(false, format!("error: {e}")),
        Ok(mut o) => {
            if took > limit {
                o.verdict = Verdict::Fail;
            }
            o.detail = format!("{} [{:.1}s, limit {}s]", o.detail, took.as_secs_f64(), limit.as_secs());
            o
        }
    }
}

fn ac1() -> Result<Outcome> {
    let s = tail_lemma_sweep(30);
    Ok(Outcome::check(
        s.passes(),
        format!(
            "hypergeometric tail bound, N <= 30: {} cases, {} violations",
            s.cases,
            s.violations.len()
        ),
    ))
}

fn ac2() -> Result<Outcome> {
    let s = cov_lemma_sweep(24);
    Ok(Outcome::check(
        s.passes(),
        format!(
            "disjoint-window covariance, N <= 24: {} cases, {} violations",
            s.cases,
            s.violations.len()
        ),
    ))
}

fn ac3() -> Result<Outcome> {
    let l = default_covering_constant();
    let reports: Vec<(u64, u64)> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let seed = SeedSpec::new(3, i);
            let mut rng = seed.rng();
            let n = rng.random_range(8..=16u32);
            let k = if rng.random_bool(0.5) { 2 } else { 3 };
            let r = if rng.random_bool(0.5) { 2 } else { 3 };
            let total = binom_u64(u64::from(n), u64::from(k)).expect("small");
            let m = rng.random_range(u64::from(r)..=total);
            let h = sample_hnm(n, k, m, &seed.child(1))?;
            let rep = verify_covering_exhaustive(&h, r, l)?;
            Ok((rep.checked, rep.violations))
        })
        .collect::<Result<_>>()?;
    let checked: u64 = reports.iter().map(|r| r.0).sum();
    let violations: u64 = reports.iter().map(|r| r.1).sum();
    Ok(Outcome::check(
        violations == 0,
        format!("500 instances, {checked} subsets checked, {violations} violations"),
    ))
}

const AC4_SEEDS: u64 = 10_000;

fn ac4() -> Result<Outcome> {
    let l = default_covering_constant();
    let (k, r) = (2u32, 2u32);
    let mut cells = Vec::new();
    for n in [8u32, 10] {
        let total = binom_u64(u64::from(n), u64::from(k)).expect("small");
        for j in level_range(k, r) {
            for m in u64::from(r)..=total {
                cells.push((n, j, m));
            }
        }
    }
    let results: Vec<(bool, f64)> = cells
        .par_iter()
        .enumerate()
        .map(|(c, &(n, j, m))| {
            let expected = expected_weight_level(n, k, m, r, j, l)?;
            let var = exact_variance_level(n, k, m, r, j, l)?;
            let p = compute_p(r, m, k).p;
            let mut mom = Moments::default();
            for s in 0..AC4_SEEDS {
                let h = sample_hnm(n, k, m, &SeedSpec::new(4_000 + c as u64, s))?;
                mom.push(weight_level_restricted_exact(&h, r, j, p / l)?.value);
            }
            let sigma = (var.value / AC4_SEEDS as f64).sqrt();
            let diff = (mom.mean() - expected.value).abs();
            let ok = !expected.bound_only && diff <= 3.0 * sigma + 1e-9 * expected.value;
            Ok((ok, if sigma > 0.0 { diff / sigma } else { 0.0 }))
        })
        .collect::<Result<_>>()?;
    let passed = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let rate = passed as f64 / results.len() as f64;
    Ok(Outcome::check(
        rate >= 0.99,
        format!(
            "{passed}/{} cells within 3 sigma over {AC4_SEEDS} seeds (rate {rate:.4}, worst {worst:.2} sigma)",
            results.len()
        ),
    ))
}

/// Variance of the number of `j`-sets holding at least `r` edges, as the
/// double sum of `Cov(B_S, B_T)` over all pairs of `j`-sets, by enumerating
/// every `m`-edge hypergraph.
fn brute_pair_sum(n: u32, k: u32, m: u32, r: u32, j: u32) -> BigRational {
    let edges: Vec<u64> = (0u64..1 << n).filter(|w| w.count_ones() == k).collect();
    let jsets: Vec<u64> = (0u64..1 << n).filter(|w| w.count_ones() == j).collect();
    let slots = edges.len() as u32;
    assert!(slots < 64);
    let ns = jsets.len();
    let mut single = vec![0u64; ns];
    let mut joint = vec![0u64; ns * ns];
    let mut total = 0u64;
    // Gosper's hack over m-subsets of the edge slots
    let mut pick: u64 = (1u64 << m) - 1;
    let limit = 1u64 << slots;
    let mut hits = Vec::with_capacity(ns);
    while pick < limit {
        total += 1;
        hits.clear();
        for (i, &s) in jsets.iter().enumerate() {
            let mut inside = 0u32;
            let mut bits = pick;
            while bits != 0 {
                let e = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                if edges[e] & s == edges[e] {
                    inside += 1;
                }
            }
            if inside >= r {
                hits.push(i);
            }
        }
        for &a in &hits {
            single[a] += 1;
            for &b in &hits {
                joint[a * ns + b] += 1;
            }
        }
        let c = pick & pick.wrapping_neg();
        let rr = pick + c;
        pick = (((rr ^ pick) >> 2) / c) | rr;
    }
    let mut sum = BigRational::zero();
    for a in 0..ns {
        for b in 0..ns {
            let e_ab = ratio(joint[a * ns + b], total);
            let e_a = ratio(single[a], total);
            let e_b = ratio(single[b], total);
            sum += e_ab - e_a * e_b;
        }
    }
    sum
}

fn ac5() -> Result<Outcome> {
    let l = default_covering_constant();
    let cases: [(u32, u32, u32, u32, u32); 8] = [
        (6, 2, 3, 2, 3),
        (7, 2, 5, 3, 4),
        (8, 2, 6, 2, 3),
        (8, 2, 5, 4, 5),
        (8, 2, 4, 3, 4),
        (7, 3, 4, 2, 4),
        (8, 3, 3, 2, 5),
        (8, 3, 4, 2, 4),
    ];
    let mismatches: Vec<String> = cases
        .par_iter()
        .filter_map(|&(n, k, m, r, j)| {
            let brute = brute_pair_sum(n, k, m, r, j);
            match exact_variance_level(n, k, u64::from(m), r, j, l) {
                Ok(v) if v.count_variance == brute => None,
                Ok(v) => Some(format!("({n},{k},{m},{r},{j}): {} vs {brute}", v.count_variance)),
                Err(e) => Some(format!("({n},{k},{m},{r},{j}): {e}")),
            }
        })
        .collect();

    let (n, k, m, r, j) = (8u32, 2u32, 6u64, 2u32, 3u32);
    const SEEDS: u64 = 100_000;
    let exact = exact_variance_level(n, k, m, r, j, l)?;
    let p = compute_p(r, m, k).p;
    let scale = (p / l).powi(j as i32);
    let counts: Vec<u64> = (0..SEEDS)
        .into_par_iter()
        .map(|s| sample_hnm(n, k, m, &SeedSpec::new(5, s)).and_then(|h| restricted_count(&h, r, j)))
        .collect::<Result<_>>()?;
    let mut mom = Moments::default();
    for c in counts {
        mom.push(c as f64 * scale);
    }
    let diff = (mom.variance() - exact.value).abs();
    let se = mom.variance_std_error();
    let empirical_ok = diff <= 3.0 * se;
    Ok(Outcome::check(
        mismatches.is_empty() && empirical_ok,
        format!(
            "{} exact pair-sum cases, {} mismatches; empirical variance {:.4e} vs {:.4e} ({:.2} se) over {SEEDS} seeds",
            cases.len(),
            mismatches.len(),
            mom.variance(),
            exact.value,
            diff / se
        ),
    ))
}

fn ac6() -> Result<Outcome> {
    let l = default_covering_constant();
    let grid = certificate_grid(30, &[2, 3], &[2, 3, 4], l)?;
    let mut geometric_bad = Vec::new();
    for k in 2..=6 {
        for r in 2..=6 {
            let (lhs, rhs) = geometric_combination(k, r, l);
            let one = (rhs.ln_abs()).abs() < 1e-9;
            if !(lhs.ln_abs() < rhs.ln_abs() && one) {
                geometric_bad.push((k, r));
            }
        }
    }
    let control = certificate_grid(10, &[2, 3], &[2, 3, 4], 1.0)?;
    Ok(Outcome::check(
        grid.failures.is_empty() && grid.in_regime > 0 && geometric_bad.is_empty() && !control.failures.is_empty(),
        format!(
            "grid n <= 30: {} parameter tuples, {} in-regime certificates, {} failures; geometric sum {} bad of 25; L = 1 control: {} failures",
            grid.cases,
            grid.in_regime,
            grid.failures.len(),
            geometric_bad.len(),
            control.failures.len()
        ),
    ))
}

fn ac7() -> Result<Outcome> {
    let (k, r) = (2u32, 2u32);
    let grid = [64u32, 256, 1024];
    // Search for an m placing some level in the window e^2 < np/j < ln n.
    let mut window_found = Vec::new();
    for &n in &grid {
        let total = binom_u64(u64::from(n), u64::from(k)).expect("small");
        let ln_n = f64::from(n).ln();
        let hit = (u64::from(r)..=total).find(|&m| {
            let p = compute_p(r, m, k).p;
            level_range(k, r).any(|j| {
                let ratio = f64::from(n) * p / f64::from(j);
                ratio > E * E && ratio < ln_n
            })
        });
        window_found.push(hit.is_some());
    }

    // Closest substitute: np/j = 10 at the lowest level, which is restricted.
    let cfg = CampaignConfig {
        n_grid: grid.to_vec(),
        k,
        r,
        m_rule: "npj:10".into(),
        covering_constant: default_covering_constant(),
        seeds_per_cell: 200,
        trials_mc: 2000,
        master_seed: 7,
        output_path: None,
        record_timing: false,
        weight_mode: WeightMode::Auto,
    };
    let out = run_campaign(&cfg)?;
    let mut ok = true;
    let mut cells = Vec::new();
    for c in &out.summary.cells {
        let bound = 1.0 / f64::from(c.n).ln() + 0.05;
        ok &= c.upper_bound <= bound && c.errors == 0;
        cells.push(format!(
            "n={} m={}: {}/{} failures, upper {:.4} <= {:.4}",
            c.n, c.m, c.failures, c.rows, c.upper_bound, bound
        ));
    }
    let substitute = format!(
        "substitute npj:10 {}: {}",
        if ok { "holds" } else { "VIOLATED" },
        cells.join("; ")
    );
    if window_found.iter().all(|&f| f) {
        return Ok(Outcome::check(ok, substitute));
    }
    if !ok {
        return Ok(Outcome::check(false, substitute));
    }
    Ok(Outcome {
        verdict: Verdict::Unattainable,
        detail: format!("no m gives e^2 < np/j < ln n for n in {grid:?} (needs ln n > e^2, n > 1618); {substitute}"),
    })
}

fn ac8() -> Result<Outcome> {
    let pair = MonotoneFamily::new(2, vec![SubsetMask::from_elements(2, [0, 1])?])?;
    let qf_pair = q_threshold(&pair, ThresholdKind::Fractional, 1e-6)?;
    let pair_ok = (qf_pair.value - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-4;

    let checks: Vec<(bool, f64)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let seed = SeedSpec::new(8, i);
            let mut rng = seed.rng();
            let n = rng.random_range(1..=8u32);
            let draws = rng.random_range(1..=8usize);
            let f = random_antichain(n, draws, &seed.child(1))?;
            let rep = talagrand_ratio(&f, 1e-6)?;
            let witness = min_fractional_weight(&f, rep.q_f_bracket.lo.max(1e-12))?;
            Ok((rep.q <= rep.q_f + 1e-6, witness.min_slack))
        })
        .collect::<Result<_>>()?;
    let order_bad = checks.iter().filter(|c| !c.0).count();
    let worst_slack = checks.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    Ok(Outcome::check(
        pair_ok && order_bad == 0 && worst_slack >= -1e-9,
        format!(
            "q_f{{0,1}} = {:.8}; q > q_f + 1e-6 on {order_bad}/200 families; worst witness slack {worst_slack:.2e}",
            qf_pair.value
        ),
    ))
}

fn ac9() -> Result<Outcome> {
    let (n, k, m) = (5u32, 2u32, 4u64);
    const SEEDS: u64 = 100_000;
    let keys: Vec<u128> = (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            let h = sample_hnm(n, k, m, &SeedSpec::new(9, s))?;
            // encode the edge set as a subset of the 10 edge slots
            let mut word = 0u64;
            for e in h.edges() {
                word |= 1 << colex_rank(e).expect("small");
            }
            Ok(colex_rank(&SubsetMask::from_u64(10, word)).expect("small"))
        })
        .collect::<Result<_>>()?;
    let outcomes = binom_u64(10, m).expect("small") as usize;
    let mut tally: HashMap<u128, u64> = HashMap::new();
    for key in keys {
        *tally.entry(key).or_default() += 1;
    }
    let mut counts = vec![0u64; outcomes];
    for (key, c) in tally {
        counts[key as usize] = c;
    }
    let chi = chi_square_uniform(&counts);
    let cond = conditional_equivalence_test(4, 2, 0.5, 1_000_000, 9, 0.001)?;
    Ok(Outcome::check(
        chi.p_value >= 0.001 && cond.passes(),
        format!(
            "sample_hnm(5,2,4): chi2 = {:.1} on {} dof, p = {:.3}; conditional test: {} buckets, passes = {}",
            chi.statistic,
            chi.dof,
            chi.p_value,
            cond.buckets.len(),
            cond.passes()
        ),
    ))
}

fn run_cli(args: &[&str], workers: u32) -> (Option<i32>, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_threshold-lab"))
        .args(args)
        .env("THRESHOLD_LAB_WORKERS", workers.to_string())
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout, out.stderr)
}

fn ac10() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let small = path("small.json");
    let big = path("big.json");
    let family = path("family.json");
    let summary = path("summary.json");
    for (file, n, m) in [(&small, "12", "20"), (&big, "60", "150")] {
        let (code, _, _) = run_cli(
            &[
                "--seed", "5", "--output", file, "sample", "--n", n, "--k", "2", "--m", m,
            ],
            1,
        );
        assert_eq!(code, Some(0));
    }
    std::fs::write(&family, r#"{"n":5,"minimal_sets":[[0,1],[1,2,3],[3,4],[0,4]]}"#)?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["--seed", "11", "sample", "--n", "30", "--k", "3", "--m", "40"],
        vec![
            "--seed", "11", "sample", "--n", "30", "--k", "2", "--model", "gnq", "--q", "0.1",
        ],
        vec!["verify", "--input", &small, "--r", "3"],
        vec![
            "--seed", "2", "verify", "--input", &big, "--r", "2", "--mode", "sampled", "--trials", "3000",
        ],
        vec![
            "--seed",
            "2",
            "weights",
            "--input",
            &big,
            "--r",
            "2",
            "--mode",
            "monte-carlo",
            "--trials",
            "3000",
        ],
        vec!["weights", "--input", &small, "--r", "3"],
        vec!["claims", "--n", "40", "--k", "2", "--m", "60", "--r", "3"],
        vec!["lemmas", "--grid-max", "12"],
        vec!["thresholds", "--input", &family, "--tol", "1e-4"],
        vec![
            "--seed",
            "4",
            "--format",
            "csv",
            "campaign",
            "--n-grid",
            "40,80",
            "--k",
            "2",
            "--r",
            "2",
            "--m-rule",
            "npj:10",
            "--seeds-per-cell",
            "24",
            "--trials-mc",
            "300",
            "--summary",
            &summary,
        ],
    ];
    let mut differing = Vec::new();
    for cmd in &commands {
        let reference = run_cli(cmd, 1);
        let reference_summary = std::fs::read(&summary).ok();
        let mut same = reference.0 == Some(0) || reference.0 == Some(1);
        for workers in [4u32, 8, 4] {
            let again = run_cli(cmd, workers);
            same &= again.0 == reference.0 && again.1 == reference.1;
            if cmd.contains(&"campaign") {
                same &= std::fs::read(&summary).ok() == reference_summary;
            }
        }
        if !same {
            differing.push(
                cmd.iter()
                    .find(|a| !a.starts_with('-') && a.parse::<f64>().is_err())
                    .copied()
                    .unwrap_or("?"),
            );
        }
    }
    Ok(Outcome::check(
        differing.is_empty(),
        format!(
            "{} commands x workers {{1,4,8}} plus a repeat: {} differing {:?}",
            commands.len(),
            differing.len(),
            differing
        ),
    ))
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", Duration::from_secs(60), ac1),
        ("AC2", Duration::from_secs(120), ac2),
        ("AC3", Duration::from_secs(600), ac3),
        ("AC4", Duration::from_secs(600), ac4),
        ("AC5", Duration::from_secs(600), ac5),
        ("AC6", Duration::from_secs(600), ac6),
        ("AC7", Duration::from_secs(1800), ac7),
        ("AC8", Duration::from_secs(600), ac8),
        ("AC9", Duration::from_secs(600), ac9),
        ("AC10", Duration::from_secs(600), ac10),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(limit, f);
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Unattainable => "FAIL (unattainable)",
        };
        println!("{name} {tag}: {}", o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
