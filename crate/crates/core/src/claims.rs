//! Certificates for the weight bounds behind the cover: both sides of each
//! displayed inequality are evaluated (in log space) for concrete
//! `(n, k, m, r, L)` and compared.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{compute_p, half_up, level_range, LevelMode, LevelSpec, E_SQUARED};
use crate::error::{Error, Result};
use crate::exactmath::{binom_u64, check_binomial_bounds, ln_binom, BinomialBoundsReport, LogScalar};
use crate::weights::{expected_weight_level, ExpectedWeight};

/// Relative slack for `lhs <= rhs`.
pub const CERT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ClaimId {
    #[serde(rename = "G0_weight")]
    G0Weight,
    #[serde(rename = "Gj_small_np")]
    GjSmallNp,
    #[serde(rename = "Gj_expected")]
    GjExpected,
    #[serde(rename = "Gj_large_j")]
    GjLargeJ,
    #[serde(rename = "Gj_large_np")]
    GjLargeNp,
    #[serde(rename = "Gj_variance")]
    GjVariance,
    #[serde(rename = "Gj_chebyshev")]
    GjChebyshev,
    #[serde(rename = "pigeonhole_total")]
    PigeonholeTotal,
}

impl ClaimId {
    pub const ALL: [ClaimId; 8] = [
        ClaimId::G0Weight,
        ClaimId::GjSmallNp,
        ClaimId::GjExpected,
        ClaimId::GjLargeJ,
        ClaimId::GjLargeNp,
        ClaimId::GjVariance,
        ClaimId::GjChebyshev,
        ClaimId::PigeonholeTotal,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimCertificate {
    pub claim_id: ClaimId,
    /// Level index; 0 for statements about `G_0` or the whole cover.
    pub j: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    pub in_regime: bool,
    pub pass: Verdict,
    pub note: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cmp {
    AtMost,
    Below,
}

fn holds(lhs: LogScalar, rhs: LogScalar, cmp: Cmp) -> bool {
    if lhs.is_zero() {
        return cmp == Cmp::AtMost || !rhs.is_zero();
    }
    if rhs.is_zero() {
        return false;
    }
    match cmp {
        Cmp::AtMost => lhs.ln_abs() <= rhs.ln_abs() + CERT_SLACK.ln_1p(),
        Cmp::Below => lhs.ln_abs() < rhs.ln_abs(),
    }
}

fn certificate(
    claim_id: ClaimId,
    j: u32,
    lhs: LogScalar,
    rhs: LogScalar,
    cmp: Cmp,
    in_regime: bool,
    note: impl Into<String>,
) -> ClaimCertificate {
    let pass = match (in_regime, holds(lhs, rhs, cmp)) {
        (false, _) => Verdict::NotApplicable,
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
    };
    ClaimCertificate {
        claim_id,
        j,
        lhs: lhs.to_f64(),
        rhs: rhs.to_f64(),
        ln_lhs: lhs.ln_abs(),
        ln_rhs: rhs.ln_abs(),
        in_regime,
        pass,
        note: note.into(),
    }
}

fn ls(v: f64) -> LogScalar {
    LogScalar::from_f64(v)
}

/// Lower end of the doubling scan for the asymptotic step.
pub const CROSSING_SCAN_MIN_EXP: u32 = 4;
/// Upper end of the doubling scan.
pub const CROSSING_SCAN_MAX_EXP: u32 = 40;

/// `(lnln n / n)^k (ln n)^(lnln n) <= 1 / ln n`, compared in log space.
pub fn asymptotic_step_holds(n: f64, k: u32) -> bool {
    let lnn = n.ln();
    let llnn = lnn.ln();
    if llnn <= 0.0 {
        return false;
    }
    f64::from(k) * (llnn.ln() - lnn) + llnn * llnn <= -llnn
}

/// Smallest `n = 2^t` in the scan from which the asymptotic step holds for
/// every larger scanned `n`.
pub fn asymptotic_crossing(k: u32) -> Option<u64> {
    let mut crossing = None;
    for t in (CROSSING_SCAN_MIN_EXP..=CROSSING_SCAN_MAX_EXP).rev() {
        if asymptotic_step_holds((1u64 << t) as f64, k) {
            crossing = Some(1u64 << t);
        } else {
            break;
        }
    }
    crossing
}

/// `(2e/L)^(k⌈r/2⌉) + Σ_{j=k+1}^{kr-⌈r/2⌉} (2e^3/L)^j` against `(4e^3/L)^k`.
pub fn geometric_combination(k: u32, r: u32, covering_constant: f64) -> (LogScalar, LogScalar) {
    let l = covering_constant;
    let c = half_up(r);
    let mut lhs = ls(2.0 * E / l).powi(k * c);
    for j in level_range(k, r) {
        lhs = lhs + ls(2.0 * E.powi(3) / l).powi(j);
    }
    (lhs, ls(4.0 * E.powi(3) / l).powi(k))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimReport {
    pub n: u32,
    pub k: u32,
    pub m: u64,
    pub r: u32,
    #[serde(rename = "L")]
    pub covering_constant: f64,
    pub p: f64,
    /// Start of the range where the asymptotic variance step holds.
    pub crossing_n: Option<u64>,
    pub certificates: Vec<ClaimCertificate>,
    /// Elementary binomial bounds used by the expected-weight chain.
    pub fact_bounds: Vec<BinomialBoundsReport>,
}

impl ClaimReport {
    pub fn passes(&self) -> bool {
        self.certificates.iter().all(|c| c.pass != Verdict::Fail) && self.fact_bounds.iter().all(|f| f.all_pass())
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClaimCertificate> {
        self.certificates.iter().filter(|c| c.pass == Verdict::Fail)
    }
}

fn degenerate(note: &str) -> Vec<ClaimCertificate> {
    ClaimId::ALL
        .iter()
        .map(|&id| certificate(id, 0, LogScalar::ZERO, LogScalar::ZERO, Cmp::AtMost, false, note))
        .collect()
}

struct LevelFacts {
    spec: LevelSpec,
    expected: Option<ExpectedWeight>,
}

/// All certificates for `(n, k, m, r, L)`.
pub fn claim_certificates(n: u32, k: u32, m: u64, r: u32, covering_constant: f64) -> Result<ClaimReport> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if !(covering_constant.is_finite() && covering_constant > 0.0) {
        return Err(Error::Domain(format!(
            "covering constant {covering_constant} must be positive"
        )));
    }
    if binom_u64(u64::from(n), u64::from(k)).is_some_and(|t| m > t) {
        return Err(Error::Precondition(format!("m = {m} exceeds C({n},{k})")));
    }
    let density = compute_p(r, m, k);
    let mut report = ClaimReport {
        n,
        k,
        m,
        r,
        covering_constant,
        p: density.p,
        crossing_n: asymptotic_crossing(k),
        certificates: vec![],
        fact_bounds: vec![],
    };
    if r <= 1 {
        report.certificates = degenerate("degenerate: r <= 1, the cover is the support itself");
        return Ok(report);
    }
    if density.upset_empty {
        report.certificates = degenerate("degenerate: m < r, the upset of g is empty");
        return Ok(report);
    }

    let l = covering_constant;
    let p = density.p;
    let pl = ls(p / l);
    let c = half_up(r);
    let (nn, lnn) = (f64::from(n), f64::from(n).ln());
    let llnn = lnn.ln();
    let inv_ln = ls(lnn).recip();
    let two_e3_l = ls(2.0 * E.powi(3) / l);
    let e3_l = ls(E.powi(3) / l);
    let past_crossing = report.crossing_n.is_some_and(|c| u64::from(n) >= c);
    let mut certs = Vec::new();

    // G_0: C(m, ⌈r/2⌉) (p/L)^(k⌈r/2⌉) <= (2e/L)^(k⌈r/2⌉)
    let g0_bound = LogScalar::from_ln(ln_binom(m, u64::from(c))) * pl.powi(k * c);
    let g0_rhs = ls(2.0 * E / l).powi(k * c);
    certs.push(certificate(
        ClaimId::G0Weight,
        0,
        g0_bound,
        g0_rhs,
        Cmp::AtMost,
        true,
        "",
    ));

    let levels: Vec<LevelFacts> = level_range(k, r)
        .map(|j| {
            let spec = LevelSpec::classify(n, p, j);
            let expected = match spec.mode {
                LevelMode::Restricted => Some(expected_weight_level(n, k, m, r, j, l)),
                LevelMode::Full => None,
            };
            expected.transpose().map(|expected| LevelFacts { spec, expected })
        })
        .collect::<Result<_>>()?;

    let mut prob_sum = LogScalar::ZERO;
    // P(w(G_0) >= 2e^3/L) vanishes when the deterministic bound is below it.
    if !holds(g0_rhs, two_e3_l, Cmp::Below) {
        prob_sum = LogScalar::ONE;
    }

    for lf in &levels {
        let j = lf.spec.j;
        let ratio = lf.spec.ratio;
        let small = lf.spec.mode == LevelMode::Full;
        let full_w = LogScalar::from_ln(ln_binom(u64::from(n), u64::from(j))) * pl.powi(j);
        certs.push(certificate(
            ClaimId::GjSmallNp,
            j,
            full_w,
            e3_l.powi(j),
            Cmp::AtMost,
            small,
            format!("np/j = {ratio:.6}"),
        ));
        let Some(ew) = lf.expected else {
            for id in [
                ClaimId::GjExpected,
                ClaimId::GjLargeJ,
                ClaimId::GjLargeNp,
                ClaimId::GjVariance,
                ClaimId::GjChebyshev,
            ] {
                certs.push(certificate(
                    id,
                    j,
                    LogScalar::ZERO,
                    LogScalar::ZERO,
                    Cmp::AtMost,
                    false,
                    "full level",
                ));
            }
            continue;
        };
        let e = ew.log_value;
        let e_note = if ew.bound_only {
            "E[w] replaced by its tail-bound upper estimate"
        } else {
            "exact E[w]"
        };
        let e_rhs = ls(E_SQUARED / l).powi(j) * ls(E * f64::from(j) / (nn * p)).powi(c);
        certs.push(certificate(ClaimId::GjExpected, j, e, e_rhs, Cmp::AtMost, true, e_note));

        let markov = e * two_e3_l.powi(j).recip();
        let target = ls(0.5).powi(j) * inv_ln;
        certs.push(certificate(
            ClaimId::GjLargeJ,
            j,
            markov,
            target,
            Cmp::AtMost,
            f64::from(j) >= llnn,
            format!("j = {j}, lnln n = {llnn:.6}"),
        ));
        certs.push(certificate(
            ClaimId::GjLargeNp,
            j,
            markov,
            target,
            Cmp::AtMost,
            ratio >= lnn,
            format!("np/j = {ratio:.6}, ln n = {lnn:.6}"),
        ));

        // A = E[w] Σ_{ℓ=k}^{j} C(j,ℓ) C(n-j, j-ℓ) (p/L)^j
        let mut overlap = LogScalar::ZERO;
        for ell in k..=j {
            if j - ell <= n - j {
                let t = ln_binom(u64::from(j), u64::from(ell)) + ln_binom(u64::from(n - j), u64::from(j - ell));
                overlap = overlap + LogScalar::from_ln(t);
            }
        }
        let a = e * overlap * pl.powi(j);
        let hyp = f64::from(j) <= llnn && ratio < lnn;
        let regime = hyp && past_crossing;
        let regime_note = match (hyp, past_crossing) {
            (true, false) => format!(
                "hypotheses hold but n is below the asymptotic crossing {:?}",
                report.crossing_n
            ),
            _ => format!("j = {j}, lnln n = {llnn:.6}, np/j = {ratio:.6}, ln n = {lnn:.6}"),
        };
        certs.push(certificate(
            ClaimId::GjVariance,
            j,
            a,
            ls(2.0 * E / l).powi(j) * e * inv_ln,
            Cmp::AtMost,
            regime,
            regime_note.clone(),
        ));
        let gap_ok = holds(
            e + ls(2f64.powi(j as i32 - 1)) * e3_l.powi(j),
            two_e3_l.powi(j),
            Cmp::AtMost,
        );
        let cheb = a * (ls(2.0).powi(2 * j - 2) * e3_l.powi(2 * j)).recip();
        let mut cheb_cert = certificate(ClaimId::GjChebyshev, j, cheb, target, Cmp::AtMost, regime, regime_note);
        if regime && !gap_ok {
            cheb_cert.pass = Verdict::Fail;
            cheb_cert.note.push_str("; E[w] + 2^(j-1)(e^3/L)^j exceeds (2e^3/L)^j");
        }
        certs.push(cheb_cert);

        let mut level_prob = markov;
        if regime && gap_ok && holds(cheb, markov, Cmp::Below) {
            level_prob = cheb;
        }
        if holds(LogScalar::ONE, level_prob, Cmp::Below) {
            level_prob = LogScalar::ONE;
        }
        prob_sum = prob_sum + level_prob;

        for (a_, b_, c_) in [(0, u64::from(k), u64::from(j)), (0, u64::from(j), u64::from(j))] {
            report
                .fact_bounds
                .push(check_binomial_bounds(a_, b_, c_, u64::from(n))?);
        }
        if m >= u64::from(r) {
            report
                .fact_bounds
                .push(check_binomial_bounds(0, u64::from(r), u64::from(r), m)?);
        }
    }

    let (geo_lhs, geo_rhs) = geometric_combination(k, r, l);
    certs.push(certificate(
        ClaimId::PigeonholeTotal,
        0,
        geo_lhs,
        geo_rhs,
        Cmp::Below,
        true,
        "geometric sum of per-part targets below (4e^3/L)^k",
    ));
    certs.push(certificate(
        ClaimId::PigeonholeTotal,
        0,
        geo_rhs,
        LogScalar::ONE,
        Cmp::AtMost,
        true,
        "(4e^3/L)^k <= 1",
    ));
    certs.push(certificate(
        ClaimId::PigeonholeTotal,
        0,
        prob_sum,
        inv_ln,
        Cmp::AtMost,
        n >= 3,
        "sum of per-part failure probability bounds <= 1/ln n",
    ));
    report.certificates = certs;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridFailure {
    pub n: u32,
    pub k: u32,
    pub m: u64,
    pub r: u32,
    pub certificate: ClaimCertificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub cases: u64,
    pub in_regime: u64,
    pub failures: Vec<GridFailure>,
}

/// Certificates over `n <= max_n`, the given `k` and `r`, and every `m` from
/// `r` to `C(n, k)`.
pub fn certificate_grid(max_n: u32, ks: &[u32], rs: &[u32], covering_constant: f64) -> Result<GridReport> {
    let mut cases = Vec::new();
    for &k in ks {
        for n in k.max(1)..=max_n {
            let total = binom_u64(u64::from(n), u64::from(k))
                .ok_or_else(|| Error::Capacity(format!("C({n},{k}) exceeds 64 bits")))?;
            for &r in rs {
                for m in u64::from(r)..=total {
                    cases.push((n, k, m, r));
                }
            }
        }
    }
    let reports: Vec<(u64, Vec<GridFailure>)> = cases
        .par_iter()
        .map(|&(n, k, m, r)| {
            let rep = claim_certificates(n, k, m, r, covering_constant)?;
            let in_regime = rep.certificates.iter().filter(|c| c.in_regime).count() as u64;
            let mut failures: Vec<GridFailure> = rep
                .failures()
                .map(|c| GridFailure {
                    n,
                    k,
                    m,
                    r,
                    certificate: c.clone(),
                })
                .collect();
            if !rep.fact_bounds.iter().all(|f| f.all_pass()) {
                failures.push(GridFailure {
                    n,
                    k,
                    m,
                    r,
                    certificate: certificate(
                        ClaimId::GjExpected,
                        0,
                        LogScalar::ONE,
                        LogScalar::ZERO,
                        Cmp::AtMost,
                        true,
                        "elementary binomial bound failed",
                    ),
                });
            }
            Ok((in_regime, failures))
        })
        .collect::<Result<_>>()?;
    let mut out = GridReport {
        cases: cases.len() as u64,
        in_regime: 0,
        failures: vec![],
    };
    for (c, f) in reports {
        out.in_regime += c;
        out.failures.extend(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::default_covering_constant;

    fn by_id(rep: &ClaimReport, id: ClaimId) -> Vec<&ClaimCertificate> {
        rep.certificates.iter().filter(|c| c.claim_id == id).collect()
    }

    #[test]
    fn crossing_scan() {
        // the step already holds at the bottom of the scan for small k
        assert_eq!(asymptotic_crossing(2), Some(16));
        assert_eq!(asymptotic_crossing(3), Some(16));
        assert!(asymptotic_step_holds((1u64 << 40) as f64, 2));
        // false for n < e^e, where lnln n <= 0 breaks the regime
        assert!(!asymptotic_step_holds(2.0, 2));
    }

    #[test]
    fn geometric_combination_passes_at_default_constant() {
        let l = default_covering_constant();
        for k in 2..=6 {
            for r in 2..=6 {
                let (lhs, rhs) = geometric_combination(k, r, l);
                assert!(holds(lhs, rhs, Cmp::Below), "k={k} r={r}");
                assert!((rhs.to_f64() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let rep = claim_certificates(20, 2, 10, 1, default_covering_constant()).unwrap();
        assert_eq!(rep.certificates.len(), ClaimId::ALL.len());
        assert!(rep.certificates.iter().all(|c| c.pass == Verdict::NotApplicable));
        assert!(rep.passes());
        let rep = claim_certificates(20, 2, 2, 3, default_covering_constant()).unwrap();
        assert!(rep.certificates.iter().all(|c| c.pass == Verdict::NotApplicable));
        assert!(matches!(
            claim_certificates(5, 2, 11, 2, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(claim_certificates(5, 2, 3, 2, 0.0).is_err());
    }

    #[test]
    fn default_constant_tuple_passes() {
        let l = default_covering_constant();
        for &(n, k, m, r) in &[
            (30u32, 2u32, 3u64, 2u32),
            (1000, 2, 400, 3),
            (200, 3, 50, 4),
            (1 << 20, 2, 2000, 2),
        ] {
            let rep = claim_certificates(n, k, m, r, l).unwrap();
            assert!(rep.passes(), "{:#?}", rep.failures().collect::<Vec<_>>());
            assert_eq!(by_id(&rep, ClaimId::G0Weight).len(), 1);
            assert_eq!(by_id(&rep, ClaimId::PigeonholeTotal).len(), 3);
        }
    }

    #[test]
    fn restricted_levels_get_in_regime_certificates() {
        let l = default_covering_constant();
        let rep = claim_certificates(1000, 2, 400, 3, l).unwrap();
        let exp = by_id(&rep, ClaimId::GjExpected);
        assert!(exp.iter().any(|c| c.in_regime && c.pass == Verdict::Pass));
        assert!(!rep.fact_bounds.is_empty());
        // lnln 1000 < 3 <= j, so the variance claims are out of regime
        assert!(by_id(&rep, ClaimId::GjVariance).iter().all(|c| !c.in_regime));
    }

    #[test]
    fn variance_regime_is_reachable_past_crossing() {
        // j = 3 <= lnln n needs n >= e^(e^3) ~ 5.3e8; pick np/j between e^2 and ln n
        let l = default_covering_constant();
        let n: u32 = 1 << 30;
        let lnn = f64::from(n).ln();
        let p = 3.0 * (E_SQUARED + lnn) / 2.0 / f64::from(n);
        let m = (2.0 / (p * p)).round() as u64;
        let rep = claim_certificates(n, 2, m, 2, l).unwrap();
        let var = by_id(&rep, ClaimId::GjVariance);
        assert_eq!(var.len(), 1);
        assert!(var[0].in_regime, "{var:?}");
        assert_eq!(var[0].pass, Verdict::Pass);
        assert_eq!(by_id(&rep, ClaimId::GjChebyshev)[0].pass, Verdict::Pass);
    }

    #[test]
    fn tiny_constant_fails_somewhere() {
        let rep = claim_certificates(30, 2, 3, 2, 1.0).unwrap();
        assert!(!rep.passes());
        assert!(rep.failures().any(|c| c.claim_id == ClaimId::PigeonholeTotal));
    }

    #[test]
    fn small_grid_has_no_failures() {
        let g = certificate_grid(14, &[2, 3], &[2, 3, 4], default_covering_constant()).unwrap();
        assert!(g.cases > 0 && g.in_regime > 0);
        assert!(g.failures.is_empty(), "{:?}", g.failures.first());
    }

    #[test]
    fn serialized_names() {
        let rep = claim_certificates(12, 2, 3, 2, default_covering_constant()).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"claim_id\":\"G0_weight\""));
        assert!(json.contains("\"pass\":\"not_applicable\"") || json.contains("\"pass\":\"pass\""));
        assert!(json.contains("\"L\":"));
    }
}
