//! Exact binomials and rationals, plus log-space helpers for magnitudes that
//! would over- or underflow a double.

use std::cmp::Ordering;
use std::f64::consts::E;
use std::ops::{Add, Mul};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub use num_rational::BigRational;

/// `C(n, k)` as an exact big integer; zero when `k > n`.
pub fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point.
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `C(n, k)` when it fits in a `u128`.
pub fn binom_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc * (n - i) / (i + 1) is integral and gcd(acc/g, (i+1)/g) = 1,
        // so (i+1)/g divides n - i.
        let g = acc.gcd(&(i + 1));
        acc = (acc / g).checked_mul((n as u128 - i) / ((i + 1) / g))?;
    }
    Some(acc)
}

/// `C(n, k)` when it fits in a `u64`.
pub fn binom_u64(n: u64, k: u64) -> Option<u64> {
    binom_u128(n, k).and_then(|v| u64::try_from(v).ok())
}

/// Falling factorial `n (n-1) ... (n-k+1)`; zero when `k > n`.
pub fn falling(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
    }
    acc
}

pub fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

pub fn rational_from_uint(v: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Best-effort conversion of an exact rational to a double.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    if let Some(v) = q.to_f64() {
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    let ln = ln_rational(q);
    q.numer().sign_mul(ln.exp())
}

trait SignMul {
    fn sign_mul(&self, v: f64) -> f64;
}

impl SignMul for BigInt {
    fn sign_mul(&self, v: f64) -> f64 {
        if self.sign() == num_bigint::Sign::Minus {
            -v
        } else {
            v
        }
    }
}

/// Natural log of a positive big integer, accurate to double precision.
pub fn ln_biguint(v: &BigUint) -> f64 {
    assert!(!v.is_zero(), "ln of zero");
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of `|q|` for a nonzero rational.
pub fn ln_rational(q: &BigRational) -> f64 {
    ln_biguint(q.numer().magnitude()) - ln_biguint(q.denom().magnitude())
}

/// A real number stored as a sign and the natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogScalar {
    sign: i8,
    ln_mag: f64,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        sign: 0,
        ln_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogScalar = LogScalar { sign: 1, ln_mag: 0.0 };

    /// Positive value `exp(ln_mag)`.
    pub fn from_ln(ln_mag: f64) -> Self {
        if ln_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogScalar { sign: 1, ln_mag }
        }
    }

    pub fn from_f64(v: f64) -> Self {
        match v.partial_cmp(&0.0) {
            Some(Ordering::Greater) => LogScalar {
                sign: 1,
                ln_mag: v.ln(),
            },
            Some(Ordering::Less) => LogScalar {
                sign: -1,
                ln_mag: (-v).ln(),
            },
            _ => Self::ZERO,
        }
    }

    pub fn from_rational(q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::ZERO;
        }
        let sign = if q.numer().sign() == num_bigint::Sign::Minus {
            -1
        } else {
            1
        };
        LogScalar {
            sign,
            ln_mag: ln_rational(q),
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// `ln |x|`; negative infinity for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.ln_mag
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_mag.exp(),
        }
    }

    pub fn powi(&self, e: u32) -> Self {
        if e == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && e % 2 == 1 { -1 } else { 1 };
        LogScalar {
            sign,
            ln_mag: self.ln_mag * f64::from(e),
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        LogScalar {
            sign: self.sign,
            ln_mag: -self.ln_mag,
        }
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;

    fn mul(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 || rhs.sign == 0 {
            return LogScalar::ZERO;
        }
        LogScalar {
            sign: self.sign * rhs.sign,
            ln_mag: self.ln_mag + rhs.ln_mag,
        }
    }
}

impl Add for LogScalar {
    type Output = LogScalar;

    fn add(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln_mag >= rhs.ln_mag {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = (small.ln_mag - big.ln_mag).exp();
        if big.sign == small.sign {
            LogScalar {
                sign: big.sign,
                ln_mag: big.ln_mag + d.ln_1p(),
            }
        } else if d == 1.0 {
            LogScalar::ZERO
        } else {
            LogScalar {
                sign: big.sign,
                ln_mag: big.ln_mag + (-d).ln_1p(),
            }
        }
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.ln_mag.partial_cmp(&other.ln_mag),
                _ => other.ln_mag.partial_cmp(&self.ln_mag),
            },
            ord => Some(ord),
        }
    }
}

// Largest min(k, n-k) summed term by term.
const DIRECT_SUM_LIMIT: u64 = 64;

/// `ln C(n, k)` as a double (negative infinity when `k > n`).
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= DIRECT_SUM_LIMIT {
        return (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
    }
    // Stirling form with the entropy term split so both parts are positive.
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    let main = kf * (nf / kf).ln() - rest * (-kf / nf).ln_1p();
    main + 0.5 * (nf / (2.0 * std::f64::consts::PI * kf * rest)).ln() + stirling_error(n)
        - stirling_error(k)
        - stirling_error(n - k)
}

/// `ln n! - (n ln n - n + ln(2 pi n)/2)`.
fn stirling_error(n: u64) -> f64 {
    if n <= 16 {
        let nf = n as f64;
        let ln_fact: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
        return ln_fact - (nf * nf.ln() - nf + 0.5 * (2.0 * std::f64::consts::PI * nf).ln());
    }
    let nf = n as f64;
    let inv = 1.0 / nf;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))))
}

/// `ln C(n, k)` as a [`LogScalar`]; `k > n` is a domain error.
pub fn log_binom(n: u64, k: u64) -> Result<LogScalar> {
    if k > n {
        return Err(Error::Domain(format!("log_binom({n}, {k}) with k > n")));
    }
    Ok(LogScalar::from_ln(ln_binom(n, k)))
}

/// One inequality with both sides exposed for auditing.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    #[serde(serialize_with = "serialize_rational")]
    pub lhs: BigRational,
    pub lhs_f64: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomialBoundsReport {
    pub j: u64,
    pub k: u64,
    pub m: u64,
    pub n: u64,
    pub checks: Vec<BoundCheck>,
}

impl BinomialBoundsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn serialize_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

const CERT_SLACK: f64 = 1e-12;

fn bound_check(name: &'static str, lhs: BigRational, rhs: f64) -> BoundCheck {
    let lhs_f64 = rational_to_f64(&lhs);
    BoundCheck {
        name,
        pass: lhs_f64 <= rhs + CERT_SLACK * rhs.abs(),
        lhs,
        lhs_f64,
        rhs,
    }
}

/// Evaluates the three elementary binomial bounds
/// `C(n,k) <= (en/k)^k`, `C(m,k)/C(n,k) <= (m/n)^k` and
/// `C(n-j,k-j)/C(n,k) <= (k/n)^j` for `j <= k <= m <= n`.
pub fn check_binomial_bounds(j: u64, k: u64, m: u64, n: u64) -> Result<BinomialBoundsReport> {
    if !(j <= k && k <= m && m <= n) || n == 0 || k == 0 {
        return Err(Error::Precondition(format!(
            "need j <= k <= m <= n with n, k >= 1; got j={j} k={k} m={m} n={n}"
        )));
    }
    let c_nk = rational_from_uint(binom(n, k));
    let (nf, kf, mf, jf) = (n as f64, k as f64, m as f64, j as f64);

    let first = bound_check("binom_le_en_over_k_pow_k", c_nk.clone(), (E * nf / kf).powf(kf));
    let second = bound_check(
        "binom_ratio_le_m_over_n_pow_k",
        rational_from_uint(binom(m, k)) / c_nk.clone(),
        (mf / nf).powf(kf),
    );
    let third = bound_check(
        "binom_shift_le_k_over_n_pow_j",
        rational_from_uint(binom(n - j, k - j)) / c_nk,
        (kf / nf).powf(jf),
    );
    Ok(BinomialBoundsReport {
        j,
        k,
        m,
        n,
        checks: vec![first, second, third],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pascal(rows: usize) -> Vec<Vec<BigUint>> {
        let mut t: Vec<Vec<BigUint>> = vec![vec![BigUint::one()]];
        for n in 1..=rows {
            let prev = &t[n - 1];
            let mut row = vec![BigUint::one(); n + 1];
            for k in 1..n {
                row[k] = &prev[k - 1] + &prev[k];
            }
            t.push(row);
        }
        t
    }

    #[test]
    fn binom_small_values() {
        assert_eq!(binom(5, 2), BigUint::from(10u32));
        assert_eq!(binom(17, 0), BigUint::one());
        assert_eq!(binom(3, 5), BigUint::zero());
        let tri = pascal(10);
        assert_eq!(binom(10, 5), tri[10][5]);
        assert_eq!(binom(10, 5), BigUint::from(252u32));
    }

    #[test]
    fn binom_matches_pascal_triangle() {
        let tri = pascal(60);
        for n in 0..=60u64 {
            for k in 0..=n {
                assert_eq!(binom(n, k), tri[n as usize][k as usize], "C({n},{k})");
                assert_eq!(binom(n, k), binom(n, n - k));
            }
        }
    }

    #[test]
    fn binom_u128_agrees_with_big() {
        for n in 0..=120u64 {
            for k in 0..=n {
                let big = binom(n, k);
                match binom_u128(n, k) {
                    Some(v) => assert_eq!(BigUint::from(v), big, "C({n},{k})"),
                    None => assert!(big.bits() > 127, "C({n},{k}) should fit"),
                }
            }
        }
        assert_eq!(binom_u64(1 << 20, 2), Some((1u64 << 20) * ((1 << 20) - 1) / 2));
    }

    #[test]
    fn log_binom_examples() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10;
        assert!(close(log_binom(5, 2).unwrap().ln_abs(), 10f64.ln()));
        let n = 1e6_f64;
        assert!(close(
            log_binom(1_000_000, 2).unwrap().ln_abs(),
            (n * (n - 1.0) / 2.0).ln()
        ));
        assert!(close(log_binom(20, 10).unwrap().ln_abs(), 184756f64.ln()));
        assert!(matches!(log_binom(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn log_binom_large_arguments_against_exact() {
        for &(n, k) in &[(1000u64, 500u64), (1000, 65), (1000, 200), (999, 333), (200, 100)] {
            let exact = ln_biguint(&binom(n, k));
            assert!((ln_binom(n, k) - exact).abs() <= 1e-10, "({n},{k})");
        }
        // Large n, centre: compare against a direct log sum in extended order.
        let (n, k) = (1_000_000u64, 500_000u64);
        let direct: f64 = {
            let mut terms: Vec<f64> = (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).collect();
            terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for t in terms {
                let y = t - comp;
                let s = sum + y;
                comp = (s - sum) - y;
                sum = s;
            }
            sum
        };
        assert!((ln_binom(n, k) - direct).abs() / direct.abs() < 1e-12);
    }

    #[test]
    fn log_scalar_arithmetic() {
        let a = LogScalar::from_f64(3.0);
        let b = LogScalar::from_f64(-5.0);
        assert!(((a + b).to_f64() + 2.0).abs() < 1e-12);
        assert!(((a * b).to_f64() + 15.0).abs() < 1e-12);
        assert!((a + LogScalar::from_f64(-3.0)).is_zero());
        assert_eq!(a.powi(0), LogScalar::ONE);
        assert!(LogScalar::ZERO < a && b < LogScalar::ZERO);
        let tiny = LogScalar::from_ln(-2000.0);
        assert_eq!(tiny.to_f64(), 0.0);
        assert!(((tiny * tiny.recip()).to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_bounds_examples() {
        let rep = check_binomial_bounds(0, 2, 3, 6).unwrap();
        assert_eq!(rep.checks[0].lhs, ratio(15, 1));
        assert!((rep.checks[0].rhs - 9.0 * E * E).abs() < 1e-9);
        assert!(rep.all_pass());

        let rep = check_binomial_bounds(4, 4, 7, 9).unwrap();
        assert_eq!(rep.checks[2].lhs, ratio(1, 126));
        assert!(rep.checks[2].pass);

        let rep = check_binomial_bounds(0, 3, 5, 8).unwrap();
        assert_eq!(rep.checks[2].lhs, ratio(1, 1));
        assert_eq!(rep.checks[2].rhs, 1.0);
        assert!(rep.checks[2].pass);

        assert!(matches!(check_binomial_bounds(3, 2, 4, 5), Err(Error::Precondition(_))));
    }

    #[test]
    fn binomial_bounds_full_grid() {
        let mut failures = 0;
        for n in 1..=40u64 {
            for m in 1..=n {
                for k in 1..=m {
                    for j in 1..=k {
                        if !check_binomial_bounds(j, k, m, n).unwrap().all_pass() {
                            failures += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(failures, 0);
    }

    proptest! {
        #[test]
        fn pascal_rule(n in 1u64..=60, k in 1u64..=60) {
            prop_assume!(k <= n);
            prop_assert_eq!(binom(n, k), binom(n - 1, k - 1) + binom(n - 1, k));
        }

        #[test]
        fn rational_products_are_exact(a in 1i64..10_000, b in 1i64..10_000) {
            let q = ratio(a, b);
            prop_assert_eq!(q.clone() * q.recip(), BigRational::one());
        }
    }
}
