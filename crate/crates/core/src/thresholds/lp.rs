//! Dense simplex for covering LPs
//!
//! ```text
//! min  Σ_t c_t x_t   s.t.  Σ_{t ∈ rows[s]} x_t >= 1  for every s,   x >= 0
//! ```
//!
//! solved through its packing dual `max Σ_s y_s  s.t.  Σ_{s ∋ t} y_s <= c_t`,
//! for which the origin is feasible. Bland's rule rules out cycling. The
//! covering solution is read off the reduced costs of the dual slacks.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;
/// Largest dense tableau accepted.
pub const MAX_TABLEAU_CELLS: usize = 60_000_000;

#[derive(Debug, Clone)]
pub struct CoveringSolution {
    /// Optimal value of the packing dual, a lower bound on the covering optimum.
    pub dual_value: f64,
    /// Covering solution, one entry per column (clamped to `[0, 1]`).
    pub x: Vec<f64>,
    pub pivots: u64,
}

/// `rows[s]` lists the column indices `t` that cover constraint `s`; `cost[t] > 0`.
pub fn solve_covering(rows: &[Vec<usize>], cost: &[f64]) -> Result<CoveringSolution> {
    let nt = cost.len();
    let ns = rows.len();
    if ns == 0 {
        return Ok(CoveringSolution {
            dual_value: 0.0,
            x: vec![0.0; nt],
            pivots: 0,
        });
    }
    if rows.iter().any(|r| r.is_empty()) {
        return Err(Error::Precondition(
            "covering LP has a constraint no column covers".into(),
        ));
    }
    if nt.saturating_mul(ns) > MAX_TABLEAU_CELLS {
        return Err(Error::Capacity(format!("LP tableau {nt} x {ns} too large")));
    }

    // Dictionary: basic_i = b_i - Σ_j a[i][j] nonbasic_j,  z = z0 + Σ_j d_j nonbasic_j.
    // Labels 0..ns are the y_s, ns..ns+nt the slacks of the dual rows.
    let mut a = vec![0.0f64; nt * ns];
    for (s, row) in rows.iter().enumerate() {
        for &t in row {
            a[t * ns + s] = 1.0;
        }
    }
    let mut b: Vec<f64> = cost.to_vec();
    let mut d = vec![1.0f64; ns];
    let mut z = 0.0f64;
    let mut col_label: Vec<usize> = (0..ns).collect();
    let mut row_label: Vec<usize> = (ns..ns + nt).collect();
    let mut pivots = 0u64;

    loop {
        let mut enter: Option<usize> = None;
        for j in 0..ns {
            if d[j] > COST_EPS && enter.is_none_or(|e| col_label[j] < col_label[e]) {
                enter = Some(j);
            }
        }
        let Some(e) = enter else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..nt {
            let aie = a[i * ns + e];
            if aie > PIVOT_EPS {
                let ratio = b[i] / aie;
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < best - 1e-14 * best.abs().max(1.0)
                            || (ratio <= best + 1e-14 * best.abs().max(1.0) && row_label[i] < row_label[l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Precondition("packing LP unbounded".into()));
        };

        let piv = a[r * ns + e];
        let inv = 1.0 / piv;
        for j in 0..ns {
            a[r * ns + j] *= inv;
        }
        a[r * ns + e] = inv;
        b[r] *= inv;
        let prow: Vec<f64> = a[r * ns..(r + 1) * ns].to_vec();
        for i in 0..nt {
            if i == r {
                continue;
            }
            let f = a[i * ns + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut a[i * ns..(i + 1) * ns];
            for j in 0..ns {
                row[j] -= f * prow[j];
            }
            row[e] = -f * inv;
            b[i] -= f * b[r];
            if b[i] < 0.0 && b[i] > -1e-12 {
                b[i] = 0.0;
            }
        }
        let de = d[e];
        for j in 0..ns {
            d[j] -= de * prow[j];
        }
        d[e] = -de * inv;
        z += de * b[r];
        std::mem::swap(&mut col_label[e], &mut row_label[r]);
        pivots += 1;
    }

    let mut x = vec![0.0f64; nt];
    for (j, &label) in col_label.iter().enumerate() {
        if label >= ns {
            x[label - ns] = (-d[j]).clamp(0.0, 1.0);
        }
    }
    Ok(CoveringSolution {
        dual_value: z,
        x,
        pivots,
    })
}

/// Smallest slack `Σ_{t ∈ rows[s]} x_t - 1` over all constraints.
pub fn min_coverage_slack(rows: &[Vec<usize>], x: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().map(|&t| x[t]).sum::<f64>() - 1.0)
        .fold(f64::INFINITY, f64::min)
}
