//! Seeded experiment grid: sample `H ~ H^(k)(n, m)`, build the cover and
//! record `w(G, p/L)` per seed, then aggregate the failure frequency per
//! ground-set size.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{build_cover, default_covering_constant};
use crate::error::{Error, Result};
use crate::exactmath::binom_u64;
use crate::hypergraph::sample_hnm;
use crate::seed::SeedSpec;
use crate::stats::clopper_pearson;
use crate::weights::{weight_cover, WeightMode};

/// Confidence of the per-cell binomial bounds.
pub const SUMMARY_CONFIDENCE: f64 = 0.99;
/// Allowed excess of the failure frequency over `1/ln n`.
pub const SUMMARY_SLACK: f64 = 0.05;

fn default_l() -> f64 {
    default_covering_constant()
}

fn default_trials() -> u64 {
    2000
}

fn default_mode() -> WeightMode {
    WeightMode::Auto
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub n_grid: Vec<u32>,
    pub k: u32,
    pub r: u32,
    /// `list:m1,m2,..` (one per grid entry), `fixed:m`, `density:d`
    /// (`m = round(d C(n,k))`) or `npj:c` (`p = c (k+1)/n`, `m = round(r/p^k)`).
    pub m_rule: String,
    #[serde(rename = "L", default = "default_l")]
    pub covering_constant: f64,
    pub seeds_per_cell: u64,
    #[serde(default = "default_trials")]
    pub trials_mc: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
    /// Write wall-clock times into `runtime_ms`; off by default so the CSV
    /// is reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_mode")]
    pub weight_mode: WeightMode,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `m` for every grid entry, after validating the whole config.
    pub fn resolve(&self) -> Result<Vec<(u32, u64)>> {
        if self.n_grid.is_empty() {
            return Err(Error::Validation("n_grid is empty".into()));
        }
        if self.k == 0 || self.r == 0 {
            return Err(Error::Validation("k and r must be at least 1".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::Validation("seeds_per_cell must be at least 1".into()));
        }
        if !(self.covering_constant.is_finite() && self.covering_constant > 0.0) {
            return Err(Error::Validation(format!(
                "L = {} must be positive",
                self.covering_constant
            )));
        }
        let ms = resolve_m_rule(&self.m_rule, &self.n_grid, self.k, self.r)?;
        for (&n, &m) in self.n_grid.iter().zip(&ms) {
            if n < self.k {
                return Err(Error::Validation(format!("n = {n} is below k = {}", self.k)));
            }
            let total = binom_u64(u64::from(n), u64::from(self.k)).unwrap_or(u64::MAX);
            if m > total {
                return Err(Error::Validation(format!(
                    "m = {m} exceeds C({n},{}) = {total}",
                    self.k
                )));
            }
        }
        Ok(self.n_grid.iter().copied().zip(ms).collect())
    }
}

fn parse_err(rule: &str) -> Error {
    Error::Validation(format!(
        "m_rule `{rule}` not understood; expected list:a,b,..  fixed:m  density:d  npj:c"
    ))
}

pub fn resolve_m_rule(rule: &str, n_grid: &[u32], k: u32, r: u32) -> Result<Vec<u64>> {
    let (kind, arg) = rule.split_once(':').ok_or_else(|| parse_err(rule))?;
    let arg = arg.trim();
    match kind.trim() {
        "list" => {
            let ms = arg
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|_| parse_err(rule)))
                .collect::<Result<Vec<_>>>()?;
            if ms.len() != n_grid.len() {
                return Err(Error::Validation(format!(
                    "m_rule lists {} values for {} grid entries",
                    ms.len(),
                    n_grid.len()
                )));
            }
            Ok(ms)
        }
        "fixed" => {
            let m = arg.parse::<u64>().map_err(|_| parse_err(rule))?;
            Ok(vec![m; n_grid.len()])
        }
        "density" => {
            let d = arg.parse::<f64>().map_err(|_| parse_err(rule))?;
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Validation(format!("density {d} outside [0, 1]")));
            }
            Ok(n_grid
                .iter()
                .map(|&n| {
                    let total = binom_u64(u64::from(n), u64::from(k)).unwrap_or(u64::MAX);
                    (d * total as f64).round() as u64
                })
                .collect())
        }
        "npj" => {
            let c = arg.parse::<f64>().map_err(|_| parse_err(rule))?;
            if !(c.is_finite() && c > 0.0) {
                return Err(parse_err(rule));
            }
            Ok(n_grid
                .iter()
                .map(|&n| {
                    let total = binom_u64(u64::from(n), u64::from(k)).unwrap_or(u64::MAX);
                    let p = (c * f64::from(k + 1) / f64::from(n)).min(1.0);
                    let m = (f64::from(r) / p.powi(k as i32)).round() as u64;
                    m.clamp(u64::from(r).min(total), total)
                })
                .collect())
        }
        _ => Err(parse_err(rule)),
    }
}

/// One campaign row; the field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRow {
    pub n: u32,
    pub k: u32,
    pub r: u32,
    pub m: u64,
    #[serde(rename = "L")]
    pub covering_constant: f64,
    pub seed_index: u64,
    pub p: f64,
    pub w_total: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub success: bool,
    pub g0_count: u64,
    pub runtime_ms: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub n: u32,
    pub m: u64,
    pub rows: u64,
    pub failures: u64,
    pub errors: u64,
    pub frequency: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub target: f64,
    /// Lower confidence bound above `target + slack`.
    pub exceeds_target: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub confidence: f64,
    pub slack: f64,
    pub cells: Vec<CellSummary>,
}

impl CampaignSummary {
    pub fn passes(&self) -> bool {
        self.cells.iter().all(|c| !c.exceeds_target)
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub rows: Vec<CampaignRow>,
    pub summary: CampaignSummary,
}

fn run_row(cfg: &CampaignConfig, n: u32, m: u64, seed_index: u64, task: u64) -> CampaignRow {
    let started = Instant::now();
    let mut row = CampaignRow {
        n,
        k: cfg.k,
        r: cfg.r,
        m,
        covering_constant: cfg.covering_constant,
        seed_index,
        p: 0.0,
        w_total: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
        success: false,
        g0_count: 0,
        runtime_ms: 0,
        error: String::new(),
    };
    let seed = SeedSpec::new(cfg.master_seed, task);
    let result = sample_hnm(n, cfg.k, m, &seed).and_then(|h| {
        let cover = build_cover(&h, cfg.r, cfg.covering_constant)?;
        let w = weight_cover(&h, cfg.r, &cover, cfg.weight_mode, cfg.trials_mc, &seed.child(1))?;
        Ok((cover, w))
    });
    match result {
        Ok((cover, w)) => {
            row.p = cover.density.p;
            row.w_total = w.total.value;
            row.ci_low = w.total.ci_low;
            row.ci_high = w.total.ci_high;
            row.success = w.total.ci_high < 1.0;
            row.g0_count = cover.g0_sets.len() as u64;
        }
        Err(e) => row.error = e.to_string(),
    }
    if cfg.record_timing {
        row.runtime_ms = started.elapsed().as_millis() as u64;
    }
    row
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutcome> {
    let cells = cfg.resolve()?;
    let work: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.seeds_per_cell).map(move |s| (c, s)))
        .collect();
    let rows: Vec<CampaignRow> = work
        .par_iter()
        .enumerate()
        .map(|(task, &(c, s))| {
            let (n, m) = cells[c];
            run_row(cfg, n, m, s, task as u64)
        })
        .collect();
    let summary = summarize(&cells, &rows);
    Ok(CampaignOutcome { rows, summary })
}

pub fn summarize(cells: &[(u32, u64)], rows: &[CampaignRow]) -> CampaignSummary {
    let cells = cells
        .iter()
        .map(|&(n, m)| {
            let mine: Vec<&CampaignRow> = rows.iter().filter(|r| r.n == n && r.m == m).collect();
            let total = mine.len() as u64;
            let failures = mine.iter().filter(|r| !r.success).count() as u64;
            let errors = mine.iter().filter(|r| !r.error.is_empty()).count() as u64;
            let (lower_bound, upper_bound) = if total > 0 {
                clopper_pearson(failures, total, SUMMARY_CONFIDENCE)
            } else {
                (0.0, 1.0)
            };
            let target = 1.0 / f64::from(n).ln();
            CellSummary {
                n,
                m,
                rows: total,
                failures,
                errors,
                frequency: if total > 0 { failures as f64 / total as f64 } else { 0.0 },
                lower_bound,
                upper_bound,
                target,
                exceeds_target: lower_bound > target + SUMMARY_SLACK,
            }
        })
        .collect();
    CampaignSummary {
        confidence: SUMMARY_CONFIDENCE,
        slack: SUMMARY_SLACK,
        cells,
    }
}

pub fn write_csv<W: Write>(rows: &[CampaignRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
