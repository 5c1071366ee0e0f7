//! Classifying report columns as vanishing along the family.
//!
//! The thresholds are artifact policy: a column "vanishes" when its log-log
//! slope (log value against log of the row position) is below `slope` and
//! its last value is small. Exact columns compare the last value to the
//! column maximum; Monte Carlo columns compare it to the matching
//! Gaussian-surrogate noise floor.

use serde::{Deserialize, Serialize};

use super::report::DiagnosticsReport;
use crate::error::{Error, Result};

pub const MIN_ROWS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Vanishing,
    NonVanishing,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendThresholds {
    pub slope: f64,
    /// Exact columns: last value over column maximum.
    pub relative_tolerance: f64,
    /// Monte Carlo columns: last value over its noise floor.
    pub floor_multiplier: f64,
}

impl Default for TrendThresholds {
    fn default() -> Self {
        Self { slope: -0.2, relative_tolerance: 1e-2, floor_multiplier: 3.0 }
    }
}

/// Values below this are treated as exact zeros.
const ZERO: f64 = 1e-12;

fn log_log_slope(values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Verdict for a deterministic non-negative column.
pub fn classify_exact(values: &[f64], th: &TrendThresholds) -> Verdict {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= ZERO {
        return Verdict::Vanishing;
    }
    let last = *values.last().expect("non-empty column");
    let small = last / max < th.relative_tolerance;
    let falling = log_log_slope(values).is_some_and(|s| s < th.slope);
    match (falling, small) {
        (true, true) => Verdict::Vanishing,
        (false, false) => Verdict::NonVanishing,
        _ => Verdict::Inconclusive,
    }
}

/// Verdict for a Monte Carlo distance column with per-row noise floors.
pub fn classify_mc(values: &[f64], floors: &[f64], th: &TrendThresholds) -> Verdict {
    let last = *values.last().expect("non-empty column");
    let floor = *floors.last().expect("non-empty column");
    if last <= th.floor_multiplier * floor {
        Verdict::Vanishing
    } else if log_log_slope(values).is_some_and(|s| s < th.slope) {
        Verdict::Inconclusive
    } else {
        Verdict::NonVanishing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentVerdicts {
    pub j: usize,
    /// Contractions: `max_p ‖f ⊗_p f‖²`.
    pub contractions: Verdict,
    /// Fourth cumulant.
    pub fourth_cumulant: Verdict,
    /// Variance of `‖DF‖²`.
    pub malliavin_variance: Verdict,
    /// Kolmogorov distance to the matched normal.
    pub kolmogorov: Verdict,
    pub bl: Option<Verdict>,
}

impl ComponentVerdicts {
    /// Whether the three exact columns agree.
    pub fn exact_agree(&self) -> bool {
        self.contractions == self.fourth_cumulant && self.fourth_cumulant == self.malliavin_variance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub components: Vec<ComponentVerdicts>,
    /// ECF distance in the full dimension k.
    pub ecf: Verdict,
}

impl TrendSummary {
    pub fn exact_agree(&self) -> bool {
        self.components.iter().all(ComponentVerdicts::exact_agree)
    }

    /// Common verdict of the exact columns over all components, if any.
    pub fn exact_verdict(&self) -> Option<Verdict> {
        let first = self.components.first()?.contractions;
        self.components
            .iter()
            .all(|c| c.exact_agree() && c.contractions == first)
            .then_some(first)
    }
}

pub fn trend_summary(report: &DiagnosticsReport, th: &TrendThresholds) -> Result<TrendSummary> {
    let rows = &report.rows;
    if rows.len() < MIN_ROWS {
        return Err(Error::InvalidArgument(format!(
            "trend summary needs at least {MIN_ROWS} rows, got {}",
            rows.len()
        )));
    }
    let k = rows[0].components.len();
    let components = (0..k)
        .map(|j| {
            let col = |f: &dyn Fn(&super::report::ComponentRow) -> f64| -> Vec<f64> {
                rows.iter().map(|r| f(&r.components[j])).collect()
            };
            let contractions = col(&|c| c.contractions.iter().map(|p| p.full).fold(0.0, f64::max));
            let kappa = col(&|c| c.fourth_cumulant);
            let mall = col(&|c| c.malliavin.variance);
            let ks = col(&|c| c.kolmogorov);
            let ks_floor = col(&|c| c.kolmogorov_floor);
            let bl = rows.iter().all(|r| r.components[j].bl.is_some()).then(|| {
                let v = col(&|c| c.bl.expect("checked").value);
                let f = col(&|c| c.bl.expect("checked").floor);
                classify_mc(&v, &f, th)
            });
            ComponentVerdicts {
                j: j + 1,
                contractions: classify_exact(&contractions, th),
                fourth_cumulant: classify_exact(&kappa, th),
                malliavin_variance: classify_exact(&mall, th),
                kolmogorov: classify_mc(&ks, &ks_floor, th),
                bl,
            }
        })
        .collect();
    let ecf: Vec<f64> = rows.iter().map(|r| r.ecf.distance).collect();
    let ecf_floor: Vec<f64> = rows.iter().map(|r| r.ecf_floor).collect();
    Ok(TrendSummary { components, ecf: classify_mc(&ecf, &ecf_floor, th) })
}
