//! The diagnostic battery along a kernel family, and its report files.

use serde::{Deserialize, Serialize};

use super::family::KernelFamily;
use super::trend::{trend_summary, TrendSummary, TrendThresholds};
use crate::error::Result;
use crate::kernel::{contraction_profile, ContractionNorms};
use crate::metrics::{
    bl_distance_1d, ecf_distance, kolmogorov_1d, EcfDistance, EcfGrid, DEFAULT_HALF_WIDTH,
    DEFAULT_POINTS_PER_AXIS,
};
use crate::moments::{covariance_matrix, fourth_cumulant, malliavin_variance, variance, MalliavinMoments};
use crate::rng::{derive_seed, domain};
use crate::sampler::{sample_batch, sample_gaussian_surrogate, Companions, DEFAULT_SAMPLES};

/// Shown in every JSON report.
pub const WEAK_CONVERGENCE_NOTE: &str = "weak convergence is certified through the \
ECF sup-distance on [-T,T]^k against the exact-covariance Gaussian; no Prokhorov or \
multivariate bounded-Lipschitz distance is computed";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub samples: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    /// Compute per-coordinate bounded-Lipschitz distances.
    pub bl: bool,
    /// The bounded-Lipschitz distance uses at most this many draws per side.
    pub bl_max_samples: usize,
    pub thresholds: TrendThresholds,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: DEFAULT_SAMPLES,
            half_width: DEFAULT_HALF_WIDTH,
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
            bl: true,
            bl_max_samples: 20_000,
            thresholds: TrendThresholds::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlEstimate {
    /// β between the chaos draws and matched Gaussian draws.
    pub value: f64,
    /// β between two independent Gaussian samples of the same size.
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    /// 1-based component index.
    pub j: usize,
    pub order: usize,
    pub variance: f64,
    pub contractions: Vec<ContractionNorms>,
    pub fourth_cumulant: f64,
    pub malliavin: MalliavinMoments,
    pub kolmogorov: f64,
    /// Kolmogorov distance of the Gaussian surrogate column.
    pub kolmogorov_floor: f64,
    pub bl: Option<BlEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub l: u32,
    pub dim: usize,
    pub seed: u64,
    pub covariance: Vec<Vec<f64>>,
    pub ecf: EcfDistance,
    /// ECF distance of the Gaussian surrogate draws against the same covariance.
    pub ecf_floor: f64,
    pub components: Vec<ComponentRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub family: String,
    pub eta: f64,
    pub variance_bound: f64,
    pub config: BatteryConfig,
    pub rows: Vec<ReportRow>,
}

/// Seed of the Monte Carlo streams for family row `l`.
pub fn row_seed(seed: u64, l: u32) -> u64 {
    derive_seed(derive_seed(seed, domain::FAMILY_ROW), l as u64)
}

/// Exact columns of one component.
fn exact_component(j: usize, f: &crate::kernel::SymmetricKernel) -> ComponentRow {
    ComponentRow {
        j: j + 1,
        order: f.order(),
        variance: variance(f),
        contractions: if f.order() >= 2 { contraction_profile(f).expect("order >= 2") } else { Vec::new() },
        fourth_cumulant: fourth_cumulant(f),
        malliavin: malliavin_variance(f),
        kolmogorov: f64::NAN,
        kolmogorov_floor: f64::NAN,
        bl: None,
    }
}

/// Runs every diagnostic on every member of the family. Exact columns are
/// deterministic; Monte Carlo columns use the per-row streams of
/// [`row_seed`].
pub fn run_battery(family: &KernelFamily, config: &BatteryConfig) -> Result<DiagnosticsReport> {
    let mut rows = Vec::with_capacity(family.len());
    for member in family.members() {
        let spec = &member.spec;
        let seed = row_seed(config.seed, member.l);
        let cov = covariance_matrix(spec)?;
        let grid = EcfGrid::lattice(spec.k(), config.half_width, config.points_per_axis)?;
        let batch = sample_batch(spec, config.samples, seed, Companions { malliavin: false, surrogate: true })?;
        let surrogate = batch.surrogate.as_ref().expect("requested");
        let ecf = ecf_distance(&batch.draws, &cov, &grid)?;
        let ecf_floor = ecf_distance(surrogate, &cov, &grid)?.distance;

        let second = if config.bl {
            let m = config.samples.min(config.bl_max_samples);
            Some(sample_gaussian_surrogate(&cov, m, derive_seed(seed, domain::BL_FLOOR))?)
        } else {
            None
        };
        let mut components = Vec::with_capacity(spec.k());
        for (j, f) in spec.components().iter().enumerate() {
            let mut row = exact_component(j, f);
            let var = cov[(j, j)];
            let x = batch.draws.column(j);
            let g = surrogate.column(j);
            row.kolmogorov = kolmogorov_1d(&x, var)?;
            row.kolmogorov_floor = kolmogorov_1d(&g, var)?;
            if let Some(second) = &second {
                let m = second.rows();
                let h = second.column(j);
                row.bl = Some(BlEstimate {
                    value: bl_distance_1d(&x[..m], &g[..m])?,
                    floor: bl_distance_1d(&g[..m], &h)?,
                });
            }
            components.push(row);
        }
        rows.push(ReportRow {
            l: member.l,
            dim: spec.dim(),
            seed,
            covariance: (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect(),
            ecf,
            ecf_floor,
            components,
        });
    }
    Ok(DiagnosticsReport {
        family: family.name().to_string(),
        eta: family.eta(),
        variance_bound: family.variance_bound(),
        config: *config,
        rows,
    })
}

/// 17 significant digits, `.` decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const CONTRACTIONS_HEADER: &str = "l,j,order,p,contraction_norm_sq,sym_contraction_norm_sq";
pub const SCALARS_HEADER: &str = "l,j,order,variance,fourth_cumulant,malliavin_mean,malliavin_variance,kolmogorov,kolmogorov_floor,bl,bl_floor";
pub const DISTANCES_HEADER: &str = "l,k,ecf_distance,ecf_se,ecf_floor";
pub const COVARIANCE_HEADER: &str = "l,i,j,value";

impl DiagnosticsReport {
    /// One row per `(l, j, p)`.
    pub fn contractions_csv(&self) -> String {
        let mut out = String::from(CONTRACTIONS_HEADER);
        out.push('\n');
        for r in &self.rows {
            for c in &r.components {
                for p in &c.contractions {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.l,
                        c.j,
                        c.order,
                        p.p,
                        fmt_f64(p.full),
                        fmt_f64(p.symmetrized)
                    ));
                }
            }
        }
        out
    }

    /// One row per `(l, j)`.
    pub fn scalars_csv(&self) -> String {
        let mut out = String::from(SCALARS_HEADER);
        out.push('\n');
        for r in &self.rows {
            for c in &r.components {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.l,
                    c.j,
                    c.order,
                    fmt_f64(c.variance),
                    fmt_f64(c.fourth_cumulant),
                    fmt_f64(c.malliavin.mean),
                    fmt_f64(c.malliavin.variance),
                    fmt_f64(c.kolmogorov),
                    fmt_f64(c.kolmogorov_floor),
                    opt(c.bl.map(|b| b.value)),
                    opt(c.bl.map(|b| b.floor)),
                ));
            }
        }
        out
    }

    /// One row per `l`.
    pub fn distances_csv(&self) -> String {
        let mut out = String::from(DISTANCES_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.l,
                r.components.len(),
                fmt_f64(r.ecf.distance),
                fmt_f64(r.ecf.se),
                fmt_f64(r.ecf_floor)
            ));
        }
        out
    }

    pub fn covariance_csv(&self) -> String {
        let mut out = String::from(COVARIANCE_HEADER);
        out.push('\n');
        for r in &self.rows {
            for (i, row) in r.covariance.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{}\n", r.l, i + 1, j + 1, fmt_f64(*v)));
                }
            }
        }
        out
    }

    pub fn trend(&self) -> Result<TrendSummary> {
        trend_summary(self, &self.config.thresholds)
    }

    /// JSON mirror of the report with metadata; `extra` is embedded verbatim
    /// under `"run"` (resolved command-line configuration and the like).
    pub fn to_json(&self, extra: serde_json::Value) -> String {
        let trend = self.trend().ok();
        let doc = serde_json::json!({
            "artifact": "chaoslab",
            "version": env!("CARGO_PKG_VERSION"),
            "note": WEAK_CONVERGENCE_NOTE,
            "run": extra,
            "trend": trend,
            "report": self,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::family::builtin_family;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(48.0), "4.8000000000000000e1");
        assert_eq!(fmt_f64(-0.125), "-1.2500000000000000e-1");
    }

    #[test]
    fn small_battery_shapes() {
        let fam = builtin_family("oscillating_pair", 0, 1).unwrap();
        let cfg = BatteryConfig { samples: 500, points_per_axis: 9, bl_max_samples: 200, ..Default::default() };
        let rep = run_battery(&fam, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].covariance, vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        assert_eq!(rep.contractions_csv().lines().count(), 1 + 2 * 2);
        assert_eq!(rep.scalars_csv().lines().count(), 1 + 2 * 2);
        assert_eq!(rep.distances_csv().lines().count(), 1 + 2);
        assert_eq!(rep.covariance_csv().lines().count(), 1 + 2 * 4);
        // fewer than four rows: no trend, but the JSON still renders
        assert!(rep.trend().is_err());
        assert!(rep.to_json(serde_json::Value::Null).contains("\"trend\": null"));
    }
}
