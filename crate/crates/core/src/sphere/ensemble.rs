//! Ensembles of normalized frequency components at fixed probe points and
//! their Gaussian-approximation diagnostics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{
    check_order, subordinate, subordinated_second_moment, ComponentAnalyzer, FieldSimulator, HarmonicTable,
    PowerSpectrum, SphereGrid,
};
use super::harmonics::{cos_angle, legendre_unchecked};
use crate::diagnostics::report::fmt_f64;
use crate::error::{Error, Result};
use crate::metrics::{ecf_distance, kolmogorov_1d, EcfDistance, EcfGrid, DEFAULT_HALF_WIDTH, DEFAULT_POINTS_PER_AXIS};
use crate::rng::{derive_seed, domain};
use crate::sampler::{sample_gaussian_surrogate, SampleMatrix};

pub const MIN_REALIZATIONS: usize = 1000;
pub const DEFAULT_REALIZATIONS: usize = 4000;

/// Probe points `(θ, φ)`: the north pole followed by points on the
/// meridian `φ = 0` at `θ = π/6, π/4, π/3, π/2, 2π/3, π`.
pub const PROBE_POINTS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (PI / 6.0, 0.0),
    (PI / 4.0, 0.0),
    (PI / 3.0, 0.0),
    (PI / 2.0, 0.0),
    (2.0 * PI / 3.0, 0.0),
    (PI, 0.0),
];

/// Probe points entering the joint ECF distance: pole, `θ = π/4`, `θ = π/2`.
pub const ECF_PROBES: [usize; 3] = [0, 2, 4];

/// Components whose variance falls below this fraction of `q!` are degenerate.
pub const DEGENERATE_FRACTION: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereConfig {
    pub seed: u64,
    pub realizations: usize,
    /// Latitude nodes; `q · L_max + 2` when unset.
    pub n_theta: Option<usize>,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            realizations: DEFAULT_REALIZATIONS,
            n_theta: None,
            half_width: DEFAULT_HALF_WIDTH,
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
        }
    }
}

/// Normalized `T̄_l^{(q)}` at the probe points over an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentEnsemble {
    pub l: usize,
    /// Monte Carlo estimate of `Var T_l^{(q)}(x)`.
    pub variance: f64,
    pub degenerate: bool,
    /// Realizations by probe points; zero when degenerate.
    pub values: SampleMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereEnsemble {
    pub q: usize,
    pub spectrum: PowerSpectrum,
    pub n_theta: usize,
    pub config: SphereConfig,
    pub components: Vec<ComponentEnsemble>,
}

/// Simulates the ensemble and normalizes each requested component by its
/// estimated variance `E Σ_m a_{lm;q}² / 4π`.
pub fn normalized_components(
    spectrum: &PowerSpectrum,
    q: usize,
    ls: &[usize],
    config: &SphereConfig,
) -> Result<SphereEnsemble> {
    check_order(q)?;
    if ls.is_empty() {
        return Err(Error::InvalidArgument("no degrees requested".into()));
    }
    if config.realizations < MIN_REALIZATIONS {
        return Err(Error::InvalidArgument(format!(
            "ensemble of {} realizations is below the minimum {MIN_REALIZATIONS}",
            config.realizations
        )));
    }
    let n_theta = config.n_theta.unwrap_or(q * spectrum.l_max() + 2);
    let grid = SphereGrid::new(n_theta)?;
    let sim = FieldSimulator::new(spectrum, &grid)?;
    let l_top = *ls.iter().max().expect("non-empty");
    let analyzer = ComponentAnalyzer::new(&grid, l_top);
    for &l in ls {
        analyzer.check(q * spectrum.l_max(), l)?;
    }
    if (spectrum.field_variance() - 1.0).abs() > super::field::UNIT_VARIANCE_TOL {
        return Err(Error::Assumption(format!(
            "field variance {} is not 1; rescale the spectrum before subordination",
            spectrum.field_variance()
        )));
    }
    let probes = HarmonicTable::at_points(l_top, &PROBE_POINTS);
    let k = PROBE_POINTS.len();

    // per realization, per degree: (Σ_m a², probe values)
    let per_real: Vec<Vec<(f64, Vec<f64>)>> = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, Vec<f64>)>> {
            let field = sim.realization(config.seed, r);
            let h = subordinate(&field, q)?;
            ls.iter()
                .map(|&l| {
                    let a = analyzer.coefficients(&h, l)?;
                    let energy = a.iter().map(|x| x * x).sum();
                    Ok((energy, probes.synthesize(l * l, &a)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = config.realizations as f64;
    let threshold = DEGENERATE_FRACTION * subordinated_second_moment(q);
    let components = ls
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let variance = per_real.iter().map(|r| r[i].0).sum::<f64>() / n / (4.0 * PI);
            let degenerate = !(variance > threshold);
            let scale = if degenerate { 0.0 } else { 1.0 / variance.sqrt() };
            let data: Vec<f64> = per_real.iter().flat_map(|r| r[i].1.iter().map(|v| v * scale)).collect();
            ComponentEnsemble {
                l,
                variance,
                degenerate,
                values: SampleMatrix::new(config.realizations, k, data).expect("shape"),
            }
        })
        .collect();
    Ok(SphereEnsemble { q, spectrum: spectrum.clone(), n_theta, config: config.clone(), components })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCovariance {
    pub theta: f64,
    pub cos_angle: f64,
    /// `P_l(cos θ)`.
    pub legendre: f64,
    pub empirical: f64,
    pub se: f64,
}

impl ProbeCovariance {
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.legendre) / self.se
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub theta: f64,
    pub mean: f64,
    pub variance: f64,
    pub fourth_cumulant: f64,
    pub kolmogorov: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereRow {
    pub l: usize,
    pub variance: f64,
    pub degenerate: bool,
    /// Pole paired with each other probe point.
    pub covariance: Vec<ProbeCovariance>,
    pub marginals: Vec<Marginal>,
    pub ecf: Option<EcfDistance>,
    pub ecf_floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub q: usize,
    pub n_theta: usize,
    pub spectrum: Vec<f64>,
    pub config: SphereConfig,
    pub rows: Vec<SphereRow>,
}

/// Exact surrogate covariance `P_l(cos⟨x_i, x_j⟩)` among `points`.
pub fn legendre_covariance(l: usize, points: &[(f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), points.len(), |i, j| legendre_unchecked(l, cos_angle(points[i], points[j])))
}

fn covariance_table(l: usize, values: &SampleMatrix) -> Vec<ProbeCovariance> {
    let n = values.rows() as f64;
    (1..PROBE_POINTS.len())
        .map(|j| {
            let prods: Vec<f64> = values.iter_rows().map(|r| r[0] * r[j]).collect();
            let mean = prods.iter().sum::<f64>() / n;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let c = cos_angle(PROBE_POINTS[0], PROBE_POINTS[j]);
            ProbeCovariance {
                theta: PROBE_POINTS[j].0,
                cos_angle: c,
                legendre: legendre_unchecked(l, c),
                empirical: mean,
                se: (var / n).sqrt(),
            }
        })
        .collect()
}

fn marginal(theta: f64, x: &[f64]) -> Result<Marginal> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / n;
    Ok(Marginal {
        theta,
        mean,
        variance: m2 - mean * mean,
        fourth_cumulant: m4 - 3.0 * m2 * m2,
        kolmogorov: kolmogorov_1d(x, 1.0)?,
    })
}

/// Marginal fourth cumulants, Kolmogorov distances to `N(0, 1)`, the
/// covariance table against `P_l(cos θ)` and the joint ECF distance at
/// [`ECF_PROBES`] against the Gaussian with exact covariance `P_l`.
pub fn sphere_clt_diagnostics(ensemble: &SphereEnsemble) -> Result<SphereReport> {
    let cfg = &ensemble.config;
    let sub: Vec<(f64, f64)> = ECF_PROBES.iter().map(|&i| PROBE_POINTS[i]).collect();
    let grid = EcfGrid::lattice(sub.len(), cfg.half_width, cfg.points_per_axis)?;
    let mut rows = Vec::with_capacity(ensemble.components.len());
    for comp in &ensemble.components {
        if comp.degenerate {
            rows.push(SphereRow {
                l: comp.l,
                variance: comp.variance,
                degenerate: true,
                covariance: Vec::new(),
                marginals: Vec::new(),
                ecf: None,
                ecf_floor: None,
            });
            continue;
        }
        let marginals = PROBE_POINTS
            .iter()
            .enumerate()
            .map(|(j, p)| marginal(p.0, &comp.values.column(j)))
            .collect::<Result<Vec<_>>>()?;
        let cov = legendre_covariance(comp.l, &sub);
        let n = comp.values.rows();
        let joint: Vec<f64> = comp.values.iter_rows().flat_map(|r| ECF_PROBES.iter().map(|&i| r[i])).collect();
        let joint = SampleMatrix::new(n, sub.len(), joint)?;
        let ecf = ecf_distance(&joint, &cov, &grid)?;
        let seed = derive_seed(derive_seed(cfg.seed, domain::SURROGATE), comp.l as u64);
        let surrogate = sample_gaussian_surrogate(&cov, n, seed)?;
        let floor = ecf_distance(&surrogate, &cov, &grid)?.distance;
        rows.push(SphereRow {
            l: comp.l,
            variance: comp.variance,
            degenerate: false,
            covariance: covariance_table(comp.l, &comp.values),
            marginals,
            ecf: Some(ecf),
            ecf_floor: Some(floor),
        });
    }
    Ok(SphereReport {
        q: ensemble.q,
        n_theta: ensemble.n_theta,
        spectrum: ensemble.spectrum.values().to_vec(),
        config: cfg.clone(),
        rows,
    })
}

pub const SPHERE_COVARIANCE_HEADER: &str = "l,theta,cos_angle,legendre,empirical,se";
pub const SPHERE_MARGINALS_HEADER: &str = "l,theta,mean,variance,fourth_cumulant,kolmogorov";
pub const SPHERE_DISTANCES_HEADER: &str = "l,k,variance,degenerate,ecf_distance,ecf_se,ecf_floor";

impl SphereReport {
    pub fn covariance_csv(&self) -> String {
        let mut out = format!("{SPHERE_COVARIANCE_HEADER}\n");
        for r in &self.rows {
            for c in &r.covariance {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.l,
                    fmt_f64(c.theta),
                    fmt_f64(c.cos_angle),
                    fmt_f64(c.legendre),
                    fmt_f64(c.empirical),
                    fmt_f64(c.se)
                ));
            }
        }
        out
    }

    pub fn marginals_csv(&self) -> String {
        let mut out = format!("{SPHERE_MARGINALS_HEADER}\n");
        for r in &self.rows {
            for m in &r.marginals {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.l,
                    fmt_f64(m.theta),
                    fmt_f64(m.mean),
                    fmt_f64(m.variance),
                    fmt_f64(m.fourth_cumulant),
                    fmt_f64(m.kolmogorov)
                ));
            }
        }
        out
    }

    pub fn distances_csv(&self) -> String {
        let mut out = format!("{SPHERE_DISTANCES_HEADER}\n");
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.l,
                ECF_PROBES.len(),
                fmt_f64(r.variance),
                r.degenerate,
                opt(r.ecf.map(|e| e.distance)),
                opt(r.ecf.map(|e| e.se)),
                opt(r.ecf_floor)
            ));
        }
        out
    }

    pub fn to_json(&self, extra: serde_json::Value) -> String {
        let doc = serde_json::json!({
            "artifact": "chaoslab",
            "version": env!("CARGO_PKG_VERSION"),
            "run": extra,
            "probe_points": PROBE_POINTS,
            "ecf_probes": ECF_PROBES,
            "report": self,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}
