//! Isotropic Gaussian fields on the sphere, Hermite subordination and
//! frequency components.

use std::f64::consts::PI;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::harmonics::{gauss_legendre, legendre_unchecked, real_sph_harm_all};
use crate::error::{Error, Result};
use crate::moments::factorial;
use crate::rng::{domain, substream};
use crate::sampler::hermite;

/// Tolerance on `Var T(x) = 1` before subordination.
pub const UNIT_VARIANCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    c: Vec<f64>,
}

impl PowerSpectrum {
    /// `c[l] = C_l` for `l = 0..=L_max`.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.len() < 2 {
            return Err(Error::InvalidArgument("power spectrum needs L_max >= 1".into()));
        }
        if let Some(bad) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*bad));
        }
        if let Some((l, v)) = c.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::InvalidArgument(format!("C_{l} = {v} is negative")));
        }
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::Assumption("power spectrum is identically zero".into()));
        }
        Ok(Self { c })
    }

    /// `C_l = 4π / (L+1)²` for every `l <= L`: unit field variance.
    pub fn flat(l_max: usize) -> Result<Self> {
        let c = 4.0 * PI / ((l_max + 1) * (l_max + 1)) as f64;
        Self::new(vec![c; l_max + 1])
    }

    /// Parses `l,C_l` lines; a header line and blank lines are skipped,
    /// missing degrees are zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("spectrum line {}: expected `l,C_l`", no + 1)));
            };
            let Ok(l) = a.parse::<usize>() else {
                if pairs.is_empty() && no == 0 {
                    continue;
                }
                return Err(Error::Parse(format!("spectrum line {}: bad degree `{a}`", no + 1)));
            };
            let v: f64 = b.parse().map_err(|_| Error::Parse(format!("spectrum line {}: bad value `{b}`", no + 1)))?;
            pairs.push((l, v));
        }
        let l_max = pairs.iter().map(|p| p.0).max().ok_or_else(|| Error::Parse("empty spectrum".into()))?;
        let mut c = vec![0.0; l_max + 1];
        let mut seen = vec![false; l_max + 1];
        for (l, v) in pairs {
            if std::mem::replace(&mut seen[l], true) {
                return Err(Error::Parse(format!("degree {l} listed twice")));
            }
            c[l] = v;
        }
        Self::new(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn l_max(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c(&self, l: usize) -> f64 {
        self.c.get(l).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    /// `E[T(x)T(y)] = Σ_l (2l+1)/(4π) C_l P_l(cos⟨x,y⟩)`.
    pub fn covariance(&self, cos_angle: f64) -> f64 {
        let x = cos_angle.clamp(-1.0, 1.0);
        self.c
            .iter()
            .enumerate()
            .map(|(l, c)| (2 * l + 1) as f64 / (4.0 * PI) * c * legendre_unchecked(l, x))
            .sum()
    }

    pub fn field_variance(&self) -> f64 {
        self.covariance(1.0)
    }

    /// Rescaled to unit field variance.
    pub fn normalized(&self) -> Self {
        let v = self.field_variance();
        Self { c: self.c.iter().map(|c| c / v).collect() }
    }
}

/// Gauss–Legendre in `cos θ` times a uniform rule in `φ`; nodes are stored
/// θ-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereGrid {
    /// `n_theta` latitude nodes and `2 n_theta` longitudes.
    pub fn new(n_theta: usize) -> Result<Self> {
        let (x, w) = gauss_legendre(n_theta)?;
        let n_phi = 2 * n_theta;
        let dphi = 2.0 * PI / n_phi as f64;
        // ascending θ
        let theta: Vec<f64> = x.iter().rev().map(|x| x.acos()).collect();
        let wt: Vec<f64> = w.iter().rev().copied().collect();
        let phi: Vec<f64> = (0..n_phi).map(|b| b as f64 * dphi).collect();
        let weights = wt.iter().flat_map(|w| std::iter::repeat_n(w * dphi, n_phi)).collect();
        Ok(Self { theta, phi, weights })
    }

    /// Grid sized for the band limit `q · l_max` of a subordinated field.
    pub fn for_subordination(l_max: usize, q: usize) -> Result<Self> {
        Self::new(q * l_max + 2)
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(θ, φ)` of node `i`.
    pub fn node(&self, i: usize) -> (f64, f64) {
        (self.theta[i / self.n_phi()], self.phi[i % self.n_phi()])
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Largest total degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.n_theta() - 1
    }

    /// `∫ f g` by quadrature.
    pub fn integrate_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, f), g)| w * f * g).sum()
    }
}

/// Harmonics `Y_lm` for all `l <= l_max` tabulated at a set of points,
/// row `lm_index(l, m)`.
#[derive(Clone, Debug)]
pub struct HarmonicTable {
    l_max: usize,
    points: usize,
    values: Vec<f64>,
}

impl HarmonicTable {
    pub fn at_points(l_max: usize, points: &[(f64, f64)]) -> Self {
        let per_point: Vec<Vec<f64>> = points.par_iter().map(|&(t, p)| real_sph_harm_all(l_max, t, p)).collect();
        let rows = (l_max + 1) * (l_max + 1);
        let mut values = vec![0.0; rows * points.len()];
        for (j, y) in per_point.iter().enumerate() {
            for (i, v) in y.iter().enumerate() {
                values[i * points.len() + j] = *v;
            }
        }
        Self { l_max, points: points.len(), values }
    }

    pub fn on_grid(l_max: usize, grid: &SphereGrid) -> Self {
        let pts: Vec<(f64, f64)> = grid.nodes().collect();
        Self::at_points(l_max, &pts)
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Values of the harmonic with flat index `i` at every point.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.points..(i + 1) * self.points]
    }

    /// `Σ_i coeffs[i] Y_i` at every point, for the rows starting at `first`.
    pub fn synthesize(&self, first: usize, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.points];
        for (i, a) in coeffs.iter().enumerate() {
            for (o, y) in out.iter_mut().zip(self.row(first + i)) {
                *o += a * y;
            }
        }
        out
    }
}

/// One realization of `T` at the grid nodes with its harmonic coefficients
/// (`a_lm` in `lm_index` order).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub l_max: usize,
    /// Theoretical `Var T(x)`.
    pub variance: f64,
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Draws realizations of the field of a spectrum on a grid.
#[derive(Clone, Debug)]
pub struct FieldSimulator {
    spectrum: PowerSpectrum,
    table: HarmonicTable,
}

impl FieldSimulator {
    pub fn new(spectrum: &PowerSpectrum, grid: &SphereGrid) -> Result<Self> {
        if grid.n_theta() < spectrum.l_max() + 1 {
            return Err(Error::UnderResolved(format!(
                "grid with {} latitude nodes cannot resolve degree {}",
                grid.n_theta(),
                spectrum.l_max()
            )));
        }
        Ok(Self { spectrum: spectrum.clone(), table: HarmonicTable::on_grid(spectrum.l_max(), grid) })
    }

    pub fn spectrum(&self) -> &PowerSpectrum {
        &self.spectrum
    }

    /// Realization `index` of the stream keyed by `seed`.
    pub fn realization(&self, seed: u64, index: u64) -> FieldSample {
        let mut rng = substream(seed, domain::SPHERE_FIELD, index);
        let l_max = self.spectrum.l_max();
        let mut coeffs = Vec::with_capacity((l_max + 1) * (l_max + 1));
        for l in 0..=l_max {
            let sd = self.spectrum.c(l).sqrt();
            for _ in 0..2 * l + 1 {
                let z: f64 = StandardNormal.sample(&mut rng);
                coeffs.push(sd * z);
            }
        }
        let values = self.table.synthesize(0, &coeffs);
        FieldSample { l_max, variance: self.spectrum.field_variance(), coeffs, values }
    }
}

pub fn simulate_field(spectrum: &PowerSpectrum, grid: &SphereGrid, seed: u64) -> Result<FieldSample> {
    Ok(FieldSimulator::new(spectrum, grid)?.realization(seed, 0))
}

/// `H_q(T)` at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinatedField {
    pub q: usize,
    /// `q · L_max`.
    pub band_limit: usize,
    pub values: Vec<f64>,
}

pub fn check_order(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::Assumption(format!("Hermite rank q = {q}: fix q >= 2")));
    }
    Ok(())
}

pub fn subordinate(field: &FieldSample, q: usize) -> Result<SubordinatedField> {
    check_order(q)?;
    if (field.variance - 1.0).abs() > UNIT_VARIANCE_TOL {
        return Err(Error::Assumption(format!(
            "field variance {} is not 1; rescale the spectrum before subordination",
            field.variance
        )));
    }
    Ok(SubordinatedField {
        q,
        band_limit: q * field.l_max,
        values: field.values.iter().map(|&t| hermite(q, t)).collect(),
    })
}

/// Projects subordinated fields onto degree-`l` harmonics by quadrature.
#[derive(Clone, Debug)]
pub struct ComponentAnalyzer {
    weighted: HarmonicTable,
    exact_degree: usize,
}

impl ComponentAnalyzer {
    /// Supports degrees up to `l_max`.
    pub fn new(grid: &SphereGrid, l_max: usize) -> Self {
        let mut weighted = HarmonicTable::on_grid(l_max, grid);
        for i in 0..(l_max + 1) * (l_max + 1) {
            let n = weighted.points;
            for (y, w) in weighted.values[i * n..(i + 1) * n].iter_mut().zip(grid.weights()) {
                *y *= w;
            }
        }
        Self { weighted, exact_degree: grid.exact_degree() }
    }

    pub fn check(&self, band_limit: usize, l: usize) -> Result<()> {
        if l > self.weighted.l_max {
            return Err(Error::InvalidArgument(format!(
                "degree {l} above the analyzer limit {}",
                self.weighted.l_max
            )));
        }
        if band_limit + l > self.exact_degree {
            return Err(Error::UnderResolved(format!(
                "quadrature exact to degree {} but band limit {band_limit} times degree {l} needs {}",
                self.exact_degree,
                band_limit + l
            )));
        }
        Ok(())
    }

    /// `a_{lm;q} = ∫ H_q(T) Y_lm`, `m = -l..=l`.
    pub fn coefficients(&self, field: &SubordinatedField, l: usize) -> Result<Vec<f64>> {
        self.check(field.band_limit, l)?;
        if field.values.len() != self.weighted.points {
            return Err(Error::DimMismatch(field.values.len(), self.weighted.points));
        }
        Ok((l * l..(l + 1) * (l + 1))
            .map(|i| self.weighted.row(i).iter().zip(&field.values).map(|(y, t)| y * t).sum())
            .collect())
    }
}

/// `T_l^{(q)}` at the grid nodes together with its coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyComponent {
    pub l: usize,
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn frequency_component(field: &SubordinatedField, l: usize, grid: &SphereGrid) -> Result<FrequencyComponent> {
    let analyzer = ComponentAnalyzer::new(grid, l);
    let coeffs = analyzer.coefficients(field, l)?;
    let table = HarmonicTable::on_grid(l, grid);
    let values = table.synthesize(l * l, &coeffs);
    Ok(FrequencyComponent { l, coeffs, values })
}

/// Ensemble check of `Var T(x)` over the grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldVarianceSummary {
    pub realizations: usize,
    pub theoretical: f64,
    /// Node-averaged ensemble variance.
    pub empirical: f64,
    /// Standard error of `empirical` for a single node.
    pub node_se: f64,
    pub node_min: f64,
    pub node_max: f64,
}

pub fn field_variance_summary(
    spectrum: &PowerSpectrum,
    grid: &SphereGrid,
    seed: u64,
    realizations: usize,
) -> Result<FieldVarianceSummary> {
    if realizations < 2 {
        return Err(Error::InvalidArgument("need at least two realizations".into()));
    }
    let sim = FieldSimulator::new(spectrum, grid)?;
    let squares: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| sim.realization(seed, r).values.iter().map(|t| t * t).collect())
        .collect();
    let n = realizations as f64;
    let mut per_node = vec![0.0; grid.len()];
    for s in &squares {
        for (acc, v) in per_node.iter_mut().zip(s) {
            *acc += v;
        }
    }
    per_node.iter_mut().for_each(|v| *v /= n);
    let theoretical = spectrum.field_variance();
    Ok(FieldVarianceSummary {
        realizations,
        theoretical,
        empirical: per_node.iter().sum::<f64>() / grid.len() as f64,
        node_se: theoretical * (2.0 / n).sqrt(),
        node_min: per_node.iter().copied().fold(f64::INFINITY, f64::min),
        node_max: per_node.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `E[H_q(T)²] = q!` for unit-variance `T`.
pub(crate) fn subordinated_second_moment(q: usize) -> f64 {
    factorial(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::harmonics::{cos_angle, legendre};

    #[test]
    fn grid_weights_and_gram_identity() {
        let grid = SphereGrid::new(10).unwrap();
        assert!((grid.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        let t = HarmonicTable::on_grid(8, &grid);
        for i in 0..81 {
            for j in 0..81 {
                let g = grid.integrate_product(t.row(i), t.row(j));
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-8, "gram ({i},{j}) = {g}");
            }
        }
    }

    #[test]
    fn spectrum_parsing_and_validation() {
        let s = PowerSpectrum::from_csv("l,C_l\n0,0\n1,4.18879020478639\n").unwrap();
        assert!((s.field_variance() - 1.0).abs() < 1e-12);
        let s = PowerSpectrum::from_csv("2,1.5\n").unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 1.5]);
        assert!(PowerSpectrum::from_csv("0,-1\n1,1\n").is_err());
        assert!(PowerSpectrum::from_csv("0,0\n1,0\n").unwrap_err().is_assumption_violation());
        assert!(PowerSpectrum::from_csv("0,1\n").is_err());
        assert!(PowerSpectrum::from_csv("1,1\n1,2\n").is_err());
        assert!(PowerSpectrum::from_csv("1;2\n").is_err());
        assert!((PowerSpectrum::flat(6).unwrap().field_variance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_per_realization() {
        let spec = PowerSpectrum::flat(6).unwrap();
        let grid = SphereGrid::new(7).unwrap();
        for seed in 0..5 {
            let f = simulate_field(&spec, &grid, seed).unwrap();
            let a2: f64 = f.coeffs.iter().map(|a| a * a).sum();
            let q = grid.integrate_product(&f.values, &f.values);
            assert!((a2 - q).abs() < 1e-6 * a2);
        }
        assert!(simulate_field(&spec, &SphereGrid::new(6).unwrap(), 0).unwrap_err().is_assumption_violation());
    }

    #[test]
    fn dipole_field_has_unit_variance_and_antipodal_sign() {
        let spec = PowerSpectrum::new(vec![0.0, 4.0 * PI / 3.0]).unwrap();
        assert!((spec.covariance(-1.0) + 1.0).abs() < 1e-12);
        let grid = SphereGrid::new(4).unwrap();
        let s = field_variance_summary(&spec, &grid, 1, 4000).unwrap();
        assert!((s.empirical - 1.0).abs() < 4.0 * s.node_se);
        assert!(s.node_min > 1.0 - 5.0 * s.node_se && s.node_max < 1.0 + 5.0 * s.node_se);
    }

    #[test]
    fn monopole_field_is_constant() {
        let spec = PowerSpectrum::new(vec![2.0, 0.0]).unwrap();
        let grid = SphereGrid::new(3).unwrap();
        let f = simulate_field(&spec, &grid, 9).unwrap();
        assert!(f.values.iter().all(|v| (v - f.values[0]).abs() < 1e-12));
    }

    #[test]
    fn subordination_rules() {
        let field = FieldSample { l_max: 1, variance: 1.0, coeffs: vec![], values: vec![2.0, 1.0] };
        assert_eq!(subordinate(&field, 2).unwrap().values[0], 3.0);
        assert_eq!(subordinate(&field, 3).unwrap().values[1], -2.0);
        assert!(subordinate(&field, 1).unwrap_err().is_assumption_violation());
        let loud = FieldSample { variance: 2.0, ..field };
        assert!(subordinate(&loud, 2).unwrap_err().is_assumption_violation());
    }

    #[test]
    fn second_chaos_content_is_even_and_band_limited() {
        let l0 = 3;
        let mut c = vec![0.0; l0 + 1];
        c[l0] = 4.0 * PI / 7.0;
        let spec = PowerSpectrum::new(c).unwrap();
        let grid = SphereGrid::for_subordination(l0, 2).unwrap();
        let f = simulate_field(&spec, &grid, 4).unwrap();
        let h = subordinate(&f, 2).unwrap();
        let an = ComponentAnalyzer::new(&grid, 2 * l0);
        let mut comps = Vec::new();
        for l in 0..=2 * l0 {
            let a = an.coefficients(&h, l).unwrap();
            let e: f64 = a.iter().map(|x| x * x).sum();
            if l % 2 == 1 {
                assert!(e < 1e-20, "odd degree {l} has energy {e}");
            } else {
                assert!(e > 1e-6);
            }
            comps.push(frequency_component(&h, l, &grid).unwrap());
        }
        // components are pairwise orthogonal on the grid
        for a in &comps {
            for b in &comps {
                if a.l != b.l {
                    assert!(grid.integrate_product(&a.values, &b.values).abs() < 1e-10);
                }
            }
        }
        // the components rebuild H_2(T)
        for i in 0..grid.len() {
            let s: f64 = comps.iter().map(|c| c.values[i]).sum();
            assert!((s - h.values[i]).abs() < 1e-9);
        }
        let coarse = SphereGrid::new(2 * l0).unwrap();
        let f = simulate_field(&spec, &coarse, 4).unwrap();
        let h = subordinate(&f, 2).unwrap();
        assert!(frequency_component(&h, 2 * l0, &coarse).unwrap_err().is_assumption_violation());
    }

    #[test]
    fn constant_field_has_only_monopole() {
        let grid = SphereGrid::new(4).unwrap();
        let field = FieldSample { l_max: 1, variance: 1.0, coeffs: vec![], values: vec![0.7; grid.len()] };
        let h = subordinate(&field, 2).unwrap();
        for l in 0..=4 {
            let e: f64 = frequency_component(&h, l, &grid).unwrap().coeffs.iter().map(|a| a * a).sum();
            if l == 0 {
                assert!((e - 4.0 * PI * (0.49f64 - 1.0).powi(2)).abs() < 1e-10);
            } else {
                assert!(e < 1e-24);
            }
        }
    }

    #[test]
    fn spectrum_covariance_matches_legendre_sum() {
        let spec = PowerSpectrum::flat(4).unwrap();
        let c = cos_angle((0.3, 0.1), (1.2, 2.0));
        let expect: f64 = (0..=4).map(|l| (2 * l + 1) as f64 / 25.0 * legendre(l, c).unwrap()).sum();
        assert!((spec.covariance(c) - expect).abs() < 1e-14);
    }
}
