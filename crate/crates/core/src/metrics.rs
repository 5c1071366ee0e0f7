//! Distances between a sampled law and a Gaussian reference.
//!
//! * [`ecf_distance`]: sup over a compact grid of `|φ̂_N(λ) - φ_Σ(λ)|`, with the
//!   Gaussian side in closed form.
//! * [`bl_distance_1d`]: exact bounded-Lipschitz (Fortet–Mourier) distance
//!   between two 1-D empirical measures.
//! * [`kolmogorov_1d`] and [`ks_two_sample`]: CDF sup-distances.
//!
//! No Prokhorov distance is computed; in several dimensions the ECF
//! distance stands in for it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::sampler::SampleMatrix;

/// Nodes beyond which a full lattice is replaced by quasi-random nodes.
pub const MAX_LATTICE_NODES: usize = 1_000_000;
/// Node count used when the lattice is too large.
pub const QUASI_RANDOM_NODES: usize = 100_000;
pub const DEFAULT_HALF_WIDTH: f64 = 4.0;
pub const DEFAULT_POINTS_PER_AXIS: usize = 81;
/// Resolution of the Lipschitz-share scan in [`bl_distance_1d`].
pub const BL_SCAN_STEPS: usize = 256;

/// `exp(-½ λᵀ Σ λ)`.
pub fn gaussian_cf(lambda: &[f64], cov: &DMatrix<f64>) -> Result<Complex64> {
    let k = lambda.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimMismatch(k, cov.nrows()));
    }
    let q = quad_form(lambda, cov);
    if q < -1e-10 * (1.0 + lambda.iter().map(|l| l * l).sum::<f64>()) {
        return Err(Error::NotPsd(q));
    }
    Ok(Complex64::new((-0.5 * q.max(0.0)).exp(), 0.0))
}

fn quad_form(lambda: &[f64], cov: &DMatrix<f64>) -> f64 {
    let k = lambda.len();
    let mut q = 0.0;
    for i in 0..k {
        for j in 0..k {
            q += lambda[i] * cov[(i, j)] * lambda[j];
        }
    }
    q
}

#[derive(Clone, Debug, PartialEq)]
enum Nodes {
    Lattice { half_width: f64, points: usize },
    Explicit(Vec<f64>),
}

/// Frequency nodes `λ` in the compact `M = [-T, T]^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct EcfGrid {
    k: usize,
    nodes: Nodes,
}

impl EcfGrid {
    /// Uniform lattice with `points` nodes per axis; falls back to
    /// [`QUASI_RANDOM_NODES`] Kronecker-sequence nodes when `points^k`
    /// exceeds [`MAX_LATTICE_NODES`].
    pub fn lattice(k: usize, half_width: f64, points: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("grid dimension must be positive".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!("half-width {half_width} must be positive")));
        }
        if points < 2 {
            return Err(Error::InvalidArgument("need at least 2 points per axis".into()));
        }
        let total = (points as f64).powi(k as i32);
        if total <= MAX_LATTICE_NODES as f64 {
            return Ok(Self { k, nodes: Nodes::Lattice { half_width, points } });
        }
        Ok(Self { k, nodes: Nodes::Explicit(kronecker_nodes(k, half_width, QUASI_RANDOM_NODES)) })
    }

    /// Grid with user-supplied nodes, flattened row-major (`node * k + axis`).
    pub fn from_nodes(k: usize, nodes: Vec<f64>) -> Result<Self> {
        if k == 0 || nodes.is_empty() || nodes.len() % k != 0 {
            return Err(Error::InvalidArgument("node list must hold whole k-vectors".into()));
        }
        Ok(Self { k, nodes: Nodes::Explicit(nodes) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        match &self.nodes {
            Nodes::Lattice { points, .. } => points.pow(self.k as u32),
            Nodes::Explicit(v) => v.len() / self.k,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.nodes, Nodes::Lattice { .. })
    }

    /// Coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        match &self.nodes {
            Nodes::Lattice { half_width, points } => {
                let step = 2.0 * half_width / (*points as f64 - 1.0);
                let mut rem = idx;
                let mut out = vec![0.0; self.k];
                for axis in (0..self.k).rev() {
                    out[axis] = -half_width + (rem % points) as f64 * step;
                    rem /= points;
                }
                out
            }
            Nodes::Explicit(v) => v[idx * self.k..(idx + 1) * self.k].to_vec(),
        }
    }
}

/// Additive-recurrence nodes in `[-T, T]^k` from the generalized golden ratio.
fn kronecker_nodes(k: usize, half_width: f64, count: usize) -> Vec<f64> {
    // phi_k solves x^{k+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (k as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=k).map(|j| phi.powi(-(j as i32)).fract()).collect();
    let mut out = Vec::with_capacity(count * k);
    for n in 0..count {
        for a in &alpha {
            let u = (0.5 + a * (n as f64 + 1.0)).fract();
            out.push(-half_width + 2.0 * half_width * u);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EcfDistance {
    pub distance: f64,
    /// Standard error of the ECF at the maximizing node, `sqrt((1 - |φ̂|²)/N)`.
    pub se: f64,
}

/// Rows per partial sum, chosen from the problem shape only so the
/// reduction order never depends on the thread pool.
fn chunk_rows(rows: usize, nodes: usize) -> usize {
    let budget = (32_000_000 / (nodes * 16).max(1)).clamp(1, 64);
    rows.div_ceil(budget).max(256)
}

fn empirical_cf_sums(samples: &SampleMatrix, grid: &EcfGrid) -> Vec<Complex64> {
    let nodes = grid.len();
    let k = grid.k;
    let rows = chunk_rows(samples.rows(), nodes);
    let partials: Vec<Vec<Complex64>> = samples
        .data()
        .par_chunks(rows * k)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); nodes];
            match &grid.nodes {
                Nodes::Lattice { half_width, points } => {
                    lattice_accumulate(chunk, k, *half_width, *points, &mut acc)
                }
                Nodes::Explicit(v) => {
                    for x in chunk.chunks(k) {
                        for (a, lam) in acc.iter_mut().zip(v.chunks(k)) {
                            let t: f64 = lam.iter().zip(x).map(|(l, xi)| l * xi).sum();
                            let (s, c) = t.sin_cos();
                            *a += Complex64::new(c, s);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); nodes];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

fn lattice_accumulate(chunk: &[f64], k: usize, half_width: f64, points: usize, acc: &mut [Complex64]) {
    let step = 2.0 * half_width / (points as f64 - 1.0);
    let mut phases = vec![Complex64::new(0.0, 0.0); k * points];
    let mut prefix = vec![Complex64::new(0.0, 0.0); k];
    let mut digits = vec![0usize; k];
    for x in chunk.chunks(k) {
        for (axis, &xi) in x.iter().enumerate() {
            let row = &mut phases[axis * points..(axis + 1) * points];
            let (s, c) = (-half_width * xi).sin_cos();
            let (ds, dc) = (step * xi).sin_cos();
            let rot = Complex64::new(dc, ds);
            let mut cur = Complex64::new(c, s);
            for (a, slot) in row.iter_mut().enumerate() {
                // re-anchor periodically to bound the recurrence drift
                if a % 16 == 0 && a > 0 {
                    let (s, c) = ((-half_width + a as f64 * step) * xi).sin_cos();
                    cur = Complex64::new(c, s);
                }
                *slot = cur;
                cur *= rot;
            }
        }
        let last = &phases[(k - 1) * points..];
        if k == 1 {
            for (a, p) in acc.iter_mut().zip(last) {
                *a += p;
            }
            continue;
        }
        // odometer over the first k-1 axes, inner loop over the last axis
        digits.iter_mut().for_each(|d| *d = 0);
        let outer = points.pow(k as u32 - 1);
        for block in 0..outer {
            let mut changed = if block == 0 { 0 } else { k - 1 };
            if block > 0 {
                let mut axis = k - 2;
                loop {
                    digits[axis] += 1;
                    if digits[axis] < points {
                        changed = axis;
                        break;
                    }
                    digits[axis] = 0;
                    axis -= 1;
                }
            }
            for axis in changed..k - 1 {
                let p = phases[axis * points + digits[axis]];
                prefix[axis] = if axis == 0 { p } else { prefix[axis - 1] * p };
            }
            let pre = prefix[k - 2];
            let out = &mut acc[block * points..(block + 1) * points];
            for (a, p) in out.iter_mut().zip(last) {
                *a += pre * p;
            }
        }
    }
}

/// Sup distance between the empirical CF of `samples` and the Gaussian CF of
/// `cov` over the grid.
pub fn ecf_distance(samples: &SampleMatrix, cov: &DMatrix<f64>, grid: &EcfGrid) -> Result<EcfDistance> {
    let k = grid.k;
    if samples.cols() != k {
        return Err(Error::DimMismatch(k, samples.cols()));
    }
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimMismatch(k, cov.nrows()));
    }
    if samples.rows() == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let n = samples.rows() as f64;
    let sums = empirical_cf_sums(samples, grid);
    let mut best = EcfDistance { distance: 0.0, se: 0.0 };
    for (idx, s) in sums.iter().enumerate() {
        let lam = grid.node(idx);
        let ecf = s / n;
        let gap = (ecf - gaussian_cf(&lam, cov)?).norm();
        if gap > best.distance {
            best = EcfDistance { distance: gap, se: ((1.0 - ecf.norm_sqr()).max(0.0) / n).sqrt() };
        }
    }
    Ok(best)
}

/// Monotone `u64` key for finite floats.
fn order_key(x: f64) -> u64 {
    let bits = (x + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn key_value(key: u64) -> f64 {
    let bits = if key >> 63 == 1 { key & !(1 << 63) } else { !key };
    f64::from_bits(bits)
}

/// Pooled support of `P̂ - Q̂`: sorted distinct points with net masses.
fn signed_measure(a: &[f64], b: &[f64]) -> Result<Vec<(f64, f64)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if let Some(x) = a.iter().chain(b).find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(*x));
    }
    let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
    let mut pooled: Vec<(f64, f64)> = a.iter().map(|&x| (x, wa)).chain(b.iter().map(|&x| (x, -wb))).collect();
    pooled.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pooled.len());
    for (x, w) in pooled {
        match merged.last_mut() {
            Some((y, v)) if *y == x => *v += w,
            _ => merged.push((x, w)),
        }
    }
    Ok(merged)
}

/// `sup { ∫ f dμ : ‖f‖_Lip <= lip, ‖f‖_∞ <= sup }` for a zero-mass signed
/// measure on sorted points, evaluated through the dual
/// `min_D Σ_i lip·g_i |W_i - D_i| + sup Σ_i |D_i - D_{i-1}|` (`D_0 = D_M = 0`,
/// `W` the cumulative mass, `g` the gaps) by a convex piecewise-linear
/// dynamic program.
fn bl_value(points: &[(f64, f64)], lip: f64, sup: f64) -> f64 {
    // ψ(D) = alpha + sigma·D + Σ (J/2)|D - b|
    let mut alpha = 0.0;
    let mut sigma = 0.0;
    let mut jumps: BTreeMap<u64, f64> = BTreeMap::new();
    let mut jsum = 0.0;
    if sup > 0.0 {
        jumps.insert(order_key(0.0), 2.0 * sup);
        jsum = 2.0 * sup;
    }
    let eps = 1e-15 * (1.0 + sup + lip);
    let mut cum = 0.0;
    for win in points.windows(2) {
        cum += win[0].1;
        let a = lip * (win[1].0 - win[0].0);
        if a > 0.0 {
            *jumps.entry(order_key(cum)).or_insert(0.0) += 2.0 * a;
            jsum += 2.0 * a;
        }
        // inf-convolution with sup·|·| clamps slopes into [-sup, sup]
        loop {
            let deficit = -sup - (sigma - 0.5 * jsum);
            if deficit <= eps {
                break;
            }
            let mut entry = jumps.first_entry().expect("slope bounded by jumps");
            let b = key_value(*entry.key());
            let partial = *entry.get() > deficit;
            let r = if partial {
                *entry.get_mut() -= deficit;
                deficit
            } else {
                entry.remove()
            };
            sigma += 0.5 * r;
            alpha -= 0.5 * r * b;
            jsum -= r;
            if partial {
                break;
            }
        }
        loop {
            let excess = sigma + 0.5 * jsum - sup;
            if excess <= eps {
                break;
            }
            let mut entry = jumps.last_entry().expect("slope bounded by jumps");
            let b = key_value(*entry.key());
            let partial = *entry.get() > excess;
            let r = if partial {
                *entry.get_mut() -= excess;
                excess
            } else {
                entry.remove()
            };
            sigma -= 0.5 * r;
            alpha += 0.5 * r * b;
            jsum -= r;
            if partial {
                break;
            }
        }
    }
    alpha + jumps.iter().map(|(k, j)| 0.5 * j * key_value(*k).abs()).sum::<f64>()
}

/// Exact bounded-Lipschitz distance
/// `β(P̂, Q̂) = sup { |∫ f d(P̂ - Q̂)| : ‖f‖_Lip + ‖f‖_∞ <= 1 }`.
///
/// For a fixed split `‖f‖_Lip <= L`, `‖f‖_∞ <= 1 - L` the inner problem is
/// solved exactly; the value is concave in `L`, which is scanned on
/// [`BL_SCAN_STEPS`] + 1 points and then refined by golden-section search.
pub fn bl_distance_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let points = signed_measure(a, b)?;
    if points.len() < 2 {
        return Ok(0.0);
    }
    let value = |l: f64| bl_value(&points, l, 1.0 - l);
    let scan: Vec<f64> = (0..=BL_SCAN_STEPS)
        .into_par_iter()
        .map(|i| value(i as f64 / BL_SCAN_STEPS as f64))
        .collect();
    let (best_i, best) = scan
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let h = 1.0 / BL_SCAN_STEPS as f64;
    let (mut lo, mut hi) = (best_i as f64 * h - h, best_i as f64 * h + h);
    lo = lo.max(0.0);
    hi = hi.min(1.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = value(x1);
        }
    }
    Ok(best.max(f1).max(f2).clamp(0.0, 2.0))
}

/// `Φ(x / σ)`.
pub fn normal_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(-x / (sigma * std::f64::consts::SQRT_2))
}

/// `sup_x |F̂(x) - Φ(x/σ)|` for the empirical CDF of `samples`.
pub fn kolmogorov_1d(samples: &[f64], variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument(format!("variance {variance} must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let sigma = variance.sqrt();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x, sigma);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value with the Stephens small-sample correction.
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p_value = kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsResult { statistic: d, p_value })
}
