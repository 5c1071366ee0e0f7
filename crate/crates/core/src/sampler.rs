//! Monte Carlo draws of chaos vectors.
//!
//! Two independent mechanisms produce `I_d(f)`:
//!
//! * the Hermite route: with `X_i = X(e_i)` iid standard normal,
//!   `I_d(f) = Σ_μ mult(μ) f(μ) Π_i H_{m_i(μ)}(X_i)` over sorted multi-indices `μ`;
//! * the iterated-Itô route: each `e_i` becomes the normalized indicator of
//!   block `i` of a grid of `m` cells, and `I_d(f)` is the sum of the embedded
//!   kernel over ordered tuples of *distinct* cells times the cell normals.
//!   Within a block the distinct-cell sum reduces to `m_i! e_{m_i}(ξ_block)`
//!   (elementary symmetric polynomials), which is how it is evaluated here.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{multiplicity, SymmetricKernel};
use crate::moments::{covariance_matrix, factorial, ChaosVectorSpec};
use crate::rng::{domain, substream};

/// Default number of replicates for diagnostics.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Eigenvalues below this are treated as a failed PSD check.
pub const PSD_FLOOR: f64 = -1e-10;

/// Probabilists' Hermite polynomial `H_q`, with `E[H_q(X)²] = q!`.
pub fn hermite(q: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return prev;
    }
    for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(H_0(x), ..., H_q(x))`.
fn hermite_all(q: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if q >= 1 {
        out[1] = x;
    }
    for k in 1..q {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

/// Values of the underlying `X(e_i)`, `i < n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDraw {
    pub values: Vec<f64>,
}

impl GaussianDraw {
    pub fn sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self { values: (0..dim).map(|_| rng.sample(StandardNormal)).collect() }
    }

    /// Draw `index` of the chaos-draw stream under `seed`.
    pub fn replicate(dim: usize, seed: u64, index: u64) -> Self {
        Self::sample(dim, &mut substream(seed, domain::CHAOS_DRAWS, index))
    }
}

#[derive(Clone, Debug)]
struct Term {
    weight: f64,
    factors: Vec<(u32, u8)>,
}

#[derive(Clone, Debug)]
struct Polynomial {
    terms: Vec<Term>,
}

impl Polynomial {
    fn new(f: &SymmetricKernel) -> Self {
        let terms = f
            .entries()
            .map(|(idx, v)| {
                let mut factors: Vec<(u32, u8)> = Vec::new();
                for &i in idx {
                    match factors.last_mut() {
                        Some((j, m)) if *j == i => *m += 1,
                        _ => factors.push((i, 1)),
                    }
                }
                Term { weight: multiplicity(idx) * v, factors }
            })
            .collect();
        Self { terms }
    }

    /// `table[i * stride + m]` holds the factor for variable `i` at power `m`.
    fn eval(&self, table: &[f64], stride: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .fold(t.weight, |acc, &(i, m)| acc * table[i as usize * stride + m as usize])
            })
            .sum()
    }
}

/// Precompiled evaluation of a chaos vector and of its Malliavin norms.
#[derive(Clone, Debug)]
pub struct ChaosEvaluator {
    dim: usize,
    max_order: usize,
    orders: Vec<usize>,
    components: Vec<Polynomial>,
    /// Per component: `(a, slice polynomial)` for `I_{d-1}(f(a, ·))`.
    slices: Vec<Vec<Polynomial>>,
}

impl ChaosEvaluator {
    pub fn new(spec: &ChaosVectorSpec) -> Self {
        let comps = spec.components();
        Self {
            dim: spec.dim(),
            max_order: comps.iter().map(SymmetricKernel::order).max().unwrap_or(0),
            orders: spec.orders(),
            components: comps.iter().map(Polynomial::new).collect(),
            slices: comps
                .iter()
                .map(|f| f.slices().values().map(Polynomial::new).collect())
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, draw: &GaussianDraw) -> Result<()> {
        if draw.values.len() != self.dim {
            return Err(Error::DimMismatch(self.dim, draw.values.len()));
        }
        Ok(())
    }

    fn hermite_table(&self, x: &[f64]) -> Vec<f64> {
        let stride = self.max_order + 1;
        let mut table = vec![0.0; self.dim * stride];
        for (row, &xi) in table.chunks_mut(stride).zip(x) {
            hermite_all(self.max_order, xi, row);
        }
        table
    }

    fn eval_table(&self, table: &[f64], out: &mut [f64]) {
        let stride = self.max_order + 1;
        for (o, p) in out.iter_mut().zip(&self.components) {
            *o = p.eval(table, stride);
        }
    }

    fn malliavin_table(&self, table: &[f64], out: &mut [f64]) {
        let stride = self.max_order + 1;
        for ((o, slices), &d) in out.iter_mut().zip(&self.slices).zip(&self.orders) {
            *o = slices
                .iter()
                .map(|s| {
                    let v = d as f64 * s.eval(table, stride);
                    v * v
                })
                .sum();
        }
    }

    pub fn eval(&self, draw: &GaussianDraw) -> Result<Vec<f64>> {
        self.check(draw)?;
        let mut out = vec![0.0; self.k()];
        self.eval_table(&self.hermite_table(&draw.values), &mut out);
        Ok(out)
    }

    /// `‖D I_{d_j}(f_j)‖² = Σ_a (d_j I_{d_j - 1}(f_j(a, ·)))²`.
    pub fn malliavin_norms(&self, draw: &GaussianDraw) -> Result<Vec<f64>> {
        self.check(draw)?;
        let mut out = vec![0.0; self.k()];
        self.malliavin_table(&self.hermite_table(&draw.values), &mut out);
        Ok(out)
    }

    /// Iterated-Itô evaluation on a grid of `cells` cells, drawing the cell
    /// normals from `rng`.
    pub fn eval_ito<R: Rng + ?Sized>(&self, cells: usize, rng: &mut R) -> Result<Vec<f64>> {
        if cells < self.dim || cells % self.dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "refinement {cells} must be a positive multiple of the basis size {}",
                self.dim
            )));
        }
        let block = cells / self.dim;
        let stride = self.max_order + 1;
        let scale = (block as f64).sqrt().recip();
        let mut table = vec![0.0; self.dim * stride];
        for row in table.chunks_mut(stride) {
            row[0] = 1.0;
            for _ in 0..block {
                let xi: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                for k in (1..stride).rev() {
                    row[k] += xi * row[k - 1];
                }
            }
            for (k, v) in row.iter_mut().enumerate() {
                *v *= factorial(k);
            }
        }
        let mut out = vec![0.0; self.k()];
        self.eval_table(&table, &mut out);
        Ok(out)
    }
}

/// `(I_{d_1}(f_1), ..., I_{d_k}(f_k))` at a draw.
pub fn eval_chaos(spec: &ChaosVectorSpec, draw: &GaussianDraw) -> Result<Vec<f64>> {
    ChaosEvaluator::new(spec).eval(draw)
}

pub fn eval_malliavin_norm(spec: &ChaosVectorSpec, draw: &GaussianDraw) -> Result<Vec<f64>> {
    ChaosEvaluator::new(spec).malliavin_norms(draw)
}

/// One draw of the iterated-Itô discretization with `cells` grid cells.
pub fn eval_chaos_ito_oracle<R: Rng + ?Sized>(
    spec: &ChaosVectorSpec,
    cells: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ChaosEvaluator::new(spec).eval_ito(cells, rng)
}

/// Row-major `rows × cols` matrix of draws.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "sample matrix of {rows}x{cols} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_column(values: Vec<f64>) -> Self {
        Self { rows: values.len(), cols: 1, data: values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.cols).copied().collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The first `rows` rows.
    pub fn head(&self, rows: usize) -> Self {
        let rows = rows.min(self.rows);
        Self { rows, cols: self.cols, data: self.data[..rows * self.cols].to_vec() }
    }
}

fn fill_rows<F>(rows: usize, cols: usize, f: F) -> SampleMatrix
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; rows * cols];
    data.par_chunks_mut(cols).enumerate().for_each(|(r, row)| f(r, row));
    SampleMatrix { rows, cols, data }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Companions {
    pub malliavin: bool,
    pub surrogate: bool,
}

#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub spec: ChaosVectorSpec,
    pub seed: u64,
    pub draws: SampleMatrix,
    pub malliavin: Option<SampleMatrix>,
    pub surrogate: Option<SampleMatrix>,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.draws.rows()
    }
}

/// `n` iid replicates of the chaos vector. Replicate `r` uses substream `r`
/// of the `(seed, CHAOS_DRAWS)` domain, so output is independent of threads.
pub fn sample_batch(
    spec: &ChaosVectorSpec,
    n: usize,
    seed: u64,
    companions: Companions,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    let eval = ChaosEvaluator::new(spec);
    let k = eval.k();
    let dim = eval.dim();
    let with_mall = companions.malliavin;
    let mut data = vec![0.0; n * k];
    let mut mall = vec![0.0; if with_mall { n * k } else { 0 }];
    let run = |r: usize, row: &mut [f64], m: Option<&mut [f64]>| {
        let draw = GaussianDraw::replicate(dim, seed, r as u64);
        let table = eval.hermite_table(&draw.values);
        eval.eval_table(&table, row);
        if let Some(m) = m {
            eval.malliavin_table(&table, m);
        }
    };
    if with_mall {
        data.par_chunks_mut(k)
            .zip(mall.par_chunks_mut(k))
            .enumerate()
            .for_each(|(r, (row, m))| run(r, row, Some(m)));
    } else {
        data.par_chunks_mut(k).enumerate().for_each(|(r, row)| run(r, row, None));
    }
    let draws = SampleMatrix { rows: n, cols: k, data };
    let malliavin = with_mall.then(|| SampleMatrix { rows: n, cols: k, data: mall });
    let surrogate = if companions.surrogate {
        Some(sample_gaussian_surrogate(&covariance_matrix(spec)?, n, seed)?)
    } else {
        None
    };
    Ok(SampleBatch { spec: spec.clone(), seed, draws, malliavin, surrogate })
}

/// `n` replicates of the iterated-Itô discretization with `cells` cells.
pub fn sample_ito_oracle(
    spec: &ChaosVectorSpec,
    cells: usize,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    let eval = ChaosEvaluator::new(spec);
    // surface a bad refinement before spawning work
    eval.eval_ito(cells, &mut substream(seed, domain::ITO_ORACLE, 0))?;
    Ok(fill_rows(n, eval.k(), |r, row| {
        let mut rng = substream(seed, domain::ITO_ORACLE, r as u64);
        let v = eval.eval_ito(cells, &mut rng).expect("refinement checked");
        row.copy_from_slice(&v);
    }))
}

/// Symmetric square root factor `L` with `L Lᵀ = cov`, after clipping
/// eigenvalues in `[PSD_FLOOR, 0)` to zero.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    let k = cov.nrows();
    for i in 0..k {
        for j in 0..i {
            let (a, b) = (cov[(i, j)], cov[(j, i)]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidArgument("covariance must be symmetric".into()));
            }
        }
    }
    let eig = SymmetricEigen::new(cov.clone());
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < PSD_FLOOR {
            return Err(Error::NotPsd(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// `n` draws from `N(0, cov)` on the surrogate stream of `seed`.
pub fn sample_gaussian_surrogate(cov: &DMatrix<f64>, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    let factor = psd_factor(cov)?;
    let k = cov.nrows();
    Ok(fill_rows(n, k, |r, row| {
        let mut rng = substream(seed, domain::SURROGATE, r as u64);
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for (i, out) in row.iter_mut().enumerate() {
            *out = (0..k).map(|c| factor[(i, c)] * z[c]).sum();
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: SymmetricKernel) -> ChaosVectorSpec {
        ChaosVectorSpec::single(f).unwrap()
    }

    fn draw(v: &[f64]) -> GaussianDraw {
        GaussianDraw { values: v.to_vec() }
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.5), 1.0);
        assert_eq!(hermite(1, 3.5), 3.5);
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(3, 1.0), -2.0);
        assert_eq!(hermite(4, 2.0), 16.0 - 24.0 + 3.0);
        let mut all = [0.0; 5];
        hermite_all(4, 2.0, &mut all);
        assert_eq!(all, [1.0, 2.0, 3.0, 2.0, -5.0]);
    }

    #[test]
    fn eval_chaos_examples() {
        let e11 = SymmetricKernel::diagonal(2, 1, [0], 1.0).unwrap();
        assert_eq!(eval_chaos(&spec(e11), &draw(&[2.0])).unwrap(), vec![3.0]);

        let off = SymmetricKernel::from_sorted(2, 2, [(vec![0, 1], 0.5f64.sqrt())]).unwrap();
        let v = eval_chaos(&spec(off), &draw(&[1.0, 3.0])).unwrap()[0];
        assert!((v - 2f64.sqrt() * 3.0).abs() < 1e-12);

        let e1 = SymmetricKernel::basis_vector(1, 0).unwrap();
        assert_eq!(eval_chaos(&spec(e1), &draw(&[-0.7])).unwrap(), vec![-0.7]);

        let s = spec(SymmetricKernel::basis_vector(2, 0).unwrap());
        assert!(matches!(eval_chaos(&s, &draw(&[1.0])), Err(Error::DimMismatch(2, 1))));
    }

    #[test]
    fn eval_malliavin_examples() {
        let e11 = SymmetricKernel::diagonal(2, 1, [0], 1.0).unwrap();
        assert_eq!(eval_malliavin_norm(&spec(e11), &draw(&[1.5])).unwrap(), vec![4.0 * 2.25]);

        let e1 = SymmetricKernel::basis_vector(3, 0).unwrap();
        assert_eq!(eval_malliavin_norm(&spec(e1), &draw(&[5.0, 1.0, 2.0])).unwrap(), vec![1.0]);

        let diag = SymmetricKernel::diagonal(2, 2, 0..2, 0.5f64.sqrt()).unwrap();
        let v = eval_malliavin_norm(&spec(diag), &draw(&[1.0, 1.0])).unwrap()[0];
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ito_first_chaos_is_block_sum() {
        use rand::SeedableRng;
        let s = spec(SymmetricKernel::basis_vector(2, 0).unwrap());
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut b = a.clone();
        let v = eval_chaos_ito_oracle(&s, 8, &mut a).unwrap()[0];
        let xs: Vec<f64> = (0..4).map(|_| b.sample(StandardNormal)).collect();
        let expected = xs.iter().sum::<f64>() / 2.0;
        assert!((v - expected).abs() < 1e-12);
        assert!(eval_chaos_ito_oracle(&s, 1, &mut a).is_err());
        assert!(eval_chaos_ito_oracle(&s, 5, &mut a).is_err());
    }

    #[test]
    fn ito_matches_hermite_at_unit_refinement_off_diagonal() {
        // with one cell per block the cell normal is X(e_i) itself
        use rand::SeedableRng;
        let off = SymmetricKernel::from_sorted(2, 2, [(vec![0, 1], 0.5f64.sqrt())]).unwrap();
        let s = spec(off);
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut b = a.clone();
        for _ in 0..10 {
            let v = eval_chaos_ito_oracle(&s, 2, &mut a).unwrap();
            let x = GaussianDraw::sample(2, &mut b);
            let h = eval_chaos(&s, &x).unwrap();
            assert!((v[0] - h[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_shapes() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let s = sample_gaussian_surrogate(&cov, 100, 1).unwrap();
        for row in s.iter_rows() {
            assert!((row[0] - row[1]).abs() < 1e-12);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sample_gaussian_surrogate(&bad, 10, 1), Err(Error::NotPsd(_))));
        let tiny = DMatrix::from_row_slice(1, 1, &[-1e-12]);
        assert!(psd_factor(&tiny).is_ok());
        assert!(sample_gaussian_surrogate(&cov, 0, 1).is_err());
    }

    #[test]
    fn batch_requires_replicates() {
        let s = spec(SymmetricKernel::basis_vector(1, 0).unwrap());
        assert!(sample_batch(&s, 0, 1, Companions::default()).is_err());
    }
}
