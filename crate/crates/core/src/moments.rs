//! Closed-form moment functionals of vectors of multiple Wiener–Itô integrals.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{inner, sym_contract, contraction_profile, SymmetricKernel};

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The vector `(I_{d_1}(f_1), ..., I_{d_k}(f_k))`. Each component's order is
/// the order of its kernel; all kernels share one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosVectorSpec {
    components: Vec<SymmetricKernel>,
}

impl ChaosVectorSpec {
    pub fn new(components: Vec<SymmetricKernel>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidArgument("chaos vector needs at least one component".into()));
        };
        let dim = first.dim();
        for (j, f) in components.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::DimMismatch(dim, f.dim()));
            }
            if f.norm_sq() == 0.0 {
                return Err(Error::Assumption(format!("component {j} has a zero kernel")));
            }
        }
        Ok(Self { components })
    }

    pub fn single(f: SymmetricKernel) -> Result<Self> {
        Self::new(vec![f])
    }

    pub fn components(&self) -> &[SymmetricKernel] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.components.iter().map(SymmetricKernel::order).collect()
    }

    /// Checks `‖f_j‖ >= eta` for every component; returns the first offender.
    pub fn check_eta(&self, eta: f64) -> std::result::Result<(), (usize, f64)> {
        match self.components.iter().enumerate().find(|(_, f)| f.norm() < eta) {
            Some((j, f)) => Err((j, f.norm())),
            None => Ok(()),
        }
    }
}

/// `d! ‖f‖²`, the variance of `I_d(f)`.
pub fn variance(f: &SymmetricKernel) -> f64 {
    factorial(f.order()) * f.norm_sq()
}

/// Covariance of the chaos vector. Entries between different orders vanish.
pub fn covariance_matrix(spec: &ChaosVectorSpec) -> Result<DMatrix<f64>> {
    let k = spec.k();
    let comps = spec.components();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let (fi, fj) = (&comps[i], &comps[j]);
            let c = if fi.order() == fj.order() {
                factorial(fi.order()) * inner(fi, fj)?
            } else {
                0.0
            };
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

/// `E[I_d(f)^4] - 3 (d! ‖f‖²)²` via the contraction sum
/// `Σ_p (d!)^4 / (p!(d-p)!)² { ‖f⊗_p f‖² + C(2(d-p), d-p) ‖f~⊗_p f‖² }`.
pub fn fourth_cumulant(f: &SymmetricKernel) -> f64 {
    let d = f.order();
    if d < 2 {
        return 0.0;
    }
    let df4 = factorial(d).powi(4);
    contraction_profile(f)
        .expect("order >= 2")
        .into_iter()
        .map(|c| {
            let q = d - c.p;
            let w = df4 / (factorial(c.p) * factorial(q)).powi(2);
            w * (c.full + binomial(2 * q, q) * c.symmetrized)
        })
        .sum()
}

pub fn fourth_moment(f: &SymmetricKernel) -> f64 {
    fourth_cumulant(f) + 3.0 * variance(f).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MalliavinMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of `‖D I_d(f)‖²`.
///
/// `‖DF‖² = d·d!‖f‖² + d² Σ_{p=1}^{d-1} (p-1)! C(d-1, p-1)² I_{2(d-p)}(f ~⊗_p f)`;
/// the chaos terms have distinct orders, so the variance is the sum of
/// `[d² (p-1)! C(d-1,p-1)²]² (2(d-p))! ‖f ~⊗_p f‖²`.
pub fn malliavin_variance(f: &SymmetricKernel) -> MalliavinMoments {
    let d = f.order();
    let mean = d as f64 * variance(f);
    if d < 2 {
        return MalliavinMoments { mean, variance: 0.0 };
    }
    let var = contraction_profile(f)
        .expect("order >= 2")
        .into_iter()
        .map(|c| {
            let coef = (d * d) as f64 * factorial(c.p - 1) * binomial(d - 1, c.p - 1).powi(2);
            coef * coef * factorial(2 * (d - c.p)) * c.symmetrized
        })
        .sum();
    MalliavinMoments { mean, variance: var }
}

/// A finite Wiener chaos expansion `c + Σ_m I_m(g_m)` with distinct orders.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosDecomposition {
    pub constant: f64,
    /// Terms of order >= 1, sorted by decreasing order.
    pub terms: Vec<SymmetricKernel>,
}

impl ChaosDecomposition {
    pub fn term(&self, order: usize) -> Option<&SymmetricKernel> {
        self.terms.iter().find(|t| t.order() == order)
    }

    /// `E[F]`.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// `Var[F] = Σ_m m! ‖g_m‖²`.
    pub fn variance(&self) -> f64 {
        self.terms.iter().map(variance).sum()
    }
}

/// Product formula
/// `I_n(f) I_m(g) = Σ_{p=0}^{n∧m} p! C(n,p) C(m,p) I_{n+m-2p}(f ~⊗_p g)`.
pub fn multiply(f: &SymmetricKernel, g: &SymmetricKernel) -> Result<ChaosDecomposition> {
    if f.dim() != g.dim() {
        return Err(Error::DimMismatch(f.dim(), g.dim()));
    }
    let (n, m) = (f.order(), g.order());
    let mut constant = 0.0;
    let mut terms = Vec::new();
    for p in 0..=n.min(m) {
        let c = factorial(p) * binomial(n, p) * binomial(m, p);
        if n + m == 2 * p {
            constant = c * inner(f, g)?;
            continue;
        }
        let t = sym_contract(f, g, p)?.scale(c);
        if t.nnz() > 0 {
            terms.push(t);
        }
    }
    Ok(ChaosDecomposition { constant, terms })
}
