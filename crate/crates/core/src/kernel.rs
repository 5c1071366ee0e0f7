//! Symmetric kernels over a finite orthonormal basis and their contractions.
//!
//! A [`SymmetricKernel`] stores only sorted multi-indices; the value of the
//! full tensor at any ordering of a stored index equals the stored value.
//! Indices are 0-based in this API (the family file format is 1-based).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Largest `n^d` for which [`SymmetricKernel::to_dense`] materializes a tensor.
pub const DENSE_LIMIT: usize = 1_000_000;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Number of distinct orderings of a sorted multi-index: `d! / prod(m_j!)`.
pub fn multiplicity(sorted: &[u32]) -> f64 {
    let mut denom = 1.0;
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            denom *= factorial(run);
            run = 1;
        }
    }
    if !sorted.is_empty() {
        denom *= factorial(run);
    }
    factorial(sorted.len()) / denom
}

/// Advances `v` to the next lexicographic permutation; false when exhausted.
fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All distinct orderings of a sorted multi-index.
pub fn orderings(sorted: &[u32]) -> Vec<Vec<u32>> {
    let mut cur = sorted.to_vec();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

fn check_tuple(idx: &[usize], order: usize, dim: usize) -> Result<Vec<u32>> {
    if idx.len() != order {
        return Err(Error::WrongTupleLength { got: idx.len(), expected: order });
    }
    idx.iter()
        .map(|&i| {
            if i < dim {
                Ok(i as u32)
            } else {
                Err(Error::IndexOutOfRange { index: i, dim })
            }
        })
        .collect()
}

/// A tensor over ordered index tuples, with no symmetry assumed.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralTensor {
    order: usize,
    dim: usize,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

impl GeneralTensor {
    /// Builds a tensor from ordered tuples; repeated tuples are summed.
    pub fn new<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("basis dimension must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (idx, v) in entries {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            let key = check_tuple(&idx, order, dim)?;
            *coeffs.entry(key).or_insert(0.0) += v;
        }
        coeffs.retain(|_, v| *v != 0.0);
        Ok(Self { order, dim, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at an ordered index tuple.
    pub fn get(&self, idx: &[u32]) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.coeffs.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Squared Hilbert–Schmidt norm: plain sum of squares over ordered tuples.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|v| v * v).sum()
    }

    /// The scalar held by an order-0 tensor.
    pub fn scalar(&self) -> Option<f64> {
        (self.order == 0).then(|| self.get(&[]))
    }
}

/// Symmetric coefficient tensor of order `d` over an `n`-dimensional basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricKernel {
    order: usize,
    dim: usize,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

impl SymmetricKernel {
    /// Builds a kernel from entries at arbitrary orderings. The supplied
    /// entries are read as a general tensor and symmetrized, so
    /// `[((0,1), 0.5), ((1,0), 0.5)]` yields tensor value 0.5 at both orderings.
    pub fn new<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        if order == 0 {
            return Err(Error::InvalidArgument("kernel order must be positive".into()));
        }
        Ok(symmetrize(&GeneralTensor::new(order, dim, entries)?))
    }

    /// Builds a kernel from tensor values at sorted multi-indices. Unsorted
    /// or repeated multi-indices are rejected.
    pub fn from_sorted<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        if order == 0 {
            return Err(Error::InvalidArgument("kernel order must be positive".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("basis dimension must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (idx, v) in entries {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            let key = check_tuple(&idx, order, dim)?;
            if key.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!("multi-index {idx:?} is not sorted")));
            }
            if coeffs.insert(key, v).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate multi-index {idx:?}")));
            }
        }
        coeffs.retain(|_, v| *v != 0.0);
        Ok(Self { order, dim, coeffs })
    }

    /// `e_i` for d = 1.
    pub fn basis_vector(dim: usize, i: usize) -> Result<Self> {
        Self::from_sorted(1, dim, [(vec![i], 1.0)])
    }

    /// `scale * sum_i e_i ⊗ ... ⊗ e_i` over the given indices.
    pub fn diagonal<I>(order: usize, dim: usize, indices: I, scale: f64) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        Self::from_sorted(order, dim, indices.into_iter().map(|i| (vec![i; order], scale)))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Stored (sorted multi-index, tensor value) pairs in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.coeffs.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    /// Tensor value at any ordering of an index tuple.
    pub fn get(&self, idx: &[u32]) -> f64 {
        let mut key = idx.to_vec();
        key.sort_unstable();
        self.coeffs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|(k, v)| multiplicity(k) * v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|v| *v *= c);
        out.coeffs.retain(|_, v| *v != 0.0);
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::OrderMismatch(self.order, other.order));
        }
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            *out.coeffs.entry(k.clone()).or_insert(0.0) += c * v;
        }
        out.coeffs.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    /// The same kernel viewed in a larger basis.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::DimMismatch(self.dim, dim));
        }
        Ok(Self { dim, ..self.clone() })
    }

    /// Full tensor as an ordered-tuple tensor.
    pub fn to_general(&self) -> GeneralTensor {
        let mut coeffs = BTreeMap::new();
        for (k, v) in &self.coeffs {
            for o in orderings(k) {
                coeffs.insert(o, *v);
            }
        }
        GeneralTensor { order: self.order, dim: self.dim, coeffs }
    }

    /// Row-major dense tensor; `None` when `n^d` exceeds [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Option<Vec<f64>> {
        let size = self.dim.checked_pow(self.order as u32)?;
        if size > DENSE_LIMIT {
            return None;
        }
        let mut out = vec![0.0; size];
        for (k, v) in &self.coeffs {
            for o in orderings(k) {
                let flat = o.iter().fold(0usize, |acc, &i| acc * self.dim + i as usize);
                out[flat] = *v;
            }
        }
        Some(out)
    }

    /// All ordered tuples `(head, tail)` with `tail` of length `p`, grouped by tail.
    fn split_by_tail(&self, p: usize) -> BTreeMap<Vec<u32>, Vec<(Vec<u32>, f64)>> {
        let mut groups: BTreeMap<Vec<u32>, Vec<(Vec<u32>, f64)>> = BTreeMap::new();
        let cut = self.order - p;
        for (k, v) in &self.coeffs {
            for o in orderings(k) {
                groups.entry(o[cut..].to_vec()).or_default().push((o[..cut].to_vec(), *v));
            }
        }
        groups
    }

    /// The order-`(d - 1)` slice kernels `f(a, ·)`, keyed by `a`, for every `a`
    /// where the slice is nonzero.
    pub(crate) fn slices(&self) -> BTreeMap<u32, SymmetricKernel> {
        let mut out: BTreeMap<u32, BTreeMap<Vec<u32>, f64>> = BTreeMap::new();
        for (k, v) in &self.coeffs {
            let mut prev = None;
            for (pos, &a) in k.iter().enumerate() {
                if prev == Some(a) {
                    continue;
                }
                prev = Some(a);
                let mut rest = k.clone();
                rest.remove(pos);
                out.entry(a).or_default().insert(rest, *v);
            }
        }
        out.into_iter()
            .map(|(a, coeffs)| {
                (a, SymmetricKernel { order: self.order - 1, dim: self.dim, coeffs })
            })
            .collect()
    }
}

/// `⟨f, g⟩` in `H^{⊗d}`: the sum over all ordered tuples of `f(i) g(i)`.
pub fn inner(f: &SymmetricKernel, g: &SymmetricKernel) -> Result<f64> {
    if f.order != g.order {
        return Err(Error::OrderMismatch(f.order, g.order));
    }
    if f.dim != g.dim {
        return Err(Error::DimMismatch(f.dim, g.dim));
    }
    let (small, large) = if f.nnz() <= g.nnz() { (f, g) } else { (g, f) };
    Ok(small
        .coeffs
        .iter()
        .filter_map(|(k, v)| large.coeffs.get(k).map(|w| multiplicity(k) * v * w))
        .sum())
}

/// The `p`-th contraction `f ⊗_p g`: pairs the last `p` arguments of `f`
/// with the last `p` arguments of `g` through the basis. `p = 0` gives the
/// tensor product; `p = d = d'` gives the order-0 tensor `⟨f, g⟩`.
pub fn contract(f: &SymmetricKernel, g: &SymmetricKernel, p: usize) -> Result<GeneralTensor> {
    if f.dim != g.dim {
        return Err(Error::DimMismatch(f.dim, g.dim));
    }
    let max = f.order.min(g.order);
    if p > max {
        return Err(Error::ContractionRange { p, max });
    }
    let fa = f.split_by_tail(p);
    let ga = if std::ptr::eq(f, g) { None } else { Some(g.split_by_tail(p)) };
    let ga = ga.as_ref().unwrap_or(&fa);

    let mut coeffs: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (tail, heads_f) in &fa {
        let Some(heads_g) = ga.get(tail) else { continue };
        for (y, v) in heads_f {
            for (z, w) in heads_g {
                let mut key = Vec::with_capacity(y.len() + z.len());
                key.extend_from_slice(y);
                key.extend_from_slice(z);
                *coeffs.entry(key).or_insert(0.0) += v * w;
            }
        }
    }
    coeffs.retain(|_, v| *v != 0.0);
    Ok(GeneralTensor { order: f.order + g.order - 2 * p, dim: f.dim, coeffs })
}

/// Averages a tensor over all argument permutations.
pub fn symmetrize(t: &GeneralTensor) -> SymmetricKernel {
    let mut coeffs: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (k, v) in &t.coeffs {
        let mut s = k.clone();
        s.sort_unstable();
        *coeffs.entry(s).or_insert(0.0) += v;
    }
    for (k, v) in coeffs.iter_mut() {
        *v /= multiplicity(k);
    }
    coeffs.retain(|_, v| *v != 0.0);
    SymmetricKernel { order: t.order, dim: t.dim, coeffs }
}

/// `f ~⊗_p g`, the symmetrized contraction.
pub fn sym_contract(f: &SymmetricKernel, g: &SymmetricKernel, p: usize) -> Result<SymmetricKernel> {
    contract(f, g, p).map(|t| symmetrize(&t))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContractionNorms {
    pub p: usize,
    /// `‖f ⊗_p f‖²`
    pub full: f64,
    /// `‖f ~⊗_p f‖²`
    pub symmetrized: f64,
}

/// Squared norms of `f ⊗_p f` and its symmetrization for `p = 1..d-1`.
pub fn contraction_profile(f: &SymmetricKernel) -> Result<Vec<ContractionNorms>> {
    if f.order < 2 {
        return Err(Error::NoContractions(f.order));
    }
    (1..f.order)
        .map(|p| {
            let t = contract(f, f, p)?;
            Ok(ContractionNorms { p, full: t.norm_sq(), symmetrized: symmetrize(&t).norm_sq() })
        })
        .collect()
}
