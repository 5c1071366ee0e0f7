//! Brute-force oracles shared by the integration tests.
//!
//! Dense tensors are stored over all ordered index tuples. Gaussian
//! polynomials are maps from exponent vectors to coefficients, with
//! expectations taken through the moments `E X^{2k} = (2k-1)!!`.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chaoslab::kernel::SymmetricKernel;
use rand::Rng;

pub fn tuples(order: usize, dim: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..dim as u32).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// Dense tensor over ordered tuples, row-major.
#[derive(Clone, Debug)]
pub struct Dense {
    pub order: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(order: usize, dim: usize) -> Self {
        Self { order, dim, data: vec![0.0; dim.pow(order as u32)] }
    }

    pub fn flat(&self, idx: &[u32]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i as usize)
    }

    pub fn get(&self, idx: &[u32]) -> f64 {
        self.data[self.flat(idx)]
    }

    pub fn of(f: &SymmetricKernel) -> Self {
        let mut d = Self::zeros(f.order(), f.dim());
        for t in tuples(f.order(), f.dim()) {
            let i = d.flat(&t);
            d.data[i] = f.get(&t);
        }
        d
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Pairs the last `p` slots of `self` with the last `p` slots of `g`.
    pub fn contract(&self, g: &Self, p: usize) -> Self {
        let (a, b) = (self.order - p, g.order - p);
        let mut out = Self::zeros(a + b, self.dim);
        for y in tuples(a, self.dim) {
            for z in tuples(b, self.dim) {
                let mut s = 0.0;
                for t in tuples(p, self.dim) {
                    let fy: Vec<u32> = y.iter().chain(&t).copied().collect();
                    let gz: Vec<u32> = z.iter().chain(&t).copied().collect();
                    s += self.get(&fy) * g.get(&gz);
                }
                let yz: Vec<u32> = y.iter().chain(&z).copied().collect();
                let i = out.flat(&yz);
                out.data[i] = s;
            }
        }
        out
    }

    /// Average over every permutation of the slots.
    pub fn symmetrize(&self) -> Self {
        let perms = permutations(self.order);
        let mut out = Self::zeros(self.order, self.dim);
        for t in tuples(self.order, self.dim) {
            let s: f64 = perms
                .iter()
                .map(|p| {
                    let u: Vec<u32> = p.iter().map(|&k| t[k]).collect();
                    self.get(&u)
                })
                .sum();
            let i = out.flat(&t);
            out.data[i] = s / perms.len() as f64;
        }
        out
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Random sparse kernel with up to `nnz` nonzero multi-indices.
pub fn random_kernel<R: Rng>(rng: &mut R, order: usize, dim: usize, nnz: usize) -> SymmetricKernel {
    loop {
        let entries: Vec<(Vec<usize>, f64)> = (0..nnz)
            .map(|_| {
                let idx = (0..order).map(|_| rng.random_range(0..dim)).collect();
                (idx, rng.random_range(-2.0..2.0))
            })
            .collect();
        let f = SymmetricKernel::new(order, dim, entries).expect("valid kernel");
        if f.nnz() > 0 {
            return f;
        }
    }
}

/// Polynomial in `dim` independent standard normals.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

fn double_factorial_odd(k: u32) -> f64 {
    // (k-1)!! for even k
    (1..k).step_by(2).map(|v| v as f64).product()
}

impl Poly {
    pub fn constant(dim: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(vec![0; dim], c);
        }
        Self { dim, terms }
    }

    /// `H_m(X_i)`.
    pub fn hermite(dim: usize, i: usize, m: usize) -> Self {
        let x = {
            let mut e = vec![0; dim];
            e[i] = 1;
            Self { dim, terms: BTreeMap::from([(e, 1.0)]) }
        };
        let (mut prev, mut cur) = (Self::constant(dim, 1.0), x.clone());
        if m == 0 {
            return prev;
        }
        for k in 1..m {
            let next = cur.mul(&x).add(&prev.scale(-(k as f64)));
            prev = cur;
            cur = next;
        }
        cur
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (e, c) in &o.terms {
            *terms.entry(e.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Self { dim: self.dim, terms }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *terms.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Self { dim: self.dim, terms }
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                *terms.entry(f).or_insert(0.0) += c * e[i] as f64;
            }
        }
        Self { dim: self.dim, terms }
    }

    pub fn expectation(&self) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                if e.iter().any(|k| k % 2 == 1) {
                    0.0
                } else {
                    c * e.iter().map(|&k| double_factorial_odd(k)).product::<f64>()
                }
            })
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().zip(x).map(|(k, x)| x.powi(*k as i32)).product::<f64>()).sum()
    }

    /// `I_d(f) = Σ_{ordered i} f(i) :X_{i_1} ⋯ X_{i_d}:`, built tuple by
    /// tuple from Hermite polynomials of the repeated coordinates.
    pub fn of_kernel(f: &SymmetricKernel) -> Self {
        let dim = f.dim();
        let mut out = Self::constant(dim, 0.0);
        for t in tuples(f.order(), dim) {
            let v = f.get(&t);
            if v == 0.0 {
                continue;
            }
            let mut counts = vec![0usize; dim];
            for &i in &t {
                counts[i as usize] += 1;
            }
            let mut p = Self::constant(dim, v);
            for (i, &m) in counts.iter().enumerate() {
                if m > 0 {
                    p = p.mul(&Self::hermite(dim, i, m));
                }
            }
            out = out.add(&p);
        }
        out
    }
}

/// `(E F², E F⁴ - 3 (E F²)²)` for `F = I_d(f)`.
pub fn oracle_cumulants(f: &SymmetricKernel) -> (f64, f64) {
    let p = Poly::of_kernel(f);
    let p2 = p.mul(&p);
    let m2 = p2.expectation();
    (m2, p2.mul(&p2).expectation() - 3.0 * m2 * m2)
}

/// Mean and variance of `Σ_a (∂_a F)²`.
pub fn oracle_malliavin(f: &SymmetricKernel) -> (f64, f64) {
    let p = Poly::of_kernel(f);
    let mut g = Poly::constant(f.dim(), 0.0);
    for a in 0..f.dim() {
        let d = p.derivative(a);
        g = g.add(&d.mul(&d));
    }
    let mean = g.expectation();
    (mean, g.mul(&g).expectation() - mean * mean)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-300
}
