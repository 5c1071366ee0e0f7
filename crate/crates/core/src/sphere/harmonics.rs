//! Legendre polynomials, Gauss–Legendre nodes and real spherical harmonics.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `P_l(x)` by the Bonnet recurrence.
pub fn legendre(l: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("legendre argument {x} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(l, x))
}

/// `(P_l(x), P_{l-1}(x))`, any real `x`.
fn legendre_pair(l: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return (1.0, 0.0);
    }
    for n in 1..l {
        let next = ((2 * n + 1) as f64 * x * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

pub(crate) fn legendre_unchecked(l: usize, x: f64) -> f64 {
    legendre_pair(l, x).0
}

/// Nodes (ascending) and weights of the `n`-point Gauss–Legendre rule on
/// `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss-Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, x);
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, x);
        if dp == 0.0 || !dp.is_finite() {
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Flat index of `(l, m)` in tables covering all degrees up to some `L`.
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// All real orthonormal harmonics `Y_lm(θ, φ)` for `l <= l_max`, indexed by
/// [`lm_index`].
pub fn real_sph_harm_all(l_max: usize, theta: f64, phi: f64) -> Vec<f64> {
    let (x, s) = (theta.cos(), theta.sin());
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        let (cos_m, sin_m) = if m == 0 {
            (1.0, 0.0)
        } else {
            let a = m as f64 * phi;
            (2f64.sqrt() * a.cos(), 2f64.sqrt() * a.sin())
        };
        let mut store = |l: usize, p: f64| {
            let base = l * l + l;
            out[base + m] = p * cos_m;
            if m > 0 {
                out[base - m] = p * sin_m;
            }
        };
        store(m, pmm);
        if m == l_max {
            break;
        }
        let mut prev = pmm;
        let mut cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
        store(m + 1, cur);
        for l in m + 2..=l_max {
            let a = |l: usize| (((4 * l * l - 1) as f64) / ((l * l - m * m) as f64)).sqrt();
            let next = a(l) * (x * cur - prev / a(l - 1));
            prev = cur;
            cur = next;
            store(l, cur);
        }
    }
    out
}

/// Real orthonormal spherical harmonic: `√2 N P_l^m cos(mφ)` for `m > 0`,
/// `√2 N P_l^{|m|} sin(|m|φ)` for `m < 0`.
pub fn real_sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::InvalidArgument(format!("|m| = {} exceeds l = {l}", m.abs())));
    }
    Ok(real_sph_harm_all(l, theta, phi)[lm_index(l, m)])
}

/// Unit vector of `(θ, φ)`.
pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// `cos⟨x, y⟩` for two points in `(θ, φ)` coordinates, clamped to `[-1, 1]`.
pub fn cos_angle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (u, v) = (unit_vector(a.0, a.1), unit_vector(b.0, b.1));
    (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0)
}
