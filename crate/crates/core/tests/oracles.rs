mod support;

use chaoslab::kernel::{contract, inner, symmetrize, sym_contract, GeneralTensor, SymmetricKernel};
use chaoslab::moments::{covariance_matrix, fourth_cumulant, malliavin_variance, multiply, variance, ChaosVectorSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{oracle_cumulants, oracle_malliavin, random_kernel, rel_close, Dense, Poly};

fn kernel(order: usize, dim: usize, seed: u64) -> SymmetricKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_kernel(&mut rng, order, dim, 1 + (seed as usize % 6))
}

fn dense_of_general(t: &GeneralTensor) -> Dense {
    let mut d = Dense::zeros(t.order(), t.dim());
    for (idx, v) in t.entries() {
        let i = d.flat(idx);
        d.data[i] = v;
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_matches_dense(d in 1usize..=4, e in 1usize..=4, n in 1usize..=4, p0 in 0usize..=4, seed in any::<u64>()) {
        let f = kernel(d, n, seed);
        let g = kernel(e, n, seed.wrapping_add(1));
        let p = p0 % (d.min(e) + 1);
        let got = dense_of_general(&contract(&f, &g, p).unwrap());
        let want = Dense::of(&f).contract(&Dense::of(&g), p);
        for (a, b) in got.data.iter().zip(&want.data) {
            prop_assert!((a - b).abs() <= 1e-12 * f.norm() * g.norm());
        }
        // dense symmetrization costs (order)! per entry
        if d + e - 2 * p > 6 {
            return Ok(());
        }
        let sym = Dense::of(&sym_contract(&f, &g, p).unwrap());
        let sym_want = want.symmetrize();
        for (a, b) in sym.data.iter().zip(&sym_want.data) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn inner_and_norm_match_dense(d in 1usize..=4, n in 1usize..=5, seed in any::<u64>()) {
        let f = kernel(d, n, seed);
        let g = kernel(d, n, seed ^ 0x5555);
        let scale = f.norm() * g.norm();
        prop_assert!((inner(&f, &g).unwrap() - Dense::of(&f).dot(&Dense::of(&g))).abs() <= 1e-12 * scale);
        prop_assert!(rel_close(f.norm_sq(), Dense::of(&f).norm_sq(), 1e-12));
    }

    #[test]
    fn symmetrization_is_idempotent_projection(d in 1usize..=3, n in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(Vec<usize>, f64)> = (0..5)
            .map(|_| ((0..d).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect(), rand::Rng::random_range(&mut rng, -1.0..1.0)))
            .collect();
        let t = GeneralTensor::new(d, n, entries).unwrap();
        let s = symmetrize(&t);
        let want = dense_of_general(&t).symmetrize();
        let got = Dense::of(&s);
        for (a, b) in got.data.iter().zip(&want.data) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(symmetrize(&s.to_general()), s.clone());
        prop_assert!(s.norm_sq() <= t.norm_sq() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn inner_and_contraction_are_bilinear(d in 1usize..=3, n in 1usize..=4, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let f = kernel(d, n, seed);
        let g = kernel(d, n, seed ^ 1);
        let h = kernel(d, n, seed ^ 2);
        let comb = f.scale(a).add_scaled(&g, b).unwrap();
        let lhs = inner(&comb, &h).unwrap();
        let rhs = a * inner(&f, &h).unwrap() + b * inner(&g, &h).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        for p in 0..=d {
            let l = functional(&contract(&comb, &h, p).unwrap());
            let r = a * functional(&contract(&f, &h, p).unwrap()) + b * functional(&contract(&g, &h, p).unwrap());
            prop_assert!((l - r).abs() < 1e-9 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn contraction_cauchy_schwarz(d in 1usize..=4, e in 1usize..=4, n in 1usize..=4, seed in any::<u64>()) {
        let f = kernel(d, n, seed);
        let g = kernel(e, n, seed ^ 7);
        for p in 0..=d.min(e) {
            let c = contract(&f, &g, p).unwrap().norm_sq();
            prop_assert!(c <= f.norm_sq() * g.norm_sq() * (1.0 + 1e-12));
            prop_assert!(sym_contract(&f, &g, p).unwrap().norm_sq() <= c * (1.0 + 1e-12) + 1e-15);
        }
        let ip = inner(&f, &f).unwrap();
        prop_assert!(ip >= 0.0);
    }
}

/// A fixed linear functional of a tensor, for bilinearity checks.
fn functional(t: &GeneralTensor) -> f64 {
    t.entries()
        .map(|(idx, v)| v * (1.0 + idx.iter().enumerate().map(|(k, &i)| (k + 1) as f64 * i as f64).sum::<f64>()))
        .sum()
}

#[test]
fn fourth_cumulant_matches_polynomial_oracle() {
    for seed in 0..40u64 {
        let d = 1 + (seed as usize % 3);
        let n = 1 + (seed as usize / 3 % 3);
        let f = kernel(d, n, seed);
        let (m2, k4) = oracle_cumulants(&f);
        assert!(rel_close(variance(&f), m2, 1e-10), "seed {seed}: variance {} vs {m2}", variance(&f));
        let got = fourth_cumulant(&f);
        assert!((got - k4).abs() <= 1e-9 * (1.0 + k4.abs()), "seed {seed} d={d} n={n}: {got} vs {k4}");
    }
}

#[test]
fn order_four_cumulant_matches_polynomial_oracle() {
    let f = kernel(4, 2, 11);
    let (_, k4) = oracle_cumulants(&f);
    assert!((fourth_cumulant(&f) - k4).abs() <= 1e-9 * (1.0 + k4.abs()));
}

#[test]
fn malliavin_moments_match_polynomial_oracle() {
    for seed in 0..30u64 {
        let d = 1 + (seed as usize % 3);
        let n = 1 + (seed as usize / 3 % 3);
        let f = kernel(d, n, seed + 100);
        let (mean, var) = oracle_malliavin(&f);
        let got = malliavin_variance(&f);
        assert!(rel_close(got.mean, mean, 1e-10), "seed {seed}: mean {} vs {mean}", got.mean);
        assert!((got.variance - var).abs() <= 1e-9 * (1.0 + var.abs()), "seed {seed}: {} vs {var}", got.variance);
    }
}

#[test]
fn product_formula_matches_polynomial_product() {
    for seed in 0..20u64 {
        let n = 1 + (seed as usize % 3);
        let (d, e) = (1 + (seed as usize % 3), 1 + (seed as usize / 2 % 3));
        let f = kernel(d, n, seed);
        let g = kernel(e, n, seed + 50);
        let prod = multiply(&f, &g).unwrap();
        let mut rebuilt = Poly::constant(n, prod.constant);
        for t in &prod.terms {
            rebuilt = rebuilt.add(&Poly::of_kernel(t));
        }
        let want = Poly::of_kernel(&f).mul(&Poly::of_kernel(&g));
        for x in [[0.3, -1.2, 0.7], [1.5, 0.1, -0.4], [-2.0, 0.9, 1.1]] {
            let (a, b) = (rebuilt.eval(&x[..n]), want.eval(&x[..n]));
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn covariance_matches_polynomial_oracle() {
    let f = kernel(2, 3, 1);
    let g = kernel(2, 3, 2);
    let h = kernel(3, 3, 3);
    let spec = ChaosVectorSpec::new(vec![f.clone(), g.clone(), h.clone()]).unwrap();
    let c = covariance_matrix(&spec).unwrap();
    let polys: Vec<Poly> = [&f, &g, &h].iter().map(|k| Poly::of_kernel(k)).collect();
    for i in 0..3 {
        for j in 0..3 {
            let want = polys[i].mul(&polys[j]).expectation();
            assert!((c[(i, j)] - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
    }
    assert_eq!(c[(0, 2)], 0.0);
}

#[test]
fn anchors() {
    let e1 = SymmetricKernel::basis_vector(1, 0).unwrap();
    let e11 = symmetrize(&contract(&e1, &e1, 0).unwrap());
    assert_eq!(fourth_cumulant(&e11), 48.0);
    assert_eq!(oracle_cumulants(&e11), (2.0, 48.0));
    let m = malliavin_variance(&e11);
    assert_eq!((m.mean, m.variance), (4.0, 32.0));
    assert_eq!(oracle_malliavin(&e11), (4.0, 32.0));
    let h3 = SymmetricKernel::diagonal(3, 1, [0], 1.0).unwrap();
    assert_eq!(fourth_cumulant(&h3), 3240.0);
}
