//! Bit-exact regression vectors for seed 42. A change here means every
//! previously written report changes.

use chaoslab::diagnostics::builtin_member;
use chaoslab::metrics::{bl_distance_1d, ecf_distance, kolmogorov_1d, EcfGrid};
use chaoslab::moments::covariance_matrix;
use chaoslab::sampler::{sample_batch, sample_gaussian_surrogate, sample_ito_oracle, Companions};
use chaoslab::sphere::{simulate_field, PowerSpectrum, SphereGrid};

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn hermite_draws() {
    let spec = builtin_member("oscillating_pair", 1).unwrap();
    let b = sample_batch(&spec, 4, 42, Companions::default()).unwrap();
    assert_eq!(
        bits(b.draws.data()),
        [
            4612012836595903414,
            13826247001201993104,
            4613737469007670489,
            13832194368287555744,
            4611776832372919803,
            13827180783887657505,
            4604004344377539043,
            13830745313577620404
        ]
    );
}

#[test]
fn surrogate_and_ito_draws() {
    let spec = builtin_member("oscillating_pair", 1).unwrap();
    let cov = covariance_matrix(&spec).unwrap();
    let g = sample_gaussian_surrogate(&cov, 3, 42).unwrap();
    assert_eq!(
        bits(g.data()),
        [
            4606509645268955960,
            13821805235011842511,
            13835464684801796699,
            4604368706640492971,
            13821421484494575897,
            13824655588281246403
        ]
    );
    let ito = sample_ito_oracle(&spec, 2 * spec.dim(), 3, 42).unwrap();
    assert_eq!(
        bits(ito.data()),
        [
            4602076472222617144,
            13814194757702003744,
            13826849268437850884,
            4599004162087708734,
            4604235365339368810,
            13828840942187482789
        ]
    );
}

#[test]
fn distances() {
    let spec = builtin_member("oscillating_pair", 1).unwrap();
    let cov = covariance_matrix(&spec).unwrap();
    let big = sample_batch(&spec, 5000, 42, Companions { malliavin: false, surrogate: true }).unwrap();
    let e = ecf_distance(&big.draws, &cov, &EcfGrid::lattice(2, 4.0, 21).unwrap()).unwrap();
    assert_eq!((e.distance.to_bits(), e.se.to_bits()), (4600727722605916626, 4578565156288957119));
    let bl = bl_distance_1d(&big.draws.column(0)[..1000], &big.surrogate.as_ref().unwrap().column(0)[..1000]).unwrap();
    assert_eq!(bl.to_bits(), 4597137562642197636);
    let ks = kolmogorov_1d(&big.draws.column(0), cov[(0, 0)]).unwrap();
    assert_eq!(ks.to_bits(), 4594884783018303569);
}

#[test]
fn sphere_field() {
    let f = simulate_field(&PowerSpectrum::flat(3).unwrap(), &SphereGrid::new(4).unwrap(), 42).unwrap();
    assert_eq!(
        bits(&f.values[..4]),
        [13820693439380368545, 13822481345450409863, 4594329744232991778, 4597826010251342143]
    );
}
