mod common;

use entsim::fock::*;
use entsim::math::factorial;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Truncated single-mode coherent amplitudes `e^{-|β|²/2} βⁿ/√n!`.
fn coherent_amplitudes(beta: Complex64, cutoff: usize) -> Vec<Complex64> {
    (0..=cutoff)
        .map(|n| beta.powu(n as u32) * (-beta.norm_sqr() / 2.0).exp() / factorial(n).sqrt())
        .collect()
}

fn coherent_pair(b1: Complex64, b2: Complex64, cutoff: usize) -> FockPureVector {
    let (x, y) = (coherent_amplitudes(b1, cutoff), coherent_amplitudes(b2, cutoff));
    let amps = DVector::from_fn((cutoff + 1) * (cutoff + 1), |i, _| x[i / (cutoff + 1)] * y[i % (cutoff + 1)]);
    FockPureVector::from_amplitudes(2, cutoff, amps).unwrap()
}

#[test]
fn beam_splitter_maps_coherent_states_in_both_conventions() {
    let (t, r) = (0.6, 0.8);
    let (b1, b2) = (Complex64::new(0.5, -0.3), Complex64::new(-0.2, 0.6));
    let i = Complex64::i();
    let cases = [
        (BeamSplitterConvention::SymmetricI, b1 * t + i * r * b2, i * r * b1 + b2 * t),
        (BeamSplitterConvention::RealAntisymmetric, b1 * t - b2 * r, b1 * r + b2 * t),
    ];
    for (convention, o1, o2) in cases {
        let bs = BeamSplitter::new(t, r, convention).unwrap();
        let out = beam_splitter_fock_with_bound(&coherent_pair(b1, b2, 14), &bs, (0, 1), 1e-9).unwrap();
        let expected = coherent_pair(o1, o2, 14);
        assert!((out.amplitudes() - expected.amplitudes()).camax() < 1e-9, "{convention:?}");
    }
}

#[test]
fn beam_splitter_acts_on_chosen_modes_only() {
    let v = FockPureVector::basis(&[1, 2, 0], 3).unwrap();
    let bs = BeamSplitter::balanced(BeamSplitterConvention::RealAntisymmetric);
    let out = beam_splitter_fock(&v, &bs, (0, 2)).unwrap();
    for idx in 0..out.amplitudes().len() {
        let occ = [idx / 16, (idx / 4) % 4, idx % 4];
        if out.amplitudes()[idx].norm() > 0.0 {
            assert_eq!(occ[1], 2);
            assert_eq!(occ[0] + occ[2], 1);
        }
    }
    assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    assert!(matches!(beam_splitter_fock(&v, &bs, (1, 1)), Err(FockError::Mode { .. })));
    assert!(matches!(beam_splitter_fock(&v, &bs, (0, 3)), Err(FockError::Mode { mode: 3, .. })));
}

#[test]
fn truncation_overflow_is_reported() {
    let v = FockPureVector::basis(&[2, 2], 2).unwrap();
    let bs = BeamSplitter::balanced(BeamSplitterConvention::SymmetricI);
    let err = beam_splitter_fock(&v, &bs, (0, 1)).unwrap_err();
    assert!(matches!(err, FockError::CutoffOverflow { .. }));
    let kept = beam_splitter_fock_with_bound(&v, &bs, (0, 1), 1.0).unwrap();
    assert!((kept.norm_sqr() + kept.truncated_weight() - 1.0).abs() < 1e-14);
    assert!(matches!(BeamSplitter::new(0.5, 0.5, BeamSplitterConvention::SymmetricI), Err(FockError::BeamSplitterNorm(_))));
}

#[test]
fn schmidt_state_measures() {
    let alphas = [1.0, 0.6, -0.3, 0.1];
    let v = FockPureVector::schmidt(&alphas.map(c), 4).normalized().unwrap();
    let rho = v.to_density().unwrap();
    let weights: Vec<f64> = alphas.iter().map(|a| a * a).collect();
    let total: f64 = weights.iter().sum();
    let amp_sum: f64 = alphas.iter().map(|a: &f64| a.abs()).sum();
    let e_n = (amp_sum * amp_sum / total).log2();
    assert!((rho.log_negativity().unwrap() - e_n).abs() < 1e-12);
    assert!(rho.vn_entropy().unwrap().abs() < 1e-10);
    assert!((rho.purity() - 1.0).abs() < 1e-14);
    let reduced = rho.partial_trace(0).unwrap();
    let s: f64 = weights.iter().map(|w| -(w / total) * (w / total).log2()).sum();
    assert!((reduced.vn_entropy().unwrap() - s).abs() < 1e-12);
    assert!((rho.fidelity_with(&v).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn tmss_reduced_state_is_thermal() {
    let (r, cutoff) = (0.4, 20);
    let v = tmss_fock(r, 1.1, cutoff);
    let lambda2 = r.tanh().powi(2);
    assert!((v.norm_sqr() + v.truncated_weight() - 1.0).abs() < 1e-14);
    let reduced = v.to_density().unwrap().partial_trace(1).unwrap();
    for n in 0..=cutoff {
        let p = (1.0 - lambda2) * lambda2.powi(n as i32);
        assert!((reduced.matrix()[(n, n)].re - p).abs() < 1e-15);
    }
    assert!(reduced.hermiticity_defect() == 0.0);
    assert!((reduced.matrix().clone() - DMatrix::from_diagonal(&reduced.matrix().diagonal())).camax() < 1e-15);
}

#[test]
fn inefficient_detection_probabilities() {
    let alphas = [0.8, 0.5, 0.3, 0.1].map(c);
    let rho = FockPureVector::schmidt(&alphas, 3).normalized().unwrap().to_density().unwrap();
    let eta = 0.7;
    let weights: Vec<f64> = alphas.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    let (_, p0) = rho.project_vacuum(1, eta).unwrap();
    let expected: f64 = weights.iter().enumerate().map(|(k, w)| w * (1.0 - eta).powi(k as i32)).sum::<f64>() / total;
    assert!((p0 - expected).abs() < 1e-14);
    let sum: f64 = (0..=3).map(|n| rho.project_photons(1, n, eta).unwrap().1).sum();
    assert!((sum - 1.0).abs() < 1e-14);
    let (_, same) = rho.project_photons(1, 0, eta).unwrap();
    assert!((same - p0).abs() < 1e-15);
    assert!(matches!(rho.project_vacuum(1, 1.2), Err(FockError::Efficiency(_))));
    assert!(matches!(rho.project_vacuum(2, 0.5), Err(FockError::Mode { mode: 2, .. })));
}

#[test]
fn cutoff_changes_track_dropped_weight() {
    let v = tmss_fock(0.5, 0.0, 10);
    let low = v.with_cutoff(4);
    let kept: f64 = low.norm_sqr();
    assert!((kept + low.truncated_weight() - 1.0).abs() < 1e-14);
    let rho = v.to_density().unwrap();
    let rho_low = rho.with_cutoff(4);
    assert!((rho_low.trace() - kept).abs() < 1e-14);
    let back = rho_low.with_cutoff(10);
    assert_eq!(back.trace(), rho_low.trace());
    assert_eq!(back.with_cutoff(4).matrix(), rho_low.matrix());
}

#[test]
fn dump_lists_only_significant_entries() {
    let mut rho = FockDensityMatrix::vacuum(2, 2).unwrap();
    rho.set_hermitian_pair(1, 0, 0, 1, Complex64::new(5e-15, 0.0));
    rho.set_hermitian_pair(2, 1, 0, 0, Complex64::new(0.0, 0.25));
    let dump = rho.to_dump();
    assert_eq!(dump.entries.len(), 3);
    let text = dump.to_json();
    assert!(text.starts_with("{\"n_modes\":2,\"cutoff\":2,\"entries\":[["));
    assert!(text.contains("[2,1,0,0,0.0000000000000000e0,2.5000000000000000e-1]"));
    let bad: MatrixDump = serde_json::from_str(r#"{"n_modes":2,"cutoff":1,"entries":[[2,0,0,0,1.0,0.0]]}"#).unwrap();
    assert!(matches!(FockDensityMatrix::from_dump(&bad), Err(FockError::Dump(_))));
}

#[test]
fn single_mode_tensor_products() {
    let a = FockPureVector::basis(&[1], 2).unwrap().to_density().unwrap();
    let b = FockDensityMatrix::vacuum(1, 2).unwrap();
    let ab = a.tensor(&b).unwrap();
    assert_eq!(ab.element(1, 0, 1, 0), c(1.0));
    assert_eq!(ab.partial_trace(1).unwrap().matrix(), a.matrix());
    assert!(matches!(ab.tensor(&a), Err(FockError::ModeCount { .. })));
    assert!(matches!(FockDensityMatrix::zeros(3, 1), Err(FockError::UnsupportedModes(3))));
}

#[test]
fn positivity_failures_are_detected() {
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-0.2)]));
    let rho = FockDensityMatrix::new(1, 1, m).unwrap();
    assert!(matches!(rho.vn_entropy(), Err(FockError::NotPositive(_))));
    assert!(matches!(FockDensityMatrix::zeros(2, 2).unwrap().log_negativity(), Err(FockError::ZeroTrace(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_splitters_are_unitary(seed in any::<u64>(), theta in 0.0..1.6f64, antisym in any::<bool>()) {
        // Inputs use at most 3 photons in total so a cutoff of 3 holds the output exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = FockPureVector::zeros(2, 3);
        for n1 in 0..=3usize {
            for n2 in 0..=(3 - n1) {
                use rand::Rng;
                v.set_amplitude(&[n1, n2], Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        let convention = if antisym { BeamSplitterConvention::RealAntisymmetric } else { BeamSplitterConvention::SymmetricI };
        let bs = BeamSplitter::new(theta.cos(), theta.sin(), convention).unwrap();
        let out = beam_splitter_fock_with_bound(&v, &bs, (0, 1), 1e-12).unwrap();
        prop_assert!((out.norm_sqr() - v.norm_sqr()).abs() < 1e-12 * v.norm_sqr());
        let inverse = BeamSplitter::new(theta.cos(), -theta.sin(), convention).unwrap();
        let back = beam_splitter_fock_with_bound(&out, &inverse, (0, 1), 1e-12).unwrap();
        prop_assert!((back.amplitudes() - v.amplitudes()).camax() < 1e-12);
    }

    #[test]
    fn random_states_have_consistent_measures(seed in any::<u64>(), rank in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = common::random_density(&mut rng, 2, rank);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_defect() < 1e-14);
        let pt = rho.partial_transpose().unwrap();
        prop_assert!((pt.trace() - rho.matrix().trace()).norm() < 1e-12);
        let twice = FockDensityMatrix::new(2, 2, pt).unwrap().partial_transpose().unwrap();
        prop_assert_eq!(&twice, rho.matrix());
        let e_n = rho.log_negativity().unwrap();
        prop_assert!(e_n >= 0.0 && e_n <= 3f64.log2() + 1e-12);
        let s = rho.vn_entropy().unwrap();
        prop_assert!(s >= 0.0 && s <= (rank as f64).log2() + 1e-9);
        // Subadditivity.
        let sa = rho.partial_trace(1).unwrap().vn_entropy().unwrap();
        let sb = rho.partial_trace(0).unwrap().vn_entropy().unwrap();
        prop_assert!(s <= sa + sb + 1e-9);
    }
}
