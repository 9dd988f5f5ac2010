//! Independent reference simulations shared by the integration tests.
//!
//! These work directly on number-basis state vectors with the beam-splitter and
//! projection primitives, so they exercise none of the element-wise recurrences
//! they are compared against.

#![allow(dead_code)]

use entsim::fock::{
    beam_splitter_fock_with_bound, BeamSplitter, BeamSplitterConvention, FockDensityMatrix, FockPureVector,
};
use entsim::bridge::gaussian_to_fock;
use entsim::gaussian::{absorb, make_tmss};
use entsim::math::hermitian_eigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random normalized two-mode state of the given rank with dense complex eigenvectors.
pub fn random_density(rng: &mut ChaCha8Rng, cutoff: usize, rank: usize) -> FockDensityMatrix {
    let dim = (cutoff + 1) * (cutoff + 1);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for _ in 0..rank {
        let v = DVector::from_fn(dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let w: f64 = rng.random_range(0.1..1.0);
        m += &v * v.adjoint() * Complex64::new(w, 0.0);
    }
    FockDensityMatrix::new(2, cutoff, m).unwrap().normalized().unwrap()
}

/// Eigen-decomposition `ρ = Σ pᵢ |vᵢ⟩⟨vᵢ|`, dropping negligible weights.
pub fn pure_decomposition(rho: &FockDensityMatrix) -> Vec<(f64, FockPureVector)> {
    let (values, vectors) = hermitian_eigen(rho.matrix());
    let mut out = Vec::new();
    for (i, &p) in values.iter().enumerate() {
        if p.abs() < 1e-15 {
            continue;
        }
        let v = vectors.column(i).into_owned();
        out.push((p, FockPureVector::from_amplitudes(rho.n_modes(), rho.cutoff(), v).unwrap()));
    }
    out
}

/// Adds `w |v⟩⟨v|` to `acc`.
fn accumulate(acc: &mut DMatrix<Complex64>, v: &FockPureVector, w: f64) {
    let a = v.amplitudes();
    *acc += a * a.adjoint() * Complex64::new(w, 0.0);
}

/// Two copies on 50:50 splitters at each site with inefficient vacuum detection on the
/// second copy's ports. Returns the untruncated unnormalized output at cutoff `2N`.
pub fn direct_gaussify(rho: &FockDensityMatrix, sigma: &FockDensityMatrix, eta: f64) -> FockDensityMatrix {
    let n = rho.cutoff();
    let work = 2 * n;
    let bs = BeamSplitter::balanced(BeamSplitterConvention::RealAntisymmetric);
    let dim = (work + 1) * (work + 1);
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    let first = pure_decomposition(rho);
    let second = pure_decomposition(sigma);
    for (p, v) in &first {
        for (q, u) in &second {
            // Mode order (A1, B1, A2, B2).
            let joint = v.with_cutoff(work).tensor(&u.with_cutoff(work)).unwrap();
            let joint = beam_splitter_fock_with_bound(&joint, &bs, (0, 2), 1.0).unwrap();
            let joint = beam_splitter_fock_with_bound(&joint, &bs, (1, 3), 1.0).unwrap();
            for k in 0..=work {
                let wk = (1.0 - eta).powi(k as i32);
                if wk == 0.0 {
                    continue;
                }
                let after_a = joint.project_photons(2, k).unwrap();
                for l in 0..=work {
                    let wl = (1.0 - eta).powi(l as i32);
                    if wl == 0.0 {
                        continue;
                    }
                    let kept = after_a.project_photons(2, l).unwrap();
                    accumulate(&mut acc, &kept, p * q * wk * wl);
                }
            }
        }
    }
    FockDensityMatrix::new(2, work, acc).unwrap()
}

/// Bob's mode mixed with a single photon on a real beam splitter of transmittivity
/// `t`; the ancilla is projected onto `m` photons. Input and output share the cutoff.
pub fn direct_filter(rho: &FockDensityMatrix, t: f64, m: usize) -> FockDensityMatrix {
    let n = rho.cutoff();
    let bs = BeamSplitter::new(t, (1.0 - t * t).sqrt(), BeamSplitterConvention::RealAntisymmetric).unwrap();
    let photon = FockPureVector::basis(&[1], n).unwrap();
    let mut acc = DMatrix::<Complex64>::zeros((n + 1) * (n + 1), (n + 1) * (n + 1));
    for (p, v) in pure_decomposition(rho) {
        let joint = v.tensor(&photon).unwrap();
        let joint = beam_splitter_fock_with_bound(&joint, &bs, (1, 2), 1.0).unwrap();
        accumulate(&mut acc, &joint.project_photons(2, m).unwrap(), p);
    }
    FockDensityMatrix::new(2, n, acc).unwrap()
}

/// Lossy two-mode squeezed vacuum built through the Gaussian description, then the
/// one-photon filter with transmittivity `t`, scaled to `ρ₀₀₀₀ = 1` at cutoff 8.
pub fn lossy_filter_oracle(r: f64, tau: f64, t: f64) -> FockDensityMatrix {
    let lossy = absorb(&make_tmss(r, 0.0), tau, &[0, 1]).unwrap();
    let rho = gaussian_to_fock(&lossy, 8).unwrap();
    let out = direct_filter(&rho, t, 1);
    out.scaled(1.0 / out.element(0, 0, 0, 0).re)
}

/// Largest element-wise difference between two matrices.
pub fn max_abs_diff(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> f64 {
    (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kolmogorov–Smirnov distance of `times` from an exponential law with the given
/// mean, and the asymptotic p-value with the small-sample correction.
pub fn ks_exponential(times: &[f64], mean: f64) -> (f64, f64) {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let cdf = 1.0 - (-t / mean).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    // Tail of the Kolmogorov distribution, P(K > λ).
    let p: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}
