//! Entanglement concentration and Gaussification.
//!
//! * Procrustean filtering: Bob mixes his mode with a single photon on a beam
//!   splitter of transmittivity `T` and keeps the state when `m` photons are counted.
//! * Gaussification: two copies are combined on 50:50 beam splitters at each site
//!   and kept when both auxiliary ports register vacuum. The step is evaluated
//!   through the element-wise recurrence, optionally with inefficient detectors,
//!   different input copies, and a noise channel applied between iterations.
//!
//! All protocol steps take and return trace-one states together with the
//! success probability. The first copy (`rho`) occupies the port that is kept.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{gaussian_to_fock, sigma_to_covariance, BridgeError, SigmaElements, NULL_STATE_TOL};
use crate::fock::{DumpEntry, FockDensityMatrix, FockError, FockPureVector, DEFAULT_CUTOFF, DEFAULT_TRUNCATION_BOUND};
use crate::gaussian::{GaussianError, GaussianState, PHYSICALITY_TOL};
use crate::math::binomial;

/// Terms of the inefficient-detector sum whose weight bound falls below this are dropped.
pub const DETECTOR_SUM_TOL: f64 = 1e-12;

/// Tolerance on the conditions for convergence to a pure limit, relative to `ρ₀₀₀₀`.
pub const PURE_CONVERGENCE_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistillError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("parameter `{name}` = {value} is outside its domain")]
    Parameter { name: &'static str, value: f64 },
    #[error("vacuum element ρ₀₀₀₀ = {0:.3e} vanishes (null state)")]
    NullState(f64),
    #[error("Schmidt coefficients must be non-empty with α₀ ≠ 0")]
    EmptySchmidt,
    #[error("input specification: {0}")]
    Spec(String),
    #[error("cutoff {cutoff} cannot hold the state (truncated weight {weight:.3e}); max cutoff is {max_cutoff}")]
    CutoffBudget { cutoff: usize, max_cutoff: usize, weight: f64 },
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<(), DistillError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DistillError::Parameter { name, value })
    }
}

// ---------------------------------------------------------------------------
// Pure Schmidt-diagonal states
// ---------------------------------------------------------------------------

/// Coefficients `αₙ` of an unnormalized state `Σ αₙ |n, n⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureSchmidtCoeffs(Vec<Complex64>);

impl PureSchmidtCoeffs {
    pub fn new(alphas: Vec<Complex64>) -> Result<Self, DistillError> {
        if alphas.first().is_none_or(|a| *a == ZERO) {
            return Err(DistillError::EmptySchmidt);
        }
        Ok(Self(alphas))
    }

    pub fn from_real(alphas: &[f64]) -> Result<Self, DistillError> {
        Self::new(alphas.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// `(1, ζ, ζ², …, ζᴺ)`, the fixed points of the pure recurrence.
    pub fn geometric(zeta: Complex64, len: usize) -> Self {
        Self((0..len).map(|n| zeta.powu(n as u32)).collect())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Two-mode number-basis vector; coefficients beyond `cutoff` are counted as truncated.
    pub fn to_fock(&self, cutoff: usize) -> FockPureVector {
        let dropped: f64 = self.0.iter().skip(cutoff + 1).map(|a| a.norm_sqr()).sum();
        FockPureVector::schmidt(&self.0, cutoff).with_truncated_weight(dropped / self.norm_sqr())
    }
}

/// One Gaussification step on a Schmidt-diagonal pure state:
/// `α'ₙ = 2⁻ⁿ Σ_r C(n, r) α_r α_{n-r}`, with probability `‖α'‖² / ‖α‖⁴`.
///
/// The output has `2N + 1` coefficients with exact trailing zeros removed.
pub fn gaussify_pure_step(alpha: &PureSchmidtCoeffs) -> Result<(PureSchmidtCoeffs, f64), DistillError> {
    let a = alpha.as_slice();
    let n_in = a.len();
    let mut out = vec![ZERO; 2 * n_in - 1];
    for (n, slot) in out.iter_mut().enumerate() {
        let lo = n.saturating_sub(n_in - 1);
        let hi = n.min(n_in - 1);
        let mut acc = ZERO;
        for r in lo..=hi {
            acc += a[r] * a[n - r] * binomial(n, r);
        }
        *slot = acc * 2f64.powi(-(n as i32));
    }
    while out.len() > 1 && *out.last().expect("non-empty") == ZERO {
        out.pop();
    }
    let norm_in = alpha.norm_sqr();
    let out = PureSchmidtCoeffs::new(out)?;
    let p = out.norm_sqr() / (norm_in * norm_in);
    Ok((out, p))
}

// ---------------------------------------------------------------------------
// Procrustean filtering
// ---------------------------------------------------------------------------

/// Parameters of the single-photon Procrustean filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcrusteanConfig {
    /// Two-mode squeezing parameter of the source.
    pub r: f64,
    /// Beam-splitter amplitude transmittivity.
    #[serde(rename = "T")]
    pub transmission: f64,
    /// Transmission of the absorbing channels on both modes.
    #[serde(default = "one")]
    pub tau: f64,
    /// Photon count registered by the detector.
    #[serde(default = "one_usize")]
    pub photons: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ProcrusteanConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        if !(self.transmission > 0.0 && self.transmission < 1.0) {
            return Err(DistillError::Parameter { name: "T", value: self.transmission });
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(DistillError::Parameter { name: "tau", value: self.tau });
        }
        if !self.r.is_finite() {
            return Err(DistillError::Parameter { name: "r", value: self.r });
        }
        Ok(())
    }
}

/// Amplitude with which Bob's `|n⟩` is mapped to `|n + 1 - m⟩` when `m` photons are counted.
fn filter_amplitude(n: usize, m: usize, t: f64) -> f64 {
    let r = (1.0 - t * t).sqrt();
    let mut acc = 0.0;
    let c1 = binomial(n, m);
    if c1 != 0.0 {
        acc -= t.powi(n as i32 - m as i32) * r.powi(m as i32 + 1) * (c1 * (n + 1 - m) as f64).sqrt();
    }
    if m >= 1 {
        let c2 = binomial(n, m - 1);
        if c2 != 0.0 {
            acc += t.powi(n as i32 + 2 - m as i32) * r.powi(m as i32 - 1) * (c2 * m as f64).sqrt();
        }
    }
    acc
}

/// `αₙ(m) = (-tanh r)ⁿ T^{n-m} R^{m-1} [-R² √(C(n,m)(n+1-m)) + T² √(C(n,m-1) m)]`.
pub fn procrustean_amplitude(n: usize, m: usize, r: f64, transmission: f64) -> f64 {
    (-r.tanh()).powi(n as i32) * filter_amplitude(n, m, transmission)
}

/// Output of the lossless filter, `Σ αₙ(m) |n⟩_A |n+1-m⟩_B`, normalized, with its probability
/// `sech² r Σ |αₙ(m)|²` summed to convergence.
pub fn procrustean_pure(r: f64, transmission: f64, photons: usize, cutoff: usize) -> Result<(FockPureVector, f64), DistillError> {
    ProcrusteanConfig { r, transmission, tau: 1.0, photons }.validate()?;
    let mut psi = FockPureVector::zeros(2, cutoff);
    let lo = photons.saturating_sub(1);
    for n in lo..=cutoff {
        let b = n + 1 - photons;
        if b <= cutoff {
            psi.set_amplitude(&[n, b], Complex64::new(procrustean_amplitude(n, photons, r, transmission), 0.0));
        }
    }
    let sech2 = 1.0 / r.cosh().powi(2);
    let mut total = 0.0;
    let mut n = lo;
    loop {
        let term = procrustean_amplitude(n, photons, r, transmission).powi(2);
        total += term;
        if n > lo + 10 && term < 1e-300_f64.max(total * 1e-18) || n > 100_000 {
            break;
        }
        n += 1;
    }
    let kept = psi.norm_sqr();
    let psi = psi.normalized().map_err(|_| DistillError::NullState(kept))?;
    let weight = if total > 0.0 { (total - kept).max(0.0) / total } else { 0.0 };
    Ok((psi.with_truncated_weight(weight), sech2 * total))
}

/// Zero- and one-photon elements of the filtered lossy two-mode squeezed state
/// for one counted photon, scaled to `ρ₀₀₀₀ = 1` (cutoff 1).
///
/// With `t = tanh r` and `u = t²(1-τ)²` the non-zero elements are
/// `ρ₁₁₀₀ = ρ₀₀₁₁ = λ`, `ρ₁₁₁₁ = λ²(1+u)`, `ρ₀₁₀₁ = ελ²(1-u)` and
/// `ρ₁₀₁₀ = τ(1-τ)t²/(1-u)`, where `ε = (1-τ)/τ` and
/// `λ = (2T²-1) t τ / (T (u - 1))`. The last element is second order in `t` and
/// vanishes in the weak-squeezing limit.
pub fn procrustean_mixed_elements(r: f64, tau: f64, transmission: f64) -> Result<FockDensityMatrix, DistillError> {
    ProcrusteanConfig { r, transmission, tau, photons: 1 }.validate()?;
    let t = r.tanh();
    let u = t * t * (1.0 - tau).powi(2);
    let lambda = procrustean_lambda(r, tau, transmission)?;
    let eps = (1.0 - tau) / tau;
    let mut rho = FockDensityMatrix::zeros(2, 1)?;
    let c = |x: f64| Complex64::new(x, 0.0);
    rho.set_element(0, 0, 0, 0, c(1.0));
    rho.set_hermitian_pair(1, 1, 0, 0, c(lambda));
    rho.set_element(1, 1, 1, 1, c(lambda * lambda * (1.0 + u)));
    rho.set_element(0, 1, 0, 1, c(eps * lambda * lambda * (1.0 - u)));
    rho.set_element(1, 0, 1, 0, c(tau * (1.0 - tau) * t * t / (1.0 - u)));
    Ok(rho)
}

/// Ratio `ρ₁₁₀₀/ρ₀₀₀₀` of the filtered lossy state.
pub fn procrustean_lambda(r: f64, tau: f64, transmission: f64) -> Result<f64, DistillError> {
    let t = r.tanh();
    let denom = transmission * (t * t * (tau - 1.0).powi(2) - 1.0);
    if denom.abs() < 1e-300 {
        return Err(DistillError::Parameter { name: "T", value: transmission });
    }
    Ok((2.0 * transmission * transmission - 1.0) * t * tau / denom)
}

/// Full filtered state: lossy two-mode squeezed vacuum (both modes transmit `tau`)
/// followed by the filter on Bob's mode with `photons` counts. Returns the
/// normalized state and the success probability.
pub fn procrustean_mixed_state(config: &ProcrusteanConfig, cutoff: usize) -> Result<(FockDensityMatrix, f64), DistillError> {
    config.validate()?;
    // Work with enough headroom that the filter's index shift stays inside the cutoff.
    let work = cutoff + config.photons.max(1);
    let source = crate::fock::tmss_fock(config.r, 0.0, work).to_density()?;
    let lossy = apply_channel(&source, &ChannelSpec::Absorb { theta: config.tau })?;
    let m = config.photons;
    let mut out = FockDensityMatrix::zeros(2, cutoff)?;
    let mut total = 0.0;
    for a in 0..=work {
        for b in m.saturating_sub(1)..=work {
            let fb = filter_amplitude(b, m, config.transmission);
            let b_out = b + 1 - m;
            total += fb * fb * lossy.element(a, b, a, b).re;
            if a > cutoff || b_out > cutoff {
                continue;
            }
            for c in 0..=cutoff {
                for d in m.saturating_sub(1)..=work {
                    let d_out = d + 1 - m;
                    if d_out > cutoff {
                        continue;
                    }
                    let fd = filter_amplitude(d, m, config.transmission);
                    out.set_element(a, b_out, c, d_out, lossy.element(a, b, c, d) * (fb * fd));
                }
            }
        }
    }
    let kept = out.trace();
    if kept <= 0.0 {
        return Err(DistillError::NullState(kept));
    }
    let weight = (total - kept).max(0.0) / total + source.truncated_weight();
    Ok((out.normalized()?.with_truncated_weight(weight), total))
}

// ---------------------------------------------------------------------------
// Model input states
// ---------------------------------------------------------------------------

/// Normalized member of the two-parameter family produced by the lossy filter in the
/// weak-squeezing limit: `ρ₀₀₀₀ ∝ 1`, `ρ₁₁₀₀ = ρ₀₀₁₁ ∝ λ`, `ρ₁₁₁₁ ∝ λ²`, `ρ₀₁₀₁ ∝ λ²(1-τ)/τ`.
pub fn mixed_example(lambda: f64, tau: f64, cutoff: usize) -> Result<FockDensityMatrix, DistillError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(DistillError::Parameter { name: "tau", value: tau });
    }
    let r0 = 1.0 / (1.0 + lambda * lambda + lambda * lambda * (1.0 - tau) / tau);
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut rho = FockDensityMatrix::zeros(2, cutoff.max(1))?;
    rho.set_element(0, 0, 0, 0, c(r0));
    rho.set_hermitian_pair(1, 1, 0, 0, c(lambda * r0));
    rho.set_element(1, 1, 1, 1, c(lambda * lambda * r0));
    rho.set_element(0, 1, 0, 1, c((1.0 - tau) / tau * lambda * lambda * r0));
    Ok(rho)
}

/// Mixed state that Gaussifies towards a pure two-mode squeezed state with `tanh r = -ε/2`.
pub fn converging_to_pure_example(eps: f64, cutoff: usize) -> Result<FockDensityMatrix, DistillError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(DistillError::Parameter { name: "epsilon", value: eps });
    }
    let d = 1.0 + eps * eps;
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut rho = FockDensityMatrix::zeros(2, cutoff.max(1))?;
    rho.set_element(0, 0, 0, 0, c(1.0 / d));
    rho.set_hermitian_pair(1, 1, 0, 0, c(eps / (2.0 * d)));
    rho.set_element(1, 1, 1, 1, c(eps * eps / d));
    Ok(rho)
}

/// `(|00⟩ + 0.5|11⟩)/√1.25`, the pure model input used for imperfection studies.
pub fn model_pure_input(cutoff: usize) -> Result<FockDensityMatrix, DistillError> {
    let psi = PureSchmidtCoeffs::from_real(&[1.0, 0.5])?.to_fock(cutoff.max(1));
    Ok(psi.to_density()?.normalized()?)
}

/// The mixed model input: the weak-squeezing family at `λ = 0.5`, `τ = 0.5`.
pub fn model_mixed_input(cutoff: usize) -> Result<FockDensityMatrix, DistillError> {
    mixed_example(0.5, 0.5, cutoff)
}

// ---------------------------------------------------------------------------
// Gaussification steps
// ---------------------------------------------------------------------------

/// Result of one Gaussification step.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussifyStepResult {
    /// Output state with unit trace.
    pub state: FockDensityMatrix,
    /// Success probability: untruncated output trace divided by the product of input traces.
    pub probability: f64,
    /// Fraction of the output weight that fell beyond the cutoff.
    pub truncated_weight: f64,
}

/// Amplitude `⟨A, k| U |a, A+k-a⟩` for one site: `A` photons stay in the kept
/// port and `k` reach the detector, with `a` photons entering from the kept copy.
fn side_amplitude(big_a: usize, k: usize, a: usize) -> f64 {
    let total = big_a + k;
    if a > total {
        return 0.0;
    }
    let second = total - a;
    let lo = a.saturating_sub(k);
    let hi = a.min(big_a);
    let mut acc = 0.0;
    for s in lo..=hi {
        if big_a - s > second {
            continue;
        }
        let mag = binomial(a, s) * binomial(big_a, s) * binomial(second, big_a - s) * binomial(k, a - s);
        if mag == 0.0 {
            continue;
        }
        let sign = if (big_a - s) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * mag.sqrt();
    }
    acc * 2f64.powf(-(total as f64) / 2.0)
}

/// Table `g[k][A][a]` of [`side_amplitude`] for photon numbers up to `2N`.
struct SideTable {
    n: usize,
    values: Vec<f64>,
}

impl SideTable {
    fn new(n: usize) -> Self {
        let span = 2 * n + 1;
        let mut values = vec![0.0; span * span * (n + 1)];
        for k in 0..span {
            for big_a in 0..span {
                for a in 0..=n {
                    if big_a + k <= 2 * n {
                        values[(k * span + big_a) * (n + 1) + a] = side_amplitude(big_a, k, a);
                    }
                }
            }
        }
        Self { n, values }
    }

    #[inline]
    fn get(&self, k: usize, big_a: usize, a: usize) -> f64 {
        let span = 2 * self.n + 1;
        self.values[(k * span + big_a) * (self.n + 1) + a]
    }
}

/// Non-zero entries of `ρ[(a,c),(b,d)] = ⟨a,b|ρ|c,d⟩` grouped by `(a, c)`.
fn rows_by_first_mode(rho: &FockDensityMatrix) -> Vec<Vec<(usize, usize, Complex64)>> {
    let n = rho.cutoff();
    let mut rows = vec![Vec::new(); (n + 1) * (n + 1)];
    for a in 0..=n {
        for c in 0..=n {
            let row = &mut rows[a * (n + 1) + c];
            for b in 0..=n {
                for d in 0..=n {
                    let v = rho.element(a, b, c, d);
                    if v != ZERO {
                        row.push((b, d, v));
                    }
                }
            }
        }
    }
    rows
}

/// Options for [`gaussify_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Detector efficiency, shared by both vacuum detectors.
    pub eta: f64,
    /// Largest tolerated fraction of output weight beyond the cutoff.
    pub truncation_bound: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { eta: 1.0, truncation_bound: DEFAULT_TRUNCATION_BOUND }
    }
}

/// General Gaussification step with copies `rho` (kept port) and `sigma`.
///
/// The output element is
/// `ρ'_{ABCD} = Σ_{k,l} (1-η)^{k+l} Σ g(A,k,a) g(B,l,b) g(C,k,c) g(D,l,d) ρ_{abcd} σ_{A+k-a, B+l-b, C+k-c, D+l-d}`,
/// where `k` and `l` are photon numbers missed by the two detectors. The sum is
/// organized per pair of `(a,c)` rows so that the `(B, D)` contraction runs
/// over non-zero entries only.
pub fn gaussify_step(rho: &FockDensityMatrix, sigma: &FockDensityMatrix, options: StepOptions) -> Result<GaussifyStepResult, DistillError> {
    check_unit_interval("eta", options.eta)?;
    for s in [rho, sigma] {
        if s.n_modes() != 2 {
            return Err(FockError::ModeCount { expected: 2, found: s.n_modes() }.into());
        }
    }
    if rho.cutoff() != sigma.cutoff() {
        return Err(FockError::CutoffMismatch(rho.cutoff(), sigma.cutoff()).into());
    }
    let n = rho.cutoff();
    let span = 2 * n + 1;
    let miss = 1.0 - options.eta;
    let scale = rho.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max)
        * sigma.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Miss-count powers, zeroed once the weight bound drops below the tolerance.
    let weights: Vec<f64> = (0..span)
        .map(|k| {
            let w = miss.powi(k as i32);
            if k > 0 && w * scale < DETECTOR_SUM_TOL {
                0.0
            } else {
                w
            }
        })
        .collect();

    let g = SideTable::new(n);
    let rows_r = rows_by_first_mode(rho);
    let rows_s = rows_by_first_mode(sigma);
    let dim = (n + 1) * (n + 1);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut full_trace = 0.0;
    let mut bd = vec![ZERO; dim];

    for a in 0..=n {
        for c in 0..=n {
            let row_r = &rows_r[a * (n + 1) + c];
            if row_r.is_empty() {
                continue;
            }
            for a2 in 0..=n {
                for c2 in 0..=n {
                    let row_s = &rows_s[a2 * (n + 1) + c2];
                    if row_s.is_empty() {
                        continue;
                    }
                    let (sa, sc) = (a + a2, c + c2);

                    // (B, D) side restricted to the cutoff, summed over l.
                    bd.iter_mut().for_each(|z| *z = ZERO);
                    let mut diag_bd = ZERO;
                    for &(b, d, rv) in row_r {
                        for &(b2, d2, sv) in row_s {
                            let (sb, sd) = (b + b2, d + d2);
                            let prod = rv * sv;
                            let l_lo = sb.saturating_sub(n).max(sd.saturating_sub(n));
                            for l in l_lo..=sb.min(sd) {
                                let w = weights[l];
                                if w == 0.0 {
                                    continue;
                                }
                                let (big_b, big_d) = (sb - l, sd - l);
                                let f = w * g.get(l, big_b, b) * g.get(l, big_d, d);
                                if f != 0.0 {
                                    bd[big_b * (n + 1) + big_d] += prod * f;
                                }
                            }
                            if sb == sd {
                                let mut f = 0.0;
                                for l in 0..=sb {
                                    let w = weights[l];
                                    if w != 0.0 {
                                        f += w * g.get(l, sb - l, b) * g.get(l, sb - l, d);
                                    }
                                }
                                diag_bd += prod * f;
                            }
                        }
                    }

                    // (A, C) side: distribute into kept outputs.
                    let k_lo = sa.saturating_sub(n).max(sc.saturating_sub(n));
                    for k in k_lo..=sa.min(sc) {
                        let w = weights[k];
                        if w == 0.0 {
                            continue;
                        }
                        let (big_a, big_c) = (sa - k, sc - k);
                        let f = w * g.get(k, big_a, a) * g.get(k, big_c, c);
                        if f == 0.0 {
                            continue;
                        }
                        for big_b in 0..=n {
                            for big_d in 0..=n {
                                let v = bd[big_b * (n + 1) + big_d];
                                if v != ZERO {
                                    out[(big_a * (n + 1) + big_b, big_c * (n + 1) + big_d)] += v * f;
                                }
                            }
                        }
                    }

                    // Untruncated trace: diagonal outputs of any photon number.
                    if sa == sc && diag_bd != ZERO {
                        let mut f = 0.0;
                        for k in 0..=sa {
                            let w = weights[k];
                            if w != 0.0 {
                                f += w * g.get(k, sa - k, a) * g.get(k, sa - k, c);
                            }
                        }
                        full_trace += (diag_bd * f).re;
                    }
                }
            }
        }
    }

    let state = FockDensityMatrix::new(2, n, out)?;
    let kept = state.trace();
    if kept <= 0.0 || full_trace <= 0.0 {
        return Err(DistillError::NullState(kept));
    }
    let truncated_weight = ((full_trace - kept) / full_trace).max(0.0);
    if truncated_weight > options.truncation_bound {
        return Err(FockError::CutoffOverflow { weight: truncated_weight, bound: options.truncation_bound }.into());
    }
    let probability = full_trace / (rho.trace() * sigma.trace());
    Ok(GaussifyStepResult {
        state: state.normalized()?.with_truncated_weight(truncated_weight),
        probability,
        truncated_weight,
    })
}

/// Ideal step on two identical copies.
pub fn gaussify_mixed_step(rho: &FockDensityMatrix) -> Result<GaussifyStepResult, DistillError> {
    gaussify_step(rho, rho, StepOptions::default())
}

/// Step on two identical copies with detectors of efficiency `eta`.
pub fn gaussify_step_inefficient(rho: &FockDensityMatrix, eta: f64) -> Result<GaussifyStepResult, DistillError> {
    gaussify_step(rho, rho, StepOptions { eta, ..StepOptions::default() })
}

/// Ideal step on two different copies.
pub fn gaussify_step_asymmetric(rho: &FockDensityMatrix, sigma: &FockDensityMatrix) -> Result<GaussifyStepResult, DistillError> {
    gaussify_step(rho, sigma, StepOptions::default())
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Noise applied to stored copies between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    #[default]
    None,
    /// Absorbing loop with intensity transmission `theta` on both modes.
    Absorb { theta: f64 },
    /// Off-diagonal elements scaled by `kappa`.
    Dephase { kappa: f64 },
    /// Common random phase with standard deviation `upsilon` (radians).
    PhaseDiffuse { upsilon: f64 },
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), DistillError> {
        match *self {
            ChannelSpec::None => Ok(()),
            ChannelSpec::Absorb { theta } => check_unit_interval("theta", theta),
            ChannelSpec::Dephase { kappa } => check_unit_interval("kappa", kappa),
            ChannelSpec::PhaseDiffuse { upsilon } => {
                if upsilon >= 0.0 && upsilon.is_finite() {
                    Ok(())
                } else {
                    Err(DistillError::Parameter { name: "upsilon", value: upsilon })
                }
            }
        }
    }

    /// Same channel with its parameter replaced.
    pub fn with_parameter(&self, value: f64) -> Self {
        match self {
            ChannelSpec::None => ChannelSpec::None,
            ChannelSpec::Absorb { .. } => ChannelSpec::Absorb { theta: value },
            ChannelSpec::Dephase { .. } => ChannelSpec::Dephase { kappa: value },
            ChannelSpec::PhaseDiffuse { .. } => ChannelSpec::PhaseDiffuse { upsilon: value },
        }
    }
}

/// Applies `spec` to both modes of a two-mode state.
pub fn apply_channel(rho: &FockDensityMatrix, spec: &ChannelSpec) -> Result<FockDensityMatrix, DistillError> {
    spec.validate()?;
    if rho.n_modes() != 2 {
        return Err(FockError::ModeCount { expected: 2, found: rho.n_modes() }.into());
    }
    let n = rho.cutoff();
    let mut out = rho.clone();
    match *spec {
        ChannelSpec::None => {}
        ChannelSpec::Absorb { theta } => {
            let loss = 1.0 - theta;
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=n {
                        for d in 0..=n {
                            let mut acc = ZERO;
                            for j in 0..=(n - a.max(c)) {
                                let wj = (binomial(a + j, j) * binomial(c + j, j)).sqrt() * loss.powi(j as i32);
                                if wj == 0.0 {
                                    break;
                                }
                                for k in 0..=(n - b.max(d)) {
                                    let wk = (binomial(b + k, k) * binomial(d + k, k)).sqrt() * loss.powi(k as i32);
                                    if wk == 0.0 {
                                        break;
                                    }
                                    acc += rho.element(a + j, b + k, c + j, d + k) * (wj * wk);
                                }
                            }
                            let scale = theta.sqrt().powi((a + b + c + d) as i32);
                            out.set_element(a, b, c, d, acc * scale);
                        }
                    }
                }
            }
        }
        ChannelSpec::Dephase { kappa } => {
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=n {
                        for d in 0..=n {
                            if (a, b) != (c, d) {
                                out.set_element(a, b, c, d, rho.element(a, b, c, d) * kappa);
                            }
                        }
                    }
                }
            }
        }
        ChannelSpec::PhaseDiffuse { upsilon } => {
            for a in 0..=n {
                for b in 0..=n {
                    for c in 0..=n {
                        for d in 0..=n {
                            let delta = (a + b) as f64 - (c + d) as f64;
                            let f = (-(delta * upsilon).powi(2) / 2.0).exp();
                            out.set_element(a, b, c, d, rho.element(a, b, c, d) * f);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Limits
// ---------------------------------------------------------------------------

/// Gaussian state towards which iterated ideal Gaussification converges.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussifyLimit {
    pub covariance: DMatrix<f64>,
    /// Whether the covariance matrix is physical, i.e. whether the iteration converges.
    pub converges: bool,
    pub sigma: SigmaElements,
}

fn require_vacuum_weight(rho: &FockDensityMatrix) -> Result<f64, DistillError> {
    if rho.n_modes() != 2 {
        return Err(FockError::ModeCount { expected: 2, found: rho.n_modes() }.into());
    }
    let r0 = rho.element(0, 0, 0, 0).re;
    if r0.abs() < NULL_STATE_TOL * rho.trace().abs().max(1.0) {
        return Err(DistillError::NullState(r0));
    }
    Ok(r0)
}

/// Limit covariance from the six second-order elements fixed after the first iteration.
pub fn gaussify_limit(rho0: &FockDensityMatrix) -> Result<GaussifyLimit, DistillError> {
    require_vacuum_weight(rho0)?;
    let sigma = SigmaElements::gaussification_limit(rho0)?;
    let covariance = sigma_to_covariance(&sigma)?;
    let state = GaussianState::centered(covariance.clone())?;
    let converges = state.is_physical(PHYSICALITY_TOL);
    Ok(GaussifyLimit { covariance, converges, sigma })
}

/// True when iteration from `rho0` tends to a pure Gaussian state.
pub fn check_pure_convergence(rho0: &FockDensityMatrix) -> bool {
    let Ok(r0) = require_vacuum_weight(rho0) else {
        return false;
    };
    let e = |a, b, c, d| rho0.element(a, b, c, d);
    let tol = PURE_CONVERGENCE_TOL * r0.abs();
    let conditions = (e(1, 0, 1, 0) - e(1, 0, 0, 0).norm_sqr() / r0).norm() <= tol
        && (e(0, 1, 0, 1) - e(0, 1, 0, 0).norm_sqr() / r0).norm() <= tol
        && (e(1, 0, 0, 1) - e(1, 0, 0, 0) * e(0, 0, 0, 1) / r0).norm() <= tol;
    if !conditions {
        return false;
    }
    match gaussify_limit(rho0) {
        Ok(limit) => limit.converges && (limit.covariance.determinant() - 1.0).abs() < 1e-6,
        Err(_) => false,
    }
}

/// Largest element-wise difference between two trace-normalized states.
pub fn elementwise_distance(x: &FockDensityMatrix, y: &FockDensityMatrix) -> Result<f64, DistillError> {
    if x.cutoff() != y.cutoff() || x.n_modes() != y.n_modes() {
        return Err(FockError::CutoffMismatch(x.cutoff(), y.cutoff()).into());
    }
    let (x, y) = (x.normalized()?, y.normalized()?);
    Ok((x.matrix() - y.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Iterated protocol
// ---------------------------------------------------------------------------

/// Settings of an iterated Gaussification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub iterations: usize,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub channel: ChannelSpec,
    /// Apply the channel to both copies instead of only the stored one.
    #[serde(default)]
    pub two_sided: bool,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_max_cutoff")]
    pub max_cutoff: usize,
    #[serde(default = "default_bound")]
    pub truncation_bound: f64,
    /// Record the distance to the Gaussian limit state at each iteration.
    #[serde(default)]
    pub track_limit: bool,
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

fn default_max_cutoff() -> usize {
    14
}

fn default_bound() -> f64 {
    DEFAULT_TRUNCATION_BOUND
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            iterations: 2,
            eta: 1.0,
            channel: ChannelSpec::None,
            two_sided: false,
            cutoff: DEFAULT_CUTOFF,
            max_cutoff: default_max_cutoff(),
            truncation_bound: DEFAULT_TRUNCATION_BOUND,
            track_limit: false,
        }
    }
}

/// Measures of the state after a given number of successful iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub log_negativity: f64,
    pub entropy: f64,
    /// Success probability of this iteration (1 for the input).
    pub probability: f64,
    pub distance_to_limit: Option<f64>,
    pub cutoff: usize,
    pub truncated_weight: f64,
}

/// Per-iteration record of a protocol run plus the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    pub records: Vec<IterationRecord>,
    pub final_state: FockDensityMatrix,
    pub limit: Option<GaussifyLimit>,
}

fn record(
    iteration: usize,
    state: &FockDensityMatrix,
    probability: f64,
    limit_state: Option<&FockDensityMatrix>,
) -> Result<IterationRecord, DistillError> {
    let distance_to_limit = match limit_state {
        Some(l) => Some(elementwise_distance(&state.with_cutoff(l.cutoff()), l)?),
        None => None,
    };
    Ok(IterationRecord {
        iteration,
        log_negativity: state.log_negativity()?,
        entropy: state.vn_entropy()?,
        probability,
        distance_to_limit,
        cutoff: state.cutoff(),
        truncated_weight: state.truncated_weight(),
    })
}

/// Runs `config.iterations` successful Gaussification steps from `rho0`.
///
/// When a step pushes more than the truncation bound beyond the cutoff, the
/// cutoff is raised by two (up to `max_cutoff`) and the step is repeated.
pub fn run_protocol(rho0: &FockDensityMatrix, config: &ProtocolConfig) -> Result<ProtocolTrace, DistillError> {
    if config.iterations == 0 {
        return Err(DistillError::Parameter { name: "iterations", value: 0.0 });
    }
    check_unit_interval("eta", config.eta)?;
    config.channel.validate()?;
    require_vacuum_weight(rho0)?;
    let mut state = rho0.with_cutoff(config.cutoff.max(rho0.cutoff())).normalized()?;

    let (limit, limit_state) = if config.track_limit {
        let limit = gaussify_limit(rho0)?;
        let ls = if limit.converges {
            Some(gaussian_to_fock(&GaussianState::centered(limit.covariance.clone())?, state.cutoff())?)
        } else {
            None
        };
        (Some(limit), ls)
    } else {
        (None, None)
    };

    let mut records = vec![record(0, &state, 1.0, limit_state.as_ref())?];
    for iteration in 1..=config.iterations {
        let result = loop {
            let stored = apply_channel(&state, &config.channel)?;
            let fresh = if config.two_sided { stored.clone() } else { state.clone() };
            let options = StepOptions { eta: config.eta, truncation_bound: config.truncation_bound };
            match gaussify_step(&fresh, &stored, options) {
                Ok(r) => break r,
                Err(DistillError::Fock(FockError::CutoffOverflow { weight, .. })) => {
                    let next = state.cutoff() + 2;
                    if next > config.max_cutoff {
                        return Err(DistillError::CutoffBudget { cutoff: state.cutoff(), max_cutoff: config.max_cutoff, weight });
                    }
                    state = state.with_cutoff(next);
                }
                Err(e) => return Err(e),
            }
        };
        state = result.state;
        records.push(record(iteration, &state, result.probability, limit_state.as_ref())?);
    }
    Ok(ProtocolTrace { records, final_state: state, limit })
}

// ---------------------------------------------------------------------------
// Input specifications
// ---------------------------------------------------------------------------

/// A complex number given either as a bare real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// On-disk description of a two-mode input state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Schmidt-diagonal pure state `Σ αₙ |n, n⟩`.
    Schmidt { alphas: Vec<ComplexValue> },
    /// Explicit elements `[a, b, c, d, re, im]`; the state is trace-normalized.
    Elements { entries: Vec<DumpEntry> },
    /// Output of the one-photon filter on a lossy two-mode squeezed state.
    Procrustean {
        r: f64,
        #[serde(rename = "T")]
        transmission: f64,
        #[serde(default = "one")]
        tau: f64,
    },
    /// Centered two-mode Gaussian state.
    Gaussian { gamma: Vec<Vec<f64>>, d: Vec<f64> },
}

impl InputSpec {
    /// Builds the trace-normalized density matrix at `cutoff`.
    pub fn to_density(&self, cutoff: usize) -> Result<FockDensityMatrix, DistillError> {
        match self {
            InputSpec::Schmidt { alphas } => {
                let coeffs = PureSchmidtCoeffs::new(alphas.iter().map(|&a| a.into()).collect())?;
                Ok(coeffs.to_fock(cutoff).to_density()?.normalized()?)
            }
            InputSpec::Elements { entries } => {
                let needed = entries.iter().flat_map(|e| [e.a, e.b, e.c, e.d]).max().unwrap_or(0);
                if needed > cutoff {
                    return Err(DistillError::Spec(format!("element index {needed} exceeds cutoff {cutoff}")));
                }
                let dump = crate::fock::MatrixDump { n_modes: 2, cutoff, entries: entries.clone() };
                let rho = FockDensityMatrix::from_dump(&dump)?;
                if rho.hermiticity_defect() > 1e-9 {
                    return Err(DistillError::Spec("elements are not Hermitian; list both ρ_abcd and ρ_cdab".into()));
                }
                Ok(rho.normalized()?)
            }
            InputSpec::Procrustean { r, transmission, tau } => {
                let config = ProcrusteanConfig { r: *r, transmission: *transmission, tau: *tau, photons: 1 };
                Ok(procrustean_mixed_state(&config, cutoff)?.0)
            }
            InputSpec::Gaussian { gamma, d } => {
                let rows = gamma.len();
                if rows != 4 || gamma.iter().any(|r| r.len() != 4) {
                    return Err(DistillError::Spec("gamma must be 4x4".into()));
                }
                if d.len() != 4 {
                    return Err(DistillError::Spec("d must have 4 entries".into()));
                }
                if d.iter().any(|&x| x != 0.0) {
                    return Err(DistillError::Spec("only centered Gaussian inputs (d = 0) can be converted".into()));
                }
                let cov = DMatrix::from_fn(4, 4, |i, j| gamma[i][j]);
                let state = GaussianState::new(cov, DVector::from_column_slice(d))?;
                Ok(gaussian_to_fock(&state, cutoff)?.normalized()?)
            }
        }
    }
}
