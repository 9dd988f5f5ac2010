//! Truncated Fock-space states of one or a few bosonic modes.
//!
//! Pure vectors may carry any number of modes so that small linear-optics
//! networks (ancilla photons, pairs of copies) can be simulated directly.
//! Density matrices are restricted to one or two modes and index their
//! entries as `ρ_{a,b;c,d} = ⟨a,b|ρ|c,d⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::json_number;
use crate::math::{binomial, factorial, hermitian_eigenvalues, neg_p_log2_p};

/// Default photon-number cutoff per mode.
pub const DEFAULT_CUTOFF: usize = 10;

/// Default bound on the probability an operation may discard through truncation.
pub const DEFAULT_TRUNCATION_BOUND: f64 = 1e-6;

/// Eigenvalues of a normalized density matrix below this are treated as a positivity failure.
pub const POSITIVITY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("mode index {mode} out of range for {n_modes} modes")]
    Mode { mode: usize, n_modes: usize },
    #[error("operation needs {expected} modes, state has {found}")]
    ModeCount { expected: usize, found: usize },
    #[error("density matrices support one or two modes, requested {0}")]
    UnsupportedModes(usize),
    #[error("truncation discarded weight {weight:.3e}, above the bound {bound:.3e}")]
    CutoffOverflow { weight: f64, bound: f64 },
    #[error("cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),
    #[error("expected a vector or matrix of dimension {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("beam splitter requires T² + R² = 1, found {0}")]
    BeamSplitterNorm(f64),
    #[error("detector efficiency must lie in [0, 1], found {0}")]
    Efficiency(f64),
    #[error("state has non-positive trace {0:.3e}")]
    ZeroTrace(f64),
    #[error("density matrix is not positive (eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("malformed matrix dump: {0}")]
    Dump(String),
}

fn basis_dim(n_modes: usize, cutoff: usize) -> usize {
    (cutoff + 1).pow(n_modes as u32)
}

fn occupations_of(mut idx: usize, n_modes: usize, cutoff: usize) -> Vec<usize> {
    let mut occ = vec![0; n_modes];
    for slot in occ.iter_mut().rev() {
        *slot = idx % (cutoff + 1);
        idx /= cutoff + 1;
    }
    occ
}

fn index_of(occ: &[usize], cutoff: usize) -> usize {
    occ.iter().fold(0, |acc, &n| acc * (cutoff + 1) + n)
}

/// Pure state on `n_modes` modes, each truncated at `cutoff` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct FockPureVector {
    n_modes: usize,
    cutoff: usize,
    amplitudes: DVector<Complex64>,
    truncated_weight: f64,
}

impl FockPureVector {
    pub fn zeros(n_modes: usize, cutoff: usize) -> Self {
        Self {
            n_modes,
            cutoff,
            amplitudes: DVector::zeros(basis_dim(n_modes, cutoff)),
            truncated_weight: 0.0,
        }
    }

    /// Number state `|n₁, n₂, …⟩`.
    pub fn basis(occupations: &[usize], cutoff: usize) -> Result<Self, FockError> {
        let mut v = Self::zeros(occupations.len(), cutoff);
        if let Some(&n) = occupations.iter().find(|&&n| n > cutoff) {
            return Err(FockError::CutoffMismatch(n, cutoff));
        }
        v.amplitudes[index_of(occupations, cutoff)] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn vacuum(n_modes: usize, cutoff: usize) -> Self {
        let mut v = Self::zeros(n_modes, cutoff);
        v.amplitudes[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_amplitudes(n_modes: usize, cutoff: usize, amplitudes: DVector<Complex64>) -> Result<Self, FockError> {
        let expected = basis_dim(n_modes, cutoff);
        if amplitudes.len() != expected {
            return Err(FockError::Dimension { expected, found: amplitudes.len() });
        }
        Ok(Self { n_modes, cutoff, amplitudes, truncated_weight: 0.0 })
    }

    /// Two-mode Schmidt-diagonal state `Σ αₙ |n, n⟩`, unnormalized.
    pub fn schmidt(alphas: &[Complex64], cutoff: usize) -> Self {
        let mut v = Self::zeros(2, cutoff);
        for (n, &a) in alphas.iter().enumerate().take(cutoff + 1) {
            v.amplitudes[index_of(&[n, n], cutoff)] = a;
        }
        v
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn truncated_weight(&self) -> f64 {
        self.truncated_weight
    }

    pub fn with_truncated_weight(mut self, weight: f64) -> Self {
        self.truncated_weight = weight;
        self
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Complex64 {
        if occupations.iter().any(|&n| n > self.cutoff) {
            return ZERO;
        }
        self.amplitudes[index_of(occupations, self.cutoff)]
    }

    pub fn set_amplitude(&mut self, occupations: &[usize], value: Complex64) {
        let idx = index_of(occupations, self.cutoff);
        self.amplitudes[idx] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(FockError::ZeroTrace(n));
        }
        let mut out = self.clone();
        out.amplitudes.unscale_mut(n.sqrt());
        Ok(out)
    }

    /// Tensor product; the modes of `other` follow those of `self`.
    pub fn tensor(&self, other: &Self) -> Result<Self, FockError> {
        if self.cutoff != other.cutoff {
            return Err(FockError::CutoffMismatch(self.cutoff, other.cutoff));
        }
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Ok(Self {
            n_modes: self.n_modes + other.n_modes,
            cutoff: self.cutoff,
            amplitudes,
            truncated_weight: self.truncated_weight + other.truncated_weight,
        })
    }

    /// Projects `mode` onto `photons` and removes it; the result is unnormalized.
    pub fn project_photons(&self, mode: usize, photons: usize) -> Result<Self, FockError> {
        if mode >= self.n_modes {
            return Err(FockError::Mode { mode, n_modes: self.n_modes });
        }
        if self.n_modes < 2 {
            return Err(FockError::ModeCount { expected: 2, found: self.n_modes });
        }
        let mut out = Self::zeros(self.n_modes - 1, self.cutoff);
        if photons > self.cutoff {
            return Ok(out);
        }
        for idx in 0..out.amplitudes.len() {
            let mut occ = occupations_of(idx, self.n_modes - 1, self.cutoff);
            occ.insert(mode, photons);
            out.amplitudes[idx] = self.amplitudes[index_of(&occ, self.cutoff)];
        }
        out.truncated_weight = self.truncated_weight;
        Ok(out)
    }

    /// Re-embeds at a different cutoff; lowering it adds the dropped weight.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(self.n_modes, cutoff);
        let mut dropped = 0.0;
        for (idx, &a) in self.amplitudes.iter().enumerate() {
            let occ = occupations_of(idx, self.n_modes, self.cutoff);
            if occ.iter().all(|&n| n <= cutoff) {
                out.amplitudes[index_of(&occ, cutoff)] = a;
            } else {
                dropped += a.norm_sqr();
            }
        }
        out.truncated_weight = self.truncated_weight + dropped;
        out
    }

    pub fn to_density(&self) -> Result<FockDensityMatrix, FockError> {
        FockDensityMatrix::from_pure(self)
    }
}

/// Two-mode Schmidt form of the two-mode squeezed vacuum,
/// `sech r Σ (-e^{iφ} tanh r)ⁿ |n, n⟩`, truncated at `cutoff`.
pub fn tmss_fock(r: f64, phi: f64, cutoff: usize) -> FockPureVector {
    let lambda = -Complex64::from_polar(r.tanh(), phi);
    let sech = 1.0 / r.cosh();
    let alphas: Vec<Complex64> = (0..=cutoff).map(|n| lambda.powu(n as u32) * sech).collect();
    FockPureVector::schmidt(&alphas, cutoff).with_truncated_weight(r.tanh().powi(2 * (cutoff as i32 + 1)))
}

/// Phase convention of a beam splitter acting on creation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamSplitterConvention {
    /// `a₁† ↦ T a₁† + iR a₂†`, `a₂† ↦ iR a₁† + T a₂†`.
    SymmetricI,
    /// `a₁† ↦ T a₁† + R a₂†`, `a₂† ↦ -R a₁† + T a₂†`.
    RealAntisymmetric,
}

/// Lossless two-port beam splitter with real transmission and reflection amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    transmission: f64,
    reflection: f64,
    convention: BeamSplitterConvention,
}

impl BeamSplitter {
    pub fn new(transmission: f64, reflection: f64, convention: BeamSplitterConvention) -> Result<Self, FockError> {
        let norm = transmission * transmission + reflection * reflection;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(FockError::BeamSplitterNorm(norm));
        }
        Ok(Self { transmission, reflection, convention })
    }

    pub fn balanced(convention: BeamSplitterConvention) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { transmission: h, reflection: h, convention }
    }

    /// Row `i` gives the image of `a_i†` in terms of `(a₁†, a₂†)`.
    fn creation_map(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new(self.transmission, 0.0);
        let r = self.reflection;
        match self.convention {
            BeamSplitterConvention::SymmetricI => [[t, Complex64::new(0.0, r)], [Complex64::new(0.0, r), t]],
            BeamSplitterConvention::RealAntisymmetric => {
                [[t, Complex64::new(r, 0.0)], [Complex64::new(-r, 0.0), t]]
            }
        }
    }
}

/// Applies a beam splitter to `modes` with the default truncation bound.
pub fn beam_splitter_fock(
    state: &FockPureVector,
    splitter: &BeamSplitter,
    modes: (usize, usize),
) -> Result<FockPureVector, FockError> {
    beam_splitter_fock_with_bound(state, splitter, modes, DEFAULT_TRUNCATION_BOUND)
}

/// Applies a beam splitter to `modes`; amplitude pushed above the cutoff is
/// dropped and counted in `truncated_weight`, which may not exceed `bound`.
pub fn beam_splitter_fock_with_bound(
    state: &FockPureVector,
    splitter: &BeamSplitter,
    modes: (usize, usize),
    bound: f64,
) -> Result<FockPureVector, FockError> {
    let (m1, m2) = modes;
    for m in [m1, m2] {
        if m >= state.n_modes {
            return Err(FockError::Mode { mode: m, n_modes: state.n_modes });
        }
    }
    if m1 == m2 {
        return Err(FockError::Mode { mode: m2, n_modes: state.n_modes });
    }
    let u = splitter.creation_map();
    let cutoff = state.cutoff;
    let mut out = FockPureVector::zeros(state.n_modes, cutoff);
    for (idx, &c) in state.amplitudes.iter().enumerate() {
        if c == ZERO {
            continue;
        }
        let mut occ = occupations_of(idx, state.n_modes, cutoff);
        let (n1, n2) = (occ[m1], occ[m2]);
        let total = n1 + n2;
        let norm_in = (factorial(n1) * factorial(n2)).sqrt();
        let mut coeffs = vec![ZERO; total + 1];
        for j1 in 0..=n1 {
            let f1 = u[0][0].powu(j1 as u32) * u[0][1].powu((n1 - j1) as u32) * binomial(n1, j1);
            for j2 in 0..=n2 {
                let f2 = u[1][0].powu(j2 as u32) * u[1][1].powu((n2 - j2) as u32) * binomial(n2, j2);
                coeffs[j1 + j2] += f1 * f2;
            }
        }
        for (j, coeff) in coeffs.into_iter().enumerate() {
            let k = total - j;
            if j > cutoff || k > cutoff || coeff == ZERO {
                continue;
            }
            occ[m1] = j;
            occ[m2] = k;
            let scale = (factorial(j) * factorial(k)).sqrt() / norm_in;
            out.amplitudes[index_of(&occ, cutoff)] += c * coeff * scale;
        }
    }
    let lost = (state.norm_sqr() - out.norm_sqr()).max(0.0);
    out.truncated_weight = state.truncated_weight + lost;
    if out.truncated_weight > bound {
        return Err(FockError::CutoffOverflow { weight: out.truncated_weight, bound });
    }
    Ok(out)
}

/// Density matrix of one or two truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    n_modes: usize,
    cutoff: usize,
    matrix: DMatrix<Complex64>,
    truncated_weight: f64,
}

impl FockDensityMatrix {
    pub fn new(n_modes: usize, cutoff: usize, matrix: DMatrix<Complex64>) -> Result<Self, FockError> {
        if !(1..=2).contains(&n_modes) {
            return Err(FockError::UnsupportedModes(n_modes));
        }
        let dim = basis_dim(n_modes, cutoff);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(FockError::Dimension { expected: dim, found: matrix.nrows() });
        }
        Ok(Self { n_modes, cutoff, matrix, truncated_weight: 0.0 })
    }

    pub fn zeros(n_modes: usize, cutoff: usize) -> Result<Self, FockError> {
        let dim = basis_dim(n_modes, cutoff);
        Self::new(n_modes, cutoff, DMatrix::zeros(dim, dim))
    }

    pub fn vacuum(n_modes: usize, cutoff: usize) -> Result<Self, FockError> {
        let mut out = Self::zeros(n_modes, cutoff)?;
        out.matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        Ok(out)
    }

    pub fn from_pure(v: &FockPureVector) -> Result<Self, FockError> {
        let mut out = Self::new(v.n_modes, v.cutoff, &v.amplitudes * v.amplitudes.adjoint())?;
        out.truncated_weight = v.truncated_weight;
        Ok(out)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn truncated_weight(&self) -> f64 {
        self.truncated_weight
    }

    pub fn with_truncated_weight(mut self, weight: f64) -> Self {
        self.truncated_weight = weight;
        self
    }

    /// Row/column index of the number state `|a⟩` or `|a, b⟩`.
    pub fn index(&self, occupations: &[usize]) -> usize {
        index_of(occupations, self.cutoff)
    }

    /// `⟨a,b|ρ|c,d⟩`; zero when any index exceeds the cutoff.
    pub fn element(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let n = self.cutoff;
        if a > n || b > n || c > n || d > n {
            return ZERO;
        }
        self.matrix[(a * (n + 1) + b, c * (n + 1) + d)]
    }

    pub fn set_element(&mut self, a: usize, b: usize, c: usize, d: usize, value: Complex64) {
        let n = self.cutoff;
        self.matrix[(a * (n + 1) + b, c * (n + 1) + d)] = value;
    }

    /// Sets `ρ_{abcd}` and its Hermitian partner `ρ_{cdab}`.
    pub fn set_hermitian_pair(&mut self, a: usize, b: usize, c: usize, d: usize, value: Complex64) {
        self.set_element(a, b, c, d, value);
        self.set_element(c, d, a, b, value.conj());
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let t = self.trace();
        if t <= 0.0 || !t.is_finite() {
            return Err(FockError::ZeroTrace(t));
        }
        let mut out = self.clone();
        out.matrix.unscale_mut(t);
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.matrix.scale_mut(factor);
        out
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn purity(&self) -> f64 {
        let t = self.trace();
        (&self.matrix * &self.matrix).trace().re / (t * t)
    }

    /// Re-embeds at a different cutoff; lowering it adds the dropped diagonal weight.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let dim = basis_dim(self.n_modes, cutoff);
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut dropped = 0.0;
        let keep: Vec<Option<usize>> = (0..self.dim())
            .map(|i| {
                let occ = occupations_of(i, self.n_modes, self.cutoff);
                occ.iter().all(|&n| n <= cutoff).then(|| index_of(&occ, cutoff))
            })
            .collect();
        for i in 0..self.dim() {
            match keep[i] {
                Some(ni) => {
                    for j in 0..self.dim() {
                        if let Some(nj) = keep[j] {
                            matrix[(ni, nj)] = self.matrix[(i, j)];
                        }
                    }
                }
                None => dropped += self.matrix[(i, i)].re,
            }
        }
        let t = self.trace();
        let rel = if t > 0.0 { dropped / t } else { 0.0 };
        Self { n_modes: self.n_modes, cutoff, matrix, truncated_weight: self.truncated_weight + rel }
    }

    /// `σ ⊗ τ` of two single-mode states.
    pub fn tensor(&self, other: &Self) -> Result<Self, FockError> {
        if self.n_modes != 1 || other.n_modes != 1 {
            return Err(FockError::ModeCount { expected: 1, found: self.n_modes.max(other.n_modes) });
        }
        if self.cutoff != other.cutoff {
            return Err(FockError::CutoffMismatch(self.cutoff, other.cutoff));
        }
        let mut out = Self::new(2, self.cutoff, self.matrix.kronecker(&other.matrix))?;
        out.truncated_weight = self.truncated_weight + other.truncated_weight;
        Ok(out)
    }

    fn require_two_modes(&self) -> Result<(), FockError> {
        if self.n_modes != 2 {
            return Err(FockError::ModeCount { expected: 2, found: self.n_modes });
        }
        Ok(())
    }

    /// Traces out `mode` of a two-mode state.
    pub fn partial_trace(&self, mode: usize) -> Result<Self, FockError> {
        self.weighted_trace(mode, |_| 1.0)
    }

    /// Applies the no-click element `Σ_k (1-η)^k |k⟩⟨k|` of an inefficient detector
    /// to `mode` and traces it out. Returns the unnormalized remainder and the
    /// probability relative to the input trace.
    pub fn project_vacuum(&self, mode: usize, eta: f64) -> Result<(Self, f64), FockError> {
        if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
            return Err(FockError::Efficiency(eta));
        }
        let out = self.weighted_trace(mode, |k| (1.0 - eta).powi(k as i32))?;
        let p = out.trace() / self.trace();
        Ok((out, p))
    }

    /// Applies the element `Σ_{k≥n} C(k,n) ηⁿ (1-η)^{k-n} |k⟩⟨k|` for `photons = n` clicks.
    pub fn project_photons(&self, mode: usize, photons: usize, eta: f64) -> Result<(Self, f64), FockError> {
        if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
            return Err(FockError::Efficiency(eta));
        }
        let out = self.weighted_trace(mode, |k| {
            if k < photons {
                0.0
            } else {
                binomial(k, photons) * eta.powi(photons as i32) * (1.0 - eta).powi((k - photons) as i32)
            }
        })?;
        let p = out.trace() / self.trace();
        Ok((out, p))
    }

    fn weighted_trace(&self, mode: usize, weight: impl Fn(usize) -> f64) -> Result<Self, FockError> {
        self.require_two_modes()?;
        if mode > 1 {
            return Err(FockError::Mode { mode, n_modes: 2 });
        }
        let n = self.cutoff;
        let mut out = DMatrix::zeros(n + 1, n + 1);
        for x in 0..=n {
            for y in 0..=n {
                let mut acc = ZERO;
                for k in 0..=n {
                    let w = weight(k);
                    if w == 0.0 {
                        continue;
                    }
                    let v = if mode == 1 { self.element(x, k, y, k) } else { self.element(k, x, k, y) };
                    acc += v * w;
                }
                out[(x, y)] = acc;
            }
        }
        let mut st = Self::new(1, n, out)?;
        st.truncated_weight = self.truncated_weight;
        Ok(st)
    }

    /// Partial transpose on the second mode, `ρ_{a,b;c,d} ↦ ρ_{a,d;c,b}`.
    pub fn partial_transpose(&self) -> Result<DMatrix<Complex64>, FockError> {
        self.require_two_modes()?;
        let n = self.cutoff;
        let dim = self.dim();
        Ok(DMatrix::from_fn(dim, dim, |i, j| {
            let (a, b) = (i / (n + 1), i % (n + 1));
            let (c, d) = (j / (n + 1), j % (n + 1));
            self.element(a, d, c, b)
        }))
    }

    /// `log₂ ‖ρ^{T_B}‖₁` of the trace-normalized state.
    pub fn log_negativity(&self) -> Result<f64, FockError> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroTrace(t));
        }
        let pt = self.partial_transpose()?;
        let norm: f64 = hermitian_eigenvalues(&pt).iter().map(|e| e.abs()).sum();
        Ok((norm / t).log2().max(0.0))
    }

    /// Eigenvalues of the trace-normalized state, clipped at zero after the positivity check.
    pub fn spectrum(&self) -> Result<Vec<f64>, FockError> {
        let normalized = self.normalized()?;
        let eig = hermitian_eigenvalues(&normalized.matrix);
        if let Some(&min) = eig.first() {
            if min < -POSITIVITY_TOL {
                return Err(FockError::NotPositive(min));
            }
        }
        Ok(eig.into_iter().map(|e| e.max(0.0)).collect())
    }

    /// Von Neumann entropy in bits.
    pub fn vn_entropy(&self) -> Result<f64, FockError> {
        Ok(self.spectrum()?.into_iter().map(neg_p_log2_p).sum())
    }

    /// `⟨ψ|ρ|ψ⟩` with both state and target normalized.
    pub fn fidelity_with(&self, target: &FockPureVector) -> Result<f64, FockError> {
        if target.n_modes != self.n_modes || target.cutoff != self.cutoff {
            return Err(FockError::Dimension { expected: self.dim(), found: target.amplitudes.len() });
        }
        let t = self.trace();
        let norm = target.norm_sqr();
        if t <= 0.0 || norm <= 0.0 {
            return Err(FockError::ZeroTrace(t.min(norm)));
        }
        let v = &target.amplitudes;
        let value = (v.adjoint() * &self.matrix * v)[(0, 0)].re;
        Ok((value / (t * norm)).clamp(0.0, 1.0))
    }

    /// Sparse dump listing entries with modulus above `1e-14`.
    pub fn to_dump(&self) -> MatrixDump {
        let n = self.cutoff;
        let mut entries = Vec::new();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.matrix[(i, j)];
                if z.norm() > 1e-14 {
                    let (a, b, c, d) = if self.n_modes == 2 {
                        (i / (n + 1), i % (n + 1), j / (n + 1), j % (n + 1))
                    } else {
                        (i, 0, j, 0)
                    };
                    entries.push(DumpEntry { a, b, c, d, re: z.re, im: z.im });
                }
            }
        }
        MatrixDump { n_modes: self.n_modes, cutoff: self.cutoff, entries }
    }

    pub fn from_dump(dump: &MatrixDump) -> Result<Self, FockError> {
        let mut out = Self::zeros(dump.n_modes, dump.cutoff)?;
        let n = dump.cutoff;
        for e in &dump.entries {
            if e.a > n || e.b > n || e.c > n || e.d > n {
                return Err(FockError::Dump(format!("entry ({},{},{},{}) exceeds cutoff {n}", e.a, e.b, e.c, e.d)));
            }
            if dump.n_modes == 1 && (e.b != 0 || e.d != 0) {
                return Err(FockError::Dump("single-mode entries must have b = d = 0".into()));
            }
            let (i, j) = if dump.n_modes == 2 { (e.a * (n + 1) + e.b, e.c * (n + 1) + e.d) } else { (e.a, e.c) };
            out.matrix[(i, j)] = Complex64::new(e.re, e.im);
        }
        Ok(out)
    }
}

/// One non-negligible matrix element `⟨a,b|ρ|c,d⟩ = re + i·im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, usize, usize, f64, f64)", into = "(usize, usize, usize, usize, f64, f64)")]
pub struct DumpEntry {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub re: f64,
    pub im: f64,
}

impl From<(usize, usize, usize, usize, f64, f64)> for DumpEntry {
    fn from((a, b, c, d, re, im): (usize, usize, usize, usize, f64, f64)) -> Self {
        Self { a, b, c, d, re, im }
    }
}

impl From<DumpEntry> for (usize, usize, usize, usize, f64, f64) {
    fn from(e: DumpEntry) -> Self {
        (e.a, e.b, e.c, e.d, e.re, e.im)
    }
}

/// On-disk form of a density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDump {
    pub n_modes: usize,
    pub cutoff: usize,
    pub entries: Vec<DumpEntry>,
}

impl MatrixDump {
    /// JSON text with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("[{},{},{},{},{},{}]", e.a, e.b, e.c, e.d, json_number(e.re), json_number(e.im)))
            .collect();
        format!(
            "{{\"n_modes\":{},\"cutoff\":{},\"entries\":[{}]}}",
            self.n_modes,
            self.cutoff,
            rows.join(",")
        )
    }
}

/// Free-function forms mirroring the methods above.
pub fn partial_trace(state: &FockDensityMatrix, mode: usize) -> Result<FockDensityMatrix, FockError> {
    state.partial_trace(mode)
}

pub fn project_vacuum(state: &FockDensityMatrix, mode: usize, eta: f64) -> Result<(FockDensityMatrix, f64), FockError> {
    state.project_vacuum(mode, eta)
}

pub fn log_negativity_fock(state: &FockDensityMatrix) -> Result<f64, FockError> {
    state.log_negativity()
}

pub fn vn_entropy_fock(state: &FockDensityMatrix) -> Result<f64, FockError> {
    state.vn_entropy()
}

pub fn fidelity_with(state: &FockDensityMatrix, target: &FockPureVector) -> Result<f64, FockError> {
    state.fidelity_with(target)
}
