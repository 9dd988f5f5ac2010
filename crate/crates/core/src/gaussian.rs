//! Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are `X = (a + a†)/√2` and `P = -i(a - a†)/√2`, ordered
//! `(X₁, P₁, X₂, P₂, …)`, so the vacuum has covariance `𝟙`. The characteristic
//! function of a state is `exp(-¼ ξᵀΣΓΣᵀξ + i dᵀΣξ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Default tolerance for the uncertainty-relation check `Γ + iΣ ⪰ 0`.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Relative tolerance used when pairing the eigenvalues of `ΣΓ` by modulus.
pub const PAIRING_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("covariance matrix must be square with even dimension, found {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("covariance matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("beam splitter requires T² + R² = 1, found {0}")]
    BeamSplitterNorm(f64),
    #[error("transmission must lie in [0, 1], found {0}")]
    Transmission(f64),
    #[error("mode index {mode} out of range for {n_modes} modes")]
    Mode { mode: usize, n_modes: usize },
    #[error("state violates the uncertainty relation (min eigenvalue of Γ+iΣ is {0:.3e})")]
    Unphysical(f64),
    #[error("eigenvalues of ΣΓ could not be paired by modulus")]
    Pairing,
    #[error("matrix is not symplectic (max defect {0:.3e})")]
    NotSymplectic(f64),
}

/// The symplectic form `Σ = ⊕ [[0, 1], [-1, 0]]` on `n` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let dim = 2 * self.n_modes;
        let mut sigma = DMatrix::zeros(dim, dim);
        for k in 0..self.n_modes {
            sigma[(2 * k, 2 * k + 1)] = 1.0;
            sigma[(2 * k + 1, 2 * k)] = -1.0;
        }
        sigma
    }
}

/// A Gaussian state given by its covariance matrix and displacement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    covariance: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl GaussianState {
    /// Builds a state, checking shape and symmetry (not physicality; see [`is_physical`]).
    pub fn new(covariance: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self, GaussianError> {
        let (rows, cols) = covariance.shape();
        if rows != cols || rows % 2 != 0 || rows == 0 {
            return Err(GaussianError::Shape { rows, cols });
        }
        if displacement.len() != rows {
            return Err(GaussianError::Dimension { expected: rows, found: displacement.len() });
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-9 * (1.0 + covariance.amax()) {
            return Err(GaussianError::NotSymmetric(asym));
        }
        let covariance = (&covariance + covariance.transpose()).scale(0.5);
        Ok(Self { covariance, displacement })
    }

    /// Centered state with the given covariance.
    pub fn centered(covariance: DMatrix<f64>) -> Result<Self, GaussianError> {
        let n = covariance.nrows();
        Self::new(covariance, DVector::zeros(n))
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self { covariance: DMatrix::identity(dim, dim), displacement: DVector::zeros(dim) }
    }

    /// Product of coherent states `|β₁⟩⊗|β₂⟩⊗…`; each has `d = √2 (Re β, Im β)`.
    pub fn coherent(amplitudes: &[Complex64]) -> Self {
        let mut state = Self::vacuum(amplitudes.len());
        for (k, beta) in amplitudes.iter().enumerate() {
            state.displacement[2 * k] = std::f64::consts::SQRT_2 * beta.re;
            state.displacement[2 * k + 1] = std::f64::consts::SQRT_2 * beta.im;
        }
        state
    }

    /// Single-mode thermal state with mean photon number `mean_photons`.
    pub fn thermal(mean_photons: f64) -> Self {
        let c = 2.0 * mean_photons + 1.0;
        Self { covariance: DMatrix::identity(2, 2).scale(c), displacement: DVector::zeros(2) }
    }

    /// Single-mode squeezed vacuum, `diag(e^{2r}, e^{-2r})`.
    pub fn squeezed_vacuum(r: f64) -> Self {
        SymplecticOp::squeezer(r).apply_unchecked(&Self::vacuum(1))
    }

    pub fn n_modes(&self) -> usize {
        self.covariance.nrows() / 2
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// Smallest eigenvalue of the Hermitian matrix `Γ + iΣ`.
    pub fn uncertainty_margin(&self) -> f64 {
        uncertainty_margin(&self.covariance)
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.uncertainty_margin() >= -tol
    }

    fn require_physical(&self) -> Result<(), GaussianError> {
        let margin = self.uncertainty_margin();
        if margin < -PHYSICALITY_TOL {
            Err(GaussianError::Unphysical(margin))
        } else {
            Ok(())
        }
    }
}

fn uncertainty_margin(cov: &DMatrix<f64>) -> f64 {
    let n = cov.nrows();
    let sigma = SymplecticForm::new(n / 2).matrix();
    let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(cov[(i, j)], sigma[(i, j)]));
    crate::math::hermitian_eigenvalues(&m)[0]
}

/// True iff the smallest eigenvalue of `Γ + iΣ` is at least `-tol`.
pub fn is_physical(state: &GaussianState, tol: f64) -> bool {
    state.is_physical(tol)
}

/// Two-mode squeezed vacuum with squeezing `r` and phase `phi`.
///
/// The phase is introduced by rotating both modes through `phi/2`, which matches
/// the Fock amplitudes `sech r · (-e^{iφ} tanh r)ⁿ` of [`crate::fock::tmss_fock`].
pub fn make_tmss(r: f64, phi: f64) -> GaussianState {
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    #[rustfmt::skip]
    let base = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, -s, 0.0,
        0.0, c, 0.0, s,
        -s, 0.0, c, 0.0,
        0.0, s, 0.0, c,
    ]);
    let rot = SymplecticOp::phase_shift(phi / 2.0).direct_sum(&SymplecticOp::phase_shift(phi / 2.0));
    let cov = &rot.matrix * base * rot.matrix.transpose();
    GaussianState { covariance: cov, displacement: DVector::zeros(4) }
}

/// A real symplectic matrix acting on quadratures as `R ↦ S R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    matrix: DMatrix<f64>,
}

impl SymplecticOp {
    /// Wraps a matrix after checking `SᵀΣS = Σ` to within `tol`.
    pub fn new(matrix: DMatrix<f64>, tol: f64) -> Result<Self, GaussianError> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows % 2 != 0 {
            return Err(GaussianError::Shape { rows, cols });
        }
        let op = Self { matrix };
        if op.symplectic_defect() > tol {
            return Err(GaussianError::NotSymplectic(op.symplectic_defect()));
        }
        Ok(op)
    }

    pub fn identity(n_modes: usize) -> Self {
        Self { matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) }
    }

    /// Phase rotation realising `a† ↦ e^{iφ} a†`.
    pub fn phase_shift(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self { matrix: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) }
    }

    /// Two-mode beam splitter with real transmission `t` and reflection `r`.
    pub fn beam_splitter(t: f64, r: f64) -> Result<Self, GaussianError> {
        let norm = t * t + r * r;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(GaussianError::BeamSplitterNorm(norm));
        }
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            t, 0.0, -r, 0.0,
            0.0, t, 0.0, -r,
            r, 0.0, t, 0.0,
            0.0, r, 0.0, t,
        ]);
        Ok(Self { matrix: m })
    }

    /// Single-mode squeezer `diag(e^r, e^{-r})`.
    pub fn squeezer(r: f64) -> Self {
        Self { matrix: DMatrix::from_row_slice(2, 2, &[r.exp(), 0.0, 0.0, (-r).exp()]) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    /// Block-diagonal combination acting on the modes of `self` followed by those of `other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.matrix.nrows(), other.matrix.nrows());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        Self { matrix: m }
    }

    /// Lifts the operation to act on `modes` of an `n_modes` system.
    pub fn embed(&self, n_modes: usize, modes: &[usize]) -> Result<Self, GaussianError> {
        if modes.len() != self.n_modes() {
            return Err(GaussianError::Dimension { expected: self.n_modes(), found: modes.len() });
        }
        if let Some(&mode) = modes.iter().find(|&&m| m >= n_modes) {
            return Err(GaussianError::Mode { mode, n_modes });
        }
        let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
        for (i, &mi) in modes.iter().enumerate() {
            for (j, &mj) in modes.iter().enumerate() {
                for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    m[(2 * mi + p, 2 * mj + q)] = self.matrix[(2 * i + p, 2 * j + q)];
                }
            }
        }
        Ok(Self { matrix: m })
    }

    /// Composition `self ∘ first`: applies `first`, then `self`.
    pub fn after(&self, first: &Self) -> Self {
        Self { matrix: &self.matrix * &first.matrix }
    }

    /// Largest entry of `SᵀΣS - Σ`.
    pub fn symplectic_defect(&self) -> f64 {
        let sigma = SymplecticForm::new(self.n_modes()).matrix();
        (self.matrix.transpose() * &sigma * &self.matrix - sigma).amax()
    }

    /// `Γ ↦ SΓSᵀ`, `d ↦ S d`.
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState, GaussianError> {
        if state.covariance.nrows() != self.matrix.nrows() {
            return Err(GaussianError::Dimension {
                expected: self.matrix.nrows(),
                found: state.covariance.nrows(),
            });
        }
        Ok(self.apply_unchecked(state))
    }

    fn apply_unchecked(&self, state: &GaussianState) -> GaussianState {
        let cov = &self.matrix * &state.covariance * self.matrix.transpose();
        let cov = (&cov + cov.transpose()).scale(0.5);
        GaussianState { covariance: cov, displacement: &self.matrix * &state.displacement }
    }
}

/// Free-function form of [`SymplecticOp::apply`].
pub fn apply(op: &SymplecticOp, state: &GaussianState) -> Result<GaussianState, GaussianError> {
    op.apply(state)
}

/// Absorbing channel with transmission `tau` on the listed modes:
/// `Γ ↦ τΓ + (1-τ)𝟙` on those modes, cross blocks scaled by `√τ`, `d ↦ √τ d`.
pub fn absorb(state: &GaussianState, tau: f64, modes: &[usize]) -> Result<GaussianState, GaussianError> {
    if !(0.0..=1.0).contains(&tau) || tau.is_nan() {
        return Err(GaussianError::Transmission(tau));
    }
    let n = state.n_modes();
    let mut scale = DVector::from_element(2 * n, 1.0);
    let mut added = DVector::zeros(2 * n);
    for &m in modes {
        if m >= n {
            return Err(GaussianError::Mode { mode: m, n_modes: n });
        }
        for q in 0..2 {
            scale[2 * m + q] = tau.sqrt();
            added[2 * m + q] = 1.0 - tau;
        }
    }
    let cov = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let v = scale[i] * scale[j] * state.covariance[(i, j)];
        if i == j {
            v + added[i]
        } else {
            v
        }
    });
    let disp = state.displacement.component_mul(&scale);
    Ok(GaussianState { covariance: cov, displacement: disp })
}

/// Symplectic eigenvalues of `cov`, ascending, obtained as the moduli of the
/// paired eigenvalues `±iγ` of `ΣΓ`.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>, GaussianError> {
    let (rows, cols) = cov.shape();
    if rows != cols || rows % 2 != 0 || rows == 0 {
        return Err(GaussianError::Shape { rows, cols });
    }
    let sigma = SymplecticForm::new(rows / 2).matrix();
    let product = sigma * cov;
    let mut moduli: Vec<f64> = product.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::with_capacity(rows / 2);
    for pair in moduli.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a - b).abs() > PAIRING_TOL * a.max(b) {
            return Err(GaussianError::Pairing);
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

/// Logarithmic negativity for the bipartition in which `second_party` lists the
/// modes that are partially transposed (their `P` quadratures flip sign).
pub fn log_negativity_gaussian(state: &GaussianState, second_party: &[usize]) -> Result<f64, GaussianError> {
    state.require_physical()?;
    let n = state.n_modes();
    let mut flip = DVector::from_element(2 * n, 1.0);
    for &m in second_party {
        if m >= n {
            return Err(GaussianError::Mode { mode: m, n_modes: n });
        }
        flip[2 * m + 1] = -1.0;
    }
    let cov = DMatrix::from_fn(2 * n, 2 * n, |i, j| flip[i] * flip[j] * state.covariance[(i, j)]);
    Ok(symplectic_eigenvalues(&cov)?
        .into_iter()
        .map(|g| (-g.log2()).max(0.0))
        .sum())
}

/// Von Neumann entropy in bits.
pub fn vn_entropy_gaussian(cov: &DMatrix<f64>) -> Result<f64, GaussianError> {
    let margin = uncertainty_margin(cov);
    if margin < -PHYSICALITY_TOL {
        return Err(GaussianError::Unphysical(margin));
    }
    Ok(symplectic_eigenvalues(cov)?
        .into_iter()
        .map(|g| {
            let g = g.max(1.0);
            let up = (g + 1.0) / 2.0;
            let down = (g - 1.0) / 2.0;
            crate::math::neg_p_log2_p(down) - crate::math::neg_p_log2_p(up)
        })
        .sum())
}

/// Linear entropy `1 - |Γ|^{-1/2}`.
pub fn linear_entropy_gaussian(cov: &DMatrix<f64>) -> Result<f64, GaussianError> {
    let margin = uncertainty_margin(cov);
    if margin < -PHYSICALITY_TOL {
        return Err(GaussianError::Unphysical(margin));
    }
    Ok(1.0 - cov.determinant().powf(-0.5))
}

/// Closed-form logarithmic negativity of a two-mode squeezed state sent through
/// equal absorbing channels on both modes.
pub fn lossy_tmss_log_negativity(r: f64, tau: f64) -> f64 {
    -(1.0 - tau * (1.0 - (-2.0 * r).exp())).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_physical_and_half_vacuum_is_not() {
        assert!(GaussianState::vacuum(2).is_physical(PHYSICALITY_TOL));
        let half = GaussianState::centered(DMatrix::identity(2, 2).scale(0.5)).unwrap();
        assert!(!half.is_physical(PHYSICALITY_TOL));
        assert!((half.uncertainty_margin() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn tmss_block_structure() {
        let st = make_tmss(0.5, 0.0);
        let (c, s) = (1.0f64.cosh(), 1.0f64.sinh());
        let g = st.covariance();
        assert!((g[(0, 0)] - c).abs() < 1e-14);
        assert!((g[(0, 2)] + s).abs() < 1e-14);
        assert!((g[(1, 3)] - s).abs() < 1e-14);
    }

    #[test]
    fn symplectic_spectrum_of_thermal() {
        let ev = symplectic_eigenvalues(&DMatrix::identity(2, 2).scale(3.0)).unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-12);
    }
}
