//! Conversions between the covariance-matrix and number-basis pictures.
//!
//! A centered Gaussian state of two modes has number-basis elements
//!
//! ```text
//! ρ_{abcd} = ρ₀₀₀₀ · E_{ξ ~ N(0, C)} [ p_{ac}(ξ₁, ξ₂) · p_{bd}(ξ₃, ξ₄) ],   C = 2ΣBΣᵀ,
//! ```
//!
//! where `B = (Γ + 𝟙)⁻¹`, `ρ₀₀₀₀ = 4/|Γ + 𝟙|^{1/2}` and `p_{mn}` is the Weyl matrix
//! element `⟨m|W_ξ|n⟩` with its `e^{-|ξ|²/4}` envelope removed. The expectation is
//! reduced to Gaussian moments with the Isserlis pairing sum, grouped by pair
//! type so that a monomial of degree `k` costs a handful of nested loops rather
//! than `(k-1)!!` explicit pairings.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockDensityMatrix, FockError};
use crate::gaussian::{GaussianError, GaussianState, SymplecticForm, PHYSICALITY_TOL};
use crate::io::Table;
use crate::math::{binomial, factorial, laguerre, laguerre_coefficients, linspace};

/// Default bound on `a + b + c + d` for a single Gaussian element.
pub const DEFAULT_MAX_DEGREE: usize = 12;

/// Allowed deviation of the quadrature-integrated Wigner function from one.
pub const WIGNER_NORM_TOL: f64 = 1e-3;

/// Threshold on `ρ₀₀₀₀` below which a state is treated as the null state.
pub const NULL_STATE_TOL: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("element degree {degree} exceeds the moment bound {bound}")]
    MomentBound { degree: usize, bound: usize },
    #[error("conversion needs a centered two-mode state")]
    NotCenteredTwoMode,
    #[error("reconstructed B matrix is singular (null state)")]
    SingularB,
    #[error("vacuum element ρ₀₀₀₀ = {0:.3e} is too small to normalize by")]
    NullState(f64),
    #[error("operation needs a single-mode state")]
    NotSingleMode,
    #[error("Wigner grid too coarse: ∫W = {integral:.6}")]
    GridTooCoarse { integral: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Phase-space argument of a single-mode Weyl operator `W_ξ = D((ξ₁ + iξ₂)/√2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylPoint(pub [f64; 2]);

impl WeylPoint {
    fn alpha(self) -> Complex64 {
        Complex64::new(self.0[0], self.0[1]) / std::f64::consts::SQRT_2
    }
}

/// `⟨m|W_ξ|n⟩` from the normal-ordered Laguerre form.
pub fn weyl_element(m: usize, n: usize, xi: WeylPoint) -> Complex64 {
    let alpha = xi.alpha();
    let r2 = alpha.norm_sqr();
    let envelope = (-r2 / 2.0).exp();
    if m >= n {
        let k = m - n;
        let pref = (factorial(n) / factorial(m)).sqrt();
        alpha.powu(k as u32) * (pref * envelope * laguerre(n, k as f64, r2))
    } else {
        let k = n - m;
        let pref = (factorial(m) / factorial(n)).sqrt();
        (-alpha.conj()).powu(k as u32) * (pref * envelope * laguerre(m, k as f64, r2))
    }
}

/// Single-mode Weyl operator as a `(cutoff+1)²` matrix.
pub fn weyl_matrix(cutoff: usize, xi: WeylPoint) -> DMatrix<Complex64> {
    DMatrix::from_fn(cutoff + 1, cutoff + 1, |m, n| weyl_element(m, n, xi))
}

/// `(Γ + 𝟙)⁻¹` of a two-mode covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BMatrix(DMatrix<f64>);

impl BMatrix {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self, BridgeError> {
        let n = cov.nrows();
        let shifted = cov + DMatrix::identity(n, n);
        shifted.try_inverse().map(Self).ok_or(BridgeError::SingularB)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `Γ = B⁻¹ - 𝟙`.
    pub fn to_covariance(&self) -> Result<DMatrix<f64>, BridgeError> {
        let n = self.0.nrows();
        let inv = self.0.clone().try_inverse().ok_or(BridgeError::SingularB)?;
        Ok(inv - DMatrix::identity(n, n))
    }
}

/// Polynomial in four real variables, keyed by exponent tuple.
type Poly = HashMap<[u8; 4], Complex64>;

/// Weyl element `⟨m|W|n⟩` without the Gaussian envelope, as a polynomial in
/// `(ξ_{2k}, ξ_{2k+1})` placed at variable slots `offset` and `offset + 1`.
fn weyl_polynomial(m: usize, n: usize, offset: usize) -> Poly {
    // Coefficients in z^u z̄^v with z = (x + i y)/√2.
    let mut zz: Vec<(usize, usize, Complex64)> = Vec::new();
    if m >= n {
        let k = m - n;
        let pref = (factorial(n) / factorial(m)).sqrt();
        for (l, c) in laguerre_coefficients(n, k).into_iter().enumerate() {
            zz.push((k + l, l, Complex64::new(pref * c, 0.0)));
        }
    } else {
        let k = n - m;
        let pref = (factorial(m) / factorial(n)).sqrt();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (l, c) in laguerre_coefficients(m, k).into_iter().enumerate() {
            zz.push((l, k + l, Complex64::new(sign * pref * c, 0.0)));
        }
    }
    let mut poly = Poly::new();
    for (u, v, c) in zz {
        let scale = c * 2f64.powf(-((u + v) as f64) / 2.0);
        for i in 0..=u {
            let ci = I.powu((u - i) as u32) * binomial(u, i);
            for j in 0..=v {
                let cj = (-I).powu((v - j) as u32) * binomial(v, j);
                let mut key = [0u8; 4];
                key[offset] = (i + j) as u8;
                key[offset + 1] = ((u - i) + (v - j)) as u8;
                *poly.entry(key).or_insert(ZERO) += scale * ci * cj;
            }
        }
    }
    poly.retain(|_, c| *c != ZERO);
    poly
}

/// Evaluates number-basis elements of a centered two-mode Gaussian state.
///
/// Moments and Weyl polynomials are cached, so filling a whole density matrix
/// through one engine is much cheaper than repeated calls to
/// [`gaussian_fock_element`]. The moment of a degree-`k` monomial is a sum over
/// the six cross-pair counts; with `k ≤ 24` this stays in the low thousands of
/// terms, and exact zeros in the covariance prune most branches.
pub struct FockElementEngine {
    moment_cov: [[f64; 4]; 4],
    vacuum_element: f64,
    max_degree: usize,
    moments: HashMap<[u8; 4], f64>,
    polys: HashMap<(usize, usize, usize), Poly>,
}

impl FockElementEngine {
    pub fn new(cov: &DMatrix<f64>, max_degree: usize) -> Result<Self, BridgeError> {
        if cov.nrows() != 4 {
            return Err(BridgeError::NotCenteredTwoMode);
        }
        let state = GaussianState::centered(cov.clone())?;
        let margin = state.uncertainty_margin();
        if margin < -PHYSICALITY_TOL {
            return Err(GaussianError::Unphysical(margin).into());
        }
        let b = BMatrix::from_covariance(state.covariance())?;
        let sigma = SymplecticForm::new(2).matrix();
        let c = (&sigma * b.matrix() * sigma.transpose()).scale(2.0);
        let mut moment_cov = [[0.0; 4]; 4];
        for (i, row) in moment_cov.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = c[(i, j)];
            }
        }
        let det = (state.covariance() + DMatrix::identity(4, 4)).determinant();
        Ok(Self {
            moment_cov,
            vacuum_element: 4.0 / det.sqrt(),
            max_degree,
            moments: HashMap::new(),
            polys: HashMap::new(),
        })
    }

    pub fn vacuum_element(&self) -> f64 {
        self.vacuum_element
    }

    /// `⟨a,b|ρ|c,d⟩`.
    pub fn element(&mut self, a: usize, b: usize, c: usize, d: usize) -> Result<Complex64, BridgeError> {
        let degree = a + b + c + d;
        if degree > self.max_degree {
            return Err(BridgeError::MomentBound { degree, bound: self.max_degree });
        }
        if degree % 2 == 1 {
            return Ok(ZERO);
        }
        let pa = self.poly(a, c, 0);
        let pb = self.poly(b, d, 2);
        let mut acc = ZERO;
        for (ka, ca) in &pa {
            for (kb, cb) in &pb {
                let key = [ka[0], ka[1], kb[2], kb[3]];
                let m = self.moment(key);
                if m != 0.0 {
                    acc += ca * cb * m;
                }
            }
        }
        Ok(acc * self.vacuum_element)
    }

    fn poly(&mut self, m: usize, n: usize, offset: usize) -> Poly {
        self.polys.entry((m, n, offset)).or_insert_with(|| weyl_polynomial(m, n, offset)).clone()
    }

    fn moment(&mut self, p: [u8; 4]) -> f64 {
        if let Some(&v) = self.moments.get(&p) {
            return v;
        }
        let v = isserlis_moment(&self.moment_cov, p);
        self.moments.insert(p, v);
        v
    }
}

/// `E[∏ ξᵢ^{pᵢ}]` for a centered normal vector with covariance `c`.
///
/// Enumerates the number of cross pairs `k_ij` (i < j); the remaining powers pair
/// within each variable. Each configuration contributes
/// `∏pᵢ! / (∏ 2^{k_ii} k_ii! ∏ k_ij!) · ∏ c_ii^{k_ii} c_ij^{k_ij}`.
fn isserlis_moment(c: &[[f64; 4]; 4], p: [u8; 4]) -> f64 {
    let p = p.map(usize::from);
    if p.iter().sum::<usize>() % 2 == 1 {
        return 0.0;
    }
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let prefactor: f64 = p.iter().map(|&x| factorial(x)).product();
    let mut total = 0.0;
    let mut counts = [0usize; 6];
    let mut remaining = p;

    fn recurse(
        level: usize,
        c: &[[f64; 4]; 4],
        counts: &mut [usize; 6],
        remaining: &mut [usize; 4],
        weight: f64,
        total: &mut f64,
    ) {
        if level == PAIRS.len() {
            let mut w = weight;
            for (i, &r) in remaining.iter().enumerate() {
                if r % 2 == 1 {
                    return;
                }
                let k = r / 2;
                if k > 0 {
                    if c[i][i] == 0.0 {
                        return;
                    }
                    w *= c[i][i].powi(k as i32) / (2f64.powi(k as i32) * factorial(k));
                }
            }
            *total += w;
            return;
        }
        let (i, j) = PAIRS[level];
        let max_k = remaining[i].min(remaining[j]);
        let cij = c[i][j];
        for k in 0..=max_k {
            if k > 0 && cij == 0.0 {
                break;
            }
            counts[level] = k;
            remaining[i] -= k;
            remaining[j] -= k;
            let w = weight * cij.powi(k as i32) / factorial(k);
            recurse(level + 1, c, counts, remaining, w, total);
            remaining[i] += k;
            remaining[j] += k;
        }
        counts[level] = 0;
    }

    recurse(0, c, &mut counts, &mut remaining, 1.0, &mut total);
    prefactor * total
}

/// `⟨a,b|ρ|c,d⟩` of the centered Gaussian state with covariance `cov`.
pub fn gaussian_fock_element(cov: &DMatrix<f64>, a: usize, b: usize, c: usize, d: usize) -> Result<Complex64, BridgeError> {
    FockElementEngine::new(cov, DEFAULT_MAX_DEGREE)?.element(a, b, c, d)
}

/// As [`gaussian_fock_element`] with an explicit degree bound.
pub fn gaussian_fock_element_with_bound(
    cov: &DMatrix<f64>,
    indices: [usize; 4],
    max_degree: usize,
) -> Result<Complex64, BridgeError> {
    let [a, b, c, d] = indices;
    FockElementEngine::new(cov, max_degree)?.element(a, b, c, d)
}

/// Bargmann kernel `A` and vacuum element `ρ₀₀₀₀` of a centered two-mode state.
///
/// With `Q` the covariance of `(a₁, a₂, a₁†, a₂†)` shifted by `𝟙/2`, the state's
/// Husimi generating function is `exp(½ zᵀ A z)/√|Q|` with `A = X (𝟙 - Q⁻¹)*`,
/// where `X` swaps the annihilation and creation blocks.
fn bargmann_kernel(cov: &DMatrix<f64>) -> Result<(DMatrix<Complex64>, f64), BridgeError> {
    // (X₁, P₁, X₂, P₂) → separate X and P blocks.
    let xs = [0, 2];
    let ps = [1, 3];
    let x = DMatrix::from_fn(2, 2, |i, j| cov[(xs[i], xs[j])]);
    let p = DMatrix::from_fn(2, 2, |i, j| cov[(ps[i], ps[j])]);
    let xp = DMatrix::from_fn(2, 2, |i, j| cov[(xs[i], ps[j])]);
    let c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let id2 = DMatrix::<Complex64>::identity(2, 2);
    let a_dag_a = (c(&(&x + &p)) + c(&(&xp - xp.transpose())) * I - id2.scale(2.0)).unscale(4.0);
    let a_a = (c(&(&x - &p)) + c(&(&xp + xp.transpose())) * I).unscale(4.0);
    let mut q = DMatrix::<Complex64>::identity(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            q[(i, j)] += a_dag_a[(i, j)];
            q[(i, j + 2)] += a_a[(i, j)].conj();
            q[(i + 2, j)] += a_a[(i, j)];
            q[(i + 2, j + 2)] += a_dag_a[(i, j)].conj();
        }
    }
    let det_q = q.determinant().re;
    let q_inv = q.try_inverse().ok_or(BridgeError::SingularB)?;
    let m = (DMatrix::<Complex64>::identity(4, 4) - q_inv).map(|z| z.conj());
    let a = DMatrix::from_fn(4, 4, |i, j| m[((i + 2) % 4, j)]);
    Ok((a, 1.0 / det_q.sqrt()))
}

/// Number-basis density matrix of a centered two-mode Gaussian state up to `cutoff`.
///
/// Elements follow from the multivariate Hermite recurrence on the Bargmann
/// kernel, `R(k + eᵢ) = Σⱼ Aᵢⱼ √kⱼ R(k − eⱼ) / √(kᵢ + 1)` with
/// `⟨a,b|ρ|c,d⟩ = ρ₀₀₀₀ R(c, d, a, b)`, which stays accurate at large cutoffs
/// where the moment expansion of [`FockElementEngine`] loses digits.
/// The trace deficit is stored as the truncated weight.
pub fn gaussian_to_fock(state: &GaussianState, cutoff: usize) -> Result<FockDensityMatrix, BridgeError> {
    if state.n_modes() != 2 || state.displacement().iter().any(|&x| x != 0.0) {
        return Err(BridgeError::NotCenteredTwoMode);
    }
    let margin = state.uncertainty_margin();
    if margin < -PHYSICALITY_TOL {
        return Err(GaussianError::Unphysical(margin).into());
    }
    let (a, vacuum) = bargmann_kernel(state.covariance())?;
    let m = cutoff + 1;
    let flat = |k: [usize; 4]| ((k[0] * m + k[1]) * m + k[2]) * m + k[3];
    let mut r = vec![ZERO; m.pow(4)];
    r[0] = Complex64::new(1.0, 0.0);
    for idx in 1..m.pow(4) {
        let k = [idx / m.pow(3), (idx / m.pow(2)) % m, (idx / m) % m, idx % m];
        let i = k.iter().position(|&x| x > 0).expect("non-zero index");
        let mut prev = k;
        prev[i] -= 1;
        let mut acc = ZERO;
        for j in 0..4 {
            if prev[j] > 0 && a[(i, j)] != ZERO {
                let mut lower = prev;
                lower[j] -= 1;
                acc += a[(i, j)] * (prev[j] as f64).sqrt() * r[flat(lower)];
            }
        }
        r[idx] = acc / ((prev[i] + 1) as f64).sqrt();
    }
    let dim = m * m;
    let raw = DMatrix::from_fn(dim, dim, |row, col| r[col * dim + row] * vacuum);
    let matrix = (&raw + raw.adjoint()).unscale(2.0);
    let rho = FockDensityMatrix::new(2, cutoff, matrix)?;
    let deficit = (1.0 - rho.trace()).max(0.0);
    Ok(rho.with_truncated_weight(deficit))
}

/// The six vacuum-normalized elements `σ_{abcd} = ρ_{abcd}/ρ₀₀₀₀` that fix a
/// centered two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaElements {
    pub s1010: f64,
    pub s0101: f64,
    pub s1001: Complex64,
    pub s2000: Complex64,
    pub s0200: Complex64,
    pub s1100: Complex64,
}

impl SigmaElements {
    pub fn vacuum() -> Self {
        Self { s1010: 0.0, s0101: 0.0, s1001: ZERO, s2000: ZERO, s0200: ZERO, s1100: ZERO }
    }

    /// Reads the six elements from a two-mode density matrix.
    pub fn from_density(rho: &FockDensityMatrix) -> Result<Self, BridgeError> {
        if rho.n_modes() != 2 {
            return Err(FockError::ModeCount { expected: 2, found: rho.n_modes() }.into());
        }
        let r0 = rho.element(0, 0, 0, 0).re;
        if r0.abs() < NULL_STATE_TOL {
            return Err(BridgeError::NullState(r0));
        }
        Ok(Self {
            s1010: rho.element(1, 0, 1, 0).re / r0,
            s0101: rho.element(0, 1, 0, 1).re / r0,
            s1001: rho.element(1, 0, 0, 1) / r0,
            s2000: rho.element(2, 0, 0, 0) / r0,
            s0200: rho.element(0, 2, 0, 0) / r0,
            s1100: rho.element(1, 1, 0, 0) / r0,
        })
    }

    /// Elements of the Gaussian state to which iterated Gaussification converges,
    /// given the normalized elements of the input state.
    ///
    /// The limit is fixed by the connected second-order combinations, e.g.
    /// `σ₁₀₁₀ - |σ₁₀₀₀|²` and `σ₂₀₀₀ - σ₁₀₀₀²/√2`.
    pub fn gaussification_limit(rho: &FockDensityMatrix) -> Result<Self, BridgeError> {
        let base = Self::from_density(rho)?;
        let r0 = rho.element(0, 0, 0, 0).re;
        let s1000 = rho.element(1, 0, 0, 0) / r0;
        let s0100 = rho.element(0, 1, 0, 0) / r0;
        let s0001 = rho.element(0, 0, 0, 1) / r0;
        let root2 = std::f64::consts::SQRT_2;
        Ok(Self {
            s1010: base.s1010 - s1000.norm_sqr(),
            s0101: base.s0101 - s0100.norm_sqr(),
            s1001: base.s1001 - s1000 * s0001,
            s2000: base.s2000 - s1000 * s1000 / root2,
            s0200: base.s0200 - s0100 * s0100 / root2,
            s1100: base.s1100 - s1000 * s0100,
        })
    }

    /// The `B = (Γ + 𝟙)⁻¹` these elements imply.
    pub fn to_b_matrix(&self) -> BMatrix {
        let root2 = std::f64::consts::SQRT_2;
        let mut b = DMatrix::zeros(4, 4);
        b[(0, 0)] = (1.0 - self.s1010 - root2 * self.s2000.re) / 2.0;
        b[(1, 1)] = (1.0 - self.s1010 + root2 * self.s2000.re) / 2.0;
        b[(0, 1)] = -self.s2000.im / root2;
        b[(2, 2)] = (1.0 - self.s0101 - root2 * self.s0200.re) / 2.0;
        b[(3, 3)] = (1.0 - self.s0101 + root2 * self.s0200.re) / 2.0;
        b[(2, 3)] = -self.s0200.im / root2;
        b[(0, 2)] = -(self.s1001.re + self.s1100.re) / 2.0;
        b[(1, 3)] = (self.s1100.re - self.s1001.re) / 2.0;
        b[(0, 3)] = (self.s1001.im - self.s1100.im) / 2.0;
        b[(1, 2)] = -(self.s1100.im + self.s1001.im) / 2.0;
        for i in 0..4 {
            for j in 0..i {
                b[(i, j)] = b[(j, i)];
            }
        }
        BMatrix(b)
    }
}

/// Covariance matrix determined by the six normalized elements.
pub fn sigma_to_covariance(sigma: &SigmaElements) -> Result<DMatrix<f64>, BridgeError> {
    let b = sigma.to_b_matrix();
    if b.matrix().determinant().abs() < 1e-300 {
        return Err(BridgeError::SingularB);
    }
    b.to_covariance()
}

/// `χ(ξ) = Tr[ρ W_ξ]` for a one- or two-mode state; `xi` has length `2·n_modes`.
pub fn characteristic_function(rho: &FockDensityMatrix, xi: &[f64]) -> Result<Complex64, BridgeError> {
    let n = rho.cutoff();
    let weyl = match (rho.n_modes(), xi) {
        (1, &[x, p]) => weyl_matrix(n, WeylPoint([x, p])),
        (2, &[x1, p1, x2, p2]) => weyl_matrix(n, WeylPoint([x1, p1])).kronecker(&weyl_matrix(n, WeylPoint([x2, p2]))),
        _ => {
            return Err(BridgeError::Grid(format!(
                "ξ has length {} for a {}-mode state",
                xi.len(),
                rho.n_modes()
            )))
        }
    };
    Ok((rho.matrix() * weyl).trace())
}

/// Symmetric output grid for Wigner functions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for WignerGrid {
    fn default() -> Self {
        Self { half_width: 4.0, points: 81 }
    }
}

/// Sampled Wigner function; `values[(i, j)]` is `W(xs[i], ps[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerField {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid_2d(&self.xs, &self.ps, &self.values)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["X", "P", "W"]);
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &p) in self.ps.iter().enumerate() {
                t.push(vec![x, p, self.values[(i, j)]]);
            }
        }
        t
    }

    /// L² distance to another field on the same grid.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let diff = (&self.values - &other.values).map(|x| x * x);
        trapezoid_2d(&self.xs, &self.ps, &diff).sqrt()
    }
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect()
}

fn trapezoid_2d(xs: &[f64], ps: &[f64], values: &DMatrix<f64>) -> f64 {
    let wx = DVector::from_vec(trapezoid_weights(xs));
    let wp = DVector::from_vec(trapezoid_weights(ps));
    (wx.transpose() * values * wp)[(0, 0)]
}

/// Half-width and spacing of the internal ξ quadrature grid.
const XI_HALF_WIDTH: f64 = 10.0;
const XI_STEP: f64 = 0.2;

/// Wigner function of a single-mode state,
/// `W(x, p) = (2π)⁻² ∫ χ(ξ) exp(-i (x ξ₂ - p ξ₁)) dξ`,
/// normalized so that a coherent state with displacement `d` peaks at `d`.
pub fn wigner(rho: &FockDensityMatrix, grid: &WignerGrid) -> Result<WignerField, BridgeError> {
    if rho.n_modes() != 1 {
        return Err(BridgeError::NotSingleMode);
    }
    if grid.points < 2 || !(grid.half_width > 0.0) {
        return Err(BridgeError::Grid(format!("{} points over ±{}", grid.points, grid.half_width)));
    }
    let rho = rho.normalized()?;
    let n_xi = (2.0 * XI_HALF_WIDTH / XI_STEP).round() as usize + 1;
    let xis = linspace(-XI_HALF_WIDTH, XI_HALF_WIDTH, n_xi);
    let wxi = trapezoid_weights(&xis);

    let chi = DMatrix::from_fn(n_xi, n_xi, |i, j| {
        let w = weyl_matrix(rho.cutoff(), WeylPoint([xis[i], xis[j]]));
        (rho.matrix() * w).trace()
    });

    let xs = linspace(-grid.half_width, grid.half_width, grid.points);
    let ps = xs.clone();
    let norm = (2.0 * std::f64::consts::PI).powi(-2);
    // W[x, p] = Σ_{ξ₁, ξ₂} e^{-i x ξ₂} e^{i p ξ₁} χ(ξ₁, ξ₂) w₁ w₂
    let ex = DMatrix::from_fn(xs.len(), n_xi, |i, k| Complex64::from_polar(wxi[k], -xs[i] * xis[k]));
    let ep = DMatrix::from_fn(ps.len(), n_xi, |j, k| Complex64::from_polar(wxi[k], ps[j] * xis[k]));
    let field = &ex * chi.transpose() * ep.transpose();
    let values = field.map(|z| z.re * norm);

    let out = WignerField { xs, ps, values };
    let integral = out.integral();
    if (integral - 1.0).abs() > WIGNER_NORM_TOL {
        return Err(BridgeError::GridTooCoarse { integral });
    }
    Ok(out)
}

/// Single-mode Gaussian state with the same first and second moments as `rho`.
pub fn moment_matched_gaussian(rho: &FockDensityMatrix) -> Result<GaussianState, BridgeError> {
    if rho.n_modes() != 1 {
        return Err(BridgeError::NotSingleMode);
    }
    let rho = rho.normalized()?;
    let n = rho.cutoff();
    let a = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let expect = |op: &DMatrix<Complex64>| (rho.matrix() * op).trace();
    let mean_a = expect(&a);
    let mean_a2 = expect(&(&a * &a));
    let mean_n = expect(&(a.adjoint() * &a)).re;
    let root2 = std::f64::consts::SQRT_2;
    let (mx, mp) = (root2 * mean_a.re, root2 * mean_a.im);
    let xx = 2.0 * (mean_a2.re + mean_n + 0.5) - 2.0 * mx * mx;
    let pp = 2.0 * (-mean_a2.re + mean_n + 0.5) - 2.0 * mp * mp;
    let xp = 2.0 * mean_a2.im - 2.0 * mx * mp;
    let cov = DMatrix::from_row_slice(2, 2, &[xx, xp, xp, pp]);
    Ok(GaussianState::new(cov, DVector::from_vec(vec![mx, mp]))?)
}

/// Wigner function of a single-mode Gaussian state sampled on `grid`.
pub fn gaussian_wigner(state: &GaussianState, grid: &WignerGrid) -> Result<WignerField, BridgeError> {
    if state.n_modes() != 1 {
        return Err(BridgeError::NotSingleMode);
    }
    let cov = state.covariance();
    let inv = cov.clone().try_inverse().ok_or(GaussianError::Unphysical(0.0))?;
    let det = cov.determinant();
    let d = state.displacement();
    let xs = linspace(-grid.half_width, grid.half_width, grid.points);
    let ps = xs.clone();
    let values = DMatrix::from_fn(xs.len(), ps.len(), |i, j| {
        let v = DVector::from_vec(vec![xs[i] - d[0], ps[j] - d[1]]);
        let q = (v.transpose() * &inv * &v)[(0, 0)];
        (-q).exp() / (std::f64::consts::PI * det.sqrt())
    });
    Ok(WignerField { xs, ps, values })
}

/// L² distance between the Wigner function of `rho` and that of its moment-matched Gaussian.
pub fn non_gaussianity(rho: &FockDensityMatrix, grid: &WignerGrid) -> Result<f64, BridgeError> {
    let w = wigner(rho, grid)?;
    let g = gaussian_wigner(&moment_matched_gaussian(rho)?, grid)?;
    Ok(w.l2_distance(&g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isserlis_fourth_moment() {
        let mut c = [[0.0; 4]; 4];
        c[0][0] = 2.0;
        c[1][1] = 3.0;
        c[0][1] = 0.5;
        c[1][0] = 0.5;
        assert!((isserlis_moment(&c, [4, 0, 0, 0]) - 12.0).abs() < 1e-12);
        // E[x²y²] = c00 c11 + 2 c01²
        assert!((isserlis_moment(&c, [2, 2, 0, 0]) - 6.5).abs() < 1e-12);
    }

    #[test]
    fn weyl_polynomial_matches_direct_element() {
        let xi = WeylPoint([0.3, -0.7]);
        let env = (-(0.09 + 0.49) / 4.0_f64).exp();
        for (m, n) in [(0, 0), (2, 1), (1, 3), (3, 3)] {
            let poly = weyl_polynomial(m, n, 0);
            let val: Complex64 = poly
                .iter()
                .map(|(k, c)| c * xi.0[0].powi(k[0] as i32) * xi.0[1].powi(k[1] as i32))
                .sum();
            assert!((val * env - weyl_element(m, n, xi)).norm() < 1e-13);
        }
    }
}
