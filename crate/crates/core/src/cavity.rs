//! Bell-state preparation with one atom crossing two resonant cavities.
//!
//! The atom enters in `|B⟩` with both cavities empty and interacts resonantly
//! with cavity A for an effective time `τ_A` and with cavity B for `τ_B`.
//! Detecting the atom in `|A⟩` heralds one photon shared between the cavities.
//! This module holds the closed-form post-passage state, the fidelity and success
//! probability, and the geometry that turns an atomic path into interaction times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CavityError {
    #[error("invalid cavity geometry: {0}")]
    Geometry(String),
    #[error("path angle {0} rad must satisfy |angle| < π/2")]
    PathAngle(f64),
    #[error("atomic speed must be positive, got {0}")]
    Speed(f64),
    #[error("success probability must lie in (0, 1], got {0}")]
    SuccessProbability(f64),
    #[error("detector efficiency must lie in [0, 1], got {0}")]
    Efficiency(f64),
    #[error("cavity index must be 0 (A) or 1 (B), got {0}")]
    CavityIndex(usize),
}

/// Amplitudes after the passage in the basis `|atom, n_A, n_B⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageResult {
    /// `|B, 0, 0⟩`: the atom kept its excitation; both cavities are empty.
    pub b00: Complex64,
    /// `|A, 0, 1⟩`: the photon was left in cavity B.
    pub a01: Complex64,
    /// `|A, 1, 0⟩`: the photon was left in cavity A.
    pub a10: Complex64,
    /// Fidelity of the heralded cavity state with `(|0,1⟩ + |1,0⟩)/√2`.
    pub fidelity_on_success: f64,
    /// Probability of detecting the atom in `|A⟩`.
    pub p_success: f64,
}

impl PassageResult {
    pub fn norm_sqr(&self) -> f64 {
        self.b00.norm_sqr() + self.a01.norm_sqr() + self.a10.norm_sqr()
    }
}

/// Exact state after resonant interactions of strength `gτ_A` and `gτ_B`.
pub fn state_after_passage(gtau_a: f64, gtau_b: f64) -> PassageResult {
    let (sa, ca) = gtau_a.sin_cos();
    let (sb, cb) = gtau_b.sin_cos();
    let minus_i = Complex64::new(0.0, -1.0);
    let a01 = minus_i * (ca * sb);
    let a10 = minus_i * sa;
    let p_success = a01.norm_sqr() + a10.norm_sqr();
    let fidelity_on_success = if p_success > 0.0 {
        (a01 + a10).norm_sqr() / (2.0 * p_success)
    } else {
        0.5
    };
    PassageResult { b00: Complex64::new(ca * cb, 0.0), a01, a10, fidelity_on_success, p_success }
}

/// `F = ½ + cos(gτ) / (cos²(gτ) + 1)` for equal interaction times.
pub fn fidelity_ideal(gtau: f64) -> f64 {
    let c = gtau.cos();
    0.5 + c / (c * c + 1.0)
}

/// `P = 1 - cos⁴(gτ)` for equal interaction times.
pub fn success_probability(gtau: f64) -> f64 {
    1.0 - gtau.cos().powi(4)
}

/// Fidelity when cavity B is crossed for `(1 - ε)` times the time spent in cavity A.
pub fn fidelity_asymmetric(gtau: f64, epsilon: f64) -> f64 {
    let (s, c) = gtau.sin_cos();
    let sb = (gtau * (1.0 - epsilon)).sin();
    let denom = c * c * sb * sb + s * s;
    if denom == 0.0 {
        return 0.5;
    }
    0.5 + c * s * sb / denom
}

/// Probability that a detector of efficiency `d` fires on every run until the
/// first success, `D^{1/P}`.
pub fn detection_run_probability(d: f64, p: f64) -> Result<f64, CavityError> {
    if !(0.0..=1.0).contains(&d) {
        return Err(CavityError::Efficiency(d));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(CavityError::SuccessProbability(p));
    }
    Ok(d.powf(1.0 / p))
}

/// Fabry–Perot cavities and their placement along the atomic beam (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityGeometry {
    /// Mode waist (m).
    pub w0: f64,
    /// Field wavelength (m).
    pub lambda: f64,
    /// Collimator exit to the centre of cavity A (m).
    pub d0: f64,
    /// Centre of cavity A to the centre of cavity B (m).
    pub d1: f64,
}

impl CavityGeometry {
    /// Geometry from mirror separation `l` and radius of curvature `r_curv`:
    /// `w₀² = λ √(L(2R - L)) / (2π)`.
    pub fn from_mirrors(l: f64, r_curv: f64, lambda: f64, d0: f64, d1: f64) -> Result<Self, CavityError> {
        if !(l > 0.0 && 2.0 * r_curv > l) {
            return Err(CavityError::Geometry(format!("need 2R > L > 0, got L = {l}, R = {r_curv}")));
        }
        let w0 = (lambda * (l * (2.0 * r_curv - l)).sqrt() / (2.0 * PI)).sqrt();
        Self::from_waist(w0, lambda, d0, d1)
    }

    pub fn from_waist(w0: f64, lambda: f64, d0: f64, d1: f64) -> Result<Self, CavityError> {
        let g = Self { w0, lambda, d0, d1 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(CavityError::Geometry(format!("waist must be positive, got {}", self.w0)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CavityError::Geometry(format!("wavelength must be positive, got {}", self.lambda)));
        }
        if !(self.d0 >= 0.0 && self.d1 >= 0.0) {
            return Err(CavityError::Geometry("distances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// Distance from the collimator to the centre of cavity `index` (0 = A, 1 = B).
    pub fn distance_to(&self, index: usize) -> Result<f64, CavityError> {
        match index {
            0 => Ok(self.d0),
            1 => Ok(self.d0 + self.d1),
            other => Err(CavityError::CavityIndex(other)),
        }
    }
}

/// Straight atomic path leaving the collimator at transverse offsets `(y0, z0)`.
///
/// The path is `y(x) = y0 + (x + D₀) tan φ`, `z(x) = z0 + (x + D₀) tan θ`, where
/// `x` runs along the beam and `z` is the cavity axis; the atom moves with speed
/// `v` along the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomPath {
    pub y0: f64,
    pub z0: f64,
    pub phi: f64,
    pub theta: f64,
    pub v: f64,
}

impl AtomPath {
    pub fn on_axis(v: f64) -> Self {
        Self { y0: 0.0, z0: 0.0, phi: 0.0, theta: 0.0, v }
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        for angle in [self.phi, self.theta] {
            if !(angle.abs() < PI / 2.0) {
                return Err(CavityError::PathAngle(angle));
            }
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(CavityError::Speed(self.v));
        }
        Ok(())
    }

    /// Transverse offsets `(δ_y, δ_z)` where the path crosses the plane of a cavity centre
    /// at distance `distance` from the collimator.
    pub fn offsets_at(&self, distance: f64) -> (f64, f64) {
        (self.y0 + distance * self.phi.tan(), self.z0 + distance * self.theta.tan())
    }

    /// Speed along the beam direction.
    pub fn forward_speed(&self) -> f64 {
        self.v / (1.0 + self.phi.tan().powi(2) + self.theta.tan().powi(2)).sqrt()
    }
}

/// `∫ u(r(t)) dt` along the path for the mode `u = exp(-(x²+y²)/w₀²) cos(2πz/λ)` of cavity
/// `cavity_index`.
///
/// Integrating the Gaussian exactly gives
/// `τ = √π w₀ cos φ / v_x · exp(-δ_y² cos²φ / w₀²) · exp(-k² w₀² tan²θ cos²φ / 4) · cos(k δ_z - k δ_y tan θ sin φ cos φ)`,
/// which reduces to `√π w₀ / v` on axis.
pub fn effective_interaction_time(geometry: &CavityGeometry, path: &AtomPath, cavity_index: usize) -> Result<f64, CavityError> {
    geometry.validate()?;
    path.validate()?;
    let (dy, dz) = path.offsets_at(geometry.distance_to(cavity_index)?);
    let w = geometry.w0;
    let k = geometry.wavenumber();
    let (sp, cp) = path.phi.sin_cos();
    let tt = path.theta.tan();
    let envelope = PI.sqrt() * w * cp / path.forward_speed();
    let transverse = (-(dy * cp / w).powi(2)).exp();
    let tilt = (-(k * w * tt * cp).powi(2) / 4.0).exp();
    let phase = (k * dz - k * dy * tt * sp * cp).cos();
    Ok(envelope * transverse * tilt * phase)
}

/// Relative shortfall `ε = 1 - τ_B/τ_A` to second order in the offsets and angles:
/// `ε ≈ [(D₁φ)² + 2D₀D₁φ² + 2y₀D₁φ]/w₀² + (2π²/λ²)[(D₁θ)² + 2D₀D₁θ² + 2z₀D₁θ]`.
pub fn epsilon_estimate(geometry: &CavityGeometry, path: &AtomPath) -> f64 {
    let (d0, d1) = (geometry.d0, geometry.d1);
    let y_part = (d1 * path.phi).powi(2) + (d1 * path.phi) * (2.0 * d0 * path.phi) + 2.0 * path.y0 * d1 * path.phi;
    let z_part = (d1 * path.theta).powi(2) + (d1 * path.theta) * (2.0 * d0 * path.theta) + 2.0 * path.z0 * d1 * path.theta;
    y_part / geometry.w0.powi(2) + 2.0 * PI * PI / geometry.lambda.powi(2) * z_part
}

/// `1 - τ_B/τ_A` from the exact interaction times.
pub fn epsilon_exact(geometry: &CavityGeometry, path: &AtomPath) -> Result<f64, CavityError> {
    let ta = effective_interaction_time(geometry, path, 0)?;
    let tb = effective_interaction_time(geometry, path, 1)?;
    Ok(1.0 - tb / ta)
}

/// Coupling strength, geometry and path of one passage; the interaction times
/// follow from the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPassage {
    pub tau_a: f64,
    pub tau_b: f64,
    pub epsilon: f64,
    pub result: PassageResult,
}

/// Passage along `path` with vacuum Rabi frequency `g` (rad/s).
pub fn passage_along_path(g: f64, geometry: &CavityGeometry, path: &AtomPath) -> Result<PathPassage, CavityError> {
    let tau_a = effective_interaction_time(geometry, path, 0)?;
    let tau_b = effective_interaction_time(geometry, path, 1)?;
    Ok(PathPassage {
        tau_a,
        tau_b,
        epsilon: 1.0 - tau_b / tau_a,
        result: state_after_passage(g * tau_a, g * tau_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_axis_time() {
        let g = CavityGeometry::from_waist(5.97e-3, 5.87e-3, 0.1, 0.1).unwrap();
        let t = effective_interaction_time(&g, &AtomPath::on_axis(500.0), 1).unwrap();
        assert!((t - PI.sqrt() * 5.97e-3 / 500.0).abs() < 1e-18);
    }

    #[test]
    fn mirror_geometry_validation() {
        assert!(CavityGeometry::from_mirrors(0.03, 0.01, 5.87e-3, 0.1, 0.1).is_err());
        let g = CavityGeometry::from_mirrors(0.0275, 0.04, 5.87e-3, 0.1, 0.1).unwrap();
        let expected = (5.87e-3 * (0.0275f64 * (0.08 - 0.0275)).sqrt() / (2.0 * PI)).sqrt();
        assert!((g.w0 - expected).abs() < 1e-15);
    }
}
