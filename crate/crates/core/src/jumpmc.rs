//! Two trapped ions in separate cavities, entangled by a photon detection behind
//! a 50:50 beam splitter.
//!
//! Each ion has levels `A`, `B` and an excited level `C`. The cavity couples
//! `A ↔ C` with strength `g`, a classical field couples `B ↔ C` with Rabi frequency
//! `Ω`, and both are detuned by `Δ`. Photons leak from each cavity at rate `2κ`
//! and are mixed before two detectors, so a click heralds an entangled ion pair.
//!
//! Trajectories follow the waiting-time form of the quantum-jump method: the
//! unnormalized state evolves under the non-Hermitian effective Hamiltonian until
//! its squared norm falls below a uniform draw, then a jump is applied. Evolution
//! uses the exact propagator for one step `dt`, and powers `2ᵏ·dt` of it to skip
//! ahead, so the jump time is resolved to one step at logarithmic cost.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::json_number;

/// Level indices shared by both models; the adiabatic model omits `C`.
pub const LEVEL_A: usize = 0;
pub const LEVEL_B: usize = 1;
pub const LEVEL_C: usize = 2;

/// Largest tolerated fractional norm loss in the single step that triggers a jump.
pub const MAX_STEP_DRIFT: f64 = 1e-3;

/// Default time step as a fraction of the mean first-click time.
pub const DEFAULT_STEPS_PER_TAV: f64 = 1e5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JumpError {
    #[error("parameter `{name}` = {value} is outside its domain")]
    Parameter { name: &'static str, value: f64 },
    #[error("time step {dt} exceeds T_av/10⁴ = {limit}")]
    StepTooCoarse { dt: f64, limit: f64 },
    #[error("norm drift {drift:.3e} in one step exceeds {MAX_STEP_DRIFT}; reduce dt")]
    NormDrift { drift: f64 },
    #[error("spontaneous emission needs the full three-level model")]
    AdiabaticSpontaneous,
    #[error("fidelity requested for a trajectory without a click")]
    NoClick,
    #[error("state dimension {found} does not match {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Physical parameters in units of the coupling `g` (or any common rate unit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonCavityParams {
    #[serde(default = "unit")]
    pub g: f64,
    pub omega: f64,
    pub delta: f64,
    pub kappa: f64,
    #[serde(default)]
    pub gamma_a: f64,
    #[serde(default)]
    pub gamma_b: f64,
}

fn unit() -> f64 {
    1.0
}

impl IonCavityParams {
    pub fn validate(&self) -> Result<(), JumpError> {
        let checks: [(&'static str, f64, bool); 6] = [
            ("g", self.g, self.g.is_finite()),
            ("omega", self.omega, self.omega.is_finite()),
            ("delta", self.delta, self.delta.is_finite() && self.delta != 0.0),
            ("kappa", self.kappa, self.kappa > 0.0 && self.kappa.is_finite()),
            ("gamma_a", self.gamma_a, self.gamma_a >= 0.0 && self.gamma_a.is_finite()),
            ("gamma_b", self.gamma_b, self.gamma_b >= 0.0 && self.gamma_b.is_finite()),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(JumpError::Parameter { name, value });
            }
        }
        Ok(())
    }

    /// Weak-driving amplitude `x = -i gΩ / (2Δκ)` of the photon component in `|e₁⟩`.
    pub fn weak_driving_ratio(&self) -> Complex64 {
        Complex64::new(0.0, -self.g * self.omega / (2.0 * self.delta * self.kappa))
    }

    /// Mean time to the first click in the weak-driving limit, `1/(4κ|x|²) = κΔ²/(g²Ω²)`.
    pub fn mean_first_click_time(&self) -> f64 {
        self.kappa * self.delta.powi(2) / (self.g * self.omega).powi(2)
    }

    pub fn has_spontaneous_emission(&self) -> bool {
        self.gamma_a > 0.0 || self.gamma_b > 0.0
    }
}

/// Level structure used for each ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Three levels with the excited level kept explicitly.
    #[default]
    Full,
    /// Two levels after adiabatic elimination of the excited level.
    Adiabatic,
}

impl Model {
    pub fn levels(self) -> usize {
        match self {
            Model::Full => 3,
            Model::Adiabatic => 2,
        }
    }
}

/// One ion-cavity subsystem: basis `|level, n⟩` with index `level·(N+1) + n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSpace {
    pub model: Model,
    pub cutoff: usize,
}

impl LocalSpace {
    pub fn dim(&self) -> usize {
        self.model.levels() * (self.cutoff + 1)
    }

    pub fn index(&self, level: usize, photons: usize) -> usize {
        level * (self.cutoff + 1) + photons
    }

    /// `|l⟩⟨m| ⊗ 𝟙`.
    fn level_op(&self, l: usize, m: usize) -> DMatrix<Complex64> {
        let mut op = DMatrix::zeros(self.dim(), self.dim());
        for n in 0..=self.cutoff {
            op[(self.index(l, n), self.index(m, n))] = ONE;
        }
        op
    }

    /// `|l⟩⟨m| ⊗ a`.
    fn level_op_annihilate(&self, l: usize, m: usize) -> DMatrix<Complex64> {
        let mut op = DMatrix::zeros(self.dim(), self.dim());
        for n in 1..=self.cutoff {
            op[(self.index(l, n - 1), self.index(m, n))] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        op
    }

    /// `𝟙 ⊗ a`.
    pub fn annihilation(&self) -> DMatrix<Complex64> {
        let mut op = DMatrix::zeros(self.dim(), self.dim());
        for l in 0..self.model.levels() {
            op += self.level_op_annihilate(l, l);
        }
        op
    }

    pub fn number(&self) -> DMatrix<Complex64> {
        let a = self.annihilation();
        a.adjoint() * a
    }
}

fn check_cutoff(cutoff: usize) -> Result<(), JumpError> {
    if cutoff == 0 {
        return Err(JumpError::Parameter { name: "cutoff", value: 0.0 });
    }
    Ok(())
}

/// `-Δ|C⟩⟨C| + (g|C⟩⟨A| a + h.c.) + (Ω/2)(|C⟩⟨B| + h.c.)` on one subsystem.
///
/// The excited level sits at `-Δ`, so that eliminating it yields the light shifts
/// `+g²/Δ` and `+Ω²/4Δ` of [`build_adiabatic_hamiltonian`].
pub fn build_full_hamiltonian(params: &IonCavityParams, cutoff: usize) -> Result<DMatrix<Complex64>, JumpError> {
    params.validate()?;
    check_cutoff(cutoff)?;
    let s = LocalSpace { model: Model::Full, cutoff };
    let c = |x: f64| Complex64::new(x, 0.0);
    let cav = s.level_op_annihilate(LEVEL_C, LEVEL_A) * c(params.g);
    let drive = s.level_op(LEVEL_C, LEVEL_B) * c(params.omega / 2.0);
    Ok(s.level_op(LEVEL_C, LEVEL_C) * c(-params.delta) + &cav + cav.adjoint() + &drive + drive.adjoint())
}

/// `(g²/Δ)|A⟩⟨A| a†a + (Ω²/4Δ)|B⟩⟨B| + ((Ωg/2Δ)|B⟩⟨A| a + h.c.)` on one subsystem.
pub fn build_adiabatic_hamiltonian(params: &IonCavityParams, cutoff: usize) -> Result<DMatrix<Complex64>, JumpError> {
    params.validate()?;
    check_cutoff(cutoff)?;
    let s = LocalSpace { model: Model::Adiabatic, cutoff };
    let c = |x: f64| Complex64::new(x, 0.0);
    let d = params.delta;
    let a_level = s.level_op(LEVEL_A, LEVEL_A) * s.number() * c(params.g.powi(2) / d);
    let b_level = s.level_op(LEVEL_B, LEVEL_B) * c(params.omega.powi(2) / (4.0 * d));
    let raman = s.level_op_annihilate(LEVEL_B, LEVEL_A) * c(params.omega * params.g / (2.0 * d));
    Ok(a_level + b_level + &raman + raman.adjoint())
}

/// Non-Hermitian Hamiltonian of one subsystem: `H - iκ a†a`, plus
/// `-i(γ_A + γ_B)|C⟩⟨C|` in the full model.
pub fn effective_hamiltonian(params: &IonCavityParams, cutoff: usize, model: Model) -> Result<DMatrix<Complex64>, JumpError> {
    let s = LocalSpace { model, cutoff };
    let (h, decay) = match model {
        Model::Full => {
            let h = build_full_hamiltonian(params, cutoff)?;
            (h, s.level_op(LEVEL_C, LEVEL_C) * Complex64::new(params.gamma_a + params.gamma_b, 0.0))
        }
        Model::Adiabatic => {
            if params.has_spontaneous_emission() {
                return Err(JumpError::AdiabaticSpontaneous);
            }
            (build_adiabatic_hamiltonian(params, cutoff)?, DMatrix::zeros(s.dim(), s.dim()))
        }
    };
    Ok(h - (s.number() * Complex64::new(params.kappa, 0.0) + decay) * I)
}

/// Which detector behind the beam splitter fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    pub fn number(self) -> u8 {
        match self {
            Detector::D1 => 1,
            Detector::D2 => 2,
        }
    }
}

/// Ion (equivalently, its cavity) in the joint system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Site {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    /// Photon leaving the cavities towards a detector.
    Photon(Detector),
    /// Decay of the excited level of one ion into `LEVEL_A` or `LEVEL_B`.
    Spontaneous { site: Site, to_level: usize },
}

/// Collapse operator on the joint system, including its rate prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub kind: JumpKind,
    pub op: DMatrix<Complex64>,
}

/// Joint space of both subsystems: index `i_A · d + i_B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointSpace {
    pub local: LocalSpace,
}

impl JointSpace {
    pub fn new(model: Model, cutoff: usize) -> Self {
        Self { local: LocalSpace { model, cutoff } }
    }

    pub fn dim(&self) -> usize {
        self.local.dim().pow(2)
    }

    pub fn on_site(&self, site: Site, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let id = DMatrix::<Complex64>::identity(self.local.dim(), self.local.dim());
        match site {
            Site::A => op.kronecker(&id),
            Site::B => id.kronecker(op),
        }
    }

    /// `|l_A, n_A⟩ ⊗ |l_B, n_B⟩`.
    pub fn basis(&self, (la, na): (usize, usize), (lb, nb): (usize, usize)) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[self.local.index(la, na) * self.local.dim() + self.local.index(lb, nb)] = ONE;
        v
    }

    /// Both ions in `B`, both cavities empty.
    pub fn initial_state(&self) -> DVector<Complex64> {
        self.basis((LEVEL_B, 0), (LEVEL_B, 0))
    }

    /// Reduced state of the two ions, basis `l_A · L + l_B`, normalized.
    pub fn reduced_ion_state(&self, psi: &DVector<Complex64>) -> Result<DMatrix<Complex64>, JumpError> {
        if psi.len() != self.dim() {
            return Err(JumpError::Dimension { expected: self.dim(), found: psi.len() });
        }
        let levels = self.local.model.levels();
        let n = self.local.cutoff + 1;
        let d = self.local.dim();
        let mut rho = DMatrix::zeros(levels * levels, levels * levels);
        for la in 0..levels {
            for lb in 0..levels {
                for la2 in 0..levels {
                    for lb2 in 0..levels {
                        let mut acc = ZERO;
                        for na in 0..n {
                            for nb in 0..n {
                                let i = self.local.index(la, na) * d + self.local.index(lb, nb);
                                let j = self.local.index(la2, na) * d + self.local.index(lb2, nb);
                                acc += psi[i] * psi[j].conj();
                            }
                        }
                        rho[(la * levels + lb, la2 * levels + lb2)] = acc;
                    }
                }
            }
        }
        let tr: f64 = (0..rho.nrows()).map(|k| rho[(k, k)].re).sum();
        Ok(rho.unscale(tr))
    }
}

/// `H_eff ⊗ 𝟙 + 𝟙 ⊗ H_eff`.
pub fn joint_effective_hamiltonian(params: &IonCavityParams, cutoff: usize, model: Model) -> Result<DMatrix<Complex64>, JumpError> {
    let h = effective_hamiltonian(params, cutoff, model)?;
    let space = JointSpace::new(model, cutoff);
    Ok(space.on_site(Site::A, &h) + space.on_site(Site::B, &h))
}

/// Detector modes `J₁ = √½(i a_A + a_B)` and `J₂ = √½(a_A + i a_B)`, without rate factors.
pub fn detector_modes(space: &JointSpace) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = space.local.annihilation();
    let a_a = space.on_site(Site::A, &a);
    let a_b = space.on_site(Site::B, &a);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ((&a_a * I + &a_b) * h, (a_a + a_b * I) * h)
}

/// Collapse operators `√(2κ) J₁`, `√(2κ) J₂` and, in the full model with non-zero
/// rates, `√(2γ_A)|A⟩⟨C|` and `√(2γ_B)|B⟩⟨C|` on each ion.
pub fn jump_operators(params: &IonCavityParams, cutoff: usize, model: Model) -> Result<Vec<JumpOperator>, JumpError> {
    params.validate()?;
    check_cutoff(cutoff)?;
    if model == Model::Adiabatic && params.has_spontaneous_emission() {
        return Err(JumpError::AdiabaticSpontaneous);
    }
    let space = JointSpace::new(model, cutoff);
    let (j1, j2) = detector_modes(&space);
    let rate = Complex64::new((2.0 * params.kappa).sqrt(), 0.0);
    let mut ops = vec![
        JumpOperator { kind: JumpKind::Photon(Detector::D1), op: j1 * rate },
        JumpOperator { kind: JumpKind::Photon(Detector::D2), op: j2 * rate },
    ];
    if model == Model::Full {
        for (to_level, gamma) in [(LEVEL_A, params.gamma_a), (LEVEL_B, params.gamma_b)] {
            if gamma == 0.0 {
                continue;
            }
            let local = space.local.level_op(to_level, LEVEL_C) * Complex64::new((2.0 * gamma).sqrt(), 0.0);
            for site in [Site::A, Site::B] {
                ops.push(JumpOperator { kind: JumpKind::Spontaneous { site, to_level }, op: space.on_site(site, &local) });
            }
        }
    }
    Ok(ops)
}

/// `|e₁⟩ = (x|A,1⟩ + |B,0⟩)/√(1+|x|²)` of one subsystem, in the given model's basis.
pub fn weak_driving_state(params: &IonCavityParams, cutoff: usize, model: Model) -> DVector<Complex64> {
    let s = LocalSpace { model, cutoff };
    let x = params.weak_driving_ratio();
    let mut v = DVector::zeros(s.dim());
    v[s.index(LEVEL_A, 1)] = x;
    v[s.index(LEVEL_B, 0)] = ONE;
    v.unscale(v.norm())
}

/// Target ion state heralded by `detector`: `(|B,A⟩ + i|A,B⟩)/√2` for D1 and
/// `(i|B,A⟩ + |A,B⟩)/√2` for D2, in a basis with `levels` levels per ion.
pub fn bell_target(detector: Detector, levels: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(levels * levels);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (ba, ab) = match detector {
        Detector::D1 => (ONE, I),
        Detector::D2 => (I, ONE),
    };
    v[LEVEL_B * levels + LEVEL_A] = ba * h;
    v[LEVEL_A * levels + LEVEL_B] = ab * h;
    v
}

/// Overlap `⟨target|ρ|target⟩` of a normalized two-ion state with the heralded Bell state.
pub fn bell_fidelity(ion_state: &DMatrix<Complex64>, detector: Detector) -> Result<f64, JumpError> {
    let dim = ion_state.nrows();
    let levels = (dim as f64).sqrt().round() as usize;
    if levels * levels != dim || !(2..=3).contains(&levels) || ion_state.ncols() != dim {
        return Err(JumpError::Dimension { expected: 4, found: dim });
    }
    let t = bell_target(detector, levels);
    Ok((t.adjoint() * ion_state * &t)[(0, 0)].re)
}

/// Outcome of one trajectory, decided by the first click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Click { detector: Detector, time: f64 },
    /// Nothing left the system within the waiting time.
    NoClick,
    /// No click, but a photon was missed by the detectors or an ion decayed spontaneously.
    Lost,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Click { .. } => "click",
            Outcome::NoClick => "no_click",
            Outcome::Lost => "lost",
        }
    }
}

/// A registered detector click.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    pub detector: Detector,
    pub time: f64,
    /// True for dark counts.
    pub dark: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub traj: usize,
    pub outcome: Outcome,
    /// All clicks within the waiting time, in time order.
    pub clicks: Vec<Click>,
    /// Reduced two-ion state right after the first click.
    pub ion_state_at_click: Option<DMatrix<Complex64>>,
    /// Fidelity of that state with the Bell state heralded by the first click.
    pub fidelity: Option<f64>,
    /// Normalized joint state at the end of the waiting time, when requested.
    pub final_state: Option<DVector<Complex64>>,
}

impl TrajectoryRecord {
    pub fn is_multi_click(&self) -> bool {
        self.clicks.len() > 1
    }

    /// One JSON object `{traj, outcome, t_click, detector, fidelity}`.
    pub fn to_json_line(&self) -> String {
        let (t, det) = match self.outcome {
            Outcome::Click { detector, time } => (json_number(time), detector.number().to_string()),
            _ => ("null".to_string(), "null".to_string()),
        };
        let fid = self.fidelity.map(json_number).unwrap_or_else(|| "null".to_string());
        format!(
            "{{\"traj\":{},\"outcome\":\"{}\",\"t_click\":{},\"detector\":{},\"fidelity\":{}}}",
            self.traj,
            self.outcome.label(),
            t,
            det,
            fid
        )
    }
}

/// Monte Carlo settings. Times are in the same units as the inverse rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub params: IonCavityParams,
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Time step; defaults to `T_av / 10⁵`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_wait: f64,
    #[serde(default = "unit")]
    pub eta: f64,
    #[serde(default)]
    pub dark_rate: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// End each trajectory at its first click instead of at `t_wait`.
    #[serde(default)]
    pub stop_at_first_click: bool,
    /// Keep the joint state at `t_wait` in every record.
    #[serde(default)]
    pub keep_final_states: bool,
}

fn default_cutoff() -> usize {
    2
}

impl JumpConfig {
    pub fn new(params: IonCavityParams, t_wait: f64, n_traj: usize, seed: u64) -> Self {
        Self {
            params,
            model: Model::default(),
            cutoff: default_cutoff(),
            dt: None,
            t_wait,
            eta: 1.0,
            dark_rate: 0.0,
            n_traj,
            seed,
            stop_at_first_click: false,
            keep_final_states: false,
        }
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.params.mean_first_click_time() / DEFAULT_STEPS_PER_TAV)
    }

    pub fn validate(&self) -> Result<(), JumpError> {
        self.params.validate()?;
        check_cutoff(self.cutoff)?;
        if self.model == Model::Adiabatic && self.params.has_spontaneous_emission() {
            return Err(JumpError::AdiabaticSpontaneous);
        }
        if !(self.t_wait > 0.0 && self.t_wait.is_finite()) {
            return Err(JumpError::Parameter { name: "t_wait", value: self.t_wait });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(JumpError::Parameter { name: "eta", value: self.eta });
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(JumpError::Parameter { name: "dark_rate", value: self.dark_rate });
        }
        if self.n_traj == 0 {
            return Err(JumpError::Parameter { name: "n_traj", value: 0.0 });
        }
        let dt = self.time_step();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(JumpError::Parameter { name: "dt", value: dt });
        }
        let limit = self.params.mean_first_click_time() / 1e4;
        if dt > limit * (1.0 + 1e-12) {
            return Err(JumpError::StepTooCoarse { dt, limit });
        }
        Ok(())
    }
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean and standard error; `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { value: mean, stderr })
    }

    /// Binomial proportion `k/n` with standard error `√(p(1-p)/n)`.
    pub fn proportion(k: usize, n: usize) -> Self {
        let p = k as f64 / n as f64;
        Self { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCStats {
    pub n_traj: usize,
    pub p_success: Estimate,
    /// Over all trajectories with a click.
    pub mean_fidelity: Option<Estimate>,
    /// Over trajectories with exactly one click.
    pub mean_fidelity_single_click: Option<Estimate>,
    pub mean_first_click_time: Option<Estimate>,
    pub multi_click_fraction: Estimate,
    pub lost_fraction: Estimate,
}

impl MCStats {
    pub fn from_records(records: &[TrajectoryRecord]) -> Self {
        let n = records.len();
        let clicked: Vec<&TrajectoryRecord> = records.iter().filter(|r| matches!(r.outcome, Outcome::Click { .. })).collect();
        let fid: Vec<f64> = clicked.iter().filter_map(|r| r.fidelity).collect();
        let fid_single: Vec<f64> = clicked.iter().filter(|r| !r.is_multi_click()).filter_map(|r| r.fidelity).collect();
        let times: Vec<f64> = clicked
            .iter()
            .filter_map(|r| match r.outcome {
                Outcome::Click { time, .. } => Some(time),
                _ => None,
            })
            .collect();
        Self {
            n_traj: n,
            p_success: Estimate::proportion(clicked.len(), n),
            mean_fidelity: Estimate::from_samples(&fid),
            mean_fidelity_single_click: Estimate::from_samples(&fid_single),
            mean_first_click_time: Estimate::from_samples(&times),
            multi_click_fraction: Estimate::proportion(records.iter().filter(|r| r.is_multi_click()).count(), n),
            lost_fraction: Estimate::proportion(records.iter().filter(|r| r.outcome == Outcome::Lost).count(), n),
        }
    }
}

/// Precomputed propagators and collapse operators shared by all trajectories.
struct Stepper {
    space: JointSpace,
    dt: f64,
    /// `exp(-i H_eff 2ᵏ dt)` for `k = 0..levels`.
    powers: Vec<DMatrix<Complex64>>,
    jumps: Vec<JumpOperator>,
}

impl Stepper {
    fn new(config: &JumpConfig, total_steps: u64) -> Result<Self, JumpError> {
        let space = JointSpace::new(config.model, config.cutoff);
        let h = joint_effective_hamiltonian(&config.params, config.cutoff, config.model)?;
        let dt = config.time_step();
        let base = (h * Complex64::new(0.0, -dt)).exp();
        let levels = (64 - total_steps.max(1).leading_zeros()) as usize;
        let mut powers = vec![base];
        for _ in 1..levels {
            let last = powers.last().expect("non-empty");
            powers.push(last * last);
        }
        let jumps = jump_operators(&config.params, config.cutoff, config.model)?;
        Ok(Self { space, dt, powers, jumps })
    }

    /// Advances `psi` by whole steps while its squared norm stays at or above `r`,
    /// without passing step `limit`.
    fn advance(&self, psi: &mut DVector<Complex64>, step: &mut u64, limit: u64, r: f64) {
        for k in (0..self.powers.len()).rev() {
            let span = 1u64 << k;
            while *step + span <= limit {
                let cand = &self.powers[k] * &*psi;
                if cand.norm_squared() >= r {
                    *psi = cand;
                    *step += span;
                } else {
                    break;
                }
            }
        }
    }
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn random_detector(rng: &mut ChaCha8Rng) -> Detector {
    if rng.random::<bool>() {
        Detector::D1
    } else {
        Detector::D2
    }
}

fn simulate(config: &JumpConfig, stepper: &Stepper, traj: usize, total_steps: u64) -> Result<TrajectoryRecord, JumpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(traj as u64);
    let dt = stepper.dt;
    let space = stepper.space;
    let mut psi = space.initial_state();
    let mut step: u64 = 0;
    let mut r = 1.0 - rng.random::<f64>();
    let mut next_dark = exponential(&mut rng, config.dark_rate);
    let mut clicks: Vec<Click> = Vec::new();
    let mut ion_state_at_click = None;
    let mut fidelity = None;
    let mut disturbed = false;

    let mut register = |clicks: &mut Vec<Click>, psi: &DVector<Complex64>, click: Click| -> Result<(), JumpError> {
        if clicks.is_empty() {
            let rho = space.reduced_ion_state(&psi.unscale(psi.norm()))?;
            fidelity = Some(bell_fidelity(&rho, click.detector)?);
            ion_state_at_click = Some(rho);
        }
        clicks.push(click);
        Ok(())
    };

    loop {
        if config.stop_at_first_click && !clicks.is_empty() {
            break;
        }
        let dark_step = if next_dark.is_finite() { (next_dark / dt).ceil() as u64 } else { u64::MAX };
        let limit = total_steps.min(dark_step);
        stepper.advance(&mut psi, &mut step, limit, r);
        if step == limit {
            if limit == dark_step && dark_step <= total_steps {
                let detector = random_detector(&mut rng);
                register(&mut clicks, &psi, Click { detector, time: step as f64 * dt, dark: true })?;
                next_dark += exponential(&mut rng, config.dark_rate);
                continue;
            }
            break;
        }
        let before = psi.norm_squared();
        psi = &stepper.powers[0] * &psi;
        step += 1;
        let drift = 1.0 - psi.norm_squared() / before;
        if drift > MAX_STEP_DRIFT {
            return Err(JumpError::NormDrift { drift });
        }
        // Choose the channel with probability proportional to ‖C ψ‖².
        let candidates: Vec<DVector<Complex64>> = stepper.jumps.iter().map(|j| &j.op * &psi).collect();
        let weights: Vec<f64> = candidates.iter().map(|v| v.norm_squared()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = k;
                break;
            }
            u -= w;
        }
        let v = &candidates[chosen];
        psi = v.unscale(v.norm());
        r = 1.0 - rng.random::<f64>();
        match stepper.jumps[chosen].kind {
            JumpKind::Photon(detector) => {
                if rng.random::<f64>() < config.eta {
                    register(&mut clicks, &psi, Click { detector, time: step as f64 * dt, dark: false })?;
                } else {
                    disturbed = true;
                }
            }
            JumpKind::Spontaneous { .. } => disturbed = true,
        }
    }

    clicks.sort_by(|a, b| a.time.total_cmp(&b.time));
    let outcome = match clicks.first() {
        Some(c) => Outcome::Click { detector: c.detector, time: c.time },
        None if disturbed => Outcome::Lost,
        None => Outcome::NoClick,
    };
    let final_state = config.keep_final_states.then(|| psi.unscale(psi.norm()));
    Ok(TrajectoryRecord { traj, outcome, clicks, ion_state_at_click, fidelity, final_state })
}

/// Runs `config.n_traj` independent trajectories in parallel.
///
/// Trajectory `k` draws from stream `k` of a ChaCha8 generator seeded with
/// `config.seed`, so results do not depend on scheduling or thread count.
pub fn run_trajectories(config: &JumpConfig) -> Result<(Vec<TrajectoryRecord>, MCStats), JumpError> {
    config.validate()?;
    let total_steps = (config.t_wait / config.time_step()).round().max(1.0) as u64;
    let stepper = Stepper::new(config, total_steps)?;
    let records: Vec<TrajectoryRecord> = (0..config.n_traj)
        .into_par_iter()
        .map(|traj| simulate(config, &stepper, traj, total_steps))
        .collect::<Result<_, _>>()?;
    let stats = MCStats::from_records(&records);
    Ok((records, stats))
}
