mod common;

use entsim::jumpmc::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weak(delta: f64) -> IonCavityParams {
    IonCavityParams { g: 1.0, omega: 2.0, delta, kappa: 10.0, gamma_a: 0.0, gamma_b: 0.0 }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Restriction of a single-subsystem operator to the given basis indices.
fn block(h: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])])
}

/// Roots of `λ² - tr λ + det` for a 2×2 complex matrix, ordered by real part.
fn eigen2(m: &DMatrix<Complex64>) -> (Complex64, Complex64) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    let (a, b) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    if a.re < b.re { (a, b) } else { (b, a) }
}

#[test]
fn full_block_spectrum_at_large_detuning() {
    let p = weak(200.0);
    let cutoff = 3;
    let h = build_full_hamiltonian(&p, cutoff).unwrap();
    let s = LocalSpace { model: Model::Full, cutoff };
    for n in 0..cutoff {
        let b = block(&h, &[s.index(LEVEL_A, n + 1), s.index(LEVEL_B, n), s.index(LEVEL_C, n)]);
        // The block is closed under H.
        let total: f64 = h.row(s.index(LEVEL_C, n)).iter().map(|z| z.norm_sqr()).sum();
        let inside: f64 = b.row(2).iter().map(|z| z.norm_sqr()).sum();
        assert!((total - inside).abs() < 1e-12);
        let re = DMatrix::from_fn(3, 3, |i, j| b[(i, j)].re);
        let mut ev: Vec<f64> = re.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let shift = (4.0 * (n + 1) as f64 + p.omega.powi(2)) / (4.0 * p.delta);
        assert!((ev[0] + p.delta).abs() < 2.0 * shift, "{ev:?}");
        assert!(ev[1].abs() < 1e-12, "{ev:?}");
        // Second-order light shift with an O(shift²/Δ) correction.
        assert!((ev[2] - shift).abs() < 2.0 * shift * shift / p.delta, "{ev:?}");
    }
}

#[test]
fn adiabatic_hamiltonian_matches_elimination() {
    let p = IonCavityParams { g: 0.7, omega: 1.3, delta: 400.0, kappa: 1.0, gamma_a: 0.0, gamma_b: 0.0 };
    let cutoff = 2;
    let full = build_full_hamiltonian(&p, cutoff).unwrap();
    let ad = build_adiabatic_hamiltonian(&p, cutoff).unwrap();
    let sf = LocalSpace { model: Model::Full, cutoff };
    let sa = LocalSpace { model: Model::Adiabatic, cutoff };
    // Second-order elimination: H_ij = ⟨i|V|C⟩⟨C|V|j⟩ / Δ over ground states sharing a C level.
    for la in [LEVEL_A, LEVEL_B] {
        for na in 0..=cutoff {
            for lb in [LEVEL_A, LEVEL_B] {
                for nb in 0..=cutoff {
                    let mut expected = Complex64::new(0.0, 0.0);
                    for nc in 0..=cutoff {
                        let k = sf.index(LEVEL_C, nc);
                        expected += full[(sf.index(la, na), k)] * full[(k, sf.index(lb, nb))] / p.delta;
                    }
                    let got = ad[(sa.index(la, na), sa.index(lb, nb))];
                    // The Raman coupling below the cutoff edge is what the model keeps.
                    if na == cutoff && la == LEVEL_B || nb == cutoff && lb == LEVEL_B {
                        continue;
                    }
                    assert!((got - expected).norm() < 1e-14, "({la},{na}),({lb},{nb}): {got} vs {expected}");
                }
            }
        }
    }
}

#[test]
fn weak_driving_eigenvalues() {
    let p = weak(200.0);
    let h = effective_hamiltonian(&p, 2, Model::Adiabatic).unwrap();
    let s = LocalSpace { model: Model::Adiabatic, cutoff: 2 };
    let b = block(&h, &[s.index(LEVEL_A, 1), s.index(LEVEL_B, 0)]);
    let (e1, e2) = {
        let (a, b2) = eigen2(&b);
        if a.im.abs() < b2.im.abs() { (a, b2) } else { (b2, a) }
    };
    let x2 = p.weak_driving_ratio().norm_sqr();
    assert!((e1.re - p.omega.powi(2) / (4.0 * p.delta)).abs() < 1e-6);
    assert!((e1.im + p.kappa * x2).abs() < 1e-3 * p.kappa * x2);
    assert!((e2.re - p.g.powi(2) / p.delta).abs() < 1e-6);
    assert!((e2.im + p.kappa).abs() < 1e-5);

    // |e₁⟩ is an eigenvector up to O(x²).
    let e = weak_driving_state(&p, 2, Model::Adiabatic);
    let residual = (&h * &e - &e * e1).norm();
    assert!(residual < 10.0 * p.kappa * x2, "residual {residual}");
}

#[test]
fn photon_state_decays_at_twice_kappa() {
    let p = weak(200.0);
    let h = effective_hamiltonian(&p, 2, Model::Full).unwrap();
    let s = LocalSpace { model: Model::Full, cutoff: 2 };
    let mut psi = DVector::zeros(s.dim());
    psi[s.index(LEVEL_A, 1)] = c(1.0);
    let t = 0.2;
    let out = (h * Complex64::new(0.0, -t)).exp() * psi;
    let rate = -out.norm_squared().ln() / t;
    assert!((rate / (2.0 * p.kappa) - 1.0).abs() < 0.01, "rate {rate}");
}

#[test]
fn detector_modes_preserve_total_emission() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for model in [Model::Full, Model::Adiabatic] {
        let space = JointSpace::new(model, 2);
        let (j1, j2) = detector_modes(&space);
        let a = space.local.annihilation();
        let (aa, ab) = (space.on_site(Site::A, &a), space.on_site(Site::B, &a));
        let d = space.dim();
        let v = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = &v * v.adjoint();
        let lhs = &j1 * &rho * j1.adjoint() + &j2 * &rho * j2.adjoint();
        let rhs = &aa * &rho * aa.adjoint() + &ab * &rho * ab.adjoint();
        let diff = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12 * rho.norm(), "diff {diff}");
    }
}

#[test]
fn jump_operators_match_decay_term() {
    let p = IonCavityParams { gamma_a: 0.07, gamma_b: 0.13, ..weak(20.0) };
    for model in [Model::Full, Model::Adiabatic] {
        let p = if model == Model::Full { p } else { weak(20.0) };
        let h = joint_effective_hamiltonian(&p, 2, model).unwrap();
        let anti = (&h - h.adjoint()) / Complex64::new(0.0, 2.0);
        let mut sum = DMatrix::<Complex64>::zeros(h.nrows(), h.ncols());
        for j in jump_operators(&p, 2, model).unwrap() {
            sum += j.op.adjoint() * &j.op;
        }
        let diff = (sum + anti * c(2.0)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{model:?}: {diff}");
    }
    assert_eq!(jump_operators(&p, 2, Model::Adiabatic).unwrap_err(), JumpError::AdiabaticSpontaneous);
}

#[test]
fn heralded_state_fidelity() {
    let p = weak(20.0);
    let space = JointSpace::new(Model::Adiabatic, 2);
    let e = weak_driving_state(&p, 2, Model::Adiabatic);
    let psi0 = e.kronecker(&e);
    let (j1, j2) = detector_modes(&space);
    let x2 = p.weak_driving_ratio().norm_sqr();
    for (j, det) in [(j1, Detector::D1), (j2, Detector::D2)] {
        let psi1 = &j * &psi0;
        let rho = space.reduced_ion_state(&psi1).unwrap();
        let f = bell_fidelity(&rho, det).unwrap();
        assert!((f - 1.0 / (1.0 + x2)).abs() < 1e-12, "{det:?}: {f}");
    }
    let aa = space.reduced_ion_state(&space.basis((LEVEL_A, 0), (LEVEL_A, 0))).unwrap();
    assert_eq!(bell_fidelity(&aa, Detector::D1).unwrap(), 0.0);
    let target = bell_target(Detector::D2, 3);
    let rho = &target * target.adjoint();
    assert!((bell_fidelity(&rho, Detector::D2).unwrap() - 1.0).abs() < 1e-15);
    assert!((bell_fidelity(&rho, Detector::D1).unwrap()).abs() < 1e-15);
    assert!(bell_fidelity(&DMatrix::zeros(5, 5), Detector::D1).is_err());
}

#[test]
fn config_validation() {
    let p = weak(20.0);
    let base = JumpConfig::new(p, 100.0, 10, 1);
    assert!(base.validate().is_ok());
    assert!((base.time_step() - p.mean_first_click_time() / 1e5).abs() < 1e-15);
    assert!(matches!(JumpConfig { dt: Some(1.0), ..base.clone() }.validate(), Err(JumpError::StepTooCoarse { .. })));
    assert!(JumpConfig { eta: 1.5, ..base.clone() }.validate().is_err());
    assert!(JumpConfig { n_traj: 0, ..base.clone() }.validate().is_err());
    assert!(JumpConfig { cutoff: 0, ..base.clone() }.validate().is_err());
    let spont = JumpConfig { params: IonCavityParams { gamma_a: 0.1, ..p }, model: Model::Adiabatic, ..base.clone() };
    assert_eq!(spont.validate(), Err(JumpError::AdiabaticSpontaneous));
    let text = "t_wait = 1.0\nn_traj = 1\nbogus = 2\n[params]\nomega = 2.0\ndelta = 20.0\nkappa = 10.0\n";
    assert!(toml::from_str::<JumpConfig>(text).is_err());
}

#[test]
fn first_click_times_are_exponential() {
    let p = weak(20.0);
    let t_av = p.mean_first_click_time();
    let config = JumpConfig {
        model: Model::Adiabatic,
        stop_at_first_click: true,
        ..JumpConfig::new(p, 25.0 * t_av, 2000, 5)
    };
    let (records, stats) = run_trajectories(&config).unwrap();
    let times: Vec<f64> = records
        .iter()
        .map(|r| match r.outcome {
            Outcome::Click { time, .. } => time,
            _ => panic!("trajectory without a click"),
        })
        .collect();
    let n = times.len() as f64;
    let (d, p_value) = common::ks_exponential(&times, t_av);
    assert!(p_value > 0.01, "KS D = {d}, p = {p_value}");
    let mean = stats.mean_first_click_time.unwrap();
    assert!((mean.value - t_av).abs() < 4.0 * mean.stderr);
    // Both detectors fire equally often.
    let d1 = records.iter().filter(|r| matches!(r.outcome, Outcome::Click { detector: Detector::D1, .. })).count();
    assert!((d1 as f64 / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
}

#[test]
fn seeded_runs_are_reproducible_across_thread_counts() {
    let config = JumpConfig {
        params: IonCavityParams { gamma_a: 0.1, gamma_b: 0.1, ..weak(20.0) },
        dark_rate: 1e-3,
        eta: 0.7,
        ..JumpConfig::new(weak(20.0), 300.0, 200, 42)
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_trajectories(&config).unwrap())
    };
    let (a, sa) = run(1);
    let (b, sb) = run(4);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let (c, _) = run_trajectories(&JumpConfig { seed: 43, ..config.clone() }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn success_probability_near_one_after_ten_mean_times() {
    let p = weak(20.0);
    let config = JumpConfig {
        model: Model::Adiabatic,
        stop_at_first_click: true,
        ..JumpConfig::new(p, 10.0 * p.mean_first_click_time(), 1000, 9)
    };
    let (_, stats) = run_trajectories(&config).unwrap();
    assert!(stats.p_success.value > 0.99, "{:?}", stats.p_success);
    // Without losses each heralded state matches its Bell target up to O(x²).
    let f = stats.mean_fidelity.unwrap();
    assert!(f.value > 0.999, "{f:?}");
}

#[test]
fn dark_counts_alone_follow_poisson_statistics() {
    let rate = 2e-3;
    let t_wait = 400.0;
    let config = JumpConfig { eta: 0.0, dark_rate: rate, ..JumpConfig::new(weak(20.0), t_wait, 3000, 3) };
    let (records, stats) = run_trajectories(&config).unwrap();
    let expected = 1.0 - (-rate * t_wait).exp();
    assert!((stats.p_success.value - expected).abs() < 4.0 * stats.p_success.stderr);
    let mean_clicks = records.iter().map(|r| r.clicks.len()).sum::<usize>() as f64 / records.len() as f64;
    assert!((mean_clicks - rate * t_wait).abs() < 4.0 * (rate * t_wait / records.len() as f64).sqrt());
    assert!(records.iter().flat_map(|r| &r.clicks).all(|c| c.dark));
}

#[test]
fn success_scales_with_detector_efficiency() {
    let base = JumpConfig::new(weak(20.0), 100.0, 4000, 17);
    let (_, full) = run_trajectories(&base).unwrap();
    for eta in [0.25, 0.5, 0.75] {
        let (_, s) = run_trajectories(&JumpConfig { eta, ..base.clone() }).unwrap();
        let ratio = s.p_success.value / full.p_success.value;
        let err = ratio * ((s.p_success.stderr / s.p_success.value).powi(2) + (full.p_success.stderr / full.p_success.value).powi(2)).sqrt();
        assert!((ratio - eta).abs() < 3.0 * err, "η {eta}: ratio {ratio} ± {err}");
    }
}

/// Lindblad equation `ρ̇ = -i(Hρ - ρH†) + Σ JρJ†` integrated with RK4.
fn master_equation(h: &DMatrix<Complex64>, jumps: &[JumpOperator], rho0: DMatrix<Complex64>, t: f64, steps: usize) -> DMatrix<Complex64> {
    let minus_i = Complex64::new(0.0, -1.0);
    let f = |rho: &DMatrix<Complex64>| {
        let mut d = (h * rho - rho * h.adjoint()) * minus_i;
        for j in jumps {
            d += &j.op * rho * j.op.adjoint();
        }
        d
    };
    let dt = t / steps as f64;
    let mut rho = rho0;
    for _ in 0..steps {
        let k1 = f(&rho);
        let k2 = f(&(&rho + &k1 * c(dt / 2.0)));
        let k3 = f(&(&rho + &k2 * c(dt / 2.0)));
        let k4 = f(&(&rho + &k3 * c(dt)));
        rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
    }
    rho
}

#[test]
fn trajectory_average_matches_master_equation() {
    let params = IonCavityParams { g: 1.0, omega: 2.0, delta: 5.0, kappa: 1.0, gamma_a: 0.05, gamma_b: 0.05 };
    let t = 3.0;
    let config = JumpConfig {
        cutoff: 1,
        dt: Some(5e-4),
        keep_final_states: true,
        ..JumpConfig::new(params, t, 4000, 23)
    };
    let (records, _) = run_trajectories(&config).unwrap();
    let space = JointSpace::new(Model::Full, 1);
    let h = joint_effective_hamiltonian(&params, 1, Model::Full).unwrap();
    let jumps = jump_operators(&params, 1, Model::Full).unwrap();
    let psi0 = space.initial_state();
    let exact = master_equation(&h, &jumps, &psi0 * psi0.adjoint(), t, 6000);
    assert!((exact.trace().re - 1.0).abs() < 1e-9);

    let d = space.dim();
    let n = records.len() as f64;
    let mut mean = DMatrix::<Complex64>::zeros(d, d);
    let mut second = DMatrix::<f64>::zeros(d, d);
    for r in &records {
        let psi = r.final_state.as_ref().unwrap();
        let outer = psi * psi.adjoint();
        second += outer.map(|z| z.norm_sqr());
        mean += outer;
    }
    mean /= c(n);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let var = (second[(i, j)] / n - mean[(i, j)].norm_sqr()).max(0.0);
            let sigma = (var / n).sqrt();
            let diff = (mean[(i, j)] - exact[(i, j)]).norm();
            assert!(diff < 5.0 * sigma + 2e-3, "({i},{j}): {diff} vs σ {sigma}");
            worst = worst.max(diff);
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn json_lines_parse() {
    let config = JumpConfig { dark_rate: 0.01, ..JumpConfig::new(weak(20.0), 100.0, 20, 2) };
    let (records, _) = run_trajectories(&config).unwrap();
    for r in &records {
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(v["traj"].as_u64().unwrap() as usize, r.traj);
        match r.outcome {
            Outcome::Click { .. } => assert!(v["fidelity"].is_number() && v["detector"].is_number()),
            _ => assert!(v["t_click"].is_null() && v["fidelity"].is_null()),
        }
    }
}
