use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use entsim::cavity::{fidelity_ideal, success_probability};
use entsim::cli::*;
use entsim::distill::{ComplexValue, InputSpec, ProtocolConfig};
use entsim::fock::{FockDensityMatrix, MatrixDump};
use entsim::jumpmc::{IonCavityParams, JumpConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("entsim-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn entsim(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_entsim")).args(args).env_remove(THREADS_ENV).output().unwrap()
}

fn schmidt(alphas: &[f64]) -> InputSpec {
    InputSpec::Schmidt { alphas: alphas.iter().map(|&a| ComplexValue::Real(a)).collect() }
}

#[test]
fn cavity_ideal_rows() {
    let t = cmd_cavity_ideal(&CavityIdealConfig::default()).unwrap();
    assert_eq!(t.columns, ["gtau", "F", "P"]);
    assert_eq!(t.rows[0][0], 0.0);
    assert!((t.rows[0][1] - 1.0).abs() < 1e-15 && t.rows[0][2].abs() < 1e-15);
    let half = t.rows.iter().find(|r| (r[0] - 0.5).abs() < 1e-12).unwrap();
    assert_eq!(half[1], fidelity_ideal(half[0]));
    assert_eq!(half[2], success_probability(half[0]));
    let full = cmd_cavity_ideal(&CavityIdealConfig { gtau_min: 0.0, gtau_max: PI / 2.0, points: 200 }).unwrap();
    let p = full.column("P").unwrap();
    assert!(p.windows(2).all(|w| w[1] >= w[0]));
    assert!(cmd_cavity_ideal(&CavityIdealConfig { gtau_min: 1.0, gtau_max: 0.0, points: 5 }).is_err());
}

#[test]
fn cavity_epsilon_sweep() {
    let config = CavityPathConfig::Epsilon { gtau: 0.8, min: -0.2, max: 0.2, points: 401 };
    let t = cmd_cavity_path(&config).unwrap();
    let zero = t.rows.iter().find(|r| r[0].abs() < 1e-12).unwrap();
    assert!((zero[1] - fidelity_ideal(0.8)).abs() < 1e-15);
    assert!((zero[2] - success_probability(0.8)).abs() < 1e-15);
    let best = t.rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    // The fidelity still rises at the lower sweep edge for gτ = 0.8, so only the sign is pinned.
    assert!(best[0] < 0.0);
}

#[test]
fn cavity_path_sweep_tracks_estimate() {
    let config: CavityPathConfig = parse_config(&fs::read_to_string(configs_dir().join("cavity_path_paris.toml")).unwrap()).unwrap();
    let t = cmd_cavity_path(&config).unwrap();
    assert_eq!(t.columns, ["scale", "epsilon", "epsilon_estimate", "F", "P"]);
    assert_eq!(t.rows[0][1], 0.0);
    for row in &t.rows[1..] {
        let (exact, estimate) = (row[1], row[2]);
        // Second-order estimate: relative residual grows linearly with the scale.
        assert!(((exact - estimate) / exact).abs() < 0.1 * row[0], "{row:?}");
        assert!(estimate <= 0.2);
    }
}

fn small_mc(seed: u64, n_traj: usize) -> McConfig {
    let params = IonCavityParams { g: 1.0, omega: 2.0, delta: 20.0, kappa: 10.0, gamma_a: 0.1, gamma_b: 0.1 };
    McConfig {
        run: JumpConfig { dt: Some(0.1), ..JumpConfig::new(params, 300.0, n_traj, seed) },
        sweep: None,
        trajectory_log: Some(PathBuf::from("unused.jsonl")),
    }
}

#[test]
fn mc_is_deterministic_and_logs_every_trajectory() {
    let a = cmd_mc(&small_mc(5, 300)).unwrap();
    let b = cmd_mc(&small_mc(5, 300)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(format!("{:?}", a.table), format!("{:?}", b.table));
    assert_eq!(a.log.len(), 300);
    assert_eq!(a.table.columns, MC_COLUMNS);
    for line in &a.log {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["traj", "outcome", "t_click", "detector", "fidelity"] {
            assert!(v.get(key).is_some(), "{line}");
        }
    }
}

#[test]
fn mc_stderr_shrinks_with_trajectory_count() {
    let col = |t: &entsim::io::Table, name: &str| t.column(name).unwrap()[0];
    let small = cmd_mc(&small_mc(6, 400)).unwrap().table;
    let large = cmd_mc(&small_mc(6, 3600)).unwrap().table;
    let ratio = col(&small, "p_success_stderr") / col(&large, "p_success_stderr");
    assert!((ratio - 3.0).abs() < 0.6, "ratio {ratio}");
}

#[test]
fn mc_sweep_rows_follow_values() {
    let mut config = small_mc(7, 50);
    config.sweep = Some(McSweep { parameter: McParameter::Eta, values: vec![0.5, 1.0] });
    let t = cmd_mc(&config).unwrap().table;
    assert_eq!(t.column("value").unwrap(), vec![0.5, 1.0]);
    config.sweep = Some(McSweep { parameter: McParameter::Eta, values: vec![] });
    assert!(matches!(cmd_mc(&config), Err(CliError::Config(_))));
}

#[test]
fn distill_table() {
    let config = DistillConfig { input: schmidt(&[1.0, 0.5]), protocol: ProtocolConfig::default(), sweep: None };
    let t = cmd_distill(&config).unwrap();
    assert_eq!(t.columns, DISTILL_COLUMNS);
    let p = t.column("P").unwrap();
    assert_eq!(p[0], 1.0);
    assert!((p[1] - 0.81).abs() < 1e-12);

    // An η = 1 sweep point reproduces the unswept run.
    let swept = DistillConfig {
        sweep: Some(DistillSweep { parameter: DistillParameter::Eta, values: vec![0.5, 1.0] }),
        ..config.clone()
    };
    let s = cmd_distill(&swept).unwrap();
    let ideal_rows: Vec<&Vec<f64>> = s.rows.iter().filter(|r| r[0] == 1.0).collect();
    assert_eq!(ideal_rows.len(), t.rows.len());
    let bits = |row: &[f64]| row.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    for (a, b) in ideal_rows.iter().zip(&t.rows) {
        assert_eq!(bits(&a[1..]), bits(&b[1..]));
    }
    let channel = DistillConfig {
        sweep: Some(DistillSweep { parameter: DistillParameter::Channel, values: vec![0.9] }),
        ..config
    };
    assert!(matches!(cmd_distill(&channel), Err(CliError::Config(_))));
}

#[test]
fn vacuum_wigner_is_gaussian() {
    let config = WignerConfig {
        state: schmidt(&[1.0]),
        cutoff: 3,
        keep_mode: 0,
        gaussify_iterations: 0,
        grid: entsim::bridge::WignerGrid { half_width: 3.0, points: 31 },
    };
    let t = cmd_wigner(&config).unwrap();
    assert_eq!(t.columns, ["X", "P", "W"]);
    assert_eq!(t.rows.len(), 31 * 31);
    for r in &t.rows {
        let expected = (-(r[0] * r[0] + r[1] * r[1])).exp() / PI;
        assert!((r[2] - expected).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn state_save_load_round_trip_is_bit_stable() {
    let config = StateConfig {
        action: StateAction::Save,
        cutoff: Some(4),
        state: Some(InputSpec::Procrustean { r: 0.4, transmission: 0.3, tau: 0.7 }),
        file: None,
    };
    let StateOutput::Dump(dump) = cmd_state(&config).unwrap() else { panic!("expected a dump") };
    let path = scratch("rho.json");
    fs::write(&path, dump.to_json()).unwrap();
    let loaded = load_state(&path).unwrap();
    let original = FockDensityMatrix::from_dump(&dump).unwrap();
    assert_eq!(loaded, original);
    let reparsed: MatrixDump = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(reparsed, dump);
}

#[test]
fn state_measure_matches_tmss_closed_form() {
    let config: StateConfig = parse_config(&fs::read_to_string(configs_dir().join("state_tmss.toml")).unwrap()).unwrap();
    let StateOutput::Measures(t) = cmd_state(&config).unwrap() else { panic!("expected measures") };
    assert_eq!(t.columns, STATE_COLUMNS);
    let e_n = t.column("E_N").unwrap()[0];
    // Renormalized truncation to n ≤ cutoff keeps Schmidt weights λⁿ with λ = tanh r.
    let lambda = 0.5_f64.tanh();
    let amplitude_sum: f64 = (0..=16).map(|n| lambda.powi(n)).sum();
    let weight_sum: f64 = (0..=16).map(|n| lambda.powi(2 * n)).sum();
    let truncated = (amplitude_sum * amplitude_sum / weight_sum).log2();
    assert!((e_n - truncated).abs() < 1e-12, "E_N = {e_n}, expected {truncated}");
    assert!((e_n - 2.0 * 0.5 / LN_2).abs() < 1e-5);
}

#[test]
fn malformed_inputs_name_the_offending_key() {
    let err = parse_config::<CavityIdealConfig>("gtau_max = 1.0\npionts = 3\n").unwrap_err();
    assert!(matches!(&err, CliError::Config(m) if m.contains("pionts")), "{err}");
    let path = scratch("bad.json");
    fs::write(&path, r#"{"n_modes":2,"cutoff":1,"entries":[],"extra":1}"#).unwrap();
    let err = load_state(&path).unwrap_err();
    assert!(matches!(&err, CliError::Config(m) if m.contains("extra")), "{err}");
    let both = StateConfig { action: StateAction::Measure, cutoff: None, state: Some(schmidt(&[1.0])), file: Some(path) };
    assert!(matches!(cmd_state(&both), Err(CliError::Config(_))));
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let text = fs::read_to_string(&path).unwrap();
        let ok = if name.starts_with("cavity_ideal") {
            parse_config::<CavityIdealConfig>(&text).is_ok()
        } else if name.starts_with("cavity_") {
            parse_config::<CavityPathConfig>(&text).is_ok()
        } else if name.starts_with("mc_") {
            parse_config::<McConfig>(&text).map(|c| c.run.validate().is_ok()).unwrap_or(false)
        } else if name.starts_with("distill_") {
            parse_config::<DistillConfig>(&text).is_ok()
        } else if name.starts_with("wigner_") {
            parse_config::<WignerConfig>(&text).is_ok()
        } else if name.starts_with("state_") {
            parse_config::<StateConfig>(&text).is_ok()
        } else {
            panic!("unexpected config {name}");
        };
        assert!(ok, "{name} does not parse");
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn binary_headers_are_stable() {
    let cases: [(&str, Option<&str>, &str); 5] = [
        ("cavity-ideal", None, "gtau,F,P"),
        ("cavity-path", Some("cavity_epsilon.toml"), "epsilon,F,P"),
        ("distill", Some("distill_pure.toml"), "value,iteration,E_N,S_vN,P,distance_to_limit,cutoff,truncated_weight"),
        ("wigner", Some("wigner_procrustean.toml"), "X,P,W"),
        ("state", Some("state_tmss.toml"), "n_modes,cutoff,trace,purity,E_N,S_vN,S_vN_reduced"),
    ];
    for (cmd, config, header) in cases {
        let config_path = config.map(|c| configs_dir().join(c).to_str().unwrap().to_string());
        let mut args = vec![cmd];
        if let Some(p) = &config_path {
            args.extend(["--config", p]);
        }
        let out = entsim(&args);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next().unwrap(), header, "{cmd}");
    }
}

#[test]
fn binary_json_output_and_out_file() {
    let out_path = scratch("ideal.json");
    let out = entsim(&["cavity-ideal", "--format", "json", "--out", out_path.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["columns"][1], "F");
    // 17 significant digits: mantissa with 16 decimals.
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("9.9999999937497908e-1"));
}

#[test]
fn binary_threads_from_environment() {
    let out = Process::new(env!("CARGO_BIN_EXE_entsim")).args(["cavity-ideal"]).env(THREADS_ENV, "3").output().unwrap();
    assert!(out.status.success());
    let bad = Process::new(env!("CARGO_BIN_EXE_entsim")).args(["cavity-ideal"]).env(THREADS_ENV, "0").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn binary_exit_codes() {
    let bad_key = scratch("bad.toml");
    fs::write(&bad_key, "gtau_max = 1.0\nbogus = 1\n").unwrap();
    let out = entsim(&["cavity-ideal", "--config", bad_key.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    assert_eq!(entsim(&["distill"]).status.code(), Some(2));
    assert_eq!(entsim(&["cavity-ideal", "--format", "xml"]).status.code(), Some(2));

    // A state far too wide for its cutoff budget is a numerical-validity failure.
    let wide = scratch("wide.toml");
    fs::write(
        &wide,
        "[input]\nkind = \"schmidt\"\nalphas = [1.0, 0.95, 0.9, 0.85]\n[protocol]\niterations = 2\ncutoff = 3\nmax_cutoff = 3\ntruncation_bound = 1e-12\n",
    )
    .unwrap();
    let out = entsim(&["distill", "--config", wide.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn binary_seed_flag_overrides_config() {
    let config = scratch("mc.toml");
    fs::write(
        &config,
        "[run]\ndt = 0.1\nt_wait = 200.0\nn_traj = 200\nseed = 1\n[run.params]\nomega = 2.0\ndelta = 20.0\nkappa = 10.0\ngamma_a = 0.1\ngamma_b = 0.1\n",
    )
    .unwrap();
    let c = config.to_str().unwrap();
    let run = |seed: &str| entsim(&["mc", "--config", c, "--seed", seed]).stdout;
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}
