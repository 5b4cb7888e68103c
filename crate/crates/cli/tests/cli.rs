use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spinsampler::interferometer::{reconstruct, InterferometerMesh};
use spinsampler::linalg::{max_abs_diff, ComplexMatrix, MatrixJson};
use spinsampler_cli::manifest::{manifest_path, RunManifest};

fn spinsampler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinsampler"))
        .args(args)
        .env_remove("SPINSAMPLER_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn spinsampler")
}

fn ok(args: &[&str]) -> Output {
    let out = spinsampler(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_identity(dir: &Path, m: usize) -> PathBuf {
    let p = dir.join("identity.json");
    fs::write(
        &p,
        MatrixJson::from_complex(&ComplexMatrix::identity(m, m)).to_json_string(),
    )
    .unwrap();
    p
}

fn error_report(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("JSON error report on stderr")
}

#[test]
fn dark_decay_writes_one_row_per_grid_point_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("decay.csv");
    ok(&[
        "dark-decay",
        "--m-list",
        "10,20,30",
        "--n-list",
        "2,3,4,5",
        "--samples",
        "200",
        "--seed",
        "7",
        "--out",
        path(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "M,N,samples,gamma_mc_mean,gamma_mc_stderr,gamma_analytic");
    assert_eq!(lines.len(), 13);
    assert!(lines[1].starts_with("10,2,200,"));
    assert!(lines[12].starts_with("30,5,200,"));

    let manifest = RunManifest::read(&manifest_path(&csv)).unwrap();
    assert_eq!(manifest.experiment, "dark-decay");
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.units, "gamma");
    assert_eq!(manifest.outputs.len(), 1);
    assert!(manifest.verify().is_empty());
}

#[test]
fn decompose_identity_reconstructs_identity() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_identity(dir.path(), 5);
    let out = dir.path().join("mesh.json");
    ok(&["decompose", "--in", path(&u), "--out", path(&out)]);
    let mesh: InterferometerMesh = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let back = reconstruct(&mesh).unwrap();
    assert!(max_abs_diff(back.as_matrix(), &ComplexMatrix::identity(5, 5)) <= 1e-12);
}

#[test]
fn adiabatic_bs_reports_a_fidelity() {
    let out = ok(&["adiabatic-bs", "--m", "8", "--n", "2", "--time", "100", "--eps", "10"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let f = v["fidelity"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f), "{f}");
    assert_eq!(v["units"], "delta");
    assert_eq!(v["M"], 8);
}

#[test]
fn mesh_eval_matches_decomposed_unitary() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.json");
    ok(&["haar", "--dim", "4", "--seed", "3", "--out", path(&u)]);
    let mesh = dir.path().join("mesh.json");
    ok(&["decompose", "--in", path(&u), "--out", path(&mesh)]);
    let back = ok(&["mesh-eval", "--mesh", path(&mesh), "--nu", "1"]);
    let a = MatrixJson::from_json_str(&fs::read_to_string(&u).unwrap())
        .unwrap()
        .to_complex()
        .unwrap();
    let b = MatrixJson::from_json_str(std::str::from_utf8(&back.stdout).unwrap())
        .unwrap()
        .to_complex()
        .unwrap();
    assert!(max_abs_diff(&a, &b) <= 1e-10);
}

#[test]
fn compile_couplings_recovers_j() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("j.json");
    fs::write(
        &j,
        r#"{"rows": 2, "cols": 2, "data": [[0.0, 0.0], [0.5, 0.0], [0.5, 0.0], [0.0, 0.0]]}"#,
    )
    .unwrap();
    let out = ok(&["compile-couplings", "--in", path(&j)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let delta = v["delta"].as_f64().unwrap();
    let u: MatrixJson = serde_json::from_value(v["unitary"].clone()).unwrap();
    let re = u.to_complex().unwrap().map(|z| z.re * delta);
    assert!((re[(0, 1)] - 0.5).abs() <= 1e-12 && re[(0, 0)].abs() <= 1e-12);
}

#[test]
fn evolve_from_config_file_with_state_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("evolve.toml");
    fs::write(
        &cfg,
        "experiment = \"evolve\"\nseed = 2\nout = \"traj.csv\"\n\n[evolve]\nports = 3\ninitial = [0, 2]\ntime = 1.0\ndt = 0.05\nintegrator = \"magnus4\"\ndump-state = true\n",
    )
    .unwrap();
    ok(&["run", "--config", path(&cfg)]);
    let traj = dir.path().join("traj.csv");
    let text = fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("t,n_in_0,n_in_1,n_in_2,n_out_0,n_out_1,n_out_2,norm\n"));
    assert_eq!(text.lines().count(), 22);
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((last[1..7].iter().sum::<f64>() - 2.0).abs() <= 1e-9);

    let manifest = RunManifest::read(&manifest_path(&traj)).unwrap();
    assert_eq!(manifest.outputs.len(), 2);
    assert!(manifest.outputs[1]
        .path
        .to_str()
        .unwrap()
        .ends_with("traj.csv.state.json"));
    assert!(manifest.verify().is_empty());
}

#[test]
fn open_evolution_keeps_unit_trace() {
    let out = ok(&[
        "evolve",
        "--dynamics",
        "open",
        "--ports",
        "2",
        "--initial",
        "0",
        "--time",
        "2",
        "--dt",
        "0.01",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,n_in_0,n_in_1,n_out_0,n_out_1,trace\n"));
    for line in text.lines().skip(1) {
        let trace: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((trace - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn effective_open_model_units() {
    let out = ok(&["effective", "--model", "open", "--ports", "3", "--gamma", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["units"], "gamma");
    assert_eq!(v["rates"]["rows"], 6);
}

#[test]
fn effective_resonator_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("res.toml");
    fs::write(
        &cfg,
        "experiment = \"effective\"\n\n[effective]\nmodel = \"resonator\"\nports = 2\ndelta = 1.0\nmodes = [{ omega = 0.5, g = 0.1 }, { omega = 1.5, g = 0.2 }]\n",
    )
    .unwrap();
    let out = ok(&["effective", "--config", path(&cfg)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let shift = 0.01 / 0.5 + 0.04 / -0.5;
    assert!((v["hamiltonian"]["delta_tilde"].as_f64().unwrap() - (1.0 + shift)).abs() <= 1e-12);
}

#[test]
fn spin_sampling_probabilities_are_bounded() {
    let out = ok(&["spin-sampling", "--m", "4", "--n", "2", "--seed", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let tvd = v["total_variation"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&tvd));
    assert_eq!(v["patterns"].as_array().unwrap().len(), 6);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    fs::write(
        &cfg,
        "experiment = \"haar\"\nseed = 1\n\n[haar]\ndim = 2\nkind = \"orthogonal\"\n",
    )
    .unwrap();
    let a = ok(&["haar", "--config", path(&cfg), "--dim", "3"]);
    let m = MatrixJson::from_json_str(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(m.to_real().unwrap().nrows(), 3);
    let b = ok(&["haar", "--dim", "3", "--kind", "orthogonal", "--seed", "1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validate_reports_invalid_filling_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "experiment = \"dark-decay\"\n\n[dark-decay]\nm-list = [4]\nn-list = [5]\nsamples = 10\n",
    )
    .unwrap();
    let out = spinsampler(&["validate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = v["violations"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["field"], "dark-decay.n-list");
    assert!(list[0]["constraint"].as_str().unwrap().contains("invalid-filling"));
}

#[test]
fn validate_reports_negative_samples_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"dark-decay\"\n\n[dark-decay]\nsamples = -5\n").unwrap();
    let out = spinsampler(&["validate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = v["violations"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["field"], "dark-decay.samples");
}

#[test]
fn validate_accepts_a_well_formed_config() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_identity(dir.path(), 3);
    let cfg = dir.path().join("ok.toml");
    fs::write(
        &cfg,
        format!(
            "experiment = \"decompose\"\nout = \"mesh.json\"\n\n[decompose]\nin = \"{}\"\n",
            u.file_name().unwrap().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = spinsampler(&["validate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn missing_input_file_is_a_violation() {
    let out = spinsampler(&["decompose", "--in", "/nonexistent/u.json"]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "validation");
    assert_eq!(report["error"]["violations"][0]["field"], "decompose.in");
}

#[test]
fn unreadable_config_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.toml");
    fs::write(&cfg, "experiment = \"haar\"\n\n[haar]\ndim = = 3\n").unwrap();
    let out = spinsampler(&["validate", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "config");
    assert_eq!(report["error"]["line"], 4);
    assert!(report["error"]["column"].as_u64().is_some());
}

#[test]
fn module_errors_exit_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("not_unitary.json");
    fs::write(
        &bad,
        r#"{"rows": 2, "cols": 2, "data": [[1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}"#,
    )
    .unwrap();
    let out = spinsampler(&["decompose", "--in", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "module");
    assert_eq!(report["error"]["context"], "decompose");
}

#[test]
fn tampered_output_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.json");
    ok(&["haar", "--dim", "3", "--out", path(&out)]);
    let manifest = RunManifest::read(&manifest_path(&out)).unwrap();
    assert!(manifest.verify().is_empty());
    fs::write(&out, "{}").unwrap();
    assert_eq!(manifest.verify(), vec![out.clone()]);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "4", "8"] {
        let out = dir.path().join(format!("decay-{threads}.csv"));
        ok(&[
            "dark-decay",
            "--m-list",
            "10,12",
            "--n-list",
            "2,3",
            "--samples",
            "40",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            path(&out),
        ]);
        files.push(fs::read(&out).unwrap());
        let manifest = RunManifest::read(&manifest_path(&out)).unwrap();
        assert_eq!(manifest.threads.to_string(), threads);
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn threads_default_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.json");
    let status = Command::new(env!("CARGO_BIN_EXE_spinsampler"))
        .args(["haar", "--dim", "2", "--out", path(&out)])
        .env("SPINSAMPLER_THREADS", "3")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(RunManifest::read(&manifest_path(&out)).unwrap().threads, 3);
}

const SUBCOMMANDS: &[&[&str]] = &[
    &[],
    &["haar"],
    &["decompose"],
    &["mesh-eval"],
    &["compile-couplings"],
    &["effective"],
    &["evolve"],
    &["dark-decay"],
    &["adiabatic-bs"],
    &["spin-sampling"],
    &["run"],
    &["validate"],
    &["repro"],
    &["repro", "fig2"],
];

/// Help texts are compared against `tests/snapshots/help-*.txt`. Set
/// `UPDATE_SNAPSHOTS=1` to rewrite them.
#[test]
fn help_snapshots() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots");
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    let mut stale = Vec::new();
    for cmd in SUBCOMMANDS {
        let mut args = cmd.to_vec();
        args.push("--help");
        let text = String::from_utf8(ok(&args).stdout).unwrap();
        let name = if cmd.is_empty() {
            "spinsampler".to_owned()
        } else {
            cmd.join("-")
        };
        let file = dir.join(format!("help-{name}.txt"));
        if update {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&file, &text).unwrap();
        } else if fs::read_to_string(&file).ok().as_deref() != Some(text.as_str()) {
            stale.push(name);
        }
    }
    assert!(
        stale.is_empty(),
        "help output changed for {stale:?}; rerun with UPDATE_SNAPSHOTS=1"
    );
}

#[test]
fn help_lists_documented_flags() {
    let expect: &[(&str, &[&str])] = &[
        ("haar", &["--dim", "--kind", "--seed", "--out"]),
        ("decompose", &["--in", "--out"]),
        ("mesh-eval", &["--mesh", "--nu"]),
        ("compile-couplings", &["--in", "--out"]),
        ("effective", &["--config"]),
        ("evolve", &["--config", "--out"]),
        (
            "dark-decay",
            &[
                "--m-list",
                "--n-list",
                "--samples",
                "--seed",
                "--threads",
                "--out",
                "--large",
                "--channel-agg",
            ],
        ),
        (
            "adiabatic-bs",
            &["--m", "--n", "--time", "--eps", "--schedule", "--out"],
        ),
        ("spin-sampling", &["--m", "--n", "--time", "--seed", "--out"]),
    ];
    for (cmd, flags) in expect {
        let text = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for flag in *flags {
            assert!(
                text.contains(&format!("{flag} ")) || text.contains(&format!("{flag}\n")),
                "{cmd} lacks {flag}"
            );
        }
        assert!(text.contains("SPINSAMPLER_THREADS"), "{cmd}");
    }
}
