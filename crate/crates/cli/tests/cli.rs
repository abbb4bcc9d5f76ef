use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn entmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entmon")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_ok(cmd: &str, config: &str, out: &Path) -> String {
    let o = entmon(&[cmd, "--config", config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

/// Parsed CSV: header and numeric rows.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn esd_time(dir: &Path) -> Option<f64> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    v["esd_time"].as_f64()
}

#[test]
fn master_reports_death_times() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "local.toml",
        "[model]\npreset = \"local_diffusive\"\ninitial = \"psi_esd\"\n[run]\nt_final = 2.0\ndt = 0.001\nrecord_every = 100\n",
    );
    let stdout = run_ok("master", &cfg, &tmp.path().join("a"));
    assert!(stdout.contains("sudden death"));
    let td = esd_time(&tmp.path().join("a")).unwrap();
    assert!((td + (2f64.sqrt() - 1.0).ln()).abs() < 1e-4, "{td}");

    let cfg = write_config(
        tmp.path(),
        "swap.toml",
        "[model]\npreset = \"swap_witness\"\ninitial = \"bell1\"\n[model.params]\nnu = 2.0\n[run]\nt_final = 1.0\ndt = 0.001\nrecord_every = 100\n",
    );
    run_ok("master", &cfg, &tmp.path().join("b"));
    let td = esd_time(&tmp.path().join("b")).unwrap();
    assert!((td - 3f64.ln() / 2.0).abs() < 1e-4, "{td}");

    let cfg = write_config(
        tmp.path(),
        "sep.toml",
        "[model]\npreset = \"swap_witness\"\ninitial = \"u1\"\n[run]\nt_final = 1.0\ndt = 0.01\n",
    );
    run_ok("master", &cfg, &tmp.path().join("c"));
    assert_eq!(esd_time(&tmp.path().join("c")), None);
    let (header, rows) = read_csv(&tmp.path().join("c/master.csv"));
    assert_eq!(header[0], "t");
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r[column(&header, "concurrence")] == 0.0));
}

#[test]
fn local_jump_concurrence_column_is_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        // C = 2·√0.9·√0.1 = 0.6
        "[model]\npreset = \"local_jump\"\ninitial = [[0.9486832980505138, 0.0], [0.0, 0.0], [0.0, 0.0], [0.31622776601683794, 0.0]]\n\
         [model.params]\nomega0 = 1.0\n[run]\nt_final = 1.0\ndt = 0.001\nn_traj = 20\nrecord_every = 100\n",
    );
    run_ok("simulate", &cfg, tmp.path());
    let (header, rows) = read_csv(&tmp.path().join("estimates.csv"));
    let k = column(&header, "concurrence");
    for r in &rows {
        assert!((r[k] - 0.6).abs() < 1e-9, "{}", r[k]);
    }
}

#[test]
fn swap_witness_mean_matches_formula() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[model]\npreset = \"swap_witness\"\ninitial = [[0.9486832980505138, 0.0], [0.0, 0.0], [0.0, 0.0], [0.31622776601683794, 0.0]]\n\
         [run]\nt_final = 2.0\ndt = 0.01\nn_traj = 400\nseed = 11\nmode = \"P\"\nrecord_every = 20\n",
    );
    run_ok("simulate", &cfg, tmp.path());
    let (header, rows) = read_csv(&tmp.path().join("estimates.csv"));
    let (k, s) = (column(&header, "concurrence"), column(&header, "concurrence_se"));
    for r in &rows {
        let expected = 1.0 - 0.4 * (-r[0]).exp();
        assert!((r[k] - expected).abs() <= 3.0 * r[s] + 1e-12, "t = {}: {} vs {expected} ± {}", r[0], r[k], r[s]);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let body = "[model]\npreset = \"local_diffusive\"\n[model.params]\nphi1 = 0.4\n[run]\nt_final = 0.5\ndt = 0.01\nn_traj = 1\nseed = 5\nobservables = [\"state\", \"concurrence\"]\n";
    let cfg = write_config(tmp.path(), "c.toml", body);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = entmon(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap(), "--traj-dump"]);
        assert!(o.status.success());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a.join("estimates.csv")), read(&b.join("estimates.csv")));
    assert_eq!(read(&a.join("trajectories/traj_00000.csv")), read(&b.join("trajectories/traj_00000.csv")));
    // --seed overrides the file.
    let c = tmp.path().join("c");
    let o = entmon(&["simulate", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"]);
    assert!(o.status.success());
    assert_ne!(read(&a.join("estimates.csv")), read(&c.join("estimates.csv")));
}

#[test]
fn exported_model_reproduces_the_preset_run() {
    let tmp = TempDir::new().unwrap();
    let preset_cfg = write_config(
        tmp.path(),
        "p.toml",
        "[model]\npreset = \"gammadelta\"\n[model.params]\nvariant = 2.0\n[run]\nt_final = 0.5\ndt = 0.01\nn_traj = 8\nobservables = [\"state\", \"counts\"]\n",
    );
    run_ok("export-model", &preset_cfg, tmp.path());
    run_ok("simulate", &preset_cfg, &tmp.path().join("a"));
    let file_cfg = write_config(
        tmp.path(),
        "f.toml",
        "[model]\nfile = \"model.toml\"\n[run]\nt_final = 0.5\ndt = 0.01\nn_traj = 8\nobservables = [\"state\", \"counts\"]\n",
    );
    run_ok("simulate", &file_cfg, &tmp.path().join("b"));
    let a = std::fs::read(tmp.path().join("a/estimates.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/estimates.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "l.toml",
        "[model]\npreset = \"local_diffusive\"\ninitial = \"bell0\"\n[model.params]\nphi1 = 0.5\n[run]\nt_final = 1.0\ndt = 0.01\nrecord_every = 10\n",
    );
    run_ok("oracle", &cfg, &tmp.path().join("l"));
    let (header, rows) = read_csv(&tmp.path().join("l/oracle.csv"));
    let k = column(&header, "mean_concurrence");
    let c = 0.5f64.cos().powi(2) + 1.0;
    for r in &rows {
        assert!((r[k] - (-c * r[0]).exp()).abs() < 1e-14);
    }

    let cfg = write_config(
        tmp.path(),
        "n.toml",
        "[model]\npreset = \"nonlocal_diffusive\"\ninitial = \"u1\"\n[model.params]\ntheta = 0.7853981633974483\n[run]\nt_final = 1.0\ndt = 0.01\nrecord_every = 10\n",
    );
    run_ok("oracle", &cfg, &tmp.path().join("n"));
    let (header, rows) = read_csv(&tmp.path().join("n/oracle.csv"));
    let k = column(&header, "abs_chi");
    for r in &rows {
        // |11⟩: χ0 = 0, 𝒟0 = 1, γ± = 1 ± i, so |χ| = e^{−t}|sin t|.
        assert!((r[k] - (-r[0]).exp() * r[0].sin().abs()).abs() < 1e-14);
    }

    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[model]\npreset = \"swap_witness\"\ninitial = \"bell2\"\n[run]\nt_final = 1.0\ndt = 0.01\n",
    );
    run_ok("oracle", &cfg, &tmp.path().join("s"));
    let (header, _) = read_csv(&tmp.path().join("s/oracle.csv"));
    column(&header, "mean_concurrence");
    column(&header, "apriori_concurrence");

    let cfg = write_config(
        tmp.path(),
        "x.toml",
        "[model]\npreset = \"nonlocal_diffusive\"\n[model.params]\nomega0 = 1.0\n[run]\nt_final = 1.0\ndt = 0.01\n",
    );
    let o = entmon(&["oracle", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("no oracle") && msg.contains("swap_witness"), "{msg}");
}

#[test]
fn sweep_writes_one_file_per_point() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[model]\npreset = \"local_diffusive\"\n[run]\nt_final = 0.2\ndt = 0.01\nn_traj = 4\nseed = 100\n[sweep]\nparam = \"gamma\"\nvalues = [0.5, 1.0, 2.0]\n",
    );
    run_ok("sweep", &cfg, tmp.path());
    for i in 0..3 {
        assert!(tmp.path().join(format!("sweep_{i:03}.csv")).exists());
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v["points"][2]["seed"], 102);
    assert_eq!(v["points"][1]["value"], 1.0);
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("t_final = 0.0\ndt = 0.01", "t_final must be positive"),
        ("t_final = 1.0\ndt = -0.01", "dt must be positive"),
        ("t_final = 1.0\ndt = 0.01\nn_traj = 0", "n_traj must be at least 1"),
        ("t_final = 1.0\ndt = 0.3", "not a multiple"),
        ("t_final = 1.0\ndt = 0.01\nmode = \"R\"", "mode"),
        ("t_final = 1.0\ndt = 0.01\nobservables = [\"purity\"]", "unknown observable"),
        ("t_final = 1.0\ndt = 0.01\nbogus = 1", "unknown field"),
    ];
    for (i, (run, expected)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.toml"), &format!("[model]\npreset = \"local_diffusive\"\n[run]\n{run}\n"));
        let o = entmon(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{run}");
        let msg = String::from_utf8_lossy(&o.stderr);
        assert!(msg.contains(expected), "{run}: {msg}");
    }
    // λ·dt ≥ 0.1 on the counting channels.
    let cfg = write_config(
        tmp.path(),
        "rate.toml",
        "[model]\npreset = \"local_jump\"\n[model.params]\ngamma = 20.0\n[run]\nt_final = 1.0\ndt = 0.01\n",
    );
    let o = entmon(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("λ·dt"));
    // Unknown preset parameter and missing file.
    let cfg = write_config(tmp.path(), "p.toml", "[model]\npreset = \"local_jump\"\n[model.params]\nnu = 1.0\n[run]\nt_final = 1.0\ndt = 0.01\n");
    assert_eq!(entmon(&["simulate", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(entmon(&["simulate", "--config", "/nonexistent/c.toml"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[model]\npreset = \"local_diffusive\"\n[run]\nt_final = 0.1\ndt = 0.01\n");
    let o = entmon(&["simulate", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
