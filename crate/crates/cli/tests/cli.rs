use std::path::Path;
use std::process::{Command, Output};

use bciphs_cli::config::parse_str;

const HEAT: &str = "[model]\nname = \"heat_conduction\"\n[grid]\nn = 41\n[time]\nt_end = 0.02\n[signal]\nkind = \"closed\"\n";

fn bciphs(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bciphs"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .env_remove("BCIPHS_OUT_DIR")
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Column `name` of a CSV file as floats.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn closed_heat_run_is_byte_identical_and_entropy_grows() {
    let tmp = tempfile::tempdir().unwrap();
    let first = bciphs(tmp.path(), HEAT, &["run", "--out", "one"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let second = bciphs(tmp.path(), HEAT, &["run", "--out", "two"]);
    assert_eq!(second.status.code(), Some(0));
    for f in ["report.csv", "trajectory.csv"] {
        let a = std::fs::read(tmp.path().join("one").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("two").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let s = column(&tmp.path().join("one/report.csv"), "S");
    assert!(s.len() > 10);
    assert!(
        s.windows(2).all(|w| w[1] >= w[0]),
        "S column is not monotone"
    );
}

#[test]
fn report_header_and_trajectory_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bciphs(tmp.path(), HEAT, &["run", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let rep = std::fs::read_to_string(tmp.path().join("o/report.csv")).unwrap();
    assert!(rep.starts_with(
        "t,H,S,power,sigma_total,entropy_flux,energy_residual,entropy_residual,sigma_min,dH_dt,dS_dt\n"
    ));
    let traj = std::fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,z,s,T"));
    let reports = rep.lines().count() - 1;
    assert_eq!(lines.count(), reports * 41);
}

#[test]
fn validate_prints_the_fluid_port_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bciphs(
        tmp.path(),
        "[model]\nname = \"p_system_viscous\"\n",
        &["validate"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(
        out.contains("M_p =\n    [0.0, 1.0, 0.0, 0.0, 0.0]\n    [1.0, 0.0, 0.0, 1.0, 0.0]\n"),
        "{out}"
    );
    assert!(
        out.contains("P_ep =\n    [0.0, 1.0]\n    [1.0, 0.0]\n"),
        "{out}"
    );
    assert!(out.contains("validation: clean"));
}

#[test]
fn validate_describes_heat_ports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bciphs(tmp.path(), HEAT, &["validate"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(
        out.contains("input entropy flux") && out.contains("output temperature at b"),
        "{out}"
    );
}

#[test]
fn asymmetric_p1_fails_validation_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nname = \"p_system_reversible\"\n[model.structure]\np1 = [[0.0, 1.0], [0.5, 0.0]]\n";
    let o = bciphs(tmp.path(), cfg, &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("P1 symmetry"), "{}", stdout(&o));
    let r = bciphs(tmp.path(), cfg, &["run"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn step_above_the_stability_bound_aborts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nname = \"heat_conduction\"\n[time]\ndt = 1.0\nt_end = 2.0\n";
    let o = bciphs(tmp.path(), cfg, &["run"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("step rejected"), "{}", stderr(&o));
}

#[test]
fn leaving_the_admissible_region_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nname = \"diffusion_reaction_ab\"\n[model.params]\nl_a = 0.0\nl_b = 0.0\n\
               [grid]\nn = 11\n[time]\nt_end = 1.0\ndt = 1e-3\noutput_every = 10\n\
               [signal]\nkind = \"constant\"\nvalues = [5.0, 0.0, 0.0, -5.0, 0.0, 0.0]\n";
    let o = bciphs(tmp.path(), cfg, &["run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("aborted after"));
    let t = column(&tmp.path().join("out/report.csv"), "t");
    assert!(t.len() > 1 && *t.last().unwrap() < 1.0);
}

#[test]
fn tight_tolerance_names_the_failing_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bciphs(tmp.path(), HEAT, &["run", "--tol-scale", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("energy audit failed"), "{}", stderr(&o));
}

#[test]
fn signal_dimension_must_match_the_ports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nname = \"heat_conduction\"\n[signal]\nkind = \"constant\"\nvalues = [1.0, 2.0, 3.0]\n";
    let o = bciphs(tmp.path(), cfg, &["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`signal.values`"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_bciphs"))
        .args(["run", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reaction_overrides_round_trip() {
    let text =
        "[model]\nname = \"diffusion_reaction_ab\"\n[model.params]\nl_a = 2e-3\n[grid]\nn = 31\n";
    let cfg = parse_str(text).unwrap();
    let again = parse_str(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    let m = again.build_model().unwrap();
    assert_eq!(m.params["l_a"], 2e-3);
    let defaults = bciphs::models::default_params("diffusion_reaction_ab").unwrap();
    let l_b = defaults.iter().find(|(k, _)| *k == "l_b").unwrap().1;
    assert_eq!(m.params["l_b"], l_b);
}

#[test]
fn viscous_forced_run_tracks_the_supplied_power() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nname = \"p_system_viscous\"\n[grid]\nn = 41\n[time]\nt_end = 0.5\noutput_every = 1\n\
               [signal]\nkind = \"table\"\ntimes = [0.0, 0.5]\nvalues = [[0.0, 0.0], [0.02, -0.01]]\n";
    let o = bciphs(tmp.path(), cfg, &["run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("energy audit: PASS"));
    let rep = tmp.path().join("out/report.csv");
    let (dh, p) = (column(&rep, "dH_dt"), column(&rep, "power"));
    let scale = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(scale > 0.0);
    let worst = dh
        .iter()
        .zip(&p)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(
        worst < 1e-2 * scale,
        "dH/dt misses y'v by {worst} (scale {scale})"
    );
}

#[test]
fn output_root_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    std::fs::write(&path, HEAT).unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_bciphs"))
            .arg("run")
            .arg("--config")
            .arg(&path)
            .args(extra)
            .env("BCIPHS_OUT_DIR", "from_env")
            .current_dir(tmp.path())
            .output()
            .unwrap()
    };
    assert_eq!(run(&[]).status.code(), Some(0));
    assert!(tmp.path().join("from_env/report.csv").exists());
    assert_eq!(run(&["--out", "from_flag"]).status.code(), Some(0));
    assert!(tmp.path().join("from_flag/report.csv").exists());
    std::fs::write(&path, format!("{HEAT}[output]\ndir = \"from_file\"\n")).unwrap();
    assert_eq!(run(&[]).status.code(), Some(0));
    assert!(tmp.path().join("from_file/report.csv").exists());
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{HEAT}[sweep]\nkey = \"params.lambda\"\nvalues = [0.5, 1.0, 2.0]\n");
    let o = bciphs(tmp.path(), &cfg, &["sweep", "--out", "sw"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for i in 0..3 {
        assert!(tmp
            .path()
            .join(format!("sw/sweep_{i:03}/report.csv"))
            .exists());
    }
    let out = stdout(&o);
    let first = out.find("sweep 000").unwrap();
    assert!(
        first < out.find("sweep 001").unwrap()
            && out.find("sweep 001").unwrap() < out.find("sweep 002").unwrap()
    );
}

#[test]
fn sweep_without_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bciphs(tmp.path(), HEAT, &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_models_needs_no_config() {
    let o = Command::new(env!("CARGO_BIN_EXE_bciphs"))
        .arg("list-models")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for name in bciphs::models::MODEL_NAMES {
        assert!(out.contains(name));
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            bciphs_cli::config::parse_config(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
