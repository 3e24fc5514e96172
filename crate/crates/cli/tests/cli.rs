use idstat_cli::config::{load_config, ConfigError};
use idstat_cli::run;
use std::io::Write;
use std::process::Command;

fn call(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("idstat").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.take_while(|l| !l.is_empty()).map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn bose_count_of_two_in_three() {
    let (code, out, _) = call(&["count", "--n", "2", "--g", "3", "--stat", "bose"]);
    assert_eq!(code, 0);
    assert_eq!(column(&out, "count"), ["6"]);
}

#[test]
fn pauli_violation_is_a_domain_error() {
    let (code, out, err) = call(&["count", "--n", "3", "--g", "2", "--stat", "fermi"]);
    assert_eq!(code, 3);
    assert!(out.is_empty());
    let line = err.trim_end();
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("error: pauli-violation: "), "{line}");
    assert!(line.contains("Pauli violation"));
}

#[test]
fn count_with_oracle_and_entropy() {
    let (code, out, _) = call(&["count", "--n", "4", "--g", "5", "--stat", "bose", "--oracle", "--entropy"]);
    assert_eq!(code, 0);
    assert_eq!(column(&out, "count"), ["70"]);
    assert_eq!(column(&out, "oracle"), ["70"]);
    let s: f64 = column(&out, "entropy")[0].parse().unwrap();
    assert!((s - 70f64.ln()).abs() < 1e-12);
    let (code, _, err) = call(&["count", "--n", "20", "--g", "20", "--stat", "bose", "--oracle"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error: too-large: "));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(call(&["count", "--n", "x", "--g", "1", "--stat", "bose"]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&[]).0, 2);
    assert_eq!(call(&["--help"]).0, 0);
}

#[test]
fn selftest_passes() {
    let (code, out, _) = call(&["selftest"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().skip(1).all(|l| l.ends_with(",pass")), "{out}");
}

#[test]
fn exchange_phase_sign_follows_spin() {
    for (spin, sign) in [("0", 1), ("1/2", -1), ("1", 1), ("3/2", -1), ("2", 1), ("5/2", -1)] {
        let (code, out, _) =
            call(&["exchange-phase", "--spin", spin, "--chi-a", "0.4", "--chi-b", "-2.5", "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["sign"], sign);
        assert!((v["factor"][0].as_f64().unwrap() - sign as f64).abs() < 1e-12);
        assert!(v["factor"][1].as_f64().unwrap().abs() < 1e-12);
    }
    let (code, _, err) = call(&["exchange-phase", "--spin", "1/2", "--chi-a", "1", "--chi-b", "1"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error: degenerate-angles: "));
    assert_eq!(call(&["exchange-phase", "--spin", "1/3", "--chi-a", "0", "--chi-b", "1"]).0, 3);
    assert_eq!(call(&["exchange-phase", "--spin", "1", "--m", "1/2", "--chi-a", "0", "--chi-b", "1"]).0, 3);
}

#[test]
fn evolve_emits_normalised_density() {
    let (code, out, _) = call(&["evolve", "--k0", "1", "--t", "0,2", "--points", "801"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next(), Some("t,x,re,im,density"));
    let rows: Vec<[f64; 5]> = out
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect();
    assert_eq!(rows.len(), 2 * 801);
    for t in [0.0, 2.0] {
        let sel: Vec<&[f64; 5]> = rows.iter().filter(|r| r[0] == t).collect();
        let dx = sel[1][1] - sel[0][1];
        let total: f64 = sel.iter().map(|r| r[4]).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-6, "t = {t}: {total}");
        for r in &sel {
            assert!((r[2] * r[2] + r[3] * r[3] - r[4]).abs() < 1e-12);
        }
    }
}

#[test]
fn symmetrize_round_trips_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    std::fs::write(&path, r#"{"n": 2, "terms": [{"coeff": [1, 0], "modes": ["phi", "eta"]}]}"#).unwrap();
    let (code, out, _) = call(&["symmetrize", "--input", path.to_str().unwrap(), "--anti"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["terms"].as_array().unwrap().len(), 2);
    std::fs::write(&path, &out).unwrap();
    let (code, again, _) = call(&["symmetrize", "--input", path.to_str().unwrap(), "--anti"]);
    assert_eq!(code, 0);
    assert_eq!(again, out);

    std::fs::write(&path, r#"{"n": 2, "terms": [{"coeff": [1, 0], "modes": ["a", "a"]}]}"#).unwrap();
    let (_, out, _) = call(&["symmetrize", "--input", path.to_str().unwrap(), "--anti"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["terms"].as_array().unwrap().is_empty());

    std::fs::write(&path, "{\"n\": 2,\n \"terms\": [}").unwrap();
    let (code, _, err) = call(&["symmetrize", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn distribute_routes_agree() {
    let base = ["distribute", "--stat", "fermi", "--T", "1", "--N", "20", "--pmax", "8", "--bins", "32"];
    let (code, closed, _) = call(&base);
    assert_eq!(code, 0);
    assert_eq!(closed.lines().next(), Some("p,eps,g_p,occupancy"));
    let mut maxent_args = base.to_vec();
    maxent_args.extend(["--via", "maxent"]);
    let (code, maxent, _) = call(&maxent_args);
    assert_eq!(code, 0);
    let a = column(&closed, "occupancy");
    let b = column(&maxent, "occupancy");
    let total: f64 = a.iter().map(|x| x.parse::<f64>().unwrap()).sum();
    assert!((total - 20.0).abs() < 1e-8);
    for (x, y) in a.iter().zip(&b) {
        let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12));
    }
}

#[test]
fn saturation_exits_three() {
    let (code, _, err) = call(&["distribute", "--stat", "bose", "--T", "0.1", "--N", "1e9", "--pmax", "8", "--bins", "8"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error: saturation-exceeded: "), "{err}");
}

#[test]
fn balance_converges_and_conserves() {
    let args = ["balance", "--bins", "4", "--smax", "32", "--beta", "1.5", "--mu", "-0.2", "--seed", "3"];
    let (code, out, err) = call(&args);
    assert_eq!(code, 0, "{err}");
    let mut tables = out.split("\n\n");
    let history = tables.next().unwrap();
    let finals = tables.next().unwrap();
    assert!(history.starts_with("sweep,max_residual,entropy,total_quanta\n"));
    assert!(finals.starts_with("kind,eps,s,p\n"));
    let residual: Vec<f64> = column(history, "max_residual").iter().map(|x| x.parse().unwrap()).collect();
    assert!(*residual.last().unwrap() <= 1e-10);
    let entropy: Vec<f64> = column(history, "entropy").iter().map(|x| x.parse().unwrap()).collect();
    assert!(entropy.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let quanta: Vec<f64> = column(history, "total_quanta").iter().map(|x| x.parse().unwrap()).collect();
    assert!(quanta.iter().all(|q| (q - quanta[0]).abs() <= 1e-9 * quanta[0]));
    assert_eq!(finals.lines().count(), 1 + 2 * 4 * 33);
}

#[test]
fn balance_reports_non_convergence() {
    let (code, out, err) =
        call(&["balance", "--bins", "4", "--smax", "32", "--beta", "1.5", "--mu", "-0.2", "--steps", "3"]);
    assert_eq!(code, 4);
    assert!(err.starts_with("error: no-convergence: "), "{err}");
    assert_eq!(column(&out, "sweep").len(), 4);
}

#[test]
fn output_is_deterministic() {
    let args = ["balance", "--bins", "3", "--smax", "24", "--beta", "2", "--mu", "0.1", "--seed", "11"];
    assert_eq!(call(&args), call(&args));
    let (_, other, _) = call(&["balance", "--bins", "3", "--smax", "24", "--beta", "2", "--mu", "0.1", "--seed", "12"]);
    assert_ne!(call(&args).1, other);
}

#[test]
fn config_file_sets_units_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("units.json");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{{\"k_boltzmann\": 2, \"output_format\": \"json\"}}").unwrap();
    let (code, out, _) = call(&["--config", path.to_str().unwrap(), "count", "--n", "2", "--g", "3", "--stat", "bose", "--entropy"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["entropy"].as_f64().unwrap() - 2.0 * 6f64.ln()).abs() < 1e-12);
    // The flag wins over the file.
    let (_, out, _) =
        call(&["--config", path.to_str().unwrap(), "--format", "csv", "count", "--n", "2", "--g", "3", "--stat", "bose"]);
    assert!(out.starts_with("stat,n,g,count"));

    std::fs::write(&path, "{\n\"hbar\": -1}").unwrap();
    match load_config(&path) {
        Err(ConfigError::Parse(p)) => assert_eq!(p.line, 2),
        other => panic!("unexpected {other:?}"),
    }
    let (code, _, err) = call(&["--config", path.to_str().unwrap(), "selftest"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error: config-parse: line 2"), "{err}");
    assert!(matches!(load_config(dir.path().join("missing.json")), Err(ConfigError::Io { .. })));
}

#[test]
fn seed_environment_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed.json");
    std::fs::write(&path, r#"{"seed": 5}"#).unwrap();
    let bin = env!("CARGO_BIN_EXE_idstat");
    let go = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(bin);
        cmd.args(["--config", path.to_str().unwrap(), "balance", "--bins", "3", "--smax", "24", "--beta", "2"]);
        cmd.args(extra);
        cmd.env_remove("IDSTAT_SEED");
        if let Some(v) = env {
            cmd.env("IDSTAT_SEED", v);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let from_config = go(None, &[]);
    assert_eq!(from_config, go(None, &["--seed", "5"]));
    let from_env = go(Some("9"), &[]);
    assert_eq!(from_env, go(None, &["--seed", "9"]));
    assert_ne!(from_env, from_config);
    assert_eq!(from_env, go(Some("9"), &[]));
}
