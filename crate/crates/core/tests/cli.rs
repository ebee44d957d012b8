use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FAST: &str = "[mesh]\nn_elements = 32\n";

fn rtspec(config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rtspec"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).env_remove("RTSPEC_THREADS").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn table_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn dispersion_single_k_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FAST);
    let out = dir.path().join("d.csv");
    let o = rtspec(
        Some(&cfg),
        &["dispersion", "--k-min", "1", "--k-max", "1", "--n-k", "1", "--n-max", "3", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows = table_lines(&text);
    assert_eq!(rows[0], "k,n,lambda_n,residual,iterations,converged");
    assert_eq!(rows.len(), 4);
    for (i, row) in rows[1..].iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 6);
        assert_eq!(f[0], "1.0000000000000000e0");
        assert_eq!(f[1], (i + 1).to_string());
        assert_eq!(f[5], "true");
    }
    // resolved configuration is echoed, defaults included
    assert!(text.contains("# n_elements = 32"));
    assert!(text.contains("# tol_rel = 0.0000000001"));
}

#[test]
fn dispersion_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FAST);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_rtspec"))
            .arg("--config")
            .arg(&cfg)
            .args(["dispersion", "--k-min", "0.5", "--k-max", "4", "--n-k", "4", "--n-max", "2", "--out"])
            .arg(&out)
            .env("RTSPEC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn dispersion_rejects_bad_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = rtspec(None, &["dispersion", "--k-min", "2", "--k-max", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k_max"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solver]\ntol_rell = 1e-8\n");
    let o = rtspec(Some(&cfg), &["lambda-max"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.tol_rell"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mesh]\nn_elements = 1\n");
    let o = rtspec(Some(&cfg), &["verify", "--suite", "appendixD"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mesh.n_elements"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_rtspec"))
        .args(["verify", "--suite", "appendixD"])
        .env("RTSPEC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RTSPEC_THREADS"));
}

#[test]
fn lambda_max_single_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{FAST}[lattice]\nKmax = 1.0\n"));
    let csv = dir.path().join("lm.csv");
    let o = rtspec(Some(&cfg), &["lambda-max", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("magnitudes = 1"));
    assert!(text.contains("argmax |k| = 1.0000000000000000e0"));
    assert!(text.contains("sqrt(g/L0) = "));
    assert!(text.contains("Lambda <= sqrt(g/L0): true"));
    let table = fs::read_to_string(&csv).unwrap();
    let rows = table_lines(&table);
    assert_eq!(rows[0], "k,k1,k2,lambda_1,residual,iterations,converged");
    assert_eq!(rows.len(), 2);
    let again = rtspec(Some(&cfg), &["lambda-max"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn lambda_max_empty_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[lattice]\nKmax = 0.5\n");
    let o = rtspec(Some(&cfg), &["lambda-max"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lattice.Kmax"));
}

#[test]
fn mode_file_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{FAST}[modes]\nsamples = 16\n"));
    let out = dir.path().join("m.csv");
    let o = rtspec(Some(&cfg), &["mode", "--k1", "1", "--k2", "-1", "--n", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows = table_lines(&text);
    assert_eq!(rows[0], "k1,k2,n,lambda,A1,A2,tau_minus,nu");
    assert_eq!(rows[2], "x3,phi,dphi,psi,varphi,pi,omega");
    assert_eq!(rows.len(), 3 + 16);
    assert!(text.contains("# command: mode k1=1 k2=-1 n=1"));
}

#[test]
fn mode_rejects_zero_wavenumber() {
    let o = rtspec(None, &["mode", "--k1", "0", "--k2", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zero wavenumber excluded"));
}

#[test]
fn mode_off_lattice_suggests_nearest() {
    let o = rtspec(None, &["mode", "--k1", "1.4", "--k2", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nearest lattice point is (1, 0)"), "{}", stderr(&o));
}

#[test]
fn mode_without_unstable_branch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[profile]\nkind = \"uniform\"\nrho_minus = 1.0\nrho_plus = 1.0\n");
    let out = dir.path().join("m.csv");
    let o = rtspec(Some(&cfg), &["mode", "--k1", "1", "--k2", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn verify_appendix_d_passes() {
    let o = rtspec(None, &["verify", "--suite", "appendixD"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("appendixD[")).count() == 3);
    assert!(text.lines().filter(|l| l.starts_with("coercivity[")).count() == 3);
    assert!(text.contains("6 checks, 0 failed"));
}

#[test]
fn verify_unknown_suite() {
    let o = rtspec(None, &["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("suite"));
}

#[test]
fn verify_tampered_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\ntolerance = 1e-20\n");
    let o = rtspec(Some(&cfg), &["verify", "--suite", "appendixD"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}
