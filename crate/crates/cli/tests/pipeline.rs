use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
system = "builtin-2d"
n_traj = 1000
n_d = 2000
n_pi = 4000
epochs = 500
batch_size = 64
num_trajectories = 40
"#;

fn doskit(dir: &Path, config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doskit"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn full_pipeline_at_reduced_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "run.toml", SMALL);

    assert_ok(&doskit(&dir, &cfg, &["gen-data"]), "gen-data");
    let manifest = std::fs::read_to_string(dir.join("dataset.manifest")).unwrap();
    assert!(manifest.contains("\nn_d 2000\n") && manifest.contains("\nn_pi 4000\n"), "{manifest}");

    assert_ok(&doskit(&dir, &cfg, &["train"]), "train");
    let (header, rows) = read_csv(&dir.join("loss_history.csv"));
    assert_eq!(header, ["epoch", "L_d", "L_pi", "total"]);
    assert_eq!(rows.len(), 500);

    let ckpt = std::fs::read(dir.join("model.ckpt")).unwrap();
    let zero = write_config(tmp.path(), "zero.toml", &format!("{SMALL}\n").replace("epochs = 500", "epochs = 0"));
    let init = dir.join("model.ckpt");
    assert_ok(&doskit(&dir, &zero, &["train", "--init", init.to_str().unwrap()]), "train --init");
    assert_eq!(std::fs::read(dir.join("model.ckpt")).unwrap(), ckpt, "zero-epoch resume changed the checkpoint");

    assert_ok(&doskit(&dir, &cfg, &["certify"]), "certify");
    let cert = std::fs::read_to_string(dir.join("certificate.toml")).unwrap();
    assert!(cert.contains("omega2") && cert.contains("config_hash"));
    assert_ok(&doskit(&dir, &cfg, &["validate-cert"]), "validate-cert");

    assert_ok(&doskit(&dir, &cfg, &["estimate"]), "estimate");
    let (header, rows) = read_csv(&dir.join("dos_grid.csv"));
    assert_eq!(header, ["x1", "x2", "omega_value", "in_dos", "in_ellipsoid"]);
    assert_eq!(rows.len(), 201 * 201);
    let ell: Vec<_> = rows.iter().filter(|r| r[4] == "1").collect();
    let inside = ell.iter().filter(|r| r[3] == "1").count();
    assert!(!ell.is_empty() && inside * 100 >= 99 * ell.len(), "{inside}/{}", ell.len());

    assert_ok(&doskit(&dir, &cfg, &["simulate"]), "simulate");
    let first = std::fs::read(dir.join("trajectories.csv")).unwrap();
    let (header, rows) = read_csv(&dir.join("trajectories.csv"));
    assert_eq!(header, ["traj_id", "step", "norm2", "u_1", "branch", "violation"]);
    let ids: std::collections::BTreeSet<_> = rows.iter().map(|r| r[0].clone()).collect();
    assert_eq!(ids.len(), 40);
    for r in &rows {
        if !r[3].is_empty() {
            let u: f64 = r[3].parse().unwrap();
            assert!((-0.5..=0.5).contains(&u), "input {u} outside U");
        }
        assert_eq!(r[5], "0");
    }
    assert_ok(&doskit(&dir, &cfg, &["simulate"]), "simulate again");
    assert_eq!(std::fs::read(dir.join("trajectories.csv")).unwrap(), first, "simulation is not deterministic");

    let tampered = cert
        .lines()
        .map(|l| if l.starts_with("c1 ") { "c1 = 1000.0".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.join("certificate.toml"), tampered).unwrap();
    let out = doskit(&dir, &cfg, &["validate-cert"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c1"));
}

const TINY: &str = r#"
n_traj = 20
n_d = 50
n_pi = 60
n_s = 10
batch_size = 16
epochs = 2
"#;

#[test]
fn gen_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&doskit(&a, &cfg, &["gen-data"]), "gen-data a");
    assert_ok(&doskit(&b, &cfg, &["gen-data"]), "gen-data b");
    for f in ["dataset.bin", "dataset.manifest"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = tmp.path().join("c");
    assert_ok(&doskit(&c, &cfg, &["--seed", "5", "gen-data"]), "gen-data c");
    assert_ne!(std::fs::read(a.join("dataset.bin")).unwrap(), std::fs::read(c.join("dataset.bin")).unwrap());
}

#[test]
fn zero_data_points_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "n_d = 0\n");
    let out = doskit(&tmp.path().join("out"), &cfg, &["gen-data"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_d"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "n_dd = 10\n");
    let out = doskit(&tmp.path().join("out"), &cfg, &["gen-data"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mismatched_config_hash_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    assert_ok(&doskit(&dir, &cfg, &["gen-data"]), "gen-data");
    let other = write_config(tmp.path(), "other.toml", &TINY.replace("n_traj = 20", "n_traj = 21"));
    let out = doskit(&dir, &other, &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config hash"));
    let out = doskit(&dir, &cfg, &["--seed", "3", "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert_ok(&doskit(&dir, &cfg, &["train"]), "train with matching config");
}

#[test]
fn missing_artifact_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let out = doskit(&tmp.path().join("empty"), &cfg, &["certify"]);
    assert_eq!(out.status.code(), Some(2));
}
