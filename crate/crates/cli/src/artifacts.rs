//! On-disk artifacts. Each one records the config hash it was produced
//! under; loaders refuse a hash other than the expected one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use doskit::pinn::{load_checkpoint, save_checkpoint, CheckpointMeta, MlpModel, ValueDataset};
use doskit::synth::Certificate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DATASET_MANIFEST: &str = "dataset.manifest";
pub const DATASET_BIN: &str = "dataset.bin";
pub const CHECKPOINT: &str = "model.ckpt";
pub const HISTORY: &str = "loss_history.csv";
pub const CERTIFICATE: &str = "certificate.toml";
pub const DOS_GRID: &str = "dos_grid.csv";
pub const TRAJECTORIES: &str = "trajectories.csv";

const MANIFEST_MAGIC: &str = "doskit-dataset v1";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn check_hash(what: &str, path: &Path, found: &str, expected: &str) -> Result<(), CliError> {
    if found != expected {
        return Err(CliError::Config(format!(
            "{what} {} was produced under config hash {found}, current config hash is {expected}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub n_d: usize,
    pub n_pi: usize,
    pub bin_file: String,
    pub bin_sha256: String,
}

impl DatasetManifest {
    fn render(&self) -> String {
        format!(
            "{MANIFEST_MAGIC}\nconfig_hash {}\nseed {}\nn {}\nn_d {}\nn_pi {}\nbin_file {}\nbin_sha256 {}\n",
            self.config_hash, self.seed, self.n, self.n_d, self.n_pi, self.bin_file, self.bin_sha256
        )
    }

    fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Io(format!("dataset manifest: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_MAGIC) {
            return Err(bad("missing header line"));
        }
        let mut get = |key: &str| -> Result<String, CliError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("expected {key}, got {line:?}")))
        };
        let num = |s: String, key: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad {key}")));
        let config_hash = get("config_hash")?;
        let seed = get("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let n = num(get("n")?, "n")?;
        let n_d = num(get("n_d")?, "n_d")?;
        let n_pi = num(get("n_pi")?, "n_pi")?;
        let bin_file = get("bin_file")?;
        let bin_sha256 = get("bin_sha256")?;
        Ok(Self { config_hash, seed, n, n_d, n_pi, bin_file, bin_sha256 })
    }
}

pub fn write_dataset(dir: &Path, ds: &ValueDataset, config_hash: &str, seed: u64) -> Result<DatasetManifest, CliError> {
    let bytes = ds.to_bytes();
    let bin_path = dir.join(DATASET_BIN);
    let mut w = create(&bin_path)?;
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| io_err(&bin_path, e))?;
    let manifest = DatasetManifest {
        config_hash: config_hash.to_owned(),
        seed,
        n: ds.n,
        n_d: ds.data.len(),
        n_pi: ds.colloc.len(),
        bin_file: DATASET_BIN.to_owned(),
        bin_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let path = dir.join(DATASET_MANIFEST);
    std::fs::write(&path, manifest.render()).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

pub fn read_dataset(manifest_path: &Path, expected_hash: &str) -> Result<ValueDataset, CliError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let m = DatasetManifest::parse(&text)?;
    check_hash("dataset", manifest_path, &m.config_hash, expected_hash)?;
    let bin_path: PathBuf = manifest_path.parent().unwrap_or(Path::new(".")).join(&m.bin_file);
    let bytes = std::fs::read(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    if hex::encode(Sha256::digest(&bytes)) != m.bin_sha256 {
        return Err(io_err(&bin_path, "contents do not match the manifest checksum"));
    }
    Ok(ValueDataset::from_bytes(m.n, m.n_d, m.n_pi, &bytes)?)
}

pub fn write_checkpoint(path: &Path, model: &MlpModel, meta: &CheckpointMeta) -> Result<(), CliError> {
    let mut w = create(path)?;
    save_checkpoint(&mut w, model, meta)?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path, expected_hash: &str) -> Result<(MlpModel, CheckpointMeta), CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let (model, meta) = load_checkpoint(BufReader::new(f))?;
    check_hash("checkpoint", path, &meta.config_hash, expected_hash)?;
    Ok((model, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    config_hash: String,
    n: usize,
    m: usize,
    k: Vec<f64>,
    p: Vec<f64>,
    c1: f64,
    c2: f64,
    omega1: f64,
    omega2: f64,
    grid_resolution: usize,
    u_grid_resolution: usize,
}

pub fn write_certificate(path: &Path, cert: &Certificate, config_hash: &str) -> Result<(), CliError> {
    let file = CertificateFile {
        config_hash: config_hash.to_owned(),
        n: cert.n(),
        m: cert.m(),
        k: cert.k().to_vec(),
        p: cert.p().to_vec(),
        c1: cert.c1,
        c2: cert.c2,
        omega1: cert.omega1,
        omega2: cert.omega2,
        grid_resolution: cert.grid_resolution,
        u_grid_resolution: cert.u_grid_resolution,
    };
    let text = toml::to_string(&file).map_err(|e| io_err(path, e))?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn read_certificate(path: &Path, expected_hash: &str) -> Result<Certificate, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let f: CertificateFile =
        toml::from_str(&text).map_err(|e| CliError::Io(format!("{}: malformed certificate: {e}", path.display())))?;
    check_hash("certificate", path, &f.config_hash, expected_hash)?;
    Ok(Certificate::new(
        f.n,
        f.m,
        f.k,
        f.p,
        f.c1,
        f.c2,
        f.omega1,
        f.omega2,
        f.grid_resolution,
        f.u_grid_resolution,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let m = DatasetManifest {
            config_hash: "ab".repeat(32),
            seed: 7,
            n: 2,
            n_d: 5,
            n_pi: 6,
            bin_file: DATASET_BIN.into(),
            bin_sha256: "cd".repeat(32),
        };
        assert_eq!(DatasetManifest::parse(&m.render()).unwrap(), m);
        assert!(DatasetManifest::parse("garbage").is_err());
    }
}
