//! Checkpoint file: a text header terminated by `end_header`, followed by
//! the flat parameter vector as little-endian `f64`.
//!
//! ```text
//! doskit-checkpoint v1
//! layer_sizes = 4,20,20,1
//! hidden_activation = tanh
//! output_activation = logistic
//! seed = 7
//! config_hash = 3f2a…
//! param_count = 521
//! end_header
//! <param_count × 8 bytes>
//! ```

use std::io::{BufRead, Write};

use super::mlp::{param_count, Activation, MlpModel};
use crate::error::{Error, Result};

const MAGIC: &str = "doskit-checkpoint v1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub config_hash: String,
}

pub fn save_checkpoint(mut w: impl Write, model: &MlpModel, meta: &CheckpointMeta) -> Result<()> {
    let sizes: Vec<String> = model.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "layer_sizes = {}", sizes.join(","))?;
    writeln!(w, "hidden_activation = {}", model.hidden_activation().name())?;
    writeln!(w, "output_activation = {}", model.output_activation().name())?;
    writeln!(w, "seed = {}", meta.seed)?;
    writeln!(w, "config_hash = {}", meta.config_hash)?;
    writeln!(w, "param_count = {}", model.params().len())?;
    writeln!(w, "end_header")?;
    for p in model.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint(mut r: impl BufRead) -> Result<(MlpModel, CheckpointMeta)> {
    let mut line = String::new();
    let mut next_line = |r: &mut dyn BufRead| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("checkpoint header ended early".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next_line(&mut r)? != MAGIC {
        return Err(Error::Format("not a doskit checkpoint".into()));
    }
    let (mut sizes, mut hidden, mut output, mut count) = (None, None, None, None);
    let mut meta = CheckpointMeta::default();
    loop {
        let l = next_line(&mut r)?;
        if l == "end_header" {
            break;
        }
        let (key, value) = l
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Format(format!("malformed header line {l:?}")))?;
        let bad = |what: &str| Error::Format(format!("invalid {what}: {value:?}"));
        match key {
            "layer_sizes" => {
                let parsed: std::result::Result<Vec<usize>, _> = value.split(',').map(|s| s.trim().parse()).collect();
                sizes = Some(parsed.map_err(|_| bad("layer_sizes"))?);
            }
            "hidden_activation" => hidden = Some(Activation::from_name(value).ok_or_else(|| bad(key))?),
            "output_activation" => output = Some(Activation::from_name(value).ok_or_else(|| bad(key))?),
            "seed" => meta.seed = value.parse().map_err(|_| bad(key))?,
            "config_hash" => meta.config_hash = value.to_string(),
            "param_count" => count = Some(value.parse::<usize>().map_err(|_| bad(key))?),
            _ => return Err(Error::Format(format!("unknown checkpoint key {key:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("checkpoint header lacks {k}"));
    let sizes = sizes.ok_or_else(|| missing("layer_sizes"))?;
    let hidden = hidden.ok_or_else(|| missing("hidden_activation"))?;
    let output = output.ok_or_else(|| missing("output_activation"))?;
    let count = count.ok_or_else(|| missing("param_count"))?;
    if sizes.len() < 2 || count != param_count(&sizes) {
        return Err(Error::Format(format!("param_count {count} does not match layer sizes {sizes:?}")));
    }
    let mut block = Vec::new();
    r.read_to_end(&mut block)?;
    if block.len() != 8 * count {
        return Err(Error::Format(format!(
            "parameter block has {} bytes, expected {}",
            block.len(),
            8 * count
        )));
    }
    let params = block.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let model = MlpModel::from_params(sizes, hidden, output, params).map_err(|e| Error::Format(e.to_string()))?;
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = MlpModel::value_net(4, &[20, 20], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let meta = CheckpointMeta { seed: 9, config_hash: "abc123".into() };
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &m, &meta).unwrap();
        let (back, meta2) = load_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta2, meta);
        let header_len = buf.len() - 8 * m.params().len();
        assert_eq!(&buf[header_len..header_len + 8], &m.params()[0].to_le_bytes());
    }

    #[test]
    fn rejects_truncated_or_mismatched() {
        let m = MlpModel::value_net(2, &[3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &m, &CheckpointMeta::default()).unwrap();
        assert!(load_checkpoint(&buf[..buf.len() - 1]).is_err());
        let text = String::from_utf8_lossy(&buf).replace("layer_sizes = 2,3,1", "layer_sizes = 2,4,1");
        assert!(load_checkpoint(text.as_bytes()).is_err());
        assert!(load_checkpoint(&b"garbage\n"[..]).is_err());
    }
}
