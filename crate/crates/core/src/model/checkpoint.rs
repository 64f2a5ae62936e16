//! Checkpoints: a magic header, a JSON block with config and training
//! metadata, then the parameter and state buffers as little-endian f64.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::net::Model;
use super::ModelError;

const MAGIC: &[u8; 8] = b"MSFSUNET";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub epoch: usize,
    pub val_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    param_len: usize,
    state_len: usize,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &Model,
    epoch: usize,
    val_loss: f64,
) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let header = Header {
        meta: CheckpointMeta {
            config: model.net.config.clone(),
            epoch,
            val_loss,
        },
        param_len: model.params.len(),
        state_len: model.states.values.len(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
    w.write_all(&header_bytes)?;
    for v in &model.params.values {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for v in &model.states.values {
        w.write_f64::<LittleEndian>(*v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, CheckpointMeta), ModelError> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint(format!(
            "{}: bad magic",
            path.as_ref().display()
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let header_len = r.read_u64::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    let mut model = Model::new(header.meta.config.clone(), 0)?;
    if model.params.len() != header.param_len || model.states.values.len() != header.state_len {
        return Err(ModelError::Checkpoint(format!(
            "buffer sizes {}/{} do not match config-built model {}/{}",
            header.param_len,
            header.state_len,
            model.params.len(),
            model.states.values.len()
        )));
    }
    for v in &mut model.params.values {
        *v = r.read_f64::<LittleEndian>()?;
    }
    for v in &mut model.states.values {
        *v = r.read_f64::<LittleEndian>()?;
    }
    Ok((model, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Variant;
    use crate::types::NavCommand;
    use ndarray::Array4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.ckpt");
        let model = Model::new(ModelConfig::micro(Variant::Msfsu), 42).unwrap();
        save_checkpoint(&path, &model, 17, 0.125).unwrap();
        let (loaded, meta) = load_checkpoint(&path).unwrap();
        assert_eq!(meta.epoch, 17);
        assert_eq!(meta.val_loss, 0.125);
        assert_eq!(meta.config, model.net.config);
        assert_eq!(loaded.params.values, model.params.values);
        assert_eq!(loaded.states.values, model.states.values);

        // Same outputs after reload.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array4::from_shape_fn((1, 4, 32, 32), |_| {
            crate::model::params::normal(&mut rng)
        });
        let a = model.forward(&x, &[NavCommand::LaneFollow]).unwrap();
        let b = loaded.forward(&x, &[NavCommand::LaneFollow]).unwrap();
        assert_eq!(a.steer, b.steer);
        assert_eq!(a.semantics.unwrap(), b.semantics.unwrap());
    }

    #[test]
    fn garbage_file_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(ModelError::Checkpoint(_))
        ));
    }
}
