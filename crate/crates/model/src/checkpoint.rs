//! Checkpoint directory: `meta.toml` (format version, config, tensor index)
//! plus `params.arr` holding every tensor and buffer concatenated in index
//! order, and optional `stats_pupil.arr` / `stats_attention.arr`.

use std::path::Path;

use gazefusion_core::{read_array, write_array, Array};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::input::ModalityStats;
use crate::network::Network;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    config: ModelConfig,
    stage1_heads: bool,
    stats: bool,
    #[serde(rename = "tensor")]
    tensors: Vec<Entry>,
}

pub fn save_checkpoint(dir: &Path, net: &Network<f32>, stats: Option<&ModalityStats>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    let mut flat = Vec::new();
    for p in net.params() {
        tensors.push(Entry { name: p.name, shape: p.param.shape.clone() });
        flat.extend_from_slice(&p.param.data);
    }
    for (name, b) in net.buffers() {
        tensors.push(Entry { name, shape: vec![b.len()] });
        flat.extend_from_slice(b);
    }
    let meta = Meta {
        format_version: CHECKPOINT_VERSION,
        config: net.config.clone(),
        stage1_heads: !net.stage1_heads.is_empty(),
        stats: stats.is_some(),
        tensors,
    };
    let n = flat.len();
    write_array(dir.join("params.arr"), &Array::f32(vec![n], flat)?)?;
    if let Some(s) = stats {
        write_array(dir.join("stats_pupil.arr"), &Array::f32(vec![s.pupil.len()], s.pupil.clone())?)?;
        write_array(dir.join("stats_attention.arr"), &Array::f32(vec![s.attention.len()], s.attention.clone())?)?;
    }
    let text = toml::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join("meta.toml"), text)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(Network<f32>, Option<ModalityStats>)> {
    let meta_path = dir.join("meta.toml");
    let text =
        std::fs::read_to_string(&meta_path).map_err(|e| gazefusion_core::Error::Load { path: meta_path.clone(), source: e })?;
    let meta: Meta = toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", meta.format_version)));
    }
    let mut net = Network::<f32>::new(meta.config.clone(), 0)?;
    if !meta.stage1_heads {
        net.discard_stage1_heads();
    }
    let flat = read_array(dir.join("params.arr"))?.into_f32(Some(1))?.1;
    let mut off = 0;
    let mut entries = meta.tensors.iter();
    let mut take = |name: &str, len: usize| -> Result<&[f32]> {
        let e = entries.next().ok_or_else(|| Error::Checkpoint("tensor index too short".into()))?;
        if e.name != name || e.shape.iter().product::<usize>() != len {
            return Err(Error::Checkpoint(format!("tensor {} does not match model tensor {name}", e.name)));
        }
        let s = flat.get(off..off + len).ok_or_else(|| Error::Checkpoint("params.arr too short".into()))?;
        off += len;
        Ok(s)
    };
    for p in net.params_mut() {
        let len = p.param.len();
        p.param.data.copy_from_slice(take(&p.name, len)?);
    }
    for (name, b) in net.buffers_mut() {
        let len = b.len();
        b.copy_from_slice(take(&name, len)?);
    }
    if off != flat.len() || meta.tensors.len() != net.params().len() + net.buffers().len() {
        return Err(Error::Checkpoint("params.arr has trailing data".into()));
    }
    let stats = if meta.stats {
        Some(ModalityStats {
            pupil: read_array(dir.join("stats_pupil.arr"))?.into_f32(Some(1))?.1,
            attention: read_array(dir.join("stats_attention.arr"))?.into_f32(Some(1))?.1,
        })
    } else {
        None
    };
    Ok((net, stats))
}
