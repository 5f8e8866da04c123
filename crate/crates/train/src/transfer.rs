//! Stage two: recurrent-weight transfer between branches and the freeze mask.

use std::collections::BTreeMap;

use gazefusion_model::layers::Lstm;
use gazefusion_model::Network;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};

pub const TARGET_GROUP: &str = "spatial.shared_lstm";
const REINIT_STREAM: u64 = 0x7472_616e_7366;

/// Frozen hidden units of each transferred recurrent matrix. Unit `u`
/// frozen means row `g * H + u` is frozen in every gate block `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub hidden: usize,
    /// Parameter name within [`TARGET_GROUP`] (e.g. `layer0.w_hh`) to units.
    pub units: BTreeMap<String, Vec<usize>>,
}

impl FreezeMask {
    /// Mask key of a fully qualified parameter name, if the mask covers it.
    pub fn key_of<'a>(&self, full_name: &'a str) -> Option<&'a str> {
        let local = full_name.strip_prefix(TARGET_GROUP)?.strip_prefix('.')?;
        self.units.contains_key(local).then_some(local)
    }

    pub fn rows(&self, name: &str) -> Vec<usize> {
        let Some(units) = self.units.get(name) else { return Vec::new() };
        let mut rows: Vec<usize> = (0..4).flat_map(|g| units.iter().map(move |u| g * self.hidden + u)).collect();
        rows.sort_unstable();
        rows
    }

    /// Element-level mask for a `[4H][H]` matrix.
    pub fn element_mask(&self, name: &str) -> Vec<bool> {
        let h = self.hidden;
        let mut m = vec![false; 4 * h * h];
        for r in self.rows(name) {
            m[r * h..(r + 1) * h].iter_mut().for_each(|v| *v = true);
        }
        m
    }

    pub fn frozen_count(&self) -> usize {
        self.units.values().map(|u| 4 * u.len() * self.hidden).sum()
    }
}

/// Copy recurrent matrices and biases of every layer of `src` into `dst`
/// and redraw `dst`'s input matrices.
pub fn transfer_lstm(src: &Lstm<f32>, dst: &mut Lstm<f32>, rng: &mut ChaCha8Rng) -> Result<()> {
    if src.layers.len() != dst.layers.len() {
        return Err(Error::Transfer(format!("{} source layers vs {} target layers", src.layers.len(), dst.layers.len())));
    }
    let (hs, hd) = (src.hidden(), dst.hidden());
    if hs != hd {
        return Err(Error::Transfer(format!("hidden size mismatch: source {hs}, target {hd}")));
    }
    for (s, d) in src.layers.iter().zip(dst.layers.iter_mut()) {
        d.w_hh = s.w_hh.clone();
        d.bias = s.bias.clone();
        d.reinit_input(rng);
    }
    Ok(())
}

/// Move the temporal shared LSTM's recurrent weights into the spatial
/// shared LSTM, drop the temporary heads and return the stage-three mask.
pub fn stage2_transfer(net: &mut Network<f32>, cfg: &TrainConfig) -> Result<FreezeMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ REINIT_STREAM);
    let src = net.t_lstm.clone();
    transfer_lstm(&src, &mut net.s_lstm, &mut rng)?;
    net.discard_stage1_heads();
    let h = src.hidden();
    let k = cfg.frozen_units(h);
    let units: BTreeMap<String, Vec<usize>> = (0..src.layers.len())
        .map(|l| {
            let u = match cfg.freeze_seed {
                None => (0..k).collect(),
                Some(s) => {
                    let mut r = ChaCha8Rng::seed_from_u64(s.wrapping_add(l as u64));
                    let mut u = sample(&mut r, h, k).into_vec();
                    u.sort_unstable();
                    u
                }
            };
            (format!("layer{l}.w_hh"), u)
        })
        .collect();
    Ok(FreezeMask { hidden: h, units })
}
