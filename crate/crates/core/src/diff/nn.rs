//! Parameter bundles for the layers the model is built from.

use rand_chacha::ChaCha8Rng;

use super::params::{Init, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut ChaCha8Rng) -> Result<Linear> {
        let w = store.add(&format!("{name}.w"), fan_in, fan_out, Init::Xavier, rng)?;
        let b = if bias {
            Some(store.add(&format!("{name}.b"), 1, fan_out, Init::Zeros, rng)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.w);
        let b = self.b.map(|b| tape.param(b));
        tape.linear(x, w, b)
    }
}

/// Linear layer over a column-wise concatenation, stored as one weight
/// block per input part. `forward` sums the per-part products, which equals
/// a single linear map on the concatenated input.
#[derive(Debug, Clone)]
pub struct SplitLinear {
    pub parts: Vec<ParamId>,
    pub b: ParamId,
}

impl SplitLinear {
    pub fn new(store: &mut ParamStore, name: &str, part_widths: &[usize], fan_out: usize, rng: &mut ChaCha8Rng) -> Result<SplitLinear> {
        let fan_in: usize = part_widths.iter().sum();
        // Xavier bound of the equivalent concatenated layer
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let parts = part_widths
            .iter()
            .enumerate()
            .map(|(k, &w)| store.add(&format!("{name}.w{k}"), w, fan_out, Init::Uniform(bound), rng))
            .collect::<Result<Vec<_>>>()?;
        let b = store.add(&format!("{name}.b"), 1, fan_out, Init::Zeros, rng)?;
        Ok(SplitLinear { parts, b })
    }

    pub fn weight(&self, k: usize) -> ParamId {
        self.parts[k]
    }
}

/// Stack of linear layers with SiLU between them (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths = [in, hidden.., out]`
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Mlp> {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::new(store, &format!("{name}.l{k}"), w[0], w[1], true, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if k + 1 < self.layers.len() {
                h = tape.silu(h);
            }
        }
        Ok(h)
    }

    /// Continues an MLP whose first pre-activation was computed elsewhere.
    pub fn forward_from_hidden(&self, tape: &mut Tape, first_pre_activation: Var) -> Result<Var> {
        let mut h = first_pre_activation;
        for layer in &self.layers {
            h = tape.silu(h);
            h = layer.forward(tape, h)?;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rng: &mut ChaCha8Rng) -> Result<LayerNorm> {
        Ok(LayerNorm {
            gain: store.add(&format!("{name}.gain"), 1, dim, Init::Ones, rng)?,
            bias: store.add(&format!("{name}.bias"), 1, dim, Init::Zeros, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        tape.layer_norm(x, g, b)
    }
}
