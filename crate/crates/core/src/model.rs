//! The boundary-embedded dual-branch operator: encoders, a Transformer over
//! the boundary sequence, the message-passing processor and per-branch
//! decoders, with the `w_M` and `wo_D` ablation variants.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::diff::{init_rng, LayerNorm, Linear, Mlp, ParamStore, SplitLinear, Tape, Tensor, Var};
use crate::error::{BenoError, Result};
use crate::graph::{BranchInputs, PdeGraph, BOUNDARY_FEATURES, EDGE_FEATURES, NODE_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Two branches, each with a boundary Transformer feeding every node update.
    Full,
    /// Two branches, plain message passing with no boundary pathway.
    WM,
    /// One branch on the unmodified inputs.
    WoD,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::WM, Variant::WoD];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WM => "w_M",
            Variant::WoD => "wo_D",
        }
    }

    fn branch_count(self) -> usize {
        match self {
            Variant::WoD => 1,
            _ => 2,
        }
    }

    fn boundary_embedded(self) -> bool {
        self != Variant::WM
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = BenoError;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenoError::InvalidParameter(format!("unknown variant {s:?} (expected full, w_M or wo_D)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub mp_steps: usize,
    pub transformer_layers: usize,
    pub attention_heads: usize,
    pub mlp_layers: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 128,
            mp_steps: 5,
            transformer_layers: 1,
            attention_heads: 2,
            mlp_layers: 3,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenoError::InvalidParameter(m));
        if self.embed_dim < 2 {
            return bad(format!("embed_dim must be at least 2, got {}", self.embed_dim));
        }
        if self.attention_heads == 0 || !self.embed_dim.is_multiple_of(self.attention_heads) {
            return bad(format!(
                "embed_dim {} is not divisible by attention_heads {}",
                self.embed_dim, self.attention_heads
            ));
        }
        if self.mp_steps == 0 || self.transformer_layers == 0 || self.mlp_layers == 0 {
            return bad("mp_steps, transformer_layers and mlp_layers must be at least 1".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.attention_heads
    }

    /// `key=value` tokens, as stored in checkpoint headers.
    pub fn to_meta(&self) -> String {
        format!(
            "model embed_dim={} mp_steps={} transformer_layers={} attention_heads={} mlp_layers={} variant={}",
            self.embed_dim, self.mp_steps, self.transformer_layers, self.attention_heads, self.mlp_layers, self.variant
        )
    }

    pub fn from_meta(line: &str) -> Result<ModelConfig> {
        let rest = line
            .strip_prefix("model ")
            .ok_or_else(|| BenoError::Parse(format!("not a model line: {line:?}")))?;
        let mut c = ModelConfig::default();
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| BenoError::Parse(format!("bad model token {tok:?}")))?;
            let num = || v.parse::<usize>().map_err(|_| BenoError::Parse(format!("bad value for {k}: {v:?}")));
            match k {
                "embed_dim" => c.embed_dim = num()?,
                "mp_steps" => c.mp_steps = num()?,
                "transformer_layers" => c.transformer_layers = num()?,
                "attention_heads" => c.attention_heads = num()?,
                "mlp_layers" => c.mlp_layers = num()?,
                "variant" => c.variant = v.parse()?,
                _ => return Err(BenoError::Parse(format!("unknown model key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Feature tables of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchData {
    /// `N × 5`
    pub nodes: Tensor,
    /// `n_b × 4`
    pub boundary: Tensor,
}

impl BranchData {
    fn from_graph(g: &PdeGraph) -> Result<BranchData> {
        if g.boundary_sequence.is_empty() {
            return Err(BenoError::InvalidParameter("empty boundary sequence".into()));
        }
        Ok(BranchData {
            nodes: Tensor::from_rows::<NODE_FEATURES>(&g.node_features),
            boundary: Tensor::from_rows::<BOUNDARY_FEATURES>(&g.boundary_sequence),
        })
    }
}

/// Everything one forward pass needs, built from an (already normalized)
/// graph. Edge structure is shared by all branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// `E × 3`
    pub edges: Tensor,
    /// `E × 2`: the `p_i − p_j` columns of the edge features.
    pub displacement: Tensor,
    /// Message receiver `i` per edge.
    pub target: Rc<[usize]>,
    /// Message sender `j` per edge.
    pub source: Rc<[usize]>,
    /// Boundary values zeroed.
    pub interior: BranchData,
    /// Source term zeroed.
    pub boundary: BranchData,
    pub unmodified: BranchData,
}

impl ModelInput {
    pub fn from_graph(graph: &PdeGraph) -> Result<ModelInput> {
        let branches = BranchInputs::from_graph(graph);
        let edges = Tensor::from_rows::<EDGE_FEATURES>(&graph.edge_features);
        let displacement: Vec<[f64; 2]> = graph.edge_features.iter().map(|e| [e[0], e[1]]).collect();
        Ok(ModelInput {
            edges,
            displacement: Tensor::from_rows(&displacement),
            target: graph.edges.iter().map(|e| e.0).collect(),
            source: graph.edges.iter().map(|e| e.1).collect(),
            interior: BranchData::from_graph(&branches.interior)?,
            boundary: BranchData::from_graph(&branches.boundary)?,
            unmodified: BranchData::from_graph(graph)?,
        })
    }

    pub fn node_count(&self) -> usize {
        self.unmodified.nodes.rows()
    }

    /// Feature tables fed to branch `k` of `variant`.
    pub fn branch(&self, variant: Variant, k: usize) -> &BranchData {
        match (variant, k) {
            (Variant::WoD, _) => &self.unmodified,
            (_, 0) => &self.interior,
            _ => &self.boundary,
        }
    }
}

/// Fixed sinusoidal embedding over sequence positions.
pub fn position_embedding(len: usize, dim: usize) -> Tensor {
    let mut t = Tensor::zeros(len, dim);
    let data = t.data_mut();
    for pos in 0..len {
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            data[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct AttentionLayer {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln1: LayerNorm,
    pub ffn: Mlp,
    pub ln2: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct BoundaryTransformer {
    pub lift: Linear,
    pub layers: Vec<AttentionLayer>,
}

/// Transformer outputs: per-position states `H^B`, pooled `B`, and the
/// attention matrices (per layer, per head).
pub struct TransformerOutput {
    pub states: Var,
    pub pooled: Var,
    pub attention: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct ProcessorStep {
    /// Parts: `v_i`, `v_j`, `e_ij`, `p_i − p_j`.
    pub message_in: SplitLinear,
    pub message: Mlp,
    /// Parts: `v_i`, `Σ m`, then `B` when boundary-embedded.
    pub node_in: SplitLinear,
    pub node: Mlp,
    /// Parts: `e_ij`, `m_ij`. Absent on the last step, whose edge update is never read.
    pub edge: Option<(SplitLinear, Mlp)>,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub node_encoder: Mlp,
    pub edge_encoder: Mlp,
    pub transformer: Option<BoundaryTransformer>,
    pub steps: Vec<ProcessorStep>,
    pub decoder: Mlp,
}

/// Node, edge and boundary embeddings between processor steps.
#[derive(Debug, Clone, Copy)]
pub struct GraphState {
    pub nodes: Var,
    pub edges: Var,
    pub boundary: Option<Var>,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct Beno {
    pub config: ModelConfig,
    pub branches: Vec<Branch>,
}

fn tail_widths(d: usize, layers: usize, out: usize) -> Vec<usize> {
    // the first layer is a SplitLinear; the rest continue at width d
    let mut w = vec![d; layers];
    if let Some(last) = w.last_mut() {
        *last = out;
    }
    w
}

impl Beno {
    /// Registers all parameters in a fresh store, initialized from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<(Beno, ParamStore)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = init_rng(seed);
        let d = config.embed_dim;
        let m = config.mlp_layers;
        let rng = &mut rng;
        let s = &mut store;
        let mut branches = Vec::new();
        for b in 0..config.variant.branch_count() {
            let p = format!("branch{b}");
            let node_encoder = Mlp::new(s, &format!("{p}.enc_v"), &[NODE_FEATURES, d, d], rng)?;
            let edge_encoder = Mlp::new(s, &format!("{p}.enc_e"), &[EDGE_FEATURES, d, d], rng)?;
            let transformer = if config.variant.boundary_embedded() {
                let lift = Linear::new(s, &format!("{p}.tf.lift"), BOUNDARY_FEATURES, d, true, rng)?;
                let layers = (0..config.transformer_layers)
                    .map(|l| {
                        let q = format!("{p}.tf{l}");
                        Ok(AttentionLayer {
                            wq: Linear::new(s, &format!("{q}.wq"), d, d, true, rng)?,
                            wk: Linear::new(s, &format!("{q}.wk"), d, d, true, rng)?,
                            wv: Linear::new(s, &format!("{q}.wv"), d, d, true, rng)?,
                            wo: Linear::new(s, &format!("{q}.wo"), d, d, true, rng)?,
                            ln1: LayerNorm::new(s, &format!("{q}.ln1"), d, rng)?,
                            ffn: Mlp::new(s, &format!("{q}.ffn"), &[d, 2 * d, d], rng)?,
                            ln2: LayerNorm::new(s, &format!("{q}.ln2"), d, rng)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(BoundaryTransformer { lift, layers })
            } else {
                None
            };
            let mut steps = Vec::new();
            for t in 0..config.mp_steps {
                let q = format!("{p}.mp{t}");
                let tail = |s: &mut ParamStore, name: &str, rng: &mut _| {
                    let mut widths = vec![d];
                    widths.extend(tail_widths(d, m - 1, d));
                    Mlp::new(s, name, &widths, rng)
                };
                let message_in = SplitLinear::new(s, &format!("{q}.msg_in"), &[d, d, d, 2], d, rng)?;
                let message = tail(s, &format!("{q}.msg"), rng)?;
                let node_parts: &[usize] = if config.variant.boundary_embedded() { &[d, d, d] } else { &[d, d] };
                let node_in = SplitLinear::new(s, &format!("{q}.node_in"), node_parts, d, rng)?;
                let node = tail(s, &format!("{q}.node"), rng)?;
                let edge = if t + 1 < config.mp_steps {
                    let e_in = SplitLinear::new(s, &format!("{q}.edge_in"), &[d, d], d, rng)?;
                    Some((e_in, tail(s, &format!("{q}.edge"), rng)?))
                } else {
                    None
                };
                steps.push(ProcessorStep {
                    message_in,
                    message,
                    node_in,
                    node,
                    edge,
                });
            }
            let decoder = Mlp::new(s, &format!("{p}.dec"), &[d, d, 1], rng)?;
            branches.push(Branch {
                node_encoder,
                edge_encoder,
                transformer,
                steps,
                decoder,
            });
        }
        Ok((Beno { config, branches }, store))
    }

    /// Initial node and edge embeddings of branch `k`.
    pub fn encode(&self, tape: &mut Tape, k: usize, data: &BranchData, input: &ModelInput) -> Result<GraphState> {
        let br = &self.branches[k];
        let x = tape.constant(data.nodes.clone());
        let nodes = br.node_encoder.forward(tape, x)?;
        let e = tape.constant(input.edges.clone());
        let edges = br.edge_encoder.forward(tape, e)?;
        Ok(GraphState {
            nodes,
            edges,
            boundary: None,
            step: 0,
        })
    }

    /// Runs the boundary Transformer of branch `k` over an `n_b × 4` sequence.
    pub fn boundary_transformer(&self, tape: &mut Tape, k: usize, sequence: &Tensor) -> Result<TransformerOutput> {
        let tf = self.branches[k]
            .transformer
            .as_ref()
            .ok_or_else(|| BenoError::InvalidParameter(format!("variant {} has no boundary encoder", self.config.variant)))?;
        if sequence.rows() == 0 {
            return Err(BenoError::InvalidParameter("empty boundary sequence".into()));
        }
        let d = self.config.embed_dim;
        let dk = self.config.head_dim();
        let scale = 1.0 / (dk as f64).sqrt();
        let x = tape.constant(sequence.clone());
        let lifted = tf.lift.forward(tape, x)?;
        let pe = tape.constant(position_embedding(sequence.rows(), d));
        let mut h = tape.add(lifted, pe)?;
        let mut attention = Vec::new();
        for layer in &tf.layers {
            let q = layer.wq.forward(tape, h)?;
            let kk = layer.wk.forward(tape, h)?;
            let v = layer.wv.forward(tape, h)?;
            let mut heads = Vec::with_capacity(self.config.attention_heads);
            for head in 0..self.config.attention_heads {
                let qh = tape.slice_cols(q, head * dk, dk)?;
                let kh = tape.slice_cols(kk, head * dk, dk)?;
                let vh = tape.slice_cols(v, head * dk, dk)?;
                let scores = tape.matmul_t(qh, kh)?;
                let scores = tape.scale(scores, scale);
                let weights = tape.softmax_rows(scores);
                attention.push(weights);
                heads.push(tape.matmul(weights, vh)?);
            }
            let cat = tape.concat_cols(&heads)?;
            let mixed = layer.wo.forward(tape, cat)?;
            let r = tape.add(h, mixed)?;
            let h1 = layer.ln1.forward(tape, r)?;
            let ff = layer.ffn.forward(tape, h1)?;
            let r = tape.add(h1, ff)?;
            h = layer.ln2.forward(tape, r)?;
        }
        let pooled = tape.mean_rows(h);
        Ok(TransformerOutput {
            states: h,
            pooled,
            attention,
        })
    }

    /// One processor step of branch `k`.
    pub fn mp_step(&self, tape: &mut Tape, k: usize, state: GraphState, input: &ModelInput) -> Result<GraphState> {
        let step = &self.branches[k].steps[state.step];
        let n = tape.shape(state.nodes)[0];

        // message m_ij from [v_i, v_j, e_ij, p_i − p_j]
        let w = |tape: &mut Tape, s: &SplitLinear, part: usize| tape.param(s.weight(part));
        let wi = w(tape, &step.message_in, 0);
        let wj = w(tape, &step.message_in, 1);
        let we = w(tape, &step.message_in, 2);
        let wp = w(tape, &step.message_in, 3);
        let bm = tape.param(step.message_in.b);
        let vi = tape.matmul(state.nodes, wi)?;
        let vi = tape.gather(vi, input.target.clone())?;
        let vj = tape.matmul(state.nodes, wj)?;
        let vj = tape.gather(vj, input.source.clone())?;
        let ep = tape.linear(state.edges, we, Some(bm))?;
        let disp = tape.constant(input.displacement.clone());
        let dp = tape.linear(disp, wp, None)?;
        let pre = tape.add(vi, vj)?;
        let pre = tape.add(pre, ep)?;
        let pre = tape.add(pre, dp)?;
        let message = step.message.forward_from_hidden(tape, pre)?;

        // node update from [v_i, Σ_j m_ij, B]
        let agg = tape.scatter_add(message, input.target.clone(), n)?;
        let wv = w(tape, &step.node_in, 0);
        let wa = w(tape, &step.node_in, 1);
        let bn = tape.param(step.node_in.b);
        let pv = tape.linear(state.nodes, wv, Some(bn))?;
        let pa = tape.matmul(agg, wa)?;
        let mut pre = tape.add(pv, pa)?;
        if let Some(b) = state.boundary {
            let wb = w(tape, &step.node_in, 2);
            let pb = tape.matmul(b, wb)?;
            pre = tape.add_row(pre, pb)?;
        }
        let nodes = step.node.forward_from_hidden(tape, pre)?;

        // edge update from [e_ij, m_ij]
        let edges = match &step.edge {
            Some((e_in, mlp)) => {
                let w0 = w(tape, e_in, 0);
                let w1 = w(tape, e_in, 1);
                let be = tape.param(e_in.b);
                let pe = tape.linear(state.edges, w0, Some(be))?;
                let pm = tape.matmul(message, w1)?;
                let pre = tape.add(pe, pm)?;
                mlp.forward_from_hidden(tape, pre)?
            }
            None => state.edges,
        };
        Ok(GraphState {
            nodes,
            edges,
            boundary: state.boundary,
            step: state.step + 1,
        })
    }

    /// Prediction of branch `k`: `N × 1`.
    pub fn branch_forward(&self, tape: &mut Tape, k: usize, input: &ModelInput) -> Result<Var> {
        let data = input.branch(self.config.variant, k);
        let mut state = self.encode(tape, k, data, input)?;
        if self.branches[k].transformer.is_some() {
            state.boundary = Some(self.boundary_transformer(tape, k, &data.boundary)?.pooled);
        }
        for _ in 0..self.config.mp_steps {
            state = self.mp_step(tape, k, state, input)?;
        }
        self.branches[k].decoder.forward(tape, state.nodes)
    }

    /// Sum of the branch predictions: `N × 1`.
    pub fn forward(&self, tape: &mut Tape, input: &ModelInput) -> Result<Var> {
        let mut out = self.branch_forward(tape, 0, input)?;
        for k in 1..self.branches.len() {
            let o = self.branch_forward(tape, k, input)?;
            out = tape.add(out, o)?;
        }
        Ok(out)
    }

    pub fn predict(&self, store: &ParamStore, input: &ModelInput) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, input)?;
        tape.check_finite()?;
        Ok(tape.value(out).data().to_vec())
    }

    /// MSE against `target` and its flat parameter gradient.
    pub fn loss_and_grad(&self, store: &ParamStore, input: &ModelInput, target: &Rc<[f64]>) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, input)?;
        let loss = tape.mse(out, target.clone())?;
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).get(0, 0), grads.params))
    }

    pub fn loss(&self, store: &ParamStore, input: &ModelInput, target: &Rc<[f64]>) -> Result<f64> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, input)?;
        let loss = tape.mse(out, target.clone())?;
        tape.check_finite()?;
        Ok(tape.value(loss).get(0, 0))
    }
}
