//! Graph convolution layers and the student network.
//!
//! [`GcnLayer`] computes `σ(Â · H · W)`. [`DsgcnLayer`] adds a degree-specific
//! weight to the shared one inside the aggregation,
//! `x_i' = σ(Σ_j a_ij (W + W_{d(j)}) x_j)`, where the per-degree weights come
//! from a [`DegreeWeightBank`]: a recurrent cell iterated from a learnable seed,
//! so neighbouring degrees get correlated parameters while the trainable
//! parameter count stays fixed.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{DegreeVector, Graph};
use crate::params::{glorot_uniform, normal_matrix, Bound, ParamId, ParamStore};
use crate::rng::Rng;
use crate::sparse::Csr;

pub const HIDDEN_UNITS: usize = 16;
pub const DEFAULT_D_MAX: usize = 10;
pub const DEFAULT_CELL_RANK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, tape: &mut Tape, v: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(v),
            Activation::Identity => v,
        }
    }
}

/// Which node's degree selects the degree-specific weight for edge `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DegreeIndex {
    /// `W_{d(j)}`: the neighbour being aggregated.
    #[default]
    Neighbor,
    /// `W_{d(i)}`: the node receiving the aggregate.
    Center,
}

/// Bank slot for a raw degree: degrees `1..=d_max` map to their own entry,
/// larger degrees share the last entry, and degree 0 uses the first.
pub fn bank_slot(degree: usize, d_max: usize) -> usize {
    degree.clamp(1, d_max + 1) - 1
}

/// Graph operators shared by every layer evaluated on one graph.
#[derive(Debug, Clone)]
pub struct GraphOps {
    pub adjacency: Arc<Csr>,
    pub degrees: DegreeVector,
    pub d_max: usize,
    slots: Vec<usize>,
    slot_masks: Vec<Vec<bool>>,
    selectors: Vec<Arc<Csr>>,
}

impl GraphOps {
    pub fn new(g: &Graph, add_self_loops: bool, d_max: usize) -> Self {
        let adjacency = Arc::new(g.normalized_adjacency(add_self_loops).into_inner());
        Self::from_parts(adjacency, g.degrees(), d_max)
    }

    pub fn from_parts(adjacency: Arc<Csr>, degrees: DegreeVector, d_max: usize) -> Self {
        let slots: Vec<usize> = degrees.iter().map(|&d| bank_slot(d, d_max)).collect();
        let slot_masks: Vec<Vec<bool>> = (0..=d_max)
            .map(|k| slots.iter().map(|&s| s == k).collect())
            .collect();
        let selectors = slot_masks.iter().map(|m| Arc::new(Csr::row_selector(m))).collect();
        GraphOps {
            adjacency,
            degrees,
            d_max,
            slots,
            slot_masks,
            selectors,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Bank slot of every node.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    fn slot_is_empty(&self, k: usize) -> bool {
        !self.slot_masks[k].iter().any(|&m| m)
    }
}

/// Input to a layer: the (constant) sparse feature matrix or a dense tape node.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    Sparse(&'a Arc<Csr>),
    Dense(Var),
}

fn times_weight(tape: &mut Tape, input: LayerInput<'_>, w: Var) -> Result<Var> {
    match input {
        LayerInput::Sparse(x) => tape.sparse_matmul(x, w),
        LayerInput::Dense(h) => tape.matmul(h, w),
    }
}

fn input_rows(tape: &Tape, input: LayerInput<'_>) -> usize {
    match input {
        LayerInput::Sparse(x) => x.rows(),
        LayerInput::Dense(h) => tape.shape(h).0,
    }
}

/// Standard graph convolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), glorot_uniform(in_dim, out_dim, rng));
        GcnLayer { weight, activation }
    }

    /// `σ(Â · H · W)`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        adjacency: &Arc<Csr>,
        input: LayerInput<'_>,
    ) -> Result<Var> {
        let n = input_rows(tape, input);
        if adjacency.cols() != n {
            return Err(Error::shape(
                "gcn_forward",
                format!("adjacency {}x{} with {n} input rows", adjacency.rows(), adjacency.cols()),
            ));
        }
        let xw = times_weight(tape, input, params[self.weight])?;
        let agg = tape.sparse_matmul(adjacency, xw)?;
        Ok(self.activation.apply(tape, agg))
    }
}

/// Recurrent state threaded through the weight generator.
#[derive(Debug, Clone, Copy)]
pub struct CellState {
    pub hidden: Var,
    pub memory: Option<Var>,
}

/// One step of a recurrence over flattened weight vectors.
pub trait RecurrentCell {
    /// Feeds `state.hidden` back in as the input and returns the next state.
    fn step(&self, tape: &mut Tape, params: &Bound, state: CellState) -> Result<CellState>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Elman,
    Lstm,
}

/// Rank-`r` factor `P·Q` applied to a column vector `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowRank {
    pub p: ParamId,
    pub q: ParamId,
}

impl LowRank {
    /// `Q` is stored with unit-variance entries and applied as `Q / √S`.
    /// The effective matrix starts at `N(0, 1/S)` either way, but the
    /// scaling keeps one optimizer step on `Q` from shifting `Q·h` by an
    /// amount that grows with the state size `S` (which is `F·16` for the
    /// first layer).
    fn new(store: &mut ParamStore, name: &str, state: usize, rank: usize, rng: &mut Rng) -> Self {
        let q = store.add(format!("{name}.q"), normal_matrix(rank, state, 1.0, rng));
        let p = store.add(format!("{name}.p"), normal_matrix(state, rank, 0.1 / (rank as f64).sqrt(), rng));
        LowRank { p, q }
    }

    fn apply(&self, tape: &mut Tape, params: &Bound, x: Var) -> Result<Var> {
        let state = tape.shape(params[self.q]).1;
        let qx = tape.matmul(params[self.q], x)?;
        let qx = tape.scale(qx, 1.0 / (state as f64).sqrt());
        tape.matmul(params[self.p], qx)
    }
}

/// `h' = tanh((I + P·Q) h + b)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElmanCell {
    pub update: LowRank,
    pub bias: ParamId,
}

impl ElmanCell {
    pub fn new(store: &mut ParamStore, name: &str, state: usize, rank: usize, rng: &mut Rng) -> Self {
        let update = LowRank::new(store, name, state, rank, rng);
        let bias = store.add(format!("{name}.b"), Matrix::zeros((state, 1)));
        ElmanCell { update, bias }
    }
}

impl RecurrentCell for ElmanCell {
    fn step(&self, tape: &mut Tape, params: &Bound, state: CellState) -> Result<CellState> {
        let h = state.hidden;
        let low = self.update.apply(tape, params, h)?;
        let pre = tape.add(h, low)?;
        let pre = tape.add(pre, params[self.bias])?;
        Ok(CellState {
            hidden: tape.tanh(pre),
            memory: None,
        })
    }
}

/// LSTM cell whose input is the previous hidden state; gate transforms are
/// rank-`r`, the candidate transform is identity plus rank-`r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmCell {
    pub input_gate: (LowRank, ParamId),
    pub forget_gate: (LowRank, ParamId),
    pub output_gate: (LowRank, ParamId),
    pub candidate: (LowRank, ParamId),
}

impl LstmCell {
    const OPEN_GATE_BIAS: f64 = 4.0;

    pub fn new(store: &mut ParamStore, name: &str, state: usize, rank: usize, rng: &mut Rng) -> Self {
        let mut gate = |store: &mut ParamStore, g: &str, bias: f64| {
            let lr = LowRank::new(store, &format!("{name}.{g}"), state, rank, rng);
            let b = store.add(format!("{name}.{g}.b"), Matrix::from_elem((state, 1), bias));
            (lr, b)
        };
        LstmCell {
            input_gate: gate(store, "i", Self::OPEN_GATE_BIAS),
            forget_gate: gate(store, "f", 0.0),
            output_gate: gate(store, "o", Self::OPEN_GATE_BIAS),
            candidate: gate(store, "u", 0.0),
        }
    }

    fn gate(tape: &mut Tape, params: &Bound, g: &(LowRank, ParamId), x: Var) -> Result<Var> {
        let pre = g.0.apply(tape, params, x)?;
        let pre = tape.add(pre, params[g.1])?;
        Ok(tape.sigmoid(pre))
    }
}

impl RecurrentCell for LstmCell {
    fn step(&self, tape: &mut Tape, params: &Bound, state: CellState) -> Result<CellState> {
        let x = state.hidden;
        let i = Self::gate(tape, params, &self.input_gate, x)?;
        let f = Self::gate(tape, params, &self.forget_gate, x)?;
        let o = Self::gate(tape, params, &self.output_gate, x)?;
        let low = self.candidate.0.apply(tape, params, x)?;
        let u = tape.add(x, low)?;
        let u = tape.add(u, params[self.candidate.1])?;
        let u = tape.tanh(u);
        let iu = tape.mul(i, u)?;
        let memory = match state.memory {
            Some(c) => {
                let fc = tape.mul(f, c)?;
                tape.add(fc, iu)?
            }
            None => iu,
        };
        let tc = tape.tanh(memory);
        Ok(CellState {
            hidden: tape.mul(o, tc)?,
            memory: Some(memory),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RnnCell {
    Elman(ElmanCell),
    Lstm(LstmCell),
}

impl RnnCell {
    pub fn new(kind: CellKind, store: &mut ParamStore, name: &str, state: usize, rank: usize, rng: &mut Rng) -> Self {
        match kind {
            CellKind::Elman => RnnCell::Elman(ElmanCell::new(store, name, state, rank, rng)),
            CellKind::Lstm => RnnCell::Lstm(LstmCell::new(store, name, state, rank, rng)),
        }
    }
}

impl RecurrentCell for RnnCell {
    fn step(&self, tape: &mut Tape, params: &Bound, state: CellState) -> Result<CellState> {
        match self {
            RnnCell::Elman(c) => c.step(tape, params, state),
            RnnCell::Lstm(c) => c.step(tape, params, state),
        }
    }
}

/// Seed and shape of a degree weight bank. The bank itself is regenerated
/// from these on every forward pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeWeightBank {
    pub seed: ParamId,
    pub cell: RnnCell,
    pub d_max: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Runs `cell` `d_max + 1` times from `seed` (an `in_dim × out_dim` node) and
/// returns the hidden states reshaped as weights `W_1 … W_{d_max+1}`.
pub fn generate_weight_bank<C: RecurrentCell + ?Sized>(
    tape: &mut Tape,
    params: &Bound,
    seed: Var,
    cell: &C,
    d_max: usize,
) -> Result<Vec<Var>> {
    if d_max < 1 {
        return Err(Error::Contract("d_max must be at least 1".into()));
    }
    let (rows, cols) = tape.shape(seed);
    let flat = tape.reshape(seed, rows * cols, 1)?;
    let mut state = CellState {
        hidden: flat,
        memory: None,
    };
    let mut bank = Vec::with_capacity(d_max + 1);
    for _ in 0..=d_max {
        state = cell.step(tape, params, state)?;
        bank.push(tape.reshape(state.hidden, rows, cols)?);
    }
    Ok(bank)
}

impl DegreeWeightBank {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        d_max: usize,
        kind: CellKind,
        rank: usize,
        rng: &mut Rng,
    ) -> Self {
        let seed = store.add(format!("{name}.seed"), glorot_uniform(in_dim, out_dim, rng));
        let cell = RnnCell::new(kind, store, &format!("{name}.cell"), in_dim * out_dim, rank, rng);
        DegreeWeightBank {
            seed,
            cell,
            d_max,
            in_dim,
            out_dim,
        }
    }

    pub fn generate(&self, tape: &mut Tape, params: &Bound) -> Result<Vec<Var>> {
        generate_weight_bank(tape, params, params[self.seed], &self.cell, self.d_max)
    }

    /// Bank values outside any training tape.
    pub fn materialize(&self, store: &ParamStore) -> Result<Vec<Matrix>> {
        let mut tape = Tape::new();
        let bound = store.bind_frozen(&mut tape);
        let vars = self.generate(&mut tape, &bound)?;
        Ok(vars.into_iter().map(|v| tape.value(v).clone()).collect())
    }
}

/// Degree-specific graph convolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DsgcnLayer {
    pub shared: ParamId,
    pub bank: DegreeWeightBank,
    pub activation: Activation,
    pub index: DegreeIndex,
}

impl DsgcnLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        d_max: usize,
        kind: CellKind,
        rank: usize,
        index: DegreeIndex,
        rng: &mut Rng,
    ) -> Self {
        let shared = store.add(format!("{name}.weight"), glorot_uniform(in_dim, out_dim, rng));
        let bank = DegreeWeightBank::new(store, &format!("{name}.bank"), in_dim, out_dim, d_max, kind, rank, rng);
        DsgcnLayer {
            shared,
            bank,
            activation,
            index,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, ops: &GraphOps, input: LayerInput<'_>) -> Result<Var> {
        let bank = self.bank.generate(tape, params)?;
        self.forward_with_bank(tape, params[self.shared], &bank, ops, input)
    }

    /// Grouped evaluation `σ(Σ_k Â · S_k · H · (W + W_k))` where `S_k` keeps
    /// the rows of nodes in bank slot `k` (neighbour indexing), or
    /// `σ(Σ_k S_k · Â · H · (W + W_k))` under centre indexing.
    pub fn forward_with_bank(
        &self,
        tape: &mut Tape,
        shared: Var,
        bank: &[Var],
        ops: &GraphOps,
        input: LayerInput<'_>,
    ) -> Result<Var> {
        if bank.len() != ops.d_max + 1 {
            return Err(Error::shape(
                "dsgcn_forward",
                format!("bank of {} entries for d_max {}", bank.len(), ops.d_max),
            ));
        }
        let n = input_rows(tape, input);
        if n != ops.num_nodes() {
            return Err(Error::shape(
                "dsgcn_forward",
                format!("{n} input rows for a graph of {} nodes", ops.num_nodes()),
            ));
        }
        let aggregated_input;
        let source = match self.index {
            DegreeIndex::Neighbor => input,
            DegreeIndex::Center => match input {
                LayerInput::Sparse(x) => {
                    aggregated_input = Arc::new(ops.adjacency.mul_sparse(x)?);
                    LayerInput::Sparse(&aggregated_input)
                }
                LayerInput::Dense(h) => LayerInput::Dense(tape.sparse_matmul(&ops.adjacency, h)?),
            },
        };
        let mut total: Option<Var> = None;
        for (k, &wk) in bank.iter().enumerate() {
            if ops.slot_is_empty(k) {
                continue;
            }
            let weight = tape.add(shared, wk)?;
            let part = match source {
                LayerInput::Sparse(x) => {
                    let rows = Arc::new(x.filter_rows(&ops.slot_masks[k]));
                    tape.sparse_matmul(&rows, weight)?
                }
                LayerInput::Dense(h) => {
                    let rows = tape.sparse_matmul(&ops.selectors[k], h)?;
                    tape.matmul(rows, weight)?
                }
            };
            total = Some(match total {
                Some(t) => tape.add(t, part)?,
                None => part,
            });
        }
        let total = match total {
            Some(t) => t,
            None => {
                // Empty graph: keep the output shape.
                let out_dim = tape.shape(shared).1;
                tape.constant(Matrix::zeros((0, out_dim)))
            }
        };
        let out = match self.index {
            DegreeIndex::Neighbor => tape.sparse_matmul(&ops.adjacency, total)?,
            DegreeIndex::Center => total,
        };
        Ok(self.activation.apply(tape, out))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    Gcn(GcnLayer),
    Dsgcn(DsgcnLayer),
}

impl Layer {
    pub fn forward(&self, tape: &mut Tape, params: &Bound, ops: &GraphOps, input: LayerInput<'_>) -> Result<Var> {
        match self {
            Layer::Gcn(l) => l.forward(tape, params, &ops.adjacency, input),
            Layer::Dsgcn(l) => l.forward(tape, params, ops, input),
        }
    }

    /// Shared weight of the layer.
    pub fn shared_weight(&self) -> ParamId {
        match self {
            Layer::Gcn(l) => l.weight,
            Layer::Dsgcn(l) => l.shared,
        }
    }

    /// Parameters penalized by weight decay: the shared weight and the bank seed.
    pub fn decayed_params(&self) -> Vec<ParamId> {
        match self {
            Layer::Gcn(l) => vec![l.weight],
            Layer::Dsgcn(l) => vec![l.shared, l.bank.seed],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
    pub degree_specific: bool,
    pub d_max: usize,
    pub cell: CellKind,
    pub cell_rank: usize,
    pub degree_index: DegreeIndex,
    pub dropout: f64,
    pub add_self_loops: bool,
}

impl StudentConfig {
    pub fn new(in_dim: usize, num_classes: usize, degree_specific: bool) -> Self {
        StudentConfig {
            in_dim,
            hidden: HIDDEN_UNITS,
            num_classes,
            degree_specific,
            d_max: DEFAULT_D_MAX,
            cell: CellKind::Elman,
            cell_rank: DEFAULT_CELL_RANK,
            degree_index: DegreeIndex::Neighbor,
            dropout: 0.5,
            add_self_loops: true,
        }
    }
}

/// Tape nodes produced by one student forward pass.
#[derive(Debug, Clone, Copy)]
pub struct StudentOutput {
    pub representations: Var,
    pub logits: Var,
    pub predictions: Var,
}

/// `φ(ψ(·))`: representation layer `ψ` then classifier layer `φ` with softmax.
#[derive(Debug, Clone)]
pub struct StudentNetwork {
    pub config: StudentConfig,
    pub params: ParamStore,
    pub psi: Layer,
    pub phi: Layer,
}

impl StudentNetwork {
    pub fn new(config: StudentConfig, rng: &mut Rng) -> Self {
        let mut params = ParamStore::new();
        let c = &config;
        let (psi, phi) = if c.degree_specific {
            let psi = DsgcnLayer::new(
                &mut params,
                "psi",
                c.in_dim,
                c.hidden,
                Activation::Relu,
                c.d_max,
                c.cell,
                c.cell_rank,
                c.degree_index,
                rng,
            );
            let phi = DsgcnLayer::new(
                &mut params,
                "phi",
                c.hidden,
                c.num_classes,
                Activation::Identity,
                c.d_max,
                c.cell,
                c.cell_rank,
                c.degree_index,
                rng,
            );
            (Layer::Dsgcn(psi), Layer::Dsgcn(phi))
        } else {
            let psi = GcnLayer::new(&mut params, "psi", c.in_dim, c.hidden, Activation::Relu, rng);
            let phi = GcnLayer::new(&mut params, "phi", c.hidden, c.num_classes, Activation::Identity, rng);
            (Layer::Gcn(psi), Layer::Gcn(phi))
        };
        StudentNetwork {
            config,
            params,
            psi,
            phi,
        }
    }

    /// Rebuilds the layer structure for `config` and installs `params`,
    /// checking names and shapes.
    pub fn from_params(config: StudentConfig, params: ParamStore) -> Result<Self> {
        let mut template = StudentNetwork::new(config, &mut crate::rng::seeded(0));
        if template.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for ((name, expected), (got_name, got)) in template.params.iter().zip(params.iter()) {
            if name != got_name || expected.dim() != got.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {got_name} {:?} does not match {name} {:?}",
                    got.dim(),
                    expected.dim()
                )));
            }
        }
        template.params = params;
        Ok(template)
    }

    pub fn graph_ops(&self, g: &Graph) -> GraphOps {
        GraphOps::new(g, self.config.add_self_loops, self.config.d_max)
    }

    /// Forward pass. Dropout is applied when `dropout_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        ops: &GraphOps,
        features: &Arc<Csr>,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<StudentOutput> {
        let p = self.config.dropout;
        let (input, hidden_mask) = match dropout_rng {
            Some(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let dropped = Arc::new(features.map_values(|_, _, v| if rng.random::<f64>() < p { 0.0 } else { v * keep }));
                let mask = Matrix::from_shape_simple_fn((features.rows(), self.config.hidden), || {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                });
                (dropped, Some(mask))
            }
            _ => (Arc::clone(features), None),
        };
        let reps = self.psi.forward(tape, params, ops, LayerInput::Sparse(&input))?;
        let hidden = match hidden_mask {
            Some(mask) => {
                let m = tape.constant(mask);
                tape.mul(reps, m)?
            }
            None => reps,
        };
        let logits = self.phi.forward(tape, params, ops, LayerInput::Dense(hidden))?;
        let predictions = tape.row_softmax(logits);
        Ok(StudentOutput {
            representations: reps,
            logits,
            predictions,
        })
    }

    /// Representations `ψ(X)` and class probabilities without dropout.
    pub fn predict(&self, ops: &GraphOps, features: &Arc<Csr>) -> Result<(Matrix, Matrix)> {
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let out = self.forward(&mut tape, &bound, ops, features, None)?;
        Ok((
            tape.value(out.representations).clone(),
            tape.value(out.predictions).clone(),
        ))
    }

    pub fn decayed_params(&self) -> Vec<ParamId> {
        self.psi.decayed_params()
    }
}

/// Per-row argmax, ties to the lowest index.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn slot_clamping() {
        assert_eq!(bank_slot(0, 10), 0);
        assert_eq!(bank_slot(1, 10), 0);
        assert_eq!(bank_slot(10, 10), 9);
        assert_eq!(bank_slot(11, 10), 10);
        assert_eq!(bank_slot(13, 10), bank_slot(19, 10));
    }

    #[test]
    fn d_max_zero_rejected() {
        let mut rng = crate::rng::seeded(0);
        let mut store = ParamStore::new();
        let cell = ElmanCell::new(&mut store, "c", 1, 1, &mut rng);
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let seed = tape.param(Matrix::zeros((1, 1)));
        assert!(generate_weight_bank(&mut tape, &bound, seed, &cell, 0).is_err());
    }

    #[test]
    fn single_node_identity_gcn() {
        let g = Graph::from_parts(&[], array![[3.0, -2.0]], vec![None], None).unwrap().0;
        let adj = Arc::new(g.normalized_adjacency(true).into_inner());
        let mut store = ParamStore::new();
        let layer = GcnLayer {
            weight: store.add("w", Matrix::eye(2)),
            activation: Activation::Identity,
        };
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let h = tape.constant(array![[3.0, -2.0]]);
        let out = layer.forward(&mut tape, &bound, &adj, LayerInput::Dense(h)).unwrap();
        assert_eq!(tape.value(out), &array![[3.0, -2.0]]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_rows(&array![[0.5, 0.5], [0.1, 0.9]]), vec![0, 1]);
    }
}
