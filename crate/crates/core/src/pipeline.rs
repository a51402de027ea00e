//! Self-supervised training: pre-train the student on annotator pseudo labels,
//! fit the Bayesian teacher on its representations, keep the unlabeled nodes
//! where annotator and teacher agree, then fine-tune with per-node step sizes
//! that shrink with teacher uncertainty and grow with node degree.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{error_by_degree, BucketStats};
use crate::annotator::{accuracy, label_propagation, AnnotatorConfig, PseudoLabels};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::{Graph, SplitMasks};
use crate::layers::{argmax_rows, CellKind, DegreeIndex, GraphOps, StudentConfig, StudentNetwork};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{stream_rng, Rng, Stream};
use crate::sparse::Csr;
use crate::teacher::{predict_with_uncertainty, train_teacher, TeacherConfig, TeacherOutput};

/// Version of the serialized [`RunMetrics`] layout.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Variant {
    #[serde(rename = "GCN")]
    Gcn,
    #[serde(rename = "DSGCN")]
    Dsgcn,
    #[serde(rename = "MT-GNN")]
    MtGnn,
    #[serde(rename = "SL-fs")]
    SlFs,
    #[serde(rename = "SL-GNN")]
    SlGnn,
    #[serde(rename = "SL-DSGCN")]
    #[default]
    SlDsgcn,
    #[serde(rename = "soft-set-A")]
    SoftSetA,
    #[serde(rename = "soft-set-T")]
    SoftSetT,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Gcn,
        Variant::Dsgcn,
        Variant::MtGnn,
        Variant::SlFs,
        Variant::SlGnn,
        Variant::SlDsgcn,
        Variant::SoftSetA,
        Variant::SoftSetT,
    ];

    /// Variants compared by the ablation table, in report order.
    pub const ABLATION: [Variant; 7] = [
        Variant::Dsgcn,
        Variant::MtGnn,
        Variant::SlFs,
        Variant::SlGnn,
        Variant::SlDsgcn,
        Variant::SoftSetA,
        Variant::SoftSetT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "GCN",
            Variant::Dsgcn => "DSGCN",
            Variant::MtGnn => "MT-GNN",
            Variant::SlFs => "SL-fs",
            Variant::SlGnn => "SL-GNN",
            Variant::SlDsgcn => "SL-DSGCN",
            Variant::SoftSetA => "soft-set-A",
            Variant::SoftSetT => "soft-set-T",
        }
    }

    /// Whether the student uses degree-specific layers.
    pub fn degree_specific(self) -> bool {
        !matches!(self, Variant::Gcn | Variant::MtGnn | Variant::SlGnn)
    }

    /// Whether the variant trains on the labeled set only, with no
    /// pseudo-label phase.
    pub fn supervised_only(self) -> bool {
        matches!(self, Variant::Gcn | Variant::Dsgcn)
    }

    /// Whether the teacher runs and a soft-labeled set is built.
    pub fn uses_teacher(self) -> bool {
        !matches!(self, Variant::Gcn | Variant::Dsgcn | Variant::MtGnn)
    }

    /// Whether fine-tuning uses the degree- and uncertainty-aware step size.
    pub fn dynamic_step(self) -> bool {
        !matches!(self, Variant::Gcn | Variant::Dsgcn | Variant::MtGnn | Variant::SlFs)
    }

    pub fn soft_set_kind(self) -> SoftSetKind {
        match self {
            Variant::SoftSetA => SoftSetKind::Annotator,
            Variant::SoftSetT => SoftSetKind::Teacher,
            _ => SoftSetKind::Agreement,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// How the degree factor of the dynamic step size is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepSizeMode {
    /// `exp(β · min(d, d_max) / d_max)`, bounded in `[1, e^β]`.
    #[default]
    Normalized,
    /// `exp(β · min(d, d_max))`.
    Literal,
}

/// Which unlabeled nodes join fine-tuning, and with whose labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftSetKind {
    /// Nodes where annotator and teacher agree.
    Agreement,
    /// Every unlabeled node, annotator labels.
    Annotator,
    /// Every unlabeled node, teacher labels.
    Teacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingPlan {
    /// Set by the caller rather than read from configuration files.
    #[serde(skip)]
    pub variant: Variant,
    /// Base step size `η`.
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub d_max: usize,
    pub step_mode: StepSizeMode,
    pub optimizer: OptimizerKind,
    /// Epochs of supervised training for the labeled-only variants.
    pub supervised_epochs: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    /// Epochs without a training-loss improvement larger than `tol` before a
    /// phase stops early.
    pub patience: usize,
    pub tol: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub cell: CellKind,
    pub cell_rank: usize,
    pub degree_index: DegreeIndex,
    pub teacher: TeacherConfig,
    pub annotator: AnnotatorConfig,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        TrainingPlan {
            variant: Variant::SlDsgcn,
            lr: 0.01,
            alpha: 1.0,
            beta: 1.0,
            d_max: crate::layers::DEFAULT_D_MAX,
            step_mode: StepSizeMode::Normalized,
            optimizer: OptimizerKind::Adam,
            supervised_epochs: 200,
            pretrain_epochs: 200,
            finetune_epochs: 200,
            patience: 20,
            tol: 1e-4,
            weight_decay: 5e-4,
            dropout: 0.5,
            hidden: crate::layers::HIDDEN_UNITS,
            cell: CellKind::Elman,
            cell_rank: crate::layers::DEFAULT_CELL_RANK,
            degree_index: DegreeIndex::Neighbor,
            teacher: TeacherConfig::default(),
            annotator: AnnotatorConfig::default(),
        }
    }
}

impl TrainingPlan {
    pub fn for_variant(variant: Variant) -> Self {
        TrainingPlan {
            variant,
            ..TrainingPlan::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad(format!("alpha and beta must be non-negative, got {} and {}", self.alpha, self.beta));
        }
        if self.d_max == 0 {
            return bad("d_max must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if self.hidden == 0 || self.cell_rank == 0 {
            return bad("hidden and cell_rank must be positive".into());
        }
        if !(self.annotator.tol > 0.0) {
            return bad(format!("annotator tol must be positive, got {}", self.annotator.tol));
        }
        if self.teacher.samples < 2 {
            return bad(format!("teacher samples must be at least 2, got {}", self.teacher.samples));
        }
        Ok(())
    }

    pub fn student_config(&self, g: &Graph, degree_specific: bool) -> StudentConfig {
        StudentConfig {
            in_dim: g.num_features(),
            hidden: self.hidden,
            num_classes: g.num_classes(),
            degree_specific,
            d_max: self.d_max,
            cell: self.cell,
            cell_rank: self.cell_rank,
            degree_index: self.degree_index,
            dropout: self.dropout,
            add_self_loops: true,
        }
    }

    fn step_params(&self) -> (f64, f64) {
        if self.variant.dynamic_step() {
            (self.alpha, self.beta)
        } else {
            (0.0, 0.0)
        }
    }
}

/// `η_i = η · exp(−α c_i) · exp(β g(d_i))` with `g` chosen by `mode`.
pub fn dynamic_step_size(
    eta: f64,
    alpha: f64,
    beta: f64,
    uncertainty: f64,
    degree: usize,
    d_max: usize,
    mode: StepSizeMode,
) -> f64 {
    let d = degree.min(d_max) as f64;
    let degree_term = match mode {
        StepSizeMode::Normalized => d / d_max as f64,
        StepSizeMode::Literal => d,
    };
    eta * (-alpha * uncertainty).exp() * (beta * degree_term).exp()
}

/// One node of the fine-tuning set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftNode {
    pub node: usize,
    pub label: usize,
    pub uncertainty: f64,
    pub degree: usize,
    /// Whether `label` is a ground-truth training label.
    pub labeled: bool,
}

/// Training nodes plus the soft-labeled unlabeled nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabeledSet {
    pub kind: SoftSetKind,
    pub nodes: Vec<SoftNode>,
}

impl SoftLabeledSet {
    /// Number of soft-labeled (non-training) nodes.
    pub fn soft_len(&self) -> usize {
        self.nodes.iter().filter(|n| !n.labeled).count()
    }

    pub fn soft_nodes(&self) -> impl Iterator<Item = &SoftNode> {
        self.nodes.iter().filter(|n| !n.labeled)
    }
}

/// Combines training labels with soft labels on unlabeled nodes (outside both
/// the training and the test set). Uncertainty comes from the teacher for
/// every node, training nodes included.
pub fn build_soft_set(
    g: &Graph,
    masks: &SplitMasks,
    pseudo: &[usize],
    teacher: &TeacherOutput,
    kind: SoftSetKind,
) -> Result<SoftLabeledSet> {
    let n = g.num_nodes();
    if pseudo.len() != n || teacher.labels.len() != n || teacher.uncertainty.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "label sources cover {}/{} nodes, graph has {n}",
            pseudo.len(),
            teacher.labels.len()
        )));
    }
    let degrees = g.degrees();
    let mut nodes = Vec::new();
    for i in masks.train_nodes() {
        let label = g.labels()[i].ok_or_else(|| Error::Contract(format!("training node {i} has no label")))?;
        nodes.push(SoftNode {
            node: i,
            label,
            uncertainty: teacher.uncertainty[i],
            degree: degrees[i],
            labeled: true,
        });
    }
    for i in masks.unlabeled_nodes() {
        let label = match kind {
            SoftSetKind::Agreement if pseudo[i] == teacher.labels[i] => pseudo[i],
            SoftSetKind::Agreement => continue,
            SoftSetKind::Annotator => pseudo[i],
            SoftSetKind::Teacher => teacher.labels[i],
        };
        nodes.push(SoftNode {
            node: i,
            label,
            uncertainty: teacher.uncertainty[i],
            degree: degrees[i],
            labeled: false,
        });
    }
    Ok(SoftLabeledSet { kind, nodes })
}

/// A weighted cross-entropy objective over a node subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub nodes: Vec<usize>,
    pub targets: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Objective {
    /// Mean cross-entropy over `nodes`.
    pub fn uniform(nodes: Vec<usize>, targets: Vec<usize>) -> Self {
        let w = 1.0 / nodes.len().max(1) as f64;
        let weights = vec![w; nodes.len()];
        Objective { nodes, targets, weights }
    }

    /// Per-node weights `(η_i / η) / |set|`: a gradient step of size `η` on
    /// this objective moves each node's loss by its own step size `η_i`.
    pub fn dynamic(set: &SoftLabeledSet, plan: &TrainingPlan) -> Self {
        let (alpha, beta) = plan.step_params();
        let m = set.nodes.len().max(1) as f64;
        let mut o = Objective {
            nodes: Vec::with_capacity(set.nodes.len()),
            targets: Vec::with_capacity(set.nodes.len()),
            weights: Vec::with_capacity(set.nodes.len()),
        };
        for n in &set.nodes {
            o.nodes.push(n.node);
            o.targets.push(n.label);
            let eta_i = dynamic_step_size(1.0, alpha, beta, n.uncertainty, n.degree, plan.d_max, plan.step_mode);
            o.weights.push(eta_i / m);
        }
        o
    }
}

/// Everything a training phase needs about the graph, built once per run.
#[derive(Debug, Clone)]
pub struct TrainingContext {
    pub ops: GraphOps,
    pub features: Arc<Csr>,
}

impl TrainingContext {
    pub fn new(g: &Graph, d_max: usize) -> Self {
        TrainingContext {
            ops: GraphOps::new(g, true, d_max),
            features: Arc::new(g.feature_matrix(true)),
        }
    }
}

/// Full-batch training of `student` on `objective`. Returns the loss per epoch.
pub fn train_phase(
    student: &mut StudentNetwork,
    ctx: &TrainingContext,
    objective: &Objective,
    epochs: usize,
    plan: &TrainingPlan,
    phase: &'static str,
    dropout_rng: &mut Rng,
) -> Result<Vec<f64>> {
    if objective.nodes.is_empty() {
        return Err(Error::Contract(format!("{phase}: no nodes to train on")));
    }
    let mut opt = Optimizer::new(plan.optimizer, plan.lr);
    let decayed = student.decayed_params();
    let mut losses = Vec::with_capacity(epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..epochs {
        let mut tape = Tape::new();
        let bound = student.params.bind(&mut tape);
        let use_dropout = student.config.dropout > 0.0;
        let out = student.forward(
            &mut tape,
            &bound,
            &ctx.ops,
            &ctx.features,
            use_dropout.then_some(&mut *dropout_rng),
        )?;
        let probs = tape.gather_rows(out.predictions, &objective.nodes)?;
        let mut loss = tape.cross_entropy(probs, &objective.targets, &objective.weights)?;
        if plan.weight_decay > 0.0 {
            for &id in &decayed {
                let w = bound[id];
                let sq = tape.mul(w, w)?;
                let s = tape.sum(sq);
                let s = tape.scale(s, plan.weight_decay / 2.0);
                loss = tape.add(loss, s)?;
            }
        }
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite { phase, epoch, loss: value });
        }
        losses.push(value);
        let grads = tape.backward(loss)?;
        let g = student.params.gradients(&bound, &grads);
        opt.step(&mut student.params, &g);

        if value < best - plan.tol {
            best = value;
            stale = 0;
        } else {
            stale += 1;
            if plan.patience > 0 && stale >= plan.patience {
                break;
            }
        }
    }
    Ok(losses)
}

/// Test-set evaluation of a student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub buckets: Vec<BucketStats>,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

pub fn evaluate(student: &StudentNetwork, ctx: &TrainingContext, g: &Graph, masks: &SplitMasks) -> Result<Evaluation> {
    let (_, probs) = student.predict(&ctx.ops, &ctx.features)?;
    let predictions = argmax_rows(&probs);
    let test = masks.test_nodes();
    Ok(Evaluation {
        accuracy: accuracy(&predictions, g.labels(), &test),
        buckets: error_by_degree(&predictions, g.labels(), &test, &ctx.ops.degrees, student.config.d_max),
        predictions,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseLosses {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub supervised: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pretrain: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub teacher: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub finetune: Vec<f64>,
}

/// Serializable outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub effective_seed: u64,
    pub label_rate: f64,
    pub test_frac: f64,
    pub step_mode: StepSizeMode,
    pub accuracy: f64,
    pub buckets: Vec<BucketStats>,
    /// Annotator accuracy on the test nodes, for variants that run it.
    pub annotator_accuracy: Option<f64>,
    /// Student test accuracy after pre-training.
    pub pretrain_accuracy: Option<f64>,
    /// Number of soft-labeled nodes added to the training nodes.
    pub soft_set_size: usize,
    /// Fraction of soft labels that match the (hidden) ground truth.
    pub soft_set_precision: Option<f64>,
    /// Mean teacher uncertainty on training and on unlabeled nodes.
    pub uncertainty_labeled: Option<f64>,
    pub uncertainty_unlabeled: Option<f64>,
    pub losses: PhaseLosses,
}

/// Artifacts of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub student: StudentNetwork,
    pub evaluation: Evaluation,
    pub pseudo: Option<PseudoLabels>,
    pub teacher: Option<TeacherOutput>,
    pub soft_set: Option<SoftLabeledSet>,
}

fn mean_over(values: &[f64], nodes: &[usize]) -> Option<f64> {
    (!nodes.is_empty()).then(|| nodes.iter().map(|&i| values[i]).sum::<f64>() / nodes.len() as f64)
}

/// Pre-trains `student` with a uniform mean cross-entropy over every node,
/// each targeting its pseudo label. Training nodes carry their true labels
/// (the annotator clamps them), so no held-out label is ever read.
pub fn pretrain_student(
    student: &mut StudentNetwork,
    ctx: &TrainingContext,
    pseudo: &[usize],
    plan: &TrainingPlan,
    dropout_rng: &mut Rng,
) -> Result<Vec<f64>> {
    let nodes: Vec<usize> = (0..pseudo.len()).collect();
    let targets = pseudo.to_vec();
    let objective = Objective::uniform(nodes, targets);
    train_phase(student, ctx, &objective, plan.pretrain_epochs, plan, "pretrain", dropout_rng)
}

/// Fine-tunes `student` on `set` with per-node step sizes.
pub fn finetune(
    student: &mut StudentNetwork,
    ctx: &TrainingContext,
    set: &SoftLabeledSet,
    plan: &TrainingPlan,
    dropout_rng: &mut Rng,
) -> Result<Vec<f64>> {
    let objective = Objective::dynamic(set, plan);
    train_phase(student, ctx, &objective, plan.finetune_epochs, plan, "finetune", dropout_rng)
}

/// Runs one variant on one split. Every random draw derives from `seed`.
pub fn run_variant(plan: &TrainingPlan, g: &Graph, masks: &SplitMasks, seed: u64, label_rate: f64, test_frac: f64) -> Result<RunOutcome> {
    plan.validate()?;
    let variant = plan.variant;
    let train = masks.train_nodes();
    if train.is_empty() {
        return Err(Error::Contract(format!("{variant}: no labeled training nodes")));
    }
    let train_labels: Vec<usize> = train
        .iter()
        .map(|&i| g.labels()[i].ok_or_else(|| Error::Contract(format!("training node {i} has no label"))))
        .collect::<Result<_>>()?;
    let ctx = TrainingContext::new(g, plan.d_max);
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut dropout_rng = stream_rng(seed, Stream::Dropout);
    let mut student = StudentNetwork::new(plan.student_config(g, variant.degree_specific()), &mut init_rng);
    let mut losses = PhaseLosses::default();
    let test = masks.test_nodes();

    let mut pseudo = None;
    let mut teacher_out = None;
    let mut soft_set = None;
    let mut pretrain_accuracy = None;
    if variant.supervised_only() {
        let objective = Objective::uniform(train.clone(), train_labels);
        losses.supervised = train_phase(
            &mut student,
            &ctx,
            &objective,
            plan.supervised_epochs,
            plan,
            "supervised",
            &mut dropout_rng,
        )?;
    } else {
        let pl = label_propagation(g, masks, &plan.annotator)?;
        losses.pretrain = pretrain_student(&mut student, &ctx, &pl.labels, plan, &mut dropout_rng)?;
        pretrain_accuracy = Some(evaluate(&student, &ctx, g, masks)?.accuracy);

        let set = if variant.uses_teacher() {
            let (reps, _) = student.predict(&ctx.ops, &ctx.features)?;
            let posterior = train_teacher(
                &reps,
                &train,
                &train_labels,
                g.num_classes(),
                plan.teacher,
                &mut stream_rng(seed, Stream::TeacherInit),
                &mut stream_rng(seed, Stream::TeacherTrain),
            )?;
            losses.teacher = posterior.losses.clone();
            let out = predict_with_uncertainty(&posterior, &reps, &mut stream_rng(seed, Stream::TeacherSample))?;
            let set = build_soft_set(g, masks, &pl.labels, &out, variant.soft_set_kind())?;
            teacher_out = Some(out);
            set
        } else {
            let nodes = train
                .iter()
                .zip(&train_labels)
                .map(|(&node, &label)| SoftNode {
                    node,
                    label,
                    uncertainty: 0.0,
                    degree: ctx.ops.degrees[node],
                    labeled: true,
                })
                .collect();
            SoftLabeledSet {
                kind: SoftSetKind::Agreement,
                nodes,
            }
        };
        losses.finetune = finetune(&mut student, &ctx, &set, plan, &mut dropout_rng)?;
        pseudo = Some(pl);
        soft_set = Some(set);
    }

    let evaluation = evaluate(&student, &ctx, g, masks)?;
    let unlabeled = masks.unlabeled_nodes();
    let soft_precision = soft_set.as_ref().and_then(|s| {
        let known: Vec<&SoftNode> = s.soft_nodes().filter(|n| g.labels()[n.node].is_some()).collect();
        (!known.is_empty())
            .then(|| known.iter().filter(|n| g.labels()[n.node] == Some(n.label)).count() as f64 / known.len() as f64)
    });
    let metrics = RunMetrics {
        schema_version: METRICS_SCHEMA_VERSION,
        variant,
        seed,
        effective_seed: masks.effective_seed,
        label_rate,
        test_frac,
        step_mode: plan.step_mode,
        accuracy: evaluation.accuracy,
        buckets: evaluation.buckets.clone(),
        annotator_accuracy: pseudo.as_ref().map(|p| p.accuracy_on(g, &test)),
        pretrain_accuracy,
        soft_set_size: soft_set.as_ref().map_or(0, |s| s.soft_len()),
        soft_set_precision: soft_precision,
        uncertainty_labeled: teacher_out.as_ref().and_then(|t| mean_over(&t.uncertainty, &train)),
        uncertainty_unlabeled: teacher_out.as_ref().and_then(|t| mean_over(&t.uncertainty, &unlabeled)),
        losses,
    };
    Ok(RunOutcome {
        metrics,
        student,
        evaluation,
        pseudo,
        teacher: teacher_out,
        soft_set,
    })
}
