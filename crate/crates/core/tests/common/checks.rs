//! Property checks shared by the module suites and the acceptance harness.
//! Each returns its worst-case error (or its mismatches) so callers can
//! assert at the stated tolerance and report the measured value.

use ndarray::Array2;
use rand::Rng as _;
use sldsgcn::annotator::{label_propagation, AnnotatorConfig};
use sldsgcn::autodiff::{Matrix, Tape, Var};
use sldsgcn::gradcheck::finite_diff_check;
use sldsgcn::graph::{Graph, SplitMasks};
use sldsgcn::layers::*;
use sldsgcn::optim::OptimizerKind;
use sldsgcn::params::{Bound, ParamStore};
use sldsgcn::pipeline::{build_soft_set, finetune, SoftLabeledSet, SoftSetKind, TrainingContext, TrainingPlan, Variant};
use sldsgcn::rng::{seeded, Rng};
use sldsgcn::teacher::{negative_elbo, PosteriorVars, TeacherConfig, TeacherOutput, TeacherPosterior};
use sldsgcn::Result;

use super::*;

pub const EXACT: f64 = 1e-12;
pub const GRAD_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

/// A named measurement, e.g. one tensor's relative gradient error.
pub type Named = (String, f64);

pub fn worst(errs: &[Named]) -> Named {
    errs.iter()
        .cloned()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_else(|| ("none".into(), 0.0))
}

pub fn relu(m: Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.max(0.0))
}

pub fn star_edges(leaves: usize) -> Vec<(usize, usize)> {
    (1..=leaves).map(|l| (0, l)).collect()
}

/// Adds uniform noise in `±0.3` to every tensor, moving cells away from
/// their near-identity start.
pub fn perturb(store: &mut ParamStore, rng: &mut Rng) {
    for m in store.values_mut() {
        let noise = random_dense(m.nrows(), m.ncols(), rng) * 0.3;
        *m += &noise;
    }
}

pub fn projection_loss(tape: &mut Tape, out: Var, proj: &Matrix) -> Result<Var> {
    let p = tape.constant(proj.clone());
    let m = tape.mul(out, p)?;
    Ok(tape.sum(m))
}

/// Gradient check of `loss` with respect to every tensor in `store`.
pub fn gradcheck_all<F>(store: &ParamStore, loss: F) -> Vec<Named>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    store
        .ids()
        .map(|id| {
            let err = finite_diff_check(
                |tape, v| {
                    let bound = store.bind_substituted(tape, id, v);
                    loss(tape, &bound)
                },
                store.get(id),
                FD_STEP,
            )
            .unwrap();
            (store.name(id).to_string(), err)
        })
        .collect()
}

fn prefixed(label: &str, errs: Vec<Named>) -> Vec<Named> {
    errs.into_iter().map(|(n, e)| (format!("{label} {n}"), e)).collect()
}

pub fn dsgcn_layer(store: &mut ParamStore, in_dim: usize, out_dim: usize, d_max: usize, index: DegreeIndex, act: Activation, rng: &mut Rng) -> DsgcnLayer {
    DsgcnLayer::new(store, "l", in_dim, out_dim, act, d_max, CellKind::Elman, 2, index, rng)
}

/// Direct node-by-node evaluation of the degree-specific convolution.
#[allow(clippy::too_many_arguments)]
pub fn dsgcn_loop_oracle(
    a_hat: &Array2<f64>,
    degrees: &[usize],
    d_max: usize,
    h: &Array2<f64>,
    shared: &Array2<f64>,
    bank: &[Array2<f64>],
    index: DegreeIndex,
    relu_out: bool,
) -> Array2<f64> {
    let n = a_hat.nrows();
    let mut out = Array2::zeros((n, shared.ncols()));
    for i in 0..n {
        for j in 0..n {
            let a = a_hat[[i, j]];
            if a == 0.0 {
                continue;
            }
            let d = match index {
                DegreeIndex::Neighbor => degrees[j],
                DegreeIndex::Center => degrees[i],
            };
            let k = d.clamp(1, d_max + 1) - 1;
            let w = shared + &bank[k];
            let contrib = h.row(j).dot(&w) * a;
            let mut row = out.row_mut(i);
            row += &contrib;
        }
    }
    if relu_out {
        relu(out)
    } else {
        out
    }
}

/// Worst deviation of the grouped layer (sparse and dense inputs, both
/// indexings, ReLU and identity) from the per-node loop on one graph.
pub fn loop_equivalence_error(n: usize, edges: &[(usize, usize)], d_max: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = graph_from_edges(n, edges, 3, 2, &mut rng);
    let ops = GraphOps::new(&g, true, d_max);
    let a = dense_normalized(n, edges);
    let degrees = g.degrees().0;
    let x = g.features().clone();
    let mut worst = 0.0f64;
    for index in [DegreeIndex::Neighbor, DegreeIndex::Center] {
        for act in [Activation::Relu, Activation::Identity] {
            let mut store = ParamStore::new();
            let layer = dsgcn_layer(&mut store, 3, 4, d_max, index, act, &mut rng);
            perturb(&mut store, &mut rng);
            let bank = layer.bank.materialize(&store).unwrap();
            let expected = dsgcn_loop_oracle(&a, &degrees, d_max, &x, store.get(layer.shared), &bank, index, act == Activation::Relu);

            let mut tape = Tape::new();
            let bound = store.bind_frozen(&mut tape);
            let xs = sparse(&x);
            let sparse_out = layer.forward(&mut tape, &bound, &ops, LayerInput::Sparse(&xs)).unwrap();
            let xd = tape.constant(x.clone());
            let dense_out = layer.forward(&mut tape, &bound, &ops, LayerInput::Dense(xd)).unwrap();
            worst = worst
                .max(max_abs_diff(tape.value(sparse_out), &expected))
                .max(max_abs_diff(tape.value(dense_out), &expected));
        }
    }
    worst
}

/// The loop comparison on two stars and twenty random graphs.
pub fn loop_equivalence_sweep() -> f64 {
    let mut worst = loop_equivalence_error(4, &star_edges(3), 2, 11).max(loop_equivalence_error(4, &star_edges(3), DEFAULT_D_MAX, 12));
    for seed in 0..20 {
        let mut rng = seeded(100 + seed);
        let n = 5 + (seed as usize % 6);
        let edges = random_edges(n, 0.45, &mut rng);
        worst = worst.max(loop_equivalence_error(n, &edges, 1 + seed as usize % 3, seed));
    }
    worst
}

/// Worst deviation between a degree-specific layer with an all-zero bank and
/// a plain GCN layer sharing its weight, over ten random graphs.
pub fn zero_bank_reduction_error() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = seeded(seed);
        let n = 7;
        let edges = random_edges(n, 0.4, &mut rng);
        let g = graph_from_edges(n, &edges, 3, 2, &mut rng);
        let ops = GraphOps::new(&g, true, 3);
        for index in [DegreeIndex::Neighbor, DegreeIndex::Center] {
            let mut store = ParamStore::new();
            let layer = dsgcn_layer(&mut store, 3, 4, 3, index, Activation::Relu, &mut rng);
            let gcn = GcnLayer {
                weight: layer.shared,
                activation: Activation::Relu,
            };
            let mut tape = Tape::new();
            let bound = store.bind_frozen(&mut tape);
            let zeros: Vec<Var> = (0..4).map(|_| tape.constant(Array2::zeros((3, 4)))).collect();
            let x = sparse(g.features());
            let ds = layer
                .forward_with_bank(&mut tape, bound[layer.shared], &zeros, &ops, LayerInput::Sparse(&x))
                .unwrap();
            let plain = gcn.forward(&mut tape, &bound, &ops.adjacency, LayerInput::Sparse(&x)).unwrap();
            worst = worst.max(max_abs_diff(tape.value(ds), tape.value(plain)));
        }
    }
    worst
}

pub fn gcn_gradcheck() -> Vec<Named> {
    let mut out = Vec::new();
    for seed in 0..5 {
        let mut rng = seeded(seed);
        let edges = random_edges(6, 0.5, &mut rng);
        let g = graph_from_edges(6, &edges, 3, 2, &mut rng);
        let ops = GraphOps::new(&g, true, 2);
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "g", 3, 4, Activation::Identity, &mut rng);
        let proj = random_dense(6, 4, &mut rng);
        let x = g.features().clone();
        let errs = gradcheck_all(&store, |tape, bound| {
            let xd = tape.constant(x.clone());
            let h = tape.tanh(xd);
            let out = layer.forward(tape, bound, &ops.adjacency, LayerInput::Dense(h))?;
            projection_loss(tape, out, &proj)
        });
        out.extend(prefixed(&format!("gcn seed {seed}"), errs));
    }
    out
}

/// Degree-specific layer gradients for Elman and LSTM generators under both
/// indexings, covering the shared weight, the bank seed and every cell tensor.
pub fn dsgcn_gradcheck() -> Vec<Named> {
    let mut out = Vec::new();
    for (seed, kind) in [(0, CellKind::Elman), (1, CellKind::Elman), (2, CellKind::Lstm), (3, CellKind::Lstm)] {
        let mut rng = seeded(seed);
        let edges = random_edges(6, 0.5, &mut rng);
        let g = graph_from_edges(6, &edges, 3, 2, &mut rng);
        for index in [DegreeIndex::Neighbor, DegreeIndex::Center] {
            let ops = GraphOps::new(&g, true, 2);
            let mut store = ParamStore::new();
            let layer = DsgcnLayer::new(&mut store, "l", 3, 2, Activation::Identity, 2, kind, 2, index, &mut rng);
            perturb(&mut store, &mut rng);
            let proj = random_dense(6, 2, &mut rng);
            let x = g.features().clone();
            let errs = gradcheck_all(&store, |tape, bound| {
                let xd = tape.constant(x.clone());
                let out = layer.forward(tape, bound, &ops, LayerInput::Dense(xd))?;
                projection_loss(tape, out, &proj)
            });
            out.extend(prefixed(&format!("dsgcn {kind:?} {index:?}"), errs));
        }
    }
    out
}

/// Gradients of a loss on every generated bank entry with respect to the
/// seed and the recurrent cell.
pub fn generator_gradcheck() -> Vec<Named> {
    let mut out = Vec::new();
    for kind in [CellKind::Elman, CellKind::Lstm] {
        let mut rng = seeded(8);
        let mut store = ParamStore::new();
        let bank = DegreeWeightBank::new(&mut store, "b", 3, 2, 4, kind, 2, &mut rng);
        perturb(&mut store, &mut rng);
        let projs: Vec<Matrix> = (0..5).map(|_| random_dense(3, 2, &mut rng)).collect();
        let errs = gradcheck_all(&store, |tape, bound| {
            let entries = bank.generate(tape, bound)?;
            let mut total = None;
            for (w, p) in entries.into_iter().zip(&projs) {
                let l = projection_loss(tape, w, p)?;
                total = Some(match total {
                    Some(t) => tape.add(t, l)?,
                    None => l,
                });
            }
            Ok(total.unwrap())
        });
        out.extend(prefixed(&format!("generator {kind:?}"), errs));
    }
    out
}

fn toy_posterior(seed: u64) -> TeacherPosterior {
    let config = TeacherConfig {
        hidden: 3,
        ..TeacherConfig::default()
    };
    let mut post = TeacherPosterior::new(4, 3, config, &mut seeded(seed)).unwrap();
    // Move the means off their initialization and the log-stds apart.
    let mut rng = seeded(seed + 100);
    for m in post.params.values_mut() {
        let noise = random_dense(m.nrows(), m.ncols(), &mut rng) * 0.5;
        *m += &noise;
    }
    post
}

/// Negative ELBO with one mean (or log-std) tensor replaced by `v`.
#[allow(clippy::too_many_arguments)]
fn elbo_with(tape: &mut Tape, post: &TeacherPosterior, slot: usize, log_std: bool, v: Var, reps: &Matrix, targets: &[usize], noise: &[Matrix; 4]) -> Result<Var> {
    let mut mean = post.tensors.map(|t| tape.constant(post.params.get(t.mean).clone()));
    let mut ls = post.tensors.map(|t| tape.constant(post.params.get(t.log_std).clone()));
    if log_std {
        ls[slot] = v;
    } else {
        mean[slot] = v;
    }
    let vars = PosteriorVars { mean, log_std: ls };
    let x = tape.constant(reps.clone());
    negative_elbo(tape, &vars, x, targets, noise, 1.3, 0.2)
}

/// ELBO gradients for all eight posterior tensors; each check reuses one
/// fixed noise draw (common random numbers).
pub fn elbo_gradcheck() -> Vec<Named> {
    let mut out = Vec::new();
    for seed in 0..3 {
        let post = toy_posterior(seed);
        let reps = random_dense(7, 4, &mut seeded(seed + 7));
        let targets = [0, 1, 2, 2, 1, 0, 1];
        let noise = post.draw_noise(&mut seeded(seed + 11));
        for slot in 0..4 {
            for log_std in [false, true] {
                let t = post.tensors[slot];
                let id = if log_std { t.log_std } else { t.mean };
                let err = finite_diff_check(|tape, v| elbo_with(tape, &post, slot, log_std, v, &reps, &targets, &noise), post.params.get(id), FD_STEP).unwrap();
                out.push((format!("elbo seed {seed} {}", post.params.name(id)), err));
            }
        }
    }
    out
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Solves `m · x = rhs` by Gaussian elimination with partial pivoting.
fn solve(mut m: Array2<f64>, mut rhs: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[[a, col]].abs().total_cmp(&m[[b, col]].abs())).unwrap();
        assert!(m[[pivot, col]].abs() > 1e-12, "singular system");
        for k in 0..n {
            m.swap([col, k], [pivot, k]);
        }
        for k in 0..rhs.ncols() {
            rhs.swap([col, k], [pivot, k]);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            for k in 0..rhs.ncols() {
                rhs[[row, k]] -= f * rhs[[col, k]];
            }
        }
    }
    for row in 0..n {
        let d = m[[row, row]];
        rhs.row_mut(row).mapv_inplace(|v| v / d);
    }
    rhs
}

/// Ties closer than this in the oracle resolve to the lower class index.
const TIE: f64 = 1e-9;

/// Fixed point of clamped random-walk propagation: the harmonic solution
/// `Y_U = (I − P_UU)⁻¹ P_UL Y_L` with `P = D⁻¹A`.
pub fn lp_oracle(n: usize, edges: &[(usize, usize)], labeled: &[(usize, usize)], classes: usize) -> Vec<usize> {
    let a = dense_adjacency(n, edges);
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    let is_labeled = |i: usize| labeled.iter().any(|&(j, _)| j == i);
    let unl: Vec<usize> = (0..n).filter(|&i| !is_labeled(i)).collect();
    let mut m = Array2::zeros((unl.len(), unl.len()));
    let mut rhs = Array2::zeros((unl.len(), classes));
    for (r, &i) in unl.iter().enumerate() {
        m[[r, r]] = 1.0;
        for (s, &j) in unl.iter().enumerate() {
            m[[r, s]] -= a[[i, j]] / deg[i];
        }
        for &(j, c) in labeled {
            rhs[[r, c]] += a[[i, j]] / deg[i];
        }
    }
    let y_u = solve(m, rhs);
    let mut out = vec![0; n];
    for &(i, c) in labeled {
        out[i] = c;
    }
    for (r, &i) in unl.iter().enumerate() {
        let row = y_u.row(r);
        let mut best = 0;
        for c in 1..classes {
            if row[c] > row[best] + TIE {
                best = c;
            }
        }
        out[i] = best;
    }
    out
}

pub fn run_lp(n: usize, edges: &[(usize, usize)], labeled: &[(usize, usize)], classes: usize) -> Vec<usize> {
    let mut labels = vec![None; n];
    for &(i, c) in labeled {
        labels[i] = Some(c);
    }
    let g = Graph::from_parts(edges, Array2::zeros((n, 1)), labels, Some(classes)).unwrap().0;
    let train: Vec<usize> = labeled.iter().map(|&(i, _)| i).collect();
    let masks = SplitMasks::from_sets(n, &train, &[]).unwrap();
    let out = label_propagation(&g, &masks, &AnnotatorConfig::default()).unwrap();
    assert!(out.converged);
    out.labels
}

/// All labelings that assign classes 0/1 to a nonempty node subset, encoded
/// base 3 (0 = unlabeled).
fn labelings(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    (1..3usize.pow(n as u32)).map(move |mut code| {
        let mut out = Vec::new();
        for i in 0..n {
            match code % 3 {
                1 => out.push((i, 0)),
                2 => out.push((i, 1)),
                _ => {}
            }
            code /= 3;
        }
        out
    })
}

pub struct LpSweep {
    pub graphs: usize,
    pub cases: usize,
    pub mismatches: Vec<String>,
}

/// Label propagation against the harmonic oracle on every connected graph
/// with one to six nodes: every labeling up to five nodes, four seeded
/// labelings per six-node graph.
pub fn lp_oracle_sweep() -> LpSweep {
    let mut rng = seeded(0);
    let mut sweep = LpSweep {
        graphs: 0,
        cases: 0,
        mismatches: Vec::new(),
    };
    for n in 1..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
            if !connected(n, &edges) {
                continue;
            }
            sweep.graphs += 1;
            let all: Vec<Vec<(usize, usize)>> = labelings(n).collect();
            let chosen: Vec<&Vec<(usize, usize)>> = if n <= 5 {
                all.iter().collect()
            } else {
                (0..4).map(|_| &all[rng.random_range(0..all.len())]).collect()
            };
            for labeled in chosen {
                if lp_oracle(n, &edges, labeled, 2) != run_lp(n, &edges, labeled, 2) {
                    sweep.mismatches.push(format!("n={n} edges={edges:?} labeled={labeled:?}"));
                }
                sweep.cases += 1;
            }
        }
    }
    sweep
}

fn teacher_stub(labels: Vec<usize>, uncertainty: Vec<f64>) -> TeacherOutput {
    let n = labels.len();
    TeacherOutput {
        labels,
        uncertainty,
        mean_probs: Matrix::zeros((n, 3)),
    }
}

/// Fine-tuning with α = β = 0 on the labeled set against plain gradient
/// descent written out directly; the worst loss or parameter deviation.
pub fn sgd_reduction_error() -> f64 {
    let mut rng = seeded(1);
    let edges = random_edges(40, 0.12, &mut rng);
    let g = graph_from_edges(40, &edges, 8, 3, &mut rng);
    let train: Vec<usize> = (0..9).collect();
    let test: Vec<usize> = (30..40).collect();
    let masks = SplitMasks::from_sets(40, &train, &test).unwrap();
    let mut plan = TrainingPlan::for_variant(Variant::SlDsgcn);
    plan.alpha = 0.0;
    plan.beta = 0.0;
    plan.optimizer = OptimizerKind::Sgd;
    plan.lr = 0.05;
    plan.weight_decay = 0.0;
    plan.patience = 0;
    plan.finetune_epochs = 12;
    plan.hidden = 6;
    plan.d_max = 4;
    plan.cell_rank = 2;

    // Training nodes only, with arbitrary uncertainties that α = 0 ignores.
    let teacher = teacher_stub(vec![0; 40], (0..40).map(|i| i as f64 * 0.37).collect());
    let pseudo: Vec<usize> = (0..40).map(|i| (i + 1) % 3).collect();
    let set = build_soft_set(&g, &masks, &pseudo, &teacher, SoftSetKind::Agreement).unwrap();
    let set = SoftLabeledSet {
        nodes: set.nodes.into_iter().filter(|n| n.labeled).collect(),
        ..set
    };

    let ctx = TrainingContext::new(&g, plan.d_max);
    let mut config = plan.student_config(&g, true);
    config.dropout = 0.0;
    let mut student = StudentNetwork::new(config, &mut seeded(3));
    let mut reference = student.clone();
    let losses = finetune(&mut student, &ctx, &set, &plan, &mut seeded(0)).unwrap();
    assert_eq!(losses.len(), plan.finetune_epochs);

    // θ ← θ − η ∇ mean CE over 𝒱^L.
    let targets: Vec<usize> = train.iter().map(|&i| g.labels()[i].unwrap()).collect();
    let w = vec![1.0 / train.len() as f64; train.len()];
    let mut worst = 0.0f64;
    for &loss in &losses {
        let mut tape = Tape::new();
        let bound = reference.params.bind(&mut tape);
        let out = reference.forward(&mut tape, &bound, &ctx.ops, &ctx.features, None).unwrap();
        let p = tape.gather_rows(out.predictions, &train).unwrap();
        let l = tape.cross_entropy(p, &targets, &w).unwrap();
        worst = worst.max((tape.scalar(l) - loss).abs());
        let grads = tape.backward(l).unwrap();
        let g = reference.params.gradients(&bound, &grads);
        for (m, d) in reference.params.values_mut().zip(&g) {
            m.scaled_add(-plan.lr, d);
        }
    }
    for ((_, a), (_, b)) in student.params.iter().zip(reference.params.iter()) {
        worst = worst.max(max_abs_diff(a, b));
    }
    worst
}
