//! Bayesian teacher over frozen student representations.
//!
//! A two-layer fully connected network whose weights carry a mean-field
//! Gaussian posterior `q(w) = N(μ, σ²)`, trained by maximizing the evidence
//! lower bound with reparameterized samples `w = μ + σ ⊙ ε`. Prediction draws
//! `S` weight samples; the soft label is the argmax of the mean class
//! distribution and the uncertainty is the across-sample variance of the class
//! probabilities, averaged over classes.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_rows, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{argmax_rows, HIDDEN_UNITS};
use crate::optim::{Optimizer, OptimizerKind};
use crate::params::{glorot_uniform, ParamId, ParamStore};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    pub hidden: usize,
    /// Standard deviation of the zero-mean Gaussian prior; infinity disables
    /// the KL term.
    pub prior_std: f64,
    /// Prediction samples `S`.
    pub samples: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Initial value of every posterior log-standard-deviation.
    pub init_log_std: f64,
    /// KL weight; `None` uses `1 / |training set|`.
    pub kl_weight: Option<f64>,
    /// Shift and scale every representation column to zero mean and unit
    /// variance (statistics over all rows) before the network, matching the
    /// unit-scale prior.
    pub standardize: bool,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            hidden: HIDDEN_UNITS,
            prior_std: 1.0,
            samples: 64,
            epochs: 200,
            lr: 1e-2,
            init_log_std: -3.0,
            kl_weight: None,
            standardize: true,
        }
    }
}

/// One Gaussian-distributed tensor: mean and log-standard-deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianParam {
    pub mean: ParamId,
    pub log_std: ParamId,
}

/// Variational posterior over the teacher's weights.
#[derive(Debug, Clone)]
pub struct TeacherPosterior {
    pub config: TeacherConfig,
    pub params: ParamStore,
    /// `[w1, b1, w2, b2]`.
    pub tensors: [GaussianParam; 4],
    pub in_dim: usize,
    pub num_classes: usize,
    /// Per-column `(mean, std)` applied to inputs; identity when not standardizing.
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// ELBO objective per epoch.
    pub losses: Vec<f64>,
}

/// Tape handles for the posterior's parameters, in the order of
/// [`TeacherPosterior::tensors`].
#[derive(Debug, Clone, Copy)]
pub struct PosteriorVars {
    pub mean: [Var; 4],
    pub log_std: [Var; 4],
}

impl TeacherPosterior {
    pub fn new(in_dim: usize, num_classes: usize, config: TeacherConfig, rng: &mut Rng) -> Result<Self> {
        if config.samples < 2 {
            return Err(Error::Config(format!("teacher needs at least 2 samples, got {}", config.samples)));
        }
        if !(config.prior_std > 0.0) {
            return Err(Error::Config(format!("prior std must be positive, got {}", config.prior_std)));
        }
        if !config.init_log_std.is_finite() {
            return Err(Error::Config("initial log-std must be finite".into()));
        }
        let h = config.hidden;
        let shapes = [(in_dim, h), (1, h), (h, num_classes), (1, num_classes)];
        let names = ["w1", "b1", "w2", "b2"];
        let mut params = ParamStore::new();
        let tensors = std::array::from_fn(|k| {
            let (r, c) = shapes[k];
            let init = if r == 1 { Matrix::zeros((r, c)) } else { glorot_uniform(r, c, rng) };
            let mean = params.add(format!("teacher.{}.mean", names[k]), init);
            let log_std = params.add(
                format!("teacher.{}.log_std", names[k]),
                Matrix::from_elem((r, c), config.init_log_std),
            );
            GaussianParam { mean, log_std }
        });
        Ok(TeacherPosterior {
            config,
            params,
            tensors,
            in_dim,
            num_classes,
            input_shift: vec![0.0; in_dim],
            input_scale: vec![1.0; in_dim],
            losses: Vec::new(),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> PosteriorVars {
        let mean = self.tensors.map(|t| tape.param(self.params.get(t.mean).clone()));
        let log_std = self.tensors.map(|t| tape.param(self.params.get(t.log_std).clone()));
        PosteriorVars { mean, log_std }
    }

    /// Standard-normal noise shaped like the four weight tensors.
    pub fn draw_noise(&self, rng: &mut Rng) -> [Matrix; 4] {
        std::array::from_fn(|k| {
            let dim = self.params.get(self.tensors[k].mean).dim();
            Matrix::from_shape_simple_fn(dim, || StandardNormal.sample(rng))
        })
    }

    /// Fixes the input transform from `reps` when standardizing.
    pub fn fit_input_transform(&mut self, reps: &Matrix) {
        if !self.config.standardize || reps.nrows() == 0 {
            return;
        }
        for (c, col) in reps.columns().into_iter().enumerate() {
            let mean = col.mean().unwrap_or(0.0);
            let std = col.std(0.0);
            self.input_shift[c] = mean;
            self.input_scale[c] = if std > 0.0 { std } else { 1.0 };
        }
    }

    /// Applies the input transform.
    pub fn transform(&self, reps: &Matrix) -> Matrix {
        let mut out = reps.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.input_shift[c]) / self.input_scale[c]);
        }
        out
    }

    /// Class probabilities of one sampled network on already transformed `reps`.
    fn sample_probs(&self, reps: &Matrix, noise: &[Matrix; 4]) -> Matrix {
        let w: Vec<Matrix> = (0..4)
            .map(|k| {
                let t = self.tensors[k];
                let mu = self.params.get(t.mean);
                let sigma = self.params.get(t.log_std).mapv(f64::exp);
                mu + &(&sigma * &noise[k])
            })
            .collect();
        let hidden = (reps.dot(&w[0]) + &w[1]).mapv(|v| v.max(0.0));
        softmax_rows(&(hidden.dot(&w[2]) + &w[3]))
    }
}

/// Builds `w = μ + exp(ρ) ⊙ ε` for each tensor.
fn sampled_weights(tape: &mut Tape, vars: &PosteriorVars, noise: &[Matrix; 4]) -> Result<Vec<Var>> {
    (0..4)
        .map(|k| {
            let sigma = tape.exp(vars.log_std[k]);
            let eps = tape.constant(noise[k].clone());
            let scaled = tape.mul(sigma, eps)?;
            tape.add(vars.mean[k], scaled)
        })
        .collect()
}

/// `KL(N(μ, σ²) ‖ N(0, s²))` summed over every weight.
pub fn kl_to_prior(tape: &mut Tape, mean: Var, log_std: Var, prior_std: f64) -> Result<Var> {
    let s2 = prior_std * prior_std;
    let var = tape.scale(log_std, 2.0);
    let var = tape.exp(var);
    let mu2 = tape.mul(mean, mean)?;
    let quad = tape.add(var, mu2)?;
    let quad = tape.scale(quad, 1.0 / (2.0 * s2));
    let neg_rho = tape.scale(log_std, -1.0);
    let per = tape.add(quad, neg_rho)?;
    let total = tape.sum(per);
    let (r, c) = tape.shape(mean);
    let offset = tape.constant(Matrix::from_elem((1, 1), (r * c) as f64 * (prior_std.ln() - 0.5)));
    tape.add(total, offset)
}

/// Negative ELBO for one set of reparameterization noise:
/// mean cross-entropy of the sampled network on `(reps_rows, targets)` plus
/// `kl_weight · KL(q ‖ prior)`.
pub fn negative_elbo(
    tape: &mut Tape,
    vars: &PosteriorVars,
    reps: Var,
    targets: &[usize],
    noise: &[Matrix; 4],
    prior_std: f64,
    kl_weight: f64,
) -> Result<Var> {
    let w = sampled_weights(tape, vars, noise)?;
    let h = tape.matmul(reps, w[0])?;
    let h = tape.add_row(h, w[1])?;
    let h = tape.relu(h);
    let z = tape.matmul(h, w[2])?;
    let z = tape.add_row(z, w[3])?;
    let p = tape.row_softmax(z);
    let n = targets.len() as f64;
    let nll = tape.cross_entropy(p, targets, &vec![1.0 / n; targets.len()])?;
    if kl_weight == 0.0 || prior_std.is_infinite() {
        return Ok(nll);
    }
    let mut kl: Option<Var> = None;
    for k in 0..4 {
        let term = kl_to_prior(tape, vars.mean[k], vars.log_std[k], prior_std)?;
        kl = Some(match kl {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    let kl = tape.scale(kl.expect("four tensors"), kl_weight);
    tape.add(nll, kl)
}

/// Fits the posterior to `(reps[train], labels)`. Representations are
/// constants: no gradient reaches the student.
pub fn train_teacher(
    reps: &Matrix,
    train: &[usize],
    labels: &[usize],
    num_classes: usize,
    config: TeacherConfig,
    init_rng: &mut Rng,
    train_rng: &mut Rng,
) -> Result<TeacherPosterior> {
    if train.is_empty() {
        return Err(Error::Contract("teacher needs at least one training node".into()));
    }
    if train.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} training nodes with {} labels",
            train.len(),
            labels.len()
        )));
    }
    let mut post = TeacherPosterior::new(reps.ncols(), num_classes, config, init_rng)?;
    post.fit_input_transform(reps);
    let kl_weight = config.kl_weight.unwrap_or(1.0 / train.len() as f64);
    let rows = post.transform(&reps.select(ndarray::Axis(0), train));
    let mut opt = Optimizer::new(OptimizerKind::Adam, config.lr);
    for epoch in 0..config.epochs {
        let noise = post.draw_noise(train_rng);
        let mut tape = Tape::new();
        let vars = post.bind(&mut tape);
        let x = tape.constant(rows.clone());
        let loss = negative_elbo(&mut tape, &vars, x, labels, &noise, config.prior_std, kl_weight)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                phase: "teacher",
                epoch,
                loss: value,
            });
        }
        post.losses.push(value);
        let grads = tape.backward(loss)?;
        let mut ordered = Vec::with_capacity(8);
        for (k, t) in post.tensors.iter().enumerate() {
            ordered.push((t.mean, grads.get_or_zeros(vars.mean[k], post.params.get(t.mean).dim())));
            ordered.push((t.log_std, grads.get_or_zeros(vars.log_std[k], post.params.get(t.log_std).dim())));
        }
        ordered.sort_by_key(|(id, _)| id.index());
        let g: Vec<Matrix> = ordered.into_iter().map(|(_, g)| g).collect();
        opt.step(&mut post.params, &g);
    }
    Ok(post)
}

/// Soft labels and uncertainty for every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherOutput {
    pub labels: Vec<usize>,
    pub uncertainty: Vec<f64>,
    #[serde(skip)]
    pub mean_probs: Matrix,
}

impl TeacherOutput {
    /// Summarizes `S` per-sample probability matrices: argmax of the mean row
    /// and the class-averaged population variance across samples.
    pub fn from_samples(samples: &[Matrix]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Contract("no prediction samples".into()));
        };
        let s = samples.len() as f64;
        // Deviations are taken from the first sample so that identical
        // samples give exactly zero variance.
        let mut shift = Matrix::zeros(first.dim());
        for p in samples {
            if p.dim() != first.dim() {
                return Err(Error::shape("teacher_summary", "sample shapes differ"));
            }
            shift += &(p - first);
        }
        shift /= s;
        let mut var = Matrix::zeros(first.dim());
        for p in samples {
            let d = p - first - &shift;
            var += &(&d * &d);
        }
        var /= s;
        let mean = first + &shift;
        let uncertainty = var.rows().into_iter().map(|r| r.mean().unwrap_or(0.0)).collect();
        Ok(TeacherOutput {
            labels: argmax_rows(&mean),
            uncertainty,
            mean_probs: mean,
        })
    }

    /// Writes `node_id,teacher_label,uncertainty` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node_id,teacher_label,uncertainty")?;
        for (i, (l, c)) in self.labels.iter().zip(&self.uncertainty).enumerate() {
            writeln!(out, "{i},{l},{c}")?;
        }
        Ok(())
    }
}

/// Draws `S` networks from the posterior and summarizes their predictions on
/// every row of `reps`. Deterministic given `rng`.
pub fn predict_with_uncertainty(post: &TeacherPosterior, reps: &Matrix, rng: &mut Rng) -> Result<TeacherOutput> {
    if reps.ncols() != post.in_dim {
        return Err(Error::shape(
            "teacher_predict",
            format!("{} representation columns, posterior expects {}", reps.ncols(), post.in_dim),
        ));
    }
    let inputs = post.transform(reps);
    let samples: Vec<Matrix> = (0..post.config.samples)
        .map(|_| {
            let noise = post.draw_noise(rng);
            post.sample_probs(&inputs, &noise)
        })
        .collect();
    TeacherOutput::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_samples_have_zero_uncertainty() {
        let p = array![[0.2, 0.8], [0.6, 0.4]];
        let out = TeacherOutput::from_samples(&[p.clone(), p.clone(), p]).unwrap();
        assert_eq!(out.uncertainty, vec![0.0, 0.0]);
        assert_eq!(out.labels, vec![1, 0]);
    }

    #[test]
    fn alternating_one_hot_samples() {
        let a = array![[1.0, 0.0]];
        let b = array![[0.0, 1.0]];
        let out = TeacherOutput::from_samples(&[a.clone(), b.clone(), a, b]).unwrap();
        assert!((out.uncertainty[0] - 0.25).abs() < 1e-15);
        assert_eq!(out.labels, vec![0]);
        assert!((out.mean_probs[[0, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_is_zero_at_prior() {
        let mut tape = Tape::new();
        let mu = tape.param(Matrix::zeros((2, 3)));
        let rho = tape.param(Matrix::from_elem((2, 3), 0.7f64.ln()));
        let kl = kl_to_prior(&mut tape, mu, rho, 0.7).unwrap();
        assert!(tape.scalar(kl).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut rng = crate::rng::seeded(1);
        let bad = TeacherConfig {
            samples: 1,
            ..TeacherConfig::default()
        };
        assert!(TeacherPosterior::new(4, 2, bad, &mut rng).is_err());
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let reps = array![[1.0, 0.0], [0.0, 1.0]];
        let config = TeacherConfig {
            epochs: 0,
            ..TeacherConfig::default()
        };
        let post = train_teacher(
            &reps,
            &[0, 1],
            &[0, 1],
            2,
            config,
            &mut crate::rng::seeded(3),
            &mut crate::rng::seeded(4),
        )
        .unwrap();
        let fresh = TeacherPosterior::new(2, 2, config, &mut crate::rng::seeded(3)).unwrap();
        for ((_, a), (_, b)) in post.params.iter().zip(fresh.params.iter()) {
            assert_eq!(a, b);
        }
    }
}
