//! Small differentiable classifiers.
//!
//! Two architectures: plain multinomial logistic regression (`Linear`) and
//! a one-hidden-layer tanh network (`Mlp1`). Parameters live in one flat
//! vector so the optimizer, gradient checks and serialization all work on
//! a single contiguous slice; the JSON form is that flat array plus the
//! shape fields.

mod loss;
mod train;

pub use loss::{grad_batch, loss_ce, loss_kl, objective_batch, BatchItem, CrossEntropyLoss};
pub use train::{dev_accuracy, test_accuracy, train, Adam, TeacherProbs, TrainConfig, TrainOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Linear,
    Mlp1,
}

impl std::str::FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Arch::Linear),
            "mlp1" => Ok(Arch::Mlp1),
            other => Err(Error::Argument(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Trained (or initialized) parameters of one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Arch,
    pub input_dim: usize,
    /// Hidden width; 0 for the linear architecture.
    pub hidden_dim: usize,
    pub classes: usize,
    /// Flat parameter vector. Linear: `[W (C*d), b (C)]`.
    /// Mlp1: `[W1 (h*d), b1 (h), W2 (C*h), b2 (C)]`.
    pub theta: Vec<f64>,
}

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Penultimate representation: hidden activations for `Mlp1`, the raw
    /// input features for `Linear`.
    pub penult: Vec<f64>,
}

impl ModelParams {
    fn checked_new(arch: Arch, input_dim: usize, hidden_dim: usize, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Argument(format!("need at least 2 classes, got {classes}")));
        }
        if input_dim == 0 {
            return Err(Error::Argument("input dimension must be at least 1".into()));
        }
        let hidden_dim = match arch {
            Arch::Linear => 0,
            Arch::Mlp1 => {
                if hidden_dim == 0 {
                    return Err(Error::Argument("mlp1 needs a positive hidden width".into()));
                }
                hidden_dim
            }
        };
        let len = match arch {
            Arch::Linear => classes * input_dim + classes,
            Arch::Mlp1 => hidden_dim * input_dim + hidden_dim + classes * hidden_dim + classes,
        };
        Ok(Self { arch, input_dim, hidden_dim, classes, theta: vec![0.0; len] })
    }

    /// All-zero parameters (uniform predictions everywhere).
    pub fn zeros(arch: Arch, input_dim: usize, hidden_dim: usize, classes: usize) -> Result<Self> {
        Self::checked_new(arch, input_dim, hidden_dim, classes)
    }

    /// Xavier-uniform weight init with zero biases.
    pub fn xavier_init<R: Rng>(
        arch: Arch,
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::checked_new(arch, input_dim, hidden_dim, classes)?;
        match arch {
            Arch::Linear => {
                let limit = (6.0 / (input_dim + classes) as f64).sqrt();
                for w in &mut params.theta[..classes * input_dim] {
                    *w = rng.random_range(-limit..limit);
                }
            }
            Arch::Mlp1 => {
                let h = hidden_dim;
                let l1 = (6.0 / (input_dim + h) as f64).sqrt();
                for w in &mut params.theta[..h * input_dim] {
                    *w = rng.random_range(-l1..l1);
                }
                let l2 = (6.0 / (h + classes) as f64).sqrt();
                let off = h * input_dim + h;
                for w in &mut params.theta[off..off + classes * h] {
                    *w = rng.random_range(-l2..l2);
                }
            }
        }
        Ok(params)
    }

    /// Dimensionality of the penultimate representation.
    pub fn penult_dim(&self) -> usize {
        match self.arch {
            Arch::Linear => self.input_dim,
            Arch::Mlp1 => self.hidden_dim,
        }
    }

    pub fn param_len(&self) -> usize {
        self.theta.len()
    }

    /// Evaluate the classifier on one input.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardOutput> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension { expected: self.input_dim, got: x.len() });
        }
        let (logits, penult) = match self.arch {
            Arch::Linear => {
                let (d, c) = (self.input_dim, self.classes);
                let w = &self.theta[..c * d];
                let b = &self.theta[c * d..];
                let mut logits = vec![0.0; c];
                for cls in 0..c {
                    let mut z = b[cls];
                    for j in 0..d {
                        z += w[cls * d + j] * x[j];
                    }
                    logits[cls] = z;
                }
                (logits, x.to_vec())
            }
            Arch::Mlp1 => {
                let (d, h, c) = (self.input_dim, self.hidden_dim, self.classes);
                let w1 = &self.theta[..h * d];
                let b1 = &self.theta[h * d..h * d + h];
                let off = h * d + h;
                let w2 = &self.theta[off..off + c * h];
                let b2 = &self.theta[off + c * h..];
                let mut hidden = vec![0.0; h];
                for k in 0..h {
                    let mut z = b1[k];
                    for j in 0..d {
                        z += w1[k * d + j] * x[j];
                    }
                    hidden[k] = z.tanh();
                }
                let mut logits = vec![0.0; c];
                for cls in 0..c {
                    let mut z = b2[cls];
                    for k in 0..h {
                        z += w2[cls * h + k] * hidden[k];
                    }
                    logits[cls] = z;
                }
                (logits, hidden)
            }
        };
        let probs = softmax(&logits);
        Ok(ForwardOutput { logits, probs, penult })
    }

    /// Predicted class: argmax of the forward probabilities, ties broken
    /// toward the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.probs))
    }
}

/// Numerically stable softmax (max-shifted log-sum-exp).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
