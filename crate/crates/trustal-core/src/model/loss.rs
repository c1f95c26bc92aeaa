//! Training objective: cross-entropy on oracle labels plus an optional
//! distillation term `alpha * KL(teacher || student)` on teacher pseudo
//! labels, averaged over the batch.

use crate::error::{Error, Result};

use super::{Arch, ModelParams};

/// Probabilities are floored at this value inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy value plus a flag recording whether the numerical floor
/// was hit (`probs[label]` was zero or subnormal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropyLoss {
    pub value: f64,
    pub floored: bool,
}

/// `-log probs[label]`, flooring the probability at [`PROB_FLOOR`].
pub fn loss_ce(probs: &[f64], label: usize) -> Result<CrossEntropyLoss> {
    if label >= probs.len() {
        return Err(Error::Label { label, classes: probs.len() });
    }
    let p = probs[label];
    let floored = p < PROB_FLOOR;
    let value = -p.max(PROB_FLOOR).ln();
    Ok(CrossEntropyLoss { value, floored })
}

/// `KL(teacher || student) = sum_c t_c * ln(t_c / s_c)` with floors inside
/// the logarithm. Zero teacher entries contribute nothing.
pub fn loss_kl(teacher: &[f64], student: &[f64]) -> Result<f64> {
    if teacher.len() != student.len() {
        return Err(Error::Shape(format!(
            "teacher has {} classes, student has {}",
            teacher.len(),
            student.len()
        )));
    }
    let mut total = 0.0;
    for (&t, &s) in teacher.iter().zip(student) {
        if t > 0.0 {
            total += t * (t.max(PROB_FLOOR).ln() - s.max(PROB_FLOOR).ln());
        }
    }
    Ok(total)
}

/// One training example: features, the observed (oracle) label, and the
/// teacher's probability vector when distilling.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub features: &'a [f64],
    pub label: usize,
    pub teacher: Option<&'a [f64]>,
}

fn validate_batch(params: &ModelParams, batch: &[BatchItem], alpha: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if alpha < 0.0 {
        return Err(Error::Argument(format!("alpha must be non-negative, got {alpha}")));
    }
    let with_teacher = batch.iter().filter(|item| item.teacher.is_some()).count();
    if with_teacher != 0 && with_teacher != batch.len() {
        return Err(Error::Shape(
            "teacher probabilities must be present for all of the batch or none of it".into(),
        ));
    }
    for item in batch {
        if item.features.len() != params.input_dim {
            return Err(Error::Dimension { expected: params.input_dim, got: item.features.len() });
        }
        if item.label >= params.classes {
            return Err(Error::Label { label: item.label, classes: params.classes });
        }
        if let Some(t) = item.teacher {
            if t.len() != params.classes {
                return Err(Error::Shape(format!(
                    "teacher vector has {} classes, model has {}",
                    t.len(),
                    params.classes
                )));
            }
        }
    }
    Ok(())
}

/// Mean objective value over the batch. Used by the finite-difference
/// oracle and the training-loss diagnostics; built from the loss
/// primitives, not from the gradient path.
pub fn objective_batch(params: &ModelParams, batch: &[BatchItem], alpha: f64) -> Result<f64> {
    validate_batch(params, batch, alpha)?;
    let mut total = 0.0;
    for item in batch {
        let out = params.forward(item.features)?;
        total += loss_ce(&out.probs, item.label)?.value;
        if alpha > 0.0 {
            if let Some(teacher) = item.teacher {
                total += alpha * loss_kl(teacher, &out.probs)?;
            }
        }
    }
    Ok(total / batch.len() as f64)
}

/// Exact analytic gradient of the mean batch objective with respect to the
/// flat parameter vector. When no teacher vectors are present (or alpha is
/// zero) the distillation term is omitted entirely.
pub fn grad_batch(params: &ModelParams, batch: &[BatchItem], alpha: f64) -> Result<Vec<f64>> {
    validate_batch(params, batch, alpha)?;
    let mut grad = vec![0.0; params.param_len()];
    for item in batch {
        let out = params.forward(item.features)?;
        // d(objective)/d(logits): CE gives p - onehot(y); the KL term adds
        // alpha * (p - teacher).
        let mut dlogits: Vec<f64> = out.probs.clone();
        dlogits[item.label] -= 1.0;
        if alpha > 0.0 {
            if let Some(teacher) = item.teacher {
                for c in 0..params.classes {
                    dlogits[c] += alpha * (out.probs[c] - teacher[c]);
                }
            }
        }
        accumulate(params, item.features, &out.penult, &dlogits, &mut grad);
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(grad)
}

fn accumulate(
    params: &ModelParams,
    x: &[f64],
    penult: &[f64],
    dlogits: &[f64],
    grad: &mut [f64],
) {
    match params.arch {
        Arch::Linear => {
            let (d, c) = (params.input_dim, params.classes);
            for cls in 0..c {
                for j in 0..d {
                    grad[cls * d + j] += dlogits[cls] * x[j];
                }
                grad[c * d + cls] += dlogits[cls];
            }
        }
        Arch::Mlp1 => {
            let (d, h, c) = (params.input_dim, params.hidden_dim, params.classes);
            let off = h * d + h;
            let w2 = &params.theta[off..off + c * h];
            // Output layer.
            for cls in 0..c {
                for k in 0..h {
                    grad[off + cls * h + k] += dlogits[cls] * penult[k];
                }
                grad[off + c * h + cls] += dlogits[cls];
            }
            // Backprop through tanh into the first layer.
            for k in 0..h {
                let mut da = 0.0;
                for cls in 0..c {
                    da += w2[cls * h + k] * dlogits[cls];
                }
                let dz = da * (1.0 - penult[k] * penult[k]);
                for j in 0..d {
                    grad[k * d + j] += dz * x[j];
                }
                grad[h * d + k] += dz;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ce_of_one_hot_is_zero() {
        let got = loss_ce(&[0.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(got.value, 0.0);
        assert!(!got.floored);
    }

    #[test]
    fn ce_of_uniform_is_log_classes() {
        let got = loss_ce(&[0.25; 4], 2).unwrap();
        assert_relative_eq!(got.value, 4.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn ce_rejects_out_of_range_label() {
        assert!(matches!(loss_ce(&[0.5, 0.5], 2), Err(Error::Label { .. })));
    }

    #[test]
    fn ce_flags_floor_on_zero_probability() {
        let got = loss_ce(&[1.0, 0.0], 1).unwrap();
        assert!(got.floored);
        assert_relative_eq!(got.value, -PROB_FLOOR.ln(), epsilon = 1e-9);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(loss_kl(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_point_mass_against_uniform_is_ln_two() {
        assert_relative_eq!(loss_kl(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn kl_is_asymmetric() {
        let p = [0.9, 0.1];
        let q = [0.5, 0.5];
        let pq = loss_kl(&p, &q).unwrap();
        let qp = loss_kl(&q, &p).unwrap();
        assert!((pq - qp).abs() > 1e-3);
    }

    #[test]
    fn kl_rejects_length_mismatch() {
        assert!(matches!(loss_kl(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    fn random_setup(arch: Arch, seed: u64) -> (ModelParams, Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, c) = (4, 5, 3);
        let params = ModelParams::xavier_init(arch, d, h, c, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> =
            (0..6).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<usize> = (0..6).map(|_| rng.random_range(0..c)).collect();
        (params, xs, ys)
    }

    #[test]
    fn alpha_zero_matches_gradient_without_teachers() {
        let (params, xs, ys) = random_setup(Arch::Mlp1, 11);
        let teacher = vec![1.0 / 3.0; 3];
        let with: Vec<BatchItem> = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| BatchItem { features: x, label: y, teacher: Some(&teacher) })
            .collect();
        let without: Vec<BatchItem> = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| BatchItem { features: x, label: y, teacher: None })
            .collect();
        let g1 = grad_batch(&params, &with, 0.0).unwrap();
        let g2 = grad_batch(&params, &without, 0.0).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn one_hot_teacher_scales_ce_gradient() {
        for arch in [Arch::Linear, Arch::Mlp1] {
            let (params, xs, ys) = random_setup(arch, 17);
            let alpha = 0.75;
            let onehots: Vec<Vec<f64>> = ys
                .iter()
                .map(|&y| (0..3).map(|c| if c == y { 1.0 } else { 0.0 }).collect())
                .collect();
            let with: Vec<BatchItem> = xs
                .iter()
                .zip(&ys)
                .zip(&onehots)
                .map(|((x, &y), t)| BatchItem { features: x, label: y, teacher: Some(t) })
                .collect();
            let plain: Vec<BatchItem> = xs
                .iter()
                .zip(&ys)
                .map(|(x, &y)| BatchItem { features: x, label: y, teacher: None })
                .collect();
            let g1 = grad_batch(&params, &with, alpha).unwrap();
            let g2 = grad_batch(&params, &plain, 0.0).unwrap();
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - (1.0 + alpha) * b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for arch in [Arch::Linear, Arch::Mlp1] {
            for alpha in [0.0, 0.75, 10.0] {
                let (params, xs, ys) = random_setup(arch, 23);
                let mut rng = ChaCha8Rng::seed_from_u64(29);
                let teachers: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|_| {
                        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(|v| v / s).collect()
                    })
                    .collect();
                let batch: Vec<BatchItem> = xs
                    .iter()
                    .zip(&ys)
                    .zip(&teachers)
                    .map(|((x, &y), t)| BatchItem { features: x, label: y, teacher: Some(t) })
                    .collect();
                let analytic = grad_batch(&params, &batch, alpha).unwrap();
                let eps = 1e-5;
                for (i, &slope) in analytic.iter().enumerate() {
                    let mut plus = params.clone();
                    plus.theta[i] += eps;
                    let mut minus = params.clone();
                    minus.theta[i] -= eps;
                    let numeric = (objective_batch(&plus, &batch, alpha).unwrap()
                        - objective_batch(&minus, &batch, alpha).unwrap())
                        / (2.0 * eps);
                    let denom = slope.abs().max(numeric.abs()).max(1e-4);
                    assert!(
                        ((slope - numeric) / denom).abs() < 1e-4,
                        "{arch:?} alpha={alpha} param {i}: analytic {slope} vs numeric {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_the_distillation_optimum() {
        // Teacher = one-hot at the observed label; as the student saturates
        // toward that same one-hot, the gradient norm must shrink to zero.
        let x = [1.0, 0.0];
        let teacher = [1.0, 0.0];
        let mut norms = Vec::new();
        for scale in [1.0, 5.0, 25.0, 125.0] {
            let mut params = ModelParams::zeros(Arch::Linear, 2, 0, 2).unwrap();
            params.theta[0] = scale; // logit gap grows with scale
            let batch = [BatchItem { features: &x, label: 0, teacher: Some(&teacher) }];
            let g = grad_batch(&params, &batch, 0.75).unwrap();
            norms.push(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        for pair in norms.windows(2) {
            assert!(pair[1] < pair[0]);
        }
        assert!(*norms.last().unwrap() < 1e-9);
    }

    #[test]
    fn mixed_teacher_presence_is_rejected() {
        let (params, xs, ys) = random_setup(Arch::Linear, 31);
        let teacher = vec![1.0 / 3.0; 3];
        let batch = [
            BatchItem { features: &xs[0], label: ys[0], teacher: Some(&teacher) },
            BatchItem { features: &xs[1], label: ys[1], teacher: None },
        ];
        assert!(matches!(grad_batch(&params, &batch, 0.5), Err(Error::Shape(_))));
    }
}
