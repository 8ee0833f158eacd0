use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{log_softmax, Policy, Tape};

use super::{Adam, PpoError, RolloutBuffer, TrainConfig};

/// Training samples for one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub features: Array2<f64>,
    /// `batch x action_dims` bin indices.
    pub bins: Vec<Vec<usize>>,
    pub old_log_probs: Vec<f64>,
    pub old_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Negated clipped surrogate.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    /// Fraction of samples with `|ratio - 1| > clip_range`.
    pub clip_fraction: f64,
    /// Mean of `old_log_prob - new_log_prob`.
    pub approx_kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Mean pre-clipping gradient norm.
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub advantage_mean: f64,
    pub advantage_std: f64,
    pub explained_variance: f64,
}

/// Shifts and scales to zero mean and unit variance; returns the original `(mean, std)`.
pub fn normalize_advantages(adv: &mut [f64]) -> (f64, f64) {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return (0.0, 0.0);
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std;
        }
    }
    (mean, std)
}

/// Loss and, when `want_grad`, its derivatives with respect to logits and values.
fn loss_from_outputs(
    logits: &Array2<f64>,
    values: &Array1<f64>,
    batch: &MiniBatch,
    bins: usize,
    config: &TrainConfig,
    want_grad: bool,
) -> (LossParts, Option<(Array2<f64>, Array1<f64>)>) {
    let logits = logits.as_standard_layout();
    let n = batch.len();
    let nf = n as f64;
    let eps = config.clip_range;
    let mut parts = LossParts::default();
    let mut dlogits = Array2::zeros(if want_grad { logits.dim() } else { (0, 0) });
    let mut dvalues = Array1::zeros(if want_grad { n } else { 0 });

    for i in 0..n {
        let row = logits.row(i);
        let row = row.as_slice().expect("standard layout");
        let dims = batch.bins[i].len();
        let mut logp = 0.0;
        let mut entropy = 0.0;
        let mut dists = Vec::with_capacity(dims);
        for d in 0..dims {
            let lp = log_softmax(&row[d * bins..(d + 1) * bins]);
            let h: f64 = -lp.iter().map(|&l| l.exp() * l).sum::<f64>();
            logp += lp[batch.bins[i][d]];
            entropy += h;
            dists.push((lp, h));
        }
        let adv = batch.advantages[i];
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        let unclipped_active = ratio * adv <= clipped * adv;
        let surrogate = if unclipped_active { ratio * adv } else { clipped * adv };
        parts.policy_loss -= surrogate / nf;
        parts.entropy += entropy / nf;
        parts.mean_ratio += ratio / nf;
        parts.approx_kl += (batch.old_log_probs[i] - logp) / nf;
        if (ratio - 1.0).abs() > eps {
            parts.clip_fraction += 1.0 / nf;
        }

        let v = values[i];
        let (v_pred, dv_dpred) = if config.clip_range_vf > 0.0 {
            let old = batch.old_values[i];
            let c = config.clip_range_vf;
            let diff = v - old;
            if diff.abs() <= c {
                (v, 1.0)
            } else {
                (old + diff.clamp(-c, c), 0.0)
            }
        } else {
            (v, 1.0)
        };
        let err = v_pred - batch.returns[i];
        parts.value_loss += err * err / nf;

        if want_grad {
            // d(-surrogate)/d logp; the clipped branch carries no gradient.
            let g_logp = if unclipped_active { -ratio * adv / nf } else { 0.0 };
            let g_ent = -config.ent_coef / nf;
            for (d, (lp, h)) in dists.iter().enumerate() {
                for k in 0..bins {
                    let p = lp[k].exp();
                    let onehot = if k == batch.bins[i][d] { 1.0 } else { 0.0 };
                    let dh = -p * (lp[k] + h);
                    dlogits[[i, d * bins + k]] = g_logp * (onehot - p) + g_ent * dh;
                }
            }
            dvalues[i] = config.vf_coef * 2.0 * err * dv_dpred / nf;
        }
    }
    parts.total = parts.policy_loss + config.vf_coef * parts.value_loss - config.ent_coef * parts.entropy;
    (parts, want_grad.then_some((dlogits, dvalues)))
}

/// Clipped-surrogate PPO loss of `batch` under `policy`.
pub fn ppo_loss(policy: &Policy, batch: &MiniBatch, config: &TrainConfig) -> Result<LossParts, PpoError> {
    let out = policy.forward_batch(batch.features.view(), None)?;
    Ok(loss_from_outputs(&out.logits, &out.values, batch, policy.config().bins(), config, false).0)
}

/// Loss together with its exact gradient in the policy's parameter layout.
pub fn ppo_loss_and_grad(
    policy: &Policy,
    batch: &MiniBatch,
    config: &TrainConfig,
) -> Result<(LossParts, Vec<f64>), PpoError> {
    let mut tape = Tape::new();
    let out = policy.forward_batch(batch.features.view(), Some(&mut tape))?;
    let (parts, grads) = loss_from_outputs(&out.logits, &out.values, batch, policy.config().bins(), config, true);
    let (dl, dv) = grads.expect("gradient requested");
    let grad = policy.backward(&tape, dl.view(), dv.view())?;
    Ok((parts, grad))
}

/// Runs all epochs of minibatch updates on a buffer whose advantages are filled.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    config: &TrainConfig,
    learning_rate: f64,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    let all: Vec<_> = buffer
        .workers
        .iter()
        .flat_map(|w| w.transitions.iter().zip(&w.advantages).zip(&w.returns))
        .collect();
    let n = all.len();
    if n == 0 {
        return Err(PpoError::EmptyBuffer);
    }
    let dim = all[0].0 .0.features.len();
    let mut advantages: Vec<f64> = all.iter().map(|((_, a), _)| **a).collect();
    let (adv_mean, adv_std) = if config.normalize_advantages {
        normalize_advantages(&mut advantages)
    } else {
        (0.0, 0.0)
    };
    let returns: Vec<f64> = all.iter().map(|(_, r)| **r).collect();
    let values: Vec<f64> = all.iter().map(|((t, _), _)| t.value).collect();

    let mb_size = n / config.minibatches.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats {
        learning_rate,
        advantage_mean: adv_mean,
        advantage_std: adv_std,
        explained_variance: explained_variance(&values, &returns),
        ..UpdateStats::default()
    };
    let mut count = 0.0;
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (minibatch, idx) in order.chunks(mb_size.max(1)).enumerate() {
            let mut features = Array2::zeros((idx.len(), dim));
            for (r, &i) in idx.iter().enumerate() {
                features
                    .row_mut(r)
                    .assign(&ndarray::ArrayView1::from(&all[i].0 .0.features[..]));
            }
            let batch = MiniBatch {
                features,
                bins: idx.iter().map(|&i| all[i].0 .0.bins.clone()).collect(),
                old_log_probs: idx.iter().map(|&i| all[i].0 .0.log_prob).collect(),
                old_values: idx.iter().map(|&i| values[i]).collect(),
                advantages: idx.iter().map(|&i| advantages[i]).collect(),
                returns: idx.iter().map(|&i| returns[i]).collect(),
            };
            let (parts, mut grad) = ppo_loss_and_grad(policy, &batch, config)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFiniteLoss {
                    epoch,
                    minibatch,
                    policy_loss: parts.policy_loss,
                    value_loss: parts.value_loss,
                    entropy: parts.entropy,
                });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
                let scale = config.max_grad_norm / (norm + 1e-6);
                grad.iter_mut().for_each(|g| *g *= scale);
            }
            adam.update(policy.params_mut(), &grad, learning_rate);

            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.mean_ratio += parts.mean_ratio;
            stats.clip_fraction += parts.clip_fraction;
            stats.approx_kl += parts.approx_kl;
            stats.grad_norm += norm;
            count += 1.0;
        }
    }
    for x in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.mean_ratio,
        &mut stats.clip_fraction,
        &mut stats.approx_kl,
        &mut stats.grad_norm,
    ] {
        *x /= count;
    }
    Ok(stats)
}

fn explained_variance(values: &[f64], returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    let var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
    };
    let vr = var(&mut returns.iter().copied());
    if vr == 0.0 {
        return 0.0;
    }
    1.0 - var(&mut returns.iter().zip(values).map(|(r, v)| r - v)) / vr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{NetworkSizes, PolicyConfig};

    fn tiny() -> Policy {
        Policy::new(
            PolicyConfig {
                beams: 2,
                proprio_dim: 2,
                action_dims: 2,
                sizes: NetworkSizes {
                    encoder_hidden: 3,
                    encoder_out: 2,
                    trunk_hidden: vec![4],
                    bins: 3,
                },
            },
            4,
        )
        .unwrap()
    }

    fn batch_for(policy: &Policy, offsets: &[f64], adv: &[f64]) -> MiniBatch {
        let n = offsets.len();
        let features = Array2::from_shape_fn((n, 6), |(i, j)| ((i * 6 + j) as f64 * 0.7).sin());
        let out = policy.forward_batch(features.view(), None).unwrap();
        let bins: Vec<Vec<usize>> = (0..n).map(|i| vec![i % 3, (i + 1) % 3]).collect();
        let old_log_probs = (0..n)
            .map(|i| {
                let row = out.logits.row(i).to_vec();
                let lp: f64 = (0..2).map(|d| log_softmax(&row[d * 3..d * 3 + 3])[bins[i][d]]).sum();
                lp - offsets[i]
            })
            .collect();
        MiniBatch {
            features,
            bins,
            old_log_probs,
            old_values: out.values.to_vec(),
            advantages: adv.to_vec(),
            returns: (0..n).map(|i| i as f64 * 0.5 - 1.0).collect(),
        }
    }

    #[test]
    fn identical_policy_has_unit_ratio() {
        let p = tiny();
        let adv = [0.5, -1.0, 2.0, 0.25];
        let b = batch_for(&p, &[0.0; 4], &adv);
        let l = ppo_loss(&p, &b, &TrainConfig::default()).unwrap();
        assert!((l.mean_ratio - 1.0).abs() < 1e-15);
        assert_eq!(l.clip_fraction, 0.0);
        let mean_adv = adv.iter().sum::<f64>() / 4.0;
        assert!((l.policy_loss + mean_adv).abs() < 1e-15);
    }

    #[test]
    fn clipped_branch_has_no_ratio_gradient() {
        // ratio = e^0.5 > 1.2 with positive advantage: the clipped term is active.
        let p = tiny();
        let cfg = TrainConfig {
            ent_coef: 0.0,
            vf_coef: 0.0,
            ..TrainConfig::default()
        };
        let b = batch_for(&p, &[0.5], &[1.0]);
        let (l, g) = ppo_loss_and_grad(&p, &b, &cfg).unwrap();
        assert_eq!(l.clip_fraction, 1.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalization_moments() {
        let mut a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 5.0 + 3.0).collect();
        normalize_advantages(&mut a);
        let m = a.iter().sum::<f64>() / 1000.0;
        let v = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 1000.0;
        assert!(m.abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-6);
    }
}
