use rand::Rng;

use crate::sim::{Action, RobotConfig};

use super::PolicyOutput;

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// One categorical distribution over bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Self {
        Self {
            log_probs: log_softmax(logits),
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .log_probs
            .iter()
            .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l })
            .sum::<f64>()
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let n = self.log_probs.len();
        for (k, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return k;
            }
        }
        // Rounding left the total just below one.
        (0..n)
            .rev()
            .find(|&k| self.log_probs[k] > f64::NEG_INFINITY)
            .unwrap_or(n - 1)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub bins: Vec<usize>,
    /// Sum of per-dimension log-probabilities.
    pub log_prob: f64,
    /// Sum of per-dimension entropies.
    pub entropy: f64,
}

/// Draws one bin per action dimension.
pub fn sample_bins<R: Rng + ?Sized>(output: &PolicyOutput, bins: usize, rng: &mut R) -> SampledAction {
    let dims = output.logits.len() / bins;
    let mut out = SampledAction {
        bins: Vec::with_capacity(dims),
        log_prob: 0.0,
        entropy: 0.0,
    };
    for d in 0..dims {
        let c = Categorical::from_logits(output.dimension(d, bins));
        let k = c.sample(rng);
        out.log_prob += c.log_probs[k];
        out.entropy += c.entropy();
        out.bins.push(k);
    }
    out
}

/// Most likely bin per dimension, with its log-probability and the entropy.
pub fn argmax_bins(output: &PolicyOutput, bins: usize) -> SampledAction {
    let dims = output.logits.len() / bins;
    let mut out = SampledAction {
        bins: Vec::with_capacity(dims),
        log_prob: 0.0,
        entropy: 0.0,
    };
    for d in 0..dims {
        let c = Categorical::from_logits(output.dimension(d, bins));
        let k = c.argmax();
        out.log_prob += c.log_probs[k];
        out.entropy += c.entropy();
        out.bins.push(k);
    }
    out
}

/// Maps bin `b` of `n` evenly onto `[-a_max, a_max]`; the middle bin is exactly zero.
pub fn bins_to_action(robot: &RobotConfig, bins: &[usize], n: usize) -> Action {
    let half = (n - 1) as f64 / 2.0;
    let bounds = robot.action_bounds();
    let acc: Vec<f64> = bins
        .iter()
        .zip(&bounds)
        .map(|(&b, &a_max)| a_max * (b as f64 - half) / half)
        .collect();
    Action {
        base_acc: [acc[0], acc[1], acc[2]],
        joint_acc: acc[3..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn uniform_entropy_and_log_prob() {
        let out = PolicyOutput {
            logits: vec![0.0; 6 * 7],
            value: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_bins(&out, 7, &mut rng);
        let ln7 = 7f64.ln();
        assert!((s.entropy - 6.0 * ln7).abs() < 1e-12);
        assert!((s.log_prob + 6.0 * ln7).abs() < 1e-12);
    }

    #[test]
    fn dominant_logit_is_deterministic() {
        let mut logits = vec![0.0; 3 * 7];
        for d in 0..3 {
            logits[d * 7 + (d + 2)] = 1000.0;
        }
        let out = PolicyOutput { logits, value: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = sample_bins(&out, 7, &mut rng);
            assert_eq!(s.bins, vec![2, 3, 4]);
            assert!(s.entropy.abs() < 1e-12);
        }
        assert_eq!(argmax_bins(&out, 7).bins, vec![2, 3, 4]);
    }

    #[test]
    fn action_mapping() {
        let robot = RobotConfig::default();
        let a = bins_to_action(&robot, &[3, 0, 6, 3, 5, 1], 7);
        assert_eq!(a.base_acc, [0.0, -1.0, 2.0]);
        assert_eq!(a.joint_acc[0], 0.0);
        assert!((a.joint_acc[1] - 2.0 * 2.0 / 3.0).abs() < 1e-15);
        assert!((a.joint_acc[2] + 2.0 * 2.0 / 3.0).abs() < 1e-15);
        a.check(&robot).unwrap();
    }

    #[test]
    fn log_softmax_is_stable() {
        let l = log_softmax(&[1e308, 0.0, -1e308]);
        assert_eq!(l[0], 0.0);
        assert!(l.iter().all(|x| !x.is_nan()));
    }
}
