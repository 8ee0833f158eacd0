use super::RolloutBuffer;

/// Generalized advantage estimates for one trajectory slice.
///
/// `dones[t]` marks a terminal transition; `last_value` bootstraps the
/// state after the final transition when that transition is not terminal.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Fills advantages and returns of every worker slice.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    for w in &mut buffer.workers {
        let rewards: Vec<f64> = w.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = w.transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = w.transitions.iter().map(|t| t.done).collect();
        let (a, r) = gae(&rewards, &values, &dones, w.last_value, gamma, lambda);
        w.advantages = a;
        w.returns = r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, -2.0, 0.5];
        let v = [0.3, 0.1, -0.4];
        let d = [false, false, false];
        let (a, _) = gae(&r, &v, &d, 0.7, 0.9, 0.0);
        assert_eq!(a[0], 1.0 + 0.9 * 0.1 - 0.3);
        assert_eq!(a[1], -2.0 + 0.9 * -0.4 - 0.1);
        assert_eq!(a[2], 0.5 + 0.9 * 0.7 - -0.4);
    }

    #[test]
    fn zero_rewards_zero_values() {
        let (a, r) = gae(&[0.0; 5], &[0.0; 5], &[false, true, false, false, true], 0.0, 0.99, 0.95);
        assert!(a.iter().chain(&r).all(|&x| x == 0.0));
    }

    #[test]
    fn terminal_cuts_bootstrap() {
        let (a, _) = gae(&[1.0, 1.0, 1.0], &[0.0; 3], &[false, false, true], 100.0, 0.999, 0.95);
        let gl = 0.999 * 0.95;
        assert!((a[2] - 1.0).abs() < 1e-15);
        assert!((a[1] - (1.0 + gl)).abs() < 1e-15);
        assert!((a[0] - (1.0 + gl + gl * gl)).abs() < 1e-15);
    }
}
