use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wbc::envgen::{Env, EnvConfig, EpisodeConfig};
use wbc::reward::{compute_step_reward, reset_state, RewardParams, RewardVariant, StepInputs};
use wbc::sim::Action;

fn inputs(goal_distance: f64, delta_deviation: f64, delta_progress: f64, clearance: f64) -> StepInputs {
    StepInputs {
        delta_deviation,
        delta_progress,
        path_length: 7.5,
        goal_distance,
        clearance,
    }
}

/// Distances that wander in and out of a tolerance sphere.
fn distances() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hold_bonus_per_step_is_bounded(d in 0.0..1.0f64, tol in 0.05..=0.5f64) {
        let p = RewardParams::default();
        let e = EpisodeConfig::default();
        let (t, _) = compute_step_reward(&p, &e, &reset_state(tol), &inputs(d, 0.0, 0.0, 1.0)).unwrap();
        let bonus = t.hold_time + t.hold_distance;
        if d <= tol {
            // w_ht*tau/T_h up to (w_ht + w_hd)*tau/T_h.
            prop_assert!((0.8 - 1e-12..=2.4 + 1e-12).contains(&bonus), "{}", bonus);
            let expected = 0.8 + 1.6 * (1.0 - d / tol);
            prop_assert!((bonus - expected).abs() < 1e-12);
        } else {
            prop_assert_eq!(bonus, 0.0);
        }
    }

    #[test]
    fn leaving_tolerance_returns_every_banked_bonus(ds in distances(), tol in 0.05..=0.5f64) {
        let p = RewardParams::default();
        let e = EpisodeConfig::default();
        let mut s = reset_state(tol);
        let mut hold_sum = 0.0;
        for &d in &ds {
            let (t, n) = compute_step_reward(&p, &e, &s, &inputs(d, 0.0, 0.0, 1.0)).unwrap();
            hold_sum += t.hold_time + t.hold_distance + t.hold_refund;
            prop_assert!(n.hold_accumulator >= 0.0);
            prop_assert!(t.hold_refund <= 0.0);
            if d > tol {
                // Outside the sphere, nothing earned inside survives.
                prop_assert!(hold_sum.abs() < 1e-9, "residual {}", hold_sum);
            } else {
                prop_assert!((hold_sum - n.hold_accumulator).abs() < 1e-9);
            }
            s = n;
        }
    }

    #[test]
    fn clamping_ignores_baseline_parameters(
        d in 0.0..1.0f64,
        dd in -0.1..0.1f64,
        dp in -0.1..0.1f64,
        clearance in 0.0..2.0f64,
        w_sm in -10.0..0.0f64,
        r_jl in -100.0..0.0f64,
        safety in 0.01..1.0f64,
    ) {
        let e = EpisodeConfig::default();
        prop_assert_eq!(e.variant, RewardVariant::Clamping);
        let a = RewardParams::default();
        let b = RewardParams { w_sm, joint_limit_reward: r_jl, safety_distance: safety, ..a.clone() };
        let s = reset_state(0.3);
        let x = compute_step_reward(&a, &e, &s, &inputs(d, dd, dp, clearance)).unwrap();
        let y = compute_step_reward(&b, &e, &s, &inputs(d, dd, dp, clearance)).unwrap();
        prop_assert_eq!(x.0.safety_margin, 0.0);
        prop_assert_eq!(x, y);
    }

    #[test]
    fn safety_penalty_is_non_positive_and_vanishes_beyond_margin(clearance in 0.0..2.0f64) {
        let e = EpisodeConfig { variant: RewardVariant::Baseline, ..EpisodeConfig::default() };
        let p = RewardParams::default();
        let (t, _) = compute_step_reward(&p, &e, &reset_state(0.3), &inputs(1.0, 0.0, 0.0, clearance)).unwrap();
        prop_assert!(t.safety_margin <= 0.0);
        if clearance >= p.safety_distance {
            prop_assert_eq!(t.safety_margin, 0.0);
        } else {
            let expected = p.w_sm * (p.safety_distance - clearance) / p.safety_distance;
            prop_assert!((t.safety_margin - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn path_terms_telescope(steps in prop::collection::vec((-0.05..0.05f64, -0.05..0.05f64), 1..200)) {
        let p = RewardParams::default();
        let e = EpisodeConfig::default();
        let mut s = reset_state(0.3);
        let (mut dev, mut prog, mut sum_dev, mut sum_prog) = (0.0, 0.0, 0.0, 0.0);
        for &(dd, dp) in &steps {
            let (t, n) = compute_step_reward(&p, &e, &s, &inputs(1.0, dd, dp, 1.0)).unwrap();
            dev += dd;
            prog += dp;
            sum_dev += t.path_deviation;
            sum_prog += t.path_progress;
            s = n;
        }
        prop_assert!((sum_dev - p.w_pd * dev).abs() < 1e-9);
        prop_assert!((sum_prog - p.w_pt * prog / 7.5).abs() < 1e-9);
    }
}

#[test]
fn time_penalty_sums_to_its_weight_over_a_timeout() {
    let p = RewardParams::default();
    let e = EpisodeConfig::default();
    let s = reset_state(0.3);
    let mut sum = 0.0;
    for _ in 0..e.timeout_steps() {
        let (t, _) = compute_step_reward(&p, &e, &s, &inputs(1.0, 0.0, 0.0, 1.0)).unwrap();
        sum += t.time;
    }
    assert_eq!(e.timeout_steps(), 1500);
    assert!((sum - p.w_t).abs() < 1e-9, "{sum}");
}

/// Whole-episode returns under clamping do not depend on baseline-only weights.
#[test]
fn clamping_episodes_are_unaffected_by_baseline_weights() {
    let a = EnvConfig::default();
    let mut b = a.clone();
    b.reward.w_sm = -7.0;
    b.reward.joint_limit_reward = -99.0;
    b.reward.safety_distance = 0.9;
    let bounds = a.robot.action_bounds();
    for seed in 0..3 {
        let mut x = Env::new(Arc::new(a.clone())).unwrap();
        let mut y = Env::new(Arc::new(b.clone())).unwrap();
        x.reset(seed, 0.5).unwrap();
        y.reset(seed, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let v: Vec<f64> = bounds.iter().map(|&m| rng.gen_range(-m..=m)).collect();
            let action = Action {
                base_acc: [v[0], v[1], v[2]],
                joint_acc: v[3..].to_vec(),
            };
            let ox = x.step(&action).unwrap();
            let oy = y.step(&action).unwrap();
            assert_eq!(ox.reward.to_bits(), oy.reward.to_bits());
            assert_eq!(ox.terminated, oy.terminated);
            if ox.terminated.is_some() {
                break;
            }
        }
    }
}
