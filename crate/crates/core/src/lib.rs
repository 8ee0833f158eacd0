//! Whole-body control of a planar mobile manipulator trained with PPO.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`]: kinematics, acceleration-level dynamics with optional joint
//!   clamping, capsule collision checks and raycast LIDAR.
//! * [`pathfield`]: harmonic potential field on a grid, steepest-descent path
//!   extraction and the per-step path metrics used for reward shaping.
//! * [`reward`]: the shaped per-step reward with the holding accumulator and
//!   terminal values, for both the clamping and the joint-limit baseline variant.
//! * [`envgen`]: procedural corridor and gap scenes and the episode state machine.
//! * [`adr`]: tolerance curriculum driven by recent success rate.
//! * [`policy`]: the scan-block actor-critic network with hand-written backprop.
//! * [`ppo`]: rollout collection, GAE and the clipped-surrogate update.
//! * [`harness`]: configuration tree, evaluation protocol and rendering.

pub mod adr;
pub mod envgen;
pub mod geometry;
pub mod harness;
pub mod pathfield;
pub mod policy;
pub mod ppo;
pub mod reward;
pub mod sim;
