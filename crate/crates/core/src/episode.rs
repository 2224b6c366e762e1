//! The perception-action loop: visual encoding, network forward pass, action
//! conversion, environment update, repeated over an episode.

use crate::arena::{
    action_to_motion, patch_hit, remaining_distance, step_agent, AgentState, ArenaSpec,
};
use crate::error::CoreError;
use crate::policy::{PolicyGenome, PolicyScratch};
use crate::vision::{cast_rays, encode_frame, perturb_visual_angle, EncodingCalibration};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Environment parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub arena: ArenaSpec,
    /// Maximum forward speed in units per timestep.
    pub v_max: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            arena: ArenaSpec::default(),
            v_max: 2.0,
        }
    }
}

/// Vision parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisionParams {
    /// Field of view as a fraction of the full circle (0.4 = 144 degrees).
    pub fov: f64,
    /// Number of rays.
    pub upsilon: usize,
    /// Distance scaling factor; 0 is angle-only vision.
    pub sigma: f64,
    /// Std of the Gaussian jitter on the visual angle, radians.
    pub noise_std: f64,
}

impl Default for VisionParams {
    fn default() -> Self {
        VisionParams {
            fov: 0.4,
            upsilon: 8,
            sigma: 0.0,
            noise_std: 0.0,
        }
    }
}

impl VisionParams {
    /// Half-angle of the ray fan in radians.
    pub fn theta(&self) -> f64 {
        self.fov * std::f64::consts::PI
    }

    pub fn calibration(&self, arena: &ArenaSpec) -> Result<EncodingCalibration, CoreError> {
        EncodingCalibration::for_arena(self.sigma, arena)
    }
}

/// Pre-step pose and the action chosen there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: f64,
}

/// Result of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    /// Timestep at which the patch was first touched, if ever.
    pub reached_at: Option<usize>,
    pub final_state: AgentState,
    /// Distance to the patch rim at the end of the episode.
    pub final_remaining: f64,
}

/// Runs one episode of at most `horizon` steps.
///
/// When `terminate_on_patch` is set (training) the loop stops at the first
/// patch contact; otherwise (testing) it always runs the full horizon and
/// only records the first contact time. `trace`, when given, receives the
/// pre-step pose and action for every executed step.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<R: Rng + ?Sized>(
    genome: &PolicyGenome,
    sim: &SimParams,
    vision: &VisionParams,
    cal: &EncodingCalibration,
    init: AgentState,
    horizon: usize,
    terminate_on_patch: bool,
    rng: &mut R,
    mut trace: Option<&mut Vec<StepSample>>,
) -> Result<EpisodeOutcome, CoreError> {
    let mut scratch = PolicyScratch::new(genome.arch());
    let mut state = init;
    let mut reached_at = if patch_hit(&state, &sim.arena) {
        Some(0)
    } else {
        None
    };

    for _ in 0..horizon {
        if terminate_on_patch && reached_at.is_some() {
            break;
        }
        let seen = if vision.noise_std > 0.0 {
            perturb_visual_angle(&state, vision.noise_std, rng)
        } else {
            state
        };
        let hits = cast_rays(&seen, &sim.arena, vision.fov, vision.upsilon)?;
        let frame = encode_frame(&hits, cal);
        let action = genome.forward_with(&frame, &mut scratch)?;
        if let Some(buf) = trace.as_deref_mut() {
            buf.push(StepSample {
                t: state.t,
                x: state.position.x,
                y: state.position.y,
                heading: state.heading,
                action,
            });
        }
        let cmd = action_to_motion(action, sim.v_max)?;
        state = step_agent(state, cmd, &sim.arena);
        if reached_at.is_none() && patch_hit(&state, &sim.arena) {
            reached_at = Some(state.t);
        }
    }

    Ok(EpisodeOutcome {
        reached_at,
        final_state: state,
        final_remaining: remaining_distance(&state, &sim.arena),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::random_init;
    use crate::geometry::Vec2;
    use crate::policy::ArchSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (PolicyGenome, SimParams, VisionParams, EncodingCalibration) {
        let sim = SimParams::default();
        let vision = VisionParams::default();
        let cal = vision.calibration(&sim.arena).unwrap();
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        (genome, sim, vision, cal)
    }

    #[test]
    fn zero_policy_runs_straight_to_patch_or_wall() {
        let (genome, sim, vision, cal) = setup();
        // Aimed straight at the patch center from 200 units east of the rim.
        let init = AgentState::new(Vec2::new(650.0, 600.0), std::f64::consts::PI);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = run_episode(
            &genome, &sim, &vision, &cal, init, 500, true, &mut rng, None,
        )
        .unwrap();
        // 200 units to the rim at 2 units/step.
        assert_eq!(out.reached_at, Some(100));
    }

    #[test]
    fn test_mode_runs_full_horizon_and_keeps_first_contact() {
        let (genome, sim, vision, cal) = setup();
        let init = AgentState::new(Vec2::new(650.0, 600.0), std::f64::consts::PI);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut trace = Vec::new();
        let out = run_episode(
            &genome,
            &sim,
            &vision,
            &cal,
            init,
            500,
            false,
            &mut rng,
            Some(&mut trace),
        )
        .unwrap();
        assert_eq!(out.reached_at, Some(100));
        assert_eq!(trace.len(), 500);
        assert_eq!(trace[0].t, 0);
        assert_eq!(trace[499].t, 499);
        assert_eq!(out.final_state.t, 500);
    }

    #[test]
    fn straight_line_lower_bound_holds_on_random_rollouts() {
        let sim = SimParams::default();
        let vision = VisionParams::default();
        let cal = vision.calibration(&sim.arena).unwrap();
        let arch = ArchSpec::with_defaults(8);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for seed in 0..30u64 {
            let mut grng = ChaCha8Rng::seed_from_u64(seed);
            let params = (0..arch.param_count())
                .map(|_| rand::Rng::random_range(&mut grng, -2.0..2.0))
                .collect();
            let genome = PolicyGenome::from_params(arch.clone(), params).unwrap();
            let init = random_init(&mut rng, &sim.arena);
            let bound =
                (crate::arena::remaining_distance(&init, &sim.arena) / sim.v_max).ceil() as usize;
            let mut erng = ChaCha8Rng::seed_from_u64(seed);
            let out = run_episode(
                &genome, &sim, &vision, &cal, init, 500, true, &mut erng, None,
            )
            .unwrap();
            if let Some(t) = out.reached_at {
                assert!(t >= bound, "reached at {t} beating the kinematic bound {bound}");
            }
        }
    }

    #[test]
    fn rollouts_are_deterministic() {
        let (genome, sim, mut vision, cal) = setup();
        vision.noise_std = 0.1;
        let init = AgentState::new(Vec2::new(100.0, 100.0), 0.3);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut trace = Vec::new();
            run_episode(
                &genome,
                &sim,
                &vision,
                &cal,
                init,
                200,
                false,
                &mut rng,
                Some(&mut trace),
            )
            .unwrap();
            trace
        };
        let a = run(5);
        let b = run(5);
        assert_eq!(a, b);
    }
}
