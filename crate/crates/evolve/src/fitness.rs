//! Episode fitness: time taken to reach the patch plus remaining distance.

use patchnav_core::episode::{run_episode, EpisodeOutcome, SimParams, VisionParams};
use patchnav_core::rng::{self, tag};
use patchnav_core::vision::EncodingCalibration;
use patchnav_core::{arena, CoreError, PolicyGenome};

/// Training cost of one episode: the time at which the patch was reached,
/// or the horizon plus the remaining distance when it was not. Lower is
/// better; the optimizer maximizes the negated cost.
pub fn episode_fitness(reached_at: Option<usize>, final_remaining: f64, horizon: usize) -> f64 {
    match reached_at {
        Some(t) => t as f64,
        None => horizon as f64 + final_remaining,
    }
}

/// Validation cost of one episode: remaining distance is not included, an
/// unreached patch simply scores the horizon.
pub fn validation_cost(reached_at: Option<usize>, horizon: usize) -> f64 {
    match reached_at {
        Some(t) => t as f64,
        None => horizon as f64,
    }
}

/// Theoretical lower bound on the time to reach the patch from a pose:
/// straight to the rim at full speed.
pub fn straight_line_bound(
    state: &arena::AgentState,
    arena: &arena::ArenaSpec,
    v_max: f64,
) -> f64 {
    (arena::remaining_distance(state, arena) / v_max).ceil()
}

/// Mean training cost of one candidate over the generation's shared episode
/// initializations. Episode `e` of generation `g` draws its initialization
/// and any vision noise from a stream seeded by `(seed, EPISODE, g, e)`, so
/// every candidate in the generation sees identical conditions.
pub fn candidate_mean_cost(
    genome: &PolicyGenome,
    sim: &SimParams,
    vision: &VisionParams,
    cal: &EncodingCalibration,
    run_seed: u64,
    generation: usize,
    episodes: usize,
    horizon: usize,
) -> Result<f64, CoreError> {
    let mut total = 0.0;
    for e in 0..episodes {
        let mut episode_rng = rng::stream(run_seed, &[tag::EPISODE, generation as u64, e as u64]);
        let init = arena::random_init(&mut episode_rng, &sim.arena);
        let out: EpisodeOutcome = run_episode(
            genome,
            sim,
            vision,
            cal,
            init,
            horizon,
            true,
            &mut episode_rng,
            None,
        )?;
        total += episode_fitness(out.reached_at, out.final_remaining, horizon);
    }
    Ok(total / episodes as f64)
}
