//! Policy Gradient Parameter Exploration with the ClipUp optimizer.
//!
//! The search distribution is an axis-aligned Gaussian. Each generation draws
//! antithetic pairs around the center, rank-normalizes the fitnesses, and
//! estimates gradients for the center and the per-parameter deviations. The
//! center moves by ClipUp: momentum on a normalized gradient with the
//! velocity norm clipped to a maximum speed. Costs are minimized by
//! maximizing the negated cost throughout.

use crate::error::EvolveError;
use patchnav_core::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Hyperparameters of the evolutionary run.
#[derive(Debug, Clone, PartialEq)]
pub struct EsConfig {
    pub generations: usize,
    pub episodes_per_candidate: usize,
    pub population: usize,
    pub std_init: f64,
    pub std_lr: f64,
    pub std_max_change: f64,
    pub mean_lr: f64,
    pub clipup_momentum: f64,
    pub clipup_max_speed: f64,
    pub episode_horizon: usize,
    pub rng_seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            generations: 1000,
            episodes_per_candidate: 20,
            population: 50,
            std_init: 0.1,
            std_lr: 0.1,
            std_max_change: 0.2,
            mean_lr: 0.2,
            clipup_momentum: 0.8,
            clipup_max_speed: 0.4,
            episode_horizon: 500,
            rng_seed: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if self.population < 2 || self.population % 2 != 0 {
            return Err(EvolveError::InvalidConfig(format!(
                "population must be even and at least 2, got {}",
                self.population
            )));
        }
        for (name, v) in [
            ("std_init", self.std_init),
            ("std_lr", self.std_lr),
            ("std_max_change", self.std_max_change),
            ("mean_lr", self.mean_lr),
            ("clipup_max_speed", self.clipup_max_speed),
        ] {
            if !(v > 0.0) {
                return Err(EvolveError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.clipup_momentum) {
            return Err(EvolveError::InvalidConfig(format!(
                "clipup_momentum must be in [0, 1), got {}",
                self.clipup_momentum
            )));
        }
        if self.std_max_change >= 1.0 {
            return Err(EvolveError::InvalidConfig(format!(
                "std_max_change must be below 1 to keep deviations positive, got {}",
                self.std_max_change
            )));
        }
        if self.episodes_per_candidate == 0 || self.generations == 0 || self.episode_horizon == 0 {
            return Err(EvolveError::InvalidConfig(
                "generations, episodes, and horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mutable optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    pub center: Vec<f64>,
    pub stds: Vec<f64>,
    pub velocity: Vec<f64>,
    pub generation: usize,
}

impl EsState {
    pub fn new(dim: usize, std_init: f64) -> Self {
        EsState {
            center: vec![0.0; dim],
            stds: vec![std_init; dim],
            velocity: vec![0.0; dim],
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// One generation's antithetic population.
#[derive(Debug, Clone)]
pub struct PopulationSample {
    /// Candidate parameter vectors, pairs `(center + eps, center - eps)`.
    pub candidates: Vec<Vec<f64>>,
    /// The positive perturbation of each pair.
    pub eps: Vec<Vec<f64>>,
}

/// Center and deviation gradients in the ascent direction of (rank
/// normalized, negated-cost) fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub center: Vec<f64>,
    pub std: Vec<f64>,
}

/// Draws `population / 2` antithetic pairs around the center.
pub fn sample_population<R: Rng + ?Sized>(
    state: &EsState,
    population: usize,
    rng: &mut R,
) -> PopulationSample {
    debug_assert!(population % 2 == 0);
    let pairs = population / 2;
    let dim = state.dim();
    let mut candidates = Vec::with_capacity(population);
    let mut eps = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let e: Vec<f64> = (0..dim)
            .map(|j| {
                let normal = Normal::new(0.0, state.stds[j]).expect("stds are nonnegative");
                normal.sample(rng)
            })
            .collect();
        let plus: Vec<f64> = state.center.iter().zip(&e).map(|(c, d)| c + d).collect();
        let minus: Vec<f64> = state.center.iter().zip(&e).map(|(c, d)| c - d).collect();
        candidates.push(plus);
        candidates.push(minus);
        eps.push(e);
    }
    PopulationSample { candidates, eps }
}

/// Maps fitnesses (higher is better) onto [-0.5, 0.5] by rank, averaging
/// ties. All-equal inputs map to all zeros, making the update a no-op.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    if values[order[0]] == values[order[n - 1]] {
        return vec![0.0; n];
    }
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_pos = (i + j) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_pos / (n - 1) as f64 - 0.5;
        }
        i = j + 1;
    }
    ranks
}

/// PGPE gradient estimate from per-candidate mean costs (lower is better).
///
/// The center gradient averages antithetic fitness differences scaled by the
/// perturbation; the deviation gradient scales pair-mean fitness against the
/// population baseline by `(eps^2 - std^2) / std`.
pub fn pgpe_gradients(
    state: &EsState,
    sample: &PopulationSample,
    mean_costs: &[f64],
) -> Result<Gradients, EvolveError> {
    let pairs = sample.eps.len();
    if mean_costs.len() != 2 * pairs {
        return Err(EvolveError::InvalidConfig(format!(
            "expected {} fitness entries, got {}",
            2 * pairs,
            mean_costs.len()
        )));
    }
    if mean_costs.iter().any(|c| !c.is_finite()) {
        return Err(EvolveError::InvalidConfig(
            "non-finite fitness in population".into(),
        ));
    }
    let rewards: Vec<f64> = mean_costs.iter().map(|c| -c).collect();
    let ranks = rank_normalize(&rewards);
    let baseline = ranks.iter().sum::<f64>() / ranks.len() as f64;

    let dim = state.dim();
    let mut center = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for k in 0..pairs {
        let plus = ranks[2 * k];
        let minus = ranks[2 * k + 1];
        let direction = (plus - minus) / 2.0;
        let magnitude = (plus + minus) / 2.0 - baseline;
        for j in 0..dim {
            let e = sample.eps[k][j];
            center[j] += direction * e;
            let sigma = state.stds[j];
            if sigma > 0.0 {
                std[j] += magnitude * (e * e - sigma * sigma) / sigma;
            }
        }
    }
    let scale = 1.0 / pairs as f64;
    for j in 0..dim {
        center[j] *= scale;
        std[j] *= scale;
    }
    Ok(Gradients { center, std })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Applies one ClipUp update to the center and the clamped deviation step.
///
/// The center gradient is normalized to unit length, folded into the
/// momentum velocity, and the velocity norm is clipped to the max speed.
/// The deviation step uses the same normalized-gradient rule with its own
/// learning rate, clamped so no deviation changes by more than the
/// `std_max_change` fraction per generation.
pub fn clipup_step(state: &mut EsState, grads: &Gradients, cfg: &EsConfig) {
    let g_norm = norm(&grads.center);
    for j in 0..state.dim() {
        let step = if g_norm > 0.0 {
            cfg.mean_lr * grads.center[j] / g_norm
        } else {
            0.0
        };
        state.velocity[j] = cfg.clipup_momentum * state.velocity[j] + step;
    }
    let v_norm = norm(&state.velocity);
    if v_norm > cfg.clipup_max_speed {
        let rescale = cfg.clipup_max_speed / v_norm;
        for v in state.velocity.iter_mut() {
            *v *= rescale;
        }
    }
    for j in 0..state.dim() {
        state.center[j] += state.velocity[j];
    }

    let s_norm = norm(&grads.std);
    if s_norm > 0.0 {
        for j in 0..state.dim() {
            let raw = cfg.std_lr * grads.std[j] / s_norm;
            let cap = cfg.std_max_change * state.stds[j];
            state.stds[j] += raw.clamp(-cap, cap);
        }
    }
    state.generation += 1;
}

/// Convenience wrapper pairing a config with its state; one `sample` +
/// `update` round per generation, seeded reproducibly by generation index.
#[derive(Debug, Clone)]
pub struct Pgpe {
    pub cfg: EsConfig,
    pub state: EsState,
}

impl Pgpe {
    pub fn new(cfg: EsConfig, dim: usize) -> Result<Self, EvolveError> {
        cfg.validate()?;
        let state = EsState::new(dim, cfg.std_init);
        Ok(Pgpe { cfg, state })
    }

    pub fn with_center(cfg: EsConfig, center: Vec<f64>) -> Result<Self, EvolveError> {
        cfg.validate()?;
        let dim = center.len();
        let mut state = EsState::new(dim, cfg.std_init);
        state.center = center;
        Ok(Pgpe { cfg, state })
    }

    pub fn sampling_rng(&self) -> ChaCha8Rng {
        rng::stream(
            self.cfg.rng_seed,
            &[rng::tag::SAMPLE, self.state.generation as u64],
        )
    }

    pub fn sample(&self) -> PopulationSample {
        let mut rng = self.sampling_rng();
        sample_population(&self.state, self.cfg.population, &mut rng)
    }

    pub fn update(
        &mut self,
        sample: &PopulationSample,
        mean_costs: &[f64],
    ) -> Result<Gradients, EvolveError> {
        let grads = pgpe_gradients(&self.state, sample, mean_costs)?;
        clipup_step(&mut self.state, &grads, &self.cfg);
        Ok(grads)
    }
}


/// Runs PGPE + ClipUp on a 10x-scaled sphere, `cost(w) = ||w / 10||^2`,
/// starting at `||w|| = 10` per coordinate. Returns the best center cost
/// seen over the budget. Shared by the sanity test and the acceptance suite.
pub fn minimize_scaled_sphere(dim: usize, generations: usize, seed: u64) -> f64 {
    let cfg = EsConfig {
        rng_seed: seed,
        ..EsConfig::default()
    };
    let cost = |w: &[f64]| -> f64 { w.iter().map(|x| (x / 10.0) * (x / 10.0)).sum() };
    let mut pgpe = Pgpe::with_center(cfg, vec![10.0 / (dim as f64).sqrt(); dim])
        .expect("valid benchmark config");
    let mut best = f64::INFINITY;
    for _ in 0..generations {
        let sample = pgpe.sample();
        let costs: Vec<f64> = sample.candidates.iter().map(|c| cost(c)).collect();
        pgpe.update(&sample, &costs).expect("finite costs");
        best = best.min(cost(&pgpe.state.center));
    }
    best
}
