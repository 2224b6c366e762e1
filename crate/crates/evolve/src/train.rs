//! The training loop and its on-disk run layout, plus validation over the
//! top-performing generation centers.
//!
//! Run directory layout:
//!
//! ```text
//! run_dir/
//!   fitness.csv          generation, median, best, mean (per generation)
//!   es_state.bin         optimizer state for resuming
//!   checkpoints/gen_NNNNN.bin   population center evaluated that generation
//! ```

use crate::error::EvolveError;
use crate::fitness::{candidate_mean_cost, validation_cost};
use crate::pgpe::{clipup_step, pgpe_gradients, sample_population, EsConfig, EsState};
use patchnav_core::bytesio::{self, ByteReader};
use patchnav_core::checkpoint::{self, CheckpointMeta};
use patchnav_core::episode::{run_episode, SimParams, VisionParams};
use patchnav_core::policy::ArchSpec;
use patchnav_core::rng::{self, tag};
use patchnav_core::{arena, PolicyGenome};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

const STATE_MAGIC: &[u8; 4] = b"PNES";
const STATE_VERSION: u32 = 1;

/// Everything a training run needs besides the output directory.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub sim: SimParams,
    pub vision: VisionParams,
    pub arch: ArchSpec,
    pub es: EsConfig,
    /// Hex hash of the config snapshot; embedded in all artifacts.
    pub config_hash: String,
}

/// Per-generation population fitness summary (costs; lower is better).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationSummary {
    pub generation: usize,
    pub median: f64,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub history: Vec<GenerationSummary>,
    /// Generations actually executed by this call (0 when already complete).
    pub executed: usize,
}

pub fn checkpoints_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoints")
}

pub fn checkpoint_path(run_dir: &Path, generation: usize) -> PathBuf {
    checkpoints_dir(run_dir).join(format!("gen_{generation:05}.bin"))
}

pub fn fitness_csv_path(run_dir: &Path) -> PathBuf {
    run_dir.join("fitness.csv")
}

pub fn es_state_path(run_dir: &Path) -> PathBuf {
    run_dir.join("es_state.bin")
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Trains (or resumes) a run in `run_dir`, writing per-generation center
/// checkpoints, a fitness history CSV, and the optimizer state.
///
/// Candidate-by-episode evaluations run in parallel; results are reduced in
/// candidate order so the history is identical regardless of scheduling. A
/// rerun with the same setup and seed is bit-identical; an interrupted run
/// resumes from the persisted state.
pub fn train(setup: &TrainSetup, run_dir: &Path) -> Result<TrainOutcome, EvolveError> {
    setup.es.validate()?;
    setup.arch.validate().map_err(EvolveError::Core)?;
    if setup.arch.upsilon != setup.vision.upsilon {
        return Err(EvolveError::InvalidConfig(format!(
            "architecture input width {} does not match vision rays {}",
            setup.arch.upsilon, setup.vision.upsilon
        )));
    }
    std::fs::create_dir_all(checkpoints_dir(run_dir))?;

    let cal = setup.vision.calibration(&setup.sim.arena)?;
    let dim = setup.arch.param_count();
    let cfg = &setup.es;

    let (mut state, mut history) = match load_es_state(run_dir) {
        Ok(Some((state, stored_hash))) => {
            if stored_hash != setup.config_hash {
                return Err(EvolveError::HashMismatch {
                    found: stored_hash,
                    expected: setup.config_hash.clone(),
                });
            }
            if state.dim() != dim {
                return Err(EvolveError::Malformed(format!(
                    "stored state dimension {} does not match architecture ({dim})",
                    state.dim()
                )));
            }
            let mut history = read_history(&fitness_csv_path(run_dir), &setup.config_hash)?;
            // A crash between the CSV append and the state save can leave one
            // extra row; drop anything at or past the resume point.
            history.retain(|s| s.generation < state.generation);
            log::info!(
                "resuming run at generation {} in {}",
                state.generation,
                run_dir.display()
            );
            (state, history)
        }
        Ok(None) => (EsState::new(dim, cfg.std_init), Vec::new()),
        Err(e) => return Err(e),
    };

    rewrite_history_csv(run_dir, &setup.config_hash, &history)?;
    let mut executed = 0;

    while state.generation < cfg.generations {
        let generation = state.generation;
        let mut sample_rng = rng::stream(cfg.rng_seed, &[tag::SAMPLE, generation as u64]);
        let sample = sample_population(&state, cfg.population, &mut sample_rng);

        let genomes: Vec<PolicyGenome> = sample
            .candidates
            .iter()
            .map(|params| PolicyGenome::from_params(setup.arch.clone(), params.clone()))
            .collect::<Result<_, _>>()?;

        let mean_costs: Vec<f64> = genomes
            .par_iter()
            .map(|genome| {
                candidate_mean_cost(
                    genome,
                    &setup.sim,
                    &setup.vision,
                    &cal,
                    cfg.rng_seed,
                    generation,
                    cfg.episodes_per_candidate,
                    cfg.episode_horizon,
                )
            })
            .collect::<Result<_, _>>()?;

        let mut sorted = mean_costs.clone();
        let summary = GenerationSummary {
            generation,
            median: median(&mut sorted),
            best: sorted[0],
            mean: mean_costs.iter().sum::<f64>() / mean_costs.len() as f64,
        };
        append_history_row(run_dir, &summary)?;
        history.push(summary);

        let center_genome = PolicyGenome::from_params(setup.arch.clone(), state.center.clone())?;
        checkpoint::save(
            checkpoint_path(run_dir, generation),
            &center_genome,
            &CheckpointMeta {
                sigma: setup.vision.sigma,
                fov: setup.vision.fov,
                seed: cfg.rng_seed,
                generation: generation as u64,
            },
        )?;

        let grads = pgpe_gradients(&state, &sample, &mean_costs)?;
        clipup_step(&mut state, &grads, cfg);
        save_es_state(run_dir, &state, &setup.config_hash)?;
        executed += 1;

        if generation % 50 == 0 {
            log::info!(
                "generation {generation}: median {:.1}, best {:.1}",
                summary.median,
                summary.best
            );
        }
    }

    Ok(TrainOutcome {
        run_dir: run_dir.to_path_buf(),
        history,
        executed,
    })
}

fn save_es_state(run_dir: &Path, state: &EsState, config_hash: &str) -> Result<(), EvolveError> {
    let mut out = Vec::new();
    out.extend_from_slice(STATE_MAGIC);
    bytesio::put_u32(&mut out, STATE_VERSION);
    bytesio::put_bytes(&mut out, config_hash.as_bytes());
    bytesio::put_u64(&mut out, state.generation as u64);
    bytesio::put_f64_slice(&mut out, &state.center);
    bytesio::put_f64_slice(&mut out, &state.stds);
    bytesio::put_f64_slice(&mut out, &state.velocity);
    let tmp = run_dir.join("es_state.bin.tmp");
    std::fs::write(&tmp, &out)?;
    std::fs::rename(tmp, es_state_path(run_dir))?;
    Ok(())
}

/// Loads the optimizer state, or `None` when the run directory is fresh.
pub fn load_es_state(run_dir: &Path) -> Result<Option<(EsState, String)>, EvolveError> {
    let path = es_state_path(run_dir);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = ByteReader::new(&bytes);
    if r.take(4)? != STATE_MAGIC {
        return Err(EvolveError::Malformed("bad es_state magic".into()));
    }
    let version = r.u32()?;
    if version != STATE_VERSION {
        return Err(EvolveError::Malformed(format!(
            "unsupported es_state version {version}"
        )));
    }
    let hash = String::from_utf8(r.byte_vec()?)
        .map_err(|_| EvolveError::Malformed("non-utf8 hash".into()))?;
    let generation = r.u64()? as usize;
    let center = r.f64_vec()?;
    let stds = r.f64_vec()?;
    let velocity = r.f64_vec()?;
    r.expect_end()?;
    if stds.len() != center.len() || velocity.len() != center.len() {
        return Err(EvolveError::Malformed("inconsistent state vectors".into()));
    }
    Ok(Some((
        EsState {
            center,
            stds,
            velocity,
            generation,
        },
        hash,
    )))
}

fn rewrite_history_csv(
    run_dir: &Path,
    config_hash: &str,
    history: &[GenerationSummary],
) -> Result<(), EvolveError> {
    let mut out = format!("# config_hash={config_hash}\ngeneration,median,best,mean\n");
    for s in history {
        out.push_str(&format!("{},{},{},{}\n", s.generation, s.median, s.best, s.mean));
    }
    std::fs::write(fitness_csv_path(run_dir), out)?;
    Ok(())
}

fn append_history_row(run_dir: &Path, s: &GenerationSummary) -> Result<(), EvolveError> {
    let mut file = std::fs::OpenOptions::new()
        .append(true)
        .open(fitness_csv_path(run_dir))?;
    writeln!(file, "{},{},{},{}", s.generation, s.median, s.best, s.mean)?;
    Ok(())
}

/// Reads a fitness history CSV, verifying its embedded config hash when one
/// is expected (pass an empty string to skip the check).
pub fn read_history(path: &Path, expected_hash: &str) -> Result<Vec<GenerationSummary>, EvolveError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            EvolveError::MissingArtifact(format!("{} (produced by `train`)", path.display()))
        } else {
            e.into()
        }
    })?;
    let mut history = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if let Some(hash) = line.strip_prefix("# config_hash=") {
            if !expected_hash.is_empty() && hash != expected_hash {
                return Err(EvolveError::HashMismatch {
                    found: hash.to_string(),
                    expected: expected_hash.to_string(),
                });
            }
            continue;
        }
        if line.starts_with('#') || line.starts_with("generation") || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(EvolveError::Malformed(format!(
                "fitness csv line {}: expected 4 fields",
                lineno + 1
            )));
        }
        let parse = |s: &str| -> Result<f64, EvolveError> {
            s.parse()
                .map_err(|_| EvolveError::Malformed(format!("bad number {s:?}")))
        };
        history.push(GenerationSummary {
            generation: fields[0]
                .parse()
                .map_err(|_| EvolveError::Malformed(format!("bad generation {:?}", fields[0])))?,
            median: parse(fields[1])?,
            best: parse(fields[2])?,
            mean: parse(fields[3])?,
        });
    }
    Ok(history)
}

/// Generations ranked by training fitness (ascending median cost, ties by
/// generation index), truncated to `top_k`.
pub fn select_top_generations(history: &[GenerationSummary], top_k: usize) -> Vec<usize> {
    let mut order: Vec<&GenerationSummary> = history.iter().collect();
    order.sort_by(|a, b| a.median.total_cmp(&b.median).then(a.generation.cmp(&b.generation)));
    order.iter().take(top_k).map(|s| s.generation).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub generation: usize,
    pub init_index: usize,
    pub cost: f64,
    pub reached: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub selected_generations: Vec<usize>,
    pub rows: Vec<ValidationRow>,
    /// Median cost pooled over all selected centers and initializations.
    pub median: f64,
    pub success_rate: f64,
}

/// Evaluates the population centers of the `top_k` best training generations
/// on `inits` fresh initializations each. Validation cost excludes the
/// remaining-distance term; an unreached patch scores the horizon. The same
/// initializations are shared across the selected centers.
pub fn validate(
    setup: &TrainSetup,
    run_dir: &Path,
    top_k: usize,
    inits: usize,
) -> Result<ValidationReport, EvolveError> {
    let history = read_history(&fitness_csv_path(run_dir), &setup.config_hash)?;
    if history.is_empty() {
        return Err(EvolveError::MissingArtifact(format!(
            "no generations recorded in {} (produced by `train`)",
            fitness_csv_path(run_dir).display()
        )));
    }
    let selected = select_top_generations(&history, top_k);
    let cal = setup.vision.calibration(&setup.sim.arena)?;
    let horizon = setup.es.episode_horizon;

    let mut rows = Vec::with_capacity(selected.len() * inits);
    for &generation in &selected {
        let path = checkpoint_path(run_dir, generation);
        let (genome, _meta) = checkpoint::load(&path).map_err(|e| match e {
            patchnav_core::CoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                EvolveError::MissingArtifact(format!(
                    "{} (produced by `train`)",
                    path.display()
                ))
            }
            other => EvolveError::Core(other),
        })?;
        let generation_rows: Vec<ValidationRow> = (0..inits)
            .into_par_iter()
            .map(|init_index| {
                let mut episode_rng =
                    rng::stream(setup.es.rng_seed, &[tag::VALIDATE, init_index as u64]);
                let init = arena::random_init(&mut episode_rng, &setup.sim.arena);
                let out = run_episode(
                    &genome,
                    &setup.sim,
                    &setup.vision,
                    &cal,
                    init,
                    horizon,
                    true,
                    &mut episode_rng,
                    None,
                )
                .expect("validated config");
                ValidationRow {
                    generation,
                    init_index,
                    cost: validation_cost(out.reached_at, horizon),
                    reached: out.reached_at.is_some(),
                }
            })
            .collect();
        rows.extend(generation_rows);
    }

    let mut costs: Vec<f64> = rows.iter().map(|r| r.cost).collect();
    let median = median(&mut costs);
    let success_rate = rows.iter().filter(|r| r.reached).count() as f64 / rows.len() as f64;
    Ok(ValidationReport {
        selected_generations: selected,
        rows,
        median,
        success_rate,
    })
}
