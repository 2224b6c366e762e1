use patchnav_core::episode::{SimParams, VisionParams};
use patchnav_core::policy::ArchSpec;
use patchnav_evolve::{train, EsConfig, TrainSetup};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sigma: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let generations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let setup = TrainSetup {
        sim: SimParams::default(),
        vision: VisionParams {
            sigma,
            ..VisionParams::default()
        },
        arch: ArchSpec::with_defaults(8),
        es: EsConfig {
            generations,
            rng_seed: seed,
            ..EsConfig::default()
        },
        config_hash: "probe".into(),
    };
    let dir = std::env::temp_dir().join(format!("patchnav-probe-{sigma}-{seed}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let t0 = std::time::Instant::now();
    let out = train(&setup, &dir).unwrap();
    for s in out.history.iter().step_by(10) {
        println!("gen {:4}  median {:8.2}  best {:8.2}  mean {:8.2}", s.generation, s.median, s.best, s.mean);
    }
    let last = out.history.last().unwrap();
    println!("final gen {}  median {:.2}  best {:.2}  elapsed {:.1}s", last.generation, last.median, last.best, t0.elapsed().as_secs_f64());
}
