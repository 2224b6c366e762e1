//! Test-grid trajectory generation and the on-disk trajectory store.

use crate::error::MetricsError;
use patchnav_core::arena::{patch_hit, AgentState, ArenaSpec};
use patchnav_core::bytesio::{self, ByteReader};
use patchnav_core::episode::{run_episode, SimParams, StepSample, VisionParams};
use patchnav_core::geometry::Vec2;
use patchnav_core::rng::{self, tag};
use patchnav_core::PolicyGenome;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const STORE_MAGIC: &[u8; 4] = b"PNTJ";
const STORE_VERSION: u32 = 1;

/// One test episode: the initialization and the full per-step series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub init_position: Vec2,
    pub init_heading: f64,
    pub samples: Vec<StepSample>,
}

/// Lattice of test initializations: positions spaced `spacing` apart,
/// strictly inside the arena, crossed with evenly spaced orientations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub spacing: f64,
    pub orientations: usize,
    pub horizon: usize,
    pub mask_prefix: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            spacing: 25.0,
            orientations: 16,
            horizon: 500,
            mask_prefix: 25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.spacing > 0.0) {
            return Err(MetricsError::InvalidParam(format!(
                "grid spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.orientations == 0 {
            return Err(MetricsError::InvalidParam("need at least 1 orientation".into()));
        }
        if self.horizon <= self.mask_prefix {
            return Err(MetricsError::InvalidParam(format!(
                "horizon {} must exceed the masked prefix {}",
                self.horizon, self.mask_prefix
            )));
        }
        Ok(())
    }

    /// Lattice positions: multiples of `spacing` strictly inside the arena.
    pub fn positions(&self, arena: &ArenaSpec) -> Vec<Vec2> {
        let (min, max) = arena.bounds();
        let mut out = Vec::new();
        let mut iy = (min.y / self.spacing).floor() as i64;
        while iy as f64 * self.spacing <= max.y {
            let y = iy as f64 * self.spacing;
            let mut ix = (min.x / self.spacing).floor() as i64;
            while ix as f64 * self.spacing <= max.x {
                let x = ix as f64 * self.spacing;
                let p = Vec2::new(x, y);
                if arena.strictly_contains(p) {
                    out.push(p);
                }
                ix += 1;
            }
            iy += 1;
        }
        out
    }

    /// Orientations evenly spaced over [-pi, pi), aligned to the sector
    /// edges used by the directedness quantization.
    pub fn headings(&self) -> Vec<f64> {
        (0..self.orientations)
            .map(|k| -PI + 2.0 * PI * k as f64 / self.orientations as f64)
            .collect()
    }
}

/// A full grid of test trajectories for one agent checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub checkpoint_id: String,
    pub config_hash: String,
    pub grid: GridSpec,
    pub records: Vec<TrajectoryRecord>,
    /// Grid initializations skipped because they start on the patch.
    pub skipped: usize,
}

/// Runs the test grid, streaming each finished record into `sink` in
/// deterministic order. Patch contact does not terminate test episodes.
///
/// Record `i` draws any vision noise from a stream seeded by
/// `(noise_seed, TEST_GRID, i)`, so reruns are identical.
#[allow(clippy::too_many_arguments)]
pub fn run_test_grid_streaming<F>(
    genome: &PolicyGenome,
    sim: &SimParams,
    vision: &VisionParams,
    grid: &GridSpec,
    noise_seed: u64,
    mut sink: F,
) -> Result<usize, MetricsError>
where
    F: FnMut(TrajectoryRecord) -> Result<(), MetricsError>,
{
    grid.validate()?;
    let cal = vision.calibration(&sim.arena)?;
    let mut inits = Vec::new();
    let mut skipped = 0usize;
    for p in grid.positions(&sim.arena) {
        for &h in &grid.headings() {
            let state = AgentState::new(p, h);
            if patch_hit(&state, &sim.arena) {
                skipped += 1;
                log::debug!("skipping init on the patch at ({}, {})", p.x, p.y);
                continue;
            }
            inits.push(state);
        }
    }

    // Records are produced in parallel chunks but consumed in order.
    const CHUNK: usize = 256;
    let mut index_base = 0usize;
    for chunk in inits.chunks(CHUNK) {
        let records: Vec<Result<TrajectoryRecord, MetricsError>> = chunk
            .par_iter()
            .enumerate()
            .map(|(offset, &init)| {
                let record_index = (index_base + offset) as u64;
                let mut episode_rng = rng::stream(noise_seed, &[tag::TEST_GRID, record_index]);
                let mut samples = Vec::with_capacity(grid.horizon);
                run_episode(
                    genome,
                    sim,
                    vision,
                    &cal,
                    init,
                    grid.horizon,
                    false,
                    &mut episode_rng,
                    Some(&mut samples),
                )?;
                Ok(TrajectoryRecord {
                    init_position: init.position,
                    init_heading: init.heading,
                    samples,
                })
            })
            .collect();
        for record in records {
            sink(record?)?;
        }
        index_base += chunk.len();
    }
    Ok(skipped)
}

/// Materialized test grid; prefer the streaming variant for full-resolution
/// grids, which run to hundreds of megabytes.
pub fn run_test_grid(
    genome: &PolicyGenome,
    sim: &SimParams,
    vision: &VisionParams,
    grid: &GridSpec,
    noise_seed: u64,
    checkpoint_id: &str,
    config_hash: &str,
) -> Result<TrajectorySet, MetricsError> {
    let mut records = Vec::new();
    let skipped = run_test_grid_streaming(genome, sim, vision, grid, noise_seed, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(TrajectorySet {
        checkpoint_id: checkpoint_id.to_string(),
        config_hash: config_hash.to_string(),
        grid: *grid,
        records,
        skipped,
    })
}

/// Incremental writer for the binary trajectory store.
///
/// Layout: magic, version, config hash, checkpoint id, grid header, record
/// count, then fixed-stride records: init (x, y, heading) followed by
/// `horizon` samples of (t, x, y, heading, action), all little-endian f64.
pub struct TrajectoryStoreWriter {
    file: BufWriter<std::fs::File>,
    horizon: usize,
    count: u64,
    count_offset: u64,
}

impl TrajectoryStoreWriter {
    pub fn create(
        path: &Path,
        checkpoint_id: &str,
        config_hash: &str,
        grid: &GridSpec,
    ) -> Result<Self, MetricsError> {
        let mut header = Vec::new();
        header.extend_from_slice(STORE_MAGIC);
        bytesio::put_u32(&mut header, STORE_VERSION);
        bytesio::put_bytes(&mut header, config_hash.as_bytes());
        bytesio::put_bytes(&mut header, checkpoint_id.as_bytes());
        bytesio::put_f64(&mut header, grid.spacing);
        bytesio::put_u32(&mut header, grid.orientations as u32);
        bytesio::put_u32(&mut header, grid.horizon as u32);
        bytesio::put_u32(&mut header, grid.mask_prefix as u32);
        let count_offset = header.len() as u64;
        bytesio::put_u64(&mut header, 0); // record count, patched on finish
        let mut file = BufWriter::new(std::fs::File::create(path)?);
        file.write_all(&header)?;
        Ok(TrajectoryStoreWriter {
            file,
            horizon: grid.horizon,
            count: 0,
            count_offset,
        })
    }

    pub fn append(&mut self, record: &TrajectoryRecord) -> Result<(), MetricsError> {
        if record.samples.len() != self.horizon {
            return Err(MetricsError::Malformed(format!(
                "record has {} samples, store expects {}",
                record.samples.len(),
                self.horizon
            )));
        }
        let mut buf = Vec::with_capacity((3 + record.samples.len() * 5) * 8);
        bytesio::put_f64(&mut buf, record.init_position.x);
        bytesio::put_f64(&mut buf, record.init_position.y);
        bytesio::put_f64(&mut buf, record.init_heading);
        for s in &record.samples {
            bytesio::put_f64(&mut buf, s.t as f64);
            bytesio::put_f64(&mut buf, s.x);
            bytesio::put_f64(&mut buf, s.y);
            bytesio::put_f64(&mut buf, s.heading);
            bytesio::put_f64(&mut buf, s.action);
        }
        self.file.write_all(&buf)?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64, MetricsError> {
        use std::io::Seek;
        self.file.flush()?;
        let mut file = self.file.into_inner().map_err(|e| e.into_error())?;
        file.seek(std::io::SeekFrom::Start(self.count_offset))?;
        file.write_all(&self.count.to_le_bytes())?;
        file.sync_all()?;
        Ok(self.count)
    }
}

/// Streaming reader over a trajectory store file.
pub struct TrajectoryStoreReader {
    file: BufReader<std::fs::File>,
    pub checkpoint_id: String,
    pub config_hash: String,
    pub grid: GridSpec,
    pub record_count: u64,
    read: u64,
}

impl TrajectoryStoreReader {
    pub fn open(path: &Path) -> Result<Self, MetricsError> {
        let mut file = BufReader::new(std::fs::File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                MetricsError::MissingArtifact(format!("{} (produced by `test`)", path.display()))
            } else {
                MetricsError::Io(e)
            }
        })?);
        let fixed = bytesio::read_exact(&mut file, 8)?;
        let mut r = ByteReader::new(&fixed);
        if r.take(4)? != STORE_MAGIC {
            return Err(MetricsError::Malformed("bad magic".into()));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(MetricsError::Malformed(format!(
                "unsupported store version {version}"
            )));
        }
        let config_hash = read_string(&mut file)?;
        let checkpoint_id = read_string(&mut file)?;
        let tail = bytesio::read_exact(&mut file, 8 + 4 + 4 + 4 + 8)?;
        let mut r = ByteReader::new(&tail);
        let grid = GridSpec {
            spacing: r.f64()?,
            orientations: r.u32()? as usize,
            horizon: r.u32()? as usize,
            mask_prefix: r.u32()? as usize,
        };
        let record_count = r.u64()?;
        Ok(TrajectoryStoreReader {
            file,
            checkpoint_id,
            config_hash,
            grid,
            record_count,
            read: 0,
        })
    }

    /// Reads the next record, or `None` past the end.
    pub fn next_record(&mut self) -> Result<Option<TrajectoryRecord>, MetricsError> {
        if self.read >= self.record_count {
            return Ok(None);
        }
        let stride = (3 + self.grid.horizon * 5) * 8;
        let bytes = bytesio::read_exact(&mut self.file, stride)?;
        let mut r = ByteReader::new(&bytes);
        let init_position = Vec2::new(r.f64()?, r.f64()?);
        let init_heading = r.f64()?;
        let mut samples = Vec::with_capacity(self.grid.horizon);
        for _ in 0..self.grid.horizon {
            samples.push(StepSample {
                t: r.f64()? as usize,
                x: r.f64()?,
                y: r.f64()?,
                heading: r.f64()?,
                action: r.f64()?,
            });
        }
        self.read += 1;
        Ok(Some(TrajectoryRecord {
            init_position,
            init_heading,
            samples,
        }))
    }

    /// Applies `f` to every remaining record.
    pub fn for_each<F>(&mut self, mut f: F) -> Result<(), MetricsError>
    where
        F: FnMut(&TrajectoryRecord) -> Result<(), MetricsError>,
    {
        while let Some(record) = self.next_record()? {
            f(&record)?;
        }
        Ok(())
    }
}

fn read_string(file: &mut impl Read) -> Result<String, MetricsError> {
    let len_bytes = bytesio::read_exact(file, 8)?;
    let len = u64::from_le_bytes(len_bytes.as_slice().try_into().unwrap()) as usize;
    if len > 4096 {
        return Err(MetricsError::Malformed(format!(
            "implausible string length {len}"
        )));
    }
    let bytes = bytesio::read_exact(file, len)?;
    String::from_utf8(bytes).map_err(|_| MetricsError::Malformed("non-utf8 string".into()))
}

/// Writes a whole set through the store writer.
pub fn save_set(path: &Path, set: &TrajectorySet) -> Result<(), MetricsError> {
    let mut writer =
        TrajectoryStoreWriter::create(path, &set.checkpoint_id, &set.config_hash, &set.grid)?;
    for record in &set.records {
        writer.append(record)?;
    }
    writer.finish()?;
    Ok(())
}

/// Reads a whole set into memory.
pub fn load_set(path: &Path) -> Result<TrajectorySet, MetricsError> {
    let mut reader = TrajectoryStoreReader::open(path)?;
    let mut records = Vec::with_capacity(reader.record_count as usize);
    while let Some(record) = reader.next_record()? {
        records.push(record);
    }
    Ok(TrajectorySet {
        checkpoint_id: reader.checkpoint_id.clone(),
        config_hash: reader.config_hash.clone(),
        grid: reader.grid,
        records,
        skipped: 0,
    })
}

/// CSV mirror of a trajectory store: one row per step.
pub fn export_csv(store_path: &Path, csv_path: &Path) -> Result<(), MetricsError> {
    let mut reader = TrajectoryStoreReader::open(store_path)?;
    let mut out = BufWriter::new(std::fs::File::create(csv_path)?);
    writeln!(out, "# config_hash={}", reader.config_hash)?;
    writeln!(out, "# checkpoint={}", reader.checkpoint_id)?;
    writeln!(out, "record,t,x,y,heading,action")?;
    let mut index = 0u64;
    while let Some(record) = reader.next_record()? {
        for s in &record.samples {
            writeln!(out, "{},{},{},{},{},{}", index, s.t, s.x, s.y, s.heading, s.action)?;
        }
        index += 1;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use patchnav_core::policy::ArchSpec;

    fn small_grid() -> GridSpec {
        GridSpec {
            spacing: 200.0,
            orientations: 4,
            horizon: 50,
            mask_prefix: 25,
        }
    }

    #[test]
    fn default_lattice_is_39_by_39() {
        let arena = ArenaSpec::default();
        let grid = GridSpec::default();
        let positions = grid.positions(&arena);
        assert_eq!(positions.len(), 39 * 39);
        assert!(positions.iter().all(|p| arena.strictly_contains(*p)));
        assert_eq!(positions[0], Vec2::new(25.0, 25.0));
        assert_eq!(positions[positions.len() - 1], Vec2::new(975.0, 975.0));
    }

    #[test]
    fn record_count_matches_the_lattice_minus_patch_inits() {
        let arena = ArenaSpec::default();
        let sim = SimParams::default();
        let vision = VisionParams::default();
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        let grid = GridSpec {
            horizon: 5,
            ..GridSpec::default()
        };
        // Count oracle straight from the lattice and patch geometry.
        let expected: usize = grid
            .positions(&arena)
            .iter()
            .filter(|p| p.distance(arena.patch_center) > arena.patch_radius)
            .count()
            * grid.orientations;
        let on_patch = grid
            .positions(&arena)
            .iter()
            .filter(|p| p.distance(arena.patch_center) <= arena.patch_radius)
            .count()
            * grid.orientations;
        assert_eq!(on_patch, 13 * 16);

        let mut produced = 0usize;
        let skipped = run_test_grid_streaming(&genome, &sim, &vision, &grid, 0, |_| {
            produced += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(produced, expected);
        assert_eq!(skipped, on_patch);
        assert_eq!(produced + skipped, 39 * 39 * 16);
    }

    #[test]
    fn reruns_are_identical_even_with_noise() {
        let sim = SimParams::default();
        let vision = VisionParams {
            noise_std: 0.2,
            ..VisionParams::default()
        };
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        let grid = small_grid();
        let a = run_test_grid(&genome, &sim, &vision, &grid, 7, "ck", "hash").unwrap();
        let b = run_test_grid(&genome, &sim, &vision, &grid, 7, "ck", "hash").unwrap();
        assert_eq!(a, b);
        let c = run_test_grid(&genome, &sim, &vision, &grid, 8, "ck", "hash").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn store_round_trips_bit_exactly() {
        let sim = SimParams::default();
        let vision = VisionParams::default();
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        let grid = small_grid();
        let set = run_test_grid(&genome, &sim, &vision, &grid, 0, "gen_00042", "deadbeef").unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_grid.traj");
        save_set(&path, &set).unwrap();

        let loaded = load_set(&path).unwrap();
        assert_eq!(loaded.checkpoint_id, "gen_00042");
        assert_eq!(loaded.config_hash, "deadbeef");
        assert_eq!(loaded.grid, set.grid);
        assert_eq!(loaded.records, set.records);

        let csv_path = dir.path().join("test_grid.csv");
        export_csv(&path, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("# config_hash=deadbeef\n"));
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows - 1, set.records.len() * grid.horizon);
    }

    #[test]
    fn each_record_covers_the_full_horizon_contiguously() {
        let sim = SimParams::default();
        let vision = VisionParams::default();
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        let set = run_test_grid(&genome, &sim, &vision, &small_grid(), 0, "ck", "h").unwrap();
        assert!(!set.records.is_empty());
        for record in &set.records {
            assert_eq!(record.samples.len(), 50);
            for (i, s) in record.samples.iter().enumerate() {
                assert_eq!(s.t, i);
            }
            assert_eq!(record.samples[0].x, record.init_position.x);
            assert_eq!(record.samples[0].heading, record.init_heading);
        }
    }
}
