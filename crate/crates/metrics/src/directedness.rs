//! Directedness: inverted, normalized directional entropy of headings per
//! spatial bin.

use crate::correlation::orientation_bin;
use crate::error::MetricsError;
use crate::trajectory::{TrajectoryRecord, TrajectorySet};
use patchnav_core::arena::ArenaSpec;
use patchnav_core::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectednessParams {
    /// Spatial bin side length.
    pub bin_size: f64,
    /// Number of orientation sectors.
    pub orientations: usize,
    /// Samples closer than this to any wall are masked out.
    pub boundary_margin: f64,
    /// Samples closer than this to the patch center are masked out.
    pub patch_margin: f64,
    /// Leading timesteps masked out of every record.
    pub mask_prefix: usize,
}

impl Default for DirectednessParams {
    fn default() -> Self {
        DirectednessParams {
            bin_size: 25.0,
            orientations: 16,
            boundary_margin: 100.0,
            patch_margin: 100.0,
            mask_prefix: 25,
        }
    }
}

/// Per-bin directedness over the arena's bounding box.
#[derive(Debug, Clone)]
pub struct DirectednessMap {
    pub nx: usize,
    pub ny: usize,
    pub origin: Vec2,
    pub bin_size: f64,
    /// Row-major (y-major) per-bin directedness; `None` for bins without
    /// samples (all-masked regions included).
    pub bins: Vec<Option<f64>>,
    /// Mean over bins that received at least one sample.
    pub mean: f64,
}

impl DirectednessMap {
    pub fn bin(&self, ix: usize, iy: usize) -> Option<f64> {
        self.bins[iy * self.nx + ix]
    }
}

/// Streaming accumulator of per-bin orientation histograms.
#[derive(Debug, Clone)]
pub struct DirectednessAccum {
    params: DirectednessParams,
    arena: ArenaSpec,
    nx: usize,
    ny: usize,
    origin: Vec2,
    counts: Vec<u64>,
}

impl DirectednessAccum {
    pub fn new(arena: &ArenaSpec, params: DirectednessParams) -> Result<Self, MetricsError> {
        if !(params.bin_size > 0.0) || params.orientations == 0 {
            return Err(MetricsError::InvalidParam(
                "directedness needs a positive bin size and at least one sector".into(),
            ));
        }
        let (min, max) = arena.bounds();
        let nx = ((max.x - min.x) / params.bin_size).ceil() as usize;
        let ny = ((max.y - min.y) / params.bin_size).ceil() as usize;
        Ok(DirectednessAccum {
            params,
            arena: arena.clone(),
            nx: nx.max(1),
            ny: ny.max(1),
            origin: min,
            counts: vec![0; nx.max(1) * ny.max(1) * params.orientations],
        })
    }

    fn masked(&self, p: Vec2) -> bool {
        self.arena.distance_to_boundary(p) < self.params.boundary_margin
            || p.distance(self.arena.patch_center) < self.params.patch_margin
    }

    pub fn add_record(&mut self, record: &TrajectoryRecord) {
        let m = self.params.orientations;
        for s in &record.samples[self.params.mask_prefix..] {
            let p = Vec2::new(s.x, s.y);
            if self.masked(p) {
                continue;
            }
            let ix = (((p.x - self.origin.x) / self.params.bin_size) as usize).min(self.nx - 1);
            let iy = (((p.y - self.origin.y) / self.params.bin_size) as usize).min(self.ny - 1);
            let ob = orientation_bin(s.heading, m);
            self.counts[(iy * self.nx + ix) * m + ob] += 1;
        }
    }

    /// Collapses the histograms into the directedness map.
    ///
    /// Entropy is computed in base 2 so that the uniform and single-sector
    /// extremes land exactly on 0 and 1;
    /// `D = (H_max - H) / (H_max - H_min)` with `H_max = log2(sectors)`,
    /// `H_min = 0`.
    pub fn finish(&self) -> DirectednessMap {
        let m = self.params.orientations;
        let h_max = (m as f64).log2();
        let mut bins = vec![None; self.nx * self.ny];
        let mut total = 0.0;
        let mut occupied = 0usize;
        for b in 0..self.nx * self.ny {
            let hist = &self.counts[b * m..(b + 1) * m];
            let n: u64 = hist.iter().sum();
            if n == 0 {
                continue;
            }
            let mut entropy = 0.0;
            for &c in hist {
                if c > 0 {
                    let p = c as f64 / n as f64;
                    entropy -= p * p.log2();
                }
            }
            let d = (h_max - entropy) / h_max;
            bins[b] = Some(d);
            total += d;
            occupied += 1;
        }
        DirectednessMap {
            nx: self.nx,
            ny: self.ny,
            origin: self.origin,
            bin_size: self.params.bin_size,
            bins,
            mean: if occupied > 0 {
                total / occupied as f64
            } else {
                f64::NAN
            },
        }
    }
}

/// Directedness map and mean over a whole set.
pub fn directedness(
    set: &TrajectorySet,
    arena: &ArenaSpec,
    params: DirectednessParams,
) -> Result<DirectednessMap, MetricsError> {
    let mut acc = DirectednessAccum::new(arena, params)?;
    for record in &set.records {
        acc.add_record(record);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{set_of, synthetic_record};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params() -> DirectednessParams {
        DirectednessParams::default()
    }

    /// Record pinned at one position cycling through the given headings.
    fn pinned(pos: Vec2, headings: &[f64], horizon: usize) -> crate::trajectory::TrajectoryRecord {
        let mut r = synthetic_record(pos, 0.0, 0.0, 0.0, horizon);
        for (i, s) in r.samples.iter_mut().enumerate() {
            s.heading = headings[i % headings.len()];
        }
        r
    }

    #[test]
    fn single_orientation_bin_is_exactly_one() {
        let arena = ArenaSpec::default();
        // In the unmasked interior, away from patch (400,600).
        let record = pinned(Vec2::new(800.0, 300.0), &[1.0], 200);
        let map = directedness(&set_of(vec![record], 200), &arena, params()).unwrap();
        assert_eq!(map.nx, 40);
        assert_eq!(map.ny, 40);
        assert_eq!(map.bin(32, 12), Some(1.0));
        assert_eq!(map.mean, 1.0);
    }

    #[test]
    fn uniform_orientations_score_exactly_zero() {
        let arena = ArenaSpec::default();
        let headings: Vec<f64> = (0..16).map(|k| -PI + 2.0 * PI * k as f64 / 16.0).collect();
        // 16 unmasked samples per own bin cycle evenly through all sectors:
        // use a horizon giving a multiple of 16 unmasked samples.
        let record = pinned(Vec2::new(800.0, 300.0), &headings, 25 + 160);
        let map = directedness(&set_of(vec![record], 185), &arena, params()).unwrap();
        assert_eq!(map.bin(32, 12), Some(0.0));
        assert_eq!(map.mean, 0.0);
    }

    #[test]
    fn two_equiprobable_orientations_score_three_quarters() {
        let arena = ArenaSpec::default();
        let record = pinned(Vec2::new(800.0, 300.0), &[0.0, PI / 2.0], 25 + 64);
        let map = directedness(&set_of(vec![record], 89), &arena, params()).unwrap();
        assert_eq!(map.bin(32, 12), Some(0.75));
    }

    #[test]
    fn masks_exclude_boundary_patch_and_prefix() {
        let arena = ArenaSpec::default();
        let near_wall = pinned(Vec2::new(50.0, 500.0), &[0.0], 200);
        let near_patch = pinned(Vec2::new(420.0, 620.0), &[0.0], 200);
        let map = directedness(&set_of(vec![near_wall, near_patch], 200), &arena, params()).unwrap();
        assert!(map.bins.iter().all(|b| b.is_none()));
        assert!(map.mean.is_nan());

        // Samples before the mask prefix never count: pin the first 25 steps
        // in the interior and the rest against the wall.
        let mut r = pinned(Vec2::new(800.0, 300.0), &[0.0], 200);
        for s in r.samples.iter_mut().skip(25) {
            s.x = 10.0;
        }
        let map = directedness(&set_of(vec![r], 200), &arena, params()).unwrap();
        assert!(map.bins.iter().all(|b| b.is_none()));
    }

    #[test]
    fn base_invariance_of_directedness() {
        // D computed with natural-log entropy agrees with the base-2 value.
        let arena = ArenaSpec::default();
        let headings = [0.2, 0.2, 1.4, 2.8, -2.0];
        let record = pinned(Vec2::new(800.0, 300.0), &headings, 25 + 80);
        let map = directedness(&set_of(vec![record], 105), &arena, params()).unwrap();
        let d2 = map.bin(32, 12).unwrap();

        let counts = [32usize, 16, 16, 16, 0];
        let n: usize = counts.iter().sum();
        let h_nat: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum();
        let d_nat = (16f64.ln() - h_nat) / 16f64.ln();
        assert_relative_eq!(d2, d_nat, epsilon = 1e-12);
    }

    #[test]
    fn directedness_always_in_unit_interval() {
        let arena = ArenaSpec::default();
        let mut records = Vec::new();
        for i in 0..8 {
            records.push(synthetic_record(
                Vec2::new(300.0 + 50.0 * i as f64, 820.0),
                i as f64,
                0.03 * i as f64,
                1.0,
                200,
            ));
        }
        let map = directedness(&set_of(records, 200), &arena, params()).unwrap();
        for b in map.bins.iter().flatten() {
            assert!((0.0..=1.0).contains(b), "D = {b}");
        }
        assert!((0.0..=1.0).contains(&map.mean));
    }
}
