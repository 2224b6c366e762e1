//! Temporal heading correlation, decorrelation time, spatial heading
//! profiles, and the relative-orientation polar histogram.

use crate::error::MetricsError;
use crate::trajectory::{TrajectoryRecord, TrajectorySet};
use patchnav_core::geometry::{wrap_angle, Vec2};
use std::f64::consts::PI;

/// Streaming accumulator for `C(t) = <cos(phi(t0 + t) - phi(t0))>`, the mean
/// taken over records at each lag. `t0` is the masked orientation prefix.
#[derive(Debug, Clone)]
pub struct TemporalCorrelation {
    t0: usize,
    sums: Vec<f64>,
    records: usize,
}

impl TemporalCorrelation {
    pub fn new(horizon: usize, t0: usize) -> Result<Self, MetricsError> {
        if horizon <= t0 {
            return Err(MetricsError::InvalidParam(format!(
                "horizon {horizon} must exceed the delay {t0}"
            )));
        }
        Ok(TemporalCorrelation {
            t0,
            sums: vec![0.0; horizon - t0],
            records: 0,
        })
    }

    pub fn add_record(&mut self, record: &TrajectoryRecord) {
        let phi0 = record.samples[self.t0].heading;
        for (lag, sample) in record.samples[self.t0..].iter().enumerate() {
            self.sums[lag] += (sample.heading - phi0).cos();
        }
        self.records += 1;
    }

    /// The correlation curve; `C(0) = 1` exactly.
    pub fn finish(&self) -> Vec<f64> {
        assert!(self.records > 0, "no records accumulated");
        self.sums.iter().map(|s| s / self.records as f64).collect()
    }
}

/// Curve over a whole set.
pub fn temporal_correlation(set: &TrajectorySet) -> Result<Vec<f64>, MetricsError> {
    let mut acc = TemporalCorrelation::new(set.grid.horizon, set.grid.mask_prefix)?;
    for record in &set.records {
        acc.add_record(record);
    }
    Ok(acc.finish())
}

/// Decorrelation time: the first lag at which the curve drops below half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decorrelation {
    pub time: usize,
    /// Set when the curve never crossed; `time` is then the curve length.
    pub censored: bool,
}

pub fn decorrelation_time(curve: &[f64]) -> Decorrelation {
    for (t, &c) in curve.iter().enumerate() {
        if c < 0.5 {
            return Decorrelation {
                time: t,
                censored: false,
            };
        }
    }
    Decorrelation {
        time: curve.len(),
        censored: true,
    }
}

/// Scatter of (distance to patch center, heading relative to the initial
/// route heading) for all unmasked timesteps of one record. The initial
/// route heading is the orientation at the end of the masked prefix.
pub fn heading_profile_rows(
    record: &TrajectoryRecord,
    patch_center: Vec2,
    t0: usize,
) -> impl Iterator<Item = (f64, f64)> + '_ {
    let phi0 = record.samples[t0].heading;
    record.samples[t0..].iter().map(move |s| {
        let d = Vec2::new(s.x, s.y).distance(patch_center);
        (d, wrap_angle(s.heading - phi0))
    })
}

pub fn heading_profile(set: &TrajectorySet, patch_center: Vec2) -> Vec<(f64, f64)> {
    let t0 = set.grid.mask_prefix;
    set.records
        .iter()
        .flat_map(|r| heading_profile_rows(r, patch_center, t0))
        .collect()
}

/// Streaming 16-bin histogram of relative orientation for unmasked
/// timesteps farther than `min_distance` from the patch center.
#[derive(Debug, Clone)]
pub struct PolarHistogram {
    pub bins: Vec<u64>,
    patch_center: Vec2,
    min_distance: f64,
    t0: usize,
}

impl PolarHistogram {
    pub fn new(n_bins: usize, patch_center: Vec2, min_distance: f64, t0: usize) -> Self {
        PolarHistogram {
            bins: vec![0; n_bins],
            patch_center,
            min_distance,
            t0,
        }
    }

    pub fn add_record(&mut self, record: &TrajectoryRecord) {
        let phi0 = record.samples[self.t0].heading;
        for s in &record.samples[self.t0..] {
            if Vec2::new(s.x, s.y).distance(self.patch_center) > self.min_distance {
                let rel = wrap_angle(s.heading - phi0);
                self.bins[orientation_bin(rel, self.bins.len())] += 1;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Sector index of a heading among `n` equal sectors with edges starting at
/// -pi, matching the test-grid orientations.
pub fn orientation_bin(heading: f64, n: usize) -> usize {
    let h = wrap_angle(heading);
    (((h + PI) / (2.0 * PI) * n as f64) as usize).min(n - 1)
}

pub fn polar_histogram(set: &TrajectorySet, min_distance: f64, patch_center: Vec2) -> Vec<u64> {
    let mut acc = PolarHistogram::new(16, patch_center, min_distance, set.grid.mask_prefix);
    for record in &set.records {
        acc.add_record(record);
    }
    acc.bins
}
