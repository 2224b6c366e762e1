//! Raycast vision: a fan of rays across the field of view, wall identity per
//! ray, and optional Weber-Fechner distance scaling of the one-hot encoding.

use crate::arena::{AgentState, ArenaSpec, WallId};
use crate::error::CoreError;
use crate::geometry::{wrap_angle, Vec2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Floor on encodable distances; a point agent can touch a wall, and the
/// logarithmic scaling needs a positive minimum.
pub const D_MIN: f64 = 1.0;

const T_EPS: f64 = 1e-9;
const U_EPS: f64 = 1e-9;

/// Intersection of one ray with the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub ray_index: usize,
    pub wall_id: WallId,
    /// Length from the agent position to the boundary along the ray.
    pub distance: f64,
    /// Ray direction relative to the heading, ascending from -theta to +theta.
    pub ray_offset: f64,
}

/// One-hot (per ray) visual input, rays x 4 wall columns.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFrame {
    /// Row-major values, `values[ray * 4 + column]`.
    values: Vec<f64>,
    pub upsilon: usize,
    pub fov: f64,
    pub sigma: f64,
}

impl VisualFrame {
    /// Builds a frame from raw row-major values. Frames produced by
    /// [`encode_frame`] always have one-hot rows; this constructor only
    /// checks the shape, for synthetic inputs.
    pub fn new(values: Vec<f64>, upsilon: usize, fov: f64, sigma: f64) -> Result<Self, CoreError> {
        if values.len() != upsilon * WallId::COUNT {
            return Err(CoreError::ShapeMismatch {
                got: values.len(),
                want: upsilon * WallId::COUNT,
            });
        }
        Ok(VisualFrame {
            values,
            upsilon,
            fov,
            sigma,
        })
    }

    pub fn value(&self, ray: usize, column: usize) -> f64 {
        self.values[ray * WallId::COUNT + column]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Frame with the ray order reversed; the view seen in a mirror.
    pub fn mirrored(&self) -> VisualFrame {
        let mut values = vec![0.0; self.values.len()];
        for ray in 0..self.upsilon {
            let src = (self.upsilon - 1 - ray) * WallId::COUNT;
            values[ray * WallId::COUNT..(ray + 1) * WallId::COUNT]
                .copy_from_slice(&self.values[src..src + WallId::COUNT]);
        }
        VisualFrame {
            values,
            upsilon: self.upsilon,
            fov: self.fov,
            sigma: self.sigma,
        }
    }
}

/// Weber-Fechner calibration mapping distance onto the encoding range.
///
/// `y(x) = -ln(x)/k + m`, fixed so that `y(d_min) = 1` and
/// `y(d_max) = 1 - sigma` exactly. `sigma = 0` disables distance scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingCalibration {
    pub sigma: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// 1/k in the scaling law; sigma / ln(d_max / d_min).
    pub inv_k: f64,
    /// Offset m; 1 + ln(d_min)/k.
    pub m: f64,
    log_span: f64,
}

impl EncodingCalibration {
    pub fn new(sigma: f64, d_min: f64, d_max: f64) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(CoreError::InvalidVision(format!(
                "sigma must be in [0, 1], got {sigma}"
            )));
        }
        if !(d_min > 0.0 && d_max > d_min) {
            return Err(CoreError::InvalidVision(format!(
                "need 0 < d_min < d_max, got d_min={d_min}, d_max={d_max}"
            )));
        }
        let log_span = (d_max / d_min).ln();
        Ok(EncodingCalibration {
            sigma,
            d_min,
            d_max,
            inv_k: sigma / log_span,
            m: 1.0 + (sigma / log_span) * d_min.ln(),
            log_span,
        })
    }

    /// Default calibration for an arena: 1 unit up to the boundary diameter.
    pub fn for_arena(sigma: f64, arena: &ArenaSpec) -> Result<Self, CoreError> {
        EncodingCalibration::new(sigma, D_MIN, arena.diameter())
    }

    /// Encoded value for a distance already inside [d_min, d_max].
    ///
    /// Written as a ratio of logs so the calibration endpoints are exact.
    pub fn encode(&self, x: f64) -> f64 {
        1.0 - self.sigma * ((x / self.d_min).ln() / self.log_span)
    }
}

/// Casts `upsilon` rays evenly spaced over the field of view and reports the
/// wall each one hits.
///
/// `fov` is the fraction of the full circle spanned by the fan, so the ray
/// offsets run from `-fov*pi` to `+fov*pi` inclusive. A ray passing exactly
/// through a corner is assigned the clockwise-adjacent wall.
pub fn cast_rays(
    state: &AgentState,
    arena: &ArenaSpec,
    fov: f64,
    upsilon: usize,
) -> Result<Vec<RayHit>, CoreError> {
    if !(fov > 0.0 && fov < 1.0) {
        return Err(CoreError::InvalidVision(format!(
            "fov must be in (0, 1), got {fov}"
        )));
    }
    if upsilon < 2 {
        return Err(CoreError::InvalidVision(format!(
            "need at least 2 rays, got {upsilon}"
        )));
    }
    let theta = fov * PI;
    let mut hits = Vec::with_capacity(upsilon);
    for i in 0..upsilon {
        let offset = -theta + 2.0 * theta * i as f64 / (upsilon - 1) as f64;
        let direction = Vec2::from_angle(wrap_angle(state.heading + offset));
        let (wall, distance) = intersect_boundary(state.position, direction, arena);
        hits.push(RayHit {
            ray_index: i,
            wall_id: wall,
            distance,
            ray_offset: offset,
        });
    }
    Ok(hits)
}

/// First intersection of the ray `origin + t * direction` with the boundary.
///
/// Walls are intersected analytically; among candidates the smallest `t`
/// wins, and a corner tie goes to the wall whose counterclockwise segment
/// ends at the corner, which is the clockwise-adjacent wall.
fn intersect_boundary(origin: Vec2, direction: Vec2, arena: &ArenaSpec) -> (WallId, f64) {
    let mut best: Option<(f64, f64, WallId)> = None; // (t, u, wall)
    for i in 0..4 {
        let (a, b) = arena.wall_segment(i);
        let edge = b - a;
        let denom = direction.cross(edge);
        if denom.abs() < 1e-15 {
            continue; // parallel; a collinear graze resolves at the corners
        }
        let rel = a - origin;
        let t = rel.cross(edge) / denom;
        let u = rel.cross(direction) / denom;
        if t >= -T_EPS && (-U_EPS..=1.0 + U_EPS).contains(&u) {
            let candidate = (t, u, arena.wall_ids()[i]);
            best = match best {
                None => Some(candidate),
                Some(cur) => {
                    if t < cur.0 - T_EPS || ((t - cur.0).abs() <= T_EPS && u > cur.1) {
                        Some(candidate)
                    } else {
                        Some(cur)
                    }
                }
            };
        }
    }
    match best {
        Some((t, _, wall)) => (wall, t.max(0.0)),
        // Degenerate pose (e.g. exactly on a vertex looking outward):
        // report the nearest wall at zero distance.
        None => {
            let mut wall = arena.wall_ids()[0];
            let mut best_d = f64::INFINITY;
            for i in 0..4 {
                let (a, b) = arena.wall_segment(i);
                let d = origin.distance(crate::geometry::project_onto_segment(origin, a, b));
                if d < best_d {
                    best_d = d;
                    wall = arena.wall_ids()[i];
                }
            }
            (wall, 0.0)
        }
    }
}

/// Encodes ray hits into the one-hot visual frame, scaling each hit by the
/// Weber-Fechner law. Distances outside the calibrated range are clamped.
pub fn encode_frame(hits: &[RayHit], cal: &EncodingCalibration) -> VisualFrame {
    let upsilon = hits.len();
    let mut values = vec![0.0; upsilon * WallId::COUNT];
    for hit in hits {
        let mut x = hit.distance;
        if x < cal.d_min || x > cal.d_max {
            log::trace!(
                "clamping ray {} distance {} into [{}, {}]",
                hit.ray_index,
                x,
                cal.d_min,
                cal.d_max
            );
            x = x.clamp(cal.d_min, cal.d_max);
        }
        values[hit.ray_index * WallId::COUNT + hit.wall_id.column()] = cal.encode(x);
    }
    let fov = if upsilon > 1 {
        (hits[upsilon - 1].ray_offset - hits[0].ray_offset) / (2.0 * PI)
    } else {
        0.0
    };
    VisualFrame {
        values,
        upsilon,
        fov,
        sigma: cal.sigma,
    }
}

/// Pose whose heading is jittered for the vision call only; kinematics keep
/// the true heading. Zero noise returns the pose untouched and draws nothing.
pub fn perturb_visual_angle<R: Rng + ?Sized>(
    state: &AgentState,
    noise_std: f64,
    rng: &mut R,
) -> AgentState {
    if noise_std <= 0.0 {
        return *state;
    }
    let normal = Normal::new(0.0, noise_std).expect("noise_std checked nonnegative");
    AgentState {
        position: state.position,
        heading: wrap_angle(state.heading + normal.sample(rng)),
        t: state.t,
    }
}
