//! Arena geometry, agent kinematics, action conversion, and termination rules.

use crate::error::CoreError;
use crate::geometry::{project_onto_segment, wrap_angle, Vec2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Identity of one of the four boundary walls.
///
/// The encoding column order is fixed as (N, E, S, W) so genomes stay
/// comparable across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WallId {
    North,
    East,
    South,
    West,
}

impl WallId {
    pub const COUNT: usize = 4;

    /// Column of this wall in the visual-frame encoding.
    pub fn column(self) -> usize {
        match self {
            WallId::North => 0,
            WallId::East => 1,
            WallId::South => 2,
            WallId::West => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WallId::North => "N",
            WallId::East => "E",
            WallId::South => "S",
            WallId::West => "W",
        }
    }
}

/// Corner of the arena named by the two walls that meet there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerId {
    NorthWest,
    NorthEast,
    SouthEast,
    SouthWest,
}

impl CornerId {
    pub fn walls(self) -> (WallId, WallId) {
        match self {
            CornerId::NorthWest => (WallId::North, WallId::West),
            CornerId::NorthEast => (WallId::North, WallId::East),
            CornerId::SouthEast => (WallId::South, WallId::East),
            CornerId::SouthWest => (WallId::South, WallId::West),
        }
    }
}

/// Convex quadrilateral boundary with a circular foraging patch.
///
/// Vertices are stored in counterclockwise order; wall `i` is the segment
/// from `vertices[i]` to `vertices[(i + 1) % 4]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    vertices: [Vec2; 4],
    wall_ids: [WallId; 4],
    pub patch_center: Vec2,
    pub patch_radius: f64,
}

pub const DEFAULT_SIDE: f64 = 1000.0;
pub const DEFAULT_PATCH_RADIUS: f64 = 50.0;
/// The paper never states patch coordinates; figures show an off-center patch.
pub const DEFAULT_PATCH_CENTER: Vec2 = Vec2::new(400.0, 600.0);

impl Default for ArenaSpec {
    fn default() -> Self {
        ArenaSpec::square(DEFAULT_SIDE)
    }
}

impl ArenaSpec {
    /// Axis-aligned square arena with the default patch.
    pub fn square(side: f64) -> Self {
        ArenaSpec {
            vertices: [
                Vec2::new(0.0, 0.0),
                Vec2::new(side, 0.0),
                Vec2::new(side, side),
                Vec2::new(0.0, side),
            ],
            wall_ids: [WallId::South, WallId::East, WallId::North, WallId::West],
            patch_center: DEFAULT_PATCH_CENTER,
            patch_radius: DEFAULT_PATCH_RADIUS,
        }
    }

    pub fn new(
        vertices: [Vec2; 4],
        wall_ids: [WallId; 4],
        patch_center: Vec2,
        patch_radius: f64,
    ) -> Result<Self, CoreError> {
        let arena = ArenaSpec {
            vertices,
            wall_ids,
            patch_center,
            patch_radius,
        };
        arena.validate()?;
        Ok(arena)
    }

    pub fn with_patch(mut self, center: Vec2, radius: f64) -> Result<Self, CoreError> {
        self.patch_center = center;
        self.patch_radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for i in 0..4 {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % 4];
            let c = self.vertices[(i + 2) % 4];
            let turn = (b - a).cross(c - b);
            if turn <= 0.0 {
                return Err(CoreError::InvalidArena(format!(
                    "vertices must form a strictly convex counterclockwise quadrilateral \
                     (turn at vertex {} is {turn})",
                    (i + 1) % 4
                )));
            }
        }
        if self.patch_radius <= 0.0 {
            return Err(CoreError::InvalidArena(format!(
                "patch radius must be positive, got {}",
                self.patch_radius
            )));
        }
        for i in 0..4 {
            let d = self.signed_distance_to_wall(self.patch_center, i);
            if d <= self.patch_radius {
                return Err(CoreError::InvalidArena(format!(
                    "patch disc must lie strictly inside the boundary \
                     (distance {d} to wall {} <= radius {})",
                    self.wall_ids[i].label(),
                    self.patch_radius
                )));
            }
        }
        let mut seen = [false; 4];
        for id in self.wall_ids {
            seen[id.column()] = true;
        }
        if seen != [true; 4] {
            return Err(CoreError::InvalidArena(
                "wall identities must be a permutation of N/E/S/W".into(),
            ));
        }
        Ok(())
    }

    pub fn vertices(&self) -> [Vec2; 4] {
        self.vertices
    }

    pub fn wall_ids(&self) -> [WallId; 4] {
        self.wall_ids
    }

    /// Wall `i` as its two endpoints in counterclockwise order.
    pub fn wall_segment(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % 4])
    }

    pub fn vertex_between(&self, corner: CornerId) -> Vec2 {
        let (a, b) = corner.walls();
        for i in 0..4 {
            let incoming = self.wall_ids[(i + 3) % 4];
            let outgoing = self.wall_ids[i];
            if (incoming == a && outgoing == b) || (incoming == b && outgoing == a) {
                return self.vertices[i];
            }
        }
        unreachable!("wall ids validated as a permutation of N/E/S/W");
    }

    /// Moves one corner by `delta`, revalidating convexity and the patch.
    pub fn displace_corner(&self, corner: CornerId, delta: Vec2) -> Result<Self, CoreError> {
        let target = self.vertex_between(corner);
        let mut vertices = self.vertices;
        for v in vertices.iter_mut() {
            if *v == target {
                *v = *v + delta;
            }
        }
        ArenaSpec::new(vertices, self.wall_ids, self.patch_center, self.patch_radius)
    }

    /// Signed distance from `p` to the line through wall `i`; positive inside.
    pub fn signed_distance_to_wall(&self, p: Vec2, i: usize) -> f64 {
        let (a, b) = self.wall_segment(i);
        let edge = b - a;
        edge.cross(p - a) / edge.norm()
    }

    /// Distance from an interior point to the nearest wall.
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        (0..4)
            .map(|i| self.signed_distance_to_wall(p, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` is inside or on the boundary (within float slack).
    pub fn contains(&self, p: Vec2) -> bool {
        (0..4).all(|i| self.signed_distance_to_wall(p, i) >= -1e-9)
    }

    pub fn strictly_contains(&self, p: Vec2) -> bool {
        (0..4).all(|i| self.signed_distance_to_wall(p, i) > 0.0)
    }

    /// Closest point on the boundary polyline to `p`.
    pub fn project_to_boundary(&self, p: Vec2) -> Vec2 {
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for i in 0..4 {
            let (a, b) = self.wall_segment(i);
            let q = project_onto_segment(p, a, b);
            let d = p.distance(q);
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        (min, max)
    }

    /// Largest distance between two boundary points (max vertex separation
    /// for a convex polygon). Upper bound on any visual distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..4 {
            for j in (i + 1)..4 {
                best = best.max(self.vertices[i].distance(self.vertices[j]));
            }
        }
        best
    }
}

/// Embodied pose of the agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    /// Heading in radians, wrapped to [-pi, pi).
    pub heading: f64,
    /// Timestep index, starting at 0.
    pub t: usize,
}

impl AgentState {
    pub fn new(position: Vec2, heading: f64) -> Self {
        AgentState {
            position,
            heading: wrap_angle(heading),
            t: 0,
        }
    }
}

/// One timestep of motion: a turn and a forward translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCommand {
    /// Signed turn in radians; positive is a left (counterclockwise) turn.
    pub turn: f64,
    /// Forward speed in units per timestep.
    pub speed: f64,
}

/// Converts the network's action scalar into a motion command.
///
/// Zero maps to full speed straight ahead; the extremes map to a stationary
/// quarter turn. Positive actions turn left (counterclockwise).
pub fn action_to_motion(r: f64, v_max: f64) -> Result<MotionCommand, CoreError> {
    if !r.is_finite() {
        return Err(CoreError::InvalidAction(r));
    }
    let r = r.clamp(-1.0, 1.0);
    Ok(MotionCommand {
        turn: r * FRAC_PI_2,
        speed: v_max * (1.0 - r.abs()),
    })
}

/// Advances the agent one timestep: turn first, then translate along the new
/// heading. Leaving the boundary projects the position back onto it while the
/// rotation stands.
pub fn step_agent(state: AgentState, cmd: MotionCommand, arena: &ArenaSpec) -> AgentState {
    let heading = wrap_angle(state.heading + cmd.turn);
    let mut position = state.position + Vec2::from_angle(heading) * cmd.speed;
    if !arena.contains(position) {
        position = arena.project_to_boundary(position);
    }
    AgentState {
        position,
        heading,
        t: state.t + 1,
    }
}

/// True when the agent touches the foraging patch (boundary inclusive).
pub fn patch_hit(state: &AgentState, arena: &ArenaSpec) -> bool {
    state.position.distance(arena.patch_center) <= arena.patch_radius
}

/// Distance left to the patch rim; zero on or inside the patch.
pub fn remaining_distance(state: &AgentState, arena: &ArenaSpec) -> f64 {
    (state.position.distance(arena.patch_center) - arena.patch_radius).max(0.0)
}

/// Uniform random pose over the arena interior excluding the patch disc,
/// with heading uniform over [-pi, pi). Rejection-samples the position first,
/// then draws the heading.
pub fn random_init<R: Rng + ?Sized>(rng: &mut R, arena: &ArenaSpec) -> AgentState {
    let (min, max) = arena.bounds();
    let position = loop {
        let p = Vec2::new(
            rng.random_range(min.x..max.x),
            rng.random_range(min.y..max.y),
        );
        if arena.strictly_contains(p) && p.distance(arena.patch_center) > arena.patch_radius {
            break p;
        }
    };
    let heading = rng.random_range(-PI..PI);
    AgentState::new(position, heading)
}
