//! Circle footprint, moving point-cloud obstacles and the clearance check.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::geometry::{frenet_to_cartesian, FrenetState, Point2, ReferenceLine};

use super::cost::CandidateTrajectory;
use super::kdtree::KdTree;
use super::PlannerError;

/// Station step used when a short candidate is extended to the horizon.
pub const TAIL_STEP: f64 = 0.5;

/// Body dimensions. The planned path is the path of the front axle, so the
/// body spans `[-(wheelbase + rear_overhang), front_overhang]` along the
/// heading from the path point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub rear_overhang: f64,
}

impl Default for VehicleDims {
    fn default() -> Self {
        Self {
            length: 4.5,
            width: 1.8,
            wheelbase: 2.8,
            rear_overhang: 0.8,
        }
    }
}

impl VehicleDims {
    pub fn front_overhang(&self) -> f64 {
        self.length - self.wheelbase - self.rear_overhang
    }

    /// Longitudinal extent `(rear, front)` relative to the front axle.
    pub fn extent(&self) -> (f64, f64) {
        (-(self.wheelbase + self.rear_overhang), self.front_overhang())
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let ok = self.length > 0.0 && self.width > 0.0 && self.wheelbase > 0.0 && self.rear_overhang >= 0.0 && self.front_overhang() >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(PlannerError::InvalidVehicle)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    /// Offset along the heading from the path point, metres.
    pub offset: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootprintCircles {
    circles: Vec<Circle>,
    safety_margin: f64,
}

impl FootprintCircles {
    /// Checks that the circles cover the body rectangle of `dims`.
    pub fn new(circles: Vec<Circle>, safety_margin: f64, dims: &VehicleDims) -> Result<Self, PlannerError> {
        dims.validate()?;
        if circles.is_empty() || !(safety_margin >= 0.0) || circles.iter().any(|c| !(c.radius > 0.0 && c.offset.is_finite())) {
            return Err(PlannerError::InvalidFootprint);
        }
        let (rear, front) = dims.extent();
        let half = 0.5 * dims.width;
        let covered = |x: f64, y: f64| circles.iter().any(|c| (x - c.offset).hypot(y) <= c.radius + 1e-9);
        // Corners first, then a 5 cm grid over the whole rectangle.
        for (x, y) in [(rear, -half), (rear, half), (front, -half), (front, half)] {
            if !covered(x, y) {
                return Err(PlannerError::FootprintGap { x, y });
            }
        }
        let nx = ((front - rear) / 0.05).ceil() as usize;
        let ny = (dims.width / 0.05).ceil() as usize;
        for i in 0..=nx {
            let x = rear + (front - rear) * i as f64 / nx as f64;
            for j in 0..=ny {
                let y = -half + dims.width * j as f64 / ny as f64;
                if !covered(x, y) {
                    return Err(PlannerError::FootprintGap { x, y });
                }
            }
        }
        Ok(Self { circles, safety_margin })
    }

    /// `count` equal circles over equal slices of the body, each just large
    /// enough to reach its slice's corners.
    pub fn covering(dims: &VehicleDims, count: usize, safety_margin: f64) -> Result<Self, PlannerError> {
        dims.validate()?;
        if count == 0 {
            return Err(PlannerError::InvalidFootprint);
        }
        let (rear, front) = dims.extent();
        let slice = (front - rear) / count as f64;
        let radius = (0.5 * slice).hypot(0.5 * dims.width);
        let circles = (0..count)
            .map(|i| Circle {
                offset: rear + (i as f64 + 0.5) * slice,
                radius,
            })
            .collect();
        Self::new(circles, safety_margin, dims)
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn safety_margin(&self) -> f64 {
        self.safety_margin
    }

    /// Circle centres for a path point at `position` facing `heading`.
    pub fn centres(&self, position: Point2, heading: f64) -> impl Iterator<Item = (Point2, f64)> + '_ {
        let dir = Point2::from_angle(heading);
        self.circles.iter().map(move |c| (position + dir * c.offset, c.radius))
    }
}

/// A rigid point cloud moving at constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    /// Footprint sample points at time 0.
    pub points: Vec<Point2>,
    pub velocity: Point2,
}

impl Obstacle {
    /// Samples the boundary and interior of an oriented rectangle on a grid
    /// no coarser than `spacing`.
    pub fn rectangle(center: Point2, heading: f64, length: f64, width: f64, velocity: Point2, spacing: f64) -> Result<Self, PlannerError> {
        if !(length > 0.0 && width > 0.0 && spacing > 0.0) || !center.is_finite() || !velocity.is_finite() {
            return Err(PlannerError::InvalidObstacle);
        }
        let (u, v) = (Point2::from_angle(heading), Point2::from_angle(heading).perp());
        let nx = (length / spacing).ceil().max(1.0) as usize;
        let ny = (width / spacing).ceil().max(1.0) as usize;
        let mut points = Vec::with_capacity((nx + 1) * (ny + 1));
        for i in 0..=nx {
            let a = -0.5 * length + length * i as f64 / nx as f64;
            for j in 0..=ny {
                let b = -0.5 * width + width * j as f64 / ny as f64;
                points.push(center + u * a + v * b);
            }
        }
        Ok(Self { points, velocity })
    }

    pub fn position_at(&self, p: Point2, t: f64) -> Point2 {
        p + self.velocity * t
    }
}

/// Obstacles plus one KD-tree per obstacle over its time-0 points.
///
/// A query at time `t` is answered by moving the query point backwards by
/// `velocity * t`, which is exact under constant-velocity motion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleSet {
    obstacles: Vec<Obstacle>,
    trees: Option<Vec<ObstacleIndex>>,
}

/// KD-tree of one obstacle's time-0 points plus a bounding circle.
#[derive(Debug, Clone, PartialEq)]
struct ObstacleIndex {
    tree: KdTree,
    centre: Point2,
    radius: f64,
}

impl ObstacleIndex {
    fn new(points: &[Point2]) -> Self {
        let n = points.len().max(1) as f64;
        let centre = points.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n);
        let radius = points.iter().map(|p| p.distance(centre)).fold(0.0, f64::max);
        Self {
            tree: KdTree::new(points.to_vec()),
            centre,
            radius,
        }
    }
}

impl ObstacleSet {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Self { obstacles, trees: None }
    }

    /// Convenience: `new` followed by `build_index`.
    pub fn indexed(obstacles: Vec<Obstacle>) -> Self {
        let mut set = Self::new(obstacles);
        set.build_index();
        set
    }

    pub fn build_index(&mut self) {
        self.trees = Some(self.obstacles.iter().map(|o| ObstacleIndex::new(&o.points)).collect());
    }

    pub fn is_indexed(&self) -> bool {
        self.trees.is_some()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Distance from `q` to the closest obstacle point at time `t`.
    pub fn nearest_distance(&self, q: Point2, t: f64) -> Result<f64, PlannerError> {
        self.nearest_distance_within(q, t, f64::INFINITY)
    }

    /// As [`nearest_distance`](Self::nearest_distance), except that obstacles
    /// whose bounding circle is at least `limit` away are skipped. The result
    /// is exact whenever it is below `limit` and otherwise at least `limit`.
    pub fn nearest_distance_within(&self, q: Point2, t: f64, limit: f64) -> Result<f64, PlannerError> {
        let trees = self.trees.as_ref().ok_or(PlannerError::IndexNotBuilt)?;
        let mut best = f64::INFINITY;
        for (o, idx) in self.obstacles.iter().zip(trees) {
            let q0 = q - o.velocity * t;
            if q0.distance(idx.centre) - idx.radius >= best.min(limit) {
                continue;
            }
            if let Some(n) = idx.tree.nearest(q0) {
                best = best.min(n.distance());
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionResult {
    pub feasible: bool,
    /// Minimum of (distance to obstacle - circle radius) over the checked
    /// poses; `+inf` when nothing was near.
    pub clearance: f64,
}

/// Poses `(position, heading, time)` covered by a collision check: the
/// candidate's samples up to `horizon`, then, when `tail` is given and the
/// candidate ends early, its end offset held along `tail` at the same speed.
pub fn checked_poses(traj: &CandidateTrajectory, horizon: f64, tail: Option<&ReferenceLine>) -> Vec<(Point2, f64, f64)> {
    let mut poses: Vec<(Point2, f64, f64)> = traj
        .samples
        .iter()
        .take_while(|p| p.t <= horizon)
        .map(|p| (p.point.position, p.point.heading, p.t))
        .collect();
    if let (Some(line), Some(last)) = (tail, traj.samples.last()) {
        let mut prev = last.point.position;
        let mut t = last.t;
        let mut k = 1;
        while t < horizon {
            let l = traj.end_state.l + k as f64 * TAIL_STEP;
            if l > line.end_station() {
                break;
            }
            let Ok(p) = frenet_to_cartesian(line, &FrenetState::new(l, traj.end_state.d, 0.0, 0.0)) else {
                break;
            };
            t += p.position.distance(prev) / traj.speed;
            prev = p.position;
            if t > horizon {
                break;
            }
            poses.push((p.position, p.heading, t));
            k += 1;
        }
    }
    poses
}

/// Collision check of one candidate. Every pose is checked (no early exit)
/// so the reported clearance is the true minimum.
pub fn check_collision(
    traj: &CandidateTrajectory,
    obstacles: &ObstacleSet,
    footprint: &FootprintCircles,
    horizon: f64,
    tail: Option<&ReferenceLine>,
) -> Result<CollisionResult, PlannerError> {
    if !obstacles.is_indexed() {
        return Err(PlannerError::IndexNotBuilt);
    }
    let mut clearance = f64::INFINITY;
    if !obstacles.is_empty() {
        for (pos, heading, t) in checked_poses(traj, horizon, tail) {
            for (c, r) in footprint.centres(pos, heading) {
                clearance = clearance.min(obstacles.nearest_distance_within(c, t, clearance + r)? - r);
            }
        }
    }
    Ok(CollisionResult {
        feasible: clearance >= footprint.safety_margin(),
        clearance,
    })
}
