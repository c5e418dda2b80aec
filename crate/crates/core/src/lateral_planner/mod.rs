//! Sampling-based lateral planner.
//!
//! Every end state of a grid `(d_e, l_e)` yields a quintic `d(l)` from the
//! current Frenet state. Candidates are costed, sorted, and collision-checked
//! cheapest first; the first collision-free one wins.

mod collision;
mod cost;
mod kdtree;
mod quintic;

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::geometry::{FrenetState, GeometryError, ReferenceLine};

pub use collision::{check_collision, checked_poses, Circle, CollisionResult, FootprintCircles, Obstacle, ObstacleSet, VehicleDims, TAIL_STEP};
pub use cost::{build_candidate, cost_terms, evaluate_cost, sample_stations, CandidateTrajectory, CostTerms, CostWeights, TrajectorySample};
pub use kdtree::{KdTree, Nearest};
pub use quintic::{solve_quintic, QuinticPolynomial, MIN_SPAN};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("candidate span {span} m is too short")]
    ZeroLength { span: f64 },
    #[error("non-finite boundary state")]
    NonFinite,
    #[error("sampling grid is empty or malformed")]
    EmptyGrid,
    #[error("end offsets must stay within the road half-width {half_width} m")]
    GridOutsideRoad { half_width: f64 },
    #[error("cost weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("candidate needs at least 2 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("planning speed must be positive, got {speed}")]
    NonpositiveSpeed { speed: f64 },
    #[error("obstacle index has not been built")]
    IndexNotBuilt,
    #[error("no collision-free candidate ({checked} checked)")]
    NoFeasibleTrajectory { checked: usize },
    #[error("no candidate fits on the remaining reference line")]
    NoCandidates,
    #[error("footprint circles must be non-empty with positive radii")]
    InvalidFootprint,
    #[error("footprint leaves body point ({x}, {y}) uncovered")]
    FootprintGap { x: f64, y: f64 },
    #[error("invalid vehicle dimensions")]
    InvalidVehicle,
    #[error("invalid obstacle shape")]
    InvalidObstacle,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// End-state grid. `l_min..l_max` are lengths ahead of the start station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingGrid {
    pub d_min: f64,
    pub d_max: f64,
    pub delta_d: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub delta_l: f64,
    /// Road half-width bounding `|d_e|`.
    pub road_half_width: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self {
            d_min: -2.0,
            d_max: 2.0,
            delta_d: 0.1,
            l_min: 15.0,
            l_max: 30.0,
            delta_l: 0.2,
            road_half_width: 4.0,
        }
    }
}

fn axis_count(min: f64, max: f64, step: f64) -> usize {
    ((max - min) / step + 1e-9).floor() as usize + 1
}

impl SamplingGrid {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let finite = [self.d_min, self.d_max, self.delta_d, self.l_min, self.l_max, self.delta_l]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.d_min > self.d_max || self.l_min > self.l_max || !(self.delta_d > 0.0) || !(self.delta_l > 0.0) {
            return Err(PlannerError::EmptyGrid);
        }
        if self.l_min <= MIN_SPAN {
            return Err(PlannerError::ZeroLength { span: self.l_min });
        }
        if self.d_min.abs().max(self.d_max.abs()) > self.road_half_width {
            return Err(PlannerError::GridOutsideRoad {
                half_width: self.road_half_width,
            });
        }
        Ok(())
    }

    pub fn d_count(&self) -> usize {
        axis_count(self.d_min, self.d_max, self.delta_d)
    }

    pub fn l_count(&self) -> usize {
        axis_count(self.l_min, self.l_max, self.delta_l)
    }

    pub fn count(&self) -> usize {
        self.d_count() * self.l_count()
    }
}

/// All grid end states, `l` outer and `d` inner, with zero slope and
/// curvature. `l` is relative to the start station.
pub fn sample_end_states(grid: &SamplingGrid) -> Result<Vec<FrenetState>, PlannerError> {
    grid.validate()?;
    let (nd, nl) = (grid.d_count(), grid.l_count());
    let mut out = Vec::with_capacity(nd * nl);
    for i in 0..nl {
        let l = grid.l_min + i as f64 * grid.delta_l;
        for j in 0..nd {
            out.push(FrenetState::new(l, grid.d_min + j as f64 * grid.delta_d, 0.0, 0.0));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub grid: SamplingGrid,
    pub weights: CostWeights,
    /// Station step between candidate samples, metres.
    pub sample_step: f64,
    /// Prediction horizon of the collision check, seconds.
    pub horizon: f64,
    /// Hold each candidate's end offset along the reference line until the
    /// horizon when the candidate itself ends earlier.
    pub extend_to_horizon: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            grid: SamplingGrid::default(),
            weights: CostWeights::default(),
            sample_step: 0.5,
            horizon: 5.0,
            extend_to_horizon: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        self.grid.validate()?;
        self.weights.validate()?;
        if !(self.sample_step > 0.0 && self.horizon >= 0.0) {
            return Err(PlannerError::EmptyGrid);
        }
        Ok(())
    }
}

/// Builds and costs one candidate per grid end state, in grid order.
/// End states past the end of `reference`, or whose offset path would cross
/// a centre of curvature, are skipped.
pub fn generate_candidates(
    c0: &FrenetState,
    config: &PlannerConfig,
    reference: &ReferenceLine,
    previous: Option<&CandidateTrajectory>,
    speed: f64,
) -> Result<Vec<CandidateTrajectory>, PlannerError> {
    config.validate()?;
    if !(speed > 0.0) {
        return Err(PlannerError::NonpositiveSpeed { speed });
    }
    let ends = sample_end_states(&config.grid)?;
    let mut out = Vec::with_capacity(ends.len());
    for e in ends {
        let ce = FrenetState::new(c0.l + e.l, e.d, 0.0, 0.0);
        if ce.l > reference.end_station() {
            continue;
        }
        let mut cand = match build_candidate(c0, &ce, reference, speed, config.sample_step) {
            Ok(c) => c,
            Err(PlannerError::Geometry(GeometryError::CurvatureSingularity { .. } | GeometryError::StationOutOfRange { .. })) => continue,
            Err(e) => return Err(e),
        };
        cand.cost = evaluate_cost(&cand, &config.weights, previous)?;
        out.push(cand);
    }
    if out.is_empty() {
        return Err(PlannerError::NoCandidates);
    }
    Ok(out)
}

/// Candidate indices by ascending cost, ties by index.
pub fn cost_order(candidates: &[CandidateTrajectory]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[a].cost.total_cmp(&candidates[b].cost).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub selected: usize,
    /// Number of candidates that were collision-checked.
    pub checked: usize,
    pub clearance: f64,
}

/// Collision-checks candidates in cost order until one is feasible. Only the
/// checked prefix gets its `collision_checked`, `feasible` and `clearance`
/// fields set.
pub fn select_lazy(
    candidates: &mut [CandidateTrajectory],
    obstacles: &ObstacleSet,
    footprint: &FootprintCircles,
    horizon: f64,
    tail: Option<&ReferenceLine>,
) -> Result<Selection, PlannerError> {
    let mut checked = 0;
    for i in cost_order(candidates) {
        let res = check_collision(&candidates[i], obstacles, footprint, horizon, tail)?;
        let c = &mut candidates[i];
        c.collision_checked = true;
        c.feasible = res.feasible;
        c.clearance = res.clearance;
        checked += 1;
        if res.feasible {
            return Ok(Selection {
                selected: i,
                checked,
                clearance: res.clearance,
            });
        }
    }
    Err(PlannerError::NoFeasibleTrajectory { checked })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    /// Every generated candidate, in grid order.
    pub candidates: Vec<CandidateTrajectory>,
    pub selection: Selection,
}

impl PlanOutcome {
    pub fn selected(&self) -> &CandidateTrajectory {
        &self.candidates[self.selection.selected]
    }
}

/// Generates all candidates and returns them with the cheapest
/// collision-free one selected.
///
/// On [`PlannerError::NoFeasibleTrajectory`] the caller decides the fallback.
pub fn plan(
    c0: &FrenetState,
    config: &PlannerConfig,
    obstacles: &ObstacleSet,
    footprint: &FootprintCircles,
    reference: &ReferenceLine,
    previous: Option<&CandidateTrajectory>,
    speed: f64,
) -> Result<PlanOutcome, PlannerError> {
    let mut candidates = generate_candidates(c0, config, reference, previous, speed)?;
    let tail = config.extend_to_horizon.then_some(reference);
    let selection = select_lazy(&mut candidates, obstacles, footprint, config.horizon, tail)?;
    Ok(PlanOutcome { candidates, selection })
}
