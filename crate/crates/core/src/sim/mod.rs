//! Closed-loop simulation: reference line construction, periodic lateral
//! replanning, ACC and Stanley control, and the bicycle plant.

mod trace;
mod vehicle;

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acc::{AccError, AccNoise, AccParams, AccState, LqgController};
use crate::bezier::{smooth_corners, BezierError, CornerSpec};
use crate::geometry::{frenet_to_cartesian, FrenetState, GeometryError, PathPoint, Point2, ReferenceLine, DEFAULT_PROJECTION_HORIZON};
use crate::lateral_planner::{
    generate_candidates, sample_stations, select_lazy, CandidateTrajectory, FootprintCircles, Obstacle, ObstacleSet, PlannerConfig, PlannerError,
    Selection, VehicleDims,
};
use crate::spline::{fit_spline, SplineError};
use crate::stanley::{compute_errors, steer, StanleyError, StanleySchedule};

pub use trace::{metrics, EndReason, Metrics, ReplanRow, ReplanStatus, Trace, TraceRow};
pub use vehicle::{bicycle_step, VehicleState};

/// Station step of the path handed to the tracker, metres.
pub const TRACKING_STEP: f64 = 0.1;
/// How far the tracked path continues past a candidate's end, metres.
pub const TRACKING_TAIL: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid step: {0}")]
    InvalidStep(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("vehicle left the reference line at t = {t} s")]
    OffRoad { t: f64 },
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Bezier(#[from] BezierError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Acc(#[from] AccError),
    #[error(transparent)]
    Stanley(#[from] StanleyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointSection {
    pub points: Vec<Point2>,
    /// Resampling step of the reference line, metres.
    pub step: f64,
}

impl Default for WaypointSection {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            step: 0.1,
        }
    }
}

/// Rectangular obstacle moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Point2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub velocity: Point2,
    pub point_spacing: f64,
}

impl Default for ObstacleSpec {
    fn default() -> Self {
        Self {
            center: Point2::default(),
            heading: 0.0,
            length: 4.5,
            width: 1.8,
            velocity: Point2::default(),
            point_spacing: 0.25,
        }
    }
}

impl ObstacleSpec {
    pub fn to_obstacle(&self) -> Result<Obstacle, PlannerError> {
        Obstacle::rectangle(self.center, self.heading, self.length, self.width, self.velocity, self.point_spacing)
    }
}

/// Start pose given in the Frenet frame of the front axle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub station: f64,
    pub offset: f64,
    /// Added to the reference heading at `station`.
    pub heading_offset: f64,
    /// Defaults to the cruise speed.
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub rear_overhang: f64,
    pub footprint_circles: usize,
    pub safety_margin: f64,
    pub initial: InitialState,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let d = VehicleDims::default();
        Self {
            length: d.length,
            width: d.width,
            wheelbase: d.wheelbase,
            rear_overhang: d.rear_overhang,
            footprint_circles: 3,
            safety_margin: 0.3,
            initial: InitialState::default(),
        }
    }
}

impl VehicleConfig {
    pub fn dims(&self) -> VehicleDims {
        VehicleDims {
            length: self.length,
            width: self.width,
            wheelbase: self.wheelbase,
            rear_overhang: self.rear_overhang,
        }
    }

    pub fn footprint(&self) -> Result<FootprintCircles, PlannerError> {
        FootprintCircles::covering(&self.dims(), self.footprint_circles, self.safety_margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccConfig {
    pub params: AccParams,
    pub noise: AccNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub replan_period: f64,
    pub duration: f64,
    pub cruise_speed: f64,
    pub seed: u64,
    /// Add seeded Gaussian noise (variances from the ACC noise section) to
    /// the ACC measurements.
    pub measurement_noise: bool,
    /// Track the reference line directly when false.
    pub planner_enabled: bool,
    /// Half-width of the lane, centred on the planned offset, in which an
    /// obstacle ahead becomes the ACC target.
    pub corridor_half_width: f64,
    /// A replan starts from the previous plan when the vehicle is within this
    /// distance of it, and from the measured pose otherwise.
    pub replan_snap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            replan_period: 0.1,
            duration: 20.0,
            cruise_speed: 10.0,
            seed: 0,
            measurement_noise: true,
            planner_enabled: true,
            corridor_half_width: 2.0,
            replan_snap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub waypoints: WaypointSection,
    pub corners: Vec<CornerSpec>,
    pub obstacles: Vec<ObstacleSpec>,
    pub vehicle: VehicleConfig,
    pub planner: PlannerConfig,
    pub acc: AccConfig,
    pub stanley: StanleySchedule,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt <= 0.1) {
            return Err(SimError::InvalidScenario("sim.dt must lie in (0, 0.1] s"));
        }
        if !(s.replan_period >= s.dt) {
            return Err(SimError::InvalidScenario("sim.replan_period must be at least sim.dt"));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(SimError::InvalidScenario("sim.duration must be positive"));
        }
        if !(s.cruise_speed >= 0.0 && s.corridor_half_width >= 0.0 && s.replan_snap >= 0.0) {
            return Err(SimError::InvalidScenario("sim speeds and widths must be non-negative"));
        }
        if !(self.waypoints.step > 0.0) {
            return Err(SimError::InvalidScenario("waypoints.step must be positive"));
        }
        if !(self.stanley.delta_max > 0.0 && self.stanley.delta_max < core::f64::consts::FRAC_PI_2) {
            return Err(SimError::InvalidScenario("stanley.delta_max must lie in (0, pi/2)"));
        }
        if self.vehicle.initial.speed.is_some_and(|v| !(v >= 0.0)) {
            return Err(SimError::InvalidScenario("vehicle.initial.speed must be non-negative"));
        }
        self.planner.validate()?;
        self.acc.params.validate()?;
        Ok(())
    }

    fn replan_every(&self) -> usize {
        ((self.sim.replan_period / self.sim.dt).round() as usize).max(1)
    }
}

/// Spline fit, uniform resampling and corner smoothing of the waypoints.
pub fn build_reference(scenario: &Scenario) -> Result<ReferenceLine, SimError> {
    let spline = fit_spline(&scenario.waypoints.points)?;
    let line = spline.resample_uniform(scenario.waypoints.step)?;
    Ok(smooth_corners(&line, &scenario.corners, scenario.waypoints.step)?)
}

/// Obstacles at time 0, indexed.
pub fn obstacle_set(scenario: &Scenario) -> Result<ObstacleSet, SimError> {
    let obs = scenario.obstacles.iter().map(|o| o.to_obstacle()).collect::<Result<Vec<_>, _>>()?;
    Ok(ObstacleSet::indexed(obs))
}

pub fn initial_state(scenario: &Scenario, line: &ReferenceLine) -> Result<VehicleState, SimError> {
    let init = &scenario.vehicle.initial;
    let front = frenet_to_cartesian(line, &FrenetState::new(init.station, init.offset, 0.0, 0.0))?;
    let heading = line.sample(init.station)?.heading + init.heading_offset;
    let rear = front.position - Point2::from_angle(heading) * scenario.vehicle.wheelbase;
    let v = init.speed.unwrap_or(scenario.sim.cruise_speed);
    Ok(VehicleState {
        x: rear.x,
        y: rear.y,
        heading,
        v,
        a: 0.0,
    })
}

/// Frenet state of the front axle, with the slope implied by the heading.
pub fn measured_frenet(line: &ReferenceLine, state: &VehicleState, wheelbase: f64) -> Result<FrenetState, SimError> {
    let f = line.project(state.front(wheelbase), DEFAULT_PROJECTION_HORIZON)?;
    let r = line.sample(f.l)?;
    let d_dot = (state.heading - r.heading).tan() * (1.0 - r.curvature * f.d);
    Ok(FrenetState::new(f.l, f.d, d_dot, 0.0))
}

/// Dense path along `cand`, continued at its end offset for
/// [`TRACKING_TAIL`] metres or to the end of `line`.
pub fn tracking_path(line: &ReferenceLine, cand: &CandidateTrajectory) -> Result<ReferenceLine, SimError> {
    let end = (cand.poly.le + TRACKING_TAIL).min(line.end_station());
    let mut points: Vec<PathPoint> = Vec::new();
    for l in sample_stations(cand.poly.l0, end, TRACKING_STEP) {
        let f = if l <= cand.poly.le {
            cand.poly.state(l)
        } else {
            FrenetState::new(l, cand.end_state.d, 0.0, 0.0)
        };
        let mut p = frenet_to_cartesian(line, &f)?;
        match points.last() {
            Some(prev) => {
                let ds = prev.position.distance(p.position);
                if ds <= 1e-9 {
                    continue;
                }
                p.s = prev.s + ds;
            }
            None => p.s = 0.0,
        }
        points.push(p);
    }
    Ok(ReferenceLine::new(points, TRACKING_STEP)?)
}

/// One planning cycle from the scenario's initial state. When no candidate
/// is feasible the selection is `None` and every candidate is marked checked.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCycle {
    pub line: ReferenceLine,
    pub start: FrenetState,
    pub candidates: Vec<CandidateTrajectory>,
    pub selection: Option<Selection>,
}

pub fn plan_cycle(scenario: &Scenario) -> Result<PlanCycle, SimError> {
    scenario.validate()?;
    let line = build_reference(scenario)?;
    let state = initial_state(scenario, &line)?;
    let start = measured_frenet(&line, &state, scenario.vehicle.wheelbase)?;
    let obstacles = obstacle_set(scenario)?;
    let footprint = scenario.vehicle.footprint()?;
    let mut candidates = generate_candidates(&start, &scenario.planner, &line, None, state.v.max(1.0))?;
    let tail = scenario.planner.extend_to_horizon.then_some(&line);
    let selection = match select_lazy(&mut candidates, &obstacles, &footprint, scenario.planner.horizon, tail) {
        Ok(s) => Some(s),
        Err(PlannerError::NoFeasibleTrajectory { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(PlanCycle {
        line,
        start,
        candidates,
        selection,
    })
}

struct Lead {
    index: usize,
    gap: f64,
    speed: f64,
}

/// Closest obstacle ahead of `station` whose centre lies within the corridor
/// around the planned offset.
fn find_lead(
    scenario: &Scenario,
    line: &ReferenceLine,
    obstacles: &ObstacleSet,
    plan: Option<&CandidateTrajectory>,
    station: f64,
    t: f64,
) -> Option<Lead> {
    let front_overhang = scenario.vehicle.dims().front_overhang();
    let mut best: Option<Lead> = None;
    for (j, (o, spec)) in obstacles.obstacles().iter().zip(&scenario.obstacles).enumerate() {
        let centre = spec.center + o.velocity * t;
        let Ok(f) = line.project(centre, DEFAULT_PROJECTION_HORIZON) else {
            continue;
        };
        if f.l <= station {
            continue;
        }
        let lane = plan.map_or(0.0, |p| p.offset_at(f.l));
        if (f.d - lane).abs() > scenario.sim.corridor_half_width {
            continue;
        }
        let Ok(r) = line.sample(f.l) else {
            continue;
        };
        let gap = f.l - station - 0.5 * spec.length - front_overhang;
        let speed = o.velocity.dot(Point2::from_angle(r.heading));
        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(Lead { index: j, gap, speed });
        }
    }
    best
}

fn clearance(obstacles: &ObstacleSet, footprint: &FootprintCircles, front: Point2, heading: f64, t: f64) -> Result<f64, SimError> {
    let mut c = f64::INFINITY;
    if !obstacles.is_empty() {
        for (centre, r) in footprint.centres(front, heading) {
            c = c.min(obstacles.nearest_distance(centre, t)? - r);
        }
    }
    Ok(c)
}

/// Runs `scenario` to its duration or until the road runs out.
pub fn run(scenario: &Scenario) -> Result<Trace, SimError> {
    scenario.validate()?;
    let cfg = &scenario.sim;
    let wheelbase = scenario.vehicle.wheelbase;
    let line = build_reference(scenario)?;
    let obstacles = obstacle_set(scenario)?;
    let footprint = scenario.vehicle.footprint()?;
    let mut acc_params = scenario.acc.params;
    acc_params.t = cfg.dt;
    let mut ctrl = LqgController::new(acc_params, &scenario.acc.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise: Vec<Option<Normal<f64>>> = scenario
        .acc
        .noise
        .r_meas
        .iter()
        .map(|&var| {
            if cfg.measurement_noise && var > 0.0 {
                Normal::new(0.0, var.sqrt()).ok()
            } else {
                None
            }
        })
        .collect();

    let mut state = initial_state(scenario, &line)?;
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let replan_every = scenario.replan_every();
    let l_needed = scenario.planner.grid.l_min;

    let mut plan: Option<CandidateTrajectory> = None;
    let mut path = line.clone();
    let mut plan_index: i64 = -1;
    let mut emergency = false;
    let mut delta = 0.0;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut replans = Vec::new();
    let mut end = EndReason::Duration;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let front = state.front(wheelbase);
        let here = line.project(front, DEFAULT_PROJECTION_HORIZON).map_err(|_| SimError::OffRoad { t })?;
        let remaining = line.end_station() - here.l;
        if (cfg.planner_enabled && remaining < l_needed) || remaining < wheelbase {
            end = EndReason::RoadEnd;
            break;
        }

        if cfg.planner_enabled && k % replan_every == 0 {
            let measured = measured_frenet(&line, &state, wheelbase)?;
            let start = match &plan {
                Some(p) if measured.l >= p.poly.l0 && measured.l <= p.poly.le && (p.offset_at(measured.l) - measured.d).abs() <= cfg.replan_snap => {
                    p.poly.state(measured.l)
                }
                _ => measured,
            };
            let moved: Vec<Obstacle> = obstacles
                .obstacles()
                .iter()
                .map(|o| Obstacle {
                    points: o.points.iter().map(|p| o.position_at(*p, t)).collect(),
                    velocity: o.velocity,
                })
                .collect();
            let now = ObstacleSet::indexed(moved);
            let mut candidates = generate_candidates(&start, &scenario.planner, &line, plan.as_ref(), state.v.max(1.0))?;
            let tail = scenario.planner.extend_to_horizon.then_some(&line);
            let index = replans.len();
            let mut row = ReplanRow {
                t,
                index,
                start_station: start.l,
                start_offset: start.d,
                candidates: candidates.len(),
                checked: 0,
                status: ReplanStatus::NoFeasible,
                end_offset: f64::NAN,
                end_length: f64::NAN,
                cost: f64::NAN,
                clearance: f64::NAN,
            };
            match select_lazy(&mut candidates, &now, &footprint, scenario.planner.horizon, tail) {
                Ok(sel) => {
                    let chosen = candidates.swap_remove(sel.selected);
                    row.checked = sel.checked;
                    row.status = ReplanStatus::Selected;
                    row.end_offset = chosen.end_state.d;
                    row.end_length = chosen.end_state.l - start.l;
                    row.cost = chosen.cost;
                    row.clearance = sel.clearance;
                    path = tracking_path(&line, &chosen)?;
                    plan = Some(chosen);
                    plan_index = index as i64;
                    emergency = false;
                }
                Err(PlannerError::NoFeasibleTrajectory { checked }) => {
                    row.checked = checked;
                    emergency = true;
                }
                Err(e) => return Err(e.into()),
            }
            replans.push(row);
        }

        let err = compute_errors(state.rear(), state.heading, &path, wheelbase)?;
        if !emergency {
            delta = steer(&err, state.v, &scenario.stanley)?;
        }

        let lead = find_lead(scenario, &line, &obstacles, plan.as_ref(), here.l, t);
        let cruise = AccState::new(0.0, cfg.cruise_speed - state.v, state.a);
        let (target, measured) = match &lead {
            Some(l) => {
                let y = AccState::new(acc_params.tau_h * state.v + acc_params.d0 - l.gap, l.speed - state.v, state.a);
                if ctrl.feedback(&y) < ctrl.feedback(&cruise) {
                    (l.index as i64, y)
                } else {
                    (-1, cruise)
                }
            }
            None => (-1, cruise),
        };
        let mut y = measured.to_vector();
        for (i, n) in noise.iter().enumerate() {
            if let Some(n) = n {
                y[i] += n.sample(&mut rng);
            }
        }
        let mut u = ctrl.command(&AccState::from_vector(&y))?;
        if emergency {
            u = -acc_params.u_max;
            ctrl.override_command(u);
        }

        rows.push(TraceRow {
            t,
            x: state.x,
            y: state.y,
            heading: state.heading,
            v: state.v,
            a: state.a,
            delta,
            u,
            e_fa: err.e_fa,
            theta_e: err.theta_e,
            station: here.l,
            offset: here.d,
            d_error: measured.d_error,
            d_error_est: ctrl.estimate().d_error,
            v_rel: measured.v_rel,
            clearance: clearance(&obstacles, &footprint, front, state.heading, t)?,
            plan: plan_index,
            lead: target,
            emergency,
        });
        if k == steps {
            break;
        }
        state = bicycle_step(&state, delta, u, cfg.dt, wheelbase, acc_params.t_l, acc_params.k_l)?;
    }
    Ok(Trace {
        dt: cfg.dt,
        rows,
        replans,
        end,
    })
}
