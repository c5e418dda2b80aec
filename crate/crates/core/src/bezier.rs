//! Fifth-order Bézier corner smoothing.
//!
//! A corner is three anchors `w1 -> w2 -> w3`. Three control points sit on
//! each leg at fixed distances from `w2`, so the end triples are collinear:
//! the curve leaves and joins each leg tangentially with zero curvature.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::arclength::ArcLengthTable;
use crate::geometry::{numeric_curvature, wrap_angle, GeometryError, PathPoint, Point2, ReferenceLine};

/// Control-point distances from the corner vertex used when a corner does not
/// set its own, metres.
pub const DEFAULT_DISTANCES: [f64; 3] = [3.0, 3.0, 8.0];

/// Largest allowed distance between a corner's end control points and the
/// line being smoothed.
pub const CORNER_SNAP_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BezierError {
    #[error("corner leg is shorter than 1e-6 m")]
    DegenerateLeg,
    #[error("control distance {distance} m does not fit on a {leg} m leg")]
    DistanceExceedsLeg { distance: f64, leg: f64 },
    #[error("control distances must satisfy 0 <= d1 <= d2 <= d3, got {0:?}")]
    UnorderedDistances([f64; 3]),
    #[error("curve parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("corner {corner}: end control point is {distance} m from the line")]
    CornerOffLine { corner: usize, distance: f64 },
    #[error("corner {corner} overlaps the previous corner")]
    OverlappingCorners { corner: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn binomial5(i: usize) -> f64 {
    [1.0, 5.0, 10.0, 10.0, 5.0, 1.0][i]
}

/// Degree-5 Bézier curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticBezier {
    pub control_points: [Point2; 6],
}

impl QuinticBezier {
    pub fn new(control_points: [Point2; 6]) -> Self {
        Self { control_points }
    }

    pub fn eval(&self, t: f64) -> Result<Point2, BezierError> {
        self.derivative(t, 0)
    }

    /// Derivative of order `order` (0..=3) with respect to `t`.
    pub fn derivative(&self, t: f64, order: usize) -> Result<Point2, BezierError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BezierError::ParameterOutOfRange(t));
        }
        Ok(self.derivative_unchecked(t, order))
    }

    fn derivative_unchecked(&self, t: f64, order: usize) -> Point2 {
        if order > 5 {
            return Point2::default();
        }
        // Degree reduction: the k-th derivative is a degree 5-k curve whose
        // points are forward differences scaled by 5!/(5-k)!.
        let mut pts = self.control_points;
        let mut scale = 1.0;
        for k in 0..order {
            let deg = 5 - k;
            for i in 0..deg {
                pts[i] = pts[i + 1] - pts[i];
            }
            scale *= deg as f64;
        }
        let deg = 5 - order;
        let mut acc = Point2::default();
        for (i, p) in pts.iter().enumerate().take(deg + 1) {
            let w = binom(deg, i) * (1.0 - t).powi((deg - i) as i32) * t.powi(i as i32);
            acc = acc + *p * w;
        }
        acc * scale
    }

    /// Signed curvature at `t`.
    pub fn curvature(&self, t: f64) -> Result<f64, BezierError> {
        let d1 = self.derivative(t, 1)?;
        let d2 = self.derivative(t, 2)?;
        let v = d1.norm();
        Ok(if v == 0.0 { 0.0 } else { d1.cross(d2) / (v * v * v) })
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if n == 5 {
        return binomial5(k);
    }
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r
}

/// Three anchors around a sharp corner plus the control-point distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerSpec {
    pub w1: Point2,
    pub w2: Point2,
    pub w3: Point2,
    #[serde(default = "default_distances")]
    pub d: [f64; 3],
}

fn default_distances() -> [f64; 3] {
    DEFAULT_DISTANCES
}

impl CornerSpec {
    pub fn new(w1: Point2, w2: Point2, w3: Point2, d: [f64; 3]) -> Self {
        Self { w1, w2, w3, d }
    }

    pub fn validate(&self) -> Result<(), BezierError> {
        let (m1, m2) = leg_lengths(self)?;
        let [d1, d2, d3] = self.d;
        if !(0.0 <= d1 && d1 <= d2 && d2 <= d3) {
            return Err(BezierError::UnorderedDistances(self.d));
        }
        let leg = m1.min(m2);
        if d3 >= leg {
            return Err(BezierError::DistanceExceedsLeg { distance: d3, leg });
        }
        Ok(())
    }
}

/// Lengths of the incoming and outgoing legs.
pub fn leg_lengths(spec: &CornerSpec) -> Result<(f64, f64), BezierError> {
    let m1 = spec.w1.distance(spec.w2);
    let m2 = spec.w2.distance(spec.w3);
    if !(m1 > 1e-6 && m2 > 1e-6) {
        return Err(BezierError::DegenerateLeg);
    }
    Ok((m1, m2))
}

/// Places `P0, P1, P2` on the incoming leg at `d3, d2, d1` before the vertex
/// and `P3, P4, P5` on the outgoing leg at `d1, d2, d3` after it.
pub fn control_points(spec: &CornerSpec) -> Result<QuinticBezier, BezierError> {
    spec.validate()?;
    let (m1, m2) = leg_lengths(spec)?;
    let [d1, d2, d3] = spec.d;
    let inbound = |d: f64| spec.w1 + (spec.w2 - spec.w1) * ((m1 - d) / m1);
    let outbound = |d: f64| spec.w2 + (spec.w3 - spec.w2) * (d / m2);
    Ok(QuinticBezier::new([
        inbound(d3),
        inbound(d2),
        inbound(d1),
        outbound(d1),
        outbound(d2),
        outbound(d3),
    ]))
}

pub fn eval_bezier(b: &QuinticBezier, t: f64) -> Result<Point2, BezierError> {
    b.eval(t)
}

/// Smoothstep with zero first and second derivatives at both ends.
fn blend(t: f64, order: usize) -> f64 {
    match order {
        0 => t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        1 => 30.0 * t * t * (1.0 - t) * (1.0 - t),
        _ => 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    }
}

struct Splice {
    corner: usize,
    start: usize,
    end: usize,
    curve: QuinticBezier,
}

/// Replaces, for every corner, the stretch of `line` between the corner's
/// first and last control points with the sampled Bézier curve.
///
/// The curve ends are pinned to the nearest line samples. The (sub-5 cm)
/// offset this needs is faded in with a quintic smoothstep, which leaves the
/// end tangents and end curvature untouched.
pub fn smooth_corners(line: &ReferenceLine, corners: &[CornerSpec], sample_step: f64) -> Result<ReferenceLine, BezierError> {
    if corners.is_empty() {
        return Ok(line.clone());
    }
    let mut splices = Vec::with_capacity(corners.len());
    for (k, spec) in corners.iter().enumerate() {
        let curve = control_points(spec)?;
        let [p0, .., p5] = curve.control_points;
        if p0.distance(p5) < 1e-9 {
            continue;
        }
        let f0 = line.project(p0, 100.0)?;
        let f5 = line.project(p5, 100.0)?;
        for f in [f0, f5] {
            if f.d.abs() > CORNER_SNAP_TOLERANCE {
                return Err(BezierError::CornerOffLine {
                    corner: k,
                    distance: f.d.abs(),
                });
            }
        }
        let (start, end) = (line.nearest_index(f0.l), line.nearest_index(f5.l));
        if start >= end {
            return Err(BezierError::CornerOffLine { corner: k, distance: 0.0 });
        }
        splices.push(Splice {
            corner: k,
            start,
            end,
            curve,
        });
    }
    splices.sort_by_key(|s| (s.start, s.corner));
    for w in splices.windows(2) {
        if w[1].start <= w[0].end {
            return Err(BezierError::OverlappingCorners {
                corner: w[1].corner.max(w[0].corner),
            });
        }
    }

    let src = line.points();
    let mut out: Vec<PathPoint> = Vec::with_capacity(src.len());
    let mut cursor = 0;
    for sp in &splices {
        out.extend_from_slice(&src[cursor..sp.start]);
        let e0 = src[sp.start].position - sp.curve.control_points[0];
        let e5 = src[sp.end].position - sp.curve.control_points[5];
        let pos = |t: f64| sp.curve.derivative_unchecked(t, 0) + e0 + (e5 - e0) * blend(t, 0);
        let vel = |t: f64| sp.curve.derivative_unchecked(t, 1) + (e5 - e0) * blend(t, 1);
        let acc = |t: f64| sp.curve.derivative_unchecked(t, 2) + (e5 - e0) * blend(t, 2);
        let table = ArcLengthTable::build(pos, 0.0, 1.0, 1e-7);
        let arc = table.total_length();
        let sections = ((arc / sample_step).round() as usize).max(1);
        for k in 0..=sections {
            let t = match k {
                0 => 0.0,
                _ if k == sections => 1.0,
                _ => table.param_at_refined(arc * k as f64 / sections as f64, |t| vel(t).norm()),
            };
            let (d1, d2) = (vel(t), acc(t));
            let v = d1.norm();
            out.push(PathPoint {
                position: if k == 0 {
                    src[sp.start].position
                } else if k == sections {
                    src[sp.end].position
                } else {
                    pos(t)
                },
                heading: wrap_angle(d1.angle()),
                curvature: d1.cross(d2) / (v * v * v),
                s: 0.0,
            });
        }
        cursor = sp.end + 1;
    }
    out.extend_from_slice(&src[cursor..]);

    let mut s = src[0].s;
    for i in 0..out.len() {
        if i > 0 {
            s += out[i].position.distance(out[i - 1].position);
        }
        out[i].s = s;
    }
    Ok(ReferenceLine::new(out, sample_step)?)
}

/// Largest jumps between consecutive samples of a sampled curve, estimated
/// from positions alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// Tangent direction change between consecutive chords, radians.
    pub max_heading_jump: f64,
    /// Change of the finite-difference second derivative vector d²r/ds², 1/m.
    pub max_second_derivative_jump: f64,
    /// Change of three-point curvature, 1/m.
    pub max_curvature_jump: f64,
    /// Mean sample spacing, metres.
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuityThresholds {
    pub heading: f64,
    pub second_derivative: f64,
    pub curvature: f64,
}

impl Default for ContinuityThresholds {
    fn default() -> Self {
        Self {
            heading: 0.01,
            second_derivative: 0.05,
            curvature: 0.05,
        }
    }
}

impl ContinuityReport {
    pub fn within(&self, th: &ContinuityThresholds) -> bool {
        self.max_heading_jump < th.heading && self.max_second_derivative_jump < th.second_derivative && self.max_curvature_jump < th.curvature
    }
}

pub fn continuity_report(line: &ReferenceLine) -> Result<ContinuityReport, BezierError> {
    continuity_of_points(&line.positions())
}

pub fn continuity_of_points(p: &[Point2]) -> Result<ContinuityReport, BezierError> {
    let n = p.len();
    if n < 3 {
        return Err(BezierError::TooFewPoints { needed: 3, got: n });
    }
    let kappa = numeric_curvature(p)?;
    let chords: Vec<Point2> = p.windows(2).map(|w| w[1] - w[0]).collect();
    let lens: Vec<f64> = chords.iter().map(|c| c.norm()).collect();
    let max_heading_jump = chords
        .windows(2)
        .map(|w| wrap_angle(w[1].angle() - w[0].angle()).abs())
        .fold(0.0, f64::max);
    let second: Vec<Point2> = (1..n - 1)
        .map(|i| {
            let (a, b) = (chords[i - 1] * (1.0 / lens[i - 1]), chords[i] * (1.0 / lens[i]));
            (b - a) * (2.0 / (lens[i - 1] + lens[i]))
        })
        .collect();
    let max_second_derivative_jump = second.windows(2).map(|w| w[1].distance(w[0])).fold(0.0, f64::max);
    let max_curvature_jump = kappa.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    Ok(ContinuityReport {
        max_heading_jump,
        max_second_derivative_jump,
        max_curvature_jump,
        spacing: lens.iter().sum::<f64>() / lens.len() as f64,
    })
}

/// Indices of interior waypoints whose polyline curvature magnitude exceeds
/// `threshold`; candidates for a corner declaration.
pub fn corner_candidates(points: &[Point2], threshold: f64) -> Result<Vec<usize>, BezierError> {
    let k = numeric_curvature(points)?;
    Ok((1..points.len() - 1).filter(|&i| k[i].abs() > threshold).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn de_casteljau(pts: &[Point2], t: f64) -> Point2 {
        let mut v = pts.to_vec();
        while v.len() > 1 {
            v = v.windows(2).map(|w| w[0].lerp(w[1], t)).collect();
        }
        v[0]
    }

    fn right_angle() -> CornerSpec {
        CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0), DEFAULT_DISTANCES)
    }

    #[test]
    fn leg_lengths_of_3_4_5() {
        let spec = CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0), Point2::new(3.0, 9.0), [0.0; 3]);
        assert_eq!(leg_lengths(&spec).unwrap(), (5.0, 5.0));
        let bad = CornerSpec::new(Point2::new(1.0, 1.0), Point2::new(1.0, 1.0), Point2::new(3.0, 9.0), [0.0; 3]);
        assert_eq!(leg_lengths(&bad), Err(BezierError::DegenerateLeg));
    }

    #[test]
    fn right_angle_control_points() {
        let b = control_points(&right_angle()).unwrap();
        let expected = [(2.0, 0.0), (7.0, 0.0), (7.0, 0.0), (10.0, 3.0), (10.0, 3.0), (10.0, 8.0)];
        for (p, (x, y)) in b.control_points.iter().zip(expected) {
            assert!(p.distance(Point2::new(x, y)) < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn zero_distances_collapse_to_vertex() {
        let mut spec = right_angle();
        spec.d = [0.0; 3];
        let b = control_points(&spec).unwrap();
        assert!(b.control_points.iter().all(|p| *p == spec.w2));
    }

    #[test]
    fn distance_validation() {
        let mut spec = right_angle();
        spec.d = [3.0, 3.0, 10.0];
        assert!(matches!(control_points(&spec), Err(BezierError::DistanceExceedsLeg { .. })));
        spec.d = [4.0, 3.0, 8.0];
        assert!(matches!(control_points(&spec), Err(BezierError::UnorderedDistances(_))));
    }

    #[test]
    fn collinear_corner_is_straight() {
        let spec = CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), Point2::new(20.0, 20.0), DEFAULT_DISTANCES);
        let b = control_points(&spec).unwrap();
        for k in 0..=20 {
            let p = b.eval(k as f64 / 20.0).unwrap();
            assert!((p.x - p.y).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_and_de_casteljau() {
        let b = QuinticBezier::new([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 2.0),
            Point2::new(3.0, 3.0),
            Point2::new(4.0, -1.0),
            Point2::new(6.0, 0.5),
            Point2::new(7.0, 2.0),
        ]);
        assert_eq!(b.eval(0.0).unwrap(), b.control_points[0]);
        assert_eq!(b.eval(1.0).unwrap(), b.control_points[5]);
        for t in [0.1, 0.5, 0.77] {
            assert!(b.eval(t).unwrap().distance(de_casteljau(&b.control_points, t)) < 1e-12);
        }
        assert!(matches!(b.eval(1.5), Err(BezierError::ParameterOutOfRange(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = control_points(&right_angle()).unwrap();
        let h = 1e-5;
        for t in [0.2, 0.5, 0.8] {
            for order in 1..=3 {
                let fd = (b.derivative(t + h, order - 1).unwrap() - b.derivative(t - h, order - 1).unwrap()) * (0.5 / h);
                let an = b.derivative(t, order).unwrap();
                assert!(fd.distance(an) < 1e-4 * (1.0 + an.norm()), "t={t} order={order}");
            }
        }
    }

    #[test]
    fn constant_curve_has_zero_derivatives() {
        let b = QuinticBezier::new([Point2::new(2.0, 3.0); 6]);
        for order in 1..=3 {
            assert_eq!(b.derivative(0.4, order).unwrap(), Point2::default());
        }
    }

    #[test]
    fn end_curvature_vanishes() {
        let b = control_points(&right_angle()).unwrap();
        assert!(b.curvature(0.0).unwrap().abs() < 1e-9);
        assert!(b.curvature(1.0).unwrap().abs() < 1e-9);
        let t0 = b.derivative(0.0, 1).unwrap();
        let t1 = b.derivative(1.0, 1).unwrap();
        assert!(t0.cross(Point2::new(1.0, 0.0)).abs() < 1e-9 * t0.norm());
        assert!(t1.cross(Point2::new(0.0, 1.0)).abs() < 1e-9 * t1.norm());
    }

    #[test]
    fn empty_corner_list_is_identity() {
        let pts: Vec<Point2> = (0..50).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
        assert_eq!(smooth_corners(&line, &[], 0.1).unwrap(), line);
    }

    #[test]
    fn collinear_splice_stays_on_line() {
        let pts: Vec<Point2> = (0..=300).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
        let spec = CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(15.0, 0.0), Point2::new(30.0, 0.0), DEFAULT_DISTANCES);
        let out = smooth_corners(&line, &[spec], 0.1).unwrap();
        assert!(out.points().iter().all(|p| p.position.y.abs() < 1e-6));
        assert!((out.end_station() - 30.0).abs() < 1e-6);
    }

    #[test]
    fn corner_off_line_is_rejected() {
        let pts: Vec<Point2> = (0..=300).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
        let spec = right_angle();
        assert!(matches!(
            smooth_corners(&line, &[spec], 0.1),
            Err(BezierError::CornerOffLine { corner: 0, .. })
        ));
    }

    #[test]
    fn overlapping_corners_are_rejected() {
        let pts: Vec<Point2> = (0..=300).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
        let a = CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(12.0, 0.0), Point2::new(30.0, 0.0), DEFAULT_DISTANCES);
        let b = CornerSpec::new(Point2::new(0.0, 0.0), Point2::new(16.0, 0.0), Point2::new(30.0, 0.0), DEFAULT_DISTANCES);
        assert!(matches!(
            smooth_corners(&line, &[a, b], 0.1),
            Err(BezierError::OverlappingCorners { corner: 1 })
        ));
    }

    #[test]
    fn report_on_straight_and_polyline() {
        let pts: Vec<Point2> = (0..100).map(|i| Point2::new(i as f64 * 0.01, 0.0)).collect();
        let r = continuity_of_points(&pts).unwrap();
        assert_eq!((r.max_heading_jump, r.max_second_derivative_jump, r.max_curvature_jump), (0.0, 0.0, 0.0));

        let mut corner: Vec<Point2> = (0..=1000).map(|i| Point2::new(i as f64 * 0.01, 0.0)).collect();
        corner.extend((1..=1000).map(|i| Point2::new(10.0, i as f64 * 0.01)));
        let r = continuity_of_points(&corner).unwrap();
        assert!(r.max_heading_jump > 1.5 && r.max_curvature_jump > 100.0);
        assert!(!r.within(&ContinuityThresholds::default()));
        assert!(matches!(continuity_of_points(&pts[..2]), Err(BezierError::TooFewPoints { .. })));
    }

    #[test]
    fn candidates_flag_sharp_vertex() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(5.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 5.0),
            Point2::new(10.0, 10.0),
        ];
        assert_eq!(corner_candidates(&pts, 0.2).unwrap(), vec![2]);
    }
}
