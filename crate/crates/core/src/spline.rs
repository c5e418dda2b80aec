//! Natural cubic splines through raw centreline waypoints, and uniform
//! arc-length resampling of the result.
//!
//! Each coordinate is splined separately against a chord-length parameter,
//! so vertical or looping roads are handled the same as monotone ones.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::arclength::{ArcLengthTable, DEFAULT_TOLERANCE};
use crate::geometry::{wrap_angle, PathPoint, Point2, ReferenceLine};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("need at least {needed} waypoints, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("waypoints {index} and {} are closer than 1e-9 m", index + 1)]
    DuplicateWaypoint { index: usize },
    #[error("non-finite waypoint at index {index}")]
    NonFinite { index: usize },
    #[error("parameter {t} outside [{start}, {end}]")]
    ParameterOutOfRange { t: f64, start: f64, end: f64 },
    #[error("resampling step {step} m must be positive and shorter than the curve ({length} m)")]
    StepTooLarge { step: f64, length: f64 },
}

/// One cubic piece `a + b*u + c*u^2 + d*u^3` with `u = t - t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSegment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t0: f64,
    pub t1: f64,
}

impl CubicSegment {
    /// Value (`order` 0) or derivative (`order` 1..=3) at `t`.
    pub fn eval(&self, t: f64, order: u8) -> f64 {
        let u = t - self.t0;
        match order {
            0 => self.a + u * (self.b + u * (self.c + u * self.d)),
            1 => self.b + u * (2.0 * self.c + 3.0 * u * self.d),
            2 => 2.0 * self.c + 6.0 * u * self.d,
            3 => 6.0 * self.d,
            _ => 0.0,
        }
    }

    /// Second derivative at the segment start, the `m_i` of the tridiagonal
    /// system.
    pub fn moment(&self) -> f64 {
        2.0 * self.c
    }
}

/// Natural cubic spline of `values` over strictly increasing `knots`.
pub fn natural_cubic(knots: &[f64], values: &[f64]) -> Vec<CubicSegment> {
    let n = knots.len() - 1;
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let mut m = alloc::vec![0.0; n + 1];
    if n >= 2 {
        // Thomas algorithm on the interior moments m_1..m_{n-1}; m_0 = m_n = 0.
        let k = n - 1;
        let mut diag = Vec::with_capacity(k);
        let mut rhs = Vec::with_capacity(k);
        for i in 1..n {
            diag.push(2.0 * (h[i - 1] + h[i]));
            rhs.push(6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]));
        }
        for j in 1..k {
            // sub-diagonal of row j is h[j], super-diagonal of row j-1 is h[j]
            let w = h[j] / diag[j - 1];
            diag[j] -= w * h[j];
            rhs[j] -= w * rhs[j - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[j + 1] = (rhs[j] - h[j + 1] * m[j + 2]) / diag[j];
        }
    }
    (0..n)
        .map(|i| {
            let (c, c_next) = (m[i] / 2.0, m[i + 1] / 2.0);
            let a = values[i];
            CubicSegment {
                a,
                b: (values[i + 1] - a) / h[i] - h[i] / 3.0 * (c_next + 2.0 * c),
                c,
                d: (c_next - c) / (3.0 * h[i]),
                t0: knots[i],
                t1: knots[i + 1],
            }
        })
        .collect()
}

/// Planar curve `(x(t), y(t))` made of natural cubic splines sharing
/// chord-length knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSpline {
    x_segments: Vec<CubicSegment>,
    y_segments: Vec<CubicSegment>,
    knots: Vec<f64>,
}

impl ParametricSpline {
    /// Fits the spline through every waypoint.
    pub fn fit(waypoints: &[Point2]) -> Result<Self, SplineError> {
        if waypoints.len() < 3 {
            return Err(SplineError::TooFewPoints {
                needed: 3,
                got: waypoints.len(),
            });
        }
        if let Some(i) = waypoints.iter().position(|p| !p.is_finite()) {
            return Err(SplineError::NonFinite { index: i });
        }
        let mut knots = Vec::with_capacity(waypoints.len());
        knots.push(0.0);
        for (i, w) in waypoints.windows(2).enumerate() {
            let chord = w[0].distance(w[1]);
            if chord <= 1e-9 {
                return Err(SplineError::DuplicateWaypoint { index: i });
            }
            knots.push(knots[i] + chord);
        }
        let xs: Vec<f64> = waypoints.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = waypoints.iter().map(|p| p.y).collect();
        Ok(Self {
            x_segments: natural_cubic(&knots, &xs),
            y_segments: natural_cubic(&knots, &ys),
            knots,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn x_segments(&self) -> &[CubicSegment] {
        &self.x_segments
    }

    pub fn y_segments(&self) -> &[CubicSegment] {
        &self.y_segments
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    fn segment_index(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= t);
        i.saturating_sub(1).min(self.x_segments.len() - 1)
    }

    fn check(&self, t: f64) -> Result<(), SplineError> {
        if t >= self.start() && t <= self.end() {
            Ok(())
        } else {
            Err(SplineError::ParameterOutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            })
        }
    }

    /// Position at `t`.
    pub fn eval(&self, t: f64) -> Result<Point2, SplineError> {
        self.derivative(t, 0)
    }

    /// Derivative of order `order` (0 = position) at `t`.
    pub fn derivative(&self, t: f64, order: u8) -> Result<Point2, SplineError> {
        self.check(t)?;
        Ok(self.derivative_unchecked(t, order))
    }

    fn derivative_unchecked(&self, t: f64, order: u8) -> Point2 {
        let i = self.segment_index(t);
        Point2::new(self.x_segments[i].eval(t, order), self.y_segments[i].eval(t, order))
    }

    /// Evaluates through the segment ending at knot `i` (left limit) rather
    /// than the one starting there.
    pub fn left_derivative_at_knot(&self, i: usize, order: u8) -> Point2 {
        let seg = i.max(1) - 1;
        let t = self.knots[i];
        Point2::new(self.x_segments[seg].eval(t, order), self.y_segments[seg].eval(t, order))
    }

    pub fn arc_length_table(&self) -> ArcLengthTable {
        ArcLengthTable::build_piecewise(|t| self.derivative_unchecked(t, 0), &self.knots, DEFAULT_TOLERANCE)
    }

    pub fn length(&self) -> f64 {
        self.arc_length_table().total_length()
    }

    /// Samples the spline every `step` metres of arc length, starting at the
    /// first waypoint. A trailing remainder shorter than `step` is dropped.
    pub fn resample_uniform(&self, step: f64) -> Result<ReferenceLine, SplineError> {
        let table = self.arc_length_table();
        let length = table.total_length();
        if !(step > 0.0 && step < length) {
            return Err(SplineError::StepTooLarge { step, length });
        }
        let count = ((length / step) * (1.0 + 1e-12)).floor() as usize;
        let speed = |t: f64| self.derivative_unchecked(t, 1).norm();
        let points = (0..=count)
            .map(|k| {
                let s = k as f64 * step;
                let t = table.param_at_refined(s, speed);
                let p = self.derivative_unchecked(t, 0);
                let d1 = self.derivative_unchecked(t, 1);
                let d2 = self.derivative_unchecked(t, 2);
                let v = d1.norm();
                PathPoint {
                    position: p,
                    heading: wrap_angle(d1.angle()),
                    curvature: d1.cross(d2) / (v * v * v),
                    s,
                }
            })
            .collect();
        ReferenceLine::new(points, step).map_err(|_| SplineError::StepTooLarge { step, length })
    }
}

/// Fits a parametric natural cubic spline through `waypoints`.
pub fn fit_spline(waypoints: &[Point2]) -> Result<ParametricSpline, SplineError> {
    ParametricSpline::fit(waypoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    /// Dense Gaussian elimination with partial pivoting, for cross-checking the
    /// tridiagonal solve.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = alloc::vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn straight_data_has_no_curvature_terms() {
        let pts: Vec<Point2> = (0..4).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        let sp = fit_spline(&pts).unwrap();
        let b0 = sp.y_segments()[0].b;
        for seg in sp.y_segments() {
            assert!(seg.c.abs() < 1e-9 && seg.d.abs() < 1e-9);
            assert!((seg.b - b0).abs() < 1e-9);
        }
    }

    #[test]
    fn three_point_moment_matches_direct_solve() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 0.0)];
        let sp = fit_spline(&pts).unwrap();
        let h = core::f64::consts::SQRT_2;
        // 1x1 system: 2(h0+h1) m1 = 6((y2-y1)/h1 - (y1-y0)/h0)
        let m1_y = gauss_solve(alloc::vec![alloc::vec![4.0 * h]], alloc::vec![6.0 * (-1.0 / h - 1.0 / h)])[0];
        assert!((sp.y_segments()[1].moment() - m1_y).abs() < 1e-12);
        assert!(sp.x_segments()[1].moment().abs() < 1e-12);
        for (i, p) in pts.iter().enumerate() {
            assert!(sp.eval(sp.knots()[i]).unwrap().distance(*p) < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_matches_dense_solve() {
        let pts: Vec<Point2> = [(0.0, 0.0), (1.0, 0.3), (2.5, -0.4), (3.0, 1.0), (4.2, 2.0), (6.0, 1.5)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let sp = fit_spline(&pts).unwrap();
        let t = sp.knots();
        let n = pts.len() - 1;
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = alloc::vec![alloc::vec![0.0; n - 1]; n - 1];
        let mut b = alloc::vec![0.0; n - 1];
        for i in 1..n {
            let r = i - 1;
            if r > 0 {
                a[r][r - 1] = h[i - 1];
            }
            a[r][r] = 2.0 * (h[i - 1] + h[i]);
            if r + 1 < n - 1 {
                a[r][r + 1] = h[i];
            }
            b[r] = 6.0 * ((pts[i + 1].y - pts[i].y) / h[i] - (pts[i].y - pts[i - 1].y) / h[i - 1]);
        }
        let m = gauss_solve(a, b);
        for i in 1..n {
            assert!((sp.y_segments()[i].moment() - m[i - 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_interpolation_error() {
        // x-monotone data: use a scalar spline in x directly via the parametric
        // fit and compare against sin at segment midpoints.
        let pts: Vec<Point2> = (0..=16)
            .map(|i| {
                let x = i as f64 * PI / 8.0;
                Point2::new(x, x.sin())
            })
            .collect();
        let knots: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let segs = natural_cubic(&knots, &ys);
        let max_err = segs
            .iter()
            .map(|s| {
                let xm = 0.5 * (s.t0 + s.t1);
                (s.eval(xm, 0) - xm.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_err < 1e-3, "{max_err}");
    }

    #[test]
    fn continuity_and_natural_ends() {
        let pts: Vec<Point2> = (0..30)
            .map(|i| {
                let a = i as f64 * 0.3;
                Point2::new(a * 3.0 + a.cos(), 5.0 * a.sin())
            })
            .collect();
        let sp = fit_spline(&pts).unwrap();
        for i in 1..pts.len() - 1 {
            for order in 0..=2 {
                let left = sp.left_derivative_at_knot(i, order);
                let right = sp.derivative(sp.knots()[i], order).unwrap();
                let scale = 1.0 + left.norm();
                assert!(left.distance(right) < 1e-9 * scale, "knot {i} order {order}");
            }
        }
        assert!(sp.derivative(sp.start(), 2).unwrap().norm() < 1e-9);
        let last = pts.len() - 1;
        assert!(sp.left_derivative_at_knot(last, 2).norm() < 1e-9);
    }

    #[test]
    fn eval_out_of_range() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 0.0)];
        let sp = fit_spline(&pts).unwrap();
        assert!(matches!(sp.eval(-0.1), Err(SplineError::ParameterOutOfRange { .. })));
        assert_eq!(sp.eval(0.0).unwrap(), pts[0]);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_spline(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]),
            Err(SplineError::TooFewPoints { needed: 3, got: 2 })
        );
        let dup = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 0.0)];
        assert_eq!(fit_spline(&dup), Err(SplineError::DuplicateWaypoint { index: 1 }));
    }

    #[test]
    fn straight_resample() {
        let pts: Vec<Point2> = (0..=5).map(|i| Point2::new(2.0 * i as f64, 0.0)).collect();
        let line = fit_spline(&pts).unwrap().resample_uniform(1.0).unwrap();
        assert_eq!(line.len(), 11);
        for (i, p) in line.points().iter().enumerate() {
            assert!((p.position.x - i as f64).abs() < 1e-9 && p.position.y.abs() < 1e-9);
            assert!(p.curvature.abs() < 1e-9);
        }
        assert!(matches!(
            fit_spline(&pts).unwrap().resample_uniform(10.5),
            Err(SplineError::StepTooLarge { .. })
        ));
        assert!(matches!(
            fit_spline(&pts).unwrap().resample_uniform(0.0),
            Err(SplineError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn arc_resample_gaps_by_fine_chord_oracle() {
        let pts: Vec<Point2> = (0..=12)
            .map(|i| {
                let phi = i as f64 * PI / 16.0;
                Point2::new(20.0 * phi.cos(), 20.0 * phi.sin())
            })
            .collect();
        let sp = fit_spline(&pts).unwrap();
        let line = sp.resample_uniform(0.1).unwrap();
        // Oracle: brute-force chord sums at 1e-4 parameter resolution,
        // independent of the adaptive table.
        let n = ((sp.end() - sp.start()) / 1e-4) as usize;
        let mut cum = alloc::vec![0.0];
        let mut prev = sp.eval(sp.start()).unwrap();
        for k in 1..=n {
            let t = (sp.start() + k as f64 * 1e-4).min(sp.end());
            let p = sp.eval(t).unwrap();
            cum.push(cum[k - 1] + p.distance(prev));
            prev = p;
        }
        let station = |p: Point2| {
            // nearest fine sample
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=n {
                let t = (sp.start() + k as f64 * 1e-4).min(sp.end());
                let d = sp.eval(t).unwrap().distance(p);
                if d < best.0 {
                    best = (d, cum[k]);
                }
            }
            best.1
        };
        let stations: Vec<f64> = line.points().iter().step_by(25).map(|p| station(p.position)).collect();
        for w in stations.windows(2) {
            let gap = (w[1] - w[0]) / 25.0;
            assert!((0.099..=0.101).contains(&gap), "{gap}");
        }
        for w in line.points().windows(2) {
            let chord = w[0].position.distance(w[1].position);
            assert!((0.099..=0.101).contains(&chord));
        }
    }
}
