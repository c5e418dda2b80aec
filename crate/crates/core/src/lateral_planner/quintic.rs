//! Quintic lateral profiles `d(l)` between two Frenet boundary states.

use crate::geometry::FrenetState;

use super::PlannerError;

/// Shortest span a quintic may cover, metres.
pub const MIN_SPAN: f64 = 1e-6;

/// `d(l) = sum alpha[k] * (l - l0)^k` on `[l0, le]`.
///
/// Coefficients are in the local coordinate `u = l - l0`, so `alpha[0..3]`
/// are the start value, slope and half the start curvature of the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticPolynomial {
    pub alpha: [f64; 6],
    pub l0: f64,
    pub le: f64,
}

impl QuinticPolynomial {
    pub fn span(&self) -> f64 {
        self.le - self.l0
    }

    /// Value (`order` 0) or derivative of order 1..=5 with respect to `l`.
    /// Stations outside `[l0, le]` extrapolate the polynomial.
    pub fn eval(&self, l: f64, order: usize) -> f64 {
        let u = l - self.l0;
        let a = &self.alpha;
        match order {
            0 => a[0] + u * (a[1] + u * (a[2] + u * (a[3] + u * (a[4] + u * a[5])))),
            1 => a[1] + u * (2.0 * a[2] + u * (3.0 * a[3] + u * (4.0 * a[4] + u * 5.0 * a[5]))),
            2 => 2.0 * a[2] + u * (6.0 * a[3] + u * (12.0 * a[4] + u * 20.0 * a[5])),
            3 => 6.0 * a[3] + u * (24.0 * a[4] + u * 60.0 * a[5]),
            4 => 24.0 * a[4] + u * 120.0 * a[5],
            5 => 120.0 * a[5],
            _ => 0.0,
        }
    }

    /// Frenet state of the profile at station `l`.
    pub fn state(&self, l: f64) -> FrenetState {
        FrenetState::new(l, self.eval(l, 0), self.eval(l, 1), self.eval(l, 2))
    }
}

/// Quintic matching position, slope and curvature of `c0` and `ce`.
pub fn solve_quintic(c0: &FrenetState, ce: &FrenetState) -> Result<QuinticPolynomial, PlannerError> {
    if !(c0.is_finite() && ce.is_finite()) {
        return Err(PlannerError::NonFinite);
    }
    let span = ce.l - c0.l;
    if span <= MIN_SPAN {
        return Err(PlannerError::ZeroLength { span });
    }
    let a0 = c0.d;
    let a1 = c0.d_dot;
    let a2 = 0.5 * c0.d_ddot;
    // What the quadratic part leaves unmatched at the far end.
    let r0 = ce.d - (a0 + a1 * span + a2 * span * span);
    let r1 = ce.d_dot - (a1 + 2.0 * a2 * span);
    let r2 = ce.d_ddot - 2.0 * a2;
    let (l1, l2) = (span, span * span);
    let l3 = l2 * span;
    let a3 = (20.0 * r0 - 8.0 * r1 * l1 + r2 * l2) / (2.0 * l3);
    let a4 = (-30.0 * r0 + 14.0 * r1 * l1 - 2.0 * r2 * l2) / (2.0 * l3 * l1);
    let a5 = (12.0 * r0 - 6.0 * r1 * l1 + r2 * l2) / (2.0 * l3 * l2);
    Ok(QuinticPolynomial {
        alpha: [a0, a1, a2, a3, a4, a5],
        l0: c0.l,
        le: ce.l,
    })
}
