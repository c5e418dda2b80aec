//! Adaptive cruise control: gap/velocity/acceleration model, zero-order-hold
//! discretisation, discrete LQR gain and a Kalman state estimate.
//!
//! State `x = [d_error, v_rel, a_f]` with `d_error = d_desire - d` and
//! `v_rel = v_p - v_f`; the input is the desired acceleration.

use nalgebra::{DMatrix, Matrix3, RowVector3, SMatrix, Vector3};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;

/// Fixed-point tolerance of the Riccati iteration, relative to `max(1, |P|)`.
pub const RICCATI_TOLERANCE: f64 = 1e-12;
pub const RICCATI_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AccError {
    #[error("invalid ACC parameter: {0}")]
    InvalidParams(&'static str),
    #[error("speed must be non-negative, got {speed}")]
    NegativeSpeed { speed: f64 },
    #[error("model is not observable (rank {rank})")]
    Unobservable { rank: usize },
    #[error("Riccati iteration did not settle after {iterations} iterations")]
    RiccatiDivergence { iterations: usize },
    #[error("(A, B) cannot be stabilised")]
    UnstabilizablePair,
    #[error("innovation covariance is singular")]
    SingularInnovationCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccParams {
    /// Headway time, s.
    pub tau_h: f64,
    /// Standstill distance, m.
    pub d0: f64,
    /// Acceleration lag time constant, s.
    pub t_l: f64,
    /// Acceleration lag gain.
    pub k_l: f64,
    /// Sampling time, s.
    pub t: f64,
    /// State weights `(rho1, rho2, rho3)`.
    pub rho: [f64; 3],
    /// Input weight.
    pub r: f64,
    /// Command saturation, m/s^2.
    pub u_max: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            tau_h: 1.5,
            d0: 5.0,
            t_l: 0.5,
            k_l: 1.0,
            t: 0.05,
            rho: [1.0, 1.0, 0.5],
            r: 1.0,
            u_max: 0.25 * GRAVITY,
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<(), AccError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.tau_h) {
            return Err(AccError::InvalidParams("tau_h must be positive"));
        }
        if !(self.d0.is_finite() && self.d0 >= 0.0) {
            return Err(AccError::InvalidParams("d0 must be non-negative"));
        }
        if !(pos(self.t_l) && pos(self.k_l) && pos(self.t)) {
            return Err(AccError::InvalidParams("t_l, k_l and t must be positive"));
        }
        if self.rho.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || self.rho.iter().all(|x| *x == 0.0) {
            return Err(AccError::InvalidParams("rho must be non-negative with one entry positive"));
        }
        if !(pos(self.r) && pos(self.u_max)) {
            return Err(AccError::InvalidParams("r and u_max must be positive"));
        }
        Ok(())
    }
}

/// Diagonals of the Kalman process and measurement covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccNoise {
    pub q_proc: [f64; 3],
    pub r_meas: [f64; 3],
}

impl Default for AccNoise {
    fn default() -> Self {
        Self {
            q_proc: [1e-3; 3],
            r_meas: [0.25, 0.04, 0.01],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccState {
    pub d_error: f64,
    pub v_rel: f64,
    pub a_f: f64,
}

impl AccState {
    pub const fn new(d_error: f64, v_rel: f64, a_f: f64) -> Self {
        Self { d_error, v_rel, a_f }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.d_error, self.v_rel, self.a_f)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

pub fn desired_distance(v_f: f64, params: &AccParams) -> Result<f64, AccError> {
    if !(v_f >= 0.0) {
        return Err(AccError::NegativeSpeed { speed: v_f });
    }
    Ok(params.tau_h * v_f + params.d0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccModel {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub gamma: Vector3<f64>,
    pub c: Matrix3<f64>,
    pub ad: Matrix3<f64>,
    pub bd: Vector3<f64>,
    pub gamma_d: Vector3<f64>,
}

/// `exp(m)` by scaling and squaring with a Taylor series.
pub fn expm<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let norm = m.abs().row_sum().max();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = m * scale;
    let mut term = SMatrix::<f64, N, N>::identity();
    let mut sum = term;
    for k in 1..40 {
        term = term * x / k as f64;
        sum += term;
        if term.abs().max() < 1e-18 * sum.abs().max() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Rank of the observability matrix `[C; C Ad; C Ad^2]`.
pub fn observability_rank(ad: &Matrix3<f64>, c: &Matrix3<f64>) -> usize {
    let mut o = SMatrix::<f64, 9, 3>::zeros();
    let mut block = *c;
    for k in 0..3 {
        o.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&block);
        block *= ad;
    }
    o.rank(1e-9)
}

pub fn build_model(params: &AccParams) -> Result<AccModel, AccError> {
    params.validate()?;
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, -1.0, params.tau_h,
        0.0, 0.0, -1.0,
        0.0, 0.0, -1.0 / params.t_l,
    );
    let b = Vector3::new(0.0, 0.0, params.k_l / params.t_l);
    let gamma = Vector3::new(0.0, 1.0, 0.0);
    // exp([[A, B, G], [0, 0, 0]] T) = [[Ad, Bd, Gd], [0, I, 0]...].
    let mut aug = SMatrix::<f64, 5, 5>::zeros();
    aug.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
    aug.fixed_view_mut::<3, 1>(0, 3).copy_from(&b);
    aug.fixed_view_mut::<3, 1>(0, 4).copy_from(&gamma);
    let e = expm(&(aug * params.t));
    let ad: Matrix3<f64> = e.fixed_view::<3, 3>(0, 0).into();
    let bd: Vector3<f64> = e.fixed_view::<3, 1>(0, 3).into();
    let gamma_d: Vector3<f64> = e.fixed_view::<3, 1>(0, 4).into();
    let c = Matrix3::identity();
    let rank = observability_rank(&ad, &c);
    if rank < 3 {
        return Err(AccError::Unobservable { rank });
    }
    Ok(AccModel {
        a,
        b,
        gamma,
        c,
        ad,
        bd,
        gamma_d,
    })
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let dynamic = DMatrix::from_column_slice(N, N, m.as_slice());
    dynamic.complex_eigenvalues().iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max)
}

/// Stabilising solution `P` of the discrete algebraic Riccati equation and
/// the gain `K = (R + B'PB)^-1 B'PA`, by iterating the Riccati recursion
/// from `P = Q`.
pub fn solve_dare<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<(SMatrix<f64, N, N>, SMatrix<f64, M, N>), AccError> {
    let mut p = *q;
    for _ in 0..RICCATI_MAX_ITERATIONS {
        let bt_p = b.transpose() * p;
        let s = r + bt_p * b;
        let s_inv = s.try_inverse().ok_or(AccError::UnstabilizablePair)?;
        let next = q + a.transpose() * p * a - a.transpose() * p * b * s_inv * bt_p * a;
        let next = (next + next.transpose()) * 0.5;
        if !next.iter().all(|x| x.is_finite()) || next.abs().max() > 1e300 {
            return Err(AccError::UnstabilizablePair);
        }
        let diff = (next - p).abs().max();
        p = next;
        if diff < RICCATI_TOLERANCE * p.abs().max().max(1.0) {
            let s = r + b.transpose() * p * b;
            let k = s.try_inverse().ok_or(AccError::UnstabilizablePair)? * b.transpose() * p * a;
            if spectral_radius(&(a - b * k)) >= 1.0 {
                return Err(AccError::UnstabilizablePair);
            }
            return Ok((p, k));
        }
    }
    Err(AccError::RiccatiDivergence {
        iterations: RICCATI_MAX_ITERATIONS,
    })
}

/// LQR gain for `model` with `Q = diag(rho)` and `R = [r]`.
pub fn solve_lqr(model: &AccModel, params: &AccParams) -> Result<RowVector3<f64>, AccError> {
    let q = Matrix3::from_diagonal(&Vector3::from(params.rho));
    let r = SMatrix::<f64, 1, 1>::new(params.r);
    let (_, k) = solve_dare(&model.ad, &model.bd, &q, &r)?;
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter {
    pub estimate: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub q_proc: Matrix3<f64>,
    pub r_meas: Matrix3<f64>,
}

impl KalmanFilter {
    pub fn new(estimate: Vector3<f64>, covariance: Matrix3<f64>, noise: &AccNoise) -> Self {
        Self {
            estimate,
            covariance,
            q_proc: Matrix3::from_diagonal(&Vector3::from(noise.q_proc)),
            r_meas: Matrix3::from_diagonal(&Vector3::from(noise.r_meas)),
        }
    }

    pub fn predict(&mut self, model: &AccModel, u: f64) {
        self.estimate = model.ad * self.estimate + model.bd * u;
        let p = model.ad * self.covariance * model.ad.transpose() + self.q_proc;
        self.covariance = (p + p.transpose()) * 0.5;
    }

    /// Measurement update with `C = I`, Joseph form.
    pub fn update(&mut self, y: &Vector3<f64>) -> Result<(), AccError> {
        let s = self.covariance + self.r_meas;
        let s_inv = s.try_inverse().ok_or(AccError::SingularInnovationCovariance)?;
        let k = self.covariance * s_inv;
        self.estimate += k * (y - self.estimate);
        let i_k = Matrix3::identity() - k;
        let p = i_k * self.covariance * i_k.transpose() + k * self.r_meas * k.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
        Ok(())
    }
}

/// Predict with input `u`, then update with `measurement`.
pub fn kalman_step(filter: &mut KalmanFilter, model: &AccModel, u: f64, measurement: &AccState) -> Result<(), AccError> {
    filter.predict(model, u);
    filter.update(&measurement.to_vector())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqgController {
    pub model: AccModel,
    pub gain: RowVector3<f64>,
    pub filter: KalmanFilter,
    pub params: AccParams,
    last_u: f64,
    initialized: bool,
}

impl LqgController {
    pub fn new(params: AccParams, noise: &AccNoise) -> Result<Self, AccError> {
        if noise.q_proc.iter().chain(noise.r_meas.iter()).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(AccError::InvalidParams("noise variances must be non-negative"));
        }
        let model = build_model(&params)?;
        let gain = solve_lqr(&model, &params)?;
        let filter = KalmanFilter::new(Vector3::zeros(), Matrix3::from_diagonal(&Vector3::from(noise.r_meas)), noise);
        Ok(Self {
            model,
            gain,
            filter,
            params,
            last_u: 0.0,
            initialized: false,
        })
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn estimate(&self) -> AccState {
        AccState::from_vector(&self.filter.estimate)
    }

    pub fn last_command(&self) -> f64 {
        self.last_u
    }

    /// Saturated `-K x` for a given state, without touching the filter.
    pub fn feedback(&self, x: &AccState) -> f64 {
        (-(self.gain * x.to_vector())[0]).clamp(-self.params.u_max, self.params.u_max)
    }

    /// One control tick. The first call seeds the estimate with the
    /// measurement; later calls predict with the previously applied command
    /// and then update.
    pub fn command(&mut self, measured: &AccState) -> Result<f64, AccError> {
        if self.initialized {
            kalman_step(&mut self.filter, &self.model, self.last_u, measured)?;
        } else {
            self.filter.estimate = measured.to_vector();
            self.initialized = true;
        }
        let u = self.feedback(&self.estimate());
        self.last_u = u;
        Ok(u)
    }

    /// Records a command that was applied instead of this controller's own
    /// (an emergency stop), so the next predict uses it.
    pub fn override_command(&mut self, u: f64) {
        self.last_u = u;
    }
}

pub fn acc_command(ctrl: &mut LqgController, measured: &AccState) -> Result<f64, AccError> {
    ctrl.command(measured)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desired_distance_examples() {
        let p = AccParams::default();
        assert_eq!(desired_distance(0.0, &p).unwrap(), 5.0);
        assert_eq!(desired_distance(20.0, &p).unwrap(), 35.0);
        assert!(matches!(desired_distance(-1.0, &p), Err(AccError::NegativeSpeed { .. })));
    }

    #[test]
    fn continuous_matrices() {
        let m = build_model(&AccParams::default()).unwrap();
        assert_eq!(m.a.row(0).iter().copied().collect::<alloc::vec::Vec<_>>(), [0.0, -1.0, 1.5]);
        assert_eq!(m.a[(2, 2)], -2.0);
        assert_eq!(m.b, Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(m.c, Matrix3::identity());
    }

    #[test]
    fn tiny_sample_time_limit() {
        let m = build_model(&AccParams {
            t: 1e-8,
            ..Default::default()
        })
        .unwrap();
        assert!((m.ad - Matrix3::identity()).abs().max() < 1e-6);
        assert!(m.bd.abs().max() < 1e-6);
    }

    #[test]
    fn expm_of_diagonal() {
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, -2.0, 0.5));
        let e = expm(&d);
        for (i, x) in [1.0f64, -2.0, 0.5].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-12 * x.exp().max(1.0));
        }
    }

    #[test]
    fn scalar_riccati() {
        let one = SMatrix::<f64, 1, 1>::new(1.0);
        let (p, k) = solve_dare(&one, &one, &one, &one).unwrap();
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((p[(0, 0)] - golden).abs() < 1e-10);
        assert!((k[(0, 0)] - golden / (1.0 + golden)).abs() < 1e-10);
    }

    #[test]
    fn unstabilisable_pair() {
        let a = SMatrix::<f64, 1, 1>::new(2.0);
        let b = SMatrix::<f64, 1, 1>::new(0.0);
        let one = SMatrix::<f64, 1, 1>::new(1.0);
        assert_eq!(solve_dare(&a, &b, &one, &one), Err(AccError::UnstabilizablePair));
    }

    #[test]
    fn zero_state_gives_zero_command() {
        let mut c = LqgController::new(AccParams::default(), &AccNoise::default()).unwrap();
        assert_eq!(c.command(&AccState::default()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_model(&AccParams {
            t_l: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(build_model(&AccParams {
            rho: [0.0; 3],
            ..Default::default()
        })
        .is_err());
    }
}
