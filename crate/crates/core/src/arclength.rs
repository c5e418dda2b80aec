//! Arc length of parametric curves by adaptive chord subdivision.

use alloc::vec::Vec;

use crate::geometry::Point2;

/// Chord-vs-arc tolerance used when none is given, metres.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const MAX_DEPTH: u32 = 40;
const MIN_DEPTH: u32 = 2;

/// Monotone table of `(parameter, cumulative arc length)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthTable {
    params: Vec<f64>,
    lengths: Vec<f64>,
}

impl ArcLengthTable {
    /// Subdivides `[t0, t1]` until, on every piece, splitting the chord in two
    /// changes its length by less than `tol`.
    pub fn build<F: Fn(f64) -> Point2>(curve: F, t0: f64, t1: f64, tol: f64) -> Self {
        let mut params = alloc::vec![t0];
        let mut lengths = alloc::vec![0.0];
        // Depth-first, left piece first, so breakpoints come out in order.
        let mut stack = alloc::vec![(t0, t1, curve(t0), curve(t1), 0u32)];
        while let Some((a, b, pa, pb, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let pm = curve(m);
            let chord = pa.distance(pb);
            let split = pa.distance(pm) + pm.distance(pb);
            if depth >= MIN_DEPTH && (split - chord <= tol || depth >= MAX_DEPTH) {
                // Richardson step: chord error shrinks with the square of the piece.
                let piece = split + (split - chord) / 3.0;
                let last = lengths[lengths.len() - 1];
                params.push(b);
                lengths.push(last + piece);
            } else {
                stack.push((m, b, pm, pb, depth + 1));
                stack.push((a, m, pa, pm, depth + 1));
            }
        }
        Self { params, lengths }
    }

    /// Builds one table per `[breaks[i], breaks[i+1]]` and chains them, so no
    /// initial chord spans a knot.
    pub fn build_piecewise<F: Fn(f64) -> Point2>(curve: F, breaks: &[f64], tol: f64) -> Self {
        let mut params = alloc::vec![breaks[0]];
        let mut lengths = alloc::vec![0.0];
        for w in breaks.windows(2) {
            let piece = Self::build(&curve, w[0], w[1], tol);
            let offset = lengths[lengths.len() - 1];
            params.extend_from_slice(&piece.params[1..]);
            lengths.extend(piece.lengths[1..].iter().map(|s| s + offset));
        }
        Self { params, lengths }
    }

    pub fn total_length(&self) -> f64 {
        self.lengths[self.lengths.len() - 1]
    }

    pub fn start_param(&self) -> f64 {
        self.params[0]
    }

    pub fn end_param(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    /// Parameter at which the cumulative length reaches `s` (clamped to the
    /// table), by linear interpolation between breakpoints.
    pub fn param_at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.start_param();
        }
        if s >= self.total_length() {
            return self.end_param();
        }
        let i = self.lengths.partition_point(|&x| x <= s).max(1) - 1;
        let (s0, s1) = (self.lengths[i], self.lengths[i + 1]);
        let u = (s - s0) / (s1 - s0);
        self.params[i] + u * (self.params[i + 1] - self.params[i])
    }

    /// Like [`param_at`](Self::param_at), then polished with Newton steps on
    /// the exact arc-length integral of `speed` (|dr/dt|) from the enclosing
    /// breakpoint.
    pub fn param_at_refined<S: Fn(f64) -> f64>(&self, s: f64, speed: S) -> f64 {
        let mut t = self.param_at(s);
        if s <= 0.0 || s >= self.total_length() {
            return t;
        }
        let i = self.lengths.partition_point(|&x| x <= s).max(1) - 1;
        let (ta, tb) = (self.params[i], self.params[i + 1]);
        let (sa, sb) = (self.lengths[i], self.lengths[i + 1]);
        // Rescale the piece so that its Gauss length matches the table entry.
        let piece = gauss_legendre(&speed, ta, tb);
        let scale = if piece > 0.0 { (sb - sa) / piece } else { 1.0 };
        for _ in 0..4 {
            let v = speed(t) * scale;
            if v <= 0.0 {
                break;
            }
            let err = sa + scale * gauss_legendre(&speed, ta, t) - s;
            t = (t - err / v).clamp(ta, tb);
            if err.abs() < 1e-13 {
                break;
            }
        }
        t
    }

    /// Cumulative length at parameter `t` (linear between breakpoints).
    pub fn length_at(&self, t: f64) -> f64 {
        if t <= self.start_param() {
            return 0.0;
        }
        if t >= self.end_param() {
            return self.total_length();
        }
        let i = self.params.partition_point(|&x| x <= t).max(1) - 1;
        let u = (t - self.params[i]) / (self.params[i + 1] - self.params[i]);
        self.lengths[i] + u * (self.lengths[i + 1] - self.lengths[i])
    }
}

/// Five-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683,
        0.538_469_310_105_683,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    NODES.iter().zip(WEIGHTS.iter()).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}
