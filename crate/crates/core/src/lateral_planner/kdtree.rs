//! Static 2-d tree for nearest-obstacle-point queries.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::geometry::Point2;

/// Balanced 2-d tree stored implicitly: the node for `points[lo..hi]` is the
/// median `points[(lo + hi) / 2]`, split on x at even depths and y at odd.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KdTree {
    points: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub point: Point2,
    pub distance_sq: f64,
}

impl Nearest {
    pub fn distance(&self) -> f64 {
        self.distance_sq.sqrt()
    }
}

fn coord(p: &Point2, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

fn build(points: &mut [Point2], depth: usize) {
    if points.len() <= 1 {
        return;
    }
    let axis = depth % 2;
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| coord(a, axis).total_cmp(&coord(b, axis)));
    let (left, right) = points.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut right[1..], depth + 1);
}

impl KdTree {
    pub fn new(mut points: Vec<Point2>) -> Self {
        build(&mut points, 0);
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Closest stored point to `q`, or `None` for an empty tree.
    pub fn nearest(&self, q: Point2) -> Option<Nearest> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Nearest {
            point: self.points[0],
            distance_sq: f64::INFINITY,
        };
        self.search(q, 0, self.points.len(), 0, &mut best);
        Some(best)
    }

    fn search(&self, q: Point2, lo: usize, hi: usize, depth: usize, best: &mut Nearest) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d2 = q.distance_sq(p);
        if d2 < best.distance_sq {
            *best = Nearest { point: p, distance_sq: d2 };
        }
        let axis = depth % 2;
        let diff = coord(&q, axis) - coord(&p, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff <= best.distance_sq {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}
