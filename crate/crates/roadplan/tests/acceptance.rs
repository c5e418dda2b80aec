//! One line per acceptance criterion. Run with
//! `cargo test -p roadplan --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadplan::format::write_trace;
use roadplan::load_scenario;
use roadplan_core::acc::{build_model, observability_rank, solve_lqr, spectral_radius, AccNoise, AccParams, AccState, KalmanFilter, LqgController};
use roadplan_core::bezier::{continuity_report, control_points};
use roadplan_core::geometry::{FrenetState, Point2, ReferenceLine};
use roadplan_core::lateral_planner::{
    check_collision, generate_candidates, plan, solve_quintic, FootprintCircles, KdTree, Obstacle, ObstacleSet, PlannerConfig, PlannerError,
    SamplingGrid, VehicleDims,
};
use roadplan_core::sim::{build_reference, run, ReplanStatus, Scenario, Trace};
use roadplan_core::spline::fit_spline;
use roadplan_core::stanley::{lookup_ke, lookup_lx, steer, StanleySchedule, TrackingError};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn scenario(name: &str) -> Scenario {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&p).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn spline_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = 0.0;
    let pts: Vec<Point2> = (0..10_000)
        .map(|_| {
            x += uniform(&mut rng, 1.0, 8.0);
            Point2::new(x, uniform(&mut rng, -20.0, 20.0))
        })
        .collect();
    let (fit, elapsed) = timed(|| {
        let s = fit_spline(&pts).unwrap();
        let line = s.resample_uniform(1.0).unwrap();
        (s, line)
    });
    let (s, _) = fit;
    let mut interp: f64 = 0.0;
    for (k, p) in pts.iter().enumerate() {
        interp = interp.max(s.eval(s.knots()[k]).unwrap().distance(*p));
    }
    let mut jump: f64 = 0.0;
    for i in 1..pts.len() - 1 {
        for order in 0..3 {
            let (l, r) = (s.left_derivative_at_knot(i, order), s.derivative(s.knots()[i], order).unwrap());
            jump = jump.max(l.distance(r) / l.norm().max(1.0));
        }
    }
    let ends = s
        .derivative(s.start(), 2)
        .unwrap()
        .norm()
        .max(s.left_derivative_at_knot(pts.len() - 1, 2).norm());
    let pass = interp < 1e-9 && jump < 1e-9 && ends < 1e-9 && elapsed < Duration::from_secs(1);
    verdict(
        pass,
        format!("interp {interp:.1e} m, knot jump {jump:.1e}, end d2 {ends:.1e}, 1e4 points in {elapsed:.2?}"),
    )
}

fn bezier_continuity() -> Verdict {
    let s = scenario("right_angle_corner.toml");
    let line = build_reference(&s).unwrap();
    let r = continuity_report(&line).unwrap();
    let b = control_points(&s.corners[0]).unwrap();
    let end_k = b.curvature(0.0).unwrap().abs().max(b.curvature(1.0).unwrap().abs());
    let pass = s.waypoints.step == 0.01 && r.max_heading_jump < 0.01 && r.max_curvature_jump < 0.05 && end_k < 1e-9;
    verdict(
        pass,
        format!(
            "heading jump {:.2e} rad, curvature jump {:.2e} 1/m, end curvature {end_k:.1e}",
            r.max_heading_jump, r.max_curvature_jump
        ),
    )
}

fn gauss3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn quintic_solver() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut residual, mut rel): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        let l0 = uniform(&mut rng, -50.0, 50.0);
        let c0 = FrenetState::new(
            l0,
            uniform(&mut rng, -4.0, 4.0),
            uniform(&mut rng, -0.5, 0.5),
            uniform(&mut rng, -0.1, 0.1),
        );
        let ce = FrenetState::new(
            l0 + uniform(&mut rng, 1.0, 60.0),
            uniform(&mut rng, -4.0, 4.0),
            uniform(&mut rng, -0.5, 0.5),
            uniform(&mut rng, -0.1, 0.1),
        );
        let p = solve_quintic(&c0, &ce).unwrap();
        for (s, l) in [(c0, c0.l), (ce, ce.l)] {
            residual = residual
                .max((p.eval(l, 0) - s.d).abs())
                .max((p.eval(l, 1) - s.d_dot).abs())
                .max((p.eval(l, 2) - s.d_ddot).abs());
        }
        let big_l = ce.l - c0.l;
        let (a0, a1, a2) = (c0.d, c0.d_dot, 0.5 * c0.d_ddot);
        let (l2, l3, l4, l5) = (big_l * big_l, big_l.powi(3), big_l.powi(4), big_l.powi(5));
        let oracle = gauss3(
            [[l3, l4, l5], [3.0 * l2, 4.0 * l3, 5.0 * l4], [6.0 * big_l, 12.0 * l2, 20.0 * l3]],
            [ce.d - a0 - a1 * big_l - a2 * l2, ce.d_dot - a1 - 2.0 * a2 * big_l, ce.d_ddot - 2.0 * a2],
        );
        for k in 0..3 {
            let scale = oracle[k].abs().max(1e-12);
            rel = rel.max((p.alpha[k + 3] - oracle[k]).abs() / scale);
        }
    }
    verdict(
        residual < 1e-9 && rel < 1e-9,
        format!("10^4 pairs, max boundary residual {residual:.1e}, max relative coefficient error {rel:.1e}"),
    )
}

fn planner_grid() -> Verdict {
    let grid = SamplingGrid {
        d_min: 2.0,
        d_max: 4.0,
        delta_d: 0.1,
        l_min: 15.0,
        l_max: 30.0,
        delta_l: 0.2,
        road_half_width: 4.0,
    };
    let count = grid.count();
    let cycle = scenario("plan_cycle.toml");
    let cycle_count = roadplan_core::sim::plan_cycle(&cycle).map(|c| c.candidates.len()).unwrap_or(0);

    // Default grid (41 x 76 candidates) with one obstacle of 50 points beside the lane.
    let pts: Vec<Point2> = (0..=1500).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
    let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
    let obs = ObstacleSet::indexed(vec![Obstacle::rectangle(
        Point2::new(30.0, -2.5),
        0.0,
        4.5,
        1.8,
        Point2::new(3.0, 0.0),
        0.5,
    )
    .unwrap()]);
    let points: usize = obs.obstacles().iter().map(|o| o.points.len()).sum();
    let fp = FootprintCircles::covering(&VehicleDims::default(), 3, 0.3).unwrap();
    let cfg = PlannerConfig::default();
    let c0 = FrenetState::new(5.0, 0.0, 0.0, 0.0);
    let mut best = Duration::MAX;
    let mut candidates = 0;
    for _ in 0..5 {
        let (out, elapsed) = timed(|| plan(&c0, &cfg, &obs, &fp, &line, None, 10.0).unwrap());
        candidates = out.candidates.len();
        best = best.min(elapsed);
    }
    let pass = count == 1596 && cycle_count == 1596 && best < Duration::from_millis(100) && points <= 100;
    verdict(
        pass,
        format!("offset grid {count} candidates (scenario {cycle_count}); {candidates} candidates vs {points} obstacle points planned in {best:.1?}"),
    )
}

fn lazy_equals_eager() -> Verdict {
    let pts: Vec<Point2> = (0..=800).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
    let line = ReferenceLine::from_positions(&pts, 0.1).unwrap();
    let fp = FootprintCircles::covering(&VehicleDims::default(), 3, 0.3).unwrap();
    let cfg = PlannerConfig {
        grid: SamplingGrid {
            d_min: -2.0,
            d_max: 2.0,
            delta_d: 0.5,
            l_min: 10.0,
            l_max: 20.0,
            delta_l: 2.5,
            road_half_width: 4.0,
        },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut agree = 0;
    for _ in 0..100 {
        let obs: Vec<Obstacle> = (0..1 + rng.next_u32() % 3)
            .map(|_| {
                let c = Point2::new(uniform(&mut rng, 5.0, 30.0), uniform(&mut rng, -3.0, 3.0));
                let v = Point2::new(uniform(&mut rng, -2.0, 2.0), 0.0);
                Obstacle::rectangle(c, 0.0, uniform(&mut rng, 1.0, 4.5), uniform(&mut rng, 0.5, 1.8), v, 0.3).unwrap()
            })
            .collect();
        let obs = ObstacleSet::indexed(obs);
        let c0 = FrenetState::new(2.0, uniform(&mut rng, -1.0, 1.0), 0.0, 0.0);
        let speed = uniform(&mut rng, 2.0, 12.0);
        let all = generate_candidates(&c0, &cfg, &line, None, speed).unwrap();
        let eager = all
            .iter()
            .enumerate()
            .filter(|(_, c)| check_collision(c, &obs, &fp, cfg.horizon, Some(&line)).unwrap().feasible)
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        let lazy = match plan(&c0, &cfg, &obs, &fp, &line, None, speed) {
            Ok(out) => Some(out.selection.selected),
            Err(PlannerError::NoFeasibleTrajectory { .. }) => None,
            Err(e) => panic!("{e}"),
        };
        let same_poly = match (lazy, eager) {
            (Some(i), Some(j)) => all[i].poly == all[j].poly,
            (None, None) => true,
            _ => false,
        };
        agree += usize::from(same_poly);
    }

    let cloud: Vec<Point2> = (0..400)
        .map(|_| Point2::new(uniform(&mut rng, -20.0, 20.0), uniform(&mut rng, -5.0, 5.0)))
        .collect();
    let tree = KdTree::new(cloud.clone());
    let mut kd_err: f64 = 0.0;
    for _ in 0..1000 {
        let q = Point2::new(uniform(&mut rng, -25.0, 25.0), uniform(&mut rng, -8.0, 8.0));
        let brute = cloud.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min);
        kd_err = kd_err.max((tree.nearest(q).unwrap().distance() - brute).abs());
    }
    verdict(
        agree == 100 && kd_err <= 1e-12,
        format!("{agree}/100 instances agree; KD-tree max error {kd_err:.1e} over 1000 queries"),
    )
}

fn lqg() -> Verdict {
    let params = AccParams::default();
    let noise = AccNoise::default();
    let model = build_model(&params).unwrap();
    let rank = observability_rank(&model.ad, &model.c);
    let k = solve_lqr(&model, &params).unwrap();
    let rho = spectral_radius(&(model.ad - model.bd * k));

    let mut ctrl = LqgController::new(params, &noise).unwrap();
    let mut x = Vector3::new(10.0, -5.0, 0.0);
    let mut u_ok = true;
    let mut settle = f64::INFINITY;
    let steps = (60.0 / params.t).round() as usize;
    for step in 0..steps {
        let u = ctrl.command(&AccState::from_vector(&x)).unwrap();
        u_ok &= u.abs() <= params.u_max;
        x = model.ad * x + model.bd * u;
        if x.iter().all(|v| v.abs() < 1e-3) {
            settle = settle.min((step + 1) as f64 * params.t);
        } else {
            settle = f64::INFINITY;
        }
    }

    // Posterior covariance from above the fixed point.
    let mut f = KalmanFilter::new(Vector3::zeros(), Matrix3::identity() * 50.0, &noise);
    let tr = |m: &Matrix3<f64>| m.trace();
    let mut monotone = true;
    let mut last = tr(&f.covariance);
    for _ in 0..5000 {
        f.predict(&model, 0.0);
        let prior = tr(&f.covariance);
        f.update(&Vector3::zeros()).unwrap();
        let post = tr(&f.covariance);
        monotone &= post <= prior && post <= last + 1e-12;
        last = post;
    }
    // Offline recursion oracle on plain arrays.
    let ad: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| model.ad[(i, j)]));
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        p[i][i] = noise.r_meas[i];
    }
    for _ in 0..20_000 {
        let mut prior = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = if i == j { noise.q_proc[i] } else { 0.0 };
                for a in 0..3 {
                    for b in 0..3 {
                        s += ad[i][a] * p[a][b] * ad[j][b];
                    }
                }
                prior[i][j] = s;
            }
        }
        let mut sm = SMatrix::<f64, 3, 3>::from_fn(|i, j| prior[i][j]);
        sm += Matrix3::from_diagonal(&Vector3::from(noise.r_meas));
        let inv = sm.try_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = prior[i][j];
                for a in 0..3 {
                    for b in 0..3 {
                        s -= prior[i][a] * inv[(a, b)] * prior[b][j];
                    }
                }
                p[i][j] = s;
            }
        }
    }
    let fixed_err = (0..9).map(|n| (f.covariance[(n / 3, n % 3)] - p[n / 3][n % 3]).abs()).fold(0.0, f64::max);
    let pass = rank == 3 && rho < 1.0 && settle <= 60.0 && u_ok && monotone && fixed_err < 1e-6;
    verdict(
        pass,
        format!("rank {rank}, closed-loop spectral radius {rho:.4}, settled below 1e-3 at {settle:.2} s, |u| bounded {u_ok}, trace monotone {monotone}, fixed point error {fixed_err:.1e}"),
    )
}

fn stanley_schedules() -> Verdict {
    let s = StanleySchedule::default();
    let table = [
        (0.0, 10.0, 0.5),
        (5.0, 10.0, 0.6),
        (12.5, 10.0, 0.75),
        (20.0, 16.0, 0.9),
        (25.0, 20.0, 1.0),
        (30.0, 20.0, 1.0),
    ];
    let mut worst: f64 = 0.0;
    for (v, lx, ke) in table {
        worst = worst
            .max((lookup_lx(v, &s).unwrap() - lx).abs())
            .max((lookup_ke(v, &s).unwrap() - ke).abs());
    }
    let at_rest = steer(&TrackingError { e_fa: 1.0, theta_e: 0.0 }, 0.0, &s).unwrap();
    verdict(
        worst < 1e-12 && at_rest.is_finite(),
        format!("max table error {worst:.1e}; delta at v = 0 is {at_rest:.5} rad"),
    )
}

fn clean_run(trace: &Trace) -> bool {
    trace.replans.iter().all(|r| r.status == ReplanStatus::Selected) && trace.rows.iter().all(|r| !r.emergency)
}

fn closed_loop() -> Verdict {
    let (step, t_step) = timed(|| run(&scenario("step_offset.toml")).unwrap());
    let settle = step.rows.iter().rev().find(|r| r.offset.abs() >= 0.05).map_or(0.0, |r| r.t + step.dt);
    let overshoot = step.rows.iter().map(|r| -r.offset).fold(0.0, f64::max);
    let mut pass = settle <= 10.0 && overshoot < 0.5 && clean_run(&step) && t_step < Duration::from_secs(10);
    let mut detail = format!("step offset settles in {settle:.2} s, overshoot {overshoot:.3} m ({t_step:.1?})");
    for name in ["right_turn.toml", "zigzag.toml"] {
        let (t, elapsed) = timed(|| run(&scenario(name)).unwrap());
        let e = t.rows.iter().map(|r| r.e_fa.abs()).fold(0.0, f64::max);
        pass &= e < 0.3 && clean_run(&t) && elapsed < Duration::from_secs(10);
        detail += &format!("; {} max |e_fa| {e:.3} m ({elapsed:.1?})", name.trim_end_matches(".toml"));
    }
    verdict(pass, detail)
}

fn overtaking() -> Verdict {
    let s = scenario("overtake.toml");
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    let bytes = |t: &Trace| {
        let mut buf = Vec::new();
        write_trace(&mut buf, &t.rows).unwrap();
        buf
    };
    let identical = bytes(&a) == bytes(&b);
    let min_clear = a.rows.iter().map(|r| r.clearance).fold(f64::INFINITY, f64::min);
    let peak = a.rows.iter().map(|r| r.offset).fold(f64::NEG_INFINITY, f64::max);
    let (first, last) = (a.rows[0].offset, a.rows[a.rows.len() - 1].offset);
    let pass = min_clear > 0.0 && (2.0..=4.0).contains(&peak) && first.abs() < 0.05 && last.abs() < 0.05 && identical;
    verdict(
        pass,
        format!("min clearance {min_clear:.3} m, offset {first:.2} -> {peak:.2} -> {last:.2} m, byte-identical {identical}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("spline correctness", spline_correctness),
        ("Bezier continuity", bezier_continuity),
        ("quintic solver", quintic_solver),
        ("planner grid and timing", planner_grid),
        ("lazy equals eager", lazy_equals_eager),
        ("LQG", lqg),
        ("Stanley schedules", stanley_schedules),
        ("closed-loop tracking", closed_loop),
        ("overtaking", overtaking),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("criterion {} {}: {}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, name, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
