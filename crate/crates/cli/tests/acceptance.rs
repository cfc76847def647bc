//! Acceptance run: one PASS/FAIL line per criterion, with its runtime.
//! A criterion also fails when it overruns its time limit.

#[path = "../../core/tests/common/expr_ref.rs"]
mod expr_ref;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use radshoot::assumptions::{check_control_inequality, check_decay, default_base_points};
use radshoot::degree::{degree, SimplexGrid};
use radshoot::dirichlet::{solve_dirichlet_scalar, solve_dirichlet_system, DEFAULT_A_RANGE};
use radshoot::expr::parse;
use radshoot::pohozaev::{
    nonexistence_certificate, verify_cross_identity, verify_rellich_identity,
    verify_scalar_identity, Certificate,
};
use radshoot::quadrature::{radial_integral, sphere_area};
use radshoot::search::find_zero;
use radshoot::target::{dynamic_estimate_check, phi, transversality_check, SimplexPoint};
use radshoot::{integrate, Params, ShotConfig, SystemSpec};
use radshoot_cli::parse_config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn params(list: &[(&str, f64)]) -> Params {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn spec(name: &str, list: &[(&str, f64)]) -> SystemSpec {
    SystemSpec::builtin(name, &params(list)).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bubble(r: f64) -> f64 {
    3f64.powf(0.25) / (1.0 + r * r).sqrt()
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn integrator_oracle() -> Check {
    let s = spec("lane_emden_scalar", &[("p", 5.0)]);
    let alpha = 3f64.powf(0.25);
    let cfg = ShotConfig {
        r_max: 5.0,
        ..ShotConfig::default()
    };
    let (traj, _) = integrate(&s, &[alpha], &cfg).map_err(|e| e.to_string())?;
    let err = (0..=500)
        .map(|j| {
            let r = 5.0 * j as f64 / 500.0;
            let (u, _) = traj.eval(r).expect("inside the trajectory");
            ((u[0] - bubble(r)) / bubble(r)).abs()
        })
        .fold(0.0, f64::max);
    ensure(err <= 1e-6, || format!("max relative error {err:e}"))?;
    let (mut steps, mut errs) = (Vec::new(), Vec::new());
    for rung in 0..4 {
        let f = 16f64.powi(-rung);
        let cfg = ShotConfig {
            r_max: 5.0,
            rel_tol: 1e-5 * f,
            abs_tol: 1e-7 * f,
            ..ShotConfig::default()
        };
        let (traj, _) = integrate(&s, &[alpha], &cfg).map_err(|e| e.to_string())?;
        let last = traj.nodes().last().expect("steps were taken");
        steps.push((traj.nodes().len() as f64).ln());
        errs.push((last.u[0] - bubble(last.r)).abs().ln());
    }
    let order = -slope(&steps, &errs);
    ensure(order >= 4.0, || format!("empirical order {order:.2}"))?;
    Ok(format!(
        "max rel error {err:.1e}, empirical order {order:.2}"
    ))
}

fn remark_oracle() -> Check {
    let g = |l: f64| l.powi(24) - l.powi(4) - 1.0;
    let (mut lo, mut hi) = (1.0, 2.0);
    ensure(g(lo) < 0.0 && g(hi) > 0.0, || {
        "no sign change on [1, 2]".into()
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let nu = lambda.powi(5);
    let c = 3f64.powf(0.25);
    let s = spec("sign_changing", &[("p", 5.0)]);
    let cfg = ShotConfig {
        r_max: 10.0,
        ..ShotConfig::default()
    };
    let (traj, _) = integrate(&s, &[lambda * c, nu * c], &cfg).map_err(|e| e.to_string())?;
    let mut err: f64 = 0.0;
    for j in 0..=1000 {
        let r = 10.0 * j as f64 / 1000.0;
        let (u, _) = traj.eval(r).ok_or("trajectory ends before r = 10")?;
        let w = bubble(r);
        err = err.max(((u[0] - lambda * w) / (lambda * w)).abs());
        err = err.max(((u[1] - nu * w) / (nu * w)).abs());
    }
    ensure(err <= 1e-5, || format!("max relative error {err:e}"))?;
    Ok(format!(
        "lambda = {lambda:.15}, nu = {nu:.15}, max rel error {err:.1e}"
    ))
}

fn assumption_suite() -> Check {
    let systems = [
        spec("sign_changing", &[("p", 5.0)]),
        spec("sign_changing_pq", &[("p", 5.0), ("q", 7.0)]),
        spec("potential_type1", &[("p", 7.0)]),
        spec("potential_type2", &[("p", 7.0)]),
    ];
    let mut worst_c: f64 = 0.0;
    for s in &systems {
        let decay = check_decay(s, 10.0, 10_000, 2024).map_err(|e| e.to_string())?;
        ensure(decay.decay_ok, || {
            format!("{} fails the decay check", s.name())
        })?;
        for abar in default_base_points(2, 1.0) {
            let e =
                check_control_inequality(s, &abar, 0.1, 10_000, 2024).map_err(|e| e.to_string())?;
            ensure(e.ok, || format!("{} fails control at {abar:?}", s.name()))?;
            worst_c = worst_c.max(e.c_est);
        }
    }
    Ok(format!("4 systems ok, largest C = {worst_c:.3}"))
}

fn dynamic_estimate() -> Check {
    let s = spec("sign_changing", &[("p", 5.0)]);
    let entry =
        check_control_inequality(&s, &[0.0, 1.5], 0.5, 10_000, 7).map_err(|e| e.to_string())?;
    ensure(entry.ok, || "control check failed at (0, 1.5)".into())?;
    let mut lines = vec![format!("C = {:.3}", entry.c_est)];
    for delta in [1e-2, 1e-3, 1e-4] {
        let rep = dynamic_estimate_check(&s, &entry, delta, 50, 7, &ShotConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(rep.ok && rep.skipped < rep.samples, || {
            format!("delta {delta}: {rep:?}")
        })?;
        lines.push(format!(
            "delta {delta:e}: ratio/claim {:.3}, ratio/chain {:.3}",
            rep.ratio_to_claim, rep.ratio_to_chain
        ));
    }
    Ok(lines.join("; "))
}

fn degree_suite() -> Check {
    let level = 2.0;
    let id = |p: &SimplexPoint| Ok(Some(p.clone()));
    let flip = |p: &SimplexPoint| {
        let mut a = p.alpha().to_vec();
        a.swap(0, 1);
        SimplexPoint::new(a, p.level()).map(Some)
    };
    let vertex = |p: &SimplexPoint| {
        let mut a = vec![0.0; p.dim()];
        a[0] = p.level();
        SimplexPoint::new(a, p.level()).map(Some)
    };
    for dim in [2, 3] {
        let target = SimplexPoint::normalized(&vec![1.0; dim], level).unwrap();
        for k in [8, 32] {
            let grid = SimplexGrid::new(level, dim, k).unwrap();
            let d = |m: &radshoot::degree::SimplexMap| -> Result<i64, String> {
                degree(m, &target, &grid)
                    .map(|r| r.degree)
                    .map_err(|e| e.to_string())
            };
            ensure(d(&id)? == 1, || format!("identity L={dim} k={k}"))?;
            ensure(d(&flip)? == -1, || format!("flip L={dim} k={k}"))?;
            ensure(d(&vertex)? == 0, || format!("vertex L={dim} k={k}"))?;
        }
    }
    let s = spec("sign_changing", &[("p", 3.0)]);
    let cfg = ShotConfig::default();
    let grid = SimplexGrid::new(level, 2, 8).unwrap();
    let target = SimplexPoint::new(vec![0.7, 1.3], level).unwrap();
    let mut seen = BTreeSet::new();
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let h = |p: &SimplexPoint| {
            let image = phi(&s, p, &cfg)?.ok_or(radshoot::Error::NotAWallHit)?;
            let mixed: Vec<f64> = p
                .alpha()
                .iter()
                .zip(image.alpha())
                .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                .collect();
            SimplexPoint::normalized(&mixed, level).map(Some)
        };
        seen.insert(
            degree(&h, &target, &grid)
                .map_err(|e| e.to_string())?
                .degree,
        );
    }
    ensure(seen.len() == 1, || format!("homotopy degrees {seen:?}"))?;
    Ok(format!(
        "identity 1, flip -1, vertex 0; homotopy degree {:?}",
        seen.first().unwrap()
    ))
}

fn ground_state_search() -> Check {
    let s = spec("sign_changing", &[("p", 5.0)]);
    let cfg = ShotConfig {
        r_max: 1e12,
        ..ShotConfig::default()
    };
    let c = find_zero(&s, 2.0, &cfg, 200).map_err(|e| e.to_string())?;
    let width = c.bracket_width();
    ensure(c.achieved_r >= 50.0, || {
        format!("achieved_r {}", c.achieved_r)
    })?;
    ensure(width <= 1e-10 * 2.0, || format!("bracket width {width:e}"))?;
    ensure(c.shots <= 200, || format!("{} shots", c.shots))?;
    let zero = spec("zero", &[]);
    let z = find_zero(&zero, 2.0, &ShotConfig::default(), 200).map_err(|e| e.to_string())?;
    ensure(z.no_hit && z.shots == 1, || format!("zero system: {z:?}"))?;
    Ok(format!(
        "alpha0 = {:?}, achieved_r {:.3e}, width {width:.2e}, {} shots",
        c.alpha0.alpha(),
        c.achieved_r,
        c.shots
    ))
}

fn pohozaev_residuals() -> Check {
    let res =
        solve_dirichlet_scalar(3.0, 3, 1.0, &ShotConfig::default()).map_err(|e| e.to_string())?;
    let sol = res.solution().ok_or("no Dirichlet solution on B_1")?;
    let scalar = verify_scalar_identity(sol, 3.0).map_err(|e| e.to_string())?;
    ensure(scalar.residual <= 1e-4, || {
        format!("scalar residual {:e}", scalar.residual)
    })?;
    let rel = verify_rellich_identity(sol, 0).map_err(|e| e.to_string())?;
    let cross = verify_cross_identity(sol).map_err(|e| e.to_string())?;
    // with u = v the cross form is twice the Rellich form minus (n-2)∫|∇u|² on each side
    let e = (sol.n() as f64 - 2.0) * rel.gradient_energy;
    let (lhs, rhs) = (2.0 * rel.identity.lhs - e, 2.0 * rel.identity.rhs - e);
    let dev = ((cross.lhs - lhs) / lhs)
        .abs()
        .max(((cross.rhs - rhs) / rhs).abs());
    ensure(dev <= 1e-8, || format!("cross vs Rellich {dev:e}"))?;
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        for m in 0..=8 {
            let g = |r: f64| r.powi(m);
            let q = radial_integral(&g, n, 1.5).map_err(|e| e.to_string())?;
            let exact = sphere_area(n) * 1.5f64.powi(m + n as i32) / (m + n as i32) as f64;
            worst = worst.max(((q.value - exact) / exact).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("moment error {worst:e}"))?;
    Ok(format!(
        "scalar residual {:.1e}, cross vs Rellich {dev:.1e}, moments {worst:.1e}",
        scalar.residual
    ))
}

fn certificates() -> Check {
    let certified = [
        spec("sign_changing", &[("p", 5.0)]),
        spec("sign_changing", &[("p", 6.0)]),
        spec("sign_changing_pq", &[("p", 5.0), ("q", 7.0)]),
        spec("potential_type1", &[("p", 7.0)]),
        spec("potential_type2", &[("p", 7.0)]),
    ];
    let cfg = ShotConfig::default();
    for s in &certified {
        let c = nonexistence_certificate(s).map_err(|e| e.to_string())?;
        ensure(c.is_certified(), || format!("{}: {}", s.name(), c.text()))?;
        for radius in [0.5, 1.0, 2.0] {
            let res = solve_dirichlet_system(s, DEFAULT_A_RANGE, radius, &cfg, 500)
                .map_err(|e| e.to_string())?;
            ensure(!res.is_found(), || {
                format!("{} found a ball of radius {radius}", s.name())
            })?;
        }
    }
    let sub = nonexistence_certificate(&spec("sign_changing", &[("p", 3.0)]))
        .map_err(|e| e.to_string())?;
    ensure(matches!(sub, Certificate::Inconclusive { .. }), || {
        sub.text()
    })?;
    Ok("5 certified, all NotFound on R in {0.5, 1, 2}; p=3 inconclusive".into())
}

fn transversality() -> Check {
    let s = spec("sign_changing", &[("p", 5.0)]);
    let cfg = ShotConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut slopes = Vec::new();
    let mut draws = 0;
    while slopes.len() < 20 {
        draws += 1;
        ensure(draws <= 200, || "too few wall hits".into())?;
        let t: f64 = rng.gen_range(0.0..2.0);
        if t <= 0.0 {
            continue;
        }
        let p = SimplexPoint::new(vec![t, 2.0 - t], 2.0).unwrap();
        match transversality_check(&s, &p, &cfg) {
            Ok(tr) => slopes.push(tr.omega_slope),
            Err(radshoot::Error::NotAWallHit) => continue,
            Err(e) => return Err(e.to_string()),
        }
    }
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(max < 0.0, || format!("largest slope {max:e}"))?;
    Ok(format!("20 wall hits, largest slope {max:.3e}"))
}

fn parser_and_config() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let names: BTreeSet<String> = expr_ref::PARAM_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect();
    let ps = params(&[("p", 2.5), ("q", 0.75)]);
    let mut compared = 0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..4);
        let tree = expr_ref::random_expr(&mut rng, 6, dim);
        let text = tree.to_string();
        let back = parse(&text, dim, &names).map_err(|e| format!("{text}: {e}"))?;
        ensure(back == tree, || format!("{text} reparsed differently"))?;
        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..3.0)).collect();
        if let Ok(v) = tree.eval(&u, &ps) {
            let r = expr_ref::reference_eval(&text, &u, &ps).ok_or_else(|| text.clone())?;
            ensure((v - r).abs() <= 1e-12 * v.abs().max(1.0), || text.clone())?;
            compared += 1;
        }
    }
    let cfg = parse_config(
        "[system]\nname = \"custom\"\nn = 3\nf = [\"u2^p - u1^p\", \"u1^p\"]\n[system.params]\np = 5\n",
        &[],
    )
    .map_err(|e| e.to_string())?;
    let custom = cfg.system_spec().map_err(|e| e.to_string())?;
    let builtin = spec("sign_changing", &[("p", 5.0)]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
        let (a, b) = (custom.eval_f(&u).unwrap(), builtin.eval_f(&u).unwrap());
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-12, || format!("custom vs builtin {worst:e}"))?;
    Ok(format!(
        "1000 trees round-trip, {compared} evaluated; custom config matches"
    ))
}

type Criterion = (&'static str, u64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("integrator oracle", 1, integrator_oracle),
        ("scaled bubble pair oracle", 2, remark_oracle),
        ("assumption suite", 5, assumption_suite),
        ("dynamic estimate", 10, dynamic_estimate),
        ("degree suite", 5, degree_suite),
        ("ground-state search", 30, ground_state_search),
        ("Pohozaev residuals", 5, pohozaev_residuals),
        ("nonexistence certificates", 60, certificates),
        ("transversality", 10, transversality),
        ("parser and config", 10, parser_and_config),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(*limit) => {
                Err(format!("over the {limit} s limit"))
            }
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} [{}] {name} ({:.2} s): {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
