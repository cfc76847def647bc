//! Shooting from the origin for the radial system
//!
//! ```text
//! u_i'' + (n-1)/r u_i' = -f_i(u),   u_i(0) = α_i,   u_i'(0) = 0
//! ```
//!
//! The first-order system in `(u, u')` is advanced with the Dormand–Prince
//! 5(4) pair and its quartic continuous extension. The singular term at the
//! origin is avoided by starting at `eps_start` from the series
//! `u(r) = α - f(α) r²/(2n)`. The first time `min_i u_i` reaches zero is
//! localized by bisection on the dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemSpec;

/// `|u_i|` above this is reported as blow-up.
pub const BLOWUP_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShotConfig {
    /// Radius where the series start hands over to the integrator.
    pub eps_start: f64,
    pub r_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Tolerance on `min_i u_i` at a localized wall hit.
    pub wall_tol: f64,
    pub max_steps: usize,
}

impl Default for ShotConfig {
    fn default() -> Self {
        ShotConfig {
            eps_start: 1e-6,
            r_max: 1e4,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            wall_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

impl ShotConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.eps_start,
            self.r_max,
            self.rel_tol,
            self.abs_tol,
            self.wall_tol,
        ]
        .iter()
        .all(|x| x.is_finite() && *x > 0.0);
        if !positive || self.eps_start >= self.r_max || self.max_steps == 0 {
            return Err(Error::InvalidInput(format!(
                "invalid shot configuration {self:?}"
            )));
        }
        Ok(())
    }

    /// Same configuration with both integration tolerances scaled by `factor`.
    pub fn with_tolerance_scale(&self, factor: f64) -> Self {
        ShotConfig {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub r: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

/// Dense output of one accepted step, in Hairer's `rcont` form.
/// Valid for `theta ∈ [0, theta_end]`.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    r0: f64,
    h: f64,
    theta_end: f64,
    coeffs: [Vec<f64>; 5],
}

impl Segment {
    fn r_end(&self) -> f64 {
        self.r0 + self.h * self.theta_end
    }

    fn state(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        let [c1, c2, c3, c4, c5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = c1[i] + theta * (c2[i] + t1 * (c3[i] + theta * (c4[i] + t1 * c5[i])));
        }
    }

    /// d/dr of the interpolant.
    fn slope(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        let [_, c2, c3, c4, c5] = &self.coeffs;
        for i in 0..out.len() {
            let c = c4[i] + t1 * c5[i];
            let dc = -c5[i];
            let b = c3[i] + theta * c;
            let db = c + theta * dc;
            let a = c2[i] + t1 * b;
            let da = -b + t1 * db;
            out[i] = (a + theta * da) / self.h;
        }
    }
}

/// `u(r) = u0 - c2 r²/(2n)` near the origin.
#[derive(Debug, Clone, PartialEq)]
struct Series {
    u0: Vec<f64>,
    c2: Vec<f64>,
    r_end: f64,
}

/// Dense radial solution on `[0, r_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    alpha: Vec<f64>,
    n: u32,
    series: Series,
    nodes: Vec<Node>,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Accepted step ends, starting with the series handoff point.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn r_end(&self) -> f64 {
        self.nodes.last().map_or(self.series.r_end, |n| n.r)
    }

    /// Radius where the dense output switches from the series to the steps.
    pub fn series_end(&self) -> f64 {
        self.series.r_end
    }

    /// Step boundaries, for quadrature that should not straddle a kink in the interpolant.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0, self.series.r_end];
        out.extend(self.segments.iter().map(Segment::r_end));
        out
    }

    fn segment_at(&self, r: f64) -> Option<(&Segment, f64)> {
        if !(r >= self.series.r_end && r <= self.r_end()) {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|s| s.r0 <= r)
            .saturating_sub(1);
        let seg = self.segments.get(idx)?;
        let theta = ((r - seg.r0) / seg.h).clamp(0.0, seg.theta_end);
        Some((seg, theta))
    }

    /// `(u(r), u'(r))`, or `None` outside `[0, r_end]`.
    pub fn eval(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let dim = self.dim();
        if (0.0..self.series.r_end).contains(&r) {
            let nn = self.n as f64;
            let u = (0..dim)
                .map(|i| self.series.u0[i] - self.series.c2[i] * r * r / (2.0 * nn))
                .collect();
            let du = (0..dim).map(|i| -self.series.c2[i] * r / nn).collect();
            return Some((u, du));
        }
        let (seg, theta) = self.segment_at(r)?;
        let mut y = vec![0.0; 2 * dim];
        seg.state(theta, &mut y);
        let du = y.split_off(dim);
        Some((y, du))
    }

    /// `u''(r)` from differentiating the interpolant of `u'`.
    pub fn second_derivative(&self, r: f64) -> Option<Vec<f64>> {
        let dim = self.dim();
        if (0.0..self.series.r_end).contains(&r) {
            let nn = self.n as f64;
            return Some((0..dim).map(|i| -self.series.c2[i] / nn).collect());
        }
        let (seg, theta) = self.segment_at(r)?;
        let mut dy = vec![0.0; 2 * dim];
        seg.slope(theta, &mut dy);
        Some(dy.split_off(dim))
    }

    /// The trajectory of `r ↦ amp · u(lambda · r)`.
    pub fn rescaled(&self, lambda: f64, amp: f64) -> Trajectory {
        let dim = self.dim();
        let scale_state = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(i, x)| if i < dim { x * amp } else { x * amp * lambda })
                .collect()
        };
        Trajectory {
            alpha: self.alpha.iter().map(|a| a * amp).collect(),
            n: self.n,
            series: Series {
                u0: self.series.u0.iter().map(|x| x * amp).collect(),
                c2: self
                    .series
                    .c2
                    .iter()
                    .map(|x| x * amp * lambda * lambda)
                    .collect(),
                r_end: self.series.r_end / lambda,
            },
            nodes: self
                .nodes
                .iter()
                .map(|node| Node {
                    r: node.r / lambda,
                    u: node.u.iter().map(|x| x * amp).collect(),
                    du: node.du.iter().map(|x| x * amp * lambda).collect(),
                })
                .collect(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    r0: s.r0 / lambda,
                    h: s.h / lambda,
                    theta_end: s.theta_end,
                    coeffs: [
                        scale_state(&s.coeffs[0]),
                        scale_state(&s.coeffs[1]),
                        scale_state(&s.coeffs[2]),
                        scale_state(&s.coeffs[3]),
                        scale_state(&s.coeffs[4]),
                    ],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ShotOutcome {
    WallHit {
        r_alpha: f64,
        /// Zero-based indices of the components within `wall_tol` of zero.
        hit_set: Vec<usize>,
        u_end: Vec<f64>,
        du_end: Vec<f64>,
    },
    NoHitUpTo {
        r_max: f64,
    },
    Blowup {
        r_stop: f64,
    },
    StepLimit {
        r_stop: f64,
    },
}

impl ShotOutcome {
    pub fn r_alpha(&self) -> Option<f64> {
        match self {
            ShotOutcome::WallHit { r_alpha, .. } => Some(*r_alpha),
            _ => None,
        }
    }

    pub fn is_wall_hit(&self) -> bool {
        matches!(self, ShotOutcome::WallHit { .. })
    }

    /// Smallest hit index, used to orient bisection searches.
    pub fn first_hit(&self) -> Option<usize> {
        match self {
            ShotOutcome::WallHit { hit_set, .. } => hit_set.first().copied(),
            _ => None,
        }
    }
}

/// Second-order series data at `r = eps`: `u = α - f(α) eps²/(2n)`, `u' = -f(α) eps/n`.
pub fn taylor_start(spec: &SystemSpec, alpha: &[f64], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_alpha(spec, alpha)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "series radius must be positive, got {eps}"
        )));
    }
    let f = spec.eval_f(alpha)?;
    let nn = spec.n() as f64;
    let u = alpha
        .iter()
        .zip(&f)
        .map(|(a, fi)| a - fi * eps * eps / (2.0 * nn))
        .collect();
    let du = f.iter().map(|fi| -fi * eps / nn).collect();
    Ok((u, du))
}

fn check_alpha(spec: &SystemSpec, alpha: &[f64]) -> Result<()> {
    if alpha.len() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "initial value has {} components, system has {}",
            alpha.len(),
            spec.dim()
        )));
    }
    if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "initial value {alpha:?} is not strictly positive"
        )));
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau, error weights and dense-output weights.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Rhs<'a> {
    spec: &'a SystemSpec,
    dim: usize,
    radial: f64,
    f: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, r: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let dim = self.dim;
        self.spec.eval_f_projected(&y[..dim], &mut self.f)?;
        for i in 0..dim {
            dy[i] = y[dim + i];
            dy[dim + i] = -self.f[i] - self.radial / r * y[dim + i];
        }
        Ok(())
    }
}

fn min_u(y: &[f64], dim: usize) -> f64 {
    y[..dim].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Shoots from `alpha` until the first wall hit, `r_max`, blow-up or the step limit.
pub fn integrate(
    spec: &SystemSpec,
    alpha: &[f64],
    cfg: &ShotConfig,
) -> Result<(Trajectory, ShotOutcome)> {
    cfg.validate()?;
    check_alpha(spec, alpha)?;
    let dim = spec.dim();
    let nn = spec.n() as f64;
    let f_alpha = spec.eval_f(alpha)?;
    let eps = cfg.eps_start;
    let (u0, du0) = taylor_start(spec, alpha, eps)?;

    let mut traj = Trajectory {
        alpha: alpha.to_vec(),
        n: spec.n(),
        series: Series {
            u0: alpha.to_vec(),
            c2: f_alpha,
            r_end: eps,
        },
        nodes: vec![Node {
            r: eps,
            u: u0.clone(),
            du: du0.clone(),
        }],
        segments: Vec::new(),
    };

    let size = 2 * dim;
    let mut rhs = Rhs {
        spec,
        dim,
        radial: nn - 1.0,
        f: vec![0.0; dim],
    };
    let mut y: Vec<f64> = u0.into_iter().chain(du0).collect();
    let mut k1 = vec![0.0; size];
    let mut k2 = vec![0.0; size];
    let mut k3 = vec![0.0; size];
    let mut k4 = vec![0.0; size];
    let mut k5 = vec![0.0; size];
    let mut k6 = vec![0.0; size];
    let mut k7 = vec![0.0; size];
    let mut ys = vec![0.0; size];
    let mut y1 = vec![0.0; size];
    let mut probe = vec![0.0; size];

    let mut r = eps;
    rhs.eval(r, &y, &mut k1)?;
    let mut h = eps;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    let stability_cap = 3.0 / (nn - 1.0);

    loop {
        if steps >= cfg.max_steps {
            return Ok((traj, ShotOutcome::StepLimit { r_stop: r }));
        }
        let h_max = stability_cap * r;
        h = h.min(h_max);
        let mut final_step = false;
        if r + h >= cfg.r_max {
            h = cfg.r_max - r;
            final_step = true;
        }
        if h <= 1e-14 * r {
            return Ok((traj, ShotOutcome::StepLimit { r_stop: r }));
        }
        steps += 1;

        for i in 0..size {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        rhs.eval(r + C2 * h, &ys, &mut k2)?;
        for i in 0..size {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(r + C3 * h, &ys, &mut k3)?;
        for i in 0..size {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(r + C4 * h, &ys, &mut k4)?;
        for i in 0..size {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(r + C5 * h, &ys, &mut k5)?;
        for i in 0..size {
            ys[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs.eval(r + h, &ys, &mut k6)?;
        for i in 0..size {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let r_new = if final_step { cfg.r_max } else { r + h };
        rhs.eval(r_new, &y1, &mut k7)?;

        let mut err = 0.0;
        for i in 0..size {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / size as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        // PI step-size control with Hairer's constants
        let fac11 = err.powf(0.17);
        if err > 1.0 {
            h /= (fac11 / 0.9).min(5.0);
            last_rejected = true;
            continue;
        }
        let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(0.1, 5.0);
        facold = err.max(1e-4);
        let mut h_next = h / fac;
        if last_rejected {
            h_next = h_next.min(h);
        }
        last_rejected = false;

        let mut rcont5 = vec![0.0; size];
        for i in 0..size {
            rcont5[i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let ydiff: Vec<f64> = (0..size).map(|i| y1[i] - y[i]).collect();
        let bspl: Vec<f64> = (0..size).map(|i| h * k1[i] - ydiff[i]).collect();
        let rcont4: Vec<f64> = (0..size).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
        let segment = Segment {
            r0: r,
            h: r_new - r,
            theta_end: 1.0,
            coeffs: [y.clone(), ydiff, bspl, rcont4, rcont5],
        };

        // earliest sign change of min_i u_i among a few interior samples and the step end
        let mut prev_theta = 0.0;
        let mut crossing = None;
        for theta in [0.25, 0.5, 0.75, 1.0] {
            segment.state(theta, &mut probe);
            if min_u(&probe, dim) <= 0.0 {
                crossing = Some((prev_theta, theta));
                break;
            }
            prev_theta = theta;
        }

        if let Some((lo, hi)) = crossing {
            let (theta, state) = localize(&segment, lo, hi, dim, cfg.wall_tol);
            let mut segment = segment;
            segment.theta_end = theta;
            let r_alpha = segment.r_end();
            let u_end = state[..dim].to_vec();
            let du_end = state[dim..].to_vec();
            let mut hit_set: Vec<usize> = (0..dim).filter(|&i| u_end[i] <= cfg.wall_tol).collect();
            if hit_set.is_empty() {
                let argmin = (0..dim)
                    .min_by(|&a, &b| u_end[a].total_cmp(&u_end[b]))
                    .unwrap_or(0);
                hit_set.push(argmin);
            }
            traj.segments.push(segment);
            traj.nodes.push(Node {
                r: r_alpha,
                u: u_end.clone(),
                du: du_end.clone(),
            });
            return Ok((
                traj,
                ShotOutcome::WallHit {
                    r_alpha,
                    hit_set,
                    u_end,
                    du_end,
                },
            ));
        }

        traj.segments.push(segment);
        traj.nodes.push(Node {
            r: r_new,
            u: y1[..dim].to_vec(),
            du: y1[dim..].to_vec(),
        });
        std::mem::swap(&mut y, &mut y1);
        std::mem::swap(&mut k1, &mut k7);
        r = r_new;
        h = h_next;

        if y[..dim].iter().any(|x| !(x.abs() <= BLOWUP_CAP)) {
            return Ok((traj, ShotOutcome::Blowup { r_stop: r }));
        }
        if final_step {
            return Ok((traj, ShotOutcome::NoHitUpTo { r_max: cfg.r_max }));
        }
    }
}

/// Bisection on `θ ↦ min_i u_i` inside one step, with `g(lo) > 0 >= g(hi)`.
fn localize(
    segment: &Segment,
    mut lo: f64,
    mut hi: f64,
    dim: usize,
    wall_tol: f64,
) -> (f64, Vec<f64>) {
    let mut state = vec![0.0; 2 * dim];
    let g = |theta: f64, state: &mut Vec<f64>| {
        segment.state(theta, state);
        min_u(state, dim)
    };
    let mut g_lo = g(lo, &mut state);
    let mut g_hi = g(hi, &mut state);
    for _ in 0..200 {
        let r = segment.r0 + segment.h * hi;
        let narrow = segment.h * (hi - lo) <= wall_tol * r.max(1.0);
        if narrow && g_lo.abs().min(g_hi.abs()) <= wall_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid, &mut state);
        if g_mid > 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    let theta = if g_hi.abs() <= g_lo.abs() { hi } else { lo };
    segment.state(theta, &mut state);
    (theta, state)
}

/// Max over log-spaced probes of `|u'' + (n-1)/r u' + f(u)|_∞`, with `u''` from
/// fourth-order central differences of the dense `u'`.
pub fn residual(traj: &Trajectory, spec: &SystemSpec, probe_count: usize) -> f64 {
    const REL_STEP: f64 = 1e-3;
    let r_lo = 2.0 * traj.series_end();
    let r_hi = traj.r_end() / (1.0 + 2.5 * REL_STEP);
    if traj.nodes().len() < 2 || r_hi <= r_lo || probe_count == 0 {
        return 0.0;
    }
    let nn = spec.n() as f64;
    let mut worst: f64 = 0.0;
    for k in 0..probe_count {
        let frac = if probe_count == 1 {
            0.5
        } else {
            k as f64 / (probe_count - 1) as f64
        };
        let r = r_lo * (r_hi / r_lo).powf(frac);
        let h = REL_STEP * r;
        let slope_at = |x: f64| traj.eval(x).map(|(_, du)| du);
        let (Some((u, du)), Some(m2), Some(m1), Some(p1), Some(p2)) = (
            traj.eval(r),
            slope_at(r - 2.0 * h),
            slope_at(r - h),
            slope_at(r + h),
            slope_at(r + 2.0 * h),
        ) else {
            continue;
        };
        let Ok(clamped) = spec.clamp(&u, f64::INFINITY) else {
            continue;
        };
        let mut f = vec![0.0; spec.dim()];
        if spec.eval_f_projected(&clamped, &mut f).is_err() {
            return f64::INFINITY;
        }
        for i in 0..spec.dim() {
            let d2 = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
            let res = d2 + (nn - 1.0) / r * du[i] + f[i];
            worst = worst.max(res.abs());
        }
    }
    worst
}
