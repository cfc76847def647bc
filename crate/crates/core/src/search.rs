//! Searching the simplex for ground-state initial values and for preimages
//! of wall points.
//!
//! A ground state never touches the wall, so numerically it shows up as a
//! shot that stays positive up to `r_max` or as wall-hit radii that grow
//! without bound along a shrinking bracket.

use rayon::prelude::*;
use serde::Serialize;

use crate::degree::kuhn_simplices;
use crate::error::{Error, Result};
use crate::integrator::ShotConfig;
use crate::system::SystemSpec;
use crate::target::{pi_map, psi, SimplexPoint, TargetResult};

/// Wall-hit radius from which a candidate counts as a ground state.
pub const R_THRESHOLD: f64 = 50.0;
/// Interior samples used to bracket the hit-index switch when `L = 2`.
pub const COARSE_POINTS: usize = 15;
/// Bracket width, relative to the level, at which bisection stops.
pub const BRACKET_TOL: f64 = 1e-10;
/// Default preimage tolerance, relative to the level.
pub const ONTO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionStep {
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_mid: f64,
    /// Infinite when the midpoint shot never hit.
    pub r_mid: f64,
    pub h_mid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionCandidate {
    pub alpha0: SimplexPoint,
    /// `r_α` at the candidate, or `r_max` when it never hit.
    pub achieved_r: f64,
    /// `Σψ_i(α₀)`, zero when the shot never hit.
    pub score: f64,
    pub no_hit: bool,
    /// Final bracket: the two segment ends for `L = 2`, simplex vertices otherwise.
    pub bracket: Vec<Vec<f64>>,
    pub shots: usize,
    /// Bisection history; empty for the simplicial search.
    pub trace: Vec<BisectionStep>,
}

impl SolutionCandidate {
    pub fn is_ground_state(&self) -> bool {
        self.no_hit || self.achieved_r >= R_THRESHOLD
    }

    pub fn bracket_width(&self) -> f64 {
        let b = &self.bracket;
        let mut w: f64 = 0.0;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                w = w.max(dist(&b[i], &b[j]));
            }
        }
        w
    }
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// One evaluated shot, boundary points included at no cost.
#[derive(Debug, Clone)]
struct Shot {
    point: SimplexPoint,
    result: TargetResult,
}

impl Shot {
    fn score(&self) -> f64 {
        self.result.psi.as_ref().map_or(0.0, |p| p.iter().sum())
    }

    fn achieved_r(&self, cfg: &ShotConfig) -> f64 {
        if self.result.is_no_hit() {
            cfg.r_max
        } else {
            self.result.r_alpha
        }
    }

    fn first_hit(&self) -> Option<usize> {
        self.result.hit_set.first().copied()
    }

    fn uses_shot(&self) -> bool {
        self.result.outcome.is_some()
    }
}

struct Shooter<'a> {
    spec: &'a SystemSpec,
    cfg: &'a ShotConfig,
    budget: usize,
    shots: usize,
}

impl Shooter<'_> {
    fn shoot(&mut self, point: SimplexPoint) -> Result<Shot> {
        let result = psi(self.spec, &point, self.cfg)?;
        if result.outcome.is_some() {
            self.shots += 1;
        }
        Ok(Shot { point, result })
    }

    fn shoot_all(&mut self, points: Vec<SimplexPoint>) -> Result<Vec<Shot>> {
        let (spec, cfg) = (self.spec, self.cfg);
        let shots: Vec<Shot> = points
            .into_par_iter()
            .map(|point| {
                Ok(Shot {
                    result: psi(spec, &point, cfg)?,
                    point,
                })
            })
            .collect::<Result<_>>()?;
        self.shots += shots.iter().filter(|s| s.uses_shot()).count();
        Ok(shots)
    }

    fn exhausted(&self) -> bool {
        self.shots >= self.budget
    }
}

fn candidate(
    shot: &Shot,
    bracket: Vec<Vec<f64>>,
    shots: usize,
    trace: Vec<BisectionStep>,
    cfg: &ShotConfig,
) -> SolutionCandidate {
    SolutionCandidate {
        alpha0: shot.point.clone(),
        achieved_r: shot.achieved_r(cfg),
        score: shot.score(),
        no_hit: shot.result.is_no_hit(),
        bracket,
        shots,
        trace,
    }
}

fn check_level(a: f64, dim: usize) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "level must be positive, got {a}"
        )));
    }
    if dim < 2 {
        return Err(Error::InvalidInput(
            "the simplex search needs at least two components".into(),
        ));
    }
    Ok(())
}

fn segment_point(t: f64, a: f64) -> SimplexPoint {
    SimplexPoint::new(vec![t, a - t], a).expect("t lies in [0, a]")
}

/// Searches `Σ_a` for an initial value whose shot does not hit the wall.
///
/// For two components this bisects on the smallest hit index along
/// `α = (t, a - t)`; otherwise it refines simplices of a coarse lattice
/// toward small `Σψ_i`.
pub fn find_zero(
    spec: &SystemSpec,
    a: f64,
    cfg: &ShotConfig,
    budget: usize,
) -> Result<SolutionCandidate> {
    check_level(a, spec.dim())?;
    cfg.validate()?;
    if spec.dim() == 2 {
        find_zero_segment(spec, a, cfg, budget)
    } else {
        let mut shooter = Shooter {
            spec,
            cfg,
            budget,
            shots: 0,
        };
        simplicial_search(&mut shooter, a, &|s: &Shot| s.score())
    }
}

fn find_zero_segment(
    spec: &SystemSpec,
    a: f64,
    cfg: &ShotConfig,
    budget: usize,
) -> Result<SolutionCandidate> {
    if budget < COARSE_POINTS {
        return Err(Error::InvalidInput(format!(
            "budget must cover the {COARSE_POINTS} coarse shots"
        )));
    }
    let mut shooter = Shooter {
        spec,
        cfg,
        budget,
        shots: 0,
    };
    let mut coarse = Vec::with_capacity(COARSE_POINTS);
    for j in 1..=COARSE_POINTS {
        let shot = shooter.shoot(segment_point(a * j as f64 / (COARSE_POINTS + 1) as f64, a))?;
        if shot.result.is_no_hit() {
            let b = vec![shot.point.alpha().to_vec(); 2];
            return Ok(candidate(&shot, b, shooter.shots, Vec::new(), cfg));
        }
        coarse.push(shot);
    }
    // among the switching neighbours take the pair with the largest radii
    let (lo, hi) = coarse
        .windows(2)
        .filter(|w| w[0].first_hit() != w[1].first_hit())
        .max_by(|x, y| {
            let rx = x[0].result.r_alpha + x[1].result.r_alpha;
            let ry = y[0].result.r_alpha + y[1].result.r_alpha;
            rx.total_cmp(&ry)
        })
        .map(|w| (w[0].clone(), w[1].clone()))
        .ok_or(Error::NoSwitchFound)?;
    let h_lo = lo.first_hit();
    let (mut t_lo, mut t_hi) = (lo.point.alpha()[0], hi.point.alpha()[0]);
    let mut best = if lo.result.r_alpha >= hi.result.r_alpha {
        lo
    } else {
        hi
    };
    let mut trace = Vec::new();
    loop {
        let t_mid = 0.5 * (t_lo + t_hi);
        let mid = shooter.shoot(segment_point(t_mid, a))?;
        let bracket = vec![
            segment_point(t_lo, a).alpha().to_vec(),
            segment_point(t_hi, a).alpha().to_vec(),
        ];
        trace.push(BisectionStep {
            t_lo,
            t_hi,
            t_mid,
            r_mid: mid.result.r_alpha,
            h_mid: mid.first_hit(),
        });
        if mid.result.is_no_hit() {
            return Ok(candidate(&mid, bracket, shooter.shots, trace, cfg));
        }
        if mid.first_hit() == h_lo {
            t_lo = t_mid;
        } else {
            t_hi = t_mid;
        }
        if t_hi - t_lo <= BRACKET_TOL * a {
            let bracket = vec![
                segment_point(t_lo, a).alpha().to_vec(),
                segment_point(t_hi, a).alpha().to_vec(),
            ];
            let centre = shooter.shoot(segment_point(0.5 * (t_lo + t_hi), a))?;
            return Ok(candidate(&centre, bracket, shooter.shots, trace, cfg));
        }
        if mid.result.r_alpha > best.result.r_alpha {
            best = mid;
        }
        if shooter.exhausted() {
            return Err(Error::BudgetExhausted {
                best_alpha: best.point.alpha().to_vec(),
                best_value: best.score(),
                shots: shooter.shots,
            });
        }
    }
}

/// Longest-edge bisection from the three best cells of a coarse lattice,
/// minimizing `score`; a shot that never hits ends the search.
fn simplicial_search(
    shooter: &mut Shooter,
    a: f64,
    score: &dyn Fn(&Shot) -> f64,
) -> Result<SolutionCandidate> {
    let dim = shooter.spec.dim();
    let d = dim - 1;
    let mut k = 2;
    while binomial(k + 1 + d, d) <= shooter.budget / 2 {
        k += 1;
    }
    let lattice_cells = kuhn_simplices(d, k);
    let mut lattice: Vec<Vec<usize>> = lattice_cells.iter().flatten().cloned().collect();
    lattice.sort();
    lattice.dedup();
    let points: Vec<SimplexPoint> = lattice
        .iter()
        .map(|m| SimplexPoint::normalized(&m.iter().map(|&x| x as f64).collect::<Vec<_>>(), a))
        .collect::<Result<_>>()?;
    let evaluated = shooter.shoot_all(points)?;
    if let Some(hit) = evaluated.iter().find(|s| s.result.is_no_hit()) {
        let b = vec![hit.point.alpha().to_vec()];
        return Ok(candidate(hit, b, shooter.shots, Vec::new(), shooter.cfg));
    }
    let lookup = |m: &Vec<usize>| {
        &evaluated[lattice
            .binary_search(m)
            .expect("cell vertices are lattice points")]
    };
    let mut cells: Vec<(f64, Vec<Shot>)> = lattice_cells
        .iter()
        .map(|cell| {
            let verts: Vec<Shot> = cell.iter().map(|m| lookup(m).clone()).collect();
            (verts.iter().map(score).fold(f64::INFINITY, f64::min), verts)
        })
        .collect();
    cells.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut best: Option<(f64, Shot, Vec<Vec<f64>>)> = None;
    for (_, start) in cells.into_iter().take(3) {
        let mut verts = start;
        loop {
            let (i, j, len) = longest_edge(&verts);
            if len <= BRACKET_TOL * a {
                break;
            }
            if shooter.exhausted() {
                let (value, shot, _) = best.clone().unwrap_or_else(|| best_vertex(&verts, score));
                return Err(Error::BudgetExhausted {
                    best_alpha: shot.point.alpha().to_vec(),
                    best_value: value,
                    shots: shooter.shots,
                });
            }
            let w: Vec<f64> = verts[i]
                .point
                .alpha()
                .iter()
                .zip(verts[j].point.alpha())
                .map(|(x, y)| 0.5 * (x + y))
                .collect();
            let mid = shooter.shoot(SimplexPoint::normalized(&w, a)?)?;
            if mid.result.is_no_hit() {
                let b = verts.iter().map(|s| s.point.alpha().to_vec()).collect();
                return Ok(candidate(&mid, b, shooter.shots, Vec::new(), shooter.cfg));
            }
            // keep the half holding the better endpoint of the split edge
            let drop = if score(&verts[i]) <= score(&verts[j]) {
                j
            } else {
                i
            };
            verts[drop] = mid;
        }
        let (value, shot, bracket) = best_vertex(&verts, score);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, shot, bracket));
        }
    }
    let (_, shot, bracket) = best.expect("at least one coarse cell exists");
    Ok(candidate(
        &shot,
        bracket,
        shooter.shots,
        Vec::new(),
        shooter.cfg,
    ))
}

fn best_vertex(verts: &[Shot], score: &dyn Fn(&Shot) -> f64) -> (f64, Shot, Vec<Vec<f64>>) {
    let shot = verts
        .iter()
        .min_by(|x, y| score(x).total_cmp(&score(y)))
        .expect("simplices have vertices")
        .clone();
    (
        score(&shot),
        shot,
        verts.iter().map(|s| s.point.alpha().to_vec()).collect(),
    )
}

fn longest_edge(verts: &[Shot]) -> (usize, usize, f64) {
    let mut out = (0, 1, -1.0);
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let len = dist(verts[i].point.alpha(), verts[j].point.alpha());
            if len > out.2 {
                out = (i, j, len);
            }
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OntoWitness {
    pub alpha: SimplexPoint,
    /// `ψ(α)`, with shots that never hit read as the wall origin.
    pub psi: Vec<f64>,
    /// `|ψ(α) - target|_∞`.
    pub residual: f64,
    pub shots: usize,
}

/// Finds `α ∈ Σ_a` with `|ψ(α) - target|_∞ ≤ tol` for a wall point `target ∈ B_a`.
pub fn onto_witness(
    spec: &SystemSpec,
    a: f64,
    target: &[f64],
    cfg: &ShotConfig,
    budget: usize,
    tol: f64,
) -> Result<OntoWitness> {
    check_level(a, spec.dim())?;
    cfg.validate()?;
    if target.len() != spec.dim() {
        return Err(Error::InvalidInput("target dimension mismatch".into()));
    }
    let min = target.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 || min > cfg.wall_tol || target.iter().sum::<f64>() > a + crate::target::LEVEL_TOL
    {
        return Err(Error::InvalidInput(format!(
            "{target:?} is not a wall point of level at most {a}"
        )));
    }
    let mut shooter = Shooter {
        spec,
        cfg,
        budget,
        shots: 0,
    };
    let image = |s: &Shot| {
        s.result
            .psi
            .clone()
            .unwrap_or_else(|| vec![0.0; target.len()])
    };
    let witness = |s: &Shot, shots: usize| {
        let psi = image(s);
        OntoWitness {
            alpha: s.point.clone(),
            residual: dist(&psi, target),
            psi,
            shots,
        }
    };
    // ψ fixes the relative boundary of the simplex
    let goal = pi_map(target, a)?;
    if goal.on_boundary(cfg.wall_tol) {
        let shot = shooter.shoot(goal)?;
        return Ok(witness(&shot, shooter.shots));
    }
    if spec.dim() > 2 {
        let score = |s: &Shot| dist(&image(s), target);
        let c = simplicial_search(&mut shooter, a, &score)?;
        let shot = shooter.shoot(c.alpha0)?;
        let w = witness(&shot, shooter.shots);
        return if w.residual <= tol {
            Ok(w)
        } else {
            Err(Error::BudgetExhausted {
                best_alpha: w.alpha.alpha().to_vec(),
                best_value: w.residual,
                shots: w.shots,
            })
        };
    }
    // φ₁ runs from 0 at t = 0 to a at t = a; bisect on φ₁ - π(target)₁
    let y1 = goal.alpha()[0];
    let (mut t_lo, mut t_hi) = (0.0, a);
    let mut best: Option<OntoWitness> = None;
    while shooter.shots < budget && t_hi - t_lo > 1e-15 * a {
        let t = 0.5 * (t_lo + t_hi);
        let shot = shooter.shoot(segment_point(t, a))?;
        let w = witness(&shot, shooter.shots);
        if w.residual <= tol {
            return Ok(w);
        }
        let phi1 = pi_map(&w.psi, a)?.alpha()[0];
        if phi1 < y1 {
            t_lo = t;
        } else {
            t_hi = t;
        }
        if best.as_ref().is_none_or(|b| w.residual < b.residual) {
            best = Some(w);
        }
    }
    let best = best.expect("the bisection takes at least one shot");
    Err(Error::BudgetExhausted {
        best_alpha: best.alpha.alpha().to_vec(),
        best_value: best.residual,
        shots: shooter.shots,
    })
}
