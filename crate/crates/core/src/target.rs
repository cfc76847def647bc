//! The target map on the simplex of initial values.
//!
//! For `a > 0` the simplex is `Σ_a = {α ≥ 0 : Σα_i = a}` and the wall set is
//! `B_a = {β ∈ ∂R^L_+ : Σβ_i ≤ a}`. Interior initial values are sent to the
//! point where their shot first touches the wall; boundary initial values are
//! fixed. The retraction `pi_map` pushes `B_a` back onto `Σ_a` along the
//! diagonal, and `phi = pi_map ∘ psi` is the simplex self-map whose degree
//! drives the existence argument.
//!
//! All neighbourhoods and deviations use the max-norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::ControlEntry;
use crate::error::{Error, Result};
use crate::integrator::{integrate, ShotConfig, ShotOutcome};
use crate::system::SystemSpec;

/// Tolerance on `Σβ_i ≤ a` for wall points.
pub const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint {
    alpha: Vec<f64>,
    level: f64,
}

impl SimplexPoint {
    /// Validates `alpha ≥ 0` and `|Σα_i - a| ≤ 1e-12·a`.
    pub fn new(alpha: Vec<f64>, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "simplex level must be positive, got {level}"
            )));
        }
        if alpha.is_empty() || alpha.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "{alpha:?} is not in the closed orthant"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - level).abs() > 1e-12 * level {
            return Err(Error::InvalidInput(format!(
                "{alpha:?} sums to {sum}, not to the level {level}"
            )));
        }
        Ok(SimplexPoint { alpha, level })
    }

    /// Rescales a nonnegative vector onto `Σ_a`.
    pub fn normalized(weights: &[f64], level: f64) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput(
                "weights must have a positive sum".into(),
            ));
        }
        let mut alpha: Vec<f64> = weights.iter().map(|w| w * level / sum).collect();
        // absorb rounding in the largest coordinate
        let excess = alpha.iter().sum::<f64>() - level;
        if let Some(max) = alpha.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *max -= excess;
        }
        SimplexPoint::new(alpha, level)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// On the relative boundary of the simplex, i.e. on the wall.
    pub fn on_boundary(&self, wall_tol: f64) -> bool {
        self.alpha.iter().any(|&x| x <= wall_tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetResult {
    /// The wall point, or `None` when the shot stayed positive up to `r_max`.
    pub psi: Option<Vec<f64>>,
    /// `0` for boundary initial values, infinite for no hit.
    pub r_alpha: f64,
    pub hit_set: Vec<usize>,
    /// `None` for boundary initial values, where no shot is taken.
    pub outcome: Option<ShotOutcome>,
}

impl TargetResult {
    pub fn is_no_hit(&self) -> bool {
        self.psi.is_none()
    }

    /// Bit `i` set when component `i` is in the hit set.
    pub fn hit_mask(&self) -> u64 {
        self.hit_set.iter().fold(0, |m, &i| m | (1u64 << i))
    }
}

/// Where the shot from `p` first meets the wall.
pub fn psi(spec: &SystemSpec, p: &SimplexPoint, cfg: &ShotConfig) -> Result<TargetResult> {
    if p.dim() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "simplex point has {} coordinates, system has {}",
            p.dim(),
            spec.dim()
        )));
    }
    if p.on_boundary(cfg.wall_tol) {
        return Ok(TargetResult {
            psi: Some(p.alpha.clone()),
            r_alpha: 0.0,
            hit_set: (0..p.dim())
                .filter(|&i| p.alpha[i] <= cfg.wall_tol)
                .collect(),
            outcome: None,
        });
    }
    let (_, outcome) = integrate(spec, &p.alpha, cfg)?;
    match &outcome {
        ShotOutcome::WallHit {
            r_alpha,
            hit_set,
            u_end,
            ..
        } => Ok(TargetResult {
            psi: Some(u_end.iter().map(|&x| x.max(0.0)).collect()),
            r_alpha: *r_alpha,
            hit_set: hit_set.clone(),
            outcome: Some(outcome),
        }),
        ShotOutcome::NoHitUpTo { .. } => Ok(TargetResult {
            psi: None,
            r_alpha: f64::INFINITY,
            hit_set: Vec::new(),
            outcome: Some(outcome),
        }),
        ShotOutcome::Blowup { r_stop } => Err(Error::Blowup { r_stop: *r_stop }),
        ShotOutcome::StepLimit { r_stop } => Err(Error::StepLimit { r_stop: *r_stop }),
    }
}

/// `β + (a - Σβ_i)/L · (1, …, 1)`.
pub fn pi_map(beta: &[f64], level: f64) -> Result<SimplexPoint> {
    let sum: f64 = beta.iter().sum();
    if beta.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "{beta:?} is not in the closed orthant"
        )));
    }
    if sum > level + LEVEL_TOL {
        return Err(Error::InvalidInput(format!(
            "{beta:?} sums to {sum} > {level}"
        )));
    }
    let shift = (level - sum) / beta.len() as f64;
    SimplexPoint::normalized(&beta.iter().map(|x| x + shift).collect::<Vec<_>>(), level)
}

/// `α - min_i α_i · (1, …, 1)`.
pub fn pi_inverse(p: &SimplexPoint) -> Vec<f64> {
    let min = p.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    p.alpha.iter().map(|x| x - min).collect()
}

/// `pi_map(psi(p))`; `None` when the shot never hits.
pub fn phi(spec: &SystemSpec, p: &SimplexPoint, cfg: &ShotConfig) -> Result<Option<SimplexPoint>> {
    if p.on_boundary(cfg.wall_tol) {
        return Ok(Some(p.clone()));
    }
    let target = psi(spec, p, cfg)?;
    target.psi.map(|beta| pi_map(&beta, p.level)).transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicEstimateReport {
    pub ok: bool,
    /// `max M(α) / δ` over the accepted samples.
    pub worst_ratio: f64,
    /// `2(3+L)C`, the constant in the claimed bound.
    pub bound_claim: f64,
    /// `(3+C)L`, the constant the estimate chain arrives at.
    pub bound_chain: f64,
    pub ratio_to_claim: f64,
    pub ratio_to_chain: f64,
    /// Whether `C ≥ 1` and `δ < δ₀ / (2(3+L)C)`; reported, not enforced.
    pub hypothesis_met: bool,
    pub samples: usize,
    pub skipped: usize,
}

/// Samples `α ∈ Σ_a` within `delta` of the wall point `entry.base_point` and
/// measures the largest excursion `sup_r |u(r, α) - ᾱ|` up to the wall hit.
pub fn dynamic_estimate_check(
    spec: &SystemSpec,
    entry: &ControlEntry,
    delta: f64,
    samples: usize,
    seed: u64,
    cfg: &ShotConfig,
) -> Result<DynamicEstimateReport> {
    let abar = &entry.base_point;
    let dim = spec.dim();
    if abar.len() != dim {
        return Err(Error::InvalidInput("base point dimension mismatch".into()));
    }
    let zeros = abar.iter().filter(|&&x| x == 0.0).count();
    if zeros == 0 || zeros == dim {
        return Err(Error::InvalidBoundaryPoint(format!(
            "{abar:?} needs between 1 and L-1 zeros"
        )));
    }
    if !(delta > 0.0) || samples == 0 {
        return Err(Error::InvalidInput(
            "need delta > 0 and at least one sample".into(),
        ));
    }
    let level: f64 = abar.iter().sum();
    let c = entry.c_est;
    let l = dim as f64;
    let bound_claim = 2.0 * (3.0 + l) * c;
    let bound_chain = (3.0 + c) * l;
    let bound = bound_claim.max(bound_chain);
    let hypothesis_met = c >= 1.0 && delta < entry.delta0 / bound_claim;

    let alphas = sample_near(abar, level, delta, samples, seed)?;
    let excursions: Vec<Option<f64>> = alphas
        .par_iter()
        .map(|alpha| -> Result<Option<f64>> {
            let (traj, outcome) = integrate(spec, alpha, cfg)?;
            if !outcome.is_wall_hit() {
                return Ok(None);
            }
            let start = alpha
                .iter()
                .zip(abar)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(Some(traj.nodes().iter().fold(start, |m, node| {
                node.u
                    .iter()
                    .zip(abar)
                    .map(|(u, b)| (u - b).abs())
                    .fold(m, f64::max)
            })))
        })
        .collect::<Result<_>>()?;
    let skipped = excursions.iter().filter(|e| e.is_none()).count();
    let worst = excursions.iter().flatten().copied().fold(0.0, f64::max);
    let worst_ratio = worst / delta;
    Ok(DynamicEstimateReport {
        ok: worst <= bound * delta,
        worst_ratio,
        bound_claim,
        bound_chain,
        ratio_to_claim: worst_ratio / bound_claim,
        ratio_to_chain: worst_ratio / bound_chain,
        hypothesis_met,
        samples: alphas.len(),
        skipped,
    })
}

/// Interior simplex points within max-norm distance `delta` of `abar`.
fn sample_near(
    abar: &[f64],
    level: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let dim = abar.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    let mut attempts = 0usize;
    while out.len() < samples {
        attempts += 1;
        if attempts > 1000 * samples {
            return Err(Error::InvalidInput(format!(
                "could not sample interior simplex points within {delta} of {abar:?}"
            )));
        }
        let mut d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-delta..=delta)).collect();
        let mean = d.iter().sum::<f64>() / dim as f64;
        d.iter_mut().for_each(|x| *x -= mean);
        let alpha: Vec<f64> = abar.iter().zip(&d).map(|(b, x)| b + x).collect();
        if d.iter().all(|x| x.abs() <= delta) && alpha.iter().all(|&x| x > 0.0) {
            // re-level against rounding
            let sum: f64 = alpha.iter().sum();
            out.push(alpha.iter().map(|x| x * level / sum).collect());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transversality {
    /// `Σ_{i ∈ hit set} u_i'(r_α)`.
    pub omega_slope: f64,
    pub transversal: bool,
    pub slope_tol: f64,
}

/// Slope of the hit-set sum at the wall; transversal when clearly negative.
pub fn transversality_check(
    spec: &SystemSpec,
    p: &SimplexPoint,
    cfg: &ShotConfig,
) -> Result<Transversality> {
    if p.on_boundary(cfg.wall_tol) {
        return Err(Error::NotAWallHit);
    }
    let (_, outcome) = integrate(spec, p.alpha(), cfg)?;
    let ShotOutcome::WallHit {
        r_alpha,
        hit_set,
        du_end,
        ..
    } = outcome
    else {
        return Err(Error::NotAWallHit);
    };
    let omega_slope: f64 = hit_set.iter().map(|&i| du_end[i]).sum();
    let slope_tol = 1e-8 * (p.level() / r_alpha).max(1.0);
    Ok(Transversality {
        omega_slope,
        transversal: omega_slope < -slope_tol,
        slope_tol,
    })
}

/// `psi` over many points, in parallel and in input order.
pub fn sweep(
    spec: &SystemSpec,
    points: &[SimplexPoint],
    cfg: &ShotConfig,
) -> Result<Vec<TargetResult>> {
    points.par_iter().map(|p| psi(spec, p, cfg)).collect()
}
