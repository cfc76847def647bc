//! Dirichlet ball solutions by shooting.
//!
//! Used only as an oracle: subcritical problems have ball solutions whose
//! Pohožaev identities can be checked, while certified-nonexistent systems
//! should leave every search empty-handed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Params;
use crate::integrator::{integrate, ShotConfig, ShotOutcome};
use crate::pohozaev::BallSolution;
use crate::system::SystemSpec;

/// Both components must vanish at `R` to within this multiple of `wall_tol`.
pub const SIMULTANEITY_FACTOR: f64 = 10.0;
/// Relative tolerance on the matched radius.
pub const RADIUS_TOL: f64 = 1e-8;
/// Smallest budget the system search accepts.
pub const MIN_BUDGET: usize = 100;
/// Width of the switch bracket relative to the level.
const SWITCH_TOL: f64 = 1e-13;
/// Level range searched when the caller has no better guess.
pub const DEFAULT_A_RANGE: (f64, f64) = (1e-3, 1e5);
/// Outer iterations on the level before giving up.
const MAX_OUTER: usize = 40;

#[derive(Debug, Clone)]
pub enum DirichletResult {
    Found(BallSolution),
    NotFound {
        best_gap: f64,
        attempts: usize,
        reason: String,
    },
}

impl DirichletResult {
    pub fn is_found(&self) -> bool {
        matches!(self, DirichletResult::Found(_))
    }

    pub fn solution(&self) -> Option<&BallSolution> {
        match self {
            DirichletResult::Found(sol) => Some(sol),
            DirichletResult::NotFound { .. } => None,
        }
    }

    pub fn summary(&self) -> DirichletSummary {
        match self {
            DirichletResult::Found(sol) => {
                let (u, _) = sol
                    .trajectory()
                    .eval(sol.radius())
                    .expect("the ball ends on its trajectory");
                DirichletSummary::Found {
                    radius: sol.radius(),
                    n: sol.n(),
                    alpha: sol.amplitude(),
                    boundary_values: u,
                    boundary_derivatives: sol.boundary_derivatives().to_vec(),
                }
            }
            DirichletResult::NotFound {
                best_gap,
                attempts,
                reason,
            } => DirichletSummary::NotFound {
                best_gap: *best_gap,
                attempts: *attempts,
                reason: reason.clone(),
            },
        }
    }
}

/// Serializable digest of a [`DirichletResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DirichletSummary {
    Found {
        radius: f64,
        n: u32,
        alpha: Vec<f64>,
        boundary_values: Vec<f64>,
        boundary_derivatives: Vec<f64>,
    },
    NotFound {
        best_gap: f64,
        attempts: usize,
        reason: String,
    },
}

fn critical_exponent(n: u32) -> f64 {
    if n > 2 {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

/// `-Δu = u^p` on `B_R`: shoot from `u(0) = 1` and rescale the first zero to `R`
/// with `u_λ(r) = λ^{2/(p-1)} u(λr)`.
pub fn solve_dirichlet_scalar(
    p: f64,
    n: u32,
    radius: f64,
    cfg: &ShotConfig,
) -> Result<DirichletResult> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!(
            "the exponent must exceed 1, got {p}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    cfg.validate()?;
    let crit = critical_exponent(n);
    if p >= crit {
        let kind = if p == crit {
            "critical"
        } else {
            "supercritical"
        };
        return Ok(DirichletResult::NotFound {
            best_gap: f64::INFINITY,
            attempts: 0,
            reason: format!("certified nonexistent: p = {p} is {kind} for n = {n}"),
        });
    }
    let params: Params = [("p".to_string(), p), ("n".to_string(), n as f64)]
        .into_iter()
        .collect();
    let spec = SystemSpec::builtin("lane_emden_scalar", &params)?;
    let (traj, outcome) = integrate(&spec, &[1.0], cfg)?;
    let ShotOutcome::WallHit { r_alpha, .. } = outcome else {
        return Ok(DirichletResult::NotFound {
            best_gap: 1.0,
            attempts: 1,
            reason: format!("the unit shot did not reach zero: {outcome:?}"),
        });
    };
    let lambda = r_alpha / radius;
    let amp = lambda.powf(2.0 / (p - 1.0));
    let tol = SIMULTANEITY_FACTOR * cfg.wall_tol * amp.max(1.0);
    Ok(DirichletResult::Found(BallSolution::new(
        traj.rescaled(lambda, amp),
        tol,
    )?))
}

/// A level's switch point between the two hit indices.
#[derive(Debug, Clone)]
struct Switch {
    /// Best endpoint of the final bracket.
    alpha: Vec<f64>,
    /// Fraction `α₁ / a` at the switch.
    fraction: f64,
    r_hat: f64,
    /// `max_i |u_i(r̂)|` at the best endpoint.
    gap: f64,
    no_hit: bool,
}

struct Search<'a> {
    spec: &'a SystemSpec,
    cfg: &'a ShotConfig,
    budget: usize,
    shots: usize,
}

#[derive(Debug, Clone)]
struct Probe {
    fraction: f64,
    outcome: ShotOutcome,
}

impl Probe {
    fn hit(&self) -> Option<usize> {
        self.outcome.first_hit()
    }

    fn gap(&self) -> f64 {
        match &self.outcome {
            ShotOutcome::WallHit { u_end, .. } => u_end.iter().fold(0.0, |m, x| m.max(x.abs())),
            _ => f64::INFINITY,
        }
    }
}

impl Search<'_> {
    fn probe(&mut self, a: f64, fraction: f64) -> Result<Probe> {
        if self.shots >= self.budget {
            return Err(Error::BudgetExhausted {
                best_alpha: vec![a * fraction, a * (1.0 - fraction)],
                best_value: f64::NAN,
                shots: self.shots,
            });
        }
        self.shots += 1;
        let alpha = [a * fraction, a * (1.0 - fraction)];
        let (_, outcome) = integrate(self.spec, &alpha, self.cfg)?;
        Ok(Probe { fraction, outcome })
    }

    /// Brackets and bisects the hit-index switch on `Σ_a`; `None` when the
    /// hit index never changes.
    fn switch(&mut self, a: f64, hint: Option<f64>) -> Result<Option<Switch>> {
        let no_hit = |p: &Probe| Switch {
            alpha: vec![a * p.fraction, a * (1.0 - p.fraction)],
            fraction: p.fraction,
            r_hat: f64::INFINITY,
            gap: f64::INFINITY,
            no_hit: true,
        };
        let mut bracket = None;
        if let Some(s) = hint {
            for w in [1e-4, 1e-2, 0.1] {
                let lo = self.probe(a, (s - w).max(1e-6))?;
                if !lo.outcome.is_wall_hit() {
                    return Ok(Some(no_hit(&lo)));
                }
                let hi = self.probe(a, (s + w).min(1.0 - 1e-6))?;
                if !hi.outcome.is_wall_hit() {
                    return Ok(Some(no_hit(&hi)));
                }
                if lo.hit() != hi.hit() {
                    bracket = Some((lo, hi));
                    break;
                }
            }
        }
        if bracket.is_none() {
            let mut prev: Option<Probe> = None;
            for j in 1..10 {
                let p = self.probe(a, j as f64 / 10.0)?;
                if !p.outcome.is_wall_hit() {
                    return Ok(Some(no_hit(&p)));
                }
                if let Some(q) = prev.take() {
                    if q.hit() != p.hit() {
                        bracket = Some((q, p));
                        break;
                    }
                }
                prev = Some(p);
            }
        }
        let Some((mut lo, mut hi)) = bracket else {
            return Ok(None);
        };
        while (hi.fraction - lo.fraction) * a > SWITCH_TOL * a {
            let mid = self.probe(a, 0.5 * (lo.fraction + hi.fraction))?;
            if !mid.outcome.is_wall_hit() {
                return Ok(Some(no_hit(&mid)));
            }
            if mid.hit() == lo.hit() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let best = if lo.gap() <= hi.gap() { lo } else { hi };
        Ok(Some(Switch {
            alpha: vec![a * best.fraction, a * (1.0 - best.fraction)],
            fraction: best.fraction,
            r_hat: best.outcome.r_alpha().expect("bracket ends hit the wall"),
            gap: best.gap(),
            no_hit: false,
        }))
    }
}

/// Searches levels `a ∈ a_range` for initial values whose components vanish
/// together at `R`: bisection on the hit-index switch within each level, and
/// a secant in `log a` on `log(r̂/R)` across levels.
///
/// A found ball has the radius `r̂` of its shot, which matches `R` to
/// `RADIUS_TOL`.
pub fn solve_dirichlet_system(
    spec: &SystemSpec,
    a_range: (f64, f64),
    radius: f64,
    cfg: &ShotConfig,
    budget: usize,
) -> Result<DirichletResult> {
    if spec.dim() != 2 {
        return Err(Error::InvalidInput(
            "the system search handles two components".into(),
        ));
    }
    if budget < MIN_BUDGET {
        return Err(Error::InvalidInput(format!(
            "budget must be at least {MIN_BUDGET}"
        )));
    }
    let (a_lo, a_hi) = a_range;
    if !(a_lo > 0.0 && a_hi >= a_lo && a_hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid level range {a_range:?}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    cfg.validate()?;
    let mut search = Search {
        spec,
        cfg,
        budget,
        shots: 0,
    };
    let mut best_gap = f64::INFINITY;
    let not_found = |best_gap: f64, shots: usize, reason: String| {
        Ok(DirichletResult::NotFound {
            best_gap,
            attempts: shots,
            reason,
        })
    };
    let (ln_lo, ln_hi) = (a_lo.ln(), a_hi.ln());
    // (ln a, ln(r̂/R)) of the last two levels
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut hint = None;
    let mut ln_a = 0.5 * (ln_lo + ln_hi);
    for _ in 0..MAX_OUTER {
        let a = ln_a.exp();
        let switch = match search.switch(a, hint) {
            Ok(s) => s,
            Err(Error::BudgetExhausted { shots, .. }) => {
                return not_found(best_gap, shots, "budget exhausted".into());
            }
            Err(e) => return Err(e),
        };
        let Some(sw) = switch else {
            return not_found(
                best_gap,
                search.shots,
                format!("the hit index does not switch on level {a}"),
            );
        };
        if sw.no_hit {
            return not_found(
                best_gap,
                search.shots,
                format!(
                    "the shot at {:?} on the switch stays positive up to r_max",
                    sw.alpha
                ),
            );
        }
        hint = Some(sw.fraction);
        let mismatch = (sw.r_hat / radius).ln();
        best_gap = best_gap.min(sw.gap + (sw.r_hat - radius).abs());
        let vanishes = sw.gap <= SIMULTANEITY_FACTOR * cfg.wall_tol;
        if !vanishes {
            return not_found(
                best_gap,
                search.shots,
                format!(
                    "components do not vanish together at the switch (gap {:e})",
                    sw.gap
                ),
            );
        }
        if (sw.r_hat - radius).abs() <= RADIUS_TOL * radius {
            let (traj, outcome) = integrate(spec, &sw.alpha, cfg)?;
            if !outcome.is_wall_hit() {
                return not_found(
                    best_gap,
                    search.shots,
                    "the final shot did not reproduce its hit".into(),
                );
            }
            let tol = SIMULTANEITY_FACTOR * cfg.wall_tol;
            return match BallSolution::new(traj, tol) {
                Ok(sol) => Ok(DirichletResult::Found(sol)),
                Err(e) => not_found(best_gap, search.shots, e.to_string()),
            };
        }
        history.push((ln_a, mismatch));
        let next = match history.as_slice() {
            [.., (x0, f0), (x1, f1)] if f1 != f0 => x1 - f1 * (x1 - x0) / (f1 - f0),
            // larger levels shrink the first zero; start with a unit step
            _ => ln_a + mismatch.signum(),
        };
        let clamped = next.clamp(ln_lo, ln_hi);
        if clamped == ln_a {
            return not_found(
                best_gap,
                search.shots,
                format!("the matching level lies outside {a_range:?}"),
            );
        }
        ln_a = clamped;
    }
    not_found(
        best_gap,
        search.shots,
        "level iteration did not converge".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(list: &[(&str, f64)]) -> Params {
        list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn scalar_ball_on_the_unit_ball() {
        let cfg = ShotConfig::default();
        let res = solve_dirichlet_scalar(3.0, 3, 1.0, &cfg).unwrap();
        let sol = res
            .solution()
            .expect("subcritical problems have ball solutions");
        assert!((sol.radius() - 1.0).abs() < 1e-12);
        let (u, du) = sol.trajectory().eval(sol.radius()).unwrap();
        assert!(u[0].abs() <= 1e-10);
        assert!(du[0] < 0.0);
    }

    #[test]
    fn critical_scalar_problem_is_refused() {
        let res = solve_dirichlet_scalar(5.0, 3, 1.0, &ShotConfig::default()).unwrap();
        match res {
            DirichletResult::NotFound {
                reason, attempts, ..
            } => {
                assert!(reason.contains("critical"));
                assert_eq!(attempts, 0);
            }
            DirichletResult::Found(_) => panic!("critical problems have no ball solution"),
        }
    }

    #[test]
    fn zero_system_has_no_ball_solution() {
        let zero = SystemSpec::builtin("zero", &Params::new()).unwrap();
        let res =
            solve_dirichlet_system(&zero, (0.1, 10.0), 1.0, &ShotConfig::default(), 200).unwrap();
        assert!(!res.is_found());
    }

    #[test]
    fn diagonal_hls_ball_matches_the_scalar_one() {
        let cfg = ShotConfig::default();
        let hls = SystemSpec::builtin("hls", &ps(&[("p", 3.0)])).unwrap();
        let res = solve_dirichlet_system(&hls, (0.1, 100.0), 1.0, &cfg, 500).unwrap();
        let sol = res
            .solution()
            .unwrap_or_else(|| panic!("{:?}", res.summary()));
        let scalar = solve_dirichlet_scalar(3.0, 3, 1.0, &cfg).unwrap();
        let amp = scalar.solution().unwrap().amplitude()[0];
        for x in sol.amplitude() {
            assert!((x - amp).abs() <= 1e-6 * amp, "{x} vs {amp}");
        }
    }

    #[test]
    fn small_budgets_are_rejected() {
        let zero = SystemSpec::builtin("zero", &Params::new()).unwrap();
        assert!(
            solve_dirichlet_system(&zero, (0.1, 10.0), 1.0, &ShotConfig::default(), 10).is_err()
        );
    }
}
