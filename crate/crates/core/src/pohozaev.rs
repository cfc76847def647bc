//! Rellich–Pohožaev identities on radial ball solutions, and the
//! nonexistence certificates they imply.
//!
//! Radial reductions used throughout: `x·∇u = r u'`, `∇u·∇v = u'v'`,
//! `Δu = u'' + (n-1)/r u'`, and on `∂B_R` the weight `x·ν = R`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Params;
use crate::integrator::{residual, Trajectory};
use crate::quadrature::{radial_integral_pieces, sphere_area, Quadrature};
use crate::sampling::Halton;
use crate::system::{PotentialKind, SystemSpec};

/// Equation residual a ball solution must meet before an identity is checked.
pub const EQUATION_TOL: f64 = 1e-4;
/// Residual probes per solution.
const PROBES: usize = 400;
/// Combination parameter of the merged identities.
pub const DEFAULT_THETA: f64 = 0.5;

/// A positive radial solution on `B_R` vanishing on the sphere.
#[derive(Debug, Clone)]
pub struct BallSolution {
    radius: f64,
    trajectory: Trajectory,
    boundary_derivatives: Vec<f64>,
}

impl BallSolution {
    /// Takes the trajectory's end as `R` and checks `|u_i(R)| ≤ boundary_tol`
    /// and positivity of every node before `R - boundary_tol`.
    pub fn new(trajectory: Trajectory, boundary_tol: f64) -> Result<Self> {
        let radius = trajectory.r_end();
        let (u, du) = trajectory
            .eval(radius)
            .ok_or_else(|| Error::NotADirichletSolution("empty trajectory".into()))?;
        if u.iter().any(|x| x.abs() > boundary_tol) {
            return Err(Error::NotADirichletSolution(format!(
                "u(R) = {u:?} at R = {radius}"
            )));
        }
        let inside = trajectory
            .nodes()
            .iter()
            .filter(|node| node.r < radius - boundary_tol);
        if let Some(node) = inside
            .into_iter()
            .find(|node| node.u.iter().any(|&x| x <= 0.0))
        {
            return Err(Error::NotADirichletSolution(format!(
                "not positive at r = {}",
                node.r
            )));
        }
        Ok(BallSolution {
            radius,
            trajectory,
            boundary_derivatives: du,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n(&self) -> u32 {
        self.trajectory.n()
    }

    pub fn dim(&self) -> usize {
        self.trajectory.dim()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// `u_i'(R)`.
    pub fn boundary_derivatives(&self) -> &[f64] {
        &self.boundary_derivatives
    }

    /// Largest value of each component, attained at the origin.
    pub fn amplitude(&self) -> Vec<f64> {
        self.trajectory.alpha().to_vec()
    }

    fn value(&self, r: f64) -> (Vec<f64>, Vec<f64>) {
        self.trajectory
            .eval(r.min(self.radius))
            .expect("quadrature nodes lie inside the ball")
    }

    fn laplacian(&self, r: f64) -> Vec<f64> {
        let r = r.min(self.radius);
        let (_, du) = self.value(r);
        let d2 = self
            .trajectory
            .second_derivative(r)
            .expect("quadrature nodes lie inside the ball");
        let k = (self.n() as f64 - 1.0) / r;
        d2.iter().zip(&du).map(|(a, b)| a + k * b).collect()
    }

    /// `σ_{n-1} ∫₀^R g(r) r^{n-1} dr` split at the trajectory's steps.
    fn integral(&self, g: &dyn Fn(f64) -> f64) -> Result<Quadrature> {
        let mut breaks: Vec<f64> = self
            .trajectory
            .breakpoints()
            .into_iter()
            .filter(|&r| r < self.radius)
            .collect();
        breaks.push(self.radius);
        radial_integral_pieces(g, self.n(), &breaks)
    }

    /// `σ_{n-1} R^n`, the weight of a boundary term `∫_{∂B} (x·ν) c dσ`.
    fn boundary_weight(&self) -> f64 {
        sphere_area(self.n()) * self.radius.powi(self.n() as i32)
    }

    /// Index pair for two-component identities; a scalar solution is read as `u = v`.
    fn pair(&self) -> Result<(usize, usize)> {
        match self.dim() {
            1 => Ok((0, 0)),
            2 => Ok((0, 1)),
            d => Err(Error::InvalidInput(format!(
                "identity needs one or two components, got {d}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity_name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, 1e-30)`.
    pub residual: f64,
    pub quadrature_error_estimate: f64,
    /// Equation residual of the solution, when it was checked first.
    pub equation_residual: Option<f64>,
}

impl IdentityReport {
    fn new(
        name: &str,
        lhs: f64,
        rhs: f64,
        quad_error: f64,
        equation_residual: Option<f64>,
    ) -> Self {
        IdentityReport {
            identity_name: name.to_string(),
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-30),
            quadrature_error_estimate: quad_error,
            equation_residual,
        }
    }
}

/// `n/(p+1) - (n-2)/2`.
pub fn pohozaev_coefficient(n: u32, p: f64) -> f64 {
    let n = n as f64;
    n / (p + 1.0) - (n - 2.0) / 2.0
}

fn checked_residual(sol: &BallSolution, spec: &SystemSpec) -> Result<f64> {
    if spec.n() != sol.n() || spec.dim() != sol.dim() {
        return Err(Error::InvalidInput(
            "system and solution disagree on n or L".into(),
        ));
    }
    let res = residual(sol.trajectory(), spec, PROBES);
    let scale = sol.amplitude().iter().copied().fold(1.0, f64::max);
    if res <= EQUATION_TOL * scale {
        Ok(res)
    } else {
        Err(Error::NotADirichletSolution(format!(
            "equation residual {res:e} exceeds {EQUATION_TOL:e}"
        )))
    }
}

fn params(list: &[(&str, f64)]) -> Params {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `(n/(p+1) - (n-2)/2) ∫ u^{p+1} = ½ ∫_{∂B} (x·ν) u_ν²` for `-Δu = u^p`.
pub fn verify_scalar_identity(sol: &BallSolution, p: f64) -> Result<IdentityReport> {
    if sol.dim() != 1 {
        return Err(Error::InvalidInput(
            "the scalar identity needs a one-component solution".into(),
        ));
    }
    let spec = SystemSpec::builtin(
        "lane_emden_scalar",
        &params(&[("p", p), ("n", sol.n() as f64)]),
    )?;
    let eq = checked_residual(sol, &spec)?;
    let q = sol.integral(&|r| sol.value(r).0[0].max(0.0).powf(p + 1.0))?;
    let c = pohozaev_coefficient(sol.n(), p);
    let du = sol.boundary_derivatives()[0];
    Ok(IdentityReport::new(
        "scalar_pohozaev",
        c * q.value,
        0.5 * sol.boundary_weight() * du * du,
        c.abs() * q.error,
        Some(eq),
    ))
}

/// The Rellich form for one component together with its gradient energy
/// `σ ∫ u'² r^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RellichReport {
    pub identity: IdentityReport,
    pub gradient_energy: f64,
}

/// `∫ Δu (x·∇u) = (n-2)/2 ∫ |∇u|² + ½ ∫_{∂B} (x·ν)|∇u|²`, no equation needed.
pub fn verify_rellich_identity(sol: &BallSolution, component: usize) -> Result<RellichReport> {
    if component >= sol.dim() {
        return Err(Error::InvalidInput(format!("no component {component}")));
    }
    let i = component;
    let work = sol.integral(&|r| sol.laplacian(r)[i] * r * sol.value(r).1[i])?;
    let energy = sol.integral(&|r| sol.value(r).1[i].powi(2))?;
    let n = sol.n() as f64;
    let du = sol.boundary_derivatives()[i];
    Ok(RellichReport {
        identity: IdentityReport::new(
            "rellich",
            work.value,
            0.5 * (n - 2.0) * energy.value + 0.5 * sol.boundary_weight() * du * du,
            work.error + 0.5 * (n - 2.0) * energy.error,
            None,
        ),
        gradient_energy: energy.value,
    })
}

/// `∫ Δu(x·∇v) + Δv(x·∇u) - (n-2)∇u·∇v = ∫_{∂B} (x·ν) u_ν v_ν`.
pub fn verify_cross_identity(sol: &BallSolution) -> Result<IdentityReport> {
    let (i, j) = sol.pair()?;
    let nn = sol.n() as f64;
    let q = sol.integral(&|r| {
        let (_, du) = sol.value(r);
        let lap = sol.laplacian(r);
        lap[i] * r * du[j] + lap[j] * r * du[i] - (nn - 2.0) * du[i] * du[j]
    })?;
    let d = sol.boundary_derivatives();
    Ok(IdentityReport::new(
        "cross_rellich",
        q.value,
        sol.boundary_weight() * d[i] * d[j],
        q.error,
        None,
    ))
}

/// The two sign-changing systems whose sources merge into one identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MergedKind {
    /// `-Δu = v^p - u^p`, `-Δv = u^p`.
    SignChanging { p: f64 },
    /// `-Δu = v^p + v^q - u^p`, `-Δv = u^p`.
    SignChangingPq { p: f64, q: f64 },
}

impl MergedKind {
    pub fn from_spec(spec: &SystemSpec) -> Option<Self> {
        let p = spec.param("p")?;
        match spec.name() {
            "sign_changing" => Some(MergedKind::SignChanging { p }),
            "sign_changing_pq" => Some(MergedKind::SignChangingPq {
                p,
                q: spec.param("q")?,
            }),
            _ => None,
        }
    }

    fn system(&self, n: u32) -> Result<SystemSpec> {
        let n = n as f64;
        match *self {
            MergedKind::SignChanging { p } => {
                SystemSpec::builtin("sign_changing", &params(&[("p", p), ("n", n)]))
            }
            MergedKind::SignChangingPq { p, q } => {
                SystemSpec::builtin("sign_changing_pq", &params(&[("p", p), ("q", q), ("n", n)]))
            }
        }
    }
}

/// Merged identity with `θ = ½`, after checking that `sol` solves the system.
pub fn verify_merged_identity(sol: &BallSolution, kind: MergedKind) -> Result<IdentityReport> {
    verify_merged_identity_theta(sol, kind, DEFAULT_THETA)
}

/// Merged identity for any `θ ∈ [0, 1]`; the gradient term
/// `(n-2)(θ-½)∫|∇v|²` that `θ = ½` cancels is kept on the left.
pub fn verify_merged_identity_theta(
    sol: &BallSolution,
    kind: MergedKind,
    theta: f64,
) -> Result<IdentityReport> {
    if sol.dim() != 2 {
        return Err(Error::InvalidInput(
            "the merged identity needs a two-component solution".into(),
        ));
    }
    let eq = checked_residual(sol, &kind.system(sol.n())?)?;
    let mut report = merged_identity_terms(sol, kind, theta)?;
    report.equation_residual = Some(eq);
    Ok(report)
}

/// Both sides of the merged identity without checking the equation, so any
/// profile can be fed through the quadrature.
pub fn merged_identity_terms(
    sol: &BallSolution,
    kind: MergedKind,
    theta: f64,
) -> Result<IdentityReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    let (i, j) = sol.pair()?;
    let nn = sol.n() as f64;
    let (p, q) = match kind {
        MergedKind::SignChanging { p } => (p, None),
        MergedKind::SignChangingPq { p, q } => (p, Some(q)),
    };
    let quad = sol.integral(&|r| {
        let (u, du) = sol.value(r);
        let (x, y) = (u[i].max(0.0), u[j].max(0.0));
        let (xp, yp) = (x.powf(p + 1.0), y.powf(p + 1.0));
        let yq = q.map_or(0.0, |q| y.powf(q + 1.0));
        let source = nn / (p + 1.0) * (xp + yp) + q.map_or(0.0, |q| nn / (q + 1.0) * yq);
        let energy = theta * xp + (1.0 - theta) * (yp + yq) + (theta - 0.5) * du[j] * du[j];
        source - (nn - 2.0) * energy
    })?;
    let d = sol.boundary_derivatives();
    let name = match kind {
        MergedKind::SignChanging { .. } => "merged_sign_changing",
        MergedKind::SignChangingPq { .. } => "merged_sign_changing_pq",
    };
    Ok(IdentityReport::new(
        name,
        quad.value,
        sol.boundary_weight() * (d[i] * d[j] + 0.5 * d[j] * d[j]),
        quad.error,
        None,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certificate {
    Certified { lemma: String, reason: String },
    Inconclusive { reason: String },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }

    /// One-line human-readable form.
    pub fn text(&self) -> String {
        match self {
            Certificate::Certified { lemma, reason } => {
                format!("Certified — Lemma: {lemma}, {reason}")
            }
            Certificate::Inconclusive { reason } => format!("Inconclusive — {reason}"),
        }
    }
}

/// Prints coefficients exactly when they are simple, e.g. `0`.
fn coeff(x: f64) -> String {
    let rounded = (x * 1e12).round() / 1e12;
    format!("{rounded}")
}

/// Samples used for the potential condition.
pub const POTENTIAL_SAMPLES: usize = 20_000;
/// Sampling box `(0, POTENTIAL_BOX]^L` for the potential condition.
pub const POTENTIAL_BOX: f64 = 10.0;

/// Decides whether a Pohožaev-type argument rules out Dirichlet solutions on
/// every ball.
pub fn nonexistence_certificate(spec: &SystemSpec) -> Result<Certificate> {
    let n = spec.n();
    let crit = if n > 2 {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    } else {
        f64::INFINITY
    };
    let unsupported = || Error::UnsupportedSystem(spec.name().to_string());
    match spec.name() {
        "sign_changing" | "lane_emden_scalar" => {
            let p = spec.param("p").ok_or_else(unsupported)?;
            let c = pohozaev_coefficient(n, p);
            let lemma = if spec.name() == "sign_changing" {
                "sign-changing merged identity"
            } else {
                "scalar Pohozaev identity"
            };
            if p >= crit {
                Ok(Certificate::Certified {
                    lemma: lemma.into(),
                    reason: format!("coefficient n/(p+1)−(n−2)/2 = {}", coeff(c)),
                })
            } else {
                Ok(Certificate::Inconclusive {
                    reason: format!(
                        "p = {p} is below the critical exponent (n+2)/(n−2) = {}; coefficient n/(p+1)−(n−2)/2 = {} > 0",
                        coeff(crit),
                        coeff(c)
                    ),
                })
            }
        }
        "sign_changing_pq" => {
            let p = spec.param("p").ok_or_else(unsupported)?;
            let q = spec.param("q").ok_or_else(unsupported)?;
            let (cp, cq) = (pohozaev_coefficient(n, p), pohozaev_coefficient(n, q));
            if p >= crit && q >= crit {
                Ok(Certificate::Certified {
                    lemma: "sign-changing merged identity with two exponents".into(),
                    reason: format!(
                        "coefficients n/(p+1)−(n−2)/2 = {} and n/(q+1)−(n−2)/2 = {}",
                        coeff(cp),
                        coeff(cq)
                    ),
                })
            } else {
                Ok(Certificate::Inconclusive {
                    reason: format!(
                        "p = {p} and q = {q} must both reach (n+2)/(n−2) = {}",
                        coeff(crit)
                    ),
                })
            }
        }
        _ => potential_certificate(spec),
    }
}

fn potential_certificate(spec: &SystemSpec) -> Result<Certificate> {
    let kind = spec
        .potential_kind()
        .ok_or_else(|| Error::UnsupportedSystem(spec.name().to_string()))?;
    let n = spec.n() as f64;
    let dim = spec.dim();
    let builtin = matches!(spec.name(), "potential_type1" | "potential_type2");
    let lemma = match kind {
        PotentialKind::TypeI => "potential condition (n−2)/2 Σ u_k F_{u_k} − nF > 0",
        PotentialKind::TypeII => "crossed potential condition (n−2)/2 (uF_u + vF_v) − nF > 0",
    };
    if builtin {
        let p = spec.param("p").expect("built-in potentials carry p");
        let gate = if spec.n() > 2 {
            2.0 * n / (n - 2.0)
        } else {
            f64::INFINITY
        };
        if p < gate {
            return Ok(Certificate::Inconclusive {
                reason: format!(
                    "p = {p} is below the exponent gate 2n/(n−2) = {}",
                    coeff(gate)
                ),
            });
        }
    }
    let mut worst = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    for point in Halton::new(dim, 0).take(POTENTIAL_SAMPLES) {
        let u: Vec<f64> = point.iter().map(|x| x * POTENTIAL_BOX).collect();
        if u.iter().map(|x| x.abs()).sum::<f64>() < 1e-6 {
            continue;
        }
        let mut grad = spec.eval_f(&u)?;
        if kind == PotentialKind::TypeII {
            grad.swap(0, 1);
        }
        let f = spec
            .eval_potential(&u)
            .expect("the system has a potential")?;
        let euler: f64 = u.iter().zip(&grad).map(|(x, g)| x * g).sum();
        let value = 0.5 * (n - 2.0) * euler - n * f;
        worst = worst.min(value);
        if builtin {
            let bound = 2.0 * (u[0] - u[1]).powi(2);
            let scale = 1e-9 * (1.0 + value.abs());
            worst_margin = worst_margin.min(value - bound + scale);
        }
    }
    let ok = worst > 0.0 && (!builtin || worst_margin >= 0.0);
    if ok {
        Ok(Certificate::Certified {
            lemma: lemma.into(),
            reason: format!(
                "smallest sampled value {worst:.6e} > 0 over {POTENTIAL_SAMPLES} points"
            ),
        })
    } else {
        Ok(Certificate::Inconclusive {
            reason: format!(
                "the potential condition fails at a sample (smallest value {worst:.6e})"
            ),
        })
    }
}
