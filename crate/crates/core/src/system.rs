//! Semilinear elliptic systems `-Δu_i = f_i(u)` on the closed positive orthant.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Params};

/// Components in `[-CLAMP_TOL, 0)` are snapped to zero before evaluating `f`.
pub const CLAMP_TOL: f64 = 1e-12;

/// Registry names accepted by [`SystemSpec::builtin`].
pub const BUILTIN_NAMES: [&str; 8] = [
    "zero",
    "lane_emden_scalar",
    "hls",
    "sign_changing",
    "sign_changing_pq",
    "potential_type1",
    "potential_type2",
    "custom",
];

/// How the source term is tied to the potential `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `f_i = ∂F/∂u_i`.
    TypeI,
    /// Two components with `f_1 = ∂F/∂v`, `f_2 = ∂F/∂u`.
    TypeII,
}

impl PotentialKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "type1" | "type_1" | "I" => Ok(PotentialKind::TypeI),
            "type2" | "type_2" | "II" => Ok(PotentialKind::TypeII),
            other => Err(Error::InvalidInput(format!(
                "unknown potential kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Field {
    Zero,
    LaneEmdenScalar {
        p: f64,
    },
    Hls {
        p: f64,
        q: f64,
    },
    SignChanging {
        p: f64,
    },
    SignChangingPq {
        p: f64,
        q: f64,
    },
    PotentialType1 {
        p: f64,
    },
    PotentialType2 {
        p: f64,
    },
    Custom {
        f: Vec<Expr>,
        potential: Option<Expr>,
    },
}

/// An elliptic system together with the space dimension it lives in.
///
/// Immutable once built; cheap to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    name: String,
    components: usize,
    n: u32,
    params: Params,
    field: Field,
    potential_kind: Option<PotentialKind>,
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (L={}, n={}", self.name, self.components, self.n)?;
        for (k, v) in &self.params {
            write!(f, ", {k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Integer powers go through `powi`, which keeps polynomial systems exact on
/// small integers and is considerably cheaper than `powf`.
#[inline]
pub(crate) fn pw(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

fn param(params: &Params, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::MissingParam(key.to_string()))
}

fn dimension(params: &Params) -> Result<u32> {
    let n = params.get("n").copied().unwrap_or(3.0);
    if n.fract() != 0.0 || n < 3.0 {
        return Err(Error::InvalidInput(format!(
            "space dimension n must be an integer >= 3, got {n}"
        )));
    }
    Ok(n as u32)
}

fn exponent(params: &Params, key: &str, min: f64) -> Result<f64> {
    let p = param(params, key)?;
    if !(p.is_finite() && p >= min) {
        return Err(Error::InvalidInput(format!(
            "{key} must be >= {min}, got {p}"
        )));
    }
    Ok(p)
}

impl SystemSpec {
    /// Looks up one of the registry systems. `n` defaults to 3 when absent.
    pub fn builtin(name: &str, params: &Params) -> Result<Self> {
        let n = dimension(params)?;
        let mut stored = Params::new();
        let (components, field, potential_kind) = match name {
            "zero" => {
                let l = params.get("L").copied().unwrap_or(2.0);
                if l.fract() != 0.0 || l < 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "L must be a positive integer, got {l}"
                    )));
                }
                stored.insert("L".into(), l);
                (l as usize, Field::Zero, None)
            }
            "lane_emden_scalar" => {
                let p = exponent(params, "p", 1.0)?;
                stored.insert("p".into(), p);
                (1, Field::LaneEmdenScalar { p }, None)
            }
            "hls" => {
                let p = exponent(params, "p", 1.0)?;
                let q = match params.get("q") {
                    Some(_) => exponent(params, "q", 1.0)?,
                    None => p,
                };
                stored.insert("p".into(), p);
                stored.insert("q".into(), q);
                (2, Field::Hls { p, q }, None)
            }
            "sign_changing" => {
                let p = exponent(params, "p", 1.0)?;
                stored.insert("p".into(), p);
                (2, Field::SignChanging { p }, None)
            }
            "sign_changing_pq" => {
                let p = exponent(params, "p", 1.0)?;
                let q = exponent(params, "q", 1.0)?;
                stored.insert("p".into(), p);
                stored.insert("q".into(), q);
                (2, Field::SignChangingPq { p, q }, None)
            }
            "potential_type1" => {
                let p = exponent(params, "p", 2.0)?;
                stored.insert("p".into(), p);
                (2, Field::PotentialType1 { p }, Some(PotentialKind::TypeI))
            }
            "potential_type2" => {
                let p = exponent(params, "p", 2.0)?;
                stored.insert("p".into(), p);
                (2, Field::PotentialType2 { p }, Some(PotentialKind::TypeII))
            }
            "custom" => {
                return Err(Error::MissingParam(
                    "f (custom systems need expressions)".into(),
                ))
            }
            other => return Err(Error::UnknownSystem(other.to_string())),
        };
        stored.insert("n".into(), n as f64);
        Ok(SystemSpec {
            name: name.to_string(),
            components,
            n,
            params: stored,
            field,
            potential_kind,
        })
    }

    /// Builds a system from expression strings over `u1..uL` and the given parameters.
    pub fn custom(
        name: &str,
        n: u32,
        f: &[&str],
        potential: Option<(&str, PotentialKind)>,
        params: &Params,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "space dimension n must be >= 3, got {n}"
            )));
        }
        if f.is_empty() {
            return Err(Error::InvalidInput(
                "a system needs at least one component".into(),
            ));
        }
        let dim = f.len();
        let names: BTreeSet<String> = params.keys().cloned().collect();
        let exprs = f
            .iter()
            .map(|text| expr::parse(text, dim, &names).and_then(|e| e.bind(params)))
            .collect::<Result<Vec<_>>>()?;
        let (potential, potential_kind) = match potential {
            Some((text, kind)) => {
                if kind == PotentialKind::TypeII && dim != 2 {
                    return Err(Error::InvalidInput(
                        "type II potentials need exactly two components".into(),
                    ));
                }
                let e = expr::parse(text, dim, &names)?.bind(params)?;
                (Some(e), Some(kind))
            }
            None => (None, None),
        };
        let mut stored = params.clone();
        stored.insert("n".into(), n as f64);
        Ok(SystemSpec {
            name: name.to_string(),
            components: dim,
            n,
            params: stored,
            field: Field::Custom {
                f: exprs,
                potential,
            },
            potential_kind,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of components `L`.
    pub fn dim(&self) -> usize {
        self.components
    }

    /// Space dimension.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn potential_kind(&self) -> Option<PotentialKind> {
        self.potential_kind
    }

    /// Snaps round-off undershoot to zero; anything further below the wall is rejected.
    pub fn clamp(&self, u: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.check_len(u)?;
        if u.iter().any(|&x| !(x >= -tol)) {
            return Err(Error::Domain { point: u.to_vec() });
        }
        Ok(u.iter().map(|&x| x.max(0.0)).collect())
    }

    /// `f(u)` for `u` in the closed orthant, up to [`CLAMP_TOL`].
    pub fn eval_f(&self, u: &[f64]) -> Result<Vec<f64>> {
        let clamped = self.clamp(u, CLAMP_TOL)?;
        let mut out = vec![0.0; self.components];
        self.eval_unchecked(&clamped, &mut out)?;
        Ok(out)
    }

    /// `f` composed with the projection onto the closed orthant. The integrator
    /// uses this so that stages stepping past the wall still see a continuous field.
    pub fn eval_f_projected(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.iter().all(|&x| x >= 0.0) {
            return self.eval_unchecked(u, out);
        }
        let mut projected = [0.0; 8];
        if u.len() <= projected.len() {
            for (p, &x) in projected.iter_mut().zip(u) {
                *p = x.max(0.0);
            }
            self.eval_unchecked(&projected[..u.len()], out)
        } else {
            let projected: Vec<f64> = u.iter().map(|&x| x.max(0.0)).collect();
            self.eval_unchecked(&projected, out)
        }
    }

    /// Potential `F(u)`, if the system carries one.
    pub fn eval_potential(&self, u: &[f64]) -> Option<Result<f64>> {
        self.potential_kind?;
        let u = match self.clamp(u, CLAMP_TOL) {
            Ok(u) => u,
            Err(e) => return Some(Err(e)),
        };
        let (x, y) = (u[0], u.get(1).copied().unwrap_or(0.0));
        Some(match &self.field {
            Field::PotentialType1 { p } => {
                Ok(-(x - y).powi(2) + pw(y, p - 1.0) * x + pw(x, p - 1.0) * y)
            }
            Field::PotentialType2 { p } => Ok(-(x - y).powi(2) + pw(x, *p) + pw(y, *p)),
            Field::Custom {
                potential: Some(e), ..
            } => e
                .eval(&u, &self.params)
                .map_err(|err| Error::eval(format!("F at {u:?}: {err}"))),
            _ => return None,
        })
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.components {
            return Err(Error::InvalidInput(format!(
                "expected a {}-vector, got {}",
                self.components,
                u.len()
            )));
        }
        Ok(())
    }

    fn eval_unchecked(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.field {
            Field::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Field::LaneEmdenScalar { p } => out[0] = pw(u[0], *p),
            Field::Hls { p, q } => {
                out[0] = pw(u[1], *p);
                out[1] = pw(u[0], *q);
            }
            Field::SignChanging { p } => {
                let (up, vp) = (pw(u[0], *p), pw(u[1], *p));
                out[0] = vp - up;
                out[1] = up;
            }
            Field::SignChangingPq { p, q } => {
                let (up, vp) = (pw(u[0], *p), pw(u[1], *p));
                out[0] = vp + pw(u[1], *q) - up;
                out[1] = up;
            }
            Field::PotentialType1 { p } => {
                // F = -(u-v)^2 + v^{p-1} u + u^{p-1} v
                let (x, y) = (u[0], u[1]);
                out[0] = -2.0 * (x - y) + pw(y, p - 1.0) + (p - 1.0) * pw(x, p - 2.0) * y;
                out[1] = 2.0 * (x - y) + (p - 1.0) * pw(y, p - 2.0) * x + pw(x, p - 1.0);
            }
            Field::PotentialType2 { p } => {
                // F = -(u-v)^2 + u^p + v^p, f = (F_v, F_u)
                let (x, y) = (u[0], u[1]);
                out[0] = 2.0 * (x - y) + p * pw(y, p - 1.0);
                out[1] = -2.0 * (x - y) + p * pw(x, p - 1.0);
            }
            Field::Custom { f, .. } => {
                for (o, e) in out.iter_mut().zip(f) {
                    *o = e
                        .eval(u, &self.params)
                        .map_err(|err| Error::eval(format!("f at {u:?}: {err}")))?;
                }
            }
        }
        if out.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::eval(format!("non-finite f at {u:?}")))
        }
    }

    /// Largest relative mismatch between `f` and the central-difference
    /// derivative of the potential, under the system's linkage rule.
    /// `None` for systems without a potential.
    pub fn potential_mismatch(&self, points: &[Vec<f64>], step: f64) -> Option<Result<f64>> {
        let kind = self.potential_kind?;
        let mut worst: f64 = 0.0;
        for point in points {
            let f = match self.eval_f(point) {
                Ok(f) => f,
                Err(e) => return Some(Err(e)),
            };
            let mut grad = vec![0.0; self.components];
            for (i, g) in grad.iter_mut().enumerate() {
                let mut hi = point.clone();
                let mut lo = point.clone();
                hi[i] += step;
                lo[i] -= step;
                let (fh, fl) = match (self.eval_potential(&hi)?, self.eval_potential(&lo)?) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => return Some(Err(e)),
                };
                *g = (fh - fl) / (2.0 * step);
            }
            if kind == PotentialKind::TypeII {
                grad.swap(0, 1);
            }
            for (g, fi) in grad.iter().zip(&f) {
                worst = worst.max((g - fi).abs() / fi.abs().max(1.0));
            }
        }
        Some(Ok(worst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ps(list: &[(&str, f64)]) -> Params {
        list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn sign_changing_at_ones() {
        let s = SystemSpec::builtin("sign_changing", &ps(&[("p", 5.0)])).unwrap();
        assert_eq!((s.dim(), s.n()), (2, 3));
        assert_eq!(s.eval_f(&[1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_field() {
        let s = SystemSpec::builtin("zero", &Params::new()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.eval_f(&[0.3, 0.7]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn type_two_uses_the_gradient_of_its_potential() {
        let s = SystemSpec::builtin("potential_type2", &ps(&[("p", 3.0)])).unwrap();
        assert_eq!(s.potential_kind(), Some(PotentialKind::TypeII));
        // F = -(u-v)^2 + u^3 + v^3 at (1, 0): F_v = 2(u-v) + 3v^2 = 2, F_u = -2(u-v) + 3u^2 = 1
        assert_eq!(s.eval_f(&[1.0, 0.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn builtin_errors() {
        assert_eq!(
            SystemSpec::builtin("nope", &Params::new()),
            Err(Error::UnknownSystem("nope".into()))
        );
        assert_eq!(
            SystemSpec::builtin("sign_changing", &Params::new()),
            Err(Error::MissingParam("p".into()))
        );
        assert!(matches!(
            SystemSpec::builtin("custom", &Params::new()),
            Err(Error::MissingParam(_))
        ));
        assert!(matches!(
            SystemSpec::builtin("hls", &ps(&[("p", 3.0), ("n", 2.0)])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn clamping_rule() {
        let s = SystemSpec::builtin("sign_changing", &ps(&[("p", 5.0)])).unwrap();
        assert_eq!(s.eval_f(&[-1e-13, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(s.eval_f(&[-1e-9, 1.0]), Err(Error::Domain { .. })));
        assert!(matches!(
            s.eval_f(&[f64::NAN, 1.0]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(s.eval_f(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fractional_power_after_clamp() {
        let s = SystemSpec::custom("sqrt", 3, &["u1^0.5"], None, &Params::new()).unwrap();
        assert_eq!(s.eval_f(&[4.0]).unwrap(), vec![2.0]);
        let clamped = s.clamp(&[-1e-6], 1e-5).unwrap();
        assert_eq!(s.eval_f(&clamped).unwrap(), vec![0.0]);
        let inv = SystemSpec::custom("inv", 3, &["1/u1"], None, &Params::new()).unwrap();
        assert!(matches!(inv.eval_f(&[0.0]), Err(Error::Eval { .. })));
    }

    #[test]
    fn builtin_potentials_match_their_fields() {
        let mut points = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                points.push(vec![0.01 + 0.17 * i as f64, 0.01 + 0.13 * j as f64]);
            }
        }
        for (name, p) in [
            ("potential_type1", 7.0),
            ("potential_type2", 7.0),
            ("potential_type1", 6.5),
            ("potential_type2", 3.0),
        ] {
            let s = SystemSpec::builtin(name, &ps(&[("p", p)])).unwrap();
            let worst = s.potential_mismatch(&points, 1e-5).unwrap().unwrap();
            assert!(worst < 1e-5, "{name} p={p}: {worst}");
        }
        let plain = SystemSpec::builtin("sign_changing", &ps(&[("p", 5.0)])).unwrap();
        assert!(plain.potential_mismatch(&points, 1e-5).is_none());
    }

    #[test]
    fn custom_potential_linkage_is_checked() {
        let params = ps(&[("p", 4.0)]);
        let good = SystemSpec::custom(
            "c",
            3,
            &["2*(u1-u2) + p*u2^(p-1)", "-2*(u1-u2) + p*u1^(p-1)"],
            Some(("-(u1-u2)^2 + u1^p + u2^p", PotentialKind::TypeII)),
            &params,
        )
        .unwrap();
        let pts = vec![vec![0.5, 0.25], vec![1.2, 0.7]];
        assert!(good.potential_mismatch(&pts, 1e-5).unwrap().unwrap() < 1e-6);
        let swapped = SystemSpec::custom(
            "c",
            3,
            &["2*(u1-u2) + p*u2^(p-1)", "-2*(u1-u2) + p*u1^(p-1)"],
            Some(("-(u1-u2)^2 + u1^p + u2^p", PotentialKind::TypeI)),
            &params,
        )
        .unwrap();
        assert!(swapped.potential_mismatch(&pts, 1e-5).unwrap().unwrap() > 1e-2);
    }

    #[test]
    fn eval_is_pure() {
        let s = SystemSpec::builtin("potential_type1", &ps(&[("p", 7.0)])).unwrap();
        let u = [0.37, 1.91];
        assert_eq!(s.eval_f(&u).unwrap(), s.eval_f(&u).unwrap());
    }
}
