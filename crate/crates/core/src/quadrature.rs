//! Adaptive Gauss–Kronrod quadrature and radial integrals over balls.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Gauss weights at the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Default accuracy: `error ≤ REL_TOL · (1 + |value|)`.
pub const REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// 15-point Kronrod value with the 7-point Gauss difference as error.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Quadrature {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Quadrature {
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Globally adaptive integral of `f` over `[breaks[0], breaks[last]]`,
/// starting from the given subdivision.
pub fn integrate_pieces(
    f: &dyn Fn(f64) -> f64,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<Quadrature> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(Piece {
                a: w[0],
                b: w[1],
                q: gk15(f, w[0], w[1]),
            });
        }
    }
    let total = |heap: &BinaryHeap<Piece>| {
        heap.iter().fold(
            Quadrature {
                value: 0.0,
                error: 0.0,
            },
            |acc, p| Quadrature {
                value: acc.value + p.q.value,
                error: acc.error + p.q.error,
            },
        )
    };
    let mut sum = total(&heap);
    while sum.error > rel_tol * (1.0 + sum.value.abs()) {
        if !sum.value.is_finite() || heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure {
                estimate: sum.error,
            });
        }
        let worst = heap
            .pop()
            .expect("the error exceeds zero, so a piece exists");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureFailure {
                estimate: sum.error,
            });
        }
        let left = gk15(f, worst.a, mid);
        let right = gk15(f, mid, worst.b);
        sum.value += left.value + right.value - worst.q.value;
        sum.error += left.error + right.error - worst.q.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            q: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            q: right,
        });
        // refresh the running sums now and then against drift
        if heap.len() % 64 == 0 {
            sum = total(&heap);
        }
    }
    let sum = total(&heap);
    if !sum.value.is_finite() {
        return Err(Error::QuadratureFailure {
            estimate: f64::INFINITY,
        });
    }
    Ok(sum)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<Quadrature> {
    integrate_pieces(f, &[a, b], REL_TOL)
}

/// Surface area `2π^{n/2}/Γ(n/2)` of the unit sphere in `ℝ^n`.
pub fn sphere_area(n: u32) -> f64 {
    // Γ(n/2) by the half-integer recursion
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < 0.5 * n as f64 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(0.5 * n as f64) / gamma
}

/// `∫_{B_R} g(|x|) dx = σ_{n-1} ∫₀^R g(r) r^{n-1} dr`.
pub fn radial_integral(g: &dyn Fn(f64) -> f64, n: u32, radius: f64) -> Result<Quadrature> {
    radial_integral_pieces(g, n, &[0.0, radius])
}

/// As [`radial_integral`], over `[breaks[0], breaks[last]]` split at `breaks`.
pub fn radial_integral_pieces(
    g: &dyn Fn(f64) -> f64,
    n: u32,
    breaks: &[f64],
) -> Result<Quadrature> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let weighted = |r: f64| g(r) * r.powi(n as i32 - 1);
    let q = integrate_pieces(&weighted, breaks, REL_TOL)?;
    let s = sphere_area(n);
    Ok(Quadrature {
        value: s * q.value,
        error: s * q.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn ball_volumes() {
        let one = |_: f64| 1.0;
        assert!((radial_integral(&one, 3, 1.0).unwrap().value - 4.0 * PI / 3.0).abs() < 1e-14);
        let sq = |r: f64| r * r;
        assert!((radial_integral(&sq, 3, 1.0).unwrap().value - 4.0 * PI / 5.0).abs() < 1e-14);
        assert!((radial_integral(&one, 4, 2.0).unwrap().value - 8.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn adaptivity_handles_a_kink() {
        let f = |x: f64| (x - 0.3).abs().sqrt();
        let exact = (2.0 / 3.0) * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        let q = integrate(&f, 0.0, 1.0).unwrap();
        assert!((q.value - exact).abs() < 1e-9, "{} vs {exact}", q.value);
    }

    #[test]
    fn non_finite_integrands_fail() {
        let f = |x: f64| 1.0 / x;
        assert!(matches!(
            integrate(&f, 0.0, 1.0),
            Err(Error::QuadratureFailure { .. })
        ));
    }
}
