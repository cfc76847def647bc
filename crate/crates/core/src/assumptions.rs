//! Sampling oracles for the two structural hypotheses on `f`: a nonnegative
//! component sum, and near every nonzero wall point, control of the nonzero
//! components by the vanishing ones.
//!
//! These are falsification checks. A passing report means no counterexample
//! was found among the samples, not that the hypothesis is proved.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::Halton;
use crate::system::SystemSpec;

/// Slack for sign conditions, relative to `max(1, Σ|f_i|)` at the sample.
pub const TOL_ASSUME: f64 = 1e-10;

/// Smallest δ₀ the halving sweep will try.
pub const DELTA0_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstPoint {
    pub point: Vec<f64>,
    /// `Σf_i / max(1, Σ|f_i|)` at `point`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub decay_ok: bool,
    pub decay_worst: WorstPoint,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlEntry {
    /// Zero-based indices of the vanishing coordinates of `base_point`.
    pub boundary_pattern: Vec<usize>,
    pub base_point: Vec<f64>,
    pub delta0: f64,
    /// `max(1, sup ratio)`; infinite when some sample has a vanishing
    /// denominator with a nonzero numerator.
    pub c_est: f64,
    pub sup_ratio: f64,
    pub ok: bool,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub decay_ok: bool,
    pub decay_worst: WorstPoint,
    pub control_entries: Vec<ControlEntry>,
    pub sample_count: usize,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.decay_ok && self.control_entries.iter().all(|e| e.ok)
    }
}

fn scaled_sum(f: &[f64]) -> f64 {
    let sum: f64 = f.iter().sum();
    let mag: f64 = f.iter().map(|x| x.abs()).sum();
    sum / mag.max(1.0)
}

/// Minimum of the (scaled) component sum over `(0, box_max]^L` and every face
/// of the orthant box, including the origin.
pub fn check_decay(
    spec: &SystemSpec,
    box_max: f64,
    samples: usize,
    seed: u64,
) -> Result<DecayReport> {
    if !(box_max > 0.0) || samples == 0 {
        return Err(Error::InvalidInput(
            "check_decay needs box_max > 0 and samples >= 1".into(),
        ));
    }
    let dim = spec.dim();
    let mut worst = WorstPoint {
        point: vec![0.0; dim],
        value: f64::INFINITY,
    };
    let mut count = 0usize;
    let mut visit = |point: Vec<f64>| -> Result<()> {
        let f = spec.eval_f(&point)?;
        let value = scaled_sum(&f);
        count += 1;
        if value < worst.value {
            worst = WorstPoint { point, value };
        }
        Ok(())
    };

    for x in Halton::new(dim, seed).take(samples) {
        visit(x.iter().map(|t| (1.0 - t) * box_max).collect())?;
    }
    // faces: every proper nonempty set of zero coordinates, then the origin
    let faces = (1u32 << dim) - 1;
    let per_face = (samples / faces.max(1) as usize).max(1);
    for mask in 1..faces {
        let free: Vec<usize> = (0..dim).filter(|i| mask & (1 << i) == 0).collect();
        for x in Halton::new(free.len(), seed.wrapping_add(mask as u64)).take(per_face) {
            let mut point = vec![0.0; dim];
            for (&i, t) in free.iter().zip(&x) {
                point[i] = (1.0 - t) * box_max;
            }
            visit(point)?;
        }
    }
    visit(vec![0.0; dim])?;

    Ok(DecayReport {
        decay_ok: worst.value >= -TOL_ASSUME,
        decay_worst: worst,
        sample_count: count,
    })
}

/// Samples the open orthant inside the max-norm `delta0`-ball around a wall
/// point and bounds `Σ_{nonzero}|f| / Σ_{zero} f`.
pub fn check_control_inequality(
    spec: &SystemSpec,
    abar: &[f64],
    delta0: f64,
    samples: usize,
    seed: u64,
) -> Result<ControlEntry> {
    let dim = spec.dim();
    if abar.len() != dim {
        return Err(Error::InvalidInput(format!(
            "base point must have {dim} coordinates"
        )));
    }
    if !(delta0 > 0.0) || samples == 0 {
        return Err(Error::InvalidInput(
            "control check needs delta0 > 0 and samples >= 1".into(),
        ));
    }
    if abar.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidBoundaryPoint(format!(
            "{abar:?} is outside the closed orthant"
        )));
    }
    let zeros: Vec<usize> = (0..dim).filter(|&i| abar[i] == 0.0).collect();
    if zeros.is_empty() {
        return Err(Error::InvalidBoundaryPoint(format!(
            "{abar:?} has no zero coordinate"
        )));
    }
    if zeros.len() == dim {
        return Err(Error::InvalidBoundaryPoint(
            "the origin has no nonzero coordinate".into(),
        ));
    }

    let mut sup: f64 = 0.0;
    let mut denominators_ok = true;
    for x in Halton::new(dim, seed).take(samples) {
        let beta: Vec<f64> = (0..dim)
            .map(|i| {
                if abar[i] == 0.0 {
                    x[i] * delta0
                } else {
                    let lo = (abar[i] - delta0).max(0.0);
                    let hi = abar[i] + delta0;
                    lo + x[i] * (hi - lo)
                }
            })
            .collect();
        let f = spec.eval_f(&beta)?;
        let scale = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let tol = TOL_ASSUME * scale;
        let den: f64 = zeros.iter().map(|&i| f[i]).sum();
        let num: f64 = (0..dim)
            .filter(|i| !zeros.contains(i))
            .map(|i| f[i].abs())
            .sum();
        if den < -tol {
            denominators_ok = false;
            continue;
        }
        let ratio = if den <= tol {
            if num <= tol {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        };
        sup = sup.max(ratio);
    }
    let ok = denominators_ok && sup.is_finite();
    Ok(ControlEntry {
        boundary_pattern: zeros,
        base_point: abar.to_vec(),
        delta0,
        c_est: if sup.is_finite() {
            sup.max(1.0)
        } else {
            f64::INFINITY
        },
        sup_ratio: sup,
        ok,
        sample_count: samples,
    })
}

/// Halves `delta0` until the control check passes or the floor is reached.
/// Returns the last entry tried; its `ok` flag says whether any radius was certified.
pub fn certify_delta0(
    spec: &SystemSpec,
    abar: &[f64],
    delta0_start: f64,
    samples: usize,
    seed: u64,
) -> Result<ControlEntry> {
    let mut delta0 = delta0_start;
    loop {
        let entry = check_control_inequality(spec, abar, delta0, samples, seed)?;
        if entry.ok || delta0 / 2.0 < DELTA0_FLOOR {
            return Ok(entry);
        }
        delta0 /= 2.0;
    }
}

/// Every wall point with exactly one zero and the remaining coordinates equal
/// to `level`; the base points used by the default assumption report.
pub fn default_base_points(dim: usize, level: f64) -> Vec<Vec<f64>> {
    if dim < 2 {
        return Vec::new();
    }
    (0..dim)
        .map(|z| (0..dim).map(|i| if i == z { 0.0 } else { level }).collect())
        .collect()
}

/// Decay check plus a control check at each base point.
pub fn check_assumptions(
    spec: &SystemSpec,
    box_max: f64,
    samples: usize,
    base_points: &[Vec<f64>],
    delta0: f64,
    seed: u64,
) -> Result<AssumptionReport> {
    let decay = check_decay(spec, box_max, samples, seed)?;
    let control_entries = base_points
        .iter()
        .map(|abar| check_control_inequality(spec, abar, delta0, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(AssumptionReport {
        decay_ok: decay.decay_ok,
        decay_worst: decay.decay_worst,
        sample_count: decay.sample_count
            + control_entries
                .iter()
                .map(|e| e.sample_count)
                .sum::<usize>(),
        control_entries,
    })
}
