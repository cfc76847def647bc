//! CSV writers. Numbers carry 17 significant digits; infinities are written
//! as `inf` and missing values as `nan`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::pohozaev::BallSolution;
use crate::search::BisectionStep;
use crate::target::{SimplexPoint, TargetResult};

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("cannot write CSV: {e}"))
}

fn header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (1..=dim).map(move |i| format!("{prefix}{i}"))
}

fn trajectory_rows<W: Write>(
    traj: &Trajectory,
    r_stop: f64,
    out: &mut csv::Writer<W>,
) -> Result<()> {
    let dim = traj.dim();
    let mut head = vec!["r".to_string()];
    head.extend(header("u", dim));
    head.extend(header("du", dim));
    out.write_record(&head).map_err(io)?;
    let mut write = |r: f64, u: &[f64], du: &[f64]| -> Result<()> {
        let row: Vec<String> = std::iter::once(r)
            .chain(u.iter().copied())
            .chain(du.iter().copied())
            .map(fmt_num)
            .collect();
        out.write_record(&row).map_err(io)
    };
    write(0.0, traj.alpha(), &vec![0.0; dim])?;
    for node in traj.nodes().iter().filter(|node| node.r <= r_stop) {
        write(node.r, &node.u, &node.du)?;
    }
    Ok(())
}

/// Columns `r, u1..uL, du1..duL`, one row per accepted step plus the origin.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    trajectory_rows(traj, f64::INFINITY, &mut out)?;
    out.flush().map_err(io)
}

/// The trajectory schema preceded by a line `# R=<radius>,n=<dimension>`.
pub fn write_ball_csv<W: Write>(sol: &BallSolution, mut w: W) -> Result<()> {
    writeln!(w, "# R={},n={}", fmt_num(sol.radius()), sol.n()).map_err(io)?;
    let mut out = csv::Writer::from_writer(w);
    trajectory_rows(sol.trajectory(), sol.radius(), &mut out)?;
    out.flush().map_err(io)
}

/// Columns `alpha_1..alpha_L, r_alpha, hit_index_mask, psi_1..psi_L`.
pub fn write_sweep_csv<W: Write>(
    points: &[SimplexPoint],
    results: &[TargetResult],
    w: W,
) -> Result<()> {
    if points.len() != results.len() {
        return Err(Error::InvalidInput(
            "sweep points and results differ in length".into(),
        ));
    }
    let dim = points.first().map_or(0, SimplexPoint::dim);
    let mut out = csv::Writer::from_writer(w);
    let mut head: Vec<String> = header("alpha_", dim).collect();
    head.push("r_alpha".into());
    head.push("hit_index_mask".into());
    head.extend(header("psi_", dim));
    out.write_record(&head).map_err(io)?;
    for (p, t) in points.iter().zip(results) {
        let mut row: Vec<String> = p.alpha().iter().copied().map(fmt_num).collect();
        row.push(fmt_num(t.r_alpha));
        row.push(t.hit_mask().to_string());
        match &t.psi {
            Some(psi) => row.extend(psi.iter().copied().map(fmt_num)),
            None => row.extend(std::iter::repeat_n("nan".to_string(), dim)),
        }
        out.write_record(&row).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Columns `t_lo, t_hi, t_mid, r_mid, h_mid`; `h_mid` is empty for shots that never hit.
pub fn write_trace_csv<W: Write>(trace: &[BisectionStep], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_lo", "t_hi", "t_mid", "r_mid", "h_mid"])
        .map_err(io)?;
    for s in trace {
        out.write_record([
            fmt_num(s.t_lo),
            fmt_num(s.t_hi),
            fmt_num(s.t_mid),
            fmt_num(s.r_mid),
            s.h_mid.map_or(String::new(), |h| h.to_string()),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::integrator::{integrate, ShotConfig};
    use crate::system::SystemSpec;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        let back: f64 = fmt_num(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn trajectory_columns() {
        let zero = SystemSpec::builtin("zero", &Params::new()).unwrap();
        let cfg = ShotConfig {
            r_max: 1.0,
            ..ShotConfig::default()
        };
        let (traj, _) = integrate(&zero, &[1.0, 2.0], &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,u1,u2,du1,du2"));
        assert!(lines
            .next()
            .unwrap()
            .starts_with("0.0000000000000000e0,1.0000000000000000e0,2.0"));
        assert_eq!(text.lines().count(), traj.nodes().len() + 2);
    }

    #[test]
    fn sweep_rows_mark_missing_hits() {
        let zero = SystemSpec::builtin("zero", &Params::new()).unwrap();
        let p = SimplexPoint::new(vec![0.5, 0.5], 1.0).unwrap();
        let t = crate::target::psi(&zero, &p, &ShotConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&[p], &[t], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("alpha_1,alpha_2,r_alpha,hit_index_mask,psi_1,psi_2")
        );
        assert!(text.lines().nth(1).unwrap().ends_with(",inf,0,nan,nan"));
    }
}
