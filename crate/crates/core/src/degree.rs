//! Brouwer degree of self-maps of the simplex `Σ_a`.
//!
//! Maps are passed as closures returning `None` where they are undefined
//! (no wall hit). Such grid points are excluded and counted.
//!
//! Charts drop the last barycentric coordinate, so for `L = 3` the boundary
//! walk `(a,0,0) → (0,a,0) → (0,0,a)` runs counterclockwise and the
//! identity has degree `+1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::ShotConfig;
use crate::system::SystemSpec;
use crate::target::{phi, SimplexPoint};

/// Largest resolution the precondition refinement may reach.
const MAX_RESOLUTION: usize = 1 << 16;
/// Bound on recursive midpoint insertion along one boundary edge.
const MAX_EDGE_DEPTH: u32 = 24;

/// A self-map of the simplex; `Ok(None)` marks points without an image.
pub type SimplexMap<'a> = dyn Fn(&SimplexPoint) -> Result<Option<SimplexPoint>> + Sync + 'a;

/// Barycentric lattice `{(a/k)·m : m ∈ ℕ^L, Σm = k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    level: f64,
    dim: usize,
    resolution: usize,
    lattice: Vec<Vec<usize>>,
}

impl SimplexGrid {
    pub fn new(level: f64, dim: usize, resolution: usize) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid level must be positive, got {level}"
            )));
        }
        if dim < 2 {
            return Err(Error::InvalidInput(
                "a simplex grid needs at least two coordinates".into(),
            ));
        }
        if resolution < 2 {
            return Err(Error::GridTooCoarse(format!(
                "resolution {resolution} has no interior structure"
            )));
        }
        let mut lattice = Vec::new();
        let mut m = vec![0usize; dim];
        compositions(&mut m, 0, resolution, &mut lattice);
        Ok(SimplexGrid {
            level,
            dim,
            resolution,
            lattice,
        })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Integer barycentric coordinates, summing to the resolution.
    pub fn lattice(&self) -> &[Vec<usize>] {
        &self.lattice
    }

    pub fn point(&self, m: &[usize]) -> SimplexPoint {
        lattice_point(m, self.level)
    }

    pub fn points(&self) -> Vec<SimplexPoint> {
        self.lattice.iter().map(|m| self.point(m)).collect()
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        self.lattice[index].contains(&0)
    }

    fn refined(&self, resolution: usize) -> Result<Self> {
        SimplexGrid::new(self.level, self.dim, resolution)
    }
}

fn lattice_point(m: &[usize], level: f64) -> SimplexPoint {
    let weights: Vec<f64> = m.iter().map(|&x| x as f64).collect();
    SimplexPoint::normalized(&weights, level)
        .expect("lattice weights are nonnegative with positive sum")
}

/// All `m ∈ ℕ^L` with `Σm = total`, in lexicographic order.
fn compositions(m: &mut Vec<usize>, i: usize, total: usize, out: &mut Vec<Vec<usize>>) {
    if i + 1 == m.len() {
        m[i] = total;
        out.push(m.clone());
        return;
    }
    for x in 0..=total {
        m[i] = x;
        compositions(m, i + 1, total - x, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMethod {
    IntervalSignCount,
    BoundaryWinding,
    HeuristicPreimage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    pub target: Vec<f64>,
    pub method: DegreeMethod,
    /// Resolution actually used, after any refinement.
    pub resolution: usize,
    /// Grid points where the map had no image.
    pub excluded: usize,
    /// False for the preimage count used when `L ≥ 4`.
    pub certified: bool,
}

/// Degree of `map` over the open simplex at the interior point `target`.
pub fn degree(map: &SimplexMap, target: &SimplexPoint, grid: &SimplexGrid) -> Result<DegreeReport> {
    if target.dim() != grid.dim() || (target.level() - grid.level()).abs() > 1e-12 * grid.level() {
        return Err(Error::InvalidInput(
            "target does not lie on the grid's simplex".into(),
        ));
    }
    if target.alpha().iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "target {:?} is not interior",
            target.alpha()
        )));
    }
    let grid = precondition_grid(map, target, grid)?;
    match grid.dim() {
        2 => interval_degree(map, target, &grid),
        3 => winding_degree(map, target, &grid),
        _ => preimage_degree(map, target, &grid),
    }
}

/// Degree of `φ = π ∘ ψ` for a system.
pub fn phi_degree(
    spec: &SystemSpec,
    target: &SimplexPoint,
    grid: &SimplexGrid,
    cfg: &ShotConfig,
) -> Result<DegreeReport> {
    let map = |p: &SimplexPoint| phi(spec, p, cfg);
    degree(&map, target, grid)
}

fn max_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Doubles the resolution until the target keeps distance `2a/k` from the
/// images of the lattice boundary points.
fn precondition_grid(
    map: &SimplexMap,
    target: &SimplexPoint,
    grid: &SimplexGrid,
) -> Result<SimplexGrid> {
    let mut k = grid.resolution();
    let mut current = grid.clone();
    loop {
        let boundary: Vec<SimplexPoint> = current
            .lattice()
            .iter()
            .filter(|m| m.contains(&0))
            .map(|m| current.point(m))
            .collect();
        let dists: Vec<f64> = boundary
            .par_iter()
            .map(|p| -> Result<f64> {
                let image = map(p)?.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "map is undefined at boundary point {:?}",
                        p.alpha()
                    ))
                })?;
                Ok(max_dist(image.alpha(), target.alpha()))
            })
            .collect::<Result<_>>()?;
        let d = dists.iter().copied().fold(f64::INFINITY, f64::min);
        if d >= 2.0 * grid.level() / k as f64 {
            return Ok(current);
        }
        if d == 0.0 || k >= MAX_RESOLUTION {
            return Err(Error::TargetOnBoundaryImage);
        }
        k = (k * 2).min(MAX_RESOLUTION);
        current = grid.refined(k)?;
    }
}

fn interval_degree(
    map: &SimplexMap,
    target: &SimplexPoint,
    grid: &SimplexGrid,
) -> Result<DegreeReport> {
    let k = grid.resolution();
    // walk t = α₁ from 0 to a
    let points: Vec<SimplexPoint> = (0..=k).map(|j| grid.point(&[j, k - j])).collect();
    let values: Vec<Option<f64>> = points
        .par_iter()
        .map(|p| Ok(map(p)?.map(|q| q.alpha()[0] - target.alpha()[0])))
        .collect::<Result<_>>()?;
    let excluded = values.iter().filter(|v| v.is_none()).count();
    let signs: Vec<i64> = values
        .iter()
        .flatten()
        .map(|&g| if g >= 0.0 { 1 } else { -1 })
        .collect();
    let degree = signs.windows(2).map(|w| (w[1] - w[0]) / 2).sum();
    Ok(DegreeReport {
        degree,
        target: target.alpha().to_vec(),
        method: DegreeMethod::IntervalSignCount,
        resolution: k,
        excluded,
        certified: true,
    })
}

fn winding_degree(
    map: &SimplexMap,
    target: &SimplexPoint,
    grid: &SimplexGrid,
) -> Result<DegreeReport> {
    let k = grid.resolution();
    let a = grid.level();
    let chart = |q: &SimplexPoint| {
        [
            q.alpha()[0] - target.alpha()[0],
            q.alpha()[1] - target.alpha()[1],
        ]
    };
    let corners = [[k, 0, 0], [0, k, 0], [0, 0, k]];
    let mut total = 0.0;
    for e in 0..3 {
        let (from, to) = (corners[e], corners[(e + 1) % 3]);
        let at = |s: f64| -> Result<[f64; 2]> {
            let w: Vec<f64> = (0..3)
                .map(|i| (1.0 - s) * from[i] as f64 + s * to[i] as f64)
                .collect();
            let p = SimplexPoint::normalized(&w, a)?;
            let q = map(&p)?.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "map is undefined at boundary point {:?}",
                    p.alpha()
                ))
            })?;
            Ok(chart(&q))
        };
        let nodes: Vec<[f64; 2]> = (0..=k)
            .into_par_iter()
            .map(|j| at(j as f64 / k as f64))
            .collect::<Result<_>>()?;
        for j in 0..k {
            let (s0, s1) = (j as f64 / k as f64, (j + 1) as f64 / k as f64);
            total += edge_angle(&at, s0, nodes[j], s1, nodes[j + 1], 0)?;
        }
    }
    let turns = total / std::f64::consts::TAU;
    let degree = turns.round();
    if (turns - degree).abs() > 1e-6 {
        return Err(Error::GridTooCoarse(format!(
            "winding sum {turns} is not an integer"
        )));
    }
    Ok(DegreeReport {
        degree: degree as i64,
        target: target.alpha().to_vec(),
        method: DegreeMethod::BoundaryWinding,
        resolution: k,
        excluded: 0,
        certified: true,
    })
}

/// Angle swept from `p0` to `p1`, inserting midpoints while a step exceeds π/2.
fn edge_angle(
    at: &dyn Fn(f64) -> Result<[f64; 2]>,
    s0: f64,
    p0: [f64; 2],
    s1: f64,
    p1: [f64; 2],
    depth: u32,
) -> Result<f64> {
    if p0 == [0.0, 0.0] || p1 == [0.0, 0.0] {
        return Err(Error::TargetOnBoundaryImage);
    }
    let angle = (p0[0] * p1[1] - p0[1] * p1[0]).atan2(p0[0] * p1[0] + p0[1] * p1[1]);
    if angle.abs() <= std::f64::consts::FRAC_PI_2 {
        return Ok(angle);
    }
    if depth >= MAX_EDGE_DEPTH {
        return Err(Error::GridTooCoarse(format!(
            "boundary image still turns by {angle:.3} rad after {depth} refinements"
        )));
    }
    let sm = 0.5 * (s0 + s1);
    let pm = at(sm)?;
    Ok(edge_angle(at, s0, p0, sm, pm, depth + 1)? + edge_angle(at, sm, pm, s1, p1, depth + 1)?)
}

fn preimage_degree(
    map: &SimplexMap,
    target: &SimplexPoint,
    grid: &SimplexGrid,
) -> Result<DegreeReport> {
    let d = grid.dim() - 1;
    let k = grid.resolution();
    let index: std::collections::HashMap<&[usize], usize> = grid
        .lattice()
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_slice(), i))
        .collect();
    let images: Vec<Option<Vec<f64>>> = grid
        .points()
        .par_iter()
        .map(|p| Ok(map(p)?.map(|q| q.alpha()[..d].to_vec())))
        .collect::<Result<_>>()?;
    let excluded = images.iter().filter(|v| v.is_none()).count();
    // a fixed generic offset keeps the target off lower-dimensional faces
    let y: Vec<f64> = (0..d)
        .map(|i| target.alpha()[i] + 1e-9 * grid.level() * (1.0 + (i as f64 + 1.0).sqrt().fract()))
        .collect();
    let mut degree = 0i64;
    for simplex in kuhn_simplices(d, k) {
        let ids: Vec<usize> = simplex.iter().map(|m| index[m.as_slice()]).collect();
        let Some(img) = ids
            .iter()
            .map(|&i| images[i].clone())
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let dom: Vec<Vec<f64>> = simplex
            .iter()
            .map(|m| m[..d].iter().map(|&x| x as f64).collect())
            .collect();
        let dom_sign = orientation(&dom);
        let img_sign = orientation(&img);
        if dom_sign == 0 || img_sign == 0 {
            continue;
        }
        if contains(&img, &y) {
            degree += (dom_sign * img_sign) as i64;
        }
    }
    Ok(DegreeReport {
        degree,
        target: target.alpha().to_vec(),
        method: DegreeMethod::HeuristicPreimage,
        resolution: k,
        excluded,
        certified: false,
    })
}

/// Kuhn simplices of `{y ∈ ℤ^d : 0 ≤ y₁ ≤ … ≤ y_d ≤ k}` in cumulative
/// coordinates, returned as barycentric lattice vectors of length `d + 1`.
pub(crate) fn kuhn_simplices(d: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut perms = Vec::new();
    permutations(&mut (0..d).collect(), 0, &mut perms);
    let mut out = Vec::new();
    let mut base = vec![0usize; d];
    let mut stack = vec![];
    cube_bases(&mut base, 0, k, &mut stack);
    for z in &stack {
        for perm in &perms {
            let mut y: Vec<usize> = z.clone();
            let mut verts = vec![y.clone()];
            for &i in perm {
                y[i] += 1;
                verts.push(y.clone());
            }
            if verts
                .iter()
                .all(|v| v.windows(2).all(|w| w[0] <= w[1]) && v[d - 1] <= k)
            {
                out.push(verts.iter().map(|v| to_barycentric(v, k)).collect());
            }
        }
    }
    out
}

fn cube_bases(z: &mut Vec<usize>, i: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    if i == z.len() {
        out.push(z.clone());
        return;
    }
    for x in 0..k {
        z[i] = x;
        cube_bases(z, i + 1, k, out);
    }
}

fn permutations(v: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == v.len() {
        out.push(v.clone());
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permutations(v, i + 1, out);
        v.swap(i, j);
    }
}

fn to_barycentric(y: &[usize], k: usize) -> Vec<usize> {
    let mut m = Vec::with_capacity(y.len() + 1);
    let mut prev = 0;
    for &c in y {
        m.push(c - prev);
        prev = c;
    }
    m.push(k - prev);
    m
}

/// Sign of the determinant of the edge vectors `v_i - v_0`.
fn orientation(verts: &[Vec<f64>]) -> i32 {
    let d = verts.len() - 1;
    let mut m: Vec<Vec<f64>> = (1..=d)
        .map(|i| (0..d).map(|j| verts[i][j] - verts[0][j]).collect())
        .collect();
    let det = determinant(&mut m);
    if det > 0.0 {
        1
    } else if det < 0.0 {
        -1
    } else {
        0
    }
}

fn determinant(m: &mut [Vec<f64>]) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if m[pivot][c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            m.swap(pivot, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let (top, rest) = m.split_at_mut(r);
            let (pivot_row, row) = (&top[c], &mut rest[0]);
            let f = row[c] / pivot_row[c];
            for (x, p) in row[c..n].iter_mut().zip(&pivot_row[c..n]) {
                *x -= f * p;
            }
        }
    }
    det
}

/// Whether `y` lies in the closed simplex spanned by `verts`.
fn contains(verts: &[Vec<f64>], y: &[f64]) -> bool {
    let d = verts.len() - 1;
    let total = {
        let mut m: Vec<Vec<f64>> = (1..=d)
            .map(|i| (0..d).map(|j| verts[i][j] - verts[0][j]).collect())
            .collect();
        determinant(&mut m)
    };
    // Cramer: barycentric weight of vertex i is det with v_i replaced by y
    let mut sum = 0.0;
    for i in 0..=d {
        let mut vs: Vec<Vec<f64>> = verts.to_vec();
        vs[i] = y.to_vec();
        let mut m: Vec<Vec<f64>> = (1..=d)
            .map(|r| (0..d).map(|j| vs[r][j] - vs[0][j]).collect())
            .collect();
        let w = determinant(&mut m) / total;
        if w < 0.0 {
            return false;
        }
        sum += w;
    }
    (sum - 1.0).abs() < 1e-9
}
