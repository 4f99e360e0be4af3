//! The vector relaxation of the parity polytope.
//!
//! A point of the relaxation assigns a unit vector u_s to every row tuple and a
//! unit vector v_t to every column tuple; its coordinate at the k-tuple s.t is
//! <u_s, v_t>. Maximizing a linear functional over it is the Grothendieck
//! program max sum_{s,t} G_{st} <u_s, v_t>, solved here by low-rank block
//! alternating maximization with random restarts and a sign-vector warm start.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queries::{QueryIndex, TupleSpace};
use crate::rng::StreamRng;

/// Largest side enumerated by [`binary_maximize_bruteforce`].
pub const MAX_BINARY_SIDE: usize = 26;

/// Row-major matrix with `rows` row tuples and `cols` column tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrothendieckMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GrothendieckMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix data of length {} does not fit {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {}) is {}",
                pos / cols,
                pos % cols,
                data[pos]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.cols + t]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.cols..(s + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for s in 0..self.rows {
            for t in 0..self.cols {
                data[t * self.rows + s] = self.get(s, t);
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// w^T G z for sign (or arbitrary) vectors.
    pub fn bilinear(&self, w: &[f64], z: &[f64]) -> f64 {
        (0..self.rows)
            .map(|s| w[s] * self.row(s).iter().zip(z).map(|(g, zt)| g * zt).sum::<f64>())
            .sum()
    }
}

/// Reshapes a vector over the dense tuple space into its row/column matrix.
pub fn build_grothendieck_matrix(g: &[f64], space: TupleSpace) -> Result<GrothendieckMatrix> {
    if g.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "direction has {} entries, tuple space has {}",
            g.len(),
            space.len()
        )));
    }
    GrothendieckMatrix::new(space.rows(), space.cols(), g.to_vec())
}

/// Unit vectors u_s (one per row) and v_t (one per column) in R^rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPoint {
    rows: usize,
    cols: usize,
    rank: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn normalize_or_default(x: &mut [f64]) {
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        x.iter_mut().for_each(|a| *a /= norm);
    } else {
        x.iter_mut().for_each(|a| *a = 0.0);
        x[0] = 1.0;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LPoint {
    /// Builds a point from raw vectors, normalizing each one (zero vectors
    /// become the first basis direction).
    pub fn new(rows: usize, cols: usize, rank: usize, mut u: Vec<f64>, mut v: Vec<f64>) -> Result<Self> {
        if rank == 0 || u.len() != rows * rank || v.len() != cols * rank {
            return Err(Error::InvalidParameter(format!(
                "vector data does not fit {rows} rows, {cols} columns at rank {rank}"
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("LPoint vector entry".into()));
        }
        u.chunks_mut(rank).for_each(normalize_or_default);
        v.chunks_mut(rank).for_each(normalize_or_default);
        Ok(Self { rows, cols, rank, u, v })
    }

    /// Embeds sign vectors along the first basis direction.
    pub fn from_signs(w: &[f64], z: &[f64], rank: usize) -> Result<Self> {
        let embed = |x: &[f64]| {
            let mut out = vec![0.0; x.len() * rank];
            for (i, xi) in x.iter().enumerate() {
                out[i * rank] = if *xi < 0.0 { -1.0 } else { 1.0 };
            }
            out
        };
        Self::new(w.len(), z.len(), rank, embed(w), embed(z))
    }

    /// The rank-1 point of a database row: u_s and v_t are the parities of the
    /// row and column tuples on `e`, so its coordinates are the parity column of `e`.
    pub fn from_row(space: TupleSpace, e: &[i8], rank: usize) -> Result<Self> {
        if e.len() != space.d() {
            return Err(Error::InvalidDatabase(format!(
                "row has {} attributes, expected {}",
                e.len(),
                space.d()
            )));
        }
        let sign = |order: usize, mut idx: usize| {
            let mut s = 1.0;
            for _ in 0..order {
                let a = idx % (space.d() + 1);
                idx /= space.d() + 1;
                if a > 0 && e[a - 1] < 0 {
                    s = -s;
                }
            }
            s
        };
        let w: Vec<f64> = (0..space.rows()).map(|i| sign(space.row_order(), i)).collect();
        let z: Vec<f64> = (0..space.cols()).map(|i| sign(space.col_order(), i)).collect();
        Self::from_signs(&w, &z, rank)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn u(&self, s: usize) -> &[f64] {
        &self.u[s * self.rank..(s + 1) * self.rank]
    }

    pub fn v(&self, t: usize) -> &[f64] {
        &self.v[t * self.rank..(t + 1) * self.rank]
    }

    pub fn eval(&self, s: usize, t: usize) -> f64 {
        dot(self.u(s), self.v(t))
    }

    /// sum_{s,t} G_{st} <u_s, v_t>.
    pub fn objective(&self, g: &GrothendieckMatrix) -> f64 {
        let mut total = 0.0;
        let mut acc = vec![0.0; self.rank];
        for s in 0..g.rows {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (t, gst) in g.row(s).iter().enumerate() {
                if *gst != 0.0 {
                    for (a, vt) in acc.iter_mut().zip(self.v(t)) {
                        *a += gst * vt;
                    }
                }
            }
            total += dot(self.u(s), &acc);
        }
        total
    }

    /// All coordinates <u_s, v_t> in row-major order.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for s in 0..self.rows {
            for t in 0..self.cols {
                out.push(self.eval(s, t));
            }
        }
        out
    }

    pub fn max_norm_error(&self) -> f64 {
        self.u
            .chunks(self.rank)
            .chain(self.v.chunks(self.rank))
            .map(|x| (dot(x, x).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// <u_s, v_t> for the split of `q`. Positions outside the point's catalogs use
/// the first basis direction.
pub fn l_point_eval(point: &LPoint, space: TupleSpace, q: &QueryIndex) -> Result<f64> {
    let (s, t) = space.split(q)?;
    let e1 = |rank: usize| {
        let mut x = vec![0.0; rank];
        x[0] = 1.0;
        x
    };
    let u = if s < point.rows { point.u(s).to_vec() } else { e1(point.rank) };
    let v = if t < point.cols { point.v(t).to_vec() } else { e1(point.rank) };
    Ok(dot(&u, &v))
}

/// Factorization rank at which the low-rank program keeps the full optimum.
pub fn default_rank(rows: usize, cols: usize) -> usize {
    let n = rows + cols;
    let threshold = ((2.0 * n as f64).sqrt().ceil() as usize) + 1;
    n.min(threshold).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    /// `None` selects [`default_rank`].
    pub rank: Option<usize>,
    pub restarts: usize,
    /// Stop when a sweep improves the objective by at most `tol * |objective|`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Use the sign-vector optimum as one of the restarts when it is enumerable.
    pub warm_start: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { rank: None, restarts: 20, tol: 1e-7, max_sweeps: 500, warm_start: true }
    }
}

impl SdpSettings {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("SDP restarts must be at least 1".into()));
        }
        if matches!(self.rank, Some(r) if r < 2) {
            return Err(Error::InvalidParameter("SDP rank must be at least 2".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("SDP tolerance/sweep cap out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpStats {
    pub runs: usize,
    pub total_sweeps: usize,
    /// Runs that stopped at the sweep cap.
    pub capped: usize,
    /// Runs that converged to a value below the best by more than 1e-6 (relative).
    pub stalls: usize,
    /// Best sign-vector value, when the warm start ran.
    pub binary_value: Option<f64>,
}

impl SdpStats {
    pub fn merge(&mut self, other: &SdpStats) {
        self.runs += other.runs;
        self.total_sweeps += other.total_sweeps;
        self.capped += other.capped;
        self.stalls += other.stalls;
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub value: f64,
    pub point: LPoint,
    pub stats: SdpStats,
}

/// One alternating-maximization run.
#[derive(Debug, Clone)]
pub struct AlternationRun {
    pub point: LPoint,
    pub value: f64,
    pub sweeps: usize,
    pub capped: bool,
    /// Objective after every block update (u then v, per sweep), preceded by the start value.
    pub trace: Vec<f64>,
}

/// Alternates the exact block updates u_s = normalize(sum_t G_st v_t) and
/// v_t = normalize(sum_s G_st u_s) from `start`.
pub fn alternate(
    g: &GrothendieckMatrix,
    start: LPoint,
    tol: f64,
    max_sweeps: usize,
) -> Result<AlternationRun> {
    if start.rows != g.rows || start.cols != g.cols {
        return Err(Error::InvalidParameter("start point does not match the matrix shape".into()));
    }
    let r = start.rank;
    let mut p = start;
    let mut value = p.objective(g);
    let mut trace = vec![value];
    let mut sweeps = 0;
    let mut capped = true;
    let mut buf_u = vec![0.0; g.rows * r];
    let mut buf_v = vec![0.0; g.cols * r];

    while sweeps < max_sweeps {
        sweeps += 1;
        buf_u.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..g.rows {
            let out = &mut buf_u[s * r..(s + 1) * r];
            for (t, gst) in g.row(s).iter().enumerate() {
                if *gst != 0.0 {
                    for (o, vt) in out.iter_mut().zip(p.v(t)) {
                        *o += gst * vt;
                    }
                }
            }
        }
        // After a u-update the objective is sum_s ||(G v)_s||.
        let half: f64 = buf_u.chunks(r).map(|x| dot(x, x).sqrt()).sum();
        p.u.copy_from_slice(&buf_u);
        p.u.chunks_mut(r).for_each(normalize_or_default);
        trace.push(half);

        buf_v.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..g.rows {
            let us = &p.u[s * r..(s + 1) * r];
            for (t, gst) in g.row(s).iter().enumerate() {
                if *gst != 0.0 {
                    for (o, ui) in buf_v[t * r..(t + 1) * r].iter_mut().zip(us) {
                        *o += gst * ui;
                    }
                }
            }
        }
        let next: f64 = buf_v.chunks(r).map(|x| dot(x, x).sqrt()).sum();
        p.v.copy_from_slice(&buf_v);
        p.v.chunks_mut(r).for_each(normalize_or_default);
        trace.push(next);

        let improvement = next - value;
        value = next;
        if improvement <= tol * value.abs() {
            capped = false;
            break;
        }
    }
    // Report the value of the point actually returned.
    let value = p.objective(g);
    Ok(AlternationRun { point: p, value, sweeps, capped, trace })
}

fn random_start(rows: usize, cols: usize, rank: usize, rng: &mut impl Rng) -> Result<LPoint> {
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let u = draw(rows * rank);
    let v = draw(cols * rank);
    LPoint::new(rows, cols, rank, u, v)
}

/// Approximately maximizes sum G_st <u_s, v_t> over unit vectors.
pub fn sdp_maximize(
    g: &GrothendieckMatrix,
    settings: &SdpSettings,
    rng: &mut StreamRng,
) -> Result<SdpSolution> {
    settings.validate()?;
    let rank = settings.rank.unwrap_or_else(|| default_rank(g.rows, g.cols));
    let warm = settings.warm_start && g.rows.min(g.cols) <= MAX_BINARY_SIDE;
    let binary = if warm { Some(binary_maximize_bruteforce(g)?) } else { None };

    let random_runs = if binary.is_some() { settings.restarts - 1 } else { settings.restarts };
    let seeds: Vec<u64> = (0..random_runs).map(|_| rng.random()).collect();

    let mut starts: Vec<Option<u64>> = Vec::with_capacity(settings.restarts);
    if binary.is_some() {
        starts.push(None);
    }
    starts.extend(seeds.into_iter().map(Some));

    let runs: Vec<AlternationRun> = starts
        .into_par_iter()
        .map(|start| {
            let init = match start {
                None => {
                    let b = binary.as_ref().expect("warm start requested without a binary solution");
                    LPoint::from_signs(&b.w, &b.z, rank)?
                }
                Some(seed) => random_start(g.rows, g.cols, rank, &mut ChaCha20Rng::seed_from_u64(seed))?,
            };
            alternate(g, init, settings.tol, settings.max_sweeps)
        })
        .collect::<Result<_>>()?;

    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, run)| if run.value > runs[b].value { i } else { b });
    let best_value = runs[best].value;
    let stats = SdpStats {
        runs: runs.len(),
        total_sweeps: runs.iter().map(|r| r.sweeps).sum(),
        capped: runs.iter().filter(|r| r.capped).count(),
        stalls: runs
            .iter()
            .filter(|r| r.value < best_value - 1e-6 * best_value.abs().max(1.0))
            .count(),
        binary_value: binary.as_ref().map(|b| b.value),
    };
    let run = runs.into_iter().nth(best).expect("at least one run");
    Ok(SdpSolution { value: run.value, point: run.point, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub value: f64,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

/// Exact max of w^T G z over sign vectors. For fixed w the best z is
/// sign(G^T w), so only the smaller side is enumerated (in Gray-code order,
/// with its first sign fixed by symmetry).
pub fn binary_maximize_bruteforce(g: &GrothendieckMatrix) -> Result<BinarySolution> {
    let side = g.rows.min(g.cols);
    if side > MAX_BINARY_SIDE {
        return Err(Error::SizeGuard(format!(
            "binary enumeration over {side} signs exceeds {MAX_BINARY_SIDE}"
        )));
    }
    if g.rows > g.cols {
        let t = binary_maximize_bruteforce(&g.transpose())?;
        return Ok(BinarySolution { value: t.value, w: t.z, z: t.w });
    }
    let rows = g.rows;
    let mut w = vec![1.0; rows];
    let mut acc: Vec<f64> = (0..g.cols).map(|t| (0..rows).map(|s| g.get(s, t)).sum()).collect();
    let score = |acc: &[f64]| acc.iter().map(|a| a.abs()).sum::<f64>();
    let mut best_value = score(&acc);
    let mut best_w = w.clone();
    let free = rows - 1;
    for step in 1u64..(1u64 << free) {
        let bit = step.trailing_zeros() as usize + 1;
        w[bit] = -w[bit];
        let delta = 2.0 * w[bit];
        for (a, gst) in acc.iter_mut().zip(g.row(bit)) {
            *a += delta * gst;
        }
        let value = score(&acc);
        if value > best_value {
            best_value = value;
            best_w.copy_from_slice(&w);
        }
    }
    let z: Vec<f64> = (0..g.cols)
        .map(|t| {
            let a: f64 = (0..rows).map(|s| best_w[s] * g.get(s, t)).sum();
            if a < 0.0 { -1.0 } else { 1.0 }
        })
        .collect();
    // Recompute exactly to avoid drift from the incremental updates.
    let value = g.bilinear(&best_w, &z);
    Ok(BinarySolution { value, w: best_w, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queries::parity_eval;
    use crate::rng::RngStreams;
    use proptest::prelude::*;

    fn solve(g: &GrothendieckMatrix) -> SdpSolution {
        sdp_maximize(g, &SdpSettings::default(), &mut RngStreams::new(3).stream(2)).unwrap()
    }

    #[test]
    fn reshape_examples() {
        let space = TupleSpace::new(2, 2).unwrap();
        let g: Vec<f64> = (0..9).map(f64::from).collect();
        let m = build_grothendieck_matrix(&g, space).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 3));
        for q in space.tuples() {
            let (i, j) = (q.0[0], q.0[1]);
            assert_eq!(m.get(i, j), g[space.index(&q).unwrap()]);
        }
        let odd = TupleSpace::new(2, 3).unwrap();
        let m = build_grothendieck_matrix(&vec![0.0; 27], odd).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 9));
        assert!(m.data().iter().all(|&x| x == 0.0));
        assert!(build_grothendieck_matrix(&[f64::NAN; 9], space).is_err());
    }

    #[test]
    fn identity_has_value_two() {
        let g = GrothendieckMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sol = solve(&g);
        assert!((sol.value - 2.0).abs() < 1e-9);
        for i in 0..2 {
            assert!((sol.point.eval(i, i) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_by_two_hadamard_reaches_two_sqrt_two() {
        let g = GrothendieckMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let sol = solve(&g);
        // Independent oracle: angular grid over 2-D unit vectors. By rotation
        // invariance fix u_1 = e_1 and search the angle of u_2; each v_t is
        // then the normalized column combination.
        let steps = 62_832;
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..steps {
            let a = i as f64 * 1e-4;
            let u2 = [a.cos(), a.sin()];
            let c0 = [1.0 + u2[0], u2[1]];
            let c1 = [1.0 - u2[0], -u2[1]];
            let val = (c0[0] * c0[0] + c0[1] * c0[1]).sqrt() + (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
            grid_best = grid_best.max(val);
        }
        assert!((grid_best - 2.0 * 2f64.sqrt()).abs() < 1e-6);
        assert!((sol.value - grid_best).abs() < 1e-6, "{} vs {grid_best}", sol.value);
        assert_eq!(binary_maximize_bruteforce(&g).unwrap().value, 2.0);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let g = GrothendieckMatrix::new(3, 4, vec![0.0; 12]).unwrap();
        let sol = solve(&g);
        assert_eq!(sol.value, 0.0);
        assert!(sol.point.max_norm_error() < 1e-12);
    }

    #[test]
    fn binary_examples() {
        let id = GrothendieckMatrix::new(5, 5, (0..25).map(|i| if i % 6 == 0 { 1.0 } else { 0.0 }).collect())
            .unwrap();
        assert_eq!(binary_maximize_bruteforce(&id).unwrap().value, 5.0);
        let single = GrothendieckMatrix::new(1, 1, vec![5.0]).unwrap();
        assert_eq!(binary_maximize_bruteforce(&single).unwrap().value, 5.0);
        let neg = GrothendieckMatrix::new(1, 1, vec![-5.0]).unwrap();
        assert_eq!(binary_maximize_bruteforce(&neg).unwrap().value, 5.0);
        let wide = GrothendieckMatrix::new(27, 27, vec![1.0; 729]).unwrap();
        assert!(matches!(binary_maximize_bruteforce(&wide), Err(Error::SizeGuard(_))));
    }

    fn full_enumeration(g: &GrothendieckMatrix) -> f64 {
        let signs = |mask: u32, len: usize| -> Vec<f64> {
            (0..len).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
        };
        let mut best = f64::NEG_INFINITY;
        for a in 0..(1u32 << g.rows()) {
            for b in 0..(1u32 << g.cols()) {
                best = best.max(g.bilinear(&signs(a, g.rows()), &signs(b, g.cols())));
            }
        }
        best
    }

    #[test]
    fn unit_inner_product_examples() {
        let p = LPoint::new(1, 3, 2, vec![1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
        let space = TupleSpace::new(2, 2).unwrap();
        assert_eq!(p.eval(0, 0), 1.0);
        assert_eq!(p.eval(0, 1), 0.0);
        assert_eq!(p.eval(0, 2), -1.0);
        assert_eq!(l_point_eval(&p, space, &QueryIndex::new(vec![0, 2])).unwrap(), -1.0);
        // Row 1 is outside this point's catalog and falls back to e_1.
        assert_eq!(l_point_eval(&p, space, &QueryIndex::new(vec![1, 0])).unwrap(), 1.0);
        assert!(l_point_eval(&p, space, &QueryIndex::new(vec![3, 0])).is_err());
    }

    #[test]
    fn rank_one_points_reproduce_parity_columns() {
        for (d, k) in [(1, 1), (2, 2), (3, 3), (4, 2), (4, 3), (3, 4)] {
            let space = TupleSpace::new(d, k).unwrap();
            for bits in 0..(1u32 << d) {
                let e: Vec<i8> = (0..d).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
                let p = LPoint::from_row(space, &e, 3).unwrap();
                for q in space.tuples() {
                    let want = f64::from(parity_eval(&e, &q).unwrap());
                    assert_eq!(l_point_eval(&p, space, &q).unwrap(), want, "d={d} k={k} q={q}");
                }
            }
        }
    }

    #[test]
    fn default_rank_values() {
        assert_eq!(default_rank(1, 1), 2);
        assert_eq!(default_rank(9, 9), 7);
        assert_eq!(default_rank(9, 81), 15);
    }

    fn small_matrix() -> impl Strategy<Value = GrothendieckMatrix> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |data| GrothendieckMatrix::new(r, c, data).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gray_code_matches_full_enumeration(g in small_matrix()) {
            let fast = binary_maximize_bruteforce(&g).unwrap();
            prop_assert!((fast.value - full_enumeration(&g)).abs() < 1e-9);
            prop_assert!((g.bilinear(&fast.w, &fast.z) - fast.value).abs() < 1e-9);
        }

        #[test]
        fn sandwich_and_feasibility(g in small_matrix(), seed in 0u64..1000) {
            let settings = SdpSettings { restarts: 5, ..SdpSettings::default() };
            let sol = sdp_maximize(&g, &settings, &mut RngStreams::new(seed).stream(2)).unwrap();
            let bin = binary_maximize_bruteforce(&g).unwrap().value;
            prop_assert!(sol.point.max_norm_error() < 1e-9);
            prop_assert!((sol.point.objective(&g) - sol.value).abs() < 1e-9);
            prop_assert!(sol.value >= bin - 1e-9);
            prop_assert!(sol.value <= 1.783 * bin + 1e-6);
        }

        #[test]
        fn alternation_is_monotone(g in small_matrix(), seed in 0u64..1000) {
            let mut rng = RngStreams::new(seed).stream(2);
            let start = random_start(g.rows(), g.cols(), 3, &mut rng).unwrap();
            let run = alternate(&g, start, 0.0, 50).unwrap();
            for pair in run.trace.windows(2) {
                prop_assert!(pair[1] >= pair[0] - 1e-9);
            }
        }
    }
}
