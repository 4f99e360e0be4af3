//! The noise-then-project release mechanism and its verification oracles.
//!
//! Frank-Wolfe runs over the coordinates in supp(p), on the body n P^{1/2} L
//! (or n P^{1/2} K for the exact oracle). Released answers are the unscaled
//! coordinates n h_q of the final convex combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frank_wolfe::{frank_wolfe, FwIterate, FwStep, LinearOracle, Vertex};
use crate::noise::{noisy_scaled_answers, privacy_multiplier, NoiseMode, PrivacyLedger, PrivacyParams};
use crate::queries::{parity_eval, QueryDistribution, QueryIndex, RowDatabase, TupleSpace};
use crate::rng::{stream, RngStreams};
use crate::sdp::{build_grothendieck_matrix, l_point_eval, sdp_maximize, LPoint, SdpSettings, SdpStats};

/// Largest d for which the exact parity polytope is enumerated.
pub const MAX_EXACT_D: usize = 14;

/// Linear oracle for n P^{1/2} L: the direction u over supp(p) becomes the
/// Grothendieck matrix of g'_q = sqrt(p_q) u_q, and the maximizing point h is
/// returned as the vertex n sqrt(p_q) h_q.
pub struct SdpOracle {
    space: TupleSpace,
    dense: Vec<usize>,
    splits: Vec<(usize, usize)>,
    sqrt_p: Vec<f64>,
    n: f64,
    settings: SdpSettings,
    streams: RngStreams,
    calls: u64,
    stats: SdpStats,
}

impl SdpOracle {
    pub fn new(p: &QueryDistribution, n: usize, settings: SdpSettings, streams: RngStreams) -> Result<Self> {
        settings.validate()?;
        let space = p.space();
        let mut dense = Vec::with_capacity(p.len());
        let mut splits = Vec::with_capacity(p.len());
        for q in p.support() {
            dense.push(space.index(q)?);
            splits.push(space.split(q)?);
        }
        Ok(Self {
            space,
            dense,
            splits,
            sqrt_p: p.weights().map(f64::sqrt).collect(),
            n: n as f64,
            settings,
            streams,
            calls: 0,
            stats: SdpStats::default(),
        })
    }

    pub fn stats(&self) -> SdpStats {
        self.stats
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl LinearOracle for SdpOracle {
    type Payload = LPoint;

    fn maximize(&mut self, direction: &[f64]) -> Result<Vertex<LPoint>> {
        let mut g = vec![0.0; self.space.len()];
        for ((idx, sp), u) in self.dense.iter().zip(&self.sqrt_p).zip(direction) {
            g[*idx] = sp * u;
        }
        let matrix = build_grothendieck_matrix(&g, self.space)?;
        let mut rng = self.streams.stream(self.calls);
        self.calls += 1;
        let sol = sdp_maximize(&matrix, &self.settings, &mut rng)?;
        self.stats.merge(&sol.stats);
        let point = self
            .splits
            .iter()
            .zip(&self.sqrt_p)
            .map(|(&(s, t), sp)| self.n * sp * sol.point.eval(s, t))
            .collect();
        Ok(Vertex { point, payload: sol.point })
    }
}

/// A vertex +-n P^{1/2} a_e of the exact body, identified by the sign pattern of e.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedRow {
    /// Bit i set means attribute i+1 is -1.
    pub bits: u32,
    pub sign: i8,
}

impl SignedRow {
    pub fn row(&self, d: usize) -> Vec<i8> {
        (0..d).map(|i| if self.bits >> i & 1 == 1 { -1 } else { 1 }).collect()
    }
}

/// Exact linear oracle for n P^{1/2} K by enumerating all 2^d rows.
pub struct ExactKOracle {
    columns: Vec<Vec<f64>>,
}

impl ExactKOracle {
    pub fn new(p: &QueryDistribution, n: usize) -> Result<Self> {
        let d = p.space().d();
        if d > MAX_EXACT_D {
            return Err(Error::SizeGuard(format!("exact oracle enumerates 2^d rows; d={d} > {MAX_EXACT_D}")));
        }
        let columns = (0..1u32 << d)
            .map(|bits| {
                let e = SignedRow { bits, sign: 1 }.row(d);
                p.entries()
                    .iter()
                    .map(|(q, w)| Ok(n as f64 * w.sqrt() * f64::from(parity_eval(&e, q)?)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { columns })
    }

    /// All vertices +-column, in (bits, sign) order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .flat_map(|c| [c.clone(), c.iter().map(|x| -x).collect()])
            .collect()
    }
}

impl LinearOracle for ExactKOracle {
    type Payload = SignedRow;

    fn maximize(&mut self, direction: &[f64]) -> Result<Vertex<SignedRow>> {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, c) in self.columns.iter().enumerate() {
            let a: f64 = c.iter().zip(direction).map(|(x, y)| x * y).sum::<f64>().abs();
            if a > best.1 {
                best = (i, a);
            }
        }
        let c = &self.columns[best.0];
        let dot: f64 = c.iter().zip(direction).map(|(x, y)| x * y).sum();
        let sign: i8 = if dot < 0.0 { -1 } else { 1 };
        let point = c.iter().map(|x| f64::from(sign) * x).collect();
        Ok(Vertex { point, payload: SignedRow { bits: best.0 as u32, sign } })
    }
}

/// Frank-Wolfe projection of the scaled vector `y_scaled` (over supp(p), in
/// support order) onto n P^{1/2} K with the exact vertex oracle.
pub fn exact_projection_k(
    y_scaled: &[f64],
    p: &QueryDistribution,
    n: usize,
    iterations: usize,
) -> Result<FwIterate<SignedRow>> {
    if y_scaled.len() != p.len() {
        return Err(Error::InvalidParameter("vector length differs from the support size".into()));
    }
    frank_wolfe(&mut ExactKOracle::new(p, n)?, y_scaled, iterations)
}

/// T = max(1, ceil(4n / (c * width))), where `width` stands in for the mean width of L.
pub fn iterations_from_width(n: usize, c: f64, width: f64) -> usize {
    let t = (4.0 * n as f64 / (c * width)).ceil();
    if t.is_finite() && t >= 1.0 {
        t as usize
    } else {
        1
    }
}

/// Default iteration count, using (d+1)^{ceil(k/2)/2} for the width.
pub fn default_iterations(n: usize, d: usize, k: usize, pp: &PrivacyParams) -> usize {
    let width = ((d + 1) as f64).powf(k.div_ceil(2) as f64 / 2.0);
    iterations_from_width(n, privacy_multiplier(pp), width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseOptions {
    /// `None` selects [`default_iterations`] (or the width override below).
    pub iterations: Option<usize>,
    pub noise: NoiseMode,
    pub sdp: SdpSettings,
    /// Measured mean width of L used instead of the analytic bound when choosing T.
    pub width: Option<f64>,
}

impl Default for ReleaseOptions {
    fn default() -> Self {
        Self { iterations: None, noise: NoiseMode::Gaussian, sdp: SdpSettings::default(), width: None }
    }
}

/// A convex combination of relaxation points: h = sum_i weight_i h_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub space: TupleSpace,
    pub n: usize,
    pub components: Vec<(f64, LPoint)>,
}

impl RawPoint {
    /// h_q.
    pub fn eval(&self, q: &QueryIndex) -> Result<f64> {
        self.components
            .iter()
            .map(|(w, lp)| Ok(w * l_point_eval(lp, self.space, q)?))
            .sum()
    }

    /// n h_q, the released answer for q.
    pub fn answer(&self, q: &QueryIndex) -> Result<f64> {
        let n = self.n as f64;
        Ok((n * self.eval(q)?).clamp(-n, n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub tuple: QueryIndex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseMetadata {
    pub epsilon: f64,
    pub delta: f64,
    pub noise: NoiseMode,
    pub sigma: f64,
    pub iterations: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sdp: SdpSettings,
    pub sdp_stats: SdpStats,
    pub final_step: Option<FwStep>,
    pub ledger: PrivacyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseResult {
    pub answers: Vec<Answer>,
    pub raw_point: RawPoint,
    pub metadata: ReleaseMetadata,
}

impl ReleaseResult {
    pub fn values(&self) -> Vec<f64> {
        self.answers.iter().map(|a| a.value).collect()
    }
}

/// Releases n h_q for every q in supp(p), where h in L is the Frank-Wolfe
/// projection of the noisy weighted answers onto n P^{1/2} L.
pub fn relaxed_projection_mechanism(
    db: &RowDatabase,
    p: &QueryDistribution,
    pp: &PrivacyParams,
    options: &ReleaseOptions,
    streams: &RngStreams,
) -> Result<ReleaseResult> {
    let n = db.n();
    if n == 0 {
        return Err(Error::InvalidDatabase("the mechanism needs at least one row".into()));
    }
    options.sdp.validate()?;
    let space = p.space();
    let iterations = match (options.iterations, options.width) {
        (Some(t), _) => t,
        (None, Some(w)) => iterations_from_width(n, privacy_multiplier(pp), w),
        (None, None) => default_iterations(n, space.d(), space.k(), pp),
    };
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }

    let mut ledger = PrivacyLedger::new();
    let noisy = noisy_scaled_answers(db, p, pp, options.noise, &mut streams.stream(stream::NOISE), &mut ledger)?;

    let mut oracle = SdpOracle::new(p, n, options.sdp, streams.child(stream::SDP))?;
    let fw = frank_wolfe(&mut oracle, &noisy.noisy, iterations)?;

    let raw_point = RawPoint { space, n, components: fw.history };
    let answers = noisy
        .queries
        .iter()
        .map(|q| Ok(Answer { tuple: q.clone(), value: raw_point.answer(q)? }))
        .collect::<Result<Vec<_>>>()?;

    let metadata = ReleaseMetadata {
        epsilon: pp.epsilon(),
        delta: pp.delta(),
        noise: options.noise,
        sigma: noisy.sigma,
        iterations,
        seed: streams.seed(),
        n,
        d: space.d(),
        k: space.k(),
        sdp: options.sdp,
        sdp_stats: oracle.stats(),
        final_step: fw.trace.last().copied(),
        ledger,
    };
    Ok(ReleaseResult { answers, raw_point, metadata })
}

/// The plain Gaussian mechanism P^{-1/2} y~ with the same noise draw as the
/// projected release under the same seed.
pub fn unprojected_answers(
    db: &RowDatabase,
    p: &QueryDistribution,
    pp: &PrivacyParams,
    streams: &RngStreams,
) -> Result<Vec<f64>> {
    let mut ledger = PrivacyLedger::new();
    let noisy =
        noisy_scaled_answers(db, p, pp, NoiseMode::Gaussian, &mut streams.stream(stream::NOISE), &mut ledger)?;
    Ok(noisy
        .noisy
        .iter()
        .zip(p.weights())
        .map(|(y, w)| if w > 0.0 { y / w.sqrt() } else { 0.0 })
        .collect())
}

/// E_{q~p} |truth_q - estimate_q|^2, with vectors in support order.
pub fn mse(p: &QueryDistribution, truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != p.len() || estimate.len() != p.len() {
        return Err(Error::InvalidParameter("answer vectors must match the support size".into()));
    }
    Ok(p.weights()
        .zip(truth.iter().zip(estimate))
        .map(|(w, (a, b))| w * (a - b) * (a - b))
        .sum())
}

/// max_q |truth_q - estimate_q|.
pub fn worst_case_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::InvalidParameter("answer vectors differ in length".into()));
    }
    Ok(truth.iter().zip(estimate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queries::true_parity_answers;

    fn q(e: &[usize]) -> QueryIndex {
        QueryIndex::new(e.to_vec())
    }

    #[test]
    fn default_iterations_examples() {
        let c3 = PrivacyParams::new(1.0, (-2.0f64).exp()).unwrap();
        assert_eq!(default_iterations(16, 8, 2, &c3), 8);
        assert_eq!(default_iterations(1, 8, 2, &c3), 1);
        let huge_c = PrivacyParams::new(1e-9, 1e-6).unwrap();
        assert_eq!(default_iterations(1000, 8, 2, &huge_c), 1);
    }

    #[test]
    fn metric_examples() {
        let space = TupleSpace::new(2, 1).unwrap();
        let point = QueryDistribution::uniform_over(space, &[q(&[1])]).unwrap();
        assert_eq!(mse(&point, &[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(mse(&point, &[1.0], &[4.0]).unwrap(), 9.0);
        assert_eq!(worst_case_error(&[1.0], &[4.0]).unwrap(), 3.0);
        let two = QueryDistribution::uniform_over(space, &[q(&[1]), q(&[2])]).unwrap();
        assert_eq!(mse(&two, &[0.0, 0.0], &[0.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn exact_projection_of_interval() {
        let space = TupleSpace::new(1, 1).unwrap();
        let p = QueryDistribution::uniform_over(space, &[q(&[1])]).unwrap();
        let it = exact_projection_k(&[10.0], &p, 5, 100).unwrap();
        assert!((it.point[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn exact_projection_keeps_feasible_points() {
        let space = TupleSpace::new(3, 2).unwrap();
        let p = QueryDistribution::uniform(space);
        let db = RowDatabase::new(3, vec![vec![1, -1, 1], vec![-1, -1, 1], vec![1, 1, 1]]).unwrap();
        let queries: Vec<_> = p.support().cloned().collect();
        let y = true_parity_answers(&db, &queries).unwrap();
        let scaled: Vec<f64> = y.iter().zip(p.weights()).map(|(a, w)| a * w.sqrt()).collect();
        let it = exact_projection_k(&scaled, &p, 3, 20_000).unwrap();
        let bound = crate::frank_wolfe::convergence_bound(3.0, 20_000);
        assert!(it.objective(&scaled) <= bound + 1e-9);
    }

    fn tiny() -> (RowDatabase, QueryDistribution, PrivacyParams) {
        let db = RowDatabase::new(3, vec![vec![1, -1, 1], vec![1, 1, -1], vec![-1, -1, -1], vec![1, -1, 1]])
            .unwrap();
        let p = QueryDistribution::uniform(TupleSpace::new(3, 2).unwrap());
        (db, p, PrivacyParams::new(1.0, 1e-6).unwrap())
    }

    #[test]
    fn noiseless_release_is_close_to_truth() {
        let (db, p, pp) = tiny();
        let t = 200;
        let opts = ReleaseOptions {
            iterations: Some(t),
            noise: NoiseMode::Disabled,
            sdp: SdpSettings { restarts: 4, ..SdpSettings::default() },
            width: None,
        };
        let out = relaxed_projection_mechanism(&db, &p, &pp, &opts, &RngStreams::new(9)).unwrap();
        let truth = true_parity_answers(&db, &out.answers.iter().map(|a| a.tuple.clone()).collect::<Vec<_>>())
            .unwrap();
        let n = db.n() as f64;
        let rmse = mse(&p, &truth, &out.values()).unwrap().sqrt();
        assert!(rmse <= (4.0 * n * n / (t as f64 + 3.0)).sqrt(), "rmse {rmse}");
        assert_eq!(out.metadata.ledger.total_epsilon(), 0.0);
    }

    #[test]
    fn release_is_bounded_consistent_and_deterministic() {
        let (db, p, pp) = tiny();
        let opts = ReleaseOptions {
            sdp: SdpSettings { restarts: 3, ..SdpSettings::default() },
            ..ReleaseOptions::default()
        };
        let a = relaxed_projection_mechanism(&db, &p, &pp, &opts, &RngStreams::new(4)).unwrap();
        let b = relaxed_projection_mechanism(&db, &p, &pp, &opts, &RngStreams::new(4)).unwrap();
        assert_eq!(a, b);
        let n = db.n() as f64;
        let weight: f64 = a.raw_point.components.iter().map(|(w, _)| w).sum();
        assert!((weight - 1.0).abs() < 1e-9);
        for ans in &a.answers {
            assert!(ans.value.abs() <= n);
            let direct: f64 = a
                .raw_point
                .components
                .iter()
                .map(|(w, lp)| w * l_point_eval(lp, p.space(), &ans.tuple).unwrap())
                .sum();
            assert!((ans.value - n * direct).abs() < 1e-6);
        }
        assert!((a.metadata.ledger.total_epsilon() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_database_rejected() {
        let (_, p, pp) = tiny();
        let db = RowDatabase::new(3, vec![]).unwrap();
        assert!(relaxed_projection_mechanism(&db, &p, &pp, &ReleaseOptions::default(), &RngStreams::new(1))
            .is_err());
    }
}
