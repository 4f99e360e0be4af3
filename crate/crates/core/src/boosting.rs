//! Boosting the average-error release into worst-case answers.
//!
//! Each round samples queries from the current weights, releases and
//! compresses a synopsis for their empirical distribution, and then raises
//! the weight of the queries that synopsis answers badly. Final answers are
//! per-query medians over rounds.
//!
//! The reweighting reads the true answers and is not privately accounted.

use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseMode, PrivacyLedger, PrivacyParams};
use crate::projection::{relaxed_projection_mechanism, ReleaseOptions, ReleaseResult};
use crate::queries::{true_parity_answers, QueryDistribution, QueryIndex, RowDatabase, TupleSpace};
use crate::rng::{stream, RngStreams};
use crate::sdp::SdpSettings;
use crate::synopsis::{jl_compress, reconstruct_answer, Synopsis};

/// Upper limit on rounds * samples.
pub const MAX_TOTAL_SAMPLES: usize = 1 << 28;

pub const REWEIGHT_NOTE: &str =
    "boosting reweighting uses true answers and is not privately accounted";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub samples: usize,
    /// Hit threshold. `None` uses twice the first round's root-MSE over its sample.
    pub lambda: Option<f64>,
    pub eta: f64,
    pub round_privacy: PrivacyParams,
    pub chi: f64,
    pub beta: f64,
    pub noise: NoiseMode,
    pub iterations: Option<usize>,
    pub sdp: SdpSettings,
}

impl BoostConfig {
    pub fn new(rounds: usize, samples: usize, round_privacy: PrivacyParams) -> Self {
        Self {
            rounds,
            samples,
            lambda: None,
            eta: 0.5,
            round_privacy,
            chi: 1.0,
            beta: 0.1,
            noise: NoiseMode::Gaussian,
            iterations: None,
            sdp: SdpSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.samples == 0 {
            return Err(Error::InvalidParameter("rounds and samples must be at least 1".into()));
        }
        match self.rounds.checked_mul(self.samples) {
            Some(total) if total <= MAX_TOTAL_SAMPLES => {}
            _ => {
                return Err(Error::SizeGuard(format!(
                    "rounds * samples exceeds {MAX_TOTAL_SAMPLES}"
                )))
            }
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidParameter(format!("lambda must be positive, got {l}")));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must be in (0,1], got {}", self.eta)));
        }
        if !(self.chi.is_finite() && self.chi >= 1.0) {
            return Err(Error::InvalidParameter(format!("chi must be at least 1, got {}", self.chi)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must be in (0,1), got {}", self.beta)));
        }
        self.sdp.validate()
    }

    fn release_options(&self) -> ReleaseOptions {
        ReleaseOptions { iterations: self.iterations, noise: self.noise, sdp: self.sdp, width: None }
    }
}

/// kappa = 48 n (d+1)^{ceil(k/2)/2} ln(1/beta) ln(n) / chi^2.
pub fn kappa_recommended(n: usize, d: usize, k: usize, beta: f64, chi: f64) -> f64 {
    48.0 * n as f64
        * ((d + 1) as f64).powf(k.div_ceil(2) as f64 / 2.0)
        * (1.0 / beta).ln()
        * (n as f64).ln()
        / (chi * chi)
}

/// Parameters wired as in the worst-case analysis: T = ceil(3 ln m), a per-round
/// budget of (eps/T, delta/T), beta = delta/(kappa T), and
/// chi = sqrt((k ln d + ln(1/delta)) sqrt(ln n) (k ln d)^{3/2} / eps), at least 1.
pub fn worst_case_params(
    n: usize,
    d: usize,
    k: usize,
    m: usize,
    total: &PrivacyParams,
) -> Result<BoostConfig> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("n and m must be positive".into()));
    }
    let rounds = ((3.0 * (m as f64).ln()).ceil() as usize).max(1);
    let (eps, delta) = (total.epsilon(), total.delta());
    let kld = k as f64 * (d as f64).ln();
    let chi = (((kld + (1.0 / delta).ln()) * (n as f64).ln().sqrt() * kld.powf(1.5)) / eps)
        .sqrt()
        .max(1.0);
    // beta and kappa depend on each other; a few fixed-point steps settle both.
    let mut beta = delta;
    let mut kappa = 1.0;
    for _ in 0..50 {
        kappa = kappa_recommended(n, d, k, beta, chi).max(1.0).ceil();
        beta = delta / (kappa * rounds as f64);
    }
    let mut cfg = BoostConfig::new(rounds, kappa as usize, total.split(rounds)?);
    cfg.chi = chi;
    cfg.beta = beta;
    Ok(cfg)
}

/// Even counts average the two middle values.
pub fn median_aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("median of an empty list".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

pub struct BaseOutput {
    pub synopsis: Synopsis,
    pub release: ReleaseResult,
    pub distribution: QueryDistribution,
}

/// Releases for the empirical distribution of `sampled` and compresses the
/// result into a synopsis that covers `catalog`.
#[allow(clippy::too_many_arguments)]
pub fn base_generator(
    sampled: &[QueryIndex],
    catalog: &[QueryIndex],
    space: TupleSpace,
    db: &RowDatabase,
    pp: &PrivacyParams,
    chi: f64,
    beta: f64,
    options: &ReleaseOptions,
    streams: &RngStreams,
) -> Result<BaseOutput> {
    if sampled.is_empty() {
        return Err(Error::InvalidParameter("base generator needs at least one sample".into()));
    }
    let distribution = QueryDistribution::empirical(space, sampled)?;
    let release = relaxed_projection_mechanism(db, &distribution, pp, options, streams)?;
    let synopsis = jl_compress(&release.raw_point, catalog, chi, beta, &mut streams.stream(stream::JL))?
        .with_seed(streams.seed());
    Ok(BaseOutput { synopsis, release, distribution })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    /// Weight (before the update) of the queries answered within lambda.
    pub hit_mass: f64,
    pub hits: usize,
    pub max_error: f64,
    pub synopsis_identity: bool,
    pub synopsis_dimension: usize,
}

#[derive(Debug, Clone)]
pub struct BoostResult {
    pub queries: Vec<QueryIndex>,
    pub answers: Vec<f64>,
    /// answers[r][q] for round r.
    pub round_answers: Vec<Vec<f64>>,
    pub rounds: Vec<RoundSummary>,
    pub synopses: Vec<Synopsis>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub ledger: PrivacyLedger,
    pub worst_case_error: f64,
    pub kappa_recommended: f64,
}

fn renormalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
}

pub fn boost(
    db: &RowDatabase,
    queries: &[QueryIndex],
    space: TupleSpace,
    cfg: &BoostConfig,
    streams: &RngStreams,
) -> Result<BoostResult> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::InvalidParameter("boosting needs at least one query".into()));
    }
    for q in queries {
        space.check(q)?;
    }
    let m = queries.len();
    let truth = true_parity_answers(db, queries)?;
    let options = cfg.release_options();
    let mut weights = vec![1.0 / m as f64; m];
    let mut ledger = PrivacyLedger::new();
    let mut lambda = cfg.lambda;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut round_answers = Vec::with_capacity(cfg.rounds);
    let mut synopses = Vec::with_capacity(cfg.rounds);

    for r in 0..cfg.rounds {
        let round_streams = streams.child(stream::BOOST).child(r as u64);
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidDistribution(format!("boosting weights: {e}")))?;
        let mut rng = round_streams.stream(stream::BOOST);
        let sampled: Vec<QueryIndex> =
            (0..cfg.samples).map(|_| queries[sampler.sample(&mut rng)].clone()).collect();
        let base = base_generator(
            &sampled,
            queries,
            space,
            db,
            &cfg.round_privacy,
            cfg.chi,
            cfg.beta,
            &options,
            &round_streams,
        )?;
        ledger.absorb(base.release.metadata.ledger.clone());

        let recon = queries
            .iter()
            .map(|q| reconstruct_answer(&base.synopsis, q))
            .collect::<Result<Vec<f64>>>()?;
        let errors: Vec<f64> = recon.iter().zip(&truth).map(|(a, b)| (a - b).abs()).collect();
        let lam = *lambda.get_or_insert_with(|| {
            let idx = |q: &QueryIndex| queries.iter().position(|x| x == q).expect("sampled from queries");
            let msq: f64 = base.distribution.entries().iter().map(|(q, w)| w * errors[idx(q)].powi(2)).sum();
            (2.0 * msq.sqrt()).max(f64::MIN_POSITIVE)
        });

        let mut hit_mass = 0.0;
        let mut hits = 0;
        for (w, e) in weights.iter_mut().zip(&errors) {
            if *e <= lam {
                hit_mass += *w;
                hits += 1;
                *w *= (-cfg.eta).exp();
            } else {
                *w *= cfg.eta.exp();
            }
        }
        renormalize(&mut weights);
        rounds.push(RoundSummary {
            round: r,
            hit_mass,
            hits,
            max_error: errors.iter().copied().fold(0.0, f64::max),
            synopsis_identity: base.synopsis.header().identity,
            synopsis_dimension: base.synopsis.header().dimension,
        });
        round_answers.push(recon);
        synopses.push(base.synopsis);
    }
    ledger.note(REWEIGHT_NOTE);

    let answers = (0..m)
        .map(|i| median_aggregate(&round_answers.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<f64>>>()?;
    let worst_case_error = answers.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(BoostResult {
        queries: queries.to_vec(),
        answers,
        round_answers,
        rounds,
        synopses,
        weights,
        lambda: lambda.expect("at least one round"),
        ledger,
        worst_case_error,
        kappa_recommended: kappa_recommended(db.n(), space.d(), space.k(), cfg.beta, cfg.chi),
    })
}
