//! Dual norms and Monte Carlo width estimates for the parity polytope K, the
//! sign-vector body L0 and the vector relaxation L.
//!
//! Directions are dense vectors over the tuple space. The dual norm of a body
//! B at w is max_{x in B} <w, x>; all three bodies are symmetric.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queries::{QueryDistribution, TupleSpace};
use crate::rng::{RngStreams, StreamRng};
use crate::sdp::{
    binary_maximize_bruteforce, build_grothendieck_matrix, sdp_maximize, SdpSettings, SdpStats,
};

/// Largest d for which K's dual norm is computed by enumeration.
pub const MAX_BRUTEFORCE_D: usize = 14;

/// Restart cap for width experiments.
pub const WIDTH_MAX_RESTARTS: usize = 20;

/// Coordinates are +1 or -1 with probability p/2 each and 0 otherwise.
pub fn sample_dp_vector(p: f64, m: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("D_p parameter must be in [0,1], got {p}")));
    }
    Ok((0..m)
        .map(|_| {
            let x: f64 = rng.random();
            if x < p / 2.0 {
                1.0
            } else if x < p {
                -1.0
            } else {
                0.0
            }
        })
        .collect())
}

pub fn sample_gaussian_vector(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..m).map(|_| StandardNormal.sample(rng)).collect()
}

/// The dense direction P^{1/2} g, where `g` is given in support order.
pub fn scale_by_distribution(g: &[f64], p: &QueryDistribution) -> Result<Vec<f64>> {
    if g.len() != p.len() {
        return Err(Error::InvalidParameter("direction length differs from the support size".into()));
    }
    let space = p.space();
    let mut dense = vec![0.0; space.len()];
    for ((q, w), gi) in p.entries().iter().zip(g) {
        dense[space.index(q)?] = w.sqrt() * gi;
    }
    Ok(dense)
}

fn check_direction(w: &[f64], space: TupleSpace) -> Result<()> {
    if w.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "direction has {} entries, tuple space has {}",
            w.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Parities of all row tuples and column tuples on the row `bits` (bit i set: attribute i+1 is -1).
fn split_parities(space: TupleSpace, bits: u32) -> (Vec<f64>, Vec<f64>) {
    let base = space.d() + 1;
    let parity = |order: usize, mut idx: usize| {
        let mut s = 1.0;
        for _ in 0..order {
            let a = idx % base;
            idx /= base;
            if a > 0 && bits >> (a - 1) & 1 == 1 {
                s = -s;
            }
        }
        s
    };
    (
        (0..space.rows()).map(|i| parity(space.row_order(), i)).collect(),
        (0..space.cols()).map(|i| parity(space.col_order(), i)).collect(),
    )
}

/// max over rows e in {-1,+1}^d of |sum_q w_q parity(e, q)|.
pub fn dual_norm_k_bruteforce(w: &[f64], space: TupleSpace) -> Result<f64> {
    check_direction(w, space)?;
    if space.d() > MAX_BRUTEFORCE_D {
        return Err(Error::SizeGuard(format!(
            "enumerating 2^{} rows exceeds d={MAX_BRUTEFORCE_D}",
            space.d()
        )));
    }
    let g = build_grothendieck_matrix(w, space)?;
    Ok((0..1u32 << space.d())
        .into_par_iter()
        .map(|bits| {
            let (a, b) = split_parities(space, bits);
            g.bilinear(&a, &b).abs()
        })
        .reduce(|| 0.0, f64::max))
}

/// max over sign vectors of w^T G z.
pub fn dual_norm_l0_bruteforce(w: &[f64], space: TupleSpace) -> Result<f64> {
    check_direction(w, space)?;
    Ok(binary_maximize_bruteforce(&build_grothendieck_matrix(w, space)?)?.value)
}

/// Grothendieck program value for the matrix of `w`, with solver counters.
pub fn dual_norm_l(
    w: &[f64],
    space: TupleSpace,
    settings: &SdpSettings,
    rng: &mut StreamRng,
) -> Result<(f64, SdpStats)> {
    check_direction(w, space)?;
    let sol = sdp_maximize(&build_grothendieck_matrix(w, space)?, settings, rng)?;
    Ok((sol.value, sol.stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    /// Sample standard deviation over sqrt(samples).
    pub stderr: f64,
    pub samples: usize,
    pub body: String,
    pub directions: String,
}

impl WidthEstimate {
    pub fn from_values(values: &[f64], body: impl Into<String>, directions: impl Into<String>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidParameter("width estimates need at least 2 samples".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
            body: body.into(),
            directions: directions.into(),
        })
    }
}

/// Monte Carlo mean of `dual_norm` over `samples` directions. Sample i draws its
/// direction from stream 2i and hands stream 2i+1 to the dual norm.
pub fn estimate_width<S, F>(
    samples: usize,
    streams: &RngStreams,
    sampler: S,
    dual_norm: F,
    body: &str,
    directions: &str,
) -> Result<WidthEstimate>
where
    S: Fn(&mut StreamRng) -> Result<Vec<f64>> + Sync,
    F: Fn(&[f64], &mut StreamRng) -> Result<f64> + Sync,
{
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let dir = sampler(&mut streams.stream(2 * i))?;
            dual_norm(&dir, &mut streams.stream(2 * i + 1))
        })
        .collect::<Result<Vec<f64>>>()?;
    WidthEstimate::from_values(&values, body, directions)
}

/// Gaussian width of P^{1/2} L0 by exact sign-vector enumeration.
pub fn gaussian_width_l0(p: &QueryDistribution, samples: usize, streams: &RngStreams) -> Result<WidthEstimate> {
    let space = p.space();
    estimate_width(
        samples,
        streams,
        |rng| scale_by_distribution(&sample_gaussian_vector(p.len(), rng), p),
        |w, _| dual_norm_l0_bruteforce(w, space),
        "P^1/2 L0",
        "gaussian",
    )
}

/// Gaussian width of P^{1/2} L.
pub fn gaussian_width_l(
    p: &QueryDistribution,
    samples: usize,
    settings: &SdpSettings,
    streams: &RngStreams,
) -> Result<WidthEstimate> {
    let space = p.space();
    estimate_width(
        samples,
        streams,
        |rng| scale_by_distribution(&sample_gaussian_vector(p.len(), rng), p),
        |w, rng| Ok(dual_norm_l(w, space, settings, rng)?.0),
        "P^1/2 L",
        "gaussian",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpWidthReport {
    pub d: usize,
    pub k: usize,
    pub p_param: f64,
    pub k_width: WidthEstimate,
    pub l_width: WidthEstimate,
    /// l_width.mean / k_width.mean.
    pub ratio: f64,
    /// Samples where the K dual norm exceeded the L value by more than 1e-6.
    pub containment_violations: usize,
    /// Largest K value minus L value over the samples.
    pub max_excess: f64,
    pub sdp_stats: SdpStats,
}

/// D_p widths of K and L over the full tuple space, on the same directions.
pub fn dp_width_report(
    space: TupleSpace,
    p_param: f64,
    samples: usize,
    settings: &SdpSettings,
    streams: &RngStreams,
) -> Result<DpWidthReport> {
    let settings = SdpSettings { restarts: settings.restarts.min(WIDTH_MAX_RESTARTS), ..*settings };
    let pairs = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let w = sample_dp_vector(p_param, space.len(), &mut streams.stream(2 * i))?;
            let kv = dual_norm_k_bruteforce(&w, space)?;
            let (lv, stats) = dual_norm_l(&w, space, &settings, &mut streams.stream(2 * i + 1))?;
            Ok((kv, lv, stats))
        })
        .collect::<Result<Vec<_>>>()?;
    let kv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let lv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut sdp_stats = SdpStats::default();
    pairs.iter().for_each(|p| sdp_stats.merge(&p.2));
    let k_width = WidthEstimate::from_values(&kv, "K", format!("D_{p_param}"))?;
    let l_width = WidthEstimate::from_values(&lv, "L", format!("D_{p_param}"))?;
    let excess: Vec<f64> = kv.iter().zip(&lv).map(|(a, b)| a - b).collect();
    Ok(DpWidthReport {
        d: space.d(),
        k: space.k(),
        p_param,
        ratio: if k_width.mean > 0.0 { l_width.mean / k_width.mean } else { f64::NAN },
        containment_violations: excess.iter().filter(|&&e| e > 1e-6).count(),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        k_width,
        l_width,
        sdp_stats,
    })
}
