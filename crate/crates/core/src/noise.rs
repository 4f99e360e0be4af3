//! Privacy parameters, the Gaussian noise step, and a composition ledger.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queries::{true_parity_answers, QueryDistribution, QueryIndex, RowDatabase};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must be in (0,1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Splits the budget evenly over `parts` sequential uses.
    pub fn split(&self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::InvalidParameter("cannot split a budget into 0 parts".into()));
        }
        Self::new(self.epsilon / parts as f64, self.delta / parts as f64)
    }
}

/// c(eps, delta) = (1 + sqrt(2 ln(1/delta))) / eps: the Gaussian standard
/// deviation per unit of l2 sensitivity.
pub fn privacy_multiplier(pp: &PrivacyParams) -> f64 {
    (1.0 + (2.0 * (1.0 / pp.delta).ln()).sqrt()) / pp.epsilon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub mechanism: String,
    pub epsilon: f64,
    pub delta: f64,
}

/// Simple (additive) composition of (eps, delta) charges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    entries: Vec<LedgerEntry>,
    notes: Vec<String>,
}

impl PrivacyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, mechanism: impl Into<String>, pp: &PrivacyParams) {
        self.entries.push(LedgerEntry {
            mechanism: mechanism.into(),
            epsilon: pp.epsilon,
            delta: pp.delta,
        });
    }

    /// Records a step that touches the data but is not covered by the totals.
    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn absorb(&mut self, other: PrivacyLedger) {
        self.entries.extend(other.entries);
        self.notes.extend(other.notes);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn total_epsilon(&self) -> f64 {
        self.entries.iter().map(|e| e.epsilon).sum()
    }

    pub fn total_delta(&self) -> f64 {
        self.entries.iter().map(|e| e.delta).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Gaussian,
    /// Test mode: w = 0. Provides no privacy.
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyAnswers {
    /// Support of p, in the distribution's order.
    pub queries: Vec<QueryIndex>,
    /// sqrt(p_i) * y_i for each query.
    pub scaled_truth: Vec<f64>,
    /// The released vector sqrt(p_i) * y_i + w_i.
    pub noisy: Vec<f64>,
    /// Standard deviation of each w_i.
    pub sigma: f64,
}

/// y~ = P^{1/2} A x + w with w ~ N(0, c(eps,delta)^2) i.i.d. over supp(p).
///
/// Every column of P^{1/2} A has unit l2 norm (entries are +-1 and the weights
/// sum to 1), which is the sensitivity the multiplier is calibrated for. The
/// noise is drawn before the data is read, so it depends only on the stream.
pub fn noisy_scaled_answers(
    db: &RowDatabase,
    p: &QueryDistribution,
    pp: &PrivacyParams,
    mode: NoiseMode,
    rng: &mut StreamRng,
    ledger: &mut PrivacyLedger,
) -> Result<NoisyAnswers> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if db.d() != p.space().d() {
        return Err(Error::InvalidParameter(format!(
            "database has d={} but the distribution expects d={}",
            db.d(),
            p.space().d()
        )));
    }
    let sigma = match mode {
        NoiseMode::Gaussian => privacy_multiplier(pp),
        NoiseMode::Disabled => 0.0,
    };
    let noise: Vec<f64> = (0..p.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();

    let queries: Vec<QueryIndex> = p.support().cloned().collect();
    let truth = true_parity_answers(db, &queries)?;
    let scaled_truth: Vec<f64> =
        truth.iter().zip(p.weights()).map(|(y, w)| w.sqrt() * y).collect();
    let noisy = scaled_truth.iter().zip(&noise).map(|(s, w)| s + w).collect();

    match mode {
        NoiseMode::Gaussian => ledger.charge("gaussian", pp),
        NoiseMode::Disabled => ledger.note("noise disabled: output is not private"),
    }
    Ok(NoisyAnswers { queries, scaled_truth, noisy, sigma })
}
