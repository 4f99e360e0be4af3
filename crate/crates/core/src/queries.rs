//! Databases, parity and marginal queries, and the reduction between them.
//!
//! Rows are vectors in {-1,+1}^d. Attributes are numbered from 1; index 0 is a
//! reserved constant attribute that always evaluates to +1, so every parity of
//! order at most k can be written as a k-tuple. The canonical tuple of a subset
//! T is its sorted elements, left-padded with zeros to length k.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of coordinates a tuple space may have.
pub const MAX_TUPLES: usize = 1 << 24;

/// Largest marginal order for which subsets are enumerated.
pub const MAX_SUBSET_ORDER: usize = 30;

/// The set of k-tuples over the attribute indices {0, 1, ..., d}.
///
/// Tuples are numbered in base d+1, most significant entry first. A tuple
/// splits into a row part (first floor(k/2) entries) and a column part
/// (remaining ceil(k/2) entries), and its dense index is `row * cols + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TupleSpace {
    d: usize,
    k: usize,
}

impl TupleSpace {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("query order k must be at least 1".into()));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("attribute count d must be at least 1".into()));
        }
        let mut size: usize = 1;
        for _ in 0..k {
            size = size
                .checked_mul(d + 1)
                .filter(|&s| s <= MAX_TUPLES)
                .ok_or_else(|| {
                    Error::SizeGuard(format!("(d+1)^k exceeds {MAX_TUPLES} for d={d}, k={k}"))
                })?;
        }
        Ok(Self { d, k })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row_order(&self) -> usize {
        self.k / 2
    }

    pub fn col_order(&self) -> usize {
        self.k - self.k / 2
    }

    pub fn rows(&self) -> usize {
        (self.d + 1).pow(self.row_order() as u32)
    }

    pub fn cols(&self) -> usize {
        (self.d + 1).pow(self.col_order() as u32)
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, q: &QueryIndex) -> Result<()> {
        if q.0.len() != self.k {
            return Err(Error::InvalidQuery(format!(
                "tuple {q} has length {}, expected {}",
                q.0.len(),
                self.k
            )));
        }
        if let Some(&bad) = q.0.iter().find(|&&i| i > self.d) {
            return Err(Error::InvalidQuery(format!(
                "index {bad} in {q} is outside [0, {}]",
                self.d
            )));
        }
        Ok(())
    }

    /// Dense index of a tuple.
    pub fn index(&self, q: &QueryIndex) -> Result<usize> {
        self.check(q)?;
        Ok(q.0.iter().fold(0, |acc, &i| acc * (self.d + 1) + i))
    }

    /// (row, column) position of a tuple in the Grothendieck reshaping.
    pub fn split(&self, q: &QueryIndex) -> Result<(usize, usize)> {
        let idx = self.index(q)?;
        Ok((idx / self.cols(), idx % self.cols()))
    }

    pub fn tuple(&self, index: usize) -> QueryIndex {
        debug_assert!(index < self.len());
        let mut entries = vec![0; self.k];
        let mut rest = index;
        for slot in entries.iter_mut().rev() {
            *slot = rest % (self.d + 1);
            rest /= self.d + 1;
        }
        QueryIndex(entries)
    }

    pub fn tuples(&self) -> impl Iterator<Item = QueryIndex> + '_ {
        (0..self.len()).map(|i| self.tuple(i))
    }

    /// All tuples whose entries are genuine attributes (no constant index).
    pub fn attribute_tuples(&self) -> Vec<QueryIndex> {
        self.tuples().filter(|q| q.0.iter().all(|&i| i > 0)).collect()
    }
}

/// A k-tuple of attribute indices; 0 is the constant attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryIndex(pub Vec<usize>);

impl QueryIndex {
    pub fn new(entries: impl Into<Vec<usize>>) -> Self {
        Self(entries.into())
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// Canonical tuple of a subset: sorted, left-padded with the constant index.
    pub fn canonical(subset: &[usize], k: usize) -> Result<Self> {
        if subset.len() > k {
            return Err(Error::InvalidQuery(format!(
                "subset of size {} does not fit in a {k}-tuple",
                subset.len()
            )));
        }
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.first() == Some(&0) {
            return Err(Error::InvalidQuery(format!(
                "subset {subset:?} must hold distinct attributes >= 1"
            )));
        }
        let mut entries = vec![0; k - sorted.len()];
        entries.extend(sorted);
        Ok(Self(entries))
    }

    /// Attributes occurring an odd number of times; the tuple's parity equals
    /// the parity of this set.
    pub fn odd_support(&self) -> Vec<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in self.0.iter().filter(|&&i| i > 0) {
            *counts.entry(i).or_default() += 1;
        }
        counts.into_iter().filter(|(_, c)| c % 2 == 1).map(|(i, _)| i).collect()
    }
}

impl fmt::Display for QueryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// n rows of d attributes, each -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDatabase {
    d: usize,
    rows: Vec<Vec<i8>>,
}

impl RowDatabase {
    pub fn new(d: usize, rows: Vec<Vec<i8>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDatabase(format!(
                    "row {r} has {} attributes, expected {d}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x != 1 && x != -1) {
                return Err(Error::InvalidDatabase(format!(
                    "row {r} contains {bad}; entries must be -1 or +1"
                )));
            }
        }
        Ok(Self { d, rows })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }
}

/// A k-way marginal: attributes S (1-based, distinct) and target values beta.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarginalQuery {
    attributes: Vec<usize>,
    beta: Vec<i8>,
}

impl MarginalQuery {
    pub fn new(attributes: Vec<usize>, beta: Vec<i8>) -> Result<Self> {
        if attributes.is_empty() || attributes.len() != beta.len() {
            return Err(Error::InvalidQuery(format!(
                "marginal needs |S| = |beta| >= 1, got {} and {}",
                attributes.len(),
                beta.len()
            )));
        }
        let mut sorted = attributes.clone();
        sorted.sort_unstable();
        if sorted[0] == 0 || sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidQuery(format!(
                "marginal attributes {attributes:?} must be distinct and >= 1"
            )));
        }
        if beta.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidQuery(format!("beta {beta:?} must be in {{-1,+1}}")));
        }
        Ok(Self { attributes, beta })
    }

    pub fn attributes(&self) -> &[usize] {
        &self.attributes
    }

    pub fn beta(&self) -> &[i8] {
        &self.beta
    }

    pub fn k(&self) -> usize {
        self.attributes.len()
    }

    fn check_against(&self, d: usize) -> Result<()> {
        match self.attributes.iter().find(|&&i| i > d) {
            Some(bad) => Err(Error::InvalidQuery(format!(
                "marginal attribute {bad} is outside [1, {d}]"
            ))),
            None => Ok(()),
        }
    }
}

/// Probability weights over the tuples of a [`TupleSpace`]; only positive
/// weights are stored, sorted by tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDistribution {
    space: TupleSpace,
    entries: Vec<(QueryIndex, f64)>,
}

pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

impl QueryDistribution {
    pub fn from_weights(
        space: TupleSpace,
        weights: impl IntoIterator<Item = (QueryIndex, f64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<QueryIndex, f64> = BTreeMap::new();
        for (q, w) in weights {
            space.check(&q)?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!("weight {w} for {q}")));
            }
            *merged.entry(q).or_default() += w;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        let entries: Vec<_> = merged.into_iter().filter(|&(_, w)| w > 0.0).collect();
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Self { space, entries })
    }

    /// Uniform over every tuple of the space, constant-index tuples included.
    pub fn uniform(space: TupleSpace) -> Self {
        let w = 1.0 / space.len() as f64;
        Self { space, entries: space.tuples().map(|q| (q, w)).collect() }
    }

    pub fn uniform_over(space: TupleSpace, queries: &[QueryIndex]) -> Result<Self> {
        let w = 1.0 / queries.len() as f64;
        Self::from_weights(space, queries.iter().map(|q| (q.clone(), w)))
    }

    /// The empirical distribution of a multiset of sampled queries.
    pub fn empirical(space: TupleSpace, samples: &[QueryIndex]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDistribution("no samples".into()));
        }
        let mut counts: BTreeMap<QueryIndex, usize> = BTreeMap::new();
        for q in samples {
            space.check(q)?;
            *counts.entry(q.clone()).or_default() += 1;
        }
        let kappa = samples.len() as f64;
        let entries = counts.into_iter().map(|(q, c)| (q, c as f64 / kappa)).collect();
        Ok(Self { space, entries })
    }

    pub fn space(&self) -> TupleSpace {
        self.space
    }

    pub fn support(&self) -> impl Iterator<Item = &QueryIndex> {
        self.entries.iter().map(|(q, _)| q)
    }

    pub fn entries(&self) -> &[(QueryIndex, f64)] {
        &self.entries
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, w)| w)
    }

    pub fn weight(&self, q: &QueryIndex) -> f64 {
        self.entries
            .binary_search_by(|(e, _)| e.cmp(q))
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_row(row: &[i8], q: &[usize]) -> Result<()> {
    match q.iter().find(|&&i| i > row.len()) {
        Some(bad) => Err(Error::InvalidQuery(format!(
            "index {bad} is outside [0, {}]",
            row.len()
        ))),
        None => Ok(()),
    }
}

/// Product of the row's attribute values over the tuple; index 0 contributes +1.
pub fn parity_eval(row: &[i8], q: &QueryIndex) -> Result<i8> {
    check_row(row, &q.0)?;
    Ok(q.0.iter().filter(|&&i| i > 0).map(|&i| row[i - 1]).product())
}

pub fn marginal_eval(row: &[i8], m: &MarginalQuery) -> Result<u8> {
    check_row(row, &m.attributes)?;
    let hit = m.attributes.iter().zip(&m.beta).all(|(&i, &b)| row[i - 1] == b);
    Ok(u8::from(hit))
}

/// y_q = sum over rows of the parity; never touches the 2^d universe.
pub fn true_parity_answers(db: &RowDatabase, queries: &[QueryIndex]) -> Result<Vec<f64>> {
    for q in queries {
        if let Some(bad) = q.0.iter().find(|&&i| i > db.d) {
            return Err(Error::InvalidQuery(format!(
                "index {bad} in {q} is outside [0, {}]",
                db.d
            )));
        }
    }
    let mut answers = vec![0i64; queries.len()];
    for row in &db.rows {
        for (a, q) in answers.iter_mut().zip(queries) {
            let v: i8 = q.0.iter().filter(|&&i| i > 0).map(|&i| row[i - 1]).product();
            *a += i64::from(v);
        }
    }
    Ok(answers.into_iter().map(|a| a as f64).collect())
}

pub fn true_marginal_answer(db: &RowDatabase, m: &MarginalQuery) -> Result<f64> {
    m.check_against(db.d)?;
    let mut count = 0u64;
    for row in &db.rows {
        count += u64::from(marginal_eval(row, m)?);
    }
    Ok(count as f64)
}

fn subsets(attributes: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = attributes.len();
    if k > MAX_SUBSET_ORDER {
        return Err(Error::SizeGuard(format!(
            "2^{k} subsets exceed the k <= {MAX_SUBSET_ORDER} guard"
        )));
    }
    Ok((0u64..1 << k)
        .map(|mask| {
            let mut t: Vec<usize> =
                (0..k).filter(|b| mask >> b & 1 == 1).map(|b| attributes[b]).collect();
            t.sort_unstable();
            t
        })
        .collect())
}

/// alpha_{S,beta,T} = 2^-k * prod_{i in T} beta_i for every T subset of S.
pub fn barak_coefficients(m: &MarginalQuery) -> Result<BTreeMap<Vec<usize>, f64>> {
    let k = m.k();
    let scale = 0.5f64.powi(k as i32);
    let beta_of: HashMap<usize, i8> = m.attributes.iter().copied().zip(m.beta.iter().copied()).collect();
    Ok(subsets(&m.attributes)?
        .into_iter()
        .map(|t| {
            let sign: i8 = t.iter().map(|i| beta_of[i]).product();
            (t, scale * f64::from(sign))
        })
        .collect())
}

/// z_{S,beta} = sum_T alpha_{S,beta,T} * y_T, with y_T looked up by canonical tuple.
pub fn marginals_from_parities(
    estimates: &HashMap<QueryIndex, f64>,
    m: &MarginalQuery,
) -> Result<f64> {
    let k = m.k();
    let mut z = 0.0;
    for (t, alpha) in barak_coefficients(m)? {
        let q = QueryIndex::canonical(&t, k)?;
        let y = estimates
            .get(&q)
            .ok_or_else(|| Error::IncompleteInput(format!("no parity estimate for {q}")))?;
        z += alpha * y;
    }
    Ok(z)
}

/// Pushes a distribution over marginals down to parities: each (S, beta) sends
/// 2^-k of its mass to every subset of S.
pub fn lift_distribution(d: usize, p: &[(MarginalQuery, f64)]) -> Result<QueryDistribution> {
    let k = p
        .first()
        .map(|(m, _)| m.k())
        .ok_or_else(|| Error::InvalidDistribution("empty marginal distribution".into()))?;
    let space = TupleSpace::new(d, k)?;
    let mut lifted = Vec::new();
    for (m, w) in p {
        if m.k() != k {
            return Err(Error::InvalidDistribution(format!(
                "mixed marginal orders {} and {k}",
                m.k()
            )));
        }
        m.check_against(d)?;
        let share = w * 0.5f64.powi(k as i32);
        for t in subsets(&m.attributes)? {
            lifted.push((QueryIndex::canonical(&t, k)?, share));
        }
    }
    QueryDistribution::from_weights(space, lifted)
}

/// Every k-subset of [d] with every beta, equally weighted.
pub fn uniform_k_subsets(d: usize, k: usize) -> Result<Vec<(MarginalQuery, f64)>> {
    if k == 0 || k > d || k > MAX_SUBSET_ORDER {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let attrs: Vec<usize> = (1..=d).collect();
    let mut sets = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn combos(attrs: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..attrs.len() {
            cur.push(attrs[i]);
            combos(attrs, k, i + 1, cur, out);
            cur.pop();
        }
    }
    combos(&attrs, k, 0, &mut current, &mut sets);
    let total = sets.len() * (1usize << k);
    if total > MAX_TUPLES {
        return Err(Error::SizeGuard(format!("{total} marginals")));
    }
    let w = 1.0 / total as f64;
    let mut out = Vec::with_capacity(total);
    for s in sets {
        for mask in 0u64..1 << k {
            let beta = (0..k).map(|b| if mask >> b & 1 == 1 { -1 } else { 1 }).collect();
            out.push((MarginalQuery::new(s.clone(), beta)?, w));
        }
    }
    Ok(out)
}
