//! Database CSV files, distribution specifications and synthetic data.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queries::{
    lift_distribution, uniform_k_subsets, MarginalQuery, QueryDistribution, QueryIndex, RowDatabase,
    TupleSpace,
};
use crate::rng::StreamRng;

/// Reads a CSV with a header line and one column per attribute. Values must be
/// -1/+1, or 0/1 when `remap_binary` is set (0 becomes -1).
pub fn read_database(path: &Path, remap_binary: bool) -> Result<RowDatabase> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let d = reader.headers()?.len();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                let v: i64 = field.parse().map_err(|_| {
                    Error::InvalidDatabase(format!("row {}: '{field}' is not an integer", line + 1))
                })?;
                match (v, remap_binary) {
                    (1, _) => Ok(1),
                    (-1, false) => Ok(-1),
                    (0, true) => Ok(-1),
                    _ => Err(Error::InvalidDatabase(format!(
                        "row {}: value {v} is not {}",
                        line + 1,
                        if remap_binary { "0 or 1" } else { "-1 or +1" }
                    ))),
                }
            })
            .collect::<Result<Vec<i8>>>()?;
        rows.push(row);
    }
    RowDatabase::new(d, rows)
}

/// Number of attribute columns, from the header line only.
pub fn read_attribute_count(path: &Path) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    Ok(reader.headers()?.len())
}

pub fn write_database(path: &Path, db: &RowDatabase) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record((1..=db.d()).map(|i| format!("a{i}")))?;
    for row in db.rows() {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Independent uniform signs.
    Uniform,
    /// Attribute 1 is uniform; every other attribute copies it with probability 3/4.
    Planted,
}

pub fn synthetic_database(n: usize, d: usize, generator: Generator, rng: &mut StreamRng) -> Result<RowDatabase> {
    let sign = |rng: &mut StreamRng| if rng.random::<bool>() { 1 } else { -1 };
    let rows = (0..n)
        .map(|_| match generator {
            Generator::Uniform => (0..d).map(|_| sign(rng)).collect(),
            Generator::Planted => {
                let first = sign(rng);
                let mut row = vec![first];
                for _ in 1..d {
                    row.push(if rng.random_bool(0.75) { first } else { sign(rng) });
                }
                row
            }
        })
        .collect();
    RowDatabase::new(d, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEntry {
    pub attributes: Vec<usize>,
    pub beta: Vec<i8>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleEntry {
    pub tuple: QueryIndex,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Every k-way marginal equally weighted, lifted to parities.
    UniformKSubsets { k: usize },
    /// Uniform over all k-tuples, constant index included.
    UniformTuples { k: usize },
    /// Explicit marginals, lifted to parities.
    Marginals { k: usize, entries: Vec<MarginalEntry> },
    /// Explicit parity tuples.
    Tuples { k: usize, entries: Vec<TupleEntry> },
}

#[derive(Debug, Clone)]
pub struct ResolvedDistribution {
    pub parities: QueryDistribution,
    /// The marginal distribution the parities were lifted from, if any.
    pub marginals: Option<Vec<(MarginalQuery, f64)>>,
}

impl DistributionSpec {
    pub fn k(&self) -> usize {
        match self {
            Self::UniformKSubsets { k }
            | Self::UniformTuples { k }
            | Self::Marginals { k, .. }
            | Self::Tuples { k, .. } => *k,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }

    pub fn resolve(&self, d: usize) -> Result<ResolvedDistribution> {
        let k = self.k();
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!("need 1 <= k <= d, got k={k}, d={d}")));
        }
        let space = TupleSpace::new(d, k)?;
        match self {
            Self::UniformKSubsets { .. } => {
                let marginals = uniform_k_subsets(d, k)?;
                Ok(ResolvedDistribution { parities: lift_distribution(d, &marginals)?, marginals: Some(marginals) })
            }
            Self::UniformTuples { .. } => {
                Ok(ResolvedDistribution { parities: QueryDistribution::uniform(space), marginals: None })
            }
            Self::Marginals { entries, .. } => {
                let marginals = entries
                    .iter()
                    .map(|e| {
                        let m = MarginalQuery::new(e.attributes.clone(), e.beta.clone())?;
                        if m.k() != k {
                            return Err(Error::InvalidDistribution(format!(
                                "marginal {:?} has order {}, expected {k}",
                                e.attributes,
                                m.k()
                            )));
                        }
                        Ok((m, e.weight))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ResolvedDistribution { parities: lift_distribution(d, &marginals)?, marginals: Some(marginals) })
            }
            Self::Tuples { entries, .. } => Ok(ResolvedDistribution {
                parities: QueryDistribution::from_weights(space, entries.iter().map(|e| (e.tuple.clone(), e.weight)))?,
                marginals: None,
            }),
        }
    }
}
