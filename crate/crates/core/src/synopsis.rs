//! Johnson-Lindenstrauss compression of a released point into a bit-bounded synopsis.
//!
//! The convex combination sum_i a_i h_i is flattened into one vector family:
//! the combined u_s is the concatenation of sqrt(a_i) u_s^(i), and likewise for
//! v_t, so <u_s, v_t> = h_q and every combined vector has unit norm. One shared
//! Gaussian matrix maps all of them to R^{M'}; coordinates are then stored as
//! fixed-point integers.
//!
//! File layout: the bytes `DPSYN1`, a little-endian u32 header length, the
//! header as JSON, then the u codes followed by the v codes, each packed
//! LSB-first as `bits`-wide two's-complement integers.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::RawPoint;
use crate::queries::{QueryIndex, TupleSpace};
use crate::rng::StreamRng;

pub const MAGIC: &[u8; 6] = b"DPSYN1";

/// Largest stored dimension accepted by the compressor.
pub const MAX_DIMENSION: usize = 1 << 22;

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Bits per stored coordinate: ceil(log2 n) + ceil(log2 M'), at least 2.
pub fn coordinate_bits(n: usize, dimension: usize) -> u32 {
    (ceil_log2(n) + ceil_log2(dimension)).max(2)
}

/// M' = ceil(12 (k ln d + ln(1/beta)) / t^2).
pub fn jl_dimension_for(t: f64, beta: f64, d: usize, k: usize) -> Result<usize> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("deviation t must be positive, got {t}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must be in (0,1), got {beta}")));
    }
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter("d and k must be positive".into()));
    }
    let m = (12.0 * (k as f64 * (d as f64).ln() + (1.0 / beta).ln()) / (t * t)).ceil();
    if !(m.is_finite() && m <= MAX_DIMENSION as f64) {
        return Err(Error::SizeGuard(format!("projected dimension {m} exceeds {MAX_DIMENSION}")));
    }
    Ok((m as usize).max(1))
}

/// (t, M') with t = chi d^{ceil(k/2)/4} / sqrt(n).
pub fn jl_dimension(chi: f64, beta: f64, n: usize, d: usize, k: usize) -> Result<(f64, usize)> {
    if !(chi.is_finite() && chi >= 1.0) {
        return Err(Error::InvalidParameter(format!("chi must be at least 1, got {chi}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let t = chi * (d as f64).powf(k.div_ceil(2) as f64 / 4.0) / (n as f64).sqrt();
    Ok((t, jl_dimension_for(t, beta, d, k)?))
}

/// Dense M' x M matrix with i.i.d. N(0, 1/M') entries.
#[derive(Debug, Clone)]
pub struct JlMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl JlMatrix {
    pub fn sample(rows: usize, cols: usize, rng: &mut StreamRng) -> Self {
        let scale = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynopsisHeader {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// Dimension of the stored vectors (M', or M under the identity shortcut).
    pub dimension: usize,
    /// M' as computed from chi and beta.
    pub jl_dimension: usize,
    /// Dimension M of the combined vectors before projection.
    pub combined_dimension: usize,
    /// True when M' >= M and the combined vectors are stored unprojected.
    pub identity: bool,
    pub bits: u32,
    pub chi: f64,
    pub beta: f64,
    pub t: f64,
    /// Coordinates that fell outside [-1, 1] and were clamped.
    pub clamped: u64,
    /// Dense row indices (base d+1, floor(k/2) entries) of the stored u vectors.
    pub row_catalog: Vec<usize>,
    /// Dense column indices (ceil(k/2) entries) of the stored v vectors.
    pub col_catalog: Vec<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synopsis {
    header: SynopsisHeader,
    u_codes: Vec<i64>,
    v_codes: Vec<i64>,
}

/// Maps x in [-1, 1] to a `bits`-wide integer with step 2^{1-bits}.
fn quantize(x: f64, bits: u32, clamped: &mut u64) -> i64 {
    let scale = (1i64 << (bits - 1)) as f64;
    let max = (1i64 << (bits - 1)) - 1;
    let min = -(1i64 << (bits - 1));
    if x.abs() > 1.0 {
        *clamped += 1;
    }
    ((x.clamp(-1.0, 1.0) * scale).round() as i64).clamp(min, max)
}

fn dequantize(code: i64, bits: u32) -> f64 {
    code as f64 / (1i64 << (bits - 1)) as f64
}

impl Synopsis {
    pub fn header(&self) -> &SynopsisHeader {
        &self.header
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.header.seed = Some(seed);
        self
    }

    pub fn space(&self) -> Result<TupleSpace> {
        TupleSpace::new(self.header.d, self.header.k)
    }

    pub fn u_codes(&self) -> &[i64] {
        &self.u_codes
    }

    pub fn v_codes(&self) -> &[i64] {
        &self.v_codes
    }

    fn decoded(&self, codes: &[i64], slot: usize) -> Vec<f64> {
        let m = self.header.dimension;
        codes[slot * m..(slot + 1) * m].iter().map(|&c| dequantize(c, self.header.bits)).collect()
    }

    /// The decoded stored vector for dense row `s`, if cataloged.
    pub fn u(&self, s: usize) -> Option<Vec<f64>> {
        let slot = self.header.row_catalog.binary_search(&s).ok()?;
        Some(self.decoded(&self.u_codes, slot))
    }

    pub fn v(&self, t: usize) -> Option<Vec<f64>> {
        let slot = self.header.col_catalog.binary_search(&t).ok()?;
        Some(self.decoded(&self.v_codes, slot))
    }

    pub fn vector_count(&self) -> usize {
        self.header.row_catalog.len() + self.header.col_catalog.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let len = u32::try_from(header.len()).map_err(|_| Error::Format("header too long".into()))?;
        let mut out = Vec::with_capacity(10 + header.len() + self.payload_bits().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&header);
        let bits = self.header.bits;
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let mut acc: u128 = 0;
        let mut filled = 0u32;
        for &code in self.u_codes.iter().chain(&self.v_codes) {
            acc |= ((code as u64 & mask) as u128) << filled;
            filled += bits;
            while filled >= 8 {
                out.push(acc as u8);
                acc >>= 8;
                filled -= 8;
            }
        }
        if filled > 0 {
            out.push(acc as u8);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..6] != MAGIC {
            return Err(Error::Format("missing DPSYN1 magic".into()));
        }
        let len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(10..10 + len).ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: SynopsisHeader = serde_json::from_slice(body)?;
        let bits = header.bits;
        if !(2..=63).contains(&bits) {
            return Err(Error::Format(format!("unsupported coordinate width {bits}")));
        }
        let nu = header.row_catalog.len() * header.dimension;
        let nv = header.col_catalog.len() * header.dimension;
        let payload = &bytes[10 + len..];
        if (payload.len() as u128) * 8 < (nu + nv) as u128 * bits as u128 {
            return Err(Error::Format("truncated payload".into()));
        }
        let mut codes = Vec::with_capacity(nu + nv);
        let mut acc: u128 = 0;
        let mut filled = 0u32;
        let mut bytes_iter = payload.iter();
        let mask = (1u128 << bits) - 1;
        for _ in 0..nu + nv {
            while filled < bits {
                acc |= (*bytes_iter.next().expect("length checked") as u128) << filled;
                filled += 8;
            }
            let raw = (acc & mask) as u64;
            acc >>= bits;
            filled -= bits;
            // Sign-extend.
            let shift = 64 - bits;
            codes.push(((raw << shift) as i64) >> shift);
        }
        let v_codes = codes.split_off(nu);
        Ok(Self { header, u_codes: codes, v_codes })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    fn payload_bits(&self) -> usize {
        payload_bits(self.vector_count(), self.header.dimension, self.header.bits)
    }
}

/// Payload size for `vectors` stored vectors of `dimension` coordinates.
pub fn payload_bits(vectors: usize, dimension: usize, bits: u32) -> usize {
    vectors * dimension * bits as usize
}

/// Exact size of the encoded synopsis in bits (magic, length prefix, header and payload).
pub fn synopsis_size_bits(syn: &Synopsis) -> Result<usize> {
    let header = serde_json::to_vec(&syn.header)?.len();
    Ok(8 * (MAGIC.len() + 4 + header) + syn.payload_bits())
}

/// The analytic size bound 24 n d^{ceil(k/2)/2} (k ln d + ln(1/beta)) (log2 n + log2 log2(1/beta)) / chi^2,
/// reported for comparison with [`synopsis_size_bits`].
pub fn size_bound_bits(n: usize, d: usize, k: usize, chi: f64, beta: f64) -> f64 {
    let precision = ((n as f64).log2() + (1.0 / beta).log2().log2()).max(0.0);
    24.0 * n as f64
        * (d as f64).powf(k.div_ceil(2) as f64 / 2.0)
        * (k as f64 * (d as f64).ln() + (1.0 / beta).ln())
        * precision
        / (chi * chi)
}

/// Compresses `raw` for the given queries with one shared Gaussian projection.
pub fn jl_compress(
    raw: &RawPoint,
    queries: &[QueryIndex],
    chi: f64,
    beta: f64,
    rng: &mut StreamRng,
) -> Result<Synopsis> {
    let space = raw.space;
    let (t, m_prime) = jl_dimension(chi, beta, raw.n.max(1), space.d(), space.k())?;
    if raw.components.is_empty() {
        return Err(Error::InvalidParameter("raw point has no components".into()));
    }
    let mut row_catalog = Vec::new();
    let mut col_catalog = Vec::new();
    for q in queries {
        let (s, c) = space.split(q)?;
        row_catalog.push(s);
        col_catalog.push(c);
    }
    row_catalog.sort_unstable();
    row_catalog.dedup();
    col_catalog.sort_unstable();
    col_catalog.dedup();

    let combined_dimension: usize = raw.components.iter().map(|(_, lp)| lp.rank()).sum();
    let combine = |pick: &dyn Fn(&crate::sdp::LPoint) -> Vec<f64>| -> Vec<f64> {
        raw.components
            .iter()
            .flat_map(|(w, lp)| {
                let scale = w.sqrt();
                pick(lp).into_iter().map(move |x| scale * x)
            })
            .collect()
    };
    let e1 = |rank: usize| {
        let mut x = vec![0.0; rank];
        x[0] = 1.0;
        x
    };
    let u_vectors: Vec<Vec<f64>> = row_catalog
        .iter()
        .map(|&s| combine(&|lp| if s < lp.rows() { lp.u(s).to_vec() } else { e1(lp.rank()) }))
        .collect();
    let v_vectors: Vec<Vec<f64>> = col_catalog
        .iter()
        .map(|&c| combine(&|lp| if c < lp.cols() { lp.v(c).to_vec() } else { e1(lp.rank()) }))
        .collect();

    let identity = m_prime >= combined_dimension;
    let pi = (!identity).then(|| JlMatrix::sample(m_prime, combined_dimension, rng));
    let dimension = if identity { combined_dimension } else { m_prime };
    let project = |x: &[f64]| match &pi {
        Some(pi) => pi.apply(x),
        None => x.to_vec(),
    };
    let bits = coordinate_bits(raw.n, dimension);
    if bits > 63 {
        return Err(Error::SizeGuard(format!("{bits} bits per coordinate")));
    }
    let mut clamped = 0u64;
    let mut encode = |vs: &[Vec<f64>]| -> Vec<i64> {
        vs.iter()
            .flat_map(|x| project(x))
            .map(|y| quantize(y, bits, &mut clamped))
            .collect()
    };
    let u_codes = encode(&u_vectors);
    let v_codes = encode(&v_vectors);
    let header = SynopsisHeader {
        d: space.d(),
        k: space.k(),
        n: raw.n,
        dimension,
        jl_dimension: m_prime,
        combined_dimension,
        identity,
        bits,
        chi,
        beta,
        t,
        clamped,
        row_catalog,
        col_catalog,
        seed: None,
    };
    Ok(Synopsis { header, u_codes, v_codes })
}

/// n <Pi u_s, Pi v_t> from the stored codes.
pub fn reconstruct_answer(syn: &Synopsis, q: &QueryIndex) -> Result<f64> {
    let space = syn.space()?;
    let (s, t) = space.split(q).map_err(|_| Error::NotInSupport(q.to_string()))?;
    let u = syn.u(s).ok_or_else(|| Error::NotInSupport(q.to_string()))?;
    let v = syn.v(t).ok_or_else(|| Error::NotInSupport(q.to_string()))?;
    Ok(syn.header.n as f64 * u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
}
