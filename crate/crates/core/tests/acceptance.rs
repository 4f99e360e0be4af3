//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). Every criterion is
//! evaluated at its stated tolerance. The process exits 0 after reporting
//! unless DPMARG_ACCEPTANCE_STRICT is set, in which case any failure exits 1.

mod support;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use dpmarg::frank_wolfe::{convergence_bound, frank_wolfe};
use dpmarg::geometry::{dp_width_report, gaussian_width_l0};
use dpmarg::io::{synthetic_database, Generator};
use dpmarg::noise::{privacy_multiplier, NoiseMode, PrivacyParams};
use dpmarg::projection::{
    exact_projection_k, mse, relaxed_projection_mechanism, unprojected_answers, ExactKOracle,
    ReleaseOptions,
};
use dpmarg::boosting::{boost, BoostConfig};
use dpmarg::queries::{
    marginals_from_parities, true_marginal_answer, true_parity_answers, MarginalQuery, QueryDistribution,
    QueryIndex, RowDatabase, TupleSpace,
};
use dpmarg::rng::{stream, RngStreams};
use dpmarg::sdp::{binary_maximize_bruteforce, sdp_maximize, GrothendieckMatrix, SdpSettings};
use dpmarg::synopsis::{jl_compress, reconstruct_answer, JlMatrix};
use dpmarg::Result;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_db(n: usize, d: usize, streams: &RngStreams) -> Result<RowDatabase> {
    synthetic_database(n, d, Generator::Uniform, &mut streams.stream(stream::DATA))
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn subsets_of_size(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize == k {
            out.push((0..d).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect());
        }
    }
    out
}

fn criterion_1() -> Result<Outcome> {
    let mut rng = RngStreams::new(101).stream(1);
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for i in 0..200u64 {
        let n = rng.random_range(0..=50);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=3usize.min(d));
        let db = random_db(n, d, &RngStreams::new(1000 + i))?;
        let space = TupleSpace::new(d, k)?;
        let queries: Vec<QueryIndex> = space.tuples().collect();
        let parities: HashMap<QueryIndex, f64> =
            queries.iter().cloned().zip(true_parity_answers(&db, &queries)?).collect();
        for set in subsets_of_size(d, k) {
            for bmask in 0u64..(1 << k) {
                let beta: Vec<i8> = support::signs(bmask, k).iter().map(|&s| s as i8).collect();
                let m = MarginalQuery::new(set.clone(), beta)?;
                let z = marginals_from_parities(&parities, &m)?;
                let brute = db
                    .rows()
                    .iter()
                    .filter(|row| set.iter().zip(m.beta()).all(|(&a, &b)| row[a - 1] == b))
                    .count() as f64;
                if z != brute || true_marginal_answer(&db, &m)? != brute {
                    mismatches += 1;
                }
                checked += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} marginals over 200 databases, {mismatches} mismatches"))
}

fn criterion_2() -> Result<Outcome> {
    let space = TupleSpace::new(4, 2)?;
    let p = QueryDistribution::uniform(space);
    let n = 3usize;
    let pp = PrivacyParams::new(1.0, 1e-6)?;
    let c = privacy_multiplier(&pp);
    let mut worst_slack = f64::INFINITY;
    let mut worst_qp_gap = 0.0f64;
    let mut pass = true;
    for seed in 0..5u64 {
        let streams = RngStreams::new(200 + seed);
        let db = random_db(n, 4, &streams)?;
        let queries: Vec<QueryIndex> = p.support().cloned().collect();
        let y = true_parity_answers(&db, &queries)?;
        let mut rng = streams.stream(stream::NOISE);
        let r: Vec<f64> = y
            .iter()
            .zip(p.weights())
            .map(|(yi, w)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                w.sqrt() * yi + c * z
            })
            .collect();
        let oracle = ExactKOracle::new(&p, n)?;
        let vertices = oracle.vertices();
        let reference = exact_projection_k(&r, &p, n, 100_000)?.objective(&r);
        let qp = support::hull_distance_sq(&vertices, &r);
        worst_qp_gap = worst_qp_gap.max((reference - qp).abs());
        if (reference - qp).abs() > 1e-5 {
            pass = false;
        }
        let best = reference.min(qp);
        for t in [10usize, 100, 1000] {
            let it = frank_wolfe(&mut ExactKOracle::new(&p, n)?, &r, t)?;
            let excess = it.objective(&r) - best;
            let bound = convergence_bound(n as f64, t) + 1e-9;
            worst_slack = worst_slack.min(bound - excess);
            if excess > bound {
                pass = false;
            }
        }
    }
    outcome(
        pass,
        format!(
            "{} vertices; min slack of 4 diam^2/(T+3) bound {worst_slack:.3e}; 1e5-iteration FW vs QP |diff| {worst_qp_gap:.2e}",
            2 << 4
        ),
    )
}

fn criterion_3() -> Result<Outcome> {
    let mut rng = RngStreams::new(303).stream(1);
    let settings = SdpSettings::default();
    let mut pass = true;
    let mut max_ratio = 0.0f64;
    for i in 0..100u64 {
        let rows = rng.random_range(1..=6usize);
        let cols = rng.random_range(1..=12 - rows);
        let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        let g = GrothendieckMatrix::new(rows, cols, data)?;
        let bin = binary_maximize_bruteforce(&g)?.value;
        let sol = sdp_maximize(&g, &settings, &mut RngStreams::new(i).stream(stream::SDP))?;
        if !(bin <= sol.value + 1e-9 && sol.value <= 1.783 * bin + 1e-6) {
            pass = false;
        }
        if bin > 0.0 {
            max_ratio = max_ratio.max(sol.value / bin);
        }
    }
    outcome(pass, format!("100 matrices; max sdp/binary ratio {max_ratio:.4}"))
}

fn criterion_4() -> Result<Outcome> {
    let d = 6usize;
    let p = QueryDistribution::uniform(TupleSpace::new(d, 2)?);
    let est = gaussian_width_l0(&p, 200, &RngStreams::new(404))?;
    let bound = (d as f64).powf(1.0 / 2.0);
    outcome(
        est.mean <= bound + 3.0 * est.stderr,
        format!("width {:.4} +- {:.4} vs bound d^(1/2) = {bound:.4}", est.mean, est.stderr),
    )
}

fn release_rmse(db: &RowDatabase, p: &QueryDistribution, pp: &PrivacyParams, seed: u64) -> Result<(f64, f64)> {
    let streams = RngStreams::new(seed);
    let queries: Vec<QueryIndex> = p.support().cloned().collect();
    let truth = true_parity_answers(db, &queries)?;
    let out = relaxed_projection_mechanism(db, p, pp, &ReleaseOptions::default(), &streams)?;
    let raw = unprojected_answers(db, p, pp, &streams)?;
    Ok((mse(p, &truth, &out.values())?.sqrt(), mse(p, &truth, &raw)?.sqrt()))
}

fn criterion_5() -> Result<Outcome> {
    let p = QueryDistribution::uniform(TupleSpace::new(8, 2)?);
    let pp = PrivacyParams::new(1.0, 1e-6)?;
    let mut proj = Vec::new();
    let mut raw = Vec::new();
    for seed in 0..20u64 {
        let db = random_db(8, 8, &RngStreams::new(500 + seed))?;
        let (a, b) = release_rmse(&db, &p, &pp, 5000 + seed)?;
        proj.push(a);
        raw.push(b);
    }
    let (mp, _) = mean_stderr(&proj);
    let (mr, _) = mean_stderr(&raw);
    outcome(mp < mr, format!("mean root-MSE projected {mp:.3} vs unprojected {mr:.3}"))
}

fn criterion_6() -> Result<Outcome> {
    let (d, k) = (8usize, 2usize);
    let p = QueryDistribution::uniform(TupleSpace::new(d, k)?);
    let pp = PrivacyParams::new(1.0, 1e-6)?;
    let c = privacy_multiplier(&pp);
    let bound = 10.0 * ((d + 1) as f64).powf(k.div_ceil(2) as f64 / 4.0);
    let mut stats = Vec::new();
    for n in [4usize, 16, 64] {
        let mut ratios = Vec::new();
        for seed in 0..20u64 {
            let db = random_db(n, d, &RngStreams::new(600 + 97 * n as u64 + seed))?;
            let (rmse, _) = release_rmse(&db, &p, &pp, 6000 + 97 * n as u64 + seed)?;
            ratios.push(rmse / (c * n as f64).sqrt());
        }
        stats.push((n, mean_stderr(&ratios)));
    }
    let bounded = stats.iter().all(|(_, (m, _))| *m <= bound);
    let monotone = stats
        .windows(2)
        .all(|w| w[1].1 .0 <= w[0].1 .0 + 2.0 * (w[0].1 .1.powi(2) + w[1].1 .1.powi(2)).sqrt());
    let detail = stats
        .iter()
        .map(|(n, (m, s))| format!("n={n}: {m:.4}+-{s:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(bounded && monotone, format!("ratio root-MSE/sqrt(cn) {detail}; bound {bound:.3}; bounded={bounded} non-increasing={monotone}"))
}

fn criterion_7() -> Result<Outcome> {
    let (m_prime, dim, t, trials) = (100usize, 64usize, 0.3f64, 10_000usize);
    let streams = RngStreams::new(707);
    let mut rng = streams.stream(1);
    let unit = |rng: &mut dpmarg::rng::StreamRng| {
        let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= norm);
        x
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut deviations = 0usize;
    let mut same = Vec::with_capacity(trials);
    let mut orth = Vec::with_capacity(trials);
    for _ in 0..trials {
        let pi = JlMatrix::sample(m_prime, dim, &mut rng);
        let u = unit(&mut rng);
        let v = unit(&mut rng);
        let (pu, pv) = (pi.apply(&u), pi.apply(&v));
        if (dot(&pu, &pv) - dot(&u, &v)).abs() > 3.0 * t {
            deviations += 1;
        }
        same.push(dot(&pu, &pu));
        // Component of v orthogonal to u.
        let uv = dot(&u, &v);
        let mut w: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - uv * b).collect();
        let norm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|a| *a /= norm);
        orth.push(dot(&pu, &pi.apply(&w)));
    }
    let rate = deviations as f64 / trials as f64;
    let bound = 6.0 * (-(m_prime as f64) * t * t / 6.0).exp();
    let (ms, ss) = mean_stderr(&same);
    let (mo, so) = mean_stderr(&orth);
    let pass = rate <= bound + 0.02 && (ms - 1.0).abs() <= 3.0 * ss && mo.abs() <= 3.0 * so;
    outcome(
        pass,
        format!("tail rate {rate:.4} vs bound {bound:.4}; E<Pu,Pu> = {ms:.4}+-{ss:.4}; E<Pu,Pw> = {mo:.4}+-{so:.4}"),
    )
}

fn criterion_8() -> Result<Outcome> {
    let space = TupleSpace::new(6, 2)?;
    let p = QueryDistribution::uniform(space);
    let pp = PrivacyParams::new(1.0, 1e-6)?;
    let n = 64usize;
    let queries: Vec<QueryIndex> = space.tuples().collect();
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut projected = 0;
    for seed in 0..10u64 {
        let streams = RngStreams::new(800 + seed);
        let db = random_db(n, 6, &streams)?;
        let opts = ReleaseOptions {
            iterations: Some(150),
            sdp: SdpSettings { restarts: 5, ..SdpSettings::default() },
            ..ReleaseOptions::default()
        };
        let out = relaxed_projection_mechanism(&db, &p, &pp, &opts, &streams)?;
        let syn = jl_compress(&out.raw_point, &queries, 2.0, 0.1, &mut streams.stream(stream::JL))?;
        if !syn.header().identity {
            projected += 1;
        }
        let allowed = n as f64 * 3.0 * syn.header().t + 1.0;
        for q in &queries {
            let diff = (reconstruct_answer(&syn, q)? - n as f64 * out.raw_point.eval(q)?).abs();
            worst = worst.min(allowed - diff);
            if diff > allowed {
                pass = false;
            }
        }
    }
    outcome(pass, format!("n={n}, 10 seeds ({projected} with a genuine projection); min slack to n*3t+1 is {worst:.3}"))
}

fn criterion_9() -> Result<Outcome> {
    let (d, n) = (6usize, 4usize);
    let space = TupleSpace::new(d, 2)?;
    let queries: Vec<QueryIndex> = space.tuples().collect();
    let m = queries.len();
    let rounds = (3.0 * (m as f64).ln()).ceil() as usize;
    let mut cfg = BoostConfig::new(rounds, 4 * m, PrivacyParams::new(1.0, 1e-6)?);
    cfg.noise = NoiseMode::Disabled;
    cfg.lambda = Some(2.0);
    cfg.iterations = Some(200);
    cfg.sdp = SdpSettings { restarts: 3, ..SdpSettings::default() };
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let streams = RngStreams::new(900 + seed);
        let db = random_db(n, d, &streams)?;
        let res = boost(&db, &queries, space, &cfg, &streams)?;
        worst = worst.max(res.worst_case_error);
        if res.worst_case_error <= 2.0 {
            ok += 1;
        }
    }
    outcome(ok * 100 >= 95 * 50, format!("m={m}, T={rounds}: {ok}/50 runs within lambda=2 (largest error {worst:.3})"))
}

fn criterion_10() -> Result<Outcome> {
    let space = TupleSpace::new(8, 3)?;
    let clauses = 100.0;
    let p_param = clauses / space.len() as f64;
    let r = dp_width_report(space, p_param, 100, &SdpSettings::default(), &RngStreams::new(1010))?;
    outcome(
        r.containment_violations == 0,
        format!(
            "p={p_param:.4}: K width {:.3}+-{:.3}, L width {:.3}+-{:.3}, ratio {:.3}, violations {}, SDP stalls {}",
            r.k_width.mean, r.k_width.stderr, r.l_width.mean, r.l_width.stderr, r.ratio, r.containment_violations, r.sdp_stats.stalls
        ),
    )
}

fn main() {
    type Criterion = (usize, &'static str, Duration, fn() -> Result<Outcome>);
    let criteria: [Criterion; 10] = [
        (1, "parity-to-marginal reconstruction is exact", Duration::from_secs(30), criterion_1),
        (2, "Frank-Wolfe convergence bound", Duration::from_secs(120), criterion_2),
        (3, "Grothendieck sandwich", Duration::from_secs(120), criterion_3),
        (4, "Gaussian width of P^1/2 L0 at most d^(ceil(k/2)/2)", Duration::from_secs(60), criterion_4),
        (5, "projection beats unprojected Gaussian answers", Duration::from_secs(300), criterion_5),
        (6, "root-MSE scaling shape", Duration::from_secs(900), criterion_6),
        (7, "JL tail and expectation", Duration::from_secs(60), criterion_7),
        (8, "synopsis reconstruction error", Duration::from_secs(120), criterion_8),
        (9, "boosting coverage", Duration::from_secs(300), criterion_9),
        (10, "K inside L on D_p directions", Duration::from_secs(600), criterion_10),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "{} [{id}] {name}: {detail} ({:.1}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/10 criteria passed; failing: {failed:?}", 10 - failed.len());
    if !failed.is_empty() && std::env::var_os("DPMARG_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
