use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dpmarg::boosting::{boost, worst_case_params, BoostConfig};
use dpmarg::geometry::{
    dp_width_report, dual_norm_k_bruteforce, dual_norm_l, dual_norm_l0_bruteforce, estimate_width,
    sample_dp_vector, sample_gaussian_vector, scale_by_distribution, gaussian_width_l, WidthEstimate,
};
use dpmarg::io::{read_attribute_count, read_database, synthetic_database, write_database, DistributionSpec, Generator};
use dpmarg::noise::{NoiseMode, PrivacyParams};
use dpmarg::projection::{mse, relaxed_projection_mechanism, worst_case_error, RawPoint, ReleaseOptions};
use dpmarg::queries::{
    marginals_from_parities, true_parity_answers, QueryDistribution, QueryIndex, RowDatabase, TupleSpace,
};
use dpmarg::rng::{stream, RngStreams};
use dpmarg::sdp::SdpSettings;
use dpmarg::synopsis::{jl_compress, reconstruct_answer, size_bound_bits, synopsis_size_bits, Synopsis};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{
    AnswerArgs, Body, BoostArgs, Cli, Command, CompressArgs, DataArgs, Directions, DistributionArgs,
    EvaluateArgs, Format, GenerateArgs, GeneratorKind, ReleaseArgs, SdpArgs, WidthArgs,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<dpmarg::Error> for CliError {
    fn from(e: dpmarg::Error) -> Self {
        use dpmarg::Error as E;
        match e {
            E::InvalidQuery(_)
            | E::InvalidDatabase(_)
            | E::InvalidDistribution(_)
            | E::InvalidParameter(_)
            | E::SizeGuard(_)
            | E::IncompleteInput(_)
            | E::NotInSupport(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("malformed JSON: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

struct Ctx {
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Writes JSON to `out` (relative to the output directory), or to
    /// `<out_dir>/<default_name>` when only the directory is set, or to stdout.
    fn emit_json(&self, out: Option<&Path>, default_name: &str, value: &Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.emit_text(out, default_name, &text)
    }

    fn emit_text(&self, out: Option<&Path>, default_name: &str, text: &str) -> CliResult<()> {
        let target = match (out, &self.out_dir) {
            (Some(p), _) => Some(self.resolve(p)),
            (None, Some(dir)) => Some(dir.join(default_name)),
            (None, None) => None,
        };
        match target {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                let mut f = BufWriter::new(File::create(&path)?);
                f.write_all(text.as_bytes())?;
                f.flush()?;
            }
            None => print!("{text}"),
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let ctx = Ctx { out_dir: cli.out_dir };
    match cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Release(a) => cmd_release(&ctx, a),
        Command::Compress(a) => cmd_compress(&ctx, a),
        Command::Answer(a) => cmd_answer(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Boost(a) => cmd_boost(&ctx, a),
        Command::Width(a) => cmd_width(&ctx, a),
    }
}

fn cmd_generate(ctx: &Ctx, a: GenerateArgs) -> CliResult<()> {
    if a.d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let generator = match a.generator {
        GeneratorKind::Uniform => Generator::Uniform,
        GeneratorKind::Planted => Generator::Planted,
    };
    let db = synthetic_database(a.n, a.d, generator, &mut RngStreams::new(a.seed).stream(stream::DATA))?;
    let path = ctx.resolve(&a.out);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_database(&path, &db)?;
    Ok(())
}

fn sdp_settings(a: &SdpArgs) -> CliResult<SdpSettings> {
    let s = SdpSettings {
        rank: a.sdp_rank,
        restarts: a.sdp_restarts,
        tol: a.sdp_tol,
        max_sweeps: a.sdp_max_sweeps,
        warm_start: true,
    };
    s.validate()?;
    Ok(s)
}

fn distribution_spec(a: &DistributionArgs) -> CliResult<DistributionSpec> {
    match (&a.distribution, a.uniform_subsets, a.uniform_tuples) {
        (Some(path), None, None) => DistributionSpec::from_path(path).map_err(|e| match e {
            dpmarg::Error::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
            other => invalid(format!("{}: {other}", path.display())),
        }),
        (None, Some(k), None) => Ok(DistributionSpec::UniformKSubsets { k }),
        (None, None, Some(k)) => Ok(DistributionSpec::UniformTuples { k }),
        _ => Err(invalid("give exactly one of --distribution, --uniform-subsets, --uniform-tuples")),
    }
}

/// Attribute count from the CSV header; the rows are not read.
fn data_dimension(data: &DataArgs) -> CliResult<usize> {
    read_attribute_count(&data.input).map_err(|e| CliError::Runtime(format!("{}: {e}", data.input.display())))
}

fn load_database(data: &DataArgs) -> CliResult<RowDatabase> {
    read_database(&data.input, data.binary).map_err(|e| match e {
        dpmarg::Error::Io(_) | dpmarg::Error::Csv(_) => CliError::Runtime(format!("{}: {e}", data.input.display())),
        other => other.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReleaseConfig {
    input: PathBuf,
    binary: bool,
    distribution: DistributionSpec,
    epsilon: f64,
    delta: f64,
    iterations: Option<usize>,
    width_estimate: bool,
    width_samples: usize,
    seed: u64,
    noise: NoiseMode,
    sdp: SdpSettings,
    chi: f64,
    beta: f64,
    synopsis: Option<PathBuf>,
}

fn cmd_release(ctx: &Ctx, a: ReleaseArgs) -> CliResult<()> {
    let start = Instant::now();
    let pp = PrivacyParams::new(a.epsilon, a.delta)?;
    let sdp = sdp_settings(&a.sdp)?;
    let spec = distribution_spec(&a.dist)?;
    if a.iterations == Some(0) {
        return Err(invalid("--iterations must be at least 1"));
    }
    if a.synopsis.is_some() {
        dpmarg::synopsis::jl_dimension(a.chi, a.beta, 1, 1, 1)?;
    }
    if a.width_estimate && a.width_samples < 2 {
        return Err(invalid("--width-samples must be at least 2"));
    }
    let d = data_dimension(&a.data)?;
    let resolved = spec.resolve(d)?;
    let p = resolved.parities;
    let config = ReleaseConfig {
        input: a.data.input.clone(),
        binary: a.data.binary,
        distribution: spec,
        epsilon: a.epsilon,
        delta: a.delta,
        iterations: a.iterations,
        width_estimate: a.width_estimate,
        width_samples: a.width_samples,
        seed: a.seed,
        noise: if a.no_noise { NoiseMode::Disabled } else { NoiseMode::Gaussian },
        sdp,
        chi: a.chi,
        beta: a.beta,
        synopsis: a.synopsis.clone(),
    };
    let streams = RngStreams::new(a.seed);
    // Width estimation only looks at p, never at the data.
    let width = if a.width_estimate {
        Some(gaussian_width_l(&p, a.width_samples, &sdp, &streams.child(stream::WIDTH))?.mean)
    } else {
        None
    };

    let db = load_database(&a.data)?;
    if db.d() != d {
        return Err(invalid("database rows do not match the header"));
    }
    let options = ReleaseOptions { iterations: a.iterations, noise: config.noise, sdp, width };
    let result = relaxed_projection_mechanism(&db, &p, &pp, &options, &streams)?;

    let mut out = json!({
        "config": config,
        "answers": result.answers,
        "metadata": result.metadata,
    });
    if let Some(marginals) = &resolved.marginals {
        let estimates: HashMap<QueryIndex, f64> =
            result.answers.iter().map(|x| (x.tuple.clone(), x.value)).collect();
        let rows = marginals
            .iter()
            .map(|(m, _)| {
                Ok(json!({
                    "attributes": m.attributes(),
                    "beta": m.beta(),
                    "value": marginals_from_parities(&estimates, m)?,
                }))
            })
            .collect::<CliResult<Vec<Value>>>()?;
        out["marginals"] = Value::Array(rows);
    }
    if let Some(path) = &a.synopsis {
        let queries: Vec<QueryIndex> = p.support().cloned().collect();
        let syn = jl_compress(&result.raw_point, &queries, a.chi, a.beta, &mut streams.stream(stream::JL))?
            .with_seed(a.seed);
        let target = ctx.resolve(path);
        syn.write_file(&target)?;
        out["synopsis"] = synopsis_summary(&syn)?;
    }
    if a.raw_point {
        out["raw_point"] = serde_json::to_value(&result.raw_point)?;
    }
    if a.timing {
        out["metadata"]["runtime_ms"] = json!(start.elapsed().as_millis() as u64);
    }
    ctx.emit_json(a.out.as_deref(), "release.json", &out)
}

fn synopsis_summary(syn: &Synopsis) -> CliResult<Value> {
    let h = syn.header();
    Ok(json!({
        "header": h,
        "size_bits": synopsis_size_bits(syn)?,
        "size_bound_bits": size_bound_bits(h.n, h.d, h.k, h.chi, h.beta),
    }))
}

fn read_json(path: &Path) -> CliResult<Value> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn cmd_compress(ctx: &Ctx, a: CompressArgs) -> CliResult<()> {
    dpmarg::synopsis::jl_dimension(a.chi, a.beta, 1, 1, 1)?;
    let release = read_json(&a.release)?;
    let raw: RawPoint = serde_json::from_value(
        release.get("raw_point").cloned().ok_or_else(|| invalid("release has no raw_point; rerun with --raw-point"))?,
    )?;
    let queries: Vec<QueryIndex> = match release.get("answers") {
        Some(ans) => serde_json::from_value::<Vec<AnswerRow>>(ans.clone())?.into_iter().map(|r| r.tuple).collect(),
        None => raw.space.tuples().collect(),
    };
    let syn = jl_compress(&raw, &queries, a.chi, a.beta, &mut RngStreams::new(a.seed).stream(stream::JL))?
        .with_seed(a.seed);
    syn.write_file(&ctx.resolve(&a.out))?;
    println!("{}", serde_json::to_string_pretty(&synopsis_summary(&syn)?)?);
    Ok(())
}

fn parse_tuple(s: &str) -> CliResult<QueryIndex> {
    let entries = s
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| invalid(format!("bad tuple '{s}'"))))
        .collect::<CliResult<Vec<usize>>>()?;
    Ok(QueryIndex::new(entries))
}

fn cmd_answer(ctx: &Ctx, a: AnswerArgs) -> CliResult<()> {
    let requested = a.tuples.iter().map(|s| parse_tuple(s)).collect::<CliResult<Vec<_>>>()?;
    let syn = Synopsis::read_file(&a.synopsis).map_err(|e| match e {
        dpmarg::Error::Io(io) => CliError::Runtime(format!("{}: {io}", a.synopsis.display())),
        other => CliError::Runtime(other.to_string()),
    })?;
    let space = syn.space()?;
    let queries = if requested.is_empty() {
        let h = syn.header();
        let mut all = Vec::new();
        for &s in &h.row_catalog {
            for &t in &h.col_catalog {
                all.push(space.tuple(s * space.cols() + t));
            }
        }
        all
    } else {
        requested
    };
    let answers = queries
        .iter()
        .map(|q| Ok(json!({"tuple": q, "value": reconstruct_answer(&syn, q)?})))
        .collect::<CliResult<Vec<Value>>>()?;
    let out = json!({
        "config": {"synopsis": a.synopsis, "tuples": a.tuples},
        "answers": answers,
        "synopsis": synopsis_summary(&syn)?,
    });
    ctx.emit_json(a.out.as_deref(), "answers.json", &out)
}

#[derive(Debug, Deserialize)]
struct AnswerRow {
    tuple: QueryIndex,
    value: f64,
}

fn cmd_evaluate(ctx: &Ctx, a: EvaluateArgs) -> CliResult<()> {
    if a.bins == 0 {
        return Err(invalid("--bins must be at least 1"));
    }
    let doc = read_json(&a.answers)?;
    let rows: Vec<AnswerRow> =
        serde_json::from_value(doc.get("answers").cloned().ok_or_else(|| invalid("no answers array"))?)?;
    if rows.is_empty() {
        return Err(invalid("no answers to evaluate"));
    }
    let spec = match &a.distribution {
        Some(path) => Some(DistributionSpec::from_path(path)?),
        None => doc
            .pointer("/config/distribution")
            .map(|v| serde_json::from_value::<DistributionSpec>(v.clone()))
            .transpose()?,
    };
    let d = data_dimension(&a.data)?;
    let k = rows[0].tuple.entries().len();
    let space = TupleSpace::new(d, k)?;
    for r in &rows {
        space.check(&r.tuple)?;
    }
    let estimates: BTreeMap<QueryIndex, f64> = rows.into_iter().map(|r| (r.tuple, r.value)).collect();
    let p = match spec {
        Some(s) => s.resolve(d)?.parities,
        None => QueryDistribution::uniform_over(space, &estimates.keys().cloned().collect::<Vec<_>>())?,
    };
    let queries: Vec<QueryIndex> = p.support().cloned().collect();
    let est = queries
        .iter()
        .map(|q| estimates.get(q).copied().ok_or_else(|| invalid(format!("no answer for {q}"))))
        .collect::<CliResult<Vec<f64>>>()?;

    let db = load_database(&a.data)?;
    let truth = true_parity_answers(&db, &queries)?;
    let m = mse(&p, &truth, &est)?;
    let worst = worst_case_error(&truth, &est)?;
    let errors: Vec<f64> = truth.iter().zip(&est).map(|(t, e)| (t - e).abs()).collect();
    let width = if worst > 0.0 { worst / a.bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; a.bins];
    for e in &errors {
        counts[((e / width) as usize).min(a.bins - 1)] += 1;
    }
    let histogram: Vec<Value> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| json!({"lo": i as f64 * width, "hi": (i + 1) as f64 * width, "count": c}))
        .collect();
    let out = json!({
        "config": {"answers": a.answers, "input": a.data.input, "binary": a.data.binary, "distribution": a.distribution, "bins": a.bins},
        "n": db.n(),
        "queries": queries.len(),
        "mse": m,
        "rmse": m.sqrt(),
        "worst_case_error": worst,
        "histogram": histogram,
    });
    ctx.emit_json(a.out.as_deref(), "metrics.json", &out)
}

fn cmd_boost(ctx: &Ctx, a: BoostArgs) -> CliResult<()> {
    let total = PrivacyParams::new(a.epsilon, a.delta)?;
    let sdp = sdp_settings(&a.sdp)?;
    let d = data_dimension(&a.data)?;
    if a.k == 0 || a.k > d {
        return Err(invalid(format!("need 1 <= k <= d, got k={}, d={d}", a.k)));
    }
    let space = TupleSpace::new(d, a.k)?;
    let queries: Vec<QueryIndex> = space.tuples().collect();
    let m = queries.len();
    let noise = if a.no_noise { NoiseMode::Disabled } else { NoiseMode::Gaussian };

    // n is needed by the worst-case wiring; the row count is read without the values.
    let mut cfg = if a.worst_case_params {
        let n = count_rows(&a.data.input)?;
        worst_case_params(n.max(1), d, a.k, m, &total)?
    } else {
        let rounds = a.rounds.unwrap_or_else(|| ((3.0 * (m as f64).ln()).ceil() as usize).max(1));
        let mut c = BoostConfig::new(rounds, a.samples.unwrap_or(4 * m), total.split(rounds)?);
        c.chi = a.chi;
        c.beta = a.beta;
        c
    };
    cfg.lambda = a.lambda;
    cfg.eta = a.eta;
    cfg.noise = noise;
    cfg.iterations = a.iterations;
    cfg.sdp = sdp;
    cfg.validate()?;

    let db = load_database(&a.data)?;
    let res = boost(&db, &queries, space, &cfg, &RngStreams::new(a.seed))?;
    let answers: Vec<Value> = res
        .queries
        .iter()
        .zip(&res.answers)
        .map(|(q, v)| json!({"tuple": q, "value": v}))
        .collect();
    let out = json!({
        "config": {
            "input": a.data.input, "binary": a.data.binary, "k": a.k, "epsilon": a.epsilon, "delta": a.delta,
            "seed": a.seed, "worst_case_params": a.worst_case_params, "boost": cfg,
        },
        "answers": answers,
        "rounds": res.rounds,
        "lambda": res.lambda,
        "worst_case_error": res.worst_case_error,
        "kappa_recommended": res.kappa_recommended,
        "ledger": {
            "entries": res.ledger.entries(),
            "notes": res.ledger.notes(),
            "total_epsilon": res.ledger.total_epsilon(),
            "total_delta": res.ledger.total_delta(),
        },
        "final_weights": res.weights,
    });
    ctx.emit_json(a.out.as_deref(), "boost.json", &out)
}

fn count_rows(path: &Path) -> CliResult<usize> {
    let mut reader = csv_reader(path)?;
    let mut n = 0;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(|e| CliError::Runtime(e.to_string()))? {
        n += 1;
    }
    Ok(n)
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_width(ctx: &Ctx, a: WidthArgs) -> CliResult<()> {
    if a.samples < 2 {
        return Err(invalid("--samples must be at least 2"));
    }
    if a.k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let space = TupleSpace::new(a.d, a.k)?;
    let sdp = sdp_settings(&a.sdp)?;
    let p_param = match (a.directions, a.p_param) {
        (Directions::Dp, Some(p)) if (0.0..=1.0).contains(&p) => p,
        (Directions::Dp, _) => return Err(invalid("--directions dp needs --p-param in [0,1]")),
        (Directions::Gaussian, _) => 0.0,
    };
    let uniform = QueryDistribution::uniform(space);
    let streams = RngStreams::new(a.seed).child(stream::WIDTH);
    let sampler = |rng: &mut dpmarg::rng::StreamRng| -> dpmarg::Result<Vec<f64>> {
        match a.directions {
            Directions::Gaussian => scale_by_distribution(&sample_gaussian_vector(uniform.len(), rng), &uniform),
            Directions::Dp => sample_dp_vector(p_param, space.len(), rng),
        }
    };
    let label = match a.directions {
        Directions::Gaussian => "gaussian".to_string(),
        Directions::Dp => format!("D_{p_param}"),
    };
    let mut rows: Vec<WidthEstimate> = Vec::new();
    for body in &a.body {
        let est = match body {
            Body::K => estimate_width(a.samples, &streams, sampler, |w, _| dual_norm_k_bruteforce(w, space), "K", &label)?,
            Body::L0 => estimate_width(a.samples, &streams, sampler, |w, _| dual_norm_l0_bruteforce(w, space), "L0", &label)?,
            Body::L => estimate_width(a.samples, &streams, sampler, |w, rng| Ok(dual_norm_l(w, space, &sdp, rng)?.0), "L", &label)?,
            Body::Constant => estimate_width(a.samples, &streams, sampler, |_, _| Ok(1.0), "constant", &label)?,
        };
        rows.push(est);
    }
    let report = if a.directions == Directions::Dp && a.body.contains(&Body::K) && a.body.contains(&Body::L) {
        Some(dp_width_report(space, p_param, a.samples, &sdp, &streams)?)
    } else {
        None
    };
    match a.format {
        Format::Json => {
            let out = json!({
                "config": {"d": a.d, "k": a.k, "body": a.body, "directions": a.directions, "p_param": a.p_param,
                           "samples": a.samples, "seed": a.seed, "sdp": sdp},
                "widths": rows,
                "comparison": report,
            });
            ctx.emit_json(a.out.as_deref(), "width.json", &out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["body", "directions", "mean", "stderr", "samples", "d", "k", "seed"])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            for r in &rows {
                w.write_record([
                    r.body.clone(),
                    r.directions.clone(),
                    r.mean.to_string(),
                    r.stderr.to_string(),
                    r.samples.to_string(),
                    a.d.to_string(),
                    a.k.to_string(),
                    a.seed.to_string(),
                ])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
            ctx.emit_text(a.out.as_deref(), "width.csv", &String::from_utf8_lossy(&bytes))
        }
    }
}
