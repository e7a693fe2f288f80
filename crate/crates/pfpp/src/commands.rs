use std::collections::BTreeMap;
use std::path::Path;

use pfpp_core::conditioning::{condition_kernel_spec, reduce_projection, ConditionSpec, Sampler};
use pfpp_core::covariance::{is_dpp, kernel_from_covariance, GroundSet, ProjectionOperator};
use pfpp_core::fock::QuasiFreeOracle;
use pfpp_core::linalg::{max_abs_diff, spectrum_bounds};
use pfpp_core::measure::{
    correlation, expect_multiplicative, weights_bruteforce, Configuration, MeasureTable,
    MultiplicativeWeight,
};
use pfpp_core::models::{self, KmsSpec, Partition, QSpecialization, Specialization};
use pfpp_core::perfectness::intertwiner_check;
use pfpp_core::skewalg::PfaffianKernel;
use pfpp_core::{Error, C64};
use serde_json::{json, Value};

use crate::error::{exit, CliError};
use crate::output::{Format, Output};
use crate::schema::{
    format_label, from_value, labels, parse_json, KmsDoc, Loaded, OpeDoc, Operator, OperatorDoc,
    SchurDoc,
};
use crate::Command;

pub struct Context {
    pub check: f64,
    pub window: Option<(i64, i64)>,
    pub trunc: Option<u32>,
    pub seed: Option<u64>,
    pub format: Format,
}

pub struct Outcome {
    pub output: Output,
    pub meta: BTreeMap<String, Value>,
    pub status: u8,
    /// Printed to stderr when `status` is non-zero.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(output: Output) -> Self {
        Self {
            output,
            meta: BTreeMap::new(),
            status: exit::OK,
            failure: None,
            warnings: Vec::new(),
        }
    }

    fn meta(mut self, key: &str, v: Value) -> Self {
        self.meta.insert(key.into(), v);
        self
    }

    /// Sets status 3 when `deviation` exceeds the check tolerance.
    fn gate(mut self, what: &str, deviation: f64, ctx: &Context) -> Self {
        if deviation.is_nan() || deviation > ctx.check {
            self.status = exit::TOLERANCE;
            self.failure = Some(format!(
                "{what} {deviation:e} exceeds tolerance {:e}",
                ctx.check
            ));
        }
        self
    }
}

const DEFAULT_TRUNC: u32 = 10;

fn read(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text)
}

fn load_operator(path: &Path) -> Result<Loaded, CliError> {
    let v = read(path)?;
    if !OperatorDoc::is_operator(&v) {
        return Err(CliError::Json(format!(
            "{}: expected an operator document with S11..S22 or K11..K22",
            path.display()
        )));
    }
    from_value::<OperatorDoc>(v)?.load()
}

fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for size in 1..=k.min(n) {
        combos(n, size, 0, &mut cur, &mut out);
    }
    out
}

fn combos(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        combos(n, size, i + 1, cur, out);
        cur.pop();
    }
}

fn join_labels(ground: &GroundSet, pts: &[usize]) -> String {
    pts.iter()
        .map(|&i| format_label(&ground.label(i)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn weights_table(m: &MeasureTable) -> Output {
    let rows = (0..1u64 << m.sites())
        .map(|mask| {
            let c = Configuration::new(mask, m.sites());
            vec![json!(c.bitstring()), json!(m.weight(mask))]
        })
        .collect();
    Output::table(&["bitstring", "weight"], rows)
}

fn sites_meta(ground: &GroundSet) -> Value {
    json!(labels(ground))
}

pub fn dispatch(cmd: &Command, ctx: &Context) -> Result<Outcome, CliError> {
    match cmd {
        Command::Validate { input } => validate(input),
        Command::Kernel { input } => {
            let l = load_operator(input)?;
            let k = l.kernel();
            Ok(Outcome::ok(Output::Document(
                serde_json::to_value(OperatorDoc::from_kernel(&l.ground, &k))
                    .expect("document serializes"),
            )))
        }
        Command::Correlate {
            input,
            points,
            max_size,
        } => {
            let l = load_operator(input)?;
            let k = l.kernel();
            let sets = match points {
                Some(p) => {
                    let labels: Vec<String> = p.split(',').map(str::to_string).collect();
                    vec![l.indices(&labels)?]
                }
                None => subsets_up_to(k.sites(), *max_size),
            };
            let rows = sets
                .iter()
                .map(|s| {
                    Ok(vec![
                        json!(join_labels(&l.ground, s)),
                        json!(correlation(&k, s)?),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(Outcome::ok(Output::table(&["sites", "value"], rows))
                .meta("ground_set", sites_meta(&l.ground)))
        }
        Command::Weights { input } => {
            let l = load_operator(input)?;
            let m = weights_bruteforce(&l.kernel())?;
            Ok(Outcome::ok(weights_table(&m)).meta("ground_set", sites_meta(&l.ground)))
        }
        Command::ExpectMult { input, alpha } => expect_mult(input, alpha, ctx),
        Command::Sample {
            input,
            draws,
            shards,
        } => {
            let l = load_operator(input)?;
            let seed = ctx.seed.expect("seed checked for stochastic commands");
            let samples = sample_sharded(&l.kernel(), seed, *draws, *shards)?;
            let rows = samples.iter().map(|c| vec![json!(c.bitstring())]).collect();
            Ok(Outcome::ok(Output::table(&["bitstring"], rows))
                .meta("ground_set", sites_meta(&l.ground))
                .meta("draws", json!(draws))
                .meta("shards", json!(shards))
                .meta("rng", json!("ChaCha20, seed_from_u64(seed ^ shard)")))
        }
        Command::Condition {
            input,
            occupied,
            vacated,
        } => condition(input, occupied, vacated),
        Command::OracleCheck { input, points } => oracle_check(input, *points, ctx),
        Command::PerfectnessCheck { input } => perfectness(input, ctx),
        Command::Kms { input, hs } => kms(input, *hs, ctx),
        Command::Ope { input } => {
            let doc: OpeDoc = from_value(read(input)?)?;
            let (ground, vecs) = doc.vectors()?;
            let m = models::ope_weights(&vecs)?;
            let p = models::ope_projection(&vecs)?;
            let output = match ctx.format {
                Format::Json => Output::Document(
                    serde_json::to_value(OperatorDoc::from_covariance(&ground, p.covariance()))
                        .expect("document serializes"),
                ),
                Format::Csv => weights_table(&m),
            };
            Ok(Outcome::ok(output)
                .meta("ground_set", sites_meta(&ground))
                .meta("particles", json!(vecs.len())))
        }
        Command::Schur { input } => schur(input, ctx),
        Command::ShiftedSchur { input } => shifted_schur(input, ctx),
    }
}

fn validate(input: &Path) -> Result<Outcome, CliError> {
    let v = read(input)?;
    if !OperatorDoc::is_operator(&v) {
        return Err(CliError::Json(
            "expected an operator document with S11..S22 or K11..K22".into(),
        ));
    }
    let doc: OperatorDoc = from_value(v)?;
    let loaded = match doc.load() {
        Ok(l) => l,
        Err(CliError::Validation(e)) => return Ok(invalid(e)),
        Err(e) => return Err(e),
    };
    let n = loaded.ground.len();
    let report = match &loaded.operator {
        Operator::Covariance(s) => {
            let (lo, hi) = spectrum_bounds(s.matrix());
            json!({
                "valid": true,
                "kind": "covariance",
                "sites": n,
                "projection": s.is_projection(),
                "dpp": is_dpp(s),
                "spectrum_min": lo,
                "spectrum_max": hi,
            })
        }
        Operator::Kernel(k) => match weights_bruteforce(k) {
            Ok(m) => json!({
                "valid": true,
                "kind": "kernel",
                "sites": n,
                "total_mass": m.total(),
            }),
            Err(e) => return Ok(invalid(e)),
        },
    };
    Ok(Outcome::ok(Output::report(report)))
}

fn invalid(e: Error) -> Outcome {
    let err = CliError::Validation(e);
    let mut o = Outcome::ok(Output::report(
        json!({ "valid": false, "error": err.to_string() }),
    ));
    o.status = err.code();
    o.failure = Some(err.to_string());
    o
}

fn expect_mult(input: &Path, alpha: &[f64], ctx: &Context) -> Result<Outcome, CliError> {
    let l = load_operator(input)?;
    let k = l.kernel();
    if alpha.len() != k.sites() {
        return Err(CliError::Usage(format!(
            "--alpha has {} values for {} sites",
            alpha.len(),
            k.sites()
        )));
    }
    let w = MultiplicativeWeight::new(alpha.to_vec())?;
    let fredholm = expect_multiplicative(&k, &w)?;
    let mut rows = vec![vec![json!("fredholm"), json!(fredholm)]];
    let mut out_dev = None;
    if k.sites() <= pfpp_core::measure::MAX_ENUMERATION_SITES {
        let m = weights_bruteforce(&k)?;
        let direct = m.expect_product(alpha);
        let dev = (fredholm - direct).abs();
        rows.push(vec![json!("enumeration"), json!(direct)]);
        rows.push(vec![json!("deviation"), json!(dev)]);
        out_dev = Some(dev);
    }
    let o = Outcome::ok(Output::table(&["quantity", "value"], rows));
    Ok(match out_dev {
        Some(d) => o.gate("Fredholm/enumeration deviation", d, ctx),
        None => o,
    })
}

/// Shard `i` draws its share with seed `seed ^ i`; shards are concatenated
/// in index order.
pub fn sample_sharded(
    k: &PfaffianKernel,
    seed: u64,
    draws: usize,
    shards: usize,
) -> Result<Vec<Configuration>, CliError> {
    if shards == 0 {
        return Err(CliError::Usage("--shards must be at least 1".into()));
    }
    let counts: Vec<usize> = (0..shards)
        .map(|i| draws / shards + usize::from(i < draws % shards))
        .collect();
    let results: Vec<pfpp_core::Result<Vec<Configuration>>> = std::thread::scope(|s| {
        let handles: Vec<_> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                s.spawn(move || {
                    let mut sampler = Sampler::new(k.clone(), seed ^ i as u64);
                    (0..c).map(|_| sampler.draw()).collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(draws);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn condition(input: &Path, occupied: &[String], vacated: &[String]) -> Result<Outcome, CliError> {
    let l = load_operator(input)?;
    let spec = ConditionSpec::new(l.indices(occupied)?, l.indices(vacated)?)?;
    let n = l.ground.len();
    let rest = spec.remaining(n);
    let ground = l.ground.subset(&rest);
    let doc = match &l.operator {
        Operator::Covariance(s) if s.is_projection() => {
            let p = ProjectionOperator::new(s.clone())?;
            let r = reduce_projection(&p, &spec)?;
            serde_json::to_value(OperatorDoc::from_covariance(&ground, r.covariance()))
        }
        _ => {
            let k = condition_kernel_spec(&l.kernel(), &spec)?;
            serde_json::to_value(OperatorDoc::from_kernel(&ground, &k))
        }
    };
    Ok(Outcome::ok(Output::Document(
        doc.expect("document serializes"),
    )))
}

fn oracle_check(input: &Path, points: usize, ctx: &Context) -> Result<Outcome, CliError> {
    let l = load_operator(input)?;
    let s = l.covariance()?;
    let oracle = QuasiFreeOracle::new(s)?;
    let k = kernel_from_covariance(s);
    let mut dev: f64 = 0.0;
    let sets = subsets_up_to(k.sites(), points);
    for pts in &sets {
        let a = oracle.correlation(pts)?;
        let b = pfpp_core::measure::correlation_complex(&k, pts)?;
        dev = dev.max((a - b).norm());
    }
    let report = json!({
        "max_deviation": dev,
        "instances": sets.len(),
        "max_points": points,
        "projection": s.is_projection(),
    });
    Ok(Outcome::ok(Output::report(report)).gate("oracle deviation", dev, ctx))
}

fn perfectness(input: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let v = read(input)?;
    let (table, truncation) = if OperatorDoc::is_operator(&v) {
        let l = from_value::<OperatorDoc>(v)?.load()?;
        (weights_bruteforce(&l.kernel())?, 0.0)
    } else if OpeDoc::is_ope(&v) {
        let (_, vecs) = from_value::<OpeDoc>(v)?.vectors()?;
        (models::ope_weights(&vecs)?, 0.0)
    } else if SchurDoc::is_schur(&v) {
        let doc: SchurDoc = from_value(v)?;
        let (a, b) = ctx.window.filter(|&(a, b)| a < 0 && b > 0).ok_or_else(|| {
            CliError::Usage("a Schur document needs --window a b with a < 0 < b".into())
        })?;
        let rho = Specialization::new(doc.alpha, doc.beta)?;
        models::schur_box_measure(&rho, (-a) as u32, b as u32)?
    } else {
        return Err(CliError::Json(
            "expected an operator, OPE or Schur document".into(),
        ));
    };
    match intertwiner_check(&table, truncation) {
        Ok(r) => {
            let report = json!({
                "max_deviation": r.max_deviation,
                "truncation_mass": r.truncation_mass,
                "instances": r.instances,
            });
            Ok(Outcome::ok(Output::report(report)).gate(
                "intertwiner deviation",
                r.max_deviation,
                ctx,
            ))
        }
        Err(Error::NotQuasiInvariant { x, y }) => {
            let mut o = Outcome::ok(Output::report(json!({
                "quasi_invariant": false,
                "failed_transposition": [x, y],
                "truncation_mass": truncation,
            })));
            o.status = exit::VALIDATION;
            o.failure = Some(format!(
                "support is not invariant under the transposition ({x}, {y})"
            ));
            Ok(o)
        }
        Err(e) => Err(e.into()),
    }
}

fn kms(input: &Path, hs: bool, ctx: &Context) -> Result<Outcome, CliError> {
    let doc: KmsDoc = from_value(read(input)?)?;
    let ground = match (&doc.sites, doc.window, ctx.window) {
        (Some(s), None, _) => GroundSet::new(
            s.iter()
                .map(|x| crate::schema::parse_label(x))
                .collect::<Result<Vec<_>, _>>()?,
        )?,
        (None, Some(m), _) => GroundSet::symmetric_window(m),
        (None, None, Some((a, b))) => GroundSet::half_integers(a, b),
        (None, None, None) => GroundSet::symmetric_window(doc.upsilon.len() / 2),
        (Some(_), Some(_), _) => {
            return Err(CliError::Json(
                "give either \"sites\" or \"window\", not both".into(),
            ))
        }
    };
    let delta = doc.delta.iter().map(|z| C64::new(z[0], z[1])).collect();
    let spec = KmsSpec::new(
        ground.clone(),
        doc.upsilon.clone(),
        delta,
        doc.beta.value()?,
    )?;
    let closed = models::kms_kernel(&spec);
    let s = models::kms_covariance(&spec)?;
    let dev = max_abs_diff(
        kernel_from_covariance(&s).interleaved(),
        closed.interleaved(),
    );
    let doc_value = serde_json::to_value(OperatorDoc::from_covariance(&ground, &s))
        .expect("document serializes");
    let output = if hs {
        let d = models::kms_hs_diagnostic(&spec)?;
        let rows = (0..d.radii.len())
            .map(|i| {
                vec![
                    json!(d.radii[i]),
                    json!(d.closed_form[i]),
                    json!(d.frobenius[i]),
                ]
            })
            .collect();
        Output::table(&["radius", "closed_form", "frobenius"], rows)
    } else {
        let rows = (0..spec.sites())
            .map(|i| {
                let j = ground.mirror(i).expect("validated mirror-symmetric window");
                vec![
                    json!(format_label(&ground.label(i))),
                    json!(spec.lambda(i)),
                    json!(closed.k12(i, i).re),
                    json!(closed.k11(i, j).re),
                    json!(closed.k11(i, j).im),
                    json!(closed.k22(i, j).re),
                    json!(closed.k22(i, j).im),
                ]
            })
            .collect();
        Output::table(
            &[
                "site",
                "lambda",
                "occupancy",
                "k11_mirror_re",
                "k11_mirror_im",
                "k22_mirror_re",
                "k22_mirror_im",
            ],
            rows,
        )
    };
    // JSON output is the covariance document itself, readable by the
    // operator commands.
    let output = if ctx.format == Format::Json && !hs {
        Output::Document(doc_value)
    } else {
        output
    };
    Ok(Outcome::ok(output)
        .meta("closed_form_deviation", json!(dev))
        .gate("closed-form/spectral kernel deviation", dev, ctx))
}

fn trunc(ctx: &Context, warnings: &mut Vec<String>) -> u32 {
    ctx.trunc.unwrap_or_else(|| {
        warnings.push(format!("--trunc not given, using {DEFAULT_TRUNC}"));
        DEFAULT_TRUNC
    })
}

fn parts(p: &Partition) -> String {
    p.parts()
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn schur(input: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let doc: SchurDoc = from_value(read(input)?)?;
    let rho = Specialization::new(doc.alpha, doc.beta)?;
    let mut warnings = Vec::new();
    let l = trunc(ctx, &mut warnings);
    let t = models::schur_table(&rho, l);
    let mut columns = vec!["partition", "size", "weight"];
    if ctx.window.is_some() {
        columns.push("configuration");
    }
    let mut rows = Vec::with_capacity(t.entries.len());
    for (p, w) in &t.entries {
        let mut r = vec![json!(parts(p)), json!(p.size()), json!(w)];
        if let Some((a, b)) = ctx.window {
            r.push(json!(models::embed(p, a, b)?.bitstring()));
        }
        rows.push(r);
    }
    let mut o = Outcome::ok(Output::table(&columns, rows))
        .meta("normalization", json!(t.normalization))
        .meta("tail_mass", json!(t.tail_mass))
        .meta("trunc", json!(l));
    if let Some((a, b)) = ctx.window {
        o = o.meta("window", json!(labels(&GroundSet::half_integers(a, b))));
    }
    o.warnings = warnings;
    Ok(o)
}

fn shifted_schur(input: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let doc: SchurDoc = from_value(read(input)?)?;
    if !doc.beta.is_empty() {
        return Err(CliError::Json(
            "shifted Schur specializations take \"alpha\" only".into(),
        ));
    }
    let rho = QSpecialization::new(doc.alpha)?;
    let mut warnings = Vec::new();
    let l = trunc(ctx, &mut warnings);
    let t = models::schur_q_table(&rho, l);
    let rows = t
        .entries
        .iter()
        .map(|(p, w)| vec![json!(parts(p.partition())), json!(p.size()), json!(w)])
        .collect();
    let mut o = Outcome::ok(Output::table(&["partition", "size", "weight"], rows))
        .meta("normalization", json!(t.normalization))
        .meta("tail_mass", json!(t.tail_mass))
        .meta("trunc", json!(l));
    o.warnings = warnings;
    Ok(o)
}
