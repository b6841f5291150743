//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mcar_core::closedform::{detect_family, evaluate, FamilyTag};
use mcar_core::crit::{c_alpha, c_alpha_prime, facet_catalog_entries, FacetInfo, FacetSource};
use mcar_core::geometry::{essential_facets_sum, RowKind};
use mcar_core::infer::{
    bootstrap_test, continuous_test, improved_test, universal_test, BootstrapRule, TestOptions,
};
use mcar_core::ingest::{bin_continuous, empirical_marginals, parse_dataset, BinningSpec, ColumnKind, IncompleteDataset, SequenceDocument};
use mcar_core::reduce::{plan_reductions, reduced_index, ReduceOptions};
use mcar_core::sim::{run_power_study, StudyConfig, StudyMethod};
use mcar_core::{
    incompatibility_index, inconsistency, DiscreteSpace, MarginalSequence, Pattern, PatternCollection, VERSION,
};

use crate::{
    Cli, Command, CriticalArgs, CriticalMethod, FacetsArgs, Format, IndexArgs, RuleArg, SimulateArgs,
    StudyMethodArg, TestArgs, TestMethod,
};

const EXIT_REJECT: u8 = 3;

pub fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("setting up the thread pool")?;
    }
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    match cli.command {
        Command::Test(args) => test(args, cli.format, threads),
        Command::Index(args) => index(args, cli.format),
        Command::Critical(args) => critical(args, cli.format),
        Command::Facets(args) => facets(args, cli.format),
        Command::Simulate(args) => simulate(args, cli.format, threads),
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Pretty JSON; maps are ordered by key.
fn print_json(value: &Value) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn reduce_options(no_reduce: bool, force_condition: bool) -> ReduceOptions {
    ReduceOptions {
        force_condition,
        disable: no_reduce,
    }
}

/// `12,23,13` or `1.10,2.10` to 1-based label lists.
pub fn parse_patterns(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(',')
        .map(|token| {
            let token = token.trim();
            if token.is_empty() {
                bail!("empty pattern in `{text}`");
            }
            if token.contains('.') {
                token
                    .split('.')
                    .map(|s| s.parse::<usize>().with_context(|| format!("bad label `{s}` in `{token}`")))
                    .collect()
            } else {
                token
                    .chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as usize)
                            .with_context(|| format!("bad label `{c}` in `{token}`"))
                    })
                    .collect()
            }
        })
        .collect()
}

fn shape(patterns: &str, sizes: &[usize], n: Option<&[u64]>) -> Result<(DiscreteSpace, PatternCollection)> {
    let space = DiscreteSpace::new(sizes.to_vec())?;
    let patterns = parse_patterns(patterns)?
        .iter()
        .map(|p| Pattern::from_one_based(p))
        .collect::<mcar_core::Result<Vec<_>>>()?;
    let sample_sizes = match n {
        None => vec![0; patterns.len()],
        Some([one]) => vec![*one; patterns.len()],
        Some(all) if all.len() == patterns.len() => all.to_vec(),
        Some(all) => bail!("{} sample sizes for {} patterns", all.len(), patterns.len()),
    };
    for p in &patterns {
        space.check_pattern(p)?;
    }
    Ok((space, PatternCollection::new(patterns, sample_sizes)?))
}

fn user_facet(f_prime: Option<u64>, d_r: Option<f64>) -> Result<Option<FacetInfo>> {
    match (f_prime, d_r) {
        (Some(f), Some(d)) => Ok(Some(FacetInfo::new(f, d, FacetSource::User)?)),
        _ => Ok(None),
    }
}

/// Options of `mcar test` that may also come from a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFileConfig {
    alpha: Option<f64>,
    method: Option<TestMethod>,
    #[serde(alias = "B")]
    replicates: Option<usize>,
    seed: Option<u64>,
    rule: Option<RuleArg>,
    bandwidth: Option<Vec<f64>>,
    holder_exponent: Option<f64>,
    holder_constant: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TestConfig {
    data: String,
    schema: String,
    config: Option<String>,
    method: TestMethod,
    alpha: f64,
    replicates: usize,
    seed: u64,
    rule: RuleArg,
    bandwidth: Option<Vec<f64>>,
    holder_exponent: f64,
    holder_constant: f64,
    improved: bool,
    f_prime: Option<u64>,
    d_r: Option<f64>,
    reduce: bool,
    force_condition: bool,
    threads: usize,
}

/// Smallest number of rows sharing one observed pattern.
fn min_pattern_size(data: &IncompleteDataset) -> u64 {
    let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    for row in &data.rows {
        *counts.entry(row.iter().map(Option::is_some).collect()).or_default() += 1;
    }
    counts.values().copied().min().unwrap_or(0)
}

fn binning_spec(data: &IncompleteDataset, config: &TestConfig) -> Result<BinningSpec> {
    let continuous = data
        .schema
        .columns
        .iter()
        .filter(|c| c.kind == ColumnKind::Continuous)
        .count();
    if continuous == 0 {
        bail!("the continuous test needs at least one `cont` column");
    }
    let exponents = vec![config.holder_exponent; continuous];
    let spec = match &config.bandwidth {
        None => {
            let mut spec = BinningSpec::default_for(min_pattern_size(data), exponents)?;
            spec.holder_constant = config.holder_constant;
            spec
        }
        Some(h) if h.len() == 1 => BinningSpec::new(vec![h[0]; continuous], exponents, config.holder_constant)?,
        Some(h) if h.len() == continuous => BinningSpec::new(h.clone(), exponents, config.holder_constant)?,
        Some(h) => bail!("{} bandwidths for {continuous} continuous columns", h.len()),
    };
    Ok(spec)
}

fn test(args: TestArgs, format: Option<Format>, threads: usize) -> Result<u8> {
    if matches!(format, Some(Format::Csv | Format::Text)) {
        bail!("`test` reports are JSON only");
    }
    let file: TestFileConfig = match &args.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TestFileConfig::default(),
    };
    let config = TestConfig {
        data: args.data.display().to_string(),
        schema: args.schema.display().to_string(),
        config: args.config.as_ref().map(|p| p.display().to_string()),
        method: args.method.or(file.method).unwrap_or(TestMethod::Bootstrap),
        alpha: args.alpha.or(file.alpha).unwrap_or(0.05),
        replicates: args.replicates.or(file.replicates).unwrap_or(99),
        seed: args.seed.or(file.seed).unwrap_or(1),
        rule: args.rule.or(file.rule).unwrap_or(RuleArg::Standard),
        bandwidth: args.bandwidth.clone().or(file.bandwidth),
        holder_exponent: args.holder_exponent.or(file.holder_exponent).unwrap_or(1.0),
        holder_constant: args.holder_constant.or(file.holder_constant).unwrap_or(1.0),
        improved: args.improved,
        f_prime: args.f_prime,
        d_r: args.d_r,
        reduce: !args.no_reduce,
        force_condition: args.force_condition,
        threads,
    };
    let schema = read(&args.schema)?;
    let csv = fs::File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let data = parse_dataset(csv, &schema)?;
    let options = TestOptions {
        reduce: reduce_options(args.no_reduce, args.force_condition),
        variables: Some(data.schema.names()),
    };
    let facet = user_facet(config.f_prime, config.d_r)?;

    let (seq, report) = if config.method == TestMethod::Continuous {
        let spec = binning_spec(&data, &config)?;
        let seq = empirical_marginals(&bin_continuous(&data, &spec)?)?;
        let report = continuous_test(&data, &spec, config.alpha, config.improved, facet.as_ref(), &options)?;
        (seq, report)
    } else {
        let seq = empirical_marginals(&data)?;
        let report = match config.method {
            TestMethod::Universal => universal_test(&seq, config.alpha, &options)?,
            TestMethod::Improved => improved_test(&seq, config.alpha, facet.as_ref(), &options)?,
            TestMethod::Bootstrap => {
                let rule = match config.rule {
                    RuleArg::Standard => BootstrapRule::Standard,
                    RuleArg::Literal => BootstrapRule::Literal,
                };
                bootstrap_test(&seq, config.alpha, config.replicates, config.seed, rule, &options)?
            }
            TestMethod::Continuous => unreachable!(),
        };
        (seq, report)
    };
    if let Some(path) = &args.dump_marginals {
        let doc = SequenceDocument::from_sequence(&seq, Some(data.schema.names()));
        fs::write(path, doc.to_json()? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print_json(&json!({
        "command": "test",
        "version": VERSION,
        "config": serde_json::to_value(&config)?,
        "report": serde_json::to_value(&report)?,
    }))?;
    Ok(if report.rejects() { EXIT_REJECT } else { 0 })
}

fn tables(seq: &MarginalSequence) -> Vec<Vec<f64>> {
    seq.tables().iter().map(|t| t.mass().to_vec()).collect()
}

fn index(args: IndexArgs, format: Option<Format>) -> Result<u8> {
    let doc = SequenceDocument::from_json(&read(&args.input)?)
        .with_context(|| format!("parsing {}", args.input.display()))?;
    let seq = doc.to_sequence()?;
    let tag = match &args.closed_form {
        Some(name) => Some(FamilyTag::from_name(name).with_context(|| {
            let names: Vec<&str> = FamilyTag::ALL.iter().map(|t| t.name()).collect();
            format!("unknown family `{name}` (one of {})", names.join(", "))
        })?),
        None => None,
    };
    let options = reduce_options(args.no_reduce, args.force_condition);
    let reduced = reduced_index(&seq, &options)?;
    let mut warnings = Vec::new();
    if !reduced.exact {
        warnings.push(format!(
            "only bounds are available: [{:.6}, {:.6}]; the index reported is the lower bound",
            reduced.lower, reduced.upper
        ));
    }
    let detected = detect_family(seq.space(), seq.collection()).map(|d| d.tag.name());
    let closed_form = tag.map(|t| evaluate(&seq, t)).transpose()?;

    let (decomposition, witness) = match incompatibility_index(&seq) {
        Ok(w) => (
            json!({
                "lp_index": w.index,
                "raw_index": w.raw_index,
                "iterations": w.iterations,
                "closest_compatible": w.closest_compatible.as_ref().map(tables),
                "residual": w.residual.as_ref().map(tables),
            }),
            json!({
                "values": w.dual.values,
                "value": w.dual.evaluate(&seq),
                "range": w.dual.range(),
            }),
        ),
        Err(e) => {
            warnings.push(format!("no LP decomposition: {e}"));
            (Value::Null, Value::Null)
        }
    };
    let plan = args.explain.then(|| {
        let names = doc.names.as_deref();
        json!({
            "steps": plan_reductions(seq.collection()).describe(names),
            "applied": reduced.applied,
        })
    });
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if format == Some(Format::Csv) {
        emit(&format!(
            "index,exact,lower,upper,inconsistency,detected_family\n{},{},{},{},{},{}\n",
            reduced.index,
            reduced.exact,
            reduced.lower,
            reduced.upper,
            inconsistency(&seq),
            detected.unwrap_or("")
        ))?;
        return Ok(0);
    }
    print_json(&json!({
        "command": "index",
        "version": VERSION,
        "config": {
            "input": args.input.display().to_string(),
            "explain": args.explain,
            "closed_form": args.closed_form,
            "reduce": !args.no_reduce,
            "force_condition": args.force_condition,
        },
        "index": reduced.index,
        "exact": reduced.exact,
        "bounds": [reduced.lower, reduced.upper],
        "inconsistency": inconsistency(&seq),
        "detected_family": detected,
        "closed_form": closed_form,
        "decomposition": decomposition,
        "witness": witness,
        "plan": plan,
        "warnings": warnings,
    }))?;
    Ok(0)
}

fn critical(args: CriticalArgs, format: Option<Format>) -> Result<u8> {
    let (space, collection) = match (&args.input, &args.patterns) {
        (Some(path), _) => {
            let seq = SequenceDocument::from_json(&read(path)?)?.to_sequence()?;
            (seq.space().clone(), seq.collection().clone())
        }
        (None, Some(p)) => shape(
            p,
            args.sizes.as_deref().unwrap_or_default(),
            args.n.as_deref(),
        )?,
        (None, None) => bail!("give either --input or --patterns with --sizes and --n"),
    };
    let universal = c_alpha(&space, &collection, args.alpha)?;
    let catalog = facet_catalog_entries(&space, &collection);
    let facet = match user_facet(args.f_prime, args.d_r)? {
        Some(f) => Some(f),
        None => {
            let mut best: Option<(f64, FacetInfo)> = None;
            for entry in &catalog {
                let v = c_alpha_prime(&space, &collection, args.alpha, entry)?;
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, entry.clone()));
                }
            }
            best.map(|(_, f)| f)
        }
    };
    let improved = facet
        .as_ref()
        .map(|f| c_alpha_prime(&space, &collection, args.alpha, f))
        .transpose()?;
    let value = match args.method {
        CriticalMethod::Universal => universal,
        CriticalMethod::Improved => {
            improved.context("no facet information for this shape; pass --f-prime and --d-r")?
        }
        CriticalMethod::Min => improved.map_or(universal, |c| c.min(universal)),
    };
    if format == Some(Format::Csv) {
        emit(&format!(
            "method,value,universal,improved,f_prime,d_r,source\n{},{},{},{},{},{},{}\n",
            serde_json::to_value(args.method)?.as_str().unwrap_or_default(),
            value,
            universal,
            improved.map(|c| c.to_string()).unwrap_or_default(),
            facet.as_ref().map(|f| f.f_prime.to_string()).unwrap_or_default(),
            facet.as_ref().map(|f| f.d_r.to_string()).unwrap_or_default(),
            facet.as_ref().map(|f| f.source.to_string()).unwrap_or_default(),
        ))?;
        return Ok(0);
    }
    print_json(&json!({
        "command": "critical",
        "version": VERSION,
        "config": {
            "alpha": args.alpha,
            "method": args.method,
            "input": args.input.as_ref().map(|p| p.display().to_string()),
            "patterns": collection.patterns().iter().map(|p| p.one_based()).collect::<Vec<_>>(),
            "alphabet_sizes": space.alphabet_sizes(),
            "sample_sizes": collection.sample_sizes(),
        },
        "value": value,
        "universal": universal,
        "improved": improved,
        "facet": facet,
        "catalog": catalog,
    }))?;
    Ok(0)
}

fn facets(args: FacetsArgs, format: Option<Format>) -> Result<u8> {
    let (space, collection) = shape(&args.patterns, &args.sizes, None)?;
    let system = essential_facets_sum(&space, &collection)?;
    match format.unwrap_or(Format::Text) {
        Format::Text => emit(&system.to_string())?,
        Format::Csv => {
            let mut text = String::from("kind,terms,rhs\n");
            for row in &system.rows {
                let kind = match row.kind {
                    RowKind::Essential => "essential",
                    RowKind::Nonnegativity => "nonnegativity",
                    RowKind::Equality => "equality",
                };
                let terms: Vec<String> = row
                    .a
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| *a != &Default::default())
                    .map(|(j, a)| format!("{a}*p{j}"))
                    .collect();
                writeln!(text, "{kind},{},{}", terms.join(" + "), row.b)?;
            }
            emit(&text)?;
        }
        Format::Json => print_json(&json!({
            "command": "facets",
            "version": VERSION,
            "config": {
                "patterns": collection.patterns().iter().map(|p| p.one_based()).collect::<Vec<_>>(),
                "alphabet_sizes": space.alphabet_sizes(),
            },
            "F": system.essential_count(),
            "system": system.to_json(),
        }))?,
    }
    Ok(0)
}

fn simulate(args: SimulateArgs, format: Option<Format>, threads: usize) -> Result<u8> {
    let mut config = match args.study.as_str() {
        "rs2-power" => StudyConfig::rs2_power(args.r.unwrap_or(2), 1000, 1),
        "d5-power" => StudyConfig::d5_power(1000, 1),
        path => {
            let text = read(Path::new(path))?;
            StudyConfig::from_json(&text).with_context(|| format!("parsing {path}"))?
        }
    };
    if args.r.is_some() && args.study != "rs2-power" {
        bail!("--r applies to the rs2-power study only");
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(b) = args.replicates {
        config.replicates = b;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(m) = args.method {
        config.method = match m {
            StudyMethodArg::Bootstrap => StudyMethod::Bootstrap,
            StudyMethodArg::Universal => StudyMethod::Universal,
            StudyMethodArg::Improved => StudyMethod::Improved,
        };
    }
    let result = run_power_study(&config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.out {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        result.write_csv(file)?;
    }
    if format == Some(Format::Csv) {
        emit(&result.to_csv()?)?;
        return Ok(0);
    }
    print_json(&json!({
        "command": "simulate",
        "version": VERSION,
        "config": {
            "study": args.study,
            "resolved": serde_json::to_value(&config)?,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
            "threads": threads,
        },
        "rows": serde_json::to_value(&result.rows)?,
        "warnings": result.warnings,
    }))?;
    Ok(0)
}
