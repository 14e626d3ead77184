//! Config-driven experiment runner behind the `minwise-lab` binary.
//!
//! Exit status: 0 when every asserted check passed, 1 when a check failed,
//! 2 on usage, configuration or resource errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::enumerate::Sampling;
use crate::error::{Error, Result};
use crate::extractor::{
    surjectivity_failures, strong_extractor_distance, ComposedMap, FlatSource, LeftoverHash,
    LinearSeededMap, SeedSpectra,
};
use crate::gf2::find_irreducible;
use crate::kwise::{SeededFamily, TWiseFamily};
use crate::minwise::{self, ConstructionParams, MinwiseFamily, Variant};
use crate::rect_prg::{rectangle_probabilities, uniform_family, PrgDescriptor, PrgFamily, PrgKind, Rectangle};
use crate::seed::SeedBits;
use crate::verify::{
    check_joint_uniformity, check_load_lemma, check_reduction, check_twise_tail, measure_batch,
    ErrorReport, LoadConstants, Mode, Query, Regime,
};

pub const SCHEMA_LINE: &str = "# minwise-lab schema v1";

const CSV_COLUMNS: [&str; 16] = [
    "family_id",
    "N",
    "M",
    "k",
    "|X|",
    "mode",
    "samples",
    "measured_p",
    "uniform_ref",
    "fair_p",
    "mult_err_uniform",
    "mult_err_fair",
    "tie_mass",
    "ci_halfwidth",
    "X",
    "Y",
];

#[derive(Parser, Debug)]
#[command(name = "minwise-lab", version, about = "Explicit min-wise hash families and their verification oracles")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Monte-Carlo RNG key.
    #[arg(long, global = true)]
    pub run_seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Exhaustive,
    Mc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Describe a family, or evaluate it at `--eval` points under `--seed`.
    Construct {
        /// Seed as hex, e.g. 0x3fa.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        eval: Vec<u64>,
    },
    /// Measure (k-)min-wise error over a query corpus.
    Measure,
    /// Surjectivity, leftover-hash bound and composition checks.
    ExtractorTest,
    /// Threshold-rectangle errors of a generator.
    PrgTest,
    /// Allocation load checks.
    LoadsTest,
    /// Rectangle error versus min-wise error of a generator.
    ReductionTest,
    /// Joint uniformity and tail estimates of a polynomial family.
    KwiseTest,
}

/// Entry point of the binary.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match cli.common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let c = &cli.common;
    match &cli.command {
        Command::Construct { seed, eval } => {
            let cfg: FamilyConfig = load_config(c)?;
            let out = construct(&cfg, seed.as_deref(), eval)?;
            println!("{out}");
            Ok(true)
        }
        Command::Measure => report(c, "measure", run_measure(&load_config(c)?, c)?),
        Command::ExtractorTest => report(c, "extractor", run_extractor_test(&load_config(c)?)?),
        Command::PrgTest => report(c, "prg", run_prg_test(&load_config(c)?, sampling(c, None)?)?),
        Command::LoadsTest => report(c, "loads", run_loads_test(&load_config(c)?, sampling(c, None)?)?),
        Command::ReductionTest => report(c, "reduction", run_reduction_test(&load_config(c)?)?),
        Command::KwiseTest => report(c, "kwise", run_kwise_test(&load_config(c)?)?),
    }
}

/// Result of one subcommand: artifacts keyed by file name, and the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<(String, String)>,
}

fn report(c: &Common, what: &str, outcome: Outcome) -> Result<bool> {
    write_outcome(&c.out_dir, &outcome)?;
    eprintln!("{what}: {}", if outcome.pass { "pass" } else { "FAIL" });
    Ok(outcome.pass)
}

pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in &outcome.files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn load_config<T: DeserializeOwned>(c: &Common) -> Result<T> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses JSON config text; errors name the offending field and position.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("field {path}: {inner}"))
        }
    })?;
    de.end().map_err(|e| Error::Config(e.to_string()))?;
    Ok(value)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

/// Resolves the sampling mode: flags override the config, which overrides
/// exhaustive.
pub fn sampling(c: &Common, cfg: Option<(Option<Mode>, Option<u64>, Option<u64>)>) -> Result<Sampling> {
    let (mode, samples, run_seed) = cfg.unwrap_or_default();
    let mode = match c.mode {
        Some(ModeArg::Exhaustive) => Mode::Exhaustive,
        Some(ModeArg::Mc) => Mode::Mc,
        None => mode.unwrap_or(Mode::Exhaustive),
    };
    Ok(match mode {
        Mode::Exhaustive => Sampling::Exhaustive,
        Mode::Mc => {
            let samples = c.samples.or(samples).unwrap_or(100_000);
            if samples == 0 {
                return Err(Error::Config("--samples must be positive".into()));
            }
            Sampling::MonteCarlo {
                samples,
                run_seed: c.run_seed.or(run_seed).unwrap_or(0),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwiseConfig {
    pub t: u32,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformConfig {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrgConfig {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub prg: PrgDescriptor,
}

/// A seeded family selected by its `family` tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyConfig {
    Minwise(ConstructionParams),
    Kminwise(ConstructionParams),
    Twise(TwiseConfig),
    Uniform(UniformConfig),
    Prg(PrgConfig),
}

// Hand-written so that errors inside a variant keep their field path; the
// derived internally tagged form reports neither field nor position.
impl<'de> Deserialize<'de> for FamilyConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut map = serde_json::Map::deserialize(d)?;
        let tag = match map.remove("family") {
            Some(Value::String(s)) => s,
            Some(other) => return Err(D::Error::custom(format!("family: expected a string, got {other}"))),
            None => return Err(D::Error::missing_field("family")),
        };
        fn inner<T: DeserializeOwned, E: serde::de::Error>(map: serde_json::Map<String, Value>) -> std::result::Result<T, E> {
            serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| {
                let path = e.path().to_string();
                E::custom(format!("{path}: {}", e.into_inner()))
            })
        }
        Ok(match tag.as_str() {
            "minwise" => FamilyConfig::Minwise(inner(map)?),
            "kminwise" => FamilyConfig::Kminwise(inner(map)?),
            "twise" => FamilyConfig::Twise(inner(map)?),
            "uniform" => FamilyConfig::Uniform(inner(map)?),
            "prg" => FamilyConfig::Prg(inner(map)?),
            other => {
                return Err(D::Error::unknown_variant(
                    other,
                    &["minwise", "kminwise", "twise", "uniform", "prg"],
                ))
            }
        })
    }
}

impl FamilyConfig {
    pub fn build(&self) -> Result<Box<dyn SeededFamily>> {
        Ok(match self {
            FamilyConfig::Minwise(p) => Box::new(minwise::build(p, Variant::Minwise)?),
            FamilyConfig::Kminwise(p) => Box::new(minwise::build(p, Variant::KMinwise)?),
            FamilyConfig::Twise(c) => Box::new(TWiseFamily::new(c.t, c.n, c.m)?),
            FamilyConfig::Uniform(c) => Box::new(uniform_family(c.n, c.m)?),
            FamilyConfig::Prg(c) => Box::new(PrgFamily(c.prg.build(c.n, c.m)?)),
        })
    }

    fn construction(&self) -> Result<Option<MinwiseFamily>> {
        Ok(match self {
            FamilyConfig::Minwise(p) => Some(minwise::build(p, Variant::Minwise)?),
            FamilyConfig::Kminwise(p) => Some(minwise::build(p, Variant::KMinwise)?),
            _ => None,
        })
    }
}

/// `construct`: evaluations one per line, or a JSON description.
pub fn construct(cfg: &FamilyConfig, seed: Option<&str>, points: &[u64]) -> Result<String> {
    let fam = cfg.build()?;
    if let Some(hex) = seed {
        let seed = SeedBits::from_hex(hex, fam.seed_bits())?;
        let vals = points
            .iter()
            .map(|&x| fam.eval(&seed, x).map(|v| v.to_string()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(vals.join("\n"));
    }
    if !points.is_empty() {
        return Err(Error::Config("--eval needs --seed".into()));
    }
    let mut desc = json!({
        "seed_bits": fam.seed_bits(),
        "N": fam.domain_size(),
        "M": fam.range_size(),
    });
    if let Some(c) = cfg.construction()? {
        desc["derived"] = serde_json::to_value(c.derived()).expect("serializable");
        desc["layout"] = serde_json::to_value(c.layout()).expect("serializable");
    }
    Ok(serde_json::to_string_pretty(&desc).expect("serializable"))
}

fn one() -> usize {
    1
}

/// Query generator for `measure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Corpus {
    Explicit {
        queries: Vec<Query>,
    },
    /// `X = [N]`; `Y` runs over every cyclic window of `y_size` points.
    Full {
        #[serde(default = "one")]
        y_size: usize,
    },
    /// Every interval of `size` points, with a random `Y` inside.
    Intervals {
        size: usize,
        #[serde(default = "one")]
        y_size: usize,
        rng_seed: u64,
    },
    /// `count` uniformly random subsets with sizes in `min_size..=max_size`.
    Random {
        count: usize,
        min_size: usize,
        max_size: usize,
        #[serde(default = "one")]
        y_size: usize,
        rng_seed: u64,
    },
}

fn random_y(rng: &mut ChaCha8Rng, x: &[u64], y_size: usize) -> Vec<u64> {
    let mut y: Vec<u64> = sample(rng, x.len(), y_size).into_iter().map(|i| x[i]).collect();
    y.sort_unstable();
    y
}

impl Corpus {
    pub fn queries(&self, n: u64) -> Result<Vec<Query>> {
        let bad = |msg: String| Err(Error::Config(format!("corpus: {msg}")));
        Ok(match self {
            Corpus::Explicit { queries } => queries.clone(),
            Corpus::Full { y_size } => {
                let x: Vec<u64> = (1..=n).collect();
                (0..n)
                    .map(|a| {
                        let mut y: Vec<u64> = (0..*y_size as u64).map(|j| (a + j) % n + 1).collect();
                        y.sort_unstable();
                        Query::new(x.clone(), y)
                    })
                    .collect()
            }
            Corpus::Intervals {
                size,
                y_size,
                rng_seed,
            } => {
                if *size as u64 > n || y_size >= size {
                    return bad(format!("interval size {size} with |Y| = {y_size} over N = {n}"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
                (1..=n - *size as u64 + 1)
                    .map(|a| {
                        let x: Vec<u64> = (a..a + *size as u64).collect();
                        let y = random_y(&mut rng, &x, *y_size);
                        Query::new(x, y)
                    })
                    .collect()
            }
            Corpus::Random {
                count,
                min_size,
                max_size,
                y_size,
                rng_seed,
            } => {
                if min_size > max_size || *max_size as u64 > n || y_size >= min_size {
                    return bad(format!(
                        "sizes {min_size}..={max_size} with |Y| = {y_size} over N = {n}"
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
                (0..*count)
                    .map(|_| {
                        let size = rng.gen_range(*min_size..=*max_size);
                        let mut x: Vec<u64> =
                            sample(&mut rng, n as usize, size).into_iter().map(|i| i as u64 + 1).collect();
                        x.sort_unstable();
                        let y = random_y(&mut rng, &x, *y_size);
                        Query::new(x, y)
                    })
                    .collect()
            }
        })
    }
}

/// Declared acceptance thresholds on the corpus maxima.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mult_err_uniform: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mult_err_fair: Option<f64>,
}

/// A second family run on the same corpus; the main family's largest
/// error must not exceed the baseline's by more than `slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub family_id: String,
    pub family: FamilyConfig,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family_id: String,
    pub family: FamilyConfig,
    pub corpus: Corpus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_seed: Option<u64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
    /// Artifact file stem.
    #[serde(default = "default_stem")]
    pub output: String,
}

fn default_stem() -> String {
    "measure".into()
}

fn fmt_points(v: &[u64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// CSV text for `reports`, schema line first.
pub fn reports_csv(reports: &[ErrorReport]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.family_id.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.size_x.to_string(),
            r.mode.to_string(),
            r.samples.to_string(),
            r.measured_p.to_string(),
            r.uniform_ref.to_string(),
            r.fair_p.to_string(),
            r.mult_err_uniform.to_string(),
            r.mult_err_fair.to_string(),
            r.tie_mass.to_string(),
            r.ci_halfwidth.to_string(),
            fmt_points(&r.x),
            fmt_points(&r.y),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    format!("{SCHEMA_LINE}\n{body}")
}

fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

fn stats(reports: &[ErrorReport]) -> Value {
    let u: Vec<f64> = reports.iter().map(|r| r.mult_err_uniform).collect();
    let f: Vec<f64> = reports.iter().map(|r| r.mult_err_fair).collect();
    let t: Vec<f64> = reports.iter().map(|r| r.tie_mass).collect();
    json!({
        "queries": reports.len(),
        "max_mult_err_uniform": max(&u),
        "median_mult_err_uniform": median(&u),
        "max_mult_err_fair": max(&f),
        "median_mult_err_fair": median(&f),
        "max_tie_mass": max(&t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: Option<f64>, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value.is_none_or(|v| v <= limit),
        }
    }
}

/// `measure`: one CSV row per query plus a JSON summary.
pub fn run_measure(cfg: &ExperimentConfig, c: &Common) -> Result<Outcome> {
    let s = sampling(c, Some((cfg.mode, cfg.samples, cfg.run_seed)))?;
    let fam = cfg.family.build()?;
    let queries = cfg.corpus.queries(fam.domain_size())?;
    let reports = measure_batch(fam.as_ref(), &cfg.family_id, &queries, s)?;
    let errs: Vec<f64> = reports.iter().map(|r| r.mult_err_uniform).collect();
    let fair: Vec<f64> = reports.iter().map(|r| r.mult_err_fair).collect();

    let mut checks = Vec::new();
    if let Some(t) = cfg.thresholds.max_mult_err_uniform {
        checks.push(Check::at_most("max_mult_err_uniform", max(&errs), t));
    }
    if let Some(t) = cfg.thresholds.max_mult_err_fair {
        checks.push(Check::at_most("max_mult_err_fair", max(&fair), t));
    }
    let mut all = reports.clone();
    let mut baseline_stats = Value::Null;
    if let Some(b) = &cfg.baseline {
        let bf = b.family.build()?;
        let base = measure_batch(bf.as_ref(), &b.family_id, &queries, s)?;
        let base_max = max(&base.iter().map(|r| r.mult_err_uniform).collect::<Vec<_>>());
        checks.push(Check::at_most(
            "max_mult_err_uniform within baseline + slack",
            max(&errs),
            base_max.unwrap_or(0.0) + b.slack,
        ));
        baseline_stats = stats(&base);
        baseline_stats["family_id"] = json!(b.family_id);
        baseline_stats["seed_bits"] = json!(bf.seed_bits());
        all.extend(base);
    }
    let pass = checks.iter().all(|c| c.pass);
    let mut summary = json!({
        "schema": SCHEMA_LINE.trim_start_matches("# "),
        "family_id": cfg.family_id,
        "seed_bits": fam.seed_bits(),
        "mode": Mode::from(s),
        "samples": s.count(fam.seed_bits()),
    });
    if let Sampling::MonteCarlo { run_seed, .. } = s {
        summary["run_seed"] = json!(run_seed);
    }
    if let Value::Object(m) = stats(&reports) {
        summary.as_object_mut().unwrap().extend(m);
    }
    summary["baseline"] = baseline_stats;
    summary["checks"] = serde_json::to_value(&checks).unwrap();
    summary["pass"] = json!(pass);
    summary["reports"] = serde_json::to_value(&all).unwrap();
    Ok(Outcome {
        pass,
        files: vec![
            (format!("{}.csv", cfg.output), reports_csv(&all)),
            (format!("{}.json", cfg.output), to_json(&summary)),
        ],
    })
}

fn two_hundred() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorTestConfig {
    pub n: usize,
    pub m: usize,
    /// Defaults to `n - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_bits: Option<usize>,
    /// Source min-entropies; defaults to `m + 1 ..= n - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropies: Option<Vec<usize>>,
    #[serde(default = "two_hundred")]
    pub sources: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Output widths of a chain of full-seed stages run on the uniform source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub k: usize,
    pub sources: usize,
    pub max_distance: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Joint output of a composition on the uniform source, for every seed tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub widths: Vec<usize>,
    pub seed_tuples: u64,
    pub non_uniform: u64,
    pub pass: bool,
}

fn field(n: usize) -> Result<crate::gf2::FieldContext> {
    find_irreducible(n as u32)
}

/// Runs the chain with output widths `widths` on an `n`-bit uniform source.
pub fn check_composition(n: usize, widths: &[usize]) -> Result<CompositionReport> {
    let mut stages = Vec::new();
    let mut rest = n;
    for &w in widths {
        stages.push(LeftoverHash::new(field(rest)?, w)?);
        rest -= w;
    }
    let dyns: Vec<&dyn LinearSeededMap> = stages.iter().map(|s| s as &dyn LinearSeededMap).collect();
    let total_seed: usize = stages.iter().map(|s| s.seed_bits()).sum();
    let out_bits: usize = widths.iter().sum();
    if total_seed > crate::enumerate::EXHAUSTIVE_LIMIT {
        return Err(Error::SeedSpaceTooLarge {
            bits: total_seed,
            limit: crate::enumerate::EXHAUSTIVE_LIMIT,
        });
    }
    let target = 1u64 << (n - out_bits);
    let non_uniform = crate::enumerate::count_seeds(total_seed, Sampling::Exhaustive, |sb| {
        let mut off = 0;
        let seeds: Vec<u64> = stages
            .iter()
            .map(|s| {
                let v = sb.read(off, s.seed_bits());
                off += s.seed_bits();
                v
            })
            .collect();
        let map = ComposedMap::new(&dyns, n, &seeds).expect("widths checked");
        let mut hist = vec![0u64; 1 << out_bits];
        let mut out = vec![0u64; stages.len()];
        for x in 0..1u64 << n {
            map.apply_into(x, &mut out);
            let mut v = 0usize;
            let mut shift = 0;
            for (o, &w) in out.iter().zip(widths) {
                v |= (*o as usize) << shift;
                shift += w;
            }
            hist[v] += 1;
        }
        hist.iter().any(|&h| h != target)
    })?;
    Ok(CompositionReport {
        widths: widths.to_vec(),
        seed_tuples: 1 << total_seed,
        non_uniform,
        pass: non_uniform == 0,
    })
}

/// `extractor-test`: surjectivity of every seed, the leftover-hash bound on
/// random flat sources, and optionally uniformity of a composition.
pub fn run_extractor_test(cfg: &ExtractorTestConfig) -> Result<Outcome> {
    let ctx = field(cfg.n)?;
    let base = match cfg.seed_bits {
        Some(d) => LeftoverHash::with_seed_bits(ctx, d, cfg.m)?,
        None => LeftoverHash::new(ctx, cfg.m)?,
    };
    let failures = surjectivity_failures(&base);
    let entropies = cfg
        .entropies
        .clone()
        .unwrap_or_else(|| (cfg.m + 1..cfg.n).collect());
    let spectra = SeedSpectra::new(&base).ok();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut rows = Vec::new();
    for &k in &entropies {
        if k > cfg.n {
            return Err(Error::Config(format!("entropy {k} above n = {}", cfg.n)));
        }
        let ext = base.clone().with_entropy(k as f64);
        let bound = ext.claimed_error().expect("entropy declared");
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.sources {
            let src = FlatSource::random(cfg.n, k, &mut rng);
            let d = match &spectra {
                Some(sp) => sp.distance(&src),
                None => strong_extractor_distance(&ext, &src),
            };
            worst = worst.max(d);
        }
        rows.push(BoundRow {
            k,
            sources: cfg.sources,
            max_distance: worst,
            bound,
            pass: worst <= bound + 1e-12,
        });
    }
    let composition = cfg
        .composition
        .as_ref()
        .map(|w| check_composition(cfg.n, w))
        .transpose()?;
    let pass = failures.is_empty()
        && rows.iter().all(|r| r.pass)
        && composition.as_ref().is_none_or(|c| c.pass);
    let body = json!({
        "n": cfg.n,
        "m": cfg.m,
        "seed_bits": base.seed_bits(),
        "surjectivity": {
            "seeds": 1u64 << base.seed_bits(),
            "failures": failures,
            "pass": failures.is_empty(),
        },
        "leftover_hash": rows,
        "composition": composition,
        "pass": pass,
    });
    Ok(Outcome {
        pass,
        files: vec![("extractor.json".into(), to_json(&body))],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrgTestConfig {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub prg: PrgDescriptor,
    /// Largest coordinate set constrained; defaults to `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_coords: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectangleRow {
    pub coords: Vec<u64>,
    pub theta: u64,
    pub pseudo: f64,
    pub uniform: f64,
    pub error: f64,
}

fn subsets(n: u64, max: usize) -> Vec<Vec<u64>> {
    (1u64..1 << n)
        .filter(|m| (m.count_ones() as usize) <= max)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect())
        .collect()
}

/// `prg-test`: every threshold rectangle `{x_i > theta, i in S}`.
pub fn run_prg_test(cfg: &PrgTestConfig, s: Sampling) -> Result<Outcome> {
    if cfg.n > 16 {
        return Err(Error::Config(format!("prg-test enumerates coordinate sets; N = {} is above 16", cfg.n)));
    }
    let prg = cfg.prg.build(cfg.n, cfg.m)?;
    let max_coords = cfg.max_coords.unwrap_or(cfg.n as usize);
    let mut rows = Vec::new();
    for coords in subsets(cfg.n, max_coords) {
        for theta in 0..cfg.m {
            let rect = Rectangle::threshold(cfg.n, &coords, theta);
            let (p, u) = rectangle_probabilities(prg.as_ref(), &rect, s)?;
            rows.push(RectangleRow {
                coords: coords.clone(),
                theta,
                pseudo: p,
                uniform: u,
                error: (p - u).abs(),
            });
        }
    }
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let claimed = prg.claimed_error();
    let mut checks = vec![Check::at_most("max error within claim", Some(worst), claimed)];
    if s.is_exhaustive() {
        let exact_up_to = match cfg.prg.kind {
            PrgKind::Full => Some(cfg.n as usize),
            PrgKind::Twise => cfg.prg.params.t.map(|t| t as usize),
            PrgKind::Halving => None,
        };
        if let Some(t) = exact_up_to {
            let v = rows
                .iter()
                .filter(|r| r.coords.len() <= t)
                .map(|r| r.error)
                .fold(0.0, f64::max);
            checks.push(Check::at_most(&format!("zero error on <= {t} coordinates"), Some(v), 1e-12));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    let body = json!({
        "prg": prg.descriptor(),
        "N": cfg.n,
        "M": cfg.m,
        "mode": Mode::from(s),
        "max_error": worst,
        "checks": checks,
        "rectangles": rows,
        "pass": pass,
    });
    Ok(Outcome {
        pass,
        files: vec![("prg.json".into(), to_json(&body))],
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocation {
    /// `C_g k`-wise polynomial family.
    #[default]
    Twise,
    /// Truly random allocation.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub regime: Regime,
    pub x: Vec<u64>,
    pub y: Vec<u64>,
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsTestConfig {
    #[serde(rename = "N")]
    pub n: u64,
    pub ell: u64,
    #[serde(rename = "C", default = "one_u32")]
    pub c: u32,
    #[serde(rename = "C_g")]
    pub c_g: u32,
    #[serde(default = "one_u32")]
    pub k: u32,
    /// Defaults to `ceil(log N / log log N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default)]
    pub kminwise: bool,
    #[serde(default)]
    pub allocation: Allocation,
    pub cases: Vec<LoadCase>,
}

/// `loads-test`: bad-event frequencies of the allocation against the load
/// bounds.
pub fn run_loads_test(cfg: &LoadsTestConfig, s: Sampling) -> Result<Outcome> {
    let g: Box<dyn SeededFamily> = match cfg.allocation {
        Allocation::Twise => Box::new(TWiseFamily::new(cfg.c_g * cfg.k, cfg.n, cfg.ell)?),
        Allocation::Uniform => Box::new(uniform_family(cfg.n, cfg.ell)?),
    };
    let consts = LoadConstants {
        c: cfg.c,
        c_g: cfg.c_g,
        k: cfg.k,
        t: cfg.t.unwrap_or_else(|| minwise::default_t(cfg.n)),
        kminwise: cfg.kminwise,
    };
    let reports = cfg
        .cases
        .iter()
        .map(|case| check_load_lemma(g.as_ref(), &case.x, &case.y, case.regime, &consts, s))
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    let body = json!({
        "N": cfg.n,
        "ell": cfg.ell,
        "constants": consts,
        "allocation": cfg.allocation,
        "seed_bits": g.seed_bits(),
        "mode": Mode::from(s),
        "cases": reports,
        "pass": pass,
    });
    Ok(Outcome {
        pass,
        files: vec![("loads.json".into(), to_json(&body))],
    })
}

fn default_orders() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionTestConfig {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub prg: PrgDescriptor,
    /// `|Y|` values for the generated corpus.
    #[serde(default = "default_orders")]
    pub k: Vec<usize>,
    /// Explicit queries; by default every `Y ⊂ X ⊆ [N]` with `|Y|` in `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<Vec<Query>>,
}

/// Every `(X, Y)` with `Y` a proper `k`-subset of `X ⊆ [n]`.
pub fn all_queries(n: u64, k: usize) -> Vec<Query> {
    let mut out = Vec::new();
    for x in subsets(n, n as usize) {
        if x.len() <= k {
            continue;
        }
        for ymask in 1u64..1 << x.len() {
            if ymask.count_ones() as usize == k {
                let y = (0..x.len()).filter(|i| ymask >> i & 1 == 1).map(|i| x[i]).collect();
                out.push(Query::new(x.clone(), y));
            }
        }
    }
    out
}

/// `reduction-test`: min-wise error of a generator against its
/// threshold-rectangle error.
pub fn run_reduction_test(cfg: &ReductionTestConfig) -> Result<Outcome> {
    let prg = cfg.prg.build(cfg.n, cfg.m)?;
    let queries = match &cfg.queries {
        Some(q) => q.clone(),
        None => cfg.k.iter().flat_map(|&k| all_queries(cfg.n, k)).collect(),
    };
    let reports = queries
        .iter()
        .map(|q| check_reduction(prg.as_ref(), &q.x, &q.y))
        .collect::<Result<Vec<_>>>()?;
    let violations = reports.iter().filter(|r| !r.holds).count();
    let pass = violations == 0;
    let body = json!({
        "prg": prg.descriptor(),
        "N": cfg.n,
        "M": cfg.m,
        "queries": reports.len(),
        "violations": violations,
        "reports": reports,
        "pass": pass,
    });
    Ok(Outcome {
        pass,
        files: vec![("reduction.json".into(), to_json(&body))],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KwiseTestConfig {
    pub t: u32,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    /// Tail estimates for every set size `1..=b_max` and threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<u64>,
}

/// `kwise-test`: exact joint uniformity and tail estimates.
pub fn run_kwise_test(cfg: &KwiseTestConfig) -> Result<Outcome> {
    let fam = TWiseFamily::new(cfg.t, cfg.n, cfg.m)?;
    let joint = check_joint_uniformity(&fam, cfg.t)?;
    let mut tails = Vec::new();
    for b in 1..=cfg.b_max.unwrap_or(0) {
        for theta in 0..=cfg.m {
            tails.push(check_twise_tail(cfg.t, b, theta, cfg.m)?);
        }
    }
    let pass = joint.pass && tails.iter().all(|t| t.estimate1_holds);
    let body = json!({
        "t": cfg.t,
        "N": cfg.n,
        "M": cfg.m,
        "joint": joint,
        "tails": tails,
        "pass": pass,
    });
    Ok(Outcome {
        pass,
        files: vec![("kwise.json".into(), to_json(&body))],
    })
}
