//! `bdlattice` command-line front end.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdlattice::bijection::{BijectionError, SetupFile};
use bdlattice::brs::{
    kesten_predict, offset_grid, sweep, BrsError, BrsInstance, Convention, Discrepancy, FloatInstance, InstanceFile,
    Kesten, BRS_SCHEMA_VERSION,
};
use bdlattice::cutproject::{patch_csv, patch_json, Region, Scheme, SchemeError, SchemeFile};
use bdlattice::penrose::{
    default_offset, patch_plot_csv, polyomino_family, run_pipeline_with_patch, CubeRegion, PenroseConfig, PenroseError,
    RegionFile,
};
use bdlattice::{catalog, ExactScalar};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const CSV_HELP: &str = "\
CSV outputs (all carry a trailing `precision` column):
  generate --format csv   gamma_0..gamma_{n-1}, y_*, w_*, piece, precision
                          (y = physical image, w = internal image)
  bijection --pairs       y_*, fy_*, displacement, precision
                          (a point of the patch and its lattice target)
  discrepancy --curve     M, D, precision
  penrose --patch         u_0, u_1, piece, precision
                          (orthonormal coordinates in the physical plane)
In float mode the precision column reads `float:BITS;min_margin=M`.
JSON outputs carry `schema_version` and `precision`.
Exit status: 0 all invariants held, 1 invariant violated, 2 malformed input.";

#[derive(Parser, Debug)]
#[command(
    name = "bdlattice",
    version,
    about = "Cut-and-project sets, bounded-distance bijections and bounded remainder sets",
    after_long_help = CSV_HELP
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `exact` or `float:BITS`.
    #[arg(long, global = true, env = "BDLATTICE_PRECISION", default_value = "exact", value_parser = parse_precision)]
    precision: Precision,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate a patch of a cut-and-project set.
    Generate(GenerateArgs),
    /// Build and verify the bounded-distance bijection on a patch.
    Bijection(BijectionArgs),
    /// Discrepancy of a bounded remainder set instance.
    Discrepancy(DiscrepancyArgs),
    /// Kesten prediction for an interval plus a discrepancy verdict.
    BrsCheck(BrsCheckArgs),
    /// Penrose vertex set: decomposition, per-piece bijections and counting.
    Penrose(PenroseArgs),
    /// Run a subcommand described by a TOML file.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Precision {
    Exact,
    Float(u32),
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Exact => write!(f, "exact"),
            Precision::Float(b) => write!(f, "float:{b}"),
        }
    }
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "exact" => Ok(Precision::Exact),
        "float" => Ok(Precision::Float(256)),
        _ => {
            let bits = s
                .strip_prefix("float:")
                .ok_or_else(|| format!("expected `exact` or `float:BITS`, got {s:?}"))?;
            match bits.parse::<u32>() {
                Ok(b) if (16..=65536).contains(&b) => Ok(Precision::Float(b)),
                _ => Err(format!("float bits must be an integer in 16..=65536, got {bits:?}")),
            }
        }
    }
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Γ-coordinate box `LO ≤ γᵢ ≤ HI` in every coordinate.
    #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, conflicts_with = "radius")]
    bbox: Option<Vec<i64>>,
    /// Physical ball around the origin (exact expression, e.g. `40` or `3*sqrt(5)`).
    #[arg(long)]
    radius: Option<String>,
}

impl RegionArgs {
    fn region(&self, dim: usize) -> Result<Region, Failure> {
        match (&self.bbox, &self.radius) {
            (Some(b), None) => Ok(Region::cube(dim, b[0], b[1])),
            (None, Some(r)) => {
                let radius: ExactScalar = r.parse().map_err(|e| Failure::input(format!("radius {r:?}: {e}")))?;
                if radius.signum() < 0 {
                    return Err(Failure::input("radius must be non-negative"));
                }
                Ok(Region::ball(dim, radius))
            }
            _ => Err(Failure::input("a region is required: --box LO HI or --radius R")),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Scheme description (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scheme: Option<PathBuf>,
    /// Built-in scheme: fibonacci, fibonacci-n2, brs-golden, brs-sqrt2, penrose.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    region: RegionArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BijectionArgs {
    /// Setup description (TOML): `[scheme]`, `z`, `lambda_prime`, optional `lambda_c`.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    setup: Option<PathBuf>,
    /// Built-in setup: fibonacci, fibonacci-n2, brs-golden, brs-sqrt2.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    region: RegionArgs,
    /// Verification report (JSON; stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Point/target pairs (CSV).
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    /// Sum over n = 0..M−1.
    Rotation,
    /// Sum over n = 1..M.
    Suspension,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Rotation => Convention::Rotation,
            ConventionArg::Suspension => Convention::Suspension,
        }
    }
}

#[derive(Args, Debug)]
struct DiscrepancyArgs {
    /// Instance description (TOML): `alpha`, `lifts`, optional `x`, `horizon`, `offsets`.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    instance: Option<PathBuf>,
    /// Built-in instance: brs-golden, brs-sqrt2.
    #[arg(long)]
    preset: Option<String>,
    /// Largest M (default 100000, or the instance file's value).
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, value_enum, default_value = "rotation")]
    convention: ConventionArg,
    /// Also sweep this many offsets from a deterministic grid.
    #[arg(long)]
    offsets: Option<usize>,
    /// Discrepancy curve (CSV).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Summary (JSON; stdout when absent).
    #[arg(long, alias = "summary")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BrsCheckArgs {
    /// Rotation number (exact expression); defaults to (√5−1)/2.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Interval length ℓ of P = [0, ℓ).
    #[arg(long, allow_hyphen_values = true)]
    length: String,
    /// Largest |k| searched for ℓ ≡ kα (mod 1).
    #[arg(long, default_value_t = 50)]
    depth: u32,
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    /// Report (JSON; stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PenroseArgs {
    /// Ambient offset of the window (5 exact expressions).
    #[arg(long, num_args = 5, allow_hyphen_values = true)]
    offset: Option<Vec<String>>,
    /// Physical radius of the verified patch.
    #[arg(long, default_value_t = 60.0)]
    radius: f64,
    /// Random points for the decomposition check.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Number of random polyominoes.
    #[arg(long, default_value_t = 100)]
    regions: usize,
    /// Largest polyomino size.
    #[arg(long, default_value_t = 10_000)]
    max_region: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest accepted log-log slope of residual against boundary.
    #[arg(long, default_value_t = 1.1)]
    max_slope: f64,
    /// Extra region to evaluate (JSON `{"cubes": [[i, j], ...]}`).
    #[arg(long)]
    region_file: Option<PathBuf>,
    /// Writes the generated polyominoes (JSON list of region files).
    #[arg(long)]
    regions_out: Option<PathBuf>,
    /// Patch plot data (CSV).
    #[arg(long)]
    patch: Option<PathBuf>,
    /// Report (JSON; stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with `command = "..."` and the subcommand's options as keys
    /// (underscores or dashes; arrays expand to several values).
    #[arg(long)]
    config: PathBuf,
}

/// Outcome other than success.
#[derive(Debug)]
enum Failure {
    /// Exit 2.
    Input(String),
    /// Exit 1.
    Violation(String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<BijectionError> for Failure {
    fn from(e: BijectionError) -> Self {
        match e {
            BijectionError::Scheme(s) => s.into(),
            BijectionError::NotAccepted(_) | BijectionError::InvariantBreach(_) => Failure::Violation(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<BrsError> for Failure {
    fn from(e: BrsError) -> Self {
        match e {
            BrsError::Scheme(s) => s.into(),
            BrsError::Bijection(b) => b.into(),
            BrsError::PrecisionExhausted { .. } => Failure::Violation(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<PenroseError> for Failure {
    fn from(e: PenroseError) -> Self {
        match e {
            PenroseError::Scheme(s) => s.into(),
            PenroseError::Bijection(b) => b.into(),
            PenroseError::Decomposition(_) => Failure::Violation(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(path: Option<&Path>, value: &Value) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    emit(path, &text)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn tag(precision: Precision, margin: Option<f64>) -> String {
    match margin {
        Some(m) => format!("{precision};min_margin={m:.3e}"),
        None => precision.to_string(),
    }
}

fn load_scheme(file: Option<&Path>, preset: Option<&str>) -> Result<Scheme, Failure> {
    match (file, preset) {
        (Some(f), _) => Ok(SchemeFile::from_toml(&read(f)?)?.build()?),
        (None, Some(p)) => Ok(catalog::scheme(p)?),
        (None, None) => Err(Failure::input("--scheme or --preset is required")),
    }
}

fn generate(args: &GenerateArgs, precision: Precision) -> Outcome {
    let scheme = load_scheme(args.scheme.as_deref(), args.preset.as_deref())?;
    let region = args.region.region(scheme.dim())?;
    let points = scheme.generate_patch(&region)?;
    let margin = match precision {
        Precision::Exact => None,
        Precision::Float(bits) => {
            let mut min = f64::INFINITY;
            for p in &points {
                let (piece, m) = scheme
                    .accept_float(&p.gamma, bits)
                    .map_err(|e| Failure::Violation(format!("precision exhausted at {:?}: {e}", p.gamma)))?;
                if piece != Some(p.piece) {
                    return Err(Failure::Violation(format!(
                        "float acceptance of {:?} gave {piece:?}, exact gave {}",
                        p.gamma, p.piece
                    )));
                }
                min = min.min(m);
            }
            Some(min)
        }
    };
    let precision = tag(precision, margin.filter(|m| m.is_finite()));
    match args.format {
        Format::Csv => emit(args.out.as_deref(), &patch_csv(scheme.dim(), &points, &precision)),
        Format::Json => emit_json(args.out.as_deref(), &patch_json(&scheme, &points, &precision)),
    }
}

fn bijection(args: &BijectionArgs, precision: Precision) -> Outcome {
    if precision != Precision::Exact {
        eprintln!("bijection: verification is exact; ignoring {precision}");
    }
    let setup = match (&args.setup, &args.preset) {
        (Some(f), _) => SetupFile::from_toml(&read(f)?)?.build()?,
        (None, Some(p)) => catalog::setup(p)?,
        (None, None) => return Err(Failure::input("--setup or --preset is required")),
    };
    let region = args.region.region(setup.scheme().dim())?;
    let patch = setup.scheme().generate_patch(&region)?;
    let report = setup.verify_patch(&patch, &region)?;
    if let Some(p) = &args.pairs {
        emit(Some(p), &setup.pairs_csv(&patch)?)?;
    }
    emit_json(args.out.as_deref(), &to_json(&report))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("bijection verification failed: {}", report.failures.join("; "))))
    }
}

fn discrepancy(args: &DiscrepancyArgs, precision: Precision) -> Outcome {
    let file = match &args.instance {
        Some(f) => Some(InstanceFile::from_toml(&read(f)?)?),
        None => None,
    };
    let exact = match (&file, &args.preset) {
        (Some(f), _) => match precision {
            Precision::Exact => Some(f.build()?),
            // Float inputs need not be exact expressions.
            Precision::Float(_) => f.build().ok(),
        },
        (None, Some(p)) => Some(catalog::brs_instance(p)?),
        (None, None) => return Err(Failure::input("--instance or --preset is required")),
    };
    let horizon = args.horizon.or(file.as_ref().and_then(|f| f.horizon)).unwrap_or(100_000);
    let offsets = args.offsets.or(file.as_ref().and_then(|f| f.offsets)).unwrap_or(0);
    let convention = Convention::from(args.convention);

    let (disc, margin) = match precision {
        Precision::Exact => {
            let inst = exact.as_ref().expect("exact instance");
            (inst.discrepancy(horizon, convention), None)
        }
        Precision::Float(bits) => {
            let fi = match (&file, &exact) {
                (Some(f), _) => f.build_float(bits)?,
                (None, Some(inst)) => FloatInstance::from_exact(inst, bits)?,
                (None, None) => unreachable!(),
            };
            let (hits, m) = fi.hits(horizon)?;
            let volume = ExactScalar::from_rational(fi.volume().to_rational());
            (Discrepancy::from_hits(hits, volume, convention), Some(m))
        }
    };
    let ptag = tag(precision, margin.filter(|m| m.is_finite()));
    if let Some(p) = &args.curve {
        emit(Some(p), &disc.curve_csv(&ptag))?;
    }

    let summary = disc.summary();
    let visits = disc.hit_sum(horizon + 1) as f64;
    let density = visits / (horizon as f64 + 1.0);
    let volume = exact.as_ref().map(|i| i.volume().to_f64());
    let bound = match &exact {
        Some(inst) if inst.radicand() > 1 => Some(inst.bound()?),
        _ => None,
    };
    let violations = bound.as_ref().map(|b| disc.violations(b)).unwrap_or_default();
    let mut out = json!({
        "schema_version": BRS_SCHEMA_VERSION,
        "precision": ptag,
        "summary": to_json(&summary),
        "density": density,
        "volume": volume,
        "density_relative_error": volume.map(|v| (density - v).abs() / v),
        "bound": bound.as_ref().map(to_json),
        "within_bound": bound.as_ref().map(|_| violations.is_empty()),
        "violations": violations.len(),
        "first_violation": violations.first(),
    });
    if let Some(m) = margin {
        out["min_margin"] = json!(m);
    }
    if let Some(inst) = &exact {
        out["independence"] = to_json(&inst.independence());
    }
    let mut sweep_ok = true;
    if offsets > 0 {
        let inst = exact
            .as_ref()
            .ok_or_else(|| Failure::input("an offset sweep needs an exactly representable instance"))?;
        let grid = offset_grid(inst.dim(), inst.radicand(), offsets);
        let report = sweep(inst, horizon, &grid, convention)?;
        sweep_ok = report.within_bound;
        out["sweep"] = to_json(&report);
    }
    emit_json(args.out.as_deref(), &out)?;
    match (violations.first(), sweep_ok) {
        (None, true) => Ok(()),
        (Some(m), _) => Err(Failure::Violation(format!(
            "discrepancy exceeds |P|·C + 1 at M = {m} ({} violations)",
            violations.len()
        ))),
        (None, false) => Err(Failure::Violation("offset sweep exceeds |P|·C + 1".into())),
    }
}

fn brs_check(args: &BrsCheckArgs, precision: Precision) -> Outcome {
    if precision != Precision::Exact {
        eprintln!("brs-check: runs in exact arithmetic; ignoring {precision}");
    }
    let parse = |s: &str, what: &str| -> Result<ExactScalar, Failure> {
        s.parse().map_err(|e| Failure::input(format!("{what} {s:?}: {e}")))
    };
    let alpha = match &args.alpha {
        Some(a) => parse(a, "alpha")?,
        None => &catalog::golden() - &ExactScalar::one(),
    };
    let ell = parse(&args.length, "length")?;
    if ell.signum() <= 0 {
        return Err(Failure::input("length must be positive"));
    }
    let reference = BrsInstance::interval(alpha.clone(), 1, 0)?;
    let reference_bound = reference.bound()?;
    let prediction = kesten_predict(&alpha, &ell, args.depth);
    let mut out = json!({
        "schema_version": BRS_SCHEMA_VERSION,
        "precision": Precision::Exact.to_string(),
        "alpha": alpha.to_string(),
        "length": ell.to_string(),
        "horizon": args.horizon,
        "reference_count_bound": reference_bound.count_bound,
    });
    let verdict = match prediction {
        Kesten::Brs(k) => {
            let m = &ell - &(&ExactScalar::from_int(k) * &alpha);
            let m = i64::try_from(m.floor()).map_err(|_| Failure::input("length out of range"))?;
            let inst = BrsInstance::interval(alpha.clone(), k, m)?;
            let bound = inst.bound()?;
            let disc = inst.discrepancy(args.horizon, Convention::Rotation);
            let violations = disc.violations(&bound);
            out["prediction"] = json!("BRS");
            out["k"] = json!(k);
            out["m"] = json!(m);
            out["summary"] = to_json(&disc.summary());
            out["bound"] = to_json(&bound);
            out["within_bound"] = json!(violations.is_empty());
            if violations.is_empty() {
                Ok(())
            } else {
                Err(Failure::Violation(format!(
                    "predicted bounded remainder set exceeds its bound at M = {}",
                    violations[0]
                )))
            }
        }
        Kesten::NotFound => {
            let inst = BrsInstance::from_vectors(vec![alpha.clone()], vec![vec![ell.clone()]], vec![ExactScalar::zero()])?;
            let summary = inst.discrepancy(args.horizon, Convention::Rotation).summary();
            let ratio = summary.max_abs / reference_bound.count_bound;
            out["prediction"] = json!("NOT-FOUND");
            out["depth"] = json!(args.depth);
            out["summary"] = to_json(&summary);
            out["ratio_to_reference"] = json!(ratio);
            out["exceeds_three_times_reference"] = json!(ratio > 3.0);
            if ratio <= 3.0 {
                eprintln!(
                    "brs-check: expectation not met: max |D| = {} is {ratio:.3}× the reference bound (≤ 3×)",
                    summary.max_abs
                );
            }
            Ok(())
        }
    };
    emit_json(args.out.as_deref(), &out)?;
    verdict
}

fn penrose(args: &PenroseArgs, precision: Precision) -> Outcome {
    if precision != Precision::Exact {
        eprintln!("penrose: verification is exact; ignoring {precision}");
    }
    let offset = match &args.offset {
        Some(o) => o
            .iter()
            .map(|s| s.parse().map_err(|e| Failure::input(format!("offset {s:?}: {e}"))))
            .collect::<Result<Vec<ExactScalar>, _>>()?,
        None => default_offset(),
    };
    let extra_regions = match &args.region_file {
        Some(f) => vec![CubeRegion::from_json(2, &read(f)?)?],
        None => Vec::new(),
    };
    if !(args.radius.is_finite() && args.radius >= 0.0) {
        return Err(Failure::input("radius must be a non-negative number"));
    }
    let config = PenroseConfig {
        offset,
        radius: args.radius,
        decomposition_samples: args.samples,
        regions: args.regions,
        max_region: args.max_region,
        seed: args.seed,
        max_slope: args.max_slope,
        extra_regions,
    };
    if let Some(p) = &args.regions_out {
        let family: Vec<RegionFile> = polyomino_family(args.regions, args.max_region, args.seed)
            .iter()
            .map(CubeRegion::to_file)
            .collect();
        emit_json(Some(p), &to_json(&family))?;
    }
    let (report, patch) = run_pipeline_with_patch(&config)?;
    if let Some(p) = &args.patch {
        emit(Some(p), &patch_plot_csv(&patch, &report.precision))?;
    }
    emit_json(args.out.as_deref(), &to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Violation("penrose pipeline reported a failed invariant".into()))
    }
}

/// Turns a TOML config into command-line arguments.
fn config_args(text: &str) -> Result<Vec<String>, Failure> {
    let table: toml::Table = text.parse().map_err(|e| Failure::input(format!("config: {e}")))?;
    let command = match table.get("command") {
        Some(toml::Value::String(s)) => s.clone(),
        _ => return Err(Failure::input("config: `command` (a string) is required")),
    };
    if command == "run" {
        return Err(Failure::input("config: `command` cannot be `run`"));
    }
    let scalar = |key: &str, v: &toml::Value| -> Result<String, Failure> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(n) => Ok(n.to_string()),
            toml::Value::Float(x) => Ok(x.to_string()),
            _ => Err(Failure::input(format!("config: unsupported value for `{key}`"))),
        }
    };
    let mut args = vec!["bdlattice".to_string(), command];
    for (key, value) in &table {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => args.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                args.push(flag);
                for item in items {
                    args.push(scalar(key, item)?);
                }
            }
            v => {
                args.push(flag);
                args.push(scalar(key, v)?);
            }
        }
    }
    Ok(args)
}

fn dispatch(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("--threads: {e}")))?;
    }
    let precision = cli.precision;
    match &cli.command {
        Command::Generate(a) => generate(a, precision),
        Command::Bijection(a) => bijection(a, precision),
        Command::Discrepancy(a) => discrepancy(a, precision),
        Command::BrsCheck(a) => brs_check(a, precision),
        Command::Penrose(a) => penrose(a, precision),
        Command::Run(a) => {
            let args = config_args(&read(&a.config)?)?;
            let mut inner = Cli::try_parse_from(&args).map_err(|e| Failure::input(format!("config: {e}")))?;
            // The global pool can only be built once; an outer --threads wins.
            if cli.threads.is_some() {
                inner.threads = None;
            }
            if !args.iter().any(|s| s == "--precision") {
                inner.precision = precision;
            }
            dispatch(inner)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("bdlattice: invariant violated: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("bdlattice: {msg}");
            ExitCode::from(2)
        }
    }
}
