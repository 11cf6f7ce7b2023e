//! The `chaoskit` command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 budget or oracle cap exceeded,
//! 4 violated precondition (symmetry, normalization, diagonal support),
//! 5 verification failure or a `rerun --check` mismatch.
//!
//! Tables default to CSV and single reports to JSON; `--json` forces JSON.
//! Every output embeds the [`RunManifest`] that reproduces it.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chaoskit_core::combinatorics::{classical_coeff, dyck_check, enumerate, limit_value, limit_weight};
use chaoskit_core::moments::{
    beauty_formula_sides, convergence_report_with, relative_error, scaled_moment, target_moment,
};
use chaoskit_core::{
    classical_fourth_identity, contraction_profile, family_kernel, fourth_moment_gap, free_fourth_identity,
    moment_via_expansion, normalize_variance, set_entry_budget, wick_oracle_moment, Error, ErrorKind,
    Evaluation, Family, GridKernel, Model, NumericMode, Rational, Scalar, ScaledKernel, TupleClass,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::io::{self, render_csv, render_json, scalar_json, IoError, KernelDoc, RunManifest, Table};
use crate::simulate::{mc_classical_moment, mc_free_moment, mc_free_moment_controlled, SampleConfig, RNG_ALGORITHM};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "chaoskit", version, about = "Moments, contractions and fourth-moment checks for multiple Wiener and Wigner integrals of step kernels")]
pub struct Cli {
    /// Emit JSON for every command.
    #[arg(long, global = true)]
    pub json: bool,
    /// Arithmetic: exact rationals or binary64. Defaults to the kernel file's mode, else exact.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads for sampling.
    #[arg(long, global = true, env = "CHAOSKIT_THREADS")]
    pub threads: Option<usize>,
    /// Largest dense tensor (in entries) any contraction may allocate.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// E[F^k] by the contraction formula, the product-formula expansion or the Wick oracle.
    Moment(MomentArgs),
    /// Fourth moment against its contraction identity, the profile and the gap.
    FourthCheck(KernelArgs),
    /// Enumerate the contraction index sets.
    IndexSets(IndexSetArgs),
    /// Moment convergence table along a kernel family.
    Converge(ConvergeArgs),
    /// Monte Carlo estimate of E[F^k] against the exact value.
    Simulate(SimulateArgs),
    /// Run the invariant suite, plus any fixture files.
    Verify(VerifyArgs),
    /// Re-run the command recorded in an output's manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Classical,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(name = "pair_clt")]
    PairClt,
    #[value(name = "constant_hermite")]
    ConstantHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    A,
    B,
    C,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Formula,
    Expansion,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalArg {
    Auto,
    PrefixTree,
    Network,
}

impl From<ModeArg> for NumericMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => NumericMode::Exact,
            ModeArg::Float => NumericMode::Float,
        }
    }
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Classical => Model::Classical,
            ModelArg::Free => Model::Free,
        }
    }
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::PairClt => Family::PairClt,
            FamilyArg::ConstantHermite => Family::ConstantHermite,
        }
    }
}

impl From<ClassArg> for TupleClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::A => TupleClass::A,
            ClassArg::B => TupleClass::B,
            ClassArg::C => TupleClass::C,
            ClassArg::E => TupleClass::E,
        }
    }
}

impl From<EvalArg> for Evaluation {
    fn from(e: EvalArg) -> Self {
        match e {
            EvalArg::Auto => Evaluation::Auto,
            EvalArg::PrefixTree => Evaluation::PrefixTree,
            EvalArg::Network => Evaluation::Network,
        }
    }
}

/// Where the kernel comes from and what to do to it before use.
#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Kernel JSON file.
    #[arg(conflicts_with = "family")]
    pub kernel: Option<PathBuf>,
    /// Built-in kernel family instead of a file.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Family size (pair_clt).
    #[arg(long)]
    pub n: Option<usize>,
    /// Chaos order (constant_hermite).
    #[arg(long)]
    pub p: Option<usize>,
    /// Overrides the model named in the kernel file; families default to classical.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Rescale to unit variance in the chosen model.
    #[arg(long)]
    pub normalize: bool,
    /// Split each cell into factor^p subcells first.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Zero every cell with a repeated index (after refining).
    #[arg(long)]
    pub off_diagonal: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MomentArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "formula")]
    pub path: PathArg,
    /// Evaluation strategy for the contraction formula.
    #[arg(long, value_enum, default_value = "auto")]
    pub eval: EvalArg,
}

#[derive(Debug, Clone, Args)]
pub struct IndexSetArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "b")]
    pub class: ClassArg,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum, default_value = "pair_clt")]
    pub family: FamilyArg,
    /// Family sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value = "classical")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub eval: EvalArg,
    /// One row per C-tuple summand instead of per moment.
    #[arg(long)]
    pub terms: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GUE matrix dimension (free model).
    #[arg(long, default_value_t = 200)]
    pub dim: usize,
    /// Regress on short-word traces with known means (free model).
    #[arg(long)]
    pub control_variates: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Kernel files with an "expect" object.
    #[arg(long)]
    pub fixture: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A CSV or JSON output of an earlier run.
    pub file: PathBuf,
    /// Compare the regenerated output with the file byte for byte.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(IoError),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let kind = match self {
            CliError::Core(e) | CliError::Io(IoError::Core(e)) => e.kind(),
            _ => return EXIT_INPUT,
        };
        match kind {
            ErrorKind::Input => EXIT_INPUT,
            ErrorKind::Budget => EXIT_BUDGET,
            ErrorKind::Precondition => EXIT_PRECONDITION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(c) => CliError::Core(c),
            other => CliError::Io(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Rendered output and the exit status it carries.
struct Outcome {
    text: String,
    status: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, status: EXIT_OK }
    }
}

/// Runs the CLI against the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    if let Some(t) = cli.threads {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    if let Some(b) = cli.budget {
        set_entry_budget(b);
    }
    let output = cli.output.clone();
    let outcome = match execute(cli, &argv, None) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let written = match output {
        Some(path) => std::fs::write(&path, &outcome.text).map_err(|source| IoError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => out.write_all(outcome.text.as_bytes()).map_err(|source| IoError::Write {
            path: "<stdout>".into(),
            source,
        }),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    outcome.status
}

struct Ctx<'a> {
    argv: &'a [String],
    json: bool,
    mode: Option<NumericMode>,
    timestamp: String,
}

impl Ctx<'_> {
    fn manifest(&self, command: &str, mode: NumericMode) -> RunManifest {
        RunManifest::new(command, self.argv, mode, self.timestamp.clone())
    }

    fn table(&self, manifest: &RunManifest, table: &Table) -> CliResult<String> {
        Ok(if self.json {
            render_json(manifest, table.to_json())?
        } else {
            render_csv(manifest, table)?
        })
    }
}

fn execute(cli: Cli, argv: &[String], timestamp: Option<String>) -> CliResult<Outcome> {
    let ctx = Ctx {
        argv,
        json: cli.json,
        mode: cli.mode.map(Into::into),
        timestamp: timestamp.unwrap_or_else(io::timestamp_now),
    };
    match cli.command {
        Command::Moment(a) => {
            let src = Source::resolve(&a.kernel)?;
            let mode = src.mode(ctx.mode);
            Ok(Outcome::ok(match mode {
                NumericMode::Exact => cmd_moment::<Rational>(&ctx, &src, &a)?,
                NumericMode::Float => cmd_moment::<f64>(&ctx, &src, &a)?,
            }))
        }
        Command::FourthCheck(a) => {
            let src = Source::resolve(&a)?;
            let mode = src.mode(ctx.mode);
            Ok(Outcome::ok(match mode {
                NumericMode::Exact => cmd_fourth_check::<Rational>(&ctx, &src, &a)?,
                NumericMode::Float => cmd_fourth_check::<f64>(&ctx, &src, &a)?,
            }))
        }
        Command::IndexSets(a) => Ok(Outcome::ok(cmd_index_sets(&ctx, &a)?)),
        Command::Converge(a) => Ok(Outcome::ok(match ctx.mode.unwrap_or(NumericMode::Exact) {
            NumericMode::Exact => cmd_converge::<Rational>(&ctx, &a)?,
            NumericMode::Float => cmd_converge::<f64>(&ctx, &a)?,
        })),
        Command::Simulate(a) => {
            let src = Source::resolve(&a.kernel)?;
            let mode = src.mode(ctx.mode);
            Ok(Outcome::ok(match mode {
                NumericMode::Exact => cmd_simulate::<Rational>(&ctx, &src, &a)?,
                NumericMode::Float => cmd_simulate::<f64>(&ctx, &src, &a)?,
            }))
        }
        Command::Verify(a) => cmd_verify(&ctx, &a),
        Command::Rerun(a) => cmd_rerun(&a),
    }
}

enum Source {
    File { path: PathBuf, doc: KernelDoc },
    Family { family: Family, param: usize },
}

impl Source {
    fn resolve(a: &KernelArgs) -> CliResult<Self> {
        match (&a.kernel, a.family) {
            (Some(path), None) => Ok(Source::File {
                path: path.clone(),
                doc: io::read_kernel(path)?,
            }),
            (None, Some(f)) => {
                let family = Family::from(f);
                let param = match family {
                    Family::PairClt => a.n.ok_or_else(|| CliError::Usage("pair_clt needs --n".into()))?,
                    Family::ConstantHermite => {
                        a.p.ok_or_else(|| CliError::Usage("constant_hermite needs --p".into()))?
                    }
                };
                Ok(Source::Family { family, param })
            }
            _ => Err(CliError::Usage("give a kernel file or --family".into())),
        }
    }

    fn mode(&self, requested: Option<NumericMode>) -> NumericMode {
        requested.unwrap_or(match self {
            Source::File { doc, .. } => doc.kernel.mode(),
            Source::Family { .. } => NumericMode::Exact,
        })
    }

    fn model(&self, a: &KernelArgs) -> Model {
        match (a.model, self) {
            (Some(m), _) => m.into(),
            (None, Source::File { doc, .. }) => doc.model,
            (None, Source::Family { .. }) => Model::Classical,
        }
    }

    fn describe(&self) -> String {
        match self {
            Source::File { path, .. } => path.display().to_string(),
            Source::Family { family, param } => match family {
                Family::PairClt => format!("{family} n={param}"),
                Family::ConstantHermite => format!("{family} p={param}"),
            },
        }
    }

    fn build<S: Scalar>(&self, a: &KernelArgs, model: Model) -> CliResult<ScaledKernel<S>> {
        let mut sk = match self {
            Source::File { doc, .. } => ScaledKernel::new(doc.kernel.to_scalar::<S>()?, S::one()),
            Source::Family { family, param } => family_kernel::<S>(*family, *param, model)?,
        };
        if let Some(factor) = a.refine {
            sk = ScaledKernel::new(sk.kernel.refine(factor)?, sk.scale_sq);
        }
        if a.off_diagonal {
            sk = ScaledKernel::new(sk.kernel.off_diagonal_part(), sk.scale_sq);
        }
        if a.normalize {
            sk = normalize_variance(&sk.kernel, model)?;
        }
        Ok(sk)
    }
}

fn kernel_manifest(ctx: &Ctx, command: &str, src: &Source, model: Model, mode: NumericMode) -> RunManifest {
    let mut m = ctx.manifest(command, mode);
    m.kernel_source = Some(src.describe());
    m.model = Some(model.as_str().into());
    m
}

fn cell<S: Scalar>(x: &S) -> String {
    x.to_string()
}

fn cmd_moment<S: Scalar>(ctx: &Ctx, src: &Source, a: &MomentArgs) -> CliResult<String> {
    let model = src.model(&a.kernel);
    let sk = src.build::<S>(&a.kernel, model)?;
    let value = match a.path {
        PathArg::Formula => scaled_moment(&sk, a.k, model, a.eval.into())?,
        PathArg::Expansion => sk.rescale(moment_via_expansion(&sk.kernel, a.k, model)?, a.k)?,
        PathArg::Oracle => {
            if model != Model::Classical {
                return Err(CliError::Usage("the Wick oracle covers the classical model only".into()));
            }
            sk.rescale(wick_oracle_moment(&sk.kernel, a.k)?, a.k)?
        }
    };
    let target = target_moment::<S>(model, a.k);
    let result = json!({
        "k": a.k,
        "model": model.as_str(),
        "path": format!("{:?}", a.path).to_lowercase(),
        "value": scalar_json(&value),
        "target": scalar_json(&target),
        "relative_error": relative_error(&value, &target),
    });
    Ok(render_json(&kernel_manifest(ctx, "moment", src, model, S::MODE), result)?)
}

fn cmd_fourth_check<S: Scalar>(ctx: &Ctx, src: &Source, a: &KernelArgs) -> CliResult<String> {
    let model = src.model(a);
    let sk = src.build::<S>(a, model)?;
    let moment = scaled_moment(&sk, 4, model, Evaluation::Auto)?;
    let identity = match model {
        Model::Classical => classical_fourth_identity(&sk)?,
        Model::Free => sk.rescale(free_fourth_identity(&sk.kernel)?, 4)?,
    };
    let residue = moment.clone() - identity.clone();
    let profile = contraction_profile(&sk, model)?;
    let gap = fourth_moment_gap(&sk, model)?;
    let beauty = match model {
        Model::Classical => {
            let (lhs, rhs) = beauty_formula_sides(&sk)?;
            json!({"lhs": scalar_json(&lhs), "rhs": scalar_json(&rhs)})
        }
        Model::Free => Value::Null,
    };
    let list = |v: &[S]| Value::Array(v.iter().map(scalar_json).collect());
    let result = json!({
        "model": model.as_str(),
        "moment": scalar_json(&moment),
        "identity": scalar_json(&identity),
        "residue": scalar_json(&residue),
        "profile": list(&profile.norms),
        "profile_symmetrized": profile.symmetrized.as_deref().map_or(Value::Null, list),
        "gap": scalar_json(&gap),
        "beauty": beauty,
    });
    Ok(render_json(&kernel_manifest(ctx, "fourth-check", src, model, S::MODE), result)?)
}

fn cmd_index_sets(ctx: &Ctx, a: &IndexSetArgs) -> CliResult<String> {
    let mut table = Table::new(&[
        "r",
        "class",
        "final_order",
        "classical_coeff",
        "limit_weight",
        "limit_value",
        "dyck",
    ]);
    for t in enumerate(a.p, a.k, a.class.into())? {
        let in_c = t.finest_class() == TupleClass::C;
        let (w, v, d) = if in_c {
            (
                limit_weight(&t)?.to_string(),
                limit_value(&t)?.to_string(),
                dyck_check(&t)?.to_string(),
            )
        } else {
            Default::default()
        };
        table.push(vec![
            t.to_string(),
            t.finest_class().to_string(),
            t.final_order().to_string(),
            classical_coeff(&t).to_string(),
            w,
            v,
            d,
        ]);
    }
    ctx.table(&ctx.manifest("index-sets", NumericMode::Exact), &table)
}

fn cmd_converge<S: Scalar>(ctx: &Ctx, a: &ConvergeArgs) -> CliResult<String> {
    let model: Model = a.model.into();
    let family: Family = a.family.into();
    let rows = convergence_report_with::<S>(family, &a.n, a.kmax, model, a.eval.into())?;
    let mut manifest = ctx.manifest("converge", S::MODE);
    manifest.kernel_source = Some(format!("{family} n={}", join(&a.n)));
    manifest.model = Some(model.as_str().into());
    let table = if a.terms {
        let mut t = Table::new(&["n", "k", "r", "coefficient", "contraction", "term", "limit_value"]);
        for row in &rows {
            for term in &row.c_terms {
                let limit = match model {
                    Model::Classical => limit_value(&term.tuple)?,
                    Model::Free => Rational::from_ratio(1, 1),
                };
                t.push(vec![
                    row.n.to_string(),
                    row.k.to_string(),
                    term.tuple.to_string(),
                    term.coefficient.to_string(),
                    cell(&term.contraction),
                    cell(&term.term),
                    cell(&S::from_rational(&limit)),
                ]);
            }
        }
        t
    } else {
        let mut t = Table::new(&["n", "k", "moment", "target", "gap", "c_sum", "e_sum", "profile"]);
        for row in &rows {
            t.push(vec![
                row.n.to_string(),
                row.k.to_string(),
                cell(&row.moment),
                cell(&row.target),
                cell(&row.gap),
                cell(&row.c_sum),
                cell(&row.e_sum),
                row.profile.iter().map(cell).collect::<Vec<_>>().join(";"),
            ]);
        }
        t
    };
    ctx.table(&manifest, &table)
}

fn join(ns: &[usize]) -> String {
    ns.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// The scaled kernel as binary64 coefficients, folding in the scale.
fn float_kernel<S: Scalar>(sk: &ScaledKernel<S>) -> CliResult<GridKernel<f64>> {
    let c = sk.scale_sq.to_f64().sqrt();
    Ok(sk.kernel.to_f64().scale(&c))
}

fn cmd_simulate<S: Scalar>(ctx: &Ctx, src: &Source, a: &SimulateArgs) -> CliResult<String> {
    if a.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let model = src.model(&a.kernel);
    let sk = src.build::<S>(&a.kernel, model)?;
    let target = scaled_moment(&sk, a.k, model, Evaluation::Auto)?;
    let f = float_kernel(&sk)?;
    let cfg = SampleConfig::new(a.seed, a.samples, a.dim)?;
    let report = match model {
        Model::Classical => mc_classical_moment(&f, a.k, &cfg),
        Model::Free if a.control_variates => mc_free_moment_controlled(&f, a.k, &cfg)?,
        Model::Free => mc_free_moment(&f, a.k, &cfg)?,
    }
    .with_target(target.to_f64());
    let result = json!({
        "k": a.k,
        "model": model.as_str(),
        "estimate": report.value(),
        "stderr": report.stderr(),
        "target": scalar_json(&target),
        "z_score": report.z_score(),
        "samples": a.samples,
        "seed": a.seed,
        "dim": if model == Model::Free { json!(a.dim) } else { Value::Null },
        "control_variates": model == Model::Free && a.control_variates,
    });
    let mut manifest = kernel_manifest(ctx, "simulate", src, model, S::MODE);
    manifest.seed = Some(a.seed);
    manifest.rng = Some(RNG_ALGORITHM.into());
    Ok(render_json(&manifest, result)?)
}

fn cmd_verify(ctx: &Ctx, a: &VerifyArgs) -> CliResult<Outcome> {
    let mut checks = verify::builtin_suite();
    for path in &a.fixture {
        checks.extend(verify::fixture_checks(path, ctx.mode));
    }
    let mut table = Table::new(&["invariant", "status", "detail"]);
    let mut failed = false;
    for c in &checks {
        failed |= !c.passed;
        table.push(vec![
            c.name.clone(),
            if c.passed { "pass" } else { "fail" }.into(),
            c.detail.clone(),
        ]);
    }
    let text = ctx.table(&ctx.manifest("verify", ctx.mode.unwrap_or(NumericMode::Exact)), &table)?;
    Ok(Outcome {
        text,
        status: if failed { EXIT_VERIFY } else { EXIT_OK },
    })
}

fn cmd_rerun(a: &RerunArgs) -> CliResult<Outcome> {
    let text = read_text(&a.file)?;
    let manifest = io::extract_manifest(&text)?;
    if manifest.command == "rerun" {
        return Err(CliError::Usage("manifest records a rerun".into()));
    }
    let args = std::iter::once("chaoskit".to_string()).chain(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(format!("stored arguments: {e}")))?;
    if let Some(b) = cli.budget {
        set_entry_budget(b);
    }
    let again = execute(cli, &manifest.argv, Some(manifest.timestamp.clone()))?;
    if !a.check {
        return Ok(again);
    }
    if again.text == text {
        Ok(Outcome::ok(format!("identical: {}\n", a.file.display())))
    } else {
        Ok(Outcome {
            text: format!("differs: {}\n", a.file.display()),
            status: EXIT_VERIFY,
        })
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| {
        CliError::Io(IoError::Read {
            path: path.display().to_string(),
            source,
        })
    })
}
