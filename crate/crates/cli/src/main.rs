//! Command-line front end for the quotamatch library.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible, 3 invalid
//! input (parse or validation failure, or a matching file that disagrees
//! with its instance), 4 budget or search limit reached.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use quotamatch::checks::validate_instance;
use quotamatch::format::{emit_instance, parse_instance, render_table, DiagnosticsRecord, MatchingFile};
use quotamatch::gen::{generate, GenParams, QuotaProfile};
use quotamatch::oracle::{brute_optimum, EnumerationBudget, OracleError};
use quotamatch::pipelines::{compare_concepts, Diagnostics, PipelineError};
use quotamatch::{ConceptName, Instance, SolutionConcept, SolverConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "quotamatch",
    version,
    about = "Stable matching under lower quotas and applicant types"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an instance file.
    Validate { instance: PathBuf },
    /// Solve an instance under a solution concept.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        concept: ConceptArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Records)]
        format: Format,
    },
    /// Recompute the diagnostics of a matching file and report discrepancies.
    Check {
        instance: PathBuf,
        matching: PathBuf,
        /// Quota overrides the matching was solved under.
        #[arg(long)]
        override_upper: Option<u32>,
        #[arg(long)]
        override_lower: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Records)]
        format: Format,
    },
    /// List every optimal matching of a small instance by exhaustive search.
    Enumerate {
        instance: PathBuf,
        #[command(flatten)]
        concept: ConceptArgs,
        #[arg(long, value_enum, default_value_t = Format::Records)]
        format: Format,
    },
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Solve an instance under several concepts and tabulate the results.
    Compare {
        instance: PathBuf,
        /// Concepts to compare; repeat or separate by commas. Defaults to all.
        #[arg(long = "concept", value_delimiter = ',')]
        concepts: Vec<String>,
        #[arg(long)]
        override_upper: Option<u32>,
        #[arg(long)]
        override_lower: Option<u32>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct ConceptArgs {
    #[arg(long, default_value = "MinRank-Stable")]
    concept: String,
    /// Weak stability: equal scores never justify replacement (default).
    #[arg(long, conflicts_with = "strict")]
    ties: bool,
    /// Equal scores count as strictly better in stability rows.
    #[arg(long)]
    strict: bool,
    /// Replace every company's upper quota.
    #[arg(long)]
    override_upper: Option<u32>,
    /// Replace every company's lower quota.
    #[arg(long)]
    override_lower: Option<u32>,
    /// Track envy over all pairs instead of requiring within-type envy-freeness.
    #[arg(long)]
    no_wtef: bool,
    /// Do not minimise the number of unmatched applicants.
    #[arg(long)]
    allow_unmatched: bool,
}

impl ConceptArgs {
    fn concept(&self) -> Result<SolutionConcept, Failure> {
        let name: ConceptName = self.concept.parse().map_err(|e| Failure::usage(format!("{e}")))?;
        let mut c = SolutionConcept::new(name).with_overrides(self.override_upper, self.override_lower);
        c.ties = !self.strict;
        c.wtef = !self.no_wtef;
        c.prefer_complete = !self.allow_unmatched;
        Ok(c)
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Fixed branching order; repeated runs give byte-identical output.
    #[arg(long)]
    deterministic: bool,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Nodes per objective stage.
    #[arg(long)]
    node_limit: Option<u64>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Failure> {
        let mut cfg = SolverConfig {
            deterministic: self.deterministic,
            ..SolverConfig::default()
        };
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::usage("--time-limit must be positive"));
            }
            cfg.time_limit = Duration::from_secs_f64(t);
        }
        if let Some(n) = self.node_limit {
            if n == 0 {
                return Err(Failure::usage("--node-limit must be positive"));
            }
            cfg.node_limit = n;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Shape {
    Small,
    #[value(name = "2016")]
    Shape2016,
    #[value(name = "2017")]
    Shape2017,
    Workshop,
    TypeLower,
    TwoType,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Shape::Small)]
    shape: Shape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Applicants (small, type-lower and two-type shapes).
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Companies (small, type-lower and two-type shapes).
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Applicants per type, comma separated; must sum to n.
    #[arg(long, value_delimiter = ',')]
    types: Vec<usize>,
    #[arg(long)]
    tie_density: Option<f64>,
    #[arg(long, default_value_t = 0)]
    lower: u32,
    #[arg(long, default_value_t = 1)]
    upper: u32,
    /// First-type total for the two-type shape.
    #[arg(long, default_value_t = 1)]
    first: usize,
}

impl GenerateArgs {
    fn params(&self) -> GenParams {
        let mut p = match self.shape {
            Shape::Shape2016 => return GenParams::shape_2016(self.seed),
            Shape::Shape2017 => return GenParams::shape_2017(self.seed),
            Shape::Workshop => return GenParams::workshop(self.seed),
            Shape::Small | Shape::TypeLower | Shape::TwoType => GenParams::small(self.n, self.m, self.seed),
        };
        if !self.types.is_empty() {
            p = p.with_types(&self.types);
            p.n = self.n;
        }
        if let Some(t) = self.tie_density {
            p.tie_density = t;
        }
        p.quotas = match self.shape {
            Shape::TypeLower => QuotaProfile::TypeLowerFeasible,
            Shape::TwoType => QuotaProfile::TwoTypeExact { first: self.first },
            _ => QuotaProfile::Uniform {
                lower: self.lower,
                upper: self.upper,
            },
        };
        p
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::InvalidInstance(_) => 3,
            PipelineError::Infeasible { .. } => 2,
            PipelineError::LimitReached { .. } | PipelineError::Classic(quotamatch::ClassicError::NotFound) => 4,
            PipelineError::Classic(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let src = read(path)?;
    parse_instance(&src).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data always serialises");
    s.push('\n');
    s
}

fn cmd_validate(path: &Path) -> Result<String, Failure> {
    let inst = load(path)?;
    let violations = validate_instance(&inst);
    for v in violations.iter().filter(|v| v.is_warning()) {
        eprintln!("warning: {v}");
    }
    let errors: Vec<String> = violations
        .iter()
        .filter(|v| !v.is_warning())
        .map(|v| v.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(Failure::invalid(errors.join("\n")));
    }
    Ok(format!(
        "ok: {} applicants, {} companies, {} types, {} applications\n",
        inst.n(),
        inst.m(),
        inst.num_types(),
        inst.num_applications()
    ))
}

fn render(inst: &Instance, file: &MatchingFile, format: Format) -> String {
    match format {
        Format::Records => file.to_json(),
        Format::Table => render_table(inst, file),
    }
}

fn cmd_solve(path: &Path, concept: &ConceptArgs, solver: &SolverArgs, format: Format) -> Result<String, Failure> {
    let inst = load(path)?;
    let concept = concept.concept()?;
    let config = solver.config()?;
    let start = Instant::now();
    let result = quotamatch::solve_concept(&inst, &concept, &config);
    eprintln!("{}: {:.3}s", concept.label(), start.elapsed().as_secs_f64());
    let solved = concept.instance(&inst);
    match result {
        Ok(report) => Ok(render(&solved, &MatchingFile::from_report(&solved, &report), format)),
        Err(PipelineError::LimitReached {
            incumbent: Some(report),
        }) => {
            print!(
                "{}",
                render(&solved, &MatchingFile::from_report(&solved, &report), format)
            );
            Err(PipelineError::LimitReached { incumbent: None }.into())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct CheckRecord {
    diagnostics: DiagnosticsRecord,
    discrepancies: Vec<String>,
}

fn cmd_check(
    inst_path: &Path,
    matching_path: &Path,
    overrides: (Option<u32>, Option<u32>),
    format: Format,
) -> Result<String, Failure> {
    let mut inst = load(inst_path)?;
    if overrides.0.is_some() || overrides.1.is_some() {
        inst = inst.with_quota_overrides(overrides.0, overrides.1);
    }
    let file = MatchingFile::from_json(&read(matching_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", matching_path.display())))?;
    let m = file
        .matching(&inst)
        .map_err(|e| Failure::invalid(format!("{}: {e}", matching_path.display())))?;
    let diagnostics = DiagnosticsRecord::new(&inst, &Diagnostics::compute(&inst, &m));
    let discrepancies = file
        .diagnostics
        .as_ref()
        .map(|d| d.differences(&diagnostics))
        .unwrap_or_default();
    let out = match format {
        Format::Records => json(&CheckRecord {
            diagnostics: diagnostics.clone(),
            discrepancies: discrepancies.clone(),
        }),
        Format::Table => {
            let mut fresh = MatchingFile::from_matching(&inst, &m);
            fresh.concept = file.concept.clone();
            let mut s = render_table(&inst, &fresh);
            for d in &discrepancies {
                s.push_str(&format!("discrepancy: {d}\n"));
            }
            s
        }
    };
    if discrepancies.is_empty() {
        Ok(out)
    } else {
        print!("{out}");
        Err(Failure::invalid(format!("{} discrepancies", discrepancies.len())))
    }
}

#[derive(Serialize)]
struct EnumerationRecord {
    concept: String,
    objectives: Vec<i64>,
    matchings: Vec<MatchingFile>,
}

fn cmd_enumerate(path: &Path, concept: &ConceptArgs, format: Format) -> Result<String, Failure> {
    let inst = load(path)?;
    let concept = concept.concept()?;
    let solved = concept.instance(&inst);
    let best = brute_optimum(&inst, &concept, &EnumerationBudget::default()).map_err(|e| {
        let code = match e {
            OracleError::OverBudget(_) => 4,
            OracleError::NoAdmissibleMatching => 2,
            OracleError::Unsupported(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    })?;
    let matchings: Vec<MatchingFile> = best
        .matchings
        .iter()
        .map(|m| MatchingFile::from_matching(&solved, m))
        .collect();
    Ok(match format {
        Format::Records => json(&EnumerationRecord {
            concept: concept.label(),
            objectives: best.values,
            matchings,
        }),
        Format::Table => {
            let mut s = format!(
                "{}: objectives {:?}, {} optimal matchings\n",
                concept.label(),
                best.values,
                matchings.len()
            );
            for (k, file) in matchings.iter().enumerate() {
                s.push_str(&format!("\n#{}\n", k + 1));
                s.push_str(&render_table(&solved, file));
            }
            s
        }
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<String, Failure> {
    let inst = generate(&args.params()).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(emit_instance(&inst))
}

#[derive(Serialize)]
struct ComparisonRecord {
    concept: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<MatchingFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_compare(
    path: &Path,
    names: &[String],
    overrides: (Option<u32>, Option<u32>),
    solver: &SolverArgs,
    format: Format,
) -> Result<String, Failure> {
    let inst = load(path)?;
    let config = solver.config()?;
    let names: Vec<ConceptName> = if names.is_empty() {
        ConceptName::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.trim().parse().map_err(|e| Failure::usage(format!("{e}"))))
            .collect::<Result<_, _>>()?
    };
    let concepts: Vec<SolutionConcept> = names
        .into_iter()
        .map(|n| SolutionConcept::new(n).with_overrides(overrides.0, overrides.1))
        .collect();
    let comparison = compare_concepts(&inst, &concepts, &config);
    Ok(match format {
        Format::Table => comparison.to_string(),
        Format::Records => {
            let rows: Vec<ComparisonRecord> = comparison
                .rows
                .iter()
                .zip(&concepts)
                .map(|(row, c)| match &row.result {
                    Ok(r) => ComparisonRecord {
                        concept: row.concept.clone(),
                        result: Some(MatchingFile::from_report(&c.instance(&inst), r)),
                        error: None,
                    },
                    Err(e) => ComparisonRecord {
                        concept: row.concept.clone(),
                        result: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect();
            json(&rows)
        }
    })
}

fn run(cli: Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Validate { instance } => cmd_validate(instance),
        Command::Solve {
            instance,
            concept,
            solver,
            format,
        } => cmd_solve(instance, concept, solver, *format),
        Command::Check {
            instance,
            matching,
            override_upper,
            override_lower,
            format,
        } => cmd_check(instance, matching, (*override_upper, *override_lower), *format),
        Command::Enumerate {
            instance,
            concept,
            format,
        } => cmd_enumerate(instance, concept, *format),
        Command::Generate(args) => cmd_generate(args),
        Command::Compare {
            instance,
            concepts,
            override_upper,
            override_lower,
            solver,
            format,
        } => cmd_compare(instance, concepts, (*override_upper, *override_lower), solver, *format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
