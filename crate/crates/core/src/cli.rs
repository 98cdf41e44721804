//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::combinatorics::{classify, ed_degree, expected_span_dim};
use crate::error::{Error, Result};
use crate::linalg::RankRule;
use crate::monodromy::{solve_singular_tuples, SolutionFile, SolutionSet, SolverConfig};
use crate::relations::{analyze_relations, confirmed_choices, RelationsReport, RELATION_TOL};
use crate::span::{analyze_span, membership_proven, SpanReport, MEMBERSHIP_TOL};
use crate::tensor::{CTensor, Format};
use crate::tracking::TrackerConfig;

#[derive(Parser, Debug)]
#[command(name = "tuplespan", version, about = "Singular vector tuples of tensors and the span of their rank-one tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for path tracking (defaults to all cores).
    #[arg(long, global = true, env = "TUPLESPAN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the number of singular tuples of a generic tensor and the format class.
    EdDegree {
        /// Format as `n1,n2,...,nk`.
        format: String,
    },
    /// Compute all singular tuples of a tensor.
    Solve(RunArgs),
    /// Dimension of the span of the rank-one tensors of the singular tuples.
    Span(RunArgs),
    /// Determinantal relations vanishing on the rank-one tensors.
    Relations {
        #[command(flatten)]
        run: RunArgs,
        /// Extra random tensors whose relations are intersected with the first.
        #[arg(long, default_value_t = 2)]
        confirm: usize,
    },
    /// Span dimensions over a range of last-factor sizes.
    Table {
        /// All but the last factor, as `n1,...,n_{k-1}`.
        #[arg(short, long)]
        prefix: String,
        /// Last-factor range, as `a..b` (inclusive).
        #[arg(short, long)]
        n: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Format as `n1,n2,...,nk`; a random tensor is drawn from the seed.
    #[arg(short, long)]
    pub format: Option<String>,
    /// Tensor JSON file, used instead of a random tensor.
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(short, long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_newton: f64,
    /// Minimum ratio between consecutive singular values at the rank cut.
    #[arg(long, default_value_t = 1e6)]
    pub rank_gap: f64,
    /// Singular values below this fraction of the largest never count.
    #[arg(long, default_value_t = 1e-8)]
    pub rank_floor: f64,
    #[arg(long, default_value_t = MEMBERSHIP_TOL)]
    pub membership_tol: f64,
    #[arg(long, default_value_t = 10)]
    pub stall_limit: usize,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with failure unless the results match the known values.
    #[arg(long)]
    pub assert_expected: bool,
}

/// Validated settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub format: Option<Format>,
    pub tensor: Option<PathBuf>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub rank: RankRule,
    pub membership_tol: f64,
    pub out: Option<PathBuf>,
    pub assert_expected: bool,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let positive = [
            ("tol-newton", a.tol_newton),
            ("rank-gap", a.rank_gap),
            ("rank-floor", a.rank_floor),
            ("membership-tol", a.membership_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!("--{name} must be positive, got {v}")));
            }
        }
        if a.stall_limit == 0 {
            return Err(Error::Parse("--stall-limit must be positive".into()));
        }
        let solver = SolverConfig {
            tracker: TrackerConfig {
                newton_tol: a.tol_newton,
                ..TrackerConfig::default()
            },
            stall_limit: a.stall_limit,
            ..SolverConfig::default()
        };
        solver.tracker.validate()?;
        Ok(RunConfig {
            format: a.format.as_deref().map(Format::parse).transpose()?,
            tensor: a.tensor.clone(),
            seed: a.seed,
            solver,
            rank: RankRule {
                floor_rel: a.rank_floor,
                min_gap: a.rank_gap,
            },
            membership_tol: a.membership_tol,
            out: a.out.clone(),
            assert_expected: a.assert_expected,
        })
    }

    pub fn load_tensor(&self) -> Result<CTensor> {
        match (&self.tensor, &self.format) {
            (Some(path), f) => {
                let t = read_tensor(path)?;
                if let Some(f) = f {
                    if f != t.format() {
                        return Err(Error::FormatMismatch(f.dims().to_vec(), t.format().dims().to_vec()));
                    }
                }
                Ok(t)
            }
            (None, Some(f)) => Ok(CTensor::random(f, self.seed)),
            (None, None) => Err(Error::Parse("either --format or --tensor is required".into())),
        }
    }

    pub fn solve(&self, t: &CTensor) -> Result<SolutionSet> {
        solve_singular_tuples(t, self.seed, &self.solver)
    }
}

pub fn read_tensor(path: &Path) -> Result<CTensor> {
    let text = std::fs::read_to_string(path)?;
    CTensor::from_json(&text).map_err(|e| {
        let detail = match e {
            Error::Parse(m) => m,
            other => other.to_string(),
        };
        Error::Parse(format!("{}: {detail}", path.display()))
    })
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
        }
    }
    Ok(())
}

/// Collects failed `--assert-expected` checks.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.0.push(what.into());
        }
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Parse(format!("assertion failed: {}", self.0.join("; "))))
        }
    }
}

pub fn ed_degree_line(format: &Format) -> String {
    let c = classify(format);
    format!("{}, {}", ed_degree(format), c.label())
}

fn cmd_ed_degree(text: &str) -> Result<()> {
    let f = Format::parse(text)?;
    let c = classify(&f);
    println!("{}", ed_degree_line(&f));
    println!("n_B = {}, D = {}", c.boundary_threshold, c.concise_threshold);
    if let Some(dim) = expected_span_dim(&f) {
        println!("expected span dimension = {dim}");
    }
    Ok(())
}

fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let t = cfg.load_tensor()?;
    let set = cfg.solve(&t)?;
    eprintln!(
        "{}: {} of {} tuples, {} loops, {} paths ({} failed)",
        set.format,
        set.len(),
        set.ed,
        set.loops_run,
        set.paths_tracked,
        set.path_failures
    );
    emit(&SolutionFile::from(&set), cfg.out.as_deref())?;
    let mut checks = Checks::default();
    if cfg.assert_expected {
        checks.expect(set.complete, format!("found {} of {} tuples", set.len(), set.ed));
    }
    checks.finish()
}

fn span_report(cfg: &RunConfig, t: &CTensor) -> Result<SpanReport> {
    let set = cfg.solve(t)?;
    analyze_span(t, &set, cfg.rank, cfg.membership_tol)
}

fn span_checks(r: &SpanReport, checks: &mut Checks) -> Result<()> {
    let f = Format::new(r.format.clone())?;
    checks.expect(!r.provisional, format!("{f}: incomplete solution set"));
    checks.expect(!r.rank_ambiguous, format!("{f}: ambiguous numerical rank"));
    if let Some(e) = r.expected_span_dim {
        checks.expect(
            r.span_dim_projective == e,
            format!("{f}: span dimension {} != {e}", r.span_dim_projective),
        );
    }
    if membership_proven(&f) {
        checks.expect(r.in_span, format!("{f}: membership residual {:.3e}", r.membership_residual));
    }
    Ok(())
}

fn cmd_span(cfg: &RunConfig) -> Result<()> {
    let t = cfg.load_tensor()?;
    let r = span_report(cfg, &t)?;
    eprintln!(
        "{}: span dim {}, critical dim {}, extra relations {}, membership residual {:.3e}{}",
        Format::new(r.format.clone())?,
        r.span_dim_projective,
        r.critical_dim_projective,
        r.extra_relations,
        r.membership_residual,
        if r.provisional { " (provisional)" } else { "" }
    );
    emit(&r, cfg.out.as_deref())?;
    let mut checks = Checks::default();
    if cfg.assert_expected {
        span_checks(&r, &mut checks)?;
    }
    checks.finish()
}

#[derive(Serialize)]
struct RelationsOutput {
    #[serde(flatten)]
    report: RelationsReport,
    /// Validated choices that also validate for the confirmation tensors.
    confirmed: usize,
    expected_extra_rank: Option<usize>,
}

fn cmd_relations(cfg: &RunConfig, confirm: usize) -> Result<()> {
    let t = cfg.load_tensor()?;
    let set = cfg.solve(&t)?;
    let report = analyze_relations(&t, &set, RELATION_TOL, cfg.rank)?;
    let format = t.format().clone();
    let confirmed = if confirm == 0 {
        report.relations.len()
    } else {
        let seeds: Vec<u64> = (1..=confirm as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
        let stable = confirmed_choices(&format, &seeds, &cfg.solver, RELATION_TOL)?;
        report.relations.iter().filter(|r| stable.contains(&r.choice)).count()
    };
    let expected_extra_rank = expected_span_dim(&format)
        .map(|e| crate::combinatorics::critical_space_dim(&format) - 1 - e);
    eprintln!(
        "{format}: {} candidates, {} validated ({} confirmed), extra rank {}",
        report.candidates, report.validated, confirmed, report.extra_rank
    );
    let mut checks = Checks::default();
    if cfg.assert_expected {
        checks.expect(set.complete, format!("found {} of {} tuples", set.len(), set.ed));
        if let Some(e) = expected_extra_rank {
            checks.expect(report.extra_rank == e, format!("extra rank {} != {e}", report.extra_rank));
        }
        checks.expect(confirmed == report.validated, "validated relations not confirmed by every seed");
    }
    emit(
        &RelationsOutput {
            report,
            confirmed,
            expected_extra_rank,
        },
        cfg.out.as_deref(),
    )?;
    checks.finish()
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub prefix: Vec<usize>,
    pub n_boundary: usize,
    pub ns: Vec<usize>,
    pub dims: Vec<usize>,
    pub expected: Vec<Option<usize>>,
    /// Measured stabilization offset from the boundary size.
    pub delta: usize,
    /// False when only the last value of the range is past the change, so
    /// a later change cannot be ruled out.
    pub delta_confirmed: bool,
    pub ed: String,
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("expected a range `a..b`, got `{s}`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// First `n` from which the measured values stay constant, and whether at
/// least two values back it up.
fn stabilization(ns: &[usize], dims: &[usize]) -> (usize, bool) {
    let last = dims[dims.len() - 1];
    let start = dims.iter().rposition(|&d| d != last).map_or(0, |i| i + 1);
    (ns[start], start + 1 < dims.len() || dims.len() == 1)
}

pub fn table_row(prefix: &[usize], from: usize, to: usize, cfg: &RunConfig) -> Result<(TableRow, Vec<SpanReport>)> {
    let base = Format::new([prefix, &[from]].concat())?;
    let n_boundary = classify(&base).boundary_threshold;
    let mut reports = Vec::new();
    for n in from..=to {
        let f = Format::new([prefix, &[n]].concat())?;
        let t = CTensor::random(&f, cfg.seed);
        reports.push(span_report(cfg, &t)?);
    }
    let ns: Vec<usize> = (from..=to).collect();
    let dims: Vec<usize> = reports.iter().map(|r| r.span_dim_projective).collect();
    let (stable_from, delta_confirmed) = stabilization(&ns, &dims);
    let ed = ed_degree(&Format::new([prefix, &[n_boundary]].concat())?).to_string();
    Ok((
        TableRow {
            prefix: prefix.to_vec(),
            n_boundary,
            ns,
            dims,
            expected: reports.iter().map(|r| r.expected_span_dim).collect(),
            delta: stable_from.saturating_sub(n_boundary),
            delta_confirmed,
            ed,
        },
        reports,
    ))
}

pub fn render_table(row: &TableRow) -> String {
    let name = format!(
        "({},n)",
        row.prefix.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    );
    let mut head = format!("{:<12}{:>5}", "format", "n_B");
    let mut line = format!("{name:<12}{:>5}", row.n_boundary);
    for (n, d) in row.ns.iter().zip(&row.dims) {
        head += &format!("{:>7}", format!("n={n}"));
        line += &format!("{d:>7}");
    }
    head += &format!("{:>7}{:>10}", "delta", "ed");
    line += &format!("{:>7}{:>10}", row.delta, row.ed);
    let mut text = format!("{head}\n{line}");
    if !row.delta_confirmed {
        text += "\nnote: delta rests on the last n only; extend the range to confirm";
    }
    text
}

fn cmd_table(prefix: &str, n: &str, cfg: &RunConfig) -> Result<()> {
    let prefix: Vec<usize> = prefix
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("invalid prefix `{prefix}`")))?;
    let (from, to) = parse_range(n)?;
    let (row, reports) = table_row(&prefix, from, to, cfg)?;
    println!("{}", render_table(&row));
    if let Some(out) = &cfg.out {
        emit(&row, Some(out))?;
    }
    let mut checks = Checks::default();
    if cfg.assert_expected {
        for r in &reports {
            span_checks(r, &mut checks)?;
        }
    }
    checks.finish()
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::EdDegree { format } => cmd_ed_degree(format),
        Command::Solve(a) => cmd_solve(&RunConfig::from_args(a)?),
        Command::Span(a) => cmd_span(&RunConfig::from_args(a)?),
        Command::Relations { run, confirm } => cmd_relations(&RunConfig::from_args(run)?, *confirm),
        Command::Table { prefix, n, run } => cmd_table(prefix, n, &RunConfig::from_args(run)?),
    }
}
