//! `dex`: solve, check and realize data exchange rate allocations from JSON
//! instance files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dex_core::dual::{solve_traced, StepSchedule};
use dex_core::netcode::{
    build_multicast_graph, design_transmissions, rationalize, read_scheme, simulate_exchange, snap_rates,
    verify_decodability, write_scheme, DEFAULT_MAX_ATTEMPTS,
};
use dex_core::oracle::{build_lp, solve_exact};
use dex_core::rational::{format_rational, parse_rational, to_f64};
use dex_core::{DexError, Instance, Rational, SolverConfig, TieBreak};
use serde_json::json;

pub mod file;

use file::{parse_instance, rational_json, read_instance_file, read_solution, FieldOverride, SolutionRecord, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or unreadable input (exit code 2).
    #[error("{0}")]
    Input(String),
    /// Infeasible instance, failed verification or non-convergence (exit code 1).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<DexError> for CliError {
    fn from(e: DexError) -> Self {
        match e {
            DexError::Infeasible(_)
            | DexError::LpInfeasible
            | DexError::DesignFailed { .. }
            | DexError::DenominatorTooLarge { .. } => CliError::Failed(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dex", version, about = "Optimal rate allocation for data exchange with helpers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance file (JSON).
    pub instance: PathBuf,
    /// Override the field characteristic declared in the file.
    #[arg(long)]
    pub field_char: Option<u64>,
    /// Override the field extension degree declared in the file.
    #[arg(long)]
    pub field_degree: Option<u32>,
    /// Write the main output here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance, CliError> {
        parse_instance(
            &self.instance,
            FieldOverride {
                characteristic: self.field_char,
                degree: self.field_degree,
            },
        )
    }
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Comma-separated rates, e.g. `0,1/2,1`.
    #[arg(long, conflicts_with = "solution")]
    pub rates: Option<String>,
    /// Solution file written by `solve`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

impl RateArgs {
    fn given(&self) -> Result<Option<Vec<Rational>>, CliError> {
        if let Some(text) = &self.rates {
            return parse_list(text).map(Some);
        }
        if let Some(path) = &self.solution {
            return read_solution(path)?.rates().map(Some);
        }
        Ok(None)
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub gap_tol: f64,
    /// Step schedule: `a,b,c` for a/(b+c n) or `pow:a` for n^-a.
    #[arg(long, default_value = "1,1,1")]
    pub theta: String,
    /// Multiply steps by the largest weight.
    #[arg(long)]
    pub scale_steps: bool,
    /// Terminals listed first when weights tie, e.g. `3,4,5,1,2`.
    #[arg(long)]
    pub tie_break: Option<String>,
    /// Line-delimited JSON trace of (iteration, primal, dual, gap).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, m: usize) -> Result<SolverConfig, CliError> {
        let tie_break = self
            .tie_break
            .as_deref()
            .map(|t| {
                let order = parse_indices(t)?;
                TieBreak::from_order(m, &order).map_err(CliError::from)
            })
            .transpose()?;
        Ok(SolverConfig {
            schedule: parse_theta(&self.theta)?,
            max_iterations: self.max_iters,
            gap_tolerance: self.gap_tol,
            tie_break,
            scale_steps: self.scale_steps,
        })
    }
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    #[arg(long, default_value_t = 64)]
    pub max_denominator: u64,
    /// Extension degree of the coding field; chosen from the instance size if absent.
    #[arg(long)]
    pub ext_degree: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub attempts: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal rates by greedy allocation (one user) or dual decomposition.
    Solve {
        #[command(flatten)]
        input: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact cut-set LP: constraint list and optimum as fractions.
    Oracle {
        #[command(flatten)]
        input: InstanceArgs,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Check a rate vector against every cut constraint.
    Verify {
        #[command(flatten)]
        input: InstanceArgs,
        #[command(flatten)]
        rates: RateArgs,
    },
    /// Design a verified linear transmission scheme.
    Codegen {
        #[command(flatten)]
        input: InstanceArgs,
        #[command(flatten)]
        rates: RateArgs,
        #[command(flatten)]
        code: CodeArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a scheme on random sources and count exact reconstructions.
    Simulate {
        #[command(flatten)]
        input: InstanceArgs,
        /// Scheme file written by `codegen`.
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Multicast network of a rate allocation in DOT format.
    Graph {
        #[command(flatten)]
        input: InstanceArgs,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, default_value_t = 64)]
        max_denominator: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

pub fn parse_list(text: &str) -> Result<Vec<Rational>, CliError> {
    text.split(',')
        .map(|s| parse_rational(s.trim()).map_err(|e| CliError::Input(format!("rate `{s}`: {e}"))))
        .collect()
}

fn parse_indices(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Input(format!("bad terminal index `{s}`")))
        })
        .collect()
}

pub fn parse_theta(text: &str) -> Result<StepSchedule, CliError> {
    let sched = if let Some(a) = text.strip_prefix("pow:") {
        StepSchedule::Power {
            a: a.trim().parse().map_err(|_| CliError::Input(format!("bad exponent `{a}`")))?,
        }
    } else {
        let parts = parse_list(text)?;
        let [a, b, c] = <[Rational; 3]>::try_from(parts)
            .map_err(|_| CliError::Input(format!("--theta expects a,b,c or pow:a, got `{text}`")))?;
        StepSchedule::Harmonic { a, b, c }
    };
    sched.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(sched)
}

/// Writes `text` to `-o` if given, else to `stdout`.
fn emit(path: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Input(e.to_string())),
    }
}

fn fmt_rates(rates: &[Rational]) -> String {
    rates.iter().map(format_rational).collect::<Vec<_>>().join(" ")
}

/// Rates from the command line, a solution file, or a fresh solve.
fn rates_for(instance: &Instance, given: Option<Vec<Rational>>, solver: &SolverArgs) -> Result<Vec<Rational>, CliError> {
    if let Some(r) = given {
        if r.len() != instance.terminal_count() {
            return Err(CliError::Input(format!(
                "{} rates for {} terminals",
                r.len(),
                instance.terminal_count()
            )));
        }
        return Ok(r);
    }
    let config = solver.config(instance.terminal_count())?;
    let sol = dex_core::solve(instance, &config)?;
    if !sol.converged {
        return Err(CliError::Failed(format!(
            "solver stopped after {} iterations with gap {}",
            sol.iterations,
            sol.gap_f64()
        )));
    }
    Ok(sol.rates)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve { input, solver } => cmd_solve(input, solver, stdout),
        Command::Oracle { input, json } => cmd_oracle(input, *json, stdout),
        Command::Verify { input, rates } => cmd_verify(input, rates, stdout),
        Command::Codegen {
            input,
            rates,
            code,
            solver,
        } => cmd_codegen(input, rates, code, solver, stdout),
        Command::Simulate {
            input,
            scheme,
            seeds,
            seed,
        } => cmd_simulate(input, scheme, *seeds, *seed, stdout),
        Command::Graph {
            input,
            rates,
            max_denominator,
            solver,
        } => cmd_graph(input, rates, *max_denominator, solver, stdout),
    }
}

fn cmd_solve(input: &InstanceArgs, solver: &SolverArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let instance = input.load()?;
    let config = solver.config(instance.terminal_count())?;
    let mut trace: Option<BufWriter<File>> = solver
        .trace
        .as_ref()
        .map(|p| {
            File::create(p)
                .map(BufWriter::new)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))
        })
        .transpose()?;
    let mut trace_err = None;
    let sol = solve_traced(&instance, &config, |t| {
        if let Some(w) = trace.as_mut() {
            let line = json!({"iteration": t.iteration, "primal": t.primal, "dual": t.dual, "gap": t.gap});
            if let Err(e) = writeln!(w, "{line}") {
                trace_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(mut w) = trace {
        if let Some(e) = trace_err.or_else(|| w.flush().err()) {
            return Err(CliError::Input(format!("trace: {e}")));
        }
    }
    let record = SolutionRecord {
        format_version: FORMAT_VERSION,
        rates: sol.rates.iter().map(rational_json).collect(),
        objective: rational_json(&sol.primal_objective),
        dual_objective: Some(rational_json(&sol.dual_objective)),
        gap: Some(rational_json(&sol.gap)),
        iterations: Some(sol.iterations),
        converged: Some(sol.converged),
        objective_approx: Some(to_f64(&sol.primal_objective)),
    };
    let text = serde_json::to_string_pretty(&record).expect("serializable") + "\n";
    emit(&input.output, stdout, &text)?;
    if !sol.converged {
        return Err(CliError::Failed(format!(
            "gap {} above tolerance after {} iterations",
            sol.gap_f64(),
            sol.iterations
        )));
    }
    Ok(())
}

fn cmd_oracle(input: &InstanceArgs, as_json: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let instance = input.load()?;
    let lp = build_lp(&instance)?;
    let sol = solve_exact(&lp)?;
    let text = if as_json {
        let constraints: Vec<_> = lp
            .constraints
            .iter()
            .map(|c| json!({"set": c.set.iter().collect::<Vec<_>>(), "rhs": rational_json(&c.rhs), "user": c.user}))
            .collect();
        let v = json!({
            "format_version": FORMAT_VERSION,
            "constraints": constraints,
            "rates": sol.rates.iter().map(rational_json).collect::<Vec<_>>(),
            "objective": rational_json(&sol.value),
        });
        serde_json::to_string_pretty(&v).expect("serializable") + "\n"
    } else {
        let mut t = format!("# {} cut constraints R(S) >= H(X_S | X_S^c)\n", lp.constraints.len());
        for c in &lp.constraints {
            t += &format!("{} >= {}\n", c.set, format_rational(&c.rhs));
        }
        t += &format!("rates {}\n", fmt_rates(&sol.rates));
        t += &format!("optimum {}\n", format_rational(&sol.value));
        t
    };
    emit(&input.output, stdout, &text)
}

fn cmd_verify(input: &InstanceArgs, rates: &RateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let instance = input.load()?;
    let r = rates
        .given()?
        .ok_or_else(|| CliError::Input("verify needs --rates or --solution".into()))?;
    let lp = build_lp(&instance)?;
    let violations = lp.violations(&r).map_err(CliError::from)?;
    let mut text = String::new();
    for v in &violations {
        text += &format!(
            "violated {}: need {}, have {}\n",
            v.set,
            format_rational(&v.required),
            format_rational(&v.provided)
        );
    }
    if violations.is_empty() {
        text += &format!("feasible objective {}\n", format_rational(&lp.objective(&r)));
    }
    emit(&input.output, stdout, &text)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} cut constraints violated", violations.len())))
    }
}

fn cmd_codegen(
    input: &InstanceArgs,
    rates: &RateArgs,
    code: &CodeArgs,
    solver: &SolverArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let instance = input.load()?;
    let raw = rates_for(&instance, rates.given()?, solver)?;
    let snapped = snap_rates(&instance, &raw, code.max_denominator)?;
    let (chunks, chunk_rates) = rationalize(&snapped, code.max_denominator)?;
    let scheme = design_transmissions(&instance, &chunk_rates, chunks, code.ext_degree, code.seed, code.attempts)?;
    let report = verify_decodability(&scheme);
    emit(&input.output, stdout, &write_scheme(&scheme))?;
    eprintln!(
        "chunks {chunks}, extension degree {}, chunk-rates {:?}, total rate {}",
        scheme.extension_degree(),
        chunk_rates,
        format_rational(&scheme.total_rate())
    );
    for d in &report {
        eprintln!("user {}: rank {} deficit {}", d.user, d.rank, d.deficit);
    }
    Ok(())
}

fn cmd_simulate(input: &InstanceArgs, scheme_path: &Path, seeds: u64, first: u64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let instance = input.load()?;
    let source = instance.model().as_linear().ok_or_else(|| CliError::Input("simulation needs a linear source".into()))?;
    let text = std::fs::read_to_string(scheme_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", scheme_path.display())))?;
    let scheme = read_scheme(&text, source).map_err(|e| CliError::Input(format!("{}: {e}", scheme_path.display())))?;
    let mut ok = 0;
    for s in first..first + seeds {
        if simulate_exchange(&scheme, s)?.success() {
            ok += 1;
        }
    }
    emit(&input.output, stdout, &format!("success {ok}/{seeds}\n"))?;
    if ok == seeds {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} of {seeds} runs failed", seeds - ok)))
    }
}

fn cmd_graph(
    input: &InstanceArgs,
    rates: &RateArgs,
    max_denominator: u64,
    solver: &SolverArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let instance = input.load()?;
    let raw = rates_for(&instance, rates.given()?, solver)?;
    let snapped = snap_rates(&instance, &raw, max_denominator)?;
    let (chunks, chunk_rates) = rationalize(&snapped, max_denominator)?;
    let graph = build_multicast_graph(&instance, &chunk_rates, chunks)?;
    emit(&input.output, stdout, &graph.to_dot())?;
    for (j, cut) in graph.min_cuts() {
        eprintln!("receiver {j}: min-cut {cut}");
    }
    Ok(())
}

/// Instance file describing `instance`, for writing fixtures and round trips.
pub fn instance_json(instance: &Instance, names: &[String]) -> String {
    file::InstanceFile::from_instance(instance, names).to_json()
}

/// Terminal names declared in an instance file.
pub fn instance_names(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_instance_file(path)?.names())
}
