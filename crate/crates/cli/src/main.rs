use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use margin_discrim::locc::{margin_povm_to_locc, BipartiteState, SearchOptions};
use margin_discrim::margin::{critical_margin, optimal_povm, success};
use margin_discrim::oracle::{oracle_general, oracle_reduced};
use margin_discrim::simulator::simulate;
use margin_discrim::validator::{check_margin, evaluate};
use margin_discrim::{curve, exec, ConditionKind, Error, MarginCondition, StatePair, C64};
use serde_json::{json, Value};

const THREADS_VAR: &str = "MARGIN_DISCRIM_THREADS";

#[derive(Parser)]
#[command(
    name = "margin-discrim",
    version,
    about = "Two-state discrimination with an error margin"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form optimum, optimal POVM and its validation report.
    Solve(SolveArgs),
    /// Success probabilities over the margin range [0, 1] as CSV.
    Curve(CurveArgs),
    /// Monte Carlo of the optimal measurement.
    Simulate(SimulateArgs),
    /// Numerical optimum without the closed forms.
    Oracle(OracleArgs),
    /// One-way LOCC realization for a pair of two-party states.
    Locc(LoccArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    Strong,
    Weak,
}

impl From<Condition> for ConditionKind {
    fn from(c: Condition) -> Self {
        match c {
            Condition::Strong => ConditionKind::Strong,
            Condition::Weak => ConditionKind::Weak,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Reduced,
    General,
}

#[derive(Args)]
struct MarginArgs {
    /// Error margin m in [0, 1].
    #[arg(long)]
    margin: f64,
    #[arg(long, value_enum, default_value = "strong")]
    condition: Condition,
}

impl MarginArgs {
    fn condition(&self) -> margin_discrim::Result<MarginCondition> {
        MarginCondition::new(self.condition.into(), self.margin)
    }
}

#[derive(Args)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Overlap |<phi1|phi2>| in [0, 1).
    #[arg(long)]
    fidelity: f64,
    #[command(flatten)]
    margin: MarginArgs,
    /// Also run the reduced oracle and report its distance to the closed form.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    fidelity: f64,
    #[arg(long, default_value_t = 101)]
    m_steps: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    fidelity: f64,
    #[command(flatten)]
    margin: MarginArgs,
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    fidelity: f64,
    #[command(flatten)]
    margin: MarginArgs,
    #[arg(long, value_enum, default_value = "reduced")]
    mode: Mode,
    /// Grid size for the reduced search, evaluation cap for the general one.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LoccArgs {
    /// Preset name or JSON amplitude matrix (rows index Alice, entries are
    /// numbers or [re, im] pairs).
    #[arg(long)]
    phi1: String,
    #[arg(long)]
    phi2: String,
    #[command(flatten)]
    margin: MarginArgs,
    #[arg(long, default_value_t = 2)]
    ancilla_dim: usize,
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

fn emit(output: &Output, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
        }
    }
    Ok(())
}

fn emit_json(output: &Output, value: &Value) -> anyhow::Result<()> {
    emit(output, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn solve(args: &SolveArgs) -> anyhow::Result<()> {
    let pair = StatePair::from_fidelity(args.fidelity)?;
    let cond = args.margin.condition()?;
    let (povm, regime) = optimal_povm(&pair, cond)?;
    let p = success(args.fidelity, cond)?;
    let report = evaluate(&povm, &pair)?;
    let mut out = json!({
        "fidelity": args.fidelity,
        "condition": cond,
        "critical_margin": critical_margin(args.fidelity)?,
        "regime": regime,
        "p_success": p,
        "povm": povm,
        "report": report,
        "margin_slack": check_margin(&report, cond),
    });
    if args.oracle {
        let m = cond.m.min(critical_margin(args.fidelity)?);
        let r = oracle_reduced(pair.s(), pair.t(), m, cond.kind, 100_000)?;
        out["oracle"] = json!({ "result": r, "delta": r.p_best - p });
    }
    emit_json(&args.output, &out)
}

fn oracle(args: &OracleArgs) -> anyhow::Result<()> {
    let pair = StatePair::from_fidelity(args.fidelity)?;
    let cond = args.margin.condition()?;
    let result = match args.mode {
        Mode::Reduced => {
            // the reduced constraints divide by 1 - 2m; beyond m_c the
            // optimum no longer depends on m
            let m = cond.m.min(critical_margin(args.fidelity)?);
            oracle_reduced(pair.s(), pair.t(), m, cond.kind, args.budget)?
        }
        Mode::General => oracle_general(&pair, cond, args.budget, args.seed)?,
    };
    emit_json(&args.output, &serde_json::to_value(result)?)
}

fn simulate_cmd(args: &SimulateArgs) -> anyhow::Result<()> {
    let pair = StatePair::from_fidelity(args.fidelity)?;
    let cond = args.margin.condition()?;
    let (povm, _) = optimal_povm(&pair, cond)?;
    let result = simulate(&povm, &pair, args.shots, args.seed)?;
    emit_json(&args.output, &serde_json::to_value(result)?)
}

fn curve_cmd(args: &CurveArgs) -> anyhow::Result<()> {
    let rows = curve::curve(args.fidelity, args.m_steps)?;
    emit(&args.output, |w| curve::write_csv(&rows, w))
}

fn parse_entry(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => n.as_f64().map(C64::from),
        Value::Array(pair) if pair.len() == 2 => Some(C64::new(pair[0].as_f64()?, pair[1].as_f64()?)),
        _ => None,
    }
}

fn parse_state(text: &str) -> margin_discrim::Result<BipartiteState> {
    let trimmed = text.trim();
    if !trimmed.starts_with('[') {
        return BipartiteState::preset(trimmed);
    }
    let bad = |why: &str| Error::Domain(format!("invalid amplitude matrix {trimmed}: {why}"));
    let value: Value = serde_json::from_str(trimmed).map_err(|e| bad(&e.to_string()))?;
    let rows = value.as_array().ok_or_else(|| bad("expected an array of rows"))?;
    let mut entries = Vec::new();
    let mut cols = None;
    for row in rows {
        let row = row.as_array().ok_or_else(|| bad("rows must be arrays"))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(bad("rows have different lengths"));
        }
        for e in row {
            entries.push(parse_entry(e).ok_or_else(|| bad("entries must be numbers or [re, im]"))?);
        }
    }
    let cols = cols.ok_or_else(|| bad("empty matrix"))?;
    BipartiteState::from_rows(rows.len(), cols, &entries)
}

fn locc(args: &LoccArgs) -> anyhow::Result<()> {
    let phi1 = parse_state(&args.phi1)?;
    let phi2 = parse_state(&args.phi2)?;
    let cond = args.margin.condition()?;
    let opts = SearchOptions {
        ancilla_dim: args.ancilla_dim,
        budget: args.budget,
        seed: args.seed,
        ..SearchOptions::default()
    };
    let out = margin_povm_to_locc(&phi1, &phi2, cond, opts)?;
    let report = json!({
        "fidelity": out.fidelity,
        "condition": cond,
        "regime": out.regime,
        "max_deviation": out.max_deviation,
        "p_success_closed_form": success(out.fidelity, cond)?,
        "p_success_global": out.global_report.p_success,
        "p_success_locc": out.locc_report.p_success,
        "margin_slack": out.margin_slack,
        "ancilla_dim": out.decomposition.ancilla_dim,
        "branch_slacks": out.branch_slacks,
        "evaluations": out.decomposition.evaluations,
        "global_report": out.global_report,
        "locc_report": out.locc_report,
    });
    emit_json(&args.output, &report)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Domain(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    exec::init_thread_pool(n)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Curve(a) => curve_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Oracle(a) => oracle(a),
        Command::Locc(a) => locc(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err)
            if err
                .downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(e) if e.is_input_error() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
