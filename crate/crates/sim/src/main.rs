use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vericomp::report::{compare_to_reference, emit_csv, render_gas};
use vericomp::{run_grid, ExperimentConfig, SimError};
use vericomp_core::actors::produce_solution;
use vericomp_core::game::{build_matrix, dominant_strategies, nash_equilibria, pareto_efficient};
use vericomp_core::ledger::{Amount, Ledger};
use vericomp_core::protocol::{
    run_request, ComputationRequest, FeePolicy, Outcome, ProtocolConfig,
};
use vericomp_core::{GameParams, SitePolicy, StrategyProfile};

#[derive(Debug, Parser)]
#[command(
    name = "vericomp",
    version,
    about = "Verifiable outsourced multiplication simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a single request and print its outcome.
    Run {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long, default_value_t = 2)]
        verifiers: usize,
        #[arg(long, default_value_t = 0.5)]
        prior: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fee paid by the user; quoted from the default fee policy if omitted.
        #[arg(long)]
        fee: Option<Amount>,
        #[arg(long, default_value_t = 64)]
        pool_size: usize,
        #[arg(long, default_value_t = 100)]
        deposit: Amount,
        /// Also print the ledger event log and the committed traces.
        #[arg(long)]
        trace: bool,
    },
    /// Run the Monte Carlo grid described by a config file and write a CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Compare false-acceptance rates against p^(n+1); exit 2 on mismatch.
        #[arg(long)]
        compare: bool,
    },
    /// Print the 2x2 solver/verifier payoff matrix and its equilibria.
    Game {
        #[arg(long, default_value_t = 60)]
        fee: Amount,
        #[arg(long, default_value_t = 2)]
        verifiers: usize,
        #[arg(long, default_value_t = 100)]
        deposit: Amount,
        #[arg(long)]
        no_slash_wrong_challengers: bool,
    },
}

enum Failure {
    Usage(String),
    Comparison,
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Usage(e.to_string())
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
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Comparison) => ExitCode::from(2),
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            a,
            b,
            verifiers,
            prior,
            seed,
            fee,
            pool_size,
            deposit,
            trace,
        } => run_single(a, b, verifiers, prior, seed, fee, pool_size, deposit, trace),
        Command::Experiment {
            config,
            out,
            compare,
        } => {
            let config = ExperimentConfig::from_file(&config)?;
            let report = run_grid(&config)?;
            emit_csv(&report, &out)?;
            println!("wrote {} cells to {}", report.cells.len(), out.display());
            print!("{}", render_gas(&report));
            if compare {
                let table = compare_to_reference(&report)?;
                print!("{}", table.render());
                if !table.passes() {
                    return Err(Failure::Comparison);
                }
            }
            Ok(())
        }
        Command::Game {
            fee,
            verifiers,
            deposit,
            no_slash_wrong_challengers,
        } => {
            let params = GameParams {
                fee,
                n: verifiers,
                deposit,
                slash_wrong_challengers: !no_slash_wrong_challengers,
            };
            let m = build_matrix(&params).map_err(|e| Failure::Usage(e.to_string()))?;
            print!("{}", render_game(&m));
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    a: u64,
    b: u64,
    n: usize,
    prior: f64,
    seed: u64,
    fee: Option<Amount>,
    pool_size: usize,
    deposit: Amount,
    show_trace: bool,
) -> Result<(), Failure> {
    let usage = |e: &dyn std::fmt::Display| Failure::Usage(e.to_string());
    let fee = match fee {
        Some(f) => f,
        None => FeePolicy::default().quote(a, b, n).map_err(|e| usage(&e))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = Ledger::new(1);
    let pool = vericomp_core::populate_pool(
        &mut ledger,
        pool_size,
        prior,
        deposit,
        SitePolicy::UniformInternal,
        &mut rng,
    )
    .map_err(|e| usage(&e))?;
    let user = ledger.open_user(fee).map_err(|e| usage(&e))?;
    let request = ComputationRequest {
        a,
        b,
        n,
        fee,
        seed: rng.random(),
    };
    let out = run_request(
        &request,
        &pool,
        &mut ledger,
        user,
        &ProtocolConfig::default(),
    )
    .map_err(|e| usage(&e))?;
    ledger.check_conservation().map_err(|e| usage(&e))?;
    print!("{}", render_outcome(&out));
    if show_trace {
        println!("events:");
        print!("{}", ledger.dump_events());
        if let Some(roles) = &out.roles {
            for svc in roles.participants() {
                let sol = produce_solution(svc, &request).map_err(|e| usage(&e))?;
                println!(
                    "trace of {} (root {}):",
                    svc.address,
                    sol.trace.root_hash().prefix()
                );
                print!("{}", sol.trace.dump());
            }
        }
    }
    Ok(())
}

fn render_outcome(out: &Outcome) -> String {
    let mut s = String::new();
    let r = &out.request;
    let _ = writeln!(
        s,
        "request: {} x {} with {} verifiers, fee {}",
        r.a, r.b, r.n, r.fee
    );
    let _ = writeln!(s, "case: {}", out.case.label());
    match out.accepted_value {
        Some(v) => {
            let _ = writeln!(
                s,
                "accepted value: {v} ({})",
                if out.correct { "correct" } else { "false" }
            );
        }
        None => {
            let _ = writeln!(s, "accepted value: none (refunded {})", out.refunded);
        }
    }
    if let Some(roles) = &out.roles {
        let kind = |h: bool| if h { "honest" } else { "dishonest" };
        let _ = writeln!(
            s,
            "solver: {} ({})",
            roles.solver.address,
            kind(roles.solver.behavior.is_honest())
        );
        for (v, (_, stance)) in roles.verifiers.iter().zip(&out.stances) {
            let _ = writeln!(
                s,
                "verifier: {} ({}) {:?}",
                v.address,
                kind(v.behavior.is_honest()),
                stance
            );
        }
    }
    let _ = writeln!(s, "payouts:");
    for (addr, amount) in &out.payouts {
        let _ = writeln!(s, "  {addr:>5} {amount:>8}");
    }
    if !out.slashed.is_empty() {
        let slashed: Vec<String> = out.slashed.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(
            s,
            "slashed: {} (destroyed {})",
            slashed.join(" "),
            out.destroyed
        );
    }
    for d in &out.disputes {
        let _ = writeln!(
            s,
            "dispute at {} ({}): solver {} vs challenger {}, {} queries, verdict {:?} (exact {})",
            d.disagreement.step,
            d.disagreement.op,
            d.disagreement.solver_claim,
            d.disagreement.challenger_claim,
            d.disagreement.judge_queries,
            d.verdict.decision,
            d.verdict.exact
        );
    }
    let _ = writeln!(s, "gas:");
    for (phase, gas) in out.gas.per_phase() {
        let _ = writeln!(s, "  {:<11} {gas:>6}", phase.to_string());
    }
    let _ = writeln!(s, "  {:<11} {:>6}", "total", out.gas.total());
    s
}

fn render_game(m: &vericomp_core::PayoffMatrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>16} {:>16}", "solver", "challenge", "accept");
    for solver in vericomp_core::SolverStrategy::ALL {
        let _ = write!(s, "{:<10}", solver.to_string());
        for v in vericomp_core::VerifierStrategy::ALL {
            let p = m.get(StrategyProfile::new(solver, v));
            let _ = write!(s, " {:>16}", format!("({}, {})", p.solver, p.verifier));
        }
        s.push('\n');
    }
    let d = dominant_strategies(m);
    let name = |o: Option<String>| o.unwrap_or_else(|| "none".into());
    let _ = writeln!(
        s,
        "dominant solver strategy: {}",
        name(d.solver.map(|x| x.to_string()))
    );
    let _ = writeln!(
        s,
        "dominant verifier strategy: {}",
        name(d.verifier.map(|x| x.to_string()))
    );
    let list = |v: Vec<StrategyProfile>| {
        v.iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "nash equilibria: {}", list(nash_equilibria(m)));
    let _ = writeln!(s, "pareto efficient: {}", list(pareto_efficient(m)));
    s
}
