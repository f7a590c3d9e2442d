//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vericomp::harness::expected_false_rate;
use vericomp::report::{compare_to_reference, format_percent, to_csv};
use vericomp::{run_grid, ExperimentConfig, Report};
use vericomp_core::actors::{Behavior, ComputationService, RoleAssignment, SitePolicy};
use vericomp_core::game::Payoff;
use vericomp_core::ledger::Ledger;
use vericomp_core::protocol::{run_with_roles, ComputationRequest, ProtocolConfig};
use vericomp_core::trace::ceil_log2;
use vericomp_core::{
    bisect, build_matrix, dominant_strategies, judge_step, nash_equilibria, pareto_efficient,
    CorruptionSite, Decision, FeePolicy, GameParams, SolverStrategy, StrategyProfile, TraceTree,
    VerifierStrategy,
};

const MASTER_SEED: u64 = 20240601;
const GRID_TIME_LIMIT_SECS: f64 = 60.0;
const MIN_R_SQUARED: f64 = 0.95;
const MAX_BAND_MISSES: usize = 1;

/// Printed "Expected false [%]" column, row-major over p ∈ {0.3, 0.5, 0.7}
/// and n = 1..=6.
const PRINTED_EXPECTED: [[&str; 6]; 3] = [
    ["9.0", "2.7", "0.81", "0.243", "0.0729", "0.02187"],
    ["25.0", "12.5", "6.25", "3.125", "1.5625", "0.78125"],
    ["49.0", "34.3", "24.01", "16.807", "11.7649", "8.23543"],
];

type Verdict = Result<String, String>;

/// Exact decimal expansion of `100 * (num/den)^k`, trimmed to at least one
/// fractional digit.
fn exact_percent(num: u128, den: u128, k: u32) -> String {
    let scaled = num.pow(k) * 100;
    let denom = den.pow(k);
    let int = scaled / denom;
    let mut rem = scaled % denom;
    let mut frac = String::new();
    while rem != 0 {
        rem *= 10;
        frac.push(char::from(b'0' + (rem / denom) as u8));
        rem %= denom;
    }
    if frac.is_empty() {
        frac.push('0');
    }
    format!("{int}.{frac}")
}

fn criterion_1() -> Verdict {
    let priors = [(3u128, 0.3), (5, 0.5), (7, 0.7)];
    for (row, &(num, p)) in priors.iter().enumerate() {
        for n in 1..=6usize {
            let oracle = exact_percent(num, 10, n as u32 + 1);
            let printed = PRINTED_EXPECTED[row][n - 1];
            let ours = format_percent(expected_false_rate(p, n) * 100.0);
            if oracle != printed || ours != printed {
                return Err(format!(
                    "p={p} n={n}: printed {printed}, oracle {oracle}, computed {ours}"
                ));
            }
        }
    }
    Ok("18/18 expected values match the printed digits".into())
}

fn criterion_2(report: &Report, secs: f64) -> Verdict {
    let table = compare_to_reference(report).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} outside 95% CI, {} beyond ±3.1pp, grid took {secs:.1}s",
        table.outside_ci(),
        table.outside_band()
    );
    if table.outside_ci() == 0
        && table.outside_band() <= MAX_BAND_MISSES
        && secs < GRID_TIME_LIMIT_SECS
    {
        Ok(detail)
    } else {
        Err(format!("{detail}\n{}", table.render()))
    }
}

fn roles_for(ledger: &mut Ledger, honest: &[bool], policy: SitePolicy) -> RoleAssignment {
    let services: Vec<_> = honest
        .iter()
        .map(|&h| ComputationService {
            address: ledger.open_account(100).unwrap(),
            behavior: if h {
                Behavior::honest()
            } else {
                Behavior::colluding(policy)
            },
        })
        .collect();
    RoleAssignment {
        solver: services[0],
        verifiers: services[1..].to_vec(),
    }
}

/// Criteria 3 and 5 share these runs. Returns (runs, escrow/conservation ok).
fn criterion_3() -> (Verdict, Result<usize, String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs: Vec<(u64, u64)> = (0..1000)
        .map(|_| {
            (
                rng.random_range(0..1u64 << 24),
                rng.random_range(1..1u64 << 24),
            )
        })
        .collect();
    let mut runs = 0;
    let mut conservation: Result<usize, String> = Ok(0);
    for n in 1..=3usize {
        for mask in 0..1u32 << (n + 1) {
            let honest: Vec<bool> = (0..=n).map(|i| mask >> i & 1 == 0).collect();
            let unanimous_collusion = honest.iter().all(|h| !h);
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let policy = if k % 2 == 0 {
                    SitePolicy::UniformInternal
                } else {
                    SitePolicy::RootOnly
                };
                let fee = FeePolicy::default().quote(a, b, n).unwrap();
                let mut ledger = Ledger::new(1);
                let user = ledger.open_user(fee).unwrap();
                let roles = roles_for(&mut ledger, &honest, policy);
                let request = ComputationRequest {
                    a,
                    b,
                    n,
                    fee,
                    seed: k as u64,
                };
                let out = match run_with_roles(
                    &request,
                    &roles,
                    &mut ledger,
                    user,
                    &ProtocolConfig::default(),
                ) {
                    Ok(out) => out,
                    Err(e) => return (Err(format!("{honest:?} a={a} b={b}: {e}")), conservation),
                };
                runs += 1;
                let ctx = format!("honest={honest:?} a={a} b={b}");
                let false_accepted = out.accepted_value.is_some_and(|v| v != a * b);
                if false_accepted != unanimous_collusion {
                    return (
                        Err(format!("{ctx}: false acceptance {false_accepted}")),
                        conservation,
                    );
                }
                let caught = !out.disputes.is_empty()
                    && out
                        .disputes
                        .iter()
                        .all(|d| d.verdict.decision == Decision::SolverFalse);
                if !honest[0] && honest[1..].iter().any(|&h| h) && !caught {
                    return (
                        Err(format!("{ctx}: verdict is not SolverFalse")),
                        conservation,
                    );
                }
                for (svc, &h) in roles.participants().zip(&honest) {
                    if h && out.slashed.contains(&svc.address) {
                        return (
                            Err(format!("{ctx}: honest {} slashed", svc.address)),
                            conservation,
                        );
                    }
                }
                if conservation.is_ok() {
                    if out.total_paid() != fee {
                        conservation = Err(format!("{ctx}: paid {} of {fee}", out.total_paid()));
                    } else if let Err(e) = ledger.check_conservation() {
                        conservation = Err(format!("{ctx}: {e}"));
                    } else {
                        conservation = Ok(runs);
                    }
                }
            }
        }
    }
    (
        Ok(format!(
            "{runs} runs over all behavior assignments for n<=3"
        )),
        conservation,
    )
}

fn criterion_4() -> Verdict {
    let mut checks = 0;
    for a in 0..32u64 {
        for b in 0..32u64 {
            let honest = TraceTree::decompose(a, b).map_err(|e| e.to_string())?;
            let bound = ceil_log2(honest.len()) + 1;
            for site in honest.internal_steps() {
                let forged = honest
                    .corrupt(CorruptionSite::Step(site))
                    .map_err(|e| e.to_string())?;
                let d = bisect(&forged, &honest).map_err(|e| e.to_string())?;
                if judge_step(&d).decision != Decision::SolverFalse || d.judge_queries > bound {
                    return Err(format!("a={a} b={b} site={site}: {d:?}"));
                }
                checks += 1;
            }
        }
    }
    Ok(format!(
        "{checks} corrupted traces convicted within the query bound"
    ))
}

fn criterion_5(grid: &Report, runs: Result<usize, String>) -> Verdict {
    // The harness rejects any run whose payouts differ from the fee or whose
    // ledger breaks conservation, so a completed grid is itself the check.
    let grid_runs: usize = grid.cells.iter().map(|c| c.runs).sum();
    let aborted: usize = grid.cells.iter().map(|c| c.aborted).sum();
    if aborted != 0 {
        return Err(format!("{aborted} grid runs aborted"));
    }
    let runs = runs?;
    Ok(format!(
        "{grid_runs} grid runs and {runs} exhaustive runs conserve currency and exhaust escrow"
    ))
}

fn criterion_6(report: &Report) -> Verdict {
    let mut detail = Vec::new();
    for fit in &report.fits {
        if !fit.strictly_increasing || fit.fit.r_squared < MIN_R_SQUARED {
            return Err(format!(
                "p={}: increasing={} R²={:.4}",
                fit.prior, fit.strictly_increasing, fit.fit.r_squared
            ));
        }
        detail.push(format!("p={} R²={:.4}", fit.prior, fit.fit.r_squared));
    }
    for p in [0.5, 0.7] {
        let (s1, s6) = match (report.cell(p, 1), report.cell(p, 6)) {
            (Some(a), Some(b)) => (a.gas_std, b.gas_std),
            _ => return Err(format!("missing cells for p={p}")),
        };
        if s6 >= s1 {
            return Err(format!("p={p}: std(n=6)={s6:.2} >= std(n=1)={s1:.2}"));
        }
        detail.push(format!("p={p} std {s1:.1}->{s6:.1}"));
    }
    Ok(detail.join(", "))
}

/// Payoff of the solver and first verifier in an actual run realizing
/// `profile`; verifiers challenge exactly when they differ from the solver.
fn protocol_payoff(profile: StrategyProfile, params: &GameParams) -> Payoff {
    let solver_honest = profile.solver == SolverStrategy::Correct;
    let verifier_honest = (profile.verifier == VerifierStrategy::Accept) == solver_honest;
    let mut honest = vec![solver_honest];
    honest.extend(std::iter::repeat_n(verifier_honest, params.n));
    let mut ledger = Ledger::new(1);
    let user = ledger.open_user(params.fee).unwrap();
    let roles = roles_for(&mut ledger, &honest, SitePolicy::UniformInternal);
    let request = ComputationRequest {
        a: 3021,
        b: 77,
        n: params.n,
        fee: params.fee,
        seed: 5,
    };
    let config = ProtocolConfig {
        slash_wrong_challengers: params.slash_wrong_challengers,
        ..ProtocolConfig::default()
    };
    let out = run_with_roles(&request, &roles, &mut ledger, user, &config).unwrap();
    let value = |svc: &ComputationService| {
        let lost = if out.slashed.contains(&svc.address) {
            params.deposit as i64
        } else {
            0
        };
        out.payout_to(svc.address) as i64 - lost
    };
    Payoff {
        solver: value(&roles.solver),
        verifier: value(&roles.verifiers[0]),
    }
}

fn criterion_7() -> Verdict {
    let m = build_matrix(&GameParams::default()).map_err(|e| e.to_string())?;
    let ca = StrategyProfile::new(SolverStrategy::Correct, VerifierStrategy::Accept);
    if dominant_strategies(&m).verifier.is_some() {
        return Err("verifier has a dominant strategy".into());
    }
    if !nash_equilibria(&m).contains(&ca) || !pareto_efficient(&m).contains(&ca) {
        return Err("(correct, accept) is not a Pareto-efficient equilibrium".into());
    }
    let mut cells = 0;
    for n in 1..=3 {
        for slash in [true, false] {
            let params = GameParams {
                n,
                slash_wrong_challengers: slash,
                ..GameParams::default()
            };
            let m = build_matrix(&params).map_err(|e| e.to_string())?;
            for profile in StrategyProfile::all() {
                let run = protocol_payoff(profile, &params);
                if m.get(profile) != run {
                    return Err(format!(
                        "{profile} {params:?}: matrix {:?} vs run {run:?}",
                        m.get(profile)
                    ));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("no dominant verifier strategy; (correct, accept) is Nash and Pareto; {cells} cells match protocol runs"))
}

fn criterion_8(first: &Report, config: &ExperimentConfig) -> Verdict {
    let second = run_grid(config).map_err(|e| e.to_string())?;
    let (a, b) = (to_csv(first), to_csv(&second));
    if a == b {
        Ok(format!("{} bytes identical across two grid runs", a.len()))
    } else {
        Err("CSV output differs between runs".into())
    }
}

fn main() -> ExitCode {
    let config = ExperimentConfig::with_seed(MASTER_SEED);
    let started = Instant::now();
    let grid = run_grid(&config);
    let secs = started.elapsed().as_secs_f64();
    let grid_err = |g: &Result<Report, vericomp::SimError>| -> Result<(), String> {
        g.as_ref().map(|_| ()).map_err(|e| e.to_string())
    };

    let (c3, c3_runs) = criterion_3();
    let results: Vec<(u32, &str, Verdict)> = vec![
        (1, "expected false-acceptance column", criterion_1()),
        (
            2,
            "simulated false-acceptance rates",
            grid_err(&grid).and_then(|_| criterion_2(grid.as_ref().unwrap(), secs)),
        ),
        (3, "detection completeness", c3),
        (4, "dispute game soundness", criterion_4()),
        (
            5,
            "conservation and escrow exhaustion",
            grid_err(&grid).and_then(|_| criterion_5(grid.as_ref().unwrap(), c3_runs)),
        ),
        (
            6,
            "gas trends",
            grid_err(&grid).and_then(|_| criterion_6(grid.as_ref().unwrap())),
        ),
        (
            7,
            "game claims and matrix/protocol equivalence",
            criterion_7(),
        ),
        (
            8,
            "deterministic CSV",
            grid_err(&grid).and_then(|_| criterion_8(grid.as_ref().unwrap(), &config)),
        ),
    ];

    let mut failed = 0;
    for (id, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("PASS  criterion {id}: {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {id}: {name}: {detail}");
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
