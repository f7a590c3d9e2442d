//! Monte Carlo driver: runs many independent protocol instances per
//! (prior, verifier count) cell and aggregates detection and gas figures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use vericomp_core::actors::{populate_pool, ServicePool};
use vericomp_core::ledger::Ledger;
use vericomp_core::protocol::{run_request, Case, ComputationRequest, ProtocolConfig};

use crate::config::ExperimentConfig;
use crate::error::SimError;
use crate::stats::{clopper_pearson, linear_fit, mean_std, LinearFit};

pub const CONFIDENCE: f64 = 0.95;

/// Probability that the solver and all `n` verifiers belong to the colluding
/// coalition, i.e. that a false result is accepted without dispute.
pub fn expected_false_rate(p: f64, n: usize) -> f64 {
    p.powi(n as i32 + 1)
}

/// Probability that the drawn committee mixes honest and dishonest services,
/// which is exactly when a dispute is raised under the default dissent
/// policy.
pub fn expected_dispute_rate(p: f64, n: usize) -> f64 {
    1.0 - p.powi(n as i32 + 1) - (1.0 - p).powi(n as i32 + 1)
}

/// Per-run seed derived from the cell coordinates and run index only, so
/// cells and runs can execute in any order.
pub fn run_seed(master_seed: u64, prior: f64, n: usize, run: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(prior.to_bits().to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((run as u64).to_le_bytes());
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub case: Case,
    pub gas: u64,
    pub slashes: usize,
    pub disputed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub prior: f64,
    pub n: usize,
    /// Completed (non-aborted) runs.
    pub runs: usize,
    pub aborted: usize,
    pub false_accepts: usize,
    pub false_accept_rate: f64,
    pub expected_false: f64,
    pub disputes: usize,
    pub dispute_rate: f64,
    pub gas_mean: f64,
    pub gas_std: f64,
    pub slashes: usize,
    /// Clopper-Pearson interval around the observed false-accept rate.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasFit {
    pub prior: f64,
    pub fit: LinearFit,
    pub strictly_increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub cells: Vec<CellResult>,
    pub fits: Vec<GasFit>,
}

impl Report {
    pub fn cell(&self, prior: f64, n: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && (c.prior - prior).abs() < 1e-9)
    }

    pub fn fit(&self, prior: f64) -> Option<&GasFit> {
        self.fits.iter().find(|f| (f.prior - prior).abs() < 1e-9)
    }
}

fn protocol_config(config: &ExperimentConfig) -> ProtocolConfig {
    ProtocolConfig {
        gas: config.gas_schedule.clone(),
        slash_wrong_challengers: config.slash_wrong_challengers,
        dissent: config.dissent,
    }
}

fn invariant(prior: f64, n: usize, run: usize, detail: impl Into<String>) -> SimError {
    SimError::Invariant {
        prior,
        n,
        run,
        detail: detail.into(),
    }
}

fn execute_run(
    config: &ExperimentConfig,
    protocol: &ProtocolConfig,
    ledger: &mut Ledger,
    pool: &ServicePool,
    rng: &mut ChaCha8Rng,
    (prior, n, run): (f64, usize, usize),
) -> Result<RunRecord, SimError> {
    let operand_range = 1..1u64 << config.operand_bits;
    let a = rng.random_range(operand_range.clone());
    let b = rng.random_range(operand_range);
    let fee = config
        .fee_policy
        .quote(a, b, n)
        .map_err(|e| invariant(prior, n, run, e.to_string()))?;
    let user = ledger.open_user(fee)?;
    let request = ComputationRequest {
        a,
        b,
        n,
        fee,
        seed: rng.random(),
    };
    let out = run_request(&request, pool, ledger, user, protocol)?;
    if out.case != Case::Aborted && out.total_paid() != fee {
        return Err(invariant(
            prior,
            n,
            run,
            format!("paid {} of fee {fee}", out.total_paid()),
        ));
    }
    ledger.check_conservation()?;
    let per_phase: u64 = out.gas.per_phase().map(|(_, g)| g).sum();
    if per_phase != out.gas.total() {
        return Err(invariant(prior, n, run, "gas phases do not sum to total"));
    }
    Ok(RunRecord {
        case: out.case,
        gas: out.gas.total(),
        slashes: out.slashed.len(),
        disputed: !out.disputes.is_empty(),
    })
}

/// One run with a fresh ledger and a freshly populated pool.
pub fn fresh_run(
    config: &ExperimentConfig,
    prior: f64,
    n: usize,
    run: usize,
) -> Result<RunRecord, SimError> {
    let protocol = protocol_config(config);
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(config.master_seed, prior, n, run));
    let mut ledger = Ledger::new(1);
    let pool = populate_pool(
        &mut ledger,
        config.pool_size,
        prior,
        config.deposit,
        config.site_policy,
        &mut rng,
    )?;
    execute_run(
        config,
        &protocol,
        &mut ledger,
        &pool,
        &mut rng,
        (prior, n, run),
    )
}

fn carried_runs(
    config: &ExperimentConfig,
    prior: f64,
    n: usize,
) -> Result<Vec<RunRecord>, SimError> {
    let protocol = protocol_config(config);
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(config.master_seed, prior, n, usize::MAX));
    let mut ledger = Ledger::new(1);
    let pool = populate_pool(
        &mut ledger,
        config.pool_size,
        prior,
        config.deposit,
        config.site_policy,
        &mut rng,
    )?;
    (0..config.runs_per_cell)
        .map(|run| {
            let mut run_rng =
                ChaCha8Rng::seed_from_u64(run_seed(config.master_seed, prior, n, run));
            execute_run(
                config,
                &protocol,
                &mut ledger,
                &pool,
                &mut run_rng,
                (prior, n, run),
            )
        })
        .collect()
}

/// Aggregates `runs_per_cell` runs for one (prior, n) cell. Aggregation is in
/// run-index order regardless of execution order.
pub fn run_cell(config: &ExperimentConfig, prior: f64, n: usize) -> Result<CellResult, SimError> {
    config.validate()?;
    let records: Vec<RunRecord> = if config.carry_exclusions {
        carried_runs(config, prior, n)?
    } else {
        (0..config.runs_per_cell)
            .into_par_iter()
            .map(|run| fresh_run(config, prior, n, run))
            .collect::<Result<_, _>>()?
    };
    Ok(aggregate(prior, n, &records))
}

pub fn aggregate(prior: f64, n: usize, records: &[RunRecord]) -> CellResult {
    let completed: Vec<&RunRecord> = records.iter().filter(|r| r.case != Case::Aborted).collect();
    let runs = completed.len();
    let false_accepts = completed
        .iter()
        .filter(|r| r.case == Case::FalseAccepted)
        .count();
    let disputes = completed.iter().filter(|r| r.disputed).count();
    let gas: Vec<f64> = completed.iter().map(|r| r.gas as f64).collect();
    let (gas_mean, gas_std) = mean_std(&gas);
    let rate = |k: usize| {
        if runs == 0 {
            0.0
        } else {
            k as f64 / runs as f64
        }
    };
    let (ci_low, ci_high) = if runs == 0 {
        (0.0, 1.0)
    } else {
        clopper_pearson(false_accepts as u64, runs as u64, CONFIDENCE)
    };
    CellResult {
        prior,
        n,
        runs,
        aborted: records.len() - runs,
        false_accepts,
        false_accept_rate: rate(false_accepts),
        expected_false: expected_false_rate(prior, n),
        disputes,
        dispute_rate: rate(disputes),
        gas_mean,
        gas_std,
        slashes: completed.iter().map(|r| r.slashes).sum(),
        ci_low,
        ci_high,
    }
}

/// Every (prior, n) cell of the configured grid plus a linear fit of mean
/// gas against `n` for each prior.
pub fn run_grid(config: &ExperimentConfig) -> Result<Report, SimError> {
    config.validate()?;
    let coords: Vec<(f64, usize)> = config
        .priors
        .iter()
        .flat_map(|&p| config.verifier_counts.iter().map(move |&n| (p, n)))
        .collect();
    let cells: Vec<CellResult> = coords
        .par_iter()
        .map(|&(p, n)| run_cell(config, p, n))
        .collect::<Result<_, _>>()?;

    let fits = config
        .priors
        .iter()
        .map(|&prior| {
            let mut row: Vec<&CellResult> = cells.iter().filter(|c| c.prior == prior).collect();
            row.sort_by_key(|c| c.n);
            let xs: Vec<f64> = row.iter().map(|c| c.n as f64).collect();
            let ys: Vec<f64> = row.iter().map(|c| c.gas_mean).collect();
            GasFit {
                prior,
                fit: linear_fit(&xs, &ys),
                strictly_increasing: ys.windows(2).all(|w| w[1] > w[0]),
            }
        })
        .collect();
    Ok(Report { cells, fits })
}
