//! Experiment configuration and its flat key-value file format.
//!
//! ```toml
//! master_seed = 7
//! priors = [0.3, 0.5, 0.7]
//! verifier_counts = [1, 2, 3, 4, 5, 6]
//! runs_per_cell = 1000
//! gas_judge_invocation = 80
//! ```
//!
//! Only `master_seed` is required.

use std::path::Path;

use serde::Deserialize;
use vericomp_core::ledger::{Amount, GasSchedule, OpKind};
use vericomp_core::{DissentPolicy, FeePolicy, SitePolicy};

use crate::error::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub priors: Vec<f64>,
    pub verifier_counts: Vec<usize>,
    pub runs_per_cell: usize,
    pub pool_size: usize,
    pub fee_policy: FeePolicy,
    pub gas_schedule: GasSchedule,
    pub deposit: Amount,
    pub master_seed: u64,
    pub site_policy: SitePolicy,
    pub slash_wrong_challengers: bool,
    pub dissent: DissentPolicy,
    /// Keep one pool per cell so exclusions carry from run to run.
    pub carry_exclusions: bool,
    /// Operands are drawn uniformly from `[1, 2^operand_bits)`.
    pub operand_bits: u32,
}

impl ExperimentConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            priors: vec![0.3, 0.5, 0.7],
            verifier_counts: (1..=6).collect(),
            runs_per_cell: 1000,
            pool_size: 64,
            fee_policy: FeePolicy::default(),
            gas_schedule: GasSchedule::default(),
            deposit: 100,
            master_seed,
            site_policy: SitePolicy::UniformInternal,
            slash_wrong_challengers: true,
            dissent: DissentPolicy::Challenge,
            carry_exclusions: false,
            operand_bits: 16,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.priors.is_empty() || self.verifier_counts.is_empty() {
            return bad("priors and verifier_counts must be non-empty".into());
        }
        if let Some(p) = self.priors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("prior {p} is outside [0, 1]"));
        }
        if self.verifier_counts.contains(&0) {
            return bad("verifier counts must be at least 1".into());
        }
        if self.runs_per_cell == 0 {
            return bad("runs_per_cell must be at least 1".into());
        }
        let max_n = self.verifier_counts.iter().copied().max().unwrap_or(1);
        if self.pool_size < max_n + 1 || self.pool_size < 2 {
            return bad(format!(
                "pool_size {} must be at least max(verifier_counts) + 1 = {}",
                self.pool_size,
                max_n + 1
            ));
        }
        if self.deposit == 0 {
            return bad("deposit must be positive".into());
        }
        if !(1..=31).contains(&self.operand_bits) {
            return bad("operand_bits must be within 1..=31".into());
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        raw.into_config()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<u64>,
    priors: Option<Vec<f64>>,
    verifier_counts: Option<Vec<usize>>,
    runs_per_cell: Option<usize>,
    pool_size: Option<usize>,
    deposit: Option<Amount>,
    fee_base: Option<Amount>,
    fee_per_step: Option<Amount>,
    fee_per_verifier: Option<Amount>,
    gas_transaction_base: Option<u64>,
    gas_storage_write: Option<u64>,
    gas_comparison: Option<u64>,
    gas_judge_invocation: Option<u64>,
    gas_dispute_step: Option<u64>,
    gas_role_assignment: Option<u64>,
    site_policy: Option<String>,
    slash_wrong_challengers: Option<bool>,
    dissent: Option<String>,
    carry_exclusions: Option<bool>,
    operand_bits: Option<u32>,
}

impl RawConfig {
    fn into_config(self) -> Result<ExperimentConfig, SimError> {
        let seed = self
            .master_seed
            .ok_or_else(|| SimError::Config("master_seed is required".into()))?;
        let mut c = ExperimentConfig::with_seed(seed);
        if let Some(v) = self.priors {
            c.priors = v;
        }
        if let Some(v) = self.verifier_counts {
            c.verifier_counts = v;
        }
        if let Some(v) = self.runs_per_cell {
            c.runs_per_cell = v;
        }
        if let Some(v) = self.pool_size {
            c.pool_size = v;
        }
        if let Some(v) = self.deposit {
            c.deposit = v;
        }
        if let Some(v) = self.fee_base {
            c.fee_policy.base = v;
        }
        if let Some(v) = self.fee_per_step {
            c.fee_policy.per_step = v;
        }
        if let Some(v) = self.fee_per_verifier {
            c.fee_policy.per_verifier = v;
        }
        let gas = [
            (OpKind::TransactionBase, self.gas_transaction_base),
            (OpKind::StorageWrite, self.gas_storage_write),
            (OpKind::Comparison, self.gas_comparison),
            (OpKind::JudgeInvocation, self.gas_judge_invocation),
            (OpKind::DisputeStep, self.gas_dispute_step),
            (OpKind::RoleAssignment, self.gas_role_assignment),
        ];
        for (kind, cost) in gas {
            if let Some(cost) = cost {
                c.gas_schedule
                    .set(kind, cost)
                    .map_err(|e| SimError::Config(e.to_string()))?;
            }
        }
        if let Some(v) = self.site_policy {
            c.site_policy = match v.as_str() {
                "root_only" => SitePolicy::RootOnly,
                "uniform_internal" => SitePolicy::UniformInternal,
                other => return Err(SimError::Config(format!("unknown site_policy {other:?}"))),
            };
        }
        if let Some(v) = self.slash_wrong_challengers {
            c.slash_wrong_challengers = v;
        }
        if let Some(v) = self.dissent {
            c.dissent = match v.as_str() {
                "challenge" => DissentPolicy::Challenge,
                "silent" => DissentPolicy::StaySilent,
                other => return Err(SimError::Config(format!("unknown dissent {other:?}"))),
            };
        }
        if let Some(v) = self.carry_exclusions {
            c.carry_exclusions = v;
        }
        if let Some(v) = self.operand_bits {
            c.operand_bits = v;
        }
        c.validate()?;
        Ok(c)
    }
}
