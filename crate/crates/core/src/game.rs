//! Two-player solver/verifier game derived from the settlement rules.
//!
//! Every matrix entry is produced by [`settle`], the same function the
//! protocol uses to pay out a run, with verifiers playing uniformly.
//! Slashed deposits enter as negative payoffs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::actors::Stance;
use crate::ledger::Amount;
use crate::protocol::{settle, split_fee, ProtocolError};
use crate::trace::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverStrategy {
    Correct,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VerifierStrategy {
    Challenge,
    Accept,
}

impl SolverStrategy {
    pub const ALL: [SolverStrategy; 2] = [SolverStrategy::Correct, SolverStrategy::False];
}

impl VerifierStrategy {
    pub const ALL: [VerifierStrategy; 2] = [VerifierStrategy::Challenge, VerifierStrategy::Accept];
}

impl fmt::Display for SolverStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStrategy::Correct => "correct",
            SolverStrategy::False => "false",
        })
    }
}

impl fmt::Display for VerifierStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifierStrategy::Challenge => "challenge",
            VerifierStrategy::Accept => "accept",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyProfile {
    pub solver: SolverStrategy,
    pub verifier: VerifierStrategy,
}

impl StrategyProfile {
    pub const fn new(solver: SolverStrategy, verifier: VerifierStrategy) -> Self {
        Self { solver, verifier }
    }

    pub fn all() -> impl Iterator<Item = StrategyProfile> {
        SolverStrategy::ALL.into_iter().flat_map(|s| {
            VerifierStrategy::ALL
                .into_iter()
                .map(move |v| StrategyProfile::new(s, v))
        })
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.solver, self.verifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Payoff {
    pub solver: i64,
    pub verifier: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameParams {
    pub fee: Amount,
    pub n: usize,
    pub deposit: Amount,
    pub slash_wrong_challengers: bool,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            fee: 60,
            n: 2,
            deposit: 100,
            slash_wrong_challengers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("values and probabilities differ in length ({values} vs {probs})")]
    LengthMismatch { values: usize, probs: usize },
    #[error("probability {0} is negative or not finite")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("amount does not fit a signed payoff")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayoffMatrix {
    // [solver][verifier] in ALL order
    cells: [[Payoff; 2]; 2],
}

fn solver_idx(s: SolverStrategy) -> usize {
    match s {
        SolverStrategy::Correct => 0,
        SolverStrategy::False => 1,
    }
}

fn verifier_idx(v: VerifierStrategy) -> usize {
    match v {
        VerifierStrategy::Challenge => 0,
        VerifierStrategy::Accept => 1,
    }
}

impl PayoffMatrix {
    /// Hand-built matrix, for controls and tests. `rows[s][v]` follows
    /// `SolverStrategy::ALL` × `VerifierStrategy::ALL`.
    pub const fn from_cells(cells: [[Payoff; 2]; 2]) -> Self {
        Self { cells }
    }

    pub fn get(&self, profile: StrategyProfile) -> Payoff {
        self.cells[solver_idx(profile.solver)][verifier_idx(profile.verifier)]
    }

    /// Expected payoff to a verifier who challenges exactly the false
    /// solutions, when the solver is false with probability `p_false`.
    pub fn faithful_verifier_utility(&self, p_false: f64) -> Result<f64, GameError> {
        let correct = self.get(StrategyProfile::new(
            SolverStrategy::Correct,
            VerifierStrategy::Accept,
        ));
        let false_ = self.get(StrategyProfile::new(
            SolverStrategy::False,
            VerifierStrategy::Challenge,
        ));
        expected_utility(
            &[correct.verifier as f64, false_.verifier as f64],
            &[1.0 - p_false, p_false],
        )
    }

    /// Expected payoff to a verifier committed to one pure strategy.
    pub fn verifier_utility(
        &self,
        strategy: VerifierStrategy,
        p_false: f64,
    ) -> Result<f64, GameError> {
        let c = self.get(StrategyProfile::new(SolverStrategy::Correct, strategy));
        let f = self.get(StrategyProfile::new(SolverStrategy::False, strategy));
        expected_utility(
            &[c.verifier as f64, f.verifier as f64],
            &[1.0 - p_false, p_false],
        )
    }
}

fn signed(x: Amount) -> Result<i64, GameError> {
    i64::try_from(x).map_err(|_| GameError::Overflow)
}

/// Builds the matrix by settling each uniform profile. The verifier payoff
/// is that of the first verifier in role order.
pub fn build_matrix(params: &GameParams) -> Result<PayoffMatrix, GameError> {
    let shares = split_fee(params.fee, params.n)?;
    let deposit = signed(params.deposit)?;
    let mut cells = [[Payoff::default(); 2]; 2];
    for profile in StrategyProfile::all() {
        let stance = match profile.verifier {
            VerifierStrategy::Challenge => Stance::Challenge,
            VerifierStrategy::Accept => Stance::Accept,
        };
        let stances = vec![stance; params.n];
        let verdict = match (profile.verifier, profile.solver) {
            (VerifierStrategy::Accept, _) => None,
            (VerifierStrategy::Challenge, SolverStrategy::Correct) => Some(Decision::SolverCorrect),
            (VerifierStrategy::Challenge, SolverStrategy::False) => Some(Decision::SolverFalse),
        };
        let s = settle(&shares, &stances, verdict, params.slash_wrong_challengers)?;
        let value = |i: usize| -> Result<i64, GameError> {
            Ok(signed(s.payouts[i])? - if s.slashed[i] { deposit } else { 0 })
        };
        cells[solver_idx(profile.solver)][verifier_idx(profile.verifier)] = Payoff {
            solver: value(0)?,
            verifier: value(1)?,
        };
    }
    Ok(PayoffMatrix { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dominance {
    pub solver: Option<SolverStrategy>,
    pub verifier: Option<VerifierStrategy>,
}

/// A strategy dominates if it is at least as good against every opponent
/// strategy and strictly better against at least one.
pub fn dominant_strategies(m: &PayoffMatrix) -> Dominance {
    let solver = SolverStrategy::ALL.into_iter().find(|&s| {
        SolverStrategy::ALL
            .into_iter()
            .filter(|&o| o != s)
            .all(|o| {
                let diffs = VerifierStrategy::ALL.map(|v| {
                    m.get(StrategyProfile::new(s, v)).solver
                        - m.get(StrategyProfile::new(o, v)).solver
                });
                diffs.iter().all(|&d| d >= 0) && diffs.iter().any(|&d| d > 0)
            })
    });
    let verifier = VerifierStrategy::ALL.into_iter().find(|&v| {
        VerifierStrategy::ALL
            .into_iter()
            .filter(|&o| o != v)
            .all(|o| {
                let diffs = SolverStrategy::ALL.map(|s| {
                    m.get(StrategyProfile::new(s, v)).verifier
                        - m.get(StrategyProfile::new(s, o)).verifier
                });
                diffs.iter().all(|&d| d >= 0) && diffs.iter().any(|&d| d > 0)
            })
    });
    Dominance { solver, verifier }
}

/// Pure profiles where neither player gains strictly by deviating alone.
pub fn nash_equilibria(m: &PayoffMatrix) -> Vec<StrategyProfile> {
    StrategyProfile::all()
        .filter(|p| {
            let here = m.get(*p);
            let solver_ok = SolverStrategy::ALL
                .into_iter()
                .all(|s| m.get(StrategyProfile::new(s, p.verifier)).solver <= here.solver);
            let verifier_ok = VerifierStrategy::ALL
                .into_iter()
                .all(|v| m.get(StrategyProfile::new(p.solver, v)).verifier <= here.verifier);
            solver_ok && verifier_ok
        })
        .collect()
}

/// Profiles for which no other profile is strictly better for both players.
pub fn pareto_efficient(m: &PayoffMatrix) -> Vec<StrategyProfile> {
    StrategyProfile::all()
        .filter(|p| {
            let here = m.get(*p);
            !StrategyProfile::all().any(|q| {
                let there = m.get(q);
                there.solver > here.solver && there.verifier > here.verifier
            })
        })
        .collect()
}

/// `Σ p_i v_i`. Probabilities must be non-negative and sum to one within
/// `1e-9`.
pub fn expected_utility(values: &[f64], probs: &[f64]) -> Result<f64, GameError> {
    if values.len() != probs.len() {
        return Err(GameError::LengthMismatch {
            values: values.len(),
            probs: probs.len(),
        });
    }
    let mut total = 0.0;
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(GameError::InvalidProbability(p));
        }
        total += p;
    }
    if !(total - 1.0 <= 1e-9 && 1.0 - total <= 1e-9) {
        return Err(GameError::NotNormalized(total));
    }
    Ok(values.iter().zip(probs).map(|(v, p)| v * p).sum())
}
