//! One computation request, end to end: fee escrow, role assignment,
//! result reporting, root comparison, dispute resolution, settlement and
//! slashing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actors::{
    assign_roles, produce_solution, verifier_stance, ActorError, ComputationService, DissentPolicy,
    RoleAssignment, ServicePool, Solution, Stance,
};
use crate::ledger::{
    Address, Amount, EscrowHandle, GasMeter, GasSchedule, Ledger, LedgerError, OpKind, Phase,
};
use crate::trace::{bisect, judge_step, Decision, Disagreement, TraceError, TraceTree, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComputationRequest {
    pub a: u64,
    pub b: u64,
    /// Number of verifiers.
    pub n: usize,
    pub fee: Amount,
    pub seed: u64,
}

impl ComputationRequest {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n == 0 {
            return Err(ProtocolError::NoVerifiers);
        }
        let participants = self.n as u64 + 1;
        if self.fee < participants {
            return Err(ProtocolError::FeeTooSmall {
                fee: self.fee,
                participants,
            });
        }
        self.a.checked_mul(self.b).ok_or(TraceError::Overflow {
            a: self.a,
            b: self.b,
        })?;
        Ok(())
    }

    pub fn product(&self) -> Option<u64> {
        self.a.checked_mul(self.b)
    }
}

/// `fee = base + per_step * steps + per_verifier * n`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeePolicy {
    pub base: Amount,
    pub per_step: Amount,
    pub per_verifier: Amount,
}

impl Default for FeePolicy {
    fn default() -> Self {
        Self {
            base: 20,
            per_step: 2,
            per_verifier: 10,
        }
    }
}

impl FeePolicy {
    pub fn fee(&self, steps: usize, n: usize) -> Amount {
        self.base + self.per_step * steps as Amount + self.per_verifier * n as Amount
    }

    /// Prices a multiplication by the size of its trace, raised if needed so
    /// that every participant's share is at least one unit.
    pub fn quote(&self, a: u64, b: u64, n: usize) -> Result<Amount, TraceError> {
        let steps = TraceTree::decompose(a, b)?.len();
        Ok(self.fee(steps, n).max(n as Amount + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub gas: GasSchedule,
    /// Burn the deposits of challengers who disputed a correct solution.
    pub slash_wrong_challengers: bool,
    pub dissent: DissentPolicy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            gas: GasSchedule::default(),
            slash_wrong_challengers: true,
            dissent: DissentPolicy::Challenge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    CorrectAccepted,
    CorrectChallenged,
    FalseAccepted,
    FalseChallenged,
    /// Too few eligible services; the fee was refunded.
    Aborted,
}

impl Case {
    pub const fn label(self) -> &'static str {
        match self {
            Case::CorrectAccepted => "correct-accepted",
            Case::CorrectChallenged => "correct-challenged",
            Case::FalseAccepted => "false-accepted",
            Case::FalseChallenged => "false-challenged",
            Case::Aborted => "aborted",
        }
    }
}

/// One bisection between the solver and a group of challengers that
/// committed to the same trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispute {
    pub challengers: Vec<Address>,
    pub disagreement: Disagreement,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub request: ComputationRequest,
    pub case: Case,
    pub roles: Option<RoleAssignment>,
    pub stances: Vec<(Address, Stance)>,
    pub accepted_value: Option<u64>,
    /// Whether the solver's reported root equals `a * b`.
    pub correct: bool,
    pub payouts: BTreeMap<Address, Amount>,
    pub slashed: BTreeSet<Address>,
    pub destroyed: Amount,
    pub refunded: Amount,
    pub gas: GasMeter,
    pub disputes: Vec<Dispute>,
}

impl Outcome {
    pub fn dispute(&self) -> Option<&Dispute> {
        self.disputes.first()
    }

    pub fn total_paid(&self) -> Amount {
        self.payouts.values().sum()
    }

    pub fn payout_to(&self, addr: Address) -> Amount {
        self.payouts.get(&addr).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("at least one verifier is required")]
    NoVerifiers,
    #[error("fee {fee} cannot give each of {participants} participants a share")]
    FeeTooSmall { fee: Amount, participants: u64 },
    #[error("role assignment is invalid: {0}")]
    InvalidRoles(&'static str),
    #[error("dispute verdicts disagree about the solver")]
    InconsistentVerdicts,
    #[error("a verdict was required to settle a challenged result")]
    MissingVerdict,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Actor(#[from] ActorError),
}

/// Splits `fee` into `n + 1` equal shares; the remainder goes to the solver
/// (index 0).
pub fn split_fee(fee: Amount, n: usize) -> Result<Vec<Amount>, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::NoVerifiers);
    }
    let parts = n as Amount + 1;
    if fee < parts {
        return Err(ProtocolError::FeeTooSmall {
            fee,
            participants: parts,
        });
    }
    let mut shares = vec![fee / parts; n + 1];
    shares[0] += fee % parts;
    Ok(shares)
}

/// Per-verifier stances and whether a dispute is needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub stances: Vec<Stance>,
    pub dispute_needed: bool,
}

pub fn compare_roots(
    solver_root: u64,
    verifiers: &[(&ComputationService, u64)],
    dissent: DissentPolicy,
) -> Comparison {
    let stances: Vec<Stance> = verifiers
        .iter()
        .map(|(v, root)| verifier_stance(v, *root, solver_root, dissent))
        .collect();
    let dispute_needed = stances.contains(&Stance::Challenge);
    Comparison {
        stances,
        dispute_needed,
    }
}

/// Payouts and slashes for every participant, indexed in role order
/// (solver first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement {
    pub payouts: Vec<Amount>,
    pub slashed: Vec<bool>,
}

/// Applies the fee-split rules. `verdict` is the judge's decision about the
/// solver and must be present whenever some verifier challenged.
pub fn settle(
    shares: &[Amount],
    stances: &[Stance],
    verdict: Option<Decision>,
    slash_wrong_challengers: bool,
) -> Result<Settlement, ProtocolError> {
    debug_assert_eq!(shares.len(), stances.len() + 1);
    let participants = shares.len();
    let challenger = |i: usize| i > 0 && stances[i - 1] == Stance::Challenge;
    let challengers: Vec<usize> = (1..participants).filter(|&i| challenger(i)).collect();

    if challengers.is_empty() {
        return Ok(Settlement {
            payouts: shares.to_vec(),
            slashed: vec![false; participants],
        });
    }

    let mut payouts = vec![0; participants];
    let mut slashed = vec![false; participants];
    match verdict.ok_or(ProtocolError::MissingVerdict)? {
        Decision::SolverCorrect => {
            // Solver collects the challengers' shares on top of its own.
            payouts[0] = shares[0];
            for i in 1..participants {
                if challenger(i) {
                    payouts[0] += shares[i];
                    slashed[i] = slash_wrong_challengers;
                } else {
                    payouts[i] = shares[i];
                }
            }
        }
        Decision::SolverFalse => {
            // Solver's and acceptors' shares are redistributed to challengers.
            let mut pot = 0;
            for i in 0..participants {
                if challenger(i) {
                    payouts[i] = shares[i];
                } else {
                    pot += shares[i];
                    slashed[i] = true;
                }
            }
            let count = challengers.len() as Amount;
            for &i in &challengers {
                payouts[i] += pot / count;
            }
            payouts[challengers[0]] += pot % count;
        }
    }
    Ok(Settlement { payouts, slashed })
}

/// Runs one request against a pool: draws roles with the request's seed and
/// executes the protocol. Starvation aborts the run and refunds the fee.
pub fn run_request(
    request: &ComputationRequest,
    pool: &ServicePool,
    ledger: &mut Ledger,
    user: Address,
    config: &ProtocolConfig,
) -> Result<Outcome, ProtocolError> {
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    execute(request, ledger, user, config, |ledger| {
        assign_roles(pool, ledger, request.n, &mut rng)
    })
}

/// Executes the protocol with a fixed role assignment.
pub fn run_with_roles(
    request: &ComputationRequest,
    roles: &RoleAssignment,
    ledger: &mut Ledger,
    user: Address,
    config: &ProtocolConfig,
) -> Result<Outcome, ProtocolError> {
    if roles.verifiers.len() != request.n {
        return Err(ProtocolError::InvalidRoles(
            "verifier count differs from request",
        ));
    }
    let distinct: BTreeSet<Address> = roles.participants().map(|s| s.address).collect();
    if distinct.len() != request.n + 1 {
        return Err(ProtocolError::InvalidRoles("participants are not distinct"));
    }
    if distinct.iter().any(|&a| ledger.is_excluded(a)) {
        return Err(ProtocolError::InvalidRoles(
            "an excluded service was assigned",
        ));
    }
    execute(request, ledger, user, config, |_| Ok(roles.clone()))
}

fn execute<F>(
    request: &ComputationRequest,
    ledger: &mut Ledger,
    user: Address,
    config: &ProtocolConfig,
    assign: F,
) -> Result<Outcome, ProtocolError>
where
    F: FnOnce(&Ledger) -> Result<RoleAssignment, ActorError>,
{
    request.validate()?;
    let schedule = &config.gas;
    let mut gas = GasMeter::new();

    // Request, oracle hop, escrow record.
    gas.meter(schedule, OpKind::TransactionBase, Phase::Request)?;
    gas.meter(schedule, OpKind::TransactionBase, Phase::Request)?;
    let escrow = ledger.escrow_fee(user, request.fee, Phase::Request)?;
    gas.meter(schedule, OpKind::StorageWrite, Phase::Request)?;

    let roles = match assign(ledger) {
        Ok(roles) => roles,
        Err(ActorError::Starvation { .. }) => {
            return abort(request, ledger, user, escrow, schedule, gas);
        }
        Err(e) => return Err(e.into()),
    };
    gas.meter_n(
        schedule,
        OpKind::RoleAssignment,
        Phase::Assignment,
        request.n as u64 + 1,
    )?;

    let mut solutions: Vec<Solution> = Vec::with_capacity(request.n + 1);
    for service in roles.participants() {
        solutions.push(produce_solution(service, request)?);
        gas.meter(schedule, OpKind::TransactionBase, Phase::Reporting)?;
        gas.meter(schedule, OpKind::StorageWrite, Phase::Reporting)?;
    }

    let solver_root = solutions[0].root;
    let reported: Vec<(&ComputationService, u64)> = roles
        .verifiers
        .iter()
        .zip(&solutions[1..])
        .map(|(v, s)| (v, s.root))
        .collect();
    let comparison = compare_roots(solver_root, &reported, config.dissent);
    gas.meter_n(
        schedule,
        OpKind::Comparison,
        Phase::Comparison,
        request.n as u64,
    )?;

    // Challengers that committed to the same trace share one bisection.
    let mut groups: BTreeMap<[u8; 32], Vec<usize>> = BTreeMap::new();
    for (i, stance) in comparison.stances.iter().enumerate() {
        if *stance == Stance::Challenge {
            groups
                .entry(solutions[i + 1].trace.root_hash().0)
                .or_default()
                .push(i + 1);
        }
    }
    let mut group_list: Vec<Vec<usize>> = groups.into_values().collect();
    group_list.sort_by_key(|g| g[0]);

    let mut disputes = Vec::with_capacity(group_list.len());
    let mut wrong_challengers: BTreeSet<usize> = BTreeSet::new();
    for group in group_list {
        let challenger_trace = &solutions[group[0]].trace;
        let disagreement = bisect(&solutions[0].trace, challenger_trace)?;
        gas.meter_n(
            schedule,
            OpKind::DisputeStep,
            Phase::Dispute,
            u64::from(disagreement.judge_queries),
        )?;
        gas.meter(schedule, OpKind::JudgeInvocation, Phase::Dispute)?;
        let verdict = judge_step(&disagreement);
        if !verdict.challenger_correct(&disagreement) {
            wrong_challengers.extend(group.iter().copied());
        }
        disputes.push(Dispute {
            challengers: group
                .iter()
                .map(|&i| participant(&roles, i).address)
                .collect(),
            disagreement,
            verdict,
        });
    }
    let decision = match disputes.first() {
        None => None,
        Some(first) => {
            let d = first.verdict.decision;
            if disputes.iter().any(|x| x.verdict.decision != d) {
                return Err(ProtocolError::InconsistentVerdicts);
            }
            if d == Decision::SolverFalse && !wrong_challengers.is_empty() {
                return Err(ProtocolError::InconsistentVerdicts);
            }
            Some(d)
        }
    };

    let shares = split_fee(request.fee, request.n)?;
    let settlement = settle(
        &shares,
        &comparison.stances,
        decision,
        config.slash_wrong_challengers,
    )?;

    let mut payouts = BTreeMap::new();
    for (i, &amount) in settlement.payouts.iter().enumerate() {
        let addr = participant(&roles, i).address;
        payouts.insert(addr, amount);
        if amount > 0 {
            ledger.payout(escrow, addr, amount, Phase::Settlement)?;
            gas.meter(schedule, OpKind::TransactionBase, Phase::Settlement)?;
        }
    }
    ledger.close_escrow(escrow)?;

    let mut slashed = BTreeSet::new();
    let mut destroyed = 0;
    for (i, &slash) in settlement.slashed.iter().enumerate() {
        if slash {
            let addr = participant(&roles, i).address;
            destroyed += ledger.slash(addr, Phase::Slashing)?;
            slashed.insert(addr);
            gas.meter(schedule, OpKind::TransactionBase, Phase::Slashing)?;
        }
    }

    let product = request.a * request.b;
    let correct = solver_root == product;
    let case = match decision {
        None if correct => Case::CorrectAccepted,
        None => Case::FalseAccepted,
        Some(Decision::SolverCorrect) => Case::CorrectChallenged,
        Some(Decision::SolverFalse) => Case::FalseChallenged,
    };
    let accepted_value = match case {
        Case::FalseChallenged | Case::Aborted => None,
        _ => Some(solver_root),
    };
    let stances = roles
        .verifiers
        .iter()
        .zip(&comparison.stances)
        .map(|(v, s)| (v.address, *s))
        .collect();

    Ok(Outcome {
        request: *request,
        case,
        roles: Some(roles),
        stances,
        accepted_value,
        correct,
        payouts,
        slashed,
        destroyed,
        refunded: 0,
        gas,
        disputes,
    })
}

fn participant(roles: &RoleAssignment, i: usize) -> &ComputationService {
    if i == 0 {
        &roles.solver
    } else {
        &roles.verifiers[i - 1]
    }
}

fn abort(
    request: &ComputationRequest,
    ledger: &mut Ledger,
    user: Address,
    escrow: EscrowHandle,
    schedule: &GasSchedule,
    mut gas: GasMeter,
) -> Result<Outcome, ProtocolError> {
    let held = ledger.escrow_balance(escrow)?;
    ledger.payout(escrow, user, held, Phase::Abort)?;
    gas.meter(schedule, OpKind::TransactionBase, Phase::Abort)?;
    ledger.close_escrow(escrow)?;
    Ok(Outcome {
        request: *request,
        case: Case::Aborted,
        roles: None,
        stances: Vec::new(),
        accepted_value: None,
        correct: false,
        payouts: BTreeMap::new(),
        slashed: BTreeSet::new(),
        destroyed: 0,
        refunded: held,
        gas,
        disputes: Vec::new(),
    })
}
