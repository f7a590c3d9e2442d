//! Simulated chain state for a single protocol run.
//!
//! The ledger tracks currency (balances, deposits, fee escrow) and gas
//! separately. Gas is a pure complexity meter and is never debited from
//! balances. Every currency movement is recorded as a [`LedgerEvent`] and
//! followed by a full conservation check:
//!
//! `Σ balances + Σ escrow + Σ live deposits + burned == minted`

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use thiserror::Error;

/// Currency amount in integer units.
pub type Amount = u64;

/// Gas amount in abstract units.
pub type Gas = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(u32);

impl Address {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub address: Address,
    pub balance: Amount,
    pub deposit: Amount,
    pub excluded: bool,
}

/// Protocol phase a ledger event or gas charge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Setup,
    Request,
    Assignment,
    Reporting,
    Comparison,
    Dispute,
    Settlement,
    Slashing,
    Abort,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::Setup,
        Phase::Request,
        Phase::Assignment,
        Phase::Reporting,
        Phase::Comparison,
        Phase::Dispute,
        Phase::Settlement,
        Phase::Slashing,
        Phase::Abort,
    ];

    pub const fn label(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Request => "request",
            Phase::Assignment => "assignment",
            Phase::Reporting => "reporting",
            Phase::Comparison => "comparison",
            Phase::Dispute => "dispute",
            Phase::Settlement => "settlement",
            Phase::Slashing => "slashing",
            Phase::Abort => "abort",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Kinds of metered operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    TransactionBase,
    StorageWrite,
    Comparison,
    JudgeInvocation,
    DisputeStep,
    RoleAssignment,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::TransactionBase,
        OpKind::StorageWrite,
        OpKind::Comparison,
        OpKind::JudgeInvocation,
        OpKind::DisputeStep,
        OpKind::RoleAssignment,
    ];

    pub const fn key(self) -> &'static str {
        match self {
            OpKind::TransactionBase => "transaction_base",
            OpKind::StorageWrite => "storage_write",
            OpKind::Comparison => "comparison",
            OpKind::JudgeInvocation => "judge_invocation",
            OpKind::DisputeStep => "dispute_step",
            OpKind::RoleAssignment => "role_assignment",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }
}

/// Gas cost per metered operation kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GasSchedule {
    costs: BTreeMap<OpKind, Gas>,
}

impl Default for GasSchedule {
    fn default() -> Self {
        let mut costs = BTreeMap::new();
        costs.insert(OpKind::TransactionBase, 21);
        costs.insert(OpKind::StorageWrite, 20);
        costs.insert(OpKind::Comparison, 3);
        costs.insert(OpKind::JudgeInvocation, 50);
        costs.insert(OpKind::DisputeStep, 30);
        costs.insert(OpKind::RoleAssignment, 10);
        Self { costs }
    }
}

impl GasSchedule {
    /// Builds a schedule from explicit entries. Kinds left out are unknown to
    /// the schedule and fail when metered.
    pub fn from_entries<I>(entries: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (OpKind, Gas)>,
    {
        let mut costs = BTreeMap::new();
        for (kind, cost) in entries {
            if cost == 0 {
                return Err(LedgerError::ZeroGasCost(kind));
            }
            costs.insert(kind, cost);
        }
        Ok(Self { costs })
    }

    /// Overrides one cost. Zero costs are rejected.
    pub fn set(&mut self, kind: OpKind, cost: Gas) -> Result<(), LedgerError> {
        if cost == 0 {
            return Err(LedgerError::ZeroGasCost(kind));
        }
        self.costs.insert(kind, cost);
        Ok(())
    }

    pub fn cost(&self, kind: OpKind) -> Option<Gas> {
        self.costs.get(&kind).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (OpKind, Gas)> + '_ {
        self.costs.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GasMeter {
    total: Gas,
    per_phase: BTreeMap<Phase, Gas>,
}

impl GasMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges the cost of `kind` to `phase` and returns it.
    pub fn meter(
        &mut self,
        schedule: &GasSchedule,
        kind: OpKind,
        phase: Phase,
    ) -> Result<Gas, LedgerError> {
        let cost = schedule
            .cost(kind)
            .ok_or(LedgerError::UnknownOpKind(kind))?;
        self.total += cost;
        *self.per_phase.entry(phase).or_insert(0) += cost;
        Ok(cost)
    }

    /// Charges `count` repetitions of `kind`.
    pub fn meter_n(
        &mut self,
        schedule: &GasSchedule,
        kind: OpKind,
        phase: Phase,
        count: u64,
    ) -> Result<Gas, LedgerError> {
        let mut charged = 0;
        for _ in 0..count {
            charged += self.meter(schedule, kind, phase)?;
        }
        Ok(charged)
    }

    pub fn total(&self) -> Gas {
        self.total
    }

    pub fn phase(&self, phase: Phase) -> Gas {
        self.per_phase.get(&phase).copied().unwrap_or(0)
    }

    pub fn per_phase(&self) -> impl Iterator<Item = (Phase, Gas)> + '_ {
        self.per_phase.iter().map(|(p, g)| (*p, *g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Transfer,
    Deposit,
    Slash,
    Escrow,
    Payout,
}

impl EventKind {
    pub const fn label(self) -> &'static str {
        match self {
            EventKind::Transfer => "transfer",
            EventKind::Deposit => "deposit",
            EventKind::Slash => "slash",
            EventKind::Escrow => "escrow",
            EventKind::Payout => "payout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEvent {
    pub kind: EventKind,
    pub from: Option<Address>,
    pub to: Option<Address>,
    pub amount: Amount,
    pub phase: Phase,
}

impl fmt::Display for LedgerEvent {
    /// `phase,kind,from,to,amount`; a missing party prints as `-`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let party = |a: Option<Address>| match a {
            Some(a) => alloc::format!("{a}"),
            None => String::from("-"),
        };
        write!(
            f,
            "{},{},{},{},{}",
            self.phase,
            self.kind.label(),
            party(self.from),
            party(self.to),
            self.amount
        )
    }
}

/// Non-fatal anomalies, kept apart from the currency event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    DoubleSlash(Address),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EscrowHandle(u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("deposit {given} is below the minimum of {minimum}")]
    DepositBelowMinimum { given: Amount, minimum: Amount },
    #[error("account {0} does not exist")]
    UnknownAccount(Address),
    #[error("account {addr} holds {balance}, cannot escrow {fee}")]
    InsufficientBalance {
        addr: Address,
        balance: Amount,
        fee: Amount,
    },
    #[error("escrow holds {held}, cannot pay out {requested}")]
    EscrowOverdraw { held: Amount, requested: Amount },
    #[error("unknown escrow handle")]
    UnknownEscrow,
    #[error("escrow still holds {0} at close")]
    EscrowNotEmpty(Amount),
    #[error("operation kind {0:?} has no entry in the gas schedule")]
    UnknownOpKind(OpKind),
    #[error("gas cost for {0:?} must be positive")]
    ZeroGasCost(OpKind),
    #[error("currency amounts must be positive")]
    ZeroAmount,
    #[error("conservation violated: holdings {holdings} != minted {minted}")]
    ConservationBreach { holdings: u128, minted: u128 },
    #[error("arithmetic overflow in currency accounting")]
    Overflow,
}

/// Account state, escrow, and the append-only event log for one run.
#[derive(Debug, Clone)]
pub struct Ledger {
    min_deposit: Amount,
    accounts: Vec<Account>,
    escrows: Vec<Amount>,
    minted: u128,
    burned: u128,
    events: Vec<LedgerEvent>,
    warnings: Vec<Warning>,
}

impl Ledger {
    pub fn new(min_deposit: Amount) -> Self {
        Self {
            min_deposit,
            accounts: Vec::new(),
            escrows: Vec::new(),
            minted: 0,
            burned: 0,
            events: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn min_deposit(&self) -> Amount {
        self.min_deposit
    }

    /// Opens a service account staking `deposit`.
    pub fn open_account(&mut self, deposit: Amount) -> Result<Address, LedgerError> {
        if deposit < self.min_deposit || deposit == 0 {
            return Err(LedgerError::DepositBelowMinimum {
                given: deposit,
                minimum: self.min_deposit.max(1),
            });
        }
        let address = self.push_account(0, deposit);
        self.minted += u128::from(deposit);
        self.record(
            EventKind::Deposit,
            None,
            Some(address),
            deposit,
            Phase::Setup,
        )?;
        Ok(address)
    }

    /// Opens a user account funded with `balance` and no deposit.
    pub fn open_user(&mut self, balance: Amount) -> Result<Address, LedgerError> {
        let address = self.push_account(balance, 0);
        if balance > 0 {
            self.minted += u128::from(balance);
            self.record(
                EventKind::Transfer,
                None,
                Some(address),
                balance,
                Phase::Setup,
            )?;
        }
        Ok(address)
    }

    fn push_account(&mut self, balance: Amount, deposit: Amount) -> Address {
        let address = Address(self.accounts.len() as u32);
        self.accounts.push(Account {
            address,
            balance,
            deposit,
            excluded: false,
        });
        address
    }

    pub fn account(&self, addr: Address) -> Result<&Account, LedgerError> {
        self.accounts
            .get(addr.index())
            .ok_or(LedgerError::UnknownAccount(addr))
    }

    fn account_mut(&mut self, addr: Address) -> Result<&mut Account, LedgerError> {
        self.accounts
            .get_mut(addr.index())
            .ok_or(LedgerError::UnknownAccount(addr))
    }

    pub fn accounts(&self) -> &[Account] {
        &self.accounts
    }

    pub fn is_excluded(&self, addr: Address) -> bool {
        self.accounts.get(addr.index()).is_some_and(|a| a.excluded)
    }

    /// Moves `fee` from the user's balance into a fresh escrow.
    pub fn escrow_fee(
        &mut self,
        user: Address,
        fee: Amount,
        phase: Phase,
    ) -> Result<EscrowHandle, LedgerError> {
        if fee == 0 {
            return Err(LedgerError::ZeroAmount);
        }
        let account = self.account_mut(user)?;
        if account.balance < fee {
            return Err(LedgerError::InsufficientBalance {
                addr: user,
                balance: account.balance,
                fee,
            });
        }
        account.balance -= fee;
        let handle = EscrowHandle(self.escrows.len() as u32);
        self.escrows.push(fee);
        self.record(EventKind::Escrow, Some(user), None, fee, phase)?;
        Ok(handle)
    }

    pub fn escrow_balance(&self, handle: EscrowHandle) -> Result<Amount, LedgerError> {
        self.escrows
            .get(handle.0 as usize)
            .copied()
            .ok_or(LedgerError::UnknownEscrow)
    }

    /// Pays `amount` out of escrow. Excluded accounts may still be paid.
    /// A zero amount is a no-op and logs nothing.
    pub fn payout(
        &mut self,
        handle: EscrowHandle,
        to: Address,
        amount: Amount,
        phase: Phase,
    ) -> Result<(), LedgerError> {
        self.account(to)?;
        let held = self.escrow_balance(handle)?;
        if amount > held {
            return Err(LedgerError::EscrowOverdraw {
                held,
                requested: amount,
            });
        }
        if amount == 0 {
            return Ok(());
        }
        self.escrows[handle.0 as usize] = held - amount;
        let account = self.account_mut(to)?;
        account.balance = account
            .balance
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        self.record(EventKind::Payout, None, Some(to), amount, phase)
    }

    /// Fails unless the escrow has been fully disbursed.
    pub fn close_escrow(&self, handle: EscrowHandle) -> Result<(), LedgerError> {
        match self.escrow_balance(handle)? {
            0 => Ok(()),
            left => Err(LedgerError::EscrowNotEmpty(left)),
        }
    }

    /// Burns the deposit and excludes the account. Slashing an already
    /// excluded account is a no-op that records a warning. Returns the
    /// amount destroyed.
    pub fn slash(&mut self, addr: Address, phase: Phase) -> Result<Amount, LedgerError> {
        let account = self.account_mut(addr)?;
        if account.excluded {
            self.warnings.push(Warning::DoubleSlash(addr));
            return Ok(0);
        }
        let destroyed = account.deposit;
        account.deposit = 0;
        account.excluded = true;
        self.burned += u128::from(destroyed);
        if destroyed > 0 {
            self.record(EventKind::Slash, Some(addr), None, destroyed, phase)?;
        }
        Ok(destroyed)
    }

    pub fn burned(&self) -> u128 {
        self.burned
    }

    pub fn minted(&self) -> u128 {
        self.minted
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Audit dump, one `phase,kind,from,to,amount` line per event.
    pub fn dump_events(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            let _ = writeln!(out, "{event}");
        }
        out
    }

    /// Recomputes every holding from scratch and compares against the
    /// minted total.
    pub fn check_conservation(&self) -> Result<(), LedgerError> {
        let balances: u128 = self.accounts.iter().map(|a| u128::from(a.balance)).sum();
        let deposits: u128 = self.accounts.iter().map(|a| u128::from(a.deposit)).sum();
        let escrow: u128 = self.escrows.iter().map(|&e| u128::from(e)).sum();
        let holdings = balances + deposits + escrow + self.burned;
        if holdings == self.minted {
            Ok(())
        } else {
            Err(LedgerError::ConservationBreach {
                holdings,
                minted: self.minted,
            })
        }
    }

    fn record(
        &mut self,
        kind: EventKind,
        from: Option<Address>,
        to: Option<Address>,
        amount: Amount,
        phase: Phase,
    ) -> Result<(), LedgerError> {
        debug_assert!(amount > 0);
        self.events.push(LedgerEvent {
            kind,
            from,
            to,
            amount,
            phase,
        });
        self.check_conservation()
    }
}
