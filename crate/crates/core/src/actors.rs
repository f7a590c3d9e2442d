//! Computation services, the pool they are drawn from, and the arbiter's
//! random role assignment.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ledger::{Address, Amount, Ledger, LedgerError};
use crate::protocol::ComputationRequest;
use crate::trace::{CorruptionSite, TraceError, TraceTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BehaviorKind {
    Honest,
    /// Member of the single coalition that reports one agreed wrong trace.
    CollusiveDishonest,
}

/// Where the coalition plants its false value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SitePolicy {
    RootOnly,
    UniformInternal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Behavior {
    pub kind: BehaviorKind,
    pub site_policy: SitePolicy,
}

impl Behavior {
    pub const fn honest() -> Self {
        Self {
            kind: BehaviorKind::Honest,
            site_policy: SitePolicy::UniformInternal,
        }
    }

    pub const fn colluding(site_policy: SitePolicy) -> Self {
        Self {
            kind: BehaviorKind::CollusiveDishonest,
            site_policy,
        }
    }

    pub fn is_honest(&self) -> bool {
        self.kind == BehaviorKind::Honest
    }
}

/// How a dishonest verifier reacts when its own root differs from the
/// solver's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DissentPolicy {
    /// Report the differing value and challenge.
    #[default]
    Challenge,
    /// Keep quiet and accept the solver's root.
    StaySilent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputationService {
    pub address: Address,
    pub behavior: Behavior,
}

#[derive(Debug, Clone)]
pub struct ServicePool {
    services: Vec<ComputationService>,
    prior_p: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActorError {
    #[error("pool needs at least 2 services, got {0}")]
    PoolTooSmall(usize),
    #[error("prior probability {0} is outside [0, 1]")]
    InvalidPrior(f64),
    #[error("need {needed} eligible services, only {available} are not excluded")]
    Starvation { needed: usize, available: usize },
    #[error("at least one verifier is required")]
    NoVerifiers,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl ServicePool {
    /// Wraps existing services, e.g. a hand-built pool in tests.
    pub fn from_services(services: Vec<ComputationService>, prior_p: f64) -> Self {
        Self { services, prior_p }
    }

    pub fn services(&self) -> &[ComputationService] {
        &self.services
    }

    pub fn prior_p(&self) -> f64 {
        self.prior_p
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn dishonest_count(&self) -> usize {
        self.services
            .iter()
            .filter(|s| !s.behavior.is_honest())
            .count()
    }

    pub fn get(&self, addr: Address) -> Option<&ComputationService> {
        self.services.iter().find(|s| s.address == addr)
    }
}

/// Opens `size` service accounts, each independently dishonest with
/// probability `prior_p`.
pub fn populate_pool<R: Rng + ?Sized>(
    ledger: &mut Ledger,
    size: usize,
    prior_p: f64,
    deposit: Amount,
    site_policy: SitePolicy,
    rng: &mut R,
) -> Result<ServicePool, ActorError> {
    if size < 2 {
        return Err(ActorError::PoolTooSmall(size));
    }
    if !(0.0..=1.0).contains(&prior_p) {
        return Err(ActorError::InvalidPrior(prior_p));
    }
    let mut services = Vec::with_capacity(size);
    for _ in 0..size {
        let behavior = if rng.random_bool(prior_p) {
            Behavior::colluding(site_policy)
        } else {
            Behavior::honest()
        };
        let address = ledger.open_account(deposit)?;
        services.push(ComputationService { address, behavior });
    }
    Ok(ServicePool { services, prior_p })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleAssignment {
    pub solver: ComputationService,
    pub verifiers: Vec<ComputationService>,
}

impl RoleAssignment {
    /// Solver first, then verifiers in role order.
    pub fn participants(&self) -> impl Iterator<Item = &ComputationService> {
        core::iter::once(&self.solver).chain(&self.verifiers)
    }
}

/// Draws `n + 1` distinct non-excluded services uniformly without
/// replacement. The first drawn becomes the solver.
pub fn assign_roles<R: Rng + ?Sized>(
    pool: &ServicePool,
    ledger: &Ledger,
    n: usize,
    rng: &mut R,
) -> Result<RoleAssignment, ActorError> {
    if n == 0 {
        return Err(ActorError::NoVerifiers);
    }
    let mut eligible: Vec<ComputationService> = pool
        .services
        .iter()
        .filter(|s| !ledger.is_excluded(s.address))
        .copied()
        .collect();
    if eligible.len() < n + 1 {
        return Err(ActorError::Starvation {
            needed: n + 1,
            available: eligible.len(),
        });
    }
    let (drawn, _) = eligible.partial_shuffle(rng, n + 1);
    Ok(RoleAssignment {
        solver: drawn[0],
        verifiers: drawn[1..].to_vec(),
    })
}

/// A reported result: the root value plus the committed trace behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub root: u64,
    pub trace: TraceTree,
}

/// Seed shared by every colluder for one request, so they all pick the same
/// corruption site.
fn coalition_seed(request: &ComputationRequest) -> u64 {
    let mut x = request.seed ^ 0x9e37_79b9_7f4a_7c15;
    for word in [request.a, request.b] {
        x = (x ^ word).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 31;
    }
    x
}

/// Computes the service's reported solution. Colluders forge the honest
/// trace at a site derived only from the request; a trace with no internal
/// step (`b == 0`) cannot be forged and is reported honestly.
pub fn produce_solution(
    service: &ComputationService,
    request: &ComputationRequest,
) -> Result<Solution, TraceError> {
    let honest = TraceTree::decompose(request.a, request.b)?;
    let trace = match service.behavior.kind {
        BehaviorKind::Honest => honest,
        BehaviorKind::CollusiveDishonest => {
            let internal = honest.internal_steps();
            if internal.is_empty() {
                honest
            } else {
                let site = match service.behavior.site_policy {
                    SitePolicy::RootOnly => CorruptionSite::Root,
                    SitePolicy::UniformInternal => {
                        let mut rng = ChaCha8Rng::seed_from_u64(coalition_seed(request));
                        CorruptionSite::Step(internal[rng.random_range(0..internal.len())])
                    }
                };
                honest.corrupt(site)?
            }
        }
    };
    Ok(Solution {
        root: trace.root_value(),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stance {
    Accept,
    Challenge,
}

/// A verifier challenges iff its own root differs from the solver's, unless
/// it is dishonest and configured to stay silent.
pub fn verifier_stance(
    verifier: &ComputationService,
    own_root: u64,
    solver_root: u64,
    dissent: DissentPolicy,
) -> Stance {
    if own_root == solver_root {
        return Stance::Accept;
    }
    match (verifier.behavior.kind, dissent) {
        (BehaviorKind::CollusiveDishonest, DissentPolicy::StaySilent) => Stance::Accept,
        _ => Stance::Challenge,
    }
}
