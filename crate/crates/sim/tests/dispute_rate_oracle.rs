//! Brute-force oracle: enumerate every honest/dishonest assignment of the
//! solver and `n` verifiers, run the protocol on each, and weight the
//! observed outcome by the assignment's probability under prior `p`.

use vericomp::harness::run_cell;
use vericomp::ExperimentConfig;
use vericomp_core::actors::{Behavior, ComputationService, RoleAssignment, SitePolicy};
use vericomp_core::ledger::Ledger;
use vericomp_core::protocol::{run_with_roles, Case, ComputationRequest, ProtocolConfig};
use vericomp_core::FeePolicy;

struct Oracle {
    dispute: f64,
    false_accept: f64,
}

fn enumerate(p: f64, n: usize) -> Oracle {
    let (a, b) = (40_503, 2_917);
    let fee = FeePolicy::default().quote(a, b, n).unwrap();
    let mut dispute = 0.0;
    let mut false_accept = 0.0;
    for mask in 0..1u32 << (n + 1) {
        let dishonest: Vec<bool> = (0..=n).map(|i| mask >> i & 1 == 1).collect();
        let k = dishonest.iter().filter(|&&d| d).count() as i32;
        let weight = p.powi(k) * (1.0 - p).powi(n as i32 + 1 - k);

        let mut ledger = Ledger::new(1);
        let user = ledger.open_user(fee).unwrap();
        let services: Vec<_> = dishonest
            .iter()
            .map(|&d| ComputationService {
                address: ledger.open_account(100).unwrap(),
                behavior: if d {
                    Behavior::colluding(SitePolicy::UniformInternal)
                } else {
                    Behavior::honest()
                },
            })
            .collect();
        let roles = RoleAssignment {
            solver: services[0],
            verifiers: services[1..].to_vec(),
        };
        let request = ComputationRequest {
            a,
            b,
            n,
            fee,
            seed: u64::from(mask),
        };
        let out = run_with_roles(
            &request,
            &roles,
            &mut ledger,
            user,
            &ProtocolConfig::default(),
        )
        .unwrap();
        if !out.disputes.is_empty() {
            dispute += weight;
        }
        if out.case == Case::FalseAccepted {
            false_accept += weight;
        }
    }
    Oracle {
        dispute,
        false_accept,
    }
}

/// Binomial standard error bound: |rate - expected| <= 4 sigma.
fn close(rate: f64, expected: f64, runs: usize) -> bool {
    let sigma = (expected * (1.0 - expected) / runs as f64).sqrt();
    (rate - expected).abs() <= 4.0 * sigma.max(1.0 / runs as f64)
}

#[test]
fn simulated_rates_match_enumeration() {
    let mut config = ExperimentConfig::with_seed(123);
    config.runs_per_cell = 2000;
    for p in [0.3, 0.5, 0.7] {
        for n in 1..=3 {
            let oracle = enumerate(p, n);
            let cell = run_cell(&config, p, n).unwrap();
            assert!(
                close(cell.dispute_rate, oracle.dispute, cell.runs),
                "p={p} n={n}: dispute {} vs oracle {}",
                cell.dispute_rate,
                oracle.dispute
            );
            assert!(
                close(cell.false_accept_rate, oracle.false_accept, cell.runs),
                "p={p} n={n}: false accept {} vs oracle {}",
                cell.false_accept_rate,
                oracle.false_accept
            );
        }
    }
}

#[test]
fn enumeration_agrees_with_closed_forms() {
    for p in [0.3, 0.5, 0.7] {
        for n in 1..=3 {
            let o = enumerate(p, n);
            let all = p.powi(n as i32 + 1);
            let none = (1.0 - p).powi(n as i32 + 1);
            assert!((o.false_accept - all).abs() < 1e-12);
            assert!((o.dispute - (1.0 - all - none)).abs() < 1e-12);
        }
    }
}
