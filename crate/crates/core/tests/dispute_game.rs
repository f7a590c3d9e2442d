use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vericomp_core::trace::{ceil_log2, Op, StepId};
use vericomp_core::{bisect, judge_step, merkle_root, CorruptionSite, Decision, TraceTree};

/// Re-evaluates every node bottom-up from the leaves, ignoring claims above
/// the leaf layer, and returns the honest value of the root.
fn reevaluate(tree: &TraceTree, id: StepId) -> u128 {
    let step = tree.step(id).unwrap();
    let kids: Vec<u128> = tree.children(id).map(|c| reevaluate(tree, c.id)).collect();
    match step.op {
        Op::LeafInput => u128::from(step.claimed_output),
        Op::Shift(s) => kids[0] << s,
        Op::Add => kids[0] + kids[1],
    }
}

const ROOT: StepId = StepId { level: 0, index: 0 };

#[test]
fn decompose_12345_by_6789() {
    let t = TraceTree::decompose(12345, 6789).unwrap();
    let adds = t.steps().iter().filter(|s| s.op == Op::Add).count();
    assert_eq!(adds, 6789u32.count_ones() as usize - 1);
    assert_eq!(adds, 5);
    let oracle = 12345u128 * 6789u128;
    assert_eq!(oracle, 83_810_205);
    assert_eq!(u128::from(t.root_value()), oracle);
    assert_eq!(reevaluate(&t, ROOT), oracle);
}

#[test]
fn honest_traces_are_locally_valid() {
    for a in 0..64u64 {
        for b in 0..64u64 {
            let t = TraceTree::decompose(a, b).unwrap();
            assert_eq!(t.root_value(), a * b);
            assert!(t.steps().iter().all(|s| t.locally_consistent(s.id)));
        }
    }
}

#[test]
fn exhaustive_dispute_soundness_small_operands() {
    for a in 0..32u64 {
        for b in 0..32u64 {
            let honest = TraceTree::decompose(a, b).unwrap();
            let bound = ceil_log2(honest.len()) + 1;
            for site in honest.internal_steps() {
                let forged = honest.corrupt(CorruptionSite::Step(site)).unwrap();

                let d = bisect(&forged, &honest).unwrap();
                assert_eq!(d.step, site);
                assert_eq!(
                    judge_step(&d).decision,
                    Decision::SolverFalse,
                    "a={a} b={b}"
                );
                assert!(d.judge_queries <= bound);

                let d = bisect(&honest, &forged).unwrap();
                assert_eq!(
                    judge_step(&d).decision,
                    Decision::SolverCorrect,
                    "a={a} b={b}"
                );
                assert!(d.judge_queries <= bound);
            }
        }
    }
}

#[test]
fn random_corruptions_change_root_and_respect_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15);
    for _ in 0..1000 {
        let a = rng.random_range(0..1u64 << 30);
        let b = rng.random_range(1..1u64 << 30);
        let honest = TraceTree::decompose(a, b).unwrap();
        let sites = honest.internal_steps();
        let site = sites[rng.random_range(0..sites.len())];
        let forged = honest.corrupt(CorruptionSite::Step(site)).unwrap();
        assert_ne!(forged.root_value(), honest.root_value());
        assert_eq!(reevaluate(&forged, ROOT), u128::from(a) * u128::from(b));
        assert_ne!(
            u128::from(forged.root_value()),
            u128::from(a) * u128::from(b)
        );
    }

    let honest = TraceTree::decompose(12345, 6789).unwrap();
    let sites = honest.internal_steps();
    let mut worst = 0;
    for _ in 0..1000 {
        let site = sites[rng.random_range(0..sites.len())];
        let forged = honest.corrupt(CorruptionSite::Step(site)).unwrap();
        worst = worst.max(bisect(&forged, &honest).unwrap().judge_queries);
    }
    assert!(
        worst <= honest.depth() + 1,
        "{worst} > {}",
        honest.depth() + 1
    );
}

#[test]
fn perturbation_sweep_changes_commitment() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let a = rng.random_range(0..1u64 << 24);
        let b = rng.random_range(1..1u64 << 24);
        let t = TraceTree::decompose(a, b).unwrap();
        let sites = t.internal_steps();
        let site = sites[rng.random_range(0..sites.len())];
        let old = t.step(site).unwrap().claimed_output;
        let flipped = t
            .tamper(site, old ^ (1 << rng.random_range(0..64)))
            .unwrap();
        assert_ne!(merkle_root(&flipped), merkle_root(&t));
        assert_eq!(flipped.recompute_root(), merkle_root(&flipped));
    }
}

proptest! {
    #[test]
    fn commitment_binding(a in 0u64..1 << 31, b in 0u64..1 << 31, pick in any::<prop::sample::Index>(), value in any::<u64>()) {
        let t = TraceTree::decompose(a, b).unwrap();
        let step = &t.steps()[pick.index(t.len())];
        prop_assume!(step.claimed_output != value);
        let other = t.tamper(step.id, value).unwrap();
        prop_assert_ne!(merkle_root(&t), merkle_root(&other));
    }

    #[test]
    fn query_bound_holds(a in 0u64..1 << 31, b in 1u64..1 << 31, pick in any::<prop::sample::Index>()) {
        let honest = TraceTree::decompose(a, b).unwrap();
        let sites = honest.internal_steps();
        let site = sites[pick.index(sites.len())];
        let forged = honest.corrupt(CorruptionSite::Step(site)).unwrap();
        let d = bisect(&forged, &honest).unwrap();
        prop_assert!(d.judge_queries <= ceil_log2(honest.len()) + 1);
        prop_assert_eq!(judge_step(&d).decision, Decision::SolverFalse);
    }
}
