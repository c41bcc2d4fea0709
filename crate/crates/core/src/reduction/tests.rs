use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::channel::{choi_rank, completeness_defect, hand_table};
use crate::sampler::{sample_channel, SamplerConfig};

fn r(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

fn sample(regime: Regime, seed: u64) -> KrausSet {
    sample_channel(&SamplerConfig::new(regime, seed), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Builds a set from per-class column values, in class order, skipping
/// classes whose values are all zero.
fn from_columns(regime: Regime, cols: &[Vec<Complex>]) -> KrausSet {
    let table = hand_table(regime);
    let d = regime.dim();
    let ops = table
        .iter()
        .enumerate()
        .filter_map(|(n, sig)| {
            let entries: Vec<_> = (0..d)
                .filter_map(|j| sig.0[j].map(|row| ((row, j), cols[j].get(n).copied().unwrap_or(ZERO))))
                .filter(|(_, z)| *z != ZERO)
                .collect();
            (!entries.is_empty()).then(|| KrausOperator::from_entries(d, &entries))
        })
        .collect();
    KrausSet::new(d, ops).unwrap()
}

fn qubit_example() -> KrausSet {
    let s3 = 3f64.sqrt();
    from_columns(
        Regime::Qubit5,
        &[
            vec![r(0.5), r(0.5), r(0.5), r(0.25), r(s3 / 4.0)],
            vec![r(0.5), r(-0.5), r(0.5), r(0.5)],
        ],
    )
}

fn assert_certified(out: &ReductionOutcome, bound: usize) {
    assert!(out.status.is_certified(), "{:?}: {:#?}", out.status, out.log);
    assert!(out.choi_distance <= CERT_TOL, "distance {}", out.choi_distance);
    assert!(out.all_incoherent);
    assert!(out.op_count_after <= bound, "{} ops", out.op_count_after);
}

#[test]
fn qubit_example_reduces_to_four() {
    let s = qubit_example();
    assert!(completeness_defect(&s) < 1e-15);
    let out = reduce_qubit_io(&s).unwrap();
    assert_certified(&out, 4);
    assert_eq!(out.op_count_before, 5);
    assert_eq!(out.op_count_after, 4);
    assert!(out.result.ops().iter().all(|k| k.signature().is_some()));
}

#[test]
fn qubit_outputs_keep_the_four_class_constraints() {
    for seed in 0..20 {
        let out = reduce_qubit_io(&sample(Regime::Qubit5, seed)).unwrap();
        assert_certified(&out, 4);
        let slots = classify(&out.result, Regime::Qubit4).unwrap();
        assert!(slots.iter().all(|c| matches!(c, ClassSlot::Class(_))), "{slots:?}");
        let (mut sa, mut sb, mut cross) = (0.0, 0.0, ZERO);
        for k in out.result.ops() {
            let sig = k.signature().unwrap();
            let a = sig.0[0].map_or(ZERO, |row| k.matrix()[(row, 0)]);
            let b = sig.0[1].map_or(ZERO, |row| k.matrix()[(row, 1)]);
            sa += a.norm_sqr();
            sb += b.norm_sqr();
            if sig.0[0] == sig.0[1] {
                cross += a.conj() * b;
            }
        }
        assert!((sa - 1.0).abs() < 1e-10 && (sb - 1.0).abs() < 1e-10 && cross.norm() < 1e-10);
    }
}

#[test]
fn qubit_without_single_is_untouched() {
    let s = from_columns(
        Regime::Qubit5,
        &[vec![r(0.5), r(0.5), r(0.5), r(0.5), ZERO], vec![r(0.5), r(-0.5), r(0.5), r(0.5)]],
    );
    assert_eq!(s.len(), 4);
    assert!(completeness_defect(&s) < 1e-15);
    let out = reduce_qubit_io(&s).unwrap();
    assert_eq!(out.status, Status::Reduced);
    assert_eq!(out.log[0].path, Path::Skipped);
    assert_eq!(out.op_count_after, 4);
    assert!(out.choi_distance <= 1e-15);
}

#[test]
fn rejects_unclassifiable_input() {
    let k = KrausOperator::from_entries(2, &[((0, 0), r(0.6)), ((1, 0), r(0.8))]);
    let s = KrausSet::new(2, vec![k, KrausOperator::from_entries(2, &[((1, 1), r(1.0))])]).unwrap();
    assert!(matches!(
        reduce_qubit_io(&s),
        Err(ReductionError::NotClassifiable { index: 0, .. })
    ));
    assert!(reduce_qutrit_io(&s).is_err());
}

#[test]
fn qutrit_io_generic_meets_bound() {
    for seed in 0..5 {
        let s = sample(Regime::QutritIO39, seed);
        let out = reduce_qutrit_io(&s).unwrap();
        assert_certified(&out, 32);
        assert!(out.log.iter().all(|l| l.path != Path::Failed), "{:#?}", out.log);
        assert!(choi_rank(&s, 1e-9).unwrap() <= out.op_count_after);
    }
}

#[test]
fn qutrit_io_full_classes_only_is_untouched() {
    let table = hand_table(Regime::QutritIO39);
    let full: Vec<usize> = (1..=39).filter(|&n| table[n - 1].0.iter().all(Option::is_some)).collect();
    assert_eq!(full.len(), 27);
    let cfg = SamplerConfig {
        active_classes: Some(full),
        ..SamplerConfig::new(Regime::QutritIO39, 4)
    };
    let s = crate::sampler::sample_seeded(&cfg).unwrap();
    assert!(completeness_defect(&s) <= 1e-10);
    let out = reduce_qutrit_io(&s).unwrap();
    assert_eq!(out.status, Status::Reduced);
    assert!(out.log.iter().all(|l| l.path == Path::Skipped));
    assert_eq!(out.op_count_after, 27);
}

#[test]
fn each_io_group_certifies_in_isolation() {
    let s = sample(Regime::QutritIO39, 21);
    for (k, g) in IO_GROUPS.iter().enumerate() {
        let sub = g.isolate(&s).unwrap();
        let out = reduce_with_groups(&sub, Regime::QutritIO39, &IO_GROUPS[k..=k], &ReduceOptions::default()).unwrap();
        assert!(out.choi_distance <= CERT_TOL, "{}: {}", g.name, out.choi_distance);
        assert!(out.all_incoherent);
        assert_ne!(out.log[0].path, Path::Failed, "{}: {}", g.name, out.log[0].note);
        assert_eq!(out.op_count_after, sub.len() - 1, "{}", g.name);
    }
}

#[test]
fn g1_isolated_leaves_three_operators() {
    let s = sample(Regime::QutritIO39, 2);
    let sub = IO_GROUPS[0].isolate(&s).unwrap();
    assert_eq!(sub.len(), 4);
    let out = reduce_with_groups(&sub, Regime::QutritIO39, &IO_GROUPS[..1], &ReduceOptions::default()).unwrap();
    assert_eq!(out.op_count_after, 3);
    assert!(out.choi_distance <= CERT_TOL);
    let classes: Vec<_> = classify(&out.result, Regime::QutritIO39).unwrap().iter().filter_map(ClassSlot::class).map(|c| c.index).collect();
    assert!(!classes.contains(&37) && classes.contains(&39), "{classes:?}");
}

#[test]
fn qutrit_sio_generic_reaches_thirteen() {
    for seed in 0..10 {
        let s = sample(Regime::QutritSIO15, seed);
        let out = reduce_qutrit_sio(&s).unwrap();
        assert_certified(&out, 13);
        assert_eq!(out.op_count_after, 13);
        assert!(out.strictly_incoherent);
    }
}

#[test]
fn sio_permutations_only_are_untouched() {
    let cfg = SamplerConfig {
        active_classes: Some((1..=6).collect()),
        ..SamplerConfig::new(Regime::QutritSIO15, 8)
    };
    let s = crate::sampler::sample_seeded(&cfg).unwrap();
    let out = reduce_qutrit_sio(&s).unwrap();
    assert_eq!(out.status, Status::Reduced);
    assert_eq!(out.op_count_after, 6);
    assert!(out.choi_distance <= 1e-15);
}

#[test]
fn h1_isolated_absorbs_into_fourteen() {
    let s = sample(Regime::QutritSIO15, 6);
    let sub = SIO_GROUPS[0].isolate(&s).unwrap();
    assert_eq!(sub.len(), 4);
    let out = reduce_with_groups(&sub, Regime::QutritSIO15, &SIO_GROUPS[..1], &ReduceOptions::default()).unwrap();
    assert_eq!(out.op_count_after, 3);
    assert!(out.choi_distance <= CERT_TOL);
    assert!(out.strictly_incoherent);
    let classes: Vec<_> = classify(&out.result, Regime::QutritSIO15).unwrap().iter().filter_map(ClassSlot::class).map(|c| c.index).collect();
    assert!(classes.contains(&14) && !classes.contains(&15), "{classes:?}");
}

#[test]
fn reduction_is_idempotent() {
    for (regime, seed) in [(Regime::Qubit5, 3), (Regime::QutritIO39, 3), (Regime::QutritSIO15, 3)] {
        let once = reduce_with_groups(&sample(regime, seed), regime, groups_for(regime), &ReduceOptions::default()).unwrap();
        let twice = reduce_with_groups(&once.result, regime, groups_for(regime), &ReduceOptions::default()).unwrap();
        assert_eq!(twice.op_count_after, once.op_count_after, "{regime}");
        assert!(twice.choi_distance <= 1e-12, "{regime}: {}", twice.choi_distance);
        assert!(twice.log.iter().all(|l| l.path == Path::Skipped));
    }
}

#[test]
fn explicit_and_fallback_paths_agree() {
    for regime in [Regime::Qubit5, Regime::QutritIO39, Regime::QutritSIO15] {
        for seed in 0..4 {
            let cfg = SamplerConfig {
                real_entries: true,
                ..SamplerConfig::new(regime, seed)
            };
            let s = crate::sampler::sample_seeded(&cfg).unwrap();
            let with = reduce_with_groups(&s, regime, groups_for(regime), &ReduceOptions { use_explicit: true }).unwrap();
            let without = reduce_with_groups(&s, regime, groups_for(regime), &ReduceOptions { use_explicit: false }).unwrap();
            assert!(with.status.is_certified() && without.status.is_certified());
            assert_eq!(without.status, Status::Reduced);
            assert_eq!(with.op_count_after, without.op_count_after);
            let (_, d) = channels_equal(&with.result, &without.result, CERT_TOL).unwrap();
            assert!(d <= CERT_TOL, "{regime}/{seed}: {d}");
        }
    }
}

#[test]
fn outputs_are_phase_normalized() {
    let out = reduce_qutrit_sio(&sample(Regime::QutritSIO15, 12)).unwrap();
    for k in out.result.ops() {
        let m = k.matrix();
        let first = (0..9).map(|x| m[(x % 3, x / 3)]).find(|z| z.norm() > ZERO_TOL).unwrap();
        assert!(first.im.abs() < 1e-15 && first.re > 0.0);
    }
}

#[test]
fn duplicate_proportional_classes_merge_first() {
    let s = sample(Regime::QutritSIO15, 1);
    let mut ops = s.ops().to_vec();
    let k = ops[0].matrix().scale(r(0.6));
    ops[0] = KrausOperator::new(ops[0].matrix().scale(r(0.8))).unwrap();
    ops.push(KrausOperator::new(k).unwrap());
    let dup = KrausSet::new(3, ops).unwrap();
    let out = reduce_qutrit_sio(&dup).unwrap();
    assert_certified(&out, 13);
    assert_eq!(out.op_count_after, 13);
}

#[test]
fn regime_mismatch_is_an_error() {
    let s = sample(Regime::Qubit5, 0);
    assert!(matches!(reduce_qutrit_io(&s), Err(ReductionError::Channel(ChannelError::DimMismatch(2, 3)))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_outcomes_satisfy_their_guarantees(seed in any::<u64>(), which in 0usize..3) {
        let regime = [Regime::Qubit5, Regime::QutritIO39, Regime::QutritSIO15][which];
        let s = sample(regime, seed);
        let out = reduce_with_groups(&s, regime, groups_for(regime), &ReduceOptions::default()).unwrap();
        prop_assert!(out.status.is_certified(), "{:?}", out.log);
        prop_assert!(out.op_count_after <= regime_bound(regime));
        prop_assert!(out.result.ops().iter().all(|k| k.signature().is_some()));
        if regime == Regime::QutritSIO15 {
            prop_assert!(out.strictly_incoherent);
        }
        prop_assert!(choi_rank(&s, 1e-9).unwrap() <= out.op_count_after);
        prop_assert!(out.choi_distance <= CERT_TOL);
    }
}
