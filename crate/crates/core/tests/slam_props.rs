use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slavgae::model::{InstanceLimits, LabelMatrix, ObjectiveInstance};
use slavgae::slam::{
    augment, confidence_filter, generate_pseudo_labels, generate_rounds, PseudoLabelMode, SlamSettings,
};
use slavgae::{Matrix, NodeRole, SplitAssignment};

struct Setup {
    inst: ObjectiveInstance<f64>,
    splits: SplitAssignment,
    truth: LabelMatrix<f64>,
}

fn setup(seed: u64, nodes: usize) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = InstanceLimits {
        min_nodes: nodes,
        nodes,
        ..InstanceLimits::default()
    };
    let label_input = rng.random::<bool>();
    let mut inst = ObjectiveInstance::<f64>::random(limits, label_input, &mut rng).unwrap();
    // sharpen the label head so some rows clear high thresholds
    for v in inst.params.ffn_y[2].weight.as_mut_slice() {
        *v *= 6.0;
    }
    let n = inst.graph.node_count();
    let c = inst.params.dims.classes;
    let roles: Vec<NodeRole> = (0..n)
        .map(|i| match if i == 0 { 0 } else { rng.random_range(0..4) } {
            0 => NodeRole::TrainLabeled,
            1 => NodeRole::TrainUnlabeled,
            2 => NodeRole::Validation,
            _ => NodeRole::Test,
        })
        .collect();
    let splits = SplitAssignment::new(roles).unwrap();
    let ids: Vec<i64> = (0..n).map(|_| rng.random_range(0..c as i64)).collect();
    let truth = LabelMatrix::from_class_ids_where(&ids, c, |i| splits.role(i) == NodeRole::TrainLabeled).unwrap();
    Setup { inst, splits, truth }
}

fn pseudo(s: &Setup, k: usize, p: f64, mask_seed: u64, noise_seed: u64) -> LabelMatrix<f64> {
    generate_pseudo_labels(
        &s.inst.params,
        &s.inst.graph,
        &s.inst.features,
        &s.truth,
        k,
        p,
        &mut ChaCha8Rng::seed_from_u64(mask_seed),
        &mut ChaCha8Rng::seed_from_u64(noise_seed),
    )
    .unwrap()
}

/// Row-by-row restatement of the filter's case split.
fn brute_force_filter(
    y_pseudo: &LabelMatrix<f64>,
    y_true: &LabelMatrix<f64>,
    splits: &SplitAssignment,
    theta: f64,
) -> Vec<Vec<f64>> {
    (0..y_true.node_count())
        .map(|i| {
            let c = y_true.class_count();
            match splits.role(i) {
                NodeRole::TrainLabeled => y_true.row(i).to_vec(),
                NodeRole::TrainUnlabeled => {
                    let row = y_pseudo.row(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if max > theta {
                        row.to_vec()
                    } else {
                        vec![0.0; c]
                    }
                }
                _ => vec![0.0; c],
            }
        })
        .collect()
}

#[test]
fn pseudo_labels_equal_presence_weighted_mean_of_captured_rounds() {
    let s = setup(20, 20);
    let n = s.inst.graph.node_count();
    let (k, p) = (3, 0.6);
    let rounds = generate_rounds(
        &s.inst.params,
        &s.inst.graph,
        &s.inst.features,
        &s.truth,
        k,
        p,
        &mut ChaCha8Rng::seed_from_u64(1),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    assert_eq!(rounds.len(), k);
    let got = pseudo(&s, k, p, 1, 2);

    let c = s.truth.class_count();
    for i in 0..n {
        let present: Vec<_> = rounds.iter().filter(|r| r.mask.is_visible(i)).collect();
        for j in 0..c {
            let want = if present.is_empty() {
                0.0
            } else {
                present.iter().map(|r| r.predictions.row(i)[j]).sum::<f64>() / present.len() as f64
            };
            assert!((got.row(i)[j] - want).abs() <= 1e-12, "node {i} class {j}");
        }
    }

    for theta in [0.0, 0.3, 0.5, 0.9, 1.0] {
        let filtered = confidence_filter(&got, &s.truth, &s.splits, theta, PseudoLabelMode::Soft).unwrap();
        let brute = brute_force_filter(&got, &s.truth, &s.splits, theta);
        for (i, row) in brute.iter().enumerate() {
            assert_eq!(filtered.row(i), row.as_slice(), "theta {theta} node {i}");
        }
    }
}

#[test]
fn single_round_single_node_is_a_copy() {
    let s = setup(3, 1);
    let rounds = generate_rounds(
        &s.inst.params,
        &s.inst.graph,
        &s.inst.features,
        &s.truth,
        1,
        1.0,
        &mut ChaCha8Rng::seed_from_u64(0),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(pseudo(&s, 1, 1.0, 0, 0), rounds[0].predictions);
}

#[test]
fn never_unmasked_nodes_get_zero_rows() {
    let s = setup(5, 10);
    let y = pseudo(&s, 3, 0.0, 9, 9);
    assert!(y.as_matrix().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn uniform_predictions_rejected_at_default_threshold() {
    let c = 7;
    let u = LabelMatrix::new(Matrix::filled(2, c, 1.0 / c as f64)).unwrap();
    let truth = LabelMatrix::<f64>::from_class_ids(&[3, -1], c).unwrap();
    let splits = SplitAssignment::new(vec![NodeRole::TrainLabeled, NodeRole::TrainUnlabeled]).unwrap();
    let out = confidence_filter(&u, &truth, &splits, 0.9, PseudoLabelMode::Soft).unwrap();
    assert!(!out.is_labeled(1));
    assert_eq!(out.row(0), truth.row(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn augmentation_invariants(
        seed in any::<u64>(),
        k in 1usize..4,
        p in 0.0f64..=1.0,
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
        hard in any::<bool>(),
    ) {
        let s = setup(seed, 12);
        let mode = if hard { PseudoLabelMode::Hard } else { PseudoLabelMode::Soft };
        let y = pseudo(&s, k, p, seed ^ 1, seed ^ 2);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let at_lo = confidence_filter(&y, &s.truth, &s.splits, lo, mode).unwrap();
        let at_hi = confidence_filter(&y, &s.truth, &s.splits, hi, mode).unwrap();

        for i in 0..s.truth.node_count() {
            match s.splits.role(i) {
                NodeRole::TrainLabeled => {
                    prop_assert_eq!(at_lo.row(i), s.truth.row(i));
                    prop_assert_eq!(at_hi.row(i), s.truth.row(i));
                }
                NodeRole::TrainUnlabeled => {
                    for (out, theta) in [(&at_lo, lo), (&at_hi, hi)] {
                        if out.is_labeled(i) {
                            let max = y.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            prop_assert!(max > theta);
                            let sum: f64 = out.row(i).iter().sum();
                            prop_assert!((sum - 1.0).abs() <= 1e-9);
                        }
                    }
                    // accepted set shrinks as the threshold rises
                    prop_assert!(!at_hi.is_labeled(i) || at_lo.is_labeled(i));
                }
                _ => {
                    prop_assert!(!at_lo.is_labeled(i) && !at_hi.is_labeled(i));
                }
            }
        }
    }

    #[test]
    fn full_visibility_ignores_mask_stream(seed in any::<u64>(), k in 1usize..4, m1 in any::<u64>(), m2 in any::<u64>()) {
        let s = setup(seed, 12);
        prop_assert_eq!(pseudo(&s, k, 1.0, m1, seed), pseudo(&s, k, 1.0, m2, seed));
    }

    #[test]
    fn augment_counts_accepted_unlabeled_rows(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let s = setup(seed, 12);
        let settings = SlamSettings { rounds: 2, unmask_prob: 0.7, threshold: theta, mode: PseudoLabelMode::Soft };
        let a = augment(
            &s.inst.params, &s.inst.graph, &s.inst.features, &s.truth, &s.splits, &settings,
            &mut ChaCha8Rng::seed_from_u64(seed), &mut ChaCha8Rng::seed_from_u64(!seed),
        ).unwrap();
        let expected = s.splits.nodes_with(NodeRole::TrainUnlabeled).into_iter().filter(|&i| a.labels.is_labeled(i)).count();
        prop_assert_eq!(a.accepted, expected);
    }
}
