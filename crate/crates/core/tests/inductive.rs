//! Held-out nodes must not influence anything computed during training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slavgae::autodiff::Tape;
use slavgae::data::{generate_sbm, make_splits, Dataset, SbmConfig, SplitFractions};
use slavgae::graph::{induce_training_subgraph, normalize_adjacency};
use slavgae::model::{model_input, objective_on_tape, standard_normal, ModelDims, ModelParams, Noise, Objective};
use slavgae::train::{train_observed, TrainConfig};
use slavgae::{Data, Matrix, NodeRole, SparseGraph, SplitAssignment};

fn fixture() -> (Data, SplitAssignment) {
    let ds = generate_sbm::<f64>(&SbmConfig {
        blocks: 3,
        nodes_per_block: 30,
        p_intra: 0.15,
        p_inter: 0.02,
        feature_dim: 6,
        seed: 8,
        ..SbmConfig::default()
    })
    .unwrap();
    let splits = make_splits(&ds, SplitFractions { validation: 0.2, test: 0.2 }, 0.3, 8).unwrap();
    (ds, splits)
}

/// Scrambles every held-out node: features, labels and all incident edges
/// (dropped and replaced by random edges to arbitrary nodes).
fn perturb(ds: &Data, splits: &SplitAssignment, seed: u64) -> Data {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.node_count();
    let held_out = |i: usize| !splits.role(i).is_training();
    let mut edges: Vec<(usize, usize)> = ds.graph.edges().filter(|&(i, j)| !held_out(i) && !held_out(j)).collect();
    for i in (0..n).filter(|&i| held_out(i)) {
        for _ in 0..rng.random_range(1..6) {
            edges.push((i, rng.random_range(0..n)));
        }
    }
    let features = Matrix::from_fn(n, ds.feature_dim(), |i, j| {
        if held_out(i) {
            rng.random_range(-50.0..50.0)
        } else {
            ds.features[(i, j)]
        }
    });
    let labels = (0..n)
        .map(|i| {
            if held_out(i) {
                (ds.labels[i] + 1) % ds.class_count as i64
            } else {
                ds.labels[i]
            }
        })
        .collect();
    Dataset::new(SparseGraph::from_edges(n, &edges).unwrap(), features, labels, ds.class_count).unwrap()
}

fn loss_trace(ds: &Data, splits: &SplitAssignment, cfg: &TrainConfig) -> Vec<[u64; 5]> {
    let mut trace = Vec::new();
    train_observed(ds, splits, cfg, |v| {
        let r = v.record;
        trace.push([
            r.label_loss.to_bits(),
            r.feature_loss.to_bits(),
            r.kl_loss.to_bits(),
            r.total_loss.to_bits(),
            r.accepted_pseudo as u64,
        ]);
    })
    .unwrap();
    trace
}

#[test]
fn training_losses_are_bit_identical_under_held_out_perturbation() {
    let (ds, splits) = fixture();
    let cfg = TrainConfig {
        hidden_dim: 16,
        latent_dim: 8,
        max_epochs: 5,
        lr: 0.01,
        theta: 0.5,
        seed: 3,
        ..TrainConfig::default()
    };
    let base = loss_trace(&ds, &splits, &cfg);
    assert_eq!(base.len(), 5);
    for seed in 0..3 {
        let other = perturb(&ds, &splits, seed);
        assert_ne!(other.features, ds.features);
        assert_eq!(loss_trace(&other, &splits, &cfg), base, "perturbation {seed}");
    }
}

#[test]
fn objective_gradients_are_bit_identical_under_held_out_perturbation() {
    let (ds, splits) = fixture();
    let other = perturb(&ds, &splits, 11);
    let dims = ModelDims {
        features: ds.feature_dim(),
        classes: ds.class_count,
        hidden: 8,
        latent: 4,
        label_input: true,
    };
    let params = ModelParams::glorot(dims, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let eps: Matrix = standard_normal(ds.node_count(), 4, &mut ChaCha8Rng::seed_from_u64(2));
    let scope = splits.training_nodes();

    let run = |d: &Data| {
        let g = induce_training_subgraph(&d.graph, &splits).unwrap();
        let adj = normalize_adjacency::<f64>(&g);
        let mask = splits.training_mask();
        let x = Matrix::from_fn(d.node_count(), d.feature_dim(), |i, j| if mask[i] { d.features[(i, j)] } else { 0.0 });
        let y = d.label_matrix_where(|i| splits.role(i) == NodeRole::TrainLabeled);
        let counted = y.labeled_rows();
        let h0 = model_input(&params, &x, &y).unwrap();
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let h0v = tape.constant(h0);
        let obj = Objective {
            features: &x,
            targets: &y,
            counted_rows: &counted,
            scope_rows: Some(&scope),
            lambda_feat: 0.1,
        };
        let lv = objective_on_tape(&mut tape, &adj, h0v, &vars, Noise::Sample(&eps), &obj).unwrap();
        let loss = tape.value(lv.total).item().to_bits();
        let grads: Vec<Vec<u64>> = tape
            .backward(lv.total)
            .unwrap()
            .iter()
            .map(|g| g.as_slice().iter().map(|v| v.to_bits()).collect())
            .collect();
        (loss, grads)
    };
    assert_eq!(run(&ds), run(&other));
}

#[test]
fn training_subgraph_has_no_held_out_edges() {
    let (ds, splits) = fixture();
    let g = induce_training_subgraph(&ds.graph, &splits).unwrap();
    for i in 0..ds.node_count() {
        if !splits.role(i).is_training() {
            assert_eq!(g.degree(i), 0);
        }
    }
    assert!(g.edges().all(|(i, j)| ds.graph.has_edge(i, j)));
}
