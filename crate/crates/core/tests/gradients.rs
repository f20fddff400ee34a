use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slavgae::autodiff::{grad_check, Tape, Var};
use slavgae::graph::normalize_adjacency;
use slavgae::model::{InstanceLimits, ObjectiveInstance};
use slavgae::{Matrix, SparseGraph};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

/// Entries kept at least `gap` away from zero so kinks stay outside the
/// finite-difference stencil.
fn away_from_zero(rows: usize, cols: usize, gap: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec((gap..2.0f64, any::<bool>()), rows * cols).prop_map(move |v| {
        Matrix::from_vec(rows, cols, v.into_iter().map(|(x, neg)| if neg { -x } else { x }).collect()).unwrap()
    })
}

/// Scalar readout `Σ (x ⊙ weights)` with fixed pseudo-random weights, so
/// every output coordinate contributes a distinct gradient.
fn readout<'a>(tape: &mut Tape<'a, f64>, x: Var) -> slavgae::Result<Var> {
    let (r, c) = tape.value(x).shape();
    let w = tape.constant(Matrix::from_fn(r, c, |i, j| 0.3 + ((i * 7 + j * 3) % 5) as f64 * 0.25));
    let prod = tape.mul(x, w)?;
    tape.reduce_sum(prod)
}

fn check<F>(f: F, params: &[Matrix]) -> Result<(), TestCaseError>
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> slavgae::Result<Var>,
{
    let report = grad_check(|t, v| f(t, v), params, EPS, TOL).unwrap();
    prop_assert!(report.passed(), "{report:?}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matmul_gradient(a in matrix(3, 4), b in matrix(4, 2)) {
        check(|t, v| { let m = t.matmul(v[0], v[1])?; readout(t, m) }, &[a, b])?;
    }

    #[test]
    fn spmm_gradient(h in matrix(5, 3), edges in prop::collection::vec((0usize..5, 0usize..5), 0..8)) {
        let g = SparseGraph::from_edges(5, &edges).unwrap();
        let adj = normalize_adjacency::<f64>(&g);
        let report = grad_check(|t, v| { let m = t.spmm(&adj, v[0])?; readout(t, m) }, &[h], EPS, TOL).unwrap();
        prop_assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn bias_gradient(x in matrix(4, 3), b in matrix(1, 3)) {
        check(|t, v| { let m = t.add_row_bias(v[0], v[1])?; readout(t, m) }, &[x, b])?;
    }

    #[test]
    fn relu_gradient(x in away_from_zero(4, 3, 1e-3)) {
        check(|t, v| { let m = t.relu(v[0])?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn softmax_gradient(x in matrix(3, 4)) {
        check(|t, v| { let m = t.softmax_rows(v[0])?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn concat_gradient(a in matrix(3, 2), b in matrix(3, 3)) {
        check(|t, v| { let m = t.concat_cols(v[0], v[1])?; readout(t, m) }, &[a, b])?;
    }

    #[test]
    fn exp_gradient(x in matrix(3, 3)) {
        check(|t, v| { let m = t.exp(v[0])?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn log_gradient(x in prop::collection::vec(0.1f64..3.0, 6)) {
        let x = Matrix::from_vec(2, 3, x).unwrap();
        check(|t, v| { let m = t.log(v[0])?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn elementwise_binary_gradients(a in matrix(3, 2), b in matrix(3, 2)) {
        check(|t, v| { let m = t.mul(v[0], v[1])?; readout(t, m) }, &[a.clone(), b.clone()])?;
        check(|t, v| { let m = t.add(v[0], v[1])?; readout(t, m) }, &[a.clone(), b.clone()])?;
        check(|t, v| { let m = t.sub(v[0], v[1])?; readout(t, m) }, &[a, b])?;
    }

    #[test]
    fn affine_gradients(x in matrix(3, 3), c in -3.0f64..3.0) {
        check(|t, v| { let m = t.scale(v[0], c)?; readout(t, m) }, &[x.clone()])?;
        check(|t, v| { let m = t.add_scalar(v[0], c)?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn clamp_gradient(x in away_from_zero(3, 3, 1e-3)) {
        // bounds at ±1 with entries kept off the boundary
        let x = x.map(|v| if (v.abs() - 1.0).abs() < 1e-3 { v * 1.01 } else { v });
        check(|t, v| { let m = t.clamp(v[0], -1.0, 1.0)?; readout(t, m) }, &[x])?;
    }

    #[test]
    fn reduction_gradients(x in matrix(4, 3)) {
        check(|t, v| { let s = t.reduce_sum(v[0])?; t.mul(s, s) }, &[x.clone()])?;
        check(|t, v| { let s = t.reduce_mean(v[0])?; t.mul(s, s) }, &[x])?;
    }

    #[test]
    fn row_select_gradient(x in matrix(5, 2), rows in prop::collection::vec(0usize..5, 1..6)) {
        check(|t, v| { let m = t.masked_row_select(v[0], &rows)?; readout(t, m) }, &[x])?;
    }
}

#[test]
fn composite_objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..24 {
        let inst = ObjectiveInstance::<f64>::random(InstanceLimits::default(), case % 4 != 3, &mut rng).unwrap();
        let report = inst.grad_check(EPS, TOL).unwrap();
        assert!(report.passed(), "case {case}: {report:?}");
        assert!(report.max_relative_error < TOL);
        assert_eq!(report.coordinates, inst.params.parameter_count());
    }
}
