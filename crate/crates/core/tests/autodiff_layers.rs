mod common;

use common::{arr, grad_max_error, oracle_max_error, GRAD_KINDS, ORACLE_OPS};
use preictal::autodiff::Graph;
use preictal::nn::{build_model, Architecture, Hyperparameters};
use proptest::prelude::*;

#[test]
fn ops_match_nested_loop_references() {
    for (i, op) in ORACLE_OPS.iter().enumerate() {
        let err = oracle_max_error(op, 100, 40 + i as u64);
        assert!(err < 1e-10, "{op}: max abs error {err:e}");
    }
}

#[test]
fn layer_gradients_match_finite_differences() {
    for (i, kind) in GRAD_KINDS.iter().enumerate() {
        let err = grad_max_error(kind, 20, 900 + i as u64);
        assert!(err < 1e-4, "{kind}: max relative error {err:e}");
    }
}

#[test]
fn whole_model_gradient_check() {
    // Every parameter of a small cnn_bilstm against central differences.
    let hyper = Hyperparameters {
        conv_filters: vec![2],
        kernel_size: 3,
        lstm_hidden: 2,
        dense_units: 3,
        ..Hyperparameters::default()
    };
    let model = build_model(Architecture::CnnBilstm, [10, 5], &hyper, 4).unwrap();
    let mut r = common::rng(5);
    let x = arr(&[10, 5], common::uniform(&mut r, 50, -1.0, 1.0));
    let mut inputs = vec![x];
    inputs.extend(model.params().map(|p| arr(&p.shape, p.values().to_vec())));
    let specs = model.specs();
    let err = preictal::autodiff::gradient_check(
        |g: &mut Graph, leaves| {
            let mut h = leaves[0];
            let mut next = 1;
            for spec in &specs {
                let n = spec.param_shapes().len();
                h = preictal::nn::layer_forward(g, h, spec, &leaves[next..next + n])?;
                next += n;
            }
            Ok(h)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "max relative error {err:e}");
}

proptest! {
    #[test]
    fn conv_output_length_formula(
        time in 1usize..40,
        k in 1usize..8,
        stride in 1usize..4,
        padding in 0usize..4,
    ) {
        let mut g = Graph::new();
        let x = g.constant(arr(&[time, 2], vec![0.5; time * 2]));
        let w = g.constant(arr(&[3, 2, k], vec![0.1; 6 * k]));
        let b = g.constant(arr(&[3], vec![0.0; 3]));
        let padded = time + 2 * padding;
        match g.conv1d(x, w, b, stride, padding) {
            Ok(y) => {
                prop_assert!(padded >= k);
                prop_assert_eq!(g.shape(y), &[(padded - k) / stride + 1, 3][..]);
            }
            Err(_) => prop_assert!(padded < k),
        }
    }
}
