mod common;

use ndarray::Array2;
use proptest::prelude::*;
use xrisk::losses::Surrogate;
use xrisk::model::{ModelKind, OutputActivation, ScoringModel};
use xrisk::oracle::{central_difference, finite_diff_grad, full_objective_value, ObjectiveSpec};

use common::{normal_matrix, random_binary, rel_err, rng};

fn model_strategy() -> impl Strategy<Value = ScoringModel> {
    (
        prop_oneof![Just(ModelKind::Linear), Just(ModelKind::Mlp1)],
        1usize..=8,
        1usize..=6,
        1usize..=3,
        any::<bool>(),
    )
        .prop_map(|(kind, d, h, out, squash)| {
            let act = if squash { OutputActivation::Sigmoid } else { OutputActivation::Identity };
            ScoringModel::new(kind, d, h, out).unwrap().with_output(act)
        })
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vjp_is_linear_in_upstream(m in model_strategy(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let w = m.init_params(seed);
        let x = normal_matrix(&mut r, 5, m.input_dim());
        let u = normal_matrix(&mut r, 5, m.output_dim());
        let v = normal_matrix(&mut r, 5, m.output_dim());
        let combo = &u * a + &v * b;
        let lhs = m.vjp(&w.0, x.view(), combo.view()).unwrap();
        let gu = m.vjp(&w.0, x.view(), u.view()).unwrap();
        let gv = m.vjp(&w.0, x.view(), v.view()).unwrap();
        for k in 0..lhs.0.len() {
            let rhs = a * gu.0[k] + b * gv.0[k];
            prop_assert!((lhs.0[k] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "k={} {} vs {}", k, lhs.0[k], rhs);
        }
    }

    #[test]
    fn vjp_matches_central_differences(m in model_strategy(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = m.init_params(seed);
        let x = normal_matrix(&mut r, 4, m.input_dim());
        let u = normal_matrix(&mut r, 4, m.output_dim());
        let grad = m.vjp(&w.0, x.view(), u.view()).unwrap();
        let fd = central_difference(|v| Ok(dot(&m.forward(v, x.view())?, &u)), &w.0, 1e-5).unwrap();
        prop_assert!(rel_err(&grad.0, &fd) <= 1e-5, "rel err {}", rel_err(&grad.0, &fd));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient(m in model_strategy(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = m.init_params(seed);
        let x = normal_matrix(&mut r, 3, m.input_dim());
        let zero = Array2::zeros((3, m.output_dim()));
        let g = m.vjp(&w.0, x.view(), zero.view()).unwrap();
        prop_assert!(g.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn params_round_trip_through_csv(m in model_strategy(), seed in any::<u64>()) {
        let w = m.init_params(seed);
        let text = m.params_to_csv(&w.0).unwrap();
        let (back, w2) = ScoringModel::params_from_csv(&text).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(w2.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), w.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn finite_diff_is_symmetric_in_step_sign() {
    let ds = random_binary(3, 4, 6, 3);
    let m = ScoringModel::mlp1(3, 4, 1).unwrap();
    let w = m.init_params(9);
    let spec = ObjectiveSpec::Pauc {
        surrogate: Surrogate::squared_hinge(1.0),
        lambda: 1.0,
    };
    let fwd = finite_diff_grad(&spec, &m, &ds, &w.0, 1e-5).unwrap();
    let back = finite_diff_grad(&spec, &m, &ds, &w.0, -1e-5).unwrap();
    assert!(rel_err(&fwd.0, &back.0) <= 1e-12);
}

#[test]
fn oracle_leaves_inputs_untouched() {
    let ds = random_binary(4, 3, 5, 2);
    let m = ScoringModel::linear(2, 1).unwrap();
    let w = m.init_params(1);
    let before = (ds.clone(), m, w.clone());
    let spec = ObjectiveSpec::Ap {
        surrogate: Surrogate::squared_hinge(1.0),
    };
    full_objective_value(&spec, &m, &ds, &w.0).unwrap();
    finite_diff_grad(&spec, &m, &ds, &w.0, 1e-5).unwrap();
    assert_eq!(before.0, ds);
    assert_eq!(before.1, m);
    assert_eq!(before.2, w);
}
