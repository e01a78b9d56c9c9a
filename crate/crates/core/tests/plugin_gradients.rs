mod common;

use common::*;
use xrisk::losses::*;
use xrisk::model::ScoringModel;
use xrisk::oracle::{central_difference, finite_diff_grad, full_objective_value, ObjectiveSpec, DEFAULT_STEP};

const TOL: f64 = 1e-5;

fn models(dim: usize, out: usize) -> Vec<ScoringModel> {
    vec![ScoringModel::linear(dim, out).unwrap(), ScoringModel::mlp1(dim, 4, out).unwrap()]
}

#[test]
fn pauc_matches_objective_gradient() {
    for seed in 0..4 {
        let ds = random_binary(seed, 3, 6, 3);
        for m in models(3, 1) {
            let w = m.init_params(seed + 10);
            let s = Surrogate::squared_hinge(1.0);
            let mut bank = InnerEstimatorBank::new(ds.len(), 1.0, true).unwrap();
            let out = pauc_dynamic_loss(&m, &w, &ds, &full_batch(&ds), &s, 1.0, &mut bank, EstimatorOrder::Updated).unwrap();
            let spec = ObjectiveSpec::Pauc { surrogate: s, lambda: 1.0 };
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert_eq!(out.counters, NumericCounters::default());
            assert!(rel_err(&out.grad_w, &fd) <= TOL, "seed {seed}: {}", rel_err(&out.grad_w, &fd));
            let f = full_objective_value(&spec, &m, &ds, &w).unwrap();
            assert!((out.objective - f).abs() < 1e-10);
        }
    }
}

#[test]
fn ap_matches_objective_gradient() {
    for seed in 0..4 {
        let ds = random_binary(seed, 4, 5, 3);
        for m in models(3, 1) {
            let w = m.init_params(seed + 20);
            let s = Surrogate::squared_hinge(0.5);
            let mut bank = InnerEstimatorBank::paired(ds.len(), 1.0, true).unwrap();
            let out = ap_dynamic_loss(&m, &w, &ds, &full_batch(&ds), &s, &mut bank, EstimatorOrder::Updated).unwrap();
            let spec = ObjectiveSpec::Ap { surrogate: s };
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert!(rel_err(&out.grad_w, &fd) <= TOL, "seed {seed}: {}", rel_err(&out.grad_w, &fd));
            let f = full_objective_value(&spec, &m, &ds, &w).unwrap();
            assert!((out.objective - f).abs() < 1e-10);
            assert!((out.loss - f).abs() < 1e-10);
        }
    }
}

#[test]
fn aucm_matches_all_partials() {
    for seed in 0..4 {
        let ds = random_binary(seed, 3, 7, 2);
        for m in models(2, 1) {
            let w = m.init_params(seed + 30);
            let mm = MinMaxState { a: 0.3, b: -0.2, alpha: 0.7, margin: 1.0 };
            let out = aucm_loss_and_grads(&m, &w, &ds, &full_batch(&ds), &mm).unwrap();
            let spec = ObjectiveSpec::Aucm { state: mm };
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert!(rel_err(&out.grad_w, &fd) <= TOL);
            let aux = central_difference(
                |v: &[f64]| {
                    let st = MinMaxState { a: v[0], b: v[1], alpha: v[2], margin: 1.0 };
                    full_objective_value(&ObjectiveSpec::Aucm { state: st }, &m, &ds, &w)
                },
                &[mm.a, mm.b, mm.alpha],
                DEFAULT_STEP,
            )
            .unwrap();
            assert!(rel_err(&[out.grad_a, out.grad_b, out.grad_alpha], &aux) <= TOL);
        }
    }
}

#[test]
fn ndcg_matches_objective_gradient() {
    for seed in 0..4 {
        let ds = random_ltr(seed, 2, 5, 3);
        for m in models(3, 1) {
            let w = m.init_params(seed + 40);
            let s = Surrogate::squared_hinge(1.0);
            let mut bank = InnerEstimatorBank::new(ds.len(), 1.0, true).unwrap();
            let out = ndcg_dynamic_loss(&m, &w, &ds, &full_batch(&ds), &s, &mut bank, EstimatorOrder::Updated).unwrap();
            let spec = ObjectiveSpec::Ndcg { surrogate: s };
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert!(rel_err(&out.grad_w, &fd) <= TOL, "seed {seed}: {}", rel_err(&out.grad_w, &fd));
            let f = full_objective_value(&spec, &m, &ds, &w).unwrap();
            assert!((out.objective - f).abs() < 1e-10);
        }
    }
}

#[test]
fn listwise_matches_objective_gradient() {
    for seed in 0..4 {
        let ds = random_ltr(seed, 2, 5, 3);
        for m in models(3, 1) {
            let w = m.init_params(seed + 50);
            let mut bank = InnerEstimatorBank::new(ds.len(), 1.0, true).unwrap();
            let out = listwise_ce_dynamic_loss(&m, &w, &ds, &full_batch(&ds), &mut bank, EstimatorOrder::Updated).unwrap();
            let spec = ObjectiveSpec::ListwiseCe;
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert!(rel_err(&out.grad_w, &fd) <= TOL, "seed {seed}: {}", rel_err(&out.grad_w, &fd));
            let f = full_objective_value(&spec, &m, &ds, &w).unwrap();
            assert!((out.objective - f).abs() < 1e-10);
        }
    }
}

#[test]
fn gcl_matches_objective_gradient() {
    for seed in 0..4 {
        let ds = random_views(seed, 5, 3);
        for m in models(3, 3) {
            let w = m.init_params(seed + 60);
            let mut bank = InnerEstimatorBank::paired(ds.len(), 1.0, true).unwrap();
            let out = gcl_dynamic_loss(&m, &w, &ds, &full_batch(&ds), 0.5, &mut bank, EstimatorOrder::Updated).unwrap();
            let spec = ObjectiveSpec::Gcl { tau: 0.5 };
            let fd = finite_diff_grad(&spec, &m, &ds, &w, DEFAULT_STEP).unwrap();
            assert!(rel_err(&out.grad_w, &fd) <= TOL, "seed {seed}: {}", rel_err(&out.grad_w, &fd));
            let f = full_objective_value(&spec, &m, &ds, &w).unwrap();
            assert!((out.objective - f).abs() < 1e-10);
        }
    }
}
