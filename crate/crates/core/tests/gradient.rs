mod common;

use common::{max_gradient_error, random_gradient_instance};
use triage::corpus::Dimension;
use triage::model::{bce_loss, sigmoid};
use triage::{LinearModel, SparseVector};

#[test]
fn analytic_gradient_matches_central_differences() {
    let worst = max_gradient_error(11, 100, 1e-5);
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn single_logit_gradient_is_p_minus_y() {
    // One example, one class, one feature of value 1: dL/db = sigmoid(b) - y.
    let mut m = LinearModel::zeros(Dimension::Damage, vec!["a".into()], 1);
    m.biases[0] = 0.3;
    let x = SparseVector::from_dense(&[1.0]);
    for y in [true, false] {
        let labels = [y];
        let g = m.gradient(&[(&x, &labels)]).unwrap();
        let expected = sigmoid(0.3) - if y { 1.0 } else { 0.0 };
        assert!((g.biases[0] - expected).abs() < 1e-15);
        assert!((g.weights[0] - expected).abs() < 1e-15);
        let l = bce_loss(&m.forward(&x).unwrap(), &labels).unwrap();
        let p: f64 = sigmoid(0.3);
        let direct = if y { -p.ln() } else { -(1.0 - p).ln() };
        assert!((l - direct).abs() < 1e-15);
    }
}

#[test]
fn f32_gradient_agrees_with_f64() {
    let (m64, xs, ys) = random_gradient_instance(3);
    let m32: triage::model::LinearModel<f32> = triage::model::LinearModel {
        format_version: m64.format_version,
        dimension: m64.dimension,
        classes: m64.classes.clone(),
        feature_dim: m64.feature_dim,
        weights: m64.weights.iter().map(|&w| w as f32).collect(),
        biases: m64.biases.iter().map(|&b| b as f32).collect(),
        config: None,
        loss_trace: Vec::new(),
    };
    let xs32: Vec<triage::model::SparseVector<f32>> = xs
        .iter()
        .map(|x| triage::model::SparseVector::from_dense(&x.to_dense().iter().map(|&v| v as f32).collect::<Vec<_>>()))
        .collect();
    let b64: Vec<(&SparseVector, &[bool])> = xs.iter().zip(&ys).map(|(x, y)| (x, y.as_slice())).collect();
    let b32: Vec<_> = xs32.iter().zip(&ys).map(|(x, y)| (x, y.as_slice())).collect();
    let g64 = m64.gradient(&b64).unwrap();
    let g32 = m32.gradient(&b32).unwrap();
    for (a, b) in g64.weights.iter().zip(&g32.weights) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}
