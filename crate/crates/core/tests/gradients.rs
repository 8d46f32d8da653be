//! Reverse-mode gradients against central finite differences.

mod common;

use aehnn::net::Activation;
use common::FD_TOL;

#[test]
fn dense_net_parameter_gradients() {
    for act in [Activation::Tanh, Activation::Relu, Activation::Identity] {
        let worst = common::dense_net_worst(act, 11);
        assert!(worst < FD_TOL, "{act:?}: worst relative error {worst}");
    }
}

#[test]
fn dense_net_input_gradient() {
    let worst = common::dense_net_input_worst(12);
    assert!(worst < FD_TOL, "worst relative error {worst}");
}

#[test]
fn autoencoder_chain_gradients() {
    let (enc, dec) = common::autoencoder_worst(13);
    assert!(enc < FD_TOL, "encoder: {enc}");
    assert!(dec < FD_TOL, "decoder: {dec}");
}

#[test]
fn classifier_gradients_for_each_curvature() {
    for c in [0.0, 0.5, 1.0, 2.0] {
        let worst = common::classifier_worst(c, 14);
        assert!(worst < FD_TOL, "c = {c}: worst relative error {worst}");
    }
}
