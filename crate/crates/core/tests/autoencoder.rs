//! Autoencoder recovery of a planted linear subspace.

mod common;

use common::{mean_coordinate_variance, subspace_autoencoder, SUBSPACE_BATCH, SUBSPACE_EPOCHS, SUBSPACE_SAMPLES};

#[test]
fn planted_subspace_is_recovered_within_step_limit() {
    assert!(SUBSPACE_SAMPLES.div_ceil(SUBSPACE_BATCH) * SUBSPACE_EPOCHS <= 2000);
    let (ae, data, losses) = subspace_autoencoder();
    let mse = ae.reconstruction_mse(&data).unwrap();
    let variance = mean_coordinate_variance(&data.samples);
    assert!(mse < 0.01 * variance, "reconstruction MSE {mse}, data variance {variance}");
    assert!(losses.last().unwrap() <= losses.first().unwrap());
}

#[test]
fn distinct_inputs_get_distinct_codes() {
    let (ae, data, _) = subspace_autoencoder();
    let codes: Vec<Vec<f64>> = data.samples[..3].iter().map(|x| ae.encode(x).unwrap()).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(common::dist(&codes[i], &codes[j]) > 0.0);
        }
    }
}
