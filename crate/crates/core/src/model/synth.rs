//! Seeded random models and inputs for self-tests and demos.

use rand::Rng;

use super::{ActivationKind, DenseLayer, NetworkModel, WeightMatrix};
use crate::fxp::Q7_8;

/// Random Q7.8 value drawn uniformly from `[-bound, bound]`.
pub fn random_q78<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> Q7_8 {
    let raw_bound = (bound * Q7_8::SCALE).clamp(0.0, i16::MAX as f64) as i16;
    Q7_8::from_raw(rng.random_range(-raw_bound..=raw_bound))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, width: usize, bound: f64) -> Vec<Q7_8> {
    (0..width).map(|_| random_q78(rng, bound)).collect()
}

/// Random dense model with the given neuron counts `s_0, …, s_{L-1}`.
/// Hidden layers get a random activation, the last layer is Identity.
///
/// # Panics
/// If fewer than two widths are given or any width is zero.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, widths: &[usize], weight_bound: f64) -> NetworkModel {
    assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0));
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let data = random_vector(rng, w[0] * w[1], weight_bound);
            let activation = if j == last {
                ActivationKind::Identity
            } else if rng.random_bool(0.5) {
                ActivationKind::Relu
            } else {
                ActivationKind::SigmoidPlan
            };
            DenseLayer::new(
                WeightMatrix::new(w[1], w[0], data).expect("shape matches data"),
                activation,
            )
        })
        .collect();
    NetworkModel::new(layers).expect("widths chain by construction")
}

/// Random layer widths: `layers` weight matrices, each width in `min..=max`.
pub fn random_widths<R: Rng + ?Sized>(rng: &mut R, layers: usize, min: usize, max: usize) -> Vec<usize> {
    (0..=layers).map(|_| rng.random_range(min..=max)).collect()
}
