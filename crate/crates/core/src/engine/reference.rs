use super::{check_width, EngineError};
use crate::fxp::{mac, Q15_16, Q7_8};
use crate::model::{apply_activation, NetworkModel};

/// Straight nested-loop forward pass. This is the oracle the scheduled
/// engines are checked against.
pub fn infer_reference(model: &NetworkModel, sample: &[Q7_8]) -> Result<Vec<Q7_8>, EngineError> {
    check_width(model.input_width(), sample)?;
    let mut activations = sample.to_vec();
    for layer in model.layers() {
        activations = layer
            .weights
            .iter_rows()
            .map(|row| {
                let z = row
                    .iter()
                    .zip(&activations)
                    .fold(Q15_16::ZERO, |acc, (&w, &a)| mac(acc, a, w));
                apply_activation(layer.activation, z)
            })
            .collect();
    }
    Ok(activations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synth::{random_model, random_vector};
    use crate::model::{ActivationKind, DenseLayer, WeightMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(x: f64) -> Q7_8 {
        Q7_8::from_real(x)
    }

    #[test]
    fn identity_layer() {
        let w = WeightMatrix::from_rows(&[vec![q(1.0), q(0.0)], vec![q(0.0), q(1.0)]]).unwrap();
        let m = NetworkModel::new(vec![DenseLayer::new(w, ActivationKind::Identity)]).unwrap();
        assert_eq!(infer_reference(&m, &[q(1.0), q(-2.0)]).unwrap(), vec![q(1.0), q(-2.0)]);
    }

    #[test]
    fn zero_weights_relu() {
        let m = NetworkModel::new(vec![DenseLayer::new(WeightMatrix::zeros(3, 4), ActivationKind::Relu)]).unwrap();
        assert_eq!(infer_reference(&m, &[q(5.0); 4]).unwrap(), vec![Q7_8::ZERO; 3]);
    }

    #[test]
    fn width_mismatch() {
        let m = NetworkModel::new(vec![DenseLayer::new(WeightMatrix::zeros(3, 4), ActivationKind::Relu)]).unwrap();
        assert_eq!(
            infer_reference(&m, &[q(1.0); 3]),
            Err(EngineError::WidthMismatch { expected: 4, found: 3 })
        );
    }

    /// Exact forward pass in i128: raws are integers scaled by 2^8 (inputs,
    /// weights) and 2^16 (sums). Only for layers whose partial sums never
    /// reach the accumulator bounds, which the small weights below ensure.
    fn exact_forward(model: &NetworkModel, sample: &[Q7_8]) -> Vec<i16> {
        let mut act: Vec<i128> = sample.iter().map(|a| a.raw() as i128).collect();
        for layer in model.layers() {
            act = layer
                .weights
                .iter_rows()
                .map(|row| {
                    let z: i128 = row.iter().zip(&act).map(|(w, &a)| w.raw() as i128 * a).sum();
                    assert!(z.abs() < 1 << 31);
                    let y = match layer.activation {
                        ActivationKind::Identity => z,
                        ActivationKind::Relu => z.max(0),
                        ActivationKind::SigmoidPlan => plan_exact(z),
                    };
                    y.div_euclid(256).clamp(i16::MIN as i128, i16::MAX as i128)
                })
                .collect();
        }
        act.into_iter().map(|v| v as i16).collect()
    }

    /// Segment formula written directly over Q15.16 integers, using floor
    /// division by the slope denominator.
    fn plan_exact(z: i128) -> i128 {
        let one = 65536i128;
        let t = z.abs();
        let y = if t >= 5 * one {
            one
        } else if 4 * t >= 19 * one / 2 {
            t.div_euclid(32) + 27 * one / 32
        } else if t >= one {
            t.div_euclid(8) + 5 * one / 8
        } else {
            t.div_euclid(4) + one / 2
        };
        if z < 0 {
            one - y
        } else {
            y
        }
    }

    #[test]
    fn matches_exact_integer_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC);
        for _ in 0..200 {
            let m = random_model(&mut rng, &[8, 6, 4], 0.5);
            let x = random_vector(&mut rng, 8, 2.0);
            let got: Vec<i16> = infer_reference(&m, &x).unwrap().iter().map(|v| v.raw()).collect();
            assert_eq!(got, exact_forward(&m, &x));
        }
    }

    #[test]
    fn frozen_small_network() {
        // 2x3 ReLU then 1x2 identity; hand-evaluated:
        // h0 = relu(0.5*1 + -0.25*2 + 1*0.75) = 0.75
        // h1 = relu(-1*1 + 0.5*2 + 0.125*0.75) = 0.09375
        // y  = 2*0.75 - 4*0.09375 = 1.125
        let l0 = WeightMatrix::from_rows(&[vec![q(0.5), q(-0.25), q(1.0)], vec![q(-1.0), q(0.5), q(0.125)]]).unwrap();
        let l1 = WeightMatrix::from_rows(&[vec![q(2.0), q(-4.0)]]).unwrap();
        let m = NetworkModel::new(vec![
            DenseLayer::new(l0, ActivationKind::Relu),
            DenseLayer::new(l1, ActivationKind::Identity),
        ])
        .unwrap();
        assert_eq!(infer_reference(&m, &[q(1.0), q(2.0), q(0.75)]).unwrap(), vec![q(1.125)]);
    }
}
