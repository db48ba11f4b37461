//! Adam with bias-corrected first and second moments.

use super::network::{Dense, Network};
use super::train::TrainConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        Self {
            m: net.zeros_like(),
            v: net.zeros_like(),
            t: 0,
        }
    }
}

fn update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], cfg: &TrainConfig, correction: (f64, f64)) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    for (((p, g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction.0;
        let v_hat = *v / correction.1;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One optimizer step over every weight and bias of `net`.
pub fn adam_step(net: &mut Network, grads: &[Dense], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    net.check_shapes(grads)?;
    net.check_shapes(&state.m)?;
    net.check_shapes(&state.v)?;
    state.t += 1;
    let t = state.t as i32;
    let correction = (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t));
    for (((layer, g), m), v) in net
        .layers
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        update(
            layer.weights.as_slice_mut().expect("standard layout"),
            g.weights.as_slice().expect("standard layout"),
            m.weights.as_slice_mut().expect("standard layout"),
            v.weights.as_slice_mut().expect("standard layout"),
            cfg,
            correction,
        );
        update(
            layer.biases.as_slice_mut().expect("standard layout"),
            g.biases.as_slice().expect("standard layout"),
            m.biases.as_slice_mut().expect("standard layout"),
            v.biases.as_slice_mut().expect("standard layout"),
            cfg,
            correction,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mlp::network::init_model;

    fn grads_filled(net: &Network, value: f64) -> Vec<Dense> {
        let mut g = net.zeros_like();
        for l in &mut g {
            l.weights.fill(value);
            l.biases.fill(-value);
        }
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut net = init_model(&[3, 4, 2], 1).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        let g = grads_filled(&net, 0.37);
        adam_step(&mut net, &g, &mut state, &cfg).unwrap();
        assert_eq!(state.t, 1);
        for (a, b) in net.layers.iter().zip(&before.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert!((y - x - cfg.learning_rate).abs() < 1e-9);
            }
            for (x, y) in a.biases.iter().zip(&b.biases) {
                assert!((x - y - cfg.learning_rate).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = TrainConfig::default();
        let mut net = init_model(&[3, 4, 2], 1).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        let g = net.zeros_like();
        adam_step(&mut net, &g, &mut state, &cfg).unwrap();
        assert_eq!(net, before);
        assert!(state.v.iter().all(|l| l.weights.iter().all(|v| *v >= 0.0)));
    }

    #[test]
    fn identical_inputs_identical_trajectories() {
        let cfg = TrainConfig::default();
        let run = || {
            let mut net = init_model(&[3, 4, 2], 5).unwrap();
            let mut state = AdamState::new(&net);
            for k in 0..5 {
                let g = grads_filled(&net, 0.1 * k as f64 - 0.2);
                adam_step(&mut net, &g, &mut state, &cfg).unwrap();
            }
            (net, state)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cfg = TrainConfig::default();
        let mut net = init_model(&[3, 4, 2], 1).unwrap();
        let other = init_model(&[3, 5, 2], 1).unwrap();
        let mut state = AdamState::new(&net);
        let err = adam_step(&mut net, &other.zeros_like(), &mut state, &cfg).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }
}
