use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Weight of `sum(W^2)` in the objective; its gradient is `2 * l2_lambda * W`.
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            l2_lambda: 1e-5,
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return bad("adam_beta1 must lie in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam_beta2 must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be > 0");
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be >= 0");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        Ok(())
    }
}

/// First and second moment accumulators, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Gradients<T>,
    pub second: Gradients<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &Mlp<T>) -> Self {
        AdamState {
            first: Gradients::zeros_like(model),
            second: Gradients::zeros_like(model),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every weight and bias.
pub fn adam_step<T: Scalar>(
    model: &mut Mlp<T>,
    state: &mut AdamState<T>,
    grads: &Gradients<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    let n = model.layers().len();
    if state.first.layers.len() != n || grads.layers.len() != n {
        return Err(Error::shape("adam_step", n, grads.layers.len()));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::lit(cfg.adam_beta1);
    let b2 = T::lit(cfg.adam_beta2);
    let c1 = T::lit(1.0 / (1.0 - cfg.adam_beta1.powi(t)));
    let c2 = T::lit(1.0 / (1.0 - cfg.adam_beta2.powi(t)));
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.adam_epsilon);
    let one = T::one();

    let update = |p: &mut [T], m: &mut [T], v: &mut [T], g: &[T]| -> Result<()> {
        if p.len() != g.len() || m.len() != g.len() {
            return Err(Error::shape("adam_step parameter block", p.len(), g.len()));
        }
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] * c1;
            let v_hat = v[i] * c2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    };

    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[i];
        let (mw, mb) = &mut state.first.layers[i];
        let (vw, vb) = &mut state.second.layers[i];
        update(&mut layer.weights, mw, vw, gw)?;
        update(&mut layer.biases, mb, vb, gb)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::mlp::{Activation, LayerSpec};

    fn scalar_model(w: f64) -> Mlp<f64> {
        let mut m = Mlp::zeros(&[LayerSpec::new(1, 1, Activation::Linear)]).unwrap();
        m.layers_mut()[0].weights[0] = w;
        m
    }

    fn grad(model: &Mlp<f64>, gw: f64, gb: f64) -> Gradients<f64> {
        let mut g = Gradients::zeros_like(model);
        g.layers[0].0[0] = gw;
        g.layers[0].1[0] = gb;
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let mut m = scalar_model(0.5);
        let mut st = AdamState::new(&m);
        let g = grad(&m, 3.7, -0.02);
        adam_step(&mut m, &mut st, &g, &cfg).unwrap();
        assert!((m.layers()[0].weights[0] - (0.5 - 1e-3)).abs() < 1e-9);
        assert!((m.layers()[0].biases[0] - 1e-3).abs() < 1e-9);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = TrainConfig::default();
        let mut m = scalar_model(0.25);
        let before = m.clone();
        let mut st = AdamState::new(&m);
        let g = grad(&m, 0.0, 0.0);
        adam_step(&mut m, &mut st, &g, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn two_steps_match_scalar_reference() {
        // Independent scalar Adam.
        fn reference(mut p: f64, g: f64, steps: i32, lr: f64) -> f64 {
            let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
            let (mut m, mut v) = (0.0, 0.0);
            for t in 1..=steps {
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                let mh = m / (1.0 - b1.powi(t));
                let vh = v / (1.0 - b2.powi(t));
                p -= lr * mh / (vh.sqrt() + eps);
            }
            p
        }
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut m = scalar_model(1.0);
        let mut st = AdamState::new(&m);
        let g = grad(&m, 0.3, -2.0);
        adam_step(&mut m, &mut st, &g, &cfg).unwrap();
        adam_step(&mut m, &mut st, &g, &cfg).unwrap();
        assert!((m.layers()[0].weights[0] - reference(1.0, 0.3, 2, 0.01)).abs() < 1e-14);
        assert!((m.layers()[0].biases[0] - reference(0.0, -2.0, 2, 0.01)).abs() < 1e-14);
        assert!(st.second.layers[0].0[0] >= 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig { adam_beta1: 1.0, ..Default::default() },
            TrainConfig { adam_beta2: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
