use super::ParamSet;
use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults are the reference training setup:
/// lr 1e-3, β₁ 0.9 (the "momentum"), β₂ 0.999, weight decay 1e-4.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0001,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let bad = |field: &str, v: f64| {
            Err(Error::Config(format!("optimizer.{field} = {v} is out of range")))
        };
        if !positive(self.learning_rate) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        if !positive(self.epsilon) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay", self.weight_decay);
        }
        Ok(())
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Self {
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction.
///
/// Weight decay is coupled: `g ← g + weight_decay·θ` before the moment
/// updates. Gradients are consumed (cleared) by the step.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState, config: &OptimizerConfig) -> Result<()> {
    if state.first.len() != params.len()
        || params
            .iter()
            .zip(&state.first)
            .any(|((_, t), m)| t.numel() != m.len())
    {
        return Err(Error::Contract("optimizer state does not match parameters".into()));
    }
    if let Some((name, _)) = params.iter().find(|(_, t)| t.grad().is_none()) {
        return Err(Error::Contract(format!("parameter {name} has no gradient")));
    }

    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - config.beta1.powi(t);
    let correction2 = 1.0 - config.beta2.powi(t);

    for (((_, tensor), m), v) in params
        .iter_mut()
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        let grad = tensor.take_grad().expect("checked above");
        for (i, theta) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[i] + config.weight_decay * *theta;
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            *theta -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}
