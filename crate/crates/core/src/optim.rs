//! Parameter updates: momentum SGD, Adam, the primal-dual step for the
//! min-max AUC objective, and step learning-rate decay.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, XriskError};
use crate::losses::{AucmOutput, MinMaxState};
use crate::state::StateMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMode {
    SgdMomentum,
    Adam,
}

impl fmt::Display for OptimizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerMode::SgdMomentum => "sgd",
            OptimizerMode::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerMode {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" | "momentum" | "sgd_momentum" => Ok(OptimizerMode::SgdMomentum),
            "adam" => Ok(OptimizerMode::Adam),
            other => Err(XriskError::config_key("mode", format!("unknown optimizer mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub mode: OptimizerMode,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mode: OptimizerMode::SgdMomentum,
            lr: 0.1,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: String| Err(XriskError::config_key(k, m));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr", format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        for (k, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(k, format!("{k} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad("eps", format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay", format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        Ok(())
    }
}

/// Optimizer with its moment buffers.
///
/// Weight decay is added to the gradient in both modes. SGD uses
/// `v <- mu v + g + wd w; w <- w - lr v`. Adam uses
/// `w <- w - lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// Momentum buffer (SGD) or first moment (Adam).
    m: Vec<f64>,
    /// Second moment (Adam only; zeros otherwise).
    v: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Zero the buffers and the step count.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.step_count = 0;
    }

    /// One update at learning rate `config.lr * lr_mult`.
    pub fn step(&mut self, w: &mut [f64], grad: &[f64], lr_mult: f64) -> Result<()> {
        if w.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(XriskError::Shape(format!(
                "optimizer sized for {} parameters, got w {} / grad {}",
                self.m.len(),
                w.len(),
                grad.len()
            )));
        }
        let c = self.config;
        let lr = c.lr * lr_mult;
        self.step_count += 1;
        match c.mode {
            OptimizerMode::SgdMomentum => {
                for k in 0..w.len() {
                    self.m[k] = c.momentum * self.m[k] + grad[k] + c.weight_decay * w[k];
                    w[k] -= lr * self.m[k];
                }
            }
            OptimizerMode::Adam => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for k in 0..w.len() {
                    let g = grad[k] + c.weight_decay * w[k];
                    self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g;
                    self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g;
                    let mh = self.m[k] / bc1;
                    let vh = self.v[k] / bc2;
                    w[k] -= lr * mh / (vh.sqrt() + c.eps);
                }
            }
        }
        Ok(())
    }

    pub fn save(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put("mode", self.config.mode);
        s.put_f64s("m", &self.m);
        s.put_f64s("v", &self.v);
        s.put("step_count", self.step_count);
        s
    }

    /// Restores buffers saved by [`save`](Self::save); hyperparameters stay
    /// as configured.
    pub fn load(&mut self, s: &StateMap) -> Result<()> {
        let mode: OptimizerMode = s.get::<String>("mode")?.parse()?;
        if mode != self.config.mode {
            return Err(XriskError::Parse {
                row: 0,
                msg: format!("saved optimizer mode {mode} differs from {}", self.config.mode),
            });
        }
        let m: Vec<f64> = s.get_list("m")?;
        let v: Vec<f64> = s.get_list("v")?;
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(XriskError::Shape("saved optimizer buffers have the wrong length".into()));
        }
        self.m = m;
        self.v = v;
        self.step_count = s.get("step_count")?;
        Ok(())
    }
}

/// Primal-dual step for the min-max AUC objective: `w` through the optimizer,
/// plain descent on `a` and `b`, ascent on `alpha` followed by projection
/// onto `alpha >= 0`.
pub fn pesg_step(
    opt: &mut OptimizerState,
    w: &mut [f64],
    mm: &mut MinMaxState,
    grads: &AucmOutput,
    lr_mult: f64,
) -> Result<()> {
    opt.step(w, &grads.grad_w, lr_mult)?;
    let lr = opt.config.lr * lr_mult;
    mm.a -= lr * grads.grad_a;
    mm.b -= lr * grads.grad_b;
    mm.alpha = (mm.alpha + lr * grads.grad_alpha).max(0.0);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Divide by 10 at 50% and again at 75% of the epochs.
    Step { total_epochs: usize },
}

impl LrSchedule {
    pub fn multiplier(&self, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Step { total_epochs } => {
                if total_epochs == 0 || 2 * epoch < total_epochs {
                    1.0
                } else if 4 * epoch < 3 * total_epochs {
                    0.1
                } else {
                    0.01
                }
            }
        }
    }
}
