//! Small differentiable scorers with an explicit vector-Jacobian product.
//!
//! Parameter layout (row-major, flattened):
//! - `linear`: `W (output_dim x input_dim)`, then `b (output_dim)`.
//! - `mlp1`:   `W1 (hidden_dim x input_dim)`, `b1 (hidden_dim)`,
//!   `W2 (output_dim x hidden_dim)`, `b2 (output_dim)`; hidden activation `tanh`.
//!
//! Either kind may squash its outputs through a sigmoid.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, XriskError};

/// Flat parameter (or parameter-gradient) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Mlp1,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp1 => "mlp1",
        })
    }
}

impl FromStr for ModelKind {
    type Err = XriskError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp1" => Ok(ModelKind::Mlp1),
            other => Err(XriskError::config_key(
                "model",
                format!("unknown model kind `{other}`"),
            )),
        }
    }
}

/// Applied elementwise to the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Identity,
    Sigmoid,
}

impl fmt::Display for OutputActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for OutputActivation {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(OutputActivation::Identity),
            "sigmoid" => Ok(OutputActivation::Sigmoid),
            other => Err(XriskError::config_key(
                "score_activation",
                format!("unknown output activation `{other}`"),
            )),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoringModel {
    kind: ModelKind,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    output: OutputActivation,
}

impl ScoringModel {
    pub fn linear(input_dim: usize, output_dim: usize) -> Result<Self> {
        Self::new(ModelKind::Linear, input_dim, 0, output_dim)
    }

    pub fn mlp1(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Result<Self> {
        Self::new(ModelKind::Mlp1, input_dim, hidden_dim, output_dim)
    }

    pub fn new(
        kind: ModelKind,
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || (kind == ModelKind::Mlp1 && hidden_dim == 0) {
            return Err(XriskError::config_key(
                "model",
                "model dimensions must be positive",
            ));
        }
        let hidden_dim = if kind == ModelKind::Linear { 0 } else { hidden_dim };
        Ok(Self {
            kind,
            input_dim,
            hidden_dim,
            output_dim,
            output: OutputActivation::Identity,
        })
    }

    pub fn with_output(mut self, output: OutputActivation) -> Self {
        self.output = output;
        self
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            ModelKind::Linear => self.output_dim * (self.input_dim + 1),
            ModelKind::Mlp1 => {
                self.hidden_dim * (self.input_dim + 1) + self.output_dim * (self.hidden_dim + 1)
            }
        }
    }

    /// Offset of the final layer's weights inside the flat vector.
    pub fn last_layer_offset(&self) -> usize {
        match self.kind {
            ModelKind::Linear => 0,
            ModelKind::Mlp1 => self.hidden_dim * (self.input_dim + 1),
        }
    }

    fn check_params(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_params() {
            return Err(XriskError::Shape(format!(
                "{} model expects {} parameters, got {}",
                self.kind,
                self.n_params(),
                w.len()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(XriskError::Shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn layer<'a>(
        w: &'a [f64],
        offset: usize,
        rows: usize,
        cols: usize,
    ) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let wm = ArrayView2::from_shape((rows, cols), &w[offset..offset + rows * cols])
            .expect("layer slice has the declared shape");
        let b = ArrayView1::from(&w[offset + rows * cols..offset + rows * cols + rows]);
        (wm, b)
    }

    fn affine(x: &ArrayView2<f64>, wm: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
        let mut z = x.dot(&wm.t());
        z += b;
        z
    }

    /// One output row per input row.
    pub fn forward(&self, w: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.pre_activation(w, x)?;
        Ok(match self.output {
            OutputActivation::Identity => z,
            OutputActivation::Sigmoid => z.mapv(sigmoid),
        })
    }

    fn pre_activation(&self, w: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_params(w)?;
        self.check_input(&x)?;
        Ok(match self.kind {
            ModelKind::Linear => {
                let (wm, b) = Self::layer(w, 0, self.output_dim, self.input_dim);
                Self::affine(&x, &wm, &b)
            }
            ModelKind::Mlp1 => {
                let (w1, b1) = Self::layer(w, 0, self.hidden_dim, self.input_dim);
                let h = Self::affine(&x, &w1, &b1).mapv(f64::tanh);
                let (w2, b2) =
                    Self::layer(w, self.last_layer_offset(), self.output_dim, self.hidden_dim);
                Self::affine(&h.view(), &w2, &b2)
            }
        })
    }

    /// Scalar scores for a model with `output_dim == 1`.
    pub fn scores(&self, w: &[f64], x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if self.output_dim != 1 {
            return Err(XriskError::Shape(format!(
                "scalar scores need output_dim 1, model has {}",
                self.output_dim
            )));
        }
        Ok(self.forward(w, x)?.column(0).to_vec())
    }

    /// `sum_rows upstream[r] . d forward[r] / d w`.
    pub fn vjp(&self, w: &[f64], x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<ParamVector> {
        self.check_params(w)?;
        self.check_input(&x)?;
        if upstream.dim() != (x.nrows(), self.output_dim) {
            return Err(XriskError::Shape(format!(
                "upstream is {:?}, forward output is ({}, {})",
                upstream.dim(),
                x.nrows(),
                self.output_dim
            )));
        }
        let squashed;
        let upstream = match self.output {
            OutputActivation::Identity => upstream,
            OutputActivation::Sigmoid => {
                let s = self.forward(w, x)?;
                squashed = &upstream * &s.mapv(|v| v * (1.0 - v));
                squashed.view()
            }
        };
        let mut grad = Vec::with_capacity(self.n_params());
        match self.kind {
            ModelKind::Linear => {
                grad.extend(upstream.t().dot(&x).iter());
                grad.extend(upstream.sum_axis(Axis(0)).iter());
            }
            ModelKind::Mlp1 => {
                let (w1, b1) = Self::layer(w, 0, self.hidden_dim, self.input_dim);
                let h = Self::affine(&x, &w1, &b1).mapv(f64::tanh);
                let (w2, _) =
                    Self::layer(w, self.last_layer_offset(), self.output_dim, self.hidden_dim);
                let dh = upstream.dot(&w2);
                let da = dh * h.mapv(|v| 1.0 - v * v);
                grad.extend(da.t().dot(&x).iter());
                grad.extend(da.sum_axis(Axis(0)).iter());
                grad.extend(upstream.t().dot(&h).iter());
                grad.extend(upstream.sum_axis(Axis(0)).iter());
            }
        }
        Ok(ParamVector(grad))
    }

    /// VJP for a scalar model given one upstream value per row.
    pub fn score_vjp(&self, w: &[f64], x: ArrayView2<f64>, upstream: &[f64]) -> Result<ParamVector> {
        let u = ArrayView2::from_shape((upstream.len(), 1), upstream)
            .map_err(|e| XriskError::Shape(e.to_string()))?;
        self.vjp(w, x, u)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases,
    /// drawn from ChaCha8 seeded with `seed`.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Vec::with_capacity(self.n_params());
        let mut fill = |count: usize, fan_in: usize, w: &mut Vec<f64>| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            w.extend((0..count).map(|_| dist.sample(&mut rng)));
        };
        match self.kind {
            ModelKind::Linear => fill(self.n_params(), self.input_dim, &mut w),
            ModelKind::Mlp1 => {
                fill(self.hidden_dim * (self.input_dim + 1), self.input_dim, &mut w);
                fill(self.output_dim * (self.hidden_dim + 1), self.hidden_dim, &mut w);
            }
        }
        ParamVector(w)
    }

    /// Redraws the final layer with the same scheme as [`init_params`](Self::init_params).
    pub fn reinit_last_layer(&self, w: &mut ParamVector, seed: u64) -> Result<()> {
        self.check_params(w)?;
        let fresh = self.init_params(seed);
        let off = self.last_layer_offset();
        w[off..].copy_from_slice(&fresh[off..]);
        Ok(())
    }

    /// Two-line checkpoint: a `#` header naming kind and dims, then one CSV row.
    pub fn params_to_csv(&self, w: &[f64]) -> Result<String> {
        self.check_params(w)?;
        let row: Vec<String> = w.iter().map(|v| format_f64(*v)).collect();
        Ok(format!(
            "# kind={} input_dim={} hidden_dim={} output_dim={} output={}\n{}\n",
            self.kind,
            self.input_dim,
            self.hidden_dim,
            self.output_dim,
            self.output,
            row.join(",")
        ))
    }

    pub fn params_from_csv(text: &str) -> Result<(ScoringModel, ParamVector)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(XriskError::Parse {
            row: 1,
            msg: "missing header".into(),
        })?;
        let body = header.strip_prefix('#').ok_or(XriskError::Parse {
            row: 1,
            msg: "header must start with `#`".into(),
        })?;
        let mut kind = None;
        let mut output = OutputActivation::Identity;
        let (mut input_dim, mut hidden_dim, mut output_dim) = (0, 0, 0);
        for field in body.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or(XriskError::Parse {
                row: 1,
                msg: format!("bad header field `{field}`"),
            })?;
            let num = || {
                v.parse::<usize>().map_err(|_| XriskError::Parse {
                    row: 1,
                    msg: format!("bad integer for `{k}`"),
                })
            };
            match k {
                "kind" => kind = Some(v.parse::<ModelKind>()?),
                "input_dim" => input_dim = num()?,
                "hidden_dim" => hidden_dim = num()?,
                "output_dim" => output_dim = num()?,
                "output" => output = v.parse()?,
                _ => {
                    return Err(XriskError::Parse {
                        row: 1,
                        msg: format!("unknown header field `{k}`"),
                    })
                }
            }
        }
        let kind = kind.ok_or(XriskError::Parse {
            row: 1,
            msg: "header lacks kind".into(),
        })?;
        let model = ScoringModel::new(kind, input_dim, hidden_dim, output_dim)?.with_output(output);
        let row = lines.next().unwrap_or("");
        let values = row
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| XriskError::Parse {
                    row: 2,
                    msg: format!("bad value `{s}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        model.check_params(&values)?;
        Ok((model, ParamVector(values)))
    }
}

/// Shortest decimal that parses back to the identical `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Gathers the given rows of a feature matrix.
pub fn gather_rows(features: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    features.select(Axis(0), rows)
}

pub fn to_array1(v: &[f64]) -> Array1<f64> {
    Array1::from(v.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_forward_examples() {
        let m = ScoringModel::linear(2, 1).unwrap();
        let w = [1.0, 0.0, 0.0];
        let x = array![[2.0, 5.0]];
        assert_eq!(m.scores(&w, x.view()).unwrap(), vec![2.0]);
        let zero = [0.0; 3];
        assert_eq!(m.scores(&zero, array![[3.0, -7.0]].view()).unwrap(), vec![0.0]);
    }

    #[test]
    fn mlp_forward_matches_hand_arithmetic() {
        let m = ScoringModel::mlp1(2, 3, 1).unwrap();
        let w = m.init_params(11);
        let x = [0.3, -1.2];
        // straight-line recompute from the documented layout
        let mut out = w[12];
        for h in 0..3 {
            let a = w[2 * h] * x[0] + w[2 * h + 1] * x[1] + w[6 + h];
            out += w[9 + h] * a.tanh();
        }
        let got = m.scores(&w, array![[0.3, -1.2]].view()).unwrap();
        assert!((got[0] - out).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = ScoringModel::linear(3, 1).unwrap();
        let w = m.init_params(0);
        let err = m.forward(&w, array![[1.0, 2.0]].view()).unwrap_err();
        assert!(matches!(err, XriskError::Shape(_)));
    }

    #[test]
    fn linear_vjp_examples() {
        let m = ScoringModel::linear(2, 1).unwrap();
        let w = [0.4, -0.1, 0.2];
        let x = array![[2.0, 5.0]];
        assert_eq!(m.score_vjp(&w, x.view(), &[1.0]).unwrap().0, vec![2.0, 5.0, 1.0]);
        assert_eq!(m.score_vjp(&w, x.view(), &[0.0]).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn vjp_rejects_wrong_upstream() {
        let m = ScoringModel::linear(2, 1).unwrap();
        let w = [0.4, -0.1, 0.2];
        let x = array![[2.0, 5.0], [1.0, 1.0]];
        assert!(matches!(
            m.score_vjp(&w, x.view(), &[1.0]).unwrap_err(),
            XriskError::Shape(_)
        ));
    }

    #[test]
    fn mlp_vjp_matches_central_differences() {
        for m in [
            ScoringModel::mlp1(3, 4, 2).unwrap(),
            ScoringModel::mlp1(3, 4, 2).unwrap().with_output(OutputActivation::Sigmoid),
            ScoringModel::linear(3, 2).unwrap().with_output(OutputActivation::Sigmoid),
        ] {
            check_vjp(m);
        }
    }

    #[test]
    fn sigmoid_output_round_trips_through_csv() {
        let m = ScoringModel::linear(2, 1).unwrap().with_output(OutputActivation::Sigmoid);
        let w = m.init_params(3);
        let (back, wb) = ScoringModel::params_from_csv(&m.params_to_csv(&w).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(wb, w);
        let s = m.scores(&[0.0, 0.0, 0.0], array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(s, vec![0.5]);
    }

    fn check_vjp(m: ScoringModel) {
        let w = m.init_params(5);
        let x = array![[0.5, -0.3, 1.1], [-0.7, 0.2, 0.4], [0.0, 1.5, -1.0]];
        let up = array![[0.3, -1.0], [1.2, 0.5], [-0.4, 0.8]];
        let g = m.vjp(&w, x.view(), up.view()).unwrap();
        let f = |wv: &[f64]| (m.forward(wv, x.view()).unwrap() * &up).sum();
        let h = 1e-5;
        for k in 0..w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let fd = (f(&wp) - f(&wm)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1.0), "coord {k}");
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let m = ScoringModel::linear(3, 1).unwrap();
        assert_eq!(m.n_params(), 4);
        assert_eq!(m.init_params(7), m.init_params(7));
        assert_ne!(m.init_params(7), m.init_params(8));
        let bound = 1.0 / 3f64.sqrt();
        assert!(m.init_params(1).iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn reinit_touches_only_last_layer() {
        let m = ScoringModel::mlp1(2, 3, 1).unwrap();
        let mut w = m.init_params(1);
        let before = w.clone();
        m.reinit_last_layer(&mut w, 99).unwrap();
        let off = m.last_layer_offset();
        assert_eq!(&w[..off], &before[..off]);
        assert_ne!(&w[off..], &before[off..]);
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let m = ScoringModel::mlp1(3, 2, 1).unwrap();
        let w = m.init_params(3);
        let text = m.params_to_csv(&w).unwrap();
        assert!(text.starts_with("# kind=mlp1 input_dim=3 hidden_dim=2 output_dim=1 output=identity\n"));
        let (m2, w2) = ScoringModel::params_from_csv(&text).unwrap();
        assert_eq!(m, m2);
        assert_eq!(w, w2);
    }
}
