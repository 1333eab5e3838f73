use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the gate projection reads from the type head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateInput {
    #[default]
    Logits,
    Probabilities,
}

/// Shape and wiring of a head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadArch {
    pub image_dim: usize,
    pub text_dim: usize,
    /// Output width of each trunk layer; the last entry is the hidden size H.
    pub hidden_dims: Vec<usize>,
    pub num_answers: usize,
    pub num_types: usize,
    #[serde(default)]
    pub trunk_relu: bool,
    #[serde(default)]
    pub gate_input: GateInput,
}

impl HeadArch {
    /// Single trunk layer, no ReLU, gate on type logits.
    pub fn new(image_dim: usize, text_dim: usize, hidden: usize, answers: usize, types: usize) -> Self {
        Self {
            image_dim,
            text_dim,
            hidden_dims: vec![hidden],
            num_answers: answers,
            num_types: types,
            trunk_relu: false,
            gate_input: GateInput::Logits,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.image_dim + self.text_dim
    }

    pub fn hidden_dim(&self) -> usize {
        *self.hidden_dims.last().expect("validated arch has a trunk")
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("image_dim", self.image_dim),
            ("text_dim", self.text_dim),
            ("num_answers", self.num_answers),
            ("num_types", self.num_types),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::validation(format!("{name} must be at least 1")));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::validation("hidden_dims must be non-empty and positive"));
        }
        Ok(())
    }
}

/// Row-major `rows × cols` matrix. Weights are stored input-major, so a
/// layer maps `x` (length `rows`) to `x W` (length `cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols
    }

    /// `x W + b`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.weight.rows);
        let mut out = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.weight.row(i)) {
                *o += xi * w;
            }
        }
        out
    }

    /// `W dy`, the gradient with respect to the layer input.
    pub fn back(&self, dy: &[f64]) -> Vec<f64> {
        (0..self.weight.rows)
            .map(|i| self.weight.row(i).iter().zip(dy).map(|(w, d)| w * d).sum())
            .collect()
    }

    /// Adds `scale · (xᵀ dy, dy)` into `self` viewed as a gradient.
    pub fn accumulate(&mut self, x: &[f64], dy: &[f64], scale: f64) {
        let cols = self.weight.cols;
        for (i, &xi) in x.iter().enumerate() {
            let a = scale * xi;
            if a == 0.0 {
                continue;
            }
            let row = &mut self.weight.data[i * cols..(i + 1) * cols];
            for (g, &d) in row.iter_mut().zip(dy) {
                *g += a * d;
            }
        }
        for (g, &d) in self.bias.iter_mut().zip(dy) {
            *g += scale * d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
        }
    }

    fn zeros(dim: usize) -> Self {
        Self {
            gamma: vec![0.0; dim],
            beta: vec![0.0; dim],
        }
    }
}

/// Every trainable tensor of the head. The same type holds gradients and
/// optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedHeadParams {
    pub arch: HeadArch,
    pub ln_in: LayerNorm,
    pub trunk: Vec<Linear>,
    pub ln_hidden: LayerNorm,
    pub answer: Linear,
    pub answer_type: Linear,
    pub gate: Linear,
}

impl GatedHeadParams {
    pub fn zeros(arch: &HeadArch) -> Result<Self> {
        arch.validate()?;
        let mut trunk = Vec::with_capacity(arch.hidden_dims.len());
        let mut fan_in = arch.input_dim();
        for &h in &arch.hidden_dims {
            trunk.push(Linear::zeros(fan_in, h));
            fan_in = h;
        }
        Ok(Self {
            arch: arch.clone(),
            ln_in: LayerNorm::zeros(arch.input_dim()),
            trunk,
            ln_hidden: LayerNorm::zeros(arch.hidden_dim()),
            answer: Linear::zeros(arch.hidden_dim(), arch.num_answers),
            answer_type: Linear::zeros(arch.hidden_dim(), arch.num_types),
            gate: Linear::zeros(arch.num_types, arch.num_answers),
        })
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch).expect("arch already validated")
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["ln_in.gamma".to_string(), "ln_in.beta".to_string()];
        for i in 0..self.trunk.len() {
            names.push(format!("trunk.{i}.weight"));
            names.push(format!("trunk.{i}.bias"));
        }
        names.extend(
            [
                "ln_hidden.gamma",
                "ln_hidden.beta",
                "answer.weight",
                "answer.bias",
                "answer_type.weight",
                "answer_type.bias",
                "gate.weight",
                "gate.bias",
            ]
            .map(String::from),
        );
        names
    }

    /// Tensors in declaration order; this order is also the checkpoint layout.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.ln_in.gamma, &self.ln_in.beta];
        for l in &self.trunk {
            out.push(&l.weight.data);
            out.push(&l.bias);
        }
        out.extend([
            self.ln_hidden.gamma.as_slice(),
            &self.ln_hidden.beta,
            &self.answer.weight.data,
            &self.answer.bias,
            &self.answer_type.weight.data,
            &self.answer_type.bias,
            &self.gate.weight.data,
            &self.gate.bias,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.ln_in.gamma, &mut self.ln_in.beta];
        for l in &mut self.trunk {
            out.push(&mut l.weight.data);
            out.push(&mut l.bias);
        }
        out.extend([
            self.ln_hidden.gamma.as_mut_slice(),
            &mut self.ln_hidden.beta,
            &mut self.answer.weight.data,
            &mut self.answer.bias,
            &mut self.answer_type.weight.data,
            &mut self.answer_type.bias,
            &mut self.gate.weight.data,
            &mut self.gate.bias,
        ]);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Fails when `other` does not have exactly this layout.
    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::Dimension(format!(
                "parameter architectures differ: {:?} vs {:?}",
                self.arch, other.arch
            )));
        }
        let a = self.tensors();
        let b = other.tensors();
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.len() != y.len()) {
            return Err(Error::Dimension("parameter tensor shapes differ".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        let src = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

/// Weights uniform in ±1/√fan_in from a ChaCha8 stream seeded with `seed`,
/// biases zero, layer-norm gains one and shifts zero.
pub fn init_params(arch: &HeadArch, seed: u64) -> Result<GatedHeadParams> {
    let mut p = GatedHeadParams::zeros(arch)?;
    p.ln_in = LayerNorm::identity(arch.input_dim());
    p.ln_hidden = LayerNorm::identity(arch.hidden_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |l: &mut Linear| {
        let bound = 1.0 / (l.inputs() as f64).sqrt();
        for w in &mut l.weight.data {
            *w = rng.gen_range(-bound..bound);
        }
    };
    for l in &mut p.trunk {
        fill(l);
    }
    fill(&mut p.answer);
    fill(&mut p.answer_type);
    fill(&mut p.gate);
    Ok(p)
}
