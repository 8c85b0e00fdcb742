use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Head {
    /// Three logits `(f, o, u)` for a softmax.
    Softmax3,
    /// Two outputs squared into evidence `(e_f, e_o)`.
    Evidence2,
}

impl Head {
    pub fn channels(self) -> usize {
        match self {
            Head::Softmax3 => 3,
            Head::Evidence2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Architecture {
    pub in_channels: usize,
    /// Channels per resolution level, finest first. The input side must be
    /// divisible by `2^widths.len()`.
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    /// Dropout after every block, in training and in sampling.
    pub dropout: f64,
    pub head: Head,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { in_channels: 2, widths: alloc::vec![8, 16, 32], leaky_slope: 0.1, dropout: 0.2, head: Head::Evidence2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Conv { stride: usize },
    Deconv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    kind: Kind,
    cin: usize,
    cout: usize,
    k: usize,
}

impl Layer {
    fn weight_shape(&self) -> [usize; 4] {
        match self.kind {
            Kind::Conv { .. } => [self.cout, self.cin, self.k, self.k],
            Kind::Deconv => [self.cin, self.cout, self.k, self.k],
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) || self.in_channels == 0 {
            return Err(Error::Config("network widths and input channels must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky slope must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    fn layers(&self) -> Vec<Layer> {
        let w = &self.widths;
        let d = w.len();
        let mut out = Vec::new();
        out.push(Layer { kind: Kind::Conv { stride: 1 }, cin: self.in_channels, cout: w[0], k: 3 });
        for i in 1..d {
            out.push(Layer { kind: Kind::Conv { stride: 2 }, cin: w[i - 1], cout: w[i], k: 3 });
        }
        out.push(Layer { kind: Kind::Conv { stride: 2 }, cin: w[d - 1], cout: w[d - 1], k: 3 });
        let mut cin = w[d - 1];
        for i in (0..d).rev() {
            out.push(Layer { kind: Kind::Deconv, cin, cout: w[i], k: 4 });
            cin = 2 * w[i];
        }
        out.push(Layer { kind: Kind::Conv { stride: 1 }, cin, cout: self.head.channels(), k: 3 });
        out
    }
}

/// Kernels and biases of the U-Net, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    arch: Architecture,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let tensors = arch
            .layers()
            .iter()
            .flat_map(|l| [Tensor::zeros(l.weight_shape()), Tensor::zeros([l.cout, 1, 1, 1])])
            .collect();
        Ok(Self { arch, tensors })
    }

    /// He-normal kernels, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = p.arch.layers();
        for (i, l) in layers.iter().enumerate() {
            let fan_in = match l.kind {
                Kind::Conv { .. } => l.cin * l.k * l.k,
                // Each output of a stride-2 deconvolution sees a quarter of the kernel.
                Kind::Deconv => l.cin * l.k * l.k / 4,
            };
            let std = libm::sqrt(2.0 / fan_in as f64);
            let normal = Normal::new(0.0, std).map_err(|e| Error::Config(format!("{e}")))?;
            for v in p.tensors[2 * i].data_mut() {
                *v = T::of(normal.sample(&mut rng));
            }
        }
        Ok(p)
    }

    pub fn from_tensors(arch: Architecture, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let want = Self::zeros(arch)?;
        if tensors.len() != want.tensors.len() || tensors.iter().zip(&want.tensors).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Shape("parameter tensors do not match the architecture".into()));
        }
        Ok(Self { arch: want.arch, tensors })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// All parameters flattened in layer order.
    pub fn flat(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::Shape(format!("{} values for {} parameters", values.len(), self.num_parameters())));
        }
        let mut it = values.iter();
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams { arch: self.arch.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }

    /// Records a forward pass. With `dropout_seed` set, dropout masks are
    /// drawn from that seed; otherwise dropout is off.
    pub fn record(&self, tape: &mut Tape<T>, input: Var, dropout_seed: Option<u64>) -> Result<Recorded> {
        let [_, c, h, w] = tape.value(input).shape();
        let d = self.arch.depth();
        if c != self.arch.in_channels {
            return Err(Error::Shape(format!("network expects {} input channels, got {c}", self.arch.in_channels)));
        }
        if h != w || h % (1 << d) != 0 || h == 0 {
            return Err(Error::Shape(format!("input side {h}x{w} must be square and divisible by {}", 1 << d)));
        }
        let params: Vec<Var> = self.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let slope = T::of(self.arch.leaky_slope);
        let rate = self.arch.dropout;
        let layers = self.arch.layers();

        let mut block = |tape: &mut Tape<T>, x: Var| -> Result<Var> {
            let y = tape.leaky_relu(x, slope);
            match rng.as_mut() {
                Some(r) => tape.dropout(y, rate, r),
                None => Ok(y),
            }
        };

        let mut skips = Vec::with_capacity(d);
        let mut x = input;
        let mut li = 0;
        for _ in 0..=d {
            let Kind::Conv { stride } = layers[li].kind else { unreachable!() };
            let z = tape.conv2d(x, params[2 * li], Some(params[2 * li + 1]), stride, 1)?;
            x = block(tape, z)?;
            skips.push(x);
            li += 1;
        }
        skips.pop();
        for _ in 0..d {
            let z = tape.conv_transpose2d(x, params[2 * li], Some(params[2 * li + 1]), 2, 1)?;
            let y = block(tape, z)?;
            x = tape.concat(y, skips.pop().expect("one skip per level"))?;
            li += 1;
        }
        let out = tape.conv2d(x, params[2 * li], Some(params[2 * li + 1]), 1, 1)?;
        Ok(Recorded { output: out, params })
    }

    /// Pre-head output for a batch.
    pub fn forward(&self, input: &Tensor<T>, dropout_seed: Option<u64>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone());
        let r = self.record(&mut tape, x, dropout_seed)?;
        Ok(tape.value(r.output).clone())
    }
}

/// Handles of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct Recorded {
    pub output: Var,
    /// One handle per parameter tensor, in [`NetworkParams::tensors`] order.
    pub params: Vec<Var>,
}
