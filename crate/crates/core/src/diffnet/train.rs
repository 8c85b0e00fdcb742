use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{Architecture, Head, NetworkParams};
use super::optim::{Optimizer, OptimizerKind};
use super::tape::Tape;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::evidential::SubjectiveLogicConfig;
use crate::real::Real;
use crate::sim::{derive_seed, D4};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Only used by SGD with momentum.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Random flips and quarter turns of every training example.
    pub augment: bool,
    /// Percentile of the evidence samples used by the conservative head.
    pub percentile: f64,
    /// Dropout samples drawn at inference.
    pub mc_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 8,
            epochs: 30,
            seed: 0,
            augment: true,
            percentile: 10.0,
            mc_samples: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.mc_samples == 0 {
            return Err(Error::Config("learning_rate, batch_size and mc_samples must be positive".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::Config("percentile must lie in (0, 100]".into()));
        }
        Ok(())
    }
}

/// One training pair: a `[1, C, H, W]` input and per-cell target masses
/// `(b_f, b_o, u)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub input: Tensor<T>,
    pub target: Vec<[f64; 3]>,
}

impl<T: Real> Example<T> {
    pub fn new(input: Tensor<T>, target: Vec<[f64; 3]>) -> Result<Self> {
        let [n, _, h, w] = input.shape();
        if n != 1 || h != w || h * w != target.len() {
            return Err(Error::Shape(format!("input {:?} with {} targets", input.shape(), target.len())));
        }
        Ok(Self { input, target })
    }

    pub fn side(&self) -> usize {
        self.input.shape()[2]
    }

    pub fn augmented(&self, t: D4) -> Self {
        let [_, c, n, _] = self.input.shape();
        let mut data = Vec::with_capacity(self.input.len());
        for ch in 0..c {
            data.extend(t.apply_plane(self.input.plane(0, ch), n));
        }
        Self {
            input: Tensor::new(self.input.shape(), data).expect("same shape"),
            target: t.apply_plane(&self.target, n),
        }
    }
}

/// Stacks examples into one batch.
pub fn stack<T: Real>(examples: &[&Example<T>]) -> Result<(Tensor<T>, Vec<[f64; 3]>)> {
    let first = examples.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    let [_, c, h, w] = first.input.shape();
    let mut data = Vec::with_capacity(examples.len() * c * h * w);
    let mut target = Vec::with_capacity(examples.len() * h * w);
    for e in examples {
        if e.input.shape() != first.input.shape() {
            return Err(Error::Shape("examples of different shapes in one batch".into()));
        }
        data.extend_from_slice(e.input.data());
        target.extend_from_slice(&e.target);
    }
    Ok((Tensor::new([examples.len(), c, h, w], data)?, target))
}

/// Head-specific loss on a batch and, if requested, its gradient for every
/// parameter tensor.
pub fn loss_and_gradients<T: Real>(
    params: &NetworkParams<T>,
    input: &Tensor<T>,
    target: &[[f64; 3]],
    dropout_seed: Option<u64>,
    sl: &SubjectiveLogicConfig,
    with_grads: bool,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone());
    let rec = params.record(&mut tape, x, dropout_seed)?;
    let loss = match params.architecture().head {
        Head::Softmax3 => tape.softmax_ce(rec.output, target)?,
        Head::Evidence2 => {
            let e = tape.evidence(rec.output);
            tape.evidential_loss(e, target, sl)?
        }
    };
    let value = tape.value(loss).item().f64();
    if !with_grads {
        return Ok((value, Vec::new()));
    }
    let g = tape.backward(loss);
    let grads = rec.params.iter().zip(params.tensors()).map(|(&v, t)| g.get_or_zeros(v, t.shape())).collect();
    Ok((value, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
}

/// Mean loss over `examples` with dropout off.
pub fn evaluate_loss<T: Real>(
    params: &NetworkParams<T>,
    examples: &[Example<T>],
    batch: usize,
    sl: &SubjectiveLogicConfig,
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in examples.chunks(batch.max(1)) {
        let refs: Vec<&Example<T>> = chunk.iter().collect();
        let (x, t) = stack(&refs)?;
        total += loss_and_gradients(params, &x, &t, None, sl, false)?.0 * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: NetworkParams<T>,
    pub metrics: Vec<MetricRow>,
}

/// Seeded minibatch training. `on_epoch` sees the parameters after every
/// epoch together with all metrics so far.
pub fn train<T: Real>(
    arch: Architecture,
    train_set: &[Example<T>],
    val_set: &[Example<T>],
    cfg: &TrainConfig,
    sl: &SubjectiveLogicConfig,
    mut on_epoch: impl FnMut(usize, &NetworkParams<T>, &[MetricRow]) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let mut params = NetworkParams::init(arch, derive_seed(cfg.seed, 0))?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.momentum, params.tensors())?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Vec::new();
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut sum = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let owned: Vec<Example<T>> = chunk
                .iter()
                .map(|&i| {
                    if cfg.augment {
                        let t = D4 { flip: order_rng.random_bool(0.5), rot: order_rng.random_range(0..4) };
                        train_set[i].augmented(t)
                    } else {
                        train_set[i].clone()
                    }
                })
                .collect();
            let refs: Vec<&Example<T>> = owned.iter().collect();
            let (x, t) = stack(&refs)?;
            let seed = derive_seed(derive_seed(cfg.seed, 2), step);
            let (loss, grads) = loss_and_gradients(&params, &x, &t, Some(seed), sl, true)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, step: bi });
            }
            opt.step(params.tensors_mut(), &grads);
            sum += loss * chunk.len() as f64;
            step += 1;
        }
        if !train_set.is_empty() {
            metrics.push(MetricRow { epoch, split: Split::Train, loss: sum / train_set.len() as f64 });
        }
        if !val_set.is_empty() {
            let loss = evaluate_loss(&params, val_set, cfg.batch_size, sl)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step: 0 });
            }
            metrics.push(MetricRow { epoch, split: Split::Val, loss });
        }
        on_epoch(epoch, &params, &metrics)?;
    }
    Ok(TrainOutcome { params, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_sample, SimConfig};

    pub(crate) fn examples(n: usize) -> Vec<Example<f32>> {
        let cfg = SimConfig::default();
        (0..n)
            .map(|i| {
                let s = generate_sample(derive_seed(77, i as u64), &cfg).unwrap();
                let side = cfg.grid.side_cells;
                let planes = s.radar.planes();
                let data = planes.iter().flatten().map(|&v| v as f32).collect();
                let input = Tensor::new([1, 2, side, side], data).unwrap();
                let target = s.target.grid().cells().iter().map(|c| c.vector()).collect();
                Example::new(input, target).unwrap()
            })
            .collect()
    }

    #[test]
    fn smoke_one_epoch() {
        let ex = examples(10);
        for head in [Head::Softmax3, Head::Evidence2] {
            let arch = Architecture { head, ..Architecture::default() };
            let cfg = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
            let out = train(arch, &ex[..8], &ex[8..], &cfg, &SubjectiveLogicConfig::default(), |_, _, _| Ok(())).unwrap();
            assert_eq!(out.metrics.len(), 2);
            assert!(out.metrics.iter().all(|m| m.loss.is_finite()));
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let ex = examples(6);
        let arch = Architecture::default();
        let cfg = TrainConfig { epochs: 2, batch_size: 3, ..TrainConfig::default() };
        let sl = SubjectiveLogicConfig::default();
        let a = train(arch.clone(), &ex, &[], &cfg, &sl, |_, _, _| Ok(())).unwrap();
        let b = train(arch, &ex, &[], &cfg, &sl, |_, _, _| Ok(())).unwrap();
        assert_eq!(a.params, b.params);
    }

    fn descend(kind: OptimizerKind, head: Head, steps: usize) -> Vec<f64> {
        let ex = examples(8);
        let refs: Vec<&Example<f32>> = ex.iter().collect();
        let (x, t) = stack(&refs).unwrap();
        let sl = SubjectiveLogicConfig::default();
        let arch = Architecture { head, dropout: 0.0, ..Architecture::default() };
        let mut p = NetworkParams::<f32>::init(arch, 4).unwrap();
        let mut opt = Optimizer::new(kind, 1e-3, 0.9, p.tensors()).unwrap();
        (0..steps)
            .map(|_| {
                let (l, g) = loss_and_gradients(&p, &x, &t, None, &sl, true).unwrap();
                opt.step(p.tensors_mut(), &g);
                l
            })
            .collect()
    }

    #[test]
    fn full_batch_loss_decreases() {
        for head in [Head::Softmax3, Head::Evidence2] {
            // Momentum SGD descends monotonically at this rate.
            let l = descend(OptimizerKind::SgdMomentum, head, 51);
            for w in l.windows(2) {
                assert!(w[1] < w[0], "{head:?}: {} !< {}", w[1], w[0]);
            }
            // Adam overshoots now and then but ends well below the start.
            let l = descend(OptimizerKind::Adam, head, 51);
            assert!(l[50] < 0.9 * l[0], "{head:?}: {} vs {}", l[50], l[0]);
        }
    }

    #[test]
    fn augmentation_moves_input_and_target_together() {
        let ex = &examples(1)[0];
        let t = D4 { flip: true, rot: 3 };
        let a = ex.augmented(t);
        let n = ex.side();
        for r in 0..n {
            for c in 0..n {
                let d = t.map_cell(crate::grid::Cell::new(r, c), n);
                assert_eq!(a.target[d.row * n + d.col], ex.target[r * n + c]);
                assert_eq!(a.input.at(0, 1, d.row, d.col), ex.input.at(0, 1, r, c));
            }
        }
    }
}
