use alloc::vec::Vec;

use super::loss::softmax3;
use super::net::{Head, NetworkParams};
use super::tape::EVIDENCE_CAP;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::evidential::{
    evidence_to_evidential, mean_reduce, percentile_reduce, EpistemicSamples, EvidentialState, Evidence,
    SubjectiveLogicConfig,
};
use crate::grid::{Grid2D, GridSpec, Pose2D};
use crate::real::Real;

/// How dropout samples of evidence are reduced per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    Mean,
    Percentile(f64),
}

/// `n` dropout-on forward passes of a single `[1, C, H, W]` input, run as
/// one batch. Returns the pre-head outputs `[n, C_out, H, W]`.
pub fn mc_samples<T: Real>(params: &NetworkParams<T>, input: &Tensor<T>, n: usize, seed: u64) -> Result<Tensor<T>> {
    let [b, c, h, w] = input.shape();
    if n == 0 || b != 1 {
        return Err(Error::Config("need at least one sample of a single input".into()));
    }
    let mut data = Vec::with_capacity(n * input.len());
    for _ in 0..n {
        data.extend_from_slice(input.data());
    }
    params.forward(&Tensor::new([n, c, h, w], data)?, Some(seed))
}

/// Per-cell evidential states from evidence-head samples.
pub fn reduce_evidence<T: Real>(samples: &Tensor<T>, mode: Reduction, cfg: &SubjectiveLogicConfig) -> Result<Vec<EvidentialState>> {
    let [n, c, h, w] = samples.shape();
    if c != 2 {
        return Err(Error::Shape("evidence head has two channels".into()));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(hw);
    for j in 0..hw {
        let per_sample = (0..n)
            .map(|s| {
                let e = (0..2)
                    .map(|k| {
                        let y = samples.data()[(s * 2 + k) * hw + j].f64();
                        (y * y).min(EVIDENCE_CAP)
                    })
                    .collect();
                Evidence::new(e)
            })
            .collect::<Result<Vec<_>>>()?;
        let set = EpistemicSamples::new(per_sample)?;
        let e = match mode {
            Reduction::Mean => mean_reduce(&set)?,
            Reduction::Percentile(p) => percentile_reduce(&set, p)?,
        };
        out.push(evidence_to_evidential(&e, cfg)?);
    }
    Ok(out)
}

/// Softmax of the sample mean of three-channel logits, read as `(b_f, b_o, u)`.
pub fn reduce_softmax<T: Real>(samples: &Tensor<T>) -> Result<Vec<EvidentialState>> {
    let [n, c, h, w] = samples.shape();
    if c != 3 {
        return Err(Error::Shape("softmax head has three channels".into()));
    }
    let hw = h * w;
    (0..hw)
        .map(|j| {
            let mut z = [0.0; 3];
            for s in 0..n {
                for (k, zk) in z.iter_mut().enumerate() {
                    *zk += samples.data()[(s * 3 + k) * hw + j].f64();
                }
            }
            let p = softmax3(z.map(|v| v / n as f64));
            // Renormalise in case rounding left the sum a hair off 1.
            let s = p[0] + p[1] + p[2];
            EvidentialState::new(p[0] / s, p[1] / s, p[2] / s)
        })
        .collect()
}

/// Monte-Carlo dropout prediction as a grid of evidential states. `mode`
/// only matters for the evidence head.
#[allow(clippy::too_many_arguments)]
pub fn mc_predict<T: Real>(
    params: &NetworkParams<T>,
    input: &Tensor<T>,
    n: usize,
    mode: Reduction,
    cfg: &SubjectiveLogicConfig,
    seed: u64,
    spec: GridSpec,
    origin: Pose2D,
) -> Result<Grid2D<EvidentialState>> {
    let samples = mc_samples(params, input, n, seed)?;
    let cells = match params.architecture().head {
        Head::Evidence2 => reduce_evidence(&samples, mode, cfg)?,
        Head::Softmax3 => reduce_softmax(&samples)?,
    };
    Grid2D::from_vec(spec, origin, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::net::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn input() -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Normal::new(0.0, 1.0).unwrap();
        Tensor::from_fn([1, 2, 16, 16], |_| d.sample(&mut rng))
    }

    #[test]
    fn one_sample_without_dropout_is_plain_forward() {
        let cfg = SubjectiveLogicConfig::default();
        let arch = Architecture { dropout: 0.0, widths: alloc::vec![4, 8], ..Architecture::default() };
        let p = NetworkParams::<f64>::init(arch, 2).unwrap();
        let x = input();
        let y = p.forward(&x, None).unwrap();
        let got = mc_predict(&p, &x, 1, Reduction::Mean, &cfg, 5, GridSpec::new(16, 0.5).unwrap(), Pose2D::default()).unwrap();
        for (j, s) in got.cells().iter().enumerate() {
            let e = Evidence::new(alloc::vec![y.data()[j] * y.data()[j], y.data()[256 + j] * y.data()[256 + j]]).unwrap();
            assert_eq!(*s, evidence_to_evidential(&e, &cfg).unwrap());
        }
    }

    #[test]
    fn percentile_is_more_conservative_than_high_percentile() {
        let cfg = SubjectiveLogicConfig::default();
        let arch = Architecture { widths: alloc::vec![4, 8], ..Architecture::default() };
        let p = NetworkParams::<f64>::init(arch, 3).unwrap();
        let s = mc_samples(&p, &input(), 16, 7).unwrap();
        let lo = reduce_evidence(&s, Reduction::Percentile(10.0), &cfg).unwrap();
        let hi = reduce_evidence(&s, Reduction::Percentile(90.0), &cfg).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            // Less evidence in every class means at least as much unknown mass.
            assert!(a.u >= b.u);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let arch = Architecture { head: Head::Softmax3, widths: alloc::vec![4, 8], ..Architecture::default() };
        let p = NetworkParams::<f32>::init(arch, 3).unwrap();
        let g = mc_predict(
            &p,
            &input().cast(),
            8,
            Reduction::Mean,
            &SubjectiveLogicConfig::default(),
            1,
            GridSpec::new(16, 0.5).unwrap(),
            Pose2D::default(),
        )
        .unwrap();
        for s in g.cells() {
            assert!((s.b_f + s.b_o + s.u - 1.0).abs() < 1e-12);
        }
    }
}
