//! Probabilistic and evidential cell states and the Subjective Logic
//! transforms between evidence, belief masses and Dirichlet expectations.
//!
//! All values here are `f64`. The network works in `f32` and converts at the
//! boundary.

use alloc::vec::Vec;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Free/occupied probabilities of one cell, `p_f + p_o = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilisticState {
    pub p_f: f64,
    pub p_o: f64,
}

impl ProbabilisticState {
    pub fn new(p_f: f64, p_o: f64) -> Result<Self> {
        for p in [p_f, p_o] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        if (p_f + p_o - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::ProbabilityOutOfRange(p_f + p_o));
        }
        Ok(Self { p_f, p_o })
    }

    /// State with occupancy probability `p_o`.
    pub fn occupied(p_o: f64) -> Result<Self> {
        Self::new(1.0 - p_o, p_o)
    }

    fn from_slice(p: &[f64]) -> Result<Self> {
        match p {
            [p_f, p_o] => Self::new(*p_f, *p_o),
            _ => Err(Error::Shape(alloc::format!(
                "binary state needs 2 classes, got {}",
                p.len()
            ))),
        }
    }
}

/// Free/occupied belief masses plus the unknown mass, `b_f + b_o + u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvidentialState {
    pub b_f: f64,
    pub b_o: f64,
    pub u: f64,
}

impl EvidentialState {
    /// Full ignorance.
    pub const VACUOUS: Self = Self { b_f: 0.0, b_o: 0.0, u: 1.0 };
    pub const FREE: Self = Self { b_f: 1.0, b_o: 0.0, u: 0.0 };
    pub const OCCUPIED: Self = Self { b_f: 0.0, b_o: 1.0, u: 0.0 };
    /// Equal free and occupied belief with no unknown mass.
    pub const CONFLICT: Self = Self { b_f: 0.5, b_o: 0.5, u: 0.0 };

    pub fn new(b_f: f64, b_o: f64, u: f64) -> Result<Self> {
        for m in [b_f, b_o, u] {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::ProbabilityOutOfRange(m));
            }
        }
        if (b_f + b_o + u - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::ProbabilityOutOfRange(b_f + b_o + u));
        }
        Ok(Self { b_f, b_o, u })
    }

    /// Binary Subjective Logic opinion for evidence `(e_f, e_o)` with `K = 2`.
    /// Callers guarantee finite, nonnegative evidence.
    #[inline]
    pub fn from_binary_evidence(e_f: f64, e_o: f64) -> Self {
        let s = 2.0 + e_f + e_o;
        Self { b_f: e_f / s, b_o: e_o / s, u: 2.0 / s }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.b_f, self.b_o, self.u]
    }
}

/// Nonnegative evidence per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence(Vec<f64>);

impl Evidence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidEvidence { index, value });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Class count and base rate. The base rate says how unknown mass is spread
/// back onto the classes when projecting to probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectiveLogicConfig {
    base_rate: Vec<f64>,
}

impl SubjectiveLogicConfig {
    /// Uniform base rate `1/K`.
    pub fn uniform(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(alloc::format!("need at least 2 classes, got {classes}")));
        }
        Ok(Self { base_rate: alloc::vec![1.0 / classes as f64; classes] })
    }

    pub fn with_base_rate(base_rate: Vec<f64>) -> Result<Self> {
        if base_rate.len() < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if base_rate.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("base rate components must lie in [0, 1]".into()));
        }
        let sum: f64 = base_rate.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Config(alloc::format!("base rate sums to {sum}, expected 1")));
        }
        Ok(Self { base_rate })
    }

    pub fn classes(&self) -> usize {
        self.base_rate.len()
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    fn check(&self, e: &Evidence) -> Result<()> {
        if e.classes() != self.classes() {
            return Err(Error::Shape(alloc::format!(
                "evidence has {} classes, config has {}",
                e.classes(),
                self.classes()
            )));
        }
        Ok(())
    }
}

impl Default for SubjectiveLogicConfig {
    fn default() -> Self {
        Self { base_rate: alloc::vec![0.5, 0.5] }
    }
}

/// Shape parameters of the Dirichlet induced by some evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Total strength `S = Σ α_k`.
    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Multinomial opinion: one belief mass per class plus the unknown mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    pub belief: Vec<f64>,
    pub uncertainty: f64,
}

/// `b = e / S`, `u = K / S` with `S = K + Σ e`.
pub fn evidence_to_opinion(e: &Evidence, cfg: &SubjectiveLogicConfig) -> Result<Opinion> {
    cfg.check(e)?;
    let k = cfg.classes() as f64;
    let s = k + e.total();
    Ok(Opinion { belief: e.as_slice().iter().map(|v| v / s).collect(), uncertainty: k / s })
}

/// Binary form of [`evidence_to_opinion`].
pub fn evidence_to_evidential(e: &Evidence, cfg: &SubjectiveLogicConfig) -> Result<EvidentialState> {
    let op = evidence_to_opinion(e, cfg)?;
    match op.belief.as_slice() {
        [b_f, b_o] => Ok(EvidentialState { b_f: *b_f, b_o: *b_o, u: op.uncertainty }),
        _ => Err(Error::Shape("binary state needs 2 classes".into())),
    }
}

/// `α_k = e_k + K a_k`.
pub fn evidence_to_dirichlet(e: &Evidence, cfg: &SubjectiveLogicConfig) -> Result<DirichletParams> {
    cfg.check(e)?;
    let k = cfg.classes() as f64;
    let alpha = e.as_slice().iter().zip(cfg.base_rate()).map(|(e, a)| e + k * a).collect();
    Ok(DirichletParams { alpha })
}

/// Mean of `Dir(α)`, `p_k = α_k / Σ α`.
pub fn dirichlet_expectation(d: &DirichletParams) -> Vec<f64> {
    let s = d.strength();
    d.alpha.iter().map(|a| a / s).collect()
}

/// Binary form of [`dirichlet_expectation`].
pub fn dirichlet_expectation_binary(d: &DirichletParams) -> Result<ProbabilisticState> {
    ProbabilisticState::from_slice(&dirichlet_expectation(d))
}

/// Projected probability `p = b + u a`.
pub fn projected_probability(op: &Opinion, cfg: &SubjectiveLogicConfig) -> Vec<f64> {
    op.belief.iter().zip(cfg.base_rate()).map(|(b, a)| b + op.uncertainty * a).collect()
}

/// Binary form of [`projected_probability`].
pub fn evidential_to_probability(
    s: &EvidentialState,
    cfg: &SubjectiveLogicConfig,
) -> Result<ProbabilisticState> {
    let op = Opinion { belief: alloc::vec![s.b_f, s.b_o], uncertainty: s.u };
    if cfg.classes() != 2 {
        return Err(Error::Shape("binary state needs 2 classes".into()));
    }
    ProbabilisticState::from_slice(&projected_probability(&op, cfg))
}

/// Evidence vectors drawn from repeated stochastic forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpistemicSamples {
    samples: Vec<Evidence>,
}

impl EpistemicSamples {
    pub fn new(samples: Vec<Evidence>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::EmptySamples);
        };
        let k = first.classes();
        if samples.iter().any(|s| s.classes() != k) {
            return Err(Error::Shape("samples disagree on class count".into()));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Evidence] {
        &self.samples
    }

    fn classes(&self) -> usize {
        self.samples[0].classes()
    }
}

/// Zero-based index of the nearest-rank `n`th percentile among `len` sorted
/// values: the `ceil(n/100 * len)`-th smallest.
pub fn percentile_rank(len: usize, n: f64) -> Result<usize> {
    if !(n > 0.0 && n <= 100.0) {
        return Err(Error::InvalidPercentile(n));
    }
    if len == 0 {
        return Err(Error::EmptySamples);
    }
    // n/100*len can land a hair above an integer through rounding (e.g.
    // 0.1*30); snap before taking the ceiling.
    let pos = n * len as f64 / 100.0;
    let snapped = libm::round(pos);
    let rank = if (pos - snapped).abs() < 1e-9 { snapped } else { libm::ceil(pos) };
    Ok((rank as usize).clamp(1, len) - 1)
}

/// Nearest-rank percentile of `values`, reordering the slice in place.
pub fn percentile_in_place(values: &mut [f64], n: f64) -> Result<f64> {
    let idx = percentile_rank(values.len(), n)?;
    let (_, v, _) = values.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*v)
}

/// Component-wise nearest-rank percentile over the samples.
pub fn percentile_reduce(s: &EpistemicSamples, n: f64) -> Result<Evidence> {
    let idx = percentile_rank(s.len(), n)?;
    let mut column = Vec::with_capacity(s.len());
    let mut out = Vec::with_capacity(s.classes());
    for k in 0..s.classes() {
        column.clear();
        column.extend(s.samples.iter().map(|e| e.0[k]));
        let (_, v, _) = column.select_nth_unstable_by(idx, f64::total_cmp);
        out.push(*v);
    }
    Ok(Evidence(out))
}

/// Component-wise arithmetic mean over the samples.
pub fn mean_reduce(s: &EpistemicSamples) -> Result<Evidence> {
    if s.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = s.len() as f64;
    let out = (0..s.classes())
        .map(|k| s.samples.iter().map(|e| e.0[k]).sum::<f64>() / n)
        .collect();
    Ok(Evidence(out))
}
