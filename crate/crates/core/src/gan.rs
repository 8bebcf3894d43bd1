//! Adversarial and cycle-consistency objectives on plain numbers.
//!
//! Everything here works on discriminator outputs and flat sample arrays,
//! so a training loop in any framework can feed it and a log verifier can
//! recompute it. Logs are natural, reductions are means, and probabilities
//! are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any logarithm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::ImageRaster;

pub const PROB_EPS: f64 = 1e-7;
pub const DEFAULT_LAMBDA_CYC: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GanError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("probability {0} is not a number in [0, 1]")]
    InvalidProbability(f64),
    #[error("shape mismatch: {0} vs {1} elements")]
    ShapeMismatch(usize, usize),
    #[error("non-finite input to the objective")]
    NonFinite,
    #[error("cycle weight must be >= 0, got {0}")]
    NegativeWeight(f64),
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Discriminator outputs on real samples `D(x)` and on generated samples
/// `D(G(z))`, clamped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbBatch {
    d_real: Vec<f64>,
    d_fake: Vec<f64>,
}

fn clamp_all(values: &[f64]) -> Result<Vec<f64>, GanError> {
    if values.is_empty() {
        return Err(GanError::EmptyBatch);
    }
    values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok(clamp_prob(p))
            } else {
                Err(GanError::InvalidProbability(p))
            }
        })
        .collect()
}

impl ProbBatch {
    pub fn new(d_real: &[f64], d_fake: &[f64]) -> Result<Self, GanError> {
        Ok(ProbBatch {
            d_real: clamp_all(d_real)?,
            d_fake: clamp_all(d_fake)?,
        })
    }

    pub fn d_real(&self) -> &[f64] {
        &self.d_real
    }

    pub fn d_fake(&self) -> &[f64] {
        &self.d_fake
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Monte-Carlo estimate of `E[log D(x)] + E[log(1 - D(G(z)))]`.
pub fn gan_value_estimate(b: &ProbBatch) -> f64 {
    mean(b.d_real.iter().map(|p| p.ln())) + mean(b.d_fake.iter().map(|p| (1.0 - p).ln()))
}

/// The discriminator maximizes the value, so its loss is the negation.
pub fn discriminator_loss(b: &ProbBatch) -> f64 {
    -gan_value_estimate(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorVariant {
    /// `mean(log(1 - D(G(z))))`, minimized directly.
    Saturating,
    /// `-mean(log D(G(z)))`.
    #[default]
    NonSaturating,
}

pub fn generator_loss(d_fake: &[f64], variant: GeneratorVariant) -> Result<f64, GanError> {
    let d = clamp_all(d_fake)?;
    Ok(match variant {
        GeneratorVariant::Saturating => mean(d.iter().map(|p| (1.0 - p).ln())),
        GeneratorVariant::NonSaturating => -mean(d.iter().map(|p| p.ln())),
    })
}

/// Derivative of [`generator_loss`] with respect to each `d_fake` element.
/// Zero where clamping is active.
pub fn generator_loss_grad(
    d_fake: &[f64],
    variant: GeneratorVariant,
) -> Result<Vec<f64>, GanError> {
    let clamped = clamp_all(d_fake)?;
    let n = d_fake.len() as f64;
    Ok(d_fake
        .iter()
        .zip(&clamped)
        .map(|(&raw, &p)| {
            if raw != p {
                return 0.0;
            }
            match variant {
                GeneratorVariant::Saturating => -1.0 / (n * (1.0 - p)),
                GeneratorVariant::NonSaturating => -1.0 / (n * p),
            }
        })
        .collect())
}

/// Mean absolute difference between an array and its reconstruction.
pub fn cycle_loss(x: &[f64], x_rec: &[f64]) -> Result<f64, GanError> {
    if x.len() != x_rec.len() {
        return Err(GanError::ShapeMismatch(x.len(), x_rec.len()));
    }
    if x.is_empty() {
        return Err(GanError::EmptyBatch);
    }
    Ok(mean(x.iter().zip(x_rec).map(|(a, b)| (a - b).abs())))
}

pub fn cycle_loss_raster(x: &ImageRaster, x_rec: &ImageRaster) -> Result<f64, GanError> {
    if (x.width, x.height, x.bands) != (x_rec.width, x_rec.height, x_rec.bands) {
        return Err(GanError::ShapeMismatch(
            x.samples.len(),
            x_rec.samples.len(),
        ));
    }
    cycle_loss(&x.samples, &x_rec.samples)
}

/// `adv_g_xy + adv_g_yx + lambda_cyc * (cyc_fwd + cyc_bwd)`.
pub fn combined_objective(
    adv_g_xy: f64,
    adv_g_yx: f64,
    cyc_fwd: f64,
    cyc_bwd: f64,
    lambda_cyc: f64,
) -> Result<f64, GanError> {
    let inputs = [adv_g_xy, adv_g_yx, cyc_fwd, cyc_bwd, lambda_cyc];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(GanError::NonFinite);
    }
    if lambda_cyc < 0.0 {
        return Err(GanError::NegativeWeight(lambda_cyc));
    }
    let total = adv_g_xy + adv_g_yx + lambda_cyc * (cyc_fwd + cyc_bwd);
    if !total.is_finite() {
        return Err(GanError::NonFinite);
    }
    Ok(total)
}

/// Losses for one training step of a two-direction translator.
///
/// `value_estimate` and `d_loss` sum over both discriminators, `g_loss` over
/// both generators, and `total = g_loss + lambda_cyc * (cycle_forward +
/// cycle_backward)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub value_estimate: f64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub cycle_forward: f64,
    pub cycle_backward: f64,
    pub total: f64,
    pub lambda_cyc: f64,
}

impl LossReport {
    /// `xy` holds `D_Y` outputs on real `y` and on `G(x)`; `yx` holds `D_X`
    /// outputs on real `x` and on `F(y)`. Cycle terms compare `x` with
    /// `F(G(x))` and `y` with `G(F(y))`.
    pub fn compute(
        xy: &ProbBatch,
        yx: &ProbBatch,
        variant: GeneratorVariant,
        cycle_forward: f64,
        cycle_backward: f64,
        lambda_cyc: f64,
    ) -> Result<Self, GanError> {
        let value_estimate = gan_value_estimate(xy) + gan_value_estimate(yx);
        let g_xy = generator_loss(xy.d_fake(), variant)?;
        let g_yx = generator_loss(yx.d_fake(), variant)?;
        let total = combined_objective(g_xy, g_yx, cycle_forward, cycle_backward, lambda_cyc)?;
        Ok(LossReport {
            value_estimate,
            d_loss: -value_estimate,
            g_loss: g_xy + g_yx,
            cycle_forward,
            cycle_backward,
            total,
            lambda_cyc,
        })
    }

    /// Total recomputed from the logged components.
    pub fn recompute_total(&self) -> Result<f64, GanError> {
        combined_objective(
            self.g_loss,
            0.0,
            self.cycle_forward,
            self.cycle_backward,
            self.lambda_cyc,
        )
    }
}

/// One line of a training loss log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLogLine {
    pub step: u64,
    #[serde(flatten)]
    pub report: LossReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossFlag {
    TotalMismatch { recomputed: f64, logged: f64 },
    NegativeCycle { forward: f64, backward: f64 },
    NonFinite,
}

pub const LOSSCHECK_REL_TOL: f64 = 1e-9;

pub fn relative_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Problems with one logged report; empty when it is consistent.
pub fn check_report(r: &LossReport) -> Vec<LossFlag> {
    let mut flags = Vec::new();
    let fields = [
        r.value_estimate,
        r.d_loss,
        r.g_loss,
        r.cycle_forward,
        r.cycle_backward,
        r.total,
        r.lambda_cyc,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        flags.push(LossFlag::NonFinite);
        return flags;
    }
    if r.cycle_forward < 0.0 || r.cycle_backward < 0.0 {
        flags.push(LossFlag::NegativeCycle {
            forward: r.cycle_forward,
            backward: r.cycle_backward,
        });
    }
    match r.recompute_total() {
        Ok(recomputed) if relative_diff(recomputed, r.total) <= LOSSCHECK_REL_TOL => {}
        Ok(recomputed) => flags.push(LossFlag::TotalMismatch {
            recomputed,
            logged: r.total,
        }),
        Err(_) => flags.push(LossFlag::NonFinite),
    }
    flags
}
