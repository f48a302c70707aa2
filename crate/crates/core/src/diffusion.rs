//! Per-agent adaptation and the adapt-then-combine protocol.
//!
//! Every iteration each agent runs a local LMS step on its own data to form
//! an intermediate estimate `h_k`, then the combine step averages the
//! neighborhood intermediates into the local estimate `w_k` using the
//! combination weights.
//!
//! With coarsely quantized inputs the plain recursion converges in the mean
//! to a shrunk target: by the Bussgang decomposition `x_Q = g x + q` the
//! quantized cross-statistics satisfy `E[x_Q d_Q*] = g^2 R_x w_o` while
//! `E[x_Q x_Q^H] = g^2 R_x + R_q`, so an LMS solution lands on
//! `g^2 sigma_x^2 / (g^2 sigma_x^2 + sigma_q^2) w_o`. The quantization-aware
//! step ([`dqa_lms_adapt`]) scales the filter output and the update by the
//! matching correction coefficient [`bias_correction`], which restores the
//! unbiased fixed point.
//!
//! The composite quantity `g v + q_d` (quantized measurement noise) exists
//! only inside that analysis; no runtime state corresponds to it.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netgraph::CombinationMatrix;
use crate::quantkit::{
    bussgang_gain, distortion_factor, quantization_noise_variance, QuantizerDesign,
};

/// Smoothing factor of the running input-power estimate. Instantaneous
/// `M`-tap estimates are too noisy to hold the correction coefficient
/// steady, so they are blended exponentially.
pub const VARIANCE_EWMA_LAMBDA: f64 = 0.95;

/// ADC front end of an agent: either full resolution (the sentinel used by
/// unquantized baselines) or a shared `b`-bit quantizer design.
#[derive(Debug, Clone)]
pub enum Adc {
    FullResolution,
    Quantized(Arc<QuantizerDesign>),
}

impl Adc {
    /// Resolution in bits; `None` denotes full resolution.
    pub fn bits(&self) -> Option<u32> {
        match self {
            Self::FullResolution => None,
            Self::Quantized(d) => Some(d.bits()),
        }
    }
}

/// Filter state of one agent.
#[derive(Debug, Clone)]
pub struct AgentState {
    /// Local estimate `w_k`, updated by the combine step.
    pub w: Vec<Complex64>,
    /// Intermediate estimate `h_k`, written by the adapt step.
    pub h: Vec<Complex64>,
    /// Step size `mu_k`.
    pub mu: f64,
    /// Running estimate of the received (quantized) input power
    /// `sigma_xQ^2`, tracked by EWMA over `||x_Q||^2 / M`. Zero until the
    /// first sample arrives.
    pub variance_est: f64,
    /// ADC resolution and design shared by the regressor and desired-signal
    /// converters of this agent.
    pub adc: Adc,
}

impl AgentState {
    /// Zero-initialized state for an `m`-tap filter.
    pub fn new(m: usize, mu: f64, adc: Adc) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("filter length must be >= 1".into()));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and non-negative, got {mu}"
            )));
        }
        Ok(Self {
            w: vec![Complex64::ZERO; m],
            h: vec![Complex64::ZERO; m],
            mu,
            variance_est: 0.0,
            adc,
        })
    }

    pub fn taps(&self) -> usize {
        self.w.len()
    }
}

/// One step of local data: the regressor (possibly quantized) and the
/// desired sample (possibly quantized). Entries must be finite.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub x: &'a [Complex64],
    pub d: Complex64,
}

/// Per-step correction quantities of the quantization-aware update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCorrection {
    /// Bussgang gain `g` of the agent's quantizer.
    pub g: f64,
    /// Correction coefficient applied to the filter output and update.
    pub beta: f64,
    /// Quantization-noise variance `sigma_q^2` behind `beta`.
    pub sigma_q_sq: f64,
}

impl BiasCorrection {
    /// Identity correction used by the full-resolution sentinel.
    pub const FULL_RESOLUTION: Self = Self {
        g: 1.0,
        beta: 1.0,
        sigma_q_sq: 0.0,
    };

    /// Offline mode for stationary inputs with known power: compute the
    /// gain, noise variance, and correction once from `sigma_x_sq` and
    /// reuse the result every step (rescaled labels keep the quantizer
    /// output power equal to the input power).
    pub fn for_design(design: &QuantizerDesign, sigma_x_sq: f64) -> Result<Self> {
        let g = bussgang_gain(design, sigma_x_sq)?;
        let sigma_q_sq = quantization_noise_variance(g, sigma_x_sq, sigma_x_sq);
        let beta = bias_correction(g, sigma_x_sq, sigma_q_sq)?;
        Ok(Self { g, beta, sigma_q_sq })
    }
}

fn check_dims(state: &AgentState, x: &[Complex64]) -> Result<()> {
    if x.len() != state.w.len() {
        return Err(Error::DimensionMismatch {
            context: "regressor vs filter taps",
            expected: state.w.len(),
            got: x.len(),
        });
    }
    debug_assert!(x.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    Ok(())
}

fn inner_conj(w: &[Complex64], x: &[Complex64]) -> Complex64 {
    w.iter().zip(x).map(|(wi, xi)| wi.conj() * xi).sum()
}

/// Plain LMS adapt step: `e = d - w^H x`, `h = w + mu x e*`. The local
/// estimate `w` is untouched until the combine step.
pub fn dlms_adapt(state: &mut AgentState, inp: &StepInputs) -> Result<()> {
    check_dims(state, inp.x)?;
    let e = inp.d - inner_conj(&state.w, inp.x);
    let scale = state.mu * e.conj();
    for (h, (w, x)) in state.h.iter_mut().zip(state.w.iter().zip(inp.x)) {
        *h = w + x * scale;
    }
    Ok(())
}

/// Quantization-aware adapt step on quantized data:
/// `e_Q = d_Q - beta w^H x_Q`, `h = w + mu beta x_Q e_Q*`.
/// With `beta = 1` this reduces exactly to [`dlms_adapt`].
pub fn dqa_lms_adapt(state: &mut AgentState, inp: &StepInputs, corr: &BiasCorrection) -> Result<()> {
    check_dims(state, inp.x)?;
    let e = inp.d - inner_conj(&state.w, inp.x) * corr.beta;
    let scale = state.mu * corr.beta * e.conj();
    for (h, (w, x)) in state.h.iter_mut().zip(state.w.iter().zip(inp.x)) {
        *h = w + x * scale;
    }
    Ok(())
}

/// Fold the instantaneous received-power estimate `||x_q||^2 / M` into the
/// agent's EWMA tracker and return the distortion-corrected input-variance
/// estimate `sigma_x^2 ~= sigma_xQ^2 + rho`.
pub fn update_variance_estimate(state: &mut AgentState, x_q: &[Complex64], rho: f64) -> f64 {
    let instantaneous = x_q.iter().map(|v| v.norm_sqr()).sum::<f64>() / x_q.len().max(1) as f64;
    state.variance_est = if state.variance_est == 0.0 {
        instantaneous
    } else {
        VARIANCE_EWMA_LAMBDA * state.variance_est + (1.0 - VARIANCE_EWMA_LAMBDA) * instantaneous
    };
    state.variance_est + rho
}

/// Correction coefficient that makes the quantized recursion unbiased:
/// `beta = g^2 sigma_x^2 / (g^2 sigma_x^2 + sigma_q^2)`, the ratio of the
/// useful quantized signal power to the total quantized power. It satisfies
/// `beta ∈ (0, 1]`, equals 1 when the distortion vanishes, and cancels the
/// shrinkage `E[w_inf] = g^2 sigma_x^2 / (g^2 sigma_x^2 + sigma_q^2) w_o`
/// of the uncorrected scheme.
pub fn bias_correction(g: f64, sigma_x_sq: f64, sigma_q_sq: f64) -> Result<f64> {
    if !(g > 0.0 && sigma_x_sq > 0.0 && sigma_q_sq >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need g > 0, sigma_x^2 > 0, sigma_q^2 >= 0; got {g}, {sigma_x_sq}, {sigma_q_sq}"
        )));
    }
    let signal = g * g * sigma_x_sq;
    let denom = signal + sigma_q_sq;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "non-positive correction denominator {denom}"
        )));
    }
    Ok(signal / denom)
}

/// The full per-step quantization-aware pipeline for one agent: track the
/// received power, re-evaluate the Bussgang gain from the
/// distortion-corrected variance estimate, refresh the quantization-noise
/// variance and correction coefficient, and run the adapt step. Returns the
/// correction that was applied.
///
/// The noise variance and correction are computed from the tracked
/// *received* power: rescaled labels preserve signal power through the ADC,
/// so the received power is itself the consistent input-power estimate for
/// the orthogonality split, while the `+rho` corrected value would cancel
/// the entire correction at low resolutions.
pub fn dqa_step(state: &mut AgentState, inp: &StepInputs) -> Result<BiasCorrection> {
    let design = match &state.adc {
        Adc::FullResolution => {
            dlms_adapt(state, inp)?;
            return Ok(BiasCorrection::FULL_RESOLUTION);
        }
        Adc::Quantized(d) => Arc::clone(d),
    };
    let rho = distortion_factor(design.bits());
    let sigma_x_est = update_variance_estimate(state, inp.x, rho);
    let g = bussgang_gain(&design, sigma_x_est)?;
    let sigma_xq = state.variance_est;
    let sigma_q_sq = quantization_noise_variance(g, sigma_xq, sigma_xq);
    let beta = bias_correction(g, sigma_xq, sigma_q_sq)?;
    let corr = BiasCorrection { g, beta, sigma_q_sq };
    dqa_lms_adapt(state, inp, &corr)?;
    Ok(corr)
}

/// Combine step: `w_k = sum_l a_lk h_l` over every node. All intermediate
/// estimates must share the filter length.
pub fn combine(h_all: &[Vec<Complex64>], a: &CombinationMatrix) -> Result<Vec<Vec<Complex64>>> {
    if h_all.len() != a.n_nodes() {
        return Err(Error::DimensionMismatch {
            context: "intermediate estimates vs combination matrix",
            expected: a.n_nodes(),
            got: h_all.len(),
        });
    }
    let m = h_all.first().map_or(0, Vec::len);
    let mut out = vec![vec![Complex64::ZERO; m]; h_all.len()];
    combine_into(&mut out, h_all, a)?;
    Ok(out)
}

/// In-place combine used by the experiment loop to avoid reallocation.
pub(crate) fn combine_into(
    out: &mut [Vec<Complex64>],
    h_all: &[Vec<Complex64>],
    a: &CombinationMatrix,
) -> Result<()> {
    let n = a.n_nodes();
    let m = h_all.first().map_or(0, Vec::len);
    for h in h_all {
        if h.len() != m {
            return Err(Error::DimensionMismatch {
                context: "intermediate estimate lengths",
                expected: m,
                got: h.len(),
            });
        }
    }
    for k in 0..n {
        let w = &mut out[k];
        w.iter_mut().for_each(|v| *v = Complex64::ZERO);
        for l in 0..n {
            let weight = a.get(l, k);
            if weight != 0.0 {
                for (wi, hi) in w.iter_mut().zip(&h_all[l]) {
                    *wi += hi * weight;
                }
            }
        }
    }
    Ok(())
}
