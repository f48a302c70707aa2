//! Scenario generation and the ensemble Monte-Carlo experiment harness.
//!
//! A scenario fixes the topology, the Metropolis combination weights, one
//! unknown system `w_o`, heterogeneous per-node signal statistics, and the
//! quantizer designs for every configured bit depth. Trials differ only in
//! their noise and input realizations: all randomness flows through
//! ChaCha substreams keyed by `(domain, trial, node)` so that runs are
//! bit-identical no matter how many rayon workers execute the trials.
//!
//! Each trial drives every node through adapt-then-combine iterations and
//! records the network mean-square deviation `(1/N) sum_k ||w_o - w_k||^2`
//! after each combine; learning curves are ensemble averages over trials.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::diffusion::{
    combine_into, dlms_adapt, dqa_step, Adc, AgentState, StepInputs,
};
use crate::error::{Error, Result};
use crate::netgraph::{metropolis_weights, random_geometric_topology, CombinationMatrix, NetworkTopology};
use crate::quantkit::{
    bussgang_gain, design_rescaled, quantization_noise_variance, quantize_value, QuantizerDesign,
    MAX_BITS,
};

/// ADC resolution of a simulated signal path; `Full` is the unquantized
/// sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resolution {
    Full,
    Bits(u32),
}

impl Resolution {
    pub fn bits(self) -> Option<u32> {
        match self {
            Self::Full => None,
            Self::Bits(b) => Some(b),
        }
    }

    /// Parse the config token: `full` or an integer bit depth.
    pub fn parse(token: &str) -> Result<Self> {
        let token = token.trim();
        if token.eq_ignore_ascii_case("full") {
            return Ok(Self::Full);
        }
        let bits: u32 = token
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad resolution token {token:?}")))?;
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "bit depth must be in 1..={MAX_BITS}, got {bits}"
            )));
        }
        Ok(Self::Bits(bits))
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Full => write!(f, "full"),
            Self::Bits(b) => write!(f, "{b}"),
        }
    }
}

/// Per-node signal statistics: input power, measurement-noise power, and
/// the first-order autoregressive coefficient of the input process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeProfile {
    pub sigma_x_sq: f64,
    pub sigma_v_sq: f64,
    pub ar_coeff: f64,
}

impl NodeProfile {
    pub fn new(sigma_x_sq: f64, sigma_v_sq: f64, ar_coeff: f64) -> Result<Self> {
        if !(sigma_x_sq.is_finite() && sigma_x_sq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "input power must be positive, got {sigma_x_sq}"
            )));
        }
        if !(sigma_v_sq.is_finite() && sigma_v_sq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {sigma_v_sq}"
            )));
        }
        if !(ar_coeff.is_finite() && ar_coeff.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "AR coefficient must lie strictly inside (-1, 1), got {ar_coeff}"
            )));
        }
        Ok(Self {
            sigma_x_sq,
            sigma_v_sq,
            ar_coeff,
        })
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_nodes: usize,
    pub filter_len: usize,
    pub mu: f64,
    pub trials: usize,
    pub iterations: usize,
    pub bit_depths: Vec<Resolution>,
    pub seed: u64,
    pub topology_radius: f64,
    pub bandwidth_hz: f64,
    pub conversion_energy_j: f64,
}

impl ScenarioConfig {
    /// The 20-node reference experiment: 8 taps, shared step size 0.05,
    /// 100 trials, full resolution plus 1-3 bit ADCs, and the narrowband
    /// ADC power parameters (200 kHz bandwidth, 494 fJ per conversion
    /// step).
    pub fn reference() -> Self {
        Self {
            n_nodes: 20,
            filter_len: 8,
            mu: 0.05,
            trials: 100,
            iterations: 2000,
            bit_depths: vec![
                Resolution::Full,
                Resolution::Bits(1),
                Resolution::Bits(2),
                Resolution::Bits(3),
            ],
            seed: 7,
            topology_radius: 0.35,
            bandwidth_hz: 2.0e5,
            conversion_energy_j: 494e-15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.filter_len == 0 || self.trials == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "n_nodes, filter_len, trials, and iterations must all be >= 1".into(),
            ));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and non-negative, got {}",
                self.mu
            )));
        }
        if self.bit_depths.is_empty() {
            return Err(Error::InvalidArgument("bit_depths must not be empty".into()));
        }
        for r in &self.bit_depths {
            if let Resolution::Bits(b) = r {
                if !(1..=MAX_BITS).contains(b) {
                    return Err(Error::InvalidArgument(format!(
                        "bit depth must be in 1..={MAX_BITS}, got {b}"
                    )));
                }
            }
        }
        if !(self.topology_radius.is_finite() && self.topology_radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "topology radius must be positive, got {}",
                self.topology_radius
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.conversion_energy_j > 0.0) {
            return Err(Error::InvalidArgument(
                "power-model parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Algorithms whose learning curves the harness produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Flat line at the closed-form steady-state MSD approximation.
    Theory,
    /// Diffusion LMS on full-resolution signals.
    Dlms,
    /// Diffusion LMS run unchanged on quantized signals.
    DlmsQuantized,
    /// Quantization-aware diffusion LMS.
    DqaLms,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Self::Theory => "theory",
            Self::Dlms => "dlms",
            Self::DlmsQuantized => "dlms-q",
            Self::DqaLms => "dqa-lms",
        }
    }
}

/// Ensemble-averaged learning curve of one algorithm / resolution pair.
/// `values` holds linear network MSD per iteration; when a trial blows past
/// the divergence guard the curve is truncated there and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdTrace {
    pub algorithm: Algorithm,
    pub bits: Resolution,
    pub values: Vec<f64>,
    pub diverged_at: Option<usize>,
}

/// MSD above this is treated as a diverged run.
pub const DIVERGENCE_GUARD: f64 = 1e6;

// Substream domains. The topology generator consumes the plain seed
// (stream 0), so domain tags start at 1.
#[derive(Debug, Clone, Copy)]
enum StreamDomain {
    Profiles = 1,
    UnknownSystem = 2,
    Regressor = 3,
    Noise = 4,
    Covariance = 5,
}

/// Deterministic ChaCha substream for `(domain, trial, node)`.
fn substream_rng(seed: u64, domain: StreamDomain, trial: u64, node: u64) -> ChaCha8Rng {
    debug_assert!(trial < (1 << 40) && node < (1 << 16));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain as u64) << 56 | trial << 16 | node);
    rng
}

/// One draw of a unit-variance complex Gaussian.
fn crandn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn inner_conj(w: &[Complex64], x: &[Complex64]) -> Complex64 {
    w.iter().zip(x).map(|(wi, xi)| wi.conj() * xi).sum()
}

/// Random unknown system: a complex Gaussian draw normalized to unit
/// Euclidean norm. Deterministic in `(m, seed)`.
pub fn draw_unknown_system(m: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = substream_rng(seed, StreamDomain::UnknownSystem, 0, 0);
    let mut w: Vec<Complex64> = (0..m).map(|_| crandn(&mut rng)).collect();
    let norm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    w
}

/// Scalar AR(1) process feeding a tapped delay line, newest sample first.
struct Ar1TappedDelay {
    r: f64,
    drive_scale: f64,
    current: Complex64,
    window: Vec<Complex64>,
}

impl Ar1TappedDelay {
    fn new(profile: &NodeProfile, m: usize) -> Self {
        // Drive variance sigma_x^2 (1 - r^2) gives stationary variance
        // sigma_x^2.
        let drive = (profile.sigma_x_sq * (1.0 - profile.ar_coeff * profile.ar_coeff)).sqrt();
        Self {
            r: profile.ar_coeff,
            drive_scale: drive,
            current: Complex64::ZERO,
            window: vec![Complex64::ZERO; m],
        }
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) {
        self.current = self.current * self.r + crandn(rng) * self.drive_scale;
        let m = self.window.len();
        self.window.copy_within(0..m - 1, 1);
        self.window[0] = self.current;
    }

    fn burn_in(&mut self, rng: &mut ChaCha8Rng) {
        for _ in 0..10 * self.window.len() {
            self.advance(rng);
        }
    }

    fn regressor(&self) -> &[Complex64] {
        &self.window
    }
}

/// Generate `iterations` tapped-delay-line regressors of an AR(1) input
/// process (stationary variance `sigma_x_sq`), discarding a burn-in of
/// `10 m` scalar samples first.
pub fn ar1_regressor_stream(
    profile: &NodeProfile,
    m: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    if m == 0 || iterations == 0 {
        return Err(Error::InvalidArgument(
            "regressor stream needs m >= 1 and iterations >= 1".into(),
        ));
    }
    let mut rng = substream_rng(seed, StreamDomain::Regressor, 0, 0);
    let mut line = Ar1TappedDelay::new(profile, m);
    line.burn_in(&mut rng);
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        line.advance(&mut rng);
        out.push(line.regressor().to_vec());
    }
    Ok(out)
}

/// Linear measurement `d = w_o^H x + v` with complex Gaussian noise of
/// variance `sigma_v_sq`.
pub fn desired_signal(
    w_o: &[Complex64],
    x: &[Complex64],
    sigma_v_sq: f64,
    rng: &mut ChaCha8Rng,
) -> Complex64 {
    debug_assert_eq!(w_o.len(), x.len());
    inner_conj(w_o, x) + crandn(rng) * sigma_v_sq.sqrt()
}

/// Network mean-square deviation `(1/N) sum_k ||w_o - w_k||^2`.
pub fn msd(w_all: &[Vec<Complex64>], w_o: &[Complex64]) -> f64 {
    let n = w_all.len().max(1);
    w_all
        .iter()
        .map(|w| {
            w_o.iter()
                .zip(w)
                .map(|(t, e)| (t - e).norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64
}

/// A realized scenario: everything that is fixed across trials.
pub struct Scenario {
    config: ScenarioConfig,
    topology: NetworkTopology,
    combination: CombinationMatrix,
    profiles: Vec<NodeProfile>,
    w_o: Vec<Complex64>,
    designs: BTreeMap<u32, Arc<QuantizerDesign>>,
    /// Long-run power of each node's desired signal, used as the gain
    /// control of the measurement ADC.
    sigma_d_sq: Vec<f64>,
}

impl Scenario {
    /// Realize the scenario: draw the topology, the per-node statistics
    /// (input power uniform in [0.5, 1.5), noise power uniform in
    /// [0.1, 0.25), AR coefficient uniform in [0.3, 0.5)), the unknown
    /// system, and the quantizer designs for every configured resolution.
    ///
    /// The noise-power range keeps the coarse-quantization distortion from
    /// dominating the measurement noise; below roughly 0.1 the 3-bit
    /// distortion floor alone would pin every quantized curve several dB
    /// above the full-resolution one.
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let topology =
            random_geometric_topology(config.n_nodes, config.topology_radius, config.seed)?;
        let combination = metropolis_weights(&topology);

        let mut profile_rng = substream_rng(config.seed, StreamDomain::Profiles, 0, 0);
        let profiles: Vec<NodeProfile> = (0..config.n_nodes)
            .map(|_| {
                NodeProfile::new(
                    profile_rng.random_range(0.5..1.5),
                    profile_rng.random_range(0.1..0.25),
                    profile_rng.random_range(0.3..0.5),
                )
            })
            .collect::<Result<_>>()?;

        let w_o = draw_unknown_system(config.filter_len, config.seed);

        let mut designs = BTreeMap::new();
        for r in &config.bit_depths {
            if let Resolution::Bits(b) = r {
                designs
                    .entry(*b)
                    .or_insert_with(|| Arc::new(design_rescaled(*b).expect("bits validated")));
            }
        }

        let sigma_d_sq = profiles
            .iter()
            .map(|p| desired_power(&w_o, p))
            .collect();

        Ok(Self {
            config: config.clone(),
            topology,
            combination,
            profiles,
            w_o,
            designs,
            sigma_d_sq,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn combination(&self) -> &CombinationMatrix {
        &self.combination
    }

    pub fn profiles(&self) -> &[NodeProfile] {
        &self.profiles
    }

    pub fn unknown_system(&self) -> &[Complex64] {
        &self.w_o
    }

    pub fn design(&self, bits: u32) -> Option<&Arc<QuantizerDesign>> {
        self.designs.get(&bits)
    }

    pub fn desired_signal_power(&self) -> &[f64] {
        &self.sigma_d_sq
    }

    /// One independent trial of one algorithm / resolution curve. Returns
    /// the per-iteration MSD values and the index where the divergence
    /// guard tripped, if it did.
    pub fn run_trial(
        &self,
        algorithm: Algorithm,
        bits: Resolution,
        trial: usize,
    ) -> Result<(Vec<f64>, Option<usize>)> {
        let cfg = &self.config;
        let n = cfg.n_nodes;
        let m = cfg.filter_len;
        let design = match bits {
            Resolution::Full => None,
            Resolution::Bits(b) => Some(
                self.designs
                    .get(&b)
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!("no design built for {b} bits"))
                    })?
                    .clone(),
            ),
        };

        let adc = |d: &Option<Arc<QuantizerDesign>>| match d {
            None => Adc::FullResolution,
            Some(d) => Adc::Quantized(Arc::clone(d)),
        };
        let mut agents: Vec<AgentState> = (0..n)
            .map(|_| AgentState::new(m, cfg.mu, adc(&design)))
            .collect::<Result<_>>()?;

        let mut reg_rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|k| substream_rng(cfg.seed, StreamDomain::Regressor, trial as u64, k as u64))
            .collect();
        let mut noise_rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|k| substream_rng(cfg.seed, StreamDomain::Noise, trial as u64, k as u64))
            .collect();
        let mut lines: Vec<Ar1TappedDelay> = self
            .profiles
            .iter()
            .map(|p| Ar1TappedDelay::new(p, m))
            .collect();
        for (line, rng) in lines.iter_mut().zip(&mut reg_rngs) {
            line.burn_in(rng);
        }

        let mut h_all = vec![vec![Complex64::ZERO; m]; n];
        let mut w_all = vec![vec![Complex64::ZERO; m]; n];
        let mut xq = vec![Complex64::ZERO; m];
        let mut values = Vec::with_capacity(cfg.iterations);
        let mut diverged_at = None;

        for i in 0..cfg.iterations {
            for k in 0..n {
                lines[k].advance(&mut reg_rngs[k]);
                let x = lines[k].regressor();
                let d = desired_signal(&self.w_o, x, self.profiles[k].sigma_v_sq, &mut noise_rngs[k]);

                match (algorithm, &design) {
                    (Algorithm::Dlms, None) => {
                        dlms_adapt(&mut agents[k], &StepInputs { x, d })?;
                    }
                    // The full-resolution sentinel routes through the same
                    // per-step pipeline and reduces exactly to plain DLMS.
                    (Algorithm::DqaLms, None) => {
                        dqa_step(&mut agents[k], &StepInputs { x, d })?;
                    }
                    (Algorithm::DlmsQuantized, Some(dz)) | (Algorithm::DqaLms, Some(dz)) => {
                        let sigma_x = self.profiles[k].sigma_x_sq;
                        let scale = sigma_x.sqrt();
                        let inv = scale.recip();
                        for (out, v) in xq.iter_mut().zip(x) {
                            *out = Complex64::new(
                                dz.quantize_component(v.re * inv) * scale,
                                dz.quantize_component(v.im * inv) * scale,
                            );
                        }
                        let dq = quantize_value(d, dz, self.sigma_d_sq[k])?;
                        let inp = StepInputs { x: &xq, d: dq };
                        if algorithm == Algorithm::DqaLms {
                            dqa_step(&mut agents[k], &inp)?;
                        } else {
                            dlms_adapt(&mut agents[k], &inp)?;
                        }
                    }
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "algorithm {} cannot run at resolution {}",
                            algorithm.label(),
                            bits
                        )));
                    }
                }
                h_all[k].copy_from_slice(&agents[k].h);
            }

            combine_into(&mut w_all, &h_all, &self.combination)?;
            for (agent, w) in agents.iter_mut().zip(&w_all) {
                agent.w.copy_from_slice(w);
            }

            let value = msd(&w_all, &self.w_o);
            values.push(value);
            if !value.is_finite() || value > DIVERGENCE_GUARD {
                diverged_at = Some(i);
                break;
            }
        }
        Ok((values, diverged_at))
    }
}

/// Long-run power of `d = w_o^H x + v` for an AR(1) tapped-delay input:
/// `w_o^H R_x w_o + sigma_v^2` with the Toeplitz covariance
/// `R_x[i][j] = sigma_x^2 r^{|i-j|}`.
fn desired_power(w_o: &[Complex64], profile: &NodeProfile) -> f64 {
    let m = w_o.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let r_pow = profile.ar_coeff.powi((i as i32 - j as i32).abs());
            acc += (w_o[i].conj() * w_o[j]).re * profile.sigma_x_sq * r_pow;
        }
    }
    acc + profile.sigma_v_sq
}

/// The curves an experiment produces: the theory line, full-resolution
/// DLMS (when configured), and the quantized DLMS / DQA-LMS pair per bit
/// depth.
fn curve_list(config: &ScenarioConfig) -> Vec<(Algorithm, Resolution)> {
    let mut curves = vec![(Algorithm::Theory, Resolution::Full)];
    let mut seen = std::collections::BTreeSet::new();
    for r in &config.bit_depths {
        if !seen.insert(*r) {
            continue;
        }
        match r {
            Resolution::Full => curves.push((Algorithm::Dlms, Resolution::Full)),
            Resolution::Bits(b) => {
                curves.push((Algorithm::DlmsQuantized, Resolution::Bits(*b)));
                curves.push((Algorithm::DqaLms, Resolution::Bits(*b)));
            }
        }
    }
    curves
}

/// Run the full ensemble experiment: every configured curve, `trials`
/// independent trials each, averaged into one [`MsdTrace`] per curve.
/// Deterministic for a fixed config and seed, independent of worker count.
pub fn run_experiment(config: &ScenarioConfig) -> Result<Vec<MsdTrace>> {
    let scenario = Scenario::build(config)?;
    let theory = crate::analysis::theoretical_msd(
        config.mu,
        config.filter_len,
        config.n_nodes,
        &scenario
            .profiles
            .iter()
            .map(|p| p.sigma_v_sq)
            .collect::<Vec<_>>(),
    );

    let mut traces = Vec::new();
    for (algorithm, bits) in curve_list(config) {
        if algorithm == Algorithm::Theory {
            traces.push(MsdTrace {
                algorithm,
                bits,
                values: vec![theory; config.iterations],
                diverged_at: None,
            });
            continue;
        }
        let per_trial: Vec<(Vec<f64>, Option<usize>)> = (0..config.trials)
            .into_par_iter()
            .map(|t| scenario.run_trial(algorithm, bits, t))
            .collect::<Result<Vec<_>>>()?;

        // Ensemble average over the prefix every trial reached; summation
        // runs in trial order so the result does not depend on scheduling.
        let len = per_trial.iter().map(|(v, _)| v.len()).min().unwrap_or(0);
        let diverged_at = per_trial.iter().filter_map(|(_, d)| *d).min();
        let mut values = vec![0.0; len];
        for (trial_values, _) in &per_trial {
            for (acc, v) in values.iter_mut().zip(trial_values) {
                *acc += v;
            }
        }
        let scale = 1.0 / config.trials as f64;
        values.iter_mut().for_each(|v| *v *= scale);
        traces.push(MsdTrace {
            algorithm,
            bits,
            values,
            diverged_at,
        });
    }
    Ok(traces)
}

/// Monte-Carlo estimate of the corrected quantized-regressor covariance
/// `R_{k,Q} = E[(beta x_Q)(beta x_Q)^H]` of one node, from `samples`
/// regressors of its AR(1) input stream. With the full-resolution sentinel
/// this is a plain input covariance estimate. `node` selects the
/// substream so per-node estimates are independent.
pub fn quantized_regressor_covariance(
    profile: &NodeProfile,
    m: usize,
    resolution: Resolution,
    samples: usize,
    seed: u64,
    node: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if m == 0 || samples == 0 {
        return Err(Error::InvalidArgument(
            "covariance estimation needs m >= 1 and samples >= 1".into(),
        ));
    }
    let design = match resolution {
        Resolution::Full => None,
        Resolution::Bits(b) => Some(design_rescaled(b)?),
    };
    let beta = match &design {
        None => 1.0,
        Some(d) => {
            let g = bussgang_gain(d, 1.0)?;
            let sigma_q = quantization_noise_variance(g, 1.0, 1.0);
            crate::diffusion::bias_correction(g, 1.0, sigma_q)?
        }
    };

    let mut rng = substream_rng(seed, StreamDomain::Covariance, 0, node as u64);
    let mut line = Ar1TappedDelay::new(profile, m);
    line.burn_in(&mut rng);
    let mut acc = vec![vec![Complex64::ZERO; m]; m];
    let mut buf = vec![Complex64::ZERO; m];
    let scale = profile.sigma_x_sq.sqrt();
    let inv = scale.recip();
    for _ in 0..samples {
        line.advance(&mut rng);
        let x = line.regressor();
        match &design {
            None => buf.copy_from_slice(x),
            Some(d) => {
                for (out, v) in buf.iter_mut().zip(x) {
                    *out = Complex64::new(
                        d.quantize_component(v.re * inv) * scale,
                        d.quantize_component(v.im * inv) * scale,
                    ) * beta;
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                acc[i][j] += buf[i] * buf[j].conj();
            }
        }
    }
    let norm = 1.0 / samples as f64;
    for row in &mut acc {
        for v in row {
            *v *= norm;
        }
    }
    // Clean the sampling asymmetry so downstream Hermitian checks see the
    // estimator's intent.
    let mut r = vec![vec![Complex64::ZERO; m]; m];
    for i in 0..m {
        for j in 0..m {
            r[i][j] = (acc[i][j] + acc[j][i].conj()) * 0.5;
        }
    }
    Ok(r)
}
