//! Statistical invariants of the quantization-aware recursion: unbiasedness
//! of the corrected update, the shrinkage of the uncorrected one, and the
//! steady-state ordering of the learning curves.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use dqalms_core::diffusion::{
    bias_correction, dlms_adapt, dqa_step, Adc, AgentState, StepInputs,
};
use dqalms_core::quantkit::{
    bussgang_gain, design_rescaled, quantization_noise_variance, quantize, quantize_value,
};
use dqalms_core::simkit::{
    draw_unknown_system, run_experiment, Algorithm, Resolution, ScenarioConfig,
};

fn crandn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn inner_conj(w: &[Complex64], x: &[Complex64]) -> Complex64 {
    w.iter().zip(x).map(|(wi, xi)| wi.conj() * xi).sum()
}

fn steady_state(values: &[f64]) -> f64 {
    let tail = (values.len() / 10).max(1);
    values[values.len() - tail..].iter().sum::<f64>() / tail as f64
}

/// At `w = w_o` the expected corrected update direction
/// `E[beta x_Q e_Q*]` vanishes; the Monte-Carlo mean must sit within three
/// standard errors of zero.
#[test]
fn corrected_update_has_no_drift_at_true_weights() {
    let m = 8;
    let sigma_x_sq = 1.0f64;
    let sigma_v_sq = 0.01f64;
    let design = design_rescaled(1).unwrap();
    let g = bussgang_gain(&design, 1.0).unwrap();
    let beta = bias_correction(g, 1.0, quantization_noise_variance(g, 1.0, 1.0)).unwrap();

    let w_o = draw_unknown_system(m, 99);
    let sigma_d_sq = sigma_x_sq + sigma_v_sq; // white input, unit-norm w_o
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let n = 200_000usize;
    let mut mean = vec![Complex64::ZERO; m];
    let mut second_moment = vec![0.0f64; m];
    for _ in 0..n {
        let x: Vec<Complex64> = (0..m).map(|_| crandn(&mut rng) * sigma_x_sq.sqrt()).collect();
        let v = crandn(&mut rng) * sigma_v_sq.sqrt();
        let d = inner_conj(&w_o, &x) + v;
        let xq = quantize(&x, &design, sigma_x_sq).unwrap();
        let dq = quantize_value(d, &design, sigma_d_sq).unwrap();
        let eq = dq - inner_conj(&w_o, &xq) * beta;
        for i in 0..m {
            let u = xq[i] * eq.conj() * beta;
            mean[i] += u;
            second_moment[i] += u.norm_sqr();
        }
    }
    let mean: Vec<Complex64> = mean.into_iter().map(|v| v / n as f64).collect();
    let total_var: f64 = second_moment
        .iter()
        .zip(&mean)
        .map(|(s, m)| s / n as f64 - m.norm_sqr())
        .sum();
    let drift = mean.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let se = (total_var / n as f64).sqrt();
    assert!(
        drift < 3.0 * se,
        "corrected update drifts: |E[update]| = {drift:.3e}, 3 SE = {:.3e}",
        3.0 * se
    );
}

/// Running the update with the correction forced to one shrinks the mean
/// solution to `s w_o` with `s = g sigma_x^2 / (g sigma_x^2 + sigma_q^2)`
/// within 5% of `||w_o||` at 1-3 bits.
#[test]
fn uncorrected_scheme_converges_to_shrunk_target() {
    let m = 8;
    let mu = 0.01;
    let iterations = 20_000;
    let trials = 8;
    let sigma_x_sq = 1.0f64;
    let sigma_v_sq = 0.5f64;
    let w_o = draw_unknown_system(m, 4);
    let sigma_d_sq = sigma_x_sq + sigma_v_sq;

    for bits in [1u32, 2, 3] {
        let design = Arc::new(design_rescaled(bits).unwrap());
        let g = bussgang_gain(&design, 1.0).unwrap();
        let sigma_q = quantization_noise_variance(g, sigma_x_sq, sigma_x_sq);
        let s = g * sigma_x_sq / (g * sigma_x_sq + sigma_q);

        let mut mean = vec![Complex64::ZERO; m];
        let mut count = 0usize;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + 17 * bits as u64 + trial);
            let mut state = AgentState::new(m, mu, Adc::FullResolution).unwrap();
            for i in 0..iterations {
                let x: Vec<Complex64> =
                    (0..m).map(|_| crandn(&mut rng) * sigma_x_sq.sqrt()).collect();
                let v = crandn(&mut rng) * sigma_v_sq.sqrt();
                let d = inner_conj(&w_o, &x) + v;
                let xq = quantize(&x, &design, sigma_x_sq).unwrap();
                let dq = quantize_value(d, &design, sigma_d_sq).unwrap();
                dlms_adapt(&mut state, &StepInputs { x: &xq, d: dq }).unwrap();
                state.w.clone_from(&state.h);
                if i >= iterations / 2 {
                    for (acc, w) in mean.iter_mut().zip(&state.w) {
                        *acc += w;
                    }
                    count += 1;
                }
            }
        }
        let mean: Vec<Complex64> = mean.into_iter().map(|v| v / count as f64).collect();
        let err = mean
            .iter()
            .zip(&w_o)
            .map(|(got, want)| (got - want * s).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            err < 0.05,
            "bits={bits}: ||E[w] - s w_o|| = {err:.4} with s = {s:.4}"
        );
    }
}

/// The corrected recursion run through the same pipeline converges near
/// `w_o` itself (the engine-level counterpart of the drift test).
#[test]
fn corrected_scheme_converges_near_true_weights() {
    let m = 8;
    let mu = 0.01;
    let iterations = 20_000;
    let trials = 8;
    let sigma_x_sq = 1.0f64;
    let sigma_v_sq = 0.5f64;
    let w_o = draw_unknown_system(m, 4);
    let sigma_d_sq = sigma_x_sq + sigma_v_sq;
    let design = Arc::new(design_rescaled(1).unwrap());

    let mut mean = vec![Complex64::ZERO; m];
    let mut count = 0usize;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let mut state = AgentState::new(m, mu, Adc::Quantized(Arc::clone(&design))).unwrap();
        for i in 0..iterations {
            let x: Vec<Complex64> = (0..m).map(|_| crandn(&mut rng) * sigma_x_sq.sqrt()).collect();
            let v = crandn(&mut rng) * sigma_v_sq.sqrt();
            let d = inner_conj(&w_o, &x) + v;
            let xq = quantize(&x, &design, sigma_x_sq).unwrap();
            let dq = quantize_value(d, &design, sigma_d_sq).unwrap();
            dqa_step(&mut state, &StepInputs { x: &xq, d: dq }).unwrap();
            state.w.clone_from(&state.h);
            if i >= iterations / 2 {
                for (acc, w) in mean.iter_mut().zip(&state.w) {
                    *acc += w;
                }
                count += 1;
            }
        }
    }
    let mean: Vec<Complex64> = mean.into_iter().map(|v| v / count as f64).collect();
    let err = mean
        .iter()
        .zip(&w_o)
        .map(|(got, want)| (got - want).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err < 0.05, "1-bit corrected bias ||E[w] - w_o|| = {err:.4}");
}

/// Small-network learning-curve ordering: the corrected algorithm beats the
/// uncorrected one at every coarse resolution, and its steady state is
/// non-increasing in resolution.
#[test]
fn steady_state_ordering_small_network() {
    let mut config = ScenarioConfig::reference();
    config.n_nodes = 5;
    config.topology_radius = 0.7;
    config.trials = 16;
    config.iterations = 1000;
    config.bit_depths = vec![
        Resolution::Full,
        Resolution::Bits(1),
        Resolution::Bits(2),
        Resolution::Bits(3),
        Resolution::Bits(4),
    ];
    let traces = run_experiment(&config).unwrap();
    let steady = |alg: Algorithm, bits: Resolution| {
        let t = traces
            .iter()
            .find(|t| t.algorithm == alg && t.bits == bits)
            .unwrap_or_else(|| panic!("missing curve {:?}/{bits}", alg));
        assert!(t.diverged_at.is_none(), "{:?}/{bits} diverged", alg);
        steady_state(&t.values)
    };

    let mut prev = f64::INFINITY;
    for b in 1..=4u32 {
        let dqa = steady(Algorithm::DqaLms, Resolution::Bits(b));
        assert!(
            dqa <= prev * 1.02,
            "DQA steady state increased at {b} bits: {dqa:.3e} after {prev:.3e}"
        );
        prev = dqa;
    }
    for b in 1..=3u32 {
        let dqa = steady(Algorithm::DqaLms, Resolution::Bits(b));
        let dlms_q = steady(Algorithm::DlmsQuantized, Resolution::Bits(b));
        assert!(
            dqa < dlms_q,
            "ordering broken at {b} bits: DQA {dqa:.3e} vs quantized DLMS {dlms_q:.3e}"
        );
    }
}

/// Monte-Carlo stability bound at 1 bit: white quantized regressors give
/// a near-scalar corrected covariance `beta^2 sigma_xQ^2 I`, so the
/// per-node bound lands at `2 / beta^2` (about 4.93 for the 1-bit design
/// constant beta = 2/pi).
#[test]
fn one_bit_stability_bound_matches_design_constant() {
    let design = design_rescaled(1).unwrap();
    let g = bussgang_gain(&design, 1.0).unwrap();
    let beta = bias_correction(g, 1.0, quantization_noise_variance(g, 1.0, 1.0)).unwrap();
    let expected_mu_max = 2.0 / (beta * beta);

    let profile = dqalms_core::simkit::NodeProfile::new(1.0, 0.05, 0.0).unwrap();
    let r = dqalms_core::simkit::quantized_regressor_covariance(
        &profile,
        4,
        Resolution::Bits(1),
        150_000,
        31,
        0,
    )
    .unwrap();
    let report = dqalms_core::analysis::stability_bound(&[r], &[0.05]).unwrap();
    assert!(report.stable);
    let mu_max = report.per_node_mu_max[0];
    assert!(
        (mu_max - expected_mu_max).abs() < 0.02 * expected_mu_max,
        "mu_max {mu_max:.3} vs 2/beta^2 = {expected_mu_max:.3}"
    );
}

/// Engine-level reduction: the quantization-aware path with the
/// full-resolution sentinel is bit-identical to plain diffusion LMS.
#[test]
fn full_resolution_sentinel_reduces_to_dlms() {
    let mut config = ScenarioConfig::reference();
    config.n_nodes = 4;
    config.topology_radius = 0.8;
    config.trials = 2;
    config.iterations = 1000;
    config.bit_depths = vec![Resolution::Full];
    let scenario = dqalms_core::simkit::Scenario::build(&config).unwrap();
    for trial in 0..config.trials {
        let (dlms, _) = scenario.run_trial(Algorithm::Dlms, Resolution::Full, trial).unwrap();
        let (dqa, _) = scenario.run_trial(Algorithm::DqaLms, Resolution::Full, trial).unwrap();
        assert_eq!(dlms.len(), dqa.len());
        for (a, b) in dlms.iter().zip(&dqa) {
            assert_eq!(a.to_bits(), b.to_bits(), "trial {trial}");
        }
    }
}
