//! Closed-form and semi-analytic evaluations: step-size stability bounds,
//! the mean weight-error recursion, the steady-state MSD approximation, ADC
//! power, and per-iteration complexity accounting.
//!
//! The mean weight error of the network evolves as
//! `E[W~(i)] = C (I - D R_Q) E[W~(i-1)]` with `C = A (x) I_M`,
//! `D = diag(mu_k I_M)` and `R_Q` the block diagonal of the per-node
//! quantized-regressor covariances. Because the combination weights keep
//! `||C|| <= 1` in the block maximum norm, the recursion contracts whenever
//! every node satisfies `0 < mu_k < 2 / lambda_max(R_{k,Q})`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Per-node step-size bounds `2 / lambda_max(R_{k,Q})` against the
/// configured step sizes.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub per_node_mu_max: Vec<f64>,
    pub configured_mu: Vec<f64>,
    pub stable: bool,
}

/// ADC power model: each of the `n_nodes` agents runs `adcs_per_node`
/// converters of bandwidth `bandwidth_hz` at `conversion_energy_j` joules
/// per conversion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub bandwidth_hz: f64,
    pub conversion_energy_j: f64,
    pub n_nodes: usize,
    pub adcs_per_node: usize,
}

impl PowerModel {
    /// Two ADCs per agent: one for the regressor, one for the desired
    /// signal.
    pub fn new(bandwidth_hz: f64, conversion_energy_j: f64, n_nodes: usize) -> Self {
        Self {
            bandwidth_hz,
            conversion_energy_j,
            n_nodes,
            adcs_per_node: 2,
        }
    }
}

/// Operation counts of one task (or the per-iteration total) at one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub multiplications: u64,
    pub additions: u64,
    pub divisions: u64,
    pub exponentiations: u64,
}

impl OpCounts {
    fn add(self, other: Self) -> Self {
        Self {
            multiplications: self.multiplications + other.multiplications,
            additions: self.additions + other.additions,
            divisions: self.divisions + other.divisions,
            exponentiations: self.exponentiations + other.exponentiations,
        }
    }
}

/// Per-task operation counts of one quantization-aware iteration at node
/// `k`, following the update pipeline: gain evaluation, correction
/// coefficient, filter prediction, error, adapt, combine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityBreakdown {
    pub gain_eval: OpCounts,
    pub correction: OpCounts,
    pub prediction: OpCounts,
    pub error: OpCounts,
    pub adapt: OpCounts,
    pub combine: OpCounts,
    pub total: OpCounts,
}

impl ComplexityBreakdown {
    pub fn rows(&self) -> [(&'static str, OpCounts); 6] {
        [
            ("gain", self.gain_eval),
            ("correction", self.correction),
            ("prediction", self.prediction),
            ("error", self.error),
            ("adapt", self.adapt),
            ("combine", self.combine),
        ]
    }
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration with a
/// Rayleigh-quotient stop.
fn hermitian_lambda_max(r: &[Vec<Complex64>]) -> f64 {
    let m = r.len();
    let mut v: Vec<Complex64> = (0..m)
        .map(|i| Complex64::new(1.0 + 1e-3 * i as f64, 0.0))
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0f64;
    for _ in 0..1000 {
        let mut next = vec![Complex64::ZERO; m];
        for (i, row) in r.iter().enumerate() {
            next[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        // Rayleigh quotient v^H R v with unit v.
        let rq: Complex64 = v.iter().zip(&next).map(|(a, b)| a.conj() * b).sum();
        let n = norm(&next);
        if n == 0.0 {
            return 0.0;
        }
        next.iter_mut().for_each(|x| *x /= n);
        let prev = lambda;
        lambda = rq.re;
        v = next;
        if (lambda - prev).abs() <= 1e-13 * lambda.abs().max(1.0) {
            break;
        }
    }
    lambda
}

fn check_hermitian(r: &[Vec<Complex64>]) -> Result<()> {
    let m = r.len();
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..m {
        if r[i].len() != m {
            return Err(Error::DimensionMismatch {
                context: "covariance matrix rows",
                expected: m,
                got: r[i].len(),
            });
        }
        for j in 0..m {
            scale = scale.max(r[i][j].norm());
            asym = asym.max((r[i][j] - r[j][i].conj()).norm());
        }
    }
    if asym > 1e-8 * scale.max(1.0) {
        return Err(Error::NonHermitian(asym));
    }
    Ok(())
}

/// Per-node stability bounds `mu_max,k = 2 / lambda_max(R_{k,Q})` and the
/// verdict `0 < mu_k < mu_max,k` for all nodes.
pub fn stability_bound(r_kq: &[Vec<Vec<Complex64>>], mu: &[f64]) -> Result<StabilityReport> {
    if r_kq.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            context: "covariances vs step sizes",
            expected: r_kq.len(),
            got: mu.len(),
        });
    }
    let mut per_node_mu_max = Vec::with_capacity(r_kq.len());
    for r in r_kq {
        check_hermitian(r)?;
        let lambda = hermitian_lambda_max(r);
        per_node_mu_max.push(if lambda > 0.0 { 2.0 / lambda } else { f64::INFINITY });
    }
    let stable = mu
        .iter()
        .zip(&per_node_mu_max)
        .all(|(m, m_max)| *m > 0.0 && m < m_max);
    Ok(StabilityReport {
        per_node_mu_max,
        configured_mu: mu.to_vec(),
        stable,
    })
}

/// Block maximum norm of a stacked per-node vector: the largest Euclidean
/// norm among the length-`m` blocks.
pub fn block_max_norm(v: &[Complex64], m: usize) -> f64 {
    v.chunks(m)
        .map(|b| b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Iterate the mean weight-error recursion
/// `E[W~(i)] = C (I - D R_Q) E[W~(i-1)]` from `w_tilde_0` and return the
/// block-maximum-norm trajectory (`steps + 1` values including the initial
/// norm).
///
/// `c_lift` is the `NM x NM` lifted combination operator, `d_steps` the
/// per-node step sizes, and `r_q` the per-node covariance blocks.
pub fn mean_error_recursion(
    c_lift: &[Vec<f64>],
    d_steps: &[f64],
    r_q: &[Vec<Vec<Complex64>>],
    w_tilde_0: &[Complex64],
    steps: usize,
) -> Result<Vec<f64>> {
    let n = d_steps.len();
    if r_q.len() != n {
        return Err(Error::DimensionMismatch {
            context: "covariance blocks vs step sizes",
            expected: n,
            got: r_q.len(),
        });
    }
    let m = r_q.first().map_or(0, |r| r.len());
    let dim = n * m;
    if w_tilde_0.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "initial error vector",
            expected: dim,
            got: w_tilde_0.len(),
        });
    }
    if c_lift.len() != dim || c_lift.iter().any(|row| row.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "lifted combination matrix",
            expected: dim,
            got: c_lift.len(),
        });
    }
    for r in r_q {
        check_hermitian(r)?;
    }

    let mut v = w_tilde_0.to_vec();
    let mut norms = Vec::with_capacity(steps + 1);
    norms.push(block_max_norm(&v, m));
    let mut adapted = vec![Complex64::ZERO; dim];
    for _ in 0..steps {
        // Per-node blocks: y_k = (I - mu_k R_k) v_k.
        for k in 0..n {
            let base = k * m;
            for i in 0..m {
                let rv: Complex64 = r_q[k][i]
                    .iter()
                    .zip(&v[base..base + m])
                    .map(|(a, b)| a * b)
                    .sum();
                adapted[base + i] = v[base + i] - rv * d_steps[k];
            }
        }
        // Network averaging: v = C y.
        for (i, row) in c_lift.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for (c, y) in row.iter().zip(&adapted) {
                if *c != 0.0 {
                    acc += y * *c;
                }
            }
            v[i] = acc;
        }
        norms.push(block_max_norm(&v, m));
    }
    Ok(norms)
}

/// Steady-state network MSD approximation of diffusion LMS with a shared
/// step size and doubly stochastic weights: `(mu M / N^2) sum_k
/// sigma_v,k^2` (linear scale).
pub fn theoretical_msd(mu: f64, m: usize, n: usize, sigma_v_sq: &[f64]) -> f64 {
    debug_assert!(mu >= 0.0 && m > 0 && n > 0);
    mu * m as f64 / (n as f64 * n as f64) * sigma_v_sq.iter().sum::<f64>()
}

/// Total ADC power of the network at resolution `bits`:
/// `adcs_per_node * N * c * B * 2^b` watts.
pub fn adc_network_power(model: &PowerModel, bits: u32) -> f64 {
    debug_assert!(bits >= 1);
    model.adcs_per_node as f64
        * model.n_nodes as f64
        * model.conversion_energy_j
        * model.bandwidth_hz
        * 2.0f64.powi(bits as i32)
}

/// Operation counts of one quantization-aware iteration at a node with
/// `m` taps, `n_k` neighbors (self included), and a `bits`-bit ADC.
///
/// Totals: multiplications `(2 + n_k) M + 2^{b+1} + 6`, additions
/// `(2 + n_k) M + 2^b`, divisions `2^b + 2`, exponentiations `2^b`.
pub fn complexity_count(m: usize, n_k: usize, bits: u32) -> ComplexityBreakdown {
    let m = m as u64;
    let n_k = n_k as u64;
    let p = 1u64 << bits;
    let gain_eval = OpCounts {
        multiplications: 2 * p + 1,
        additions: p - 1,
        divisions: p + 1,
        exponentiations: p,
    };
    let correction = OpCounts {
        multiplications: 2,
        additions: 1,
        divisions: 1,
        exponentiations: 0,
    };
    let prediction = OpCounts {
        multiplications: m + 1,
        additions: m - 1,
        ..Default::default()
    };
    let error = OpCounts {
        additions: 1,
        ..Default::default()
    };
    let adapt = OpCounts {
        multiplications: m + 2,
        additions: m,
        ..Default::default()
    };
    let combine = OpCounts {
        multiplications: n_k * m,
        additions: n_k * m,
        ..Default::default()
    };
    let total = gain_eval
        .add(correction)
        .add(prediction)
        .add(error)
        .add(adapt)
        .add(combine);
    ComplexityBreakdown {
        gain_eval,
        correction,
        prediction,
        error,
        adapt,
        combine,
        total,
    }
}
