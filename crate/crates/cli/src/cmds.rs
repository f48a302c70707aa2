//! Subcommand implementations. CSV schemas are documented in the README;
//! floats are written in shortest round-trip form and infinities as the
//! tokens `inf` / `-inf`. CSV files are written before any SVG so a plot
//! failure can never corrupt the data outputs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use dqalms_core::analysis::{
    adc_network_power, complexity_count, stability_bound, theoretical_msd, PowerModel,
};
use dqalms_core::quantkit::{design_rescaled, DistortionModel, MAX_BITS};
use dqalms_core::simkit::{
    quantized_regressor_covariance, run_experiment, MsdTrace, Resolution, Scenario,
};
use rayon::prelude::*;

use crate::config::FileConfig;
use crate::manifest::{write_atomic, RunManifest};
use crate::svg::{line_chart, Series};
use crate::CmdError;

fn db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn ensure_dir(dir: &Path) -> Result<(), CmdError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CmdError::Internal(format!("creating {}: {e}", dir.display())))
}

/// Install a rayon pool of the requested size for the duration of `f`.
fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send, default: T) -> T
where
    T: Send,
{
    match workers {
        None => f(),
        Some(0) => default,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .unwrap_or(default),
    }
}

fn msd_csv(traces: &[MsdTrace]) -> String {
    let mut out = String::from("iteration,algorithm,bits,msd_linear,msd_db\n");
    for t in traces {
        for (i, v) in t.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{}",
                t.algorithm.label(),
                t.bits,
                v,
                db(*v)
            );
        }
    }
    out
}

/// `run`: execute the ensemble experiment, write `msd.csv`, the manifest,
/// the resolved config, and (unless disabled) an `msd.svg` learning-curve
/// plot with a dB vertical axis.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    svg: bool,
) -> Result<(), CmdError> {
    let started = Instant::now();
    let mut cfg = FileConfig::load(config_path)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    ensure_dir(out_dir)?;

    let scenario = cfg.scenario.clone();
    let traces = with_workers(
        workers,
        move || run_experiment(&scenario),
        Err(dqalms_core::Error::InvalidArgument("workers must be >= 1".into())),
    )
    .map_err(|e| CmdError::Internal(format!("experiment failed: {e}")))?;

    write_atomic(&out_dir.join("msd.csv"), &msd_csv(&traces))?;
    write_atomic(&out_dir.join("resolved.conf"), &cfg.to_config_text())?;

    let mut artifacts = vec!["msd.csv".to_string(), "resolved.conf".to_string()];
    if svg {
        let series: Vec<Series> = traces
            .iter()
            .map(|t| Series {
                label: format!("{} ({} bit)", t.algorithm.label(), t.bits),
                points: t
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64, db(*v)))
                    .collect(),
            })
            .collect();
        let chart = line_chart("Network MSD learning curves", "iteration", "MSD (dB)", &series);
        write_atomic(&out_dir.join("msd.svg"), &chart)?;
        artifacts.push("msd.svg".to_string());
    }

    let diverged = traces.iter().any(|t| t.diverged_at.is_some());
    if diverged {
        eprintln!("warning: at least one curve tripped the divergence guard; traces truncated");
    }
    artifacts.push("manifest.json".to_string());
    RunManifest {
        version: dqalms_core::VERSION.to_string(),
        command: "run".into(),
        seed: cfg.scenario.seed,
        config: cfg.to_config_text(),
        artifacts,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        diverged,
    }
    .write(out_dir)?;

    println!(
        "wrote {} curves x {} iterations to {}",
        traces.len(),
        traces.iter().map(|t| t.values.len()).max().unwrap_or(0),
        out_dir.display()
    );
    Ok(())
}

/// `power`: tabulate total network ADC power over a bit range.
pub fn cmd_power(
    nodes: usize,
    bandwidth_hz: f64,
    conversion_energy_j: f64,
    min_bits: u32,
    max_bits: u32,
    out_dir: &Path,
    svg: bool,
) -> Result<(), CmdError> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if nodes == 0 || !positive(bandwidth_hz) || !positive(conversion_energy_j) {
        return Err(CmdError::Usage(
            "power model needs nodes >= 1 and positive bandwidth / conversion energy".into(),
        ));
    }
    if min_bits == 0 || max_bits < min_bits {
        return Err(CmdError::Usage(format!(
            "invalid bit range {min_bits}..{max_bits}"
        )));
    }
    ensure_dir(out_dir)?;
    let model = PowerModel::new(bandwidth_hz, conversion_energy_j, nodes);
    let mut csv = String::from("bits,watts\n");
    println!("bits  power_watts");
    let mut points = Vec::new();
    for bits in min_bits..=max_bits {
        let w = adc_network_power(&model, bits);
        let _ = writeln!(csv, "{bits},{w}");
        println!("{bits:>4}  {w:.6e}");
        points.push((bits as f64, db(w / 1e-3))); // dBm for plotting
    }
    write_atomic(&out_dir.join("power.csv"), &csv)?;
    if svg {
        let chart = line_chart(
            "Total ADC power of the network",
            "ADC resolution (bits)",
            "power (dBm)",
            &[Series { label: "2 N c B 2^b".into(), points }],
        );
        write_atomic(&out_dir.join("power.svg"), &chart)?;
    }
    Ok(())
}

/// `quantizer`: design the requested quantizer and dump it as CSV together
/// with its unit-variance summary quantities.
pub fn cmd_quantizer(bits: u32, out_dir: &Path) -> Result<(), CmdError> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(CmdError::Usage(format!(
            "bits must be in 1..={MAX_BITS}, got {bits}"
        )));
    }
    ensure_dir(out_dir)?;
    let design = design_rescaled(bits)
        .map_err(|e| CmdError::Internal(format!("quantizer design failed: {e}")))?;
    let model = DistortionModel::for_design(&design)
        .map_err(|e| CmdError::Internal(format!("distortion model failed: {e}")))?;

    let mut csv = String::from("cell_index,tau_low,tau_high,label\n");
    for (p, label) in design.labels().iter().enumerate() {
        let _ = writeln!(
            csv,
            "{p},{},{},{}",
            design.thresholds()[p],
            design.thresholds()[p + 1],
            label
        );
    }
    write_atomic(&out_dir.join("quantizer.csv"), &csv)?;

    let stats = format!(
        "bits,g,rho,alpha,sigma_q_sq\n{bits},{},{},{},{}\n",
        model.gain,
        model.rho,
        design.alpha(),
        model.sigma_q_sq
    );
    write_atomic(&out_dir.join("quantizer_stats.csv"), &stats)?;

    println!("bits    = {bits}");
    println!("g       = {:.6}", model.gain);
    println!("rho     = {:.6e}", model.rho);
    println!("alpha   = {:.6}", design.alpha());
    println!("sigma_q^2 = {:.6}", model.sigma_q_sq);
    Ok(())
}

/// Samples per node for the Monte-Carlo covariance estimate behind the
/// stability report (about 1% eigenvalue accuracy).
const STABILITY_SAMPLES: usize = 100_000;

/// `analyze`: stability report, complexity table, and the closed-form
/// steady-state MSD for the configured scenario.
pub fn cmd_analyze(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<(), CmdError> {
    let started = Instant::now();
    let mut cfg = FileConfig::load(config_path)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    ensure_dir(out_dir)?;
    let scenario = Scenario::build(&cfg.scenario)
        .map_err(|e| CmdError::Internal(format!("building scenario: {e}")))?;

    // Stability at the coarsest configured resolution (the operating point
    // of the quantization-aware algorithm; full resolution when no bit
    // depth is configured).
    let resolution = cfg
        .scenario
        .bit_depths
        .iter()
        .filter_map(|r| r.bits())
        .min()
        .map_or(Resolution::Full, Resolution::Bits);
    let m = cfg.scenario.filter_len;
    let seed_val = cfg.scenario.seed;
    let profiles = scenario.profiles().to_vec();
    let covariances = with_workers(
        workers,
        move || {
            profiles
                .par_iter()
                .enumerate()
                .map(|(k, p)| {
                    quantized_regressor_covariance(p, m, resolution, STABILITY_SAMPLES, seed_val, k)
                })
                .collect::<dqalms_core::Result<Vec<_>>>()
        },
        Err(dqalms_core::Error::InvalidArgument("workers must be >= 1".into())),
    )
    .map_err(|e| CmdError::Internal(format!("covariance estimation failed: {e}")))?;

    let mus = vec![cfg.scenario.mu; cfg.scenario.n_nodes];
    let report = stability_bound(&covariances, &mus)
        .map_err(|e| CmdError::Internal(format!("stability bound failed: {e}")))?;
    let mut stability_csv = String::from("node,mu,mu_max,stable\n");
    for k in 0..cfg.scenario.n_nodes {
        let mu = report.configured_mu[k];
        let mu_max = report.per_node_mu_max[k];
        let _ = writeln!(stability_csv, "{k},{mu},{mu_max},{}", mu > 0.0 && mu < mu_max);
    }
    write_atomic(&out_dir.join("stability.csv"), &stability_csv)?;

    // Complexity table over the configured bit depths at the configured
    // neighborhood size.
    let mut complexity_csv = String::from("bits,mult,add,div,exp\n");
    for r in &cfg.scenario.bit_depths {
        if let Some(b) = r.bits() {
            let c = complexity_count(m, cfg.complexity_neighbors, b).total;
            let _ = writeln!(
                complexity_csv,
                "{b},{},{},{},{}",
                c.multiplications, c.additions, c.divisions, c.exponentiations
            );
        }
    }
    write_atomic(&out_dir.join("complexity.csv"), &complexity_csv)?;

    // Closed-form steady-state MSD of the realized scenario.
    let sigma_v: Vec<f64> = scenario.profiles().iter().map(|p| p.sigma_v_sq).collect();
    let msd = theoretical_msd(cfg.scenario.mu, m, cfg.scenario.n_nodes, &sigma_v);
    let theory_csv = format!(
        "mu,m,n_nodes,sum_sigma_v_sq,msd_linear,msd_db\n{},{m},{},{},{},{}\n",
        cfg.scenario.mu,
        cfg.scenario.n_nodes,
        sigma_v.iter().sum::<f64>(),
        msd,
        db(msd)
    );
    write_atomic(&out_dir.join("theory.csv"), &theory_csv)?;

    RunManifest {
        version: dqalms_core::VERSION.to_string(),
        command: "analyze".into(),
        seed: cfg.scenario.seed,
        config: cfg.to_config_text(),
        artifacts: vec![
            "stability.csv".into(),
            "complexity.csv".into(),
            "theory.csv".into(),
            "manifest.json".into(),
        ],
        elapsed_seconds: started.elapsed().as_secs_f64(),
        diverged: false,
    }
    .write(out_dir)?;

    println!(
        "stability at {} bits: {}",
        resolution,
        if report.stable { "stable at every node" } else { "UNSTABLE at some node" }
    );
    println!("theoretical steady-state MSD = {msd:.6e} ({:.2} dB)", db(msd));
    Ok(())
}
