//! Monte-Carlo harness: scenario generation with angular spacing, the
//! end-to-end trial pipeline (modulate, superpose, identify, refine, detect),
//! metric computation, and deterministic parameter sweeps.

pub mod config;

pub use config::{ExperimentConfig, SweepAxis};

use crate::access::{
    self, build_sensing, identify_active, oracle_ls, refine, somp, ActivityEstimate,
    CoarseEstimate, MmvMeasurement, RefineOptions, RefinedChannel,
};
use crate::channel::{
    add_awgn, generate_tsl, link_budget_snr_at_zenith, ChannelError, ChannelRealization,
    OrbitGeometry, TerminalConfig,
};
use crate::detector::{detect_frame, BandedChannelOperator, DetectorError};
use crate::modem::{
    assemble_frame, qam_map, DdGrid, NoiseModel, OtfsTransform, SystemConfig, TrainingSequence,
};
use crate::numerics::RngStream;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("could not satisfy the angular spacing constraint after {0} resamples")]
    SpacingUnsatisfiable(usize),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// One drawn deployment: K terminal placements, activity flags, and channel
/// realizations for the active ones.
pub struct Scenario {
    pub terminals: Vec<TerminalConfig>,
    pub channels: Vec<Option<ChannelRealization>>,
}

fn circular_sep_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

fn violates_spacing(a: &TerminalConfig, b: &TerminalConfig, cfg: &SystemConfig) -> bool {
    (a.zenith_deg - b.zenith_deg).abs() < cfg.min_zenith_sep_deg
        && circular_sep_deg(a.azimuth_deg, b.azimuth_deg) < cfg.min_azimuth_sep_deg
}

fn draw_angles(term: &mut TerminalConfig, rng: &mut RngStream) {
    term.zenith_deg = rng.uniform_range(-44.7, 44.7);
    term.azimuth_deg = rng.uniform_range(0.0, 360.0);
}

/// Place K terminals, mark exactly K_a active uniformly at random, and
/// resample colliding active terminals until every active pair satisfies the
/// minimum angular spacing.
pub fn generate_scenario(
    cfg: &SystemConfig,
    geom: &OrbitGeometry,
    rng: &mut RngStream,
) -> Result<Scenario, HarnessError> {
    let mut terminals: Vec<TerminalConfig> = (0..cfg.terminals)
        .map(|id| {
            let mut t = TerminalConfig {
                id,
                zenith_deg: 0.0,
                azimuth_deg: 0.0,
                velocity_mps: rng.uniform_range(0.0, cfg.terminal_speed_max),
                tx_power_dbm: cfg.tx_power_dbm,
                rician_factor_db: cfg.rician_factor_db,
                nlos_paths: cfg.nlos_paths,
                active: false,
            };
            draw_angles(&mut t, rng);
            t
        })
        .collect();
    for idx in rng.choose_distinct(cfg.terminals, cfg.active_terminals) {
        terminals[idx].active = true;
    }

    let active_ids: Vec<usize> = terminals
        .iter()
        .filter(|t| t.active)
        .map(|t| t.id)
        .collect();
    let max_resamples = 10_000usize;
    let mut resamples = 0usize;
    'outer: loop {
        for i in 0..active_ids.len() {
            for j in (i + 1)..active_ids.len() {
                let (a, b) = (active_ids[i], active_ids[j]);
                if violates_spacing(&terminals[a], &terminals[b], cfg) {
                    resamples += 1;
                    if resamples > max_resamples {
                        return Err(HarnessError::SpacingUnsatisfiable(max_resamples));
                    }
                    let mut t = terminals[b].clone();
                    draw_angles(&mut t, rng);
                    terminals[b] = t;
                    continue 'outer;
                }
            }
        }
        break;
    }

    let mut channels = vec![None; cfg.terminals];
    for &k in &active_ids {
        let mut ch_rng = rng.fork(0x4348 + k as u64);
        channels[k] = Some(generate_tsl(&terminals[k], cfg, geom, &mut ch_rng)?);
    }
    Ok(Scenario {
        terminals,
        channels,
    })
}

/// Noise variance for one trial under the configured model, referenced to the
/// weakest active terminal's mean per-antenna received power.
pub fn noise_variance(
    scenario: &Scenario,
    cfg: &SystemConfig,
    geom: &OrbitGeometry,
) -> f64 {
    let weakest_power = scenario
        .channels
        .iter()
        .flatten()
        .map(|c| c.mean_antenna_power())
        .fold(f64::INFINITY, f64::min);
    let reference = if weakest_power.is_finite() {
        weakest_power
    } else {
        1.0
    };
    match cfg.noise {
        NoiseModel::Off => 0.0,
        NoiseModel::SigmaSq { sigma_sq } => sigma_sq,
        NoiseModel::SnrDb { snr_db } => reference / 10f64.powf(snr_db / 10.0),
        NoiseModel::LinkBudget => {
            let worst_zenith = scenario
                .terminals
                .iter()
                .filter(|t| t.active)
                .map(|t| t.zenith_deg.abs())
                .fold(0.0f64, f64::max);
            let snr_db = link_budget_snr_at_zenith(
                worst_zenith,
                geom,
                cfg.bandwidth_hz(),
                cfg.tx_power_dbm,
            );
            reference / 10f64.powf(snr_db / 10.0)
        }
    }
}

/// Everything one trial produced; metric contributions are recomputable from
/// the stored truth/estimate pairs.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: u64,
    pub true_activity: Vec<bool>,
    pub est_activity: Vec<bool>,
    /// True channel realizations of the active terminals.
    pub truth_channels: Vec<ChannelRealization>,
    /// Refined (or genie) realizations handed to the detector.
    pub estimated_channels: Vec<ChannelRealization>,
    /// Per active terminal: (terminal, transmitted bits).
    pub tx_bits: Vec<(usize, Vec<u8>)>,
    /// Per identified terminal: (terminal, detected bits).
    pub rx_bits: Vec<(usize, Vec<u8>)>,
    pub activity_errors: usize,
    pub falsely_identified: usize,
    pub payload_bit_errors: usize,
    pub true_active_count: usize,
    pub nmse_num: f64,
    pub nmse_den: f64,
    pub oracle_nmse_num: f64,
    pub oracle_nmse_den: f64,
    pub somp_iterations: usize,
    pub somp_converged: bool,
    pub gain_regularized: bool,
    pub mean_lsqr_iterations: f64,
    pub sigma_sq: f64,
}

/// Pipeline switches for a trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialOptions {
    pub with_oracle: bool,
    pub refine: RefineKind,
    /// Replace the thresholded activity decision with the true flags before
    /// stage 2 (support and CE still estimated). Isolates CE/SD quality from
    /// the energy detector's fading-induced misses.
    pub genie_activity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineKind {
    /// ESPRIT Doppler plus optional polish, per the config flag.
    Full,
    /// Stage-1 only: Doppler ignored (zero), gains averaged.
    CoarseOnly,
    /// Genie CSI and genie activated set; detection sees the true channels.
    GenieCsi,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            with_oracle: true,
            refine: RefineKind::Full,
            genie_activity: false,
        }
    }
}

fn refine_options(kind: RefineKind, cfg: &SystemConfig) -> RefineOptions {
    match kind {
        RefineKind::CoarseOnly => RefineOptions::coarse_only(),
        _ => RefineOptions::full(cfg),
    }
}

fn true_support(scenario: &Scenario, cfg: &SystemConfig) -> Vec<usize> {
    let mut sup = Vec::new();
    for ch in scenario.channels.iter().flatten() {
        for d in ch.delays() {
            sup.push(ch.terminal * cfg.cir_len + d);
        }
    }
    sup.sort_unstable();
    sup
}

/// Squared-error and reference-energy contributions of the banded effective
/// channel matrices, summed over terminals, antennas, and tap diagonals.
/// Diagonal sums use the closed-form geometric series, so full-frame
/// operators are never materialized.
pub fn nmse_components(
    estimates: &[ChannelRealization],
    est_active: &[bool],
    truths: &[ChannelRealization],
    true_active: &[bool],
    cfg: &SystemConfig,
) -> (f64, f64) {
    use std::collections::HashMap;
    let frame = cfg.frame_len();
    let denom = cfg.doppler_denominator();
    let antennas = cfg.antennas();
    let est_by_terminal: HashMap<usize, &ChannelRealization> =
        estimates.iter().map(|c| (c.terminal, c)).collect();
    let truth_by_terminal: HashMap<usize, &ChannelRealization> =
        truths.iter().map(|c| (c.terminal, c)).collect();

    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut terminals: Vec<usize> = est_by_terminal
        .keys()
        .chain(truth_by_terminal.keys())
        .copied()
        .collect();
    terminals.sort_unstable();
    terminals.dedup();

    for k in terminals {
        let est = est_by_terminal
            .get(&k)
            .filter(|_| est_active.get(k).copied().unwrap_or(false));
        let truth = truth_by_terminal
            .get(&k)
            .filter(|_| true_active.get(k).copied().unwrap_or(false));
        let mut taps: Vec<usize> = Vec::new();
        if let Some(e) = est {
            taps.extend(e.delays());
        }
        if let Some(t) = truth {
            taps.extend(t.delays());
        }
        taps.sort_unstable();
        taps.dedup();
        for tap in taps {
            let rows = frame - tap;
            let gain_at = |ch: Option<&&ChannelRealization>, p: usize| -> (Complex64, f64) {
                match ch {
                    Some(c) => {
                        let g = c
                            .paths
                            .iter()
                            .filter(|path| path.delay_tap == tap)
                            .map(|path| path.antenna_gains[p])
                            .sum::<Complex64>();
                        (g, c.normalized_doppler)
                    }
                    None => (Complex64::new(0.0, 0.0), 0.0),
                }
            };
            for p in 0..antennas {
                let (a, va) = gain_at(est, p);
                let (b, vb) = gain_at(truth, p);
                if a.norm_sqr() == 0.0 && b.norm_sqr() == 0.0 {
                    continue;
                }
                // sum_m |a w_a^m - b w_b^m|^2 over the diagonal's rows.
                let w = Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (va - vb) / denom,
                );
                let s = geometric_sum(w, rows);
                let cross = (a * b.conj() * s).re;
                num += rows as f64 * (a.norm_sqr() + b.norm_sqr()) - 2.0 * cross;
                den += rows as f64 * b.norm_sqr();
            }
        }
    }
    (num.max(0.0), den)
}

/// `sum_{m=0}^{n-1} w^m` for |w| = 1, stable near w = 1.
fn geometric_sum(w: Complex64, n: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let d = w - one;
    if d.norm() < 1e-9 {
        // Second-order expansion around w = 1.
        let nf = n as f64;
        one * nf + d * (nf * (nf - 1.0) / 2.0) + d * d * (nf * (nf - 1.0) * (nf - 2.0) / 6.0)
    } else {
        (w.powu(n as u32) - one) / d
    }
}

#[cfg(test)]
mod geometric_tests {
    use super::*;

    #[test]
    fn geometric_sum_agrees_with_direct_loop() {
        for &angle in &[0.0f64, 1e-12, 1e-8, 0.3, 2.9] {
            let w = Complex64::from_polar(1.0, angle);
            let direct: Complex64 = (0..674u32).map(|m| w.powu(m)).sum();
            let fast = geometric_sum(w, 674);
            assert!((direct - fast).norm() < 1e-6, "angle {angle}");
        }
    }
}

/// Run the whole receive chain for one seeded trial.
pub fn run_trial(
    cfg: &SystemConfig,
    geom: &OrbitGeometry,
    global_seed: u64,
    trial: u64,
    opts: TrialOptions,
) -> Result<TrialRecord, HarnessError> {
    let root = RngStream::new(global_seed, trial);
    let mut scenario_rng = root.fork(1);
    let scenario = generate_scenario(cfg, geom, &mut scenario_rng)?;
    let ts_set = TrainingSequence::generate_all(global_seed, cfg);
    let sigma_sq = noise_variance(&scenario, cfg, geom);

    // Transmit side: QAM payload per active terminal.
    let transform = OtfsTransform::new(cfg);
    let mut tx_bits = Vec::new();
    let mut rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()];
    for ch in scenario.channels.iter().flatten() {
        let k = ch.terminal;
        let mut bit_rng = root.fork(0xB175 + k as u64);
        let bits: Vec<u8> = (0..cfg.payload_bits())
            .map(|_| (bit_rng.uniform() < 0.5) as u8)
            .collect();
        let symbols = qam_map(&bits, cfg.bits_per_symbol).expect("validated config");
        let dd = DdGrid::from_symbols(&symbols, cfg);
        let frame = assemble_frame(&transform.modulate(&dd), &ts_set[k], cfg);
        let op = BandedChannelOperator::from_realization(ch, cfg);
        for (p, out) in rx.iter_mut().enumerate() {
            op.apply(p, &frame.samples, out);
        }
        tx_bits.push((k, bits));
    }
    let mut noise_rng = root.fork(2);
    for frame in rx.iter_mut() {
        add_awgn(frame, sigma_sq, &mut noise_rng);
    }

    // Stage 1 + 2.
    let sensing = build_sensing(&ts_set, cfg.cir_len, cfg.non_isi_len());
    let meas = MmvMeasurement::collect(&rx, cfg);
    let pi_th = cfg.somp_threshold_factor * sigma_sq;
    let coarse = somp(&meas, &sensing, cfg.somp_max_iters, pi_th);
    let mut activity = identify_active(&coarse, &sensing, cfg.activity_threshold);

    let truth_channels: Vec<ChannelRealization> =
        scenario.channels.iter().flatten().cloned().collect();
    let true_activity: Vec<bool> = scenario.terminals.iter().map(|t| t.active).collect();
    if opts.genie_activity {
        activity = ActivityEstimate {
            flags: true_activity.clone(),
            active_set: true_activity
                .iter()
                .enumerate()
                .filter_map(|(k, &a)| a.then_some(k))
                .collect(),
            threshold: 0.0,
        };
    }

    let (refined, est_activity): (RefinedChannel, Vec<bool>) = match opts.refine {
        RefineKind::GenieCsi => {
            // Detection sees the true channels and true activity.
            let genie = RefinedChannel {
                terminals: truth_channels
                    .iter()
                    .map(|c| access::RefinedTerminal {
                        terminal: c.terminal,
                        delays: c.delays(),
                        normalized_doppler: c.normalized_doppler,
                        doppler_confident: true,
                        gains: crate::numerics::ComplexMatrix::from_fn(
                            c.paths.len(),
                            cfg.antennas(),
                            |q, p| c.paths[q].antenna_gains[p],
                        ),
                    })
                    .collect(),
                regularized: false,
            };
            (genie, true_activity.clone())
        }
        kind => {
            let refined = refine(
                &coarse,
                &activity,
                &meas,
                &sensing,
                cfg,
                refine_options(kind, cfg),
            );
            (refined, activity.flags.clone())
        }
    };

    // Detection for the identified set.
    let est_realizations = refined.to_realizations(cfg.antennas());
    let results = detect_frame(&rx, &est_realizations, &ts_set, cfg)?;
    let rx_bits: Vec<(usize, Vec<u8>)> = results
        .iter()
        .map(|r| (r.terminal, r.bits.clone()))
        .collect();
    let mean_lsqr = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.lsqr_iterations as f64).sum::<f64>() / results.len() as f64
    };

    // Metrics.
    let activity_errors = true_activity
        .iter()
        .zip(est_activity.iter())
        .filter(|(t, e)| t != e)
        .count();
    let falsely_identified = activity_errors; // |A Δ Â|
    let mut payload_bit_errors = 0usize;
    for (k, bits) in &tx_bits {
        match rx_bits.iter().find(|(rk, _)| rk == k) {
            Some((_, det)) => {
                payload_bit_errors += bits
                    .iter()
                    .zip(det.iter())
                    .filter(|(a, b)| a != b)
                    .count();
            }
            // Identified active but nothing detectable (no recovered atoms):
            // the whole frame is lost. Missed terminals are charged through
            // the falsely-identified count instead.
            None if est_activity.get(*k).copied().unwrap_or(false) => {
                payload_bit_errors += bits.len();
            }
            None => {}
        }
    }
    let (nmse_num, nmse_den) = nmse_components(
        &est_realizations,
        &est_activity,
        &truth_channels,
        &true_activity,
        cfg,
    );

    // Oracle-LS baseline on the same measurement: genie support and activity,
    // then the same stage-2 refinement.
    let (oracle_nmse_num, oracle_nmse_den) = if opts.with_oracle {
        let support = true_support(&scenario, cfg);
        let oracle_coarse: CoarseEstimate = oracle_ls(&meas, &support, &sensing);
        let oracle_activity = ActivityEstimate {
            flags: true_activity.clone(),
            active_set: true_activity
                .iter()
                .enumerate()
                .filter_map(|(k, &a)| a.then_some(k))
                .collect(),
            threshold: 0.0,
        };
        let oracle_refined = refine(
            &oracle_coarse,
            &oracle_activity,
            &meas,
            &sensing,
            cfg,
            refine_options(opts.refine, cfg),
        );
        nmse_components(
            &oracle_refined.to_realizations(cfg.antennas()),
            &true_activity,
            &truth_channels,
            &true_activity,
            cfg,
        )
    } else {
        (0.0, 0.0)
    };

    Ok(TrialRecord {
        seed: global_seed,
        trial,
        true_activity,
        est_activity,
        truth_channels,
        estimated_channels: est_realizations,
        tx_bits,
        rx_bits,
        activity_errors,
        falsely_identified,
        payload_bit_errors,
        true_active_count: scenario.channels.iter().flatten().count(),
        nmse_num,
        nmse_den,
        oracle_nmse_num,
        oracle_nmse_den,
        somp_iterations: coarse.iterations,
        somp_converged: coarse.converged,
        gain_regularized: refined.regularized,
        mean_lsqr_iterations: mean_lsqr,
        sigma_sq,
    })
}

// --- Metrics over trial collections ---

/// Identification error probability: per-trial `sum_k |a_hat - a| / K`,
/// averaged over trials.
pub fn metric_pe(records: &[TrialRecord], terminals: usize) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records
        .iter()
        .map(|r| r.activity_errors as f64 / terminals as f64)
        .sum::<f64>()
        / records.len() as f64
}

fn nmse_db_from(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        // No truth energy: floor when the estimate is empty too, cap when a
        // false alarm produced spurious energy.
        return if num <= 0.0 { -120.0 } else { 60.0 };
    }
    10.0 * (num / den).max(1e-12).log10()
}

/// NMSE in dB: ratio of summed squared errors to summed truth energy across
/// trials (paired aggregation), floored at -120 dB.
pub fn metric_nmse_db(records: &[TrialRecord]) -> f64 {
    let num: f64 = records.iter().map(|r| r.nmse_num).sum();
    let den: f64 = records.iter().map(|r| r.nmse_den).sum();
    nmse_db_from(num, den)
}

pub fn metric_oracle_nmse_db(records: &[TrialRecord]) -> f64 {
    let num: f64 = records.iter().map(|r| r.oracle_nmse_num).sum();
    let den: f64 = records.iter().map(|r| r.oracle_nmse_den).sum();
    nmse_db_from(num, den)
}

/// Uncoded BER `(E_a N M M_b + B_a) / (K_a N M M_b)` aggregated over trials;
/// falsely identified terminals charge a full frame of bit errors.
pub fn metric_ber(records: &[TrialRecord], payload_bits: usize) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for r in records {
        num += (r.falsely_identified * payload_bits + r.payload_bit_errors) as f64;
        den += (r.true_active_count * payload_bits) as f64;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Normal-approximation 95% confidence half-width of a per-trial mean.
fn half_width(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    1.96 * (var / n as f64).sqrt()
}

/// Aggregated metrics for one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub axis_value: f64,
    pub trials: usize,
    pub pe: f64,
    pub nmse_db: f64,
    pub ber: f64,
    pub oracle_nmse_db: f64,
    pub pe_half_width: f64,
    pub ber_half_width: f64,
    pub mean_somp_iters: f64,
    pub mean_lsqr_iters: f64,
    pub wall_ms: u64,
}

pub fn summarize(
    records: &[TrialRecord],
    cfg: &SystemConfig,
    axis_value: f64,
    wall_ms: u64,
) -> MetricSummary {
    let payload_bits = cfg.payload_bits();
    let pe_samples: Vec<f64> = records
        .iter()
        .map(|r| r.activity_errors as f64 / cfg.terminals as f64)
        .collect();
    let ber_samples: Vec<f64> = records
        .iter()
        .map(|r| {
            let den = (r.true_active_count * payload_bits) as f64;
            if den == 0.0 {
                0.0
            } else {
                (r.falsely_identified * payload_bits + r.payload_bit_errors) as f64 / den
            }
        })
        .collect();
    MetricSummary {
        axis_value,
        trials: records.len(),
        pe: metric_pe(records, cfg.terminals),
        nmse_db: metric_nmse_db(records),
        ber: metric_ber(records, payload_bits),
        oracle_nmse_db: metric_oracle_nmse_db(records),
        pe_half_width: half_width(&pe_samples),
        ber_half_width: half_width(&ber_samples),
        mean_somp_iters: records.iter().map(|r| r.somp_iterations as f64).sum::<f64>()
            / records.len().max(1) as f64,
        mean_lsqr_iters: records.iter().map(|r| r.mean_lsqr_iterations).sum::<f64>()
            / records.len().max(1) as f64,
        wall_ms,
    }
}

pub const CSV_HEADER: &str =
    "axis_value,trials,pe,nmse_db,ber,oracle_nmse_db,mean_somp_iters,mean_lsqr_iters,wall_ms";

pub fn csv_row(s: &MetricSummary) -> String {
    format!(
        "{},{},{:.8},{:.4},{:.8},{:.4},{:.3},{:.3},{}",
        s.axis_value,
        s.trials,
        s.pe,
        s.nmse_db,
        s.ber,
        s.oracle_nmse_db,
        s.mean_somp_iters,
        s.mean_lsqr_iters,
        s.wall_ms
    )
}

/// Sweep output: per-point summaries plus the rendered CSV.
#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<MetricSummary>,
    pub csv: String,
}

/// Run every sweep point with paired per-trial seeds. Trials are distributed
/// over the worker pool; aggregation is order-independent, so the CSV is
/// byte-identical for any worker count. Wall time is recorded in the rows
/// only when `record_timing` is set (the column prints 0 otherwise).
pub fn run_sweep(
    exp: &ExperimentConfig,
    record_timing: bool,
) -> Result<SweepReport, Box<dyn std::error::Error + Send + Sync>> {
    exp.validate()?;
    let geom = OrbitGeometry::leo_default();
    let mut rows = Vec::with_capacity(exp.values.len());
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.workers)
        .build()?;

    for &value in &exp.values {
        let cfg = exp.config_at(value)?;
        let start = std::time::Instant::now();
        let records: Result<Vec<TrialRecord>, HarnessError> = pool.install(|| {
            (0..exp.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(&cfg, &geom, exp.seed, t, TrialOptions::default()))
                .collect()
        });
        let records = records?;
        let wall_ms = if record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let summary = summarize(&records, &cfg, value, wall_ms);
        csv.push_str(&csv_row(&summary));
        csv.push('\n');
        rows.push(summary);
    }
    Ok(SweepReport { rows, csv })
}

/// JSON manifest: config echo, version, and per-row summaries with timing.
pub fn manifest_json(exp: &ExperimentConfig, report: &SweepReport, total_ms: u64) -> String {
    #[derive(Serialize)]
    struct Manifest<'a> {
        version: &'static str,
        config: &'a ExperimentConfig,
        total_wall_ms: u64,
        rows: &'a [MetricSummary],
    }
    serde_json::to_string_pretty(&Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: exp,
        total_wall_ms: total_ms,
        rows: &report.rows,
    })
    .expect("manifest serialization")
}
