//! TS-OTFS waveform: QAM mapping, ISFFT/Heisenberg modulation, frame assembly
//! with duplicate training sequences, and the inverse receive chain
//! (serial-to-parallel, Wigner, SFFT, demapping).
//!
//! All transforms use unitary DFTs, so every stage preserves Frobenius energy
//! and modulate->demodulate is an exact identity (up to rounding).

use crate::numerics::{unitary_dft, ComplexMatrix, RngStream};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("modulation order {0} not supported (use an even number of bits per symbol, 2..=8)")]
    BadModulationOrder(usize),
    #[error("bit count {got} is not a multiple of {per_symbol} bits per symbol")]
    BadBitCount { got: usize, per_symbol: usize },
}

/// How receiver noise power is chosen for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Noiseless.
    Off,
    /// Per-sample SNR in dB, referenced to the weakest active terminal.
    SnrDb { snr_db: f64 },
    /// Explicit noise variance.
    SigmaSq { sigma_sq: f64 },
    /// SNR from the single-terminal link budget at the worst-case active
    /// terminal's zenith angle.
    LinkBudget,
}

/// Frame, array and receiver constants shared by every stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Delay bins per OTFS symbol (M).
    pub delay_bins: usize,
    /// Doppler bins / OTFS symbols per frame (N).
    pub doppler_bins: usize,
    /// Training sequence length (M_t).
    pub ts_len: usize,
    /// Channel impulse response length in taps (L); delays span 0..L-1.
    pub cir_len: usize,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing_hz: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Bits per QAM symbol (2 = QPSK).
    pub bits_per_symbol: usize,
    /// Satellite UPA size along x.
    pub array_x: usize,
    /// Satellite UPA size along y.
    pub array_y: usize,
    /// Potential terminals (K).
    pub terminals: usize,
    /// Expected active terminals (K_a).
    pub active_terminals: usize,
    /// Activity threshold factor (beta).
    pub activity_threshold: f64,
    /// SOMP termination threshold factor; the stop level is
    /// `factor * sigma_w^2` per sample.
    pub somp_threshold_factor: f64,
    /// SOMP iteration cap (T_max).
    pub somp_max_iters: usize,
    /// Minimum zenith separation between active terminals, degrees.
    pub min_zenith_sep_deg: f64,
    /// Minimum azimuth separation between active terminals, degrees.
    pub min_azimuth_sep_deg: f64,
    /// Default transmit power, dBm.
    pub tx_power_dbm: f64,
    /// Default Rician factor, dB.
    pub rician_factor_db: f64,
    /// Default NLoS path count per terminal (Q_k).
    pub nlos_paths: usize,
    /// Largest NLoS excess delay in taps.
    pub nlos_excess_max: usize,
    /// Terminal speed range upper bound, m/s.
    pub terminal_speed_max: f64,
    /// Draw the LoS path gain with constant unit magnitude (phase-only
    /// Rician LoS) instead of complex Gaussian.
    pub los_phase_only: bool,
    /// Refine Doppler estimates with a 1-D least-squares polish after ESPRIT.
    pub doppler_polish: bool,
    /// LSQR stopping tolerance for the detector.
    pub lsqr_tol: f64,
    /// LSQR iteration cap for the detector.
    pub lsqr_max_iters: usize,
    /// Receiver noise model.
    pub noise: NoiseModel,
}

impl SystemConfig {
    /// Small profile: every acceptance check runs in seconds on one core.
    /// The wider subcarrier spacing keeps the normalized Doppler inside the
    /// unambiguous bound even when the TS is stretched for large G.
    pub fn desk() -> Self {
        Self {
            delay_bins: 64,
            doppler_bins: 8,
            ts_len: 18,
            cir_len: 9,
            subcarrier_spacing_hz: 960e3,
            carrier_hz: 10e9,
            bits_per_symbol: 2,
            array_x: 4,
            array_y: 4,
            terminals: 50,
            active_terminals: 5,
            activity_threshold: 0.1,
            somp_threshold_factor: 1.05,
            somp_max_iters: 30,
            min_zenith_sep_deg: 14.4,
            min_azimuth_sep_deg: 14.3,
            tx_power_dbm: 40.0,
            rician_factor_db: 8.0,
            nlos_paths: 2,
            nlos_excess_max: 6,
            terminal_speed_max: 10.0,
            los_phase_only: false,
            doppler_polish: true,
            lsqr_tol: 1e-8,
            lsqr_max_iters: 200,
            noise: NoiseModel::Off,
        }
    }

    /// Full-scale profile (32x32 UPA, 122.88 MHz, 100 terminals). Expressible
    /// but far too heavy for routine test runs.
    pub fn paper() -> Self {
        Self {
            delay_bins: 256,
            doppler_bins: 8,
            ts_len: 52,
            cir_len: 33,
            subcarrier_spacing_hz: 480e3,
            carrier_hz: 10e9,
            bits_per_symbol: 2,
            array_x: 32,
            array_y: 32,
            terminals: 100,
            active_terminals: 10,
            activity_threshold: 0.1,
            somp_threshold_factor: 1.05,
            somp_max_iters: 30,
            min_zenith_sep_deg: 14.4,
            min_azimuth_sep_deg: 14.3,
            tx_power_dbm: 40.0,
            rician_factor_db: 8.0,
            nlos_paths: 2,
            nlos_excess_max: 16,
            terminal_speed_max: 10.0,
            los_phase_only: false,
            doppler_polish: true,
            lsqr_tol: 1e-8,
            lsqr_max_iters: 200,
            noise: NoiseModel::LinkBudget,
        }
    }

    pub fn validate(&self) -> Result<(), ModemError> {
        if self.delay_bins == 0 || self.doppler_bins == 0 {
            return Err(ModemError::InvalidConfig(
                "delay_bins and doppler_bins must be >= 1".into(),
            ));
        }
        if self.cir_len == 0 {
            return Err(ModemError::InvalidConfig("cir_len must be >= 1".into()));
        }
        if self.ts_len < self.cir_len {
            return Err(ModemError::InvalidConfig(format!(
                "ts_len ({}) must be >= cir_len ({}) so the non-ISI region is non-empty",
                self.ts_len, self.cir_len
            )));
        }
        if self.array_x == 0 || self.array_y == 0 {
            return Err(ModemError::InvalidConfig("array dims must be >= 1".into()));
        }
        if self.terminals == 0 || self.active_terminals > self.terminals {
            return Err(ModemError::InvalidConfig(
                "need terminals >= 1 and active_terminals <= terminals".into(),
            ));
        }
        if self.bits_per_symbol == 0 || self.bits_per_symbol % 2 != 0 || self.bits_per_symbol > 8 {
            return Err(ModemError::BadModulationOrder(self.bits_per_symbol));
        }
        if self.subcarrier_spacing_hz <= 0.0 || self.carrier_hz <= 0.0 {
            return Err(ModemError::InvalidConfig("frequencies must be > 0".into()));
        }
        Ok(())
    }

    /// Non-ISI region length G = M_t - L + 1.
    pub fn non_isi_len(&self) -> usize {
        self.ts_len - self.cir_len + 1
    }

    /// Total antennas P^s.
    pub fn antennas(&self) -> usize {
        self.array_x * self.array_y
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.delay_bins as f64 * self.subcarrier_spacing_hz
    }

    pub fn sample_interval_s(&self) -> f64 {
        1.0 / self.bandwidth_hz()
    }

    /// One OTFS symbol duration T = (M + M_t) * T_s.
    pub fn symbol_duration_s(&self) -> f64 {
        (self.delay_bins + self.ts_len) as f64 * self.sample_interval_s()
    }

    /// Samples per frame: M_t (N+1) + M N.
    pub fn frame_len(&self) -> usize {
        self.ts_len * (self.doppler_bins + 1) + self.delay_bins * self.doppler_bins
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.frame_len() as f64 * self.sample_interval_s()
    }

    /// Payload bits carried by one frame.
    pub fn payload_bits(&self) -> usize {
        self.delay_bins * self.doppler_bins * self.bits_per_symbol
    }

    /// Phase denominator N (M + M_t) used by the discrete Doppler exponent.
    pub fn doppler_denominator(&self) -> f64 {
        (self.doppler_bins * (self.delay_bins + self.ts_len)) as f64
    }

    /// Set the non-ISI length by stretching the TS: M_t = L - 1 + G.
    pub fn with_non_isi_len(mut self, g: usize) -> Self {
        self.ts_len = self.cir_len - 1 + g;
        self
    }
}

/// Fraction of the squared frame occupied by payload symbols,
/// `M (M + L - 1) N^2 / [M_t (N+1) + M N]^2`.
pub fn transmission_efficiency(cfg: &SystemConfig) -> f64 {
    let m = cfg.delay_bins as f64;
    let n = cfg.doppler_bins as f64;
    let l = cfg.cir_len as f64;
    let frame = cfg.frame_len() as f64;
    m * (m + l - 1.0) * n * n / (frame * frame)
}

// --- QAM ---

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn gray_encode(b: usize) -> usize {
    b ^ (b >> 1)
}

fn qam_axis_scale(bits_per_axis: usize) -> f64 {
    // Mean square of the +/-1, +/-3, ... level set on both axes is
    // 2 (4^m - 1) / 3; scaling by its inverse square root gives unit
    // average symbol energy.
    let levels = 1usize << bits_per_axis;
    let energy = 2.0 * ((levels * levels - 1) as f64) / 3.0;
    1.0 / energy.sqrt()
}

fn axis_level(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Gray-coded square-QAM mapper with unit average constellation energy.
///
/// Bits per symbol are split evenly between the I and Q axes, MSB first, and
/// each axis uses a Gray code over levels (2^m - 1) - 2k ordered so that the
/// all-zero word maps to the most positive level. For QPSK this puts bits
/// `00` on `(1 + j)/sqrt(2)`.
pub fn qam_map(bits: &[u8], bits_per_symbol: usize) -> Result<Vec<Complex64>, ModemError> {
    if bits_per_symbol == 0 || bits_per_symbol % 2 != 0 || bits_per_symbol > 8 {
        return Err(ModemError::BadModulationOrder(bits_per_symbol));
    }
    if bits.len() % bits_per_symbol != 0 {
        return Err(ModemError::BadBitCount {
            got: bits.len(),
            per_symbol: bits_per_symbol,
        });
    }
    let m = bits_per_symbol / 2;
    let scale = qam_axis_scale(m);
    let top = (1usize << m) - 1;
    let mut out = Vec::with_capacity(bits.len() / bits_per_symbol);
    for chunk in bits.chunks(bits_per_symbol) {
        let gi = axis_level(&chunk[..m]);
        let gq = axis_level(&chunk[m..]);
        let li = top as f64 - 2.0 * gray_decode(gi) as f64;
        let lq = top as f64 - 2.0 * gray_decode(gq) as f64;
        out.push(Complex64::new(li * scale, lq * scale));
    }
    Ok(out)
}

/// Nearest-neighbor demapper matching [`qam_map`].
pub fn qam_demap(symbols: &[Complex64], bits_per_symbol: usize) -> Result<Vec<u8>, ModemError> {
    if bits_per_symbol == 0 || bits_per_symbol % 2 != 0 || bits_per_symbol > 8 {
        return Err(ModemError::BadModulationOrder(bits_per_symbol));
    }
    let m = bits_per_symbol / 2;
    let scale = qam_axis_scale(m);
    let top = ((1usize << m) - 1) as i64;
    let slice = |v: f64| -> usize {
        // level = top - 2k, nearest k in [0, 2^m - 1]
        let k = ((top as f64 - v / scale) / 2.0).round() as i64;
        k.clamp(0, top) as usize
    };
    let mut out = Vec::with_capacity(symbols.len() * bits_per_symbol);
    for s in symbols {
        for part in [s.re, s.im] {
            let g = gray_encode(slice(part));
            for bit in (0..m).rev() {
                out.push(((g >> bit) & 1) as u8);
            }
        }
    }
    Ok(out)
}

// --- OTFS transforms ---

/// DD-domain payload grid (M x N).
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid(pub ComplexMatrix);

impl DdGrid {
    pub fn from_symbols(symbols: &[Complex64], cfg: &SystemConfig) -> Self {
        assert_eq!(symbols.len(), cfg.delay_bins * cfg.doppler_bins);
        // Column-major fill: symbol stream fills Doppler column by column.
        let m = cfg.delay_bins;
        DdGrid(ComplexMatrix::from_fn(m, cfg.doppler_bins, |r, c| {
            symbols[c * m + r]
        }))
    }

    pub fn to_symbols(&self) -> Vec<Complex64> {
        let (m, n) = (self.0.rows(), self.0.cols());
        let mut out = Vec::with_capacity(m * n);
        for c in 0..n {
            for r in 0..m {
                out.push(self.0.get(r, c));
            }
        }
        out
    }
}

/// Cached unitary DFTs for one (M, N) geometry.
pub struct OtfsTransform {
    f_delay: ComplexMatrix,
    f_doppler: ComplexMatrix,
}

impl OtfsTransform {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self {
            f_delay: unitary_dft(cfg.delay_bins),
            f_doppler: unitary_dft(cfg.doppler_bins),
        }
    }

    /// ISFFT: `X_tf = F_M X_dd F_N^H`.
    pub fn isfft(&self, dd: &ComplexMatrix) -> ComplexMatrix {
        self.f_delay.matmul(dd).matmul(&self.f_doppler.hermitian())
    }

    /// SFFT: `X_dd = F_M^H X_tf F_N`.
    pub fn sfft(&self, tf: &ComplexMatrix) -> ComplexMatrix {
        self.f_delay
            .hermitian()
            .matmul(tf)
            .matmul(&self.f_doppler)
    }

    /// Heisenberg transform under a rectangular window: per-column IDFT.
    pub fn heisenberg(&self, tf: &ComplexMatrix) -> ComplexMatrix {
        self.f_delay.hermitian().matmul(tf)
    }

    /// Wigner transform under a rectangular window: per-column DFT.
    pub fn wigner(&self, time: &ComplexMatrix) -> ComplexMatrix {
        self.f_delay.matmul(time)
    }

    /// DD grid to time-domain payload matrix (column i is OTFS symbol i).
    pub fn modulate(&self, dd: &DdGrid) -> ComplexMatrix {
        self.heisenberg(&self.isfft(&dd.0))
    }

    /// Inverse chain: serial payload -> DD grid.
    pub fn demodulate(&self, payload: &[Complex64], cfg: &SystemConfig) -> DdGrid {
        assert_eq!(payload.len(), cfg.delay_bins * cfg.doppler_bins);
        let m = cfg.delay_bins;
        let time = ComplexMatrix::from_fn(m, cfg.doppler_bins, |r, c| payload[c * m + r]);
        DdGrid(self.sfft(&self.wigner(&time)))
    }
}

// --- Training sequences and frames ---

/// Known time-domain training block for one terminal, derived from
/// `(global_seed, terminal)` so transmitter and receiver agree without any
/// exchange. Samples are complex Gaussian, normalized to unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    pub terminal: usize,
    pub samples: Vec<Complex64>,
}

const TS_STREAM_LABEL: u64 = 0x7453_7473; // "tsTS"

impl TrainingSequence {
    pub fn generate(global_seed: u64, terminal: usize, ts_len: usize) -> Self {
        let mut rng = RngStream::new(global_seed, TS_STREAM_LABEL).fork(terminal as u64);
        let mut samples = rng.complex_gaussian(ts_len, 1.0);
        let energy: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
        let scale = (ts_len as f64 / energy).sqrt();
        for z in samples.iter_mut() {
            *z *= scale;
        }
        Self { terminal, samples }
    }

    pub fn generate_all(global_seed: u64, cfg: &SystemConfig) -> Vec<Self> {
        (0..cfg.terminals)
            .map(|k| Self::generate(global_seed, k, cfg.ts_len))
            .collect()
    }
}

/// One terminal's transmit frame: `[c, s1, c, s2, ..., c, sN, c]`.
#[derive(Debug, Clone)]
pub struct TsOtfsFrame {
    pub samples: Vec<Complex64>,
    pub payload: ComplexMatrix,
    pub ts: TrainingSequence,
}

/// Interleave the payload columns with N+1 copies of the training sequence.
pub fn assemble_frame(payload: &ComplexMatrix, ts: &TrainingSequence, cfg: &SystemConfig) -> TsOtfsFrame {
    assert_eq!(payload.rows(), cfg.delay_bins);
    assert_eq!(payload.cols(), cfg.doppler_bins);
    assert_eq!(ts.samples.len(), cfg.ts_len);
    let mut samples = Vec::with_capacity(cfg.frame_len());
    for i in 0..cfg.doppler_bins {
        samples.extend_from_slice(&ts.samples);
        for r in 0..cfg.delay_bins {
            samples.push(payload.get(r, i));
        }
    }
    samples.extend_from_slice(&ts.samples);
    debug_assert_eq!(samples.len(), cfg.frame_len());
    TsOtfsFrame {
        samples,
        payload: payload.clone(),
        ts: ts.clone(),
    }
}

/// TS-and-zeros ring frame `[c, 0_M, c, ..., 0_M, c]` used for ISI estimation.
pub fn ts_ring_frame(ts: &TrainingSequence, cfg: &SystemConfig) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cfg.frame_len());
    for _ in 0..cfg.doppler_bins {
        out.extend_from_slice(&ts.samples);
        out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), cfg.delay_bins));
    }
    out.extend_from_slice(&ts.samples);
    out
}

/// Positions of the N+1 training sequences within a frame (start offsets).
pub fn ts_offsets(cfg: &SystemConfig) -> Vec<usize> {
    (0..=cfg.doppler_bins)
        .map(|i| i * (cfg.ts_len + cfg.delay_bins))
        .collect()
}

pub mod golden;

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bits(rng: &mut RngStream, n: usize) -> Vec<u8> {
        (0..n).map(|_| (rng.uniform() < 0.5) as u8).collect()
    }

    #[test]
    fn qpsk_gray_labeling() {
        let s = qam_map(&[0, 0], 2).unwrap();
        let expected = Complex64::new(1.0, 1.0) / 2.0f64.sqrt();
        assert!((s[0] - expected).norm() < 1e-15);
        let s11 = qam_map(&[1, 1], 2).unwrap();
        assert!((s11[0] + expected).norm() < 1e-15);
    }

    #[test]
    fn qam_round_trip() {
        let mut rng = RngStream::new(77, 0);
        for bps in [2usize, 4, 6] {
            let bits = random_bits(&mut rng, 1024 * bps / 2 * 2);
            let syms = qam_map(&bits, bps).unwrap();
            let back = qam_demap(&syms, bps).unwrap();
            assert_eq!(bits, back, "round trip failed for {bps} bits/symbol");
        }
    }

    #[test]
    fn constellation_has_unit_average_energy() {
        for bps in [2usize, 4, 6] {
            let n_points = 1usize << bps;
            let mut total = 0.0;
            for idx in 0..n_points {
                let bits: Vec<u8> = (0..bps).rev().map(|b| ((idx >> b) & 1) as u8).collect();
                let s = qam_map(&bits, bps).unwrap()[0];
                total += s.norm_sqr();
            }
            assert!(
                (total / n_points as f64 - 1.0).abs() < 1e-12,
                "bps={bps}: mean energy {}",
                total / n_points as f64
            );
        }
    }

    #[test]
    fn invalid_modulation_order_rejected() {
        assert!(qam_map(&[0, 1, 0], 3).is_err());
        assert!(qam_map(&[], 0).is_err());
        assert!(qam_demap(&[], 10).is_err());
    }

    fn small_cfg(m: usize, n: usize) -> SystemConfig {
        let mut cfg = SystemConfig::desk();
        cfg.delay_bins = m;
        cfg.doppler_bins = n;
        cfg
    }

    #[test]
    fn isfft_sfft_are_inverse() {
        let cfg = small_cfg(16, 4);
        let tx = OtfsTransform::new(&cfg);
        let mut rng = RngStream::new(5, 0);
        let x = ComplexMatrix::new(16, 4, rng.complex_gaussian(64, 1.0)).unwrap();
        let back = tx.sfft(&tx.isfft(&x));
        assert!(back.sub(&x).frobenius_norm() < 1e-12);
        // Unitary energy preservation.
        let tf = tx.isfft(&x);
        assert!((tf.frobenius_norm() - x.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn single_cell_transforms_are_identity() {
        let cfg = small_cfg(1, 1);
        let tx = OtfsTransform::new(&cfg);
        let x = ComplexMatrix::new(1, 1, vec![Complex64::new(0.3, -0.4)]).unwrap();
        assert!(tx.isfft(&x).sub(&x).frobenius_norm() < 1e-15);
    }

    #[test]
    fn heisenberg_wigner_are_inverse() {
        let cfg = small_cfg(8, 3);
        let tx = OtfsTransform::new(&cfg);
        let mut rng = RngStream::new(6, 0);
        let x = ComplexMatrix::new(8, 3, rng.complex_gaussian(24, 1.0)).unwrap();
        let back = tx.wigner(&tx.heisenberg(&x));
        assert!(back.sub(&x).frobenius_norm() < 1e-12);
        assert!((tx.heisenberg(&x).frobenius_norm() - x.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn modulate_demodulate_round_trip() {
        let cfg = small_cfg(32, 8);
        let tx = OtfsTransform::new(&cfg);
        let mut rng = RngStream::new(7, 0);
        let bits = random_bits(&mut rng, cfg.payload_bits());
        let dd = DdGrid::from_symbols(&qam_map(&bits, 2).unwrap(), &cfg);
        let time = tx.modulate(&dd);
        let serial: Vec<Complex64> = {
            let mut v = Vec::new();
            for c in 0..time.cols() {
                for r in 0..time.rows() {
                    v.push(time.get(r, c));
                }
            }
            v
        };
        let back = tx.demodulate(&serial, &cfg);
        let err = back.0.sub(&dd.0).frobenius_norm();
        assert!(err < 1e-10, "round-trip error {err}");
        let bits_back = qam_demap(&back.to_symbols(), 2).unwrap();
        assert_eq!(bits, bits_back);
    }

    #[test]
    fn all_zero_payload_demodulates_to_zero() {
        let cfg = small_cfg(8, 2);
        let tx = OtfsTransform::new(&cfg);
        let zeros = vec![Complex64::new(0.0, 0.0); 16];
        let dd = tx.demodulate(&zeros, &cfg);
        assert!(dd.0.frobenius_norm() < 1e-15);
    }

    #[test]
    fn frame_lengths_match_published_sizes() {
        let mut cfg = SystemConfig::paper();
        cfg.ts_len = 52;
        assert_eq!(cfg.frame_len(), 2516);
        cfg.ts_len = 62;
        assert_eq!(cfg.frame_len(), 2606);
    }

    #[test]
    fn frame_layout_interleaves_ts_copies() {
        let mut cfg = small_cfg(4, 1);
        cfg.ts_len = 3;
        cfg.cir_len = 2;
        let ts = TrainingSequence::generate(1, 0, cfg.ts_len);
        let payload = ComplexMatrix::from_fn(4, 1, |r, _| Complex64::new(r as f64, 0.0));
        let frame = assemble_frame(&payload, &ts, &cfg);
        // [c, s1, c]
        assert_eq!(frame.samples.len(), 3 + 4 + 3);
        assert_eq!(&frame.samples[..3], ts.samples.as_slice());
        assert_eq!(&frame.samples[7..], ts.samples.as_slice());
        assert_eq!(frame.samples[3], Complex64::new(0.0, 0.0));
        assert_eq!(frame.samples[6], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn ts_copies_extract_bit_exact() {
        let cfg = small_cfg(16, 4);
        let ts = TrainingSequence::generate(99, 3, cfg.ts_len);
        let mut rng = RngStream::new(8, 0);
        let payload =
            ComplexMatrix::new(16, 4, rng.complex_gaussian(64, 1.0)).unwrap();
        let frame = assemble_frame(&payload, &ts, &cfg);
        for off in ts_offsets(&cfg) {
            assert_eq!(&frame.samples[off..off + cfg.ts_len], ts.samples.as_slice());
        }
        assert_eq!(ts_offsets(&cfg).len(), cfg.doppler_bins + 1);
    }

    #[test]
    fn training_sequences_are_deterministic_and_normalized() {
        let a = TrainingSequence::generate(42, 7, 32);
        let b = TrainingSequence::generate(42, 7, 32);
        assert_eq!(a, b);
        let c = TrainingSequence::generate(42, 8, 32);
        assert_ne!(a, c);
        let energy: f64 = a.samples.iter().map(|z| z.norm_sqr()).sum();
        assert!((energy / 32.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transmission_efficiency_matches_published_table() {
        let mut cfg = SystemConfig::paper();
        for (mt, expected) in [(52, 0.7454), (62, 0.6948), (72, 0.6492), (82, 0.6079)] {
            cfg.ts_len = mt;
            let eff = transmission_efficiency(&cfg);
            assert!(
                ((eff * 1e4).round() / 1e4 - expected).abs() < 1e-12,
                "M_t={mt}: efficiency {eff}"
            );
        }
    }

    #[test]
    fn config_validation_enforces_non_isi_region() {
        let mut cfg = SystemConfig::desk();
        cfg.ts_len = 4;
        cfg.cir_len = 9;
        assert!(cfg.validate().is_err());
        cfg.ts_len = 9;
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.non_isi_len(), 1);
    }
}
