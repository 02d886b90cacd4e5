//! Multi-user payload detection in the time domain.
//!
//! The refined CSI defines banded time-varying channel operators that are
//! only ever applied sample-by-sample. Detection cancels the ISI the known
//! training sequences cause, folds each symbol's channel trailing back onto
//! its head to restore circular structure, strips the TS slots, and solves
//! the N per-symbol least-squares systems independently with LSQR.

use crate::channel::ChannelRealization;
use crate::modem::{qam_demap, ts_ring_frame, DdGrid, ModemError, OtfsTransform, SystemConfig, TrainingSequence};
use crate::numerics::{lsqr_solve, ComplexMatrix, LinearOperator};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("need at least as many antennas as detected terminals (P={antennas}, K_a={users})")]
    TooManyUsers { antennas: usize, users: usize },
    #[error(transparent)]
    Modem(#[from] ModemError),
}

/// Banded time-varying channel operator for one terminal: entries
/// `Pi[r, c] = h[r, r - c]` wherever `r - c` is one of the link's delay taps.
/// Applications are O(frame x taps); the matrix is never materialized.
#[derive(Debug, Clone)]
pub struct BandedChannelOperator {
    pub terminal: usize,
    frame_len: usize,
    phase_denom: f64,
    normalized_doppler: f64,
    /// (delay tap, per-antenna gains).
    taps: Vec<(usize, Vec<Complex64>)>,
}

impl BandedChannelOperator {
    pub fn from_realization(ch: &ChannelRealization, cfg: &SystemConfig) -> Self {
        Self {
            terminal: ch.terminal,
            frame_len: cfg.frame_len(),
            phase_denom: cfg.doppler_denominator(),
            normalized_doppler: ch.normalized_doppler,
            taps: ch
                .paths
                .iter()
                .map(|p| (p.delay_tap, p.antenna_gains.clone()))
                .collect(),
        }
    }

    fn phase(&self, sample: f64) -> Complex64 {
        Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * self.normalized_doppler * sample / self.phase_denom,
        )
    }

    /// `y += Pi x` at one antenna. The CIR phase rides the input-sample
    /// clock: `h[kappa, l] = g exp(j 2 pi v (kappa - l) / (N(M+M_t)))`.
    pub fn apply(&self, antenna: usize, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.frame_len);
        assert_eq!(y.len(), self.frame_len);
        for (delay, gains) in &self.taps {
            let g = gains[antenna];
            for kappa in *delay..self.frame_len {
                let input = kappa - delay;
                y[kappa] += g * self.phase(input as f64) * x[input];
            }
        }
    }

    /// Transmit a frame over all antennas: returns P^s received frames.
    pub fn transmit(&self, x: &[Complex64], antennas: usize) -> Vec<Vec<Complex64>> {
        (0..antennas)
            .map(|p| {
                let mut y = vec![Complex64::new(0.0, 0.0); self.frame_len];
                self.apply(p, x, &mut y);
                y
            })
            .collect()
    }
}

/// Subtract the estimated TS-driven interference `sum_k Pi_k ring_k` from
/// every antenna's frame.
pub fn cancel_ts_isi(
    rx: &[Vec<Complex64>],
    operators: &[BandedChannelOperator],
    ts_set: &[TrainingSequence],
    cfg: &SystemConfig,
) -> Vec<Vec<Complex64>> {
    let antennas = rx.len();
    let mut cleaned = rx.to_vec();
    for op in operators {
        let ring = ts_ring_frame(&ts_set[op.terminal], cfg);
        for (p, frame) in cleaned.iter_mut().enumerate().take(antennas) {
            let mut isi = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
            op.apply(p, &ring, &mut isi);
            for (a, b) in frame.iter_mut().zip(isi.iter()) {
                *a -= b;
            }
        }
    }
    cleaned
}

/// Drop the leading TS, fold each symbol's trailing back onto its head, and
/// strip the TS slots. Returns, per OTFS symbol i, the antenna-major stacked
/// right-hand side of length `P^s * M`.
pub fn fold_and_strip(cleaned: &[Vec<Complex64>], cfg: &SystemConfig) -> Vec<Vec<Complex64>> {
    let m = cfg.delay_bins;
    let mt = cfg.ts_len;
    let block = m + mt;
    let antennas = cleaned.len();
    (1..=cfg.doppler_bins)
        .map(|i| {
            let base = mt + (i - 1) * block;
            let mut rhs = Vec::with_capacity(antennas * m);
            for frame in cleaned {
                for u in 0..m {
                    let mut v = frame[base + u];
                    if u < mt {
                        v += frame[base + m + u];
                    }
                    rhs.push(v);
                }
            }
            rhs
        })
        .collect()
}

/// Matrix-free per-symbol system `U^i`: block (p, k) maps user k's M-sample
/// time symbol to antenna p's folded observation via a cyclic tap sum with a
/// per-input-sample Doppler phase.
pub struct PerSymbolSystem<'a> {
    operators: &'a [BandedChannelOperator],
    antennas: usize,
    delay_bins: usize,
    /// Global sample index of the symbol's first payload sample.
    symbol_origin: usize,
}

impl<'a> PerSymbolSystem<'a> {
    /// `symbol_index` is 1-based.
    pub fn new(operators: &'a [BandedChannelOperator], symbol_index: usize, cfg: &SystemConfig) -> Self {
        assert!(symbol_index >= 1 && symbol_index <= cfg.doppler_bins);
        Self {
            operators,
            antennas: cfg.antennas(),
            delay_bins: cfg.delay_bins,
            symbol_origin: symbol_index * cfg.ts_len + (symbol_index - 1) * cfg.delay_bins,
        }
    }

    pub fn users(&self) -> usize {
        self.operators.len()
    }
}

impl LinearOperator for PerSymbolSystem<'_> {
    fn in_dim(&self) -> usize {
        self.operators.len() * self.delay_bins
    }

    fn out_dim(&self) -> usize {
        self.antennas * self.delay_bins
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.delay_bins;
        y.fill(Complex64::new(0.0, 0.0));
        for (k, op) in self.operators.iter().enumerate() {
            let xk = &x[k * m..(k + 1) * m];
            // Phase of each input sample at its global time index.
            let phased: Vec<Complex64> = (0..m)
                .map(|j| op.phase((self.symbol_origin + j) as f64) * xk[j])
                .collect();
            for (delay, gains) in &op.taps {
                for (p, gain) in gains.iter().enumerate().take(self.antennas) {
                    let yp = &mut y[p * m..(p + 1) * m];
                    for u in 0..m {
                        let j = (u + m - delay % m) % m;
                        yp[u] += gain * phased[j];
                    }
                }
            }
        }
    }

    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        let m = self.delay_bins;
        x.fill(Complex64::new(0.0, 0.0));
        for (k, op) in self.operators.iter().enumerate() {
            let xk = &mut x[k * m..(k + 1) * m];
            for (delay, gains) in &op.taps {
                for (p, gain) in gains.iter().enumerate().take(self.antennas) {
                    let yp = &y[p * m..(p + 1) * m];
                    let gc = gain.conj();
                    for j in 0..m {
                        let u = (j + delay) % m;
                        xk[j] += gc * yp[u];
                    }
                }
            }
            for (j, v) in xk.iter_mut().enumerate() {
                *v *= op.phase((self.symbol_origin + j) as f64).conj();
            }
        }
    }
}

/// Detected payload for one identified terminal.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub terminal: usize,
    /// Time-domain payload matrix (M x N).
    pub payload: ComplexMatrix,
    pub dd_grid: DdGrid,
    pub bits: Vec<u8>,
    pub lsqr_iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

/// Solve one per-symbol system; returns per-user M-sample estimates.
pub fn detect_symbol(
    system: &PerSymbolSystem,
    rhs: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> (Vec<Vec<Complex64>>, usize, bool, f64) {
    let sol = lsqr_solve(system, rhs, tol, max_iter);
    let m = system.delay_bins;
    let users = (0..system.users())
        .map(|k| sol.x[k * m..(k + 1) * m].to_vec())
        .collect();
    (users, sol.iterations, sol.converged, sol.residual_norm)
}

/// Full detection pipeline: ISI cancellation, fold/strip, N independent
/// per-symbol LS solves, then OTFS demodulation and QAM demapping per user.
pub fn detect_frame(
    rx: &[Vec<Complex64>],
    refined: &[ChannelRealization],
    ts_set: &[TrainingSequence],
    cfg: &SystemConfig,
) -> Result<Vec<DetectionResult>, DetectorError> {
    if refined.is_empty() {
        return Ok(Vec::new());
    }
    if cfg.antennas() < refined.len() {
        return Err(DetectorError::TooManyUsers {
            antennas: cfg.antennas(),
            users: refined.len(),
        });
    }
    let operators: Vec<BandedChannelOperator> = refined
        .iter()
        .map(|ch| BandedChannelOperator::from_realization(ch, cfg))
        .collect();
    let cleaned = cancel_ts_isi(rx, &operators, ts_set, cfg);
    let rhs_per_symbol = fold_and_strip(&cleaned, cfg);

    let m = cfg.delay_bins;
    let n = cfg.doppler_bins;
    let mut payloads = vec![ComplexMatrix::zeros(m, n); refined.len()];
    let mut total_iters = 0usize;
    let mut all_converged = true;
    let mut residual = 0.0f64;
    for (i, rhs) in rhs_per_symbol.iter().enumerate() {
        let system = PerSymbolSystem::new(&operators, i + 1, cfg);
        let (users, iters, converged, res) =
            detect_symbol(&system, rhs, cfg.lsqr_tol, cfg.lsqr_max_iters);
        total_iters += iters;
        all_converged &= converged;
        residual += res * res;
        for (k, est) in users.into_iter().enumerate() {
            for (r, v) in est.into_iter().enumerate() {
                payloads[k].set(r, i, v);
            }
        }
    }

    let transform = OtfsTransform::new(cfg);
    let mut results = Vec::with_capacity(refined.len());
    for (k, payload) in payloads.into_iter().enumerate() {
        let serial: Vec<Complex64> = {
            let mut v = Vec::with_capacity(m * n);
            for c in 0..n {
                for r in 0..m {
                    v.push(payload.get(r, c));
                }
            }
            v
        };
        let dd = transform.demodulate(&serial, cfg);
        let bits = qam_demap(&dd.to_symbols(), cfg.bits_per_symbol)?;
        results.push(DetectionResult {
            terminal: refined[k].terminal,
            payload,
            dd_grid: dd,
            bits,
            lsqr_iterations: total_iters / n,
            converged: all_converged,
            residual_norm: residual.sqrt(),
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathTap;
    use crate::modem::{assemble_frame, qam_map, TrainingSequence};
    use crate::numerics::{adjoint_mismatch, RngStream};

    fn small_cfg() -> SystemConfig {
        let mut cfg = SystemConfig::desk();
        cfg.delay_bins = 16;
        cfg.doppler_bins = 4;
        cfg.ts_len = 6;
        cfg.cir_len = 4;
        cfg.array_x = 2;
        cfg.array_y = 2;
        cfg.terminals = 4;
        cfg
    }

    fn single_path(terminal: usize, delay: usize, doppler: f64, gains: Vec<Complex64>) -> ChannelRealization {
        ChannelRealization {
            terminal,
            normalized_doppler: doppler,
            paths: vec![PathTap {
                delay_tap: delay,
                antenna_gains: gains,
            }],
        }
    }

    fn random_realization(
        terminal: usize,
        taps: usize,
        doppler: f64,
        cfg: &SystemConfig,
        rng: &mut RngStream,
    ) -> ChannelRealization {
        let delays = rng.choose_distinct(cfg.cir_len, taps);
        ChannelRealization {
            terminal,
            normalized_doppler: doppler,
            paths: delays
                .into_iter()
                .map(|d| PathTap {
                    delay_tap: d,
                    antenna_gains: rng.complex_gaussian(cfg.antennas(), 1.0),
                })
                .collect(),
        }
    }

    #[test]
    fn identity_tap_is_identity_operator() {
        let cfg = small_cfg();
        let ones = vec![Complex64::new(1.0, 0.0); cfg.antennas()];
        let ch = single_path(0, 0, 0.0, ones);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        let mut rng = RngStream::new(1, 0);
        let x = rng.complex_gaussian(cfg.frame_len(), 1.0);
        let mut y = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        op.apply(0, &x, &mut y);
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_delay_shifts_and_scales() {
        let cfg = small_cfg();
        let g = Complex64::new(0.3, -0.8);
        let ch = single_path(0, 2, 0.0, vec![g; cfg.antennas()]);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        let mut x = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        x[5] = Complex64::new(1.0, 0.0);
        let mut y = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        op.apply(1, &x, &mut y);
        assert!((y[7] - g).norm() < 1e-15);
        assert_eq!(y.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn operator_matches_brute_force_convolution() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(2, 0);
        let ch = random_realization(0, 3, 1.7, &cfg, &mut rng);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        let x = rng.complex_gaussian(cfg.frame_len(), 1.0);
        for p in 0..cfg.antennas() {
            let mut y = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
            op.apply(p, &x, &mut y);
            for kappa in 0..cfg.frame_len() {
                let mut expected = Complex64::new(0.0, 0.0);
                for l in 0..cfg.cir_len.min(kappa + 1) {
                    expected += crate::channel::sample_cir(&ch, kappa, l, p, &cfg) * x[kappa - l];
                }
                assert!(
                    (y[kappa] - expected).norm() < 1e-12,
                    "antenna {p} sample {kappa}"
                );
            }
        }
    }

    #[test]
    fn ts_only_frame_cancels_exactly() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(3, 0);
        let ts_set = TrainingSequence::generate_all(11, &cfg);
        let ch = random_realization(1, 2, -2.3, &cfg, &mut rng);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        // Transmit the TS ring only (zero payload).
        let ring = ts_ring_frame(&ts_set[1], &cfg);
        let rx = op.transmit(&ring, cfg.antennas());
        let cleaned = cancel_ts_isi(&rx, &[op], &ts_set, &cfg);
        for frame in &cleaned {
            let norm: f64 = frame.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm < 1e-10, "residual {norm}");
        }
    }

    #[test]
    fn zero_channel_estimate_leaves_input_untouched() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(4, 0);
        let ts_set = TrainingSequence::generate_all(12, &cfg);
        let rx: Vec<Vec<Complex64>> = (0..cfg.antennas())
            .map(|_| rng.complex_gaussian(cfg.frame_len(), 1.0))
            .collect();
        let cleaned = cancel_ts_isi(&rx, &[], &ts_set, &cfg);
        assert_eq!(cleaned, rx);
    }

    #[test]
    fn fold_passes_payload_verbatim_when_ts_slots_are_zero() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(5, 0);
        // Build a frame whose TS slots are zero and whose payload is known.
        let m = cfg.delay_bins;
        let mt = cfg.ts_len;
        let mut frame = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        let payload: Vec<Complex64> = rng.complex_gaussian(m * cfg.doppler_bins, 1.0);
        for i in 0..cfg.doppler_bins {
            let start = mt + i * (m + mt);
            frame[start..start + m].copy_from_slice(&payload[i * m..(i + 1) * m]);
        }
        let rhs = fold_and_strip(&[frame], &cfg);
        for (i, block) in rhs.iter().enumerate() {
            assert_eq!(block.len(), m);
            for u in 0..m {
                assert!((block[u] - payload[i * m + u]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn fold_superposes_trailing_onto_head() {
        let cfg = small_cfg();
        let m = cfg.delay_bins;
        let mt = cfg.ts_len;
        // Impulse placed at the first sample of the TS slot after symbol 2.
        let mut frame = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        let symbol = 2usize; // 1-based
        let pos = mt + (symbol - 1) * (m + mt) + m;
        frame[pos] = Complex64::new(1.0, 0.0);
        let rhs = fold_and_strip(&[frame], &cfg);
        // It must fold to the head of symbol 2's block.
        assert!((rhs[symbol - 1][0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let total: f64 = rhs.iter().flatten().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_channel_fold_returns_scaled_symbols() {
        // L = 1 (no dispersion): the preprocessed per-symbol blocks are the
        // transmitted time-domain symbols scaled by the flat gain.
        let mut cfg = small_cfg();
        cfg.cir_len = 1;
        let mut rng = RngStream::new(12, 0);
        let ts_set = TrainingSequence::generate_all(18, &cfg);
        let transform = OtfsTransform::new(&cfg);
        let g = Complex64::new(0.6, -1.1);
        let ch = single_path(2, 0, 0.0, vec![g; cfg.antennas()]);
        let bits: Vec<u8> = (0..cfg.payload_bits())
            .map(|_| (rng.uniform() < 0.5) as u8)
            .collect();
        let dd = DdGrid::from_symbols(&qam_map(&bits, cfg.bits_per_symbol).unwrap(), &cfg);
        let payload = transform.modulate(&dd);
        let frame = assemble_frame(&payload, &ts_set[2], &cfg);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        let rx = op.transmit(&frame.samples, cfg.antennas());
        let cleaned = cancel_ts_isi(&rx, &[op], &ts_set, &cfg);
        let rhs = fold_and_strip(&cleaned, &cfg);
        for (i, block) in rhs.iter().enumerate() {
            for p in 0..cfg.antennas() {
                for u in 0..cfg.delay_bins {
                    let want = payload.get(u, i) * g;
                    let got = block[p * cfg.delay_bins + u];
                    assert!((got - want).norm() < 1e-10, "i={i} p={p} u={u}");
                }
            }
        }
    }

    #[test]
    fn per_symbol_operator_matches_physical_chain() {
        // End-to-end algebra check: with perfect CSI and no noise, the folded
        // rhs equals U^i applied to the true time-domain symbol.
        let cfg = small_cfg();
        let mut rng = RngStream::new(6, 0);
        let ts_set = TrainingSequence::generate_all(13, &cfg);
        let transform = OtfsTransform::new(&cfg);
        let chans: Vec<ChannelRealization> = vec![
            random_realization(0, 2, 1.3, &cfg, &mut rng),
            random_realization(2, 3, -0.8, &cfg, &mut rng),
        ];
        let mut rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()];
        let mut payload_mats = Vec::new();
        for ch in &chans {
            let bits: Vec<u8> = (0..cfg.payload_bits())
                .map(|_| (rng.uniform() < 0.5) as u8)
                .collect();
            let dd = DdGrid::from_symbols(&qam_map(&bits, cfg.bits_per_symbol).unwrap(), &cfg);
            let payload = transform.modulate(&dd);
            let frame = assemble_frame(&payload, &ts_set[ch.terminal], &cfg);
            let op = BandedChannelOperator::from_realization(ch, &cfg);
            for (p, out) in rx.iter_mut().enumerate() {
                op.apply(p, &frame.samples, out);
            }
            payload_mats.push(payload);
        }
        let operators: Vec<BandedChannelOperator> = chans
            .iter()
            .map(|c| BandedChannelOperator::from_realization(c, &cfg))
            .collect();
        let cleaned = cancel_ts_isi(&rx, &operators, &ts_set, &cfg);
        let rhs = fold_and_strip(&cleaned, &cfg);
        let m = cfg.delay_bins;
        for i in 1..=cfg.doppler_bins {
            let system = PerSymbolSystem::new(&operators, i, &cfg);
            let mut x = Vec::with_capacity(2 * m);
            for pm in &payload_mats {
                for r in 0..m {
                    x.push(pm.get(r, i - 1));
                }
            }
            let mut y = vec![Complex64::new(0.0, 0.0); system.out_dim()];
            system.apply(&x, &mut y);
            let num: f64 = y
                .iter()
                .zip(rhs[i - 1].iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den: f64 = rhs[i - 1].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(num / den < 1e-9, "symbol {i}: relative residual {}", num / den);
        }
    }

    #[test]
    fn per_symbol_operator_adjoint_is_consistent() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(7, 0);
        let chans = vec![
            random_realization(0, 2, 2.2, &cfg, &mut rng),
            random_realization(1, 1, -1.1, &cfg, &mut rng),
        ];
        let operators: Vec<BandedChannelOperator> = chans
            .iter()
            .map(|c| BandedChannelOperator::from_realization(c, &cfg))
            .collect();
        for i in 1..=cfg.doppler_bins {
            let system = PerSymbolSystem::new(&operators, i, &cfg);
            let err = adjoint_mismatch(&system, &mut rng, 10);
            assert!(err < 1e-10, "symbol {i}: adjoint mismatch {err}");
        }
    }

    #[test]
    fn detect_single_user_identity_channel() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(8, 0);
        let ts_set = TrainingSequence::generate_all(14, &cfg);
        let transform = OtfsTransform::new(&cfg);
        let ones = vec![Complex64::new(1.0, 0.0); cfg.antennas()];
        let ch = single_path(0, 0, 0.0, ones);
        let bits: Vec<u8> = (0..cfg.payload_bits())
            .map(|_| (rng.uniform() < 0.5) as u8)
            .collect();
        let dd = DdGrid::from_symbols(&qam_map(&bits, cfg.bits_per_symbol).unwrap(), &cfg);
        let payload = transform.modulate(&dd);
        let frame = assemble_frame(&payload, &ts_set[0], &cfg);
        let op = BandedChannelOperator::from_realization(&ch, &cfg);
        let rx = op.transmit(&frame.samples, cfg.antennas());
        let results = detect_frame(&rx, &[ch], &ts_set, &cfg).unwrap();
        assert_eq!(results.len(), 1);
        assert!(results[0].converged);
        assert_eq!(results[0].bits, bits);
        let err = results[0].payload.sub(&payload).frobenius_norm() / payload.frobenius_norm();
        assert!(err < 1e-8, "payload error {err}");
    }

    #[test]
    fn detect_two_users_with_genie_csi() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(9, 0);
        let ts_set = TrainingSequence::generate_all(15, &cfg);
        let transform = OtfsTransform::new(&cfg);
        let chans = vec![
            random_realization(0, 2, 1.9, &cfg, &mut rng),
            random_realization(3, 2, -0.7, &cfg, &mut rng),
        ];
        let mut rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()];
        let mut truth_bits = Vec::new();
        for ch in &chans {
            let bits: Vec<u8> = (0..cfg.payload_bits())
                .map(|_| (rng.uniform() < 0.5) as u8)
                .collect();
            let dd = DdGrid::from_symbols(&qam_map(&bits, cfg.bits_per_symbol).unwrap(), &cfg);
            let frame = assemble_frame(&transform.modulate(&dd), &ts_set[ch.terminal], &cfg);
            let op = BandedChannelOperator::from_realization(ch, &cfg);
            for (p, out) in rx.iter_mut().enumerate() {
                op.apply(p, &frame.samples, out);
            }
            truth_bits.push(bits);
        }
        let results = detect_frame(&rx, &chans, &ts_set, &cfg).unwrap();
        assert_eq!(results.len(), 2);
        for (res, bits) in results.iter().zip(truth_bits.iter()) {
            let errors = res
                .bits
                .iter()
                .zip(bits.iter())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(errors, 0, "terminal {}", res.terminal);
        }
    }

    #[test]
    fn empty_active_set_detects_nothing() {
        let cfg = small_cfg();
        let ts_set = TrainingSequence::generate_all(16, &cfg);
        let rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()];
        let results = detect_frame(&rx, &[], &ts_set, &cfg).unwrap();
        assert!(results.is_empty());
    }

    #[test]
    fn more_users_than_antennas_rejected() {
        let mut cfg = small_cfg();
        cfg.array_x = 1;
        cfg.array_y = 1;
        let ts_set = TrainingSequence::generate_all(17, &cfg);
        let mut rng = RngStream::new(10, 0);
        let chans = vec![
            random_realization(0, 1, 0.0, &cfg, &mut rng),
            random_realization(1, 1, 0.0, &cfg, &mut rng),
        ];
        let rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; 1];
        assert!(matches!(
            detect_frame(&rx, &chans, &ts_set, &cfg),
            Err(DetectorError::TooManyUsers { .. })
        ));
    }

    #[test]
    fn per_symbol_solves_commute_with_order() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(11, 0);
        let chans = vec![random_realization(0, 2, 1.0, &cfg, &mut rng)];
        let operators: Vec<BandedChannelOperator> = chans
            .iter()
            .map(|c| BandedChannelOperator::from_realization(c, &cfg))
            .collect();
        let rhs: Vec<Vec<Complex64>> = (0..cfg.doppler_bins)
            .map(|_| rng.complex_gaussian(cfg.antennas() * cfg.delay_bins, 1.0))
            .collect();
        let solve = |order: &[usize]| -> Vec<Vec<Complex64>> {
            let mut out = vec![Vec::new(); cfg.doppler_bins];
            for &i in order {
                let system = PerSymbolSystem::new(&operators, i + 1, &cfg);
                let (users, _, _, _) = detect_symbol(&system, &rhs[i], 1e-10, 100);
                out[i] = users.into_iter().next().unwrap();
            }
            out
        };
        let fwd = solve(&[0, 1, 2, 3]);
        let rev = solve(&[3, 2, 1, 0]);
        assert_eq!(fwd, rev);
    }
}
