//! Two-stage receiver for joint active-terminal identification and channel
//! estimation.
//!
//! Stage 1 runs simultaneous OMP over the stacked non-ISI training regions of
//! all antennas and TS copies (an MMV problem with a common support), then
//! thresholds per-terminal energy to decide activity. Stage 2 reads delays
//! off the support, estimates one Doppler per terminal with ESPRIT on the TS
//! time series, and recovers per-antenna effective gains by inverting the
//! exact TS observation model.

use crate::channel::{ChannelRealization, PathTap};
use crate::modem::{SystemConfig, TrainingSequence};
use crate::numerics::ComplexMatrix;
use num_complex::Complex64;

/// Stacked Toeplitz sensing matrix `[Psi_1 .. Psi_K]`, size G x K*L; column
/// `(k-1)L + l` is the length-G window of terminal k's TS starting at offset
/// `L - 1 - l`.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub matrix: ComplexMatrix,
    pub terminals: usize,
    pub cir_len: usize,
}

impl SensingMatrix {
    pub fn non_isi_len(&self) -> usize {
        self.matrix.rows()
    }

    /// Terminal and delay tap encoded by a column index.
    pub fn split_index(&self, column: usize) -> (usize, usize) {
        (column / self.cir_len, column % self.cir_len)
    }
}

pub fn build_sensing(ts_set: &[TrainingSequence], cir_len: usize, non_isi_len: usize) -> SensingMatrix {
    let k = ts_set.len();
    let matrix = ComplexMatrix::from_fn(non_isi_len, k * cir_len, |g, col| {
        let terminal = col / cir_len;
        let tap = col % cir_len;
        ts_set[terminal].samples[cir_len - 1 - tap + g]
    });
    SensingMatrix {
        matrix,
        terminals: k,
        cir_len,
    }
}

/// Samples `[(i-1)(M_t+M) + L - 1, (i-1)(M_t+M) + M_t - 1]` of a received
/// frame: the ISI-free tail of the i-th TS (i is 1-based).
pub fn extract_non_isi(frame: &[Complex64], ts_index: usize, cfg: &SystemConfig) -> Vec<Complex64> {
    assert!(ts_index >= 1 && ts_index <= cfg.doppler_bins + 1);
    let start = (ts_index - 1) * (cfg.ts_len + cfg.delay_bins) + cfg.cir_len - 1;
    frame[start..start + cfg.non_isi_len()].to_vec()
}

/// MMV measurement: G x P^s(N+1), column `(i-1)P^s + p`.
#[derive(Debug, Clone)]
pub struct MmvMeasurement {
    pub matrix: ComplexMatrix,
}

impl MmvMeasurement {
    /// Stack non-ISI regions of every antenna's frame, antenna-major within
    /// each TS index.
    pub fn collect(rx: &[Vec<Complex64>], cfg: &SystemConfig) -> Self {
        let g = cfg.non_isi_len();
        let p = rx.len();
        let n1 = cfg.doppler_bins + 1;
        let mut matrix = ComplexMatrix::zeros(g, p * n1);
        for i in 1..=n1 {
            for (pi, frame) in rx.iter().enumerate() {
                let region = extract_non_isi(frame, i, cfg);
                for (row, v) in region.into_iter().enumerate() {
                    matrix.set(row, (i - 1) * p + pi, v);
                }
            }
        }
        Self { matrix }
    }
}

/// Stage-1 output: support, LS coefficients on the support, and the SOMP
/// iteration trace.
#[derive(Debug, Clone)]
pub struct CoarseEstimate {
    /// Selected column indices into [0, K*L), in selection order.
    pub support: Vec<usize>,
    /// |support| x P^s(N+1) coefficient rows aligned with `support`.
    pub coefficients: ComplexMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Residual Frobenius norm after each iteration.
    pub residual_history: Vec<f64>,
}

impl CoarseEstimate {
    fn empty(cols: usize) -> Self {
        Self {
            support: Vec::new(),
            coefficients: ComplexMatrix::zeros(1, cols.max(1)),
            converged: true,
            iterations: 0,
            residual_history: Vec::new(),
        }
    }

    /// Per-terminal support sets `Omega_k`, ascending delay order.
    pub fn per_terminal_support(&self, sensing: &SensingMatrix) -> Vec<Vec<usize>> {
        let mut omega = vec![Vec::new(); sensing.terminals];
        let mut sorted = self.support.clone();
        sorted.sort_unstable();
        for col in sorted {
            let (k, _) = sensing.split_index(col);
            omega[k].push(col);
        }
        omega
    }

    /// Coefficient row for a support column, if selected.
    pub fn row_for(&self, column: usize) -> Option<&[Complex64]> {
        self.support
            .iter()
            .position(|&c| c == column)
            .map(|r| self.coefficients.row(r))
    }

    /// Mean coefficient energy per terminal,
    /// `(1/(P^s(N+1))) sum_p sum_l |H[l, p]|^2`.
    pub fn terminal_energies(&self, sensing: &SensingMatrix) -> Vec<f64> {
        let mut energies = vec![0.0f64; sensing.terminals];
        let cols = self.coefficients.cols() as f64;
        for (row, &col) in self.support.iter().enumerate() {
            let (k, _) = sensing.split_index(col);
            energies[k] += self
                .coefficients
                .row(row)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>();
        }
        for e in energies.iter_mut() {
            *e /= cols;
        }
        energies
    }
}

/// Simultaneous OMP over the MMV measurement.
///
/// Atom selection maximizes the summed correlation magnitude across all
/// measurement columns; already-selected atoms are excluded and argmax ties
/// break toward the lowest index. Iteration stops once the squared residual
/// falls below `P^s G (N+1) pi_th` (with a relative floor so noiseless runs
/// terminate after exact recovery) or after `t_max` selections, whichever
/// comes first.
pub fn somp(
    meas: &MmvMeasurement,
    sensing: &SensingMatrix,
    t_max: usize,
    pi_th: f64,
) -> CoarseEstimate {
    let r_ts = &meas.matrix;
    let g = r_ts.rows();
    let cols = r_ts.cols();
    let atoms = sensing.matrix.cols();
    let total_energy = r_ts.frobenius_norm().powi(2);
    // Absolute stop level from pi_th plus a relative floor: with pi_th = 0
    // (noiseless) the residual never reaches an exact zero, only a rounding
    // floor, so compare against a tiny fraction of the input energy.
    let threshold = (cols as f64 * g as f64 * pi_th).max(1e-20 * total_energy);
    if total_energy <= threshold {
        return CoarseEstimate::empty(cols);
    }

    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; atoms];
    let mut residual = r_ts.clone();
    let mut coefficients = ComplexMatrix::zeros(1, cols);
    let mut history = Vec::new();
    let mut converged = false;
    let cap = t_max.min(atoms);
    let sensing_h = sensing.matrix.hermitian();

    for _t in 0..cap {
        // Correlations |psi_j^H residual| summed over measurement columns.
        let corr = sensing_h.matmul(&residual);
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..atoms {
            if selected[j] {
                continue;
            }
            let score: f64 = corr.row(j).iter().map(|z| z.norm()).sum();
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        if best == usize::MAX {
            break;
        }
        selected[best] = true;
        support.push(best);

        let psi_sel = sensing.matrix.select_columns(&support);
        coefficients = psi_sel.pinv().matrix.matmul(r_ts);
        residual = r_ts.sub(&psi_sel.matmul(&coefficients));
        let res_energy = residual.frobenius_norm().powi(2);
        history.push(res_energy.sqrt());
        if res_energy < threshold {
            converged = true;
            break;
        }
    }

    CoarseEstimate {
        iterations: support.len(),
        support,
        coefficients,
        converged,
        residual_history: history,
    }
}

/// Channel-gain activity decision: terminal k is active when its mean
/// coefficient energy reaches `beta * max_k energy`.
#[derive(Debug, Clone)]
pub struct ActivityEstimate {
    pub flags: Vec<bool>,
    pub active_set: Vec<usize>,
    pub threshold: f64,
}

pub fn identify_active(coarse: &CoarseEstimate, sensing: &SensingMatrix, beta: f64) -> ActivityEstimate {
    let energies = coarse.terminal_energies(sensing);
    let peak = energies.iter().cloned().fold(0.0f64, f64::max);
    let threshold = beta * peak;
    let flags: Vec<bool> = energies
        .iter()
        .map(|&e| peak > 0.0 && e >= threshold && e > 0.0)
        .collect();
    let active_set = flags
        .iter()
        .enumerate()
        .filter_map(|(k, &a)| a.then_some(k))
        .collect();
    ActivityEstimate {
        flags,
        active_set,
        threshold,
    }
}

/// Delay taps per terminal read off the support: `l = omega - (k-1) L`.
pub fn estimate_delays(support: &[usize], sensing: &SensingMatrix) -> Vec<Vec<usize>> {
    let mut delays = vec![Vec::new(); sensing.terminals];
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    for col in sorted {
        let (k, l) = sensing.split_index(col);
        delays[k].push(l);
    }
    delays
}

#[derive(Debug, Clone, Copy)]
pub struct DopplerEstimate {
    pub normalized: f64,
    pub confident: bool,
}

/// One-dimensional ESPRIT on the per-TS time series of the strongest tap.
///
/// `snapshots` is (N+1) x P: row i holds the stage-1 coefficient of TS i for
/// every antenna. Subarrays are the first and last N rows; the dominant
/// eigenvector of the noise-cancelled autocorrelation gives the phase step
/// `2 pi v / N` between adjacent TSs, so `v = N arg(e1^dagger e2) / (2 pi)`
/// lands in (-N/2, N/2].
pub fn esprit_doppler(snapshots: &ComplexMatrix) -> DopplerEstimate {
    let n1 = snapshots.rows();
    assert!(n1 >= 3, "need at least N+1 >= 3 TS samples");
    let n = n1 - 1;
    let p = snapshots.cols();
    let energy = snapshots.frobenius_norm();
    if energy < 1e-300 {
        return DopplerEstimate {
            normalized: 0.0,
            confident: false,
        };
    }

    // Autocorrelation of the stacked subarray vector x = [x1; x2].
    let dim = 2 * n;
    let mut r = ComplexMatrix::zeros(dim, dim);
    for pi in 0..p {
        let mut x = Vec::with_capacity(dim);
        for i in 0..n {
            x.push(snapshots.get(i, pi));
        }
        for i in 1..=n {
            x.push(snapshots.get(i, pi));
        }
        for a in 0..dim {
            for b in 0..dim {
                let cur = r.get(a, b);
                r.set(a, b, cur + x[a] * x[b].conj());
            }
        }
    }
    let scale = Complex64::new(1.0 / p as f64, 0.0);
    let r = r.scale(scale);

    let (eigenvalues, eigenvectors) = r.herm_evd().expect("autocorrelation is Hermitian");
    // Noise floor removal shifts the spectrum but shares eigenvectors with R,
    // so the dominant eigenvector of R-hat is the top eigenvector here.
    let noise_var = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let shifted: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| (l - noise_var).max(0.0))
        .collect();
    let lead = shifted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(dim - 1);
    let confident = shifted[lead] > 0.0;

    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0f64;
    for i in 0..n {
        let e1 = eigenvectors.get(i, lead);
        let e2 = eigenvectors.get(n + i, lead);
        num += e1.conj() * e2;
        den += e1.norm_sqr();
    }
    if den < 1e-300 || num.norm() < 1e-300 {
        return DopplerEstimate {
            normalized: 0.0,
            confident: false,
        };
    }
    let normalized = n as f64 / (2.0 * std::f64::consts::PI) * num.arg();
    DopplerEstimate {
        normalized,
        confident,
    }
}

/// Snapshot matrix for ESPRIT: the (N+1) x P^s reshape of the coefficient row
/// with maximum energy among terminal k's support rows.
pub fn strongest_tap_snapshots(
    coarse: &CoarseEstimate,
    omega_k: &[usize],
    antennas: usize,
) -> Option<ComplexMatrix> {
    let best = omega_k.iter().max_by(|&&a, &&b| {
        let ea: f64 = coarse.row_for(a).map_or(0.0, |r| r.iter().map(|z| z.norm_sqr()).sum());
        let eb: f64 = coarse.row_for(b).map_or(0.0, |r| r.iter().map(|z| z.norm_sqr()).sum());
        ea.partial_cmp(&eb).unwrap()
    })?;
    let row = coarse.row_for(*best)?;
    let n1 = row.len() / antennas;
    Some(ComplexMatrix::from_fn(n1, antennas, |i, p| {
        row[i * antennas + p]
    }))
}

/// Stage-2 output: parametric path list per identified terminal.
#[derive(Debug, Clone)]
pub struct RefinedTerminal {
    pub terminal: usize,
    pub delays: Vec<usize>,
    pub normalized_doppler: f64,
    pub doppler_confident: bool,
    /// paths x antennas effective gains.
    pub gains: ComplexMatrix,
}

#[derive(Debug, Clone, Default)]
pub struct RefinedChannel {
    pub terminals: Vec<RefinedTerminal>,
    /// Set when the gain system needed diagonal regularization.
    pub regularized: bool,
}

impl RefinedChannel {
    /// Parametric form shared with the channel simulator, so reconstruction
    /// and detection reuse the exact CIR formula.
    pub fn to_realizations(&self, antennas: usize) -> Vec<ChannelRealization> {
        self.terminals
            .iter()
            .map(|t| ChannelRealization {
                terminal: t.terminal,
                normalized_doppler: t.normalized_doppler,
                paths: t
                    .delays
                    .iter()
                    .enumerate()
                    .map(|(q, &d)| PathTap {
                        delay_tap: d,
                        antenna_gains: (0..antennas).map(|p| t.gains.get(q, p)).collect(),
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Which stage-2 refinements to run.
#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    /// Estimate Doppler (ESPRIT); `false` leaves all Doppler at zero, which
    /// is the Doppler-ignored coarse baseline.
    pub estimate_doppler: bool,
    /// Polish each terminal's Doppler by a 1-D least-squares fit of the exact
    /// TS model after ESPRIT initialization.
    pub polish: bool,
}

impl RefineOptions {
    pub fn full(cfg: &SystemConfig) -> Self {
        Self {
            estimate_doppler: true,
            polish: cfg.doppler_polish,
        }
    }

    pub fn coarse_only() -> Self {
        Self {
            estimate_doppler: false,
            polish: false,
        }
    }
}

struct TsModel<'a> {
    sensing: &'a SensingMatrix,
    cfg: &'a SystemConfig,
    /// Support columns in ascending order.
    support: Vec<usize>,
}

impl<'a> TsModel<'a> {
    fn new(sensing: &'a SensingMatrix, cfg: &'a SystemConfig, support: &[usize]) -> Self {
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        Self {
            sensing,
            cfg,
            support: sorted,
        }
    }

    fn q(&self) -> usize {
        self.support.len()
    }

    /// Gamma matrix: column q is the support atom modulated by its
    /// terminal's intra-window Doppler ramp.
    fn gamma(&self, doppler_of: &dyn Fn(usize) -> f64) -> ComplexMatrix {
        let g = self.sensing.non_isi_len();
        let denom = self.cfg.doppler_denominator();
        ComplexMatrix::from_fn(g, self.q(), |row, q| {
            let col = self.support[q];
            let (k, _) = self.sensing.split_index(col);
            let phase = 2.0 * std::f64::consts::PI * doppler_of(k) * row as f64 / denom;
            self.sensing.matrix.get(row, col) * Complex64::from_polar(1.0, phase)
        })
    }

    /// Per-TS phase factor
    /// `eta^(i-1)_q = exp(j 2 pi v_k [(i-1)/N + (L-1-l_q)/(N(M+M_t))])`,
    /// the CIR phase of path q at the start of TS i's non-ISI region.
    fn eta(&self, ts_index: usize, doppler_of: &dyn Fn(usize) -> f64) -> Vec<Complex64> {
        let denom = self.cfg.doppler_denominator();
        let n = self.cfg.doppler_bins as f64;
        self.support
            .iter()
            .map(|&col| {
                let (k, l) = self.sensing.split_index(col);
                let v = doppler_of(k);
                let phase = 2.0
                    * std::f64::consts::PI
                    * v
                    * ((ts_index as f64 - 1.0) / n
                        + (self.cfg.cir_len as f64 - 1.0 - l as f64) / denom);
                Complex64::from_polar(1.0, phase)
            })
            .collect()
    }
}

/// Effective-gain recovery:
/// `g_p = (1/(N+1)) sum_i (Psi_I^+ Gamma)^{-1} (h^i_p ./ eta^(i-1))`.
///
/// Returns the gain matrix (support rows x antennas) plus a flag when the
/// Q x Q system needed diagonal loading (condition number above 1e8).
fn recover_gains(
    coarse: &CoarseEstimate,
    model: &TsModel,
    doppler_of: &dyn Fn(usize) -> f64,
) -> (ComplexMatrix, bool) {
    let q = model.q();
    let antennas = model.cfg.antennas();
    let n1 = model.cfg.doppler_bins + 1;
    let psi_sel = model.sensing.matrix.select_columns(&model.support);
    let gamma = model.gamma(doppler_of);
    let b = psi_sel.pinv().matrix.matmul(&gamma);
    let b_pinv = b.pinv();
    let (b_inv, regularized) = if b_pinv.condition > 1e8 || b_pinv.rank_deficient {
        let trace_mag: f64 = (0..q).map(|i| b.get(i, i).norm()).sum();
        let lambda = 1e-8 * trace_mag / q as f64;
        let mut loaded = b.clone();
        for i in 0..q {
            let d = loaded.get(i, i);
            loaded.set(i, i, d + Complex64::new(lambda, 0.0));
        }
        (loaded.pinv().matrix, true)
    } else {
        (b_pinv.matrix, false)
    };

    // Rows of the coarse coefficient matrix ordered like model.support.
    let row_of: Vec<usize> = model
        .support
        .iter()
        .map(|&col| coarse.support.iter().position(|&c| c == col).unwrap())
        .collect();

    let mut gains = ComplexMatrix::zeros(q, antennas);
    for i in 1..=n1 {
        let eta = model.eta(i, doppler_of);
        for p in 0..antennas {
            let col = (i - 1) * antennas + p;
            let h_i: Vec<Complex64> = row_of
                .iter()
                .map(|&r| coarse.coefficients.get(r, col))
                .collect();
            let mixed = b_inv.mul_vec(&h_i);
            for (qi, v) in mixed.into_iter().enumerate() {
                let cur = gains.get(qi, p);
                gains.set(qi, p, cur + v / eta[qi]);
            }
        }
    }
    let gains = gains.scale(Complex64::new(1.0 / n1 as f64, 0.0));
    (gains, regularized)
}

/// Squared residual of the exact TS model at the given per-terminal Doppler
/// assignment, minimized over gains (variable projection).
fn model_residual(
    meas: &MmvMeasurement,
    model: &TsModel,
    doppler_of: &dyn Fn(usize) -> f64,
) -> f64 {
    let g = model.sensing.non_isi_len();
    let n1 = model.cfg.doppler_bins + 1;
    let antennas = model.cfg.antennas();
    let q = model.q();
    let gamma = model.gamma(doppler_of);
    // Stacked (N+1)G x Q system: rows block i is Gamma * diag(eta^(i-1)).
    let mut a = ComplexMatrix::zeros(n1 * g, q);
    for i in 1..=n1 {
        let eta = model.eta(i, doppler_of);
        for row in 0..g {
            for qi in 0..q {
                a.set((i - 1) * g + row, qi, gamma.get(row, qi) * eta[qi]);
            }
        }
    }
    let a_pinv = a.pinv().matrix;
    let mut residual = 0.0f64;
    let mut b = vec![Complex64::new(0.0, 0.0); n1 * g];
    for p in 0..antennas {
        for i in 0..n1 {
            for row in 0..g {
                b[i * g + row] = meas.matrix.get(row, i * antennas + p);
            }
        }
        let coeffs = a_pinv.mul_vec(&b);
        let fitted = a.mul_vec(&coeffs);
        residual += b
            .iter()
            .zip(fitted.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>();
    }
    residual
}

/// Golden-section minimization of the model residual over one terminal's
/// Doppler, bracketed around the ESPRIT initialization.
fn polish_doppler(
    meas: &MmvMeasurement,
    model: &TsModel,
    dopplers: &mut [f64],
    terminal: usize,
    half_width: f64,
) {
    let objective = |v: f64, dopplers: &[f64]| {
        let eval = |k: usize| if k == terminal { v } else { dopplers[k] };
        model_residual(meas, model, &eval)
    };
    let center = dopplers[terminal];
    let mut lo = center - half_width;
    let mut hi = center + half_width;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = objective(x1, dopplers);
    let mut f2 = objective(x2, dopplers);
    for _ in 0..60 {
        if (hi - lo).abs() < 1e-13 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1, dopplers);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2, dopplers);
        }
    }
    let polished = 0.5 * (lo + hi);
    if objective(polished, dopplers) <= objective(center, dopplers) {
        dopplers[terminal] = polished;
    }
}

/// Stage 2: delays from the support, per-terminal ESPRIT Doppler (optionally
/// polished), and per-antenna gains from the exact TS model.
pub fn refine(
    coarse: &CoarseEstimate,
    activity: &ActivityEstimate,
    meas: &MmvMeasurement,
    sensing: &SensingMatrix,
    cfg: &SystemConfig,
    options: RefineOptions,
) -> RefinedChannel {
    let omega = coarse.per_terminal_support(sensing);
    // Restrict the model to atoms belonging to identified terminals.
    let support: Vec<usize> = activity
        .active_set
        .iter()
        .flat_map(|&k| omega[k].iter().copied())
        .collect();
    if support.is_empty() {
        return RefinedChannel::default();
    }
    let model = TsModel::new(sensing, cfg, &support);
    let antennas = cfg.antennas();

    // Refit the coefficients on the restricted support. The gain relationship
    // assumes h^i = Psi_I^+ r^i with I exactly the modeled support; reusing a
    // fit that included other terminals' atoms breaks that identity.
    let restricted = {
        let psi_sel = sensing.matrix.select_columns(&model.support);
        let coefficients = psi_sel.pinv().matrix.matmul(&meas.matrix);
        CoarseEstimate {
            support: model.support.clone(),
            coefficients,
            converged: coarse.converged,
            iterations: coarse.iterations,
            residual_history: Vec::new(),
        }
    };
    let coarse = &restricted;

    let mut dopplers = vec![0.0f64; sensing.terminals];
    let mut confident = vec![false; sensing.terminals];
    if options.estimate_doppler && cfg.doppler_bins >= 2 {
        for &k in &activity.active_set {
            if let Some(snap) = strongest_tap_snapshots(coarse, &omega[k], antennas) {
                let est = esprit_doppler(&snap);
                dopplers[k] = est.normalized;
                confident[k] = est.confident;
            }
        }
        if options.polish {
            // Cyclic coordinate descent; each terminal's correction sharpens
            // the residual landscape the others see, so iterate to a fixed
            // point (noiseless runs settle in two passes).
            for _pass in 0..4 {
                let before = dopplers.clone();
                for &k in &activity.active_set {
                    polish_doppler(meas, &model, &mut dopplers, k, 0.15);
                }
                let delta = activity
                    .active_set
                    .iter()
                    .map(|&k| (dopplers[k] - before[k]).abs())
                    .fold(0.0f64, f64::max);
                if delta < 1e-9 {
                    break;
                }
            }
        }
    }

    let doppler_of = |k: usize| dopplers[k];
    let (gains, regularized) = recover_gains(coarse, &model, &doppler_of);

    // Terminals with no recovered atoms (possible when activity is supplied
    // externally) carry nothing refinable and are omitted.
    let terminals = activity
        .active_set
        .iter()
        .filter(|&&k| !omega[k].is_empty())
        .map(|&k| {
            let delays: Vec<usize> = omega[k]
                .iter()
                .map(|&col| sensing.split_index(col).1)
                .collect();
            let rows: Vec<usize> = omega[k]
                .iter()
                .map(|&col| model.support.iter().position(|&c| c == col).unwrap())
                .collect();
            let gain_rows = ComplexMatrix::from_fn(rows.len(), antennas, |q, p| {
                gains.get(rows[q], p)
            });
            RefinedTerminal {
                terminal: k,
                delays,
                normalized_doppler: dopplers[k],
                doppler_confident: confident[k],
                gains: gain_rows,
            }
        })
        .collect();

    RefinedChannel {
        terminals,
        regularized,
    }
}

/// Genie LS on the true support columns: the oracle baseline with known
/// activity and delays.
pub fn oracle_ls(
    meas: &MmvMeasurement,
    true_support: &[usize],
    sensing: &SensingMatrix,
) -> CoarseEstimate {
    if true_support.is_empty() {
        return CoarseEstimate::empty(meas.matrix.cols());
    }
    let mut support = true_support.to_vec();
    support.sort_unstable();
    let psi_sel = sensing.matrix.select_columns(&support);
    let coefficients = psi_sel.pinv().matrix.matmul(&meas.matrix);
    let residual = meas.matrix.sub(&psi_sel.matmul(&coefficients));
    CoarseEstimate {
        iterations: support.len(),
        support,
        coefficients,
        converged: true,
        residual_history: vec![residual.frobenius_norm()],
    }
}
