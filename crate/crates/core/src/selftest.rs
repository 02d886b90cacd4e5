//! Runtime self-test battery: the oracle checks behind the library's unit
//! tests, callable from the CLI so a deployed build can be validated without
//! the test harness.

use crate::access::{build_sensing, esprit_doppler, somp, MmvMeasurement};
use crate::channel::{
    self, doppler_at, doppler_vector_form, frame_jitter, link_budget_snr_db,
    link_budget_table_cases, steering_vector, OrbitGeometry,
};
use crate::harness::{self, RefineKind, TrialOptions};
use crate::modem::{
    qam_demap, qam_map, transmission_efficiency, DdGrid, NoiseModel, OtfsTransform,
    SystemConfig, TrainingSequence,
};
use crate::numerics::{lsqr_solve, unitary_dft, ComplexMatrix, DenseOperator, RngStream};
use num_complex::Complex64;

type CheckResult = Result<(), String>;

fn ensure(cond: bool, msg: String) -> CheckResult {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn check_dft_unitarity() -> CheckResult {
    for n in [1usize, 2, 8, 64] {
        let f = unitary_dft(n);
        let err = f
            .matmul(&f.hermitian())
            .sub(&ComplexMatrix::identity(n))
            .frobenius_norm();
        ensure(err < 1e-10, format!("DFT({n}) unitarity error {err:.2e}"))?;
    }
    Ok(())
}

fn check_pinv_penrose() -> CheckResult {
    let mut rng = RngStream::new(1, 100);
    let a = ComplexMatrix::new(12, 7, rng.complex_gaussian(84, 1.0)).unwrap();
    let p = a.pinv().matrix;
    let err = a.matmul(&p).matmul(&a).sub(&a).frobenius_norm() / a.frobenius_norm();
    ensure(err < 1e-9, format!("Penrose error {err:.2e}"))
}

fn check_evd_reconstruction() -> CheckResult {
    let mut rng = RngStream::new(2, 100);
    let g = ComplexMatrix::new(8, 8, rng.complex_gaussian(64, 1.0)).unwrap();
    let a = g.matmul(&g.hermitian());
    let (w, v) = a.herm_evd().map_err(|e| e.to_string())?;
    let mut rec = ComplexMatrix::zeros(8, 8);
    for j in 0..8 {
        for r in 0..8 {
            for c in 0..8 {
                let add = v.get(r, j) * v.get(c, j).conj() * w[j];
                let cur = rec.get(r, c);
                rec.set(r, c, cur + add);
            }
        }
    }
    let err = rec.sub(&a).frobenius_norm() / a.frobenius_norm();
    ensure(err < 1e-9, format!("EVD reconstruction error {err:.2e}"))
}

fn check_lsqr_matches_pinv() -> CheckResult {
    let mut rng = RngStream::new(3, 100);
    let a = ComplexMatrix::new(20, 12, rng.complex_gaussian(240, 1.0)).unwrap();
    let b = rng.complex_gaussian(20, 1.0);
    let direct = a.pinv().matrix.mul_vec(&b);
    let sol = lsqr_solve(&DenseOperator::new(&a), &b, 1e-8, 200);
    let num: f64 = sol
        .x
        .iter()
        .zip(direct.iter())
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = direct.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ensure(
        sol.converged && num / den < 1e-6,
        format!("LSQR vs direct relative error {:.2e}", num / den),
    )
}

fn check_steering_norm() -> CheckResult {
    let v = steering_vector(30.0, 45.0, 4, 4);
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    ensure(
        (norm - 1.0).abs() < 1e-12,
        format!("steering norm {norm:.12}"),
    )
}

fn check_doppler_geometry() -> CheckResult {
    let geom = OrbitGeometry::leo_default();
    let peak = channel::max_doppler_hz(&geom, 44.7);
    ensure(
        (peak - 178.2e3).abs() / 178.2e3 < 0.02,
        format!("max Doppler {peak:.0} Hz vs 178.2 kHz"),
    )?;
    for t in [10.0f64, 40.0, 70.0] {
        let closed = doppler_at(geom.elevation_at(t), &geom);
        let vector = doppler_vector_form(t, &geom).abs();
        ensure(
            (closed - vector).abs() / vector < 5e-3,
            format!("Doppler forms disagree at t={t}"),
        )?;
    }
    let (df, _) = frame_jitter(&geom, 25e-6, 0.0);
    let (_, dt) = frame_jitter(&geom, 25e-6, 150.0);
    ensure(
        (df - 0.09).abs() / 0.09 < 0.30 && (dt - 0.55e-9).abs() / 0.55e-9 < 0.30,
        format!("frame jitter {df:.3} Hz / {dt:.2e} s"),
    )
}

fn check_link_budget_table() -> CheckResult {
    let expected = [14.59, 13.73, 11.62];
    for (case, want) in link_budget_table_cases().iter().zip(expected) {
        let got = link_budget_snr_db(case);
        ensure(
            (got - want).abs() <= 0.1,
            format!("{}: {got:.3} dB vs {want}", case.label),
        )?;
    }
    Ok(())
}

fn check_efficiency_table() -> CheckResult {
    let mut cfg = SystemConfig::paper();
    for (mt, want) in [(52, 0.7454), (62, 0.6948), (72, 0.6492), (82, 0.6079)] {
        cfg.ts_len = mt;
        let got = (transmission_efficiency(&cfg) * 1e4).round() / 1e4;
        ensure(
            (got - want).abs() < 1e-12,
            format!("M_t={mt}: {got} vs {want}"),
        )?;
    }
    Ok(())
}

fn check_modem_round_trip() -> CheckResult {
    let mut cfg = SystemConfig::desk();
    cfg.delay_bins = 32;
    let tx = OtfsTransform::new(&cfg);
    let mut rng = RngStream::new(4, 100);
    let bits: Vec<u8> = (0..cfg.payload_bits())
        .map(|_| (rng.uniform() < 0.5) as u8)
        .collect();
    let dd = DdGrid::from_symbols(&qam_map(&bits, 2).map_err(|e| e.to_string())?, &cfg);
    let time = tx.modulate(&dd);
    let serial: Vec<Complex64> = (0..cfg.doppler_bins)
        .flat_map(|c| (0..cfg.delay_bins).map(move |r| (r, c)))
        .map(|(r, c)| time.get(r, c))
        .collect();
    let back = qam_demap(&tx.demodulate(&serial, &cfg).to_symbols(), 2).map_err(|e| e.to_string())?;
    ensure(back == bits, "modem round trip altered bits".to_string())
}

fn check_frame_layout() -> CheckResult {
    let mut cfg = SystemConfig::paper();
    cfg.ts_len = 52;
    ensure(
        cfg.frame_len() == 2516,
        format!("frame length {} vs 2516", cfg.frame_len()),
    )?;
    cfg.ts_len = 62;
    ensure(
        cfg.frame_len() == 2606,
        format!("frame length {} vs 2606", cfg.frame_len()),
    )
}

fn check_somp_small_recovery() -> CheckResult {
    let mut cfg = SystemConfig::desk();
    cfg.terminals = 10;
    cfg = cfg.with_non_isi_len(30);
    let ts = TrainingSequence::generate_all(5, &cfg);
    let sensing = build_sensing(&ts, cfg.cir_len, cfg.non_isi_len());
    let mut rng = RngStream::new(5, 100);
    let truth = [3usize, 4 * cfg.cir_len + 1, 7 * cfg.cir_len + 6];
    let cols = 12usize;
    let mut m = ComplexMatrix::zeros(cfg.non_isi_len(), cols);
    for &atom in &truth {
        let gains = rng.complex_gaussian(cols, 1.0);
        for r in 0..cfg.non_isi_len() {
            for c in 0..cols {
                let cur = m.get(r, c);
                m.set(r, c, cur + sensing.matrix.get(r, atom) * gains[c]);
            }
        }
    }
    let out = somp(&MmvMeasurement { matrix: m }, &sensing, 10, 0.0);
    let mut got = out.support;
    got.sort_unstable();
    ensure(
        got == truth.to_vec(),
        format!("SOMP support {got:?} vs {truth:?}"),
    )
}

fn check_esprit_noiseless() -> CheckResult {
    let n = 8usize;
    let mut rng = RngStream::new(6, 100);
    let g = rng.complex_gaussian(16, 1.0);
    let v = 1.37f64;
    let snaps = ComplexMatrix::from_fn(n + 1, 16, |i, p| {
        g[p] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * v * i as f64 / n as f64)
    });
    let est = esprit_doppler(&snaps).normalized;
    ensure(
        (est - v).abs() < 1e-6,
        format!("ESPRIT estimate {est} vs {v}"),
    )
}

fn check_noiseless_trial_is_exact() -> CheckResult {
    let geom = OrbitGeometry::leo_default();
    let mut cfg = SystemConfig::desk();
    cfg.noise = NoiseModel::Off;
    cfg.active_terminals = 2;
    cfg.nlos_paths = 0;
    cfg.los_phase_only = true;
    let record = harness::run_trial(
        &cfg,
        &geom,
        90,
        0,
        TrialOptions {
            with_oracle: false,
            refine: RefineKind::Full,
            genie_activity: true,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        record.payload_bit_errors == 0 && record.activity_errors == 0,
        format!(
            "noiseless trial: {} bit errors, {} activity errors",
            record.payload_bit_errors, record.activity_errors
        ),
    )
}

fn check_metric_closed_forms() -> CheckResult {
    // BER example: 7 errors for one user, K_a = 1, M = 64, N = 8, QPSK.
    let payload = 64 * 8 * 2;
    let record = harness::TrialRecord {
        seed: 0,
        trial: 0,
        true_activity: vec![],
        est_activity: vec![],
        truth_channels: vec![],
        estimated_channels: vec![],
        tx_bits: vec![],
        rx_bits: vec![],
        activity_errors: 1,
        falsely_identified: 0,
        payload_bit_errors: 7,
        true_active_count: 1,
        nmse_num: 0.0,
        nmse_den: 0.0,
        oracle_nmse_num: 0.0,
        oracle_nmse_den: 0.0,
        somp_iterations: 0,
        somp_converged: true,
        gain_regularized: false,
        mean_lsqr_iterations: 0.0,
        sigma_sq: 0.0,
    };
    let ber = harness::metric_ber(std::slice::from_ref(&record), payload);
    ensure(
        (ber - 7.0 / 1024.0).abs() < 1e-15,
        format!("BER {ber} vs {}", 7.0 / 1024.0),
    )?;
    let pe = harness::metric_pe(&[record], 100);
    ensure((pe - 0.01).abs() < 1e-15, format!("Pe {pe} vs 0.01"))
}

/// All checks with short names; used by the `selftest` CLI subcommand.
pub fn run_all() -> Vec<(&'static str, CheckResult)> {
    vec![
        ("dft_unitarity", check_dft_unitarity()),
        ("pinv_penrose", check_pinv_penrose()),
        ("evd_reconstruction", check_evd_reconstruction()),
        ("lsqr_matches_pinv", check_lsqr_matches_pinv()),
        ("steering_norm", check_steering_norm()),
        ("doppler_geometry", check_doppler_geometry()),
        ("link_budget_table", check_link_budget_table()),
        ("efficiency_table", check_efficiency_table()),
        ("modem_round_trip", check_modem_round_trip()),
        ("frame_layout", check_frame_layout()),
        ("somp_small_recovery", check_somp_small_recovery()),
        ("esprit_noiseless", check_esprit_noiseless()),
        ("noiseless_trial_exact", check_noiseless_trial_is_exact()),
        ("metric_closed_forms", check_metric_closed_forms()),
    ]
}
