//! Trend checks on sweep outputs: longer non-ISI regions buy estimation
//! accuracy, and the genie baseline never loses to the estimated chain.

use leotfs::harness::{config::SystemOverrides, run_sweep, ExperimentConfig, SweepAxis};
use leotfs::modem::NoiseModel;

#[test]
fn nmse_is_non_increasing_in_g() {
    let exp = ExperimentConfig {
        profile: "desk".into(),
        seed: 515,
        trials: 10,
        workers: 2,
        axis: SweepAxis::G,
        values: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        out: None,
        system: {
            let mut s = SystemOverrides::default();
            s.active_terminals = Some(3);
            s.nlos_paths = Some(1);
            s
        },
        noise: Some(NoiseModel::SnrDb { snr_db: 15.0 }),
    };
    let report = run_sweep(&exp, false).unwrap();
    // Paired seeds keep the trend clean; allow 1 dB of slack for the
    // confidence band.
    for pair in report.rows.windows(2) {
        assert!(
            pair[1].nmse_db <= pair[0].nmse_db + 1.0,
            "NMSE rose from {:.2} dB (G={}) to {:.2} dB (G={})",
            pair[0].nmse_db,
            pair[0].axis_value,
            pair[1].nmse_db,
            pair[1].axis_value
        );
        assert!(pair[1].oracle_nmse_db <= pair[0].oracle_nmse_db + 1.0);
    }
    for row in &report.rows {
        assert!(row.oracle_nmse_db <= row.nmse_db + 1e-9);
        assert!((0.0..=1.0).contains(&row.pe));
        assert!((0.0..=1.0).contains(&row.ber));
        assert!(row.nmse_db.is_finite());
    }
}
