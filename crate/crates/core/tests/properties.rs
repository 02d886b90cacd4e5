//! Property tests for the numeric invariants the rest of the chain leans on.

use leotfs::channel::steering_vector;
use leotfs::modem::{qam_demap, qam_map, DdGrid, OtfsTransform, SystemConfig};
use leotfs::numerics::{
    adjoint_mismatch, lsqr_solve, unitary_dft, ComplexMatrix, DenseOperator, RngStream,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn random_matrix(seed: u64, rows: usize, cols: usize) -> ComplexMatrix {
    let mut rng = RngStream::new(seed, 0xA11);
    ComplexMatrix::new(rows, cols, rng.complex_gaussian(rows * cols, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dft_unitarity(n in 1usize..48) {
        let f = unitary_dft(n);
        let err = f.matmul(&f.hermitian()).sub(&ComplexMatrix::identity(n)).frobenius_norm();
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn penrose_conditions_hold(seed in 0u64..5000, m in 1usize..64, n in 1usize..64) {
        let a = random_matrix(seed, m, n);
        let p = a.pinv().matrix;
        let scale = a.frobenius_norm().max(1e-12);
        let e1 = a.matmul(&p).matmul(&a).sub(&a).frobenius_norm() / scale;
        let e2 = p.matmul(&a).matmul(&p).sub(&p).frobenius_norm() / p.frobenius_norm().max(1e-12);
        prop_assert!(e1 < 1e-9, "A A+ A error {e1}");
        prop_assert!(e2 < 1e-9, "A+ A A+ error {e2}");
    }

    #[test]
    fn lsqr_matches_pinv_on_well_conditioned_systems(seed in 0u64..5000) {
        // Random tall systems are well conditioned with overwhelming odds at
        // this aspect ratio; skip the rare tail via the condition estimate.
        let a = random_matrix(seed, 30, 10);
        let pinv = a.pinv();
        prop_assume!(pinv.condition < 1e3);
        let mut rng = RngStream::new(seed, 0xB22);
        let b = rng.complex_gaussian(30, 1.0);
        let direct = pinv.matrix.mul_vec(&b);
        let sol = lsqr_solve(&DenseOperator::new(&a), &b, 1e-8, 300);
        let num: f64 = sol.x.iter().zip(direct.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = direct.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-12);
        prop_assert!(sol.converged);
        prop_assert!(num / den < 1e-6, "relative error {}", num / den);
    }

    #[test]
    fn dense_operator_adjoint_identity(seed in 0u64..5000, m in 1usize..20, n in 1usize..20) {
        let a = random_matrix(seed, m, n);
        let mut rng = RngStream::new(seed, 0xC33);
        let err = adjoint_mismatch(&DenseOperator::new(&a), &mut rng, 10);
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn qam_round_trip_is_identity(seed in 0u64..5000, bps in prop::sample::select(vec![2usize, 4, 6])) {
        let mut rng = RngStream::new(seed, 0xD44);
        let bits: Vec<u8> = (0..bps * 64).map(|_| (rng.uniform() < 0.5) as u8).collect();
        let symbols = qam_map(&bits, bps).unwrap();
        prop_assert_eq!(qam_demap(&symbols, bps).unwrap(), bits);
    }

    #[test]
    fn modem_round_trip_and_energy(seed in 0u64..5000, m_exp in 2usize..6, n_exp in 0usize..4) {
        let mut cfg = SystemConfig::desk();
        cfg.delay_bins = 1 << m_exp;
        cfg.doppler_bins = 1 << n_exp;
        let tx = OtfsTransform::new(&cfg);
        let mut rng = RngStream::new(seed, 0xE55);
        let data = rng.complex_gaussian(cfg.delay_bins * cfg.doppler_bins, 1.0);
        let dd = DdGrid::from_symbols(&data, &cfg);
        let time = tx.modulate(&dd);
        prop_assert!((time.frobenius_norm() - dd.0.frobenius_norm()).abs() < 1e-10);
        let mut serial = Vec::with_capacity(data.len());
        for c in 0..cfg.doppler_bins {
            for r in 0..cfg.delay_bins {
                serial.push(time.get(r, c));
            }
        }
        let back = tx.demodulate(&serial, &cfg);
        prop_assert!(back.0.sub(&dd.0).frobenius_norm() < 1e-10);
    }

    #[test]
    fn steering_vectors_have_unit_norm(
        zen in -89.0f64..89.0,
        azi in 0.0f64..360.0,
        px in 1usize..8,
        py in 1usize..8,
    ) {
        let v = steering_vector(zen, azi, px, py);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constellation_energy_is_unit(bps in prop::sample::select(vec![2usize, 4, 6])) {
        let points = 1usize << bps;
        let mut total = 0.0;
        for idx in 0..points {
            let bits: Vec<u8> = (0..bps).rev().map(|b| ((idx >> b) & 1) as u8).collect();
            total += qam_map(&bits, bps).unwrap()[0].norm_sqr();
        }
        prop_assert!((total / points as f64 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lsqr_zero_rhs_shortcut() {
    let a = ComplexMatrix::identity(5);
    let sol = lsqr_solve(
        &DenseOperator::new(&a),
        &[Complex64::new(0.0, 0.0); 5],
        1e-8,
        10,
    );
    assert!(sol.converged && sol.iterations == 0);
}
