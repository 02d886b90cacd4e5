//! Python bindings for the TS-OTFS grant-free access simulator: system
//! configuration, the deterministic trial pipeline, sweeps, and the
//! closed-form tables.

use leotfs::channel::{
    link_budget_snr_db, link_budget_table_cases, max_doppler_hz, steering_vector, OrbitGeometry,
};
use leotfs::harness::{
    self, metric_nmse_db, metric_oracle_nmse_db, run_sweep, ExperimentConfig, RefineKind,
    TrialOptions,
};
use leotfs::modem::{transmission_efficiency, NoiseModel, SystemConfig};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

/// Frame, array and receiver constants for one simulation profile.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PyConfig {
    /// Desk-scale profile (M=64, N=8, 4x4 array, 50 terminals).
    #[staticmethod]
    fn desk() -> Self {
        Self {
            inner: SystemConfig::desk(),
        }
    }

    /// Published full-scale profile (M=256, N=8, 32x32 array, 100 terminals).
    #[staticmethod]
    fn paper() -> Self {
        Self {
            inner: SystemConfig::paper(),
        }
    }

    #[getter]
    fn delay_bins(&self) -> usize {
        self.inner.delay_bins
    }

    #[getter]
    fn doppler_bins(&self) -> usize {
        self.inner.doppler_bins
    }

    #[getter]
    fn ts_len(&self) -> usize {
        self.inner.ts_len
    }

    #[getter]
    fn non_isi_len(&self) -> usize {
        self.inner.non_isi_len()
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame_len()
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.antennas()
    }

    #[getter]
    fn payload_bits(&self) -> usize {
        self.inner.payload_bits()
    }

    fn set_active_terminals(&mut self, ka: usize) {
        self.inner.active_terminals = ka;
    }

    fn set_nlos_paths(&mut self, q: usize) {
        self.inner.nlos_paths = q;
    }

    fn set_los_phase_only(&mut self, flag: bool) {
        self.inner.los_phase_only = flag;
    }

    /// Stretch the training sequence so the non-ISI region has length `g`.
    fn set_non_isi_len(&mut self, g: usize) {
        self.inner = self.inner.clone().with_non_isi_len(g);
    }

    fn set_noiseless(&mut self) {
        self.inner.noise = NoiseModel::Off;
    }

    fn set_snr_db(&mut self, snr_db: f64) {
        self.inner.noise = NoiseModel::SnrDb { snr_db };
    }

    fn validate(&self) -> PyResult<()> {
        self.inner
            .validate()
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(M={}, N={}, M_t={}, L={}, G={}, antennas={}, K={}, K_a={})",
            self.inner.delay_bins,
            self.inner.doppler_bins,
            self.inner.ts_len,
            self.inner.cir_len,
            self.inner.non_isi_len(),
            self.inner.antennas(),
            self.inner.terminals,
            self.inner.active_terminals,
        )
    }
}

/// Metrics of one simulated frame.
#[pyclass(name = "TrialResult")]
struct PyTrialResult {
    #[pyo3(get)]
    activity_errors: usize,
    #[pyo3(get)]
    true_active: Vec<usize>,
    #[pyo3(get)]
    identified: Vec<usize>,
    #[pyo3(get)]
    bit_errors: usize,
    #[pyo3(get)]
    payload_bits_total: usize,
    #[pyo3(get)]
    nmse_db: f64,
    #[pyo3(get)]
    oracle_nmse_db: f64,
    #[pyo3(get)]
    somp_iterations: usize,
    #[pyo3(get)]
    noise_variance: f64,
}

#[pymethods]
impl PyTrialResult {
    fn __repr__(&self) -> String {
        format!(
            "TrialResult(activity_errors={}, bit_errors={}, nmse_db={:.2})",
            self.activity_errors, self.bit_errors, self.nmse_db
        )
    }
}

fn flags_to_ids(flags: &[bool]) -> Vec<usize> {
    flags
        .iter()
        .enumerate()
        .filter_map(|(k, &a)| a.then_some(k))
        .collect()
}

/// Run one seeded end-to-end trial (modulate, superpose over the TSLs,
/// identify, refine, detect) and return its metrics.
#[pyfunction]
#[pyo3(signature = (config, seed, trial, genie_activity = false, genie_csi = false, coarse_only = false))]
fn run_trial(
    config: &PyConfig,
    seed: u64,
    trial: u64,
    genie_activity: bool,
    genie_csi: bool,
    coarse_only: bool,
) -> PyResult<PyTrialResult> {
    config
        .inner
        .validate()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let refine = if genie_csi {
        RefineKind::GenieCsi
    } else if coarse_only {
        RefineKind::CoarseOnly
    } else {
        RefineKind::Full
    };
    let geom = OrbitGeometry::leo_default();
    let record = harness::run_trial(
        &config.inner,
        &geom,
        seed,
        trial,
        TrialOptions {
            with_oracle: true,
            refine,
            genie_activity,
        },
    )
    .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyTrialResult {
        activity_errors: record.activity_errors,
        true_active: flags_to_ids(&record.true_activity),
        identified: flags_to_ids(&record.est_activity),
        bit_errors: record.payload_bit_errors,
        payload_bits_total: record.true_active_count * config.inner.payload_bits(),
        nmse_db: metric_nmse_db(std::slice::from_ref(&record)),
        oracle_nmse_db: metric_oracle_nmse_db(std::slice::from_ref(&record)),
        somp_iterations: record.somp_iterations,
        noise_variance: record.sigma_sq,
    })
}

/// Run a sweep described by TOML text (same schema as the CLI) and return the
/// CSV as a string.
#[pyfunction]
#[pyo3(signature = (toml_text, record_timing = false))]
fn run_sweep_toml(toml_text: &str, record_timing: bool) -> PyResult<String> {
    let exp = ExperimentConfig::from_toml(toml_text)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = run_sweep(&exp, record_timing).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(report.csv)
}

/// Proposed-scheme transmission efficiency for a configuration.
#[pyfunction(name = "transmission_efficiency")]
fn transmission_efficiency_py(config: &PyConfig) -> f64 {
    transmission_efficiency(&config.inner)
}

/// The published single-terminal link budget cases as
/// `(label, zenith_deg, snr_db)` tuples.
#[pyfunction]
fn link_budget_cases() -> Vec<(String, f64, f64)> {
    link_budget_table_cases()
        .into_iter()
        .map(|c| {
            let snr = link_budget_snr_db(&c);
            (c.label, c.zenith_deg, snr)
        })
        .collect()
}

/// Largest Doppler magnitude (Hz) over the coverage region bounded by the
/// given zenith angle.
#[pyfunction]
#[pyo3(signature = (max_zenith_deg = 44.7))]
fn max_doppler(max_zenith_deg: f64) -> f64 {
    max_doppler_hz(&OrbitGeometry::leo_default(), max_zenith_deg)
}

/// Unit-norm UPA steering vector (half-wavelength spacing).
#[pyfunction(name = "steering_vector")]
fn steering_vector_py(
    zenith_deg: f64,
    azimuth_deg: f64,
    array_x: usize,
    array_y: usize,
) -> Vec<Complex64> {
    steering_vector(zenith_deg, azimuth_deg, array_x, array_y)
}

#[pymodule]
fn leotfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrialResult>()?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep_toml, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_efficiency_py, m)?)?;
    m.add_function(wrap_pyfunction!(link_budget_cases, m)?)?;
    m.add_function(wrap_pyfunction!(max_doppler, m)?)?;
    m.add_function(wrap_pyfunction!(steering_vector_py, m)?)?;
    Ok(())
}
