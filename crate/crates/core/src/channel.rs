//! Terrestrial-satellite link model: orbit geometry with closed-form
//! Doppler/delay trajectories, UPA steering vectors, link budget, sparse
//! Rician tap generation with a single Doppler per link, and receiver noise.

use crate::modem::SystemConfig;
use crate::numerics::RngStream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LIGHT_SPEED_MPS: f64 = 299_792_458.0;
/// Boltzmann constant in dBW/K/Hz.
pub const BOLTZMANN_DBW: f64 = -228.6;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid geometry: {0}")]
    BadGeometry(String),
    #[error("cannot place {paths} distinct NLoS delays within {cir_len} taps")]
    TooManyPaths { paths: usize, cir_len: usize },
    #[error("normalized Doppler {value:.3} exceeds the unambiguous bound {bound:.3}")]
    DopplerOutOfRange { value: f64, bound: f64 },
}

/// Circular-orbit pass geometry: the satellite crosses the terminal's zenith
/// at t = 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitGeometry {
    pub earth_radius_m: f64,
    pub altitude_m: f64,
    /// Orbital angular velocity, rad/s.
    pub angular_velocity_rad_s: f64,
    /// Tangential satellite speed, m/s (should equal omega * (R_E + h)).
    pub satellite_speed_mps: f64,
    pub carrier_hz: f64,
    pub light_speed_mps: f64,
}

impl OrbitGeometry {
    /// 500 km LEO at 7.58 km/s with a 10 GHz carrier.
    pub fn leo_default() -> Self {
        let earth_radius_m = 6_371_000.0;
        let altitude_m = 500_000.0;
        let satellite_speed_mps = 7_580.0;
        Self {
            earth_radius_m,
            altitude_m,
            angular_velocity_rad_s: satellite_speed_mps / (earth_radius_m + altitude_m),
            satellite_speed_mps,
            carrier_hz: 10e9,
            light_speed_mps: LIGHT_SPEED_MPS,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.altitude_m <= 0.0 || self.angular_velocity_rad_s <= 0.0 {
            return Err(ChannelError::BadGeometry(
                "altitude and angular velocity must be positive".into(),
            ));
        }
        let derived = self.angular_velocity_rad_s * (self.earth_radius_m + self.altitude_m);
        let err = (derived - self.satellite_speed_mps).abs() / self.satellite_speed_mps;
        if err > 0.01 {
            return Err(ChannelError::BadGeometry(format!(
                "omega*(R_E+h) = {derived:.1} m/s disagrees with configured speed {:.1} m/s",
                self.satellite_speed_mps
            )));
        }
        Ok(())
    }

    fn orbit_radius(&self) -> f64 {
        self.earth_radius_m + self.altitude_m
    }

    /// Satellite position in the orbital (x-z) plane; terminal at
    /// `[0, 0, -R_E]`.
    pub fn satellite_position(&self, t: f64) -> [f64; 3] {
        let r = self.orbit_radius();
        let a = self.angular_velocity_rad_s * t;
        [r * a.sin(), 0.0, -r * a.cos()]
    }

    pub fn satellite_velocity(&self, t: f64) -> [f64; 3] {
        let r = self.orbit_radius();
        let w = self.angular_velocity_rad_s;
        let a = w * t;
        [r * w * a.cos(), 0.0, r * w * a.sin()]
    }

    /// Distance vector from the terminal to the satellite.
    pub fn distance_vector(&self, t: f64) -> [f64; 3] {
        let r = self.orbit_radius();
        let a = self.angular_velocity_rad_s * t;
        [r * a.sin(), 0.0, self.earth_radius_m - r * a.cos()]
    }

    pub fn slant_range_m(&self, t: f64) -> f64 {
        let d = self.distance_vector(t);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Elevation of the satellite above the terminal's horizon, radians.
    pub fn elevation_at(&self, t: f64) -> f64 {
        let d = self.distance_vector(t);
        let range = self.slant_range_m(t);
        // Terminal zenith direction is [0, 0, -1].
        (-d[2] / range).clamp(-1.0, 1.0).asin()
    }
}

/// Closed-form Doppler shift `f_d = (f_c/c) * omega * R_E * cos(elevation)`.
pub fn doppler_at(elevation_rad: f64, geom: &OrbitGeometry) -> f64 {
    geom.carrier_hz / geom.light_speed_mps
        * geom.angular_velocity_rad_s
        * geom.earth_radius_m
        * elevation_rad.cos()
}

/// Vector-form Doppler from the trajectory, signed (positive approaching).
pub fn doppler_vector_form(t: f64, geom: &OrbitGeometry) -> f64 {
    let d = geom.distance_vector(t);
    let v = geom.satellite_velocity(t);
    let range = geom.slant_range_m(t);
    let range_rate = (d[0] * v[0] + d[1] * v[1] + d[2] * v[2]) / range;
    -geom.carrier_hz / geom.light_speed_mps * range_rate
}

/// Delay relative to the closest approach, `(|d(t)| - |d_0|) / c`.
pub fn relative_delay_at(t: f64, geom: &OrbitGeometry) -> f64 {
    (geom.slant_range_m(t) - geom.altitude_m) / geom.light_speed_mps
}

/// Elevation angle corresponding to a satellite-side zenith (nadir) angle:
/// `cos(elev) = (1 + h/R_E) * sin(|zenith|)`.
pub fn elevation_from_zenith_deg(zenith_deg: f64, geom: &OrbitGeometry) -> f64 {
    let s = (1.0 + geom.altitude_m / geom.earth_radius_m) * zenith_deg.to_radians().abs().sin();
    s.clamp(0.0, 1.0).acos()
}

/// Slant range to a terminal seen under the given zenith (nadir) angle.
pub fn slant_range_from_zenith_deg(zenith_deg: f64, geom: &OrbitGeometry) -> f64 {
    let elev = elevation_from_zenith_deg(zenith_deg, geom);
    let re = geom.earth_radius_m;
    let ro = geom.orbit_radius();
    // Law of cosines with the Earth-center angle gamma = 90deg - elev - zenith.
    let gamma = std::f64::consts::FRAC_PI_2 - elev - zenith_deg.to_radians().abs();
    (re * re + ro * ro - 2.0 * re * ro * gamma.cos()).sqrt()
}

/// Largest Doppler magnitude over the service region bounded by the zenith
/// angle limit.
pub fn max_doppler_hz(geom: &OrbitGeometry, max_zenith_deg: f64) -> f64 {
    doppler_at(elevation_from_zenith_deg(max_zenith_deg, geom), geom)
}

/// Signed Doppler for a terminal: magnitude from its zenith angle, sign from
/// which side of the ground track it sits on (ahead = approaching).
pub fn doppler_from_zenith_deg(zenith_deg: f64, geom: &OrbitGeometry) -> f64 {
    let mag = doppler_at(elevation_from_zenith_deg(zenith_deg, geom), geom);
    if zenith_deg < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Doppler and delay change across one frame at the given epoch.
pub fn frame_jitter(geom: &OrbitGeometry, frame_duration_s: f64, epoch_s: f64) -> (f64, f64) {
    let df = doppler_vector_form(epoch_s + frame_duration_s, geom) - doppler_vector_form(epoch_s, geom);
    let dt = relative_delay_at(epoch_s + frame_duration_s, geom) - relative_delay_at(epoch_s, geom);
    (df.abs(), dt.abs())
}

/// Unit-norm UPA steering vector with half-wavelength spacing, Kronecker
/// ordering `index = p1 * P_y + p2`.
pub fn steering_vector(
    zenith_deg: f64,
    azimuth_deg: f64,
    array_x: usize,
    array_y: usize,
) -> Vec<Complex64> {
    assert!(array_x >= 1 && array_y >= 1);
    let zen = zenith_deg.to_radians();
    let azi = azimuth_deg.to_radians();
    let scale = 1.0 / ((array_x * array_y) as f64).sqrt();
    let kx = -std::f64::consts::PI * zen.sin() * azi.cos();
    let ky = -std::f64::consts::PI * zen.sin() * azi.sin();
    let mut v = Vec::with_capacity(array_x * array_y);
    for p1 in 0..array_x {
        for p2 in 0..array_y {
            let phase = kx * p1 as f64 + ky * p2 as f64;
            v.push(Complex64::from_polar(scale, phase));
        }
    }
    v
}

// --- Link budget ---

/// Inputs of the single-terminal SNR budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkBudgetCase {
    pub label: String,
    pub zenith_deg: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub g_over_t_db: f64,
    pub free_space_loss_db: f64,
    pub atmospheric_loss_db: f64,
    pub shadowing_margin_db: f64,
    pub scintillation_loss_db: f64,
    pub polarization_loss_db: f64,
    pub additional_losses_db: f64,
    pub additional_margin_db: f64,
}

/// `SNR = P[dBW] + G_t + G_r/T - k_B - losses - 10 log10(B_w)`.
pub fn link_budget_snr_db(case: &LinkBudgetCase) -> f64 {
    let p_dbw = case.tx_power_dbm - 30.0;
    p_dbw + case.tx_gain_db + case.g_over_t_db - BOLTZMANN_DBW
        - case.free_space_loss_db
        - case.atmospheric_loss_db
        - case.shadowing_margin_db
        - case.scintillation_loss_db
        - case.polarization_loss_db
        - case.additional_losses_db
        - case.additional_margin_db
        - 10.0 * case.bandwidth_hz.log10()
}

/// The three published uplink cases (zenith 0, 25 and 44.7 degrees).
pub fn link_budget_table_cases() -> Vec<LinkBudgetCase> {
    let base = |label: &str, zenith: f64, fspl: f64| LinkBudgetCase {
        label: label.to_string(),
        zenith_deg: zenith,
        bandwidth_hz: 122.88e6,
        tx_power_dbm: 40.0,
        tx_gain_db: 40.0,
        g_over_t_db: -4.62,
        free_space_loss_db: fspl,
        atmospheric_loss_db: 0.07,
        shadowing_margin_db: 3.0,
        scintillation_loss_db: 2.2,
        polarization_loss_db: 0.0,
        additional_losses_db: 0.0,
        additional_margin_db: 6.0,
    };
    vec![
        base("case 1", 0.0, 167.25),
        base("case 2", 25.0, 168.10),
        base("case 3", 44.7, 170.21),
    ]
}

/// Free-space path loss `20 log10(4 pi d f / c)`.
pub fn free_space_path_loss_db(distance_m: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * freq_hz / LIGHT_SPEED_MPS).log10()
}

/// Budget SNR at a terminal's zenith angle using the table's fixed gains and
/// losses but a geometric free-space loss.
pub fn link_budget_snr_at_zenith(zenith_deg: f64, geom: &OrbitGeometry, bandwidth_hz: f64, tx_power_dbm: f64) -> f64 {
    let d = slant_range_from_zenith_deg(zenith_deg, geom);
    let mut case = link_budget_table_cases().remove(0);
    case.zenith_deg = zenith_deg;
    case.bandwidth_hz = bandwidth_hz;
    case.tx_power_dbm = tx_power_dbm;
    case.free_space_loss_db = free_space_path_loss_db(d, geom.carrier_hz);
    link_budget_snr_db(&case)
}

// --- Terminal and channel realizations ---

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerminalConfig {
    pub id: usize,
    pub zenith_deg: f64,
    pub azimuth_deg: f64,
    pub velocity_mps: f64,
    pub tx_power_dbm: f64,
    pub rician_factor_db: f64,
    pub nlos_paths: usize,
    pub active: bool,
}

/// One resolvable path: integer delay tap plus per-antenna effective gains
/// (path gain x Rician weight x analog beamforming gain x steering entry x
/// sqrt of transmit power). The normalized Doppler is shared by all paths of
/// a link and lives on [`ChannelRealization`].
#[derive(Debug, Clone)]
pub struct PathTap {
    pub delay_tap: usize,
    pub antenna_gains: Vec<Complex64>,
}

/// Sparse link realization; `paths[0]` is the LoS tap.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub terminal: usize,
    /// Normalized Doppler `nu * N * T`, common to every path of the link.
    pub normalized_doppler: f64,
    pub paths: Vec<PathTap>,
}

impl ChannelRealization {
    pub fn delays(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.delay_tap).collect()
    }

    /// Mean received power per antenna per transmitted unit-energy sample.
    pub fn mean_antenna_power(&self) -> f64 {
        let antennas = self.paths.first().map_or(1, |p| p.antenna_gains.len());
        self.paths
            .iter()
            .flat_map(|p| p.antenna_gains.iter())
            .map(|g| g.norm_sqr())
            .sum::<f64>()
            / antennas as f64
    }
}

/// Discrete time-varying CIR sample
/// `h[kappa, ell] = sum_q g_q exp(j 2 pi v (kappa - ell_q) / (N (M + M_t))) delta[ell - ell_q]`.
pub fn sample_cir(
    ch: &ChannelRealization,
    kappa: usize,
    ell: usize,
    antenna: usize,
    cfg: &SystemConfig,
) -> Complex64 {
    let denom = cfg.doppler_denominator();
    let mut acc = Complex64::new(0.0, 0.0);
    for path in &ch.paths {
        if path.delay_tap == ell {
            let phase = 2.0 * std::f64::consts::PI * ch.normalized_doppler
                * (kappa as f64 - ell as f64)
                / denom;
            acc += path.antenna_gains[antenna] * Complex64::from_polar(1.0, phase);
        }
    }
    acc
}

/// Draw one TSL realization: LoS delay uniform over the room left by the NLoS
/// excess delays, one geometry-driven Doppler for the whole link, Rician
/// energy split between LoS and the NLoS aggregate.
pub fn generate_tsl(
    term: &TerminalConfig,
    cfg: &SystemConfig,
    geom: &OrbitGeometry,
    rng: &mut RngStream,
) -> Result<ChannelRealization, ChannelError> {
    let l = cfg.cir_len;
    let q = term.nlos_paths;
    if q >= l {
        return Err(ChannelError::TooManyPaths {
            paths: q,
            cir_len: l,
        });
    }
    let excess_max = cfg.nlos_excess_max.clamp(q, l.saturating_sub(1)).max(q);
    let mut excess: Vec<usize> = rng
        .choose_distinct(excess_max, q)
        .into_iter()
        .map(|e| e + 1)
        .collect();
    excess.sort_unstable();
    let max_excess = excess.last().copied().unwrap_or(0);
    let los_delay = rng.below(l - max_excess);

    // Single Doppler per link: satellite geometry plus a small
    // terminal-motion perturbation, expressed as normalized Doppler.
    let doppler_hz = doppler_from_zenith_deg(term.zenith_deg, geom);
    let terminal_max = geom.carrier_hz * term.velocity_mps / geom.light_speed_mps;
    let perturb = rng.uniform_range(-terminal_max, terminal_max);
    let nt = cfg.doppler_bins as f64 * cfg.symbol_duration_s();
    let normalized = (doppler_hz + perturb) * nt;
    let bound = cfg.doppler_bins as f64 / 2.0;
    if normalized.abs() >= bound {
        return Err(ChannelError::DopplerOutOfRange {
            value: normalized,
            bound,
        });
    }

    let gamma = 10f64.powf(term.rician_factor_db / 10.0);
    let amp = 10f64.powf((term.tx_power_dbm - 30.0) / 20.0);
    let steer = steering_vector(term.zenith_deg, term.azimuth_deg, cfg.array_x, cfg.array_y);

    let mut paths = Vec::with_capacity(q + 1);
    let los_weight = (gamma / (gamma + 1.0)).sqrt();
    let los_fade = if cfg.los_phase_only {
        Complex64::from_polar(1.0, rng.uniform_range(0.0, 2.0 * std::f64::consts::PI))
    } else {
        rng.complex_normal(1.0)
    };
    let los_gain = los_fade * los_weight * amp;
    paths.push(PathTap {
        delay_tap: los_delay,
        antenna_gains: steer.iter().map(|s| s * los_gain).collect(),
    });
    // NLoS aggregate carries 1/(gamma+1) of the energy, split evenly. The
    // beam-mismatch draw is normalized to unit RMS so it reshapes individual
    // paths without disturbing the Rician energy split.
    let nlos_weight = if q > 0 {
        (1.0 / ((gamma + 1.0) * q as f64)).sqrt()
    } else {
        0.0
    };
    let (abf_lo, abf_hi) = (0.3f64, 1.0f64);
    let abf_rms = ((abf_lo * abf_lo + abf_lo * abf_hi + abf_hi * abf_hi) / 3.0).sqrt();
    for e in excess {
        let path_gain = rng.complex_normal(1.0) * nlos_weight * amp;
        let abf_mag = rng.uniform_range(abf_lo, abf_hi) / abf_rms;
        let abf_phase = rng.uniform_range(0.0, 2.0 * std::f64::consts::PI);
        let abf = Complex64::from_polar(abf_mag, abf_phase);
        paths.push(PathTap {
            delay_tap: los_delay + e,
            antenna_gains: steer.iter().map(|s| s * path_gain * abf).collect(),
        });
    }
    Ok(ChannelRealization {
        terminal: term.id,
        normalized_doppler: normalized,
        paths,
    })
}

/// Add i.i.d. CN(0, sigma_sq) noise in place.
pub fn add_awgn(signal: &mut [Complex64], sigma_sq: f64, rng: &mut RngStream) {
    if sigma_sq == 0.0 {
        return;
    }
    for z in signal.iter_mut() {
        *z += rng.complex_normal(sigma_sq);
    }
}
