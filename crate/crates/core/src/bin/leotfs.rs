use clap::{Args, Parser, Subcommand};
use leotfs::channel::{link_budget_snr_db, link_budget_table_cases, LinkBudgetCase, OrbitGeometry};
use leotfs::harness::{
    self, manifest_json, run_sweep, ExperimentConfig, TrialOptions,
};
use leotfs::modem::{transmission_efficiency, SystemConfig};
use leotfs::selftest;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "leotfs",
    about = "Grant-free TS-OTFS random access simulator for LEO satellite links",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core; overrides the config file).
    #[arg(long)]
    workers: Option<usize>,
    /// System profile when no config file is given.
    #[arg(long, default_value = "desk", value_parser = ["desk", "paper"])]
    profile: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print a verbose record.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Print per-iteration SOMP residuals and selected atoms.
        #[arg(long)]
        dump_somp: bool,
    },
    /// Run a parameter sweep from a config file and write CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Record wall-clock times in the CSV (off by default so repeated
        /// runs are byte-identical).
        #[arg(long)]
        timing: bool,
        /// Also write a JSON run manifest to this path.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the single-terminal link budget table cases.
    Linkbudget {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the transmission-efficiency table for the published TS lengths.
    Efficiency,
    /// Run the built-in oracle checks.
    Selftest,
}

fn load_config(common: &CommonArgs, need_file: bool) -> Result<ExperimentConfig, String> {
    let mut exp = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None if need_file => return Err("this subcommand needs --config".into()),
        None => ExperimentConfig {
            profile: common.profile.clone(),
            seed: 0,
            trials: 1,
            workers: 0,
            axis: harness::SweepAxis::G,
            values: vec![SystemConfig::desk().non_isi_len() as f64],
            out: None,
            system: Default::default(),
            noise: None,
        },
    };
    if let Some(seed) = common.seed {
        exp.seed = seed;
    }
    if let Some(workers) = common.workers {
        exp.workers = workers;
    }
    if let Some(out) = &common.out {
        exp.out = Some(out.display().to_string());
    }
    Ok(exp)
}

fn cmd_run(common: &CommonArgs, trial: u64, dump_somp: bool) -> Result<(), String> {
    let exp = load_config(common, false)?;
    let cfg = exp.base_config().map_err(|e| e.to_string())?;
    let geom = OrbitGeometry::leo_default();
    let record = harness::run_trial(&cfg, &geom, exp.seed, trial, TrialOptions::default())
        .map_err(|e| e.to_string())?;
    println!("seed {} trial {}", exp.seed, trial);
    println!(
        "true active:      {:?}",
        flags_to_ids(&record.true_activity)
    );
    println!(
        "identified:       {:?}",
        flags_to_ids(&record.est_activity)
    );
    println!("activity errors:  {}", record.activity_errors);
    println!(
        "somp iterations:  {} (converged: {})",
        record.somp_iterations, record.somp_converged
    );
    println!("noise variance:   {:.3e}", record.sigma_sq);
    println!(
        "nmse:             {:.2} dB",
        harness::metric_nmse_db(std::slice::from_ref(&record))
    );
    println!(
        "oracle nmse:      {:.2} dB",
        harness::metric_oracle_nmse_db(std::slice::from_ref(&record))
    );
    println!(
        "bit errors:       {} of {} ({} terminals detected)",
        record.payload_bit_errors,
        record.true_active_count * cfg.payload_bits(),
        record.rx_bits.len()
    );
    if dump_somp {
        dump_somp_trace(&cfg, &geom, exp.seed, trial);
    }
    Ok(())
}

fn dump_somp_trace(cfg: &SystemConfig, geom: &OrbitGeometry, seed: u64, trial: u64) {
    use leotfs::access::{build_sensing, somp, MmvMeasurement};
    use leotfs::channel::add_awgn;
    use leotfs::detector::BandedChannelOperator;
    use leotfs::modem::{assemble_frame, qam_map, DdGrid, OtfsTransform, TrainingSequence};
    use leotfs::numerics::RngStream;
    use num_complex::Complex64;

    // Rebuild the trial's measurement with the same stream layout as
    // harness::run_trial so the dump matches the run.
    let root = RngStream::new(seed, trial);
    let mut scenario_rng = root.fork(1);
    let scenario = match harness::generate_scenario(cfg, geom, &mut scenario_rng) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("somp dump unavailable: {e}");
            return;
        }
    };
    let ts_set = TrainingSequence::generate_all(seed, cfg);
    let transform = OtfsTransform::new(cfg);
    let mut rx = vec![vec![Complex64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()];
    for ch in scenario.channels.iter().flatten() {
        let k = ch.terminal;
        let mut bit_rng = root.fork(0xB175 + k as u64);
        let bits: Vec<u8> = (0..cfg.payload_bits())
            .map(|_| (bit_rng.uniform() < 0.5) as u8)
            .collect();
        let dd = DdGrid::from_symbols(&qam_map(&bits, cfg.bits_per_symbol).unwrap(), cfg);
        let frame = assemble_frame(&transform.modulate(&dd), &ts_set[k], cfg);
        let op = BandedChannelOperator::from_realization(ch, cfg);
        for (p, out) in rx.iter_mut().enumerate() {
            op.apply(p, &frame.samples, out);
        }
    }
    let sigma_sq = harness::noise_variance(&scenario, cfg, geom);
    let mut noise_rng = root.fork(2);
    for frame in rx.iter_mut() {
        add_awgn(frame, sigma_sq, &mut noise_rng);
    }
    let sensing = build_sensing(&ts_set, cfg.cir_len, cfg.non_isi_len());
    let meas = MmvMeasurement::collect(&rx, cfg);
    let out = somp(
        &meas,
        &sensing,
        cfg.somp_max_iters,
        cfg.somp_threshold_factor * sigma_sq,
    );
    println!("somp trace (iteration, atom, terminal, tap, residual):");
    for (t, (&atom, &res)) in out
        .support
        .iter()
        .zip(out.residual_history.iter())
        .enumerate()
    {
        println!(
            "  {:>3} {:>6} {:>4} {:>3} {:.6e}",
            t + 1,
            atom,
            atom / cfg.cir_len,
            atom % cfg.cir_len,
            res
        );
    }
}

fn flags_to_ids(flags: &[bool]) -> Vec<usize> {
    flags
        .iter()
        .enumerate()
        .filter_map(|(k, &a)| a.then_some(k))
        .collect()
}

fn cmd_sweep(common: &CommonArgs, timing: bool, manifest: Option<PathBuf>) -> Result<(), String> {
    let exp = load_config(common, true)?;
    let start = std::time::Instant::now();
    let report = run_sweep(&exp, timing).map_err(|e| e.to_string())?;
    let total_ms = start.elapsed().as_millis() as u64;
    match exp.out.as_deref() {
        Some(path) => {
            std::fs::write(path, &report.csv).map_err(|e| format!("{path}: {e}"))?;
            eprintln!("wrote {path}");
        }
        None => print!("{}", report.csv),
    }
    if let Some(path) = manifest {
        let json = manifest_json(&exp, &report, total_ms);
        std::fs::write(&path, json).map_err(|e| format!("{}: {e}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_linkbudget(common: &CommonArgs) -> Result<(), String> {
    let cases: Vec<LinkBudgetCase> = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            #[derive(serde::Deserialize)]
            struct CaseFile {
                case: Vec<LinkBudgetCase>,
            }
            let file: CaseFile =
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            file.case
        }
        None => link_budget_table_cases(),
    };
    println!("{:<10} {:>12} {:>10}", "case", "zenith[deg]", "SNR[dB]");
    for case in &cases {
        println!(
            "{:<10} {:>12.1} {:>10.2}",
            case.label,
            case.zenith_deg,
            link_budget_snr_db(case)
        );
    }
    Ok(())
}

fn cmd_efficiency() {
    let mut cfg = SystemConfig::paper();
    println!(
        "{:>4} {:>6} {:>12} {:>12}",
        "M_t", "G", "frame[smpl]", "efficiency"
    );
    for mt in [52usize, 62, 72, 82] {
        cfg.ts_len = mt;
        println!(
            "{:>4} {:>6} {:>12} {:>11.2}%",
            mt,
            cfg.non_isi_len(),
            cfg.frame_len(),
            100.0 * transmission_efficiency(&cfg)
        );
    }
}

fn cmd_selftest() -> ExitCode {
    let results = selftest::run_all();
    let mut failures = 0usize;
    for (name, result) in &results {
        match result {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} checks, {} failed", results.len(), failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            common,
            trial,
            dump_somp,
        } => cmd_run(common, *trial, *dump_somp),
        Command::Sweep {
            common,
            timing,
            manifest,
        } => cmd_sweep(common, *timing, manifest.clone()),
        Command::Linkbudget { common } => cmd_linkbudget(common),
        Command::Efficiency => {
            cmd_efficiency();
            Ok(())
        }
        Command::Selftest => return cmd_selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
