//! Golden-vector fixtures for cross-implementation regression.
//!
//! Plain-text format, one fixture per block:
//!
//! ```text
//! frame <M> <N> <M_t> <L> <bits_per_symbol> <ts_seed> <terminal>
//! bits <0/1 string, M*N*bits_per_symbol chars>
//! <re> <im>          (frame_len sample lines, printed with {:.17e})
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use super::{assemble_frame, qam_map, DdGrid, OtfsTransform, SystemConfig, TrainingSequence};
use num_complex::Complex64;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenFrame {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub ts_len: usize,
    pub cir_len: usize,
    pub bits_per_symbol: usize,
    pub ts_seed: u64,
    pub terminal: usize,
    pub bits: Vec<u8>,
    pub samples: Vec<Complex64>,
}

impl GoldenFrame {
    fn config(&self) -> SystemConfig {
        let mut cfg = SystemConfig::desk();
        cfg.delay_bins = self.delay_bins;
        cfg.doppler_bins = self.doppler_bins;
        cfg.ts_len = self.ts_len;
        cfg.cir_len = self.cir_len;
        cfg.bits_per_symbol = self.bits_per_symbol;
        cfg
    }

    /// Re-run the modulator on the stored bits.
    pub fn regenerate_samples(&self) -> Vec<Complex64> {
        let cfg = self.config();
        let tx = OtfsTransform::new(&cfg);
        let symbols = qam_map(&self.bits, cfg.bits_per_symbol).expect("fixture bits");
        let dd = DdGrid::from_symbols(&symbols, &cfg);
        let payload = tx.modulate(&dd);
        let ts = TrainingSequence::generate(self.ts_seed, self.terminal, cfg.ts_len);
        assemble_frame(&payload, &ts, &cfg).samples
    }
}

/// Build a fixture from scratch (bits drawn from the fixture's own stream).
pub fn make_fixture(cfg: &SystemConfig, ts_seed: u64, terminal: usize) -> GoldenFrame {
    let mut rng = crate::numerics::RngStream::new(ts_seed, 0xF1D0).fork(terminal as u64);
    let bits: Vec<u8> = (0..cfg.payload_bits())
        .map(|_| (rng.uniform() < 0.5) as u8)
        .collect();
    let mut fixture = GoldenFrame {
        delay_bins: cfg.delay_bins,
        doppler_bins: cfg.doppler_bins,
        ts_len: cfg.ts_len,
        cir_len: cfg.cir_len,
        bits_per_symbol: cfg.bits_per_symbol,
        ts_seed,
        terminal,
        bits,
        samples: Vec::new(),
    };
    fixture.samples = fixture.regenerate_samples();
    fixture
}

pub fn write_fixtures(fixtures: &[GoldenFrame]) -> String {
    let mut out = String::new();
    out.push_str("# leotfs golden frame fixtures v1\n");
    for f in fixtures {
        writeln!(
            out,
            "frame {} {} {} {} {} {} {}",
            f.delay_bins, f.doppler_bins, f.ts_len, f.cir_len, f.bits_per_symbol, f.ts_seed, f.terminal
        )
        .unwrap();
        let bits: String = f.bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
        writeln!(out, "bits {bits}").unwrap();
        for s in &f.samples {
            writeln!(out, "{:.17e} {:.17e}", s.re, s.im).unwrap();
        }
        out.push_str("end\n");
    }
    out
}

pub fn read_fixtures(text: &str) -> Result<Vec<GoldenFrame>, String> {
    let mut fixtures = Vec::new();
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    while let Some(header) = lines.next() {
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 8 || fields[0] != "frame" {
            return Err(format!("bad fixture header: {header}"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| format!("{header}: {e}"));
        let delay_bins = parse(fields[1])?;
        let doppler_bins = parse(fields[2])?;
        let ts_len = parse(fields[3])?;
        let cir_len = parse(fields[4])?;
        let bits_per_symbol = parse(fields[5])?;
        let ts_seed = fields[6].parse::<u64>().map_err(|e| e.to_string())?;
        let terminal = parse(fields[7])?;
        let bits_line = lines.next().ok_or("missing bits line")?;
        let bits_str = bits_line
            .strip_prefix("bits ")
            .ok_or_else(|| format!("bad bits line: {bits_line}"))?;
        let bits: Vec<u8> = bits_str
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(format!("bad bit char {c}")),
            })
            .collect::<Result<_, _>>()?;
        let frame_len = ts_len * (doppler_bins + 1) + delay_bins * doppler_bins;
        let mut samples = Vec::with_capacity(frame_len);
        for _ in 0..frame_len {
            let line = lines.next().ok_or("truncated sample block")?;
            let mut parts = line.split_whitespace();
            let re: f64 = parts
                .next()
                .ok_or("missing re")?
                .parse()
                .map_err(|e| format!("{line}: {e}"))?;
            let im: f64 = parts
                .next()
                .ok_or("missing im")?
                .parse()
                .map_err(|e| format!("{line}: {e}"))?;
            samples.push(Complex64::new(re, im));
        }
        match lines.next() {
            Some("end") => {}
            other => return Err(format!("expected 'end', got {other:?}")),
        }
        fixtures.push(GoldenFrame {
            delay_bins,
            doppler_bins,
            ts_len,
            cir_len,
            bits_per_symbol,
            ts_seed,
            terminal,
            bits,
            samples,
        });
    }
    Ok(fixtures)
}
