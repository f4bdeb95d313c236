//! Sample files: a short text header followed by little-endian `f64`
//! `(re, im)` pairs.
//!
//! ```text
//! TONEWALK-SAMPLES 1
//! n_per_block 64
//! n_blocks 16
//! sample_period 1.0
//! count 1009
//! end
//! <count * 16 bytes>
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use tonewalk_core::prelude::*;
use tonewalk_core::signal::PivotSequence;

use crate::error::{CliError, Result};

pub const MAGIC: &str = "TONEWALK-SAMPLES 1";

/// Block layout recorded in a sample file header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub n_per_block: usize,
    pub n_blocks: usize,
    pub sample_period: f64,
    pub count: usize,
}

impl Header {
    pub fn block_config(&self) -> Result<BlockConfig> {
        Ok(BlockConfig::new(self.n_per_block, self.n_blocks, self.sample_period)?)
    }
}

pub fn encode(record: &BlockRecord, config: &BlockConfig) -> Vec<u8> {
    let samples = record.samples();
    let mut out = format!(
        "{MAGIC}\nn_per_block {}\nn_blocks {}\nsample_period {:?}\ncount {}\nend\n",
        config.n_per_block(),
        config.n_blocks(),
        config.sample_period(),
        samples.len()
    )
    .into_bytes();
    out.reserve(16 * samples.len());
    for z in samples {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn write(path: &Path, record: &BlockRecord, config: &BlockConfig) -> Result<()> {
    std::fs::write(path, encode(record, config)).map_err(|e| CliError::io(path, e))
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn header_field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .and_then(|v| v.trim_end().parse().ok())
        .ok_or_else(|| data_err(format!("bad sample header line {line:?}, expected `{key} <value>`")))
}

pub fn decode(bytes: &[u8]) -> Result<(Header, Vec<Complex64>)> {
    let mut reader = BufReader::new(bytes);
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| data_err(format!("unreadable header: {e}")))?;
        if n == 0 {
            return Err(data_err("sample header has no `end` line"));
        }
        let line = line.trim_end_matches('\n').to_string();
        if line == "end" {
            break;
        }
        lines.push(line);
        if lines.len() > 16 {
            return Err(data_err("sample header too long"));
        }
    }
    if lines.first().map(String::as_str) != Some(MAGIC) || lines.len() != 5 {
        return Err(data_err(format!("not a sample file (expected `{MAGIC}` header)")));
    }
    let header = Header {
        n_per_block: header_field(&lines[1], "n_per_block")?,
        n_blocks: header_field(&lines[2], "n_blocks")?,
        sample_period: header_field(&lines[3], "sample_period")?,
        count: header_field(&lines[4], "count")?,
    };
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| data_err(e.to_string()))?;
    if payload.len() != 16 * header.count {
        return Err(data_err(format!(
            "header promises {} samples ({} bytes) but {} bytes follow",
            header.count,
            16 * header.count,
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((header, samples))
}

/// Read a sample file and partition it into blocks.
///
/// With `config` given, the header must agree with it.
pub fn read(path: &Path, config: Option<&BlockConfig>) -> Result<(BlockRecord, BlockConfig)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let (header, samples) = decode(&bytes)?;
    let from_file = header.block_config()?;
    let config = match config {
        Some(c) => {
            if (c.n_per_block(), c.n_blocks()) != (from_file.n_per_block(), from_file.n_blocks())
                || c.sample_period() != from_file.sample_period()
            {
                return Err(data_err(format!(
                    "file has N={} K={} T={:?} but the config says N={} K={} T={:?}",
                    header.n_per_block,
                    header.n_blocks,
                    header.sample_period,
                    c.n_per_block(),
                    c.n_blocks(),
                    c.sample_period()
                )));
            }
            *c
        }
        None => from_file,
    };
    let record = BlockRecord::from_samples(&config, samples).map_err(|e| data_err(e.to_string()))?;
    Ok((record, config))
}

#[derive(Deserialize)]
struct CsvRow {
    t: f64,
    re: f64,
    im: f64,
}

/// Import `t,re,im` rows. The time column must advance by the configured
/// sample period.
pub fn read_csv(path: &Path, config: &BlockConfig) -> Result<BlockRecord> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| data_err(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "re", "im"] {
        return Err(data_err(format!("{}: expected columns t,re,im, found {:?}", path.display(), headers)));
    }
    let mut samples = Vec::new();
    let mut t_prev: Option<f64> = None;
    let tol = 1e-6 * config.sample_period();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        if let Some(prev) = t_prev {
            if ((row.t - prev) - config.sample_period()).abs() > tol {
                return Err(data_err(format!(
                    "{}: row {} is {} after the previous sample, expected {}",
                    path.display(),
                    i + 2,
                    row.t - prev,
                    config.sample_period()
                )));
            }
        }
        t_prev = Some(row.t);
        samples.push(Complex64::new(row.re, row.im));
    }
    BlockRecord::from_samples(config, samples).map_err(|e| data_err(e.to_string()))
}

pub fn pivots_csv(pivots: &PivotSequence) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "pivot_bin", "pivot_freq", "jump"]).unwrap();
    for k in 0..pivots.len() {
        let jump = if k == 0 { String::new() } else { pivots.jumps[k - 1].to_string() };
        w.write_record([k.to_string(), pivots.pivot_bins[k].to_string(), format!("{:?}", pivots.pivot_freqs[k]), jump])
            .unwrap();
    }
    w.into_inner().expect("in-memory writer")
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tonewalk_core::signal::simulate_record;

    #[test]
    fn encode_decode_is_exact() {
        let config = BlockConfig::new(8, 3, 0.1).unwrap();
        let params = SignalParams::from_snr_db(3.0).unwrap();
        let mut rng = substream(1, Stream::User, 0);
        let s = Scenario::RandomWalk { jumps: JumpModel::UniformTernary };
        let (rec, _) = simulate_record(&config, &params, &s, &PivotOptions::default(), &mut rng, 100).unwrap();
        let (h, samples) = decode(&encode(&rec, &config)).unwrap();
        assert_eq!(h.sample_period, 0.1);
        assert_eq!((h.n_per_block, h.n_blocks, h.count), (8, 3, 22));
        assert!(samples.iter().zip(rec.samples()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let config = BlockConfig::new(4, 2, 1.0).unwrap();
        let rec = generate_noise_blocks(&config, 1.0, &mut substream(2, Stream::User, 0)).unwrap();
        let bytes = encode(&rec, &config);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"hello\nend\n").is_err());
    }
}
