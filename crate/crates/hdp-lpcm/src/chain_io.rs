//! Chain files: a header record, one record per kept sample and a closing
//! footer with acceptance statistics.
//!
//! Two encodings share that record sequence:
//!
//! * JSON lines: one JSON object per line, `{"header": ...}`,
//!   `{"sample": ...}` and `{"footer": ...}`.
//! * Binary: the 8-byte magic `HDPLPCMB`, then every record as a
//!   little-endian `u64` byte length followed by its bincode encoding.
//!
//! Readers detect the encoding from the first byte.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use hdp_lpcm_core::gibbs::{AcceptStats, Sample, StepSizes};
use hdp_lpcm_core::{Chain, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 8] = b"HDPLPCMB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainFormat {
    #[default]
    Jsonl,
    Binary,
}

impl ChainFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Jsonl => "jsonl",
            Self::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub format_version: u32,
    pub rng_algorithm: String,
    pub seed: u64,
    pub n_actors: usize,
    pub n_times: usize,
    pub n_groups: usize,
    pub dim: usize,
    pub config: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFooter {
    pub accept: AcceptStats,
    pub final_steps: StepSizes,
    pub sweeps_done: usize,
    pub interrupted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Record {
    Header(ChainHeader),
    Sample(Box<Sample>),
    Footer(ChainFooter),
}

fn records(chain: &Chain) -> impl Iterator<Item = Record> + '_ {
    let header = ChainHeader {
        format_version: FORMAT_VERSION,
        rng_algorithm: chain.rng_algorithm.clone(),
        seed: chain.seed,
        n_actors: chain.n_actors,
        n_times: chain.n_times,
        n_groups: chain.config.n_groups,
        dim: chain.config.dim,
        config: chain.config.clone(),
    };
    let footer = ChainFooter {
        accept: chain.accept,
        final_steps: chain.final_steps,
        sweeps_done: chain.sweeps_done,
        interrupted: chain.interrupted,
    };
    std::iter::once(Record::Header(header))
        .chain(chain.samples.iter().map(|s| Record::Sample(Box::new(s.clone()))))
        .chain(std::iter::once(Record::Footer(footer)))
}

pub fn write_chain(chain: &Chain, format: ChainFormat, mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Input(format!("writing chain: {e}"));
    match format {
        ChainFormat::Jsonl => {
            for record in records(chain) {
                serde_json::to_writer(&mut out, &record).map_err(|e| Error::Input(format!("encoding chain: {e}")))?;
                out.write_all(b"\n").map_err(io)?;
            }
        }
        ChainFormat::Binary => {
            out.write_all(BINARY_MAGIC).map_err(io)?;
            for record in records(chain) {
                let bytes = bincode::serialize(&record).map_err(|e| Error::Input(format!("encoding chain: {e}")))?;
                out.write_all(&(bytes.len() as u64).to_le_bytes()).map_err(io)?;
                out.write_all(&bytes).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

pub fn chain_bytes(chain: &Chain, format: ChainFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_chain(chain, format, &mut buf)?;
    Ok(buf)
}

/// Reads either encoding. A file without a footer was cut short; it loads
/// as an interrupted chain with empty acceptance statistics.
pub fn read_chain(source: impl Read) -> Result<(Chain, ChainFormat)> {
    let mut source = BufReader::new(source);
    let first = source.fill_buf().map_err(|e| Error::Input(format!("reading chain: {e}")))?.first().copied();
    let (list, format) = match first {
        None => return Err(Error::Input("chain file is empty".into())),
        Some(b'{') => (read_jsonl(source)?, ChainFormat::Jsonl),
        Some(_) => (read_binary(source)?, ChainFormat::Binary),
    };
    let mut list = list.into_iter();
    let Some(Record::Header(header)) = list.next() else {
        return Err(Error::Input("chain file does not start with a header record".into()));
    };
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Input(format!("unsupported chain format version {}", header.format_version)));
    }
    let mut samples = Vec::new();
    let mut footer = None;
    for record in list {
        match record {
            Record::Sample(s) if footer.is_none() => samples.push(*s),
            Record::Footer(f) if footer.is_none() => footer = Some(f),
            _ => return Err(Error::Input("unexpected record order in chain file".into())),
        }
    }
    let footer = footer.unwrap_or_else(|| ChainFooter {
        accept: AcceptStats::default(),
        final_steps: StepSizes::initial(&header.config),
        sweeps_done: samples.last().map_or(0, |s| s.sweep + 1),
        interrupted: true,
    });
    let chain = Chain {
        config: header.config,
        rng_algorithm: header.rng_algorithm,
        seed: header.seed,
        n_actors: header.n_actors,
        n_times: header.n_times,
        samples,
        accept: footer.accept,
        final_steps: footer.final_steps,
        sweeps_done: footer.sweeps_done,
        interrupted: footer.interrupted,
    };
    Ok((chain, format))
}

fn read_jsonl(source: impl BufRead) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (k, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn read_binary(mut source: impl Read) -> Result<Vec<Record>> {
    let bad = |what: &str| Error::Input(format!("binary chain: {what}"));
    let mut magic = [0u8; 8];
    source.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != BINARY_MAGIC {
        return Err(bad("unrecognized file; expected JSON lines or the HDPLPCMB magic"));
    }
    let mut out = Vec::new();
    loop {
        let mut len = [0u8; 8];
        match source.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(bad(&e.to_string())),
        }
        let len = u64::from_le_bytes(len);
        let mut bytes = Vec::new();
        source.by_ref().take(len).read_to_end(&mut bytes).map_err(|e| bad(&e.to_string()))?;
        if bytes.len() as u64 != len {
            return Err(bad(&format!("record {} is truncated", out.len())));
        }
        out.push(bincode::deserialize(&bytes).map_err(|e| bad(&format!("record {}: {e}", out.len())))?);
    }
    Ok(out)
}

pub fn load_chain(path: &Path) -> Result<Chain> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_chain(file)?.0)
}
