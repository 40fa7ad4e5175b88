//! The `fit` command: preprocessing, parallel chains, checkpoints and the
//! run report.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use hdp_lpcm_core::gibbs::{BlockTallies, Checkpoint, Tally};
use hdp_lpcm_core::network::{filter_min_degree, window_aggregate};
use hdp_lpcm_core::{Chain, ChainRunner, DynamicNetwork, SamplerConfig};
use serde::Serialize;
use serde_json::json;

use crate::bundle::{check_destination, input_entry, Bundle, FileEntry, Manifest, MANIFEST};
use crate::chain_io::{chain_bytes, read_chain, ChainFormat};
use crate::config::{worker_count, RunConfig};
use crate::edgelist::{edge_list_string, load_edge_list};
use crate::error::{Error, Result};
use crate::simulate::{bundle_network_size, EDGES};
use crate::tables::Table;

pub const NETWORK: &str = "network.csv";
pub const ACTORS: &str = "actors.csv";
pub const REPORT: &str = "report.json";

pub fn chain_file_name(chain: usize, format: ChainFormat) -> String {
    format!("chain-{}.{}", chain + 1, format.extension())
}

fn checkpoint_name(chain: usize) -> String {
    format!("checkpoint-{}.bin", chain + 1)
}

fn report_name(chain: usize) -> String {
    format!("report-{}.json", chain + 1)
}

/// The network a fit runs on, after windowing and degree filtering.
#[derive(Debug, Clone)]
pub struct PreparedNetwork {
    pub network: DynamicNetwork,
    /// Zero-based index in the loaded network of every retained actor.
    pub retained: Vec<usize>,
    /// Names from the input, for the retained actors.
    pub names: Option<Vec<String>>,
    pub inputs: Vec<FileEntry>,
}

/// Edge list path and declared sizes for `input`, which may be an edge
/// list or a bundle directory holding `edges.csv`.
pub fn resolve_edges(config: &RunConfig, input: Option<&Path>) -> Result<(PathBuf, Option<usize>, Option<usize>)> {
    let path = input
        .or(config.data.edges.as_deref())
        .ok_or_else(|| Error::Usage("fit needs an edge list or simulation bundle".into()))?;
    if path.is_dir() {
        if !path.join(MANIFEST).is_file() {
            return Err(Error::Input(format!("{} is a directory without a manifest", path.display())));
        }
        let (n, t) = bundle_network_size(path)?;
        Ok((path.join(EDGES), config.data.n_actors.or(n), config.data.n_times.or(t)))
    } else {
        Ok((path.to_path_buf(), config.data.n_actors, config.data.n_times))
    }
}

pub fn prepare_network(config: &RunConfig, input: Option<&Path>) -> Result<PreparedNetwork> {
    let (path, n, t) = resolve_edges(config, input)?;
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let loaded = load_edge_list(std::io::BufReader::new(file), n, t).map_err(|e| match e {
        Error::Parse { line, message } => Error::Input(format!("{}: line {line}: {message}", path.display())),
        other => other,
    })?;
    let windowed = if config.data.window > 1 { window_aggregate(&loaded, config.data.window)? } else { loaded };
    let (network, retained) = if config.data.min_degree > 0 {
        filter_min_degree(&windowed, config.data.min_degree)?
    } else {
        let n = windowed.n_actors();
        (windowed, (0..n).collect())
    };
    Ok(PreparedNetwork { names: network.actor_names.clone(), network, retained, inputs: vec![input_entry(&path)?] })
}

/// Sampler configuration of chain `k`.
pub fn chain_config(config: &RunConfig, k: usize) -> SamplerConfig {
    SamplerConfig { seed: config.base_seed().wrapping_add(k as u64), ..config.sampler.clone() }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    /// Continue from the checkpoints of an interrupted run.
    pub resume: bool,
    /// Stop every chain after this many sweeps in this invocation, leaving
    /// a checkpoint behind.
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitOutcome {
    Finished(PathBuf),
    /// Sweeps remain; rerun with `resume` to continue from the staging
    /// directory.
    Paused(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
struct RateReport {
    positions: Option<f64>,
    intercept: Option<f64>,
    relocations: Option<f64>,
    lambda_shifts: Option<f64>,
    center_shifts: Option<f64>,
}

impl From<BlockTallies> for RateReport {
    fn from(t: BlockTallies) -> Self {
        let rate = |t: Tally| t.rate();
        Self {
            positions: rate(t.positions),
            intercept: rate(t.intercept),
            relocations: rate(t.relocations),
            lambda_shifts: rate(t.lambda_shifts),
            center_shifts: rate(t.mu_shifts),
        }
    }
}

fn chain_report(chain: &Chain, final_state: Option<&hdp_lpcm_core::ModelState>) -> serde_json::Value {
    let state = final_state.map(|s| {
        json!({
            "beta0": s.groups.beta0,
            "lambda": s.groups.lambda,
            "sigma2": s.groups.sigma2,
            "hyper": s.hyper,
            "occupied_groups": (0..s.n_times()).map(|t| s.labels.n_occupied(t)).collect::<Vec<_>>(),
        })
    });
    json!({
        "seed": chain.seed,
        "sweeps_done": chain.sweeps_done,
        "samples": chain.samples.len(),
        "interrupted": chain.interrupted,
        "acceptance": {
            "tune": RateReport::from(chain.accept.tune),
            "burn": RateReport::from(chain.accept.burn),
            "keep": RateReport::from(chain.accept.keep),
        },
        "final_step_sizes": chain.final_steps,
        "final_state": state,
    })
}

enum ChainResult {
    Done { chain: Chain, bytes: Vec<u8>, report: serde_json::Value },
    Paused,
}

fn run_one(
    k: usize,
    config: &RunConfig,
    net: &DynamicNetwork,
    bundle: &Bundle,
    options: FitOptions,
) -> Result<ChainResult> {
    let format = config.output.chain_format;
    let sampler = chain_config(config, k);
    let name = chain_file_name(k, format);
    if options.resume {
        if let Some(bytes) = bundle.read_scratch(&name)? {
            let (chain, _) = read_chain(bytes.as_slice())?;
            if chain.config != sampler {
                return Err(Error::Usage(format!("{name} in the staging directory was made with a different configuration")));
            }
            let report = bundle
                .read_scratch(&report_name(k))?
                .and_then(|b| serde_json::from_slice(&b).ok())
                .unwrap_or_else(|| chain_report(&chain, None));
            return Ok(ChainResult::Done { chain, bytes, report });
        }
    }
    let checkpoint = if options.resume { bundle.read_scratch(&checkpoint_name(k))? } else { None };
    let mut runner = match checkpoint {
        Some(bytes) => {
            let cp: Checkpoint = bincode::deserialize(&bytes)
                .map_err(|e| Error::Input(format!("{}: {e}", checkpoint_name(k))))?;
            if cp.config != sampler {
                return Err(Error::Usage(format!("{} was made with a different configuration", checkpoint_name(k))));
            }
            ChainRunner::resume(net, cp)?
        }
        None => ChainRunner::new(net, sampler)?,
    };
    let every = config.sampler.checkpoint_every;
    let limit = options.max_sweeps.map(|m| runner.sweeps_done() + m);
    let started = Instant::now();
    loop {
        let done = runner.sweeps_done();
        let mut stop = usize::MAX;
        if every > 0 {
            stop = (done / every + 1) * every;
        }
        if let Some(limit) = limit {
            stop = stop.min(limit);
        }
        let finished = runner.run_while(net, |r| r.sweeps_done() < stop)?;
        if finished {
            break;
        }
        let cp = bincode::serialize(&runner.checkpoint()).map_err(|e| Error::Input(format!("encoding checkpoint: {e}")))?;
        bundle.write_scratch(&checkpoint_name(k), &cp)?;
        if limit.is_some_and(|l| runner.sweeps_done() >= l) {
            if !config.quiet {
                eprintln!("fit: chain {} paused after {} sweeps", k + 1, runner.sweeps_done());
            }
            return Ok(ChainResult::Paused);
        }
    }
    if !config.quiet {
        eprintln!("fit: chain {} finished {} sweeps in {:.1?}", k + 1, runner.sweeps_done(), started.elapsed());
    }
    let report_state = runner.state().clone();
    let chain = runner.finish();
    let bytes = chain_bytes(&chain, format)?;
    let report = chain_report(&chain, Some(&report_state));
    bundle.write_scratch(&report_name(k), report.to_string().as_bytes())?;
    bundle.write_scratch(&name, &bytes)?;
    bundle.remove_scratch(&checkpoint_name(k))?;
    Ok(ChainResult::Done { chain, bytes, report })
}

/// Runs `jobs` closures on up to `workers` threads, returning results in
/// job order.
pub fn parallel_map<T: Send>(jobs: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs {
                    break;
                }
                let value = f(k);
                results.lock().expect("worker panicked")[k] = Some(value);
            });
        }
    });
    results.into_inner().expect("worker panicked").into_iter().map(|v| v.expect("every job ran")).collect()
}

pub fn actors_table(prepared: &PreparedNetwork) -> Vec<u8> {
    let mut table = Table::new(&["actor", "input_actor", "name"]);
    for (a, &orig) in prepared.retained.iter().enumerate() {
        let name = prepared.names.as_ref().map_or(String::new(), |n| n[a].clone());
        table.row([(a + 1).to_string(), (orig + 1).to_string(), name]);
    }
    table.into_bytes()
}

pub fn run_fit(config: &RunConfig, input: Option<&Path>, options: FitOptions) -> Result<FitOutcome> {
    config.validate()?;
    let out = config.output_dir()?;
    check_destination(out)?;
    let prepared = prepare_network(config, input)?;
    let net = &prepared.network;
    let workers = worker_count(config.chains)?;
    let mut bundle = if options.resume { Bundle::reopen(out)? } else { Bundle::create(out)? };
    let results = parallel_map(config.chains, workers, |k| run_one(k, config, net, &bundle, options));
    let mut chains = Vec::with_capacity(config.chains);
    let mut paused = false;
    for r in results {
        match r? {
            ChainResult::Done { chain, bytes, report } => chains.push((chain, bytes, report)),
            ChainResult::Paused => paused = true,
        }
    }
    if paused {
        return Ok(FitOutcome::Paused(bundle.staging().to_path_buf()));
    }
    let format = config.output.chain_format;
    let mut reports = Vec::new();
    for (k, (_, bytes, report)) in chains.iter().enumerate() {
        bundle.write(&chain_file_name(k, format), bytes)?;
        reports.push(report.clone());
    }
    bundle.write(NETWORK, edge_list_string(net).as_bytes())?;
    bundle.write(ACTORS, &actors_table(&prepared))?;
    let mut report = serde_json::to_string_pretty(&json!({ "chains": reports })).map_err(|e| Error::Input(e.to_string()))?;
    report.push('\n');
    bundle.write(REPORT, report.as_bytes())?;
    let mut manifest = Manifest::new("fit", config.base_seed(), config)?;
    manifest.inputs = prepared.inputs.clone();
    manifest.details = json!({
        "n_actors": net.n_actors(),
        "n_times": net.n_times(),
        "chains": config.chains,
        "chain_format": format,
    });
    Ok(FitOutcome::Finished(bundle.finish(manifest)?))
}

/// Chain files of a fit bundle, in chain order.
pub fn bundle_chains(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::read(dir)?;
    let mut chains: Vec<PathBuf> =
        manifest.files.iter().filter(|f| f.name.starts_with("chain-")).map(|f| dir.join(&f.name)).collect();
    chains.sort_by_key(|p| {
        p.file_stem().and_then(|s| s.to_str()).and_then(|s| s.trim_start_matches("chain-").parse::<usize>().ok())
    });
    if chains.is_empty() {
        return Err(Error::Input(format!("{} holds no chain files", dir.display())));
    }
    Ok(chains)
}
