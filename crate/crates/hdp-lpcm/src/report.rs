//! The `summarize`, `evaluate` and `diagnose` commands.

use std::path::{Path, PathBuf};

use hdp_lpcm_core::summary::{
    ess_and_acf, group_count_mode, in_sample_auc, summarize_chain, time_averaged_ari, time_averaged_vi, PartitionSummary,
};
use hdp_lpcm_core::{Chain, LabelSequences};
use serde_json::json;

use crate::bundle::{check_destination, input_entry, Bundle, Manifest, MANIFEST};
use crate::chain_io::load_chain;
use crate::config::RunConfig;
use crate::edgelist::load_edge_list;
use crate::error::{Error, Result};
use crate::fit::{bundle_chains, ACTORS, NETWORK};
use crate::simulate::{bundle_network_size, TRUE_LABELS};
use crate::tables::{coordinate_header, labels_table, num, positions_table, read_labels_table, Table};

/// The chain file behind `input`: the file itself, or the first chain of
/// a fit bundle.
pub fn resolve_chain(input: &Path) -> Result<PathBuf> {
    if input.is_dir() {
        Ok(bundle_chains(input)?.swap_remove(0))
    } else if input.is_file() {
        Ok(input.to_path_buf())
    } else {
        Err(Error::Input(format!("{}: no such chain file or fit bundle", input.display())))
    }
}

fn header(cols: &[String]) -> Vec<&str> {
    cols.iter().map(String::as_str).collect()
}

/// Every summary table, by file name.
pub fn summary_tables(chain: &Chain, summary: &PartitionSummary) -> Vec<(&'static str, Vec<u8>)> {
    let (n_times, n) = (summary.selected.n_times(), summary.selected.n_actors());
    let l = chain.config.n_groups;
    let mut coassign = Table::new(&["t", "i", "j", "prob"]);
    for t in 0..n_times {
        for i in 0..n {
            for j in i + 1..n {
                coassign.row([(t + 1).to_string(), (i + 1).to_string(), (j + 1).to_string(), num(summary.coassign.get(t, i, j))]);
            }
        }
    }
    let mut counts = Table::new(&["t", "groups", "prob"]);
    for t in 0..n_times {
        for k in 1..=l {
            counts.row([(t + 1).to_string(), k.to_string(), num(summary.group_count_posterior[t * (l + 1) + k])]);
        }
    }
    let dim = summary.reference_positions.dim();
    let mut ellipses = Table::new(&header(&coordinate_header(&["group"], dim)).into_iter().chain(["radius"]).collect::<Vec<_>>());
    for e in &summary.ellipses {
        let mut row = vec![(e.group + 1).to_string()];
        row.extend(e.center.iter().map(|&v| num(v)));
        row.push(num(e.radius));
        ellipses.row(row);
    }
    let mut flows = Table::new(&["from_t", "to_t", "from", "to", "count"]);
    for f in &summary.flows {
        flows.row([f.time.to_string(), (f.time + 1).to_string(), (f.from + 1).to_string(), (f.to + 1).to_string(), f.count.to_string()]);
    }
    let mut small = Table::new(&["t", "group", "size"]);
    for &(t, g, size) in &summary.small_groups {
        small.row([(t + 1).to_string(), (g + 1).to_string(), size.to_string()]);
    }
    vec![
        ("selected_labels.csv", labels_table(&summary.selected)),
        ("coassignment.csv", coassign.into_bytes()),
        ("group_counts.csv", counts.into_bytes()),
        ("aligned_positions.csv", positions_table(&summary.aligned_positions)),
        ("reference_positions.csv", positions_table(&summary.reference_positions)),
        ("ellipses.csv", ellipses.into_bytes()),
        ("flows.csv", flows.into_bytes()),
        ("small_groups.csv", small.into_bytes()),
    ]
}

pub fn run_summarize(config: &RunConfig, input: &Path) -> Result<PathBuf> {
    config.validate()?;
    let out = config.output_dir()?;
    check_destination(out)?;
    let path = resolve_chain(input)?;
    let chain = load_chain(&path)?;
    if chain.samples.is_empty() {
        return Err(Error::Input(format!("{}: chain has no kept samples to summarize", path.display())));
    }
    let summary = summarize_chain(&chain)?;
    if summary.degenerate_alignments > 0 && !config.quiet {
        eprintln!("summarize: {} draws could not be rotated and were only centered", summary.degenerate_alignments);
    }
    let mut bundle = Bundle::create(out)?;
    for (name, bytes) in summary_tables(&chain, &summary) {
        bundle.write(name, &bytes)?;
    }
    let l = chain.config.n_groups;
    let mut manifest = Manifest::new("summarize", chain.seed, config)?;
    manifest.inputs = vec![input_entry(&path)?];
    manifest.details = json!({
        "samples": chain.samples.len(),
        "selected_sample": summary.selected_sample_index + 1,
        "selected_sweep": chain.samples[summary.selected_sample_index].sweep + 1,
        "objective": summary.objective,
        "group_count_mode": group_count_mode(&summary.group_count_posterior, l),
        "small_groups": summary.small_groups.len(),
        "degenerate_alignments": summary.degenerate_alignments,
    });
    bundle.finish(manifest)
}

/// Metrics of a fit against the network it was fitted to and, optionally,
/// true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub auc: f64,
    pub vi: Option<f64>,
    pub ari: Option<f64>,
    pub mode_counts: Vec<usize>,
    pub true_counts: Option<Vec<usize>>,
}

/// Keeps the true labels of the actors a fit retained.
fn restrict_truth(truth: &LabelSequences, retained: &[usize], n_times: usize) -> Result<LabelSequences> {
    if truth.n_times() != n_times || retained.iter().any(|&i| i >= truth.n_actors()) {
        return Err(Error::Input(format!(
            "true labels cover {} actors over {} times; the fit needs {} times",
            truth.n_actors(),
            truth.n_times(),
            n_times
        )));
    }
    let rows: Vec<Vec<usize>> = (0..n_times).map(|t| retained.iter().map(|&i| truth.get(t, i)).collect()).collect();
    Ok(LabelSequences::from_rows(&rows)?)
}

fn read_retained(fit_dir: &Path) -> Result<Vec<usize>> {
    let path = fit_dir.join(ACTORS);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(k, r)| {
            let r = r.map_err(|e| Error::Parse { line: k + 2, message: e.to_string() })?;
            r.get(1)
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&v| v > 0)
                .map(|v| v - 1)
                .ok_or_else(|| Error::Parse { line: k + 2, message: format!("{}: bad input_actor", path.display()) })
        })
        .collect()
}

pub fn evaluate_fit(fit_dir: &Path, truth: Option<&Path>) -> Result<Evaluation> {
    if !fit_dir.join(MANIFEST).is_file() {
        return Err(Error::Input(format!("{} is not a fit bundle", fit_dir.display())));
    }
    let (n, t) = bundle_network_size(fit_dir)?;
    let net_path = fit_dir.join(NETWORK);
    let file = std::fs::File::open(&net_path).map_err(|e| Error::io(&net_path, e))?;
    let net = load_edge_list(std::io::BufReader::new(file), n, t)?;
    let chain = load_chain(&resolve_chain(fit_dir)?)?;
    if chain.samples.is_empty() {
        return Err(Error::Input("chain has no kept samples to evaluate".into()));
    }
    let summary = summarize_chain(&chain)?;
    let l = chain.config.n_groups;
    let mode_counts = group_count_mode(&summary.group_count_posterior, l);
    let auc = in_sample_auc(&net, &chain)?;
    let Some(truth) = truth else {
        return Ok(Evaluation { auc, vi: None, ari: None, mode_counts, true_counts: None });
    };
    let truth_path = if truth.is_dir() { truth.join(TRUE_LABELS) } else { truth.to_path_buf() };
    let truth = restrict_truth(&read_labels_table(&truth_path)?, &read_retained(fit_dir)?, net.n_times())?;
    Ok(Evaluation {
        auc,
        vi: Some(time_averaged_vi(&truth, &summary.selected)?),
        ari: Some(time_averaged_ari(&truth, &summary.selected)?),
        mode_counts,
        true_counts: Some((0..truth.n_times()).map(|t| truth.n_occupied(t)).collect()),
    })
}

pub fn run_evaluate(config: &RunConfig, fit_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let out = config.output_dir()?;
    check_destination(out)?;
    let truth = config.evaluate.truth.as_deref();
    let eval = evaluate_fit(fit_dir, truth)?;
    let mut metrics = Table::new(&["metric", "value"]);
    metrics.row(["auc".to_string(), num(eval.auc)]);
    if let (Some(vi), Some(ari)) = (eval.vi, eval.ari) {
        metrics.row(["vi".to_string(), num(vi)]);
        metrics.row(["ari".to_string(), num(ari)]);
    }
    let mut counts = Table::new(&["t", "mode", "truth"]);
    for (t, &m) in eval.mode_counts.iter().enumerate() {
        let truth = eval.true_counts.as_ref().map_or(String::new(), |c| c[t].to_string());
        counts.row([(t + 1).to_string(), m.to_string(), truth]);
    }
    let mut bundle = Bundle::create(out)?;
    bundle.write("metrics.csv", &metrics.into_bytes())?;
    bundle.write("group_counts.csv", &counts.into_bytes())?;
    let mut manifest = Manifest::new("evaluate", 0, config)?;
    let mut inputs = vec![input_entry(&fit_dir.join(MANIFEST))?];
    if let Some(t) = truth {
        inputs.push(input_entry(&if t.is_dir() { t.join(TRUE_LABELS) } else { t.to_path_buf() })?);
    }
    manifest.inputs = inputs;
    bundle.finish(manifest)
}

/// Scalar traces recorded for every kept sample.
pub fn traces(chain: &Chain) -> Vec<(&'static str, Vec<f64>)> {
    let s = &chain.samples;
    let get = |f: fn(&hdp_lpcm_core::gibbs::Sample) -> f64| s.iter().map(f).collect::<Vec<f64>>();
    let mut out = vec![
        ("log_post", get(|x| x.log_post)),
        ("log_likelihood", get(|x| x.log_likelihood)),
        ("beta0", get(|x| x.groups.beta0)),
        ("lambda", get(|x| x.groups.lambda)),
        ("tau2", get(|x| x.hyper.tau2)),
        ("b", get(|x| x.hyper.b)),
        ("gamma", get(|x| x.hyper.gamma)),
        ("alpha0", get(|x| x.hyper.alpha0)),
        ("alpha", get(|x| x.hyper.alpha)),
        ("kappa", get(|x| x.hyper.kappa)),
    ];
    if s.iter().all(|x| x.labels.is_some()) {
        out.push((
            "mean_groups",
            get(|x| {
                let z = x.labels.as_ref().expect("checked");
                (0..z.n_times()).map(|t| z.n_occupied(t) as f64).sum::<f64>() / z.n_times() as f64
            }),
        ));
    }
    out
}

/// ESS per trace; `None` with a reason when it is undefined.
pub fn diagnostics(chain: &Chain, max_lag: usize) -> Vec<(&'static str, Vec<f64>, std::result::Result<(f64, Vec<f64>), String>)> {
    traces(chain)
        .into_iter()
        .map(|(name, series)| {
            let lag = max_lag.min(series.len().saturating_sub(1));
            let result = ess_and_acf(&series, lag).map_err(|e| e.to_string());
            (name, series, result)
        })
        .collect()
}

pub fn run_diagnose(config: &RunConfig, input: &Path) -> Result<PathBuf> {
    config.validate()?;
    let out = config.output_dir()?;
    check_destination(out)?;
    let path = resolve_chain(input)?;
    let chain = load_chain(&path)?;
    let diags = diagnostics(&chain, config.diagnose.max_lag);
    let names: Vec<&str> = ["sample", "sweep"].into_iter().chain(diags.iter().map(|d| d.0)).collect();
    let mut trace = Table::new(&names);
    for (k, s) in chain.samples.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), (s.sweep + 1).to_string()];
        row.extend(diags.iter().map(|d| num(d.1[k])));
        trace.row(row);
    }
    let mut acf = Table::new(&["statistic", "lag", "acf"]);
    let mut ess = Table::new(&["statistic", "samples", "ess", "note"]);
    for (name, series, result) in &diags {
        match result {
            Ok((value, rho)) => {
                ess.row([name.to_string(), series.len().to_string(), num(*value), String::new()]);
                for (lag, r) in rho.iter().enumerate() {
                    acf.row([name.to_string(), lag.to_string(), num(*r)]);
                }
            }
            Err(reason) => {
                if !config.quiet {
                    eprintln!("diagnose: warning: ESS of {name} is undefined ({reason})");
                }
                ess.row([name.to_string(), series.len().to_string(), String::new(), reason.clone()]);
            }
        }
    }
    let mut bundle = Bundle::create(out)?;
    bundle.write("trace.csv", &trace.into_bytes())?;
    bundle.write("acf.csv", &acf.into_bytes())?;
    bundle.write("ess.csv", &ess.into_bytes())?;
    let mut manifest = Manifest::new("diagnose", chain.seed, config)?;
    manifest.inputs = vec![input_entry(&path)?];
    bundle.finish(manifest)
}
