//! End-to-end runs of the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdp_lpcm::bundle::{staging_path, Manifest};
use hdp_lpcm::chain_io::load_chain;
use hdp_lpcm::config::{RunConfig, SimulationConfig};
use hdp_lpcm::report::{diagnostics, summary_tables};
use hdp_lpcm_core::sim::SimSpec;
use hdp_lpcm_core::summary::summarize_chain;
use hdp_lpcm_core::LabelSequences;
use tempfile::TempDir;

fn tool(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdp-lpcm"))
        .args(args)
        .current_dir(dir)
        .env_remove("HDP_LPCM_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = tool(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

/// A small network and a short chain so every run takes well under a
/// second.
fn small_config() -> RunConfig {
    let mut spec = SimSpec::homogeneous(0);
    spec.n_actors = 24;
    spec.n_times = 3;
    spec.const_per_time.truncate(3);
    spec.active_sets.truncate(3);
    let mut config = RunConfig { simulation: SimulationConfig { preset: None, spec: Some(spec) }, ..Default::default() };
    let s = &mut config.sampler;
    (s.n_tune, s.n_burn, s.n_keep, s.n_init_sweeps, s.tune_window, s.lambda_warmup) = (20, 10, 15, 10, 10, 5);
    s.n_groups = 4;
    config
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &RunConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), toml::to_string(config).unwrap()).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", "run.toml", "--quiet"];
        full.extend_from_slice(args);
        tool(&full, self.dir.path())
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }
}

#[test]
fn presets_simulate_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "homogeneous", "--seed", "1", "--out", "a", "-q"], dir.path());
    ok(&["simulate", "homogeneous", "--seed", "1", "--out", "b", "-q"], dir.path());
    ok(&["simulate", "homogeneous", "--seed", "2", "--out", "c", "-q"], dir.path());
    let (a, b, c) = (files(&dir.path().join("a")), files(&dir.path().join("b")), files(&dir.path().join("c")));
    assert_eq!(a, b);
    assert_ne!(a["edges.csv"], c["edges.csv"]);
    for name in ["edges.csv", "true_labels.csv", "true_positions.csv", "spec.json", "manifest.json"] {
        assert!(a.contains_key(name), "{name}");
    }
    let manifest = Manifest::read(&dir.path().join("a")).unwrap();
    assert_eq!(manifest.seed, 1);
    assert_eq!(manifest.files.len(), a.len() - 1);
}

#[test]
fn unknown_presets_and_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tool(&["simulate", "lattice", "--out", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(tool(&["simulate", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(tool(&["simulate", "homogeneous"], dir.path()).status.code(), Some(2));
    assert!(!dir.path().join("x").exists() && !staging_path(&dir.path().join("x")).exists());
}

#[test]
fn custom_specs_are_echoed() {
    let config = small_config();
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "9", "--out", "sim"]);
    let echoed: SimSpec = serde_json::from_slice(&fs::read(ws.path("sim/spec.json")).unwrap()).unwrap();
    let mut expected = config.simulation.spec.clone().unwrap();
    expected.seed = 9;
    assert_eq!(echoed, expected);
    let labels = fs::read_to_string(ws.path("sim/true_labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1 + 24 * 3);
}

#[test]
fn fits_are_deterministic_and_resumable() {
    let mut config = small_config();
    config.sampler.checkpoint_every = 7;
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit1"]);
    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit2"]);
    assert_eq!(files(&ws.path("fit1")), files(&ws.path("fit2")));

    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit3", "--max-sweeps", "12"]);
    assert!(!ws.path("fit3").exists());
    assert!(staging_path(&ws.path("fit3")).join("checkpoint-1.bin").is_file());
    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit3", "--max-sweeps", "20"]);
    assert!(!ws.path("fit3").exists());
    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit3", "--resume"]);
    assert_eq!(files(&ws.path("fit1")), files(&ws.path("fit3")));

    let chain = load_chain(&ws.path("fit1/chain-1.jsonl")).unwrap();
    assert_eq!(chain.samples.len(), 15);
    assert!(!chain.interrupted);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(ws.path("fit1/report.json")).unwrap()).unwrap();
    assert!(report["chains"][0]["acceptance"]["tune"]["positions"].as_f64().is_some());
    assert!(report["chains"][0]["final_state"]["hyper"]["gamma"].as_f64().is_some());
}

#[test]
fn resuming_a_paused_run_needs_the_same_configuration() {
    let ws = Workspace::new(&small_config());
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--seed", "5", "--out", "fit", "--max-sweeps", "12"]);
    assert_eq!(ws.run(&["fit", "sim", "--seed", "6", "--out", "fit", "--resume"]).status.code(), Some(2));
    assert_eq!(ws.run(&["fit", "sim", "--out", "other", "--resume"]).status.code(), Some(2));
}

#[test]
fn parallel_chains_get_distinct_seeds_and_formats_agree() {
    let ws = Workspace::new(&small_config());
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--seed", "5", "--chains", "2", "--out", "fit"]);
    ws.ok(&["fit", "sim", "--seed", "5", "--chains", "2", "--out", "fitbin", "--format", "binary"]);
    let a = load_chain(&ws.path("fit/chain-1.jsonl")).unwrap();
    let b = load_chain(&ws.path("fit/chain-2.jsonl")).unwrap();
    assert_eq!((a.seed, b.seed), (5, 6));
    assert_ne!(a.samples, b.samples);
    assert_eq!(load_chain(&ws.path("fitbin/chain-2.bin")).unwrap(), b);
    let one = Workspace::new(&small_config());
    one.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    one.ok(&["fit", "sim", "--seed", "6", "--out", "fit"]);
    assert_eq!(load_chain(&one.path("fit/chain-1.jsonl")).unwrap(), b);
}

#[test]
fn worker_override_must_be_positive() {
    let ws = Workspace::new(&small_config());
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    let out = Command::new(env!("CARGO_BIN_EXE_hdp-lpcm"))
        .args(["--config", "run.toml", "fit", "sim", "--out", "fit"])
        .current_dir(ws.dir.path())
        .env("HDP_LPCM_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!ws.path("fit").exists() && !staging_path(&ws.path("fit")).exists());
}

#[test]
fn zero_keep_iterations_give_a_valid_empty_chain() {
    let mut config = small_config();
    config.sampler.n_keep = 0;
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--out", "fit"]);
    let chain = load_chain(&ws.path("fit/chain-1.jsonl")).unwrap();
    assert!(chain.samples.is_empty() && !chain.interrupted);
    assert_eq!(chain.sweeps_done, 30);
    assert_eq!(ws.run(&["summarize", "fit", "--out", "sum"]).status.code(), Some(3));
}

#[test]
fn invalid_configuration_writes_nothing() {
    let mut config = small_config();
    config.sampler.thin = 0;
    let ws = Workspace::new(&config);
    assert_eq!(ws.run(&["simulate", "--out", "sim"]).status.code(), Some(2));
    assert!(!ws.path("sim").exists() && !staging_path(&ws.path("sim")).exists());
    fs::write(ws.path("bad.toml"), "[sampler]\nn_kep = 3\n").unwrap();
    assert_eq!(tool(&["--config", "bad.toml", "simulate", "homogeneous", "--out", "s"], ws.dir.path()).status.code(), Some(2));
}

#[test]
fn malformed_inputs_are_input_errors() {
    let ws = Workspace::new(&small_config());
    fs::write(ws.path("loops.csv"), "t,i,j\n1,1,2\n1,3,3\n").unwrap();
    let out = ws.run(&["fit", "loops.csv", "--out", "fit"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(ws.run(&["fit", "missing.csv", "--out", "fit"]).status.code(), Some(3));
    assert_eq!(ws.run(&["summarize", "missing.jsonl", "--out", "sum"]).status.code(), Some(3));
    assert!(!staging_path(&ws.path("fit")).exists());
}

#[test]
fn named_edge_lists_fit_with_windows_and_degree_filters() {
    let mut config = small_config();
    config.data.window = 2;
    config.data.min_degree = 1;
    let ws = Workspace::new(&config);
    let mut text = String::from("year,a,b\n");
    for t in 1..=4 {
        for (a, b) in [("ann", "bob"), ("bob", "cy"), ("cy", "dee"), ("dee", "ann"), ("eve", "fay")] {
            text.push_str(&format!("{t},{a},{b}\n"));
        }
    }
    fs::write(ws.path("edges.csv"), &text).unwrap();
    config.data.n_actors = Some(7);
    fs::write(ws.path("run.toml"), toml::to_string(&config).unwrap()).unwrap();
    ws.ok(&["fit", "edges.csv", "--out", "fit"]);
    let actors = fs::read_to_string(ws.path("fit/actors.csv")).unwrap();
    assert!(actors.starts_with("actor,input_actor,name\n1,1,ann\n"));
    assert!(!actors.contains("actor7"));
    assert_eq!(load_chain(&ws.path("fit/chain-1.jsonl")).unwrap().n_times, 2);
}

#[test]
fn summaries_evaluations_and_diagnostics() {
    let mut config = small_config();
    config.sampler.toggles.gamma = false;
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--seed", "4", "--out", "fit"]);
    ws.ok(&["summarize", "fit", "--out", "sum"]);
    for name in [
        "selected_labels.csv",
        "coassignment.csv",
        "group_counts.csv",
        "aligned_positions.csv",
        "ellipses.csv",
        "flows.csv",
        "small_groups.csv",
    ] {
        assert!(ws.path("sum").join(name).is_file(), "{name}");
    }
    let coassign = fs::read_to_string(ws.path("sum/coassignment.csv")).unwrap();
    assert_eq!(coassign.lines().count(), 1 + 3 * 24 * 23 / 2);

    ws.ok(&["evaluate", "fit", "--truth", "sim", "--out", "eval"]);
    let metrics = fs::read_to_string(ws.path("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nauc,"));
    assert!(metrics.contains("\nvi,") && metrics.contains("\nari,"));

    // The selected partition as ground truth scores perfectly.
    ws.ok(&["evaluate", "fit", "--truth", "sum/selected_labels.csv", "--out", "self"]);
    let metrics = fs::read_to_string(ws.path("self/metrics.csv")).unwrap();
    assert!(metrics.contains("\nvi,0.0\n") && metrics.ends_with("\nari,1.0\n"), "{metrics}");

    let out = ws.ok(&["diagnose", "fit", "--out", "diag", "--max-lag", "5"]);
    assert!(out.stderr.is_empty());
    let trace = fs::read_to_string(ws.path("diag/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("sample,sweep,log_post,"));
    assert_eq!(lines.filter(|l| !l.split(',').nth(2).unwrap().is_empty()).count(), 15);
    let ess = fs::read_to_string(ws.path("diag/ess.csv")).unwrap();
    let gamma = ess.lines().find(|l| l.starts_with("gamma,")).unwrap();
    assert!(gamma.starts_with("gamma,15,,"), "{gamma}");
    let out = tool(&["--config", "run.toml", "diagnose", "fit", "--out", "diag2"], ws.dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: ESS of gamma"));
}

#[test]
fn single_sample_chains_summarize_to_that_sample() {
    let mut config = small_config();
    config.sampler.n_keep = 1;
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--out", "fit"]);
    let chain = load_chain(&ws.path("fit/chain-1.jsonl")).unwrap();
    let summary = summarize_chain(&chain).unwrap();
    let sample = &chain.samples[0];
    assert_eq!(&summary.selected, sample.labels.as_ref().unwrap());
    assert_eq!(&summary.reference_positions, sample.positions.as_ref().unwrap());
    let tables: BTreeMap<_, _> = summary_tables(&chain, &summary).into_iter().collect();
    let counts = String::from_utf8(tables["group_counts.csv"].clone()).unwrap();
    for t in 0..3 {
        let k = sample.labels.as_ref().unwrap().n_occupied(t);
        assert!(counts.contains(&format!("\n{},{k},1.0\n", t + 1)));
    }
}

#[test]
fn hand_checked_three_sample_tables() {
    let mut config = small_config();
    config.sampler.n_keep = 3;
    let ws = Workspace::new(&config);
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--out", "fit"]);
    let mut chain = load_chain(&ws.path("fit/chain-1.jsonl")).unwrap();
    // Keep three actors; positions stay as sampled.
    let rows: [[[usize; 3]; 2]; 3] = [[[0, 0, 1], [0, 0, 1]], [[0, 0, 0], [0, 0, 0]], [[1, 0, 0], [1, 1, 0]]];
    for (s, r) in chain.samples.iter_mut().zip(rows) {
        s.labels = Some(LabelSequences::from_rows(&r.map(|t| t.to_vec())).unwrap());
        let x = s.positions.as_ref().unwrap();
        let data: Vec<f64> = (0..2).flat_map(|t| (0..3).flat_map(move |i| x.get(t, i).to_vec())).collect();
        s.positions = Some(hdp_lpcm_core::LatentPositions::from_vec(2, 3, 2, data).unwrap());
    }
    chain.n_actors = 3;
    chain.n_times = 2;
    let summary = summarize_chain(&chain).unwrap();
    let tables: BTreeMap<_, _> = summary_tables(&chain, &summary).into_iter().map(|(k, v)| (k, String::from_utf8(v).unwrap())).collect();
    // Pairs (1,2), (1,3), (2,3) share a label in 2, 1 and 2 of the three
    // draws at t = 1, and in 3, 1 and 1 at t = 2.
    let third = |k: f64| hdp_lpcm::tables::num(k / 3.0);
    let expected = format!(
        "t,i,j,prob\n1,1,2,{a}\n1,1,3,{b}\n1,2,3,{a}\n2,1,2,1.0\n2,1,3,{b}\n2,2,3,{b}\n",
        a = third(2.0),
        b = third(1.0)
    );
    assert_eq!(tables["coassignment.csv"], expected);
    // Two groups in draws 1 and 3, one group in draw 2, at both times.
    let counts: Vec<&str> = tables["group_counts.csv"].lines().filter(|l| !l.ends_with(",0.0")).collect();
    assert_eq!(counts, ["t,groups,prob".to_string(), format!("1,1,{}", third(1.0)), format!("1,2,{}", third(2.0)), format!("2,1,{}", third(1.0)), format!("2,2,{}", third(2.0))]);
    // Flows of the selected draw between the two times.
    let z = &summary.selected;
    let stays = (0..3).filter(|&i| z.get(0, i) == z.get(1, i)).count();
    let flow_total: usize = tables["flows.csv"].lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(flow_total, 3);
    assert!(stays >= 2);
}

#[test]
fn iid_traces_have_full_effective_size() {
    use rand::{Rng, SeedableRng};
    let ws = Workspace::new(&{
        let mut c = small_config();
        c.sampler.n_keep = 1;
        c
    });
    ws.ok(&["simulate", "--seed", "3", "--out", "sim"]);
    ws.ok(&["fit", "sim", "--out", "fit"]);
    let mut chain = load_chain(&ws.path("fit/chain-1.jsonl")).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let template = chain.samples[0].clone();
    chain.samples = (0..4000)
        .map(|_| {
            let mut s = template.clone();
            s.log_post = rng.sample(rand_distr::StandardNormal);
            s
        })
        .collect();
    let diags = diagnostics(&chain, 50);
    let (_, _, result) = diags.iter().find(|d| d.0 == "log_post").unwrap();
    let (ess, _) = result.as_ref().unwrap();
    assert!((ess / 4000.0 - 1.0).abs() < 0.15, "ess = {ess}");
    assert!(diags.iter().find(|d| d.0 == "beta0").unwrap().2.is_err());
}
