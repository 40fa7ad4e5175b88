//! The `simulate` command: benchmark networks with their ground truth.

use std::path::{Path, PathBuf};

use hdp_lpcm_core::sim::{simulate, SimOutput, SimSpec};
use serde_json::json;

use crate::bundle::{check_destination, Bundle, Manifest};
use crate::config::RunConfig;
use crate::edgelist::edge_list_string;
use crate::error::{Error, Result};
use crate::tables::{coordinate_header, labels_table, num, positions_table, Table};

pub const EDGES: &str = "edges.csv";
pub const TRUE_LABELS: &str = "true_labels.csv";
pub const TRUE_POSITIONS: &str = "true_positions.csv";
pub const TRUE_GROUPS: &str = "true_groups.csv";
pub const TRUE_INITIAL: &str = "true_initial.csv";
pub const TRUE_TRANSITIONS: &str = "true_transitions.csv";
pub const SPEC: &str = "spec.json";

/// The specification a run will use: a preset named on the command line,
/// then the configured preset, then a custom spec. The run seed replaces
/// the spec seed when set.
pub fn resolve_spec(config: &RunConfig, preset: Option<&str>) -> Result<SimSpec> {
    let seed = config.seed.unwrap_or(0);
    let mut spec = match (preset.or(config.simulation.preset.as_deref()), &config.simulation.spec) {
        (Some(name), _) => SimSpec::preset(name, seed)
            .ok_or_else(|| Error::Usage(format!("unknown preset {name:?}; expected homogeneous or inhomogeneous")))?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => return Err(Error::Usage("simulate needs a preset or a [simulation.spec] table".into())),
    };
    if let Some(seed) = config.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| Error::Usage(format!("simulation spec: {e}")))?;
    Ok(spec)
}

/// Every file of a simulation bundle except the manifest.
pub fn bundle_files(spec: &SimSpec, sim: &SimOutput) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let (g, p) = (spec.n_groups(), spec.dim);
    let mut groups = Table::new(&coordinate_header(&["group", "sigma"], p).iter().map(String::as_str).collect::<Vec<_>>());
    for k in 0..g {
        let mut row = vec![(k + 1).to_string(), num(sim.sigma[k])];
        row.extend(spec.group_locations[k * p..(k + 1) * p].iter().map(|&v| num(v)));
        groups.row(row);
    }
    let mut initial = Table::new(&["group", "prob"]);
    for (k, &w) in sim.pi0.iter().enumerate() {
        initial.row([(k + 1).to_string(), num(w)]);
    }
    let mut transitions = Table::new(&["t", "from", "to", "prob"]);
    for (m, block) in sim.transitions.chunks(g * g).enumerate() {
        for (idx, &w) in block.iter().enumerate() {
            transitions.row([(m + 2).to_string(), (idx / g + 1).to_string(), (idx % g + 1).to_string(), num(w)]);
        }
    }
    let mut spec_text = serde_json::to_string_pretty(spec).map_err(|e| Error::Input(e.to_string()))?;
    spec_text.push('\n');
    Ok(vec![
        (EDGES, edge_list_string(&sim.network).into_bytes()),
        (TRUE_LABELS, labels_table(&sim.labels)),
        (TRUE_POSITIONS, positions_table(&sim.positions)),
        (TRUE_GROUPS, groups.into_bytes()),
        (TRUE_INITIAL, initial.into_bytes()),
        (TRUE_TRANSITIONS, transitions.into_bytes()),
        (SPEC, spec_text.into_bytes()),
    ])
}

pub fn run_simulate(config: &RunConfig, preset: Option<&str>) -> Result<PathBuf> {
    config.validate()?;
    let spec = resolve_spec(config, preset)?;
    let out = config.output_dir()?;
    check_destination(out)?;
    let sim = simulate(&spec)?;
    if sim.attempts > 1 && !config.quiet {
        eprintln!("simulate: {} degenerate draws were redrawn", sim.attempts - 1);
    }
    let mut bundle = Bundle::create(out)?;
    for (name, bytes) in bundle_files(&spec, &sim)? {
        bundle.write(name, &bytes)?;
    }
    let mut manifest = Manifest::new("simulate", spec.seed, &json!({ "run": config, "spec": spec }))?;
    manifest.details = json!({
        "n_actors": spec.n_actors,
        "n_times": spec.n_times,
        "attempts": sim.attempts,
        "density": sim.network.density(),
    });
    bundle.finish(manifest)
}

/// Network size recorded by a simulation or fit bundle.
pub fn bundle_network_size(dir: &Path) -> Result<(Option<usize>, Option<usize>)> {
    let manifest = Manifest::read(dir)?;
    let get = |key: &str| manifest.details.get(key).and_then(serde_json::Value::as_u64).map(|v| v as usize);
    Ok((get("n_actors"), get("n_times")))
}
