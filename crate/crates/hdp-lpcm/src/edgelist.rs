//! Delimited edge lists: one `t,i,j[,w]` record per line.
//!
//! Fields are separated by commas or whitespace, `#` starts a comment and a
//! first record whose time field is not numeric is treated as a header.
//! Times are one-based. Actors are either all positive integers, read as
//! one-based indices, or arbitrary names numbered by first appearance.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use hdp_lpcm_core::DynamicNetwork;

use crate::error::{Error, Result};

struct Record {
    line: usize,
    time: usize,
    a: String,
    b: String,
    present: bool,
}

fn parse_records(source: impl BufRead) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut seen_data = false;
    for (k, line) in source.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let content = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let first_record = !seen_data;
        seen_data = true;
        if first_record && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Parse { line: line_no, message: format!("expected 3 or 4 fields, found {}", fields.len()) });
        }
        let time: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("time {:?} is not a positive integer", fields[0]),
        })?;
        if time == 0 {
            return Err(Error::Range { line: line_no, message: "times are one-based".into() });
        }
        let present = match fields.get(3) {
            None => true,
            Some(w) => {
                let w: f64 = w
                    .parse()
                    .ok()
                    .filter(|w: &f64| w.is_finite())
                    .ok_or_else(|| Error::Parse { line: line_no, message: format!("weight {w:?} is not a finite number") })?;
                w > 0.0
            }
        };
        if fields[1] == fields[2] {
            return Err(Error::SelfLoop { line: line_no, actor: fields[1].to_string() });
        }
        out.push(Record { line: line_no, time, a: fields[1].to_string(), b: fields[2].to_string(), present });
    }
    Ok(out)
}

/// Reads an edge list. `n_actors` and `n_times` default to the largest
/// values mentioned; when given they bound the records and leave unmentioned
/// actors isolated and unmentioned times empty. Name-based actor lists keep
/// their names on the returned network.
pub fn load_edge_list(source: impl BufRead, n_actors: Option<usize>, n_times: Option<usize>) -> Result<DynamicNetwork> {
    let records = parse_records(source)?;
    let numeric = records.iter().all(|r| is_index(&r.a) && is_index(&r.b));
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut resolved = Vec::with_capacity(records.len());
    for r in &records {
        if let Some(limit) = n_times {
            if r.time > limit {
                return Err(Error::Range { line: r.line, message: format!("time {} exceeds T = {limit}", r.time) });
            }
        }
        let mut lookup = |id: &str| -> Result<usize> {
            if numeric {
                let k: usize = id.parse().expect("checked numeric");
                if let Some(limit) = n_actors.filter(|&n| k > n) {
                    return Err(Error::Range { line: r.line, message: format!("actor {k} exceeds n = {limit}") });
                }
                return Ok(k - 1);
            }
            if let Some(&k) = index.get(id) {
                return Ok(k);
            }
            if let Some(limit) = n_actors.filter(|&n| names.len() == n) {
                return Err(Error::Range { line: r.line, message: format!("actor {id:?} is name number {} but n = {limit}", limit + 1) });
            }
            index.insert(id.to_string(), names.len());
            names.push(id.to_string());
            Ok(names.len() - 1)
        };
        let a = lookup(&r.a)?;
        let b = lookup(&r.b)?;
        if a == b {
            return Err(Error::SelfLoop { line: r.line, actor: r.a.clone() });
        }
        resolved.push((r.time - 1, a, b, r.present));
    }
    let seen_actors = if numeric { resolved.iter().map(|&(_, a, b, _)| a.max(b) + 1).max().unwrap_or(0) } else { names.len() };
    let n = n_actors.unwrap_or(seen_actors);
    let t = n_times.unwrap_or_else(|| resolved.iter().map(|&(t, ..)| t + 1).max().unwrap_or(0));
    if n < 2 || t == 0 {
        return Err(Error::Input(format!("edge list describes {n} actors over {t} times; need at least 2 actors and 1 time")));
    }
    let mut net = DynamicNetwork::empty(n, t)?;
    for (time, a, b, present) in resolved {
        if present {
            net.set_edge(time, a, b, true)?;
        }
    }
    if !numeric {
        names.extend((names.len()..n).map(|k| format!("actor{}", k + 1)));
        net.actor_names = Some(names);
    }
    Ok(net)
}

fn is_index(s: &str) -> bool {
    s.parse::<usize>().is_ok_and(|k| k > 0)
}

/// Writes `t,i,j` records with a header, one per unordered pair, sorted by
/// time and then actor indices. Times and actor indices are one-based.
pub fn write_edge_list(net: &DynamicNetwork, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "t,i,j")?;
    // `edges()` yields (t, i, j) with i < j in row-major order.
    let mut edges: Vec<_> = net.edges().collect();
    edges.sort_unstable();
    for (t, i, j) in edges {
        writeln!(out, "{},{},{}", t + 1, i + 1, j + 1)?;
    }
    out.flush()
}

/// Edge list as a string, for hashing and bundles.
pub fn edge_list_string(net: &DynamicNetwork) -> String {
    let mut buf = Vec::new();
    write_edge_list(net, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
