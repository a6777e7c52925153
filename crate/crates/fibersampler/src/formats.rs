//! Plain-text file formats.

use std::fmt::Write as _;
use std::path::Path;

use fibersampler_core::agent::ActorCritic;
use fibersampler_core::agent::WindowRecord;
use fibersampler_core::nn::{Activation, DenseNet, LayerShape, Layout, ParamVector};
use fibersampler_core::{FiberPoint, Label, LatticeBasis};

use crate::error::{RunError, RunResult, Stage};

pub const POLICY_FORMAT_VERSION: u32 = 1;
pub const BASIS_FORMAT_VERSION: u32 = 1;

pub fn read_text(stage: &str, path: &Path) -> RunResult<String> {
    std::fs::read_to_string(path).map_err(|e| RunError::io(stage, path, e))
}

/// Parses a `dims=AxB[xC]` table. Cells follow in lexicographic order, comma
/// separated and broken into lines freely.
pub fn parse_table(text: &str) -> RunResult<(Vec<usize>, Vec<i64>)> {
    const STAGE: &str = "table";
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| RunError::validation(STAGE, "empty table file"))?;
    let dims = header
        .strip_prefix("dims=")
        .ok_or_else(|| RunError::validation(STAGE, format!("header must read dims=d1xd2[xd3], found `{header}`")))?;
    let dims: Vec<usize> = dims
        .split('x')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| RunError::validation(STAGE, format!("header must read dims=d1xd2[xd3], found `{header}`")))?;
    if !(2..=3).contains(&dims.len()) || dims.iter().any(|&d| d < 2) {
        return Err(RunError::validation(STAGE, "header must read dims=d1xd2[xd3] with every dimension at least 2"));
    }
    let mut cells = Vec::new();
    for (no, line) in lines.enumerate() {
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let v: i64 = tok
                .parse()
                .map_err(|_| RunError::validation(STAGE, format!("line {}: `{tok}` is not an integer", no + 2)))?;
            if v < 0 {
                return Err(RunError::validation(STAGE, format!("line {}: negative count {v}", no + 2)));
            }
            cells.push(v);
        }
    }
    let expected: usize = dims.iter().product();
    if cells.len() != expected {
        return Err(RunError::validation(STAGE, format!("{} cells for dims {header}", cells.len())));
    }
    Ok((dims, cells))
}

pub fn format_table(dims: &[usize], cells: &[i64]) -> String {
    let mut out = format!("dims={}\n", dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x"));
    let width = *dims.last().unwrap_or(&1);
    for row in cells.chunks(width) {
        out.push_str(&join(row, ","));
        out.push('\n');
    }
    out
}

/// Parses `i j` lines with 1-based node ids into 0-based pairs.
pub fn parse_edges(text: &str) -> RunResult<Vec<(usize, usize)>> {
    const STAGE: &str = "edges";
    let mut edges = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<usize> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| RunError::validation(STAGE, format!("line {}: expected two node ids", no + 1)))?;
        match ids.as_slice() {
            &[a, b] if a >= 1 && b >= 1 => edges.push((a - 1, b - 1)),
            _ => return Err(RunError::validation(STAGE, format!("line {}: expected two 1-based node ids", no + 1))),
        }
    }
    Ok(edges)
}

pub fn format_basis(basis: &LatticeBasis) -> String {
    let mut out = format!("c={} d={}\n", basis.len(), basis.dim());
    for row in basis.to_dense_rows() {
        out.push_str(&join(&row, " "));
        out.push('\n');
    }
    out
}

/// Reads integer vectors under a `c=<count> d=<dim>` header.
pub fn parse_vectors(text: &str) -> RunResult<(usize, Vec<Vec<i64>>)> {
    const STAGE: &str = "basis";
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| RunError::validation(STAGE, "empty vector file"))?;
    let bad = || RunError::validation(STAGE, format!("header must read c=<count> d=<dim>, found `{header}`"));
    let mut c = None;
    let mut d = None;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("c", v)) => c = Some(v.parse::<usize>().map_err(|_| bad())?),
            Some(("d", v)) => d = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    let (c, d) = (c.ok_or_else(bad)?, d.ok_or_else(bad)?);
    let rows: Vec<Vec<i64>> = lines
        .map(|l| l.split_whitespace().map(str::parse).collect::<Result<Vec<i64>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|_| RunError::validation(STAGE, "vector entries must be integers"))?;
    if rows.len() != c || rows.iter().any(|r| r.len() != d) {
        return Err(RunError::validation(STAGE, format!("expected {c} vectors of length {d}")));
    }
    Ok((d, rows))
}

pub fn parse_basis(text: &str) -> RunResult<LatticeBasis> {
    let (d, rows) = parse_vectors(text)?;
    LatticeBasis::from_dense(d, &rows).stage("basis")
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

// f64 Debug prints the shortest decimal that parses back to the same bits.
fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn layout_string(layout: &Layout) -> String {
    layout
        .layers()
        .iter()
        .map(|l| format!("{}:{}:{}", l.inputs, l.outputs, l.activation.name()))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_layout(s: &str) -> RunResult<Layout> {
    let bad = || RunError::validation("policy", format!("bad layer list `{s}`"));
    let layers = s
        .split(',')
        .map(|spec| {
            let parts: Vec<&str> = spec.split(':').collect();
            match parts.as_slice() {
                [i, o, a] => Ok(LayerShape {
                    inputs: i.parse().map_err(|_| bad())?,
                    outputs: o.parse().map_err(|_| bad())?,
                    activation: Activation::from_name(a).ok_or_else(bad)?,
                }),
                _ => Err(bad()),
            }
        })
        .collect::<RunResult<Vec<_>>>()?;
    Layout::new(layers).stage("policy")
}

fn parse_floats(s: &str) -> RunResult<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| RunError::validation("policy", format!("`{t}` is not a number"))))
        .collect()
}

/// Versioned policy file carrying the checksum of the basis it was trained on.
pub fn format_policy(ac: &ActorCritic, basis_checksum: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# fibersampler policy");
    let _ = writeln!(out, "version={POLICY_FORMAT_VERSION}");
    let _ = writeln!(out, "basis_checksum={basis_checksum}");
    let _ = writeln!(out, "cells={}", ac.state_dim());
    let _ = writeln!(out, "coefficients={}", ac.num_coefficients());
    let _ = writeln!(out, "c1={}", ac.c1);
    let _ = writeln!(out, "c2={}", ac.c2);
    let _ = writeln!(out, "mask={}", ac.mask_k.map_or("none".to_string(), |k| k.to_string()));
    let _ = writeln!(out, "input_scale={:?}", ac.input_scale);
    let _ = writeln!(out, "feature_layers={}", layout_string(ac.feature_net.layout()));
    let _ = writeln!(out, "head_layers={}", layout_string(ac.actor_head.layout()));
    let _ = writeln!(out, "feature_params={}", join_f64(ac.feature_net.params()));
    let _ = writeln!(out, "head_params={}", join_f64(ac.actor_head.params()));
    let _ = writeln!(out, "critic={}", join_f64(&ac.critic_weights));
    out
}

/// Returns the policy and the basis checksum recorded with it.
pub fn parse_policy(text: &str) -> RunResult<(ActorCritic, String)> {
    const STAGE: &str = "policy";
    let mut map = std::collections::BTreeMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RunError::validation(STAGE, format!("expected key=value, found `{line}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| map.get(k).ok_or_else(|| RunError::validation(STAGE, format!("missing `{k}`")));
    let int = |k: &str| -> RunResult<i64> {
        get(k)?.parse().map_err(|_| RunError::validation(STAGE, format!("`{k}` must be an integer")))
    };
    if int("version")? != POLICY_FORMAT_VERSION as i64 {
        return Err(RunError::validation(STAGE, format!("unsupported policy version {}", get("version")?)));
    }
    let feature_layout = parse_layout(get("feature_layers")?)?;
    let head_layout = parse_layout(get("head_layers")?)?;
    let feature_net = DenseNet::unflatten(&ParamVector { values: parse_floats(get("feature_params")?)?, layout: feature_layout })
        .stage(STAGE)?;
    let actor_head =
        DenseNet::unflatten(&ParamVector { values: parse_floats(get("head_params")?)?, layout: head_layout }).stage(STAGE)?;
    let mask_k = match get("mask")?.as_str() {
        "none" => None,
        s => Some(s.parse().map_err(|_| RunError::validation(STAGE, "`mask` must be none or an integer"))?),
    };
    let input_scale = get("input_scale")?
        .parse()
        .map_err(|_| RunError::validation(STAGE, "`input_scale` must be a number"))?;
    let ac = ActorCritic {
        feature_net,
        actor_head,
        critic_weights: parse_floats(get("critic")?)?,
        mask_k,
        c1: int("c1")?,
        c2: int("c2")?,
        input_scale,
    };
    ac.validate().stage(STAGE)?;
    if ac.state_dim() as i64 != int("cells")? || ac.num_coefficients() as i64 != int("coefficients")? {
        return Err(RunError::validation(STAGE, "declared sizes disagree with the layer list"));
    }
    Ok((ac, get("basis_checksum")?.clone()))
}

pub fn format_training_log(records: &[WindowRecord]) -> String {
    let mut out = String::from("window,mean_reward,feasible_fraction,discovered_count,alpha,beta\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{:?},{:?}",
            r.window, r.mean_reward, r.feasible_fraction, r.discovered_count, r.alpha, r.beta
        );
    }
    out
}

/// Column name of a cell or edge label, 1-based.
pub fn label_name(label: &Label, edges: bool) -> String {
    let ids = label.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join("_");
    if edges {
        format!("e{ids}")
    } else {
        format!("c{ids}")
    }
}

/// One point per row followed by its statistic.
pub fn format_samples(names: &[String], points: &[Vec<i64>], statistics: &[f64]) -> String {
    let mut out = names.join(",");
    out.push_str(",statistic\n");
    for (p, s) in points.iter().zip(statistics) {
        out.push_str(&join(p, ","));
        let _ = writeln!(out, ",{s:?}");
    }
    out
}

pub fn format_points(names: &[String], points: &[FiberPoint]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for p in points {
        out.push_str(&join(p.as_slice(), ","));
        out.push('\n');
    }
    out
}

pub fn format_p_values(p: &[(u64, f64)]) -> String {
    let mut out = String::from("chain_id,p_value\n");
    for (id, v) in p {
        let _ = writeln!(out, "{id},{v:?}");
    }
    out
}

pub fn format_histogram(bins: &[(f64, f64, usize)]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (lo, hi, c) in bins {
        let _ = writeln!(out, "{lo:?},{hi:?},{c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use fibersampler_core::agent::Architecture;
    use fibersampler_core::mdp::MdpConfig;
    use rand::SeedableRng;

    #[test]
    fn table_round_trip() {
        let text = "dims=2x3\n1,2,3\n4,5,6\n";
        let (dims, cells) = parse_table(text).unwrap();
        assert_eq!(dims, vec![2, 3]);
        assert_eq!(cells, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(format_table(&dims, &cells), text);
    }

    #[test]
    fn table_header_errors_name_the_rule() {
        let err = parse_table("rows=2\n1,2\n").unwrap_err();
        assert!(err.message.contains("dims=d1xd2[xd3]"));
        assert!(parse_table("dims=2x2\n1,2,3\n").is_err());
        assert!(parse_table("dims=2x2\n1,-2,3,4\n").is_err());
    }

    #[test]
    fn edges_are_one_based() {
        assert_eq!(parse_edges("# g\n1 2\n2 3\n").unwrap(), vec![(0, 1), (1, 2)]);
        assert!(parse_edges("0 1\n").is_err());
    }

    #[test]
    fn basis_round_trip() {
        let b = LatticeBasis::from_dense(3, &[vec![1, -1, 0], vec![0, 1, -1]]).unwrap();
        let text = format_basis(&b);
        assert!(text.starts_with("c=2 d=3\n"));
        assert_eq!(parse_basis(&text).unwrap(), b);
    }

    #[test]
    fn policy_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut ac = ActorCritic::new(5, 2, &Architecture::default(), &MdpConfig::default(), 7.0, &mut rng).unwrap();
        ac.critic_weights[3] = 0.1 + 0.2;
        let (back, sum) = parse_policy(&format_policy(&ac, "abc")).unwrap();
        assert_eq!(sum, "abc");
        assert_eq!(back, ac);
    }
}
