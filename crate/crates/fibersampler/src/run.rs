//! Command implementations. Each run writes its outputs and a manifest into
//! the output directory.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use fibersampler_core::agent::{self, ActorCritic};
use fibersampler_core::lattice::{
    compute_lattice_basis, decompose_initial_point, enumerate_fiber, lift_with_map, Graph, Strategy,
};
use fibersampler_core::models::{build_design_matrix, chi_square_statistic, fit_expected_counts, FitOptions};
use fibersampler_core::sampling::{self, besag_clifford_chain, lifted_basis, ChainSpec};
use fibersampler_core::stats::histogram;
use fibersampler_core::{DesignMatrix, FiberPoint, LatticeBasis, ModelFamily, ObservedData};

use crate::config::{Decomposition, RunConfig};
use crate::error::{RunError, RunResult, Stage};
use crate::formats;
use crate::manifest::RunManifest;

/// Design, basis and observed point of a configured run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub design: DesignMatrix,
    pub basis: LatticeBasis,
    pub data: ObservedData,
    /// Column names of the full (expanded) table.
    pub names: Vec<String>,
    pub edges: Option<Vec<(usize, usize)>>,
}

fn is_beta(cfg: &RunConfig) -> bool {
    matches!(cfg.model.family, ModelFamily::BetaModel { .. })
}

fn load_data(cfg: &RunConfig, design: &DesignMatrix) -> RunResult<(ObservedData, Option<Vec<(usize, usize)>>)> {
    if is_beta(cfg) {
        let path = cfg.data.edges.as_ref().ok_or_else(|| RunError::validation("data", "missing `data.edges`"))?;
        let edges = formats::parse_edges(&formats::read_text("edges", path)?)?;
        Ok((ObservedData::from_edges(design, &edges).stage("data")?, Some(edges)))
    } else {
        let path = cfg.data.table.as_ref().ok_or_else(|| RunError::validation("data", "missing `data.table`"))?;
        let (dims, cells) = formats::parse_table(&formats::read_text("table", path)?)?;
        if Some(dims.clone()) != cfg.model.family.table_dims() {
            return Err(RunError::validation("table", format!("table dims {dims:?} do not match `model.dims`")));
        }
        Ok((ObservedData::from_full_counts(design, &cells).stage("data")?, None))
    }
}

fn full_names(cfg: &RunConfig) -> Vec<String> {
    let fam = cfg.model.family;
    (0..fam.full_cells()).map(|i| formats::label_name(&fam.cell_label(i), is_beta(cfg))).collect()
}

/// Builds the design, reads the data and assembles the lattice basis.
pub fn load_problem(cfg: &RunConfig) -> RunResult<Problem> {
    let design = build_design_matrix(&cfg.model).stage("model")?;
    let (data, edges) = load_data(cfg, &design)?;
    let basis = if let Some(path) = &cfg.data.basis {
        let b = formats::parse_basis(&formats::read_text("basis", path)?)?;
        if b.dim() != design.d() || (0..b.len()).any(|i| !design.in_kernel(&b.dense(i))) {
            return Err(RunError::validation("basis", "basis vectors do not lie in the kernel of the design"));
        }
        b
    } else {
        match (&cfg.decomposition, &edges) {
            (Decomposition::Split(strategy), Some(edges)) => {
                let ModelFamily::BetaModel { nodes } = cfg.model.family else { unreachable!() };
                let graph = Graph::new(nodes, edges.iter().copied()).stage("decompose")?;
                let subs = decompose_initial_point(&graph, strategy).stage("decompose")?;
                let parts = subs
                    .into_iter()
                    .map(|s| {
                        let b = compute_lattice_basis(&s.sub_matrix)?;
                        Ok((s, b))
                    })
                    .collect::<fibersampler_core::Result<Vec<_>>>()
                    .stage("lattice")?;
                lifted_basis(&parts, design.column_labels()).stage("lift")?
            }
            (Decomposition::Split(_), None) => {
                return Err(RunError::validation("decompose", "decomposition applies to the beta model only"))
            }
            (Decomposition::None, _) => compute_lattice_basis(&design).stage("lattice")?,
        }
    };
    Ok(Problem { design, basis, data, names: full_names(cfg), edges })
}

fn load_policy(cfg: &RunConfig, problem: &Problem) -> RunResult<ActorCritic> {
    let path = cfg.data.policy.as_ref().ok_or_else(|| RunError::validation("policy", "missing `data.policy`"))?;
    let (ac, checksum) = formats::parse_policy(&formats::read_text("policy", path)?)?;
    let expected = problem.basis.checksum();
    if checksum != expected {
        return Err(RunError::validation(
            "policy",
            format!("incompatible policy: trained on basis {checksum}, this model has basis {expected}"),
        ));
    }
    if ac.state_dim() != problem.design.d() || ac.num_coefficients() != problem.basis.len() {
        return Err(RunError::validation("policy", "incompatible policy: network shape does not match the fiber"));
    }
    Ok(ac)
}

pub struct RunSummary {
    pub manifest: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub message: String,
}

pub fn run_train(cfg: &RunConfig) -> RunResult<RunSummary> {
    let mut m = RunManifest::new("train", cfg.snapshot.clone(), &cfg.output_dir)?;
    let problem = m.time("ingest", || load_problem(cfg))?;
    if problem.basis.is_empty() {
        return Err(RunError::validation("lattice", "the fiber is a single point: the lattice basis is empty"));
    }
    let start = problem.data.counts.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ac = ActorCritic::new(
        problem.design.d(),
        problem.basis.len(),
        &cfg.arch,
        &cfg.mdp,
        ActorCritic::scale_for(start.as_slice()),
        &mut rng,
    )
    .stage("policy")?;
    if let Some(mask) = cfg.mask_k {
        ac.mask_k = mask;
    }
    let log = m.time("train", || {
        agent::train(&problem.design, &problem.basis, &start, &mut ac, &cfg.mdp, &cfg.train).stage("train")
    })?;
    let checksum = problem.basis.checksum();
    let outputs = vec![
        m.emit("policy.txt", &formats::format_policy(&ac, &checksum))?,
        m.emit("training_log.csv", &formats::format_training_log(&log.records))?,
        m.emit("basis.txt", &formats::format_basis(&problem.basis))?,
    ];
    let first = log.mean_over(0.0, 0.1, |r| r.feasible_fraction);
    let last = log.mean_over(0.9, 1.0, |r| r.feasible_fraction);
    let message = format!(
        "trained on d={} c={} for {} windows; feasible fraction {first:.3} -> {last:.3}",
        problem.design.d(),
        problem.basis.len(),
        log.records.len()
    );
    m.note(message.clone());
    Ok(RunSummary { manifest: m.finish()?, outputs, message })
}

fn expected_counts(problem: &Problem) -> RunResult<Vec<f64>> {
    fit_expected_counts(&problem.design, &problem.data, FitOptions::default()).stage("fit")
}

pub fn run_sample(cfg: &RunConfig) -> RunResult<RunSummary> {
    let mut m = RunManifest::new("sample", cfg.snapshot.clone(), &cfg.output_dir)?;
    let problem = m.time("ingest", || load_problem(cfg))?;
    let ac = load_policy(cfg, &problem)?;
    let expected = match expected_counts(&problem) {
        Ok(e) => Some(e),
        Err(e) => {
            m.note(format!("statistics omitted: {e}"));
            None
        }
    };
    let spec = ChainSpec {
        kind: cfg.sample_kind,
        steps: cfg.sample_steps,
        stride: cfg.sample_stride,
        record_start: true,
        chain_id: 0,
        seed: cfg.seed,
        point_cap: cfg.mdp.discovered_point_cap,
    };
    let outcome = m.time("sample", || {
        sampling::run_chain(&ac, &problem.basis, &problem.data.counts, expected.as_deref(), &spec).stage("sample")
    })?;
    let b = &problem.data.marginals;
    if let Some(bad) = outcome.sample.points.iter().find(|p| !problem.design.is_feasible(p.as_slice(), b)) {
        return Err(RunError::validation("sample", format!("emitted an infeasible point {:?}", bad.as_slice())));
    }
    let rows: Vec<Vec<i64>> = outcome.sample.points.iter().map(|p| problem.design.expand(p.as_slice())).collect();
    if let Some(w) = &outcome.stuck {
        m.note(format!("stuck chain: no move in {} proposals before step {}", w.window, w.at_step));
    }
    let outputs = vec![m.emit("samples.csv", &formats::format_samples(&problem.names, &rows, &outcome.sample.statistics))?];
    let message = format!(
        "{} points recorded, {} distinct discovered, {} moves, {} infeasible proposals",
        rows.len(),
        outcome.discovered_count(),
        outcome.moves,
        outcome.infeasible
    );
    m.note(message.clone());
    Ok(RunSummary { manifest: m.finish()?, outputs, message })
}

pub fn run_test(cfg: &RunConfig) -> RunResult<RunSummary> {
    let mut m = RunManifest::new("test", cfg.snapshot.clone(), &cfg.output_dir)?;
    let problem = m.time("ingest", || load_problem(cfg))?;
    let ac = load_policy(cfg, &problem)?;
    let expected = m.time("fit", || expected_counts(&problem))?;
    let result = m.time("chains", || {
        let chains = (0..cfg.gof.chains as u64)
            .into_par_iter()
            .map(|id| besag_clifford_chain(&ac, &problem.basis, &problem.data.counts, &expected, &cfg.gof, id))
            .collect::<fibersampler_core::Result<Vec<_>>>()
            .stage("sample")?;
        sampling::summarize(chains).stage("sample")
    })?;
    let pv: Vec<(u64, f64)> = result.chains.iter().map(|c| (c.chain_id, c.result.p_value)).collect();
    let mut summary = String::from("chain_id,seed,observed_statistic,p_value,sample_size,observed_position,stuck\n");
    for c in &result.chains {
        summary.push_str(&format!(
            "{},{},{:?},{:?},{},{},{}\n",
            c.chain_id,
            c.seed,
            c.result.observed_statistic,
            c.result.p_value,
            c.result.sample_size,
            c.observed_position,
            c.stuck.is_some()
        ));
        if let Some(w) = &c.stuck {
            m.note(format!("chain {}: no move in {} proposals before step {}", c.chain_id, w.window, w.at_step));
        }
    }
    let rows: Vec<Vec<i64>> = result
        .chains
        .iter()
        .flat_map(|c| c.sample.points.iter().map(|p| problem.design.expand(p.as_slice())))
        .collect();
    let stats: Vec<f64> = result.chains.iter().flat_map(|c| c.sample.statistics.iter().copied()).collect();
    let outputs = vec![
        m.emit("p_values.csv", &formats::format_p_values(&pv))?,
        m.emit("histogram.csv", &formats::format_histogram(&histogram(&result.p_values(), 0.0, 1.0, cfg.bins)))?,
        m.emit("chains.csv", &summary)?,
        m.emit("samples.csv", &formats::format_samples(&problem.names, &rows, &stats))?,
    ];
    let message = format!(
        "observed chi-square {:.4}; pooled p-value {:.4} over {} sampled points; {} chains",
        result.summary.observed_statistic,
        result.summary.p_value,
        result.summary.sample_size,
        result.chains.len()
    );
    m.note(message.clone());
    Ok(RunSummary { manifest: m.finish()?, outputs, message })
}

pub fn run_enumerate(cfg: &RunConfig) -> RunResult<RunSummary> {
    let mut m = RunManifest::new("enumerate", cfg.snapshot.clone(), &cfg.output_dir)?;
    let design = build_design_matrix(&cfg.model).stage("model")?;
    let (data, _) = load_data(cfg, &design)?;
    let mut points = m.time("enumerate", || {
        enumerate_fiber(&design, &data.marginals, cfg.enumerate_cap).stage("enumerate")
    })?;
    let mut rows: Vec<FiberPoint> = points
        .drain(..)
        .map(|p| FiberPoint::new(design.expand(p.as_slice())))
        .collect::<fibersampler_core::Result<_>>()
        .stage("enumerate")?;
    rows.sort();
    rows.dedup();
    let outputs = vec![m.emit("fiber.csv", &formats::format_points(&full_names(cfg), &rows))?];
    let message = format!("{} fiber points", rows.len());
    m.note(message.clone());
    Ok(RunSummary { manifest: m.finish()?, outputs, message })
}

pub fn run_lift(cfg: &RunConfig) -> RunResult<RunSummary> {
    let mut m = RunManifest::new("lift", cfg.snapshot.clone(), &cfg.output_dir)?;
    let ModelFamily::BetaModel { nodes } = cfg.model.family else {
        return Err(RunError::validation("lift", "lifting applies to the beta model only"));
    };
    let design = build_design_matrix(&cfg.model).stage("model")?;
    let (data, edges) = load_data(cfg, &design)?;
    let graph = Graph::new(nodes, edges.unwrap_or_default()).stage("lift")?;
    let subs = decompose_initial_point(&graph, &Strategy::InducedSubgraphs(vec![cfg.lift_nodes.clone()])).stage("lift")?;
    let sub = &subs[0];
    let path = cfg.data.moves.as_ref().ok_or_else(|| RunError::validation("lift", "missing `data.move`"))?;
    let (dim, moves) = formats::parse_vectors(&formats::read_text("move", path)?)?;
    if dim != sub.column_map.len() {
        return Err(RunError::validation(
            "lift",
            format!("moves have {dim} entries, the subgraph has {} node pairs", sub.column_map.len()),
        ));
    }
    let lifted = moves
        .iter()
        .map(|mv| {
            if !sub.sub_matrix.in_kernel(mv) {
                return Err(RunError::validation("lift", "a move is not in the kernel of the subgraph design"));
            }
            let l = lift_with_map(mv, &sub.column_map, design.column_labels()).stage("lift")?;
            if !design.in_kernel(&l.0) {
                return Err(RunError::validation("lift", "lifted move leaves the parent kernel"));
            }
            Ok(design.expand(&l.0))
        })
        .collect::<RunResult<Vec<_>>>()?;
    let mut out = format!("c={} d={}\n", lifted.len(), design.expand(data.counts.as_slice()).len());
    for l in &lifted {
        out.push_str(&l.iter().map(i64::to_string).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    let outputs = vec![m.emit("lifted_moves.txt", &out)?];
    let message = format!("lifted {} moves onto {} node pairs", lifted.len(), design.d());
    m.note(message.clone());
    Ok(RunSummary { manifest: m.finish()?, outputs, message })
}

/// Pearson statistic of the observed data under its fitted expectation.
pub fn observed_statistic(problem: &Problem) -> RunResult<f64> {
    Ok(chi_square_statistic(problem.data.counts.as_slice(), &expected_counts(problem)?))
}
