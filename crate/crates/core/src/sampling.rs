//! Deploying a trained policy: fiber exploration, Metropolis-Hastings
//! sampling towards the uniform distribution, and Besag-Clifford p-values.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::ActorCritic;
use crate::error::{Error, Result};
use crate::lattice::{combine_into, lift_with_map, LatticeBasis, SubProblem};
use crate::mdp::DiscoveredSet;
use crate::models::chi_square_statistic;
use crate::point::{FiberPoint, Label};

/// Relative slack when comparing sampled and observed statistics.
pub const STAT_TOLERANCE: f64 = 1e-9;
/// Default exact-point cap of the discovered set kept while sampling.
pub const DEFAULT_POINT_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSample {
    pub points: Vec<FiberPoint>,
    /// Pearson statistic per point; `NaN` when no expected counts were given.
    pub statistics: Vec<f64>,
    pub chain_id: u64,
    pub seed: u64,
}

/// Raised when a chain goes `window` proposals without moving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StuckWarning {
    /// Proposal index at which the window was first exhausted.
    pub at_step: usize,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// Accept every feasible proposal.
    Explore,
    /// Metropolis-Hastings correction towards the uniform distribution.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub kind: ChainKind,
    pub steps: usize,
    /// Record the state after every `stride`-th proposal; 0 records nothing
    /// beyond the start.
    pub stride: usize,
    pub record_start: bool,
    pub chain_id: u64,
    pub seed: u64,
    pub point_cap: usize,
}

impl ChainSpec {
    pub fn new(kind: ChainKind, steps: usize) -> Self {
        Self { kind, steps, stride: 1, record_start: true, chain_id: 0, seed: 0, point_cap: DEFAULT_POINT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub sample: FiberSample,
    pub discovered: DiscoveredSet,
    pub stuck: Option<StuckWarning>,
    /// Proposals that moved the chain.
    pub moves: usize,
    /// Proposals rejected for leaving the nonnegative orthant.
    pub infeasible: usize,
    pub final_state: FiberPoint,
}

impl ChainOutcome {
    pub fn discovered_count(&self) -> usize {
        self.discovered.len()
    }
}

fn statistic(point: &FiberPoint, expected: Option<&[f64]>) -> f64 {
    match expected {
        Some(e) => chi_square_statistic(point, e),
        None => f64::NAN,
    }
}

/// Runs one chain driven by the policy, with the generator supplied by the caller.
pub fn run_chain_with<R: Rng + ?Sized>(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    start: &FiberPoint,
    expected: Option<&[f64]>,
    spec: &ChainSpec,
    rng: &mut R,
) -> Result<ChainOutcome> {
    let d = basis.dim();
    if start.len() != d || ac.state_dim() != d || ac.num_coefficients() != basis.len() {
        return Err(Error::Contract("policy, basis and start point disagree in shape".into()));
    }
    if let Some(e) = expected {
        if e.len() != d {
            return Err(Error::Contract("expected counts have the wrong length".into()));
        }
    }
    let window = 10 * d.max(1);
    let mut discovered = DiscoveredSet::new(spec.point_cap);
    discovered.insert(start);
    let mut points = Vec::new();
    let mut statistics = Vec::new();
    if spec.record_start {
        points.push(start.clone());
        statistics.push(statistic(start, expected));
    }
    let mut current = start.clone();
    let mut head = ac.head(&current)?;
    let mut delta = vec![0i64; d];
    let mut idle = 0usize;
    let mut stuck = None;
    let mut moves = 0;
    let mut infeasible = 0;
    for step in 1..=spec.steps {
        let continuous: Vec<f64> = head
            .mean
            .iter()
            .zip(&head.sigma)
            .map(|(&m, &s)| m + s * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let coeffs = ac.discretize(&continuous);
        delta.iter_mut().for_each(|v| *v = 0);
        combine_into(&coeffs, basis, &mut delta)?;
        let mut moved = false;
        if delta.iter().any(|&v| v != 0) {
            let candidate: Vec<i64> = current.iter().zip(&delta).map(|(a, b)| a + b).collect();
            if candidate.iter().all(|&v| v >= 0) {
                let candidate = FiberPoint::from_vec_unchecked(candidate);
                let accept = match spec.kind {
                    ChainKind::Explore => Some(None),
                    ChainKind::Uniform => {
                        let next_head = ac.head(&candidate)?;
                        let reverse: Vec<i64> = coeffs.iter().map(|a| -a).collect();
                        let log_ratio = ac.cell_log_prob(&next_head, &reverse) - ac.cell_log_prob(&head, &coeffs);
                        let u: f64 = rng.random();
                        if log_ratio >= 0.0 || libm::log(u) < log_ratio {
                            Some(Some(next_head))
                        } else {
                            None
                        }
                    }
                };
                if let Some(next_head) = accept {
                    head = match next_head {
                        Some(h) => h,
                        None => ac.head(&candidate)?,
                    };
                    discovered.insert(&candidate);
                    current = candidate;
                    moved = true;
                }
            } else {
                infeasible += 1;
            }
        }
        if moved {
            moves += 1;
            idle = 0;
        } else {
            idle += 1;
            if idle >= window && stuck.is_none() {
                stuck = Some(StuckWarning { at_step: step, window });
            }
        }
        if spec.stride > 0 && step % spec.stride == 0 {
            statistics.push(statistic(&current, expected));
            points.push(current.clone());
        }
    }
    Ok(ChainOutcome {
        sample: FiberSample { points, statistics, chain_id: spec.chain_id, seed: spec.seed },
        discovered,
        stuck,
        moves,
        infeasible,
        final_state: current,
    })
}

/// Runs one chain with a generator seeded from `spec.seed`.
pub fn run_chain(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    start: &FiberPoint,
    expected: Option<&[f64]>,
    spec: &ChainSpec,
) -> Result<ChainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    run_chain_with(ac, basis, start, expected, spec, &mut rng)
}

/// Proposes `steps` policy moves, keeping every feasible one and recording
/// the state after each proposal.
pub fn explore<R: Rng + ?Sized>(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    start: &FiberPoint,
    steps: usize,
    rng: &mut R,
) -> Result<ChainOutcome> {
    run_chain_with(ac, basis, start, None, &ChainSpec::new(ChainKind::Explore, steps), rng)
}

/// Metropolis-Hastings chain whose stationary law is uniform on the fiber.
pub fn mh_uniform<R: Rng + ?Sized>(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    start: &FiberPoint,
    steps: usize,
    rng: &mut R,
) -> Result<ChainOutcome> {
    run_chain_with(ac, basis, start, None, &ChainSpec::new(ChainKind::Uniform, steps), rng)
}

/// `(1 + #{s >= observed}) / (n + 1)`, with a small relative slack on ties.
pub fn rank_p_value(observed: f64, sampled: &[f64]) -> f64 {
    let slack = STAT_TOLERANCE * observed.abs().max(1.0);
    let hits = sampled.iter().filter(|&&s| s >= observed - slack || (observed.is_infinite() && s == observed)).count();
    (1 + hits) as f64 / (sampled.len() + 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofTestResult {
    pub observed_statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
    pub per_chain_p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTest {
    pub chain_id: u64,
    pub seed: u64,
    pub result: GofTestResult,
    /// Sample in chain order with the observed point removed from slot
    /// `observed_position`.
    pub sample: FiberSample,
    pub observed_position: usize,
    pub stuck: Option<StuckWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesagClifford {
    pub chains: Vec<ChainTest>,
    /// Pooled over every chain's sample.
    pub summary: GofTestResult,
}

impl BesagClifford {
    pub fn p_values(&self) -> Vec<f64> {
        self.chains.iter().map(|c| c.result.p_value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GofConfig {
    pub chains: usize,
    pub chain_length: usize,
    /// Proposals per chain; defaults to `100 * chain_length`.
    pub chain_steps: Option<usize>,
    pub seed: u64,
}

impl GofConfig {
    pub fn steps(&self) -> usize {
        self.chain_steps.unwrap_or(100 * self.chain_length)
    }

    pub fn stride(&self) -> usize {
        (self.steps() / self.chain_length.max(1)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.chain_length == 0 {
            return Err(Error::Validation("chains and chain length must be positive".into()));
        }
        Ok(())
    }
}

/// One exchangeable sample of `chain_length` points, seeded with
/// `seed + chain_id`.
///
/// The observed point is placed at a uniform position `nu` among the
/// `chain_length + 1` thinned slots: `nu` points come from one branch of the
/// (reversible) uniform chain started at the observed point, the remaining
/// ones from an independent second branch. Under the null the observed
/// point and the sample are then exchangeable.
pub fn besag_clifford_chain(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    observed: &FiberPoint,
    expected: &[f64],
    cfg: &GofConfig,
    chain_id: u64,
) -> Result<ChainTest> {
    cfg.validate()?;
    let stride = cfg.stride();
    let seed = cfg.seed.wrapping_add(chain_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = rng.random_range(0..=cfg.chain_length);
    let branch = |points: usize, rng: &mut ChaCha8Rng| {
        let spec = ChainSpec {
            kind: ChainKind::Uniform,
            steps: stride * points,
            stride,
            record_start: false,
            chain_id,
            seed,
            point_cap: 0,
        };
        run_chain_with(ac, basis, observed, Some(expected), &spec, rng)
    };
    let back = branch(nu, &mut rng)?;
    let fwd = branch(cfg.chain_length - nu, &mut rng)?;
    let mut points = back.sample.points;
    let mut statistics = back.sample.statistics;
    points.reverse();
    statistics.reverse();
    points.extend(fwd.sample.points);
    statistics.extend(fwd.sample.statistics);
    let obs = chi_square_statistic(observed, expected);
    let p = rank_p_value(obs, &statistics);
    Ok(ChainTest {
        chain_id,
        seed,
        result: GofTestResult {
            observed_statistic: obs,
            p_value: p,
            sample_size: statistics.len(),
            per_chain_p_values: vec![p],
        },
        sample: FiberSample { points, statistics, chain_id, seed },
        observed_position: nu,
        stuck: back.stuck.or(fwd.stuck),
    })
}

/// Collects per-chain tests into the pooled summary.
pub fn summarize(chains: Vec<ChainTest>) -> Result<BesagClifford> {
    let first = chains.first().ok_or_else(|| Error::Validation("no chains".into()))?;
    let obs = first.result.observed_statistic;
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.sample.statistics.iter().copied()).collect();
    let summary = GofTestResult {
        observed_statistic: obs,
        p_value: rank_p_value(obs, &pooled),
        sample_size: pooled.len(),
        per_chain_p_values: chains.iter().map(|c| c.result.p_value).collect(),
    };
    Ok(BesagClifford { chains, summary })
}

/// Runs `cfg.chains` chains one after another.
pub fn besag_clifford_pvalues(
    ac: &ActorCritic,
    basis: &LatticeBasis,
    observed: &FiberPoint,
    expected: &[f64],
    cfg: &GofConfig,
) -> Result<BesagClifford> {
    let chains = (0..cfg.chains as u64)
        .map(|id| besag_clifford_chain(ac, basis, observed, expected, cfg, id))
        .collect::<Result<Vec<_>>>()?;
    summarize(chains)
}

/// Lattice basis of the parent made of every subproblem basis vector lifted
/// to the parent labels. Subproblems use disjoint edge sets, so the lifted
/// vectors stay independent.
pub fn lifted_basis(
    subproblems: &[(SubProblem, LatticeBasis)],
    parent_labels: &[Label],
) -> Result<LatticeBasis> {
    let mut vectors = Vec::new();
    for (sub, basis) in subproblems {
        if basis.dim() != sub.column_map.len() {
            return Err(Error::Lifting("basis does not match its subproblem".into()));
        }
        for i in 0..basis.len() {
            vectors.push(lift_with_map(&basis.dense(i), &sub.column_map, parent_labels)?.0);
        }
    }
    LatticeBasis::from_dense(parent_labels.len(), &vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Architecture;
    use crate::lattice::compute_lattice_basis;
    use crate::mdp::MdpConfig;
    use crate::models::{build_design_matrix, ModelFamily, ModelSpec};
    use crate::nn::Activation;

    fn zero_policy(d: usize, c: usize) -> ActorCritic {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Architecture { hidden: vec![4], activation: Activation::Tanh };
        let mut ac = ActorCritic::new(d, c, &arch, &MdpConfig::default(), 1.0, &mut rng).unwrap();
        ac.feature_net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        ac.actor_head.params_mut().iter_mut().for_each(|p| *p = 0.0);
        ac
    }

    fn two_point() -> (LatticeBasis, FiberPoint) {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::Independence { rows: 2, cols: 2 })).unwrap();
        (compute_lattice_basis(&m).unwrap(), FiberPoint::new(vec![1, 0, 0, 1]).unwrap())
    }

    #[test]
    fn zero_steps_record_only_start() {
        let (b, start) = two_point();
        let ac = zero_policy(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = explore(&ac, &b, &start, 0, &mut rng).unwrap();
        assert_eq!(out.sample.points, vec![start]);
        assert_eq!(out.discovered_count(), 1);
    }

    #[test]
    fn two_point_fiber_is_found() {
        let (b, start) = two_point();
        let ac = zero_policy(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = explore(&ac, &b, &start, 1000, &mut rng).unwrap();
        assert_eq!(out.discovered_count(), 2);
        assert_eq!(out.sample.points.len(), 1001);
    }

    #[test]
    fn symmetric_proposal_has_unit_ratio() {
        let (_, start) = two_point();
        let ac = zero_policy(4, 1);
        let h = ac.head(&start).unwrap();
        let moved = FiberPoint::new(vec![0, 1, 1, 0]).unwrap();
        let h2 = ac.head(&moved).unwrap();
        for a in -2..=2 {
            assert_eq!(ac.cell_log_prob(&h, &[a]), ac.cell_log_prob(&h2, &[-a]));
        }
    }

    #[test]
    fn rank_formula() {
        let sampled: Vec<f64> = (0..99).map(|i| i as f64).collect();
        assert_eq!(rank_p_value(1000.0, &sampled), 0.01);
        assert_eq!(rank_p_value(3.0, &[3.0; 10]), 1.0);
        let p = rank_p_value(5.0, &[1.0, 6.0]);
        assert_eq!(p, 2.0 / 3.0);
        // one more statistic below the observed never raises p
        assert!(rank_p_value(5.0, &[1.0, 6.0, 2.0]) <= p);
        assert_eq!(rank_p_value(f64::INFINITY, &[f64::INFINITY]), 1.0);
    }

    #[test]
    fn single_short_chain_p_support() {
        let (b, start) = two_point();
        let ac = zero_policy(4, 1);
        let expected = [0.5; 4];
        let cfg = GofConfig { chains: 1, chain_length: 1, chain_steps: None, seed: 9 };
        let r = besag_clifford_pvalues(&ac, &b, &start, &expected, &cfg).unwrap();
        let p = r.summary.p_value;
        assert!(p == 0.5 || p == 1.0);
        assert_eq!(r.chains[0].seed, 9);
    }

    #[test]
    fn chains_are_reproducible() {
        let (b, start) = two_point();
        let ac = zero_policy(4, 1);
        let spec = ChainSpec { seed: 4, ..ChainSpec::new(ChainKind::Uniform, 500) };
        let (a, c) = (run_chain(&ac, &b, &start, None, &spec).unwrap(), run_chain(&ac, &b, &start, None, &spec).unwrap());
        assert_eq!(a.sample.points, c.sample.points);
        assert_eq!(a.discovered, c.discovered);
        assert!(a.sample.statistics.iter().all(|s| s.is_nan()));
    }
}
