//! Fiber-sampling decision process: states are fiber points, actions are
//! bounded integer combinations of lattice-basis vectors.
//!
//! An infeasible candidate leaves the walk where it is (reject-and-stay), so
//! the current state never leaves the fiber.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{combine_into, LatticeBasis};
use crate::models::DesignMatrix;
use crate::point::FiberPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpConfig {
    pub gamma: f64,
    /// Smallest allowed coefficient.
    pub c1: i64,
    /// Largest allowed coefficient.
    pub c2: i64,
    pub steps_per_episode: usize,
    /// Exact discovered points kept in memory; beyond this only digests are stored.
    pub discovered_point_cap: usize,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self { gamma: 0.99, c1: -2, c2: 2, steps_per_episode: 100, discovered_point_cap: 100_000 }
    }
}

impl MdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.c1 >= self.c2 {
            return Err(Error::Config(format!("coefficient bounds need c1 < c2, got {} and {}", self.c1, self.c2)));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::Config("steps per episode must be positive".into()));
        }
        Ok(())
    }
}

/// Distinct feasible points seen so far, tracked by 128-bit digest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscoveredSet {
    digests: BTreeSet<u128>,
    points: Vec<FiberPoint>,
    point_cap: usize,
}

impl DiscoveredSet {
    pub fn new(point_cap: usize) -> Self {
        Self { digests: BTreeSet::new(), points: Vec::new(), point_cap }
    }

    /// Returns `true` when the point was not seen before.
    pub fn insert(&mut self, p: &FiberPoint) -> bool {
        let fresh = self.digests.insert(p.digest());
        if fresh && self.points.len() < self.point_cap {
            self.points.push(p.clone());
        }
        fresh
    }

    pub fn contains(&self, p: &FiberPoint) -> bool {
        self.digests.contains(&p.digest())
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }

    /// Retained exact points, in discovery order (at most the point cap).
    pub fn points(&self) -> &[FiberPoint] {
        &self.points
    }

    /// Whether every discovered point is retained exactly.
    pub fn is_complete(&self) -> bool {
        self.points.len() == self.digests.len()
    }

    pub fn merge(&mut self, other: &DiscoveredSet) {
        for p in &other.points {
            self.insert(p);
        }
        self.digests.extend(other.digests.iter().copied());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub current: FiberPoint,
    pub discovered: DiscoveredSet,
    pub step_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// State after the step; equals the previous state unless the move was accepted.
    pub next: FiberPoint,
    pub reward: f64,
    /// The candidate `current + move` is nonnegative.
    pub feasible: bool,
    pub zero_move: bool,
    pub newly_discovered: bool,
}

impl StepOutcome {
    /// A nonzero feasible move, i.e. the walk actually moved.
    pub fn moved(&self) -> bool {
        self.feasible && !self.zero_move
    }
}

/// `R^feas + R^zero`: the sum of negative candidate coordinates, minus `d`
/// for the zero move.
pub fn step_reward(candidate: &[i64], zero_move: bool) -> f64 {
    let feas: i64 = candidate.iter().filter(|&&v| v < 0).sum();
    let zero = if zero_move { -(candidate.len() as f64) } else { 0.0 };
    feas as f64 + zero
}

/// Environment over one fiber `{x >= 0 : M x = b}`.
#[derive(Debug, Clone)]
pub struct FiberEnv<'a> {
    design: &'a DesignMatrix,
    basis: &'a LatticeBasis,
    marginals: Vec<i64>,
    config: MdpConfig,
    state: EnvState,
}

impl<'a> FiberEnv<'a> {
    pub fn new(design: &'a DesignMatrix, basis: &'a LatticeBasis, start: FiberPoint, config: MdpConfig) -> Result<Self> {
        config.validate()?;
        if basis.dim() != design.d() {
            return Err(Error::Contract("basis dimension differs from the design".into()));
        }
        if start.len() != design.d() {
            return Err(Error::Contract("start point has the wrong length".into()));
        }
        let marginals = design.marginals(&start);
        let mut discovered = DiscoveredSet::new(config.discovered_point_cap);
        discovered.insert(&start);
        Ok(Self {
            design,
            basis,
            marginals,
            config,
            state: EnvState { current: start, discovered, step_count: 0 },
        })
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn current(&self) -> &FiberPoint {
        &self.state.current
    }

    pub fn marginals(&self) -> &[i64] {
        &self.marginals
    }

    pub fn config(&self) -> &MdpConfig {
        &self.config
    }

    pub fn basis(&self) -> &LatticeBasis {
        self.basis
    }

    pub fn design(&self) -> &DesignMatrix {
        self.design
    }

    /// Moves to `start`, keeping the discovered set.
    pub fn reset(&mut self, start: FiberPoint) -> Result<()> {
        if !self.design.is_feasible(&start, &self.marginals) {
            return Err(Error::Contract("reset point is not in the fiber".into()));
        }
        self.state.discovered.insert(&start);
        self.state.current = start;
        self.state.step_count = 0;
        Ok(())
    }

    pub fn step(&mut self, coeffs: &[i64]) -> Result<StepOutcome> {
        env_step(&mut self.state, coeffs, self.basis, &self.config)
    }
}

/// Applies the move `sum coeffs[i] l_i` to the state.
pub fn env_step(state: &mut EnvState, coeffs: &[i64], basis: &LatticeBasis, config: &MdpConfig) -> Result<StepOutcome> {
    if let Some(&bad) = coeffs.iter().find(|&&a| a < config.c1 || a > config.c2) {
        return Err(Error::Contract(format!(
            "coefficient {bad} outside [{}, {}]",
            config.c1, config.c2
        )));
    }
    let mut delta = alloc::vec![0i64; basis.dim()];
    combine_into(coeffs, basis, &mut delta)?;
    let zero_move = delta.iter().all(|&v| v == 0);
    let candidate: Vec<i64> = state.current.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let reward = step_reward(&candidate, zero_move);
    let feasible = candidate.iter().all(|&v| v >= 0);
    state.step_count += 1;
    let mut newly_discovered = false;
    if feasible && !zero_move {
        let next = FiberPoint::from_vec_unchecked(candidate);
        newly_discovered = state.discovered.insert(&next);
        state.current = next;
    }
    Ok(StepOutcome { next: state.current.clone(), reward, feasible, zero_move, newly_discovered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_design_matrix, ModelFamily, ModelSpec};
    use alloc::vec;

    fn setup() -> (DesignMatrix, LatticeBasis) {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::Independence { rows: 2, cols: 2 })).unwrap();
        // basis written as (-1, 1, 1, -1) so coefficient +1 gives the move in the examples
        let b = LatticeBasis::from_dense(4, &[vec![-1, 1, 1, -1]]).unwrap();
        (m, b)
    }

    fn point(v: &[i64]) -> FiberPoint {
        FiberPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn feasible_move() {
        let (m, b) = setup();
        let mut env = FiberEnv::new(&m, &b, point(&[1, 0, 0, 1]), MdpConfig::default()).unwrap();
        let out = env.step(&[1]).unwrap();
        assert_eq!(out.next.as_slice(), &[0, 1, 1, 0]);
        assert_eq!(out.reward, 0.0);
        assert!(out.feasible && out.newly_discovered && out.moved());
        assert_eq!(env.state().discovered.len(), 2);
    }

    #[test]
    fn zero_move_penalty() {
        let (m, b) = setup();
        let mut env = FiberEnv::new(&m, &b, point(&[1, 0, 0, 1]), MdpConfig::default()).unwrap();
        let out = env.step(&[0]).unwrap();
        assert_eq!(out.reward, -4.0);
        assert_eq!(out.next.as_slice(), &[1, 0, 0, 1]);
        assert!(!out.moved());
    }

    #[test]
    fn infeasible_move_stays() {
        let (m, b) = setup();
        let mut env = FiberEnv::new(&m, &b, point(&[0, 1, 1, 0]), MdpConfig::default()).unwrap();
        let out = env.step(&[1]).unwrap();
        assert_eq!(out.reward, -2.0);
        assert!(!out.feasible);
        assert_eq!(out.next.as_slice(), &[0, 1, 1, 0]);
        assert_eq!(env.state().step_count, 1);
    }

    #[test]
    fn out_of_bounds_coefficient() {
        let (m, b) = setup();
        let mut env = FiberEnv::new(&m, &b, point(&[1, 0, 0, 1]), MdpConfig::default()).unwrap();
        assert!(matches!(env.step(&[3]), Err(Error::Contract(_))));
    }

    #[test]
    fn reset_semantics() {
        let (m, b) = setup();
        let start = point(&[1, 0, 0, 1]);
        let mut env = FiberEnv::new(&m, &b, start.clone(), MdpConfig::default()).unwrap();
        env.step(&[1]).unwrap();
        let before = env.state().discovered.len();
        env.reset(start.clone()).unwrap();
        let once = env.state().clone();
        env.reset(start.clone()).unwrap();
        assert_eq!(env.state(), &once);
        assert_eq!(env.current(), &start);
        assert_eq!(env.state().step_count, 0);
        assert!(env.state().discovered.len() >= before);
        assert!(matches!(env.reset(point(&[2, 0, 0, 1])), Err(Error::Contract(_))));
    }

    #[test]
    fn config_validation() {
        assert!(MdpConfig { gamma: 1.0, ..MdpConfig::default() }.validate().is_err());
        assert!(MdpConfig { c1: 2, c2: 2, ..MdpConfig::default() }.validate().is_err());
    }

    #[test]
    fn discovered_cap_keeps_digests() {
        let mut s = DiscoveredSet::new(1);
        assert!(s.insert(&point(&[1, 0])));
        assert!(s.insert(&point(&[0, 1])));
        assert!(!s.insert(&point(&[0, 1])));
        assert_eq!(s.len(), 2);
        assert_eq!(s.points().len(), 1);
        assert!(!s.is_complete());
    }
}
