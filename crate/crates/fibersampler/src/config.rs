//! Flat `key=value` run configuration with dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fibersampler_core::agent::{Architecture, StepSchedule, TrainConfig};
use fibersampler_core::lattice::Strategy;
use fibersampler_core::mdp::MdpConfig;
use fibersampler_core::nn::Activation;
use fibersampler_core::sampling::{ChainKind, GofConfig};
use fibersampler_core::{ModelFamily, ModelSpec};

use crate::error::{RunError, RunResult};

const STAGE: &str = "config";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Sample,
    Test,
    Enumerate,
    Lift,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Sample => "sample",
            Command::Test => "test",
            Command::Enumerate => "enumerate",
            Command::Lift => "lift",
        }
    }
}

/// How the beta-model lattice basis is assembled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decomposition {
    None,
    Split(Strategy),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataPaths {
    pub table: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub basis: Option<PathBuf>,
    pub moves: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelSpec,
    pub data: DataPaths,
    pub mdp: MdpConfig,
    pub train: TrainConfig,
    pub arch: Architecture,
    /// `None` keeps the size-based default.
    pub mask_k: Option<Option<usize>>,
    pub decomposition: Decomposition,
    pub sample_kind: ChainKind,
    pub sample_steps: usize,
    pub sample_stride: usize,
    pub gof: GofConfig,
    pub bins: usize,
    pub enumerate_cap: usize,
    /// 0-based parent node ids of the subgraph a lifted move lives on.
    pub lift_nodes: Vec<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Effective key/value pairs after defaults and overrides.
    pub snapshot: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "model.family",
    "model.dims",
    "model.nodes",
    "model.structural_zeros",
    "data.table",
    "data.edges",
    "data.policy",
    "data.basis",
    "data.move",
    "mdp.gamma",
    "mdp.c1",
    "mdp.c2",
    "mdp.steps_per_episode",
    "mdp.point_cap",
    "train.lambda",
    "train.rollout",
    "train.episodes",
    "train.actor_scale",
    "train.actor_exponent",
    "train.critic_scale",
    "train.critic_exponent",
    "train.swap_timescales",
    "train.actor_clip",
    "train.critic_clip",
    "train.radius",
    "train.hidden",
    "train.activation",
    "train.mask_k",
    "decompose.strategy",
    "sample.kind",
    "sample.steps",
    "sample.stride",
    "test.chains",
    "test.chain_length",
    "test.chain_steps",
    "test.bins",
    "enumerate.cap",
    "lift.sub_nodes",
    "output.dir",
    "seed",
];

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> RunResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RunError::validation(STAGE, format!("line {}: expected key=value", no + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(RunError::validation(STAGE, format!("line {}: unknown key `{k}`", no + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(RunError::validation(STAGE, format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(map)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> RunResult<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| RunError::validation(STAGE, format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn required(&self, key: &str) -> RunResult<&str> {
        self.get(key).ok_or_else(|| RunError::validation(STAGE, format!("missing `{key}`")))
    }

    fn list(&self, key: &str) -> RunResult<Vec<usize>> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| RunError::validation(STAGE, format!("`{key}`: `{t}` is not an index"))))
                .collect(),
        }
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> RunResult<Option<T>> {
        match self.get(key) {
            None | Some("none") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| RunError::validation(STAGE, format!("`{key}`: cannot parse `{v}`"))),
        }
    }
}

fn parse_dims(s: &str) -> RunResult<Vec<usize>> {
    s.split('x')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| RunError::validation(STAGE, format!("`model.dims` must read AxB or AxBxC, found `{s}`")))
}

fn parse_model(r: &Reader<'_>) -> RunResult<ModelSpec> {
    let family = match r.required("model.family")? {
        "independence" => match parse_dims(r.required("model.dims")?)?.as_slice() {
            &[rows, cols] => ModelFamily::Independence { rows, cols },
            _ => return Err(RunError::validation(STAGE, "the independence model needs two dimensions")),
        },
        "all_two_way" => match parse_dims(r.required("model.dims")?)?.as_slice() {
            &[a, b, c] => ModelFamily::AllTwoWay { dims: [a, b, c] },
            _ => return Err(RunError::validation(STAGE, "the all-two-way model needs three dimensions")),
        },
        "beta" => ModelFamily::BetaModel { nodes: r.parse("model.nodes", 0usize)? },
        other => {
            return Err(RunError::validation(
                STAGE,
                format!("`model.family` must be independence, all_two_way or beta, found `{other}`"),
            ))
        }
    };
    let spec = ModelSpec::with_structural_zeros(family, r.list("model.structural_zeros")?);
    spec.validate().map_err(|e| RunError::from_core(STAGE, e))?;
    Ok(spec)
}

fn parse_strategy(s: Option<&str>) -> RunResult<Decomposition> {
    let bad = |s: &str| {
        RunError::validation(
            STAGE,
            format!("`decompose.strategy` must be none, components, kcore:<k>, bridges or subgraphs:<a b;c d>, found `{s}`"),
        )
    };
    let Some(s) = s else { return Ok(Decomposition::None) };
    let strategy = match s.split_once(':') {
        None if s == "none" => return Ok(Decomposition::None),
        None if s == "components" => Strategy::ConnectedComponents,
        None if s == "bridges" => Strategy::BridgeCuts,
        Some(("kcore", k)) => Strategy::KCore(k.trim().parse().map_err(|_| bad(s))?),
        Some(("subgraphs", sets)) => Strategy::InducedSubgraphs(
            sets.split(';')
                .map(|set| {
                    set.split_whitespace()
                        .map(|t| t.parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1))
                        .collect::<Option<Vec<_>>>()
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad(s))?,
        ),
        _ => return Err(bad(s)),
    };
    Ok(Decomposition::Split(strategy))
}

impl RunConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(command: Command, path: &Path, seed: Option<u64>, out: Option<&Path>) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(STAGE, path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut map = parse_pairs(&text)?;
        if let Some(s) = seed {
            map.insert("seed".into(), s.to_string());
        }
        if let Some(o) = out {
            map.insert("output.dir".into(), o.display().to_string());
        }
        Self::from_pairs(command, map, base, out)
    }

    pub fn from_pairs(
        command: Command,
        map: BTreeMap<String, String>,
        base: &Path,
        out: Option<&Path>,
    ) -> RunResult<Self> {
        let r = Reader { map: &map };
        let resolve = |key: &str| r.get(key).map(|p| base.join(p));
        let model = parse_model(&r)?;

        let defaults = MdpConfig::default();
        let mdp = MdpConfig {
            gamma: r.parse("mdp.gamma", defaults.gamma)?,
            c1: r.parse("mdp.c1", defaults.c1)?,
            c2: r.parse("mdp.c2", defaults.c2)?,
            steps_per_episode: r.parse("mdp.steps_per_episode", defaults.steps_per_episode)?,
            discovered_point_cap: r.parse("mdp.point_cap", defaults.discovered_point_cap)?,
        };
        mdp.validate().map_err(|e| RunError::from_core(STAGE, e))?;

        let seed = r.parse("seed", 0u64)?;
        let td = TrainConfig::default();
        let mut train = TrainConfig {
            lambda: r.parse("train.lambda", td.lambda)?,
            rollout: r.parse("train.rollout", td.rollout)?,
            episodes: r.parse("train.episodes", td.episodes)?,
            actor_schedule: StepSchedule {
                scale: r.parse("train.actor_scale", td.actor_schedule.scale)?,
                exponent: r.parse("train.actor_exponent", td.actor_schedule.exponent)?,
            },
            critic_schedule: StepSchedule {
                scale: r.parse("train.critic_scale", td.critic_schedule.scale)?,
                exponent: r.parse("train.critic_exponent", td.critic_schedule.exponent)?,
            },
            param_radius: r.parse("train.radius", td.param_radius)?,
            actor_clip: r.opt("train.actor_clip")?,
            critic_clip: r.opt("train.critic_clip")?,
            seed: seed.wrapping_add(1),
        };
        if r.parse("train.swap_timescales", false)? {
            train = train.swapped_timescales();
        }
        train.validate().map_err(|e| RunError::from_core(STAGE, e))?;

        let mut arch = Architecture::default();
        if r.get("train.hidden").is_some() {
            arch.hidden = r.list("train.hidden")?;
        }
        if let Some(a) = r.get("train.activation") {
            arch.activation = Activation::from_name(a)
                .ok_or_else(|| RunError::validation(STAGE, format!("`train.activation`: unknown activation `{a}`")))?;
        }
        let mask_k = match r.get("train.mask_k") {
            None | Some("auto") => None,
            Some("none") => Some(None),
            Some(_) => Some(Some(r.parse("train.mask_k", 0usize)?)),
        };

        let sample_kind = match r.get("sample.kind").unwrap_or("uniform") {
            "explore" => ChainKind::Explore,
            "uniform" => ChainKind::Uniform,
            other => {
                return Err(RunError::validation(STAGE, format!("`sample.kind` must be explore or uniform, found `{other}`")))
            }
        };
        let gof = GofConfig {
            chains: r.parse("test.chains", 100usize)?,
            chain_length: r.parse("test.chain_length", 100usize)?,
            chain_steps: r.opt("test.chain_steps")?,
            seed,
        };
        gof.validate().map_err(|e| RunError::from_core(STAGE, e))?;
        let bins = r.parse("test.bins", 20usize)?;
        if bins == 0 {
            return Err(RunError::validation(STAGE, "`test.bins` must be positive"));
        }
        let lift_nodes = r.list("lift.sub_nodes")?;
        if lift_nodes.contains(&0) {
            return Err(RunError::validation(STAGE, "`lift.sub_nodes` are 1-based"));
        }

        let output_dir = match out {
            Some(p) => p.to_path_buf(),
            None => resolve("output.dir").unwrap_or_else(|| base.join("out")),
        };
        let cfg = RunConfig {
            command,
            model,
            data: DataPaths {
                table: resolve("data.table"),
                edges: resolve("data.edges"),
                policy: resolve("data.policy"),
                basis: resolve("data.basis"),
                moves: resolve("data.move"),
            },
            mdp,
            train,
            arch,
            mask_k,
            decomposition: parse_strategy(r.get("decompose.strategy"))?,
            sample_kind,
            sample_steps: r.parse("sample.steps", 10_000usize)?,
            sample_stride: r.parse("sample.stride", 1usize)?,
            gof,
            bins,
            enumerate_cap: r.parse("enumerate.cap", 1_000_000usize)?,
            lift_nodes: lift_nodes.into_iter().map(|v| v - 1).collect(),
            output_dir,
            seed,
            snapshot: map,
        };
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> RunResult<()> {
        let is_beta = matches!(self.model.family, ModelFamily::BetaModel { .. });
        let need = |p: &Option<PathBuf>, key: &str| -> RunResult<()> {
            match p {
                None => Err(RunError::validation(STAGE, format!("`{}` needs `{key}`", self.command.name()))),
                Some(p) if !p.is_file() => {
                    Err(RunError::validation(STAGE, format!("`{key}`: {} does not exist", p.display())))
                }
                Some(_) => Ok(()),
            }
        };
        match self.command {
            Command::Lift => {
                need(&self.data.edges, "data.edges")?;
                need(&self.data.moves, "data.move")?;
            }
            _ if is_beta => need(&self.data.edges, "data.edges")?,
            _ => need(&self.data.table, "data.table")?,
        }
        if matches!(self.command, Command::Sample | Command::Test) {
            need(&self.data.policy, "data.policy")?;
        }
        if self.data.basis.is_some() {
            need(&self.data.basis, "data.basis")?;
        }
        Ok(())
    }
}
