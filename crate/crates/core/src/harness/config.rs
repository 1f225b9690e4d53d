//! Spec strings and the flat key=value experiment config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::domain::{Dag, DecisionSet, ExplicitSet};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn resolve(base: Option<&Path>, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn parse_num<T: FromStr>(what: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("invalid {what} `{s}`")))
}

/// `explicit:<path>`, `mset:<d>:<m>`, `multitask:<d1>,<d2>,...` or `dag:<path>`.
/// Relative paths are taken relative to `base`.
pub fn parse_set_spec(spec: &str, base: Option<&Path>) -> Result<DecisionSet> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Parse(format!("invalid set spec `{spec}`")))?;
    match kind {
        "explicit" => Ok(DecisionSet::Explicit(ExplicitSet::parse(&read(&resolve(base, rest))?)?)),
        "mset" => {
            let (d, m) = rest.split_once(':').ok_or_else(|| Error::Parse(format!("expected mset:<d>:<m>, got `{spec}`")))?;
            DecisionSet::mset(parse_num("d", d)?, parse_num("m", m)?)
        }
        "multitask" => {
            let blocks = rest.split(',').map(|b| parse_num("block size", b)).collect::<Result<Vec<usize>>>()?;
            DecisionSet::multitask(blocks)
        }
        "dag" => DecisionSet::dag_paths(Dag::parse(&read(&resolve(base, rest))?)?),
        other => Err(Error::Parse(format!("unknown decision set kind `{other}`"))),
    }
}

/// Splits `kind:pos1:pos2:key=value:...` into positional and keyed parts.
fn split_spec(spec: &str) -> (&str, Vec<&str>, Vec<(&str, &str)>) {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or("");
    let mut positional = Vec::new();
    let mut options = Vec::new();
    for p in parts {
        match p.split_once('=') {
            Some((k, v)) => options.push((k, v)),
            None => positional.push(p),
        }
    }
    (kind, positional, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Hedge,
    HedgeDag,
    OmdMSet,
    OmdDilated,
    OmdEntropyDag,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Hedge => "hedge",
            LearnerKind::HedgeDag => "hedge-dag",
            LearnerKind::OmdMSet => "omd-mset",
            LearnerKind::OmdDilated => "omd-dilated",
            LearnerKind::OmdEntropyDag => "omd-entropy-dag",
        }
    }

    /// Whether the learner's iterates coincide with Hedge over X.
    pub fn is_hedge_equivalent(self) -> bool {
        matches!(self, LearnerKind::Hedge | LearnerKind::HedgeDag | LearnerKind::OmdDilated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub eta: Option<f64>,
}

impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, positional, options) = split_spec(spec.trim());
        let kind = match kind {
            "hedge" => LearnerKind::Hedge,
            "hedge-dag" => LearnerKind::HedgeDag,
            "omd-mset" => LearnerKind::OmdMSet,
            "omd-dilated" => LearnerKind::OmdDilated,
            "omd-entropy-dag" => LearnerKind::OmdEntropyDag,
            other => return Err(Error::Parse(format!("unknown learner `{other}`"))),
        };
        if !positional.is_empty() {
            return Err(Error::Parse(format!("unexpected learner argument in `{spec}`")));
        }
        let mut eta = None;
        for (k, v) in options {
            match k {
                "eta" => eta = Some(parse_num::<f64>("eta", v)?),
                other => return Err(Error::Parse(format!("unknown learner option `{other}`"))),
            }
        }
        if eta.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return Err(Error::Parse(format!("learning rate must be finite and ≥ 0 in `{spec}`")));
        }
        Ok(LearnerSpec { kind, eta })
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.as_str())?;
        if let Some(eta) = self.eta {
            write!(f, ":eta={eta}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryKind {
    Universal { k: Option<usize> },
    MSetLb,
    HedgeKiller,
    MultitaskPhases,
    DagLayered { d: usize, n_paths: u128 },
    Constant(Vec<f64>),
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    pub seed: Option<u64>,
}

impl AdversarySpec {
    pub fn new(kind: AdversaryKind) -> Self {
        AdversarySpec { kind, seed: None }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AdversaryKind::Universal { .. } => "universal",
            AdversaryKind::MSetLb => "mset-lb",
            AdversaryKind::HedgeKiller => "hedge-killer",
            AdversaryKind::MultitaskPhases => "multitask-phases",
            AdversaryKind::DagLayered { .. } => "dag-layered",
            AdversaryKind::Constant(_) => "constant",
            AdversaryKind::Random => "random",
        }
    }

    /// Parses `universal`, `mset-lb`, `hedge-killer`, `multitask-phases`,
    /// `dag-layered:<d>:<N>`, `constant:<path>` or `random`, each with an
    /// optional `:seed=<u64>` (and `:k=<int>` for `universal`).
    pub fn parse(spec: &str, base: Option<&Path>) -> Result<Self> {
        let (kind, positional, options) = split_spec(spec.trim());
        let mut seed = None;
        let mut k = None;
        for (key, v) in options {
            match key {
                "seed" => seed = Some(parse_num::<u64>("seed", v)?),
                "k" if kind == "universal" => k = Some(parse_num::<usize>("k", v)?),
                other => return Err(Error::Parse(format!("unknown adversary option `{other}`"))),
            }
        }
        let expect_args = |n: usize| {
            if positional.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("adversary `{kind}` takes {n} argument(s), got `{spec}`")))
            }
        };
        let kind = match kind {
            "universal" => {
                expect_args(0)?;
                AdversaryKind::Universal { k }
            }
            "mset-lb" => {
                expect_args(0)?;
                AdversaryKind::MSetLb
            }
            "hedge-killer" => {
                expect_args(0)?;
                AdversaryKind::HedgeKiller
            }
            "multitask-phases" => {
                expect_args(0)?;
                AdversaryKind::MultitaskPhases
            }
            "random" => {
                expect_args(0)?;
                AdversaryKind::Random
            }
            "dag-layered" => {
                expect_args(2)?;
                AdversaryKind::DagLayered {
                    d: parse_num("edge budget", positional[0])?,
                    n_paths: parse_num("path budget", positional[1])?,
                }
            }
            "constant" => {
                expect_args(1)?;
                let text = read(&resolve(base, positional[0]))?;
                let y = text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num::<f64>("loss entry", s))
                    .collect::<Result<Vec<f64>>>()?;
                AdversaryKind::Constant(y)
            }
            other => return Err(Error::Parse(format!("unknown adversary `{other}`"))),
        };
        Ok(AdversarySpec { kind, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Charge ⟨x̃_t, y_t⟩.
    Expected,
    /// Draw x_t with E[x_t] = x̃_t and charge ⟨x_t, y_t⟩.
    Sampled,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "expected" => Ok(Mode::Expected),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Absent only when the adversary builds its own decision set.
    pub set: Option<DecisionSet>,
    pub learners: Vec<LearnerSpec>,
    pub adversary: AdversarySpec,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Default learning rate for learners without their own `eta`.
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(set: Option<DecisionSet>, learners: Vec<LearnerSpec>, adversary: AdversarySpec, horizon: usize) -> Self {
        ExperimentConfig {
            set,
            learners,
            adversary,
            horizon,
            trials: 1,
            seed: 0,
            mode: Mode::Expected,
            eta: None,
            out: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, path.parent())
    }

    /// Parses `key=value` lines (keys: set, learner, adversary, T, trials,
    /// seed, mode, eta, out). `#` starts a comment.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut set = None;
        let mut learners = None;
        let mut adversary = None;
        let mut horizon = None;
        let mut trials = 1;
        let mut seed = 0;
        let mut mode = Mode::Expected;
        let mut eta = None;
        let mut out = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            let value = value.trim();
            match key.trim() {
                "set" => set = Some(parse_set_spec(value, base)?),
                "learner" => {
                    learners = Some(value.split(',').map(str::parse).collect::<Result<Vec<LearnerSpec>>>()?)
                }
                "adversary" => adversary = Some(AdversarySpec::parse(value, base)?),
                "T" => horizon = Some(parse_num::<usize>("T", value)?),
                "trials" => trials = parse_num("trials", value)?,
                "seed" => seed = parse_num("seed", value)?,
                "mode" => mode = value.parse()?,
                "eta" => eta = Some(parse_num::<f64>("eta", value)?),
                "out" => out = Some(resolve(base, value)),
                other => return Err(Error::Parse(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("config is missing `{k}`"));
        let config = ExperimentConfig {
            set,
            learners: learners.ok_or_else(|| missing("learner"))?,
            adversary: adversary.ok_or_else(|| missing("adversary"))?,
            horizon: horizon.ok_or_else(|| missing("T"))?,
            trials,
            seed,
            mode,
            eta,
            out,
        };
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Parse("T must be ≥ 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Parse("trials must be ≥ 1".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Parse("at least one learner is required".into()));
        }
        let builds_set = matches!(self.adversary.kind, AdversaryKind::DagLayered { .. });
        match (&self.set, builds_set) {
            (None, false) => Err(Error::Parse("config is missing `set`".into())),
            (Some(_), true) => Err(Error::Parse("dag-layered builds its own DAG; drop `set`".into())),
            _ => Ok(()),
        }
    }
}
