//! Experiment configuration and its `key=value` / flag-string parsing.

use std::fmt;
use std::str::FromStr;

use crate::engines::{Accounting, EngineKind, EngineOptions};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::resources::{Coherence, FusionMode};
use crate::rng::{self, Purpose};
use crate::topology::PhysicalTopology;

pub const SEED_ENV: &str = "GHZ_ROUTER_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineSelection {
    Maer,
    Sync,
    Both,
}

impl EngineSelection {
    pub fn engines(self) -> Vec<EngineKind> {
        match self {
            EngineSelection::Maer => vec![EngineKind::Maer],
            EngineSelection::Sync => vec![EngineKind::Synchronous],
            EngineSelection::Both => vec![EngineKind::Maer, EngineKind::Synchronous],
        }
    }
}

impl FromStr for EngineSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maer" => Ok(EngineSelection::Maer),
            "sync" => Ok(EngineSelection::Sync),
            "both" => Ok(EngineSelection::Both),
            _ => Err(Error::invalid(format!("unknown engine '{s}' (maer|sync|both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologySpec {
    Grid { rows: usize, cols: usize },
    Barbell { clique_size: usize },
    Random { n: usize, prob: f64 },
    Path { nodes: usize },
}

impl TopologySpec {
    /// Random graphs draw from a stream reserved for topology generation, so
    /// one seed yields one graph for the whole experiment.
    pub fn build(&self, seed: u64) -> Result<PhysicalTopology> {
        match *self {
            TopologySpec::Grid { rows, cols } => PhysicalTopology::grid(rows, cols),
            TopologySpec::Barbell { clique_size } => PhysicalTopology::barbell(clique_size),
            TopologySpec::Random { n, prob } => {
                PhysicalTopology::random(n, prob, &mut rng::derive(seed, Purpose::Topology, 0, 0))
            }
            TopologySpec::Path { nodes } => PhysicalTopology::path(nodes),
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Grid { rows, cols } => write!(f, "grid:{rows},{cols}"),
            TopologySpec::Barbell { clique_size } => write!(f, "barbell:{clique_size}"),
            TopologySpec::Random { n, prob } => write!(f, "random:{n},{prob}"),
            TopologySpec::Path { nodes } => write!(f, "path:{nodes}"),
        }
    }
}

impl FromStr for TopologySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad topology '{s}' (grid:R,C | barbell:K | random:N,P | path:N)"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let int = |i: usize| args.get(i).and_then(|a| a.parse::<usize>().ok()).ok_or_else(bad);
        let spec = match (kind, args.len()) {
            ("grid", 2) => TopologySpec::Grid { rows: int(0)?, cols: int(1)? },
            ("barbell", 1) => TopologySpec::Barbell { clique_size: int(0)? },
            ("random", 2) => TopologySpec::Random { n: int(0)?, prob: args[1].parse().map_err(|_| bad())? },
            ("path", 1) => TopologySpec::Path { nodes: int(0)? },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// Target group distance: a fixed value or a multiple of the consumer count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DStar {
    Value(f64),
    PerConsumer(f64),
}

impl DStar {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            DStar::Value(d) => d,
            DStar::PerConsumer(k) => k * n as f64,
        }
    }
}

impl fmt::Display for DStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DStar::Value(d) => write!(f, "{d}"),
            DStar::PerConsumer(k) => write!(f, "{k}n"),
        }
    }
}

impl FromStr for DStar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad d-star '{s}' (a number or e.g. '3n')"));
        let (text, per) = match s.strip_suffix('n') {
            Some(k) => (k, true),
            None => (s, false),
        };
        let value: f64 = text.parse().map_err(|_| bad())?;
        if !value.is_finite() || value <= 0.0 {
            return Err(bad());
        }
        Ok(if per { DStar::PerConsumer(value) } else { DStar::Value(value) })
    }
}

fn parse_probability(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::invalid(format!("{key}: '{s}' is not a number")))?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(format!("{key} must be in (0, 1], got {v}")));
    }
    Ok(v)
}

fn parse_coherence(s: &str) -> Result<Coherence> {
    match s.trim() {
        "inf" | "infinite" => Ok(Coherence::Infinite),
        t => {
            let m: u32 = t.parse().map_err(|_| Error::invalid(format!("m: '{t}' is not an integer or 'inf'")))?;
            Coherence::slots(m)
        }
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = s.split(',').map(|t| item(t.trim())).collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid("empty list"));
    }
    Ok(items)
}

fn parse_int<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::invalid(format!("{key}: '{s}' is not a valid integer")))
}

/// Full parameterisation of a run. List-valued fields are swept as a
/// cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub engine: EngineSelection,
    pub topology: TopologySpec,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub m: Vec<Coherence>,
    pub n: Vec<usize>,
    pub d_star: Vec<DStar>,
    pub delta: f64,
    pub trials: usize,
    pub slots: u64,
    pub seed: u64,
    pub fusion_mode: FusionMode,
    pub accounting: Accounting,
    pub join_hops_per_slot: Option<u32>,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            engine: EngineSelection::Both,
            topology: TopologySpec::Grid { rows: 10, cols: 10 },
            p: vec![0.6],
            q: vec![0.9],
            m: vec![Coherence::Slots(4)],
            n: vec![3],
            d_star: vec![DStar::Value(6.0)],
            delta: 1.0,
            trials: 100,
            slots: 20_000,
            seed: 0,
            fusion_mode: FusionMode::UniformQ,
            accounting: Accounting::Expected,
            join_hops_per_slot: None,
            execution: Execution::Parallel,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], in flag spelling.
pub const KEYS: &[&str] = &[
    "engine",
    "topology",
    "p",
    "q",
    "m",
    "consumers",
    "d-star",
    "delta",
    "trials",
    "slots",
    "seed",
    "fusion-mode",
    "accounting",
    "join-hops-per-slot",
];

impl ExperimentConfig {
    /// Applies one setting given as strings. Keys use flag spelling;
    /// underscores are accepted in place of dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.replace('_', "-").as_str() {
            "engine" => self.engine = value.parse()?,
            "topology" => self.topology = value.parse()?,
            "p" => self.p = parse_list(value, |s| parse_probability("p", s))?,
            "q" => self.q = parse_list(value, |s| parse_probability("q", s))?,
            "m" => self.m = parse_list(value, parse_coherence)?,
            "consumers" | "n" => self.n = parse_list(value, |s| parse_int("consumers", s))?,
            "d-star" => self.d_star = parse_list(value, str::parse)?,
            "delta" => {
                self.delta = value.parse().map_err(|_| Error::invalid(format!("delta: '{value}' is not a number")))?
            }
            "trials" => self.trials = parse_int("trials", value)?,
            "slots" => self.slots = parse_int("slots", value)?,
            "seed" => self.seed = parse_int("seed", value)?,
            "fusion-mode" => {
                self.fusion_mode = match value {
                    "uniform" | "uniform-q" | "uniform_q" => FusionMode::UniformQ,
                    "optical" | "optical-half-power" | "optical_half_power" => FusionMode::OpticalHalfPower,
                    _ => return Err(Error::invalid(format!("unknown fusion mode '{value}'"))),
                }
            }
            "accounting" => {
                self.accounting = match value {
                    "expected" => Accounting::Expected,
                    "bernoulli" => Accounting::Bernoulli,
                    _ => return Err(Error::invalid(format!("unknown accounting '{value}'"))),
                }
            }
            "join-hops-per-slot" => {
                self.join_hops_per_slot = match value {
                    "unbounded" | "inf" => None,
                    v => Some(parse_int("join-hops-per-slot", v)?),
                }
            }
            other => return Err(Error::invalid(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, contents: &str) -> Result<()> {
        for (lineno, line) in contents.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let probability = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
                Some(x) => Err(Error::invalid(format!("{name} must be in (0, 1], got {x}"))),
                None => Ok(()),
            }
        };
        probability("p", &self.p)?;
        probability("q", &self.q)?;
        if self.p.is_empty() || self.q.is_empty() || self.m.is_empty() || self.n.is_empty() || self.d_star.is_empty() {
            return Err(Error::invalid("sweep lists must not be empty"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.slots < 1 {
            return Err(Error::invalid("slots must be >= 1"));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(format!("consumer count must be >= 2, got {n}")));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        for &n in &self.n {
            for d in &self.d_star {
                if d.resolve(n) < 1.0 {
                    return Err(Error::invalid(format!("d-star {d} resolves below 1 for n = {n}")));
                }
            }
        }
        if self.join_hops_per_slot == Some(0) {
            return Err(Error::invalid("join-hops-per-slot must be >= 1"));
        }
        Ok(())
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions { accounting: self.accounting, join_hops_per_slot: self.join_hops_per_slot }
    }
}
