//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional; omitted keys take
//! the evaluation-network defaults.
//!
//! ```toml
//! seed = 42
//! trials = 100
//! horizon = 500            # consensus steps simulated after T0
//! t0 = 150
//! kappa = 10.0
//! eta = 5.0
//! delta = 0.05
//! out_dir = "out"
//! early_stop = false
//! x_legit_init = "paper"   # or a list of numbers
//! x_malicious_init = [ ... ]  # defaults to zeros
//! attack = "max_deviation" # or a table, see below
//!
//! [topology]
//! preset = "paper"         # or `adjacency = ["0110", ...]`, or `n_legit` + `edges = [[0, 1], ...]`
//! n_malicious = 15
//! malicious_neighbors = "all"  # or one list of legitimate agents per malicious agent
//!
//! [trust]
//! alpha_mean_legit = 0.55
//! alpha_mean_malicious = 0.45
//! alpha_width = 0.4
//! alpha_dist = "uniform"   # or "bernoulli"
//!
//! [attack]                 # table form
//! kind = "drift"           # max_deviation | drift | silent | constant
//! weight = 0.15            # drift: weight, decay_base, decay_rate, init_fraction, overflow_band
//! # max_deviation: sign = "positive" | "negative"; constant: values = [ ... ]
//!
//! [sweep]                  # axes for the `sweep` command
//! t0 = [0, 25, 50, 100, 150]
//! ell = [0.2, 0.4, 0.6]
//! n_malicious = [5, 15, 30]
//! attack = ["max_deviation", "drift"]
//! ```
//!
//! Errors name the offending key.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::attacks::{AttackModel, DriftParams, Sign};
use crate::engine::SimulationConfig;
use crate::error::{Error, Result};
use crate::harness::{Scenario, SweepSpec};
use crate::topology::{parse_bit_rows, Topology, PAPER_ADJACENCY, PAPER_INITIAL_VALUES};
use crate::trust::{AlphaDistribution, TrustParams};

pub const DEFAULT_HORIZON: usize = 500;
pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_DELTA: f64 = 0.05;

const TOP_KEYS: &[&str] = &[
    "seed",
    "trials",
    "horizon",
    "t0",
    "kappa",
    "eta",
    "delta",
    "out_dir",
    "early_stop",
    "x_legit_init",
    "x_malicious_init",
    "attack",
    "topology",
    "trust",
    "sweep",
];

/// Parsed scenario file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Steps simulated after T0.
    pub horizon: usize,
    pub out_dir: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    /// The document after command-line overrides, as it was parsed.
    pub effective: Table,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_table(read_table(path)?)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn paper() -> Self {
        Self::from_table(Table::new()).expect("defaults are valid")
    }

    pub fn from_table(table: Table) -> Result<Self> {
        for key in table.keys() {
            if !TOP_KEYS.contains(&key.as_str()) {
                return Err(Error::config(key.clone(), "unknown key"));
            }
        }
        let root = Node { table: &table, prefix: "" };
        let seed = root.u64("seed")?.unwrap_or(0);
        let trials = root.usize("trials")?.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        let horizon = root.usize("horizon")?.unwrap_or(DEFAULT_HORIZON);
        let t0 = root.usize("t0")?.unwrap_or(0);
        let kappa = root.f64("kappa")?.unwrap_or(10.0);
        if !(kappa > 0.0) {
            return Err(Error::config("kappa", format!("{kappa} must be positive")));
        }
        let eta = root.f64("eta")?.unwrap_or(5.0);
        if !(eta > 0.0) {
            return Err(Error::config("eta", format!("{eta} must be positive")));
        }
        let delta = root.f64("delta")?.unwrap_or(DEFAULT_DELTA);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("delta", format!("{delta} must lie in (0, 1)")));
        }
        let out_dir = root.str("out_dir")?.map(PathBuf::from);
        let early_stop = root.bool("early_stop")?.unwrap_or(false);

        let topology = parse_topology(root.table("topology")?)?;
        let trust = parse_trust(root.table("trust")?)?;
        let attack = match table.get("attack") {
            None => AttackModel::max_deviation(),
            Some(v) => parse_attack(v, "attack")?,
        };

        let x_legit_init = match table.get("x_legit_init") {
            None => default_legit_init(&topology, "x_legit_init")?,
            Some(Value::String(s)) if s == "paper" => default_legit_init(&topology, "x_legit_init")?,
            Some(v) => float_list(v, "x_legit_init")?,
        };
        let x_malicious_init = match table.get("x_malicious_init") {
            None => vec![0.0; topology.n_malicious()],
            Some(v) => float_list(v, "x_malicious_init")?,
        };
        check_len(&x_legit_init, topology.n_legit(), "x_legit_init")?;
        check_len(&x_malicious_init, topology.n_malicious(), "x_malicious_init")?;
        for (key, xs) in [("x_legit_init", &x_legit_init), ("x_malicious_init", &x_malicious_init)] {
            if let Some(x) = xs.iter().find(|x| x.abs() > eta) {
                return Err(Error::config(key, format!("{x} exceeds eta = {eta}")));
            }
        }

        let config = SimulationConfig {
            topology,
            trust,
            attack,
            kappa,
            eta,
            t0,
            horizon: t0 + horizon,
            x_legit_init,
            x_malicious_init,
            seed,
            trial: 0,
            early_stop,
        };
        let sweep = root.table("sweep")?.map(parse_sweep).transpose()?;
        Ok(RunConfig {
            scenario: Scenario { config, trials, delta, jobs: None },
            horizon,
            out_dir,
            sweep,
            effective: table,
        })
    }

    /// Canonical text of the effective document.
    pub fn effective_text(&self) -> String {
        toml::to_string(&self.effective).expect("tables always serialize")
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text).map_err(|e| match e {
        Error::Config { key, reason } => Error::Config { key, reason: format!("{reason} (in {})", path.display()) },
        other => other,
    })
}

pub fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| {
        let key = e.span().map(|s| format!("<byte {}>", s.start)).unwrap_or_else(|| "<document>".into());
        Error::config(key, e.message().to_string())
    })
}

/// Sets a top-level integer key, as command-line overrides do.
pub fn set_int(table: &mut Table, key: &str, value: u64) -> Result<()> {
    let v = i64::try_from(value).map_err(|_| Error::config(key, format!("{value} is too large")))?;
    table.insert(key.to_string(), Value::Integer(v));
    Ok(())
}

pub fn set_float(table: &mut Table, key: &str, value: f64) {
    table.insert(key.to_string(), Value::Float(value));
}

fn default_legit_init(topo: &Topology, key: &str) -> Result<Vec<f64>> {
    if topo.n_legit() == PAPER_INITIAL_VALUES.len() {
        Ok(PAPER_INITIAL_VALUES.to_vec())
    } else {
        Err(Error::config(key, format!("required for a network of {} legitimate agents", topo.n_legit())))
    }
}

fn check_len(xs: &[f64], expected: usize, key: &str) -> Result<()> {
    if xs.len() == expected {
        Ok(())
    } else {
        Err(Error::config(key, format!("expected {expected} values, got {}", xs.len())))
    }
}

/// A table plus the dotted path used to name its keys in errors.
#[derive(Clone, Copy)]
struct Node<'a> {
    table: &'a Table,
    prefix: &'a str,
}

impl<'a> Node<'a> {
    fn key(&self, k: &str) -> String {
        if self.prefix.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.prefix)
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(self.key(k), "unknown key")),
            None => Ok(()),
        }
    }

    fn table(&self, k: &str) -> Result<Option<&'a Table>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(Error::config(self.key(k), "expected a table")),
        }
    }

    fn f64(&self, k: &str) -> Result<Option<f64>> {
        self.table.get(k).map(|v| as_f64(v, &self.key(k))).transpose()
    }

    fn usize(&self, k: &str) -> Result<Option<usize>> {
        self.table.get(k).map(|v| as_usize(v, &self.key(k))).transpose()
    }

    fn u64(&self, k: &str) -> Result<Option<u64>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::config(self.key(k), "expected a non-negative integer")),
        }
    }

    fn bool(&self, k: &str) -> Result<Option<bool>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(Error::config(self.key(k), "expected true or false")),
        }
    }

    fn str(&self, k: &str) -> Result<Option<&'a str>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::config(self.key(k), "expected a string")),
        }
    }
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn as_usize(v: &Value, key: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(key, "expected a non-negative integer")),
    }
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::config(key, "expected a list"))
}

fn float_list(v: &Value, key: &str) -> Result<Vec<f64>> {
    array(v, key)?.iter().enumerate().map(|(i, x)| as_f64(x, &format!("{key}[{i}]"))).collect()
}

fn usize_list(v: &Value, key: &str) -> Result<Vec<usize>> {
    array(v, key)?.iter().enumerate().map(|(i, x)| as_usize(x, &format!("{key}[{i}]"))).collect()
}

fn parse_topology(table: Option<&Table>) -> Result<Topology> {
    let empty = Table::new();
    let node = Node { table: table.unwrap_or(&empty), prefix: "topology" };
    node.check_keys(&["preset", "adjacency", "edges", "n_legit", "n_malicious", "malicious_neighbors"])?;
    let t = node.table;

    let sources = ["preset", "adjacency", "edges"].iter().filter(|k| t.contains_key(**k)).count();
    if sources > 1 {
        return Err(Error::config("topology", "give only one of preset, adjacency, edges"));
    }
    let adjacency = if let Some(v) = t.get("adjacency") {
        let rows = array(v, "topology.adjacency")?
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.as_str().map(str::to_owned).ok_or_else(|| Error::config(format!("topology.adjacency[{i}]"), "expected a string"))
            })
            .collect::<Result<Vec<_>>>()?;
        let bits = parse_bit_rows(&rows)?;
        if let Some(i) = bits.iter().position(|r| r.len() != bits.len()) {
            return Err(Error::config(
                format!("topology.adjacency[{i}]"),
                format!("row has {} entries, expected {}", bits[i].len(), bits.len()),
            ));
        }
        if let Some(n) = node.usize("n_legit")? {
            if n != bits.len() {
                return Err(Error::config("topology.n_legit", format!("{n} disagrees with {} adjacency rows", bits.len())));
            }
        }
        bits
    } else if let Some(v) = t.get("edges") {
        let n = node.usize("n_legit")?.ok_or_else(|| Error::config("topology.n_legit", "required with edges"))?;
        let mut bits = vec![vec![false; n]; n];
        for (k, e) in array(v, "topology.edges")?.iter().enumerate() {
            let key = format!("topology.edges[{k}]");
            let pair = usize_list(e, &key)?;
            match pair[..] {
                [a, b] if a < n && b < n => {
                    bits[a][b] = true;
                    bits[b][a] = true;
                }
                [_, _] => return Err(Error::config(key, format!("endpoint outside 0..{n}"))),
                _ => return Err(Error::config(key, "expected a pair")),
            }
        }
        bits
    } else {
        match node.str("preset")?.unwrap_or("paper") {
            "paper" => parse_bit_rows(&PAPER_ADJACENCY)?,
            other => return Err(Error::config("topology.preset", format!("unknown preset {other:?}"))),
        }
    };
    let n_legit = adjacency.len();
    for i in 0..n_legit {
        for j in 0..i {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(Error::config("topology.adjacency", format!("not symmetric at ({i}, {j})")));
            }
        }
    }

    let n_malicious = node.usize("n_malicious")?.unwrap_or(0);
    let targets = match t.get("malicious_neighbors") {
        None => vec![(0..n_legit).collect(); n_malicious],
        Some(Value::String(s)) if s == "all" => vec![(0..n_legit).collect(); n_malicious],
        Some(v) => {
            let lists = array(v, "topology.malicious_neighbors")?;
            if lists.len() != n_malicious {
                return Err(Error::config(
                    "topology.malicious_neighbors",
                    format!("{} lists for {n_malicious} malicious agents", lists.len()),
                ));
            }
            lists
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    let key = format!("topology.malicious_neighbors[{k}]");
                    let l = usize_list(l, &key)?;
                    match l.iter().find(|&&i| i >= n_legit) {
                        Some(i) => Err(Error::config(key, format!("{i} is not a legitimate agent"))),
                        None => Ok(l),
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Topology::new(n_legit, n_malicious, &adjacency, &targets)
}

fn parse_trust(table: Option<&Table>) -> Result<TrustParams> {
    let empty = Table::new();
    let node = Node { table: table.unwrap_or(&empty), prefix: "trust" };
    node.check_keys(&["alpha_mean_legit", "alpha_mean_malicious", "alpha_width", "alpha_dist"])?;
    let mean_legit = node.f64("alpha_mean_legit")?.unwrap_or(0.55);
    let mean_malicious = node.f64("alpha_mean_malicious")?.unwrap_or(0.45);
    let width = node.f64("alpha_width")?.unwrap_or(0.4);
    let dist = match node.str("alpha_dist")?.unwrap_or("uniform") {
        "uniform" => AlphaDistribution::Uniform,
        "bernoulli" => AlphaDistribution::Bernoulli,
        other => return Err(Error::config("trust.alpha_dist", format!("unknown distribution {other:?}"))),
    };
    TrustParams::new(mean_legit, mean_malicious, width, dist).map_err(|e| Error::config("trust", e.to_string()))
}

/// Attack with default parameters, by its config name.
pub fn attack_by_name(name: &str) -> Result<AttackModel> {
    parse_attack(&Value::String(name.to_string()), "attack")
}

pub fn parse_attack(v: &Value, key: &str) -> Result<AttackModel> {
    let (kind, params) = match v {
        Value::String(s) => (s.as_str(), None),
        Value::Table(t) => match t.get("kind") {
            Some(Value::String(s)) => (s.as_str(), Some(t)),
            _ => return Err(Error::config(format!("{key}.kind"), "expected a string")),
        },
        _ => return Err(Error::config(key, "expected a name or a table")),
    };
    let empty = Table::new();
    let node = Node { table: params.unwrap_or(&empty), prefix: key };
    match kind {
        "max_deviation" => {
            node.check_keys(&["kind", "sign"])?;
            let sign = match node.str("sign")? {
                None => None,
                Some("positive") => Some(Sign::Positive),
                Some("negative") => Some(Sign::Negative),
                Some(other) => return Err(Error::config(node.key("sign"), format!("unknown sign {other:?}"))),
            };
            Ok(AttackModel::MaxDeviation { sign })
        }
        "drift" => {
            node.check_keys(&["kind", "weight", "decay_base", "decay_rate", "init_fraction", "overflow_band"])?;
            let d = DriftParams::default();
            Ok(AttackModel::Drift(DriftParams {
                weight: node.f64("weight")?.unwrap_or(d.weight),
                decay_base: node.f64("decay_base")?.unwrap_or(d.decay_base),
                decay_rate: node.f64("decay_rate")?.unwrap_or(d.decay_rate),
                init_fraction: node.f64("init_fraction")?.unwrap_or(d.init_fraction),
                overflow_band: node.f64("overflow_band")?.unwrap_or(d.overflow_band),
            }))
        }
        "constant" => {
            node.check_keys(&["kind", "values"])?;
            let values = match node.table.get("values") {
                Some(v) => float_list(v, &node.key("values"))?,
                None => return Err(Error::config(node.key("values"), "required for the constant attack")),
            };
            Ok(AttackModel::ConstantVector { values })
        }
        "silent" => {
            node.check_keys(&["kind"])?;
            Ok(AttackModel::Silent)
        }
        other => Err(Error::config(if params.is_some() { format!("{key}.kind") } else { key.to_string() }, format!("unknown attack {other:?}"))),
    }
}

fn parse_sweep(table: &Table) -> Result<SweepSpec> {
    let node = Node { table, prefix: "sweep" };
    node.check_keys(&["t0", "ell", "n_malicious", "attack"])?;
    let axis = |k: &str| table.get(k);
    let spec = SweepSpec {
        t0: axis("t0").map(|v| usize_list(v, "sweep.t0")).transpose()?.unwrap_or_else(|| SweepSpec::paper().t0),
        ell: axis("ell").map(|v| float_list(v, "sweep.ell")).transpose()?.unwrap_or_else(|| SweepSpec::paper().ell),
        n_malicious: axis("n_malicious")
            .map(|v| usize_list(v, "sweep.n_malicious"))
            .transpose()?
            .unwrap_or_else(|| SweepSpec::paper().n_malicious),
        attack: match axis("attack") {
            None => SweepSpec::paper().attack,
            Some(v) => array(v, "sweep.attack")?
                .iter()
                .enumerate()
                .map(|(i, a)| parse_attack(a, &format!("sweep.attack[{i}]")))
                .collect::<Result<_>>()?,
        },
    };
    for (k, empty) in [
        ("sweep.t0", spec.t0.is_empty()),
        ("sweep.ell", spec.ell.is_empty()),
        ("sweep.n_malicious", spec.n_malicious.is_empty()),
        ("sweep.attack", spec.attack.is_empty()),
    ] {
        if empty {
            return Err(Error::config(k, "axis is empty"));
        }
    }
    Ok(spec)
}
