//! Scenario files: flat `key = value` sections on top of the template
//! defaults.
//!
//! ```toml
//! scenario = "optimist"
//!
//! [economy]
//! d0 = 2.0
//! v = 0.2
//!
//! [simulation]
//! n_paths = 20000
//! seed = 7
//!
//! [agent1]
//! wealth = 1.0
//! belief = "optimist"
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::beliefs::Belief;
use crate::equilibrium::{AgentSpec, Utility};
use crate::error::{Error, Result};
use crate::scenarios::{ScenarioConfig, ScenarioKind};
use crate::valuation::LatticeEconomy;

/// A parsed file: the scenario plus the lattice instance used by `oracle`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub lattice: LatticeEconomy,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses a scenario file, or the `[config]` table of a run manifest.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let (Some(Value::Table(inner)), true) = (table.get("config"), table.contains_key("version")) {
        table = inner.clone();
    }
    let mut keys = Keys::new(&table, "");
    let kind_name = keys.string("scenario")?.ok_or_else(|| Error::validation("scenario", "missing"))?;
    let kind = ScenarioKind::parse(&kind_name)
        .ok_or_else(|| Error::validation("scenario", "expected optimist, pessimist, drawdown_pair or two_stock"))?;
    let mut cfg = ScenarioConfig::defaults(kind);
    let mut lattice_n = 10;
    let (mut t_star, mut checkpoints) = (None, None);

    for (name, value) in &table {
        match name.as_str() {
            "scenario" => {}
            "economy" => {
                let mut s = Keys::section(value, "economy")?;
                s.f64_into("d0", &mut cfg.d0)?;
                s.f64_into("drift", &mut cfg.drift)?;
                s.f64_into("rho", &mut cfg.rho)?;
                s.f64_into("horizon", &mut cfg.horizon)?;
                s.f64_into("kappa", &mut cfg.kappa)?;
                s.f64_into("psi0", &mut cfg.psi0)?;
                if let Some(v) = s.vector("v")? {
                    cfg.v = v;
                }
                if let Some(v) = s.vector("v_psi")? {
                    cfg.v_psi = v;
                }
                s.finish()?;
            }
            "simulation" => {
                let mut s = Keys::section(value, "simulation")?;
                s.usize_into("n_steps", &mut cfg.n_steps)?;
                if let Some(n) = s.integer("n_paths")? {
                    cfg.n_paths = n;
                }
                if let Some(n) = s.integer("seed")? {
                    cfg.seed = n;
                }
                if let Some(b) = s.boolean("bridge")? {
                    cfg.bridge = b;
                }
                checkpoints = s.vector("checkpoints")?;
                t_star = s.f64("t_star")?;
                if let Some(n) = s.integer("law_paths")? {
                    cfg.law_paths = n;
                }
                s.usize_into("ks_replicates", &mut cfg.ks_replicates)?;
                s.usize_into("lattice_steps", &mut lattice_n)?;
                s.finish()?;
            }
            other => {
                let Some(k) = other.strip_prefix("agent").and_then(|i| i.parse::<usize>().ok()) else {
                    return Err(Error::validation(other, "unknown key or section"));
                };
                if k == 0 || k > cfg.agents.len() {
                    return Err(Error::validation(
                        other,
                        "agent sections are numbered from 1 to the number of agents",
                    ));
                }
                cfg.agents[k - 1] = parse_agent(value, other, cfg.agents[k - 1], cfg.kappa)?;
            }
        }
    }
    if let (ScenarioKind::DrawdownPair, Belief::Drawdown { .. }) = (kind, cfg.agents[1].belief) {
        cfg.agents[1].belief = Belief::Drawdown { kappa: cfg.kappa };
    }
    cfg.t_star = t_star.unwrap_or(cfg.horizon / 2.0);
    cfg.checkpoints = checkpoints.unwrap_or_else(|| [0.25, 0.5, 1.0].iter().map(|c| c * cfg.horizon).collect());
    cfg.validate()?;
    let lattice = LatticeEconomy {
        d0: cfg.d0,
        v: cfg.v[0],
        rho: cfg.rho,
        horizon: cfg.horizon,
        n_steps: lattice_n,
        weights: [cfg.agents[0].wealth, cfg.agents.get(1).map_or(0.0, |a| a.wealth)],
    };
    Ok(RunConfig { scenario: cfg, lattice })
}

/// The configuration in the file grammar; [`parse_config_str`] reads it
/// back to an identical [`RunConfig`].
pub fn config_table(rc: &RunConfig) -> Table {
    let c = &rc.scenario;
    let mut economy = Table::new();
    economy.insert("d0".into(), c.d0.into());
    economy.insert("drift".into(), c.drift.into());
    economy.insert("v".into(), floats(&c.v));
    economy.insert("rho".into(), c.rho.into());
    economy.insert("horizon".into(), c.horizon.into());
    economy.insert("kappa".into(), c.kappa.into());
    economy.insert("psi0".into(), c.psi0.into());
    economy.insert("v_psi".into(), floats(&c.v_psi));
    let mut sim = Table::new();
    sim.insert("n_steps".into(), (c.n_steps as i64).into());
    sim.insert("n_paths".into(), (c.n_paths as i64).into());
    sim.insert("seed".into(), (c.seed as i64).into());
    sim.insert("bridge".into(), c.bridge.into());
    sim.insert("checkpoints".into(), floats(&c.checkpoints));
    sim.insert("t_star".into(), c.t_star.into());
    sim.insert("law_paths".into(), (c.law_paths as i64).into());
    sim.insert("ks_replicates".into(), (c.ks_replicates as i64).into());
    sim.insert("lattice_steps".into(), (rc.lattice.n_steps as i64).into());
    let mut t = Table::new();
    t.insert("scenario".into(), c.kind.name().into());
    t.insert("economy".into(), economy.into());
    t.insert("simulation".into(), sim.into());
    for (k, a) in c.agents.iter().enumerate() {
        let mut s = Table::new();
        s.insert("wealth".into(), a.wealth.into());
        match a.utility {
            Utility::Log => {
                s.insert("utility".into(), "log".into());
            }
            Utility::Power { gamma } => {
                s.insert("utility".into(), "power".into());
                s.insert("gamma".into(), gamma.into());
            }
        }
        let name = match a.belief {
            Belief::Reference => "reference",
            Belief::Optimist => "optimist",
            Belief::Pessimist => "pessimist",
            Belief::Drawdown { kappa } => {
                s.insert("kappa".into(), kappa.into());
                "drawdown"
            }
            Belief::Linear { coordinate } => {
                s.insert("coordinate".into(), (coordinate as i64).into());
                "linear"
            }
        };
        s.insert("belief".into(), name.into());
        t.insert(format!("agent{}", k + 1), s.into());
    }
    t
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| x.into()).collect())
}

fn parse_agent(value: &Value, section: &str, base: AgentSpec, kappa: f64) -> Result<AgentSpec> {
    let mut s = Keys::section(value, section)?;
    let mut wealth = base.wealth;
    s.f64_into("wealth", &mut wealth)?;
    let utility = match s.string("utility")?.as_deref() {
        None => base.utility,
        Some("log") => Utility::Log,
        Some("power") => {
            let gamma = s
                .f64("gamma")?
                .ok_or_else(|| Error::validation("gamma", "power utility needs gamma"))?;
            Utility::Power { gamma }
        }
        Some(_) => return Err(Error::validation("utility", "expected log or power")),
    };
    let belief = match s.string("belief")?.as_deref() {
        None => base.belief,
        Some("reference") => Belief::Reference,
        Some("optimist") => Belief::Optimist,
        Some("pessimist") => Belief::Pessimist,
        Some("drawdown") => Belief::Drawdown {
            kappa: s.f64("kappa")?.unwrap_or(kappa),
        },
        Some("linear") => Belief::Linear {
            coordinate: s.integer("coordinate")?.unwrap_or(0) as usize,
        },
        Some(_) => {
            return Err(Error::validation(
                "belief",
                "expected reference, optimist, pessimist, drawdown or linear",
            ))
        }
    };
    s.finish()?;
    AgentSpec::new(wealth, utility, belief)
}

/// Typed access to one section that remembers which keys were read.
struct Keys<'a> {
    table: &'a Table,
    section: String,
    seen: Vec<&'a str>,
}

impl<'a> Keys<'a> {
    fn new(table: &'a Table, section: &str) -> Self {
        Self {
            table,
            section: section.to_string(),
            seen: Vec::new(),
        }
    }

    fn section(value: &'a Value, name: &str) -> Result<Self> {
        match value {
            Value::Table(t) => Ok(Self::new(t, name)),
            _ => Err(Error::validation(name, "expected a [section]")),
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.seen.push(k.as_str());
        Some(v)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::validation(key, "expected a number")),
        }
    }

    fn f64_into(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(x) = self.f64(key)? {
            *slot = x;
        }
        Ok(())
    }

    fn integer(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::validation(key, "expected a nonnegative integer")),
        }
    }

    fn usize_into(&mut self, key: &str, slot: &mut usize) -> Result<()> {
        if let Some(x) = self.integer(key)? {
            *slot = x as usize;
        }
        Ok(())
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(Error::validation(key, "expected true or false")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::validation(key, "expected a quoted string")),
        }
    }

    /// A number or an array of numbers.
    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let bad = || Error::validation(key, "expected a number or an array of numbers");
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(vec![*x])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(bad()),
                })
                .collect::<Result<_>>()
                .map(Some),
            Some(_) => Err(bad()),
        }
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().find(|k| !self.seen.contains(&k.as_str())) {
            Some(k) => Err(Error::validation(k, format!("unknown key in [{}]", self.section))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Validation { field, message }) => format!("{field}: {message}"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_optimist_gets_defaults() {
        let c = parse_config_str("scenario = \"optimist\"\n[economy]\nd0 = 2.0\nv = 0.2\n").unwrap();
        let s = c.scenario;
        assert_eq!((s.n_steps, s.n_paths, s.rho, s.horizon), (2000, 100_000, 0.05, 1.0));
        assert_eq!(s.v, vec![0.2]);
        assert_eq!(s.agents.len(), 2);
        assert_eq!(c.lattice.n_steps, 10);
    }

    #[test]
    fn constraint_violations_name_the_field() {
        let e = field_of(parse_config_str("scenario = \"optimist\"\n[economy]\nd0 = 0.5\n"));
        assert!(e.starts_with("d0") && e.contains("D_0 > 1"), "{e}");
        let e = field_of(parse_config_str("scenario = \"drawdown_pair\"\n[economy]\nkappa = 1.2\n"));
        assert!(e.starts_with("kappa"), "{e}");
        let e = field_of(parse_config_str("scenario = \"optimist\"\n[simulation]\nn_path = 5\n"));
        assert!(e.starts_with("n_path"), "{e}");
        let e = field_of(parse_config_str("scenario = \"optimist\"\n[economy]\nv = \"high\"\n"));
        assert!(e.starts_with("v"), "{e}");
        let e = field_of(parse_config_str("scenario = \"moon\"\n"));
        assert!(e.starts_with("scenario"), "{e}");
    }

    #[test]
    fn syntax_errors_report_the_line() {
        match parse_config_str("scenario = \"optimist\"\n[economy]\nd0 = = 2\n") {
            Err(Error::Config(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn agents_and_simulation_override() {
        let text = r#"
scenario = "drawdown_pair"
[economy]
kappa = 0.4
[simulation]
n_paths = 500
n_steps = 100
seed = 9
bridge = true
[agent2]
wealth = 3
utility = "power"
gamma = 2.0
"#;
        let s = parse_config_str(text).unwrap().scenario;
        assert_eq!((s.n_paths, s.n_steps, s.seed, s.bridge), (500, 100, 9, true));
        assert_eq!(s.agents[1].wealth, 3.0);
        assert_eq!(s.agents[1].utility, Utility::Power { gamma: 2.0 });
        assert_eq!(s.agents[1].belief, Belief::Drawdown { kappa: 0.4 });
        let e = field_of(parse_config_str("scenario = \"optimist\"\n[agent3]\nwealth = 1\n"));
        assert!(e.starts_with("agent3"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        for kind in ScenarioKind::ALL {
            let mut text = format!("scenario = \"{}\"\n", kind.name());
            if kind == ScenarioKind::DrawdownPair {
                text.push_str("[economy]\nkappa = 0.3\n[agent1]\nutility = \"power\"\ngamma = 3\n");
            }
            let rc = parse_config_str(&text).unwrap();
            let echoed = config_table(&rc).to_string();
            assert_eq!(parse_config_str(&echoed).unwrap(), rc, "{echoed}");
            let mut manifest = Table::new();
            manifest.insert("version".into(), "0".into());
            manifest.insert("config".into(), config_table(&rc).into());
            assert_eq!(parse_config_str(&manifest.to_string()).unwrap(), rc);
        }
    }

    #[test]
    fn two_stock_vectors() {
        let text = "scenario = \"two_stock\"\n[economy]\nv = [1, 1]\nv_psi = [0.25, -0.25]\n";
        let s = parse_config_str(text).unwrap().scenario;
        assert_eq!(s.v, vec![1.0, 1.0]);
        assert_eq!(s.v_psi, vec![0.25, -0.25]);
    }
}
