use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacker::AttackPlan;
use crate::bench::{BenchParams, BenchPreset};
use crate::crypto::{Iv, Key128, TextEncoding};
use crate::endpoints::{DeviceConfig, ServerConfig, TransportMode};
use crate::netsim::NetConfig;
use crate::scenario::{paper_topology, NodeSpec, Role, TestbedSpec};
use crate::wire::{BodyFraming, VitalSigns};

use super::{fixture, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FramingName {
    #[default]
    Canonical,
    Fidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default = "paper_topology")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default = "default_propagation")]
    pub propagation_ms: u64,
    #[serde(default = "default_arp_timeout")]
    pub arp_timeout_ms: u64,
    #[serde(default)]
    pub arp_ttl_ms: Option<u64>,
    /// Per-frame IPv4 drop probability on the simulated segment.
    #[serde(default)]
    pub loss: f64,
}

fn default_propagation() -> u64 {
    NetConfig::default().propagation_ms
}

fn default_arp_timeout() -> u64 {
    NetConfig::default().arp_timeout_ms
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            nodes: paper_topology(),
            propagation_ms: default_propagation(),
            arp_timeout_ms: default_arp_timeout(),
            arp_ttl_ms: None,
            loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoConfig {
    #[serde(default)]
    pub key: Option<Key128>,
    #[serde(default)]
    pub encoding: TextEncoding,
    #[serde(default)]
    pub framing: FramingName,
    /// Hex IV shared by both ends in fidelity framing.
    #[serde(default)]
    pub fidelity_iv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    #[serde(default = "default_device_id")]
    pub device_id: String,
    #[serde(default = "default_interval")]
    pub sample_interval_ms: u64,
    #[serde(default = "default_hr_range")]
    pub hr_range: (u32, u32),
    /// Degrees Fahrenheit with one decimal.
    #[serde(default = "default_temp_range")]
    pub temp_range: (f64, f64),
    #[serde(default = "default_retry_timeout")]
    pub retry_timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub script: Vec<VitalSigns>,
}

fn default_device_id() -> String {
    DeviceConfig::default().device_id
}
fn default_interval() -> u64 {
    DeviceConfig::default().sample_interval_ms
}
fn default_hr_range() -> (u32, u32) {
    DeviceConfig::default().hr_range
}
fn default_temp_range() -> (f64, f64) {
    let (lo, hi) = DeviceConfig::default().temp_range;
    (f64::from(lo) / 10.0, f64::from(hi) / 10.0)
}
fn default_retry_timeout() -> u64 {
    DeviceConfig::default().retry_timeout_ms
}
fn default_max_retries() -> u32 {
    DeviceConfig::default().max_retries
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self {
            device_id: default_device_id(),
            sample_interval_ms: default_interval(),
            hr_range: default_hr_range(),
            temp_range: default_temp_range(),
            retry_timeout_ms: default_retry_timeout(),
            max_retries: default_max_retries(),
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    #[serde(default)]
    pub validate_ranges: bool,
    #[serde(default)]
    pub replay_defense: bool,
    #[serde(default = "default_hr_bounds")]
    pub hr_bounds: (u32, u32),
    /// Degrees Fahrenheit.
    #[serde(default = "default_temp_bounds")]
    pub temp_bounds: (f64, f64),
}

fn default_hr_bounds() -> (u32, u32) {
    ServerConfig::default().hr_bounds
}
fn default_temp_bounds() -> (f64, f64) {
    let (lo, hi) = ServerConfig::default().temp_bounds;
    (f64::from(lo) / 10.0, f64::from(hi) / 10.0)
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            validate_ranges: false,
            replay_defense: false,
            hr_bounds: default_hr_bounds(),
            temp_bounds: default_temp_bounds(),
        }
    }
}

/// Either a preset name or an inline preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelsSection {
    Named(String),
    Inline(Box<BenchPreset>),
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection::Named("paper".into())
    }
}

/// The config file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub messages: u64,
    #[serde(default)]
    pub mode: TransportMode,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub crypto: CryptoConfig,
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub server: ServerSection,
    #[serde(default)]
    pub attack: Option<AttackPlan>,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A validated scenario with every preset expanded.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub messages: u64,
    pub mode: TransportMode,
    pub topology: TopologyConfig,
    pub key: Option<Key128>,
    pub encoding: TextEncoding,
    pub framing: BodyFraming,
    pub device: DeviceConfig,
    pub server: ServerConfig,
    pub attack: Option<AttackPlan>,
    pub models: BenchPreset,
    pub output: Option<PathBuf>,
}

fn config_err(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn tenths(key: &str, f: f64) -> Result<u32, CliError> {
    let t = (f * 10.0).round();
    if !(0.0..=f64::from(u32::MAX)).contains(&t) || (t / 10.0 - f).abs() > 1e-9 {
        return Err(config_err(key, format!("{f} is not a temperature with one decimal")));
    }
    Ok(t as u32)
}

impl RawConfig {
    pub fn validate(self) -> Result<ScenarioConfig, CliError> {
        let seed = self.seed.ok_or_else(|| config_err("seed", "seed required"))?;
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(config_err("name", "name must be non-empty [A-Za-z0-9_-]"));
        }
        if self.messages == 0 {
            return Err(config_err("messages", "messages must be > 0"));
        }

        let topo = &self.topology;
        if !(0.0..1.0).contains(&topo.loss) {
            return Err(config_err("topology.loss", "loss must lie in [0, 1)"));
        }
        let mut seen_ip = std::collections::BTreeSet::new();
        let mut seen_mac = std::collections::BTreeSet::new();
        for node in &topo.nodes {
            if !seen_ip.insert(node.ip) {
                return Err(config_err("topology.nodes", format!("duplicate ip {}", node.ip)));
            }
            if node.mac.is_broadcast() || !seen_mac.insert(node.mac) {
                return Err(config_err("topology.nodes", format!("invalid or duplicate mac {}", node.mac)));
            }
        }
        for role in [Role::Device, Role::Server] {
            if topo.nodes.iter().filter(|n| n.role == role).count() != 1 {
                return Err(config_err("topology.nodes", format!("exactly one {role:?} node required")));
            }
        }
        if topo.nodes.iter().filter(|n| n.role == Role::Attacker).count() > 1 {
            return Err(config_err("topology.nodes", "at most one attacker node"));
        }

        let framing = match (self.crypto.framing, &self.crypto.fidelity_iv) {
            (FramingName::Canonical, _) => BodyFraming::Canonical,
            (FramingName::Fidelity, Some(iv)) => {
                let bytes = hex::decode(iv).map_err(|e| config_err("crypto.fidelity_iv", e.to_string()))?;
                BodyFraming::Fidelity(Iv::from_slice(&bytes).map_err(|e| config_err("crypto.fidelity_iv", e.to_string()))?)
            }
            (FramingName::Fidelity, None) => {
                return Err(config_err("crypto.fidelity_iv", "fidelity framing requires fidelity_iv"))
            }
        };
        if self.mode == TransportMode::Encrypted && self.crypto.key.is_none() {
            return Err(config_err("crypto.key", "encrypted mode requires a key"));
        }

        let d = &self.device;
        let device = DeviceConfig {
            device_id: d.device_id.clone(),
            mode: self.mode,
            sample_interval_ms: d.sample_interval_ms,
            key: self.crypto.key,
            encoding: self.crypto.encoding,
            framing,
            hr_range: d.hr_range,
            temp_range: (tenths("device.temp_range", d.temp_range.0)?, tenths("device.temp_range", d.temp_range.1)?),
            retry_timeout_ms: d.retry_timeout_ms,
            max_retries: d.max_retries,
            script: d.script.clone(),
        };
        device.validate().map_err(|e| config_err("device", e.to_string()))?;
        let s = &self.server;
        let server = ServerConfig {
            mode: self.mode,
            key: self.crypto.key,
            encoding: self.crypto.encoding,
            framing,
            validate_ranges: s.validate_ranges,
            replay_defense: s.replay_defense,
            hr_bounds: s.hr_bounds,
            temp_bounds: (tenths("server.temp_bounds", s.temp_bounds.0)?, tenths("server.temp_bounds", s.temp_bounds.1)?),
        };

        if let Some(plan) = &self.attack {
            if !topo.nodes.iter().any(|n| n.role == Role::Attacker) {
                return Err(config_err("attack", "attack needs an attacker node in the topology"));
            }
            for (key, ip) in [("attack.victim_ip", plan.victim_ip), ("attack.peer_ip", plan.peer_ip)] {
                if !seen_ip.contains(&ip) {
                    return Err(config_err(key, format!("{ip} is not in the topology")));
                }
            }
            plan.validate(self.mode, framing).map_err(|e| config_err("attack", e.to_string()))?;
        }

        let models = match self.models {
            ModelsSection::Named(name) => {
                BenchPreset::named(&name).map_err(|_| config_err("models", format!("unknown preset {name:?}")))?
            }
            ModelsSection::Inline(preset) => *preset,
        };
        models.validate().map_err(|e| config_err("models", e.to_string()))?;

        Ok(ScenarioConfig {
            name: self.name,
            seed,
            messages: self.messages,
            mode: self.mode,
            topology: self.topology,
            key: self.crypto.key,
            encoding: self.crypto.encoding,
            framing,
            device,
            server,
            attack: self.attack,
            models,
            output: self.output,
        })
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("missing field") || msg.starts_with("unknown field"))
            .unwrap_or("<document>")
            .to_string();
        CliError::Config { key, message: msg }
    })?;
    raw.validate()
}

/// Loads a config file, or a bundled fixture when `path` names one and no
/// such file exists.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    if !path.exists() {
        if let Some(text) = path.to_str().and_then(fixture) {
            return parse_config(text);
        }
    }
    let text = fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl ScenarioConfig {
    pub fn run_id(&self) -> String {
        format!("{}-{:016x}", self.name, self.seed)
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            propagation_ms: self.topology.propagation_ms,
            arp_timeout_ms: self.topology.arp_timeout_ms,
            arp_ttl_ms: self.topology.arp_ttl_ms,
        }
    }

    pub fn testbed_spec(&self) -> TestbedSpec {
        TestbedSpec {
            run_id: self.run_id(),
            seed: self.seed,
            nodes: self.topology.nodes.clone(),
            net: self.net_config(),
            loss: self.topology.loss,
            device: self.device.clone(),
            server: self.server.clone(),
            attack: self.attack.clone(),
            messages: self.messages,
        }
    }

    pub fn bench_params(&self) -> BenchParams {
        let server_ip = self
            .topology
            .nodes
            .iter()
            .find(|n| n.role == Role::Server)
            .expect("validated")
            .ip;
        let mut params = BenchParams::new(self.seed, self.messages);
        params.device_id = self.device.device_id.clone();
        params.server_ip = server_ip;
        params.hr_range = self.device.hr_range;
        params.temp_range = self.device.temp_range;
        if let Some(key) = self.key {
            params.key = key;
        }
        params.encoding = self.encoding;
        params.framing = self.framing;
        params
    }
}
