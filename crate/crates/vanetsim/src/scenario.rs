//! Scenario configuration: the three experiment presets, a flat
//! `key = value` config format with `#` comments, and sweep specifications.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::aodv::AodvParams;
use crate::dsr::DsrParams;
pub use crate::gpsr::Planarization;
use crate::gpsr::GpsrParams;

/// Routing protocol under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Aodv,
    Dsr,
    Gpsr,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Aodv, Protocol::Dsr, Protocol::Gpsr];

    pub fn token(self) -> &'static str {
        match self {
            Protocol::Aodv => "aodv",
            Protocol::Dsr => "dsr",
            Protocol::Gpsr => "gpsr",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Some(Protocol::Aodv),
            "dsr" => Some(Protocol::Dsr),
            "gpsr" => Some(Protocol::Gpsr),
            _ => None,
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("line {line}: expected `key = value`")]
    BadSyntax { line: usize },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("invalid `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub nodes: u32,
    pub connections: u32,
    pub area_w: f64,
    pub area_h: f64,
    pub range_m: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_s: f64,
    pub sim_time_s: f64,
    pub packet_bytes: u32,
    pub queue_frames: usize,
    pub cbr_rate_pps: f64,
    pub bitrate_bps: f64,
    pub jitter_bound_s: f64,
    pub seed: u64,
    pub trace: bool,
    pub aodv: AodvParams,
    pub dsr: DsrParams,
    pub gpsr: GpsrParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Aodv,
            nodes: 30,
            connections: 10,
            area_w: 500.0,
            area_h: 500.0,
            range_m: 250.0,
            speed_min: 20.0,
            speed_max: 20.0,
            pause_s: 0.0,
            sim_time_s: 600.0,
            packet_bytes: 512,
            queue_frames: 50,
            cbr_rate_pps: 4.0,
            bitrate_bps: 2_000_000.0,
            jitter_bound_s: 0.001,
            seed: 1,
            trace: false,
            aodv: AodvParams::default(),
            dsr: DsrParams::default(),
            gpsr: GpsrParams::default(),
        }
    }
}

/// Names of the experiment presets.
pub const PRESET_NAMES: [&str; 3] = ["scenario1", "scenario2", "scenario3"];

/// Compiled-in presets mirroring the three experiment parameter tables.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    match name {
        // Varying offered load: 300-node field, connection count swept.
        "scenario1" => {
            cfg.nodes = 300;
            cfg.connections = 30;
            cfg.speed_min = 20.0;
            cfg.speed_max = 20.0;
            cfg.pause_s = 0.0;
            cfg.queue_frames = 50;
        }
        // Varying pause time: 200 nodes, 100 connections, speed 10 m/s.
        "scenario2" => {
            cfg.nodes = 200;
            cfg.connections = 100;
            cfg.speed_min = 10.0;
            cfg.speed_max = 10.0;
            cfg.pause_s = 50.0;
            cfg.queue_frames = 64;
        }
        // Varying node speed: 200 nodes, 100 connections, pause 10 s.
        "scenario3" => {
            cfg.nodes = 200;
            cfg.connections = 100;
            cfg.speed_min = 10.0;
            cfg.speed_max = 10.0;
            cfg.pause_s = 10.0;
            cfg.queue_frames = 50;
        }
        _ => return None,
    }
    Some(cfg)
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Connections,
    Pause,
    Speed,
    Nodes,
}

impl SweepParam {
    pub fn token(self) -> &'static str {
        match self {
            SweepParam::Connections => "connections",
            SweepParam::Pause => "pause",
            SweepParam::Speed => "speed",
            SweepParam::Nodes => "nodes",
        }
    }

    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "connections" => Some(SweepParam::Connections),
            "pause" => Some(SweepParam::Pause),
            "speed" => Some(SweepParam::Speed),
            "nodes" => Some(SweepParam::Nodes),
            _ => None,
        }
    }

    /// Apply one swept value to a config.
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<(), ScenarioError> {
        let as_count = |key: &str| -> Result<u32, ScenarioError> {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(ScenarioError::Invalid {
                    key: key.to_string(),
                    msg: format!("swept value {value} must be a positive integer"),
                });
            }
            Ok(value as u32)
        };
        match self {
            SweepParam::Connections => cfg.connections = as_count("connections")?,
            SweepParam::Nodes => cfg.nodes = as_count("nodes")?,
            SweepParam::Pause => cfg.pause_s = value,
            SweepParam::Speed => {
                cfg.speed_min = value;
                cfg.speed_max = value;
            }
        }
        Ok(())
    }

    /// The value this parameter currently has in a config (for reporting).
    pub fn read(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            SweepParam::Connections => f64::from(cfg.connections),
            SweepParam::Nodes => f64::from(cfg.nodes),
            SweepParam::Pause => cfg.pause_s,
            SweepParam::Speed => cfg.speed_max,
        }
    }
}

/// A batch: one base config, one varied parameter, a value list and the
/// seeds run at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// The natural sweep of each preset. `vary_nodes` switches the first
/// experiment from sweeping connections to sweeping the node count, the two
/// readings its parameter table supports.
pub fn preset_sweep(name: &str, seeds: Vec<u64>, vary_nodes: bool) -> Option<SweepSpec> {
    let base = preset(name)?;
    let (param, values) = match name {
        "scenario1" => {
            let values = vec![30.0, 50.0, 150.0, 300.0];
            if vary_nodes {
                (SweepParam::Nodes, values)
            } else {
                (SweepParam::Connections, values)
            }
        }
        "scenario2" => (SweepParam::Pause, vec![50.0, 100.0, 150.0, 200.0, 250.0]),
        "scenario3" => (SweepParam::Speed, vec![10.0, 30.0, 50.0, 70.0, 90.0]),
        _ => return None,
    };
    Some(SweepSpec {
        base,
        param,
        values,
        seeds,
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |key: &str, msg: String| -> Result<(), ScenarioError> {
            Err(ScenarioError::Invalid {
                key: key.to_string(),
                msg,
            })
        };
        if self.nodes < 1 {
            return bad("nodes", "at least one node required".into());
        }
        let max_pairs = u64::from(self.nodes) * u64::from(self.nodes - 1);
        if u64::from(self.connections) > max_pairs {
            return bad(
                "connections",
                format!("{} exceeds {} possible ordered pairs", self.connections, max_pairs),
            );
        }
        if self.area_w <= 0.0 || self.area_h <= 0.0 {
            return bad("area", "area dimensions must be positive".into());
        }
        if self.range_m <= 0.0 {
            return bad("range", format!("must be positive, got {}", self.range_m));
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return bad(
                "speed",
                format!("need 0 <= min <= max, got {}..{}", self.speed_min, self.speed_max),
            );
        }
        if self.pause_s < 0.0 {
            return bad("pause", "must be non-negative".into());
        }
        if self.sim_time_s <= 0.0 {
            return bad("sim_time", "must be positive".into());
        }
        if self.packet_bytes == 0 {
            return bad("packet_size", "must be positive".into());
        }
        if self.cbr_rate_pps <= 0.0 {
            return bad("cbr_rate", "must be positive".into());
        }
        if self.bitrate_bps <= 0.0 {
            return bad("bitrate", "must be positive".into());
        }
        if self.jitter_bound_s < 0.0 {
            return bad("jitter_bound", "must be non-negative".into());
        }
        Ok(())
    }

    /// Canonical flat-text rendering; `load_str(dump())` is the identity.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("protocol", self.protocol.token().to_string());
        kv("nodes", self.nodes.to_string());
        kv("connections", self.connections.to_string());
        kv("area_w", self.area_w.to_string());
        kv("area_h", self.area_h.to_string());
        kv("range", self.range_m.to_string());
        kv("speed_min", self.speed_min.to_string());
        kv("speed_max", self.speed_max.to_string());
        kv("pause", self.pause_s.to_string());
        kv("sim_time", self.sim_time_s.to_string());
        kv("packet_size", self.packet_bytes.to_string());
        kv("queue_length", self.queue_frames.to_string());
        kv("cbr_rate", self.cbr_rate_pps.to_string());
        kv("bitrate", self.bitrate_bps.to_string());
        kv("jitter_bound", self.jitter_bound_s.to_string());
        kv(
            "planarization",
            match self.gpsr.planarization {
                Planarization::Gabriel => "gg".to_string(),
                Planarization::Rng => "rng".to_string(),
            },
        );
        kv("seed", self.seed.to_string());
        kv("trace", self.trace.to_string());
        kv("aodv_route_lifetime", self.aodv.route_lifetime_s.to_string());
        kv("aodv_seen_expiry", self.aodv.seen_expiry_s.to_string());
        kv("aodv_retry_interval", self.aodv.retry_interval_s.to_string());
        kv("aodv_max_retries", self.aodv.max_retries.to_string());
        kv("aodv_pending_capacity", self.aodv.pending_capacity.to_string());
        kv("aodv_rreq_bytes", self.aodv.rreq_bytes.to_string());
        kv("aodv_rrep_bytes", self.aodv.rrep_bytes.to_string());
        kv("aodv_rerr_bytes", self.aodv.rerr_bytes.to_string());
        kv("dsr_cache_capacity", self.dsr.cache_capacity.to_string());
        kv("dsr_seen_expiry", self.dsr.seen_expiry_s.to_string());
        kv("dsr_retry_interval", self.dsr.retry_interval_s.to_string());
        kv("dsr_max_retries", self.dsr.max_retries.to_string());
        kv("dsr_pending_capacity", self.dsr.pending_capacity.to_string());
        kv("dsr_rreq_base_bytes", self.dsr.rreq_base_bytes.to_string());
        kv("dsr_rreq_per_hop_bytes", self.dsr.rreq_per_hop_bytes.to_string());
        kv("dsr_rrep_base_bytes", self.dsr.rrep_base_bytes.to_string());
        kv("dsr_rrep_per_hop_bytes", self.dsr.rrep_per_hop_bytes.to_string());
        kv("dsr_rerr_bytes", self.dsr.rerr_bytes.to_string());
        kv("dsr_data_base_bytes", self.dsr.data_base_bytes.to_string());
        kv("dsr_data_per_hop_bytes", self.dsr.data_per_hop_bytes.to_string());
        kv("gpsr_beacon_interval", self.gpsr.beacon_interval_s.to_string());
        kv("gpsr_beacon_jitter", self.gpsr.beacon_jitter_s.to_string());
        kv("gpsr_staleness_timeout", self.gpsr.staleness_timeout_s.to_string());
        kv("gpsr_piggyback", self.gpsr.piggyback_position.to_string());
        kv("gpsr_beacon_bytes", self.gpsr.beacon_bytes.to_string());
        kv("gpsr_data_overhead_bytes", self.gpsr.data_overhead_bytes.to_string());
        s
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ScenarioError> {
        macro_rules! parse {
            ($ty:ty) => {
                value
                    .parse::<$ty>()
                    .map_err(|e| ScenarioError::BadValue {
                        line,
                        key: key.to_string(),
                        msg: e.to_string(),
                    })?
            };
        }
        match key {
            "protocol" => {
                self.protocol = Protocol::parse(value).ok_or_else(|| ScenarioError::BadValue {
                    line,
                    key: key.to_string(),
                    msg: format!("unknown protocol `{value}`"),
                })?;
            }
            "nodes" => self.nodes = parse!(u32),
            "connections" => self.connections = parse!(u32),
            "area_w" => self.area_w = parse!(f64),
            "area_h" => self.area_h = parse!(f64),
            "range" => self.range_m = parse!(f64),
            "speed_min" => self.speed_min = parse!(f64),
            "speed_max" => self.speed_max = parse!(f64),
            "pause" => self.pause_s = parse!(f64),
            "sim_time" => self.sim_time_s = parse!(f64),
            "packet_size" => self.packet_bytes = parse!(u32),
            "queue_length" => self.queue_frames = parse!(usize),
            "cbr_rate" => self.cbr_rate_pps = parse!(f64),
            "bitrate" => self.bitrate_bps = parse!(f64),
            "jitter_bound" => self.jitter_bound_s = parse!(f64),
            "planarization" => {
                self.gpsr.planarization = match value.to_ascii_lowercase().as_str() {
                    "gg" | "gabriel" => Planarization::Gabriel,
                    "rng" => Planarization::Rng,
                    other => {
                        return Err(ScenarioError::BadValue {
                            line,
                            key: key.to_string(),
                            msg: format!("unknown planarization `{other}`"),
                        })
                    }
                };
            }
            "seed" => self.seed = parse!(u64),
            "trace" => self.trace = parse!(bool),
            "aodv_route_lifetime" => self.aodv.route_lifetime_s = parse!(f64),
            "aodv_seen_expiry" => self.aodv.seen_expiry_s = parse!(f64),
            "aodv_retry_interval" => self.aodv.retry_interval_s = parse!(f64),
            "aodv_max_retries" => self.aodv.max_retries = parse!(u32),
            "aodv_pending_capacity" => self.aodv.pending_capacity = parse!(usize),
            "aodv_rreq_bytes" => self.aodv.rreq_bytes = parse!(u32),
            "aodv_rrep_bytes" => self.aodv.rrep_bytes = parse!(u32),
            "aodv_rerr_bytes" => self.aodv.rerr_bytes = parse!(u32),
            "dsr_cache_capacity" => self.dsr.cache_capacity = parse!(usize),
            "dsr_seen_expiry" => self.dsr.seen_expiry_s = parse!(f64),
            "dsr_retry_interval" => self.dsr.retry_interval_s = parse!(f64),
            "dsr_max_retries" => self.dsr.max_retries = parse!(u32),
            "dsr_pending_capacity" => self.dsr.pending_capacity = parse!(usize),
            "dsr_rreq_base_bytes" => self.dsr.rreq_base_bytes = parse!(u32),
            "dsr_rreq_per_hop_bytes" => self.dsr.rreq_per_hop_bytes = parse!(u32),
            "dsr_rrep_base_bytes" => self.dsr.rrep_base_bytes = parse!(u32),
            "dsr_rrep_per_hop_bytes" => self.dsr.rrep_per_hop_bytes = parse!(u32),
            "dsr_rerr_bytes" => self.dsr.rerr_bytes = parse!(u32),
            "dsr_data_base_bytes" => self.dsr.data_base_bytes = parse!(u32),
            "dsr_data_per_hop_bytes" => self.dsr.data_per_hop_bytes = parse!(u32),
            "gpsr_beacon_interval" => self.gpsr.beacon_interval_s = parse!(f64),
            "gpsr_beacon_jitter" => self.gpsr.beacon_jitter_s = parse!(f64),
            "gpsr_staleness_timeout" => self.gpsr.staleness_timeout_s = parse!(f64),
            "gpsr_piggyback" => self.gpsr.piggyback_position = parse!(bool),
            "gpsr_beacon_bytes" => self.gpsr.beacon_bytes = parse!(u32),
            "gpsr_data_overhead_bytes" => self.gpsr.data_overhead_bytes = parse!(u32),
            _ => {
                return Err(ScenarioError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parse a config from flat text. Keys `protocol`, `nodes` and
    /// `connections` are required; everything else falls back to defaults.
    pub fn load_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let mut cfg = ScenarioConfig::default();
        let mut saw = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::BadSyntax { line });
            };
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value, line)?;
            saw.insert(key.to_string());
        }
        for required in ["protocol", "nodes", "connections"] {
            if !saw.contains(required) {
                return Err(ScenarioError::MissingKey {
                    key: required.to_string(),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file path or a preset name.
    pub fn load(path_or_preset: &str) -> Result<ScenarioConfig, ScenarioError> {
        if let Some(cfg) = preset(path_or_preset) {
            return Ok(cfg);
        }
        let path = Path::new(path_or_preset);
        if !path.exists() {
            return Err(ScenarioError::Other(format!(
                "`{path_or_preset}` is neither a preset ({}) nor a config file",
                PRESET_NAMES.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path)?;
        Self::load_str(&text)
    }
}
