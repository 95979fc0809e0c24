//! Shared helpers for integration tests: scripted topologies and trace
//! parsing.

use vanetsim::geometry::Position;
use vanetsim::scenario::{Protocol, ScenarioConfig};

/// Config for scripted static-topology runs: no auto traffic, no jitter.
pub fn static_cfg(protocol: Protocol, nodes: u32, area: (f64, f64), range: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.protocol = protocol;
    cfg.nodes = nodes;
    cfg.connections = 0;
    cfg.area_w = area.0;
    cfg.area_h = area.1;
    cfg.range_m = range;
    cfg.speed_min = 0.0;
    cfg.speed_max = 0.0;
    cfg.pause_s = 0.0;
    cfg.sim_time_s = 30.0;
    cfg.jitter_bound_s = 0.0;
    cfg
}

/// Nodes on a horizontal line: index i at (i * spacing, y).
pub fn line_positions(n: usize, spacing: f64, y: f64) -> Vec<Position> {
    (0..n).map(|i| Position::new(i as f64 * spacing, y)).collect()
}

/// Parse one trace line into (time, node, event, tag, reason).
pub fn parse_trace(line: &str) -> (f64, u32, String, String, String) {
    let parts: Vec<&str> = line.split(" | ").collect();
    assert_eq!(parts.len(), 5, "malformed trace line: {line}");
    (
        parts[0].parse().unwrap(),
        parts[1].parse().unwrap(),
        parts[2].strip_prefix("EVT ").unwrap().to_string(),
        parts[3].to_string(),
        parts[4].to_string(),
    )
}

/// Nodes that received the given data packet, in arrival order.
pub fn recv_sequence(trace: &[String], pkt_id: u64) -> Vec<u32> {
    let tag = pkt_id.to_string();
    trace
        .iter()
        .map(|l| parse_trace(l))
        .filter(|(_, _, evt, t, _)| evt == "RECV" && *t == tag)
        .map(|(_, node, _, _, _)| node)
        .collect()
}

/// Count trace events matching kind and tag.
pub fn count_events(trace: &[String], evt: &str, tag: &str) -> usize {
    trace
        .iter()
        .map(|l| parse_trace(l))
        .filter(|(_, _, e, t, _)| e == evt && t == tag)
        .count()
}
