//! CBR flow generation: random source/destination pairing and constant-rate
//! emission times.

use crate::engine::{RngStream, SimTime};
use crate::ids::{FlowId, NodeId};

/// Window over which flow start times are staggered, seconds.
pub const START_WINDOW_S: f64 = 10.0;

/// One constant-bit-rate flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrFlow {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_pps: f64,
    pub packet_bytes: u32,
    pub start: SimTime,
    pub stop: SimTime,
}

impl CbrFlow {
    /// Emission instant of packet `k`, computed by index so rounding never
    /// accumulates: `start + k/rate`.
    pub fn emission_at(&self, k: u64) -> SimTime {
        self.start.offset(k as f64 / self.rate_pps)
    }
}

/// Build `n_connections` flows with distinct ordered (src, dst) pairs drawn
/// uniformly without replacement, starts staggered uniformly over
/// `[0, START_WINDOW_S]` and stop at simulation end.
pub fn build_flows(
    n_connections: u32,
    n_nodes: u32,
    rate_pps: f64,
    packet_bytes: u32,
    sim_end: SimTime,
    rng: &mut RngStream,
) -> Result<Vec<CbrFlow>, String> {
    let max_pairs = u64::from(n_nodes) * u64::from(n_nodes.saturating_sub(1));
    if u64::from(n_connections) > max_pairs {
        return Err(format!(
            "connections = {n_connections} exceeds the {max_pairs} distinct ordered pairs of {n_nodes} nodes"
        ));
    }
    let mut pairs = Vec::with_capacity(n_connections as usize);
    let mut used = std::collections::HashSet::new();
    while pairs.len() < n_connections as usize {
        let src = rng.below(u64::from(n_nodes)) as u32;
        let dst = rng.below(u64::from(n_nodes)) as u32;
        if src == dst || !used.insert((src, dst)) {
            continue;
        }
        pairs.push((NodeId(src), NodeId(dst)));
    }
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, (src, dst))| CbrFlow {
            id: FlowId(i as u32),
            src,
            dst,
            rate_pps,
            packet_bytes,
            start: SimTime::new(rng.uniform(0.0, START_WINDOW_S)),
            stop: sim_end,
        })
        .collect())
}
