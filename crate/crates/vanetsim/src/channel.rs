//! Abstract wireless channel: unit-disk connectivity, per-node drop-tail FIFO
//! interface queue and serialization delay.
//!
//! The MAC named in the experiment tables is abstracted to a FIFO queue plus
//! serialization delay and a small uniform per-hop jitter; no contention,
//! collisions or capture. Propagation is a deterministic closed disk: a frame
//! is delivered iff the receiver is within `range_m` of the sender when the
//! transmission completes. A unicast to a node out of range at that instant
//! fails and is reported to the owning routing protocol; broadcasts never
//! generate failure feedback.

use std::collections::VecDeque;

use crate::engine::SimTime;
use crate::geometry::{distance_sq, Position};
use crate::ids::NodeId;
use crate::packet::PacketBody;

/// Link-layer destination of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameDst {
    Unicast(NodeId),
    Broadcast,
}

/// A link-layer frame: one routed packet plus addressing and size.
#[derive(Debug, Clone)]
pub struct Frame {
    pub src: NodeId,
    pub dst: FrameDst,
    pub size_bytes: u32,
    pub enqueued_at: SimTime,
    pub body: PacketBody,
}

/// Channel-wide parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub range_m: f64,
    pub bitrate_bps: f64,
    /// Upper bound of the uniform per-hop processing jitter draw, seconds.
    pub jitter_bound_s: f64,
}

impl ChannelParams {
    pub fn validate(&self) {
        assert!(self.range_m > 0.0);
        assert!(self.bitrate_bps > 0.0);
        assert!(self.jitter_bound_s >= 0.0);
    }

    /// Serialization delay for a frame of `size_bytes`: size·8/bitrate.
    pub fn serialization_delay_s(&self, size_bytes: u32) -> f64 {
        f64::from(size_bytes) * 8.0 / self.bitrate_bps
    }

    pub fn in_range(&self, a: Position, b: Position) -> bool {
        distance_sq(a, b) <= self.range_m * self.range_m
    }
}

/// Drop-tail FIFO of frames awaiting transmission. The frame currently being
/// transmitted stays at the head until it completes.
#[derive(Debug)]
pub struct InterfaceQueue {
    capacity: usize,
    pending: VecDeque<Frame>,
    transmitting: bool,
    max_occupancy: usize,
}

impl InterfaceQueue {
    pub fn new(capacity: usize) -> Self {
        InterfaceQueue {
            capacity,
            pending: VecDeque::new(),
            transmitting: false,
            max_occupancy: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Highest occupancy observed so far (instrumentation for the queue-bound
    /// invariant).
    pub fn max_occupancy(&self) -> usize {
        self.max_occupancy
    }

    /// Append a frame, or hand it back when the queue is full. Overflow is a
    /// modeled outcome, not an error.
    pub fn try_enqueue(&mut self, frame: Frame) -> Result<(), Frame> {
        if self.pending.len() >= self.capacity {
            return Err(frame);
        }
        self.pending.push_back(frame);
        self.max_occupancy = self.max_occupancy.max(self.pending.len());
        Ok(())
    }

    pub fn head(&self) -> Option<&Frame> {
        self.pending.front()
    }

    pub fn pop_head(&mut self) -> Option<Frame> {
        self.pending.pop_front()
    }

    pub fn is_transmitting(&self) -> bool {
        self.transmitting
    }

    pub fn set_transmitting(&mut self, on: bool) {
        self.transmitting = on;
    }
}

/// Exact neighbor set: every other node within `range` of `node` at the
/// instant the positions were sampled.
pub fn neighbors_within(positions: &[Position], node: usize, range: f64) -> Vec<NodeId> {
    let range_sq = range * range;
    positions
        .iter()
        .enumerate()
        .filter(|&(j, &p)| j != node && distance_sq(positions[node], p) <= range_sq)
        .map(|(j, _)| NodeId(j as u32))
        .collect()
}
