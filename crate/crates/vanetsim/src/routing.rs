//! Glue between per-node protocol handlers and the engine.
//!
//! Handlers mutate only their own node's protocol state and emit actions;
//! the engine applies them (frames into the interface queue, ledger updates,
//! timer scheduling), so one event at a time mutates world state.

use crate::channel::Frame;
use crate::engine::SimTime;
use crate::geometry::Position;
use crate::ids::NodeId;
use crate::packet::{DataPacket, DropReason};

/// Protocol timers delivered back to the owning node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    AodvRetry { dest: NodeId },
    DsrRetry { dest: NodeId },
}

/// What a handler asks the engine to do.
#[derive(Debug)]
pub enum Action {
    /// Hand a frame to this node's interface queue.
    Send(Frame),
    /// The packet reached its destination.
    Deliver(DataPacket),
    /// The packet is lost for the stated reason.
    Drop(DataPacket, DropReason),
    /// A control packet was discarded; counted, with a diagnostic tag.
    CtrlDrop(&'static str),
    /// Arm a protocol timer.
    Timer(TimerKind, SimTime),
}

/// Immutable per-event context handed to handlers.
#[derive(Debug, Clone, Copy)]
pub struct NodeCtx {
    pub now: SimTime,
    pub id: NodeId,
    pub pos: Position,
}
