//! Packets and routing headers: the units routed by AODV, DSR and GPSR.

use crate::aodv::{Rerr, Rrep, Rreq};
use crate::dsr::{DsrRouteError, DsrRrep, DsrRreq, SourceRouteHeader};
use crate::engine::SimTime;
use crate::gpsr::{GpsrBeacon, GpsrHeader};
use crate::ids::{FlowId, NodeId, PacketId};

/// Why a data packet never reached its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// Drop-tail interface queue was full.
    QueueOverflow,
    /// Route discovery failed or the pending buffer overflowed.
    NoRoute,
    /// The next hop moved out of range while the packet was en route.
    LinkBreak,
    /// Perimeter traversal completed a face tour without progress.
    DestUnreachable,
    /// No usable (planarized) neighbor to forward to.
    NoNeighbor,
    /// Header inconsistent with the node processing it.
    Malformed,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::QueueOverflow,
        DropReason::NoRoute,
        DropReason::LinkBreak,
        DropReason::DestUnreachable,
        DropReason::NoNeighbor,
        DropReason::Malformed,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DropReason::QueueOverflow => "QUEUE_OVERFLOW",
            DropReason::NoRoute => "NO_ROUTE",
            DropReason::LinkBreak => "LINK_BREAK",
            DropReason::DestUnreachable => "DEST_UNREACHABLE",
            DropReason::NoNeighbor => "NO_NEIGHBOR",
            DropReason::Malformed => "MALFORMED",
        }
    }

    pub fn from_token(s: &str) -> Option<DropReason> {
        DropReason::ALL.into_iter().find(|r| r.token() == s)
    }
}

/// Per-protocol routing state carried inside a data packet.
#[derive(Debug, Clone)]
pub enum RouteHeader {
    /// AODV forwards hop by hop from node route tables.
    None,
    Dsr(SourceRouteHeader),
    Gpsr(GpsrHeader),
}

/// An application data packet (CBR payload) with its ledger identity.
#[derive(Debug, Clone)]
pub struct DataPacket {
    pub id: PacketId,
    pub flow: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload_bytes: u32,
    pub sent_at: SimTime,
    /// Hops traversed so far; incremented on every frame arrival.
    pub hops: u32,
    pub route: RouteHeader,
}

/// Everything that can ride inside a link-layer frame.
#[derive(Debug, Clone)]
pub enum PacketBody {
    Data(DataPacket),
    AodvRreq(Rreq),
    AodvRrep(Rrep),
    AodvRerr(Rerr),
    DsrRreq(DsrRreq),
    DsrRrep(DsrRrep),
    DsrError(DsrRouteError),
    Beacon(GpsrBeacon),
}

impl PacketBody {
    pub fn is_data(&self) -> bool {
        matches!(self, PacketBody::Data(_))
    }

    /// Stable tag used in trace output for control packets.
    pub fn label(&self) -> &'static str {
        match self {
            PacketBody::Data(_) => "DATA",
            PacketBody::AodvRreq(_) => "RREQ",
            PacketBody::AodvRrep(_) => "RREP",
            PacketBody::AodvRerr(_) => "RERR",
            PacketBody::DsrRreq(_) => "DSR_RREQ",
            PacketBody::DsrRrep(_) => "DSR_RREP",
            PacketBody::DsrError(_) => "DSR_RERR",
            PacketBody::Beacon(_) => "BEACON",
        }
    }
}
