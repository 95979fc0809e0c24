//! Dynamic Source Routing.
//!
//! Discovery floods a request whose route record accumulates the traversed
//! nodes; the destination copies the completed record into a reply that
//! travels the reversed route (links are symmetric by construction). Data
//! packets carry the full source route in their header and traverse exactly
//! that sequence. A transmission failure sends a route error back along the
//! traversed prefix; every node receiving it truncates all cached routes at
//! the broken hop.
//!
//! Request processing applies four rules in order: discard if the
//! (source, request-id) pair was seen recently; discard if this host is
//! already in the route record; reply if this host is the destination;
//! otherwise append this host and rebroadcast.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::channel::{Frame, FrameDst};
use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::packet::{DataPacket, DropReason, PacketBody, RouteHeader};
use crate::routing::{Action, NodeCtx, TimerKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsrParams {
    pub cache_capacity: usize,
    pub seen_expiry_s: f64,
    pub retry_interval_s: f64,
    pub max_retries: u32,
    pub pending_capacity: usize,
    /// Control sizes: request is `rreq_base + rreq_per_hop·|record|`, reply
    /// is `rrep_base + rrep_per_hop·|route|`.
    pub rreq_base_bytes: u32,
    pub rreq_per_hop_bytes: u32,
    pub rrep_base_bytes: u32,
    pub rrep_per_hop_bytes: u32,
    pub rerr_bytes: u32,
    /// Source-route header overhead on data frames.
    pub data_base_bytes: u32,
    pub data_per_hop_bytes: u32,
}

impl Default for DsrParams {
    fn default() -> Self {
        DsrParams {
            cache_capacity: 64,
            seen_expiry_s: 30.0,
            retry_interval_s: 1.0,
            max_retries: 2,
            pending_capacity: 64,
            rreq_base_bytes: 32,
            rreq_per_hop_bytes: 4,
            rrep_base_bytes: 32,
            rrep_per_hop_bytes: 4,
            rerr_bytes: 32,
            data_base_bytes: 16,
            data_per_hop_bytes: 4,
        }
    }
}

/// In-packet source route with a cursor that advances hop by hop. At every
/// node holding the packet, `route[cursor - 1]` is that node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRouteHeader {
    pub route: Vec<NodeId>,
    pub cursor: usize,
}

/// Route request with the accumulated route record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRreq {
    pub src: NodeId,
    pub request_id: u64,
    pub dest: NodeId,
    pub record: Vec<NodeId>,
}

/// Route reply carrying the full discovered route; travels the reversed
/// route, `back_pos` marking the current holder's index in `route`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRrep {
    pub route: Vec<NodeId>,
    pub back_pos: usize,
}

/// Route error: the broken hop, source-routed back toward the packet origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRouteError {
    pub detecting: NodeId,
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    pub header: SourceRouteHeader,
}

#[derive(Debug, Default)]
struct PendingDiscovery {
    buffer: VecDeque<DataPacket>,
    retries: u32,
}

/// Per-node DSR state: route cache, request-id counter, recently-seen
/// request pairs and per-destination pending buffers.
#[derive(Debug, Default)]
pub struct DsrNode {
    request_id: u64,
    /// Insertion-ordered cache; every route starts at this node.
    cache: Vec<Vec<NodeId>>,
    seen: HashMap<(NodeId, u64), SimTime>,
    pending: BTreeMap<NodeId, PendingDiscovery>,
}

impl DsrNode {
    pub fn new() -> Self {
        DsrNode::default()
    }

    pub fn request_id(&self) -> u64 {
        self.request_id
    }

    pub fn cached_routes(&self) -> &[Vec<NodeId>] {
        &self.cache
    }

    pub fn buffered(&self, dest: NodeId) -> usize {
        self.pending.get(&dest).map_or(0, |p| p.buffer.len())
    }

    /// Shortest cached prefix ending at `dest`; insertion order breaks ties.
    pub fn lookup(&self, dest: NodeId) -> Option<Vec<NodeId>> {
        let mut best: Option<&[NodeId]> = None;
        for route in &self.cache {
            if let Some(pos) = route.iter().position(|&n| n == dest) {
                if pos >= 1 && best.map_or(true, |b| pos + 1 < b.len()) {
                    best = Some(&route[..=pos]);
                }
            }
        }
        best.map(<[NodeId]>::to_vec)
    }

    pub fn cache_insert(&mut self, p: &DsrParams, route: Vec<NodeId>) {
        if route.len() < 2 || self.cache.contains(&route) {
            return;
        }
        debug_assert!(no_duplicates(&route), "cached route must be a simple path");
        self.cache.push(route);
        if self.cache.len() > p.cache_capacity {
            self.cache.remove(0);
        }
    }

    /// Remove the directed hop (from, to): every cached route containing it
    /// is truncated at that point.
    pub fn truncate_at(&mut self, from: NodeId, to: NodeId) {
        let mut rewritten = Vec::with_capacity(self.cache.len());
        for mut route in std::mem::take(&mut self.cache) {
            if let Some(i) = route
                .windows(2)
                .position(|w| w[0] == from && w[1] == to)
            {
                route.truncate(i + 1);
            }
            if route.len() >= 2 && !rewritten.contains(&route) {
                rewritten.push(route);
            }
        }
        self.cache = rewritten;
    }

    fn data_frame(ctx: &NodeCtx, p: &DsrParams, next: NodeId, pkt: DataPacket) -> Frame {
        let hops = match &pkt.route {
            RouteHeader::Dsr(h) => h.route.len() as u32,
            _ => 0,
        };
        Frame {
            src: ctx.id,
            dst: FrameDst::Unicast(next),
            size_bytes: pkt.payload_bytes + p.data_base_bytes + p.data_per_hop_bytes * hops,
            enqueued_at: ctx.now,
            body: PacketBody::Data(pkt),
        }
    }

    fn ctrl_frame(ctx: &NodeCtx, dst: FrameDst, size: u32, body: PacketBody) -> Frame {
        Frame {
            src: ctx.id,
            dst,
            size_bytes: size,
            enqueued_at: ctx.now,
            body,
        }
    }

    /// Locally-originated data: attach a source route on a cache hit,
    /// otherwise buffer and start discovery.
    pub fn on_data_origin(
        &mut self,
        ctx: &NodeCtx,
        p: &DsrParams,
        mut pkt: DataPacket,
        out: &mut Vec<Action>,
    ) {
        if let Some(route) = self.lookup(pkt.dst) {
            let next = route[1];
            pkt.route = RouteHeader::Dsr(SourceRouteHeader { route, cursor: 2 });
            out.push(Action::Send(Self::data_frame(ctx, p, next, pkt)));
            return;
        }
        let dest = pkt.dst;
        let newly_pending = !self.pending.contains_key(&dest);
        let pending = self.pending.entry(dest).or_default();
        if pending.buffer.len() >= p.pending_capacity {
            let oldest = pending.buffer.pop_front().unwrap();
            out.push(Action::Drop(oldest, DropReason::NoRoute));
        }
        pending.buffer.push_back(pkt);
        if newly_pending {
            self.originate_rreq(ctx, p, dest, out);
        }
    }

    /// Broadcast a fresh request: the route record starts as a list with a
    /// single element containing this host.
    fn originate_rreq(&mut self, ctx: &NodeCtx, p: &DsrParams, dest: NodeId, out: &mut Vec<Action>) {
        self.request_id += 1;
        self.seen
            .insert((ctx.id, self.request_id), ctx.now.offset(p.seen_expiry_s));
        let rreq = DsrRreq {
            src: ctx.id,
            request_id: self.request_id,
            dest,
            record: vec![ctx.id],
        };
        let size = p.rreq_base_bytes + p.rreq_per_hop_bytes * rreq.record.len() as u32;
        out.push(Action::Send(Self::ctrl_frame(
            ctx,
            FrameDst::Broadcast,
            size,
            PacketBody::DsrRreq(rreq),
        )));
        out.push(Action::Timer(
            TimerKind::DsrRetry { dest },
            ctx.now.offset(p.retry_interval_s),
        ));
    }

    pub fn on_rreq(&mut self, ctx: &NodeCtx, p: &DsrParams, rreq: DsrRreq, out: &mut Vec<Action>) {
        // Rule 1: recently seen (source, request-id) pairs are discarded.
        let key = (rreq.src, rreq.request_id);
        if self.seen.get(&key).is_some_and(|&exp| ctx.now <= exp) {
            return;
        }
        self.seen.insert(key, ctx.now.offset(p.seen_expiry_s));
        // Rule 2: already listed in the route record.
        if rreq.record.contains(&ctx.id) {
            return;
        }
        // Rule 3: this host is the destination; reply with the full route.
        if rreq.dest == ctx.id {
            let mut route = rreq.record;
            route.push(ctx.id);
            debug_assert!(no_duplicates(&route));
            let back_pos = route.len() - 1;
            let next = route[back_pos - 1];
            let size = p.rrep_base_bytes + p.rrep_per_hop_bytes * route.len() as u32;
            out.push(Action::Send(Self::ctrl_frame(
                ctx,
                FrameDst::Unicast(next),
                size,
                PacketBody::DsrRrep(DsrRrep { route, back_pos }),
            )));
            return;
        }
        // Rule 4: append this host and rebroadcast.
        let mut fwd = rreq;
        fwd.record.push(ctx.id);
        debug_assert!(no_duplicates(&fwd.record));
        let size = p.rreq_base_bytes + p.rreq_per_hop_bytes * fwd.record.len() as u32;
        out.push(Action::Send(Self::ctrl_frame(
            ctx,
            FrameDst::Broadcast,
            size,
            PacketBody::DsrRreq(fwd),
        )));
    }

    pub fn on_rrep(&mut self, ctx: &NodeCtx, p: &DsrParams, rrep: DsrRrep, out: &mut Vec<Action>) {
        if rrep.route.get(rrep.back_pos) != Some(&ctx.id) {
            out.push(Action::CtrlDrop("DSR_RREP_MISROUTED"));
            return;
        }
        if rrep.back_pos == 0 {
            // Originator: cache the full route and flush buffered packets.
            let dest = *rrep.route.last().unwrap();
            self.cache_insert(p, rrep.route);
            if let Some(pending) = self.pending.remove(&dest) {
                for pkt in pending.buffer {
                    self.on_data_origin(ctx, p, pkt, out);
                }
            }
            return;
        }
        // Intermediate: learn the suffix toward the destination, then pass
        // the reply along the reversed route.
        self.cache_insert(p, rrep.route[rrep.back_pos..].to_vec());
        let back_pos = rrep.back_pos - 1;
        let next = rrep.route[back_pos];
        let size = p.rrep_base_bytes + p.rrep_per_hop_bytes * rrep.route.len() as u32;
        out.push(Action::Send(Self::ctrl_frame(
            ctx,
            FrameDst::Unicast(next),
            size,
            PacketBody::DsrRrep(DsrRrep {
                route: rrep.route,
                back_pos,
            }),
        )));
    }

    /// Source-routed data: advance the cursor and unicast to the next listed
    /// node; deliver at the end of the route.
    pub fn on_data_frame(
        &mut self,
        ctx: &NodeCtx,
        p: &DsrParams,
        mut pkt: DataPacket,
        out: &mut Vec<Action>,
    ) {
        let RouteHeader::Dsr(ref mut h) = pkt.route else {
            out.push(Action::Drop(pkt, DropReason::Malformed));
            return;
        };
        if h.cursor == 0 || h.route.get(h.cursor - 1) != Some(&ctx.id) {
            out.push(Action::Drop(pkt, DropReason::Malformed));
            return;
        }
        if h.cursor == h.route.len() {
            debug_assert_eq!(pkt.dst, ctx.id);
            out.push(Action::Deliver(pkt));
            return;
        }
        let next = h.route[h.cursor];
        h.cursor += 1;
        out.push(Action::Send(Self::data_frame(ctx, p, next, pkt)));
    }

    /// The unicast target is gone. For data, send a route error back along
    /// the traversed prefix and drop the packet; replies and errors are
    /// counted drops.
    pub fn on_tx_failed(&mut self, ctx: &NodeCtx, p: &DsrParams, frame: Frame, out: &mut Vec<Action>) {
        let FrameDst::Unicast(broken_to) = frame.dst else {
            unreachable!("broadcast frames never generate tx_failed");
        };
        match frame.body {
            PacketBody::Data(pkt) => {
                self.truncate_at(ctx.id, broken_to);
                if let RouteHeader::Dsr(h) = &pkt.route {
                    // Cursor already points past the failed hop; the prefix
                    // src..=self reversed routes the error home.
                    let here = h.cursor.saturating_sub(2);
                    if h.route.get(here) == Some(&ctx.id) && here > 0 {
                        let mut back: Vec<NodeId> = h.route[..=here].to_vec();
                        back.reverse();
                        let err = DsrRouteError {
                            detecting: ctx.id,
                            broken_from: ctx.id,
                            broken_to,
                            header: SourceRouteHeader {
                                route: back.clone(),
                                cursor: 2,
                            },
                        };
                        out.push(Action::Send(Self::ctrl_frame(
                            ctx,
                            FrameDst::Unicast(back[1]),
                            p.rerr_bytes,
                            PacketBody::DsrError(err),
                        )));
                    }
                    // here == 0 means this node is the source: local
                    // truncation only, no error on the wire.
                }
                out.push(Action::Drop(pkt, DropReason::LinkBreak));
            }
            body => {
                self.truncate_at(ctx.id, broken_to);
                out.push(Action::CtrlDrop(body.label()));
            }
        }
    }

    pub fn on_error(
        &mut self,
        ctx: &NodeCtx,
        p: &DsrParams,
        err: DsrRouteError,
        out: &mut Vec<Action>,
    ) {
        self.truncate_at(err.broken_from, err.broken_to);
        let h = &err.header;
        if h.route.get(h.cursor - 1) != Some(&ctx.id) {
            out.push(Action::CtrlDrop("DSR_RERR_MISROUTED"));
            return;
        }
        if h.cursor == h.route.len() {
            // Reached the packet source. Pending discoveries already have a
            // retry timer armed; the next send to the truncated destination
            // re-discovers on its own.
            return;
        }
        let next = h.route[h.cursor];
        let mut fwd = err.clone();
        fwd.header.cursor += 1;
        out.push(Action::Send(Self::ctrl_frame(
            ctx,
            FrameDst::Unicast(next),
            p.rerr_bytes,
            PacketBody::DsrError(fwd),
        )));
    }

    pub fn on_timer(&mut self, ctx: &NodeCtx, p: &DsrParams, dest: NodeId, out: &mut Vec<Action>) {
        if !self.pending.contains_key(&dest) {
            return;
        }
        if self.lookup(dest).is_some() {
            // A usable route was learned while waiting; flush through the
            // normal origination path.
            let pending = self.pending.remove(&dest).unwrap();
            for pkt in pending.buffer {
                self.on_data_origin(ctx, p, pkt, out);
            }
            return;
        }
        let retries = self.pending.get(&dest).map(|pd| pd.retries).unwrap();
        if retries < p.max_retries {
            self.pending.get_mut(&dest).unwrap().retries += 1;
            self.originate_rreq(ctx, p, dest, out);
        } else {
            let pending = self.pending.remove(&dest).unwrap();
            for pkt in pending.buffer {
                out.push(Action::Drop(pkt, DropReason::NoRoute));
            }
        }
    }

    pub fn on_packet(
        &mut self,
        ctx: &NodeCtx,
        p: &DsrParams,
        body: PacketBody,
        out: &mut Vec<Action>,
    ) {
        match body {
            PacketBody::Data(pkt) => self.on_data_frame(ctx, p, pkt, out),
            PacketBody::DsrRreq(rreq) => self.on_rreq(ctx, p, rreq, out),
            PacketBody::DsrRrep(rrep) => self.on_rrep(ctx, p, rrep, out),
            PacketBody::DsrError(err) => self.on_error(ctx, p, err, out),
            other => debug_assert!(false, "DSR node received {}", other.label()),
        }
    }
}

fn no_duplicates(route: &[NodeId]) -> bool {
    let mut seen = route.to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}
