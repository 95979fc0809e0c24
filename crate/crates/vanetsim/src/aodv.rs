//! Ad-hoc On-Demand Distance Vector routing.
//!
//! Route discovery floods a RREQ; each node records the neighbor it first
//! heard the flood from, building a reverse path to the source. The
//! destination (or an intermediate node holding a route at least as fresh as
//! the sequence number requested) unicasts a RREP back along that reverse
//! path, installing forward routes as it travels. A node that detects a
//! broken next hop invalidates every route through it and notifies each
//! active upstream neighbor (precursor) with a RERR; sources then rediscover
//! on demand.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::channel::{Frame, FrameDst};
use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::packet::{DataPacket, DropReason, PacketBody};
use crate::routing::{Action, NodeCtx, TimerKind};

/// Timer values and control-packet sizes. The protocol description leaves
/// these open; the defaults are pinned here for determinism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AodvParams {
    pub route_lifetime_s: f64,
    pub seen_expiry_s: f64,
    pub retry_interval_s: f64,
    pub max_retries: u32,
    pub pending_capacity: usize,
    pub rreq_bytes: u32,
    pub rrep_bytes: u32,
    pub rerr_bytes: u32,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            route_lifetime_s: 10.0,
            seen_expiry_s: 3.0,
            retry_interval_s: 1.0,
            max_retries: 2,
            pending_capacity: 64,
            rreq_bytes: 48,
            rrep_bytes: 44,
            rerr_bytes: 32,
        }
    }
}

/// Route request, flooded network-wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rreq {
    pub src: NodeId,
    pub src_seq: u64,
    pub broadcast_id: u64,
    pub dest: NodeId,
    /// Last destination sequence number known to the source.
    pub dest_seq_known: u64,
    pub hop_count: u32,
}

/// Route reply, unicast back along the reverse path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rrep {
    pub dest: NodeId,
    pub dest_seq: u64,
    pub hop_count: u32,
    /// Originator of the flood the reply answers.
    pub src: NodeId,
    pub lifetime_s: f64,
}

/// Link failure notification sent to active upstream neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rerr {
    pub broken_dest: NodeId,
    pub detecting: NodeId,
}

/// One row of the route table.
#[derive(Debug, Clone)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq: u64,
    pub valid: bool,
    pub expires_at: SimTime,
    /// Active upstream neighbors routing through this entry.
    pub precursors: BTreeSet<NodeId>,
}

#[derive(Debug, Default)]
struct PendingDiscovery {
    buffer: VecDeque<DataPacket>,
    retries: u32,
}

/// Per-node AODV state.
#[derive(Debug, Default)]
pub struct AodvNode {
    seq: u64,
    broadcast_id: u64,
    routes: BTreeMap<NodeId, RouteEntry>,
    seen: HashMap<(NodeId, u64), SimTime>,
    pending: BTreeMap<NodeId, PendingDiscovery>,
}

impl AodvNode {
    pub fn new() -> Self {
        AodvNode::default()
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn broadcast_id(&self) -> u64 {
        self.broadcast_id
    }

    pub fn entry(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.routes.get(&dest)
    }

    /// Usable route: valid and not yet expired at `now`.
    pub fn route_at(&self, dest: NodeId, now: SimTime) -> Option<(NodeId, u32)> {
        self.routes
            .get(&dest)
            .filter(|e| e.valid && now <= e.expires_at)
            .map(|e| (e.next_hop, e.hop_count))
    }

    pub fn buffered(&self, dest: NodeId) -> usize {
        self.pending.get(&dest).map_or(0, |p| p.buffer.len())
    }

    fn usable(&mut self, dest: NodeId, now: SimTime) -> Option<&mut RouteEntry> {
        self.routes
            .get_mut(&dest)
            .filter(|e| e.valid && now <= e.expires_at)
    }

    /// Install or refresh a route under the freshness rule: a valid,
    /// unexpired entry is only replaced by a strictly larger sequence number,
    /// or an equal one with strictly fewer hops.
    fn install_route(
        &mut self,
        p: &AodvParams,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        dest_seq: u64,
        now: SimTime,
    ) {
        let expires = now.offset(p.route_lifetime_s);
        match self.routes.get_mut(&dest) {
            None => {
                self.routes.insert(
                    dest,
                    RouteEntry {
                        next_hop,
                        hop_count,
                        dest_seq,
                        valid: true,
                        expires_at: expires,
                        precursors: BTreeSet::new(),
                    },
                );
            }
            Some(cur) => {
                let unusable = !cur.valid || now > cur.expires_at;
                let fresher = dest_seq > cur.dest_seq
                    || (dest_seq == cur.dest_seq && (unusable || hop_count < cur.hop_count));
                if fresher {
                    cur.next_hop = next_hop;
                    cur.hop_count = hop_count;
                    cur.dest_seq = dest_seq;
                    cur.valid = true;
                    cur.expires_at = expires;
                } else if cur.valid
                    && dest_seq == cur.dest_seq
                    && hop_count == cur.hop_count
                    && next_hop == cur.next_hop
                {
                    cur.expires_at = cur.expires_at.max(expires);
                }
            }
        }
    }

    fn data_frame(ctx: &NodeCtx, next_hop: NodeId, pkt: DataPacket) -> Frame {
        Frame {
            src: ctx.id,
            dst: FrameDst::Unicast(next_hop),
            size_bytes: pkt.payload_bytes,
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

    /// Locally-originated data: forward on a usable route or buffer and
    /// start discovery.
    pub fn on_data_origin(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        pkt: DataPacket,
        out: &mut Vec<Action>,
    ) {
        let lifetime = p.route_lifetime_s;
        if let Some(e) = self.usable(pkt.dst, ctx.now) {
            e.expires_at = e.expires_at.max(ctx.now.offset(lifetime));
            let next = e.next_hop;
            out.push(Action::Send(Self::data_frame(ctx, next, pkt)));
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

    /// Flood a fresh RREQ for `dest` and arm the retry timer. Every
    /// origination increments both counters.
    fn originate_rreq(&mut self, ctx: &NodeCtx, p: &AodvParams, dest: NodeId, out: &mut Vec<Action>) {
        self.seq += 1;
        self.broadcast_id += 1;
        self.seen.insert(
            (ctx.id, self.broadcast_id),
            ctx.now.offset(p.seen_expiry_s),
        );
        let rreq = Rreq {
            src: ctx.id,
            src_seq: self.seq,
            broadcast_id: self.broadcast_id,
            dest,
            dest_seq_known: self.routes.get(&dest).map_or(0, |e| e.dest_seq),
            hop_count: 0,
        };
        out.push(Action::Send(Self::ctrl_frame(
            ctx,
            FrameDst::Broadcast,
            p.rreq_bytes,
            PacketBody::AodvRreq(rreq),
        )));
        out.push(Action::Timer(
            TimerKind::AodvRetry { dest },
            ctx.now.offset(p.retry_interval_s),
        ));
    }

    pub fn on_rreq(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        rreq: Rreq,
        from: NodeId,
        out: &mut Vec<Action>,
    ) {
        if rreq.src == ctx.id {
            return;
        }
        let key = (rreq.src, rreq.broadcast_id);
        if self.seen.get(&key).is_some_and(|&exp| ctx.now <= exp) {
            // Later copies of the same flood are discarded; the reverse path
            // stays pointed at the first copy's sender.
            return;
        }
        self.seen.insert(key, ctx.now.offset(p.seen_expiry_s));
        self.install_route(p, rreq.src, from, rreq.hop_count + 1, rreq.src_seq, ctx.now);

        if rreq.dest == ctx.id {
            self.seq = self.seq.max(rreq.dest_seq_known);
            let rrep = Rrep {
                dest: ctx.id,
                dest_seq: self.seq,
                hop_count: 0,
                src: rreq.src,
                lifetime_s: p.route_lifetime_s,
            };
            self.send_rrep(ctx, p, rrep, out);
            return;
        }
        let can_answer = self
            .routes
            .get(&rreq.dest)
            .filter(|e| e.valid && ctx.now <= e.expires_at && e.dest_seq >= rreq.dest_seq_known)
            .map(|e| (e.dest_seq, e.hop_count));
        if let Some((dest_seq, hop_count)) = can_answer {
            // Answer on the destination's behalf; data from the requester
            // will flow through us, so it becomes a precursor.
            if let Some(e) = self.routes.get_mut(&rreq.dest) {
                e.precursors.insert(from);
            }
            let rrep = Rrep {
                dest: rreq.dest,
                dest_seq,
                hop_count,
                src: rreq.src,
                lifetime_s: p.route_lifetime_s,
            };
            self.send_rrep(ctx, p, rrep, out);
        } else {
            let fwd = Rreq {
                hop_count: rreq.hop_count + 1,
                ..rreq
            };
            out.push(Action::Send(Self::ctrl_frame(
                ctx,
                FrameDst::Broadcast,
                p.rreq_bytes,
                PacketBody::AodvRreq(fwd),
            )));
        }
    }

    fn send_rrep(&mut self, ctx: &NodeCtx, p: &AodvParams, rrep: Rrep, out: &mut Vec<Action>) {
        match self.route_at(rrep.src, ctx.now) {
            Some((next, _)) => out.push(Action::Send(Self::ctrl_frame(
                ctx,
                FrameDst::Unicast(next),
                p.rrep_bytes,
                PacketBody::AodvRrep(rrep),
            ))),
            None => out.push(Action::CtrlDrop("STALE_REVERSE")),
        }
    }

    pub fn on_rrep(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        rrep: Rrep,
        from: NodeId,
        out: &mut Vec<Action>,
    ) {
        self.install_route(p, rrep.dest, from, rrep.hop_count + 1, rrep.dest_seq, ctx.now);
        if rrep.src == ctx.id {
            // Discovery complete: flush buffered packets in FIFO order.
            if let Some(pending) = self.pending.remove(&rrep.dest) {
                let mut leftover = VecDeque::new();
                for pkt in pending.buffer {
                    if let Some(e) = self.usable(pkt.dst, ctx.now) {
                        let next = e.next_hop;
                        out.push(Action::Send(Self::data_frame(ctx, next, pkt)));
                    } else {
                        leftover.push_back(pkt);
                    }
                }
                if !leftover.is_empty() {
                    // Stale reply did not yield a usable route; keep waiting
                    // on the retry timer.
                    self.pending.insert(
                        rrep.dest,
                        PendingDiscovery {
                            buffer: leftover,
                            retries: pending.retries,
                        },
                    );
                }
            }
            return;
        }
        match self.route_at(rrep.src, ctx.now) {
            None => out.push(Action::CtrlDrop("STALE_REVERSE")),
            Some((rev_next, _)) => {
                if let Some(e) = self.routes.get_mut(&rrep.dest) {
                    e.precursors.insert(rev_next);
                }
                let fwd = Rrep {
                    hop_count: rrep.hop_count + 1,
                    ..rrep
                };
                out.push(Action::Send(Self::ctrl_frame(
                    ctx,
                    FrameDst::Unicast(rev_next),
                    p.rrep_bytes,
                    PacketBody::AodvRrep(fwd),
                )));
            }
        }
    }

    pub fn on_rerr(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        rerr: Rerr,
        from: NodeId,
        out: &mut Vec<Action>,
    ) {
        if let Some(e) = self.routes.get_mut(&rerr.broken_dest) {
            if e.valid && e.next_hop == from {
                e.valid = false;
                e.dest_seq += 1;
                let precursors = std::mem::take(&mut e.precursors);
                for pre in precursors {
                    out.push(Action::Send(Self::ctrl_frame(
                        ctx,
                        FrameDst::Unicast(pre),
                        p.rerr_bytes,
                        PacketBody::AodvRerr(rerr),
                    )));
                }
            }
        }
    }

    /// Data frame arriving over the channel.
    pub fn on_data_frame(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        pkt: DataPacket,
        from: NodeId,
        out: &mut Vec<Action>,
    ) {
        if pkt.dst == ctx.id {
            out.push(Action::Deliver(pkt));
            return;
        }
        let lifetime = p.route_lifetime_s;
        if let Some(e) = self.usable(pkt.dst, ctx.now) {
            e.expires_at = e.expires_at.max(ctx.now.offset(lifetime));
            e.precursors.insert(from);
            let next = e.next_hop;
            out.push(Action::Send(Self::data_frame(ctx, next, pkt)));
        } else {
            // Mid-path expiry: notify upstream and drop.
            out.push(Action::Send(Self::ctrl_frame(
                ctx,
                FrameDst::Unicast(from),
                p.rerr_bytes,
                PacketBody::AodvRerr(Rerr {
                    broken_dest: pkt.dst,
                    detecting: ctx.id,
                }),
            )));
            out.push(Action::Drop(pkt, DropReason::NoRoute));
        }
    }

    /// Link-layer failure: the unicast target is out of range. Invalidate
    /// every route through it and notify precursors.
    pub fn on_tx_failed(
        &mut self,
        ctx: &NodeCtx,
        p: &AodvParams,
        frame: Frame,
        out: &mut Vec<Action>,
    ) {
        let FrameDst::Unicast(broken) = frame.dst else {
            unreachable!("broadcast frames never generate tx_failed");
        };
        for (dest, e) in self.routes.iter_mut() {
            if e.valid && e.next_hop == broken {
                e.valid = false;
                e.dest_seq += 1;
                let precursors = std::mem::take(&mut e.precursors);
                for pre in precursors {
                    out.push(Action::Send(Self::ctrl_frame(
                        ctx,
                        FrameDst::Unicast(pre),
                        p.rerr_bytes,
                        PacketBody::AodvRerr(Rerr {
                            broken_dest: *dest,
                            detecting: ctx.id,
                        }),
                    )));
                }
            }
        }
        match frame.body {
            PacketBody::Data(pkt) => out.push(Action::Drop(pkt, DropReason::LinkBreak)),
            body => out.push(Action::CtrlDrop(body.label())),
        }
    }

    pub fn on_timer(&mut self, ctx: &NodeCtx, p: &AodvParams, dest: NodeId, out: &mut Vec<Action>) {
        if !self.pending.contains_key(&dest) {
            return;
        }
        if self.route_at(dest, ctx.now).is_some() {
            // A route appeared through unrelated traffic; flush now.
            let pending = self.pending.remove(&dest).unwrap();
            for pkt in pending.buffer {
                if let Some(e) = self.usable(dest, ctx.now) {
                    let next = e.next_hop;
                    out.push(Action::Send(Self::data_frame(ctx, next, pkt)));
                }
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
        p: &AodvParams,
        body: PacketBody,
        from: NodeId,
        out: &mut Vec<Action>,
    ) {
        match body {
            PacketBody::Data(pkt) => self.on_data_frame(ctx, p, pkt, from, out),
            PacketBody::AodvRreq(rreq) => self.on_rreq(ctx, p, rreq, from, out),
            PacketBody::AodvRrep(rrep) => self.on_rrep(ctx, p, rrep, from, out),
            PacketBody::AodvRerr(rerr) => self.on_rerr(ctx, p, rerr, from, out),
            other => debug_assert!(false, "AODV node received {}", other.label()),
        }
    }
}
