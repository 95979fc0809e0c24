//! The simulation proper: nodes with mobility, interface queues and protocol
//! state, driven by the event engine over the abstract channel.
//!
//! Frame deliveries happen when a transmission completes: the receiver set is
//! the exact unit-disk neighborhood of the sender at that instant
//! (propagation delay is folded into the per-hop jitter bound). A unicast
//! whose target is out of range at completion time invokes the protocol's
//! link-break handler.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::aodv::AodvNode;
use crate::channel::{ChannelParams, Frame, FrameDst, InterfaceQueue};
use crate::dsr::DsrNode;
use crate::engine::{Engine, RngStream, SimTime};
use crate::gpsr::GpsrNode;
use crate::ids::{FlowId, NodeId, PacketId};
use crate::metrics::PacketLedger;
use crate::mobility::{init_positions, next_leg, MobilityParams, WaypointState};
use crate::packet::{DataPacket, DropReason, PacketBody, RouteHeader};
use crate::routing::{Action, NodeCtx, TimerKind};
use crate::scenario::{Protocol, ScenarioConfig, ScenarioError};
use crate::traffic::{build_flows, CbrFlow};
use crate::geometry::Position;

/// Cadence of the periodic queue-occupancy sample, seconds.
const METRIC_SAMPLE_INTERVAL_S: f64 = 10.0;

#[derive(Debug, Clone)]
enum EventKind {
    WaypointArrival { generation: u64 },
    BeaconTick,
    TrafficEmit { flow: FlowId, k: u64 },
    TxComplete,
    ProtoTimer(TimerKind),
    MetricSample,
}

#[derive(Debug)]
enum ProtocolState {
    Aodv(AodvNode),
    Dsr(DsrNode),
    Gpsr(GpsrNode),
}

#[derive(Debug)]
struct Node {
    waypoint: WaypointState,
    leg_generation: u64,
    queue: InterfaceQueue,
    routing: ProtocolState,
}

/// Deterministic counters collected alongside the ledger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub events_processed: u64,
    pub ctrl_packets_sent: u64,
    pub ctrl_bytes_sent: u64,
    pub ctrl_drops: u64,
    pub max_queue_occupancy: usize,
    pub queue_samples: u64,
    pub queue_sample_frames: u64,
}

enum TraceSink {
    Memory(Vec<String>),
    File(BufWriter<File>),
}

/// One simulation run. Strictly sequential: one event at a time mutates
/// world state, so the run is a deterministic function of (config, seed).
pub struct Simulation {
    cfg: ScenarioConfig,
    channel: ChannelParams,
    mobility: MobilityParams,
    engine: Engine<EventKind>,
    nodes: Vec<Node>,
    flows: Vec<CbrFlow>,
    ledger: PacketLedger,
    rng_mobility: RngStream,
    rng_jitter: RngStream,
    rng_beacon: RngStream,
    stats: RunStats,
    trace: Option<TraceSink>,
    trajectory_log: Option<Vec<String>>,
}

impl Simulation {
    /// Build a run with Random Waypoint mobility and the configured CBR
    /// flows.
    pub fn new(cfg: ScenarioConfig) -> Result<Simulation, ScenarioError> {
        cfg.validate()?;
        let mut rng_mobility = RngStream::new(cfg.seed, "mobility");
        let mobility = Self::mobility_params(&cfg);
        let positions = init_positions(cfg.nodes as usize, &mobility, &mut rng_mobility);
        let mut sim = Self::assemble(cfg, positions, rng_mobility)?;
        sim.schedule_initial_legs();
        sim.schedule_standard_traffic()?;
        sim.schedule_protocol_plumbing();
        Ok(sim)
    }

    /// Build a run with fixed node positions (no mobility). Flows come from
    /// the config as usual; use `connections = 0` plus [`Simulation::add_flow`]
    /// for scripted traffic.
    pub fn with_static_positions(
        cfg: ScenarioConfig,
        positions: Vec<Position>,
    ) -> Result<Simulation, ScenarioError> {
        cfg.validate()?;
        assert_eq!(
            positions.len(),
            cfg.nodes as usize,
            "one position per node required"
        );
        let rng_mobility = RngStream::new(cfg.seed, "mobility");
        let mut sim = Self::assemble(cfg, positions, rng_mobility)?;
        sim.schedule_standard_traffic()?;
        sim.schedule_protocol_plumbing();
        Ok(sim)
    }

    fn mobility_params(cfg: &ScenarioConfig) -> MobilityParams {
        MobilityParams {
            area_w: cfg.area_w,
            area_h: cfg.area_h,
            pause_s: cfg.pause_s,
            speed_min: cfg.speed_min,
            speed_max: cfg.speed_max,
        }
    }

    fn assemble(
        cfg: ScenarioConfig,
        positions: Vec<Position>,
        rng_mobility: RngStream,
    ) -> Result<Simulation, ScenarioError> {
        let channel = ChannelParams {
            range_m: cfg.range_m,
            bitrate_bps: cfg.bitrate_bps,
            jitter_bound_s: cfg.jitter_bound_s,
        };
        channel.validate();
        let mobility = Self::mobility_params(&cfg);
        mobility.validate();
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(i, &pos)| Node {
                waypoint: WaypointState::stationary(NodeId(i as u32), pos, SimTime::ZERO),
                leg_generation: 0,
                queue: InterfaceQueue::new(cfg.queue_frames),
                routing: match cfg.protocol {
                    Protocol::Aodv => ProtocolState::Aodv(AodvNode::new()),
                    Protocol::Dsr => ProtocolState::Dsr(DsrNode::new()),
                    Protocol::Gpsr => ProtocolState::Gpsr(GpsrNode::new()),
                },
            })
            .collect();
        Ok(Simulation {
            rng_jitter: RngStream::new(cfg.seed, "jitter"),
            rng_beacon: RngStream::new(cfg.seed, "beacon"),
            cfg,
            channel,
            mobility,
            engine: Engine::new(),
            nodes,
            flows: Vec::new(),
            ledger: PacketLedger::new(),
            rng_mobility,
            stats: RunStats::default(),
            trace: None,
            trajectory_log: None,
        })
    }

    fn schedule_initial_legs(&mut self) {
        for i in 0..self.nodes.len() {
            let pos = self.nodes[i].waypoint.anchor_pos;
            self.start_leg(i, pos, SimTime::ZERO);
        }
    }

    fn start_leg(&mut self, i: usize, from: Position, now: SimTime) {
        let leg = next_leg(NodeId(i as u32), from, now, &self.mobility, &mut self.rng_mobility);
        if let Some(log) = &mut self.trajectory_log {
            log.push(format!(
                "{} {} {} {} {} {} {}",
                i,
                leg.move_start.seconds(),
                leg.anchor_pos.x,
                leg.anchor_pos.y,
                leg.dest.x,
                leg.dest.y,
                leg.speed
            ));
        }
        self.nodes[i].waypoint = leg;
        self.nodes[i].leg_generation += 1;
        let generation = self.nodes[i].leg_generation;
        if let Some(at) = leg.arrival_time() {
            self.engine
                .schedule(at, NodeId(i as u32), EventKind::WaypointArrival { generation });
        }
    }

    fn schedule_standard_traffic(&mut self) -> Result<(), ScenarioError> {
        let mut rng_traffic = RngStream::new(self.cfg.seed, "traffic");
        let flows = build_flows(
            self.cfg.connections,
            self.cfg.nodes,
            self.cfg.cbr_rate_pps,
            self.cfg.packet_bytes,
            SimTime::new(self.cfg.sim_time_s),
            &mut rng_traffic,
        )
        .map_err(|msg| ScenarioError::Invalid {
            key: "connections".to_string(),
            msg,
        })?;
        for flow in flows {
            self.push_flow(flow);
        }
        Ok(())
    }

    /// Register an extra flow (scripted experiments). Must be called before
    /// its start time passes.
    pub fn add_flow(
        &mut self,
        src: NodeId,
        dst: NodeId,
        rate_pps: f64,
        packet_bytes: u32,
        start: SimTime,
        stop: SimTime,
    ) -> FlowId {
        assert_ne!(src, dst);
        let flow = CbrFlow {
            id: FlowId(self.flows.len() as u32),
            src,
            dst,
            rate_pps,
            packet_bytes,
            start,
            stop,
        };
        self.push_flow(flow);
        flow.id
    }

    fn push_flow(&mut self, mut flow: CbrFlow) {
        flow.id = FlowId(self.flows.len() as u32);
        self.engine.schedule(
            flow.start,
            flow.src,
            EventKind::TrafficEmit { flow: flow.id, k: 0 },
        );
        self.flows.push(flow);
    }

    fn schedule_protocol_plumbing(&mut self) {
        if self.cfg.protocol == Protocol::Gpsr {
            // Stagger first beacons across one interval so they never
            // synchronize.
            for i in 0..self.nodes.len() {
                let at = SimTime::new(
                    self.rng_beacon
                        .uniform(0.0, self.cfg.gpsr.beacon_interval_s),
                );
                self.engine.schedule(at, NodeId(i as u32), EventKind::BeaconTick);
            }
        }
        let sample = SimTime::new(METRIC_SAMPLE_INTERVAL_S.min(self.cfg.sim_time_s));
        self.engine.schedule(sample, NodeId(0), EventKind::MetricSample);
    }

    /// Capture trace lines in memory (tests, small runs).
    pub fn set_trace_memory(&mut self) {
        self.trace = Some(TraceSink::Memory(Vec::new()));
    }

    /// Stream trace lines to a file.
    pub fn set_trace_file(&mut self, path: &Path) -> std::io::Result<()> {
        self.trace = Some(TraceSink::File(BufWriter::new(File::create(path)?)));
        Ok(())
    }

    /// Record one line per mobility leg: `node t_start x0 y0 x1 y1 speed`.
    pub fn enable_trajectory_log(&mut self) {
        self.trajectory_log = Some(Vec::new());
    }

    pub fn trajectory_lines(&self) -> &[String] {
        self.trajectory_log.as_deref().unwrap_or(&[])
    }

    pub fn trace_lines(&self) -> &[String] {
        match &self.trace {
            Some(TraceSink::Memory(lines)) => lines,
            _ => &[],
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &PacketLedger {
        &self.ledger
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    /// Position of a node at a time not earlier than its current leg anchor.
    pub fn position_of(&self, node: NodeId, t: SimTime) -> Position {
        self.nodes[node.index()].waypoint.position_at(t)
    }

    /// Scripted motion: send a node toward `dest` at `speed` starting now.
    pub fn set_node_motion(&mut self, node: NodeId, dest: Position, speed: f64) {
        let now = self.engine.now();
        let i = node.index();
        let pos = self.nodes[i].waypoint.position_at(now);
        self.nodes[i].waypoint = WaypointState {
            node,
            anchor_pos: pos,
            anchor_time: now,
            move_start: now,
            dest,
            speed,
        };
        self.nodes[i].leg_generation += 1;
        // No arrival event: the node stops at `dest` (position clamps).
    }

    pub fn aodv_state(&self, node: NodeId) -> Option<&AodvNode> {
        match &self.nodes[node.index()].routing {
            ProtocolState::Aodv(a) => Some(a),
            _ => None,
        }
    }

    pub fn dsr_state(&self, node: NodeId) -> Option<&DsrNode> {
        match &self.nodes[node.index()].routing {
            ProtocolState::Dsr(d) => Some(d),
            _ => None,
        }
    }

    pub fn gpsr_state(&self, node: NodeId) -> Option<&GpsrNode> {
        match &self.nodes[node.index()].routing {
            ProtocolState::Gpsr(g) => Some(g),
            _ => None,
        }
    }

    /// Run to `t_end` (clamped to the configured simulation time is the
    /// caller's business); returns events processed so far.
    pub fn run_until(&mut self, t_end: SimTime) -> u64 {
        while let Some(ev) = self.engine.pop_at_or_before(t_end) {
            let target = ev.target;
            match ev.kind {
                EventKind::WaypointArrival { generation } => {
                    self.on_waypoint_arrival(target, generation)
                }
                EventKind::BeaconTick => self.on_beacon_tick(target),
                EventKind::TrafficEmit { flow, k } => self.on_traffic_emit(flow, k),
                EventKind::TxComplete => self.on_tx_complete(target),
                EventKind::ProtoTimer(kind) => self.on_proto_timer(target, kind),
                EventKind::MetricSample => self.on_metric_sample(),
            }
        }
        self.engine.advance_to(t_end);
        self.stats.events_processed = self.engine.events_processed();
        self.stats.max_queue_occupancy = self
            .nodes
            .iter()
            .map(|n| n.queue.max_occupancy())
            .max()
            .unwrap_or(0);
        self.engine.events_processed()
    }

    /// Run the whole configured simulation and check conservation.
    pub fn run(&mut self) -> RunStats {
        let t_end = SimTime::new(self.cfg.sim_time_s);
        self.run_until(t_end);
        assert!(
            self.ledger.conservation_holds(),
            "packet conservation violated"
        );
        if let Some(TraceSink::File(w)) = &mut self.trace {
            w.flush().expect("trace flush");
        }
        self.stats.clone()
    }

    fn ctx_of(&self, node: NodeId) -> NodeCtx {
        let now = self.engine.now();
        NodeCtx {
            now,
            id: node,
            pos: self.position_of(node, now),
        }
    }

    fn on_waypoint_arrival(&mut self, node: NodeId, generation: u64) {
        let i = node.index();
        if self.nodes[i].leg_generation != generation {
            return; // superseded by scripted motion
        }
        let dest = self.nodes[i].waypoint.dest;
        let now = self.engine.now();
        self.start_leg(i, dest, now);
    }

    fn on_beacon_tick(&mut self, node: NodeId) {
        let ctx = self.ctx_of(node);
        let mut actions = Vec::new();
        if let ProtocolState::Gpsr(g) = &mut self.nodes[node.index()].routing {
            g.on_beacon_tick(&ctx, &self.cfg.gpsr, &mut actions);
        }
        self.apply_actions(node, actions);
        let gap = (self.cfg.gpsr.beacon_interval_s
            + self
                .rng_beacon
                .uniform(-self.cfg.gpsr.beacon_jitter_s, self.cfg.gpsr.beacon_jitter_s))
        .max(1e-6);
        let next = self.engine.now().offset(gap);
        if next <= SimTime::new(self.cfg.sim_time_s) {
            self.engine.schedule(next, node, EventKind::BeaconTick);
        }
    }

    fn on_traffic_emit(&mut self, flow_id: FlowId, k: u64) {
        let flow = self.flows[flow_id.index()];
        let now = self.engine.now();
        debug_assert!(now <= flow.stop);
        let id = self
            .ledger
            .register(flow.id, flow.src, flow.dst, flow.packet_bytes, now);
        let pkt = DataPacket {
            id,
            flow: flow.id,
            src: flow.src,
            dst: flow.dst,
            payload_bytes: flow.packet_bytes,
            sent_at: now,
            hops: 0,
            route: RouteHeader::None,
        };
        self.originate(flow.src, pkt);
        let t_next = flow.emission_at(k + 1);
        if t_next <= flow.stop {
            self.engine.schedule(
                t_next,
                flow.src,
                EventKind::TrafficEmit {
                    flow: flow_id,
                    k: k + 1,
                },
            );
        }
    }

    fn originate(&mut self, node: NodeId, pkt: DataPacket) {
        let ctx = self.ctx_of(node);
        let dest_pos = self.position_of(pkt.dst, ctx.now);
        let mut actions = Vec::new();
        match &mut self.nodes[node.index()].routing {
            ProtocolState::Aodv(a) => a.on_data_origin(&ctx, &self.cfg.aodv, pkt, &mut actions),
            ProtocolState::Dsr(d) => d.on_data_origin(&ctx, &self.cfg.dsr, pkt, &mut actions),
            ProtocolState::Gpsr(g) => {
                // Oracle location service: destination position exact at
                // send time, never refreshed in flight.
                g.on_data_origin(&ctx, &self.cfg.gpsr, pkt, dest_pos, &mut actions)
            }
        }
        self.apply_actions(node, actions);
    }

    fn on_proto_timer(&mut self, node: NodeId, kind: TimerKind) {
        let ctx = self.ctx_of(node);
        let mut actions = Vec::new();
        match (&mut self.nodes[node.index()].routing, kind) {
            (ProtocolState::Aodv(a), TimerKind::AodvRetry { dest }) => {
                a.on_timer(&ctx, &self.cfg.aodv, dest, &mut actions)
            }
            (ProtocolState::Dsr(d), TimerKind::DsrRetry { dest }) => {
                d.on_timer(&ctx, &self.cfg.dsr, dest, &mut actions)
            }
            _ => debug_assert!(false, "timer delivered to wrong protocol"),
        }
        self.apply_actions(node, actions);
    }

    fn on_metric_sample(&mut self) {
        let queued: usize = self.nodes.iter().map(|n| n.queue.len()).sum();
        self.stats.queue_samples += 1;
        self.stats.queue_sample_frames += queued as u64;
        let next = self.engine.now().offset(METRIC_SAMPLE_INTERVAL_S);
        if next <= SimTime::new(self.cfg.sim_time_s) {
            self.engine.schedule(next, NodeId(0), EventKind::MetricSample);
        }
    }

    fn on_tx_complete(&mut self, node: NodeId) {
        let i = node.index();
        let now = self.engine.now();
        let frame = self.nodes[i]
            .queue
            .pop_head()
            .expect("transmission completed on an empty queue");
        debug_assert!(self.nodes[i].queue.is_transmitting());
        let sender_pos = self.position_of(node, now);
        match frame.dst {
            FrameDst::Broadcast => {
                let receivers: Vec<NodeId> = (0..self.nodes.len())
                    .filter(|&j| {
                        j != i
                            && self
                                .channel
                                .in_range(sender_pos, self.position_of(NodeId(j as u32), now))
                    })
                    .map(|j| NodeId(j as u32))
                    .collect();
                for r in receivers {
                    self.deliver_frame(r, node, frame.clone());
                }
            }
            FrameDst::Unicast(dst) => {
                if self.channel.in_range(sender_pos, self.position_of(dst, now)) {
                    self.deliver_frame(dst, node, frame);
                } else {
                    self.trace_event(node, "TXFAIL", &frame.body, "-");
                    self.on_tx_failed(node, frame);
                }
            }
        }
        self.start_next_transmission(i);
    }

    fn on_tx_failed(&mut self, node: NodeId, frame: Frame) {
        let ctx = self.ctx_of(node);
        let mut actions = Vec::new();
        match &mut self.nodes[node.index()].routing {
            ProtocolState::Aodv(a) => a.on_tx_failed(&ctx, &self.cfg.aodv, frame, &mut actions),
            ProtocolState::Dsr(d) => d.on_tx_failed(&ctx, &self.cfg.dsr, frame, &mut actions),
            ProtocolState::Gpsr(g) => g.on_tx_failed(&ctx, frame, &mut actions),
        }
        self.apply_actions(node, actions);
    }

    fn deliver_frame(&mut self, to: NodeId, from: NodeId, mut frame: Frame) {
        self.trace_event(to, "RECV", &frame.body, "-");
        if let PacketBody::Data(pkt) = &mut frame.body {
            pkt.hops += 1;
        }
        let ctx = self.ctx_of(to);
        let mut actions = Vec::new();
        match &mut self.nodes[to.index()].routing {
            ProtocolState::Aodv(a) => {
                a.on_packet(&ctx, &self.cfg.aodv, frame.body, from, &mut actions)
            }
            ProtocolState::Dsr(d) => d.on_packet(&ctx, &self.cfg.dsr, frame.body, &mut actions),
            ProtocolState::Gpsr(g) => g.on_packet(&ctx, &self.cfg.gpsr, frame.body, &mut actions),
        }
        self.apply_actions(to, actions);
    }

    fn apply_actions(&mut self, node: NodeId, actions: Vec<Action>) {
        let now = self.engine.now();
        for action in actions {
            match action {
                Action::Send(frame) => self.enqueue_frame(node, frame),
                Action::Deliver(pkt) => {
                    self.ledger.delivered(pkt.id, now, pkt.hops);
                }
                Action::Drop(pkt, reason) => {
                    self.trace_drop(node, pkt.id, reason);
                    self.ledger.dropped(pkt.id, reason, pkt.hops);
                }
                Action::CtrlDrop(label) => {
                    self.stats.ctrl_drops += 1;
                    if self.trace.is_some() {
                        let line = format!(
                            "{:.6} | {} | EVT DROP | {} | CTRL",
                            now.seconds(),
                            node,
                            label
                        );
                        self.push_trace(line);
                    }
                }
                Action::Timer(kind, at) => {
                    self.engine.schedule(at, node, EventKind::ProtoTimer(kind));
                }
            }
        }
    }

    fn enqueue_frame(&mut self, node: NodeId, frame: Frame) {
        let i = node.index();
        let is_data = frame.body.is_data();
        let size = frame.size_bytes;
        let tag = self
            .trace
            .as_ref()
            .map(|_| Self::body_tag(&frame.body));
        match self.nodes[i].queue.try_enqueue(frame) {
            Ok(()) => {
                if let Some(tag) = tag {
                    let line = format!(
                        "{:.6} | {} | EVT SEND | {} | -",
                        self.engine.now().seconds(),
                        node,
                        tag
                    );
                    self.push_trace(line);
                }
                if !is_data {
                    self.stats.ctrl_packets_sent += 1;
                    self.stats.ctrl_bytes_sent += u64::from(size);
                }
                self.start_tx_if_idle(i);
            }
            Err(rejected) => {
                if let Some(tag) = tag {
                    let line = format!(
                        "{:.6} | {} | EVT DROP | {} | {}",
                        self.engine.now().seconds(),
                        node,
                        tag,
                        DropReason::QueueOverflow.token()
                    );
                    self.push_trace(line);
                }
                match rejected.body {
                    PacketBody::Data(pkt) => {
                        self.ledger
                            .dropped(pkt.id, DropReason::QueueOverflow, pkt.hops)
                    }
                    _ => self.stats.ctrl_drops += 1,
                }
            }
        }
    }

    fn start_tx_if_idle(&mut self, i: usize) {
        if !self.nodes[i].queue.is_transmitting() && !self.nodes[i].queue.is_empty() {
            self.start_next_transmission(i);
        }
    }

    fn start_next_transmission(&mut self, i: usize) {
        let now = self.engine.now();
        if self.nodes[i].queue.is_empty() {
            self.nodes[i].queue.set_transmitting(false);
            return;
        }
        let size = self.nodes[i].queue.head().unwrap().size_bytes;
        let delay = self.channel.serialization_delay_s(size)
            + self.rng_jitter.uniform(0.0, self.channel.jitter_bound_s);
        self.nodes[i].queue.set_transmitting(true);
        self.engine
            .schedule(now.offset(delay), NodeId(i as u32), EventKind::TxComplete);
    }

    fn trace_event(&mut self, node: NodeId, kind: &str, body: &PacketBody, reason: &str) {
        if self.trace.is_none() {
            return;
        }
        let line = format!(
            "{:.6} | {} | EVT {} | {} | {}",
            self.engine.now().seconds(),
            node,
            kind,
            Self::body_tag(body),
            reason
        );
        self.push_trace(line);
    }

    fn trace_drop(&mut self, node: NodeId, id: PacketId, reason: DropReason) {
        if self.trace.is_none() {
            return;
        }
        let line = format!(
            "{:.6} | {} | EVT DROP | {} | {}",
            self.engine.now().seconds(),
            node,
            id,
            reason.token()
        );
        self.push_trace(line);
    }

    fn push_trace(&mut self, line: String) {
        match self.trace.as_mut().unwrap() {
            TraceSink::Memory(lines) => lines.push(line),
            TraceSink::File(w) => {
                writeln!(w, "{line}").expect("trace write");
            }
        }
    }

    fn body_tag(body: &PacketBody) -> String {
        match body {
            PacketBody::Data(d) => d.id.to_string(),
            other => other.label().to_string(),
        }
    }
}
