//! Per-packet ledger and the five report metrics computed from it: packet
//! delivery ratio, average end-to-end delay, packet loss (count and
//! fraction), packet loss ratio and average throughput.
//!
//! Metrics are pure functions of the ledger; recomputing a report from a
//! persisted ledger file reproduces it bit-exactly. Packets still in flight
//! when the run ends count as lost (they were sent and never received) and
//! are reported separately in the breakdown.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead};

use crate::engine::SimTime;
use crate::ids::{FlowId, NodeId, PacketId};
use crate::packet::DropReason;

/// Lifetime record of one data packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: PacketId,
    pub flow: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub sent_at: SimTime,
    pub received_at: Option<SimTime>,
    pub drop: Option<DropReason>,
    pub hops: u32,
}

impl PacketRecord {
    pub fn in_flight(&self) -> bool {
        self.received_at.is_none() && self.drop.is_none()
    }
}

/// Append-only store of packet records, indexed by packet id.
#[derive(Debug, Default)]
pub struct PacketLedger {
    records: Vec<PacketRecord>,
}

impl PacketLedger {
    pub fn new() -> Self {
        PacketLedger::default()
    }

    pub fn register(
        &mut self,
        flow: FlowId,
        src: NodeId,
        dst: NodeId,
        size_bytes: u32,
        sent_at: SimTime,
    ) -> PacketId {
        let id = PacketId(self.records.len() as u64);
        self.records.push(PacketRecord {
            id,
            flow,
            src,
            dst,
            size_bytes,
            sent_at,
            received_at: None,
            drop: None,
            hops: 0,
        });
        id
    }

    pub fn delivered(&mut self, id: PacketId, at: SimTime, hops: u32) {
        let rec = &mut self.records[id.0 as usize];
        debug_assert!(rec.in_flight(), "packet {id} already settled");
        debug_assert!(at >= rec.sent_at);
        rec.received_at = Some(at);
        rec.hops = hops;
    }

    pub fn dropped(&mut self, id: PacketId, reason: DropReason, hops: u32) {
        let rec = &mut self.records[id.0 as usize];
        debug_assert!(rec.in_flight(), "packet {id} already settled");
        rec.drop = Some(reason);
        rec.hops = hops;
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn sent(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn delivered_count(&self) -> u64 {
        self.records.iter().filter(|r| r.received_at.is_some()).count() as u64
    }

    pub fn dropped_count(&self) -> u64 {
        self.records.iter().filter(|r| r.drop.is_some()).count() as u64
    }

    pub fn in_flight_count(&self) -> u64 {
        self.records.iter().filter(|r| r.in_flight()).count() as u64
    }

    /// Conservation: originated = delivered + dropped + in flight.
    pub fn conservation_holds(&self) -> bool {
        self.sent() == self.delivered_count() + self.dropped_count() + self.in_flight_count()
    }

    /// One line per record: `pkt_id flow src dst size Ts Tr|- reason|- hops`.
    /// Times use round-trip float formatting so parsing is lossless.
    /// `meta` entries are written first as `# key value` comment lines.
    pub fn to_text(&self, meta: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            let _ = writeln!(out, "# {k} {v}");
        }
        for r in &self.records {
            let tr = r
                .received_at
                .map_or_else(|| "-".to_string(), |t| format!("{}", t.seconds()));
            let reason = r.drop.map_or("-", DropReason::token);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {}",
                r.id,
                r.flow,
                r.src,
                r.dst,
                r.size_bytes,
                r.sent_at.seconds(),
                tr,
                reason,
                r.hops
            );
        }
        out
    }

    /// Parse a persisted ledger. Returns the metadata map alongside the
    /// ledger; records must appear in id order.
    pub fn from_reader<R: BufRead>(reader: R) -> io::Result<(BTreeMap<String, String>, Self)> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut meta = BTreeMap::new();
        let mut ledger = PacketLedger::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.trim().splitn(2, ' ');
                if let Some(k) = it.next() {
                    meta.insert(k.to_string(), it.next().unwrap_or("").to_string());
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 9 {
                return Err(bad(format!("ledger line {}: expected 9 fields", lineno + 1)));
            }
            let parse_f = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))
            };
            let id: u64 = fields[0]
                .parse()
                .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?;
            if id != ledger.records.len() as u64 {
                return Err(bad(format!("ledger line {}: id out of order", lineno + 1)));
            }
            let received_at = if fields[6] == "-" {
                None
            } else {
                Some(SimTime::new(parse_f(fields[6])?))
            };
            let drop = if fields[7] == "-" {
                None
            } else {
                Some(DropReason::from_token(fields[7]).ok_or_else(|| {
                    bad(format!("ledger line {}: unknown drop reason", lineno + 1))
                })?)
            };
            ledger.records.push(PacketRecord {
                id: PacketId(id),
                flow: FlowId(
                    fields[1]
                        .parse()
                        .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?,
                ),
                src: NodeId(
                    fields[2]
                        .parse()
                        .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?,
                ),
                dst: NodeId(
                    fields[3]
                        .parse()
                        .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?,
                ),
                size_bytes: fields[4]
                    .parse()
                    .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?,
                sent_at: SimTime::new(parse_f(fields[5])?),
                received_at,
                drop,
                hops: fields[8]
                    .parse()
                    .map_err(|e| bad(format!("ledger line {}: {e}", lineno + 1)))?,
            });
        }
        Ok((meta, ledger))
    }
}

/// Packet delivery ratio, percent: 100 · received / sent. `None` when nothing
/// was sent (not applicable).
pub fn pdr_pct(ledger: &PacketLedger) -> Option<f64> {
    let sent = ledger.sent();
    if sent == 0 {
        return None;
    }
    Some(100.0 * ledger.delivered_count() as f64 / sent as f64)
}

/// Mean end-to-end delay over successfully delivered packets, milliseconds.
/// `None` when nothing was delivered.
pub fn avg_e2e_delay_ms(ledger: &PacketLedger) -> Option<f64> {
    let mut n = 0u64;
    let mut sum_s = 0.0;
    for r in ledger.records() {
        if let Some(tr) = r.received_at {
            n += 1;
            sum_s += tr.seconds() - r.sent_at.seconds();
        }
    }
    if n == 0 {
        return None;
    }
    Some(sum_s / n as f64 * 1000.0)
}

/// Packet loss count and fraction: (sent − received, (sent − received)/sent).
/// Packets in flight at run end count as lost. `None` when nothing was sent.
pub fn packet_loss(ledger: &PacketLedger) -> Option<(u64, f64)> {
    let sent = ledger.sent();
    if sent == 0 {
        return None;
    }
    let lost = sent - ledger.delivered_count();
    Some((lost, lost as f64 / sent as f64))
}

/// Packet loss ratio, percent.
pub fn packet_loss_ratio_pct(ledger: &PacketLedger) -> Option<f64> {
    packet_loss(ledger).map(|(lost, _)| 100.0 * lost as f64 / ledger.sent() as f64)
}

/// Average throughput in kilobits/second: delivered payload bytes · 8/1000
/// over the observation window.
pub fn avg_throughput_kbps(ledger: &PacketLedger, start: SimTime, stop: SimTime) -> f64 {
    assert!(stop > start, "throughput window must satisfy stop > start");
    let recvd_bytes: u64 = ledger
        .records()
        .iter()
        .filter(|r| r.received_at.is_some())
        .map(|r| u64::from(r.size_bytes))
        .sum();
    recvd_bytes as f64 * (8.0 / 1000.0) / (stop.seconds() - start.seconds())
}

/// The full metric suite for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub pdr_pct: Option<f64>,
    pub avg_e2e_delay_ms: Option<f64>,
    pub packet_loss_count: u64,
    pub packet_loss_frac: Option<f64>,
    pub packet_loss_ratio_pct: Option<f64>,
    pub avg_throughput_kbps: f64,
    pub drops_by_reason: BTreeMap<DropReason, u64>,
}

/// Compute the report over the window `[start, stop]`.
pub fn report(ledger: &PacketLedger, start: SimTime, stop: SimTime) -> MetricsReport {
    let mut drops_by_reason = BTreeMap::new();
    for r in ledger.records() {
        if let Some(reason) = r.drop {
            *drops_by_reason.entry(reason).or_insert(0) += 1;
        }
    }
    let loss = packet_loss(ledger);
    MetricsReport {
        sent: ledger.sent(),
        delivered: ledger.delivered_count(),
        dropped: ledger.dropped_count(),
        in_flight: ledger.in_flight_count(),
        pdr_pct: pdr_pct(ledger),
        avg_e2e_delay_ms: avg_e2e_delay_ms(ledger),
        packet_loss_count: loss.map_or(0, |(n, _)| n),
        packet_loss_frac: loss.map(|(_, f)| f),
        packet_loss_ratio_pct: packet_loss_ratio_pct(ledger),
        avg_throughput_kbps: avg_throughput_kbps(ledger, start, stop),
        drops_by_reason,
    }
}
