//! Batch running: single runs with artifact files, seed sweeps over a varied
//! parameter, CSV emission and median/IQR plot data, and recomputation of
//! aggregates from persisted ledgers.
//!
//! Sweep points are independent and run concurrently; aggregate files are
//! written once, after all points complete, in deterministic point order.
//! All derived statistics are computed from the formatted CSV values, so
//! recomputing them from the written files is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::engine::SimTime;
use crate::metrics::{report, MetricsReport, PacketLedger};
use crate::scenario::{Protocol, ScenarioConfig, ScenarioError, SweepParam, SweepSpec};
use crate::sim::{RunStats, Simulation};
use crate::packet::DropReason;

/// Result of one run: the config it ran under, the metric suite and the
/// deterministic run counters.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cfg: ScenarioConfig,
    pub metrics: MetricsReport,
    pub stats: RunStats,
}

/// Optional artifact files for a run.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub out_dir: Option<PathBuf>,
    pub write_trace: bool,
    pub write_ledger: bool,
    pub write_trajectories: bool,
    /// File-name stem, e.g. `run` or `pause50_gpsr_s7`.
    pub tag: String,
}

/// Execute one run and write any requested artifacts.
pub fn run_one(cfg: &ScenarioConfig, artifacts: &RunArtifacts) -> Result<RunOutput, ScenarioError> {
    let mut sim = Simulation::new(cfg.clone())?;
    if artifacts.write_trajectories && artifacts.out_dir.is_some() {
        sim.enable_trajectory_log();
    }
    if artifacts.write_trace || cfg.trace {
        match &artifacts.out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                sim.set_trace_file(&dir.join(format!("{}.trace", artifacts.tag)))?;
            }
            None => sim.set_trace_memory(),
        }
    }
    let stats = sim.run();
    let metrics = report(
        sim.ledger(),
        SimTime::ZERO,
        SimTime::new(cfg.sim_time_s),
    );
    let out = RunOutput {
        cfg: cfg.clone(),
        metrics,
        stats,
    };
    if let Some(dir) = &artifacts.out_dir {
        fs::create_dir_all(dir)?;
        if artifacts.write_ledger {
            let meta = ledger_meta(&out);
            fs::write(
                dir.join(format!("{}.ledger", artifacts.tag)),
                sim.ledger().to_text(&meta),
            )?;
        }
        if artifacts.write_trajectories {
            fs::write(
                dir.join(format!("{}.trajectories", artifacts.tag)),
                sim.trajectory_lines().join("\n") + "\n",
            )?;
        }
    }
    Ok(out)
}

fn ledger_meta(out: &RunOutput) -> Vec<(String, String)> {
    let c = &out.cfg;
    vec![
        ("protocol".into(), c.protocol.token().into()),
        ("nodes".into(), c.nodes.to_string()),
        ("connections".into(), c.connections.to_string()),
        ("pause_s".into(), c.pause_s.to_string()),
        ("speed_min".into(), c.speed_min.to_string()),
        ("speed_max".into(), c.speed_max.to_string()),
        ("sim_time_s".into(), c.sim_time_s.to_string()),
        ("seed".into(), c.seed.to_string()),
        ("ctrl_packets".into(), out.stats.ctrl_packets_sent.to_string()),
        ("ctrl_bytes".into(), out.stats.ctrl_bytes_sent.to_string()),
    ]
}

/// Fixed CSV column set; every row parses back into a config subset plus the
/// metric suite.
pub const CSV_COLUMNS: [&str; 26] = [
    "protocol",
    "nodes",
    "connections",
    "pause_s",
    "speed_min",
    "speed_max",
    "sim_time_s",
    "seed",
    "sent",
    "delivered",
    "dropped",
    "in_flight",
    "pdr_pct",
    "avg_e2e_delay_ms",
    "packet_loss",
    "packet_loss_frac",
    "packet_loss_ratio_pct",
    "avg_throughput_kbps",
    "drop_queue_overflow",
    "drop_no_route",
    "drop_link_break",
    "drop_dest_unreachable",
    "drop_no_neighbor",
    "drop_malformed",
    "ctrl_packets",
    "ctrl_bytes",
];

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt6)
}

/// Render one run as a CSV row (deterministic: identical config and seed
/// produce byte-identical rows).
pub fn csv_row(out: &RunOutput) -> String {
    let c = &out.cfg;
    let m = &out.metrics;
    let drop = |r: DropReason| m.drops_by_reason.get(&r).copied().unwrap_or(0);
    let cols: Vec<String> = vec![
        c.protocol.token().to_string(),
        c.nodes.to_string(),
        c.connections.to_string(),
        fmt6(c.pause_s),
        fmt6(c.speed_min),
        fmt6(c.speed_max),
        fmt6(c.sim_time_s),
        c.seed.to_string(),
        m.sent.to_string(),
        m.delivered.to_string(),
        m.dropped.to_string(),
        m.in_flight.to_string(),
        fmt_opt(m.pdr_pct),
        fmt_opt(m.avg_e2e_delay_ms),
        m.packet_loss_count.to_string(),
        fmt_opt(m.packet_loss_frac),
        fmt_opt(m.packet_loss_ratio_pct),
        fmt6(m.avg_throughput_kbps),
        drop(DropReason::QueueOverflow).to_string(),
        drop(DropReason::NoRoute).to_string(),
        drop(DropReason::LinkBreak).to_string(),
        drop(DropReason::DestUnreachable).to_string(),
        drop(DropReason::NoNeighbor).to_string(),
        drop(DropReason::Malformed).to_string(),
        out.stats.ctrl_packets_sent.to_string(),
        out.stats.ctrl_bytes_sent.to_string(),
    ];
    cols.join(",")
}

/// Parse CSV text (with header) into one column→value map per row.
pub fn parse_csv(text: &str) -> Result<Vec<BTreeMap<String, String>>, String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| "empty csv".to_string())?
        .split(',')
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(format!("csv row {}: {} fields, expected {}", i + 2, fields.len(), header.len()));
        }
        rows.push(
            header
                .iter()
                .zip(fields)
                .map(|(h, f)| (h.to_string(), f.to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

/// Metrics that get a plot-data file.
pub const PLOT_METRICS: [&str; 5] = [
    "pdr_pct",
    "avg_e2e_delay_ms",
    "packet_loss",
    "packet_loss_ratio_pct",
    "avg_throughput_kbps",
];

fn param_column(param: SweepParam) -> &'static str {
    match param {
        SweepParam::Connections => "connections",
        SweepParam::Nodes => "nodes",
        SweepParam::Pause => "pause_s",
        SweepParam::Speed => "speed_max",
    }
}

/// Median of a sorted slice.
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Tukey hinges: quartiles are medians of the lower/upper halves, each half
/// including the middle element when the count is odd.
fn quartiles(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    if n == 1 {
        return (sorted[0], sorted[0]);
    }
    let half = n / 2 + n % 2;
    (median(&sorted[..half]), median(&sorted[n / 2..]))
}

/// Build the per-metric plot-data files from parsed CSV rows: one row per
/// swept value, columns per protocol with median and interquartile bounds
/// across seeds.
pub fn plot_data(
    rows: &[BTreeMap<String, String>],
    param: SweepParam,
    protocols: &[Protocol],
) -> Vec<(String, String)> {
    let pcol = param_column(param);
    // Distinct swept values in ascending numeric order, keeping the exact
    // printed form so recomputation stays bit-exact.
    let mut values: Vec<String> = Vec::new();
    for row in rows {
        let v = row[pcol].clone();
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values.sort_by(|a, b| {
        a.parse::<f64>()
            .unwrap_or(f64::MAX)
            .total_cmp(&b.parse::<f64>().unwrap_or(f64::MAX))
    });

    let mut files = Vec::new();
    for metric in PLOT_METRICS {
        let mut text = String::new();
        let mut header = vec![pcol.to_string()];
        for proto in protocols {
            header.push(format!("{proto}_median"));
            header.push(format!("{proto}_q1"));
            header.push(format!("{proto}_q3"));
        }
        let _ = writeln!(text, "{}", header.join(","));
        for value in &values {
            let mut cols = vec![value.clone()];
            for proto in protocols {
                let mut samples: Vec<f64> = rows
                    .iter()
                    .filter(|r| &r[pcol] == value && r["protocol"] == proto.token())
                    .filter_map(|r| r[metric].parse::<f64>().ok())
                    .collect();
                samples.sort_by(f64::total_cmp);
                if samples.is_empty() {
                    cols.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]);
                } else {
                    let (q1, q3) = quartiles(&samples);
                    cols.push(fmt6(median(&samples)));
                    cols.push(fmt6(q1));
                    cols.push(fmt6(q3));
                }
            }
            let _ = writeln!(text, "{}", cols.join(","));
        }
        files.push((format!("plot_{metric}.csv"), text));
    }
    files
}

/// Outcome of a sweep: all per-run outputs in deterministic order plus the
/// rendered aggregate CSV.
#[derive(Debug)]
pub struct SweepOutput {
    pub runs: Vec<RunOutput>,
    pub aggregate_csv: String,
}

/// Run `spec` for every protocol in `protocols`, every swept value and every
/// seed. Runs execute concurrently; outputs are assembled in deterministic
/// (value, protocol, seed) order. A failing run aborts the sweep with the
/// offending point identified.
pub fn run_sweep(
    spec: &SweepSpec,
    protocols: &[Protocol],
    out_dir: Option<&Path>,
    write_ledgers: bool,
) -> Result<SweepOutput, ScenarioError> {
    let mut jobs: Vec<ScenarioConfig> = Vec::new();
    for &value in &spec.values {
        for &proto in protocols {
            for &seed in &spec.seeds {
                let mut cfg = spec.base.clone();
                spec.param.apply(&mut cfg, value)?;
                cfg.protocol = proto;
                cfg.seed = seed;
                cfg.trace = false;
                cfg.validate()?;
                jobs.push(cfg);
            }
        }
    }
    let artifacts_for = |cfg: &ScenarioConfig| RunArtifacts {
        out_dir: out_dir.map(Path::to_path_buf),
        write_trace: false,
        write_ledger: write_ledgers,
        write_trajectories: false,
        tag: format!(
            "{}{}_{}_s{}",
            spec.param.token(),
            spec.param.read(cfg),
            cfg.protocol.token(),
            cfg.seed
        ),
    };
    let results: Result<Vec<RunOutput>, ScenarioError> = jobs
        .par_iter()
        .map(|cfg| {
            run_one(cfg, &artifacts_for(cfg)).map_err(|e| {
                ScenarioError::Other(format!(
                    "run failed at {}={} protocol={} seed={}: {e}",
                    spec.param.token(),
                    spec.param.read(cfg),
                    cfg.protocol.token(),
                    cfg.seed
                ))
            })
        })
        .collect();
    let runs = results?;

    let mut aggregate_csv = csv_header();
    aggregate_csv.push('\n');
    for out in &runs {
        aggregate_csv.push_str(&csv_row(out));
        aggregate_csv.push('\n');
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("aggregate.csv"), &aggregate_csv)?;
        fs::write(
            dir.join("sweep_meta.txt"),
            format!(
                "param = {}\nprotocols = {}\n",
                spec.param.token(),
                protocols
                    .iter()
                    .map(|p| p.token())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        )?;
        let rows = parse_csv(&aggregate_csv).map_err(ScenarioError::Other)?;
        for (name, text) in plot_data(&rows, spec.param, protocols) {
            fs::write(dir.join(name), text)?;
        }
    }
    Ok(SweepOutput {
        runs,
        aggregate_csv,
    })
}

/// Summary of a `report` recomputation.
#[derive(Debug, PartialEq, Eq)]
pub struct ReportSummary {
    pub rows: usize,
    pub from_ledgers: bool,
    /// Rows whose recomputed metrics differ from the stored aggregate.
    pub mismatches: usize,
}

/// Recompute aggregates in `dir`. When per-run ledgers are present the rows
/// are rebuilt from them (and checked against any stored aggregate);
/// otherwise the stored aggregate rows are re-aggregated. Plot-data files
/// are rewritten either way.
pub fn report_from_dir(dir: &Path) -> Result<ReportSummary, ScenarioError> {
    let meta_text = fs::read_to_string(dir.join("sweep_meta.txt")).map_err(|_| {
        ScenarioError::Other(format!(
            "{} does not look like a sweep output directory (missing sweep_meta.txt)",
            dir.display()
        ))
    })?;
    let mut param = None;
    let mut protocols: Vec<Protocol> = Vec::new();
    for line in meta_text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "param" => param = SweepParam::parse(v.trim()),
                "protocols" => {
                    protocols = v
                        .trim()
                        .split(',')
                        .filter_map(Protocol::parse)
                        .collect();
                }
                _ => {}
            }
        }
    }
    let param = param.ok_or_else(|| ScenarioError::Other("sweep_meta.txt: missing param".into()))?;

    let mut ledger_files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ledger"))
        .collect();
    ledger_files.sort();

    let stored_rows = fs::read_to_string(dir.join("aggregate.csv"))
        .ok()
        .map(|t| parse_csv(&t))
        .transpose()
        .map_err(ScenarioError::Other)?;

    let (rows, from_ledgers, mismatches) = if ledger_files.is_empty() {
        let rows = stored_rows.ok_or_else(|| {
            ScenarioError::Other("neither ledgers nor aggregate.csv present".into())
        })?;
        (rows, false, 0)
    } else {
        let mut csv = csv_header();
        csv.push('\n');
        for path in &ledger_files {
            let file = fs::File::open(path)?;
            let (meta, ledger) = PacketLedger::from_reader(BufReader::new(file))?;
            csv.push_str(&row_from_ledger(&meta, &ledger, path)?);
            csv.push('\n');
        }
        let rows = parse_csv(&csv).map_err(ScenarioError::Other)?;
        let mismatches = match &stored_rows {
            Some(stored) => count_mismatches(stored, &rows),
            None => 0,
        };
        fs::write(dir.join("aggregate.csv"), &csv)?;
        (rows, true, mismatches)
    };

    for (name, text) in plot_data(&rows, param, &protocols) {
        fs::write(dir.join(name), text)?;
    }
    Ok(ReportSummary {
        rows: rows.len(),
        from_ledgers,
        mismatches,
    })
}

fn row_from_ledger(
    meta: &BTreeMap<String, String>,
    ledger: &PacketLedger,
    path: &Path,
) -> Result<String, ScenarioError> {
    let get = |key: &str| -> Result<&str, ScenarioError> {
        meta.get(key).map(String::as_str).ok_or_else(|| {
            ScenarioError::Other(format!("{}: ledger missing metadata `{key}`", path.display()))
        })
    };
    let parse_f = |key: &str| -> Result<f64, ScenarioError> {
        get(key)?
            .parse::<f64>()
            .map_err(|e| ScenarioError::Other(format!("{}: bad `{key}`: {e}", path.display())))
    };
    let sim_time = parse_f("sim_time_s")?;
    let m = report(ledger, SimTime::ZERO, SimTime::new(sim_time));
    let drop = |r: DropReason| m.drops_by_reason.get(&r).copied().unwrap_or(0);
    let cols: Vec<String> = vec![
        get("protocol")?.to_string(),
        get("nodes")?.to_string(),
        get("connections")?.to_string(),
        fmt6(parse_f("pause_s")?),
        fmt6(parse_f("speed_min")?),
        fmt6(parse_f("speed_max")?),
        fmt6(sim_time),
        get("seed")?.to_string(),
        m.sent.to_string(),
        m.delivered.to_string(),
        m.dropped.to_string(),
        m.in_flight.to_string(),
        fmt_opt(m.pdr_pct),
        fmt_opt(m.avg_e2e_delay_ms),
        m.packet_loss_count.to_string(),
        fmt_opt(m.packet_loss_frac),
        fmt_opt(m.packet_loss_ratio_pct),
        fmt6(m.avg_throughput_kbps),
        drop(DropReason::QueueOverflow).to_string(),
        drop(DropReason::NoRoute).to_string(),
        drop(DropReason::LinkBreak).to_string(),
        drop(DropReason::DestUnreachable).to_string(),
        drop(DropReason::NoNeighbor).to_string(),
        drop(DropReason::Malformed).to_string(),
        get("ctrl_packets")?.to_string(),
        get("ctrl_bytes")?.to_string(),
    ];
    Ok(cols.join(","))
}

fn count_mismatches(
    stored: &[BTreeMap<String, String>],
    recomputed: &[BTreeMap<String, String>],
) -> usize {
    let key = |r: &BTreeMap<String, String>| {
        (
            r["protocol"].clone(),
            r["nodes"].clone(),
            r["connections"].clone(),
            r["pause_s"].clone(),
            r["speed_max"].clone(),
            r["seed"].clone(),
        )
    };
    let stored_by_key: BTreeMap<_, _> = stored.iter().map(|r| (key(r), r)).collect();
    recomputed
        .iter()
        .filter(|r| match stored_by_key.get(&key(r)) {
            Some(s) => *s != *r,
            None => true,
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_quartiles_are_stable() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0]), (1.5, 3.5));
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), (2.0, 4.0));
        assert_eq!(quartiles(&[7.0]), (7.0, 7.0));
    }

    #[test]
    fn csv_round_trips_through_parser() {
        let header = csv_header();
        assert_eq!(header.split(',').count(), CSV_COLUMNS.len());
        let text = format!(
            "{header}\naodv,30,10,0.000000,20.000000,20.000000,600.000000,1,100,90,8,2,90.000000,120.500000,10,0.100000,10.000000,6.144000,0,5,3,0,0,0,42,2016\n"
        );
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["protocol"], "aodv");
        assert_eq!(rows[0]["pdr_pct"], "90.000000");
        assert_eq!(rows[0]["ctrl_bytes"], "2016");
    }

    #[test]
    fn plot_data_has_one_row_per_value_and_fixed_columns() {
        let mut csv = csv_header();
        csv.push('\n');
        for (pause, proto, seed, pdr) in [
            (50.0, "aodv", 1, 90.0),
            (50.0, "aodv", 2, 92.0),
            (50.0, "gpsr", 1, 95.0),
            (100.0, "aodv", 1, 88.0),
            (100.0, "gpsr", 1, 97.0),
            (100.0, "gpsr", 2, 93.0),
        ] {
            csv.push_str(&format!(
                "{proto},200,100,{pause:.6},10.000000,10.000000,600.000000,{seed},100,90,8,2,{pdr:.6},100.000000,10,0.100000,10.000000,6.144000,0,5,3,0,0,0,7,336\n"
            ));
        }
        let rows = parse_csv(&csv).unwrap();
        let files = plot_data(&rows, SweepParam::Pause, &[Protocol::Aodv, Protocol::Gpsr]);
        assert_eq!(files.len(), PLOT_METRICS.len());
        let (name, pdr_file) = files
            .iter()
            .find(|(n, _)| n == "plot_pdr_pct.csv")
            .unwrap();
        assert_eq!(name, "plot_pdr_pct.csv");
        let lines: Vec<&str> = pdr_file.lines().collect();
        assert_eq!(
            lines[0],
            "pause_s,aodv_median,aodv_q1,aodv_q3,gpsr_median,gpsr_q1,gpsr_q3"
        );
        assert_eq!(lines.len(), 3, "one row per swept value");
        assert!(lines[1].starts_with("50.000000,91.000000,"));
        assert!(lines[2].starts_with("100.000000,88.000000,"));
        // gpsr at pause 100: median of {97, 93} = 95.
        assert!(lines[2].contains(",95.000000,"));
    }
}
