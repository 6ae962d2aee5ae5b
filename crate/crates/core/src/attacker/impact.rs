use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Serialize, Serializer};

use crate::endpoints::{Detection, TelemetryRecord, Verdict};
use crate::netsim::IpAddr4;
use crate::wire::VitalSigns;

use super::AttackError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToPeer,
    ToVictim,
}

fn as_hex<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(bytes))
}

/// One frame that passed through the attacker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterceptEntry {
    pub t_ms: u64,
    pub direction: Direction,
    pub src_ip: IpAddr4,
    pub dst_ip: IpAddr4,
    /// 1-based telemetry message index; `None` for uninteresting traffic.
    pub message: Option<u64>,
    #[serde(serialize_with = "as_hex")]
    pub original: Vec<u8>,
    #[serde(serialize_with = "as_hex")]
    pub forwarded: Vec<u8>,
    /// Rules applied, `"uninteresting"` for non-telemetry, `None` when relayed as is.
    pub rule: Option<String>,
    pub beyond_paper: bool,
    /// Vitals the attacker could read from the original payload.
    pub extraction: Option<VitalSigns>,
    /// False when the frame was swallowed instead of relayed.
    pub relayed: bool,
}

impl InterceptEntry {
    pub fn is_telemetry(&self) -> bool {
        self.message.is_some()
    }

    pub fn is_tampered(&self) -> bool {
        self.is_telemetry() && self.original != self.forwarded
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InterceptLog {
    pub run_id: String,
    pub entries: Vec<InterceptEntry>,
}

impl InterceptLog {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn telemetry(&self) -> impl Iterator<Item = &InterceptEntry> {
        self.entries.iter().filter(|e| e.is_telemetry())
    }

    pub fn export<W: Write>(&self, mut out: W) -> io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Server-side log of one run, tagged so it cannot be joined against
/// another run's intercepts.
#[derive(Debug, Clone, Copy)]
pub struct ServerLogView<'a> {
    pub run_id: &'a str,
    pub records: &'a [TelemetryRecord],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImpactRow {
    pub message: u64,
    pub original: Option<VitalSigns>,
    /// What the server decoded from the tampered request, when it decoded anything.
    pub tampered: Option<VitalSigns>,
    pub rule: String,
    /// `None` when the tampered request never reached the server.
    pub verdict: Option<Verdict>,
    pub detection: Option<Detection>,
    pub beyond_paper: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImpactCounts {
    pub intercepted: u64,
    pub readable: u64,
    pub tampered: u64,
    pub accepted_despite_tamper: u64,
    /// Accepted tampered requests produced by beyond-paper rules; already
    /// included in `accepted_despite_tamper`.
    pub beyond_paper_accepted: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImpactReport {
    pub run_id: String,
    pub rows: Vec<ImpactRow>,
    pub counts: ImpactCounts,
}

const TABLE_HEADER: &str = "| Original Heart Rate (BPM) | Tampered Heart Rate (BPM) | Original Temperature (°F) \
     | Tampered Temperature (°F) | Server Verdict | Detection by Server |";

impl ImpactReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Attack impact\n\n");
        let c = &self.counts;
        let _ = writeln!(out, "- run: {}", self.run_id);
        let _ = writeln!(out, "- intercepted: {}", c.intercepted);
        let _ = writeln!(out, "- readable: {}", c.readable);
        let _ = writeln!(out, "- tampered: {}", c.tampered);
        let _ = writeln!(out, "- accepted despite tamper: {}", c.accepted_despite_tamper);
        if c.beyond_paper_accepted > 0 {
            let _ = writeln!(out, "- of which beyond-paper (IV bit flips): {}", c.beyond_paper_accepted);
        }
        if self.rows.is_empty() {
            return out;
        }
        out.push('\n');
        out.push_str(TABLE_HEADER);
        out.push_str("\n|---|---|---|---|---|---|\n");
        let opaque = |v: Option<VitalSigns>, f: fn(&VitalSigns) -> String| v.as_ref().map_or("opaque".to_string(), f);
        let hr = |v: &VitalSigns| v.heart_rate_bpm.to_string();
        let temp = |v: &VitalSigns| v.temperature_text();
        for row in &self.rows {
            let verdict = row.verdict.as_ref().map_or("lost".to_string(), |v| v.to_string());
            let mut detection = row.detection.map_or("-".to_string(), |d| d.to_string());
            if row.beyond_paper {
                detection.push_str(" (beyond-paper)");
            }
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                opaque(row.original, hr),
                row.tampered.as_ref().map_or("-".to_string(), hr),
                opaque(row.original, temp),
                row.tampered.as_ref().map_or("-".to_string(), temp),
                verdict,
                detection,
            );
        }
        out
    }
}

/// Joins what the attacker relayed with what the server recorded.
///
/// A relayed request reaches the server exactly one propagation delay
/// later, so entries and records are matched by source and arrival time,
/// both walked in order. Requests lost in transit have no outcome.
pub fn assess(
    intercept: &InterceptLog,
    server: ServerLogView<'_>,
    propagation_ms: u64,
) -> Result<ImpactReport, AttackError> {
    if intercept.run_id != server.run_id {
        return Err(AttackError::RunMismatch {
            intercept: intercept.run_id.clone(),
            server: server.run_id.to_string(),
        });
    }
    let mut report = ImpactReport {
        run_id: intercept.run_id.clone(),
        ..ImpactReport::default()
    };
    let mut cursor = 0;
    for entry in intercept.telemetry().filter(|e| e.direction == Direction::ToPeer) {
        report.counts.intercepted += 1;
        if entry.extraction.is_some() {
            report.counts.readable += 1;
        }
        let expected = entry.t_ms + propagation_ms;
        let mut outcome = None;
        if entry.relayed {
            while let Some(rec) = server.records.get(cursor) {
                if rec.received_at > expected {
                    break;
                }
                cursor += 1;
                if rec.received_at == expected && rec.source_ip == entry.src_ip {
                    outcome = Some(rec);
                    break;
                }
            }
        }
        if !entry.is_tampered() {
            continue;
        }
        report.counts.tampered += 1;
        let accepted = outcome.is_some_and(|r| r.verdict.is_accepted());
        if accepted {
            report.counts.accepted_despite_tamper += 1;
            if entry.beyond_paper {
                report.counts.beyond_paper_accepted += 1;
            }
        }
        report.rows.push(ImpactRow {
            message: entry.message.expect("telemetry entry"),
            original: entry.extraction,
            tampered: outcome.and_then(|r| r.vitals),
            rule: entry.rule.clone().unwrap_or_default(),
            verdict: outcome.map(|r| r.verdict.clone()),
            detection: outcome.map(|r| r.detection),
            beyond_paper: entry.beyond_paper,
        });
    }
    Ok(report)
}
