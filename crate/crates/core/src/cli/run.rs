use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::attacker::{assess, Direction, ImpactReport, InterceptLog, ServerLogView};
use crate::bench::{read_samples, render_report, report_from_samples, run_bench, write_samples, BenchPreset, ReportFormat};
use crate::endpoints::{Detection, DeviceEvent, TransportMode};
use crate::scenario::Testbed;

use super::{CliError, ScenarioConfig};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const PRESET_FILE: &str = "preset.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RejectionCounts {
    pub padding_error: u64,
    pub parse_error: u64,
    pub range_violation: u64,
    pub seq_replay: u64,
}

impl RejectionCounts {
    pub fn total(&self) -> u64 {
        self.padding_error + self.parse_error + self.range_violation + self.seq_replay
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    /// Distinct messages the device produced.
    pub sent: u64,
    /// Every request put on the wire, retransmissions included.
    pub transmissions: u64,
    pub lost: u64,
    /// Requests the server logged.
    pub received: u64,
    pub accepted: u64,
    pub rejected: RejectionCounts,
    /// Device-to-server telemetry frames that passed through the attacker.
    pub intercepted: u64,
    pub readable: u64,
    pub tampered: u64,
    pub accepted_despite_tamper: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub scenario: String,
    pub mode: TransportMode,
    pub seed: u64,
    pub messages: u64,
    pub counts: RunCounts,
    pub poisoned_at_ms: Option<u64>,
    pub restored_at_ms: Option<u64>,
    /// File names inside the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub run_id: String,
    pub seed: u64,
    pub messages: u64,
    pub latency_increase_pct: Option<f64>,
    pub artifacts: Vec<String>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("create {}", dir.display()), e))?;
        Ok(Self { dir, names: Vec::new() })
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let context = || format!("write {}", path.display());
        let file = File::create(&path).map_err(|e| CliError::io(context(), e))?;
        let mut out = BufWriter::new(file);
        fill(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(context(), e))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |out| out.write_all(text.as_bytes()))
    }
}

fn jsonl<T: Serialize>(items: &[T], out: &mut dyn Write) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn count_rejections(testbed: &Testbed) -> (u64, RejectionCounts) {
    let mut accepted = 0;
    let mut rejected = RejectionCounts::default();
    for record in testbed.server().log() {
        match record.detection {
            Detection::None => accepted += 1,
            Detection::PaddingError => rejected.padding_error += 1,
            Detection::ParseError => rejected.parse_error += 1,
            Detection::RangeViolation => rejected.range_violation += 1,
            Detection::SeqReplay => rejected.seq_replay += 1,
        }
    }
    (accepted, rejected)
}

fn check_invariants(config: &ScenarioConfig, counts: &RunCounts, log: &[DeviceEvent]) -> Result<(), CliError> {
    let fail = |msg: String| Err(CliError::Invariant(msg));
    if counts.sent != config.messages {
        return fail(format!("device sent {} of {} messages", counts.sent, config.messages));
    }
    if counts.accepted + counts.rejected.total() != counts.received {
        return fail("accepted + rejected differs from received".into());
    }
    if counts.received > counts.transmissions {
        return fail("server received more requests than were transmitted".into());
    }
    if counts.readable > counts.intercepted || counts.tampered > counts.intercepted {
        return fail("intercept counts exceed interceptions".into());
    }
    if counts.accepted_despite_tamper > counts.tampered {
        return fail("more tampered acceptances than tampered messages".into());
    }
    let settled = log
        .iter()
        .filter(|e| matches!(e, DeviceEvent::Acked { .. } | DeviceEvent::Lost { .. }))
        .count() as u64;
    if settled != counts.sent {
        return fail(format!("{settled} of {} messages settled", counts.sent));
    }
    let lossless = config.topology.loss == 0.0 && config.attack.is_none();
    if lossless && (counts.received != counts.sent || counts.lost != 0) {
        return fail("lossless run without attacker did not deliver every message exactly once".into());
    }
    Ok(())
}

/// Executes one scenario and writes its artifacts into `out`.
pub fn run(config: &ScenarioConfig, out: &Path) -> Result<RunSummary, CliError> {
    let mut testbed = Testbed::new(config.testbed_spec())?;
    testbed.run()?;

    let (accepted, rejected) = count_rejections(&testbed);
    let device_log = testbed.device().log();
    let mut counts = RunCounts {
        sent: testbed.device().sent().len() as u64,
        transmissions: device_log.iter().filter(|e| matches!(e, DeviceEvent::Sent { .. })).count() as u64,
        lost: device_log.iter().filter(|e| matches!(e, DeviceEvent::Lost { .. })).count() as u64,
        received: testbed.server().log().len() as u64,
        accepted,
        rejected,
        ..RunCounts::default()
    };

    let mut impact: Option<ImpactReport> = None;
    let empty_log = InterceptLog::new(testbed.run_id());
    let intercept = testbed.attacker().map_or(&empty_log, |a| a.log());
    for entry in intercept.telemetry().filter(|e| e.direction == Direction::ToPeer) {
        counts.intercepted += 1;
        counts.readable += u64::from(entry.extraction.is_some());
        counts.tampered += u64::from(entry.is_tampered());
    }
    if testbed.attacker().is_some() {
        let view = ServerLogView {
            run_id: testbed.run_id(),
            records: testbed.server().log(),
        };
        let report = assess(intercept, view, config.topology.propagation_ms)
            .map_err(|e| CliError::Invariant(e.to_string()))?;
        counts.accepted_despite_tamper = report.counts.accepted_despite_tamper;
        if report.counts.tampered != counts.tampered || report.counts.intercepted != counts.intercepted {
            return Err(CliError::Invariant("impact assessment disagrees with the intercept log".into()));
        }
        impact = Some(report);
    }
    check_invariants(config, &counts, device_log)?;

    let mut files = Artifacts::new(out)?;
    files.write("capture.jsonl", |w| testbed.net().medium().export_capture(w))?;
    files.write("server_log.jsonl", |w| testbed.server().export_log(w))?;
    files.write("device_log.jsonl", |w| jsonl(device_log, w))?;
    if let Some(attacker) = testbed.attacker() {
        files.write("intercept_log.jsonl", |w| attacker.log().export(w))?;
    }
    if let Some(report) = &impact {
        files.text("impact.md", &report.to_markdown())?;
        files.text("impact.json", &(report.to_json() + "\n"))?;
    }
    let mut artifacts = files.names.clone();
    artifacts.push("summary.json".into());
    let summary = RunSummary {
        run_id: testbed.run_id().to_string(),
        scenario: config.name.clone(),
        mode: config.mode,
        seed: config.seed,
        messages: config.messages,
        counts,
        poisoned_at_ms: testbed.attacker().and_then(|a| a.poisoned_at()),
        restored_at_ms: testbed.attacker().and_then(|a| a.restored_at()),
        artifacts,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    files.text("summary.json", &json)?;
    Ok(summary)
}

/// Runs the paired plain/encrypted benchmark of the config's preset and
/// writes both report formats, the raw samples and the preset used.
pub fn bench(config: &ScenarioConfig, out: &Path) -> Result<BenchSummary, CliError> {
    if config.messages == 0 {
        return Err(CliError::Config {
            key: "messages".into(),
            message: "messages must be > 0".into(),
        });
    }
    let (report, samples) = run_bench(&config.models, &config.bench_params())?;
    let mut files = Artifacts::new(out)?;
    files.text("report.md", &render_report(&report, ReportFormat::Md))?;
    files.text("report.csv", &render_report(&report, ReportFormat::Csv))?;
    files.write(SAMPLES_FILE, |w| write_samples(&samples, w))?;
    let preset = serde_json::to_string_pretty(&config.models).expect("preset serializes") + "\n";
    files.text(PRESET_FILE, &preset)?;
    Ok(BenchSummary {
        run_id: config.run_id(),
        seed: config.seed,
        messages: config.messages,
        latency_increase_pct: report.latency_increase_pct(),
        artifacts: files.names,
    })
}

/// Re-renders a report from saved samples and a preset.
pub fn render_saved(samples_path: &Path, preset: &BenchPreset, format: ReportFormat) -> Result<String, CliError> {
    let file = File::open(samples_path).map_err(|e| CliError::io(format!("open {}", samples_path.display()), e))?;
    let samples = read_samples(BufReader::new(file))?;
    if samples.is_empty() {
        return Err(crate::bench::BenchError::EmptySamples.into());
    }
    Ok(render_report(&report_from_samples(&samples, preset), format))
}

/// Re-renders the report of a bench output directory from its own samples
/// and preset.
pub fn report(out: &Path, format: ReportFormat) -> Result<String, CliError> {
    let preset_path = out.join(PRESET_FILE);
    let text = fs::read_to_string(&preset_path).map_err(|e| CliError::io(format!("read {}", preset_path.display()), e))?;
    let preset: BenchPreset = serde_json::from_str(&text).map_err(|e| CliError::Config {
        key: PRESET_FILE.into(),
        message: e.to_string(),
    })?;
    render_saved(&out.join(SAMPLES_FILE), &preset, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::load_config;

    #[test]
    fn plain_passive_summary_reconciles() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = load_config("paper-plain-passive".as_ref()).unwrap();
        cfg.messages = 10;
        let summary = run(&cfg, dir.path()).unwrap();
        let c = &summary.counts;
        assert_eq!((c.sent, c.received, c.accepted, c.intercepted, c.readable), (10, 10, 10, 10, 10));
        let lines = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count() as u64;
        assert_eq!(lines("server_log.jsonl"), c.received);
        assert!(summary.artifacts.iter().any(|a| a == "impact.md"));
    }

    #[test]
    fn bench_then_report_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = load_config("bench-paper".as_ref()).unwrap();
        cfg.messages = 60;
        bench(&cfg, dir.path()).unwrap();
        for (format, name) in [(ReportFormat::Md, "report.md"), (ReportFormat::Csv, "report.csv")] {
            let again = report(dir.path(), format).unwrap();
            assert_eq!(again, fs::read_to_string(dir.path().join(name)).unwrap());
        }
    }

    #[test]
    fn bench_zero_messages_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = load_config("bench-paper".as_ref()).unwrap();
        cfg.messages = 0;
        assert_eq!(bench(&cfg, dir.path()).unwrap_err().exit_code(), 1);
    }
}
