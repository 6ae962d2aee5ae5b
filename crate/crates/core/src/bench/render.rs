use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{pct_increase, BenchReport, ModeSummary, ResourcePreset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Md,
    Csv,
}

pub const LATENCY_HEADER: [&str; 5] = [
    "Transmission Type",
    "Average Latency (ms)",
    "Standard Deviation (ms)",
    "Minimum (ms)",
    "Maximum (ms)",
];
pub const RESOURCE_HEADER: [&str; 4] = [
    "System Resource",
    "Unencrypted Usage",
    "Encrypted Usage",
    "Percentage Increase",
];
pub const RELIABILITY_HEADER: [&str; 4] = [
    "Performance Metric",
    "Unencrypted System",
    "Encrypted System",
    "Performance Impact",
];

pub const LATENCY_TITLE: &str = "Latency Impact Assessment (calibrated model, paper preset)";
pub const RESOURCE_TITLE: &str = "Resource Utilization Analysis (modeled (paper preset))";
pub const RELIABILITY_TITLE: &str = "Transmission Reliability Metrics (calibrated model, paper preset)";

struct Table {
    title: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn ms(v: f64) -> String {
    format!("{v:.2}")
}

fn signed(v: f64) -> String {
    format!("{v:+.2}")
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

fn latency_table(report: &BenchReport) -> Table {
    let stats = |m: &Option<ModeSummary>| m.as_ref().and_then(|m| m.latency);
    let mut rows = Vec::new();
    for (label, s) in [("Unencrypted", stats(&report.plain)), ("Encrypted", stats(&report.encrypted))] {
        if let Some(s) = s {
            rows.push(vec![label.to_string(), ms(s.mean), ms(s.sd), ms(s.min), ms(s.max)]);
        }
    }
    let increase = match (stats(&report.plain), stats(&report.encrypted)) {
        (Some(p), Some(e)) => vec![
            "Increase".to_string(),
            format!("{} ({:+.2}%)", signed(e.mean - p.mean), pct_increase(p.mean, e.mean)),
            signed(e.sd - p.sd),
            signed(e.min - p.min),
            signed(e.max - p.max),
        ],
        _ => vec!["Increase".to_string(), String::new(), String::new(), String::new(), String::new()],
    };
    rows.push(increase);
    Table {
        title: LATENCY_TITLE,
        header: LATENCY_HEADER.to_vec(),
        rows,
    }
}

fn resource_table(report: &BenchReport) -> Table {
    let r = &report.resources;
    type Field = (&'static str, fn(&ResourcePreset) -> f64, &'static str);
    let fields: [Field; 4] = [
        ("CPU Utilization", |x| x.cpu_pct, "%"),
        ("Memory Usage", |x| x.memory_kb, " KB"),
        ("Flash Storage", |x| x.flash_kb, " KB"),
        ("Power Consumption", |x| x.power_ma, " mA"),
    ];
    let rows = fields
        .iter()
        .map(|(label, get, unit)| {
            let (p, e) = (get(&r.plain), get(&r.encrypted));
            vec![
                label.to_string(),
                format!("{p}{unit}"),
                format!("{e}{unit}"),
                format!("{:+.2}%", pct_increase(p, e)),
            ]
        })
        .collect();
    Table {
        title: RESOURCE_TITLE,
        header: RESOURCE_HEADER.to_vec(),
        rows,
    }
}

fn reliability_table(report: &BenchReport) -> Table {
    let (p, e) = (report.plain.as_ref(), report.encrypted.as_ref());
    let cell = |m: Option<&ModeSummary>, f: &dyn Fn(&ModeSummary) -> Option<String>| {
        m.and_then(f).unwrap_or_default()
    };
    let both = |f: &dyn Fn(&ModeSummary) -> Option<f64>| match (p.and_then(f), e.and_then(f)) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let points = |d: Option<(f64, f64)>| d.map(|(a, b)| format!("{:+.2} pp", (b - a) * 100.0)).unwrap_or_default();
    let recovery = |m: &ModeSummary| m.mean_recovery_ms;
    let rows = vec![
        vec![
            "Packet Success Rate".to_string(),
            cell(p, &|m| Some(pct(m.success_rate))),
            cell(e, &|m| Some(pct(m.success_rate))),
            points(both(&|m| Some(m.success_rate))),
        ],
        vec![
            "Error Recovery Time".to_string(),
            cell(p, &|m| recovery(m).map(|v| format!("{:.2} seconds", v / 1000.0))),
            cell(e, &|m| recovery(m).map(|v| format!("{:.2} seconds", v / 1000.0))),
            both(&recovery)
                .map(|(a, b)| format!("{:+.2}%", pct_increase(a, b)))
                .unwrap_or_default(),
        ],
        vec![
            "Connection Stability".to_string(),
            cell(p, &|m| Some(pct(m.stability))),
            cell(e, &|m| Some(pct(m.stability))),
            points(both(&|m| Some(m.stability))),
        ],
    ];
    Table {
        title: RELIABILITY_TITLE,
        header: RELIABILITY_HEADER.to_vec(),
        rows,
    }
}

fn tables(report: &BenchReport) -> [Table; 3] {
    [latency_table(report), resource_table(report), reliability_table(report)]
}

fn markdown(report: &BenchReport) -> String {
    let mut out = String::from("# Performance report\n\n");
    let _ = writeln!(out, "Messages per mode: {}\n", report.messages);
    out.push_str(
        "Latency and reliability come from the calibrated cost model of the paper preset; \
         they validate the declared calibration, not ESP8266 hardware timings. \
         Resource rows are modeled (paper preset) and echoed, never measured.\n",
    );
    for table in tables(report) {
        let _ = write!(out, "\n## {}\n\n| {} |\n", table.title, table.header.join(" | "));
        out.push('|');
        out.push_str(&"---|".repeat(table.header.len()));
        out.push('\n');
        for row in &table.rows {
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
    }
    out
}

fn csv(report: &BenchReport) -> String {
    let mut blocks = Vec::new();
    for table in tables(report) {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record([table.title]).expect("in-memory write");
        w.write_record(&table.header).expect("in-memory write");
        for row in &table.rows {
            w.write_record(row).expect("in-memory write");
        }
        blocks.push(String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    }
    blocks.join("\n")
}

pub fn render_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Md => markdown(report),
        ReportFormat::Csv => csv(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{report_from_samples, run_bench, BenchParams, BenchPreset};
    use crate::endpoints::TransportMode;

    fn numbers(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in text.chars() {
            if c.is_ascii_digit() || c == '.' || (cur.is_empty() && (c == '+' || c == '-')) {
                cur.push(c);
            } else {
                if cur.chars().any(|c| c.is_ascii_digit()) {
                    out.push(cur.trim_end_matches('.').to_string());
                }
                cur.clear();
            }
        }
        out
    }

    #[test]
    fn headers_are_verbatim() {
        let (report, _) = run_bench(&BenchPreset::paper(), &BenchParams::new(1, 50)).unwrap();
        let md = render_report(&report, ReportFormat::Md);
        assert!(md.contains(
            "| Transmission Type | Average Latency (ms) | Standard Deviation (ms) | Minimum (ms) | Maximum (ms) |"
        ));
        assert!(md.contains("| System Resource | Unencrypted Usage | Encrypted Usage | Percentage Increase |"));
        assert!(md.contains("| Performance Metric | Unencrypted System | Encrypted System | Performance Impact |"));
        let csv = render_report(&report, ReportFormat::Csv);
        assert!(csv.contains("Transmission Type,Average Latency (ms),Standard Deviation (ms),Minimum (ms),Maximum (ms)"));
    }

    #[test]
    fn resources_echo_preset() {
        let (report, _) = run_bench(&BenchPreset::paper(), &BenchParams::new(1, 10)).unwrap();
        let md = render_report(&report, ReportFormat::Md);
        for row in [
            "| CPU Utilization | 30% | 45% | +50.00% |",
            "| Memory Usage | 28.5 KB | 32.1 KB | +12.63% |",
            "| Flash Storage | 245 KB | 267 KB | +8.98% |",
            "| Power Consumption | 82 mA | 89 mA | +8.54% |",
        ] {
            assert!(md.contains(row), "missing {row}");
        }
        assert!(md.contains("modeled (paper preset)"));
    }

    #[test]
    fn plain_only_report_has_blank_deltas() {
        let (_, samples) = run_bench(&BenchPreset::paper(), &BenchParams::new(1, 20)).unwrap();
        let plain: Vec<_> = samples.into_iter().filter(|s| s.mode == TransportMode::Plain).collect();
        let report = report_from_samples(&plain, &BenchPreset::paper());
        let md = render_report(&report, ReportFormat::Md);
        assert!(md.contains("| Unencrypted |"));
        assert!(!md.contains("| Encrypted |"));
        assert!(md.contains("| Increase |  |  |  |  |"));
    }

    #[test]
    fn markdown_and_csv_carry_the_same_numbers() {
        let (report, _) = run_bench(&BenchPreset::paper(), &BenchParams::new(4, 200)).unwrap();
        let md = render_report(&report, ReportFormat::Md);
        let csv = render_report(&report, ReportFormat::Csv);
        let body = |text: &str, start: &str| numbers(&text[text.find(start).unwrap()..]);
        assert_eq!(body(&md, "Transmission Type"), body(&csv, "Transmission Type"));
    }
}
