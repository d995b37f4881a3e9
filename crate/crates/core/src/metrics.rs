//! Operation counters and report emission.

use std::io;
use std::ops::AddAssign;

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    pub events_total: u64,
    pub accesses_total: u64,
    pub accesses_sampled: u64,
    pub acquires_total: u64,
    pub acquires_skipped: u64,
    pub releases_total: u64,
    /// Releases that copied a full clock (or deep-copied a list).
    pub releases_copied: u64,
    pub deep_copies: u64,
    pub shallow_copies: u64,
    /// Ordered-list entries walked during acquires.
    pub nodes_visited: u64,
    /// Full-width clock passes: joins, copies and deep copies.
    pub full_traversals: u64,
    /// `T - visited` summed over non-skipped ordered-list acquires.
    pub entries_saved: u64,
    pub race_count: u64,
    pub epoch_increments: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl RunMetrics {
    pub fn skip_ratio(&self) -> f64 {
        ratio(self.acquires_skipped, self.acquires_total)
    }

    /// Entries saved over all entries a full join would have walked at the
    /// non-skipped acquires.
    pub fn saving_ratio(&self, threads: usize) -> f64 {
        let processed = self.acquires_total - self.acquires_skipped;
        ratio(self.entries_saved, threads as u64 * processed)
    }
}

impl AddAssign<&RunMetrics> for RunMetrics {
    fn add_assign(&mut self, o: &RunMetrics) {
        self.events_total += o.events_total;
        self.accesses_total += o.accesses_total;
        self.accesses_sampled += o.accesses_sampled;
        self.acquires_total += o.acquires_total;
        self.acquires_skipped += o.acquires_skipped;
        self.releases_total += o.releases_total;
        self.releases_copied += o.releases_copied;
        self.deep_copies += o.deep_copies;
        self.shallow_copies += o.shallow_copies;
        self.nodes_visited += o.nodes_visited;
        self.full_traversals += o.full_traversals;
        self.entries_saved += o.entries_saved;
        self.race_count += o.race_count;
        self.epoch_increments += o.epoch_increments;
    }
}

/// One report row: labels followed by the counters and derived ratios.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub engine: String,
    pub trace: String,
    /// Empty when the trace's own marks were used.
    pub rate: Option<f64>,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: RunMetrics,
    pub skip_ratio: f64,
    pub saving_ratio: f64,
}

impl MetricsRecord {
    pub fn new(engine: &str, trace: &str, rate: Option<f64>, seed: u64, threads: usize, metrics: RunMetrics) -> Self {
        Self {
            engine: engine.to_owned(),
            trace: trace.to_owned(),
            rate,
            seed,
            skip_ratio: metrics.skip_ratio(),
            saving_ratio: metrics.saving_ratio(threads),
            metrics,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

const CSV_HEADER: [&str; 20] = [
    "engine",
    "trace",
    "rate",
    "seed",
    "events_total",
    "accesses_total",
    "accesses_sampled",
    "acquires_total",
    "acquires_skipped",
    "releases_total",
    "releases_copied",
    "deep_copies",
    "shallow_copies",
    "nodes_visited",
    "full_traversals",
    "entries_saved",
    "race_count",
    "epoch_increments",
    "skip_ratio",
    "saving_ratio",
];

/// Writes records as a JSON array (one object per record) or as CSV with a
/// header row.
pub fn emit(records: &[MetricsRecord], format: ReportFormat, out: impl io::Write) -> io::Result<()> {
    match format {
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                let m = &r.metrics;
                let mut row = vec![
                    r.engine.clone(),
                    r.trace.clone(),
                    r.rate.map(|x| x.to_string()).unwrap_or_default(),
                    r.seed.to_string(),
                ];
                row.extend(
                    [
                        m.events_total,
                        m.accesses_total,
                        m.accesses_sampled,
                        m.acquires_total,
                        m.acquires_skipped,
                        m.releases_total,
                        m.releases_copied,
                        m.deep_copies,
                        m.shallow_copies,
                        m.nodes_visited,
                        m.full_traversals,
                        m.entries_saved,
                        m.race_count,
                        m.epoch_increments,
                    ]
                    .iter()
                    .map(u64::to_string),
                );
                row.push(format!("{:.6}", r.skip_ratio));
                row.push(format!("{:.6}", r.saving_ratio));
                w.write_record(&row)?;
            }
            w.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_has_zero_ratios() {
        let m = RunMetrics::default();
        assert_eq!(m.skip_ratio(), 0.0);
        assert_eq!(m.saving_ratio(4), 0.0);
    }

    #[test]
    fn ratios() {
        let m = RunMetrics {
            acquires_total: 8,
            acquires_skipped: 6,
            entries_saved: 3,
            ..RunMetrics::default()
        };
        assert_eq!(m.skip_ratio(), 0.75);
        assert_eq!(m.saving_ratio(2), 0.75);
    }

    #[test]
    fn csv_has_header_and_stable_columns() {
        let rec = MetricsRecord::new("uclock", "t.trace", Some(0.03), 7, 2, RunMetrics::default());
        let mut buf = Vec::new();
        emit(&[rec.clone(), rec], ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].starts_with("uclock,t.trace,0.03,7,0,"));
    }

    #[test]
    fn json_keys_are_field_names() {
        let rec = MetricsRecord::new("djitp", "x", None, 0, 1, RunMetrics::default());
        let mut buf = Vec::new();
        emit(&[rec], ReportFormat::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v[0].as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        for k in CSV_HEADER {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert!(obj["rate"].is_null());
    }

    #[test]
    fn add_assign_merges() {
        let mut a = RunMetrics {
            deep_copies: 2,
            ..RunMetrics::default()
        };
        a += &RunMetrics {
            deep_copies: 3,
            race_count: 1,
            ..RunMetrics::default()
        };
        assert_eq!((a.deep_copies, a.race_count), (5, 1));
    }
}
