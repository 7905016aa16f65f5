use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::experiment::{Primitive, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub per_primitive: BTreeMap<String, Summary>,
}

pub const CSV_HEADER: [&str; 14] = [
    "id",
    "primitive",
    "size",
    "config",
    "knobs",
    "gpu_ns",
    "pim_ns",
    "speedup",
    "act_stall_share",
    "commands",
    "activations",
    "gpu_bw_gbs",
    "pim_bw_gbs",
    "warnings",
];

fn order(p: Primitive) -> usize {
    Primitive::ALL.iter().position(|&q| q == p).unwrap_or(usize::MAX)
}

/// Rows sorted by primitive, then experiment id.
pub fn report(rows: &[ResultRow]) -> Report {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| order(a.primitive).cmp(&order(b.primitive)).then_with(|| a.id.cmp(&b.id)));
    let mut per_primitive = BTreeMap::new();
    for p in Primitive::ALL {
        let s: Vec<f64> = rows.iter().filter(|r| r.primitive == p).map(|r| r.speedup).collect();
        if s.is_empty() {
            continue;
        }
        per_primitive.insert(
            p.name().to_string(),
            Summary {
                count: s.len(),
                min: s.iter().cloned().fold(f64::INFINITY, f64::min),
                avg: s.iter().sum::<f64>() / s.len() as f64,
                max: s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
        );
    }
    Report { rows, per_primitive }
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                r.primitive.name().to_string(),
                r.size.to_string(),
                r.config.clone(),
                r.knobs.clone(),
                format!("{:.3}", r.gpu_ns),
                format!("{:.3}", r.pim_ns),
                format!("{:.4}", r.speedup),
                format!("{:.4}", r.act_stall_share),
                r.commands.to_string(),
                r.activations.to_string(),
                format!("{:.2}", r.gpu_bw_gbs),
                format!("{:.2}", r.pim_bw_gbs),
                r.warnings.join("; "),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.per_primitive).expect("summary serializes")
    }

    /// Parses rows back from [`Report::to_csv`] output.
    pub fn rows_from_csv(text: &str) -> crate::Result<Vec<ResultRow>> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let bad = |m: String| crate::Error::TraceParse { line: i + 2, msg: m };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != CSV_HEADER.len() {
                return Err(bad(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
            }
            let f = |j: usize| -> crate::Result<f64> { rec[j].parse().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[j]))) };
            let u = |j: usize| -> crate::Result<u64> { rec[j].parse().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[j]))) };
            rows.push(ResultRow {
                id: rec[0].to_string(),
                primitive: Primitive::parse(&rec[1])?,
                size: u(2)?,
                config: rec[3].to_string(),
                knobs: rec[4].to_string(),
                gpu_ns: f(5)?,
                pim_ns: f(6)?,
                speedup: f(7)?,
                act_stall_share: f(8)?,
                commands: u(9)?,
                activations: u(10)?,
                gpu_bw_gbs: f(11)?,
                pim_bw_gbs: f(12)?,
                warnings: if rec[13].is_empty() {
                    Vec::new()
                } else {
                    rec[13].split("; ").map(str::to_string).collect()
                },
            });
        }
        Ok(rows)
    }
}

/// `(x, y, series)` triples: x is the knob setting (or id), y the speedup,
/// series the primitive and configuration.
pub fn plot_data(rows: &[ResultRow]) -> Vec<(String, f64, String)> {
    rows.iter()
        .map(|r| {
            let x = if r.knobs.is_empty() { r.id.clone() } else { r.knobs.clone() };
            (x, r.speedup, format!("{}:{}", r.primitive.name(), r.config))
        })
        .collect()
}

pub fn plot_data_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "series"]).expect("in-memory write");
    for (x, y, s) in plot_data(rows) {
        w.write_record([x, format!("{y:.4}"), s]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, p: Primitive, s: f64) -> ResultRow {
        ResultRow {
            id: id.into(),
            primitive: p,
            size: 1,
            config: "baseline".into(),
            knobs: String::new(),
            gpu_ns: s,
            pim_ns: 1.0,
            speedup: s,
            act_stall_share: 0.0,
            commands: 0,
            activations: 0,
            gpu_bw_gbs: 0.0,
            pim_bw_gbs: 0.0,
            warnings: vec!["a, b".into()],
        }
    }

    #[test]
    fn single_row_csv() {
        let r = report(&[row("x", Primitive::Push, 1.5)]);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("id,primitive,"));
        assert_eq!(Report::rows_from_csv(&csv).unwrap()[0].speedup, 1.5);
    }

    #[test]
    fn ties_order_by_id() {
        let rows = [row("b", Primitive::SsGemm, 1.0), row("a", Primitive::SsGemm, 1.0), row("c", Primitive::VectorSum, 1.0)];
        let r = report(&rows);
        let ids: Vec<&str> = r.rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        let again = report(&[rows[2].clone(), rows[0].clone(), rows[1].clone()]);
        assert_eq!(again.to_csv(), r.to_csv());
    }

    #[test]
    fn summary_stats() {
        let r = report(&[row("a", Primitive::Push, 1.0), row("b", Primitive::Push, 3.0)]);
        let s = r.per_primitive["push"];
        assert_eq!((s.count, s.min, s.avg, s.max), (2, 1.0, 2.0, 3.0));
        let v: serde_json::Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(v["push"]["max"], 3.0);
    }
}
