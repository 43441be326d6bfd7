//! CSV renderings of run, comparison, sweep, action-log and flip reports.
//!
//! Every document starts with `# `-prefixed preamble lines supplied by the
//! caller (resolved configuration, tool version), followed by a CSV header.

use crate::dram::DramConfig;
use crate::harness::{ComparisonReport, Improvements, RunReport, SweepReport};
use crate::oracle::Flip;

pub const RUN_HEADER: [&str; 10] = [
    "trh",
    "n",
    "mode",
    "trace",
    "acts",
    "mitigations",
    "refreshes",
    "flips",
    "vrr_energy",
    "total_energy",
];

pub const PCT_HEADER: [&str; 4] = [
    "pct_mitigations",
    "pct_refreshes",
    "pct_vrr_energy",
    "pct_total_energy",
];

/// Name used in the `trace` column of the mean row of a comparison.
pub const MEAN_ROW: &str = "mean";

struct Doc {
    out: Vec<u8>,
}

impl Doc {
    fn new(preamble: &[String]) -> Self {
        let mut doc = Doc { out: Vec::new() };
        for line in preamble {
            for part in line.lines() {
                doc.comment(part);
            }
        }
        doc
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // writing into a Vec cannot fail
        w.write_record(fields).expect("in-memory csv write");
        self.out.extend(w.into_inner().expect("in-memory csv flush"));
    }

    fn comment(&mut self, line: &str) {
        self.out.extend_from_slice(b"# ");
        self.out.extend_from_slice(line.as_bytes());
        self.out.push(b'\n');
    }

    fn finish(self) -> String {
        String::from_utf8(self.out).expect("csv output is utf-8")
    }
}

fn run_fields(cfg: &DramConfig, trace: &str, r: &RunReport) -> Vec<String> {
    vec![
        cfg.t_rh().to_string(),
        cfg.blast_radius().to_string(),
        r.mode.to_string(),
        trace.to_string(),
        r.acts.to_string(),
        r.mitigations_issued.to_string(),
        r.rows_refreshed.to_string(),
        r.flips.len().to_string(),
        r.vrr_energy.to_string(),
        r.total_energy.to_string(),
    ]
}

fn pct_fields(i: &Improvements) -> [String; 4] {
    [
        i.mitigations.to_string(),
        i.refreshes.to_string(),
        i.vrr_energy.to_string(),
        i.total_energy.to_string(),
    ]
}

/// One CSV row per `(trace name, report)` pair.
pub fn runs_csv(preamble: &[String], cfg: &DramConfig, runs: &[(String, RunReport)]) -> String {
    let mut doc = Doc::new(preamble);
    doc.row(RUN_HEADER);
    for (name, r) in runs {
        doc.row(run_fields(cfg, name, r));
    }
    doc.finish()
}

fn push_comparison(doc: &mut Doc, c: &ComparisonReport) {
    let blank = || std::iter::repeat_n(String::new(), PCT_HEADER.len());
    for t in &c.traces {
        doc.row(run_fields(&c.cfg, &t.trace, &t.baseline).into_iter().chain(blank()));
        doc.row(run_fields(&c.cfg, &t.trace, &t.rvc).into_iter().chain(pct_fields(&t.improvement)));
    }
    let mut mean: Vec<String> = vec![
        c.cfg.t_rh().to_string(),
        c.cfg.blast_radius().to_string(),
        String::new(),
        MEAN_ROW.to_string(),
    ];
    mean.extend(std::iter::repeat_n(String::new(), RUN_HEADER.len() - mean.len()));
    mean.extend(pct_fields(&c.mean));
    doc.row(mean);
}

/// Baseline and RVC rows for every trace, percentages on the RVC rows, and a
/// final mean row.
pub fn comparison_csv(preamble: &[String], c: &ComparisonReport) -> String {
    let mut doc = Doc::new(preamble);
    doc.row(RUN_HEADER.iter().chain(PCT_HEADER.iter()));
    push_comparison(&mut doc, c);
    doc.finish()
}

/// All sweep cells in order, in the comparison schema. Skipped cells are
/// listed as trailing comment lines.
pub fn sweep_csv(preamble: &[String], s: &SweepReport) -> String {
    let mut doc = Doc::new(preamble);
    doc.row(RUN_HEADER.iter().chain(PCT_HEADER.iter()));
    for cell in &s.cells {
        push_comparison(&mut doc, &cell.report);
    }
    for (t_rh, n, reason) in &s.skipped {
        doc.comment(&format!("skipped trh={t_rh} n={n}: {reason}"));
    }
    doc.finish()
}

/// `act_seq,mode,anchor_row,mask_bits,refreshed_rows`, rows joined by `;`.
/// Each run's lines follow a `# trace: <name>` comment.
pub fn action_log_csv(preamble: &[String], runs: &[(String, RunReport)]) -> String {
    let mut doc = Doc::new(preamble);
    doc.row(["act_seq", "mode", "anchor_row", "mask_bits", "refreshed_rows"]);
    for (name, r) in runs {
        doc.comment(&format!("trace: {name}"));
        for a in &r.actions {
            let rows: Vec<String> = a.refreshed.iter().map(|r| r.to_string()).collect();
            doc.row([
                a.act_seq.to_string(),
                r.mode.to_string(),
                a.action.anchor_row.to_string(),
                a.action.victim_mask.to_string(),
                rows.join(";"),
            ]);
        }
    }
    doc.finish()
}

/// `act_seq,row,disturbance_at_flip`, grouped like [`action_log_csv`].
pub fn flips_csv(preamble: &[String], runs: &[(String, &[Flip])]) -> String {
    let mut doc = Doc::new(preamble);
    doc.row(["act_seq", "row", "disturbance_at_flip"]);
    for (name, flips) in runs {
        doc.comment(&format!("trace: {name}"));
        for f in *flips {
            doc.row([f.act_seq.to_string(), f.row.to_string(), f.disturbance.to_string()]);
        }
    }
    doc.finish()
}
