//! Activation traces: deterministic attack and benign generators plus the
//! line-oriented trace file format.
//!
//! ```text
//! # generator: decoy
//! # config: rows_per_bank=65536 t_rh=500 ...
//! A 1000
//! A 1000
//! W
//! ```
//!
//! `A <row>` is one activation (decimal row index), `W` closes the current
//! refresh window, and `#` starts a comment. Leading `# key: value` lines
//! carry trace metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

use crate::dram::{DramConfig, Row};
use crate::error::{Error, Result};
use crate::oracle::OracleState;

/// Desk-scale bound on the number of records in one trace.
pub const MAX_TRACE_LEN: usize = 1 << 26;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Record {
    Act(Row),
    /// Refresh-window boundary.
    Window,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TraceMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub config: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<Record>,
}

impl Trace {
    fn generated(name: &str, cfg: &DramConfig, records: Vec<Record>) -> Result<Self> {
        if records.len() > MAX_TRACE_LEN {
            return Err(Error::Validation(format!(
                "{name} trace of {} records exceeds the cap of {MAX_TRACE_LEN}",
                records.len()
            )));
        }
        Ok(Trace {
            meta: TraceMeta {
                generator: name.to_string(),
                seed: None,
                config: cfg.summary(),
            },
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of activation records.
    pub fn acts(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| matches!(r, Record::Act(_)))
            .count() as u64
    }

    /// Activated rows in order, ignoring window markers.
    pub fn act_rows(&self) -> impl Iterator<Item = Row> + '_ {
        self.records.iter().filter_map(|r| match r {
            Record::Act(row) => Some(*row),
            Record::Window => None,
        })
    }

    /// Checks every row against the bank and the length cap.
    pub fn validate(&self, cfg: &DramConfig) -> Result<()> {
        if self.records.len() > MAX_TRACE_LEN {
            return Err(Error::Validation(format!(
                "trace of {} records exceeds the cap of {MAX_TRACE_LEN}",
                self.records.len()
            )));
        }
        for (i, rec) in self.records.iter().enumerate() {
            if let Record::Act(row) = rec {
                if row.0 >= cfg.rows_per_bank() {
                    return Err(Error::Validation(format!(
                        "record {} activates row {row}, outside a bank of {} rows",
                        i + 1,
                        cfg.rows_per_bank()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn acts(rows: impl IntoIterator<Item = u32>) -> Vec<Record> {
    rows.into_iter().map(|r| Record::Act(Row(r))).collect()
}

/// The full `[v - n, v + n]` window must lie inside the bank.
fn interior_neighbors(row: Row, cfg: &DramConfig, what: &str) -> Result<Vec<u32>> {
    cfg.check_row(row)?;
    let n = cfg.blast_radius();
    if row.0 < n || row.0 + n >= cfg.rows_per_bank() {
        return Err(Error::Domain(format!(
            "{what} row {row} needs all {} neighbours inside the bank",
            2 * n
        )));
    }
    Ok(cfg.neighbor_iter(row).map(|r| r.0).collect())
}

fn checked_len(parts: &[u64]) -> Result<usize> {
    let total = parts
        .iter()
        .try_fold(0u64, |acc, &p| acc.checked_add(p))
        .filter(|&t| t <= MAX_TRACE_LEN as u64)
        .ok_or_else(|| Error::Validation(format!("trace would exceed {MAX_TRACE_LEN} records")))?;
    Ok(total as usize)
}

/// `count` activations of one row.
pub fn gen_single_sided(row: Row, count: u64, cfg: &DramConfig) -> Result<Trace> {
    cfg.check_row(row)?;
    if count == 0 {
        return Err(Error::Domain("single-sided count must be at least 1".into()));
    }
    let len = checked_len(&[count])?;
    Trace::generated("single-sided", cfg, vec![Record::Act(row); len])
}

/// `victim - 1, victim + 1` alternating, `count` activations each.
pub fn gen_double_sided(victim: Row, count: u64, cfg: &DramConfig) -> Result<Trace> {
    cfg.check_row(victim)?;
    if victim.0 == 0 || victim.0 + 1 >= cfg.rows_per_bank() {
        return Err(Error::Domain(format!(
            "double-sided victim {victim} sits on the bank edge"
        )));
    }
    checked_len(&[count, count])?;
    let pair = [victim.0 - 1, victim.0 + 1];
    Trace::generated(
        "double-sided",
        cfg,
        acts((0..count).flat_map(|_| pair)),
    )
}

/// `sides` aggressors `first, first + spacing, ...` hammered round-robin,
/// `count_per_row` activations each.
pub fn gen_many_sided(
    first: Row,
    sides: u32,
    spacing: u32,
    count_per_row: u64,
    cfg: &DramConfig,
) -> Result<Trace> {
    if sides == 0 || spacing == 0 {
        return Err(Error::Domain("many-sided needs at least one side and a positive spacing".into()));
    }
    let last = u64::from(first.0) + u64::from(sides - 1) * u64::from(spacing);
    if last >= u64::from(cfg.rows_per_bank()) {
        return Err(Error::Domain(format!(
            "many-sided pattern ends at row {last}, outside the bank"
        )));
    }
    checked_len(&[count_per_row * u64::from(sides)])?;
    let rows: Vec<u32> = (0..sides).map(|i| first.0 + i * spacing).collect();
    Trace::generated(
        "many-sided",
        cfg,
        acts((0..count_per_row).flat_map(|_| rows.iter().copied())),
    )
}

/// All `2n` neighbours of `victim`, round-robin ascending, `per_row_count` each.
pub fn gen_common_victim(victim: Row, per_row_count: u64, cfg: &DramConfig) -> Result<Trace> {
    let ring = interior_neighbors(victim, cfg, "common victim")?;
    checked_len(&[per_row_count * ring.len() as u64])?;
    Trace::generated(
        "common-victim",
        cfg,
        acts((0..per_row_count).flat_map(|_| ring.iter().copied())),
    )
}

/// `lead` activations of `row`, one activation of each neighbour
/// (ascending), then `tail` more activations of `row`.
pub fn gen_decoy(row: Row, lead: u64, tail: u64, cfg: &DramConfig) -> Result<Trace> {
    let ring = interior_neighbors(row, cfg, "decoy")?;
    let len = checked_len(&[lead, ring.len() as u64, tail])?;
    let mut records = Vec::with_capacity(len);
    records.extend(std::iter::repeat_n(Record::Act(row), lead as usize));
    records.extend(ring.into_iter().map(|r| Record::Act(Row(r))));
    records.extend(std::iter::repeat_n(Record::Act(row), tail as usize));
    Trace::generated("decoy", cfg, records)
}

/// Cross-window attack on `victim` for a tracker with threshold `threshold`:
/// `threshold - 1` victim increments at the end of one window and another
/// `threshold - 1` at the start of the next.
///
/// The increments come from the victim's neighbours in round-robin order.
/// The first window opens by activating a filler row (row 0 or the last row,
/// whichever is farther from the victim) until the victim's staggered refresh
/// slot, so the victim is restored just before the first half and not again
/// until after the second. The filler stays out of the victim's blast radius
/// and touches only a handful of tracker entries. Under epoch-boundary
/// refresh the same trace is harmless by construction.
pub fn gen_straddle(victim: Row, threshold: u64, cfg: &DramConfig) -> Result<Trace> {
    if threshold == 0 {
        return Err(Error::Domain("straddle threshold must be positive".into()));
    }
    let ring = interior_neighbors(victim, cfg, "straddle victim")?;
    let half: Vec<u32> = ring.iter().copied().cycle().take((threshold - 1) as usize).collect();
    straddle_around(victim, half, "straddle", cfg)
}

/// Cross-window common-victim attack: each half activates every neighbour
/// of `victim` `per_row_count` times, round-robin.
pub fn gen_straddle_common_victim(victim: Row, per_row_count: u64, cfg: &DramConfig) -> Result<Trace> {
    let ring = interior_neighbors(victim, cfg, "straddle victim")?;
    checked_len(&[per_row_count * ring.len() as u64])?;
    let half: Vec<u32> = (0..per_row_count).flat_map(|_| ring.iter().copied()).collect();
    straddle_around(victim, half, "straddle-common-victim", cfg)
}

fn straddle_around(victim: Row, half: Vec<u32>, name: &str, cfg: &DramConfig) -> Result<Trace> {
    let half_len = half.len() as u64;
    if half_len > cfg.window_acts() {
        return Err(Error::Domain(format!(
            "straddle half of {half_len} activations exceeds window_acts {}",
            cfg.window_acts()
        )));
    }
    let lead = OracleState::refresh_slot(cfg, victim);
    if lead + half_len > cfg.window_acts() {
        return Err(Error::Domain(format!(
            "victim {victim} refreshes at window position {lead}, too late to fit a \
             {half_len}-activation half before the boundary"
        )));
    }
    let last = cfg.rows_per_bank() - 1;
    let filler = if victim.0 >= last - victim.0 { 0 } else { last };
    if lead > 0 && filler.abs_diff(victim.0) <= cfg.blast_radius() {
        return Err(Error::Domain(format!(
            "bank too small for a filler row outside the blast radius of {victim}"
        )));
    }
    let len = checked_len(&[lead, half_len, 1, half_len])?;
    let mut records = Vec::with_capacity(len);
    records.extend(std::iter::repeat_n(Record::Act(Row(filler)), lead as usize));
    records.extend(half.iter().map(|&r| Record::Act(Row(r))));
    records.push(Record::Window);
    records.extend(half.iter().map(|&r| Record::Act(Row(r))));
    Trace::generated(name, cfg, records)
}

/// Two aggressors `first` and `first + n + 1` hammered back to back,
/// `per_aggressor` times each. They share `n` victims, which a blanket VRR
/// refreshes twice within a few activations.
pub fn gen_shared_victims(first: Row, per_aggressor: u64, cfg: &DramConfig) -> Result<Trace> {
    let n = cfg.blast_radius();
    let second = Row(first.0.saturating_add(n + 1));
    interior_neighbors(first, cfg, "shared-victims aggressor")?;
    interior_neighbors(second, cfg, "shared-victims aggressor")?;
    let len = checked_len(&[per_aggressor, per_aggressor])?;
    let mut records = Vec::with_capacity(len);
    records.extend(std::iter::repeat_n(Record::Act(first), per_aggressor as usize));
    records.extend(std::iter::repeat_n(Record::Act(second), per_aggressor as usize));
    Trace::generated("shared-victims", cfg, records)
}

/// `count - 1` activations of `row`, one access to each of its neighbours,
/// then the `count`-th activation of `row`. An aggressor tracker with
/// threshold `count` refreshes rows that were accessed moments earlier.
pub fn gen_recently_accessed(row: Row, count: u64, cfg: &DramConfig) -> Result<Trace> {
    if count == 0 {
        return Err(Error::Domain("recently-accessed count must be at least 1".into()));
    }
    let mut t = gen_decoy(row, count - 1, 1, cfg)?;
    t.meta.generator = "recently-accessed".into();
    Ok(t)
}

/// The attack suite every secure configuration must survive without a flip.
///
/// Patterns target the middle of the bank; counts are scaled from `t_rh` so
/// each pattern would flip a row on an unprotected device. Names are unique.
pub fn adversarial_suite(cfg: &DramConfig) -> Result<Vec<(String, Trace)>> {
    let t_rh = cfg.t_rh();
    let n = u64::from(cfg.blast_radius());
    let mid = Row(cfg.rows_per_bank() / 2);
    let t_agg = crate::dram::threshold_aggressor(t_rh, cfg.blast_radius())?;
    let t_rvc = crate::dram::threshold_rvc(t_rh)?;
    let spread = t_rh.div_ceil(2 * n);

    let mut suite = vec![
        ("single-sided".to_string(), gen_single_sided(mid, 2 * t_rh, cfg)?),
        (
            "single-sided-long".to_string(),
            gen_single_sided(mid, cfg.window_acts() + t_rh, cfg)?,
        ),
        ("double-sided".to_string(), gen_double_sided(mid, t_rh, cfg)?),
        (
            "many-sided".to_string(),
            gen_many_sided(Row(mid.0 - 8), 8, 2, t_rh.div_ceil(2), cfg)?,
        ),
        ("common-victim".to_string(), gen_common_victim(mid, spread, cfg)?),
        (
            "decoy".to_string(),
            gen_decoy(mid, t_rh.saturating_sub(5), 5, cfg)?,
        ),
        ("straddle".to_string(), gen_straddle(mid, t_rvc, cfg)?),
        (
            "straddle-common-victim".to_string(),
            gen_straddle_common_victim(mid, t_agg - 1, cfg)?,
        ),
    ];
    for (name, trace) in &mut suite {
        trace.meta.generator = name.clone();
    }
    Ok(suite)
}

/// Zipf-distributed activations over a contiguous block of `working_set`
/// rows, with popularity ranks assigned by a seeded shuffle.
pub fn gen_benign_zipf(
    seed: u64,
    length: u64,
    skew: f64,
    working_set: u32,
    cfg: &DramConfig,
) -> Result<Trace> {
    if !(skew > 0.0 && skew.is_finite()) {
        return Err(Error::Domain(format!("zipf skew must be positive, got {skew}")));
    }
    if working_set == 0 || working_set > cfg.rows_per_bank() {
        return Err(Error::Domain(format!(
            "working set {working_set} must be in 1..={}",
            cfg.rows_per_bank()
        )));
    }
    let len = checked_len(&[length])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(0..=cfg.rows_per_bank() - working_set);
    let mut ranks: Vec<u32> = (base..base + working_set).collect();
    ranks.shuffle(&mut rng);
    let zipf = Zipf::new(f64::from(working_set), skew)
        .map_err(|e| Error::Domain(format!("zipf parameters rejected: {e}")))?;
    let records = (0..len)
        .map(|_| {
            let k = rng.sample(zipf) as usize;
            Record::Act(Row(ranks[k.clamp(1, ranks.len()) - 1]))
        })
        .collect();
    let mut trace = Trace::generated("zipf", cfg, records)?;
    trace.meta.seed = Some(seed);
    Ok(trace)
}

/// Benign locality presets named after high/medium/low memory intensity mixes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ZipfPreset {
    pub label: &'static str,
    pub skew: f64,
    pub working_set: u32,
}

pub const ZIPF_PRESETS: [ZipfPreset; 3] = [
    ZipfPreset {
        label: "H",
        skew: 1.2,
        working_set: 64,
    },
    ZipfPreset {
        label: "M",
        skew: 1.0,
        working_set: 512,
    },
    ZipfPreset {
        label: "L",
        skew: 0.8,
        working_set: 4096,
    },
];

impl ZipfPreset {
    pub fn by_label(label: &str) -> Option<ZipfPreset> {
        ZIPF_PRESETS.iter().copied().find(|p| p.label.eq_ignore_ascii_case(label))
    }

    pub fn generate(&self, seed: u64, length: u64, cfg: &DramConfig) -> Result<Trace> {
        let ws = self.working_set.min(cfg.rows_per_bank());
        let mut t = gen_benign_zipf(seed, length, self.skew, ws, cfg)?;
        t.meta.generator = format!("zipf-{}", self.label);
        Ok(t)
    }
}

/// Renders a trace in the file format. `tool` goes into a comment line.
pub fn render_trace(trace: &Trace, tool: &str) -> String {
    let mut out = String::with_capacity(trace.records.len() * 8 + 128);
    let _ = writeln!(out, "# generator: {}", trace.meta.generator);
    if let Some(seed) = trace.meta.seed {
        let _ = writeln!(out, "# seed: {seed}");
    }
    if !trace.meta.config.is_empty() {
        let _ = writeln!(out, "# config: {}", trace.meta.config);
    }
    if !tool.is_empty() {
        let _ = writeln!(out, "# tool: {tool}");
    }
    for rec in &trace.records {
        match rec {
            Record::Act(row) => {
                let _ = writeln!(out, "A {row}");
            }
            Record::Window => out.push_str("W\n"),
        }
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut trace = Trace::default();
    let mut in_header = true;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if in_header {
                if let Some((key, value)) = comment.trim().split_once(": ") {
                    match key {
                        "generator" => trace.meta.generator = value.to_string(),
                        "config" => trace.meta.config = value.to_string(),
                        "seed" => {
                            trace.meta.seed = Some(value.parse().map_err(|_| Error::Parse {
                                line: line_no,
                                message: format!("bad seed '{value}'"),
                            })?)
                        }
                        _ => {}
                    }
                }
            }
            continue;
        }
        in_header = false;
        if trace.records.len() >= MAX_TRACE_LEN {
            return Err(Error::Validation(format!(
                "trace exceeds the cap of {MAX_TRACE_LEN} records at line {line_no}"
            )));
        }
        let mut tokens = line.split_ascii_whitespace();
        let rec = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some("W"), None, None) => Record::Window,
            (Some("A"), Some(row), None) => {
                Record::Act(Row(row.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad row index '{row}'"),
                })?))
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 'A <row>' or 'W', found '{line}'"),
                })
            }
        };
        trace.records.push(rec);
    }
    Ok(trace)
}

pub fn write_trace(trace: &Trace, path: &Path, tool: &str) -> Result<()> {
    fs::write(path, render_trace(trace, tool)).map_err(|e| Error::io(path, e))
}

/// Reads and validates a trace file against `cfg`.
pub fn read_trace(path: &Path, cfg: &DramConfig) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let trace = parse_trace(&text)?;
    trace.validate(cfg)?;
    Ok(trace)
}
