//! Lockstep execution of a tracker and the disturbance oracle over a trace,
//! plus the aggressor-vs-victim comparisons built on top of it.

use std::fmt;

use log::warn;
use rayon::prelude::*;

use crate::dram::{self, DramConfig, PhaseModel, Row};
use crate::energy::{Energy, EnergyModel};
use crate::error::{Error, Result};
use crate::oracle::{Flip, OracleState};
use crate::tracker::{self, MitigationAction, Mode, RetriggerPolicy, Tracker, TrackerOptions};
use crate::workloads::{self, Record, Trace, ZIPF_PRESETS};

/// One emitted mitigation and the rows the oracle was told to restore.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionRecord {
    pub act_seq: u64,
    pub action: MitigationAction,
    pub refreshed: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunReport {
    pub mode: Mode,
    pub threshold: u64,
    pub acts: u64,
    pub mitigations_issued: u64,
    pub rows_refreshed: u64,
    pub flips: Vec<Flip>,
    pub vrr_energy: Energy,
    pub total_energy: Energy,
    pub actions: Vec<ActionRecord>,
}

impl RunReport {
    /// No row reached `t_rh` during the run.
    pub fn is_secure(&self) -> bool {
        self.flips.is_empty()
    }
}

/// Steps `tracker` and a fresh oracle through `trace`.
///
/// Window markers roll both; a window that fills up to `window_acts`
/// activations is rolled before the next activation. A mitigation is applied
/// to the oracle after the activation that triggered it.
pub fn run_with(
    cfg: &DramConfig,
    tracker: &mut dyn Tracker,
    trace: &Trace,
    energy: &EnergyModel,
) -> Result<RunReport> {
    trace.validate(cfg)?;
    let mut oracle = OracleState::new(cfg);
    let mut actions = Vec::new();
    let mut seq = 0u64;
    for rec in &trace.records {
        match *rec {
            Record::Window => {
                tracker.on_window_boundary();
                oracle.window();
            }
            Record::Act(row) => {
                if tracker.acts_in_window() >= cfg.window_acts() {
                    tracker.on_window_boundary();
                    oracle.window();
                }
                seq += 1;
                let action = tracker.on_activation(row)?;
                oracle.act(row, seq)?;
                if let Some(action) = action {
                    let refreshed = tracker::refresh_set(&action, cfg)?;
                    oracle.refresh(&refreshed)?;
                    actions.push(ActionRecord {
                        act_seq: seq,
                        action,
                        refreshed,
                    });
                }
            }
        }
    }
    let stats = tracker.stats();
    Ok(RunReport {
        mode: tracker.mode(),
        threshold: tracker.threshold(),
        acts: seq,
        mitigations_issued: stats.mitigations_issued,
        rows_refreshed: stats.rows_refreshed,
        flips: oracle.into_flips(),
        vrr_energy: energy.vrr_energy(stats.mitigations_issued, stats.rows_refreshed),
        total_energy: energy.total_energy(seq, stats.mitigations_issued, stats.rows_refreshed),
        actions,
    })
}

pub fn run(
    cfg: &DramConfig,
    mode: Mode,
    trace: &Trace,
    energy: &EnergyModel,
    opts: TrackerOptions,
) -> Result<RunReport> {
    let mut tracker = tracker::new_tracker(mode, cfg, opts)?;
    run_with(cfg, tracker.as_mut(), trace, energy)
}

/// Oracle only, no mitigation at all.
pub fn run_unmitigated(cfg: &DramConfig, trace: &Trace) -> Result<Vec<Flip>> {
    trace.validate(cfg)?;
    let mut oracle = OracleState::new(cfg);
    let mut seq = 0;
    for rec in &trace.records {
        match *rec {
            Record::Window => oracle.window(),
            Record::Act(row) => {
                seq += 1;
                oracle.act(row, seq)?;
            }
        }
    }
    Ok(oracle.into_flips())
}

/// Relative reduction of a metric, `100 * (base - rvc) / base`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Improvement {
    Percent(f64),
    /// The baseline was zero but the victim tracker was not.
    UnboundedRegression,
}

impl Improvement {
    fn from_ratio(base_num: u128, base_den: u128, rvc_num: u128, rvc_den: u128) -> Self {
        match (base_num, rvc_num) {
            (0, 0) => Improvement::Percent(0.0),
            (0, _) => Improvement::UnboundedRegression,
            _ => {
                // rvc / base, exact until the final division
                let ratio = (rvc_num as f64 * base_den as f64) / (rvc_den as f64 * base_num as f64);
                Improvement::Percent(100.0 * (1.0 - ratio))
            }
        }
    }

    pub fn of_counts(base: u64, rvc: u64) -> Self {
        Self::from_ratio(u128::from(base), 1, u128::from(rvc), 1)
    }

    pub fn of_energy(base: Energy, rvc: Energy) -> Self {
        let (b, r) = (base.ratio(), rvc.ratio());
        Self::from_ratio(*b.numer(), *b.denom(), *r.numer(), *r.denom())
    }

    pub fn percent(&self) -> Option<f64> {
        match self {
            Improvement::Percent(p) => Some(*p),
            Improvement::UnboundedRegression => None,
        }
    }

    /// Mean of finite values; any unbounded entry makes the mean unbounded.
    pub fn mean(values: impl IntoIterator<Item = Improvement>) -> Improvement {
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in values {
            match v {
                Improvement::Percent(p) => {
                    sum += p;
                    count += 1;
                }
                Improvement::UnboundedRegression => return Improvement::UnboundedRegression,
            }
        }
        if count == 0 {
            Improvement::Percent(0.0)
        } else {
            Improvement::Percent(sum / count as f64)
        }
    }
}

impl fmt::Display for Improvement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Improvement::Percent(p) => write!(f, "{p:.4}"),
            Improvement::UnboundedRegression => f.write_str("unbounded_regression"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Improvements {
    pub mitigations: Improvement,
    pub refreshes: Improvement,
    pub vrr_energy: Improvement,
    pub total_energy: Improvement,
}

impl Improvements {
    pub fn between(base: &RunReport, rvc: &RunReport) -> Self {
        Improvements {
            mitigations: Improvement::of_counts(base.mitigations_issued, rvc.mitigations_issued),
            refreshes: Improvement::of_counts(base.rows_refreshed, rvc.rows_refreshed),
            vrr_energy: Improvement::of_energy(base.vrr_energy, rvc.vrr_energy),
            total_energy: Improvement::of_energy(base.total_energy, rvc.total_energy),
        }
    }

    fn mean<'a>(items: impl Iterator<Item = &'a Improvements> + Clone) -> Self {
        Improvements {
            mitigations: Improvement::mean(items.clone().map(|i| i.mitigations)),
            refreshes: Improvement::mean(items.clone().map(|i| i.refreshes)),
            vrr_energy: Improvement::mean(items.clone().map(|i| i.vrr_energy)),
            total_energy: Improvement::mean(items.map(|i| i.total_energy)),
        }
    }
}

/// Per-mode threshold overrides for comparisons.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct CompareOptions {
    pub retrigger: RetriggerPolicy,
    pub aggressor_threshold: Option<u64>,
    pub rvc_threshold: Option<u64>,
}

impl CompareOptions {
    pub fn tracker_options(&self, mode: Mode) -> TrackerOptions {
        TrackerOptions {
            retrigger: self.retrigger,
            threshold_override: match mode {
                Mode::Aggressor => self.aggressor_threshold,
                Mode::Rvc => self.rvc_threshold,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceComparison {
    pub trace: String,
    pub baseline: RunReport,
    pub rvc: RunReport,
    pub improvement: Improvements,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub cfg: DramConfig,
    pub traces: Vec<TraceComparison>,
    pub mean: Improvements,
}

/// Runs both trackers on every trace.
pub fn compare(
    cfg: &DramConfig,
    traces: &[(String, Trace)],
    energy: &EnergyModel,
    opts: CompareOptions,
) -> Result<ComparisonReport> {
    if traces.is_empty() {
        return Err(Error::Domain("compare needs at least one trace".into()));
    }
    let traces = traces
        .iter()
        .map(|(name, trace)| {
            let baseline = run(cfg, Mode::Aggressor, trace, energy, opts.tracker_options(Mode::Aggressor))?;
            let rvc = run(cfg, Mode::Rvc, trace, energy, opts.tracker_options(Mode::Rvc))?;
            Ok(TraceComparison {
                trace: name.clone(),
                improvement: Improvements::between(&baseline, &rvc),
                baseline,
                rvc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = Improvements::mean(traces.iter().map(|t| &t.improvement));
    Ok(ComparisonReport {
        cfg: cfg.clone(),
        traces,
        mean,
    })
}

/// A trace family that can be instantiated for any configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceFamily {
    /// Every pattern of [`workloads::adversarial_suite`].
    Adversarial,
    /// Common-victim attacks at several per-aggressor intensities.
    CommonVictim,
    /// Decoy patterns with varying lead and tail.
    Decoy,
    /// Shared-victim and recently-accessed scenarios plus the canonical decoy.
    Golden,
    /// The H/M/L Zipf presets.
    Zipf { seed: u64, length: u64 },
}

impl TraceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            TraceFamily::Adversarial => "adversarial",
            TraceFamily::CommonVictim => "common-victim",
            TraceFamily::Decoy => "decoy",
            TraceFamily::Golden => "golden",
            TraceFamily::Zipf { .. } => "zipf",
        }
    }

    pub fn instantiate(&self, cfg: &DramConfig) -> Result<Vec<(String, Trace)>> {
        let t_rh = cfg.t_rh();
        let n = u64::from(cfg.blast_radius());
        let mid = Row(cfg.rows_per_bank() / 2);
        let t_agg = dram::threshold_aggressor(t_rh, cfg.blast_radius())?;
        let t_rvc = dram::threshold_rvc(t_rh)?;
        match self {
            TraceFamily::Adversarial => workloads::adversarial_suite(cfg),
            TraceFamily::CommonVictim => {
                let mut counts = vec![t_agg - 1, t_agg, t_rh.div_ceil(2 * n), 2 * t_rh.div_ceil(2 * n)];
                counts.dedup();
                counts
                    .into_iter()
                    .filter(|&c| c > 0)
                    .map(|c| Ok((format!("common-victim-{c}"), workloads::gen_common_victim(mid, c, cfg)?)))
                    .collect()
            }
            TraceFamily::Decoy => {
                let leads = [t_agg, t_rvc - 5.min(t_rvc - 1), t_rh - 5, 2 * t_rh];
                leads
                    .into_iter()
                    .flat_map(|lead| [0u64, 5, t_agg].map(move |tail| (lead, tail)))
                    .map(|(lead, tail)| {
                        Ok((
                            format!("decoy-{lead}-{tail}"),
                            workloads::gen_decoy(mid, lead, tail, cfg)?,
                        ))
                    })
                    .collect()
            }
            TraceFamily::Golden => Ok(vec![
                (
                    "shared-victims".to_string(),
                    workloads::gen_shared_victims(mid, t_agg, cfg)?,
                ),
                (
                    "recently-accessed".to_string(),
                    workloads::gen_recently_accessed(mid, t_agg, cfg)?,
                ),
                (
                    "decoy".to_string(),
                    workloads::gen_decoy(mid, t_rh - 5, 5, cfg)?,
                ),
            ]),
            TraceFamily::Zipf { seed, length } => ZIPF_PRESETS
                .iter()
                .map(|p| Ok((format!("zipf-{}", p.label), p.generate(*seed, *length, cfg)?)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub t_rh: Vec<u64>,
    pub blast_radius: Vec<u32>,
    pub rows_per_bank: u32,
    pub window_acts: u64,
    pub phase_model: PhaseModel,
    pub families: Vec<TraceFamily>,
    pub options: CompareOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub t_rh: u64,
    pub blast_radius: u32,
    pub report: ComparisonReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// `(t_rh, n, reason)` for every combination that could not run.
    pub skipped: Vec<(u64, u32, String)>,
}

/// Cross product of `t_rh` and blast radius; cells run in parallel and are
/// reported in `(t_rh, n)` order of the inputs.
pub fn sweep(spec: &SweepSpec, energy: &EnergyModel) -> SweepReport {
    let combos: Vec<(u64, u32)> = spec
        .t_rh
        .iter()
        .flat_map(|&t| spec.blast_radius.iter().map(move |&n| (t, n)))
        .collect();
    let results: Vec<(u64, u32, Result<ComparisonReport>)> = combos
        .par_iter()
        .map(|&(t_rh, n)| {
            let outcome = DramConfig::new(spec.rows_per_bank, t_rh, n, spec.window_acts, spec.phase_model)
                .and_then(|cfg| {
                    let mut traces = Vec::new();
                    for family in &spec.families {
                        for (name, trace) in family.instantiate(&cfg)? {
                            traces.push((format!("{}/{name}", family.name()), trace));
                        }
                    }
                    compare(&cfg, &traces, energy, spec.options)
                });
            (t_rh, n, outcome)
        })
        .collect();
    let mut report = SweepReport {
        cells: Vec::new(),
        skipped: Vec::new(),
    };
    for (t_rh, n, outcome) in results {
        match outcome {
            Ok(r) => report.cells.push(SweepCell {
                t_rh,
                blast_radius: n,
                report: r,
            }),
            Err(e) => {
                warn!("sweep: skipping t_rh={t_rh} n={n}: {e}");
                report.skipped.push((t_rh, n, e.to_string()));
            }
        }
    }
    report
}

/// Outcome of the search for a flip under a threshold that ignores the
/// common-victim effect.
#[derive(Clone, Debug, PartialEq)]
pub struct InsecureWitness {
    pub threshold: u64,
    pub per_row_count: u64,
    pub trace: Trace,
    pub report: RunReport,
}

/// Runs the aggressor tracker with `T` taken from `2(T - 1) < t_rh` (no
/// division by `2n`) against common-victim attacks of increasing intensity
/// and returns the first one that flips a row.
pub fn insecure_threshold_witness(
    cfg: &DramConfig,
    energy: &EnergyModel,
    retrigger: RetriggerPolicy,
) -> Result<Option<InsecureWitness>> {
    let threshold = dram::threshold_rvc(cfg.t_rh())?;
    let victim = Row(cfg.rows_per_bank() / 2);
    let opts = TrackerOptions {
        retrigger,
        threshold_override: Some(threshold),
    };
    let n = u64::from(cfg.blast_radius());
    let max_per_row = (threshold - 1).min(cfg.window_acts() / (2 * n));
    for per_row in 1..=max_per_row {
        let trace = workloads::gen_common_victim(victim, per_row, cfg)?;
        let report = run(cfg, Mode::Aggressor, &trace, energy, opts)?;
        if !report.is_secure() {
            return Ok(Some(InsecureWitness {
                threshold,
                per_row_count: per_row,
                trace,
                report,
            }));
        }
    }
    Ok(None)
}
