//! The two detection mechanisms.
//!
//! [`AggressorTracker`] counts activations per row and refreshes every
//! neighbour of a row that reaches its threshold (blanket VRR).
//! [`VictimTracker`] counts, per row, the activations its neighbours have
//! received since the row itself was last accessed or refreshed, and
//! refreshes only the rows that reach the threshold (selective VRR).

use std::fmt;
use std::str::FromStr;

use crate::count_table::CountTable;
use crate::dram::{self, DramConfig, Row};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Per-aggressor activation counting with blanket VRR.
    Aggressor,
    /// Per-victim vulnerability counting with selective VRR.
    Rvc,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Aggressor, Mode::Rvc];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Aggressor => "aggressor",
            Mode::Rvc => "rvc",
        }
    }

    /// Threshold derived from the device parameters for this mode.
    pub fn derived_threshold(self, cfg: &DramConfig) -> Result<u64> {
        match self {
            Mode::Aggressor => dram::threshold_aggressor(cfg.t_rh(), cfg.blast_radius()),
            Mode::Rvc => dram::threshold_rvc(cfg.t_rh()),
        }
    }

    /// Count-table observations per full window.
    pub fn observations_per_window(self, cfg: &DramConfig) -> u64 {
        match self {
            Mode::Aggressor => cfg.window_acts(),
            Mode::Rvc => 2 * u64::from(cfg.blast_radius()) * cfg.window_acts(),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggressor" | "graphene" => Ok(Mode::Aggressor),
            "rvc" => Ok(Mode::Rvc),
            other => Err(Error::Config(format!(
                "unknown tracker mode '{other}' (expected aggressor or rvc)"
            ))),
        }
    }
}

/// What happens to a counter once it has triggered a mitigation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum RetriggerPolicy {
    /// The triggering entry is removed from the table.
    #[default]
    Reset,
    /// The entry keeps counting and triggers again at every multiple of the threshold.
    Multiples,
}

impl RetriggerPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            RetriggerPolicy::Reset => "reset",
            RetriggerPolicy::Multiples => "multiples",
        }
    }
}

impl fmt::Display for RetriggerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetriggerPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reset" => Ok(RetriggerPolicy::Reset),
            "multiples" => Ok(RetriggerPolicy::Multiples),
            other => Err(Error::Config(format!(
                "unknown retrigger policy '{other}' (expected reset or multiples)"
            ))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum MitigationKind {
    BlanketVrr,
    SelectiveVrr,
}

impl MitigationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MitigationKind::BlanketVrr => "vrr",
            MitigationKind::SelectiveVrr => "selective_vrr",
        }
    }
}

/// `2n`-bit victim selector. Bit `i` addresses offset `i - n` for `i < n` and
/// `i - n + 1` otherwise, i.e. the order is `[-n, .., -1, +1, .., +n]`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct VictimMask {
    width: u32,
    bits: u64,
}

impl VictimMask {
    pub fn new(width: u32, bits: u64) -> Result<Self> {
        if width == 0 || width % 2 != 0 || width > 64 {
            return Err(Error::Encoding(format!("invalid victim mask width {width}")));
        }
        if width < 64 && bits >> width != 0 {
            return Err(Error::Encoding(format!(
                "victim mask {bits:#b} has bits beyond width {width}"
            )));
        }
        Ok(VictimMask { width, bits })
    }

    pub fn empty(blast_radius: u32) -> Self {
        VictimMask {
            width: 2 * blast_radius,
            bits: 0,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn count(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_set(&self, index: u32) -> bool {
        index < self.width && self.bits >> index & 1 == 1
    }

    pub fn set(&mut self, index: u32) {
        debug_assert!(index < self.width);
        self.bits |= 1 << index;
    }

    fn radius(&self) -> i64 {
        i64::from(self.width / 2)
    }

    /// Signed row offset addressed by bit `index`.
    pub fn offset_of(&self, index: u32) -> i64 {
        let n = self.radius();
        let i = i64::from(index);
        if i < n {
            i - n
        } else {
            i - n + 1
        }
    }

    /// Bit index addressing a signed row offset, if the offset is in the blast window.
    pub fn index_of(&self, offset: i64) -> Option<u32> {
        let n = self.radius();
        match offset {
            d if (-n..0).contains(&d) => Some((d + n) as u32),
            d if (1..=n).contains(&d) => Some((d + n - 1) as u32),
            _ => None,
        }
    }

    /// Set bits as offsets, ascending.
    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.width)
            .filter(|&i| self.is_set(i))
            .map(|i| self.offset_of(i))
    }
}

impl fmt::Display for VictimMask {
    /// One character per bit, `[-n .. +n]` left to right.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width {
            f.write_str(if self.is_set(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct MitigationAction {
    pub kind: MitigationKind,
    pub anchor_row: Row,
    pub victim_mask: VictimMask,
}

impl MitigationAction {
    /// Blanket VRR: every in-range neighbour of `anchor`.
    pub fn blanket(anchor: Row, cfg: &DramConfig) -> Self {
        let mut mask = VictimMask::empty(cfg.blast_radius());
        for v in cfg.neighbor_iter(anchor) {
            let offset = i64::from(v.0) - i64::from(anchor.0);
            mask.set(mask.index_of(offset).expect("neighbour lies in the blast window"));
        }
        MitigationAction {
            kind: MitigationKind::BlanketVrr,
            anchor_row: anchor,
            victim_mask: mask,
        }
    }

    /// Selective VRR for `victims`, which must all be neighbours of `anchor`.
    pub fn selective(anchor: Row, victims: &[Row], cfg: &DramConfig) -> Result<Self> {
        if victims.is_empty() {
            return Err(Error::Encoding("selective VRR needs at least one victim".into()));
        }
        let mut mask = VictimMask::empty(cfg.blast_radius());
        for &v in victims {
            let offset = i64::from(v.0) - i64::from(anchor.0);
            let index = mask.index_of(offset).ok_or_else(|| {
                Error::Encoding(format!("row {v} is not within the blast radius of {anchor}"))
            })?;
            mask.set(index);
        }
        Ok(MitigationAction {
            kind: MitigationKind::SelectiveVrr,
            anchor_row: anchor,
            victim_mask: mask,
        })
    }
}

/// Decodes a mitigation command into the absolute rows it refreshes, ascending.
pub fn refresh_set(action: &MitigationAction, cfg: &DramConfig) -> Result<Vec<Row>> {
    let mask = &action.victim_mask;
    if mask.width() != 2 * cfg.blast_radius() {
        return Err(Error::Encoding(format!(
            "mask width {} does not match 2 * blast_radius = {}",
            mask.width(),
            2 * cfg.blast_radius()
        )));
    }
    cfg.check_row(action.anchor_row)
        .map_err(|e| Error::Encoding(e.to_string()))?;
    if action.kind == MitigationKind::SelectiveVrr && mask.count() == 0 {
        return Err(Error::Encoding("selective VRR with an empty mask".into()));
    }
    let anchor = i64::from(action.anchor_row.0);
    let rows = i64::from(cfg.rows_per_bank());
    let mut out = Vec::with_capacity(mask.count() as usize);
    for offset in mask.offsets() {
        let r = anchor + offset;
        if !(0..rows).contains(&r) {
            return Err(Error::Encoding(format!(
                "mask bit for offset {offset:+} addresses row {r}, outside the bank"
            )));
        }
        out.push(Row(r as u32));
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TrackerStats {
    pub mitigations_issued: u64,
    pub rows_refreshed: u64,
    pub acts_observed: u64,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TrackerOptions {
    pub retrigger: RetriggerPolicy,
    /// Replaces the derived threshold. Not secure in general.
    pub threshold_override: Option<u64>,
}

/// Common interface of both trackers. One instance per bank.
pub trait Tracker: Send {
    fn mode(&self) -> Mode;

    fn threshold(&self) -> u64;

    fn table(&self) -> &CountTable;

    fn stats(&self) -> TrackerStats;

    fn acts_in_window(&self) -> u64;

    /// Processes one activation and returns the mitigation it triggers, if any.
    ///
    /// The caller must roll the window (see [`Tracker::on_window_boundary`])
    /// before the activation budget of the current window is exceeded.
    fn on_activation(&mut self, row: Row) -> Result<Option<MitigationAction>>;

    /// Clears all counters for a new refresh window. Statistics are kept.
    fn on_window_boundary(&mut self);
}

/// Builds the tracker for `mode`, sized for the configured window.
pub fn new_tracker(
    mode: Mode,
    cfg: &DramConfig,
    opts: TrackerOptions,
) -> Result<Box<dyn Tracker>> {
    Ok(match mode {
        Mode::Aggressor => Box::new(AggressorTracker::new(cfg, opts)?),
        Mode::Rvc => Box::new(VictimTracker::new(cfg, opts)?),
    })
}

#[derive(Clone, Debug)]
struct TrackerCore {
    cfg: DramConfig,
    table: CountTable,
    threshold: u64,
    retrigger: RetriggerPolicy,
    acts_in_window: u64,
    stats: TrackerStats,
}

impl TrackerCore {
    fn new(mode: Mode, cfg: &DramConfig, opts: TrackerOptions) -> Result<Self> {
        let threshold = match opts.threshold_override {
            Some(0) => return Err(Error::Config("threshold override must be positive".into())),
            Some(t) => t,
            None => mode.derived_threshold(cfg)?,
        };
        let entries = dram::table_entries(mode.observations_per_window(cfg), threshold)?;
        let capacity = usize::try_from(entries)
            .map_err(|_| Error::Config(format!("table of {entries} entries is too large")))?;
        Ok(TrackerCore {
            cfg: cfg.clone(),
            table: CountTable::new(capacity)?,
            threshold,
            retrigger: opts.retrigger,
            acts_in_window: 0,
            stats: TrackerStats::default(),
        })
    }

    fn begin_activation(&mut self, row: Row) -> Result<()> {
        self.cfg.check_row(row)?;
        if self.acts_in_window >= self.cfg.window_acts() {
            return Err(Error::Contract(format!(
                "window already holds {} activations; roll the window first",
                self.acts_in_window
            )));
        }
        self.acts_in_window += 1;
        self.stats.acts_observed += 1;
        Ok(())
    }

    fn triggers(&self, estimate: u64) -> bool {
        match self.retrigger {
            RetriggerPolicy::Reset => estimate >= self.threshold,
            RetriggerPolicy::Multiples => estimate > 0 && estimate % self.threshold == 0,
        }
    }

    fn record(&mut self, action: &MitigationAction) {
        self.stats.mitigations_issued += 1;
        self.stats.rows_refreshed += u64::from(action.victim_mask.count());
    }

    fn window_boundary(&mut self) {
        self.table.global_reset();
        self.acts_in_window = 0;
    }
}

/// Activation-count tracker with blanket VRR.
#[derive(Clone, Debug)]
pub struct AggressorTracker {
    core: TrackerCore,
}

impl AggressorTracker {
    pub fn new(cfg: &DramConfig, opts: TrackerOptions) -> Result<Self> {
        Ok(AggressorTracker {
            core: TrackerCore::new(Mode::Aggressor, cfg, opts)?,
        })
    }
}

impl Tracker for AggressorTracker {
    fn mode(&self) -> Mode {
        Mode::Aggressor
    }

    fn threshold(&self) -> u64 {
        self.core.threshold
    }

    fn table(&self) -> &CountTable {
        &self.core.table
    }

    fn stats(&self) -> TrackerStats {
        self.core.stats
    }

    fn acts_in_window(&self) -> u64 {
        self.core.acts_in_window
    }

    fn on_activation(&mut self, row: Row) -> Result<Option<MitigationAction>> {
        let core = &mut self.core;
        core.begin_activation(row)?;
        let estimate = core.table.observe(row);
        if !core.triggers(estimate) {
            return Ok(None);
        }
        let action = MitigationAction::blanket(row, &core.cfg);
        if core.retrigger == RetriggerPolicy::Reset {
            core.table.reset_entry(row);
        }
        core.record(&action);
        Ok(Some(action))
    }

    fn on_window_boundary(&mut self) {
        self.core.window_boundary();
    }
}

/// Victim vulnerability-count tracker with selective VRR.
#[derive(Clone, Debug)]
pub struct VictimTracker {
    core: TrackerCore,
    scratch: Vec<Row>,
}

impl VictimTracker {
    pub fn new(cfg: &DramConfig, opts: TrackerOptions) -> Result<Self> {
        Ok(VictimTracker {
            core: TrackerCore::new(Mode::Rvc, cfg, opts)?,
            scratch: Vec::with_capacity(2 * cfg.blast_radius() as usize),
        })
    }
}

impl Tracker for VictimTracker {
    fn mode(&self) -> Mode {
        Mode::Rvc
    }

    fn threshold(&self) -> u64 {
        self.core.threshold
    }

    fn table(&self) -> &CountTable {
        &self.core.table
    }

    fn stats(&self) -> TrackerStats {
        self.core.stats
    }

    fn acts_in_window(&self) -> u64 {
        self.core.acts_in_window
    }

    fn on_activation(&mut self, row: Row) -> Result<Option<MitigationAction>> {
        let core = &mut self.core;
        core.begin_activation(row)?;
        // accessing a row restores its charge
        core.table.reset_entry(row);
        for v in core.cfg.neighbor_iter(row) {
            core.table.observe(v);
        }
        self.scratch.clear();
        for v in core.cfg.neighbor_iter(row) {
            if let Some(count) = core.table.resident_count(v) {
                if core.triggers(count) {
                    self.scratch.push(v);
                }
            }
        }
        if self.scratch.is_empty() {
            return Ok(None);
        }
        let action = MitigationAction::selective(row, &self.scratch, &core.cfg)?;
        if core.retrigger == RetriggerPolicy::Reset {
            for &v in &self.scratch {
                core.table.reset_entry(v);
            }
        }
        core.record(&action);
        Ok(Some(action))
    }

    fn on_window_boundary(&mut self) {
        self.core.window_boundary();
    }
}
