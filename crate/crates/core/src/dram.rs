//! Device geometry, protection parameters and the closed-form threshold and
//! table-sizing rules both trackers are configured from.
//!
//! Every derivation here works in exact integer arithmetic. The security
//! arguments behind the thresholds are strict inequalities, so no floating
//! point is involved anywhere on this path.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Upper bound on the blast radius: a victim mask of `2 * n` bits must fit in a `u64`.
pub const MAX_BLAST_RADIUS: u32 = 32;

/// Per-bank activation budget of one 32 ms DDR5 refresh window (tREFW / tRC).
pub const DEFAULT_WINDOW_ACTS: u64 = 665_000;

/// Row index within a single bank.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row(pub u32);

impl Row {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for Row {
    fn from(v: u32) -> Self {
        Row(v)
    }
}

/// When the device's own auto-refresh restores each row within a window.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum PhaseModel {
    /// Every row is restored at the window boundary.
    EpochBoundary,
    /// Each row is restored at its own slot inside the window.
    Staggered,
}

impl PhaseModel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseModel::EpochBoundary => "epoch",
            PhaseModel::Staggered => "staggered",
        }
    }
}

impl fmt::Display for PhaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epoch" | "epoch-boundary" | "EpochBoundary" => Ok(PhaseModel::EpochBoundary),
            "staggered" | "Staggered" => Ok(PhaseModel::Staggered),
            other => Err(Error::Config(format!(
                "unknown refresh phase model '{other}' (expected epoch or staggered)"
            ))),
        }
    }
}

/// Bank geometry plus RowHammer protection parameters.
///
/// Immutable once built; [`DramConfig::new`] is the only way in and enforces
/// the parameter invariants.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DramConfig {
    rows_per_bank: u32,
    t_rh: u64,
    blast_radius: u32,
    window_acts: u64,
    phase_model: PhaseModel,
}

impl DramConfig {
    pub fn new(
        rows_per_bank: u32,
        t_rh: u64,
        blast_radius: u32,
        window_acts: u64,
        phase_model: PhaseModel,
    ) -> Result<Self> {
        if rows_per_bank == 0 || t_rh == 0 || blast_radius == 0 || window_acts == 0 {
            return Err(Error::Config(format!(
                "rows_per_bank, t_rh, blast_radius and window_acts must be positive \
                 (got {rows_per_bank}, {t_rh}, {blast_radius}, {window_acts})"
            )));
        }
        if blast_radius > MAX_BLAST_RADIUS {
            return Err(Error::Config(format!(
                "blast_radius {blast_radius} exceeds the supported maximum {MAX_BLAST_RADIUS}"
            )));
        }
        if t_rh <= 4 * u64::from(blast_radius) {
            return Err(Error::Config(format!(
                "t_rh {t_rh} must exceed 4 * blast_radius = {}",
                4 * u64::from(blast_radius)
            )));
        }
        if 2 * u64::from(blast_radius) >= u64::from(rows_per_bank) {
            return Err(Error::Config(format!(
                "blast_radius {blast_radius} must be below rows_per_bank / 2 ({rows_per_bank} rows)"
            )));
        }
        if window_acts < t_rh {
            return Err(Error::Config(format!(
                "window_acts {window_acts} is shorter than t_rh {t_rh}"
            )));
        }
        Ok(DramConfig {
            rows_per_bank,
            t_rh,
            blast_radius,
            window_acts,
            phase_model,
        })
    }

    pub fn rows_per_bank(&self) -> u32 {
        self.rows_per_bank
    }

    pub fn t_rh(&self) -> u64 {
        self.t_rh
    }

    pub fn blast_radius(&self) -> u32 {
        self.blast_radius
    }

    pub fn window_acts(&self) -> u64 {
        self.window_acts
    }

    pub fn phase_model(&self) -> PhaseModel {
        self.phase_model
    }

    /// Same geometry with a different phase model.
    pub fn with_phase_model(&self, phase_model: PhaseModel) -> Self {
        DramConfig {
            phase_model,
            ..self.clone()
        }
    }

    pub fn check_row(&self, row: Row) -> Result<()> {
        if row.0 < self.rows_per_bank {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "row {row} out of range for a bank of {} rows",
                self.rows_per_bank
            )))
        }
    }

    /// Inclusive bounds of the blast window around `row`, clipped to the bank.
    #[inline]
    pub(crate) fn blast_bounds(&self, row: Row) -> (u32, u32) {
        let lo = row.0.saturating_sub(self.blast_radius);
        let hi = row
            .0
            .saturating_add(self.blast_radius)
            .min(self.rows_per_bank - 1);
        (lo, hi)
    }

    /// In-range victims of `row` in ascending order, without allocating.
    #[inline]
    pub fn neighbor_iter(&self, row: Row) -> impl Iterator<Item = Row> {
        let (lo, hi) = self.blast_bounds(row);
        (lo..=hi).filter(move |&r| r != row.0).map(Row)
    }

    /// One-line `key=value` rendering used in output headers and trace metadata.
    pub fn summary(&self) -> String {
        format!(
            "rows_per_bank={} t_rh={} blast_radius={} window_acts={} refresh_phase_model={}",
            self.rows_per_bank, self.t_rh, self.blast_radius, self.window_acts, self.phase_model
        )
    }
}

impl Default for DramConfig {
    fn default() -> Self {
        DramConfig::new(65_536, 500, 2, DEFAULT_WINDOW_ACTS, PhaseModel::Staggered)
            .expect("default configuration is valid")
    }
}

/// Rows within the blast radius of `row`, ascending, never including `row` itself.
pub fn neighbors(row: Row, cfg: &DramConfig) -> Result<Vec<Row>> {
    cfg.check_row(row)?;
    Ok(cfg.neighbor_iter(row).collect())
}

/// Largest tracking threshold `T` with `2(T - 1) < t_rh / (2n)`.
///
/// The aggressor tracker must cover both the cross-window split of an
/// aggressor's activations and the worst case where all `2n` neighbours of
/// one victim are hammered together.
pub fn threshold_aggressor(t_rh: u64, blast_radius: u32) -> Result<u64> {
    let n = u64::from(blast_radius);
    if n == 0 || t_rh <= 4 * n {
        return Err(Error::Config(format!(
            "no aggressor threshold exists for t_rh={t_rh}, blast_radius={blast_radius} \
             (requires t_rh > 4n)"
        )));
    }
    // 2(T-1) < t_rh/2n  <=>  T - 1 < t_rh/4n  <=>  T = ceil(t_rh/4n)
    Ok(t_rh.div_ceil(4 * n))
}

/// Largest tracking threshold `T` with `2(T - 1) < t_rh` for victim counting.
pub fn threshold_rvc(t_rh: u64) -> Result<u64> {
    if t_rh < 4 {
        return Err(Error::Config(format!(
            "no victim-count threshold exists for t_rh={t_rh} (requires t_rh >= 4)"
        )));
    }
    Ok(t_rh.div_ceil(2))
}

/// Smallest entry count `N` with `N > w/t - 1`: the Misra-Gries table size that
/// keeps every item seen at least `t` times in a stream of `w` resident.
pub fn table_entries(w: u64, t: u64) -> Result<u64> {
    if w == 0 || t == 0 {
        return Err(Error::Config(format!(
            "table sizing needs positive w and t (got w={w}, t={t})"
        )));
    }
    if t > w {
        return Err(Error::Config(format!(
            "threshold {t} exceeds the window of {w} observations; no tracker is needed"
        )));
    }
    // the smallest integer strictly above w/t - 1 is floor(w/t)
    Ok(w / t)
}

/// [`table_entries`] for an exact rational threshold.
pub fn table_entries_exact(w: u64, t: Ratio<u64>) -> Result<u64> {
    if w == 0 || t <= Ratio::from_integer(0) {
        return Err(Error::Config(format!(
            "table sizing needs positive w and t (got w={w}, t={t})"
        )));
    }
    if t > Ratio::from_integer(w) {
        return Err(Error::Config(format!(
            "threshold {t} exceeds the window of {w} observations; no tracker is needed"
        )));
    }
    let ratio = Ratio::new(u128::from(w) * u128::from(*t.denom()), u128::from(*t.numer()));
    Ok(u64::try_from(ratio.floor().to_integer()).expect("w / t <= w fits in u64"))
}

/// Count-table size for the aggressor tracker: one observation per activation.
pub fn aggressor_table_entries(cfg: &DramConfig) -> Result<u64> {
    table_entries(
        cfg.window_acts,
        threshold_aggressor(cfg.t_rh, cfg.blast_radius)?,
    )
}

/// Count-table size for the victim tracker: `2n` observations per activation,
/// against the unscaled victim threshold.
pub fn rvc_table_entries(cfg: &DramConfig) -> Result<u64> {
    table_entries(
        2 * u64::from(cfg.blast_radius) * cfg.window_acts,
        threshold_rvc(cfg.t_rh)?,
    )
}
