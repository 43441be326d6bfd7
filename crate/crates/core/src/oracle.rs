//! Exact disturbance model used as ground truth for bit flips.
//!
//! Each row carries the number of neighbour activations it has absorbed
//! since its charge was last restored. Restoration happens when the row is
//! itself activated, when a mitigation refreshes it, or when the device's
//! auto-refresh reaches it. A row flips once its disturbance reaches `t_rh`.
//!
//! Auto-refresh follows the configured [`PhaseModel`]. Under `Staggered`,
//! row `r` owns slot `floor(r * W / rows_per_bank)` of a `W`-activation
//! window and is restored just before the activation at that position. A
//! window that ends early (an explicit boundary) still completes: rows whose
//! slot had not come up yet are restored at the boundary, so every row is
//! restored exactly once per window.

use crate::dram::{DramConfig, PhaseModel, Row};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Flip {
    pub act_seq: u64,
    pub row: Row,
    pub disturbance: u64,
}

#[derive(Clone, Debug)]
pub struct OracleState {
    cfg: DramConfig,
    disturbance: Vec<u64>,
    /// Activations since the start of the current window.
    position: u64,
    last_seq: Option<u64>,
    flips: Vec<Flip>,
}

impl OracleState {
    pub fn new(cfg: &DramConfig) -> Self {
        OracleState {
            cfg: cfg.clone(),
            disturbance: vec![0; cfg.rows_per_bank() as usize],
            position: 0,
            last_seq: None,
            flips: Vec::new(),
        }
    }

    pub fn disturbance(&self, row: Row) -> u64 {
        self.disturbance[row.index()]
    }

    pub fn flips(&self) -> &[Flip] {
        &self.flips
    }

    pub fn into_flips(self) -> Vec<Flip> {
        self.flips
    }

    pub fn max_disturbance(&self) -> u64 {
        self.disturbance.iter().copied().max().unwrap_or(0)
    }

    /// Auto-refresh slot of `row` within a window (Staggered model).
    pub fn refresh_slot(cfg: &DramConfig, row: Row) -> u64 {
        (u128::from(row.0) * u128::from(cfg.window_acts()) / u128::from(cfg.rows_per_bank()))
            as u64
    }

    /// First row whose slot is at or after window position `p`.
    fn first_row_with_slot_at_least(&self, p: u64) -> usize {
        let rows = u128::from(self.cfg.rows_per_bank());
        let w = u128::from(self.cfg.window_acts());
        // slot(r) >= p  <=>  r * W >= p * R  <=>  r >= ceil(p * R / W)
        (u128::from(p) * rows).div_ceil(w).min(rows) as usize
    }

    fn restore_slot(&mut self, p: u64) {
        let lo = self.first_row_with_slot_at_least(p);
        let hi = self.first_row_with_slot_at_least(p + 1);
        self.disturbance[lo..hi].fill(0);
    }

    /// Applies one activation of `row` as the `act_seq`-th activation of the run.
    pub fn act(&mut self, row: Row, act_seq: u64) -> Result<()> {
        self.cfg.check_row(row)?;
        if self.last_seq.is_some_and(|last| act_seq <= last) {
            return Err(Error::Contract(format!(
                "act_seq {act_seq} does not follow {}",
                self.last_seq.unwrap_or_default()
            )));
        }
        self.last_seq = Some(act_seq);
        if self.position >= self.cfg.window_acts() {
            self.window();
        }
        if self.cfg.phase_model() == PhaseModel::Staggered {
            self.restore_slot(self.position);
        }
        self.position += 1;

        let t_rh = self.cfg.t_rh();
        self.disturbance[row.index()] = 0;
        let (lo, hi) = self.cfg.blast_bounds(row);
        for v in lo..=hi {
            if v == row.0 {
                continue;
            }
            let d = &mut self.disturbance[v as usize];
            *d += 1;
            // recorded once per excursion; the row keeps its charge loss for diagnostics
            if *d == t_rh {
                self.flips.push(Flip {
                    act_seq,
                    row: Row(v),
                    disturbance: *d,
                });
            }
        }
        Ok(())
    }

    /// Restores exactly the given rows.
    pub fn refresh(&mut self, rows: &[Row]) -> Result<()> {
        for &r in rows {
            self.cfg.check_row(r)?;
        }
        for &r in rows {
            self.disturbance[r.index()] = 0;
        }
        Ok(())
    }

    /// Ends the current refresh window.
    pub fn window(&mut self) {
        match self.cfg.phase_model() {
            PhaseModel::EpochBoundary => self.disturbance.fill(0),
            PhaseModel::Staggered => {
                let from = self.first_row_with_slot_at_least(self.position);
                self.disturbance[from..].fill(0);
            }
        }
        self.position = 0;
    }
}
