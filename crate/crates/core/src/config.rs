//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! t_rh = 500
//! blast_radius = 2
//! refresh_phase_model = staggered
//! e_row_refresh = 3/2
//! ```
//!
//! Every key is optional; unset keys fall back to [`DramConfig::default`],
//! [`EnergyModel::default`] and the tracker defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dram::{DramConfig, PhaseModel};
use crate::energy::{Energy, EnergyModel};
use crate::error::{Error, Result};
use crate::tracker::{Mode, RetriggerPolicy};

pub const KEYS: [&str; 12] = [
    "rows_per_bank",
    "t_rh",
    "blast_radius",
    "window_acts",
    "refresh_phase_model",
    "e_act",
    "e_row_refresh",
    "e_mitigation_cmd",
    "mode",
    "retrigger",
    "threshold_override",
    "seed",
];

/// Partially specified settings; later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Settings {
    pub rows_per_bank: Option<u32>,
    pub t_rh: Option<u64>,
    pub blast_radius: Option<u32>,
    pub window_acts: Option<u64>,
    pub phase_model: Option<PhaseModel>,
    pub e_act: Option<Energy>,
    pub e_row_refresh: Option<Energy>,
    pub e_mitigation_cmd: Option<Energy>,
    pub mode: Option<Mode>,
    pub retrigger: Option<RetriggerPolicy>,
    pub threshold_override: Option<u64>,
    pub seed: Option<u64>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value '{value}' for {key}"),
    })
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(c, _)| c).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
            match key {
                "rows_per_bank" => s.rows_per_bank = Some(parse_value(line, key, value)?),
                "t_rh" => s.t_rh = Some(parse_value(line, key, value)?),
                "blast_radius" => s.blast_radius = Some(parse_value(line, key, value)?),
                "window_acts" => s.window_acts = Some(parse_value(line, key, value)?),
                "refresh_phase_model" => s.phase_model = Some(parse_value(line, key, value)?),
                "e_act" => s.e_act = Some(parse_value(line, key, value)?),
                "e_row_refresh" => s.e_row_refresh = Some(parse_value(line, key, value)?),
                "e_mitigation_cmd" => s.e_mitigation_cmd = Some(parse_value(line, key, value)?),
                "mode" => s.mode = Some(parse_value(line, key, value)?),
                "retrigger" => s.retrigger = Some(parse_value(line, key, value)?),
                "threshold_override" => s.threshold_override = Some(parse_value(line, key, value)?),
                "seed" => s.seed = Some(parse_value(line, key, value)?),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
            seen.push(key.to_string());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Settings::parse(&text)
    }

    /// `self` with every field set in `over` replaced.
    pub fn overlay(self, over: &Settings) -> Settings {
        Settings {
            rows_per_bank: over.rows_per_bank.or(self.rows_per_bank),
            t_rh: over.t_rh.or(self.t_rh),
            blast_radius: over.blast_radius.or(self.blast_radius),
            window_acts: over.window_acts.or(self.window_acts),
            phase_model: over.phase_model.or(self.phase_model),
            e_act: over.e_act.or(self.e_act),
            e_row_refresh: over.e_row_refresh.or(self.e_row_refresh),
            e_mitigation_cmd: over.e_mitigation_cmd.or(self.e_mitigation_cmd),
            mode: over.mode.or(self.mode),
            retrigger: over.retrigger.or(self.retrigger),
            threshold_override: over.threshold_override.or(self.threshold_override),
            seed: over.seed.or(self.seed),
        }
    }

    pub fn dram(&self) -> Result<DramConfig> {
        let d = DramConfig::default();
        DramConfig::new(
            self.rows_per_bank.unwrap_or(d.rows_per_bank()),
            self.t_rh.unwrap_or(d.t_rh()),
            self.blast_radius.unwrap_or(d.blast_radius()),
            self.window_acts.unwrap_or(d.window_acts()),
            self.phase_model.unwrap_or(d.phase_model()),
        )
    }

    pub fn energy(&self) -> EnergyModel {
        let d = EnergyModel::default();
        EnergyModel {
            e_act: self.e_act.unwrap_or(d.e_act),
            e_row_refresh: self.e_row_refresh.unwrap_or(d.e_row_refresh),
            e_mitigation_cmd: self.e_mitigation_cmd.unwrap_or(d.e_mitigation_cmd),
        }
    }

    /// Fully resolved settings in the file format, every key present except
    /// unset optional ones.
    pub fn render_resolved(&self) -> Result<String> {
        let dram = self.dram()?;
        let energy = self.energy();
        let mut out = String::new();
        let _ = writeln!(out, "rows_per_bank = {}", dram.rows_per_bank());
        let _ = writeln!(out, "t_rh = {}", dram.t_rh());
        let _ = writeln!(out, "blast_radius = {}", dram.blast_radius());
        let _ = writeln!(out, "window_acts = {}", dram.window_acts());
        let _ = writeln!(out, "refresh_phase_model = {}", dram.phase_model());
        let _ = writeln!(out, "e_act = {}", energy.e_act);
        let _ = writeln!(out, "e_row_refresh = {}", energy.e_row_refresh);
        let _ = writeln!(out, "e_mitigation_cmd = {}", energy.e_mitigation_cmd);
        let _ = writeln!(out, "mode = {}", self.mode.unwrap_or(Mode::Rvc));
        let _ = writeln!(out, "retrigger = {}", self.retrigger.unwrap_or_default());
        if let Some(t) = self.threshold_override {
            let _ = writeln!(out, "threshold_override = {t}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed = {seed}");
        }
        Ok(out)
    }
}
