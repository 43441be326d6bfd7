//! Abstract energy accounting.
//!
//! Costs are exact non-negative rationals parsed from decimal text, so
//! totals are reproducible to the last digit and never drift.

use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// A non-negative exact energy quantity in abstract units.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Energy(Ratio<u128>);

impl Energy {
    pub const ZERO: Energy = Energy(Ratio::new_raw(0, 1));

    pub fn from_integer(v: u64) -> Self {
        Energy(Ratio::from_integer(u128::from(v)))
    }

    pub fn ratio(&self) -> Ratio<u128> {
        self.0
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl Mul<u64> for Energy {
    type Output = Energy;
    fn mul(self, rhs: u64) -> Energy {
        Energy(self.0 * Ratio::from_integer(u128::from(rhs)))
    }
}

impl FromStr for Energy {
    type Err = Error;

    /// Accepts `12`, `0.25`, `3/8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("'{s}' is not a non-negative energy value"));
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: u128 = num.trim().parse().map_err(|_| bad())?;
            let den: u128 = den.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            return Ok(Energy(Ratio::new(num, den)));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 30 {
            return Err(bad());
        }
        let int: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let scale = 10u128.pow(frac.len() as u32);
        let frac_v: u128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Ok(Energy(Ratio::new(num, scale)))
    }
}

impl fmt::Display for Energy {
    /// Exact decimal when the denominator only has factors 2 and 5, else `num/den`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (num, den) = (*self.0.numer(), *self.0.denom());
        let mut d = den;
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return write!(f, "{num}/{den}");
        }
        let digits = twos.max(fives);
        let scaled = num * (10u128.pow(digits) / den);
        if digits == 0 {
            return write!(f, "{scaled}");
        }
        let p = 10u128.pow(digits);
        write!(
            f,
            "{}.{:0width$}",
            scaled / p,
            scaled % p,
            width = digits as usize
        )
    }
}

/// Per-event energy costs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnergyModel {
    pub e_act: Energy,
    pub e_row_refresh: Energy,
    pub e_mitigation_cmd: Energy,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            e_act: Energy::from_integer(1),
            e_row_refresh: Energy::from_integer(1),
            e_mitigation_cmd: Energy::from_integer(1),
        }
    }
}

impl EnergyModel {
    pub fn summary(&self) -> String {
        format!(
            "e_act={} e_row_refresh={} e_mitigation_cmd={}",
            self.e_act, self.e_row_refresh, self.e_mitigation_cmd
        )
    }

    pub fn vrr_energy(&self, mitigations: u64, rows_refreshed: u64) -> Energy {
        self.e_mitigation_cmd * mitigations + self.e_row_refresh * rows_refreshed
    }

    pub fn total_energy(&self, acts: u64, mitigations: u64, rows_refreshed: u64) -> Energy {
        self.e_act * acts + self.vrr_energy(mitigations, rows_refreshed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        for (text, shown) in [
            ("1", "1"),
            ("0.25", "0.25"),
            ("2.50", "2.5"),
            (".5", "0.5"),
            ("3/8", "0.375"),
            ("1/3", "1/3"),
            ("0", "0"),
        ] {
            assert_eq!(text.parse::<Energy>().unwrap().to_string(), shown, "{text}");
        }
        for bad in ["", "-1", "1.2.3", "x", "1/0", "."] {
            assert!(bad.parse::<Energy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn decomposition() {
        let m = EnergyModel {
            e_act: "0.5".parse().unwrap(),
            e_row_refresh: "2".parse().unwrap(),
            e_mitigation_cmd: "0.125".parse().unwrap(),
        };
        assert_eq!(m.vrr_energy(7, 28).to_string(), "56.875");
        assert_eq!(m.total_energy(500, 7, 28).to_string(), "306.875");
    }
}
