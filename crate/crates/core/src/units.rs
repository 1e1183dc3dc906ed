//! Canonical units and conversions.
//!
//! Everything inside the engines runs in seconds, micrometres and nanomolar.
//! Published kinetic constants are usually quoted per minute; convert them at
//! load time with [`per_minute`] so no kernel ever mixes time bases.

use crate::{Error, Result};

/// Avogadro's number (1/mol).
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Molecules per µm³ of a 1 nM solution: N_A · 1e-9 mol/L · 1e-15 L/µm³.
pub const MOLECULES_PER_NM_UM3: f64 = AVOGADRO * 1e-9 * 1e-15;

/// Converts a per-minute rate to per-second.
pub fn per_minute(rate: f64) -> f64 {
    rate / 60.0
}

/// Converts a per-second rate back to per-minute.
pub fn per_second_to_per_minute(rate: f64) -> f64 {
    rate * 60.0
}

pub fn minutes(t: f64) -> f64 {
    t * 60.0
}

pub fn hours(t: f64) -> f64 {
    t * 3600.0
}

/// Concentration (nM) of `count` molecules dissolved in `volume` µm³.
pub fn count_to_concentration(count: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::Domain("volume must be positive"));
    }
    Ok(count / (MOLECULES_PER_NM_UM3 * volume))
}

/// Molecule count equivalent to `concentration` nM in `volume` µm³.
pub fn concentration_to_count(concentration: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::Domain("volume must be positive"));
    }
    Ok(concentration * MOLECULES_PER_NM_UM3 * volume)
}
