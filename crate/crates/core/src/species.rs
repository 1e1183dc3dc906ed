//! Signalling-molecule identities and their kinetic/transport constants.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::{Error, Result};

/// Name of a diffusible signalling molecule. Names are unique per scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct SpeciesId(String);

impl SpeciesId {
    pub fn new(name: &str) -> Self {
        SpeciesId(name.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for SpeciesId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpeciesId {
    fn from(s: &str) -> Self {
        SpeciesId::new(s)
    }
}

/// Per-molecule constants, already converted to canonical units
/// (s, µm, nM).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeciesParams {
    /// Production rate β (nM/s).
    pub beta: f64,
    /// Dose-response fitting parameter θ (1/nM).
    pub theta: f64,
    /// Hill coefficient n (dimensionless).
    pub hill_n: f64,
    /// Degradation rate k_d (1/s).
    pub k_d: f64,
    /// Diffusion coefficient D (µm²/s).
    pub diffusion: f64,
    /// Wall absorption rate k_a (µm/s).
    pub wall_absorption: f64,
}

impl SpeciesParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.beta,
            self.theta,
            self.hill_n,
            self.k_d,
            self.diffusion,
            self.wall_absorption,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("species parameters must be finite and non-negative"));
        }
        if !(self.hill_n > 0.0) {
            return Err(Error::Domain("hill coefficient must be positive"));
        }
        if self.beta > 0.0 && !(self.theta > 0.0) {
            return Err(Error::Domain("theta must be positive when beta is positive"));
        }
        Ok(())
    }
}

/// Species table for one scenario.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeciesTable {
    entries: BTreeMap<SpeciesId, SpeciesParams>,
}

impl SpeciesTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a species; duplicate names are rejected.
    pub fn insert(&mut self, id: SpeciesId, params: SpeciesParams) -> Result<()> {
        params.validate()?;
        if self.entries.contains_key(&id) {
            return Err(Error::Config(format!("duplicate species '{id}'")));
        }
        self.entries.insert(id, params);
        Ok(())
    }

    pub fn get(&self, id: &SpeciesId) -> Result<&SpeciesParams> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown species '{id}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpeciesId, &SpeciesParams)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
