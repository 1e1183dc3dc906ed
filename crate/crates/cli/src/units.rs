//! Parsing of dimensioned quantities from configuration files.
//!
//! Every dimensioned field is a string carrying an explicit unit
//! ("0.05/min", "89 um^2/s", "50 nM"); bare numbers are rejected so a
//! mistyped time base cannot slip through silently. Values convert to the
//! canonical s/µm/nM system on load.

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    Concentration,
    Rate,
    ConcentrationRate,
    InverseConcentration,
    Diffusivity,
    Speed,
    SecondOrderRate,
}

fn unit_table(dim: Dimension) -> &'static [(&'static str, f64)] {
    match dim {
        Dimension::Time => &[("s", 1.0), ("sec", 1.0), ("min", 60.0), ("h", 3600.0), ("hr", 3600.0)],
        Dimension::Length => &[("um", 1.0), ("µm", 1.0), ("mm", 1000.0)],
        Dimension::Concentration => &[("nM", 1.0), ("uM", 1000.0), ("µM", 1000.0)],
        Dimension::Rate => &[
            ("1/s", 1.0),
            ("/s", 1.0),
            ("s^-1", 1.0),
            ("1/min", 1.0 / 60.0),
            ("/min", 1.0 / 60.0),
            ("min^-1", 1.0 / 60.0),
            ("1/h", 1.0 / 3600.0),
            ("/h", 1.0 / 3600.0),
        ],
        Dimension::ConcentrationRate => &[
            ("nM/s", 1.0),
            ("nM/min", 1.0 / 60.0),
            ("nM/h", 1.0 / 3600.0),
        ],
        Dimension::InverseConcentration => &[("1/nM", 1.0), ("/nM", 1.0), ("nM^-1", 1.0)],
        Dimension::Diffusivity => &[("um^2/s", 1.0), ("um2/s", 1.0), ("µm^2/s", 1.0)],
        Dimension::Speed => &[("um/s", 1.0), ("µm/s", 1.0), ("um/min", 1.0 / 60.0)],
        Dimension::SecondOrderRate => &[
            ("1/(nM s)", 1.0),
            ("1/(nM*s)", 1.0),
            ("1/nM/s", 1.0),
            ("nM^-1 s^-1", 1.0),
            ("nM^-1s^-1", 1.0),
        ],
    }
}

/// Parses "`<number> <unit>`" (whitespace optional) into canonical units.
pub fn quantity(raw: &str, dim: Dimension, field: &str) -> Result<f64> {
    let s = raw.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c)))
        .ok_or_else(|| anyhow!("field '{field}': '{s}' has no unit; write e.g. \"0.05 1/min\""))?;
    // An exponent's sign belongs to the number ("1e-3 nM").
    let (num_str, unit_str) = s.split_at(split);
    let number: f64 = num_str
        .trim()
        .parse()
        .map_err(|_| anyhow!("field '{field}': cannot parse number in '{s}'"))?;
    let unit = unit_str.trim();
    if unit.is_empty() {
        bail!("field '{field}': '{s}' has no unit");
    }
    for (name, factor) in unit_table(dim) {
        if unit == *name {
            return Ok(number * factor);
        }
    }
    let allowed: Vec<&str> = unit_table(dim).iter().map(|(n, _)| *n).collect();
    bail!("field '{field}': unit '{unit}' not valid here; expected one of {allowed:?}")
}
