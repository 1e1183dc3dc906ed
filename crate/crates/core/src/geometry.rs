//! Channel geometry: station coordinates along the flow axis, lane
//! boundaries across it, and the y-z surfaces cells occupy.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A surface on the y-z plane spanning the full channel height.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Surface {
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Surface {
    pub fn new(y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(y_lo.is_finite() && y_hi.is_finite()) || y_lo < 0.0 || y_hi < y_lo {
            return Err(Error::Domain("surface bounds must satisfy 0 <= y_lo <= y_hi"));
        }
        Ok(Surface { y_lo, y_hi })
    }

    pub fn width(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.y_lo && y <= self.y_hi
    }

    pub fn overlaps(&self, other: &Surface) -> bool {
        self.y_lo < other.y_hi && other.y_lo < self.y_hi
    }
}

/// Microfluidic channel dimensions shared by every engine.
///
/// `stations` are the x-coordinates where cell columns absorb or release
/// molecules; `lanes` are the y-boundaries W₀..W_k of the spatially
/// segregated populations. Flow is uniform along +x.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelGeometry {
    /// Station x-coordinates (µm), strictly increasing.
    pub stations: Vec<f64>,
    /// Lane y-boundaries (µm), strictly increasing, starting at 0.
    pub lanes: Vec<f64>,
    /// Channel height H (µm).
    pub height: f64,
    /// Cell radius R (µm).
    pub cell_radius: f64,
    /// Flow speed u along x (µm/s).
    pub flow: f64,
}

impl ChannelGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.stations.len() < 2 {
            return Err(Error::Domain("need at least two stations"));
        }
        if !self.stations.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain("stations must be strictly increasing"));
        }
        if self.lanes.len() < 2 || self.lanes[0] != 0.0 {
            return Err(Error::Domain("lane boundaries must start at 0"));
        }
        if !self.lanes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain("lane boundaries must be strictly increasing"));
        }
        if !(self.height > 0.0) {
            return Err(Error::Domain("channel height must be positive"));
        }
        if self.cell_radius < 0.0 {
            return Err(Error::Domain("cell radius must be non-negative"));
        }
        if !self.flow.is_finite() {
            return Err(Error::Domain("flow speed must be finite"));
        }
        Ok(())
    }

    /// Full channel width W (µm).
    pub fn width(&self) -> f64 {
        *self.lanes.last().expect("validated geometry")
    }

    /// Surface spanning lane boundaries `i..j` (the paper-style S_{i,j}).
    pub fn lane_surface(&self, i: usize, j: usize) -> Result<Surface> {
        if i >= j || j >= self.lanes.len() {
            return Err(Error::Config(format!(
                "lane surface ({i},{j}) out of range for {} boundaries",
                self.lanes.len()
            )));
        }
        Surface::new(self.lanes[i], self.lanes[j])
    }

    pub fn station(&self, k: usize) -> Result<f64> {
        self.stations
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("station L{k} not defined")))
    }

    /// Lane volume (µm³) for molecule counting: width × height × depth.
    pub fn lane_volume(&self, lane: &Surface, depth: f64) -> f64 {
        lane.width() * self.height * depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn surface_bounds_checked() {
        assert!(Surface::new(-1.0, 2.0).is_err());
        assert!(Surface::new(3.0, 2.0).is_err());
        // Degenerate zero-width surfaces are representable (a kernel built on
        // one is identically zero); the propagation operator rejects them.
        assert!(Surface::new(2.0, 2.0).is_ok());
    }

    #[test]
    fn geometry_validation() {
        let g = ChannelGeometry {
            stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0],
            lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
            height: 3.0,
            cell_radius: 0.5,
            flow: 0.1,
        };
        g.validate().unwrap();
        assert_eq!(g.width(), 15.0);
        let s = g.lane_surface(0, 2).unwrap();
        assert_eq!((s.y_lo, s.y_hi), (0.0, 5.0));
        assert!(g.lane_surface(2, 2).is_err());

        let mut bad = g.clone();
        bad.lanes[0] = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = g.clone();
        bad.stations[1] = 0.0;
        assert!(bad.validate().is_err());
    }
}
