//! ESON nasal mask size chart: contiguous nose-width bins in millimetres
//! plus the boundary tolerance used during scoring.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBin {
    Small,
    Medium,
    Large,
    TooLarge,
}

impl SizeBin {
    pub const ALL: [SizeBin; 4] = [SizeBin::Small, SizeBin::Medium, SizeBin::Large, SizeBin::TooLarge];

    pub fn ordinal(&self) -> usize {
        match self {
            SizeBin::Small => 0,
            SizeBin::Medium => 1,
            SizeBin::Large => 2,
            SizeBin::TooLarge => 3,
        }
    }

    pub fn from_ordinal(i: usize) -> Option<SizeBin> {
        SizeBin::ALL.get(i).copied()
    }

    pub fn code(&self) -> &'static str {
        match self {
            SizeBin::Small => "S",
            SizeBin::Medium => "M",
            SizeBin::Large => "L",
            SizeBin::TooLarge => "TL",
        }
    }

    pub fn parse(s: &str) -> Result<SizeBin> {
        match s {
            "S" => Ok(SizeBin::Small),
            "M" => Ok(SizeBin::Medium),
            "L" => Ok(SizeBin::Large),
            "TL" => Ok(SizeBin::TooLarge),
            other => Err(Error::InvalidArgument(format!("unknown size code '{other}'"))),
        }
    }
}

impl std::fmt::Display for SizeBin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Ordered bins covering [0, inf) mm. Lower bound inclusive, upper exclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeChart {
    /// Strictly increasing interior boundaries between adjacent bins.
    boundaries: [f64; 3],
    /// Fraction of a boundary value within which a width counts as near it.
    tolerance: f64,
}

impl Default for SizeChart {
    fn default() -> Self {
        SizeChart {
            boundaries: [37.0, 41.0, 45.0],
            tolerance: 0.05,
        }
    }
}

impl SizeChart {
    pub fn new(boundaries: [f64; 3], tolerance: f64) -> Result<Self> {
        if !(boundaries[0] < boundaries[1] && boundaries[1] < boundaries[2]) || boundaries[0] <= 0.0
        {
            return Err(Error::InvalidArgument("size boundaries must be positive and strictly increasing".into()));
        }
        if !(0.0..1.0).contains(&tolerance) {
            return Err(Error::InvalidArgument("tolerance must be in [0,1)".into()));
        }
        Ok(SizeChart { boundaries, tolerance })
    }

    pub fn boundaries(&self) -> &[f64; 3] {
        &self.boundaries
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// The unique bin containing `width_mm`.
    pub fn size_bin(&self, width_mm: f64) -> Result<SizeBin> {
        if !width_mm.is_finite() || width_mm < 0.0 {
            return Err(Error::InvalidMeasurement(format!(
                "nose width {width_mm} mm is not a valid measurement"
            )));
        }
        let idx = self.boundaries.iter().filter(|&&b| width_mm >= b).count();
        Ok(SizeBin::from_ordinal(idx).expect("at most 3 boundaries crossed"))
    }

    /// The boundary (with its adjacent bins) whose 5%-band contains
    /// `width_mm`, if any. Bands of adjacent boundaries never overlap for
    /// the default chart; the nearest boundary wins if a custom chart makes
    /// them overlap.
    pub fn near_boundary(&self, width_mm: f64) -> Option<NearBoundary> {
        let mut best: Option<NearBoundary> = None;
        for (i, &b) in self.boundaries.iter().enumerate() {
            if (width_mm - b).abs() <= self.tolerance * b {
                let cand = NearBoundary {
                    boundary_mm: b,
                    below: SizeBin::from_ordinal(i).unwrap(),
                    above: SizeBin::from_ordinal(i + 1).unwrap(),
                };
                best = match best {
                    Some(prev)
                        if (width_mm - prev.boundary_mm).abs() <= (width_mm - b).abs() =>
                    {
                        Some(prev)
                    }
                    _ => Some(cand),
                };
            }
        }
        best
    }
}

/// A measurement close enough to a bin boundary that either adjacent size
/// counts as correct.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearBoundary {
    pub boundary_mm: f64,
    pub below: SizeBin,
    pub above: SizeBin,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_table() {
        let chart = SizeChart::default();
        assert_eq!(chart.size_bin(36.0).unwrap(), SizeBin::Small);
        assert_eq!(chart.size_bin(37.0).unwrap(), SizeBin::Medium); // lower-inclusive
        assert_eq!(chart.size_bin(40.99).unwrap(), SizeBin::Medium);
        assert_eq!(chart.size_bin(41.0).unwrap(), SizeBin::Large);
        assert_eq!(chart.size_bin(50.0).unwrap(), SizeBin::TooLarge);
        assert_eq!(chart.size_bin(0.0).unwrap(), SizeBin::Small);
    }

    #[test]
    fn invalid_measurements() {
        let chart = SizeChart::default();
        assert!(chart.size_bin(-1.0).is_err());
        assert!(chart.size_bin(f64::NAN).is_err());
        assert!(chart.size_bin(f64::INFINITY).is_err());
    }

    #[test]
    fn partition_property() {
        // bin-membership oracle: count of boundaries <= w picks exactly one bin
        let chart = SizeChart::default();
        for i in 0..2000 {
            let w = i as f64 * 0.05;
            let bin = chart.size_bin(w).unwrap();
            let manual = match w {
                w if w < 37.0 => SizeBin::Small,
                w if w < 41.0 => SizeBin::Medium,
                w if w < 45.0 => SizeBin::Large,
                _ => SizeBin::TooLarge,
            };
            assert_eq!(bin, manual, "w={w}");
        }
    }

    #[test]
    fn near_boundary_bands() {
        let chart = SizeChart::default();
        // 0.05 * 37 = 1.85
        let nb = chart.near_boundary(36.9).unwrap();
        assert_eq!(nb.boundary_mm, 37.0);
        assert_eq!((nb.below, nb.above), (SizeBin::Small, SizeBin::Medium));
        assert!(chart.near_boundary(30.0).is_none());
        // 0.05 * 45 = 2.25; |50-45| = 5
        assert!(chart.near_boundary(50.0).is_none());
        assert!(chart.near_boundary(44.0).is_some());
    }
}
