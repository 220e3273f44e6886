use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of orientation classes used by the detector head.
pub const DEFAULT_BINS: usize = 48;

/// Wraps an angle into `[0, 360)`.
pub fn normalize_deg(theta: f64) -> f64 {
    wrap(theta, 360.0)
}

fn wrap(theta: f64, period: f64) -> f64 {
    let r = theta.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Signed smallest difference `a - b` modulo `period`, in `(-period/2, period/2]`.
pub fn angle_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = wrap(a - b, period);
    if d > period / 2.0 {
        d - period
    } else {
        d
    }
}

/// Rotational symmetry order `k`: orientations are equivalent modulo `360/k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SymmetryOrder(u32);

impl SymmetryOrder {
    pub const NONE: SymmetryOrder = SymmetryOrder(1);

    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("symmetry", "order must be >= 1"));
        }
        Ok(SymmetryOrder(k))
    }

    pub fn k(self) -> u32 {
        self.0
    }

    pub fn period(self) -> f64 {
        360.0 / self.0 as f64
    }
}

impl TryFrom<u32> for SymmetryOrder {
    type Error = Error;
    fn try_from(k: u32) -> Result<Self> {
        SymmetryOrder::new(k)
    }
}

impl From<SymmetryOrder> for u32 {
    fn from(s: SymmetryOrder) -> u32 {
        s.0
    }
}

/// Reduces `theta` into `[0, 360/k)`.
pub fn canonical_theta(theta: f64, sym: SymmetryOrder) -> f64 {
    wrap(theta, sym.period())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBins")]
pub struct OrientationBins {
    pub n_bins: usize,
    pub gap_deg: f64,
}

#[derive(Deserialize)]
struct RawBins {
    n_bins: usize,
}

impl TryFrom<RawBins> for OrientationBins {
    type Error = Error;
    fn try_from(r: RawBins) -> Result<Self> {
        OrientationBins::new(r.n_bins)
    }
}

impl OrientationBins {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::invalid("n_bins", "must be positive"));
        }
        Ok(OrientationBins {
            n_bins,
            gap_deg: 360.0 / n_bins as f64,
        })
    }
}

impl Default for OrientationBins {
    fn default() -> Self {
        OrientationBins {
            n_bins: DEFAULT_BINS,
            gap_deg: 360.0 / DEFAULT_BINS as f64,
        }
    }
}

/// Index of the nearest bin center `i * G`; an angle exactly halfway between
/// two centers goes to the lower index.
pub fn bin_of(theta: f64, bins: &OrientationBins) -> usize {
    let t = normalize_deg(theta) / bins.gap_deg;
    let i = (t - 0.5).ceil().max(0.0) as usize;
    i % bins.n_bins
}

pub fn theta_of(bin: usize, bins: &OrientationBins) -> f64 {
    bin as f64 * bins.gap_deg
}
