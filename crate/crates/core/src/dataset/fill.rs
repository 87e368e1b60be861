//! Quasi-static fill model: a cylindrical cup tilted about its rim.
//!
//! The free surface is horizontal and passes through the lowest rim point, so
//! the material that stays in the cup is whatever lies below that plane. Once
//! poured, material never returns, hence the running minimum in
//! [`FillOracle::observe`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::StaticContext;

/// Weight of one kilogram expressed in pounds-force.
pub const LBF_PER_KG: f64 = 9.806_65 / 4.448_221_615_260_5;
/// Density of water in kg/mm³.
pub const WATER_KG_PER_MM3: f64 = 1.0e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub diameter_mm: f64,
    pub height_mm: f64,
}

impl Cylinder {
    pub fn new(diameter_mm: f64, height_mm: f64) -> Result<Self> {
        if !(diameter_mm > 0.0 && height_mm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cylinder needs positive size, got d={diameter_mm} h={height_mm}"
            )));
        }
        Ok(Cylinder {
            diameter_mm,
            height_mm,
        })
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter_mm
    }

    /// Interior volume in mm³.
    pub fn volume(&self) -> f64 {
        PI * self.radius().powi(2) * self.height_mm
    }

    /// Volume (mm³) held below the rim when tilted by `tilt_deg` from upright.
    ///
    /// Symmetric in the sign of the tilt; zero from 90° onwards.
    pub fn capacity(&self, tilt_deg: f64) -> f64 {
        let tilt = tilt_deg.abs();
        if tilt == 0.0 {
            return self.volume();
        }
        if tilt >= 90.0 {
            return 0.0;
        }
        let r = self.radius();
        let h = self.height_mm;
        let k = tilt.to_radians().tan();
        if 2.0 * r * k <= h {
            // surface stays above the whole base
            return PI * r * r * (h - r * k);
        }
        // surface meets the base along the chord x = x0
        let x0 = r - h / k;
        let prim =
            |x: f64| x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin();
        let wedge = (h - r * k) * (prim(r) - prim(x0))
            + 2.0 * k / 3.0 * (r * r - x0 * x0).max(0.0).powf(1.5);
        wedge.max(0.0)
    }

    /// Smallest tilt (degrees) at which the capacity drops to `volume`.
    pub fn tilt_for_capacity(&self, volume: f64) -> f64 {
        if volume >= self.volume() {
            return 0.0;
        }
        if volume <= 0.0 {
            return 90.0;
        }
        let (mut lo, mut hi) = (0.0f64, 90.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.capacity(mid) > volume {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Ground-truth force simulator for one cup and fill.
#[derive(Debug, Clone, PartialEq)]
pub struct FillOracle {
    cup: Cylinder,
    f_empty: f64,
    f_init: f64,
    fill_volume: f64,
    retained: f64,
}

impl FillOracle {
    pub fn new(
        cup: Cylinder,
        cup_mass_kg: f64,
        fill_volume: f64,
        density_ratio: f64,
    ) -> Result<Self> {
        if fill_volume > cup.volume() {
            return Err(Error::InvalidArgument(format!(
                "fill volume {fill_volume:.1} mm³ exceeds cup volume {:.1} mm³",
                cup.volume()
            )));
        }
        if !(fill_volume >= 0.0 && cup_mass_kg >= 0.0 && density_ratio > 0.0) {
            return Err(Error::InvalidArgument(
                "negative mass, fill or density".into(),
            ));
        }
        let f_empty = cup_mass_kg * LBF_PER_KG;
        let f_init = (cup_mass_kg + fill_volume * density_ratio * WATER_KG_PER_MM3) * LBF_PER_KG;
        Ok(FillOracle {
            cup,
            f_empty,
            f_init,
            fill_volume,
            retained: fill_volume,
        })
    }

    /// Rebuilds the oracle from a trial's static readings. The fill volume is
    /// recovered from the material weight and clamped to the cup volume.
    pub fn from_context(z: &StaticContext) -> Result<Self> {
        z.validate()?;
        let cup = Cylinder::new(z.d_cup, z.h_cup)?;
        let fill =
            ((z.f_init - z.f_empty) / LBF_PER_KG / (z.rho * WATER_KG_PER_MM3)).min(cup.volume());
        Ok(FillOracle {
            cup,
            f_empty: z.f_empty,
            f_init: z.f_init,
            fill_volume: fill,
            retained: fill,
        })
    }

    pub fn cup(&self) -> Cylinder {
        self.cup
    }

    pub fn f_init(&self) -> f64 {
        self.f_init
    }

    pub fn f_empty(&self) -> f64 {
        self.f_empty
    }

    pub fn fill_volume(&self) -> f64 {
        self.fill_volume
    }

    pub fn retained(&self) -> f64 {
        self.retained
    }

    /// Retained volume for a static tilt, ignoring history.
    pub fn retained_at(&self, tilt_deg: f64) -> f64 {
        self.fill_volume.min(self.cup.capacity(tilt_deg))
    }

    fn force_for(&self, retained: f64) -> f64 {
        if retained >= self.fill_volume {
            self.f_init
        } else if self.fill_volume <= 0.0 {
            self.f_empty
        } else {
            self.f_empty + (self.f_init - self.f_empty) * (retained / self.fill_volume)
        }
    }

    /// Force for a static tilt, ignoring history.
    pub fn force_at(&self, tilt_deg: f64) -> f64 {
        self.force_for(self.retained_at(tilt_deg))
    }

    /// Advances to a new tilt and returns the sensed force.
    pub fn observe(&mut self, tilt_deg: f64) -> f64 {
        self.retained = self.retained.min(self.retained_at(tilt_deg));
        self.force_for(self.retained)
    }

    pub fn reset(&mut self) {
        self.retained = self.fill_volume;
    }
}
