//! Detector geometry and per-pixel polar coordinate maps.
//!
//! Ideal orthogonal detector: no tilt or rotation. Pixel `(x, y)` is offset
//! from the beam center by `dx = (x - center_x) * pixel_size` and
//! `dy = (y - center_y) * pixel_size`. Azimuth is measured from +x towards +y
//! (increasing row index), in degrees on `[0, 360)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorGeometry {
    /// Ångström.
    #[serde(rename = "wavelength_A")]
    pub wavelength: f64,
    /// Beam center, pixel units.
    #[serde(rename = "center_x_px")]
    pub center_x: f64,
    #[serde(rename = "center_y_px")]
    pub center_y: f64,
    /// Sample-to-detector distance, mm.
    #[serde(rename = "distance_mm")]
    pub distance: f64,
    /// Square pixel pitch, mm.
    #[serde(rename = "pixel_size_mm")]
    pub pixel_size: f64,
}

impl DetectorGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("distance", self.distance),
            ("pixel_size", self.pixel_size),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.center_x.is_finite() || !self.center_y.is_finite() {
            return Err(Error::InvalidGeometry("beam center must be finite".into()));
        }
        Ok(())
    }

    /// Detector radius (mm) at which the scattering angle reaches `two_theta` degrees.
    pub fn radius_at_two_theta(&self, two_theta: f64) -> f64 {
        self.distance * two_theta.to_radians().tan()
    }

    pub fn two_theta_at_radius(&self, radius: f64) -> f64 {
        (radius / self.distance).atan().to_degrees()
    }

    /// Distance (mm) from the beam center to the nearest image edge, zero when
    /// the center lies outside the pixel grid.
    pub fn max_usable_radius(&self, width: usize, height: usize) -> f64 {
        let px = self
            .center_x
            .min(self.center_y)
            .min((width - 1) as f64 - self.center_x)
            .min((height - 1) as f64 - self.center_y);
        px.max(0.0) * self.pixel_size
    }
}

/// Per-pixel radius (mm), 2θ (degrees) and azimuth (degrees), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMaps {
    pub width: usize,
    pub height: usize,
    pub radius: Vec<f64>,
    pub two_theta: Vec<f64>,
    pub azimuth: Vec<f64>,
    pub max_usable_radius: f64,
    /// Sample-to-detector distance the maps were computed for, mm.
    pub distance: f64,
}

impl PolarMaps {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                left: dims,
                right: self.dims(),
            });
        }
        Ok(())
    }
}

/// Polar coordinates of a single pixel: (radius mm, 2θ deg, azimuth deg).
pub fn pixel_polar(geom: &DetectorGeometry, x: usize, y: usize) -> (f64, f64, f64) {
    let dx = (x as f64 - geom.center_x) * geom.pixel_size;
    let dy = (y as f64 - geom.center_y) * geom.pixel_size;
    let radius = dx.hypot(dy);
    let two_theta = (radius / geom.distance).atan().to_degrees();
    (radius, two_theta, wrap_degrees(dy.atan2(dx).to_degrees()))
}

/// Maps an angle in degrees onto `[0, 360)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

pub fn compute_polar_maps(
    geom: &DetectorGeometry,
    width: usize,
    height: usize,
) -> Result<PolarMaps> {
    geom.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let n = width * height;
    let mut radius = vec![0.0; n];
    let mut two_theta = vec![0.0; n];
    let mut azimuth = vec![0.0; n];
    radius
        .par_chunks_mut(width)
        .zip(two_theta.par_chunks_mut(width))
        .zip(azimuth.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, ((r_row, t_row), a_row))| {
            for x in 0..width {
                let (r, t, a) = pixel_polar(geom, x, y);
                r_row[x] = r;
                t_row[x] = t;
                a_row[x] = a;
            }
        });
    Ok(PolarMaps {
        width,
        height,
        radius,
        two_theta,
        azimuth,
        max_usable_radius: geom.max_usable_radius(width, height),
        distance: geom.distance,
    })
}

const SIDECAR_KEYS: [&str; 5] = [
    "wavelength_A",
    "center_x_px",
    "center_y_px",
    "distance_mm",
    "pixel_size_mm",
];

/// Parses a `<image>.geom.json` sidecar. Unknown keys are ignored.
pub fn geometry_from_sidecar(json_text: &str) -> Result<DetectorGeometry> {
    let value: Value =
        serde_json::from_str(json_text).map_err(|e| Error::MalformedSidecar(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::MalformedSidecar("expected a JSON object".into()))?;
    let mut vals = [0.0; 5];
    for (slot, key) in vals.iter_mut().zip(SIDECAR_KEYS) {
        let v = obj.get(key).ok_or(Error::MissingKey(key))?;
        *slot = v
            .as_f64()
            .ok_or_else(|| Error::MalformedSidecar(format!("{key} is not a number")))?;
    }
    for (i, key) in SIDECAR_KEYS.iter().enumerate() {
        let v = vals[i];
        let must_be_positive = matches!(i, 0 | 3 | 4);
        if must_be_positive && v <= 0.0 {
            return Err(Error::NonPositiveValue { key, value: v });
        }
    }
    let geom = DetectorGeometry {
        wavelength: vals[0],
        center_x: vals[1],
        center_y: vals[2],
        distance: vals[3],
        pixel_size: vals[4],
    };
    geom.validate()?;
    Ok(geom)
}

pub fn geometry_to_sidecar(geom: &DetectorGeometry) -> String {
    serde_json::to_string_pretty(geom).expect("geometry serializes")
}
