//! Synthetic powder diffraction frames with exact spot ground truth.
//!
//! A frame is `background + rings × texture + spots + noise`:
//!
//! - rings are Gaussian in 2θ and uniform in azimuth unless textured;
//! - texture multiplies a ring by a Gaussian azimuthal bump at φ and φ+180°;
//! - spots are isotropic 2D Gaussians. A spot's `radius` is the distance at
//!   which its contribution falls to three local noise σ, so the truth disk
//!   of an isolated spot has roughly that radius;
//! - noise is Gaussian with σ = `noise × (background + rings × texture)`.
//!
//! The truth mask marks pixels where the summed spot field exceeds three
//! local noise σ. Each detector row draws its noise from its own ChaCha
//! stream, so a frame is a pure function of its spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_polar, wrap_degrees, DetectorGeometry};
use crate::imagegrid::{Image, MaskMap};
use crate::pipeline::{Dataset, Entry};

/// Truth threshold, in local noise σ.
pub const TRUTH_SIGMA: f64 = 3.0;
const SPOT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    /// Center, degrees 2θ.
    pub two_theta: f64,
    /// Gaussian σ of the radial profile, degrees 2θ.
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub ring: usize,
    /// Degrees; the mirror lobe sits at `azimuth + 180`.
    pub azimuth: f64,
    /// Gaussian σ of each lobe, degrees azimuth.
    pub angular_width: f64,
    /// Peak intensity multiplier (≥ 1).
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotSpec {
    pub count: usize,
    /// Peak intensities, drawn log-uniform.
    pub amplitude: (f64, f64),
    /// Truth radii in pixels, drawn uniform.
    pub radius: (f64, f64),
    /// Radial placement band as fractions of the usable radius.
    pub placement: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub geometry: DetectorGeometry,
    pub rings: Vec<Ring>,
    pub texture: Vec<Texture>,
    pub spots: SpotSpec,
    pub background: f64,
    /// Noise σ as a fraction of the local spot-free signal.
    pub noise: f64,
    pub seed: u64,
}

/// A placed spot, pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedSpot {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    pub radius: f64,
    /// Gaussian σ in pixels.
    pub sigma: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad("empty frame".into());
        }
        self.geometry
            .validate()
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        if !(self.background >= 0.0 && self.noise >= 0.0) {
            return bad("background and noise must be non-negative".into());
        }
        for (i, r) in self.rings.iter().enumerate() {
            if !(r.width > 0.0 && r.amplitude >= 0.0 && r.two_theta >= 0.0) {
                return bad(format!(
                    "ring {i}: width must be positive, amplitude non-negative"
                ));
            }
        }
        for (i, t) in self.texture.iter().enumerate() {
            if t.ring >= self.rings.len() {
                return bad(format!("texture {i} references ring {}", t.ring));
            }
            if !(t.angular_width > 0.0 && t.gain >= 1.0) {
                return bad(format!("texture {i}: needs positive width and gain >= 1"));
            }
        }
        let s = &self.spots;
        if s.count > 0 {
            if !(s.amplitude.0 > 0.0 && s.amplitude.0 <= s.amplitude.1) {
                return bad("spot amplitude range must be positive and ordered".into());
            }
            if !(s.radius.0 > 0.0 && s.radius.0 <= s.radius.1) {
                return bad("spot radius range must be positive and ordered".into());
            }
            if !(0.0 <= s.placement.0 && s.placement.0 <= s.placement.1 && s.placement.1 <= 1.0) {
                return bad("spot placement band must lie in [0, 1]".into());
            }
            let peak_ring = (0..self.rings.len())
                .map(|k| self.rings[k].amplitude * self.max_gain(k))
                .fold(0.0, f64::max);
            if s.amplitude.0 <= 10.0 * peak_ring {
                return bad(format!(
                    "spot amplitude {} must exceed 10x the brightest ring ({peak_ring})",
                    s.amplitude.0
                ));
            }
            let peak_sigma = self.noise * (self.background + peak_ring);
            if s.amplitude.0 <= TRUTH_SIGMA * peak_sigma {
                return bad("spot amplitude must exceed the truth threshold".into());
            }
        }
        Ok(())
    }

    fn max_gain(&self, ring: usize) -> f64 {
        1.0 + self
            .texture
            .iter()
            .filter(|t| t.ring == ring)
            .map(|t| t.gain - 1.0)
            .sum::<f64>()
    }

    /// Texture multiplier of `ring` at `azimuth` degrees.
    pub fn texture_gain(&self, ring: usize, azimuth: f64) -> f64 {
        let mut g = 1.0;
        for t in self.texture.iter().filter(|t| t.ring == ring) {
            for lobe in [t.azimuth, t.azimuth + 180.0] {
                let d = angular_distance(azimuth, lobe);
                g += (t.gain - 1.0) * (-0.5 * (d / t.angular_width).powi(2)).exp();
            }
        }
        g
    }

    /// Background plus rings at a detector position (pixel coordinates).
    pub fn clean_signal_at(&self, x: f64, y: f64) -> f64 {
        let g = &self.geometry;
        let dx = (x - g.center_x) * g.pixel_size;
        let dy = (y - g.center_y) * g.pixel_size;
        let tt = (dx.hypot(dy) / g.distance).atan().to_degrees();
        let az = wrap_degrees(dy.atan2(dx).to_degrees());
        self.clean_signal(tt, az)
    }

    fn clean_signal(&self, two_theta: f64, azimuth: f64) -> f64 {
        let mut v = self.background;
        for (k, r) in self.rings.iter().enumerate() {
            let z = (two_theta - r.two_theta) / r.width;
            if z.abs() > 8.0 {
                continue;
            }
            let mut profile = r.amplitude * (-0.5 * z * z).exp();
            if !self.texture.is_empty() {
                profile *= self.texture_gain(k, azimuth);
            }
            v += profile;
        }
        v
    }

    /// Deterministic spot placement for this spec.
    pub fn place_spots(&self) -> Result<Vec<PlacedSpot>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(SPOT_STREAM);
        let s = &self.spots;
        let g = &self.geometry;
        let usable_px = g.max_usable_radius(self.width, self.height) / g.pixel_size;
        let (lo, hi) = (s.placement.0 * usable_px, s.placement.1 * usable_px);
        let mut out = Vec::with_capacity(s.count);
        for _ in 0..s.count {
            let radius = rng.random_range(s.radius.0..=s.radius.1);
            let amplitude = (rng.random_range(s.amplitude.0.ln()..=s.amplitude.1.ln())).exp();
            let r = rng.random_range(lo * lo..=hi * hi).sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let x = g.center_x + r * phi.cos();
            let y = g.center_y + r * phi.sin();
            let local_sigma = self.noise * self.clean_signal_at(x, y);
            let threshold = TRUTH_SIGMA * local_sigma;
            if amplitude <= threshold {
                return Err(Error::InvalidSpec(format!(
                    "spot at ({x:.1}, {y:.1}) is below the truth threshold"
                )));
            }
            let sigma = if threshold > 0.0 {
                radius / (2.0 * (amplitude / threshold).ln()).sqrt()
            } else {
                radius / 3.0
            };
            out.push(PlacedSpot {
                x,
                y,
                amplitude,
                radius,
                sigma,
            });
        }
        Ok(out)
    }
}

/// Smallest absolute difference between two angles, degrees.
fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Generated frame plus the spot field behind its truth mask.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    pub truth: MaskMap,
    pub spots: Vec<PlacedSpot>,
}

pub fn generate(spec: &SynthSpec) -> Result<(Image, MaskMap)> {
    let f = generate_frame(spec)?;
    Ok((f.image, f.truth))
}

pub fn generate_frame(spec: &SynthSpec) -> Result<Frame> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let spots = spec.place_spots()?;

    // Spot field: each spot is evaluated inside a window well past its truth
    // radius; summation order is spot order, independent of pixel order.
    let mut field = vec![0.0f64; w * h];
    for s in &spots {
        let reach = 2.0 * s.radius + 2.0;
        let x0 = (s.x - reach).floor().max(0.0) as usize;
        let y0 = (s.y - reach).floor().max(0.0) as usize;
        let x1 = ((s.x + reach).ceil() as usize).min(w - 1);
        let y1 = ((s.y + reach).ceil() as usize).min(h - 1);
        if s.x + reach < 0.0 || s.y + reach < 0.0 || x0 > x1 || y0 > y1 {
            continue;
        }
        let inv = 1.0 / (2.0 * s.sigma * s.sigma);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - s.x).powi(2) + (y as f64 - s.y).powi(2);
                field[y * w + x] += s.amplitude * (-d2 * inv).exp();
            }
        }
    }

    let mut pixels = vec![0.0f32; w * h];
    let mut truth = vec![false; w * h];
    pixels
        .par_chunks_mut(w)
        .zip(truth.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (px_row, truth_row))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(y as u64);
            for x in 0..w {
                let (_, tt, az) = pixel_polar(&spec.geometry, x, y);
                let clean = spec.clean_signal(tt, az);
                let sigma = spec.noise * clean;
                let spot = field[y * w + x];
                let n: f64 = StandardNormal.sample(&mut rng);
                px_row[x] = (clean + spot + sigma * n).max(0.0) as f32;
                truth_row[x] = spot > TRUTH_SIGMA * sigma;
            }
        });

    let image = Image::new(w, h, pixels)?.with_geometry(spec.geometry);
    let truth = MaskMap::from_bools(w, h, &truth)?;
    Ok(Frame {
        image,
        truth,
        spots,
    })
}

/// Benchmark profiles mirroring the five datasets: one spots-only
/// temperature series and four textured in-situ battery series, each with its
/// own geometry and phase mix.
pub const PROFILES: [&str; 5] = [
    "nickel-like",
    "battery-like-1",
    "battery-like-2",
    "battery-like-3",
    "battery-like-4",
];

/// Frame edge length used by [`make_benchmark_suite`].
pub const DEFAULT_SUITE_SIZE: usize = 512;

/// Physical detector edge, mm (2880 px at 0.15 mm).
const DETECTOR_EDGE_MM: f64 = 432.0;

struct Profile {
    frames: usize,
    wavelength: f64,
    distance: f64,
    /// Beam-center offset from the detector middle, fraction of the edge.
    center_offset: (f64, f64),
    /// Lattice d-spacings (Å), intensity, and radial width (deg).
    reflections: &'static [(f64, f64, f64)],
    /// (reflection index, azimuth, width, gain)
    texture: &'static [(usize, f64, f64, f64)],
    background: f64,
    noise: f64,
    spot_count: usize,
    spot_amplitude: (f64, f64),
    spot_radius: (f64, f64),
    /// Per-frame fractional d-spacing drift (thermal or state-of-charge).
    drift: f64,
}

fn profile(name: &str) -> Result<Profile> {
    let p = match name {
        "nickel-like" => Profile {
            frames: 11,
            wavelength: 0.1839,
            distance: 1000.0,
            center_offset: (0.004, -0.003),
            reflections: &[
                (2.034, 1.5e6, 0.035),
                (1.762, 9.0e5, 0.035),
                (1.246, 7.0e5, 0.04),
                (1.062, 6.5e5, 0.04),
                (1.017, 3.5e5, 0.04),
            ],
            texture: &[],
            background: 4.0e5,
            noise: 0.03,
            spot_count: 30,
            spot_amplitude: (1.0e9, 1.5e11),
            spot_radius: (1.5, 4.0),
            drift: 1.0e-5,
        },
        "battery-like-1" => Profile {
            frames: 11,
            wavelength: 0.1173,
            distance: 850.0,
            center_offset: (-0.02, 0.015),
            reflections: &[
                (4.74, 14.0, 0.05),
                (3.35, 10.0, 0.05),
                (2.44, 6.0, 0.05),
                (2.02, 9.0, 0.06),
                (1.43, 7.0, 0.06),
                (1.21, 5.0, 0.06),
                (1.02, 6.0, 0.07),
                (0.85, 4.0, 0.07),
                (0.72, 4.0, 0.07),
                (0.63, 3.0, 0.07),
            ],
            texture: &[
                (0, 35.0, 5.6, 10.0),
                (1, 120.0, 7.0, 8.0),
                (3, 70.0, 6.3, 10.0),
                (4, 160.0, 5.6, 9.0),
                (6, 20.0, 7.0, 8.0),
                (7, 100.0, 7.0, 8.0),
                (8, 55.0, 8.4, 7.0),
            ],
            background: 6.0,
            noise: 0.04,
            spot_count: 30,
            spot_amplitude: (2.0e4, 2.0e6),
            spot_radius: (1.5, 4.0),
            drift: 2.0e-5,
        },
        "battery-like-2" => Profile {
            frames: 12,
            wavelength: 0.1430,
            distance: 1150.0,
            center_offset: (0.025, 0.01),
            reflections: &[
                (3.35, 40.0, 0.05),
                (2.55, 30.0, 0.05),
                (2.13, 25.0, 0.05),
                (1.80, 28.0, 0.06),
                (1.46, 18.0, 0.06),
                (1.20, 15.0, 0.06),
                (1.02, 12.0, 0.07),
                (0.90, 10.0, 0.07),
            ],
            texture: &[
                (1, 15.0, 7.0, 6.0),
                (3, 95.0, 8.4, 6.0),
                (4, 140.0, 6.3, 7.0),
                (6, 60.0, 7.0, 6.0),
                (0, 120.0, 6.0, 5.0),
                (2, 50.0, 6.0, 6.0),
                (5, 170.0, 6.0, 6.0),
                (7, 30.0, 6.0, 6.0),
            ],
            background: 25.0,
            noise: 0.035,
            spot_count: 30,
            spot_amplitude: (5.0e3, 5.0e5),
            spot_radius: (1.5, 4.0),
            drift: 2.0e-5,
        },
        "battery-like-3" => Profile {
            frames: 12,
            wavelength: 0.1430,
            distance: 1300.0,
            center_offset: (-0.01, -0.025),
            reflections: &[
                (4.20, 150.0, 0.05),
                (2.85, 100.0, 0.05),
                (2.40, 80.0, 0.05),
                (2.00, 90.0, 0.06),
                (1.60, 60.0, 0.06),
                (1.38, 45.0, 0.06),
                (1.15, 40.0, 0.07),
                (0.98, 30.0, 0.07),
            ],
            texture: &[
                (0, 60.0, 6.3, 6.0),
                (2, 150.0, 5.6, 7.0),
                (4, 10.0, 7.0, 8.0),
                (6, 120.0, 7.7, 6.0),
                (1, 30.0, 6.0, 5.0),
                (3, 100.0, 6.0, 5.0),
                (5, 170.0, 6.0, 6.0),
                (7, 80.0, 6.0, 6.0),
            ],
            background: 120.0,
            noise: 0.03,
            spot_count: 30,
            spot_amplitude: (2.0e4, 2.0e6),
            spot_radius: (1.5, 4.0),
            drift: 2.0e-5,
        },
        "battery-like-4" => Profile {
            frames: 12,
            wavelength: 0.1173,
            distance: 950.0,
            center_offset: (0.015, -0.02),
            reflections: &[
                (3.60, 8.0, 0.05),
                (2.60, 6.0, 0.05),
                (2.10, 7.0, 0.06),
                (1.90, 5.0, 0.06),
                (1.30, 4.0, 0.06),
                (1.05, 4.0, 0.07),
                (0.85, 3.0, 0.07),
                (0.70, 3.0, 0.07),
            ],
            texture: &[
                (0, 100.0, 5.6, 10.0),
                (2, 40.0, 6.3, 12.0),
                (4, 150.0, 7.0, 9.0),
                (6, 75.0, 7.0, 8.0),
                (5, 10.0, 6.0, 8.0),
                (7, 130.0, 6.0, 7.0),
            ],
            background: 3.0,
            noise: 0.045,
            spot_count: 30,
            spot_amplitude: (2.0e3, 2.0e5),
            spot_radius: (1.5, 4.0),
            drift: 2.0e-5,
        },
        other => return Err(Error::UnknownProfile(other.to_string())),
    };
    Ok(p)
}

/// Frame specs for a benchmark profile at `size × size` pixels.
pub fn benchmark_specs(profile_name: &str, seed: u64, size: usize) -> Result<Vec<SynthSpec>> {
    let p = profile(profile_name)?;
    let pixel_size = DETECTOR_EDGE_MM / size as f64;
    let mid = (size - 1) as f64 / 2.0;
    let geometry = DetectorGeometry {
        wavelength: p.wavelength,
        center_x: mid + p.center_offset.0 * size as f64,
        center_y: mid + p.center_offset.1 * size as f64,
        distance: p.distance,
        pixel_size,
    };
    let profile_salt = PROFILES.iter().position(|&n| n == profile_name).unwrap() as u64;

    // Spot count grows with the detector edge so every shell sees about the
    // same number of spot crossings at any resolution.
    let spot_count = ((p.spot_count * size) as f64 / DEFAULT_SUITE_SIZE as f64).round() as usize;
    let mut specs = Vec::with_capacity(p.frames);
    for frame in 0..p.frames {
        let scale = 1.0 + p.drift * frame as f64;
        let rings = p
            .reflections
            .iter()
            .filter_map(|&(d, amplitude, width)| {
                let s = p.wavelength / (2.0 * d * scale);
                (s < 1.0).then(|| Ring {
                    two_theta: 2.0 * s.asin().to_degrees(),
                    width,
                    amplitude,
                })
            })
            .collect::<Vec<_>>();
        let texture = p
            .texture
            .iter()
            .map(|&(ring, azimuth, angular_width, gain)| Texture {
                ring,
                azimuth,
                angular_width,
                gain,
            })
            .collect();
        specs.push(SynthSpec {
            width: size,
            height: size,
            geometry,
            rings,
            texture,
            spots: SpotSpec {
                count: spot_count,
                amplitude: p.spot_amplitude,
                radius: p.spot_radius,
                placement: (0.3, 0.95),
            },
            background: p.background,
            noise: p.noise,
            seed: seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(profile_salt << 32 | frame as u64),
        });
    }
    Ok(specs)
}

pub fn make_benchmark_suite(profile_name: &str, seed: u64) -> Result<Dataset> {
    make_benchmark_suite_sized(profile_name, seed, DEFAULT_SUITE_SIZE)
}

pub fn make_benchmark_suite_sized(profile_name: &str, seed: u64, size: usize) -> Result<Dataset> {
    let specs = benchmark_specs(profile_name, seed, size)?;
    let entries = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let (image, truth) = generate(spec)?;
            Ok(Entry {
                name: format!("frame_{i:03}"),
                image,
                truth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: profile_name.to_string(),
        entries,
    })
}
