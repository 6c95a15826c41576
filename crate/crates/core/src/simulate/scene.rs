use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{mix_seed, SimulateError};
use crate::geometry::{rotation_from_euler, FocalPlane};
use crate::variance_model::OcclusionStats;

/// Coverage probability of a Boolean model of disks with density `lambda`
/// (per square meter) and radius `r`: `1 - exp(-lambda * pi * r^2)`.
pub fn occlusion_probability(lambda: f64, r: f64) -> f64 {
    1.0 - (-lambda * std::f64::consts::PI * r * r).exp()
}

/// Disk density that yields coverage probability `d` for radius `r`.
pub fn density_for_coverage(d: f64, r: f64) -> f64 {
    -(1.0 - d).ln() / (std::f64::consts::PI * r * r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTexture {
    pub base_intensity: f64,
    /// Variance of the procedural texture around the base intensity.
    pub noise_variance: f64,
    /// Lattice spacing of the value noise, meters.
    pub cell_size: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub center: (f64, f64),
    pub radius: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccluderLayer {
    /// Disk centers per square meter.
    pub density: f64,
    pub radius: f64,
    pub height: f64,
    pub intensity_mean: f64,
    pub intensity_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Ground area (meters) centered on the origin that holds the targets
    /// and the reference raster.
    pub ground_extent: (f64, f64),
    pub ground_texture: GroundTexture,
    /// Ground plane tilt about world x and y, radians.
    pub ground_tilt: (f64, f64),
    pub targets: Vec<Target>,
    pub occluder_layer: OccluderLayer,
    /// Reference/default focal plane raster: extent in meters and size in
    /// samples, centered on the origin at ground level.
    pub reference_extent: (f64, f64),
    pub reference_resolution: (usize, usize),
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |key: &str, msg: String| {
            Err(SimulateError::InvalidSpec {
                key: key.into(),
                message: msg,
            })
        };
        let o = &self.occluder_layer;
        if !(o.density >= 0.0 && o.density.is_finite()) {
            return bad("scene.occluders.density", format!("must be >= 0, got {}", o.density));
        }
        if !(o.radius > 0.0 && o.radius.is_finite()) {
            return bad("scene.occluders.radius", format!("must be > 0, got {}", o.radius));
        }
        if !(o.intensity_variance >= 0.0) {
            return bad(
                "scene.occluders.intensity_variance",
                format!("must be >= 0, got {}", o.intensity_variance),
            );
        }
        if !o.height.is_finite() {
            return bad("scene.occluders.height", "must be finite".into());
        }
        let g = &self.ground_texture;
        if !(g.noise_variance >= 0.0) {
            return bad(
                "scene.ground.noise_variance",
                format!("must be >= 0, got {}", g.noise_variance),
            );
        }
        if !(g.cell_size > 0.0) {
            return bad("scene.ground.cell_size", format!("must be > 0, got {}", g.cell_size));
        }
        if !(self.ground_extent.0 > 0.0 && self.ground_extent.1 > 0.0) {
            return bad("scene.ground_extent", "must be positive".into());
        }
        let (hx, hy) = (self.ground_extent.0 / 2.0, self.ground_extent.1 / 2.0);
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.radius > 0.0) {
                return bad("scene.targets", format!("target {i} needs a positive radius"));
            }
            if t.center.0.abs() > hx || t.center.1.abs() > hy {
                return bad("scene.targets", format!("target {i} lies outside the ground extent"));
            }
        }
        if self.reference_resolution.0 == 0 || self.reference_resolution.1 == 0 {
            return bad("scene.reference.resolution", "must be at least 1x1".into());
        }
        if !(self.reference_extent.0 > 0.0 && self.reference_extent.1 > 0.0) {
            return bad("scene.reference.extent", "must be positive".into());
        }
        Ok(())
    }

    pub fn occlusion_probability(&self) -> f64 {
        occlusion_probability(self.occluder_layer.density, self.occluder_layer.radius)
    }

    pub fn ground_normal(&self) -> Vector3<f64> {
        rotation_from_euler(self.ground_tilt.0, self.ground_tilt.1, 0.0) * Vector3::z()
    }

    /// Horizontal plane at ground level covering the reference raster.
    pub fn reference_plane(&self) -> FocalPlane {
        FocalPlane::horizontal((0.0, 0.0), 0.0, self.reference_extent, self.reference_resolution)
            .expect("validated reference raster")
    }

    /// Occlusion-free ground intensity at world `(x, y)`.
    pub fn ground_intensity(&self, x: f64, y: f64) -> f64 {
        for t in &self.targets {
            let (dx, dy) = (x - t.center.0, y - t.center.1);
            if dx * dx + dy * dy <= t.radius * t.radius {
                return t.intensity;
            }
        }
        let g = &self.ground_texture;
        g.base_intensity + g.noise_variance.sqrt() * value_noise(g.seed, x / g.cell_size, y / g.cell_size)
    }

    /// Statistics of the single-view pixel model for this scene, for pixels
    /// on textured ground (targets ignored) with additive pixel noise.
    pub fn occlusion_stats(&self, pixel_noise_sigma: f64) -> OcclusionStats {
        let n2 = pixel_noise_sigma * pixel_noise_sigma;
        OcclusionStats {
            d: self.occlusion_probability(),
            mu_o: self.occluder_layer.intensity_mean,
            sigma2_o: self.occluder_layer.intensity_variance + n2,
            mu_s: self.ground_texture.base_intensity,
            sigma2_s: self.ground_texture.noise_variance + n2,
        }
    }
}

#[inline]
fn hash64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard-normal value attached to lattice node `(i, j)`.
fn lattice_gaussian(seed: u64, i: i64, j: i64) -> f64 {
    let h = hash64(
        seed ^ hash64((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)),
    );
    let h2 = hash64(h ^ 0xD6E8_FEB8_6659_FD93);
    // Box-Muller on two 53-bit uniforms in (0, 1].
    let u1 = ((h >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (h2 >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Bilinearly interpolated Gaussian value noise with unit variance on
/// average over the cell (lattice values are scaled by 3/2 to undo the
/// variance loss of interpolation).
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (xf, yf) = (x.floor(), y.floor());
    let (i, j) = (xf as i64, yf as i64);
    let (fx, fy) = (x - xf, y - yf);
    let v00 = lattice_gaussian(seed, i, j);
    let v10 = lattice_gaussian(seed, i + 1, j);
    let v01 = lattice_gaussian(seed, i, j + 1);
    let v11 = lattice_gaussian(seed, i + 1, j + 1);
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    1.5 * (top + (bottom - top) * fy)
}

/// One realization of the occluder layer: opaque disks at a common height,
/// indexed by a uniform grid.
#[derive(Debug, Clone)]
pub struct OccluderField {
    height: f64,
    radius: f64,
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    centers: Vec<(f64, f64)>,
    intensities: Vec<f64>,
    cells: Vec<Vec<u32>>,
}

impl OccluderField {
    /// Samples disks over the rectangle `[x0, x1] x [y0, y1]` (a margin of one
    /// radius is added so coverage is stationary inside it).
    pub fn sample(layer: &OccluderLayer, bounds: ((f64, f64), (f64, f64)), seed: u64) -> Self {
        let r = layer.radius;
        let ((x0, x1), (y0, y1)) = bounds;
        let (x0, x1, y0, y1) = (x0 - r, x1 + r, y0 - r, y1 + r);
        let area = (x1 - x0) * (y1 - y0);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x0CC1));
        let expected = layer.density * area;
        let count = if expected > 0.0 {
            Poisson::new(expected).expect("positive mean").sample(&mut rng) as usize
        } else {
            0
        };
        let intensity = Normal::new(layer.intensity_mean, layer.intensity_variance.sqrt()).expect("validated variance");
        let mut centers = Vec::with_capacity(count);
        let mut intensities = Vec::with_capacity(count);
        for _ in 0..count {
            let cx = x0 + rng.random::<f64>() * (x1 - x0);
            let cy = y0 + rng.random::<f64>() * (y1 - y0);
            centers.push((cx, cy));
            intensities.push(intensity.sample(&mut rng));
        }
        let cell = (2.0 * r).max(1e-6);
        let cols = (((x1 - x0) / cell).ceil() as usize).max(1);
        let rows = (((y1 - y0) / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); cols * rows];
        for (k, &(cx, cy)) in centers.iter().enumerate() {
            let c = (((cx - x0) / cell) as usize).min(cols - 1);
            let rr = (((cy - y0) / cell) as usize).min(rows - 1);
            cells[rr * cols + c].push(k as u32);
        }
        Self {
            height: layer.height,
            radius: r,
            origin: (x0, y0),
            cell,
            cols,
            rows,
            centers,
            intensities,
            cells,
        }
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Intensity of the lowest-indexed disk covering `(x, y)`, if any.
    pub fn hit(&self, x: f64, y: f64) -> Option<f64> {
        let gx = ((x - self.origin.0) / self.cell).floor() as i64;
        let gy = ((y - self.origin.1) / self.cell).floor() as i64;
        let r2 = self.radius * self.radius;
        let mut best: Option<u32> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (cx, cy) = (gx + dx, gy + dy);
                if cx < 0 || cy < 0 || cx >= self.cols as i64 || cy >= self.rows as i64 {
                    continue;
                }
                for &k in &self.cells[cy as usize * self.cols + cx as usize] {
                    let (px, py) = self.centers[k as usize];
                    let (ddx, ddy) = (x - px, y - py);
                    if ddx * ddx + ddy * ddy <= r2 && best.is_none_or(|b| k < b) {
                        best = Some(k);
                    }
                }
            }
        }
        best.map(|k| self.intensities[k as usize])
    }
}
