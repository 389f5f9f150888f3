use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inr::MlpNetwork;
use crate::region::Region;

use super::{region_bound, BoundMethod};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: [f64; 3],
    direction: [f64; 3],
}

impl Ray {
    /// `direction` is normalised; it must be finite and non-zero.
    pub fn new(origin: [f64; 3], direction: [f64; 3]) -> Result<Self> {
        let len = norm(direction);
        if !(len > 0.0 && len.is_finite()) || origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ray needs a finite origin and non-zero direction, got {origin:?} {direction:?}"
            )));
        }
        Ok(Self { origin, direction: direction.map(|d| d / len) })
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn at(&self, s: f64) -> [f64; 3] {
        [0, 1, 2].map(|d| self.origin[d] + s * self.direction[d])
    }

    /// Parameter interval inside the axis-aligned box, if any.
    fn clip(&self, lower: &[f64], upper: &[f64], s_max: f64) -> Option<(f64, f64)> {
        let (mut a, mut b) = (0.0f64, s_max);
        for d in 0..3 {
            let o = self.origin[d];
            let v = self.direction[d];
            if v == 0.0 {
                if o < lower[d] || o > upper[d] {
                    return None;
                }
                continue;
            }
            let (t0, t1) = ((lower[d] - o) / v, (upper[d] - o) / v);
            a = a.max(t0.min(t1));
            b = b.min(t0.max(t1));
        }
        (a <= b).then_some((a, b))
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    v.map(|x| x / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub s: f64,
    pub point: [f64; 3],
}

/// Pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub origin: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in degrees.
    pub fov_y_deg: f64,
}

impl Camera {
    /// Ray through the center of pixel `(px, py)`; row 0 is the top.
    pub fn pixel_ray(&self, px: usize, py: usize, width: usize, height: usize) -> Result<Ray> {
        let forward = normalize([0, 1, 2].map(|d| self.look_at[d] - self.origin[d]));
        let right = normalize(cross(forward, self.up));
        let up = cross(right, forward);
        let half = (0.5 * self.fov_y_deg.to_radians()).tan();
        let aspect = width as f64 / height as f64;
        let x = (2.0 * (px as f64 + 0.5) / width as f64 - 1.0) * half * aspect;
        let y = (1.0 - 2.0 * (py as f64 + 0.5) / height as f64) * half;
        Ray::new(self.origin, [0, 1, 2].map(|d| forward[d] + x * right[d] + y * up[d]))
    }

    fn validate(&self) -> Result<()> {
        let forward = [0, 1, 2].map(|d| self.look_at[d] - self.origin[d]);
        if norm(forward) == 0.0 || norm(cross(forward, self.up)) == 0.0 {
            return Err(Error::InvalidArgument(
                "camera look-at must differ from the origin and not be parallel to up".into(),
            ));
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(Error::InvalidArgument(format!(
                "field of view must be in (0, 180) degrees, got {}",
                self.fov_y_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaycastConfig {
    pub width: usize,
    pub height: usize,
    pub method: BoundMethod,
    pub t: f64,
    pub iso_value: f64,
    /// Largest ray parameter considered.
    pub s_max: f64,
    /// Segments this short are no longer split; defaults to `s_max / 2^14`.
    pub min_segment: Option<f64>,
}

/// Bisection steps used to refine a hit inside a leaf segment.
const REFINE_STEPS: u32 = 64;

impl RaycastConfig {
    pub fn min_segment_length(&self) -> f64 {
        self.min_segment.unwrap_or(self.s_max / 16384.0)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if self.method == BoundMethod::Dense {
            return Err(Error::InvalidArgument("ray casting needs a per-segment bound method".into()));
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(Error::InvalidArgument("s_max must be positive".into()));
        }
        if !(self.min_segment_length() > 0.0) {
            return Err(Error::InvalidArgument("minimum segment length must be positive".into()));
        }
        if self.method.uses_t() && !(self.t > 0.0) {
            return Err(Error::InvalidArgument("t must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RayCounters {
    pub bound_queries: u64,
    pub point_evals: u64,
}

/// Nearest crossing of the iso value along `ray` within the network domain.
pub fn cast_ray(net: &MlpNetwork, ray: &Ray, cfg: &RaycastConfig) -> Result<(Option<RayHit>, RayCounters)> {
    let mut counters = RayCounters::default();
    let Some((s0, s1)) = ray.clip(net.domain_lower(), net.domain_upper(), cfg.s_max) else {
        return Ok((None, counters));
    };
    let min_len = cfg.min_segment_length();
    let c = cfg.iso_value;
    let inside = |s: f64, counters: &mut RayCounters| -> Result<bool> {
        counters.point_evals += 1;
        Ok(net.forward(&ray.at(s))? <= c)
    };
    let mut stack = vec![(s0, s1)];
    while let Some((a, b)) = stack.pop() {
        let half = 0.5 * (b - a);
        let region = Region::segment(&ray.at(a + half), &ray.direction, half)?;
        counters.bound_queries += 1;
        let (lo, hi) = region_bound(net, &region, cfg.method, cfg.t)?;
        if c < lo || c > hi {
            continue;
        }
        if b - a > min_len {
            let mid = a + half;
            stack.push((mid, b));
            stack.push((a, mid));
            continue;
        }
        let (ia, ib) = (inside(a, &mut counters)?, inside(b, &mut counters)?);
        if ia == ib {
            continue;
        }
        let (mut lo_s, mut hi_s) = (a, b);
        for _ in 0..REFINE_STEPS {
            let mid = 0.5 * (lo_s + hi_s);
            if mid <= lo_s || mid >= hi_s {
                break;
            }
            if inside(mid, &mut counters)? == ia {
                lo_s = mid;
            } else {
                hi_s = mid;
            }
        }
        let s = 0.5 * (lo_s + hi_s);
        return Ok((Some(RayHit { s, point: ray.at(s) }), counters));
    }
    Ok((None, counters))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first; `None` is a miss.
    pub depths: Vec<Option<f64>>,
}

impl DepthImage {
    pub fn hit_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaycastOutput {
    pub image: DepthImage,
    pub counters: RayCounters,
}

/// Render the iso surface as a depth image. Rows are processed in parallel
/// and gathered in order.
pub fn raycast(net: &MlpNetwork, camera: &Camera, cfg: &RaycastConfig) -> Result<RaycastOutput> {
    cfg.validate()?;
    camera.validate()?;
    if net.input_dim() != 3 {
        return Err(Error::InvalidArgument("ray casting needs a 3-D network".into()));
    }
    let rows: Vec<(Vec<Option<f64>>, RayCounters)> = (0..cfg.height)
        .into_par_iter()
        .map(|py| -> Result<_> {
            let mut row = Vec::with_capacity(cfg.width);
            let mut counters = RayCounters::default();
            for px in 0..cfg.width {
                let ray = camera.pixel_ray(px, py, cfg.width, cfg.height)?;
                let (hit, c) = cast_ray(net, &ray, cfg)?;
                counters.bound_queries += c.bound_queries;
                counters.point_evals += c.point_evals;
                row.push(hit.map(|h| h.s));
            }
            Ok((row, counters))
        })
        .collect::<Result<_>>()?;
    let mut counters = RayCounters::default();
    let mut depths = Vec::with_capacity(cfg.width * cfg.height);
    for (row, c) in rows {
        depths.extend(row);
        counters.bound_queries += c.bound_queries;
        counters.point_evals += c.point_evals;
    }
    Ok(RaycastOutput {
        image: DepthImage { width: cfg.width, height: cfg.height, depths },
        counters,
    })
}

/// Binary 16-bit PGM: depth `s` maps to `round(65534 * s / s_max)`, misses to
/// 65535.
pub fn write_pgm(image: &DepthImage, s_max: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P5\n{} {}\n65535\n", image.width, image.height).into_bytes();
    for d in &image.depths {
        let v: u16 = match d {
            Some(s) => (65534.0 * (s / s_max).clamp(0.0, 1.0)).round() as u16,
            None => u16::MAX,
        };
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
