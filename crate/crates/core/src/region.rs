//! Input regions handed to the bounding methods.
//!
//! A region is an affine image of the unit cube: `center + sum_k axis_k * u_k`
//! with `u_k in [-1, 1]`. Axis-aligned boxes use one axis per non-degenerate
//! coordinate; ray segments use a single axis along the ray.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    center: Vec<f64>,
    axes: Vec<Vec<f64>>,
}

impl Region {
    /// Axis-aligned box. Degenerate axes (`lower == upper`) contribute no
    /// generator.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "region bounds",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        let dim = lower.len();
        let mut center = Vec::with_capacity(dim);
        let mut axes = Vec::new();
        for d in 0..dim {
            let (lo, hi) = (lower[d], upper[d]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "region axis {d}: expected finite lower <= upper, got [{lo}, {hi}]"
                )));
            }
            center.push(0.5 * (lo + hi));
            let half = 0.5 * (hi - lo);
            if half > 0.0 {
                let mut axis = vec![0.0; dim];
                axis[d] = half;
                axes.push(axis);
            }
        }
        Ok(Self { center, axes })
    }

    /// Segment `center +- half_length * direction`.
    pub fn segment(center: &[f64], direction: &[f64], half_length: f64) -> Result<Self> {
        if center.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                context: "segment direction",
                expected: center.len(),
                actual: direction.len(),
            });
        }
        if !(half_length >= 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "segment half length must be finite and non-negative, got {half_length}"
            )));
        }
        let axes = if half_length > 0.0 {
            vec![direction.iter().map(|d| d * half_length).collect()]
        } else {
            Vec::new()
        };
        Ok(Self {
            center: center.to_vec(),
            axes,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Generators scaled by their half extents.
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Apply a per-coordinate affine change of variables: `center_map(d, x)`
    /// to center coordinates and `axis_map(d, v)` to axis components.
    pub fn map_axes(
        &self,
        center_map: impl Fn(usize, f64) -> f64,
        axis_map: impl Fn(usize, f64) -> f64,
    ) -> Region {
        Region {
            center: self.center.iter().enumerate().map(|(d, &x)| center_map(d, x)).collect(),
            axes: self
                .axes
                .iter()
                .map(|a| a.iter().enumerate().map(|(d, &v)| axis_map(d, v)).collect())
                .collect(),
        }
    }

    /// Map `u in [-1, 1]^axes` to a point of the region.
    pub fn point_at(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.center);
        for (axis, &uk) in self.axes.iter().zip(u) {
            for (o, a) in out.iter_mut().zip(axis) {
                *o += a * uk;
            }
        }
    }
}

/// Coordinate of lattice index `i` on `[lo, hi]` split into `cells` cells.
///
/// Every grid in the crate (dense reconstruction, k-d tree nodes, marching
/// cubes corners) goes through this function so that the same lattice point
/// always maps to the same bits.
pub fn lattice_coord(lo: f64, hi: f64, i: usize, cells: usize) -> f64 {
    if i == 0 {
        lo
    } else if i >= cells {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / cells as f64)
    }
}
