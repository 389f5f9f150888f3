//! Hierarchical active-cell prediction, marching cubes and SDF ray casting.
//!
//! The k-d tree search bisects the network domain along its widest extent
//! (in leaf-lattice units, lowest axis on ties), asks the configured bound
//! method for the value range of each node, and drops nodes whose range
//! excludes the iso-value. Nodes surviving to the maximum depth are the
//! predicted active cells.

mod mc;
mod raycast;
mod tables;

use std::fmt;


use crate::affine::{ra_output_range, RaVariant};
use crate::error::{Error, Result};
use crate::inr::{MlpNetwork, ScalarVolume};
use crate::paf::{ra_ua_estimate, soft_bound, up_output_estimate};
use crate::region::{lattice_coord, Region};

pub use mc::{
    corner_values_from_grid, evaluate_corners, export_obj, marching_cubes, read_obj, triangulate,
    write_obj, CornerValues, MarchingCubesOutput, TriangleMesh,
};
pub use raycast::{
    cast_ray, raycast, write_pgm, Camera, DepthImage, Ray, RayCounters, RayHit, RaycastConfig,
    RaycastOutput,
};

/// How a node's value range is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundMethod {
    /// Soft bound `mu +- t sigma` from uncertainty propagation.
    Up,
    /// Guaranteed range analysis.
    Ra(RaVariant),
    /// Soft bound from the range-analysis form read as uniform noise.
    RaUa(RaVariant),
    /// Corner minimum/maximum of the dense leaf grid (ground truth).
    Dense,
}

impl BoundMethod {
    pub const NAMES: [&'static str; 7] =
        ["up", "ra-full", "ra-fixed", "ra-truncate", "ra-append", "ra-ua", "dense"];

    /// Parse a method name; truncate/append use the given parameters.
    pub fn parse(name: &str, truncate_k: usize, append_budget: usize) -> Result<Self> {
        Ok(match name {
            "up" => BoundMethod::Up,
            "ra-full" => BoundMethod::Ra(RaVariant::Full),
            "ra-fixed" => BoundMethod::Ra(RaVariant::Fixed),
            "ra-truncate" => BoundMethod::Ra(RaVariant::Truncate(truncate_k)),
            "ra-append" => BoundMethod::Ra(RaVariant::Append(append_budget)),
            "ra-ua" => BoundMethod::RaUa(RaVariant::Full),
            "dense" => BoundMethod::Dense,
            other => {
                return Err(Error::parse(
                    "method",
                    format!("unknown method `{other}` (expected one of {})", Self::NAMES.join(", ")),
                ))
            }
        })
    }

    /// All seven methods with default variant parameters.
    pub fn all(input_dim: usize) -> Vec<Self> {
        let k = RaVariant::default_budget(input_dim);
        Self::NAMES
            .iter()
            .map(|n| Self::parse(n, k, k).expect("built-in names parse"))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Up => "up",
            BoundMethod::Ra(v) => v.name(),
            BoundMethod::RaUa(_) => "ra-ua",
            BoundMethod::Dense => "dense",
        }
    }

    pub fn uses_t(self) -> bool {
        matches!(self, BoundMethod::Up | BoundMethod::RaUa(_))
    }

    pub fn is_sound(self) -> bool {
        matches!(self, BoundMethod::Ra(_) | BoundMethod::Dense)
    }
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundMethod::Ra(v) => write!(f, "{v}"),
            BoundMethod::RaUa(v) => write!(f, "ra-ua[{v}]"),
            other => f.write_str(other.name()),
        }
    }
}

/// Value range of the network over `region` according to `method`, in data
/// units. [`BoundMethod::Dense`] has no per-region form and is rejected.
pub fn region_bound(net: &MlpNetwork, region: &Region, method: BoundMethod, t: f64) -> Result<(f64, f64)> {
    match method {
        BoundMethod::Up => Ok(soft_bound(up_output_estimate(net, region)?, t)),
        BoundMethod::Ra(v) => ra_output_range(net, region, v),
        BoundMethod::RaUa(v) => Ok(soft_bound(ra_ua_estimate(net, region, v)?, t)),
        BoundMethod::Dense => Err(Error::InvalidArgument(
            "the dense method has no per-region bound".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub iso_value: f64,
    /// Tree depth; a multiple of 3 so that leaves are cubes.
    pub max_depth: u32,
    pub t: f64,
    pub method: BoundMethod,
}

/// Deepest supported tree (2^10 cells per axis).
pub const MAX_DEPTH: u32 = 30;

impl ExtractConfig {
    pub fn validate(&self, net: &MlpNetwork) -> Result<()> {
        if net.input_dim() != 3 {
            return Err(Error::InvalidArgument(format!(
                "cell extraction needs a 3-D network, got input_dim {}",
                net.input_dim()
            )));
        }
        if self.max_depth == 0 || self.max_depth % 3 != 0 || self.max_depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "max depth must be a positive multiple of 3 up to {MAX_DEPTH}, got {}",
                self.max_depth
            )));
        }
        if !self.iso_value.is_finite() {
            return Err(Error::InvalidArgument("iso value must be finite".into()));
        }
        if self.method.uses_t() && !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if let BoundMethod::Ra(v) | BoundMethod::RaUa(v) = self.method {
            v.validate(net.input_dim())?;
        }
        Ok(())
    }
}

/// Leaf lattice over the network domain: `cells` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    lower: [f64; 3],
    upper: [f64; 3],
    cells: u32,
}

impl Lattice {
    pub fn for_depth(net: &MlpNetwork, depth: u32) -> Self {
        let lo = net.domain_lower();
        let hi = net.domain_upper();
        Self {
            lower: [lo[0], lo[1], lo[2]],
            upper: [hi[0], hi[1], hi[2]],
            cells: 1 << (depth / 3),
        }
    }

    pub fn cells_per_axis(&self) -> u32 {
        self.cells
    }

    pub fn total_cells(&self) -> usize {
        (self.cells as usize).pow(3)
    }

    pub fn corner_count(&self) -> usize {
        (self.cells as usize + 1).pow(3)
    }

    pub fn coord(&self, axis: usize, i: u32) -> f64 {
        lattice_coord(self.lower[axis], self.upper[axis], i as usize, self.cells as usize)
    }

    pub fn point(&self, idx: [u32; 3]) -> [f64; 3] {
        [self.coord(0, idx[0]), self.coord(1, idx[1]), self.coord(2, idx[2])]
    }

    /// Linear key of a lattice vertex (x fastest).
    pub fn corner_key(&self, idx: [u32; 3]) -> u64 {
        let n = self.cells as u64 + 1;
        idx[0] as u64 + n * (idx[1] as u64 + n * idx[2] as u64)
    }

    pub fn corner_index(&self, key: u64) -> [u32; 3] {
        let n = self.cells as u64 + 1;
        [(key % n) as u32, ((key / n) % n) as u32, (key / (n * n)) as u32]
    }

    /// Linear index of a leaf cell (x fastest).
    pub fn cell_key(&self, cell: [u32; 3]) -> u64 {
        let n = self.cells as u64;
        cell[0] as u64 + n * (cell[1] as u64 + n * cell[2] as u64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractCounters {
    pub nodes_visited: u64,
    pub bound_queries: u64,
    pub nodes_pruned: u64,
    /// Network evaluations at lattice corners needed to mesh the result.
    pub inr_point_evals: u64,
}

/// Predicted (or true) active cells at leaf resolution, sorted by cell key.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCellSet {
    lattice: Lattice,
    cells: Vec<[u32; 3]>,
    pub counters: ExtractCounters,
    /// Summed volume of pruned nodes, as a fraction of the domain.
    pub pruned_volume: f64,
    /// Set when the root itself was pruned (iso value outside the bound of
    /// the whole domain).
    pub iso_outside_range: bool,
}

impl ActiveCellSet {
    pub fn new(lattice: Lattice, mut cells: Vec<[u32; 3]>) -> Self {
        cells.sort_by_key(|&c| lattice.cell_key(c));
        cells.dedup();
        Self {
            lattice,
            cells,
            counters: ExtractCounters::default(),
            pruned_volume: 0.0,
            iso_outside_range: false,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cells(&self) -> &[[u32; 3]] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: [u32; 3]) -> bool {
        let key = self.lattice.cell_key(cell);
        self.cells
            .binary_search_by_key(&key, |&c| self.lattice.cell_key(c))
            .is_ok()
    }

    /// World-space `(lower, upper)` corners of cell `i`.
    pub fn cell_bounds(&self, i: usize) -> ([f64; 3], [f64; 3]) {
        let c = self.cells[i];
        (self.lattice.point(c), self.lattice.point([c[0] + 1, c[1] + 1, c[2] + 1]))
    }

    /// Mean volume of the pruned nodes (domain volume 1); 0 if none.
    pub fn mean_pruned_volume(&self) -> f64 {
        if self.counters.nodes_pruned == 0 {
            0.0
        } else {
            self.pruned_volume / self.counters.nodes_pruned as f64
        }
    }

    /// Distinct lattice corners of the cells, sorted by key.
    pub fn corner_keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self
            .cells
            .iter()
            .flat_map(|c| {
                tables::CORNERS
                    .iter()
                    .map(move |o| self.lattice.corner_key([c[0] + o[0], c[1] + o[1], c[2] + o[2]]))
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}

/// Dense corner grid of the leaf lattice.
pub fn corner_grid(net: &MlpNetwork, lattice: &Lattice) -> Result<ScalarVolume> {
    let n = lattice.cells as usize + 1;
    net.dense_reconstruct([n, n, n])
}

fn cell_straddles(grid: &ScalarVolume, lo: [u32; 3], hi: [u32; 3], c: f64) -> bool {
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let v = grid.get(i as usize, j as usize, k as usize);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
        }
    }
    vmin <= c && c <= vmax
}

/// Ground truth: a cell is active iff the iso value lies within the range of
/// its corner values.
pub fn true_active_cells(net: &MlpNetwork, config: &ExtractConfig) -> Result<ActiveCellSet> {
    config.validate(net)?;
    let lattice = Lattice::for_depth(net, config.max_depth);
    let grid = corner_grid(net, &lattice)?;
    active_cells_from_grid(lattice, &grid, config.iso_value)
}

/// Cells of a dense corner grid whose corner range contains `iso`.
pub fn active_cells_from_grid(lattice: Lattice, grid: &ScalarVolume, iso: f64) -> Result<ActiveCellSet> {
    let n = lattice.cells;
    let m = n as usize + 1;
    if grid.dims() != [m, m, m] {
        return Err(Error::DimensionMismatch {
            context: "corner grid size",
            expected: m,
            actual: grid.dims()[0],
        });
    }
    let mut cells = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if cell_straddles(grid, [i, j, k], [i + 1, j + 1, k + 1], iso) {
                    cells.push([i, j, k]);
                }
            }
        }
    }
    let mut set = ActiveCellSet::new(lattice, cells);
    set.counters.inr_point_evals = set.lattice.corner_count() as u64;
    Ok(set)
}

struct Search<'a> {
    net: &'a MlpNetwork,
    config: &'a ExtractConfig,
    lattice: Lattice,
    grid: Option<ScalarVolume>,
}

#[derive(Default)]
struct Partial {
    cells: Vec<[u32; 3]>,
    visited: u64,
    pruned: u64,
    pruned_volume: f64,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.cells.extend(other.cells);
        self.visited += other.visited;
        self.pruned += other.pruned;
        self.pruned_volume += other.pruned_volume;
        self
    }
}

/// Below this many remaining levels the recursion stays on one thread.
const PARALLEL_MIN_LEVELS: u32 = 4;

impl Search<'_> {
    fn node_active(&self, lo: [u32; 3], hi: [u32; 3]) -> Result<bool> {
        let c = self.config.iso_value;
        if let Some(grid) = &self.grid {
            return Ok(cell_straddles(grid, lo, hi, c));
        }
        let region = Region::from_box(&self.lattice.point(lo), &self.lattice.point(hi))?;
        let (blo, bhi) = region_bound(self.net, &region, self.config.method, self.config.t)?;
        Ok(!(c < blo || c > bhi))
    }

    fn visit(&self, lo: [u32; 3], hi: [u32; 3], levels_left: u32) -> Result<Partial> {
        let mut part = Partial { visited: 1, ..Partial::default() };
        if !self.node_active(lo, hi)? {
            let n = self.lattice.cells as f64;
            part.pruned = 1;
            part.pruned_volume = (0..3).map(|d| (hi[d] - lo[d]) as f64 / n).product();
            return Ok(part);
        }
        if levels_left == 0 {
            part.cells.push(lo);
            return Ok(part);
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .expect("three axes");
        let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
        let mut left_hi = hi;
        left_hi[axis] = mid;
        let mut right_lo = lo;
        right_lo[axis] = mid;
        let (left, right) = if levels_left >= PARALLEL_MIN_LEVELS {
            rayon::join(
                || self.visit(lo, left_hi, levels_left - 1),
                || self.visit(right_lo, hi, levels_left - 1),
            )
        } else {
            (self.visit(lo, left_hi, levels_left - 1), self.visit(right_lo, hi, levels_left - 1))
        };
        Ok(part.merge(left?).merge(right?))
    }
}

/// The k-d tree active-cell search.
pub fn kdtree_extract(net: &MlpNetwork, config: &ExtractConfig) -> Result<ActiveCellSet> {
    config.validate(net)?;
    let lattice = Lattice::for_depth(net, config.max_depth);
    let grid = match config.method {
        BoundMethod::Dense => Some(corner_grid(net, &lattice)?),
        _ => None,
    };
    let search = Search { net, config, lattice: lattice.clone(), grid };
    let n = lattice.cells;
    let part = search.visit([0; 3], [n; 3], config.max_depth)?;
    let root_pruned = part.visited == 1 && part.pruned == 1;
    let mut set = ActiveCellSet::new(lattice, part.cells);
    set.counters = ExtractCounters {
        nodes_visited: part.visited,
        bound_queries: part.visited,
        nodes_pruned: part.pruned,
        inr_point_evals: match config.method {
            BoundMethod::Dense => set.lattice.corner_count() as u64,
            _ => set.corner_keys().len() as u64,
        },
    };
    set.pruned_volume = part.pruned_volume;
    set.iso_outside_range = root_pruned;
    if root_pruned {
        log::warn!(
            "iso value {} lies outside the {} bound of the whole domain; nothing to extract",
            config.iso_value,
            config.method
        );
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{Activation, LinearLayer};

    pub(crate) fn linear_x_net() -> MlpNetwork {
        MlpNetwork::new(
            vec![LinearLayer::new(1, 3, vec![1.0, 0.0, 0.0], vec![0.0]).unwrap()],
            Activation::Relu,
            3,
            1,
            vec![-1.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn constant_net(b: f64) -> MlpNetwork {
        MlpNetwork::new(
            vec![LinearLayer::new(1, 3, vec![0.0; 3], vec![b]).unwrap()],
            Activation::Sine,
            3,
            1,
            vec![-1.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn cfg(method: BoundMethod, depth: u32, iso: f64) -> ExtractConfig {
        ExtractConfig { iso_value: iso, max_depth: depth, t: 5.0, method }
    }

    #[test]
    fn constant_network_prunes_root() {
        let net = constant_net(0.3);
        for m in BoundMethod::all(3) {
            let set = kdtree_extract(&net, &cfg(m, 6, 1.0)).unwrap();
            assert!(set.is_empty());
            assert!(set.iso_outside_range);
            if m != BoundMethod::Dense {
                assert_eq!(set.counters.nodes_visited, 1);
            }
        }
        let truth = true_active_cells(&net, &cfg(BoundMethod::Dense, 6, 0.3)).unwrap();
        assert_eq!(truth.len(), 64);
    }

    #[test]
    fn plane_on_shared_faces_activates_both_sides() {
        // Every octant has a face on x = 0, so all eight contain the iso value.
        let net = linear_x_net();
        for m in BoundMethod::all(3) {
            let set = kdtree_extract(&net, &cfg(m, 3, 0.0)).unwrap();
            assert_eq!(set.len(), 8, "{m}");
        }
        let truth = true_active_cells(&net, &cfg(BoundMethod::Dense, 3, 0.0)).unwrap();
        assert_eq!(truth.len(), 8);
        for m in BoundMethod::all(3).into_iter().filter(|m| m.is_sound()) {
            let set = kdtree_extract(&net, &cfg(m, 3, 0.1)).unwrap();
            assert_eq!(set.len(), 4, "{m}");
            assert!(set.cells().iter().all(|c| c[0] == 1));
        }
        let truth = true_active_cells(&net, &cfg(BoundMethod::Dense, 3, 0.1)).unwrap();
        assert_eq!(truth.len(), 4);
    }

    #[test]
    fn depth_must_be_multiple_of_three() {
        let net = linear_x_net();
        assert!(kdtree_extract(&net, &cfg(BoundMethod::Up, 10, 0.0)).is_err());
        assert!(kdtree_extract(&net, &cfg(BoundMethod::Up, 0, 0.0)).is_err());
    }

    #[test]
    fn split_order_and_counters() {
        let net = linear_x_net();
        let set = kdtree_extract(&net, &cfg(BoundMethod::Ra(RaVariant::Full), 6, 0.1)).unwrap();
        // Plane x = 0.1 lies inside the x-slab [0, 0.5] of the 4^3 lattice.
        assert_eq!(set.len(), 16);
        assert!(set.cells().iter().all(|c| c[0] == 2));
        assert_eq!(set.counters.bound_queries, set.counters.nodes_visited);
        assert_eq!(set.counters.inr_point_evals, 2 * 25);
        let leaves_and_internal = set.counters.nodes_visited - set.counters.nodes_pruned;
        assert!(leaves_and_internal >= set.len() as u64);
        let kept = set.len() as f64 / 64.0;
        assert!((set.pruned_volume + kept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_keys_round_trip() {
        let net = linear_x_net();
        let l = Lattice::for_depth(&net, 9);
        for idx in [[0, 0, 0], [8, 8, 8], [3, 0, 7]] {
            assert_eq!(l.corner_index(l.corner_key(idx)), idx);
        }
        assert_eq!(l.point([4, 0, 8]), [0.0, -1.0, 1.0]);
    }
}
