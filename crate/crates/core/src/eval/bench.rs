use std::time::Instant;

use crate::error::{Error, Result};
use crate::extract::{
    active_cells_from_grid, corner_grid, corner_values_from_grid, evaluate_corners, kdtree_extract,
    triangulate, BoundMethod, ExtractConfig, Lattice,
};
use crate::inr::MlpNetwork;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    /// Active cell prediction.
    pub acp_seconds: f64,
    /// Network evaluation at the corners that are meshed.
    pub inr_seconds: f64,
    /// Triangulation.
    pub mc_seconds: f64,
    /// Time per bound query over the time of one network evaluation.
    pub relative_inference_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: BoundMethod,
    pub timings: PhaseTimings,
    pub bound_queries: u64,
    pub inr_point_evals: u64,
    pub active_cells: usize,
    pub nodes_pruned: u64,
    pub pruned_volume: f64,
    pub mean_pruned_volume: f64,
    pub triangles: usize,
}

/// Per-point cost of a batched network evaluation, measured over `points`
/// lattice-spread positions after one warm-up pass.
pub fn single_eval_seconds(net: &MlpNetwork, points: usize) -> Result<f64> {
    if points == 0 {
        return Err(Error::InvalidArgument("need at least one timing point".into()));
    }
    let dim = net.input_dim();
    let (lo, hi) = (net.domain_lower(), net.domain_upper());
    let mut pts = Vec::with_capacity(points * dim);
    for p in 0..points {
        for d in 0..dim {
            // low-discrepancy fill of the domain
            let u = ((p as f64 + 0.5) * (0.618_033_988_749_895 + d as f64 * 0.414_213_562_373_095)).fract();
            pts.push(lo[d] + (hi[d] - lo[d]) * u);
        }
    }
    let mut out = vec![0.0; points];
    net.forward_batch(&pts, &mut out)?;
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        net.forward_batch(&pts, &mut out)?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best / points as f64)
}

const TIMING_RUNS: usize = 3;

/// Result of `f` and its fastest wall time over [`TIMING_RUNS`] runs.
fn best_of<T>(mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut best = f64::INFINITY;
    let mut value = None;
    for _ in 0..TIMING_RUNS {
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        value = Some(v);
    }
    Ok((value.expect("at least one timing run"), best))
}

/// Times each method's extraction phases on one thread, best of three runs
/// per phase.
pub fn bench_extraction(net: &MlpNetwork, methods: &[BoundMethod], base: &ExtractConfig) -> Result<Vec<BenchRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InternalConsistency(format!("cannot build timing thread pool: {e}")))?;
    pool.install(|| {
        let unit = single_eval_seconds(net, 1 << 14)?;
        methods
            .iter()
            .map(|&method| bench_one(net, &ExtractConfig { method, ..*base }, unit))
            .collect()
    })
}

fn bench_one(net: &MlpNetwork, config: &ExtractConfig, unit: f64) -> Result<BenchRow> {
    config.validate(net)?;
    let (cells, corners, acp, inr) = if config.method == BoundMethod::Dense {
        let lattice = Lattice::for_depth(net, config.max_depth);
        let (grid, inr) = best_of(|| corner_grid(net, &lattice))?;
        let (cells, acp) = best_of(|| active_cells_from_grid(lattice.clone(), &grid, config.iso_value))?;
        let corners = corner_values_from_grid(&grid, &cells)?;
        (cells, corners, acp, inr)
    } else {
        let (cells, acp) = best_of(|| kdtree_extract(net, config))?;
        let (corners, inr) = best_of(|| evaluate_corners(net, &cells))?;
        (cells, corners, acp, inr)
    };
    let (mesh, mc) = best_of(|| triangulate(&cells, &corners, config.iso_value))?;

    let queries = match config.method {
        BoundMethod::Dense => 0,
        _ => cells.counters.bound_queries,
    };
    let relative = if queries == 0 || unit <= 0.0 {
        0.0
    } else {
        acp / queries as f64 / unit
    };
    Ok(BenchRow {
        method: config.method,
        timings: PhaseTimings {
            acp_seconds: acp,
            inr_seconds: inr,
            mc_seconds: mc,
            relative_inference_cost: relative,
        },
        bound_queries: queries,
        inr_point_evals: cells.counters.inr_point_evals,
        active_cells: cells.len(),
        nodes_pruned: cells.counters.nodes_pruned,
        pruned_volume: cells.pruned_volume,
        mean_pruned_volume: cells.mean_pruned_volume(),
        triangles: mesh.mesh.triangles().len(),
    })
}
