//! Evaluation: Monte Carlo distribution oracle and KL divergence, FPR/FNR
//! scoring, PSNR, phase timings, and the synthetic test fields.

mod bench;
mod dist;
mod fields;
mod score;

pub use bench::{bench_extraction, single_eval_seconds, BenchRow, PhaseTimings};
pub use dist::{
    derive_seed, eval_blocks, kl_divergence, mc_sample_region, random_block, sample_gaussian_baseline,
    sample_values, BlockReport, DistConfig, DistReport, McHistogram, DEFAULT_BINS, DEFAULT_SAMPLE_K,
    DIST_METHODS,
};
pub use fields::{SyntheticField, SPHERE_RADIUS, TORUS_MAJOR, TORUS_MINOR};
pub use score::{psnr, psnr_report_value, score_cells, CellScore, PSNR_SENTINEL};
