//! The `nira` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::affine::RaVariant;
use crate::error::{Error, Result};
use crate::eval::{
    bench_extraction, eval_blocks, psnr_report_value, score_cells, DistConfig, SyntheticField, DEFAULT_BINS,
    DIST_METHODS, PSNR_SENTINEL,
};
use crate::extract::{
    kdtree_extract, marching_cubes, raycast, true_active_cells, write_pgm, BoundMethod, Camera, ExtractConfig,
    RaycastConfig,
};
use crate::inr::{load_network, save_network, train, Activation, MlpNetwork, ScalarVolume, TrainConfig};
use crate::stats::{fmt_f64, Stats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nira", version, about = "Range bounds and iso-surface extraction for MLP implicit neural representations")]
struct Cli {
    /// Worker threads; outputs do not depend on this [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic field to a raw f32 volume
    Synth(SynthArgs),
    /// Fit a network to a raw f32 volume
    Train(TrainArgs),
    /// Predict active cells and extract an iso surface as OBJ
    Extract(ExtractArgs),
    /// Render a depth image of the iso surface as 16-bit PGM
    Raycast(RaycastArgs),
    /// KL divergence of UP, RA-UA and SAMPLE estimates on random blocks
    EvalDist(EvalDistArgs),
    /// Phase timings, costs and pruning per bound method
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// gaussians[:SEED], wave, sphere or torus
    #[arg(long)]
    field: SyntheticField,
    /// Samples per axis over [-1, 1]^3
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
    /// Stats file [default: <out>.stats]
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Raw little-endian f32 volume, x fastest
    #[arg(long)]
    volume: PathBuf,
    /// Volume dimensions NX,NY,NZ (or one value for a cube)
    #[arg(long, value_parser = parse_dims)]
    dims: [usize; 3],
    /// Output weight file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    width: usize,
    /// Number of linear layers
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// sine, relu or elu
    #[arg(long, default_value = "sine")]
    activation: Activation,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    /// Learning-rate multiplier reached at the last epoch
    #[arg(long, default_value_t = 0.1)]
    final_lr_factor: f64,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// SIREN first-layer frequency
    #[arg(long, default_value_t = 30.0)]
    omega0: f64,
    #[arg(long, value_parser = parse_vec3, default_value = "-1,-1,-1", allow_hyphen_values = true)]
    domain_lower: [f64; 3],
    #[arg(long, value_parser = parse_vec3, default_value = "1,1,1", allow_hyphen_values = true)]
    domain_upper: [f64; 3],
    /// Stats file [default: <out>.stats]
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// up, ra-full, ra-fixed, ra-truncate, ra-append, ra-ua or dense
    #[arg(long, default_value = "up")]
    method: String,
    /// Soft-bound width in standard deviations (up, ra-ua)
    #[arg(long, default_value_t = 5.0)]
    t: f64,
    /// Symbols kept by ra-truncate [default: input_dim + 16]
    #[arg(long)]
    truncate_k: Option<usize>,
    /// Symbol budget of ra-append [default: input_dim + 16]
    #[arg(long)]
    append_budget: Option<usize>,
}

impl MethodArgs {
    fn resolve(&self, net: &MlpNetwork) -> Result<BoundMethod> {
        let (k, b) = variant_params(net, self.truncate_k, self.append_budget);
        BoundMethod::parse(&self.method, k, b)
    }
}

fn variant_params(net: &MlpNetwork, k: Option<usize>, b: Option<usize>) -> (usize, usize) {
    let d = RaVariant::default_budget(net.input_dim());
    (k.unwrap_or(d), b.unwrap_or(d))
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Output OBJ mesh
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    /// Tree depth, a multiple of 3 (2^(depth/3) cells per axis)
    #[arg(long, default_value_t = 9)]
    depth: u32,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    iso: f64,
    /// Also classify cells on the dense corner grid and report FPR/FNR
    #[arg(long)]
    truth: bool,
    /// Stats file [default: <out>.stats]
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RaycastArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Output 16-bit PGM depth image
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    iso: f64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,2.5", allow_hyphen_values = true)]
    camera: [f64; 3],
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    look_at: [f64; 3],
    #[arg(long, value_parser = parse_vec3, default_value = "0,1,0", allow_hyphen_values = true)]
    up: [f64; 3],
    /// Vertical field of view in degrees
    #[arg(long, default_value_t = 45.0)]
    fov: f64,
    /// Largest ray parameter [default: camera distance to the domain center plus its half diagonal]
    #[arg(long)]
    s_max: Option<f64>,
    /// Shortest ray segment that is still split [default: s_max / 16384]
    #[arg(long)]
    min_segment: Option<f64>,
    /// Stats file [default: <out>.stats]
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalDistArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Output stats report
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    /// Monte Carlo samples per block
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Samples for the SAMPLE baseline
    #[arg(long, default_value_t = 100)]
    sample_k: usize,
    /// Block side as a fraction of the domain extent
    #[arg(long, default_value_t = 0.125)]
    block_fraction: f64,
    /// Range-analysis variant underlying RA-UA
    #[arg(long, default_value = "full")]
    variant: RaVariant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Output stats report
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated methods
    #[arg(long, value_delimiter = ',', default_value = "up,ra-full,ra-fixed,ra-ua,dense")]
    methods: Vec<String>,
    /// Run all seven methods
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 5.0)]
    t: f64,
    #[arg(long, default_value_t = 9)]
    depth: u32,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    iso: f64,
    #[arg(long)]
    truncate_k: Option<usize>,
    #[arg(long)]
    append_budget: Option<usize>,
}

fn parse_list<const N: usize, T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N && !(parts.len() == 1 && N == 3) {
        return Err(format!("expected {N} comma-separated values, got '{s}'"));
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|_| format!("bad number '{p}'")))
        .collect()
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = parse_list::<3, f64>(s)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("non-finite component in '{s}'"));
    }
    Ok(if v.len() == 1 { [v[0]; 3] } else { [v[0], v[1], v[2]] })
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = parse_list::<3, usize>(s)?;
    Ok(if v.len() == 1 { [v[0]; 3] } else { [v[0], v[1], v[2]] })
}

fn stats_path(explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".stats");
        PathBuf::from(s)
    })
}

fn vec3_str(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn push_method(stats: &mut Stats, method: BoundMethod, t: f64) {
    stats.push("method", method.name());
    match method {
        BoundMethod::Ra(v) | BoundMethod::RaUa(v) => {
            stats.push("ra_variant", v.name());
            if let Some(p) = v.parameter() {
                stats.push("ra_variant_parameter", p);
            }
        }
        _ => {}
    }
    if method.uses_t() {
        stats.push_f64("t", t);
    }
}

fn push_network(stats: &mut Stats, path: &Path, net: &MlpNetwork) {
    stats.push_str("weights", &path.display().to_string());
    stats.push("activation", net.activation());
    stats.push("layers", net.layers().len());
    stats.push("max_width", net.max_width());
    stats.push_str("domain_lower", &vec3_str(net.domain_lower()));
    stats.push_str("domain_upper", &vec3_str(net.domain_upper()));
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TrainingDiverged { .. }
        | Error::InternalConsistency(_)
        | Error::UndefinedPsnr
        | Error::UndefinedDivergence => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    let result = match cli.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} threads: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Raycast(a) => cmd_raycast(a),
        Command::EvalDist(a) => cmd_eval_dist(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.resolution < 2 {
        return Err(Error::InvalidArgument("--resolution must be at least 2".into()));
    }
    let volume = a.field.sample(a.resolution)?;
    volume.write_raw(&a.out)?;
    let (lo, hi) = volume.min_max();
    let mut stats = Stats::new("synth");
    stats.push("field", a.field);
    stats.push("resolution", a.resolution);
    stats.push_str("out", &a.out.display().to_string());
    stats.push_f64("value_min", lo);
    stats.push_f64("value_max", hi);
    stats.write(stats_path(&a.stats, &a.out))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        width: a.width,
        depth: a.depth,
        activation: a.activation,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        final_lr_factor: a.final_lr_factor,
        batch_size: a.batch_size,
        seed: a.seed,
        omega0: a.omega0,
        domain_lower: a.domain_lower,
        domain_upper: a.domain_upper,
    };
    let volume = ScalarVolume::read_raw(&a.volume, a.dims)?;
    log::info!("training {}x{} {} network on {:?}", cfg.depth, cfg.width, cfg.activation, a.dims);
    let (net, report) = train(&volume, &cfg)?;
    save_network(&net, &a.out)?;

    let mut stats = Stats::new("train");
    stats.push_str("volume", &a.volume.display().to_string());
    stats.push_str("dims", &format!("{},{},{}", a.dims[0], a.dims[1], a.dims[2]));
    stats.push_str("out", &a.out.display().to_string());
    stats.push("width", cfg.width);
    stats.push("depth", cfg.depth);
    stats.push("activation", cfg.activation);
    stats.push("epochs", cfg.epochs);
    stats.push_f64("learning_rate", cfg.learning_rate);
    stats.push_f64("final_lr_factor", cfg.final_lr_factor);
    stats.push("batch_size", cfg.batch_size);
    stats.push("seed", cfg.seed);
    stats.push_f64("omega0", cfg.omega0);
    stats.push_str("domain_lower", &vec3_str(&cfg.domain_lower));
    stats.push_str("domain_upper", &vec3_str(&cfg.domain_upper));
    stats.push_f64("final_loss", report.final_loss);
    stats.push_f64("rmse", report.rmse);
    match report.psnr {
        Some(p) => stats.push_f64("psnr_db", psnr_report_value(p)),
        // zero value range: exact fit gets the sentinel, anything else is undefined
        None if report.rmse == 0.0 => stats.push_f64("psnr_db", PSNR_SENTINEL),
        None => stats.push_str("psnr_db", "undefined"),
    }
    stats.write(stats_path(&a.stats, &a.out))
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let net = load_network(&a.weights)?;
    let method = a.method.resolve(&net)?;
    let cfg = ExtractConfig { iso_value: a.iso, max_depth: a.depth, t: a.method.t, method };
    cfg.validate(&net)?;

    log::info!("predicting active cells with {method}");
    let cells = kdtree_extract(&net, &cfg)?;
    log::info!("{} active cells, meshing", cells.len());
    let out = marching_cubes(&net, &cells, a.iso)?;
    crate::extract::export_obj(&out.mesh, &a.out)?;

    let mut stats = Stats::new("extract");
    push_network(&mut stats, &a.weights, &net);
    push_method(&mut stats, method, a.method.t);
    stats.push("depth", a.depth);
    stats.push("cells_per_axis", cells.lattice().cells_per_axis());
    stats.push_f64("iso", a.iso);
    stats.push_str("out", &a.out.display().to_string());
    stats.push("nodes_visited", cells.counters.nodes_visited);
    stats.push("bound_queries", cells.counters.bound_queries);
    stats.push("nodes_pruned", cells.counters.nodes_pruned);
    stats.push("inr_point_evals", cells.counters.inr_point_evals);
    stats.push("active_cells", cells.len());
    stats.push_f64("pruned_volume", cells.pruned_volume);
    stats.push_f64("mean_pruned_volume", cells.mean_pruned_volume());
    stats.push("iso_outside_range", cells.iso_outside_range);
    stats.push("vertices", out.mesh.vertices().len());
    stats.push("triangles", out.mesh.triangles().len());
    stats.push("watertight", out.mesh.is_watertight());
    stats.push_f64("area", out.mesh.area());
    if a.truth {
        let truth = true_active_cells(&net, &ExtractConfig { method: BoundMethod::Dense, ..cfg })?;
        let s = score_cells(&cells, &truth)?;
        stats.push("true_active_cells", truth.len());
        stats.push("tp", s.tp);
        stats.push("fp", s.fp);
        stats.push("tn", s.tn);
        stats.push("fn", s.fn_);
        stats.push_f64("fpr", s.fpr);
        stats.push_f64("fnr", s.fnr);
    }
    stats.write(stats_path(&a.stats, &a.out))
}

fn default_s_max(net: &MlpNetwork, origin: [f64; 3]) -> f64 {
    let (lo, hi) = (net.domain_lower(), net.domain_upper());
    let mut to_center = 0.0;
    let mut half_diag = 0.0;
    for d in 0..3 {
        to_center += (origin[d] - 0.5 * (lo[d] + hi[d])).powi(2);
        half_diag += (0.5 * (hi[d] - lo[d])).powi(2);
    }
    to_center.sqrt() + half_diag.sqrt()
}

fn cmd_raycast(a: RaycastArgs) -> Result<()> {
    let net = load_network(&a.weights)?;
    if net.input_dim() != 3 {
        return Err(Error::InvalidArgument("ray casting needs a 3-D network".into()));
    }
    let method = a.method.resolve(&net)?;
    let s_max = a.s_max.unwrap_or_else(|| default_s_max(&net, a.camera));
    let cfg = RaycastConfig {
        width: a.width,
        height: a.height,
        method,
        t: a.method.t,
        iso_value: a.iso,
        s_max,
        min_segment: a.min_segment,
    };
    let camera = Camera { origin: a.camera, look_at: a.look_at, up: a.up, fov_y_deg: a.fov };
    if let BoundMethod::Ra(v) | BoundMethod::RaUa(v) = method {
        v.validate(net.input_dim())?;
    }
    log::info!("ray casting {}x{} with {method}", a.width, a.height);
    let out = raycast(&net, &camera, &cfg)?;
    write_pgm(&out.image, s_max, &a.out)?;

    let mut stats = Stats::new("raycast");
    push_network(&mut stats, &a.weights, &net);
    push_method(&mut stats, method, a.method.t);
    stats.push_f64("iso", a.iso);
    stats.push("width", a.width);
    stats.push("height", a.height);
    stats.push_str("camera", &vec3_str(&a.camera));
    stats.push_str("look_at", &vec3_str(&a.look_at));
    stats.push_str("up", &vec3_str(&a.up));
    stats.push_f64("fov_deg", a.fov);
    stats.push_f64("s_max", s_max);
    stats.push_f64("min_segment", cfg.min_segment_length());
    stats.push_str("out", &a.out.display().to_string());
    stats.push("hits", out.image.hit_count());
    stats.push("bound_queries", out.counters.bound_queries);
    stats.push("point_evals", out.counters.point_evals);
    stats.write(stats_path(&a.stats, &a.out))
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), fmt_f64)
}

fn cmd_eval_dist(a: EvalDistArgs) -> Result<()> {
    let net = load_network(&a.weights)?;
    let cfg = DistConfig {
        blocks: a.blocks,
        samples: a.samples,
        sample_k: a.sample_k,
        seed: a.seed,
        block_fraction: a.block_fraction,
        variant: a.variant,
    };
    cfg.validate(&net)?;
    log::info!("{} blocks x {} samples", cfg.blocks, cfg.samples);
    let report = eval_blocks(&net, &cfg)?;

    let mut stats = Stats::new("eval-dist");
    push_network(&mut stats, &a.weights, &net);
    stats.push("blocks", cfg.blocks);
    stats.push("samples", cfg.samples);
    stats.push("sample_k", cfg.sample_k);
    stats.push_f64("block_fraction", cfg.block_fraction);
    stats.push("ra_ua_variant", cfg.variant);
    stats.push("seed", cfg.seed);
    stats.push("bins", DEFAULT_BINS);
    stats.push_str("bin_range", "sample-min-max");
    for (m, name) in DIST_METHODS.iter().enumerate() {
        let key = format!("mean_kl_{}", name.replace('-', "_"));
        stats.push_str(&key, &opt_f64(report.mean_kl(m)));
        stats.push(&format!("defined_{}", name.replace('-', "_")), report.defined_count(m));
    }
    let kl_rows = report
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut row = vec![i.to_string()];
            row.extend(b.kl.iter().map(|k| opt_f64(*k)));
            row
        })
        .collect();
    stats.push_table("kl", &["block", "up", "ra-ua", "sample"], kl_rows)?;
    let est_rows = report
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut row = vec![i.to_string(), vec3_str(&b.lower), vec3_str(&b.upper)];
            row.push(fmt_f64(b.mc_mean));
            row.push(fmt_f64(b.mc_std));
            for e in &b.estimates {
                row.push(fmt_f64(e.mu));
                row.push(fmt_f64(e.sigma));
            }
            row
        })
        .collect();
    stats.push_table(
        "estimates",
        &[
            "block", "lower", "upper", "mc_mean", "mc_std", "up_mu", "up_sigma", "ra_ua_mu", "ra_ua_sigma",
            "sample_mu", "sample_sigma",
        ],
        est_rows,
    )?;
    stats.write(&a.out)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let net = load_network(&a.weights)?;
    let (k, b) = variant_params(&net, a.truncate_k, a.append_budget);
    let methods: Vec<BoundMethod> = if a.all {
        BoundMethod::NAMES.iter().map(|m| BoundMethod::parse(m, k, b)).collect::<Result<_>>()?
    } else {
        a.methods.iter().map(|m| BoundMethod::parse(m.trim(), k, b)).collect::<Result<_>>()?
    };
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to benchmark".into()));
    }
    let base = ExtractConfig { iso_value: a.iso, max_depth: a.depth, t: a.t, method: BoundMethod::Up };
    for &m in &methods {
        ExtractConfig { method: m, ..base }.validate(&net)?;
    }
    let unit = crate::eval::single_eval_seconds(&net, 1 << 14)?;
    let rows = bench_extraction(&net, &methods, &base)?;

    let mut stats = Stats::new("bench");
    push_network(&mut stats, &a.weights, &net);
    stats.push("depth", a.depth);
    stats.push_f64("iso", a.iso);
    stats.push_f64("t", a.t);
    stats.push("truncate_k", k);
    stats.push("append_budget", b);
    stats.push_f64("unit_eval_seconds", unit);
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                fmt_f64(r.timings.acp_seconds),
                fmt_f64(r.timings.inr_seconds),
                fmt_f64(r.timings.mc_seconds),
                fmt_f64(r.timings.relative_inference_cost),
                r.bound_queries.to_string(),
                r.inr_point_evals.to_string(),
                r.active_cells.to_string(),
                r.nodes_pruned.to_string(),
                fmt_f64(r.mean_pruned_volume),
                r.triangles.to_string(),
            ]
        })
        .collect();
    stats.push_table(
        "phases",
        &[
            "method",
            "acp_seconds",
            "inr_seconds",
            "mc_seconds",
            "relative_cost",
            "bound_queries",
            "inr_point_evals",
            "active_cells",
            "nodes_pruned",
            "mean_pruned_volume",
            "triangles",
        ],
        table,
    )?;
    let cost = |name: &str| {
        rows.iter()
            .find(|r| r.method.name() == name)
            .map(|r| r.timings.relative_inference_cost)
    };
    let order = match (cost("ra-fixed"), cost("up"), cost("ra-full")) {
        (Some(f), Some(u), Some(r)) if f < u && u < r => "holds",
        (Some(_), Some(_), Some(_)) => "violated",
        _ => "not-measured",
    };
    stats.push("relative_cost_order_ra_fixed_lt_up_lt_ra_full", order);
    stats.write(&a.out)
}
