use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::affine::RaVariant;
use crate::error::{Error, Result};
use crate::inr::MlpNetwork;
use crate::paf::{ra_ua_estimate, up_output_estimate, GaussianEstimate};
use crate::region::Region;
use crate::special::{erfc, normal_cdf};

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_SAMPLE_K: usize = 100;
const Q_FLOOR: f64 = 1e-300;
const CHUNK: usize = 4096;

/// splitmix64 of `seed` mixed with `stream`: independent, reproducible
/// sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub mean: f64,
    pub std_dev: f64,
}

impl McHistogram {
    /// `bins` equal bins over `[min, max]` of the values. A constant sample
    /// gets the unit-width range centred on its value.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::InvalidArgument("histogram needs samples and at least one bin".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InternalConsistency(format!("non-finite sample value {v}")));
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * (i as f64 / bins as f64))
            .collect();
        edges[bins] = hi;
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            let mid = 0.5 * (lo + hi);
            edges = (0..=bins)
                .map(|i| mid - 0.5 + i as f64 / bins as f64)
                .collect();
        }
        let (e0, en) = (edges[0], edges[bins]);
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = (((v - e0) / (en - e0)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            bin_edges: edges,
            counts,
            n_samples: values.len() as u64,
            mean,
            std_dev: var.sqrt(),
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

fn check_box(net: &MlpNetwork, lower: &[f64], upper: &[f64]) -> Result<()> {
    let dim = net.input_dim();
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "sampling box",
            expected: dim,
            actual: lower.len().min(upper.len()),
        });
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
        return Err(Error::InvalidArgument("sampling box needs finite lower <= upper".into()));
    }
    Ok(())
}

fn uniform_points(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64], n: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n * lower.len());
    for _ in 0..n {
        for (l, u) in lower.iter().zip(upper) {
            pts.push(l + (u - l) * rng.gen::<f64>());
        }
    }
    pts
}

/// Network values at `n` uniform positions in the box. Chunk `c` draws from
/// its own stream, so the result is independent of the thread count.
pub fn sample_values(net: &MlpNetwork, lower: &[f64], upper: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    check_box(net, lower, upper)?;
    let chunks = n.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let pts = uniform_points(&mut rng, lower, upper, len);
            let mut out = vec![0.0; len];
            net.forward_batch(&pts, &mut out)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Monte Carlo histogram of the network over a box with [`DEFAULT_BINS`]
/// bins.
pub fn mc_sample_region(net: &MlpNetwork, lower: &[f64], upper: &[f64], n: usize, seed: u64) -> Result<McHistogram> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one Monte Carlo sample".into()));
    }
    McHistogram::from_values(&sample_values(net, lower, upper, n, seed)?, DEFAULT_BINS)
}

/// Probability mass of N(mu, sigma) on `[a, b]`, taken from the nearer tail.
fn gaussian_mass(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    let upper_tail = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    let m = if za >= 0.0 {
        upper_tail(za) - upper_tail(zb)
    } else {
        normal_cdf(zb) - normal_cdf(za)
    };
    m.max(0.0)
}

/// Discrete KL divergence `sum p log(p / q)` in nats of the histogram from
/// the Gaussian's bin masses.
pub fn kl_divergence(hist: &McHistogram, est: &GaussianEstimate) -> Result<f64> {
    if !(est.sigma > 0.0) {
        return Err(Error::UndefinedDivergence);
    }
    let n = hist.n_samples as f64;
    let mut kl = 0.0;
    let mut floored = 0;
    for (b, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = c as f64 / n;
        let mut q = gaussian_mass(hist.bin_edges[b], hist.bin_edges[b + 1], est.mu, est.sigma);
        if q < Q_FLOOR {
            q = Q_FLOOR;
            floored += 1;
        }
        kl += p * (p / q).ln();
    }
    if floored > 0 {
        log::debug!("KL: {floored} bins had their Gaussian mass floored at {Q_FLOOR:e}");
    }
    Ok(kl)
}

/// The SAMPLE baseline: mean and unbiased standard deviation of `k` values
/// at uniform positions.
pub fn sample_gaussian_baseline(
    net: &MlpNetwork,
    lower: &[f64],
    upper: &[f64],
    k: usize,
    seed: u64,
) -> Result<GaussianEstimate> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("SAMPLE baseline needs k >= 2, got {k}")));
    }
    check_box(net, lower, upper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = uniform_points(&mut rng, lower, upper, k);
    let mut vals = vec![0.0; k];
    net.forward_batch(&pts, &mut vals)?;
    let mean = vals.iter().sum::<f64>() / k as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    GaussianEstimate::new(mean, var.sqrt())
}

/// Random axis-aligned box inside the network domain whose side along each
/// axis is `fraction` of the domain extent.
pub fn random_block(net: &MlpNetwork, fraction: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (net.domain_lower(), net.domain_upper());
    let mut lower = Vec::with_capacity(lo.len());
    let mut upper = Vec::with_capacity(lo.len());
    for d in 0..lo.len() {
        let side = (hi[d] - lo[d]) * fraction;
        let start = lo[d] + (hi[d] - lo[d] - side) * rng.gen::<f64>();
        lower.push(start);
        upper.push(start + side);
    }
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistConfig {
    pub blocks: usize,
    pub samples: usize,
    pub sample_k: usize,
    pub seed: u64,
    /// Block side as a fraction of the domain extent.
    pub block_fraction: f64,
    pub variant: RaVariant,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self {
            blocks: 100,
            samples: 1_000_000,
            sample_k: DEFAULT_SAMPLE_K,
            seed: 0,
            block_fraction: 0.125,
            variant: RaVariant::Full,
        }
    }
}

impl DistConfig {
    pub fn validate(&self, net: &MlpNetwork) -> Result<()> {
        if self.blocks == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("blocks and samples must be positive".into()));
        }
        if self.sample_k < 2 {
            return Err(Error::InvalidArgument(format!("sample k must be >= 2, got {}", self.sample_k)));
        }
        if !(self.block_fraction > 0.0 && self.block_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "block fraction must be in (0, 1], got {}",
                self.block_fraction
            )));
        }
        self.variant.validate(net.input_dim())
    }
}

/// Estimators compared against the Monte Carlo histogram, in report order.
pub const DIST_METHODS: [&str; 3] = ["up", "ra-ua", "sample"];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mc_mean: f64,
    pub mc_std: f64,
    /// UP, RA-UA, SAMPLE estimates.
    pub estimates: [GaussianEstimate; 3],
    /// KL of the histogram from each estimate; `None` where the estimate has
    /// zero spread.
    pub kl: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistReport {
    pub blocks: Vec<BlockReport>,
}

impl DistReport {
    /// Mean KL of method `m` over blocks where it is defined.
    pub fn mean_kl(&self, m: usize) -> Option<f64> {
        let vals: Vec<f64> = self.blocks.iter().filter_map(|b| b.kl[m]).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn defined_count(&self, m: usize) -> usize {
        self.blocks.iter().filter(|b| b.kl[m].is_some()).count()
    }
}

fn kl_or_none(hist: &McHistogram, est: &GaussianEstimate) -> Result<Option<f64>> {
    match kl_divergence(hist, est) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedDivergence) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The block study: random blocks, a Monte Carlo histogram per block, and
/// KL divergences of the UP, RA-UA and SAMPLE estimates from it.
pub fn eval_blocks(net: &MlpNetwork, config: &DistConfig) -> Result<DistReport> {
    config.validate(net)?;
    let mut blocks = Vec::with_capacity(config.blocks);
    for b in 0..config.blocks as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 3 * b));
        let (lower, upper) = random_block(net, config.block_fraction, &mut rng);
        let hist = mc_sample_region(net, &lower, &upper, config.samples, derive_seed(config.seed, 3 * b + 1))?;
        let region = Region::from_box(&lower, &upper)?;
        let estimates = [
            up_output_estimate(net, &region)?,
            ra_ua_estimate(net, &region, config.variant)?,
            sample_gaussian_baseline(net, &lower, &upper, config.sample_k, derive_seed(config.seed, 3 * b + 2))?,
        ];
        let kl = [
            kl_or_none(&hist, &estimates[0])?,
            kl_or_none(&hist, &estimates[1])?,
            kl_or_none(&hist, &estimates[2])?,
        ];
        log::debug!("block {b}: kl {kl:?}");
        blocks.push(BlockReport {
            lower,
            upper,
            mc_mean: hist.mean,
            mc_std: hist.std_dev,
            estimates,
            kl,
        });
    }
    Ok(DistReport { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{Activation, LinearLayer};

    fn affine_net(w: [f64; 3], b: f64) -> MlpNetwork {
        MlpNetwork::new(
            vec![LinearLayer::new(1, 3, w.to_vec(), vec![b]).unwrap()],
            Activation::Relu,
            3,
            1,
            vec![0.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let th = 2.0 * std::f64::consts::PI * u2;
            out.push(r * th.cos());
            out.push(r * th.sin());
        }
        out.truncate(n);
        out
    }

    #[test]
    fn constant_net_fills_one_bin() {
        let net = affine_net([0.0; 3], 2.5);
        let h = mc_sample_region(&net, &[0.0; 3], &[1.0; 3], 1000, 1).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn linear_field_histogram_is_flat() {
        // inputs are normalised to [-1, 1], so this is f = x on the unit cube
        let net = affine_net([0.5, 0.0, 0.0], 0.5);
        let h = mc_sample_region(&net, &[0.0; 3], &[1.0; 3], 1_000_000, 9).unwrap();
        let expected = h.n_samples as f64 / h.bins() as f64;
        let chi2: f64 = h.counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Wilson-Hilferty upper tail probability for 63 degrees of freedom
        let k = (h.bins() - 1) as f64;
        let z = ((chi2 / k).cbrt() - (1.0 - 2.0 / (9.0 * k))) / (2.0 / (9.0 * k)).sqrt();
        let p = 1.0 - normal_cdf(z);
        assert!(p > 0.001, "chi2 {chi2}, p {p}");
    }

    #[test]
    fn sampling_is_thread_count_independent() {
        let net = affine_net([0.3, -0.7, 1.1], 0.2);
        let a = sample_values(&net, &[0.1; 3], &[0.9; 3], 10_000, 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| sample_values(&net, &[0.1; 3], &[0.9; 3], 10_000, 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn kl_self_consistency_and_shift() {
        let vals = standard_normals(1_000_000, 11);
        let h = McHistogram::from_values(&vals, DEFAULT_BINS).unwrap();
        let same = kl_divergence(&h, &GaussianEstimate::new(0.0, 1.0).unwrap()).unwrap();
        assert!(same >= -1e-12 && same < 0.01, "{same}");
        let shifted = kl_divergence(&h, &GaussianEstimate::new(5.0, 1.0).unwrap()).unwrap();
        assert!((shifted - 12.5).abs() < 0.05 * 12.5, "{shifted}");
        assert!(matches!(
            kl_divergence(&h, &GaussianEstimate::new(0.0, 0.0).unwrap()),
            Err(Error::UndefinedDivergence)
        ));
    }

    #[test]
    fn kl_far_estimate_is_finite() {
        let h = McHistogram::from_values(&standard_normals(1000, 2), 16).unwrap();
        let kl = kl_divergence(&h, &GaussianEstimate::new(1e3, 1e-3).unwrap()).unwrap();
        assert!(kl.is_finite() && kl > 100.0);
    }

    #[test]
    fn sample_baseline_examples() {
        let net = affine_net([0.0; 3], -1.5);
        let e = sample_gaussian_baseline(&net, &[0.0; 3], &[1.0; 3], 100, 3).unwrap();
        assert_eq!((e.mu, e.sigma), (-1.5, 0.0));
        assert!(sample_gaussian_baseline(&net, &[0.0; 3], &[1.0; 3], 1, 3).is_err());

        // f = x on [0,1]: mean 1/2, sd 1/sqrt(12)
        let net = affine_net([0.5, 0.0, 0.0], 0.5);
        let e = sample_gaussian_baseline(&net, &[0.0; 3], &[1.0; 3], 100, 8).unwrap();
        let sd = 1.0 / 12f64.sqrt();
        assert!((e.mu - 0.5).abs() < 4.0 * sd / 10.0);
        assert!((e.sigma - sd).abs() < 4.0 * sd / (2.0 * 99f64).sqrt() * 1.2);
    }

    #[test]
    fn blocks_stay_in_domain() {
        let net = affine_net([0.5, 0.0, 0.0], 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let (lo, hi) = random_block(&net, 0.125, &mut rng);
            for d in 0..3 {
                assert!(lo[d] >= 0.0 && hi[d] <= 1.0 + 1e-15);
                assert!((hi[d] - lo[d] - 0.125).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_study_on_linear_net() {
        let net = affine_net([0.5, 0.25, 0.0], 0.0);
        let cfg = DistConfig { blocks: 3, samples: 20_000, ..DistConfig::default() };
        let r = eval_blocks(&net, &cfg).unwrap();
        assert_eq!(r.blocks.len(), 3);
        for b in &r.blocks {
            assert!(b.kl.iter().all(|k| k.is_some()));
        }
        assert_eq!(r, eval_blocks(&net, &cfg).unwrap());
        assert!(r.mean_kl(0).unwrap() >= 0.0);
    }

    #[test]
    fn derive_seed_spreads() {
        let a = derive_seed(0, 0);
        let b = derive_seed(0, 1);
        let c = derive_seed(1, 0);
        assert!(a != b && a != c && b != c);
    }
}
