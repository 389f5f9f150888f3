//! Toy-scale trainer: mini-batch Adam on the mean squared error over grid
//! samples, with hand-written backpropagation for the three activations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::psnr;
use crate::region::lattice_coord;

use super::{Activation, LinearLayer, MlpNetwork, ScalarVolume};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub width: usize,
    /// Number of linear layers.
    pub depth: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplier reached by the exponentially decayed learning rate at the
    /// last epoch.
    pub final_lr_factor: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// SIREN first-layer frequency; folded into the exported weights.
    pub omega0: f64,
    pub domain_lower: [f64; 3],
    pub domain_upper: [f64; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            width: 32,
            depth: 8,
            activation: Activation::Sine,
            epochs: 60,
            learning_rate: 1e-4,
            final_lr_factor: 0.1,
            batch_size: 1024,
            seed: 0,
            omega0: 30.0,
            domain_lower: [-1.0; 3],
            domain_upper: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean squared error in normalised units over the final epoch.
    pub final_loss: f64,
    /// RMSE of the exported network over the training grid, data units.
    pub rmse: f64,
    /// `None` when the volume has zero value range.
    pub psnr: Option<f64>,
}

struct Param {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

struct Adam {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &[Param]) -> Self {
        Self {
            m_w: params.iter().map(|p| vec![0.0; p.w.len()]).collect(),
            v_w: params.iter().map(|p| vec![0.0; p.w.len()]).collect(),
            m_b: params.iter().map(|p| vec![0.0; p.b.len()]).collect(),
            v_b: params.iter().map(|p| vec![0.0; p.b.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [Param], grads: &[(Vec<f64>, Vec<f64>)], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (l, p) in params.iter_mut().enumerate() {
            let (gw, gb) = &grads[l];
            adam_step(&mut p.w, gw, &mut self.m_w[l], &mut self.v_w[l], lr, c1, c2);
            adam_step(&mut p.b, gb, &mut self.m_b[l], &mut self.v_b[l], lr, c1, c2);
        }
    }
}

fn adam_step(x: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..x.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        x[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
}

fn init_params(cfg: &TrainConfig, input_dim: usize, rng: &mut ChaCha8Rng) -> Vec<Param> {
    let mut params = Vec::with_capacity(cfg.depth);
    for l in 0..cfg.depth {
        let cols = if l == 0 { input_dim } else { cfg.width };
        let rows = if l + 1 == cfg.depth { 1 } else { cfg.width };
        let fan_in = cols as f64;
        let w_bound = match cfg.activation {
            Activation::Sine if l == 0 => 1.0 / fan_in,
            Activation::Sine => (6.0 / fan_in).sqrt() / cfg.omega0,
            Activation::Relu | Activation::Elu => (6.0 / fan_in).sqrt(),
        };
        let b_bound = 1.0 / fan_in.sqrt();
        let w = (0..rows * cols).map(|_| rng.gen_range(-w_bound..w_bound)).collect();
        let b = (0..rows).map(|_| rng.gen_range(-b_bound..b_bound)).collect();
        params.push(Param { rows, cols, w, b });
    }
    params
}

/// Fit an MLP to `volume`, sampled at its grid vertices over the configured
/// domain. Deterministic for a given config.
pub fn train(volume: &ScalarVolume, cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    if cfg.width < 2 || cfg.depth < 2 {
        return Err(Error::InvalidArgument(format!(
            "width and depth must be at least 2 (got width {}, depth {})",
            cfg.width, cfg.depth
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let dims = volume.dims();
    let input_dim = if dims[2] == 1 { 2 } else { 3 };
    if dims[..input_dim].iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "training volume needs at least 2 samples per axis".into(),
        ));
    }
    for d in 0..input_dim {
        if !(cfg.domain_lower[d] < cfg.domain_upper[d]) {
            return Err(Error::InvalidArgument(format!("domain axis {d} is empty")));
        }
    }

    let (vmin, vmax) = volume.min_max();
    let value_offset = 0.5 * (vmin + vmax);
    let value_scale = 0.5 * (vmax - vmin);
    let targets: Vec<f64> = volume
        .data()
        .iter()
        .map(|&v| if value_scale > 0.0 { (v - value_offset) / value_scale } else { 0.0 })
        .collect();

    // Normalised input coordinates of every grid vertex, exactly as the
    // exported network will compute them.
    let mut coords = Vec::with_capacity(volume.len() * input_dim);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                for (d, idx) in [i, j, k].into_iter().enumerate().take(input_dim) {
                    let (lo, hi) = (cfg.domain_lower[d], cfg.domain_upper[d]);
                    let x = lattice_coord(lo, hi, idx, dims[d] - 1);
                    coords.push((x - 0.5 * (lo + hi)) / (0.5 * (hi - lo)));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_params(cfg, input_dim, &mut rng);
    let mut adam = Adam::new(&params);
    let omega = if cfg.activation == Activation::Sine { cfg.omega0 } else { 1.0 };
    let mut scratch = Scratch::new(&params, cfg.batch_size);
    let mut order: Vec<usize> = (0..volume.len()).collect();
    let mut final_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        let progress = epoch as f64 / cfg.epochs as f64;
        let lr = cfg.learning_rate * cfg.final_lr_factor.powf(progress);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = scratch.step(&params, cfg.activation, omega, &coords, &targets, batch, input_dim);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            adam.update(&mut params, &scratch.grads, lr);
        }
        final_loss = loss_sum / order.len() as f64;
        log::debug!("epoch {epoch}: loss {final_loss:.3e}");
    }

    let layers = params
        .into_iter()
        .enumerate()
        .map(|(l, p)| {
            let s = if l == 0 { omega } else { 1.0 };
            let w = p.w.iter().map(|v| v * s).collect();
            let b = p.b.iter().map(|v| v * s).collect();
            LinearLayer::new(p.rows, p.cols, w, b)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Validation(_) => Error::TrainingDiverged { epoch: cfg.epochs },
            other => other,
        })?;
    let net = MlpNetwork::new(
        layers,
        cfg.activation,
        input_dim,
        1,
        cfg.domain_lower[..input_dim].to_vec(),
        cfg.domain_upper[..input_dim].to_vec(),
        value_scale,
        value_offset,
    )?;

    let recon = net.dense_reconstruct(dims)?;
    let mse = recon
        .data()
        .iter()
        .zip(volume.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / volume.len() as f64;
    let report = TrainReport {
        epochs: cfg.epochs,
        final_loss,
        rmse: mse.sqrt(),
        psnr: psnr(volume, &recon).ok(),
    };
    Ok((net, report))
}

/// Per-batch activations and gradients, laid out `[unit][sample]`.
struct Scratch {
    batch: usize,
    /// `acts[l]` is the input to layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    grads: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Scratch {
    fn new(params: &[Param], batch: usize) -> Self {
        let width = params.iter().map(|p| p.rows.max(p.cols)).max().unwrap_or(1);
        Self {
            batch,
            acts: params.iter().map(|p| vec![0.0; p.cols * batch]).collect(),
            pre: params.iter().map(|p| vec![0.0; p.rows * batch]).collect(),
            delta: vec![0.0; width * batch],
            delta_prev: vec![0.0; width * batch],
            grads: params
                .iter()
                .map(|p| (vec![0.0; p.w.len()], vec![0.0; p.b.len()]))
                .collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        params: &[Param],
        act: Activation,
        omega: f64,
        coords: &[f64],
        targets: &[f64],
        batch: &[usize],
        input_dim: usize,
    ) -> f64 {
        let n = batch.len();
        let bs = self.batch;
        for (p, &s) in batch.iter().enumerate() {
            for d in 0..input_dim {
                self.acts[0][d * bs + p] = coords[s * input_dim + d];
            }
        }
        let last = params.len() - 1;
        for (l, prm) in params.iter().enumerate() {
            let scale = if l == 0 { omega } else { 1.0 };
            for r in 0..prm.rows {
                let z = &mut self.pre[l][r * bs..r * bs + n];
                z.fill(prm.b[r]);
                for c in 0..prm.cols {
                    let w = prm.w[r * prm.cols + c];
                    let a = &self.acts[l][c * bs..c * bs + n];
                    for (zi, ai) in z.iter_mut().zip(a) {
                        *zi += w * ai;
                    }
                }
                if scale != 1.0 {
                    for zi in z.iter_mut() {
                        *zi *= scale;
                    }
                }
            }
            if l != last {
                let (head, tail) = self.acts.split_at_mut(l + 1);
                let _ = head;
                let next = &mut tail[0];
                for (dst, &z) in next[..prm.rows * bs].iter_mut().zip(&self.pre[l]) {
                    *dst = act.apply(z);
                }
            }
        }

        let mut loss = 0.0;
        for (p, &s) in batch.iter().enumerate() {
            let err = self.pre[last][p] - targets[s];
            loss += err * err;
            self.delta[p] = 2.0 * err / n as f64;
        }
        loss /= n as f64;

        for l in (0..params.len()).rev() {
            let prm = &params[l];
            let scale = if l == 0 { omega } else { 1.0 };
            let (gw, gb) = &mut self.grads[l];
            for r in 0..prm.rows {
                let d = &self.delta[r * bs..r * bs + n];
                gb[r] = d.iter().sum::<f64>() * scale;
                for c in 0..prm.cols {
                    let a = &self.acts[l][c * bs..c * bs + n];
                    let dot: f64 = d.iter().zip(a).map(|(x, y)| x * y).sum();
                    gw[r * prm.cols + c] = dot * scale;
                }
            }
            if l == 0 {
                break;
            }
            for c in 0..prm.cols {
                let dp = &mut self.delta_prev[c * bs..c * bs + n];
                dp.fill(0.0);
                for r in 0..prm.rows {
                    let w = prm.w[r * prm.cols + c];
                    let d = &self.delta[r * bs..r * bs + n];
                    for (x, y) in dp.iter_mut().zip(d) {
                        *x += w * y;
                    }
                }
                let z = &self.pre[l - 1][c * bs..c * bs + n];
                for (x, &zi) in dp.iter_mut().zip(z) {
                    *x *= act.derivative(zi);
                }
            }
            std::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
        loss
    }
}
