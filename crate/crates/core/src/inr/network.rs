use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::region::lattice_coord;
use crate::special;

use super::ScalarVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sine,
    Relu,
    /// ELU with alpha = 1.
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sine => special::sin(x),
            Activation::Relu => x.max(0.0),
            Activation::Elu => special::elu(x),
        }
    }

    /// [`apply`](Self::apply) over a slice, bit-identical per element.
    pub fn apply_slice(self, xs: &mut [f64]) {
        match self {
            Activation::Sine => special::sin_slice(xs),
            Activation::Relu => {
                for x in xs.iter_mut() {
                    *x = x.max(0.0);
                }
            }
            Activation::Elu => special::elu_slice(xs),
        }
    }

    /// Derivative used by the trainer; ReLU'(0) is taken as 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.cos(),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Relu => "relu",
            Activation::Elu => "elu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" | "sin" => Ok(Activation::Sine),
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            other => Err(Error::parse(
                "activation",
                format!("unknown activation `{other}` (expected sine, relu or elu)"),
            )),
        }
    }
}

/// Dense layer `y = W x + b` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "layer shape {rows}x{cols} has a zero dimension"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::Validation(format!(
                "layer {rows}x{cols} needs {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(Error::Validation(format!(
                "layer with {rows} rows needs {rows} biases, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Validation("layer parameters must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    /// `out = W x + b`, accumulated with fused multiply-adds as
    /// `fma(w_n, x_n, ... fma(w_0, x_0, b))`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let mut acc = self.bias[r];
            for (w, xi) in self.row(r).iter().zip(x) {
                acc = w.mul_add(*xi, acc);
            }
            *o = acc;
        }
    }
}

/// Number of points processed together by [`MlpNetwork::forward_batch`].
const BATCH: usize = 64;

/// Points accumulated together in registers.
const LANES: usize = 16;

/// Fully connected INR: linear layers with the activation applied after every
/// layer except the last. Inputs are world coordinates; they are mapped to
/// `[-1, 1]` per axis over the network domain before the first layer, and the
/// raw output is mapped back to data units with `value_scale`/`value_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<LinearLayer>,
    activation: Activation,
    input_dim: usize,
    output_dim: usize,
    domain_lower: Vec<f64>,
    domain_upper: Vec<f64>,
    value_scale: f64,
    value_offset: f64,
}

impl MlpNetwork {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layers: Vec<LinearLayer>,
        activation: Activation,
        input_dim: usize,
        output_dim: usize,
        domain_lower: Vec<f64>,
        domain_upper: Vec<f64>,
        value_scale: f64,
        value_offset: f64,
    ) -> Result<Self> {
        if !(2..=3).contains(&input_dim) {
            return Err(Error::Validation(format!(
                "input_dim must be 2 or 3, got {input_dim}"
            )));
        }
        if output_dim != 1 {
            return Err(Error::Validation(format!(
                "output_dim must be 1, got {output_dim}"
            )));
        }
        if layers.is_empty() {
            return Err(Error::Validation("network has no layers".into()));
        }
        let mut expected_cols = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.cols != expected_cols {
                return Err(Error::Validation(format!(
                    "layer {i} has {} columns but the previous layer produces {expected_cols} values",
                    layer.cols
                )));
            }
            expected_cols = layer.rows;
        }
        if expected_cols != output_dim {
            return Err(Error::Validation(format!(
                "last layer has {expected_cols} rows, expected output_dim {output_dim}"
            )));
        }
        if domain_lower.len() != input_dim || domain_upper.len() != input_dim {
            return Err(Error::Validation(format!(
                "domain bounds must have {input_dim} components"
            )));
        }
        for d in 0..input_dim {
            let (lo, hi) = (domain_lower[d], domain_upper[d]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!(
                    "domain axis {d}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        if !(value_scale.is_finite() && value_offset.is_finite()) {
            return Err(Error::Validation(
                "value_scale and value_offset must be finite".into(),
            ));
        }
        Ok(Self {
            layers,
            activation,
            input_dim,
            output_dim,
            domain_lower,
            domain_upper,
            value_scale,
            value_offset,
        })
    }

    pub fn layers(&self) -> &[LinearLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn domain_lower(&self) -> &[f64] {
        &self.domain_lower
    }

    pub fn domain_upper(&self) -> &[f64] {
        &self.domain_upper
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    pub fn value_offset(&self) -> f64 {
        self.value_offset
    }

    pub fn max_width(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.rows)
            .max()
            .unwrap_or(0)
            .max(self.input_dim)
    }

    /// Midpoint and half-width of the domain along `axis`.
    pub fn domain_affine(&self, axis: usize) -> (f64, f64) {
        let (lo, hi) = (self.domain_lower[axis], self.domain_upper[axis]);
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    /// World coordinate to the network's `[-1, 1]` input coordinate.
    #[inline]
    pub fn normalize_coord(&self, axis: usize, x: f64) -> f64 {
        let (mid, half) = self.domain_affine(axis);
        (x - mid) / half
    }

    /// Raw network output to data units.
    #[inline]
    pub fn denormalize_value(&self, raw: f64) -> f64 {
        self.value_scale * raw + self.value_offset
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                actual: got,
            });
        }
        Ok(())
    }

    /// Evaluate the network at one world-space point.
    pub fn forward(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point.len())?;
        let width = self.max_width();
        let mut cur = vec![0.0; width];
        let mut next = vec![0.0; width];
        for (d, &p) in point.iter().enumerate() {
            cur[d] = self.normalize_coord(d, p);
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur[..layer.cols], &mut next[..layer.rows]);
            if i != last {
                for v in &mut next[..layer.rows] {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(self.denormalize_value(cur[0]))
    }

    /// Evaluate many points stored contiguously (`input_dim` values each).
    ///
    /// Bit-identical to calling [`forward`](Self::forward) per point: the
    /// per-row accumulation order is the same, only the loop nest differs.
    pub fn forward_batch(&self, points: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.input_dim;
        if points.len() != out.len() * dim {
            return Err(Error::DimensionMismatch {
                context: "batched network input",
                expected: out.len() * dim,
                actual: points.len(),
            });
        }
        let width = self.max_width();
        let mut cur = vec![0.0; width * BATCH];
        let mut next = vec![0.0; width * BATCH];
        for (chunk_pts, chunk_out) in points.chunks(BATCH * dim).zip(out.chunks_mut(BATCH)) {
            let n = chunk_out.len();
            for p in 0..n {
                for d in 0..dim {
                    cur[d * BATCH + p] = self.normalize_coord(d, chunk_pts[p * dim + d]);
                }
            }
            let last = self.layers.len() - 1;
            for (i, layer) in self.layers.iter().enumerate() {
                let mut r = 0;
                while r + 1 < layer.rows {
                    let (row0, row1) = (layer.row(r), layer.row(r + 1));
                    for p0 in (0..BATCH).step_by(LANES) {
                        let mut acc0 = [layer.bias[r]; LANES];
                        let mut acc1 = [layer.bias[r + 1]; LANES];
                        for c in 0..layer.cols {
                            let (w0, w1) = (row0[c], row1[c]);
                            let src = &cur[c * BATCH + p0..c * BATCH + p0 + LANES];
                            for l in 0..LANES {
                                acc0[l] = w0.mul_add(src[l], acc0[l]);
                                acc1[l] = w1.mul_add(src[l], acc1[l]);
                            }
                        }
                        next[r * BATCH + p0..r * BATCH + p0 + LANES].copy_from_slice(&acc0);
                        next[(r + 1) * BATCH + p0..(r + 1) * BATCH + p0 + LANES].copy_from_slice(&acc1);
                    }
                    r += 2;
                }
                if r < layer.rows {
                    let row = layer.row(r);
                    for p0 in (0..BATCH).step_by(LANES) {
                        let mut acc = [layer.bias[r]; LANES];
                        for (c, &w) in row.iter().enumerate() {
                            let src = &cur[c * BATCH + p0..c * BATCH + p0 + LANES];
                            for (a, x) in acc.iter_mut().zip(src) {
                                *a = w.mul_add(*x, *a);
                            }
                        }
                        next[r * BATCH + p0..r * BATCH + p0 + LANES].copy_from_slice(&acc);
                    }
                }
                if i != last {
                    for r in 0..layer.rows {
                        self.activation.apply_slice(&mut next[r * BATCH..r * BATCH + n]);
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            for (o, raw) in chunk_out.iter_mut().zip(&cur[..n]) {
                *o = self.denormalize_value(*raw);
            }
        }
        Ok(())
    }

    /// World coordinates of grid vertex `index` on a `resolution` grid that
    /// spans the domain, boundaries included.
    pub fn grid_point(&self, index: [usize; 3], resolution: [usize; 3]) -> Vec<f64> {
        (0..self.input_dim)
            .map(|d| {
                lattice_coord(
                    self.domain_lower[d],
                    self.domain_upper[d],
                    index[d],
                    resolution[d] - 1,
                )
            })
            .collect()
    }

    /// Sample the network on a regular grid (x fastest). The work is split by
    /// z-slice; the result does not depend on the thread count.
    pub fn dense_reconstruct(&self, resolution: [usize; 3]) -> Result<ScalarVolume> {
        let dims = if self.input_dim == 2 {
            [resolution[0], resolution[1], 1]
        } else {
            resolution
        };
        for (d, &n) in dims.iter().enumerate().take(self.input_dim) {
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "dense reconstruction needs at least 2 samples per axis, axis {d} has {n}"
                )));
            }
        }
        let [nx, ny, nz] = dims;
        let slices: Vec<Vec<f64>> = (0..nz)
            .into_par_iter()
            .map(|k| {
                let mut pts = Vec::with_capacity(nx * ny * self.input_dim);
                for j in 0..ny {
                    for i in 0..nx {
                        pts.extend(self.grid_point([i, j, k], dims));
                    }
                }
                let mut vals = vec![0.0; nx * ny];
                self.forward_batch(&pts, &mut vals)
                    .expect("grid points have the network's dimension");
                vals
            })
            .collect();
        ScalarVolume::new(dims, slices.concat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_net(weights: Vec<f64>, bias: f64) -> MlpNetwork {
        MlpNetwork::new(
            vec![LinearLayer::new(1, 3, weights, vec![bias]).unwrap()],
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

    #[test]
    fn single_layer_is_affine() {
        let net = affine_net(vec![2.0, 0.0, 0.0], 1.0);
        assert_eq!(net.forward(&[3.0, 0.0, 0.0]).unwrap(), 7.0);
    }

    #[test]
    fn zero_weight_sine_net_is_constant() {
        let hidden = LinearLayer::new(3, 3, vec![0.0; 9], vec![0.0; 3]).unwrap();
        let out = LinearLayer::new(1, 3, vec![0.0; 3], vec![0.75]).unwrap();
        let net = MlpNetwork::new(
            vec![hidden.clone(), hidden, out],
            Activation::Sine,
            3,
            1,
            vec![-1.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        )
        .unwrap();
        for p in [[0.1, 0.2, 0.3], [-1.0, 1.0, 0.0], [5.0, -3.0, 2.0]] {
            assert_eq!(net.forward(&p).unwrap(), 0.75);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = affine_net(vec![1.0, 0.0, 0.0], 0.0);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chain_violation_is_rejected() {
        let a = LinearLayer::new(4, 3, vec![0.0; 12], vec![0.0; 4]).unwrap();
        let b = LinearLayer::new(1, 5, vec![0.0; 5], vec![0.0]).unwrap();
        let err = MlpNetwork::new(
            vec![a, b],
            Activation::Relu,
            3,
            1,
            vec![-1.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn linear_field_dense_slices() {
        let net = MlpNetwork::new(
            vec![LinearLayer::new(1, 3, vec![0.5, 0.0, 0.0], vec![0.5]).unwrap()],
            Activation::Relu,
            3,
            1,
            vec![0.0; 3],
            vec![1.0; 3],
            1.0,
            0.0,
        )
        .unwrap();
        // normalised x' = 2x - 1, so 0.5 x' + 0.5 = x
        let vol = net.dense_reconstruct([3, 2, 2]).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                let row: Vec<f64> = (0..3).map(|i| vol.get(i, j, k)).collect();
                assert_eq!(row, vec![0.0, 0.5, 1.0]);
            }
        }
    }

    #[test]
    fn activation_parsing() {
        assert_eq!("elu".parse::<Activation>().unwrap(), Activation::Elu);
        assert!(matches!(
            "tanh".parse::<Activation>(),
            Err(Error::Parse { .. })
        ));
    }
}
