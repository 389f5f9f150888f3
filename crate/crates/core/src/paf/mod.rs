//! Probabilistic affine forms: `x0 + sum_i x_i Z_i` over independent
//! zero-mean unit-variance random variables, propagated through the network
//! with least-squares activation linearisations and read off as a Gaussian.

mod lsq;

use crate::affine::{self, RaVariant};
use crate::error::{Error, Result};
use crate::inr::{Activation, LinearLayer, MlpNetwork};
use crate::region::Region;
use crate::terms::{Accumulator, SymbolId, Terms};

pub use lsq::{lsq_approx, LsqApprox};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbAffineForm {
    center: f64,
    terms: Terms,
}

impl ProbAffineForm {
    pub fn constant(c: f64) -> Self {
        Self { center: c, terms: Terms::new() }
    }

    /// Build from `(rv id, coefficient)` pairs with strictly increasing ids.
    pub fn from_parts(center: f64, coeffs: &[(u32, f64)]) -> Self {
        let mut terms = Terms::new();
        for &(id, v) in coeffs {
            terms.push(id, v);
        }
        Self { center, terms }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn coeff(&self, id: u32) -> f64 {
        self.terms.get(id)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter()
    }

    pub fn rv_count(&self) -> usize {
        self.terms.len()
    }

    pub fn variance(&self) -> f64 {
        self.terms.sq_sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEstimate {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianEstimate {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian estimate needs finite mu and sigma >= 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// Forms sharing one random-variable namespace.
#[derive(Debug, Clone, PartialEq)]
pub struct PafVector {
    forms: Vec<ProbAffineForm>,
    next_id: SymbolId,
}

impl PafVector {
    pub fn new(forms: Vec<ProbAffineForm>, next_id: u32) -> Self {
        Self { forms, next_id }
    }

    pub fn forms(&self) -> &[ProbAffineForm] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn next_id(&self) -> u32 {
        self.next_id
    }
}

/// Uniform input over the region: one random variable per generator, scaled
/// by `1/sqrt(3)` so that it has unit variance.
pub fn region_to_pafs(region: &Region) -> PafVector {
    let inv_sqrt3 = 1.0 / 3f64.sqrt();
    let axes = region.axes();
    let forms = (0..region.dim())
        .map(|d| {
            let mut terms = Terms::new();
            for (k, axis) in axes.iter().enumerate() {
                terms.push(k as SymbolId, axis[d] * inv_sqrt3);
            }
            ProbAffineForm { center: region.center()[d], terms }
        })
        .collect();
    PafVector::new(forms, axes.len() as SymbolId)
}

pub fn box_to_pafs(lower: &[f64], upper: &[f64]) -> Result<PafVector> {
    Ok(region_to_pafs(&Region::from_box(lower, upper)?))
}

/// `W x + b`; exact for the distribution.
pub fn paf_apply_linear(forms: &PafVector, layer: &LinearLayer) -> Result<PafVector> {
    if forms.len() != layer.cols() {
        return Err(Error::DimensionMismatch {
            context: "probabilistic layer input",
            expected: layer.cols(),
            actual: forms.len(),
        });
    }
    let mut acc = Accumulator::new(forms.next_id as usize);
    let out = (0..layer.rows())
        .map(|r| {
            let mut center = layer.bias()[r];
            for (w, f) in layer.row(r).iter().zip(&forms.forms) {
                center += w * f.center;
                if *w != 0.0 {
                    acc.add_scaled(&f.terms, *w);
                }
            }
            ProbAffineForm { center, terms: acc.take() }
        })
        .collect();
    Ok(PafVector::new(out, forms.next_id))
}

/// Linearise `act` per form around its own Gaussian estimate and attach the
/// residual as a fresh random variable.
pub fn paf_apply_activation(forms: &PafVector, act: Activation) -> Result<PafVector> {
    let mut next = forms.next_id;
    let mut out = Vec::with_capacity(forms.len());
    for f in &forms.forms {
        let approx = lsq_approx(act, clt_estimate(f))?;
        let mut terms = f.terms.clone();
        terms.scale(approx.alpha);
        if approx.gamma_sq > 0.0 {
            terms.push(next, approx.gamma_sq.sqrt());
            next += 1;
        }
        out.push(ProbAffineForm { center: approx.alpha * f.center + approx.beta, terms });
    }
    Ok(PafVector::new(out, next))
}

/// Central-limit reading: `N(x0, sum x_i^2)`.
pub fn clt_estimate(form: &ProbAffineForm) -> GaussianEstimate {
    GaussianEstimate { mu: form.center, sigma: form.variance().sqrt() }
}

/// Propagate a uniform distribution over `region` through the network; the
/// raw output form.
pub fn propagate(net: &MlpNetwork, region: &Region) -> Result<ProbAffineForm> {
    let mut forms = region_to_pafs(&affine::normalized_region(net, region)?);
    let last = net.layers().len() - 1;
    for (i, layer) in net.layers().iter().enumerate() {
        forms = paf_apply_linear(&forms, layer)?;
        if i != last {
            forms = paf_apply_activation(&forms, net.activation())?;
        }
    }
    Ok(forms.forms.swap_remove(0))
}

fn rescale(net: &MlpNetwork, raw: GaussianEstimate) -> GaussianEstimate {
    GaussianEstimate {
        mu: net.denormalize_value(raw.mu),
        sigma: net.value_scale().abs() * raw.sigma,
    }
}

/// Gaussian estimate of the network output over `region`, in data units.
pub fn up_output_estimate(net: &MlpNetwork, region: &Region) -> Result<GaussianEstimate> {
    Ok(rescale(net, clt_estimate(&propagate(net, region)?)))
}

/// Range analysis with the uniform assumption: propagate affine forms and
/// treat every output symbol (and the folded error) as uniform on `[-1, 1]`.
pub fn ra_ua_estimate(net: &MlpNetwork, region: &Region, variant: RaVariant) -> Result<GaussianEstimate> {
    variant.validate(net.input_dim())?;
    let form = affine::propagate(net, region, variant)?;
    let err = form.err_accum();
    let raw = GaussianEstimate {
        mu: form.center(),
        sigma: ((form.coeff_sq_sum() + err * err) / 3.0).sqrt(),
    };
    Ok(rescale(net, raw))
}

/// `[mu - t sigma, mu + t sigma]`.
pub fn soft_bound(est: GaussianEstimate, t: f64) -> (f64, f64) {
    (est.mu - t * est.sigma, est.mu + t * est.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> LinearLayer {
        LinearLayer::new(rows, cols, w.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn region_pafs() {
        let v = box_to_pafs(&[-1.0], &[1.0]).unwrap();
        let f = &v.forms()[0];
        assert_eq!(f.center(), 0.0);
        assert!((f.variance() - 1.0 / 3.0).abs() < 1e-15);
        let v = box_to_pafs(&[2.0], &[2.0]).unwrap();
        assert_eq!(v.forms()[0], ProbAffineForm::constant(2.0));
        let v = box_to_pafs(&[0.0; 3], &[2.0; 3]).unwrap();
        assert_eq!(v.next_id(), 3);
        for (d, f) in v.forms().iter().enumerate() {
            assert_eq!(f.center(), 1.0);
            assert_eq!(f.coeffs().collect::<Vec<_>>(), vec![(d as u32, 1.0 / 3f64.sqrt())]);
        }
    }

    #[test]
    fn linear_propagation() {
        let x = PafVector::new(vec![ProbAffineForm::from_parts(3.0, &[(0, 1.0)])], 1);
        let y = paf_apply_linear(&x, &layer(1, 1, &[2.0], &[1.0])).unwrap();
        assert_eq!(clt_estimate(&y.forms()[0]), GaussianEstimate { mu: 7.0, sigma: 2.0 });

        let x = PafVector::new(
            vec![
                ProbAffineForm::from_parts(0.0, &[(0, 3.0)]),
                ProbAffineForm::from_parts(0.0, &[(1, 4.0)]),
            ],
            2,
        );
        let y = paf_apply_linear(&x, &layer(1, 2, &[1.0, 1.0], &[0.0])).unwrap();
        assert_eq!(y.forms()[0].variance(), 25.0);
        assert_eq!(clt_estimate(&y.forms()[0]).sigma, 5.0);
        assert_eq!(clt_estimate(&ProbAffineForm::constant(5.0)), GaussianEstimate { mu: 5.0, sigma: 0.0 });
    }

    #[test]
    fn activation_examples() {
        let x = PafVector::new(vec![ProbAffineForm::from_parts(0.0, &[(0, 1.0)])], 1);
        let s = paf_apply_activation(&x, Activation::Sine).unwrap();
        let f = &s.forms()[0];
        assert_eq!(f.center(), 0.0);
        assert!((f.coeff(0) - 0.606531).abs() < 1e-6);
        assert!((f.coeff(1) - 0.253876).abs() < 1e-6);

        let r = paf_apply_activation(&x, Activation::Relu).unwrap();
        let f = &r.forms()[0];
        assert!((f.center() - 0.398942).abs() < 1e-6);
        assert_eq!(f.coeff(0), 0.5);
        assert!((f.coeff(1) - 0.301405).abs() < 1e-6);

        let c = PafVector::new(vec![ProbAffineForm::constant(0.3)], 0);
        for act in [Activation::Sine, Activation::Relu, Activation::Elu] {
            let y = paf_apply_activation(&c, act).unwrap();
            assert_eq!(y.next_id(), 0);
            assert!((y.forms()[0].center() - affine::activation_exact(act, 0.3)).abs() < 1e-16);
        }
    }

    #[test]
    fn soft_bounds() {
        assert_eq!(soft_bound(GaussianEstimate { mu: 0.0, sigma: 1.0 }, 5.0), (-5.0, 5.0));
        assert_eq!(soft_bound(GaussianEstimate { mu: 3.0, sigma: 0.0 }, 7.0), (3.0, 3.0));
        assert_eq!(soft_bound(GaussianEstimate { mu: 1.0, sigma: 2.0 }, 2.0), (-3.0, 5.0));
    }

    fn net_from(layers: Vec<LinearLayer>, act: Activation) -> MlpNetwork {
        MlpNetwork::new(layers, act, 2, 1, vec![-1.0; 2], vec![1.0; 2], 1.0, 0.0).unwrap()
    }

    #[test]
    fn constant_network_estimates() {
        let net = net_from(vec![layer(1, 2, &[0.0, 0.0], &[4.0])], Activation::Sine);
        let r = Region::from_box(&[-0.5, -0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(up_output_estimate(&net, &r).unwrap(), GaussianEstimate { mu: 4.0, sigma: 0.0 });
        assert_eq!(
            ra_ua_estimate(&net, &r, RaVariant::Full).unwrap(),
            GaussianEstimate { mu: 4.0, sigma: 0.0 }
        );
    }

    #[test]
    fn ra_ua_reads_uniform_variance() {
        // Output form 0 + 3 e_1 on region [-1, 1] x {0} through f = 3x.
        let net = net_from(vec![layer(1, 2, &[3.0, 0.0], &[0.0])], Activation::Relu);
        let r = Region::from_box(&[-1.0, 0.0], &[1.0, 0.0]).unwrap();
        let e = ra_ua_estimate(&net, &r, RaVariant::Full).unwrap();
        assert_eq!(e.mu, 0.0);
        assert!((e.sigma * e.sigma - 3.0).abs() < 1e-15);
    }
}
