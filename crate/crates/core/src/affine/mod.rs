//! Affine arithmetic: guaranteed ranges of an MLP over a region.
//!
//! An affine form is `x0 + sum_i x_i e_i + err * e_*` with every noise symbol
//! `e` ranging over `[-1, 1]`. Linear layers act exactly on the forms;
//! activations are replaced by their minimax linear approximation plus a new
//! symbol carrying the approximation error.

mod minimax;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inr::{Activation, LinearLayer, MlpNetwork};
use crate::region::Region;
use crate::terms::{Accumulator, SymbolId, Terms};

pub use minimax::{minimax_approx, LinearApprox};
#[cfg(test)]
pub(crate) use minimax::activation_exact;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    center: f64,
    terms: Terms,
    /// Magnitude of error folded out of individual symbols. Always treated
    /// as an independent interval term.
    err_accum: f64,
}

impl AffineForm {
    pub fn constant(c: f64) -> Self {
        Self { center: c, terms: Terms::new(), err_accum: 0.0 }
    }

    /// Build from `(symbol, coefficient)` pairs with strictly increasing ids.
    pub fn from_parts(center: f64, coeffs: &[(u32, f64)], err_accum: f64) -> Self {
        let mut terms = Terms::new();
        for &(id, v) in coeffs {
            terms.push(id, v);
        }
        Self { center, terms, err_accum: err_accum.abs() }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn err_accum(&self) -> f64 {
        self.err_accum
    }

    pub fn coeff(&self, id: u32) -> f64 {
        self.terms.get(id)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter()
    }

    pub fn symbol_count(&self) -> usize {
        self.terms.len()
    }

    /// `sum |x_i| + err_accum`.
    pub fn radius(&self) -> f64 {
        self.terms.abs_sum() + self.err_accum
    }

    pub fn range(&self) -> (f64, f64) {
        let r = self.radius();
        (self.center - r, self.center + r)
    }

    /// Sum of squared symbol coefficients (excluding `err_accum`).
    pub fn coeff_sq_sum(&self) -> f64 {
        self.terms.sq_sum()
    }
}

/// Forms sharing one symbol namespace; ids below `next_symbol` are in use.
#[derive(Debug, Clone, PartialEq)]
pub struct FormVector {
    forms: Vec<AffineForm>,
    next_symbol: SymbolId,
}

impl FormVector {
    pub fn new(forms: Vec<AffineForm>, next_symbol: u32) -> Self {
        debug_assert!(forms
            .iter()
            .all(|f| f.terms.max_id().map_or(true, |m| m < next_symbol)));
        Self { forms, next_symbol }
    }

    pub fn forms(&self) -> &[AffineForm] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn next_symbol(&self) -> u32 {
        self.next_symbol
    }
}

/// Coefficient-management policy for the symbols introduced by activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RaVariant {
    /// A fresh symbol for every activation output.
    Full,
    /// No fresh symbols; all approximation error goes to `err_accum`.
    Fixed,
    /// Keep at most `k` symbols per form, folding the smallest.
    Truncate(usize),
    /// Fresh symbols until a form exceeds `budget`, then merge the two
    /// smallest into `err_accum`.
    Append(usize),
}

impl RaVariant {
    pub fn default_budget(input_dim: usize) -> usize {
        input_dim + 16
    }

    pub fn truncate_default(input_dim: usize) -> Self {
        RaVariant::Truncate(Self::default_budget(input_dim))
    }

    pub fn append_default(input_dim: usize) -> Self {
        RaVariant::Append(Self::default_budget(input_dim))
    }

    pub fn validate(self, input_dim: usize) -> Result<()> {
        match self {
            RaVariant::Truncate(k) | RaVariant::Append(k) if k < input_dim => {
                Err(Error::InvalidArgument(format!(
                    "{} parameter {k} is below the input dimension {input_dim}",
                    self.name()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RaVariant::Full => "ra-full",
            RaVariant::Fixed => "ra-fixed",
            RaVariant::Truncate(_) => "ra-truncate",
            RaVariant::Append(_) => "ra-append",
        }
    }

    pub fn parameter(self) -> Option<usize> {
        match self {
            RaVariant::Truncate(k) | RaVariant::Append(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for RaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter() {
            Some(k) => write!(f, "{}({k})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for RaVariant {
    type Err = Error;

    /// `full`, `fixed`, `truncate:K`, `append:B` (with or without `ra-`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.strip_prefix("ra-").unwrap_or(s);
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let parse_param = |p: Option<&str>| -> Result<usize> {
            let p = p.ok_or_else(|| Error::parse("variant", format!("`{name}` needs a parameter, e.g. `{name}:19`")))?;
            p.parse()
                .map_err(|_| Error::parse("variant", format!("bad parameter `{p}`")))
        };
        match name {
            "full" => Ok(RaVariant::Full),
            "fixed" => Ok(RaVariant::Fixed),
            "truncate" => Ok(RaVariant::Truncate(parse_param(param)?)),
            "append" => Ok(RaVariant::Append(parse_param(param)?)),
            other => Err(Error::parse("variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// One fresh symbol per region generator; the forms are the coordinates of
/// the region's points.
pub fn region_to_forms(region: &Region) -> FormVector {
    let dim = region.dim();
    let axes = region.axes();
    let forms = (0..dim)
        .map(|d| {
            let mut terms = Terms::new();
            for (k, axis) in axes.iter().enumerate() {
                terms.push(k as SymbolId, axis[d]);
            }
            AffineForm { center: region.center()[d], terms, err_accum: 0.0 }
        })
        .collect();
    FormVector::new(forms, axes.len() as SymbolId)
}

/// [`region_to_forms`] for an axis-aligned box.
pub fn box_to_forms(lower: &[f64], upper: &[f64]) -> Result<FormVector> {
    Ok(region_to_forms(&Region::from_box(lower, upper)?))
}

/// `W x + b` on forms: exact for centers and symbols, `|W|` on `err_accum`.
pub fn apply_linear(forms: &FormVector, layer: &LinearLayer) -> Result<FormVector> {
    if forms.len() != layer.cols() {
        return Err(Error::DimensionMismatch {
            context: "affine layer input",
            expected: layer.cols(),
            actual: forms.len(),
        });
    }
    let mut acc = Accumulator::new(forms.next_symbol as usize);
    let out = (0..layer.rows())
        .map(|r| {
            let mut center = layer.bias()[r];
            let mut err = 0.0;
            for (w, f) in layer.row(r).iter().zip(&forms.forms) {
                center += w * f.center;
                err += w.abs() * f.err_accum;
                if *w != 0.0 {
                    acc.add_scaled(&f.terms, *w);
                }
            }
            AffineForm { center, terms: acc.take(), err_accum: err }
        })
        .collect();
    Ok(FormVector::new(out, forms.next_symbol))
}

/// Apply `act` to every form through its minimax linearisation, recording
/// the approximation error according to `variant`.
pub fn apply_activation(forms: &FormVector, act: Activation, variant: RaVariant) -> FormVector {
    let mut next = forms.next_symbol;
    let out = forms
        .forms
        .iter()
        .map(|f| {
            let (lo, hi) = f.range();
            let approx = minimax_approx(act, lo, hi);
            let mut terms = f.terms.clone();
            terms.scale(approx.alpha);
            let mut g = AffineForm {
                center: approx.alpha * f.center + approx.beta,
                terms,
                err_accum: approx.alpha.abs() * f.err_accum,
            };
            if approx.gamma > 0.0 {
                if variant == RaVariant::Fixed {
                    g.err_accum += approx.gamma;
                } else {
                    g.terms.push(next, approx.gamma);
                    next += 1;
                }
            }
            match variant {
                RaVariant::Truncate(k) if g.terms.len() > k => {
                    let fold = g.terms.smallest(g.terms.len() - k);
                    g.err_accum += g.terms.remove_ids(&fold);
                }
                RaVariant::Append(budget) => {
                    while g.terms.len() > budget {
                        let fold = g.terms.smallest(2);
                        g.err_accum += g.terms.remove_ids(&fold);
                    }
                }
                _ => {}
            }
            g
        })
        .collect();
    FormVector::new(out, next)
}

/// The region expressed in the network's normalised input coordinates.
pub(crate) fn normalized_region(net: &MlpNetwork, region: &Region) -> Result<Region> {
    if region.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "region dimension",
            expected: net.input_dim(),
            actual: region.dim(),
        });
    }
    Ok(region.map_axes(|d, x| net.normalize_coord(d, x), |d, v| v / net.domain_affine(d).1))
}

/// Propagate `region` through the network; returns the raw (normalised
/// units) output form.
pub fn propagate(net: &MlpNetwork, region: &Region, variant: RaVariant) -> Result<AffineForm> {
    let mut forms = region_to_forms(&normalized_region(net, region)?);
    let last = net.layers().len() - 1;
    for (i, layer) in net.layers().iter().enumerate() {
        forms = apply_linear(&forms, layer)?;
        if i != last {
            forms = apply_activation(&forms, net.activation(), variant);
        }
    }
    Ok(forms.forms.swap_remove(0))
}

/// Guaranteed output interval of the network over `region`, in data units.
pub fn ra_output_range(net: &MlpNetwork, region: &Region, variant: RaVariant) -> Result<(f64, f64)> {
    variant.validate(net.input_dim())?;
    let (lo, hi) = propagate(net, region, variant)?.range();
    Ok(rescale_interval(net, lo, hi))
}

/// Map a raw-output interval to data units.
pub(crate) fn rescale_interval(net: &MlpNetwork, lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (net.denormalize_value(lo), net.denormalize_value(hi));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> LinearLayer {
        LinearLayer::new(rows, cols, w.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn region_forms() {
        let f = box_to_forms(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(f.next_symbol(), 2);
        assert_eq!(f.forms()[0], AffineForm::from_parts(0.0, &[(0, 1.0)], 0.0));
        assert_eq!(f.forms()[1], AffineForm::from_parts(0.0, &[(1, 1.0)], 0.0));

        let f = box_to_forms(&[3.0, 0.0], &[3.0, 2.0]).unwrap();
        assert_eq!(f.next_symbol(), 1);
        assert_eq!(f.forms()[0], AffineForm::constant(3.0));
        assert_eq!(f.forms()[1], AffineForm::from_parts(1.0, &[(0, 1.0)], 0.0));

        let f = box_to_forms(&[0.0; 3], &[1.0; 3]).unwrap();
        for (d, form) in f.forms().iter().enumerate() {
            assert_eq!(form.center(), 0.5);
            assert_eq!(form.coeffs().collect::<Vec<_>>(), vec![(d as u32, 0.5)]);
        }
    }

    #[test]
    fn linear_rule_by_hand() {
        let x = FormVector::new(vec![AffineForm::from_parts(3.0, &[(0, 1.0)], 0.0)], 1);
        let y = apply_linear(&x, &layer(1, 1, &[2.0], &[1.0])).unwrap();
        assert_eq!(y.forms()[0], AffineForm::from_parts(7.0, &[(0, 2.0)], 0.0));
        assert_eq!(y.forms()[0].range(), (5.0, 9.0));

        let z = apply_linear(&x, &layer(1, 1, &[0.0], &[4.0])).unwrap();
        assert_eq!(z.forms()[0], AffineForm::constant(4.0));

        let e = box_to_forms(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let h = apply_linear(&e, &layer(2, 2, &[1.0, 1.0, 1.0, -1.0], &[0.0, 0.0])).unwrap();
        assert_eq!(h.forms()[0], AffineForm::from_parts(0.0, &[(0, 1.0), (1, 1.0)], 0.0));
        assert_eq!(h.forms()[1], AffineForm::from_parts(0.0, &[(0, 1.0), (1, -1.0)], 0.0));
        assert_eq!(h.forms()[0].range(), (-2.0, 2.0));
        assert_eq!(h.forms()[1].range(), (-2.0, 2.0));
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let x = box_to_forms(&[0.0], &[1.0]).unwrap();
        assert!(matches!(
            apply_linear(&x, &layer(1, 2, &[1.0, 1.0], &[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn err_accum_scales_by_absolute_weights() {
        let x = FormVector::new(
            vec![
                AffineForm::from_parts(0.0, &[], 0.5),
                AffineForm::from_parts(0.0, &[], 0.25),
            ],
            0,
        );
        let y = apply_linear(&x, &layer(1, 2, &[-2.0, 4.0], &[0.0])).unwrap();
        assert_eq!(y.forms()[0].err_accum(), 2.0);
    }

    #[test]
    fn relu_activation_variants() {
        let x = FormVector::new(vec![AffineForm::from_parts(0.0, &[(0, 1.0)], 0.0)], 1);
        let full = apply_activation(&x, Activation::Relu, RaVariant::Full);
        let f = &full.forms()[0];
        assert_eq!(f.center(), 0.25);
        assert_eq!(f.coeff(0), 0.5);
        assert!((f.coeff(1) - 0.25).abs() < 1e-12);
        assert_eq!(full.next_symbol(), 2);
        let (lo, hi) = f.range();
        assert!((lo + 0.5).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let fixed = apply_activation(&x, Activation::Relu, RaVariant::Fixed);
        let g = &fixed.forms()[0];
        assert_eq!(g.symbol_count(), 1);
        assert!((g.err_accum() - 0.25).abs() < 1e-12);
        assert_eq!(fixed.next_symbol(), 1);
        assert_eq!(g.range(), f.range());
    }

    #[test]
    fn constant_through_activation_adds_no_symbol() {
        let x = FormVector::new(vec![AffineForm::constant(5.0)], 0);
        let y = apply_activation(&x, Activation::Relu, RaVariant::Full);
        assert_eq!(y.forms()[0], AffineForm::constant(5.0));
        assert_eq!(y.next_symbol(), 0);
    }

    #[test]
    fn truncate_and_append_fold_smallest() {
        let x = FormVector::new(
            vec![AffineForm::from_parts(0.0, &[(0, 0.3), (1, -0.2), (2, 0.1), (3, 0.05)], 0.0)],
            4,
        );
        let t = apply_activation(&x, Activation::Sine, RaVariant::Truncate(3));
        assert_eq!(t.forms()[0].symbol_count(), 3);
        let a = apply_activation(&x, Activation::Sine, RaVariant::Append(3));
        assert!(a.forms()[0].symbol_count() <= 3);
        let full = apply_activation(&x, Activation::Sine, RaVariant::Full);
        for v in [&t, &a] {
            let (lo, hi) = v.forms()[0].range();
            let (flo, fhi) = full.forms()[0].range();
            assert!(lo <= flo + 1e-15 && hi >= fhi - 1e-15);
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("full".parse::<RaVariant>().unwrap(), RaVariant::Full);
        assert_eq!("ra-truncate:7".parse::<RaVariant>().unwrap(), RaVariant::Truncate(7));
        assert_eq!("append:20".parse::<RaVariant>().unwrap(), RaVariant::Append(20));
        assert!("append".parse::<RaVariant>().is_err());
        assert!("half".parse::<RaVariant>().is_err());
        assert!(RaVariant::Truncate(2).validate(3).is_err());
    }

    fn one_layer_net(w: Vec<f64>, b: f64, lower: f64, upper: f64) -> MlpNetwork {
        MlpNetwork::new(
            vec![LinearLayer::new(1, 2, w, vec![b]).unwrap()],
            Activation::Relu,
            2,
            1,
            vec![lower; 2],
            vec![upper; 2],
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_network_range_is_exact() {
        // On domain [-1, 1] the normalisation is the identity: f = 2x + 1.
        let net = one_layer_net(vec![2.0, 0.0], 1.0, -1.0, 1.0);
        let r = Region::from_box(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
        assert_eq!(ra_output_range(&net, &r, RaVariant::Full).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn constant_network_range() {
        let net = one_layer_net(vec![0.0, 0.0], -2.5, 0.0, 4.0);
        let r = Region::from_box(&[1.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(ra_output_range(&net, &r, RaVariant::Fixed).unwrap(), (-2.5, -2.5));
    }
}
