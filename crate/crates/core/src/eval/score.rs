use crate::error::{Error, Result};
use crate::extract::ActiveCellSet;
use crate::inr::ScalarVolume;

/// Reported in place of an infinite PSNR (identical volumes).
pub const PSNR_SENTINEL: f64 = 999.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScore {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub fpr: f64,
    pub fnr: f64,
}

impl CellScore {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let rate = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self { tp, fp, tn, fn_, fpr: rate(fp, fp + tn), fnr: rate(fn_, fn_ + tp) }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Confusion counts of `predicted` against `truth` over all leaf cells.
pub fn score_cells(predicted: &ActiveCellSet, truth: &ActiveCellSet) -> Result<CellScore> {
    if predicted.lattice() != truth.lattice() {
        return Err(Error::InvalidArgument(format!(
            "cell sets use different lattices ({} vs {} cells per axis, or different domains)",
            predicted.lattice().cells_per_axis(),
            truth.lattice().cells_per_axis()
        )));
    }
    let lattice = truth.lattice();
    let (mut tp, mut fp) = (0u64, 0u64);
    let (p, t) = (predicted.cells(), truth.cells());
    let (mut i, mut j) = (0, 0);
    while i < p.len() {
        let kp = lattice.cell_key(p[i]);
        while j < t.len() && lattice.cell_key(t[j]) < kp {
            j += 1;
        }
        if j < t.len() && lattice.cell_key(t[j]) == kp {
            tp += 1;
        } else {
            fp += 1;
        }
        i += 1;
    }
    let fn_ = t.len() as u64 - tp;
    let tn = lattice.total_cells() as u64 - tp - fp - fn_;
    Ok(CellScore::from_counts(tp, fp, tn, fn_))
}

/// `20 log10(range(a) / rmse(a, b))`; infinite when the volumes are equal.
pub fn psnr(a: &ScalarVolume, b: &ScalarVolume) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            context: "PSNR volumes",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (lo, hi) = a.min_max();
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::UndefinedPsnr);
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (range / mse.sqrt()).log10())
}

/// PSNR as written to reports: infinity is capped at [`PSNR_SENTINEL`].
pub fn psnr_report_value(p: f64) -> f64 {
    p.min(PSNR_SENTINEL)
}
