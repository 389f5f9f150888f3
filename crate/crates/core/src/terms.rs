//! Sparse coefficient storage shared by affine forms and probabilistic affine
//! forms: `(symbol id, coefficient)` pairs sorted by id, exact zeros dropped.

pub type SymbolId = u32;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Terms {
    ids: Vec<SymbolId>,
    vals: Vec<f64>,
}

impl Terms {
    pub fn new() -> Self {
        Self::default()
    }

    #[cfg(test)]
    pub fn single(id: SymbolId, val: f64) -> Self {
        let mut t = Self::new();
        t.push(id, val);
        t
    }

    /// Append a term whose id is larger than every id already present.
    pub fn push(&mut self, id: SymbolId, val: f64) {
        debug_assert!(self.ids.last().map_or(true, |&last| last < id));
        if val != 0.0 {
            self.ids.push(id);
            self.vals.push(val);
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[cfg(test)]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, f64)> + '_ {
        self.ids.iter().copied().zip(self.vals.iter().copied())
    }

    pub fn get(&self, id: SymbolId) -> f64 {
        match self.ids.binary_search(&id) {
            Ok(i) => self.vals[i],
            Err(_) => 0.0,
        }
    }

    pub fn max_id(&self) -> Option<SymbolId> {
        self.ids.last().copied()
    }

    pub fn abs_sum(&self) -> f64 {
        self.vals.iter().map(|v| v.abs()).sum()
    }

    pub fn sq_sum(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        if factor == 0.0 {
            self.ids.clear();
            self.vals.clear();
            return;
        }
        for v in &mut self.vals {
            *v *= factor;
        }
        self.drop_zeros();
    }

    fn drop_zeros(&mut self) {
        if self.vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut k = 0;
        for i in 0..self.ids.len() {
            if self.vals[i] != 0.0 {
                self.ids[k] = self.ids[i];
                self.vals[k] = self.vals[i];
                k += 1;
            }
        }
        self.ids.truncate(k);
        self.vals.truncate(k);
    }

    /// Remove the terms with the given ids and return the sum of their
    /// absolute coefficients.
    pub fn remove_ids(&mut self, remove: &[SymbolId]) -> f64 {
        let mut removed = 0.0;
        let mut k = 0;
        for i in 0..self.ids.len() {
            if remove.contains(&self.ids[i]) {
                removed += self.vals[i].abs();
            } else {
                self.ids[k] = self.ids[i];
                self.vals[k] = self.vals[i];
                k += 1;
            }
        }
        self.ids.truncate(k);
        self.vals.truncate(k);
        removed
    }

    /// Ids of the `count` smallest-magnitude terms (ties: lower id first).
    pub fn smallest(&self, count: usize) -> Vec<SymbolId> {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|&a, &b| {
            self.vals[a]
                .abs()
                .total_cmp(&self.vals[b].abs())
                .then(self.ids[a].cmp(&self.ids[b]))
        });
        order.into_iter().take(count).map(|i| self.ids[i]).collect()
    }
}

/// Reusable dense accumulator for `sum_j w_j * terms_j`.
pub struct Accumulator {
    dense: Vec<f64>,
}

impl Accumulator {
    pub fn new(symbols: usize) -> Self {
        Self {
            dense: vec![0.0; symbols],
        }
    }

    pub fn add_scaled(&mut self, terms: &Terms, w: f64) {
        for (id, v) in terms.iter() {
            self.dense[id as usize] += w * v;
        }
    }

    /// Drain into a `Terms`, resetting the accumulator to zero.
    pub fn take(&mut self) -> Terms {
        let mut out = Terms::new();
        for (id, slot) in self.dense.iter_mut().enumerate() {
            if *slot != 0.0 {
                out.ids.push(id as SymbolId);
                out.vals.push(*slot);
                *slot = 0.0;
            }
        }
        out
    }
}
