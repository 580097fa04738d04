//! Per-vertex measure tables with provenance.

/// How a measure table was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSource {
    /// Cesaro average of the position distribution over `t = 0..t_horizon-1`
    /// on a truncation of size `n + 1`.
    DirectCesaro { t_horizon: usize, n: usize },
    /// Eigenspace-projector reconstruction on a truncation of size `n + 1`.
    Spectral { n: usize },
    /// Evaluated closed-form expression.
    ClosedForm(String),
    /// Stationary distribution of the random walk.
    Stationary,
    Other(String),
}

/// Nonnegative values indexed by vertex `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    values: Vec<f64>,
    pub source: MeasureSource,
}

impl MeasureTable {
    pub fn new(values: Vec<f64>, source: MeasureSource) -> Self {
        Self { values, source }
    }

    pub fn zeros(len: usize, source: MeasureSource) -> Self {
        Self {
            values: vec![0.0; len],
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: usize) -> f64 {
        self.values[u]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Supremum of `|self - other|` over the common index range.
    pub fn sup_diff(&self, other: &MeasureTable) -> f64 {
        self.sup_diff_on(other, 0, self.len().min(other.len()).saturating_sub(1))
    }

    /// Supremum of `|self - other|` over vertices `lo..=hi`.
    pub fn sup_diff_on(&self, other: &MeasureTable, lo: usize, hi: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for u in lo..=hi.min(self.len().saturating_sub(1)).min(other.len().saturating_sub(1)) {
            sup = sup.max((self.values[u] - other.values[u]).abs());
        }
        sup
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate()
    }
}
