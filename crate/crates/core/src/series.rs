//! Running-sum analysis for the positive series that control recurrence.
//!
//! A finite partial sum can neither prove convergence nor divergence, so a
//! scan reports one of three outcomes: the tail increment dropped below a
//! relative tolerance (`Stabilized`), the partial sum crossed a divergence
//! threshold (`Diverged`), or the term budget ran out (`Exhausted`).
//! Callers with outside knowledge (a declared recurrence class) resolve the
//! `Exhausted` case themselves.

/// Thresholds for a series scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Maximum number of terms to accumulate.
    pub cutoff: usize,
    /// Relative tail increment below which the sum counts as stabilized.
    pub stabilize_tol: f64,
    /// Partial sum above which the series counts as diverged.
    pub diverge_threshold: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            cutoff: 1_000_000,
            stabilize_tol: 1e-12,
            diverge_threshold: 1e8,
        }
    }
}

/// What a scan concluded about its series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesOutcome {
    /// Tail increments fell below the stabilization tolerance.
    Stabilized,
    /// The partial sum crossed the divergence threshold.
    Diverged,
    /// Neither condition triggered within the term budget.
    Exhausted,
}

/// Result of scanning a series of nonnegative terms.
#[derive(Debug, Clone)]
pub struct SeriesScan {
    /// Partial sum at the point the scan stopped.
    pub sum: f64,
    pub outcome: SeriesOutcome,
    /// Number of terms consumed.
    pub terms: usize,
    /// Relative size of the last term against the running sum.
    pub last_rel_increment: f64,
}

impl SeriesScan {
    pub fn stabilized(&self) -> bool {
        self.outcome == SeriesOutcome::Stabilized
    }

    pub fn diverged(&self) -> bool {
        self.outcome == SeriesOutcome::Diverged
    }
}

/// Minimum number of terms before a stabilization verdict is allowed; guards
/// against declaring victory on a slow-starting series.
const MIN_TERMS: usize = 10;

/// Accumulate `terms` with compensated (Kahan) summation until one of the
/// `SeriesControl` conditions triggers.
pub fn scan_series<I>(terms: I, ctl: &SeriesControl) -> SeriesScan
where
    I: IntoIterator<Item = f64>,
{
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut used = 0usize;
    let mut last_rel = f64::INFINITY;

    for term in terms.into_iter().take(ctl.cutoff) {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        used += 1;

        last_rel = if sum > 0.0 { term / sum } else { f64::INFINITY };
        if sum > ctl.diverge_threshold {
            return SeriesScan {
                sum,
                outcome: SeriesOutcome::Diverged,
                terms: used,
                last_rel_increment: last_rel,
            };
        }
        if used >= MIN_TERMS && last_rel < ctl.stabilize_tol {
            return SeriesScan {
                sum,
                outcome: SeriesOutcome::Stabilized,
                terms: used,
                last_rel_increment: last_rel,
            };
        }
    }

    SeriesScan {
        sum,
        outcome: SeriesOutcome::Exhausted,
        terms: used,
        last_rel_increment: last_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series_stabilizes() {
        let ctl = SeriesControl::default();
        let scan = scan_series((1..).map(|j| 0.5f64.powi(j)), &ctl);
        assert!(scan.stabilized());
        assert!((scan.sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growing_series_diverges() {
        let ctl = SeriesControl::default();
        let scan = scan_series((1..).map(|j| (j as f64).powi(2)), &ctl);
        assert!(scan.diverged());
        assert!(scan.sum > ctl.diverge_threshold);
    }

    #[test]
    fn harmonic_series_exhausts_budget() {
        let ctl = SeriesControl {
            cutoff: 10_000,
            ..SeriesControl::default()
        };
        let scan = scan_series((1..).map(|j| 1.0 / j as f64), &ctl);
        assert_eq!(scan.outcome, SeriesOutcome::Exhausted);
        assert_eq!(scan.terms, 10_000);
    }

    #[test]
    fn no_early_stabilization_before_min_terms() {
        // First term tiny, later terms large: must not stop at term 1.
        let terms = std::iter::once(1e-30).chain((1..).map(|_| 1e4));
        let scan = scan_series(terms, &SeriesControl::default());
        assert!(scan.diverged());
    }
}
