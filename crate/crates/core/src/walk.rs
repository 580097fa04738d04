//! Random walks on the half line `{0, 1, 2, ...}` with self loops.
//!
//! A walk is a coefficient family `(p_j, q_j, r_j)` with
//! `p_j + q_j + r_j = 1`, `p_j > 0` for `j >= 0`, `q_j > 0` for `j >= 1`,
//! and `q_0 = 0`. Its column-stochastic matrix is
//!
//! ```text
//!     | r_0  q_1            |
//! M = | p_0  r_1  q_2       |
//!     |      p_1  r_2  ...  |
//! ```
//!
//! Recurrence is classified through the two series
//!
//! ```text
//! C_T = sum_{j>=1} (q_1...q_j)/(p_1...p_j),
//! C_R = sum_{j>=1} (p_0...p_{j-1})/(q_1...q_j):
//! ```
//!
//! `C_T < inf` iff transient; among recurrent walks `C_R < inf` iff positive
//! recurrent. Since a finite scan cannot prove divergence, the built-in
//! families carry their known class as a declared fallback and the numeric
//! scan cross-checks it.
//!
//! The symmetric Jacobi matrix `J` with diagonal `r_j` and off-diagonal
//! `sqrt(p_j q_{j+1})` is the spectral side of the walk: for a reversible
//! walk with stationary weights `pi` it equals `D^{-1/2} M D^{1/2}` with
//! `D = diag(pi)` (checked empirically; note the order — `M` here acts on
//! measures, i.e. is column-stochastic).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::series::{scan_series, SeriesControl, SeriesOutcome, SeriesScan};
use crate::table::{MeasureSource, MeasureTable};

/// Tolerance for `p + q + r = 1` checks.
pub const TRIPLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid probability triple at site {site}: p={p}, q={q}, r={r}")]
    InvalidTriple { site: usize, p: f64, q: f64, r: f64 },
    #[error("homogeneous parameters out of range: p={p}, q={q}, r={r}")]
    BadHomogeneousParams { p: f64, q: f64, r: f64 },
    #[error("custom coefficient table is empty")]
    EmptyTable,
    #[error("site {site} exceeds the custom coefficient table (len {len})")]
    BeyondTable { site: usize, len: usize },
    #[error("self loop mass {mass} at site {site} is not in (0, 1)")]
    LoopMassOutOfRange { site: usize, mass: f64 },
    #[error("self loop mass {mass} at site {site} exhausts the {which} probability")]
    LoopMassExhausts {
        site: usize,
        mass: f64,
        which: &'static str,
    },
    #[error("recurrence class could not be resolved numerically and no class is declared")]
    IndeterminateClass,
    #[error("operation requires a positive recurrent walk, found {found:?}")]
    NotPositiveRecurrent { found: RecurrenceClass },
    #[error("signed alternating eigenvector requires a loop-free walk (loop at site {site})")]
    HasSelfLoop { site: usize },
    #[error("truncation size {n} too small (need at least 2)")]
    TruncationTooSmall { n: usize },
    #[error("unknown walk family '{0}'")]
    UnknownFamily(String),
}

/// Recurrence taxonomy of a half-line walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceClass {
    Transient,
    NullRecurrent,
    PositiveRecurrent,
}

impl RecurrenceClass {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, RecurrenceClass::Transient)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecurrenceClass::Transient => "transient",
            RecurrenceClass::NullRecurrent => "null_recurrent",
            RecurrenceClass::PositiveRecurrent => "positive_recurrent",
        }
    }
}

/// Where the mass of a new self loop is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TakeFrom {
    Right,
    Left,
    Proportional,
}

/// Built-in coefficient families. All formulas are exact, so the infinite
/// walk is represented by its family tag rather than by a finite table.
#[derive(Debug, Clone)]
enum Family {
    /// `p_j = p`, `q_j = q`, `r_j = r` for `j >= 1`; site 0 has
    /// `p_0 = 1 - r`, `r_0 = r`.
    Homogeneous { p: f64, q: f64, r: f64 },
    /// `p_i = (i+2)/(2i+2)`, `q_i = i/(2i+2)` — transient.
    ExampleA,
    /// `p_i = (i+1)/(2i+1)`, `q_i = i/(2i+1)` — null recurrent.
    ExampleB,
    /// `p_0 = 1`, `p_1 = q_1 = 1/2`, `p_i = (i-1)/(2i)`, `q_i = (i+1)/(2i)`
    /// for `i >= 2` — positive recurrent.
    ExampleC,
    /// Finite explicit coefficient table.
    Custom(Arc<Vec<(f64, f64, f64)>>),
}

/// Loop positions of a walk, possibly infinite (homogeneous `r > 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopSet {
    Empty,
    Finite(Vec<usize>),
    /// Loops at every site from `first` on.
    Infinite { first: usize },
}

impl LoopSet {
    pub fn first(&self) -> Option<usize> {
        match self {
            LoopSet::Empty => None,
            LoopSet::Finite(v) => v.first().copied(),
            LoopSet::Infinite { first } => Some(*first),
        }
    }
}

/// A random walk on the half line, defined by a base family plus a finite
/// set of per-site overrides (self loops added after construction).
///
/// Immutable after construction; all methods are pure.
#[derive(Debug, Clone)]
pub struct HalfLineWalk {
    family: Family,
    overrides: BTreeMap<usize, (f64, f64, f64)>,
    declared: Option<RecurrenceClass>,
}

fn check_triple(site: usize, p: f64, q: f64, r: f64) -> Result<(), WalkError> {
    let sum_ok = (p + q + r - 1.0).abs() <= TRIPLE_TOL;
    let p_ok = p > 0.0;
    let q_ok = if site == 0 { q == 0.0 } else { q > 0.0 };
    let r_ok = r >= 0.0;
    if sum_ok && p_ok && q_ok && r_ok {
        Ok(())
    } else {
        Err(WalkError::InvalidTriple { site, p, q, r })
    }
}

impl HalfLineWalk {
    /// Space-homogeneous walk: `(p, q, r)` for `j >= 1`, `p_0 = 1 - r`.
    ///
    /// The declared recurrence class follows the sign of `q - p`.
    pub fn homogeneous(p: f64, q: f64, r: f64) -> Result<Self, WalkError> {
        if !(p > 0.0 && q > 0.0 && r >= 0.0 && (p + q + r - 1.0).abs() <= TRIPLE_TOL && r < 1.0) {
            return Err(WalkError::BadHomogeneousParams { p, q, r });
        }
        let declared = if p > q {
            RecurrenceClass::Transient
        } else if p < q {
            RecurrenceClass::PositiveRecurrent
        } else {
            RecurrenceClass::NullRecurrent
        };
        Ok(Self {
            family: Family::Homogeneous { p, q, r },
            overrides: BTreeMap::new(),
            declared: Some(declared),
        })
    }

    /// `p_i = (i+2)/(2i+2)`, `q_i = i/(2i+2)`; transient even though
    /// `p_i - q_i -> 0`.
    pub fn example_a() -> Self {
        Self {
            family: Family::ExampleA,
            overrides: BTreeMap::new(),
            declared: Some(RecurrenceClass::Transient),
        }
    }

    /// `p_i = (i+1)/(2i+1)`, `q_i = i/(2i+1)`; null recurrent.
    pub fn example_b() -> Self {
        Self {
            family: Family::ExampleB,
            overrides: BTreeMap::new(),
            declared: Some(RecurrenceClass::NullRecurrent),
        }
    }

    /// `p_0 = 1`, `p_1 = q_1 = 1/2`, then `p_i = (i-1)/(2i)`,
    /// `q_i = (i+1)/(2i)`; positive recurrent.
    pub fn example_c() -> Self {
        Self {
            family: Family::ExampleC,
            overrides: BTreeMap::new(),
            declared: Some(RecurrenceClass::PositiveRecurrent),
        }
    }

    /// Walk given by an explicit finite coefficient table. Sites beyond the
    /// table cannot be addressed; series scans clamp to the table length.
    pub fn custom(
        table: Vec<(f64, f64, f64)>,
        declared: Option<RecurrenceClass>,
    ) -> Result<Self, WalkError> {
        if table.is_empty() {
            return Err(WalkError::EmptyTable);
        }
        for (site, &(p, q, r)) in table.iter().enumerate() {
            check_triple(site, p, q, r)?;
        }
        Ok(Self {
            family: Family::Custom(Arc::new(table)),
            overrides: BTreeMap::new(),
            declared,
        })
    }

    /// Build a named family; `params` is interpreted per family.
    pub fn make_family(name: &str, params: &[f64]) -> Result<Self, WalkError> {
        match name {
            "homogeneous" => {
                let p = params.first().copied().unwrap_or(0.0);
                let q = params.get(1).copied().unwrap_or(0.0);
                let r = params.get(2).copied().unwrap_or(1.0 - p - q);
                Self::homogeneous(p, q, r)
            }
            "example_a" => Ok(Self::example_a()),
            "example_b" => Ok(Self::example_b()),
            "example_c" => Ok(Self::example_c()),
            other => Err(WalkError::UnknownFamily(other.to_string())),
        }
    }

    pub fn declared_class(&self) -> Option<RecurrenceClass> {
        self.declared
    }

    pub fn with_declared_class(mut self, class: RecurrenceClass) -> Self {
        self.declared = Some(class);
        self
    }

    /// Largest addressable site for table-backed walks, `None` if unbounded.
    pub fn max_site(&self) -> Option<usize> {
        match &self.family {
            Family::Custom(t) => Some(t.len() - 1),
            _ => None,
        }
    }

    fn base_triple(&self, j: usize) -> (f64, f64, f64) {
        match &self.family {
            Family::Homogeneous { p, q, r } => {
                if j == 0 {
                    (1.0 - r, 0.0, *r)
                } else {
                    (*p, *q, *r)
                }
            }
            Family::ExampleA => {
                let i = j as f64;
                ((i + 2.0) / (2.0 * i + 2.0), i / (2.0 * i + 2.0), 0.0)
            }
            Family::ExampleB => {
                let i = j as f64;
                ((i + 1.0) / (2.0 * i + 1.0), i / (2.0 * i + 1.0), 0.0)
            }
            Family::ExampleC => match j {
                0 => (1.0, 0.0, 0.0),
                1 => (0.5, 0.5, 0.0),
                _ => {
                    let i = j as f64;
                    ((i - 1.0) / (2.0 * i), (i + 1.0) / (2.0 * i), 0.0)
                }
            },
            Family::Custom(t) => {
                assert!(
                    j < t.len(),
                    "site {j} beyond custom coefficient table (len {})",
                    t.len()
                );
                t[j]
            }
        }
    }

    /// Coefficient triple `(p_j, q_j, r_j)`.
    pub fn triple(&self, j: usize) -> (f64, f64, f64) {
        match self.overrides.get(&j) {
            Some(&t) => t,
            None => self.base_triple(j),
        }
    }

    pub fn p(&self, j: usize) -> f64 {
        self.triple(j).0
    }

    pub fn q(&self, j: usize) -> f64 {
        self.triple(j).1
    }

    pub fn r(&self, j: usize) -> f64 {
        self.triple(j).2
    }

    /// Check the walk invariants on sites `0..=up_to`.
    pub fn validate(&self, up_to: usize) -> Result<(), WalkError> {
        for j in 0..=up_to {
            let (p, q, r) = self.triple(j);
            check_triple(j, p, q, r)?;
        }
        Ok(())
    }

    /// Self-loop positions. `horizon` bounds the scan for table-backed and
    /// overridden walks; homogeneous walks with `r > 0` report an infinite
    /// loop set.
    pub fn loop_set(&self, horizon: usize) -> LoopSet {
        if let Family::Homogeneous { r, .. } = &self.family {
            if *r > 0.0 {
                // Overrides can only adjust finitely many sites; the set
                // stays cofinite, and the first loop is the smallest site
                // with r > 0.
                let mut first = 0;
                while self.r(first) == 0.0 {
                    first += 1;
                }
                return LoopSet::Infinite { first };
            }
        }
        let hi = match self.max_site() {
            Some(m) => m.min(horizon),
            None => horizon,
        };
        let sites: Vec<usize> = (0..=hi).filter(|&j| self.r(j) > 0.0).collect();
        if sites.is_empty() {
            LoopSet::Empty
        } else {
            LoopSet::Finite(sites)
        }
    }

    /// Add a self loop of mass `loop_mass` at `site`, taking the mass from
    /// the right, left, or both transition probabilities. The recurrence
    /// class is unchanged (a finite perturbation), so the declared class is
    /// carried over.
    pub fn with_self_loop(
        &self,
        site: usize,
        loop_mass: f64,
        take_from: TakeFrom,
    ) -> Result<Self, WalkError> {
        if !(loop_mass > 0.0 && loop_mass < 1.0) {
            return Err(WalkError::LoopMassOutOfRange {
                site,
                mass: loop_mass,
            });
        }
        if let Some(m) = self.max_site() {
            if site > m {
                return Err(WalkError::BeyondTable {
                    site,
                    len: m + 1,
                });
            }
        }
        let (p, q, r) = self.triple(site);
        let delta = loop_mass - r;
        let (new_p, new_q) = match take_from {
            TakeFrom::Right => (p - delta, q),
            TakeFrom::Left => (p, q - delta),
            TakeFrom::Proportional => {
                let scale = 1.0 - delta / (p + q);
                (p * scale, q * scale)
            }
        };
        if new_p <= 0.0 {
            return Err(WalkError::LoopMassExhausts {
                site,
                mass: loop_mass,
                which: "right",
            });
        }
        if site >= 1 && new_q <= 0.0 {
            return Err(WalkError::LoopMassExhausts {
                site,
                mass: loop_mass,
                which: "left",
            });
        }
        if site == 0 && new_q != 0.0 {
            return Err(WalkError::InvalidTriple {
                site,
                p: new_p,
                q: new_q,
                r: loop_mass,
            });
        }
        let mut out = self.clone();
        out.overrides.insert(site, (new_p, new_q, loop_mass));
        Ok(out)
    }

    fn series_cutoff(&self, ctl: &SeriesControl) -> usize {
        match self.max_site() {
            Some(m) => ctl.cutoff.min(m),
            None => ctl.cutoff,
        }
    }

    /// Terms of `C_T`: running product of `q_j / p_j` from `j = 1`.
    pub fn ct_terms(&self, cutoff: usize) -> impl Iterator<Item = f64> + '_ {
        let mut prod = 1.0f64;
        (1..=cutoff).map(move |j| {
            let (p, q, _) = self.triple(j);
            prod *= q / p;
            prod
        })
    }

    /// Terms of `C_R`: running product `p_0...p_{j-1} / (q_1...q_j)`.
    pub fn cr_terms(&self, cutoff: usize) -> impl Iterator<Item = f64> + '_ {
        let mut prod = 1.0f64;
        (1..=cutoff).map(move |j| {
            let prev_p = self.p(j - 1);
            let q = self.q(j);
            prod *= prev_p / q;
            prod
        })
    }

    /// Classify recurrence by scanning `C_T` and `C_R`. When a series does
    /// not resolve within the budget, falls back to the declared class and
    /// flags the result as relying on it; errors if there is nothing to fall
    /// back on.
    pub fn classify(&self, ctl: &SeriesControl) -> Result<RecurrenceReport, WalkError> {
        assert!(ctl.cutoff >= 10, "classification cutoff must be >= 10");
        let cutoff = self.series_cutoff(ctl);
        let ct = scan_series(self.ct_terms(cutoff), ctl);
        let cr = scan_series(self.cr_terms(cutoff), ctl);

        use SeriesOutcome::*;
        let numeric = match (ct.outcome, cr.outcome) {
            (Stabilized, Diverged) | (Stabilized, Exhausted) => Some(RecurrenceClass::Transient),
            (Diverged, Stabilized) | (Exhausted, Stabilized) => {
                Some(RecurrenceClass::PositiveRecurrent)
            }
            (Diverged, Diverged) => Some(RecurrenceClass::NullRecurrent),
            // C_T < inf and C_R < inf cannot both hold; treat as unresolved.
            (Stabilized, Stabilized) => None,
            (Diverged, Exhausted) | (Exhausted, Diverged) | (Exhausted, Exhausted) => None,
        };

        let (class, used_declared) = match (numeric, self.declared) {
            (Some(c), _) => (c, false),
            (None, Some(d)) => (d, true),
            (None, None) => return Err(WalkError::IndeterminateClass),
        };

        let consistent_with_declared = self.declared.map(|d| {
            let ct_contradiction = match d {
                RecurrenceClass::Transient => ct.diverged(),
                _ => ct.stabilized(),
            };
            let cr_contradiction = match d {
                RecurrenceClass::PositiveRecurrent => cr.diverged(),
                _ => cr.stabilized(),
            };
            !ct_contradiction && !cr_contradiction && numeric.is_none_or(|n| n == d)
        });

        Ok(RecurrenceReport {
            class,
            ct,
            cr,
            used_declared,
            consistent_with_declared,
        })
    }

    /// Stationary distribution `pi(j)` for `0 <= j <= n`,
    /// `pi(j) = (p_0...p_{j-1}) / (q_1...q_j) / (1 + C_R)` with `pi(0)`'s
    /// product empty. Requires a positive recurrent walk.
    pub fn stationary_distribution(
        &self,
        n: usize,
        ctl: &SeriesControl,
    ) -> Result<MeasureTable, WalkError> {
        let report = self.classify(ctl)?;
        if report.class != RecurrenceClass::PositiveRecurrent {
            return Err(WalkError::NotPositiveRecurrent {
                found: report.class,
            });
        }
        let c_r = report.cr.sum;
        let norm = 1.0 / (1.0 + c_r);
        let mut values = Vec::with_capacity(n + 1);
        values.push(norm);
        let mut prod = 1.0f64;
        for j in 1..=n {
            prod *= self.p(j - 1) / self.q(j);
            values.push(norm * prod);
        }
        Ok(MeasureTable::new(values, MeasureSource::Stationary))
    }

    /// Signed alternating eigenvector `pi'(j) = (-1)^j (p_{j-1}...p_0)/(q_j...q_1)`
    /// with `M pi' = -pi'`. Only defined for loop-free walks.
    pub fn signed_eigenvector(&self, n: usize) -> Result<Vec<f64>, WalkError> {
        for j in 0..=n {
            if self.r(j) > 0.0 {
                return Err(WalkError::HasSelfLoop { site: j });
            }
        }
        if let LoopSet::Infinite { first } = self.loop_set(n) {
            return Err(WalkError::HasSelfLoop { site: first });
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(1.0);
        let mut prod = 1.0f64;
        for j in 1..=n {
            prod *= self.p(j - 1) / self.q(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            values.push(sign * prod);
        }
        Ok(values)
    }

    /// Jacobi matrix of the un-truncated walk restricted to `{0..n}`:
    /// diagonal `r_j`, off-diagonal `sqrt(p_j q_{j+1})`.
    pub fn jacobi_matrix(&self, n: usize) -> SymTridiag {
        let diag: Vec<f64> = (0..=n).map(|j| self.r(j)).collect();
        let off: Vec<f64> = (0..n).map(|j| (self.p(j) * self.q(j + 1)).sqrt()).collect();
        SymTridiag { diag, off }
    }

    /// Truncate to states `{0..n}`, redirecting the forward mass at the
    /// boundary backward: `q_n <- q_n + p_n`, `p_n <- 0`. The loop structure
    /// below `n` is untouched, so the dimension of `H^(S)` is not disturbed
    /// by a spurious boundary loop.
    pub fn truncate(&self, n: usize) -> Result<TruncatedChain, WalkError> {
        if n < 2 {
            return Err(WalkError::TruncationTooSmall { n });
        }
        if let Some(m) = self.max_site() {
            if n > m {
                return Err(WalkError::BeyondTable { site: n, len: m + 1 });
            }
        }
        let mut triples: Vec<(f64, f64, f64)> = (0..=n).map(|j| self.triple(j)).collect();
        let (p_n, q_n, r_n) = triples[n];
        triples[n] = (0.0, q_n + p_n, r_n);
        Ok(TruncatedChain {
            triples,
            boundary: BoundaryRule {
                site: n,
                redirected_mass: p_n,
            },
        })
    }
}

/// Outcome of a recurrence classification.
#[derive(Debug, Clone)]
pub struct RecurrenceReport {
    pub class: RecurrenceClass,
    /// Scan of `C_T`.
    pub ct: SeriesScan,
    /// Scan of `C_R`.
    pub cr: SeriesScan,
    /// True when the class came from the declaration rather than the scans.
    pub used_declared: bool,
    /// `None` when no class was declared; otherwise whether the scans are
    /// compatible with the declaration.
    pub consistent_with_declared: Option<bool>,
}

/// Record of the reflection applied at the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRule {
    pub site: usize,
    pub redirected_mass: f64,
}

/// Finite chain on `{0..n}` obtained by truncating a half-line walk.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    triples: Vec<(f64, f64, f64)>,
    pub boundary: BoundaryRule,
}

impl TruncatedChain {
    /// Number of states (`n + 1`).
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Largest state index `n`.
    pub fn n(&self) -> usize {
        self.triples.len() - 1
    }

    pub fn triple(&self, j: usize) -> (f64, f64, f64) {
        self.triples[j]
    }

    pub fn p(&self, j: usize) -> f64 {
        self.triples[j].0
    }

    pub fn q(&self, j: usize) -> f64 {
        self.triples[j].1
    }

    pub fn r(&self, j: usize) -> f64 {
        self.triples[j].2
    }

    pub fn loop_sites(&self) -> Vec<usize> {
        (0..self.triples.len()).filter(|&j| self.r(j) > 0.0).collect()
    }

    /// Column-stochastic transition matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let (p, q, r) = self.triples[j];
            m[(j, j)] = r;
            if j + 1 < n {
                m[(j + 1, j)] = p;
            }
            if j >= 1 {
                m[(j - 1, j)] = q;
            }
        }
        m
    }

    /// Jacobi matrix of the truncated chain (boundary-corrected
    /// coefficients, so it matches `A^dagger B` of the arc operators
    /// exactly).
    pub fn jacobi_matrix(&self) -> SymTridiag {
        let n = self.len();
        let diag: Vec<f64> = (0..n).map(|j| self.r(j)).collect();
        let off: Vec<f64> = (0..n - 1)
            .map(|j| (self.p(j) * self.q(j + 1)).sqrt())
            .collect();
        SymTridiag { diag, off }
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal bands.
/// Symmetry is a property of the representation, not a numerical accident.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..self.off.len() {
            m[(i, i + 1)] = self.off[i];
            m[(i + 1, i)] = self.off[i];
        }
        m
    }
}
