//! Time-averaged limit measures and the localization bounds built on them.
//!
//! Two independent routes compute the same object on a truncated system:
//!
//! - **direct**: the Cesaro average `(1/T) sum_{t<T} P(X_t = u)` by repeated
//!   application of `U`;
//! - **spectral**: `mu(u) = sum_theta sum_{d} |<delta_(u,d), Pi_theta
//!   psi_0>|^2`, where `Pi_theta` projects onto the full eigenspace of a
//!   distinct eigenphase. Degenerate phases are handled with eigenspace
//!   projectors, never per-vector rank-1 terms.
//!
//! The spectral table splits into the contribution of accepted mass points
//! (square-summable Jacobi eigenvectors), the contribution of `H^(S)`, and a
//! delocalized remainder that thins out as the truncation grows. The
//! `H^(S)` component uses the analytic signed reflected basis, including the
//! terminal vector when it is square-summable (transient walks), so it
//! approximates the infinite-line object rather than the truncated one.

use num_complex::Complex64;
use thiserror::Error;

use crate::arc::{Direction, StateVector, WalkOperators};
use crate::series::{scan_series, SeriesControl, SeriesOutcome, SeriesScan};
use crate::spectral::{
    self, eigensolve, lift, mass_points, signed_reflected_basis, JacobiEigenpairs,
    LiftedEigenvector, MassPointOptions, SignedReflectedBasis, SpectralError, CLUSTER_WINDOW,
};
use crate::table::{MeasureSource, MeasureTable};
use crate::walk::{HalfLineWalk, LoopSet, RecurrenceClass, WalkError};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("initial state has no amplitude left (norm {norm:.3e})")]
    ZeroState { norm: f64 },
    #[error("arc ({vertex}; {dir:?}) does not exist in this truncation")]
    MissingArc { vertex: usize, dir: Direction },
    #[error("H^(S) span is empty; nothing to project onto")]
    EmptyHsSpan,
    #[error("mass-point projection left residual overlap {residual:.3e} > 1e-10")]
    MassPointProjection { residual: f64 },
    #[error("loop set mismatch: expected {expected}, found {found}")]
    LoopPrecondition { expected: String, found: String },
    #[error("series {name} did not stabilize (outcome {outcome:?}); walk class contradicted")]
    SeriesContradiction {
        name: &'static str,
        outcome: SeriesOutcome,
    },
    #[error("closed form requires drift q > p, got p = {p}, q = {q}")]
    ClosedFormDrift { p: f64, q: f64 },
}

/// Series thresholds for the measure-side sums (`C_R'`, `||eta_n||^2`,
/// ...). Tolerances match the recurrence scans; the term budget is larger
/// because the transient families converge with `1/l^2` tails that need a
/// little over 1e6 terms to pass the relative-increment test.
pub fn measure_series_control() -> SeriesControl {
    SeriesControl {
        cutoff: 4_000_000,
        ..SeriesControl::default()
    }
}

// ---------------------------------------------------------------------
// Initial states
// ---------------------------------------------------------------------

/// An initial state anchored at one vertex: amplitudes only on the arcs
/// attached to it.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub anchor: usize,
    pub state: StateVector,
}

/// `psi_0 = a_j`, the incidence vector (already unit norm).
pub fn incidence_state(ops: &WalkOperators, j: usize) -> InitialState {
    InitialState {
        anchor: j,
        state: ops.incidence_vector(j),
    }
}

/// `psi_0 = delta` on a single arc.
pub fn arc_state(
    ops: &WalkOperators,
    j: usize,
    dir: Direction,
) -> Result<InitialState, MeasureError> {
    let idx = ops
        .basis()
        .index_of(j, dir)
        .ok_or(MeasureError::MissingArc { vertex: j, dir })?;
    let mut state = StateVector::zeros(ops.dim());
    state.amps[idx] = Complex64::new(1.0, 0.0);
    Ok(InitialState { anchor: j, state })
}

/// Normalized combination of the arcs at `j`, coefficients in `L, O, R`
/// order; weights on missing arcs must be zero.
pub fn custom_state(
    ops: &WalkOperators,
    j: usize,
    coeffs: [Complex64; 3],
) -> Result<InitialState, MeasureError> {
    let dirs = [Direction::Left, Direction::Loop, Direction::Right];
    let mut state = StateVector::zeros(ops.dim());
    for (c, &dir) in coeffs.iter().zip(&dirs) {
        if c.norm() == 0.0 {
            continue;
        }
        let idx = ops
            .basis()
            .index_of(j, dir)
            .ok_or(MeasureError::MissingArc { vertex: j, dir })?;
        state.amps[idx] = *c;
    }
    let norm = state.norm();
    if norm < 1e-14 {
        return Err(MeasureError::ZeroState { norm });
    }
    Ok(InitialState {
        anchor: j,
        state: state.scale(Complex64::new(1.0 / norm, 0.0)),
    })
}

// ---------------------------------------------------------------------
// Spectral data of one truncation
// ---------------------------------------------------------------------

/// Options of the decomposition pipeline.
#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub series: SeriesControl,
    pub mass: MassPointOptions,
    /// Additional truncation sizes used by the mass-point stability test.
    pub extra_truncations: Vec<usize>,
    /// Eigenvalue range slack passed to the eigensolver.
    pub range_tol: f64,
}

impl DecomposeOptions {
    pub fn for_truncation(n: usize) -> Self {
        Self {
            series: SeriesControl::default(),
            mass: MassPointOptions::default(),
            extra_truncations: vec![(n / 2).max(10)],
            range_tol: 1e-9,
        }
    }
}

/// Everything the spectral measure needs about one truncated system.
#[derive(Debug)]
pub struct SpectralData {
    pub ops: WalkOperators,
    pub pairs: JacobiEigenpairs,
    pub lifts: Vec<LiftedEigenvector>,
    /// Analytic `H^(S)` basis; `None` when the loop set is empty.
    pub hs: Option<SignedReflectedBasis>,
    /// Accepted mass-point eigenvalues.
    pub mass_lambdas: Vec<f64>,
    pub class: RecurrenceClass,
}

impl SpectralData {
    /// Lifts at accepted mass points.
    pub fn mass_point_lifts(&self) -> Vec<&LiftedEigenvector> {
        self.lifts
            .iter()
            .filter(|l| {
                self.mass_lambdas
                    .iter()
                    .any(|&m| (l.lambda - m).abs() < 1e-9)
            })
            .collect()
    }

    /// Orthonormal basis of the analytic `H^(S)` span used for measures:
    /// the exact pair vectors plus the terminal vector when it is
    /// square-summable.
    pub fn hs_span(&self) -> Vec<StateVector> {
        let mut span = Vec::new();
        if let Some(hs) = &self.hs {
            for eta in &hs.pairs {
                span.push(eta.normalized());
            }
            if let Some(term) = &hs.terminal {
                if term.square_summable {
                    span.push(term.normalized());
                }
            }
        }
        orthonormalize(span)
    }

    /// `H^(S)`-side eigenvectors of the truncated system: the pair vectors
    /// (exact by construction) plus the terminal vector when its boxed
    /// residual sits at the eigenvector noise floor, which happens for
    /// geometric tails. Without it the exact eigenbasis of the box would
    /// miss a direction it numerically contains.
    pub fn hs_exact(&self) -> Vec<StateVector> {
        let mut out = Vec::new();
        if let Some(hs) = &self.hs {
            for eta in &hs.pairs {
                out.push(eta.normalized());
            }
            if let Some(term) = &hs.terminal {
                if term.box_residual < 1e-9 {
                    out.push(term.normalized());
                }
            }
        }
        out
    }
}

fn orthonormalize(vectors: Vec<StateVector>) -> Vec<StateVector> {
    let mut basis: Vec<StateVector> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let c = b.inner(&v);
                v.sub_scaled(c, b);
            }
        }
        let n = v.norm();
        if n > 1e-10 {
            basis.push(v.scale(Complex64::new(1.0 / n, 0.0)));
        }
    }
    basis
}

/// Run the full pipeline for `walk` truncated at `n`: operators, Jacobi
/// eigenpairs, lifts, analytic `H^(S)`, and mass-point acceptance across
/// the extra truncation sizes.
pub fn decompose(
    walk: &HalfLineWalk,
    n: usize,
    opts: &DecomposeOptions,
) -> Result<SpectralData, MeasureError> {
    let class = walk.classify(&opts.series)?.class;
    let chain = walk.truncate(n)?;
    let ops = WalkOperators::build(chain);
    let pairs = eigensolve(&ops.chain().jacobi_matrix(), opts.range_tol)?;
    let lifts = lift(&pairs, &ops)?;

    let hs = match walk.loop_set(n) {
        LoopSet::Empty => None,
        LoopSet::Infinite { .. } => return Err(SpectralError::InfiniteLoopSet.into()),
        LoopSet::Finite(_) => Some(signed_reflected_basis(
            walk,
            &ops,
            class,
            &measure_series_control(),
        )?),
    };

    let mut extra_pairs = Vec::new();
    for &m in &opts.extra_truncations {
        if m != n {
            extra_pairs.push(eigensolve(
                &walk.truncate(m)?.jacobi_matrix(),
                opts.range_tol,
            )?);
        }
    }
    let mut refs: Vec<&JacobiEigenpairs> = extra_pairs.iter().collect();
    refs.push(&pairs);
    let mass_lambdas = mass_points(&refs, &opts.mass)
        .into_iter()
        .map(|p| p.lambda)
        .collect();

    Ok(SpectralData {
        ops,
        pairs,
        lifts,
        hs,
        mass_lambdas,
        class,
    })
}

/// Remove the overlap with every accepted mass-point lift and renormalize
/// ("assumption (1)" states). Errors when the projection leaves residual
/// overlap above 1e-10 or annihilates the state.
pub fn project_out_mass_points(
    state: &StateVector,
    data: &SpectralData,
) -> Result<StateVector, MeasureError> {
    let lifts: Vec<StateVector> = data
        .mass_point_lifts()
        .iter()
        .map(|l| l.normalized())
        .collect();
    let basis = orthonormalize(lifts);
    let mut out = state.clone();
    for _ in 0..2 {
        for b in &basis {
            let c = b.inner(&out);
            out.sub_scaled(c, b);
        }
    }
    let norm = out.norm();
    if norm < 1e-10 {
        return Err(MeasureError::ZeroState { norm });
    }
    let out = out.scale(Complex64::new(1.0 / norm, 0.0));
    let residual = basis
        .iter()
        .map(|b| b.inner(&out).norm())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(MeasureError::MassPointProjection { residual });
    }
    Ok(out)
}

/// Project onto the analytic `H^(S)` span and renormalize.
pub fn project_onto_hs(
    state: &StateVector,
    data: &SpectralData,
) -> Result<StateVector, MeasureError> {
    let span = data.hs_span();
    if span.is_empty() {
        return Err(MeasureError::EmptyHsSpan);
    }
    let mut out = StateVector::zeros(state.len());
    for b in &span {
        let c = b.inner(state);
        out.add_scaled(c, b);
    }
    let norm = out.norm();
    if norm < 1e-12 {
        return Err(MeasureError::ZeroState { norm });
    }
    Ok(out.scale(Complex64::new(1.0 / norm, 0.0)))
}

// ---------------------------------------------------------------------
// Limit measures
// ---------------------------------------------------------------------

/// Split of the spectral measure by origin. `residual` is the exact
/// remainder `table - mass_point - (exact H^(S) part)`; it shrinks with the
/// truncation for initial states covered by the mass-point and `H^(S)`
/// projections.
#[derive(Debug, Clone)]
pub struct MeasureComponents {
    pub mass_point: MeasureTable,
    /// Analytic `H^(S)` contribution (terminal vector included when
    /// square-summable).
    pub h_s: MeasureTable,
    pub residual: MeasureTable,
}

#[derive(Debug, Clone)]
pub struct LimitMeasureResult {
    pub table: MeasureTable,
    pub components: Option<MeasureComponents>,
    /// Set when two phase clusters sit closer than ten cluster windows.
    pub degenerate_clusters: bool,
}

fn position_profile(ops: &WalkOperators, v: &StateVector) -> Vec<f64> {
    let mut out = vec![0.0; ops.vertex_count()];
    for (i, &(j, _)) in ops.basis().arcs().iter().enumerate() {
        out[j] += v.amps[i].norm_sqr();
    }
    out
}

fn project_span(span: &[StateVector], psi: &StateVector) -> StateVector {
    let mut out = StateVector::zeros(psi.len());
    for b in span {
        let c = b.inner(psi);
        out.add_scaled(c, b);
    }
    out
}

/// Time-averaged limit measure of the truncated system by eigenspace
/// projectors, `mu(u) = sum_theta sum_d |<delta_(u,d), Pi_theta psi_0>|^2`.
///
/// The table uses only exact eigenvectors of the truncated `U` (lifts and
/// pair vectors), so on the finite system it sums to `||psi_0||^2`. The
/// component split reports the accepted-mass-point part and the analytic
/// `H^(S)` part separately.
pub fn spectral_limit_measure(
    data: &SpectralData,
    psi0: &StateVector,
) -> Result<LimitMeasureResult, MeasureError> {
    let ops = &data.ops;
    let n_vertices = ops.vertex_count();

    // Members of the exact eigenbasis with phase pushed to (-pi, pi]
    // (minus-branch vectors near lambda = -1 wrap around).
    struct Member {
        phase: f64,
        vector: StateVector,
        is_mass_point: bool,
        is_hs: bool,
    }
    let mut members: Vec<Member> = Vec::with_capacity(data.lifts.len() + 4);
    for l in &data.lifts {
        let is_mass_point = data
            .mass_lambdas
            .iter()
            .any(|&m| (l.lambda - m).abs() < 1e-9);
        members.push(Member {
            phase: l.phase(),
            vector: l.normalized(),
            is_mass_point,
            is_hs: false,
        });
    }
    for eta in data.hs_exact() {
        members.push(Member {
            phase: std::f64::consts::PI,
            vector: eta,
            is_mass_point: false,
            is_hs: true,
        });
    }
    for m in members.iter_mut() {
        if m.phase <= -std::f64::consts::PI + CLUSTER_WINDOW {
            m.phase += 2.0 * std::f64::consts::PI;
        }
    }
    members.sort_by(|a, b| a.phase.partial_cmp(&b.phase).unwrap());

    let mut table = vec![0.0f64; n_vertices];
    let mut mp_part = vec![0.0f64; n_vertices];
    let mut hs_exact_part = vec![0.0f64; n_vertices];
    let mut degenerate = false;

    let mut start = 0;
    while start < members.len() {
        let mut end = start + 1;
        while end < members.len() && members[end].phase - members[end - 1].phase <= CLUSTER_WINDOW {
            end += 1;
        }
        if end < members.len()
            && members[end].phase - members[end - 1].phase < 10.0 * CLUSTER_WINDOW
        {
            degenerate = true;
        }

        let cluster = orthonormalize(members[start..end].iter().map(|m| m.vector.clone()).collect());
        let proj = project_span(&cluster, psi0);
        for (u, val) in position_profile(ops, &proj).into_iter().enumerate() {
            table[u] += val;
        }

        let mp_members: Vec<StateVector> = members[start..end]
            .iter()
            .filter(|m| m.is_mass_point)
            .map(|m| m.vector.clone())
            .collect();
        if !mp_members.is_empty() {
            let proj = project_span(&orthonormalize(mp_members), psi0);
            for (u, val) in position_profile(ops, &proj).into_iter().enumerate() {
                mp_part[u] += val;
            }
        }
        let hs_members: Vec<StateVector> = members[start..end]
            .iter()
            .filter(|m| m.is_hs)
            .map(|m| m.vector.clone())
            .collect();
        if !hs_members.is_empty() {
            let proj = project_span(&orthonormalize(hs_members), psi0);
            for (u, val) in position_profile(ops, &proj).into_iter().enumerate() {
                hs_exact_part[u] += val;
            }
        }

        start = end;
    }

    // Analytic H^(S) component, with the terminal direction when summable.
    let hs_span = data.hs_span();
    let hs_analytic: Vec<f64> = if hs_span.is_empty() {
        vec![0.0; n_vertices]
    } else {
        position_profile(ops, &project_span(&hs_span, psi0))
    };

    let residual: Vec<f64> = (0..n_vertices)
        .map(|u| table[u] - mp_part[u] - hs_exact_part[u])
        .collect();

    let n = ops.chain().n();
    Ok(LimitMeasureResult {
        table: MeasureTable::new(table, MeasureSource::Spectral { n }),
        components: Some(MeasureComponents {
            mass_point: MeasureTable::new(mp_part, MeasureSource::Spectral { n }),
            h_s: MeasureTable::new(hs_analytic, MeasureSource::Spectral { n }),
            residual: MeasureTable::new(residual, MeasureSource::Spectral { n }),
        }),
        degenerate_clusters: degenerate,
    })
}

/// Cesaro average over `t = 0..t_horizon-1` by direct evolution.
pub fn direct_limit_measure(
    ops: &WalkOperators,
    psi0: &StateVector,
    t_horizon: usize,
) -> LimitMeasureResult {
    let (table, _diag) = ops.evolve_and_average(psi0, t_horizon);
    LimitMeasureResult {
        table,
        components: None,
        degenerate_clusters: false,
    }
}

/// Lower bound on the time-averaged limit measure at `(u, v)`:
/// `|<a_v, psi_0>|^2 pi(u) pi(v) + sum_d |<delta_(u,d), Pi_S psi_0>|^2`.
#[derive(Debug, Clone, Copy)]
pub struct LowerBound {
    pub value: f64,
    pub pi_term: f64,
    pub hs_term: f64,
    /// False when no stationary distribution was available and only the
    /// `H^(S)` term is reported.
    pub pi_available: bool,
}

pub fn lower_bound_general(
    ops: &WalkOperators,
    psi0: &StateVector,
    u: usize,
    v: usize,
    pi: Option<&MeasureTable>,
    hs_profile: Option<&MeasureTable>,
) -> LowerBound {
    let overlap = ops.incidence_vector(v).inner(psi0).norm_sqr();
    let (pi_term, pi_available) = match pi {
        Some(pi) => (overlap * pi.get(u) * pi.get(v), true),
        None => (0.0, false),
    };
    let hs_term = hs_profile.map_or(0.0, |h| h.get(u));
    LowerBound {
        value: pi_term + hs_term,
        pi_term,
        hs_term,
        pi_available,
    }
}

/// Closed form of the time-averaged limit measure for the space-homogeneous
/// positive recurrent walk (`p < q`, `r = 0`, `p_0 = 1`) started at `j`:
/// `mu(i, j) = (2 delta_0(j) + (1 - delta_0(j))) pi(j) pi(i)` with the
/// geometric stationary distribution.
#[derive(Debug, Clone)]
pub struct ClosedFormMeasure {
    pub table: MeasureTable,
    /// Total trapped mass `c_j < 1`.
    pub trapped_mass: f64,
}

pub fn homogeneous_closed_form(
    p: f64,
    q: f64,
    j: usize,
    n_max: usize,
) -> Result<ClosedFormMeasure, MeasureError> {
    if p >= q {
        return Err(MeasureError::ClosedFormDrift { p, q });
    }
    let pi = |i: usize| -> f64 {
        if i == 0 {
            (1.0 - p / q) / 2.0
        } else {
            (1.0 - p / q) / (2.0 * q) * (p / q).powi(i as i32 - 1)
        }
    };
    let weight = if j == 0 { 2.0 } else { 1.0 };
    let factor = weight * pi(j);
    let values: Vec<f64> = (0..=n_max).map(|i| factor * pi(i)).collect();
    Ok(ClosedFormMeasure {
        table: MeasureTable::new(values, MeasureSource::ClosedForm("homogeneous".into())),
        trapped_mass: factor,
    })
}

/// Support prediction for `H^(S)` from the loop set and recurrence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportSet {
    Empty,
    /// All vertices `j >= first`.
    From(usize),
    /// Vertices `first <= j <= last`.
    Range(usize, usize),
}

impl SupportSet {
    pub fn contains(&self, j: usize) -> bool {
        match self {
            SupportSet::Empty => false,
            SupportSet::From(first) => j >= *first,
            SupportSet::Range(a, b) => (*a..=*b).contains(&j),
        }
    }
}

/// `supp(H^(S))` table: empty without loops; for `1 <= |S| = n < inf`
/// everything from the first loop when transient, empty when recurrent with
/// one loop, the loop interval when recurrent with several; everything from
/// the first loop when `|S| = inf`.
pub fn supp_h_s(loops: &LoopSet, class: RecurrenceClass) -> SupportSet {
    match loops {
        LoopSet::Empty => SupportSet::Empty,
        LoopSet::Infinite { first } => SupportSet::From(*first),
        LoopSet::Finite(sites) => {
            if class.is_recurrent() {
                if sites.len() == 1 {
                    SupportSet::Empty
                } else {
                    SupportSet::Range(sites[0], *sites.last().unwrap())
                }
            } else {
                SupportSet::From(sites[0])
            }
        }
    }
}

// ---------------------------------------------------------------------
// Corollary measures for one and two loops
// ---------------------------------------------------------------------

fn loop_precondition(
    walk: &HalfLineWalk,
    horizon: usize,
    expected: &[usize],
) -> Result<(), MeasureError> {
    let found = walk.loop_set(horizon);
    let ok = matches!(&found, LoopSet::Finite(sites) if sites == expected);
    if ok {
        Ok(())
    } else {
        Err(MeasureError::LoopPrecondition {
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        })
    }
}

/// The orthogonal-to-incidence building blocks of the corollary measures:
/// `aperp_j` is the block of the normalized signed reflected vector at
/// vertex `j`, of norm `sqrt(w_j)`. Each block carries the reversed
/// amplitude profile `(-sqrt(p), +sqrt(q))` with sign `(-1)^j`; the
/// loop-closing block at the far loop is rescaled by
/// `sqrt(r_n / (p_n (1 - p_n)))` so that its norm is `sqrt(w_n)` too —
/// without it the sum of blocks is not the unit `H^(S)` vector and the
/// corollary formula disagrees with the direct projection.
fn accumulate_aperp_overlap(
    ops: &WalkOperators,
    walk: &HalfLineWalk,
    psi0: &StateVector,
    j: usize,
    weight_sqrt: f64,
    loop_closing: Option<usize>,
) -> Complex64 {
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let w = sign * weight_sqrt;
    let mut aperp = StateVector::zeros(ops.dim());
    let put = |v: &mut StateVector, dir: Direction, value: f64| {
        if let Some(idx) = ops.basis().index_of(j, dir) {
            v.amps[idx] = Complex64::new(value, 0.0);
        }
    };
    if j == 0 {
        let (p, _, r) = walk.triple(0);
        put(&mut aperp, Direction::Loop, -w * p.sqrt());
        put(&mut aperp, Direction::Right, w * r.sqrt());
    } else if loop_closing == Some(j) {
        let (p, q, r) = walk.triple(j);
        put(&mut aperp, Direction::Left, -w * (r / (1.0 - p)).sqrt());
        put(&mut aperp, Direction::Loop, w * (q / (1.0 - p)).sqrt());
    } else {
        let (p, q, _) = walk.triple(j);
        put(&mut aperp, Direction::Left, -w * p.sqrt());
        put(&mut aperp, Direction::Right, w * q.sqrt());
    }
    aperp.inner(psi0)
}

/// Result of a corollary-style measure evaluation.
#[derive(Debug, Clone)]
pub struct CorollaryMeasure {
    pub table: MeasureTable,
    /// `|sum_j <aperp_j, psi_0>|^2`.
    pub weight: f64,
    pub pi_prime: MeasureTable,
    pub c_r_prime: f64,
}

/// Transient walk with a single loop at the origin:
/// `mu(i) = |sum_j <aperp_j, psi_0>|^2 pi'(i)` with
/// `pi'(j) = (delta_0(j) + (1 - delta_0(j)) r_0 q_1...q_{j-1}/(p_1...p_j))
/// / (1 + C_R')`.
pub fn corollary2_measure(
    walk: &HalfLineWalk,
    ops: &WalkOperators,
    psi0: &StateVector,
    ctl: &SeriesControl,
) -> Result<CorollaryMeasure, MeasureError> {
    let n = ops.chain().n();
    loop_precondition(walk, n, &[0])?;

    // C_R' = sum_{j>=1} r_0 q_1...q_{j-1} / (p_1...p_j).
    let r0 = walk.r(0);
    let mut prod = r0;
    let scan = scan_series(
        (1..).map(|j| {
            prod /= walk.p(j);
            let term = prod;
            prod *= walk.q(j);
            term
        }),
        ctl,
    );
    if !scan.stabilized() {
        return Err(MeasureError::SeriesContradiction {
            name: "C_R'",
            outcome: scan.outcome,
        });
    }
    let c_r_prime = scan.sum;
    let norm = 1.0 / (1.0 + c_r_prime);

    let mut pi_values = Vec::with_capacity(n + 1);
    pi_values.push(norm);
    let mut prod = r0;
    for j in 1..=n {
        prod /= walk.p(j);
        pi_values.push(norm * prod);
        prod *= walk.q(j);
    }
    let pi_prime = MeasureTable::new(pi_values, MeasureSource::ClosedForm("corollary2".into()));

    let mut overlap = Complex64::new(0.0, 0.0);
    for j in 0..=n {
        overlap +=
            accumulate_aperp_overlap(ops, walk, psi0, j, pi_prime.get(j).sqrt(), None);
    }
    let weight = overlap.norm_sqr();

    let values: Vec<f64> = (0..=n).map(|i| weight * pi_prime.get(i)).collect();
    Ok(CorollaryMeasure {
        table: MeasureTable::new(values, MeasureSource::ClosedForm("corollary2".into())),
        weight,
        pi_prime,
        c_r_prime,
    })
}

/// Recurrent walk with loops exactly at `0` and `m > 0`: the finite-sum
/// analogue of the one-loop corollary. The measure is supported inside
/// `{0..m}`.
pub fn corollary3_measure(
    walk: &HalfLineWalk,
    ops: &WalkOperators,
    psi0: &StateVector,
) -> Result<CorollaryMeasure, MeasureError> {
    let n = ops.chain().n();
    let sites = match walk.loop_set(n) {
        LoopSet::Finite(sites) if sites.len() == 2 && sites[0] == 0 => sites,
        other => {
            return Err(MeasureError::LoopPrecondition {
                expected: "[0, m]".into(),
                found: format!("{other:?}"),
            })
        }
    };
    let m = sites[1];
    let r0 = walk.r(0);

    // Raw profile: 1 at the origin, C_R'-type products inside, and the
    // loop-closing factor r_0 q_1...q_{m-1} (1 - p_m) / (p_1...p_{m-1} r_m)
    // at m. The normalizer 1 + C_R^(m)' is the sum over 1..=m plus one.
    let mut raw = vec![0.0f64; n + 1];
    raw[0] = 1.0;
    let mut prod = r0;
    for j in 1..m {
        prod /= walk.p(j);
        raw[j] = prod;
        prod *= walk.q(j);
    }
    let (p_m, _, r_m) = walk.triple(m);
    let mut head = r0;
    for j in 1..m {
        head *= walk.q(j) / walk.p(j);
    }
    raw[m] = head / r_m * (1.0 - p_m);

    let c_r_n_prime: f64 = raw[1..=m].iter().sum();
    let norm = 1.0 / (1.0 + c_r_n_prime);
    let pi_values: Vec<f64> = raw.iter().map(|&x| norm * x).collect();
    let pi_prime = MeasureTable::new(pi_values, MeasureSource::ClosedForm("corollary3".into()));

    let mut overlap = Complex64::new(0.0, 0.0);
    for j in 0..=m {
        overlap +=
            accumulate_aperp_overlap(ops, walk, psi0, j, pi_prime.get(j).sqrt(), Some(m));
    }
    let weight = overlap.norm_sqr();

    let values: Vec<f64> = (0..=n).map(|i| weight * pi_prime.get(i)).collect();
    Ok(CorollaryMeasure {
        table: MeasureTable::new(values, MeasureSource::ClosedForm("corollary3".into())),
        weight,
        pi_prime,
        c_r_prime: c_r_n_prime,
    })
}

// ---------------------------------------------------------------------
// Terminal eta norm and the two-route identity
// ---------------------------------------------------------------------

/// Scan of `||eta_n||^2` together with the two-route partial-sum identity:
/// with `R_l = (q_1...q_l)/(p_1...p_l)`, the tail satisfies
/// `sum_{l=j_n+1}^{L} Q_l^2 = 2 sum_{l=j_n+1}^{L} R_l + R_{j_n} - R_L`
/// exactly at every cutoff `L` (the boundary term `-R_L` vanishes in the
/// transient limit).
#[derive(Debug, Clone)]
pub struct EtaNormScan {
    pub scan: SeriesScan,
    pub head: f64,
    /// Largest relative deviation between the two routes over the partial
    /// sums visited.
    pub identity_max_dev: f64,
    /// Sparse `(l, lhs, rhs)` checkpoints for reporting.
    pub checkpoints: Vec<(usize, f64, f64)>,
}

pub fn eta_norm_terminal(
    walk: &HalfLineWalk,
    anchor: usize,
    ctl: &SeriesControl,
) -> Result<EtaNormScan, MeasureError> {
    let (p_a, q_a, r_a) = walk.triple(anchor);
    if r_a == 0.0 {
        return Err(MeasureError::LoopPrecondition {
            expected: format!("loop at {anchor}"),
            found: "no loop".into(),
        });
    }
    let q_tilde = if anchor == 0 { 1.0 } else { q_a };
    let head = q_tilde * (p_a + r_a) / r_a * spectral::q_weight_sq(walk, anchor);

    // Route one accumulates Q_l^2 through the ratio product; route two
    // accumulates R_l independently.
    let mut ratio_q = 1.0f64;
    let mut r_l = 1.0f64;
    for i in 1..=anchor {
        ratio_q *= walk.q(i) / walk.p(i);
        r_l *= walk.q(i) / walk.p(i);
    }
    let r_anchor = r_l;

    let mut lhs = head;
    let mut rhs_sum_r = 0.0f64;
    let mut identity_max_dev = 0.0f64;
    let mut checkpoints = Vec::new();
    let mut next_checkpoint = 10usize;

    let mut sum = head;
    let mut comp = 0.0f64;
    let mut outcome = SeriesOutcome::Exhausted;
    let mut used = 1usize;
    let mut last_rel = f64::INFINITY;

    let last_term = walk.max_site().unwrap_or(usize::MAX);
    for l in anchor + 1..=last_term {
        ratio_q *= walk.q(l) / walk.p(l);
        let q_l_sq = ratio_q / walk.q(l);

        let y = q_l_sq - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        used += 1;
        lhs += q_l_sq;

        r_l *= walk.q(l) / walk.p(l);
        rhs_sum_r += r_l;
        let rhs = head + 2.0 * rhs_sum_r + r_anchor - r_l;

        let dev = (lhs - rhs).abs() / lhs.abs().max(1.0);
        identity_max_dev = identity_max_dev.max(dev);
        if l - anchor >= next_checkpoint || l == anchor + 1 {
            checkpoints.push((l, lhs, rhs));
            next_checkpoint = next_checkpoint.saturating_mul(10);
        }

        last_rel = if sum > 0.0 { q_l_sq / sum } else { f64::INFINITY };
        if sum > ctl.diverge_threshold {
            outcome = SeriesOutcome::Diverged;
            break;
        }
        if used >= 10 && last_rel < ctl.stabilize_tol {
            outcome = SeriesOutcome::Stabilized;
            break;
        }
        if used >= ctl.cutoff {
            break;
        }
    }

    Ok(EtaNormScan {
        scan: SeriesScan {
            sum,
            outcome,
            terms: used,
            last_rel_increment: last_rel,
        },
        head,
        identity_max_dev,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::h_s_brute_force;
    use crate::walk::TakeFrom;

    fn opts(n: usize) -> DecomposeOptions {
        DecomposeOptions::for_truncation(n)
    }

    #[test]
    fn supp_h_s_table() {
        use RecurrenceClass::*;
        let rec = NullRecurrent;
        assert_eq!(supp_h_s(&LoopSet::Empty, Transient), SupportSet::Empty);
        assert_eq!(supp_h_s(&LoopSet::Finite(vec![0]), rec), SupportSet::Empty);
        assert_eq!(
            supp_h_s(&LoopSet::Finite(vec![0]), Transient),
            SupportSet::From(0)
        );
        assert_eq!(
            supp_h_s(&LoopSet::Finite(vec![0, 5]), rec),
            SupportSet::Range(0, 5)
        );
        assert_eq!(
            supp_h_s(&LoopSet::Finite(vec![2, 7]), Transient),
            SupportSet::From(2)
        );
        assert_eq!(
            supp_h_s(&LoopSet::Infinite { first: 0 }, PositiveRecurrent),
            SupportSet::From(0)
        );
    }

    #[test]
    fn closed_form_values() {
        let cf = homogeneous_closed_form(0.3, 0.7, 0, 20).unwrap();
        assert!((cf.table.get(0) - 8.0 / 49.0).abs() < 1e-15);
        assert!((cf.trapped_mass - 4.0 / 7.0).abs() < 1e-15);
        let ratio = cf.table.get(5) / cf.table.get(4);
        assert!((ratio - 3.0 / 7.0).abs() < 1e-12);
        assert!(homogeneous_closed_form(0.7, 0.3, 0, 5).is_err());
    }

    #[test]
    fn spectral_measure_is_a_distribution() {
        let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(3, 0.4, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 40, &opts(40)).unwrap();
        let psi0 = arc_state(&data.ops, 2, Direction::Left).unwrap().state;
        let res = spectral_limit_measure(&data, &psi0).unwrap();
        assert!((res.table.sum() - 1.0).abs() < 1e-9);
        assert!(res.table.values().iter().all(|&v| v >= -1e-12));
        let comps = res.components.unwrap();
        for u in 0..res.table.len() {
            let rebuilt = comps.mass_point.get(u) + comps.h_s.get(u) + comps.residual.get(u);
            assert!((rebuilt - res.table.get(u)).abs() < 1e-10, "vertex {u}");
        }
    }

    #[test]
    fn eigenvector_state_measure_is_stationary() {
        let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(3, 0.4, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 30, &opts(30)).unwrap();
        let seed = arc_state(&data.ops, 3, Direction::Left).unwrap().state;
        let psi0 = project_onto_hs(&seed, &data).unwrap();
        let spectral = spectral_limit_measure(&data, &psi0).unwrap();
        let direct = direct_limit_measure(&data.ops, &psi0, 300);
        let position = data.ops.position_distribution(&psi0);
        assert!(spectral.table.sup_diff(&position) < 1e-12);
        assert!(direct.table.sup_diff(&position) < 1e-12);
    }

    #[test]
    fn direct_converges_to_spectral_in_horizon() {
        let walk = HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap();
        let data = decompose(&walk, 60, &opts(60)).unwrap();
        let psi0 = arc_state(&data.ops, 0, Direction::Right).unwrap().state;
        let spectral = spectral_limit_measure(&data, &psi0).unwrap();
        let gap_short = direct_limit_measure(&data.ops, &psi0, 500)
            .table
            .sup_diff(&spectral.table);
        let gap_long = direct_limit_measure(&data.ops, &psi0, 4000)
            .table
            .sup_diff(&spectral.table);
        assert!(
            gap_long < gap_short,
            "Cesaro gap should shrink: {gap_short} -> {gap_long}"
        );
        assert!(gap_long < 5e-3);
    }

    #[test]
    fn rank_one_weights_match_projector_form() {
        // With well-separated phases every cluster is rank one, so the
        // table must agree with the per-vector weights
        // |<q, psi>|^2 |<q, delta>|^2 / ||q||^4.
        let walk = HalfLineWalk::homogeneous(0.4, 0.6, 0.0).unwrap();
        let data = decompose(&walk, 25, &opts(25)).unwrap();
        let psi0 = arc_state(&data.ops, 1, Direction::Right).unwrap().state;
        let res = spectral_limit_measure(&data, &psi0).unwrap();
        let mut manual = vec![0.0f64; data.ops.vertex_count()];
        for l in &data.lifts {
            let w = l.vector.inner(&psi0).norm_sqr();
            for (i, &(j, _)) in data.ops.basis().arcs().iter().enumerate() {
                manual[j] += w * l.vector.amps[i].norm_sqr() / (l.norm_sq * l.norm_sq);
            }
        }
        for u in 0..manual.len() {
            assert!((manual[u] - res.table.get(u)).abs() < 1e-10, "vertex {u}");
        }
    }

    #[test]
    fn lower_bound_cases() {
        let walk = HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap();
        let data = decompose(&walk, 30, &opts(30)).unwrap();
        let pi = walk
            .stationary_distribution(30, &SeriesControl::default())
            .unwrap();
        // |2;L> is orthogonal to a_3; the walk has no loops, so no H^(S).
        let psi0 = arc_state(&data.ops, 2, Direction::Left).unwrap().state;
        let lb = lower_bound_general(&data.ops, &psi0, 5, 3, Some(&pi), None);
        assert_eq!(lb.value, 0.0);

        let a3 = incidence_state(&data.ops, 3).state;
        let lb2 = lower_bound_general(&data.ops, &a3, 5, 3, Some(&pi), None);
        assert!((lb2.value - pi.get(5) * pi.get(3)).abs() < 1e-14);
    }

    #[test]
    fn corollary2_internals() {
        let walk = HalfLineWalk::example_a()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let data = decompose(&walk, 80, &opts(80)).unwrap();
        let (p0, _, r0) = walk.triple(0);
        let psi0 = custom_state(
            &data.ops,
            0,
            [
                Complex64::new(0.0, 0.0),
                Complex64::new(-p0.sqrt(), 0.0),
                Complex64::new(r0.sqrt(), 0.0),
            ],
        )
        .unwrap()
        .state;
        let ctl = measure_series_control();
        let cor = corollary2_measure(&walk, &data.ops, &psi0, &ctl).unwrap();
        // C_R' = r_0 sum 4/(l(l+2)) = 0.5 * 3 = 1.5 for this walk.
        assert!((cor.c_r_prime - 1.5).abs() < 1e-5);
        assert!((cor.pi_prime.get(0) - 0.4).abs() < 1e-5);
        // The aligned state overlaps aperp_0 alone, with weight pi'(0).
        assert!((cor.weight - 0.4).abs() < 1e-5);
        // pi' over the truncation window captures nearly all mass.
        assert!((cor.pi_prime.sum() - 1.0).abs() < 2e-2);
    }

    #[test]
    fn corollary2_rejects_orthogonal_seed() {
        let walk = HalfLineWalk::example_a()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let data = decompose(&walk, 60, &opts(60)).unwrap();
        let (p1, q1, _) = walk.triple(1);
        // (sqrt(q), 0, sqrt(p)) at vertex 1 is the incidence profile, which
        // every aperp_j annihilates.
        let psi0 = custom_state(
            &data.ops,
            1,
            [
                Complex64::new(q1.sqrt(), 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(p1.sqrt(), 0.0),
            ],
        )
        .unwrap()
        .state;
        let cor = corollary2_measure(&walk, &data.ops, &psi0, &measure_series_control()).unwrap();
        assert!(cor.weight < 1e-20);
        assert!(cor.table.max_value() < 1e-20);
    }

    #[test]
    fn corollary3_single_gap_constant() {
        // Loops at {0, 1}: C_R^(1)' = r_0 (1 - p_1)/r_1.
        let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(1, 0.4, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 20, &opts(20)).unwrap();
        let psi0 = arc_state(&data.ops, 1, Direction::Left).unwrap().state;
        let cor = corollary3_measure(&walk, &data.ops, &psi0).unwrap();
        let (p1, _, r1) = walk.triple(1);
        let expect = 0.5 * (1.0 - p1) / r1;
        assert!((cor.c_r_prime - expect).abs() < 1e-12);
        for i in 2..cor.table.len() {
            assert_eq!(cor.table.get(i), 0.0);
        }
    }

    #[test]
    fn corollary3_matches_hs_projection() {
        // For an initial state already inside H^(S) the corollary measure
        // is the position profile of the state itself.
        let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(3, 0.4, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 40, &opts(40)).unwrap();
        let seed = arc_state(&data.ops, 3, Direction::Left).unwrap().state;
        let psi0 = project_onto_hs(&seed, &data).unwrap();
        let cor = corollary3_measure(&walk, &data.ops, &psi0).unwrap();
        let profile = data.ops.position_distribution(&psi0);
        assert!((cor.weight - 1.0).abs() < 1e-10);
        for i in 0..=3 {
            assert!((cor.table.get(i) - profile.get(i)).abs() < 1e-10, "i = {i}");
        }
    }

    #[test]
    fn eta_norm_identity_and_outcomes() {
        let ctl = SeriesControl::default();
        let a = HalfLineWalk::example_a()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let scan_a = eta_norm_terminal(&a, 0, &ctl).unwrap();
        assert!(scan_a.scan.stabilized());
        assert!((scan_a.scan.sum - 5.0).abs() < 1e-5);
        assert!(scan_a.identity_max_dev < 1e-10);

        let b = HalfLineWalk::example_b()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let scan_b = eta_norm_terminal(&b, 0, &ctl).unwrap();
        assert_eq!(scan_b.scan.outcome, SeriesOutcome::Exhausted);
        assert!(scan_b.identity_max_dev < 1e-10);

        // Positive recurrent: geometric blow-up crosses the threshold.
        let c = HalfLineWalk::homogeneous(0.3, 0.7, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let scan_c = eta_norm_terminal(&c, 0, &ctl).unwrap();
        assert!(scan_c.scan.diverged());
    }

    #[test]
    fn mass_point_projection_behaviour() {
        // Balanced walk with one loop: no mass points, projection is a
        // no-op; with drift the unit eigenvalues are removed.
        let balanced = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let data = decompose(&balanced, 60, &opts(60)).unwrap();
        assert!(data.mass_lambdas.is_empty());
        let psi0 = arc_state(&data.ops, 0, Direction::Loop).unwrap().state;
        let proj = project_out_mass_points(&psi0, &data).unwrap();
        assert!(proj.sup_diff(&psi0) < 1e-12);

        let drift = HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap();
        let data2 = decompose(&drift, 60, &opts(60)).unwrap();
        assert_eq!(data2.mass_lambdas.len(), 2);
        let seed = arc_state(&data2.ops, 0, Direction::Right).unwrap().state;
        let proj2 = project_out_mass_points(&seed, &data2).unwrap();
        for l in data2.mass_point_lifts() {
            assert!(l.normalized().inner(&proj2).norm() < 1e-10);
        }
    }

    #[test]
    fn hs_component_support_containment() {
        let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(3, 0.4, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 40, &opts(40)).unwrap();
        let support = supp_h_s(&walk.loop_set(40), data.class);
        assert_eq!(support, SupportSet::Range(0, 3));
        let psi0 = arc_state(&data.ops, 2, Direction::Right).unwrap().state;
        let res = spectral_limit_measure(&data, &psi0).unwrap();
        let hs = &res.components.unwrap().h_s;
        for u in 0..hs.len() {
            if !support.contains(u) {
                assert!(hs.get(u).abs() < 1e-12, "vertex {u}");
            }
        }
    }

    #[test]
    fn brute_force_agrees_with_analytic_span_dimension() {
        let walk = HalfLineWalk::example_b()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap()
            .with_self_loop(4, 0.3, TakeFrom::Proportional)
            .unwrap();
        let data = decompose(&walk, 16, &opts(16)).unwrap();
        let bf = h_s_brute_force(&data.ops);
        assert_eq!(bf.dim(), data.hs_exact().len());
    }
}
