//! The arc Hilbert space `l2(A)` and the walk operators `S`, `C`, `U`.
//!
//! Arcs of the symmetric oriented half line are labeled `(j; d)` with
//! `d in {L, O, R}`: `|j;L>` points from `j` to `j-1`, `|j;O>` is the self
//! loop at `j` (present iff `r_j > 0`), `|j;R>` points from `j` to `j+1`.
//! The canonical ordering is ascending `j`, and `L, O, R` within a vertex;
//! every vector layout and file output follows it.
//!
//! The flip-flop shift `S` swaps `|j;R> <-> |j+1;L>` and fixes loops. The
//! coin is the reflection `C = 2 Pi_A - I` about the span of the incidence
//! vectors `a_u = sqrt(q_u)|u;L> + sqrt(r_u)|u;O> + sqrt(p_u)|u;R>`, and the
//! one-step evolution is `U = S C`. `U` is applied matrix-free: `S` as an
//! index permutation and `C` through the thin incidence columns, `O(|A|)`
//! per step. Amplitudes are complex throughout; the interesting
//! eigenvectors of `U` are genuinely complex even though `U` is real.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::table::{MeasureSource, MeasureTable};
use crate::walk::TruncatedChain;

/// Direction tag of an arc relative to the vertex it is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Left,
    Loop,
    Right,
}

impl Direction {
    pub fn letter(self) -> char {
        match self {
            Direction::Left => 'L',
            Direction::Loop => 'O',
            Direction::Right => 'R',
        }
    }
}

/// Indexed basis of arcs in canonical order.
#[derive(Debug, Clone)]
pub struct ArcBasis {
    arcs: Vec<(usize, Direction)>,
    /// `lookup[v] = [index of (v,L), (v,O), (v,R)]`.
    lookup: Vec<[Option<usize>; 3]>,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub loop_count: usize,
}

impl ArcBasis {
    /// Enumerate the arcs of a truncated chain: `L` at `j >= 1`, `O` where
    /// `r_j > 0`, `R` at `j <= n-1`.
    pub fn build(chain: &TruncatedChain) -> Self {
        let n = chain.n();
        let mut arcs = Vec::new();
        let mut lookup = vec![[None; 3]; n + 1];
        let mut loop_count = 0;
        for j in 0..=n {
            if j >= 1 {
                lookup[j][0] = Some(arcs.len());
                arcs.push((j, Direction::Left));
            }
            if chain.r(j) > 0.0 {
                lookup[j][1] = Some(arcs.len());
                arcs.push((j, Direction::Loop));
                loop_count += 1;
            }
            if j < n {
                lookup[j][2] = Some(arcs.len());
                arcs.push((j, Direction::Right));
            }
        }
        let edge_count = n + loop_count;
        debug_assert_eq!(arcs.len(), 2 * edge_count - loop_count);
        Self {
            arcs,
            lookup,
            vertex_count: n + 1,
            edge_count,
            loop_count,
        }
    }

    /// Total number of arcs `|A| = 2|E| - |S|`.
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn arc(&self, idx: usize) -> (usize, Direction) {
        self.arcs[idx]
    }

    pub fn arcs(&self) -> &[(usize, Direction)] {
        &self.arcs
    }

    pub fn index_of(&self, vertex: usize, dir: Direction) -> Option<usize> {
        let slot = match dir {
            Direction::Left => 0,
            Direction::Loop => 1,
            Direction::Right => 2,
        };
        self.lookup.get(vertex).and_then(|row| row[slot])
    }

    /// Arc indices attached to `vertex`, in `L, O, R` order.
    pub fn arcs_at(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.lookup[vertex].into_iter().flatten()
    }
}

/// A vector in `l2(A)`, one complex amplitude per arc.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            amps: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self {
            amps: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// `<self, other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> StateVector {
        StateVector {
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    pub fn normalized(&self) -> StateVector {
        self.scale(Complex64::new(1.0 / self.norm(), 0.0))
    }

    /// `self - c * other`, in place.
    pub fn sub_scaled(&mut self, c: Complex64, other: &StateVector) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a -= c * b;
        }
    }

    pub fn add_scaled(&mut self, c: Complex64, other: &StateVector) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
    }

    pub fn sup_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Norm drift observed over an evolution; the state is never renormalized,
/// so drift doubles as a correctness signal.
#[derive(Debug, Clone, Copy)]
pub struct EvolveDiagnostics {
    pub max_norm_drift: f64,
    pub steps: usize,
}

/// The operators of one truncated system: shift permutation, incidence
/// columns, and the chain they came from. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WalkOperators {
    basis: ArcBasis,
    chain: TruncatedChain,
    /// `shift[i]` is the index of the arc `S` maps arc `i` onto.
    shift: Vec<usize>,
    /// Sparse incidence column of each vertex: `(arc index, amplitude)`.
    columns: Vec<Vec<(usize, f64)>>,
}

impl WalkOperators {
    pub fn build(chain: TruncatedChain) -> Self {
        let basis = ArcBasis::build(&chain);
        let n = chain.n();

        let mut shift = vec![0usize; basis.len()];
        for (i, &(j, d)) in basis.arcs().iter().enumerate() {
            let target = match d {
                Direction::Left => basis.index_of(j - 1, Direction::Right),
                Direction::Loop => Some(i),
                Direction::Right => basis.index_of(j + 1, Direction::Left),
            };
            shift[i] = target.expect("arc reversal must exist in a symmetric digraph");
        }

        let mut columns = Vec::with_capacity(n + 1);
        for u in 0..=n {
            let (p, q, r) = chain.triple(u);
            let mut col = Vec::with_capacity(3);
            if let Some(idx) = basis.index_of(u, Direction::Left) {
                if q > 0.0 {
                    col.push((idx, q.sqrt()));
                }
            }
            if let Some(idx) = basis.index_of(u, Direction::Loop) {
                col.push((idx, r.sqrt()));
            }
            if let Some(idx) = basis.index_of(u, Direction::Right) {
                if p > 0.0 {
                    col.push((idx, p.sqrt()));
                }
            }
            columns.push(col);
        }

        Self {
            basis,
            chain,
            shift,
            columns,
        }
    }

    pub fn basis(&self) -> &ArcBasis {
        &self.basis
    }

    pub fn chain(&self) -> &TruncatedChain {
        &self.chain
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.basis.vertex_count
    }

    /// Incidence vector `a_u`.
    pub fn incidence_vector(&self, u: usize) -> StateVector {
        let mut v = StateVector::zeros(self.dim());
        for &(idx, w) in &self.columns[u] {
            v.amps[idx] = Complex64::new(w, 0.0);
        }
        v
    }

    /// `A c = sum_u c_u a_u` without materializing the dense matrix.
    pub fn incidence_apply(&self, coeffs: &[f64]) -> StateVector {
        let mut v = StateVector::zeros(self.dim());
        for (u, col) in self.columns.iter().enumerate() {
            let c = coeffs[u];
            if c != 0.0 {
                for &(idx, w) in col {
                    v.amps[idx] += Complex64::new(c * w, 0.0);
                }
            }
        }
        v
    }

    /// Swapped incidence vector `b_u = S a_u`.
    pub fn swapped_incidence_vector(&self, u: usize) -> StateVector {
        self.apply_shift(&self.incidence_vector(u))
    }

    pub fn apply_shift(&self, psi: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(self.dim());
        for (i, &t) in self.shift.iter().enumerate() {
            out.amps[t] = psi.amps[i];
        }
        out
    }

    /// `C psi = 2 A (A^dagger psi) - psi`.
    pub fn apply_coin(&self, psi: &StateVector) -> StateVector {
        let mut out = psi.clone();
        self.coin_in_place(&mut out);
        out
    }

    pub fn apply_u(&self, psi: &StateVector) -> StateVector {
        self.apply_shift(&self.apply_coin(psi))
    }

    fn coin_in_place(&self, psi: &mut StateVector) {
        // Overlaps <a_u, psi> per vertex, then psi <- 2 sum_u o_u a_u - psi.
        let mut overlaps = vec![Complex64::new(0.0, 0.0); self.vertex_count()];
        for (u, col) in self.columns.iter().enumerate() {
            let mut o = Complex64::new(0.0, 0.0);
            for &(idx, w) in col {
                o += psi.amps[idx] * w;
            }
            overlaps[u] = o;
        }
        for a in psi.amps.iter_mut() {
            *a = -*a;
        }
        for (u, col) in self.columns.iter().enumerate() {
            let o2 = overlaps[u] * 2.0;
            for &(idx, w) in col {
                psi.amps[idx] += o2 * w;
            }
        }
    }

    fn step_in_place(&self, psi: &mut StateVector, scratch: &mut Vec<Complex64>) {
        self.coin_in_place(psi);
        scratch.clear();
        scratch.resize(psi.len(), Complex64::new(0.0, 0.0));
        for (i, &t) in self.shift.iter().enumerate() {
            scratch[t] = psi.amps[i];
        }
        std::mem::swap(&mut psi.amps, scratch);
    }

    /// `P(X = u) = sum_{d} |psi(u; d)|^2`.
    pub fn position_distribution(&self, psi: &StateVector) -> MeasureTable {
        let mut values = vec![0.0; self.vertex_count()];
        for (i, &(j, _)) in self.basis.arcs().iter().enumerate() {
            values[j] += psi.amps[i].norm_sqr();
        }
        MeasureTable::new(values, MeasureSource::Other("position".into()))
    }

    /// Cesaro average `(1/T) sum_{t=0}^{T-1} P(X_t = .)` by repeated
    /// application of `U`. The norm is monitored, never corrected.
    pub fn evolve_and_average(
        &self,
        psi0: &StateVector,
        t_horizon: usize,
    ) -> (MeasureTable, EvolveDiagnostics) {
        assert!(t_horizon >= 1, "need at least one time step");
        let mut acc = vec![0.0f64; self.vertex_count()];
        let mut psi = psi0.clone();
        let mut scratch = Vec::new();
        let mut max_drift = (psi.norm() - 1.0).abs();
        for t in 0..t_horizon {
            for (i, &(j, _)) in self.basis.arcs().iter().enumerate() {
                acc[j] += psi.amps[i].norm_sqr();
            }
            if t + 1 < t_horizon {
                self.step_in_place(&mut psi, &mut scratch);
                max_drift = max_drift.max((psi.norm() - 1.0).abs());
            }
        }
        let inv_t = 1.0 / t_horizon as f64;
        for v in acc.iter_mut() {
            *v *= inv_t;
        }
        (
            MeasureTable::new(
                acc,
                MeasureSource::DirectCesaro {
                    t_horizon,
                    n: self.chain.n(),
                },
            ),
            EvolveDiagnostics {
                max_norm_drift: max_drift,
                steps: t_horizon,
            },
        )
    }

    /// Dense incidence matrix `A` (arcs x vertices).
    pub fn dense_a(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.vertex_count());
        for (u, col) in self.columns.iter().enumerate() {
            for &(idx, w) in col {
                m[(idx, u)] = w;
            }
        }
        m
    }

    /// Dense swapped incidence matrix `B = S A`.
    pub fn dense_b(&self) -> DMatrix<f64> {
        let a = self.dense_a();
        let mut b = DMatrix::zeros(self.dim(), self.vertex_count());
        for (i, &t) in self.shift.iter().enumerate() {
            for u in 0..self.vertex_count() {
                b[(t, u)] = a[(i, u)];
            }
        }
        b
    }

    /// Dense shift permutation matrix.
    pub fn dense_shift(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, &t) in self.shift.iter().enumerate() {
            m[(t, i)] = 1.0;
        }
        m
    }

    /// Dense `U`, assembled independently of the matrix-free path:
    /// `U = S (2 A A^T - I)` as explicit matrix products.
    pub fn dense_u(&self) -> DMatrix<f64> {
        let a = self.dense_a();
        let s = self.dense_shift();
        let coin = 2.0 * &a * a.transpose() - DMatrix::identity(self.dim(), self.dim());
        s * coin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::HalfLineWalk;
    use crate::walk::TakeFrom;

    fn chain_plain(n: usize) -> TruncatedChain {
        HalfLineWalk::homogeneous(0.3, 0.7, 0.0)
            .unwrap()
            .truncate(n)
            .unwrap()
    }

    fn pseudo_random_state(dim: usize, seed: u64) -> StateVector {
        // Tiny deterministic LCG; good enough for invariance checks.
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut v = StateVector::zeros(dim);
        for a in v.amps.iter_mut() {
            *a = Complex64::new(next(), next());
        }
        let n = v.norm();
        v.scale(Complex64::new(1.0 / n, 0.0))
    }

    #[test]
    fn arc_enumeration_path() {
        let basis = ArcBasis::build(&chain_plain(2));
        assert_eq!(basis.len(), 4);
        assert_eq!(
            basis.arcs(),
            &[
                (0, Direction::Right),
                (1, Direction::Left),
                (1, Direction::Right),
                (2, Direction::Left),
            ]
        );
        assert_eq!(basis.edge_count, 2);
        assert_eq!(basis.loop_count, 0);
    }

    #[test]
    fn arc_enumeration_with_loops() {
        let w = HalfLineWalk::homogeneous(0.3, 0.7, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let basis = ArcBasis::build(&w.truncate(2).unwrap());
        assert_eq!(basis.len(), 5);
        assert!(basis.index_of(0, Direction::Loop).is_some());

        // Loops everywhere on {0, 1, 2}: 7 arcs = 2*5 - 3.
        let w3 = HalfLineWalk::homogeneous(0.2, 0.5, 0.3).unwrap();
        let basis3 = ArcBasis::build(&w3.truncate(2).unwrap());
        assert_eq!(basis3.len(), 7);
        assert_eq!(basis3.edge_count, 5);
        assert_eq!(basis3.loop_count, 3);
    }

    #[test]
    fn incidence_vectors_are_orthonormal() {
        let w = HalfLineWalk::example_c()
            .with_self_loop(3, 0.4, TakeFrom::Proportional)
            .unwrap();
        let ops = WalkOperators::build(w.truncate(8).unwrap());
        for u in 0..ops.vertex_count() {
            for v in 0..ops.vertex_count() {
                let dot = ops.incidence_vector(u).inner(&ops.incidence_vector(v));
                let expect = if u == v { 1.0 } else { 0.0 };
                assert!((dot.re - expect).abs() < 1e-12 && dot.im == 0.0, "({u},{v})");
            }
        }
        // Vertex 0 with p_0 = 1 has the single arc |0;R>.
        let a0 = WalkOperators::build(chain_plain(5)).incidence_vector(0);
        assert_eq!(a0.amps.iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn shift_examples_and_involution() {
        let w = HalfLineWalk::homogeneous(0.25, 0.7, 0.05).unwrap();
        let ops = WalkOperators::build(w.truncate(6).unwrap());
        let basis = ops.basis();

        let mut psi = StateVector::zeros(ops.dim());
        let r2 = basis.index_of(2, Direction::Right).unwrap();
        psi.amps[r2] = Complex64::new(1.0, 0.0);
        let shifted = ops.apply_shift(&psi);
        let l3 = basis.index_of(3, Direction::Left).unwrap();
        assert_eq!(shifted.amps[l3], Complex64::new(1.0, 0.0));

        let o4 = basis.index_of(4, Direction::Loop).unwrap();
        let mut loop_state = StateVector::zeros(ops.dim());
        loop_state.amps[o4] = Complex64::new(0.0, 1.0);
        assert_eq!(ops.apply_shift(&loop_state), loop_state);

        let random = pseudo_random_state(ops.dim(), 7);
        let twice = ops.apply_shift(&ops.apply_shift(&random));
        assert_eq!(twice, random); // permutation round trip is exact
    }

    #[test]
    fn coin_fixes_incidence_and_reflects_complement() {
        let w = HalfLineWalk::example_a()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let ops = WalkOperators::build(w.truncate(7).unwrap());
        for u in 0..ops.vertex_count() {
            let a = ops.incidence_vector(u);
            assert!(ops.apply_coin(&a).sup_diff(&a) < 1e-12);
        }
        let random = pseudo_random_state(ops.dim(), 3);
        let double = ops.apply_coin(&ops.apply_coin(&random));
        assert!(double.sup_diff(&random) < 1e-12);
    }

    #[test]
    fn u_maps_incidence_to_swapped() {
        let ops = WalkOperators::build(chain_plain(9));
        for u in 0..ops.vertex_count() {
            let got = ops.apply_u(&ops.incidence_vector(u));
            assert!(got.sup_diff(&ops.swapped_incidence_vector(u)) < 1e-12);
        }
    }

    #[test]
    fn u_is_norm_preserving_and_matches_dense() {
        let w = HalfLineWalk::example_b()
            .with_self_loop(2, 0.3, TakeFrom::Proportional)
            .unwrap();
        let ops = WalkOperators::build(w.truncate(10).unwrap());
        let psi = pseudo_random_state(ops.dim(), 11);
        let stepped = ops.apply_u(&psi);
        assert!((stepped.norm() - 1.0).abs() < 1e-12);

        let dense = ops.dense_u();
        let mut expect = StateVector::zeros(ops.dim());
        for i in 0..ops.dim() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..ops.dim() {
                acc += dense[(i, k)] * psi.amps[k];
            }
            expect.amps[i] = acc;
        }
        assert!(stepped.sup_diff(&expect) < 1e-12);
    }

    #[test]
    fn u_squared_is_szegedy_step() {
        let w = HalfLineWalk::example_c()
            .with_self_loop(1, 0.25, TakeFrom::Proportional)
            .unwrap();
        let ops = WalkOperators::build(w.truncate(8).unwrap());
        let dim = ops.dim();
        let a = ops.dense_a();
        let b = ops.dense_b();
        let eye = DMatrix::<f64>::identity(dim, dim);
        let ref_a = 2.0 * &a * a.transpose() - &eye;
        let ref_b = 2.0 * &b * b.transpose() - &eye;
        let u = ops.dense_u();
        let diff = (&u * &u) - (ref_b * ref_a);
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn incidence_cross_gram_is_jacobi() {
        let w = HalfLineWalk::example_a()
            .with_self_loop(4, 0.2, TakeFrom::Proportional)
            .unwrap();
        let chain = w.truncate(12).unwrap();
        let j = chain.jacobi_matrix().to_dense();
        let ops = WalkOperators::build(chain);
        let gram = ops.dense_a().transpose() * ops.dense_b();
        assert!((gram - j).amax() < 1e-12);
    }

    #[test]
    fn position_distribution_cases() {
        let ops = WalkOperators::build(chain_plain(6));
        let basis = ops.basis();

        let mut psi = StateVector::zeros(ops.dim());
        psi.amps[basis.index_of(3, Direction::Right).unwrap()] = Complex64::new(1.0, 0.0);
        let dist = ops.position_distribution(&psi);
        assert_eq!(dist.get(3), 1.0);
        assert_eq!(dist.sum(), 1.0);

        let mut both = StateVector::zeros(ops.dim());
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        both.amps[basis.index_of(2, Direction::Left).unwrap()] = c;
        both.amps[basis.index_of(2, Direction::Right).unwrap()] = c;
        let dist2 = ops.position_distribution(&both);
        assert!((dist2.get(2) - 1.0).abs() < 1e-12);

        let random = pseudo_random_state(ops.dim(), 5);
        assert!((ops.position_distribution(&random).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cesaro_average_sums_to_one() {
        let w = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
            .unwrap()
            .with_self_loop(0, 0.5, TakeFrom::Right)
            .unwrap();
        let ops = WalkOperators::build(w.truncate(20).unwrap());
        let psi0 = ops.incidence_vector(2);
        let (avg, diag) = ops.evolve_and_average(&psi0, 500);
        assert!((avg.sum() - 1.0).abs() < 1e-10);
        assert!(diag.max_norm_drift < 1e-12);
        assert!(avg.values().iter().all(|&v| v >= 0.0));

        // T = 1 reduces to the plain position distribution.
        let (single, _) = ops.evolve_and_average(&psi0, 1);
        let direct = ops.position_distribution(&psi0);
        assert!(single
            .values()
            .iter()
            .zip(direct.values())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
