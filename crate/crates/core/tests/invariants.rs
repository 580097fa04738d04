//! Property tests for the structural invariants of the operator stack on
//! randomly generated finite chains.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use qwalk_core::arc::{StateVector, WalkOperators};
use qwalk_core::walk::{HalfLineWalk, TruncatedChain};

/// Random chain on {0..n} as a custom coefficient table; loop mass where
/// `loops[j]` is set.
fn chain_strategy() -> impl Strategy<Value = (HalfLineWalk, TruncatedChain)> {
    let site = (0.15f64..0.85, 0.0f64..1.0, any::<bool>());
    (3usize..28, prop::collection::vec(site, 28))
        .prop_map(|(n, raw)| {
            let mut table = Vec::with_capacity(n + 1);
            for (j, &(split, loop_mass, has_loop)) in raw.iter().take(n + 1).enumerate() {
                let r = if has_loop { 0.1 + 0.5 * loop_mass } else { 0.0 };
                let rest = 1.0 - r;
                if j == 0 {
                    table.push((rest, 0.0, r));
                } else {
                    let p = rest * split;
                    table.push((p, rest - p, r));
                }
            }
            let walk = HalfLineWalk::custom(table, None).expect("generator built a valid table");
            let chain = walk.truncate(n).expect("n within table");
            (walk, chain)
        })
}

fn random_state(dim: usize, raw: &[(f64, f64)]) -> StateVector {
    let mut v = StateVector::zeros(dim);
    for (a, &(re, im)) in v.amps.iter_mut().zip(raw.iter().cycle()) {
        *a = Complex64::new(re, im);
    }
    let n = v.norm();
    if n == 0.0 {
        v.amps[0] = Complex64::new(1.0, 0.0);
        v
    } else {
        v.scale(Complex64::new(1.0 / n, 0.0))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triples_sum_to_one((walk, chain) in chain_strategy()) {
        walk.validate(chain.n()).unwrap();
        for j in 0..=chain.n() {
            let (p, q, r) = chain.triple(j);
            prop_assert!((p + q + r - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shift_is_an_exact_involution(
        (_, chain) in chain_strategy(),
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        let ops = WalkOperators::build(chain);
        let psi = random_state(ops.dim(), &raw);
        let back = ops.apply_shift(&ops.apply_shift(&psi));
        prop_assert_eq!(back, psi);
    }

    #[test]
    fn coin_is_an_involution(
        (_, chain) in chain_strategy(),
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        let ops = WalkOperators::build(chain);
        let psi = random_state(ops.dim(), &raw);
        let back = ops.apply_coin(&ops.apply_coin(&psi));
        prop_assert!(back.sup_diff(&psi) < 1e-12);
    }

    #[test]
    fn evolution_preserves_norm_and_total_mass(
        (_, chain) in chain_strategy(),
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        let ops = WalkOperators::build(chain);
        let psi = random_state(ops.dim(), &raw);
        let stepped = ops.apply_u(&psi);
        prop_assert!((stepped.norm() - 1.0).abs() < 1e-12);
        // Parseval: position masses exhaust the state norm.
        prop_assert!((ops.position_distribution(&stepped).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incidence_cross_gram_equals_jacobi((_, chain) in chain_strategy()) {
        let jacobi = chain.jacobi_matrix().to_dense();
        let ops = WalkOperators::build(chain);
        let gram = ops.dense_a().transpose() * ops.dense_b();
        prop_assert!((gram - jacobi).amax() < 1e-12);
    }

    #[test]
    fn jacobi_off_diagonal_pairs_are_bitwise_equal((_, chain) in chain_strategy()) {
        let dense = chain.jacobi_matrix().to_dense();
        for i in 0..dense.nrows() {
            for k in 0..dense.ncols() {
                prop_assert_eq!(dense[(i, k)].to_bits(), dense[(k, i)].to_bits());
            }
        }
    }

    #[test]
    fn truncation_columns_are_stochastic((_, chain) in chain_strategy()) {
        let m = chain.matrix();
        for c in 0..m.ncols() {
            let sum: f64 = m.column(c).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    // Dense products and eigendecompositions make these heavier.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn u_is_orthogonal_and_squares_to_szegedy_step((_, chain) in chain_strategy()) {
        let ops = WalkOperators::build(chain);
        let dim = ops.dim();
        let u = ops.dense_u();
        let eye = DMatrix::<f64>::identity(dim, dim);
        prop_assert!((u.transpose() * &u - &eye).amax() < 1e-12);

        let a = ops.dense_a();
        let b = ops.dense_b();
        let ref_a = 2.0 * &a * a.transpose() - &eye;
        let ref_b = 2.0 * &b * b.transpose() - &eye;
        prop_assert!(((&u * &u) - ref_b * ref_a).amax() < 1e-12);
    }

    #[test]
    fn hr_and_hs_dimensions_are_complete((_, chain) in chain_strategy()) {
        let ops = WalkOperators::build(chain);
        let pairs = qwalk_core::spectral::eigensolve(&ops.chain().jacobi_matrix(), 1e-9).unwrap();
        let hs = qwalk_core::spectral::h_s_brute_force(&ops);
        // dim H^(R) = 2|V| - m(1) - m(-1); the complement fills up |A|.
        let dim_hr = 2 * ops.vertex_count() - pairs.m_plus - pairs.m_minus;
        prop_assert_eq!(dim_hr + hs.dim(), ops.dim());

        let basis = ops.basis();
        let (e, s, v) = (basis.edge_count, basis.loop_count, basis.vertex_count);
        prop_assert_eq!(hs.plus.len(), e - s + pairs.m_plus - v);
        prop_assert_eq!(hs.minus.len(), e + pairs.m_minus - v);
    }
}

#[test]
fn norm_drift_stays_below_budget_over_long_runs() {
    let walk = HalfLineWalk::example_b()
        .with_self_loop(0, 0.5, qwalk_core::walk::TakeFrom::Right)
        .unwrap();
    let ops = WalkOperators::build(walk.truncate(60).unwrap());
    let psi0 = ops.incidence_vector(1);
    let (_, diag) = ops.evolve_and_average(&psi0, 10_000);
    assert!(diag.max_norm_drift < 1e-9, "drift {}", diag.max_norm_drift);
}

#[test]
fn lifted_and_reflected_vectors_pass_the_dense_oracle() {
    // Residuals against the dense U, assembled by explicit matrix products
    // rather than the matrix-free path.
    let walk = HalfLineWalk::example_c()
        .with_self_loop(0, 0.5, qwalk_core::walk::TakeFrom::Right)
        .unwrap()
        .with_self_loop(3, 0.4, qwalk_core::walk::TakeFrom::Proportional)
        .unwrap();
    let data = qwalk_core::measures::decompose(
        &walk,
        30,
        &qwalk_core::measures::DecomposeOptions::for_truncation(30),
    )
    .unwrap();
    let u = data.ops.dense_u();
    let apply_dense = |v: &StateVector| -> StateVector {
        let mut out = StateVector::zeros(v.len());
        for i in 0..v.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..v.len() {
                acc += u[(i, k)] * v.amps[k];
            }
            out.amps[i] = acc;
        }
        out
    };
    for l in &data.lifts {
        let mut diff = apply_dense(&l.vector);
        diff.sub_scaled(l.eigenvalue(), &l.vector);
        let res = diff.amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(res < 1e-9, "lift at lambda {}", l.lambda);
    }
    for eta in &data.hs.as_ref().unwrap().pairs {
        let mut diff = apply_dense(&eta.vector);
        diff.add_scaled(Complex64::new(1.0, 0.0), &eta.vector);
        let res = diff.amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(res < 1e-9, "eta at span {:?}", eta.span);
    }
}

#[test]
fn gram_matrix_of_normalized_eigenvectors_is_near_identity() {
    // Lifts at distinct eigenvalues plus the signed reflected vectors: the
    // only allowed off-diagonal couplings are between the two branches at
    // one lambda, and those vanish analytically as well.
    let walk = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
        .unwrap()
        .with_self_loop(0, 0.5, qwalk_core::walk::TakeFrom::Right)
        .unwrap()
        .with_self_loop(3, 0.4, qwalk_core::walk::TakeFrom::Proportional)
        .unwrap();
    let data = qwalk_core::measures::decompose(
        &walk,
        24,
        &qwalk_core::measures::DecomposeOptions::for_truncation(24),
    )
    .unwrap();
    let mut vectors: Vec<(StateVector, Option<f64>)> = data
        .lifts
        .iter()
        .map(|l| (l.normalized(), Some(l.lambda)))
        .collect();
    for eta in &data.hs.as_ref().unwrap().pairs {
        vectors.push((eta.normalized(), None));
    }
    for (i, (vi, li)) in vectors.iter().enumerate() {
        for (vj, lj) in vectors.iter().skip(i + 1) {
            let g = vi.inner(vj).norm();
            let same_lambda = matches!((li, lj), (Some(a), Some(b)) if (a - b).abs() < 1e-12);
            if !same_lambda {
                assert!(g < 1e-8, "unexpected coupling {g}");
            }
        }
    }
}
