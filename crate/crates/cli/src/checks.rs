//! The verification suite: every acceptance criterion of the project, run
//! at its stated scale with its stated tolerance. `verify_all` executes the
//! whole battery twice and compares the artifacts byte for byte.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qwalk_core::arc::WalkOperators;
use qwalk_core::measures::{self, decompose, DecomposeOptions};
use qwalk_core::spectral::{eigensolve, h_s_brute_force, lift, signed_reflected_basis};
use qwalk_core::walk::{HalfLineWalk, RecurrenceClass, TakeFrom};
use qwalk_core::{Direction, SeriesControl, SeriesOutcome, StateVector};

use crate::output;
use crate::report::{timed_check, CheckRecord, VerificationReport};
use crate::CliError;

/// The walk families exercised throughout the suite.
pub fn bundled_walks() -> Vec<(&'static str, HalfLineWalk)> {
    vec![
        (
            "homogeneous_transient",
            HalfLineWalk::homogeneous(0.7, 0.3, 0.0).unwrap(),
        ),
        (
            "homogeneous_null",
            HalfLineWalk::homogeneous(0.5, 0.5, 0.0).unwrap(),
        ),
        (
            "homogeneous_pr",
            HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap(),
        ),
        ("example_a", HalfLineWalk::example_a()),
        ("example_b", HalfLineWalk::example_b()),
        ("example_c", HalfLineWalk::example_c()),
    ]
}


/// Stamp the records of one criterion with the criterion's wall time; the
/// sub-checks share a single computation, so finer attribution would be
/// fiction.
fn stamped(mut records: Vec<CheckRecord>, started: std::time::Instant) -> Vec<CheckRecord> {
    let elapsed = started.elapsed();
    for r in records.iter_mut() {
        r.runtime = elapsed;
    }
    records
}

fn random_chain(rng: &mut ChaCha8Rng, force_path: bool) -> (HalfLineWalk, usize) {
    let n = rng.gen_range(3..=50usize);
    let mut table = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let has_loop = !force_path && rng.gen_bool(0.3);
        let r = if has_loop { rng.gen_range(0.1..0.6) } else { 0.0 };
        let rest = 1.0 - r;
        if j == 0 {
            table.push((rest, 0.0, r));
        } else {
            let p = rest * rng.gen_range(0.2..0.8);
            table.push((p, rest - p, r));
        }
    }
    (HalfLineWalk::custom(table, None).unwrap(), n)
}

fn random_unit_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    for a in v.amps.iter_mut() {
        *a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let n = v.norm();
    v.scale(Complex64::new(1.0 / n, 0.0))
}

// ---------------------------------------------------------------------
// Criterion 1: operator algebra on random finite chains
// ---------------------------------------------------------------------

pub fn criterion_1_operator_algebra() -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a11);
    let mut worst_shift = 0.0f64;
    let mut worst_coin = 0.0f64;
    let mut worst_unitary = 0.0f64;
    let mut worst_square = 0.0f64;
    let mut worst_gram = 0.0f64;
    let mut shift_exact = true;

    for _ in 0..6 {
        let (walk, n) = random_chain(&mut rng, false);
        let ops = WalkOperators::build(walk.truncate(n).unwrap());
        let dim = ops.dim();

        for _ in 0..3 {
            let psi = random_unit_state(&mut rng, dim);
            let back = ops.apply_shift(&ops.apply_shift(&psi));
            shift_exact &= back == psi;
            worst_shift = worst_shift.max(back.sup_diff(&psi));
            let coin_back = ops.apply_coin(&ops.apply_coin(&psi));
            worst_coin = worst_coin.max(coin_back.sup_diff(&psi));
        }

        let u = ops.dense_u();
        let eye = nalgebra::DMatrix::<f64>::identity(dim, dim);
        worst_unitary = worst_unitary.max((u.transpose() * &u - &eye).amax());

        let a = ops.dense_a();
        let b = ops.dense_b();
        let ref_a = 2.0 * &a * a.transpose() - &eye;
        let ref_b = 2.0 * &b * b.transpose() - &eye;
        worst_square = worst_square.max(((&u * &u) - ref_b * ref_a).amax());

        let jacobi = ops.chain().jacobi_matrix().to_dense();
        worst_gram = worst_gram.max((a.transpose() * &b - jacobi).amax());
    }

    stamped(vec![
        timed_check("A1.shift-involution", "arc-space", || {
            (
                "S^2 = I exactly".into(),
                format!("max dev {worst_shift:.1e}, bit-exact {shift_exact}"),
                "0".into(),
                shift_exact,
            )
        }),
        timed_check("A1.coin-involution", "arc-space", || {
            (
                "C^2 = I".into(),
                format!("max dev {worst_coin:.3e}"),
                "1e-12".into(),
                worst_coin < 1e-12,
            )
        }),
        timed_check("A1.unitarity", "arc-space", || {
            (
                "U^T U = I".into(),
                format!("max dev {worst_unitary:.3e}"),
                "1e-12".into(),
                worst_unitary < 1e-12,
            )
        }),
        timed_check("A1.szegedy-square", "arc-space", || {
            (
                "U^2 = ref_B ref_A".into(),
                format!("max dev {worst_square:.3e}"),
                "1e-12".into(),
                worst_square < 1e-12,
            )
        }),
        timed_check("A1.cross-gram-jacobi", "arc-space", || {
            (
                "A^T B = J".into(),
                format!("max dev {worst_gram:.3e}"),
                "1e-12".into(),
                worst_gram < 1e-12,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Criterion 2: H^(S) dimension counts against brute force
// ---------------------------------------------------------------------

pub fn criterion_2_dimension_counts() -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1b5);
    let mut mismatches = Vec::new();
    let mut path_dims_ok = true;

    for case in 0..23 {
        let force_path = case >= 20;
        let (walk, n) = random_chain(&mut rng, force_path);
        let ops = WalkOperators::build(walk.truncate(n).unwrap());
        let pairs = eigensolve(&ops.chain().jacobi_matrix(), 1e-9).unwrap();
        let hs = h_s_brute_force(&ops);
        let basis = ops.basis();
        let (e, s, v) = (basis.edge_count, basis.loop_count, basis.vertex_count);
        let expect_plus = (e + pairs.m_plus).checked_sub(s + v);
        let expect_minus = (e + pairs.m_minus).checked_sub(v);
        if expect_plus != Some(hs.plus.len()) || expect_minus != Some(hs.minus.len()) {
            mismatches.push(format!(
                "case {case}: dims ({}, {}) vs formula ({expect_plus:?}, {expect_minus:?})",
                hs.plus.len(),
                hs.minus.len()
            ));
        }
        if force_path {
            path_dims_ok &= hs.dim() == 0;
        }
    }

    stamped(vec![
        timed_check("A2.dimension-identities", "spectral", || {
            (
                "dim H^(S)_+ = |E|-|S|-|V|+m(1), dim H^(S)_- = |E|-|V|+m(-1)".into(),
                if mismatches.is_empty() {
                    "all 23 chains match exactly".into()
                } else {
                    mismatches.join("; ")
                },
                "exact".into(),
                mismatches.is_empty(),
            )
        }),
        timed_check("A2.path-empty", "spectral", || {
            (
                "paths have empty H^(S)".into(),
                format!("all empty: {path_dims_ok}"),
                "exact".into(),
                path_dims_ok,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Criterion 3: eigenvector lifts at n = 200
// ---------------------------------------------------------------------

pub fn criterion_3_eigenvector_lift(out_dir: Option<&Path>) -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let mut worst_residual = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut failed = Vec::new();

    for (name, walk) in bundled_walks() {
        let ops = WalkOperators::build(walk.truncate(200).unwrap());
        let pairs = eigensolve(&ops.chain().jacobi_matrix(), 1e-9).unwrap();
        match lift(&pairs, &ops) {
            Ok(lifts) => {
                for l in &lifts {
                    worst_residual = worst_residual.max(l.residual);
                    let expect = if l.unit_modulus {
                        1.0
                    } else {
                        2.0 * (1.0 - l.lambda * l.lambda)
                    };
                    worst_norm = worst_norm.max((l.norm_sq - expect).abs());
                }
            }
            Err(e) => failed.push(format!("{name}: {e}")),
        }
    }

    if let Some(dir) = out_dir {
        // One spectral summary artifact for the determinism comparison.
        let walk = HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap();
        if let Ok(data) = decompose(&walk, 200, &DecomposeOptions::for_truncation(200)) {
            let _ = output::write_spectral_csv(&dir.join("spectrum_homogeneous_pr_n200.csv"), &data);
        }
    }

    stamped(vec![
        timed_check("A3.lift-residuals", "spectral", || {
            (
                "||U q - e^{i theta} q||_inf < 1e-9 at n = 200".into(),
                if failed.is_empty() {
                    format!("worst residual {worst_residual:.3e}")
                } else {
                    failed.join("; ")
                },
                "1e-9".into(),
                failed.is_empty() && worst_residual < 1e-9,
            )
        }),
        timed_check("A3.lift-norms", "spectral", || {
            (
                "||q||^2 in {2(1 - lambda^2), 1}".into(),
                format!("worst deviation {worst_norm:.3e}"),
                "1e-9".into(),
                worst_norm < 1e-9,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Criterion 4: signed reflected vectors for loops {0, 3}
// ---------------------------------------------------------------------

fn with_two_loops(walk: &HalfLineWalk) -> HalfLineWalk {
    walk.with_self_loop(0, 0.5, TakeFrom::Right)
        .unwrap()
        .with_self_loop(3, 0.4, TakeFrom::Proportional)
        .unwrap()
}

pub fn criterion_4_signed_reflected() -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let mut worst_eigen = 0.0f64;
    let mut worst_overlap = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut errors = Vec::new();

    for (name, base) in bundled_walks() {
        let walk = with_two_loops(&base);
        let ops = WalkOperators::build(walk.truncate(60).unwrap());
        let class = walk.classify(&SeriesControl::default()).unwrap().class;
        match signed_reflected_basis(&walk, &ops, class, &measures::measure_series_control()) {
            Ok(basis) => {
                let eta = &basis.pairs[0];
                let mut res = ops.apply_u(&eta.vector);
                res.add_scaled(Complex64::new(1.0, 0.0), &eta.vector);
                let eigen_dev = res.amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
                worst_eigen = worst_eigen.max(eigen_dev);
                for j in 0..ops.vertex_count() {
                    worst_overlap = worst_overlap
                        .max(ops.incidence_vector(j).inner(&eta.vector).norm())
                        .max(ops.swapped_incidence_vector(j).inner(&eta.vector).norm());
                }
            }
            Err(e) => errors.push(format!("{name}: {e}")),
        }

        let ctl = SeriesControl {
            cutoff: 100_000,
            ..SeriesControl::default()
        };
        match measures::eta_norm_terminal(&walk, 3, &ctl) {
            Ok(scan) => worst_identity = worst_identity.max(scan.identity_max_dev),
            Err(e) => errors.push(format!("{name} identity: {e}")),
        }
    }

    stamped(vec![
        timed_check("A4.eta-eigenrelation", "spectral", || {
            (
                "U eta_0 = -eta_0 for loops {0, 3}".into(),
                if errors.is_empty() {
                    format!("worst residual {worst_eigen:.3e}")
                } else {
                    errors.join("; ")
                },
                "1e-9".into(),
                errors.is_empty() && worst_eigen < 1e-9,
            )
        }),
        timed_check("A4.eta-orthogonality", "spectral", || {
            (
                "<eta_0, a_j> = <eta_0, b_j> = 0".into(),
                format!("worst overlap {worst_overlap:.3e}"),
                "1e-10".into(),
                worst_overlap < 1e-10,
            )
        }),
        timed_check("A4.norm-identity", "spectral", || {
            (
                "two-route tail identity at every partial sum".into(),
                format!("worst relative deviation {worst_identity:.3e}"),
                "1e-10".into(),
                worst_identity < 1e-10,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Criterion 5: recurrence taxonomy
// ---------------------------------------------------------------------

pub fn criterion_5_recurrence_taxonomy() -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let ctl = SeriesControl::default();
    let expectations = [
        ("example_a", HalfLineWalk::example_a(), RecurrenceClass::Transient),
        ("example_b", HalfLineWalk::example_b(), RecurrenceClass::NullRecurrent),
        ("example_c", HalfLineWalk::example_c(), RecurrenceClass::PositiveRecurrent),
        (
            "homogeneous p=0.7",
            HalfLineWalk::homogeneous(0.7, 0.3, 0.0).unwrap(),
            RecurrenceClass::Transient,
        ),
        (
            "homogeneous p=0.5",
            HalfLineWalk::homogeneous(0.5, 0.5, 0.0).unwrap(),
            RecurrenceClass::NullRecurrent,
        ),
        (
            "homogeneous p=0.3",
            HalfLineWalk::homogeneous(0.3, 0.7, 0.0).unwrap(),
            RecurrenceClass::PositiveRecurrent,
        ),
    ];
    let mut rows = Vec::new();
    let mut all_ok = true;
    for (name, walk, expect) in expectations {
        match walk.classify(&ctl) {
            Ok(report) => {
                let ok = report.class == expect
                    && report.consistent_with_declared != Some(false);
                all_ok &= ok;
                rows.push(format!("{name}: {}", report.class.as_str()));
            }
            Err(e) => {
                all_ok = false;
                rows.push(format!("{name}: {e}"));
            }
        }
    }
    stamped(vec![timed_check("A5.taxonomy", "rw-model", || {
        (
            "(a) transient, (b) null, (c) positive; homogeneous by sign of q - p".into(),
            rows.join("; "),
            "exact labels".into(),
            all_ok,
        )
    })], started)
}

// ---------------------------------------------------------------------
// Criterion 6: closed form of the homogeneous positive recurrent walk
// ---------------------------------------------------------------------

pub fn criterion_6_closed_form(out_dir: Option<&Path>) -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let (p, q, n, t) = (0.3, 0.7, 300usize, 10_000usize);
    let walk = HalfLineWalk::homogeneous(p, q, 0.0).unwrap();
    let data = decompose(&walk, n, &DecomposeOptions::for_truncation(n)).unwrap();
    let psi0 = measures::arc_state(&data.ops, 0, Direction::Right)
        .unwrap()
        .state;
    let direct = measures::direct_limit_measure(&data.ops, &psi0, t);
    let closed = measures::homogeneous_closed_form(p, q, 0, n).unwrap();

    let sup_gap = direct.table.sup_diff_on(&closed.table, 0, 20);
    // At j = 0 the closed form is exactly the doubled bound 2 pi(i) pi(0),
    // so the domination check reduces to direct >= closed - slack.
    let worst_margin = (0..=n)
        .map(|u| direct.table.get(u) - (closed.table.get(u) - 5e-3))
        .fold(f64::INFINITY, f64::min);

    if let Some(dir) = out_dir {
        let spectral = measures::spectral_limit_measure(&data, &psi0).unwrap();
        let _ = output::write_measure_csv(
            &dir.join("measure_homogeneous_pr_n300_t10000.csv"),
            &direct,
            &spectral,
            None,
            Some(&closed.table),
        );
    }

    stamped(vec![
        timed_check("A6.closed-form-match", "measures", || {
            (
                "direct Cesaro ~ (2 delta_0 + (1 - delta_0)) pi(0) pi(i) on 0..=20".into(),
                format!("sup gap {sup_gap:.3e} (pi(0) = 2/7)"),
                "1e-2".into(),
                sup_gap < 1e-2,
            )
        }),
        timed_check("A6.doubled-lower-bound", "measures", || {
            (
                "direct >= 2 pi(i) pi(0) - 5e-3 at every site".into(),
                format!("worst margin {worst_margin:.3e}"),
                "5e-3 slack".into(),
                worst_margin >= 0.0,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Criterion 7: localization dichotomy for the balanced walk
// ---------------------------------------------------------------------

pub fn criterion_7_localization_dichotomy(out_dir: Option<&Path>) -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let (n, t) = (400usize, 10_000usize);
    let mut records = Vec::new();

    // One loop: no localization.
    let one = HalfLineWalk::homogeneous(0.5, 0.5, 0.0)
        .unwrap()
        .with_self_loop(0, 0.5, TakeFrom::Right)
        .unwrap();
    let data1 = decompose(&one, n, &DecomposeOptions::for_truncation(n)).unwrap();
    let seed = measures::arc_state(&data1.ops, 0, Direction::Loop)
        .unwrap()
        .state;
    let psi1 = measures::project_out_mass_points(&seed, &data1).unwrap();
    let spectral1 = measures::spectral_limit_measure(&data1, &psi1).unwrap();
    let direct1 = measures::direct_limit_measure(&data1.ops, &psi1, t);
    let hs_max = spectral1
        .components
        .as_ref()
        .map(|c| c.h_s.max_value().max(0.0))
        .unwrap_or(0.0);
    let direct_sup = direct1.table.max_value();

    records.push(timed_check("A7.one-loop-no-localization", "measures", || {
        (
            "H^(S) part = 0 and direct sup < 2e-2".into(),
            format!("hs sup {hs_max:.3e}, direct sup {direct_sup:.3e}"),
            "1e-9 / 2e-2".into(),
            hs_max < 1e-9 && direct_sup < 2e-2,
        )
    }));

    // Two loops: localization on {0..3} described by the closed formula.
    let two = one.with_self_loop(3, 0.4, TakeFrom::Proportional).unwrap();
    let data2 = decompose(&two, n, &DecomposeOptions::for_truncation(n)).unwrap();
    let seed2 = measures::arc_state(&data2.ops, 3, Direction::Left)
        .unwrap()
        .state;
    let psi2 = measures::project_onto_hs(&seed2, &data2).unwrap();
    let direct2 = measures::direct_limit_measure(&data2.ops, &psi2, t);
    let spectral2 = measures::spectral_limit_measure(&data2, &psi2).unwrap();
    let cor = measures::corollary3_measure(&two, &data2.ops, &psi2).unwrap();

    let inside_gap = cor.table.sup_diff_on(&direct2.table, 0, 3);
    let outside_spectral = (4..spectral2.table.len())
        .map(|u| {
            spectral2
                .components
                .as_ref()
                .map(|c| c.h_s.get(u))
                .unwrap_or(0.0)
                .max(cor.table.get(u))
        })
        .fold(0.0, f64::max);
    let outside_direct = (4..direct2.table.len())
        .map(|u| direct2.table.get(u))
        .fold(0.0, f64::max);

    if let Some(dir) = out_dir {
        let _ = output::write_measure_csv(
            &dir.join("measure_null_two_loops_n400_t10000.csv"),
            &direct2,
            &spectral2,
            None,
            Some(&cor.table),
        );
    }

    records.push(timed_check("A7.two-loop-formula", "measures", || {
        (
            "two-loop formula ~ direct on {0..3}".into(),
            format!("sup gap {inside_gap:.3e}"),
            "2e-3".into(),
            inside_gap < 2e-3,
        )
    }));
    records.push(timed_check("A7.two-loop-support", "measures", || {
        (
            "both routes vanish outside {0..3}".into(),
            format!("spectral {outside_spectral:.3e}, direct {outside_direct:.3e}"),
            "1e-9 / 2e-2".into(),
            outside_spectral < 1e-9 && outside_direct < 2e-2,
        )
    }));
    stamped(records, started)
}

// ---------------------------------------------------------------------
// Criterion 8: one-loop formula on the transient family
// ---------------------------------------------------------------------

pub fn criterion_8_corollary2(out_dir: Option<&Path>) -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    // The one-loop formula describes the infinite line, where the escaping
    // mass of a transient walk never returns. The direct route therefore
    // runs on a causally padded box: with unit front speed, the reflecting
    // boundary at t/2 + window stays invisible to the windowed average for
    // every t' < t. A box of exactly the window size hybridizes the
    // terminal vector with its boundary reflection into a conjugate pair
    // (splitting ~ n^{-3/2}) that a horizon of 1e4 resolves, halving the
    // localized mass.
    let (window, t) = (400usize, 10_000usize);
    let n_sys = t / 2 + window;
    let walk = HalfLineWalk::example_a()
        .with_self_loop(0, 0.5, TakeFrom::Right)
        .unwrap();

    // Mass points are determined at the window scale; this transient walk
    // has none, so "assumption (1)" holds for any seed.
    let data = decompose(&walk, window, &DecomposeOptions::for_truncation(window)).unwrap();
    let no_mass_points = data.mass_lambdas.is_empty();

    let ops_sys = WalkOperators::build(walk.truncate(n_sys).unwrap());
    let (p0, _, r0) = walk.triple(0);
    let psi0 = measures::custom_state(
        &ops_sys,
        0,
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(-p0.sqrt(), 0.0),
            Complex64::new(r0.sqrt(), 0.0),
        ],
    )
    .unwrap()
    .state;
    let direct = measures::direct_limit_measure(&ops_sys, &psi0, t);
    let cor = measures::corollary2_measure(
        &walk,
        &ops_sys,
        &psi0,
        &measures::measure_series_control(),
    )
    .unwrap();
    let sup_gap = cor.table.sup_diff_on(&direct.table, 0, window);

    // H^(S) profile through the window from the terminal vector.
    let basis = signed_reflected_basis(
        &walk,
        &ops_sys,
        RecurrenceClass::Transient,
        &measures::measure_series_control(),
    )
    .unwrap();
    let eta_hat = basis.terminal.as_ref().unwrap().normalized();
    let overlap = eta_hat.inner(&psi0).norm_sqr();
    let profile = ops_sys.position_distribution(&eta_hat);
    let min_mass_through_21 = (0..=21)
        .map(|u| overlap * profile.get(u))
        .fold(f64::INFINITY, f64::min);

    if let Some(dir) = out_dir {
        let spectral = measures::spectral_limit_measure(&data, &psi0_on_window(&data, &walk))
            .expect("window system decomposes");
        let _ = output::write_measure_csv(
            &dir.join("measure_example_a_one_loop_n400_t10000.csv"),
            &direct,
            &spectral,
            None,
            Some(&cor.table),
        );
    }

    stamped(vec![
        timed_check("A8.assumption-one", "measures", || {
            (
                "no square-summable Jacobi eigenvectors to project away".into(),
                format!("accepted mass points: {:?}", data.mass_lambdas),
                "empty".into(),
                no_mass_points,
            )
        }),
        timed_check("A8.one-loop-formula", "measures", || {
            (
                "one-loop formula ~ direct Cesaro on the window".into(),
                format!("sup gap {sup_gap:.3e} (weight {:.4})", cor.weight),
                "2e-3".into(),
                sup_gap < 2e-3,
            )
        }),
        timed_check("A8.unbounded-support", "measures", || {
            (
                "H^(S) mass positive through site 21".into(),
                format!("min mass {min_mass_through_21:.3e}"),
                "> 1e-8".into(),
                min_mass_through_21 > 1e-8,
            )
        }),
    ], started)
}

/// The window-sized copy of the aligned seed used only for the CSV artifact.
fn psi0_on_window(
    data: &qwalk_core::measures::SpectralData,
    walk: &HalfLineWalk,
) -> StateVector {
    let (p0, _, r0) = walk.triple(0);
    measures::custom_state(
        &data.ops,
        0,
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(-p0.sqrt(), 0.0),
            Complex64::new(r0.sqrt(), 0.0),
        ],
    )
    .unwrap()
    .state
}

// ---------------------------------------------------------------------
// Criterion 9: terminal eta norms across the recurrence divide
// ---------------------------------------------------------------------

pub fn criterion_9_eta_norm() -> Vec<CheckRecord> {
    let started = std::time::Instant::now();
    let ctl = SeriesControl::default();

    let a = HalfLineWalk::example_a()
        .with_self_loop(0, 0.5, TakeFrom::Right)
        .unwrap();
    let scan_a = measures::eta_norm_terminal(&a, 0, &ctl).unwrap();

    let b = HalfLineWalk::example_b()
        .with_self_loop(0, 0.5, TakeFrom::Right)
        .unwrap();
    let scan_b = measures::eta_norm_terminal(&b, 0, &ctl).unwrap();

    stamped(vec![
        timed_check("A9.transient-stabilizes", "measures", || {
            (
                "||eta_n||^2 partial sums stabilize for the transient family".into(),
                format!(
                    "outcome {:?}, sum {:.6} after {} terms",
                    scan_a.scan.outcome, scan_a.scan.sum, scan_a.scan.terms
                ),
                "1e-12 relative".into(),
                scan_a.scan.outcome == SeriesOutcome::Stabilized,
            )
        }),
        timed_check("A9.null-recurrent-divergence-threshold", "measures", || {
            // Faithful to the stated criterion: the partial sums must cross
            // 1e8 within 1e6 terms. The series diverges, but only like
            // 2 ln L, so the observed sum sits near 28 and the check fails;
            // see the report notes.
            (
                "partial sums exceed 1e8 within 1e6 terms".into(),
                format!(
                    "outcome {:?}, sum {:.6} after {} terms (growth ~ 2 ln L)",
                    scan_b.scan.outcome, scan_b.scan.sum, scan_b.scan.terms
                ),
                "1e8".into(),
                scan_b.scan.outcome == SeriesOutcome::Diverged
                    && scan_b.scan.sum > ctl.diverge_threshold,
            )
        }),
        timed_check("A9.partial-sum-identity", "measures", || {
            let worst = scan_a.identity_max_dev.max(scan_b.identity_max_dev);
            (
                "two-route identity at every partial sum".into(),
                format!("worst relative deviation {worst:.3e}"),
                "1e-10".into(),
                worst < 1e-10,
            )
        }),
    ], started)
}

// ---------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------

/// Run criteria 1..9, writing artifacts (CSVs and the pass report) under
/// `dir`.
pub fn run_pass(dir: &Path) -> Result<Vec<CheckRecord>, CliError> {
    fs::create_dir_all(dir)?;
    let mut records = Vec::new();
    records.extend(criterion_1_operator_algebra());
    records.extend(criterion_2_dimension_counts());
    records.extend(criterion_3_eigenvector_lift(Some(dir)));
    records.extend(criterion_4_signed_reflected());
    records.extend(criterion_5_recurrence_taxonomy());
    records.extend(criterion_6_closed_form(Some(dir)));
    records.extend(criterion_7_localization_dichotomy(Some(dir)));
    records.extend(criterion_8_corollary2(Some(dir)));
    records.extend(criterion_9_eta_norm());
    let report = VerificationReport {
        records: records.clone(),
    };
    fs::write(dir.join("report.txt"), report.render_file())?;
    Ok(records)
}

/// Byte-compare the artifact trees of two verification passes.
pub fn compare_artifact_dirs(a: &Path, b: &Path) -> Result<(bool, String), CliError> {
    let mut names_a: Vec<String> = fs::read_dir(a)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names_a.sort();
    let mut names_b: Vec<String> = fs::read_dir(b)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names_b.sort();
    if names_a != names_b {
        return Ok((false, format!("file sets differ: {names_a:?} vs {names_b:?}")));
    }
    for name in &names_a {
        let bytes_a = fs::read(a.join(name))?;
        let bytes_b = fs::read(b.join(name))?;
        if bytes_a != bytes_b {
            return Ok((false, format!("{name} differs between runs")));
        }
    }
    Ok((true, format!("{} artifacts byte-identical", names_a.len())))
}

/// Determinism: two full passes must produce byte-identical artifacts.
pub fn criterion_10_determinism(out_root: &Path) -> Result<Vec<CheckRecord>, CliError> {
    let dir_a = out_root.join("run");
    let dir_b = out_root.join("repeat");
    let start = std::time::Instant::now();
    run_pass(&dir_a)?;
    run_pass(&dir_b)?;
    let (identical, detail) = compare_artifact_dirs(&dir_a, &dir_b)?;
    Ok(vec![CheckRecord {
        name: "A10.determinism".into(),
        module: "scenario-cli",
        expected: "two verify runs produce byte-identical reports and CSVs".into(),
        observed: detail,
        tolerance: "byte-identical".into(),
        passed: identical,
        runtime: start.elapsed(),
    }])
}

const MODULE_FILTERS: &[&str] = &["arc-space", "spectral", "rw-model", "measures", "scenario-cli"];

/// Names of the acceptance criteria with their module tags.
pub fn criterion_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("A1 operator algebra", "arc-space"),
        ("A2 dimension counts", "spectral"),
        ("A3 eigenvector lift", "spectral"),
        ("A4 signed reflected vectors", "spectral"),
        ("A5 recurrence taxonomy", "rw-model"),
        ("A6 closed form", "measures"),
        ("A7 localization dichotomy", "measures"),
        ("A8 one-loop corollary", "measures"),
        ("A9 terminal eta norm", "measures"),
        ("A10 determinism", "scenario-cli"),
    ]
}

/// Execute the full suite (optionally restricted to one module) and return
/// the report. The determinism criterion re-runs everything twice under
/// `out_root`.
pub fn verify_all(filter: Option<&str>, out_root: &Path) -> Result<VerificationReport, CliError> {
    if let Some(f) = filter {
        if !MODULE_FILTERS.contains(&f) {
            return Err(CliError::ConfigInvalid {
                field: "--filter".into(),
                message: format!("unknown module '{f}'; expected one of {MODULE_FILTERS:?}"),
            });
        }
    }
    let keep = |module: &str| filter.is_none() || filter == Some(module);
    let mut records = Vec::new();

    if keep("arc-space") {
        records.extend(criterion_1_operator_algebra());
    }
    if keep("spectral") {
        records.extend(criterion_2_dimension_counts());
        records.extend(criterion_3_eigenvector_lift(None));
        records.extend(criterion_4_signed_reflected());
    }
    if keep("rw-model") {
        records.extend(criterion_5_recurrence_taxonomy());
    }
    if keep("measures") {
        records.extend(criterion_6_closed_form(None));
        records.extend(criterion_7_localization_dichotomy(None));
        records.extend(criterion_8_corollary2(None));
        records.extend(criterion_9_eta_norm());
    }
    if keep("scenario-cli") {
        records.extend(criterion_10_determinism(out_root)?);
    }

    let report = VerificationReport { records };
    fs::create_dir_all(out_root)?;
    fs::write(out_root.join("report.txt"), report.render_file())?;
    Ok(report)
}
