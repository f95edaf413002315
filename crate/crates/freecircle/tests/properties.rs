//! Randomized invariants of the series engine, circle measures, free
//! convolution, the sequence classifier, and the matrix harness.
//!
//! Each block generates structured random inputs and checks an algebraic
//! identity with an explicit tolerance. Generators condition inputs to keep
//! the numerics meaningful (power-series reversion amplifies roundoff by
//! roughly |c₁|^{−2k+1}, so untamed coefficients would only test noise).

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use freecircle::freeconv::{self, FreeWord};
use freecircle::limits::{self, BernoulliRule, SequenceSpec, TailSum};
use freecircle::measure::{AtomicMeasure, CircleMeasure, MomentVector};
use freecircle::rmtsim::{self, SimConfig};
use freecircle::series::TruncatedSeries;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn max_coeff_diff(a: &TruncatedSeries, b: &TruncatedSeries) -> f64 {
    a.max_abs_diff(b).unwrap()
}

/// A series with f₀ = 0, |f₁| ∈ [0.1, 10], and higher coefficients shaped as
/// f_k = f₁^k·u_k·4^{−(k−1)} with u_k in the unit disk. Dividing out f₁, this
/// is f₁·H(f₁z) with H's derivative nonvanishing on the unit disk, so the
/// reverted coefficients grow slowly enough for double precision while the
/// phases and the leading magnitude stay arbitrary.
fn invertible_series(order: usize) -> impl Strategy<Value = TruncatedSeries> {
    (
        0.1f64..10.0,
        -PI..PI,
        prop::collection::vec((0.0f64..1.0, -PI..PI), order - 1),
    )
        .prop_map(move |(r1, phi1, tail)| {
            let f1 = Complex64::from_polar(r1, phi1);
            let mut coeffs = vec![ZERO; order + 1];
            coeffs[1] = f1;
            for (i, &(ur, uphi)) in tail.iter().enumerate() {
                let k = i + 2;
                coeffs[k] = f1.powi(k as i32)
                    * Complex64::from_polar(ur, uphi)
                    * 4.0f64.powi(-(k as i32 - 1));
            }
            TruncatedSeries::from_coeffs(coeffs).unwrap()
        })
}

/// As [`invertible_series`] but with f_k = f₁·u_k·4^{−(k−1)} (linear in f₁
/// rather than geometric), i.e. f₁·G(z) for tame G. Double reversion must
/// reproduce f's own coefficients to absolute accuracy, which is only
/// meaningful when those stay bounded; the relative conditioning of both
/// reversions is f₁-free for this shape.
fn flat_invertible_series(order: usize) -> impl Strategy<Value = TruncatedSeries> {
    (
        0.1f64..10.0,
        -PI..PI,
        prop::collection::vec((0.0f64..1.0, -PI..PI), order - 1),
    )
        .prop_map(move |(r1, phi1, tail)| {
            let f1 = Complex64::from_polar(r1, phi1);
            let mut coeffs = vec![ZERO; order + 1];
            coeffs[1] = f1;
            for (i, &(ur, uphi)) in tail.iter().enumerate() {
                let k = i + 2;
                coeffs[k] =
                    f1 * Complex64::from_polar(ur, uphi) * 4.0f64.powi(-(k as i32 - 1));
            }
            TruncatedSeries::from_coeffs(coeffs).unwrap()
        })
}

/// A series with all coefficients in the unit disk (no structure assumed);
/// safe for ring identities, not for reversion.
fn bounded_series(order: usize) -> impl Strategy<Value = TruncatedSeries> {
    prop::collection::vec((0.0f64..1.0, -PI..PI), order + 1).prop_map(|polar| {
        TruncatedSeries::from_coeffs(
            polar
                .iter()
                .map(|&(r, phi)| Complex64::from_polar(r, phi))
                .collect(),
        )
        .unwrap()
    })
}

/// As [`bounded_series`] but with |f₀| ≥ 0.5 and geometrically decaying
/// higher coefficients, so reciprocals stay well conditioned.
fn unit_series(order: usize) -> impl Strategy<Value = TruncatedSeries> {
    (
        0.5f64..1.0,
        -PI..PI,
        prop::collection::vec((0.0f64..1.0, -PI..PI), order),
    )
        .prop_map(move |(r0, phi0, tail)| {
            let mut coeffs = vec![Complex64::from_polar(r0, phi0)];
            for (i, &(r, phi)) in tail.iter().enumerate() {
                coeffs.push(Complex64::from_polar(r, phi) * 2.0f64.powi(-(i as i32 + 1)));
            }
            TruncatedSeries::from_coeffs(coeffs).unwrap()
        })
}

/// An atomic measure with 3–5 atoms, weights bounded away from 0.
fn atomic_measure() -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((-PI..PI, 0.1f64..1.0), 3..=5).prop_map(|raw| {
        let total: f64 = raw.iter().map(|&(_, w)| w).sum();
        AtomicMeasure::new(raw.iter().map(|&(t, w)| (t, w / total)).collect()).unwrap()
    })
}

/// As [`atomic_measure`] with |c₁| bounded below, for transform routes.
fn biased_atomic_measure(min_c1: f64) -> impl Strategy<Value = AtomicMeasure> {
    atomic_measure().prop_filter("first moment too small", move |m| {
        m.first_moment().norm() >= min_c1
    })
}

/// A mean-zero measure: `step` equally weighted atoms at rotated roots of
/// unity. All moments except multiples of `step` vanish (up to input
/// roundoff), and c_step = e^{i·step·φ}.
fn rotated_roots(step: usize, phi: f64) -> AtomicMeasure {
    let atoms = (0..step)
        .map(|j| {
            let angle = phi + 2.0 * PI * j as f64 / step as f64;
            (angle.rem_euclid(2.0 * PI) - PI, 1.0 / step as f64)
        })
        .collect();
    AtomicMeasure::new(atoms).unwrap()
}

fn moments(m: &AtomicMeasure, k: usize) -> MomentVector {
    m.moments(k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // ── series ring and reversion ───────────────────────────────────────

    #[test]
    fn revert_round_trips_to_identity(f in invertible_series(16)) {
        // Only f∘f⁻¹ is asserted: the terms of that composition carry no net
        // power of f₁, while f⁻¹∘f sums intermediates of size |f₁|^{k−1} and
        // is genuinely ill-conditioned for |f₁| > 1.
        let g = f.revert().unwrap();
        let id = TruncatedSeries::identity(16).unwrap();
        prop_assert!(max_coeff_diff(&f.compose(&g).unwrap(), &id) <= 1e-10);
    }

    #[test]
    fn revert_is_an_involution(f in flat_invertible_series(16)) {
        let back = f.revert().unwrap().revert().unwrap();
        prop_assert!(max_coeff_diff(&back, &f) <= 1e-10);
    }

    #[test]
    fn mul_is_commutative_and_associative(
        a in bounded_series(12),
        b in bounded_series(12),
        c in bounded_series(12),
    ) {
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        prop_assert!(max_coeff_diff(&ab, &ba) <= 1e-12);
        let left = ab.mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(max_coeff_diff(&left, &right) <= 1e-12);
    }

    #[test]
    fn reciprocal_is_multiplicative(a in unit_series(12), b in unit_series(12)) {
        let lhs = a.mul(&b).unwrap().reciprocal().unwrap();
        let rhs = a.reciprocal().unwrap().mul(&b.reciprocal().unwrap()).unwrap();
        prop_assert!(max_coeff_diff(&lhs, &rhs) <= 1e-12);
    }

    // ── measures ────────────────────────────────────────────────────────

    #[test]
    fn rotation_scales_moments_by_phases(m in atomic_measure(), phi in -PI..PI) {
        let base = moments(&m, 8);
        let rotated = moments(&m.rotate(phi), 8);
        for k in 1..=8i64 {
            let expected = base.moment(k).unwrap() * Complex64::from_polar(1.0, k as f64 * phi);
            prop_assert!((rotated.moment(k).unwrap() - expected).norm() <= 1e-12);
            prop_assert!(rotated.moment(k).unwrap().norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn s_series_inverts_psi_series(m in biased_atomic_measure(0.1)) {
        // ψ(ψ⁻¹(u)) = u with ψ⁻¹(u) = u/(u+1)·S(u). Reversion amplifies
        // roundoff like |c₁|^{−(2K−1)}, so the testable order depends on the
        // mean: measured worst-case identity error over adversarial measures
        // is 2.9e-12 at (K = 3, |c₁| ≥ 0.1) and 3.3e-11 at (K = 5,
        // |c₁| ≥ 0.3); one step deeper breaks the 1e-9 budget in each case.
        let c1 = m.first_moment().norm();
        let order = if c1 >= 0.3 { 5 } else { 3 };
        let cm = CircleMeasure::from_atoms(m);
        let psi = cm.psi_series(order).unwrap();
        let s = cm.s_series(order).unwrap();
        let one = TruncatedSeries::constant(ONE, order).unwrap();
        let shifted = TruncatedSeries::identity(order).unwrap().add(&one).unwrap();
        let psi_inverse = s
            .mul(&shifted.reciprocal().unwrap()).unwrap()
            .mul_by_var()
            .truncated(order).unwrap();
        let composed = psi.compose(&psi_inverse).unwrap();
        let id = TruncatedSeries::identity(order).unwrap();
        prop_assert!(max_coeff_diff(&composed, &id) <= 1e-9);
    }

    #[test]
    fn poisson_density_is_a_density(m in atomic_measure(), r in 0.05f64..0.95) {
        let cm = CircleMeasure::from_atoms(m);
        let rows = cm.poisson_density(r, 4096, 1e-6).unwrap();
        let mut integral = 0.0;
        for &(_, density) in &rows {
            prop_assert!(density >= -1e-9);
            integral += density;
        }
        integral *= 2.0 * PI / rows.len() as f64;
        prop_assert!((integral - 1.0).abs() <= 1e-6, "integral = {integral}");
    }

    // ── free multiplicative convolution ─────────────────────────────────

    #[test]
    fn convolution_is_commutative(m1 in atomic_measure(), m2 in atomic_measure()) {
        let a = moments(&m1, 6);
        let b = moments(&m2, 6);
        let ab = freeconv::convolve_moments(&a, &b, 6).unwrap();
        let ba = freeconv::convolve_moments(&b, &a, 6).unwrap();
        for k in 1..=6i64 {
            prop_assert!((ab.moment(k).unwrap() - ba.moment(k).unwrap()).norm() <= 1e-10);
            prop_assert!(ab.moment(k).unwrap().norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn convolution_is_associative(
        m1 in atomic_measure(),
        m2 in atomic_measure(),
        m3 in atomic_measure(),
    ) {
        let (a, b, c) = (moments(&m1, 5), moments(&m2, 5), moments(&m3, 5));
        let left = freeconv::convolve_moments(
            &freeconv::convolve_moments(&a, &b, 5).unwrap(), &c, 5).unwrap();
        let right = freeconv::convolve_moments(
            &a, &freeconv::convolve_moments(&b, &c, 5).unwrap(), 5).unwrap();
        for k in 1..=5i64 {
            prop_assert!((left.moment(k).unwrap() - right.moment(k).unwrap()).norm() <= 1e-9);
        }
    }

    #[test]
    fn convolution_is_rotation_equivariant(
        m1 in atomic_measure(),
        m2 in atomic_measure(),
        phi1 in -PI..PI,
        phi2 in -PI..PI,
    ) {
        let plain = freeconv::convolve_moments(&moments(&m1, 6), &moments(&m2, 6), 6).unwrap();
        let rotated = freeconv::convolve_moments(
            &moments(&m1.rotate(phi1), 6),
            &moments(&m2.rotate(phi2), 6),
            6,
        ).unwrap();
        let expected = plain.rotate(phi1 + phi2);
        for k in 1..=6i64 {
            prop_assert!(
                (rotated.moment(k).unwrap() - expected.moment(k).unwrap()).norm() <= 1e-10
            );
        }
    }

    #[test]
    fn zero_mean_factors_absorb_everything(
        step1 in 2usize..=3,
        step2 in 2usize..=3,
        phi1 in -PI..PI,
        phi2 in -PI..PI,
    ) {
        // Exactly mean-zero inputs give exactly zero convolution moments;
        // here the inputs carry ~1e-16 representation dust, which the
        // expansion amplifies by at most its term count (< 4^k).
        let a = moments(&rotated_roots(step1, phi1), 6);
        let b = moments(&rotated_roots(step2, phi2), 6);
        let conv = freeconv::convolve_moments(&a, &b, 6).unwrap();
        for k in 1..=6i64 {
            prop_assert!(conv.moment(k).unwrap().norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_prefix_moment_factorizes(
        step in 2usize..=4,
        phi in -PI..PI,
        m2 in atomic_measure(),
    ) {
        // If c₁ = … = c_{step−1} = 0 for the first factor, moment `step` of
        // the convolution is (second factor's c₁)^step · (first's c_step),
        // and everything below vanishes.
        let a = moments(&rotated_roots(step, phi), 4);
        let b = moments(&m2, 4);
        let conv = freeconv::convolve_moments(&a, &b, 4).unwrap();
        for k in 1..step as i64 {
            prop_assert!(conv.moment(k).unwrap().norm() <= 1e-12);
        }
        let expected = b.moment(1).unwrap().powi(step as i32) * a.moment(step as i64).unwrap();
        prop_assert!((conv.moment(step as i64).unwrap() - expected).norm() <= 1e-12);
    }

    #[test]
    fn joint_moments_are_tracial(
        m1 in atomic_measure(),
        m2 in atomic_measure(),
        powers in prop::collection::vec((0usize..2, 1i32..=3), 2..=4),
    ) {
        // E(w) is invariant under cyclic rotation of the word w.
        let mut letters: Vec<(usize, i32)> = Vec::new();
        for &(id, p) in &powers {
            match letters.last() {
                Some(&(last, _)) if last == id => letters.last_mut().unwrap().1 += p,
                _ => letters.push((id, p)),
            }
        }
        // Cyclic wrap: the word must stay alternating after rotation too.
        if letters.len() >= 2 && letters[0].0 == letters[letters.len() - 1].0 {
            letters.pop();
        }
        prop_assume!(!letters.is_empty());
        let measures: HashMap<usize, MomentVector> =
            [(0, moments(&m1, 16)), (1, moments(&m2, 16))].into();
        let word = FreeWord::new(letters.clone()).unwrap();
        let base = freeconv::joint_moment(&word, &measures).unwrap();
        for shift in 1..letters.len() {
            let mut rotated = letters[shift..].to_vec();
            rotated.extend_from_slice(&letters[..shift]);
            let value = freeconv::joint_moment(&FreeWord::new(rotated).unwrap(), &measures)
                .unwrap();
            prop_assert!((value - base).norm() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ── classification ──────────────────────────────────────────────────

    #[test]
    fn classification_ignores_factor_phases(
        which in 0usize..7,
        angles in prop::collection::vec(-PI..PI, 128),
    ) {
        // Horizon 128: rotation materializes rule-based specs into explicit
        // data, whose mean-decay split needs the decaying corpus case to have
        // dropped below the split threshold by the horizon.
        let horizon = 128;
        let spec = corpus()[which].1.clone();
        let base = limits::classify(&spec, horizon).unwrap();
        let rotated = spec.rotated(&angles, horizon).unwrap();
        let turned = limits::classify(&rotated, horizon).unwrap();
        prop_assert_eq!(base.case_label, turned.case_label);
        prop_assert_eq!(base.converges_to_uniform, turned.converges_to_uniform);
    }
}

/// The seven-case standard corpus: one sequence spec per classifier label.
fn corpus() -> Vec<(&'static str, SequenceSpec)> {
    let b = |p: f64| CircleMeasure::bernoulli(p).unwrap();
    // a_k = 1 − 1/k², whose tail α-sum converges (Σ2/k² < ∞) while the
    // running product stays positive, and a_k = 1/√k, whose α-sum diverges.
    let slow_to_one = BernoulliRule::OneMinusCOverKPowS { c: 0.5, s: 2.0 };
    let decaying = BernoulliRule::COverKPowS { c: 1.0, s: 0.5 };
    vec![
        (
            "I",
            SequenceSpec::bernoulli_rule(vec![b(0.9)], slow_to_one.clone(), TailSum::Unknown)
                .unwrap(),
        ),
        (
            "II",
            SequenceSpec::bernoulli_rule(
                vec![b(0.5), b(0.5)],
                BernoulliRule::Constant { p: 0.9 },
                TailSum::Unknown,
            )
            .unwrap(),
        ),
        (
            "III.1",
            SequenceSpec::bernoulli_rule(vec![], decaying, TailSum::Unknown).unwrap(),
        ),
        ("III.2", SequenceSpec::repeated(b(0.9))),
        (
            "IV.1",
            SequenceSpec::bernoulli_rule(
                vec![CircleMeasure::uniform(16).unwrap()],
                BernoulliRule::Constant { p: 0.9 },
                TailSum::Unknown,
            )
            .unwrap(),
        ),
        (
            "IV.2",
            SequenceSpec::bernoulli_rule(
                vec![b(0.5)],
                BernoulliRule::Constant { p: 0.9 },
                TailSum::Unknown,
            )
            .unwrap(),
        ),
        (
            "IV.3",
            SequenceSpec::bernoulli_rule(vec![b(0.5)], slow_to_one, TailSum::Unknown).unwrap(),
        ),
    ]
}

/// Classifier verdicts must agree with the flatness diagnostics: convergent
/// specs flatten below 0.05 by the horizon and keep flattening over the last
/// quarter; divergent specs keep a moment bounded away from zero.
#[test]
fn classifier_agrees_with_diagnostics() {
    let horizon = 64;
    let k_order = 4;
    for (label, spec) in corpus() {
        let result = limits::classify(&spec, horizon).unwrap();
        assert_eq!(result.case_label.to_string(), label);
        assert!(!result.indeterminate_at_horizon, "{label} indeterminate");
        let table = limits::diagnose(&spec, horizon, k_order).unwrap();
        let at_horizon = table[horizon - 1].max_abs_moment;
        if result.converges_to_uniform {
            assert!(at_horizon < 0.05, "{label}: {at_horizon}");
            for w in table[(3 * horizon / 4) - 1..].windows(2) {
                assert!(
                    w[1].max_abs_moment <= w[0].max_abs_moment + 1e-12,
                    "{label} not flattening at n = {}",
                    w[1].n
                );
            }
        } else {
            assert!(at_horizon >= 0.05, "{label}: {at_horizon}");
        }
    }
}

// ── matrix harness ──────────────────────────────────────────────────────

/// Empirical moment error scales like 1/N: comparing dimension 128 against
/// 512 on ten random products, the coarser dimension must lose at least 8
/// times out of 10. Fixed seed, deterministic trials, so this is a frozen
/// regression rather than a stochastic test.
#[test]
fn halving_dimension_grows_moment_error() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut coarser_loses = 0usize;
    for case in 0..10 {
        let n_factors = 2 + case % 3;
        let factors: Vec<AtomicMeasure> = (0..n_factors)
            .map(|_| {
                let n_atoms = rng.gen_range(3..=5);
                let raw: Vec<(f64, f64)> = (0..n_atoms)
                    .map(|_| (rng.gen_range(-PI..PI), rng.gen_range(0.1..1.0)))
                    .collect();
                let total: f64 = raw.iter().map(|&(_, w)| w).sum();
                AtomicMeasure::new(raw.iter().map(|&(t, w)| (t, w / total)).collect()).unwrap()
            })
            .collect();
        let error_at = |n_dim: usize| -> f64 {
            let mut cfg = SimConfig::new(n_dim, 4, 7000 + case as u64, 4, factors.clone());
            cfg.collect_eigenangles = false;
            let result = rmtsim::simulate_product(&cfg).unwrap();
            result
                .empirical_moments
                .iter()
                .zip(&result.predicted_moments)
                .map(|(e, p)| (e - p).norm())
                .fold(0.0, f64::max)
        };
        if error_at(128) > error_at(512) {
            coarser_loses += 1;
        }
    }
    assert!(coarser_loses >= 8, "coarser dimension won {} of 10", 10 - coarser_loses);
}
