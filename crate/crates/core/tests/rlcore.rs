use approx::assert_abs_diff_eq;
use ctrlforge::rlcore::{sigmoid, tolerance, Sigmoid, Tolerance, ToleranceError};
use ctrlforge::rlcore::{Array, ArraySpec, DType, SpecError, StepType, TimeStep};
use indexmap::IndexMap;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cheetah(v: f64) -> f64 {
    tolerance(v, (10.0, f64::INFINITY), 10.0, Sigmoid::Linear, 0.0).unwrap()
}

#[test]
fn cheetah_reward_is_clipped_linear_in_velocity() {
    for (v, want) in [(0.0, 0.0), (5.0, 0.5), (10.0, 1.0), (15.0, 1.0)] {
        assert_eq!(cheetah(v), want, "v = {v}");
        assert_eq!(cheetah(v), f64::max(0.0, f64::min(v / 10.0, 1.0)));
    }
}

#[test]
fn value_at_margin_is_hit_for_every_kind() {
    for kind in Sigmoid::ALL {
        for v in [0.05, 0.1, 0.5, 0.9] {
            let y = sigmoid(kind, 1.0, v).unwrap();
            assert_abs_diff_eq!(y, v, epsilon = 1e-12);
            assert_eq!(sigmoid(kind, 0.0, v).unwrap(), 1.0);
        }
    }
}

#[test]
fn gaussian_at_twice_the_margin() {
    // exp(-(k d)^2) with exp(-k^2) = 0.1 gives 0.1^4 at d = 2
    let k = (-(0.1f64).ln()).sqrt();
    let oracle = (-(2.0 * k).powi(2)).exp();
    assert_abs_diff_eq!(oracle, 1e-4, epsilon = 1e-15);
    let y = Tolerance::new(0.0, 0.0).margin(1.0).eval(2.0).unwrap();
    assert_abs_diff_eq!(y, oracle, epsilon = 1e-15);
}

#[test]
fn linear_halfway_and_finite_support() {
    assert_abs_diff_eq!(sigmoid(Sigmoid::Linear, 0.5, 0.0).unwrap(), 0.5, epsilon = 1e-15);
    for kind in [Sigmoid::Cosine, Sigmoid::Linear, Sigmoid::Quadratic] {
        assert!(kind.finite_support());
        for x in [1.0, 1.5, 10.0] {
            assert_eq!(sigmoid(kind, x, 0.0).unwrap(), 0.0);
        }
    }
    assert!(sigmoid(Sigmoid::LongTail, 1e3, 0.1).unwrap() > 0.0);
}

#[test]
fn zero_margin_is_an_indicator() {
    let t = Tolerance::new(-1.0, 2.0);
    assert_eq!(t.eval_all(&[-1.5, -1.0, 0.0, 2.0, 2.0001]).unwrap(), vec![0.0, 1.0, 1.0, 1.0, 0.0]);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(
        Tolerance::new(1.0, 0.0).eval(0.5),
        Err(ToleranceError::Bounds { .. })
    ));
    assert!(matches!(
        Tolerance::new(0.0, 1.0).margin(-1.0).eval(0.5),
        Err(ToleranceError::Margin(_))
    ));
    for kind in [Sigmoid::Gaussian, Sigmoid::Hyperbolic, Sigmoid::LongTail, Sigmoid::TanhSquared] {
        let err = Tolerance::new(0.0, 1.0)
            .margin(1.0)
            .sigmoid(kind)
            .value_at_margin(0.0)
            .eval(2.0)
            .unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }
    assert!(Tolerance::new(0.0, 1.0).margin(1.0).value_at_margin(1.0).eval(2.0).is_err());
    assert!(sigmoid(Sigmoid::Linear, -0.1, 0.0).is_err());
    assert_eq!(Sigmoid::parse("long_tail"), Some(Sigmoid::LongTail));
    assert_eq!(Sigmoid::parse("sigmoid"), None);
    for kind in Sigmoid::ALL {
        assert_eq!(Sigmoid::parse(&kind.to_string()), Some(kind));
    }
}

fn random_tolerance(rng: &mut ChaCha8Rng) -> Tolerance {
    let kind = Sigmoid::ALL[rng.gen_range(0..7)];
    let a: f64 = rng.gen_range(-10.0..10.0);
    let b: f64 = rng.gen_range(-10.0..10.0);
    let v = if kind.finite_support() && rng.gen_bool(0.3) {
        0.0
    } else {
        rng.gen_range(1e-6..1.0 - 1e-6)
    };
    Tolerance::new(a.min(b), a.max(b))
        .margin(if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..5.0) })
        .sigmoid(kind)
        .value_at_margin(v)
}

#[test]
fn tolerance_stays_in_unit_interval_under_fuzzing() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1_000_000 {
        let t = random_tolerance(&mut rng);
        let x = rng.gen_range(-30.0..30.0);
        let y = t.eval(x).unwrap();
        assert!((0.0..=1.0).contains(&y), "{t:?} at {x} gave {y}");
        if t.lower <= x && x <= t.upper {
            assert_eq!(y, 1.0);
        }
    }
}

#[test]
fn tolerance_is_continuous_at_the_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let eps = 1e-9;
    for _ in 0..20_000 {
        let mut t = random_tolerance(&mut rng);
        t.margin = rng.gen_range(0.1..5.0);
        for (edge, dir) in [(t.upper, 1.0), (t.lower, -1.0)] {
            let outside: f64 = t.eval(edge + dir * eps).unwrap();
            // every kind has slope bounded by a few units per margin near the edge
            assert!((1.0 - outside).abs() <= 10.0 * eps / t.margin + 1e-12, "{t:?}");
        }
    }
    // gaussian limit
    let t = Tolerance::new(0.0, 1.0).margin(1.0);
    assert_abs_diff_eq!(t.eval(1.0 + 1e-12).unwrap(), 1.0, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn sigmoids_are_monotone(kind in 0usize..7, v in 0.01f64..0.99, x1 in 0.0f64..5.0, x2 in 0.0f64..5.0) {
        let kind = Sigmoid::ALL[kind];
        let (a, b) = (x1.min(x2), x1.max(x2));
        let fa = sigmoid(kind, a, v).unwrap();
        let fb = sigmoid(kind, b, v).unwrap();
        prop_assert!(fa >= fb, "{kind}: f({a}) = {fa} < f({b}) = {fb}");
    }

    #[test]
    fn tolerance_is_symmetric_about_the_interval(d in 0.0f64..10.0, margin in 0.1f64..3.0, kind in 0usize..7) {
        let t = Tolerance::new(-1.0, 1.0).margin(margin).sigmoid(Sigmoid::ALL[kind]).value_at_margin(0.2);
        prop_assert_eq!(t.eval(1.0 + d).unwrap(), t.eval(-1.0 - d).unwrap());
    }
}

#[test]
fn spec_validation_names_offending_indices() {
    let spec = ArraySpec::bounded("action", &[3], vec![-1.0], vec![1.0]).unwrap();
    spec.validate_flat(&[0.0, 1.0, -1.0]).unwrap();
    match spec.validate_flat(&[0.0, 1.5, 2.0]) {
        Err(SpecError::Bounds { indices, bound, .. }) => {
            assert_eq!(indices, vec![1, 2]);
            assert_eq!(bound, "maximum");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(spec.validate_flat(&[-2.0, 0.0, 0.0]), Err(SpecError::Bounds { bound, .. }) if bound == "minimum"));
    assert!(matches!(spec.validate_flat(&[0.0; 2]), Err(SpecError::Shape { .. })));
    assert!(spec.validate_flat(&[f64::NAN, 0.0, 0.0]).is_err());
    assert!(matches!(
        ArraySpec::bounded("a", &[3], vec![0.0, 0.0], vec![1.0]),
        Err(SpecError::Broadcast { .. })
    ));
    assert!(matches!(
        ArraySpec::bounded("a", &[2], vec![0.0, 2.0], vec![1.0]),
        Err(SpecError::Inverted { index: 1, .. })
    ));
    let bytes = ArraySpec::new("pixels", &[2, 2, 3]).with_dtype(DType::U8);
    let img = Array::U8(ndarray::ArrayD::zeros(ndarray::IxDyn(&[2, 2, 3])));
    bytes.validate(&img).unwrap();
    assert!(matches!(
        bytes.validate(&Array::vector(vec![0.0; 12])),
        Err(SpecError::DType { .. })
    ));
}

#[test]
fn first_step_has_no_reward_or_discount() {
    let first = TimeStep::first(IndexMap::new());
    assert_eq!(first.step_type, StepType::First);
    assert!(first.reward.is_none() && first.discount.is_none());
    assert!(first.is_first() && !first.is_last());
    let last = TimeStep::termination(0.0, 1.0, IndexMap::new());
    assert_eq!(last.reward, Some(0.0));
    assert!(last.is_last());
    let mid = TimeStep::transition(0.5, 0.9, IndexMap::new());
    assert_eq!(mid.step_type, StepType::Mid);
    assert_eq!(mid.discount, Some(0.9));
}
