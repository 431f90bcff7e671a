use bgc_core::psi::{
    classify_convexity, eval_psi, export_vector_field, linspace, sample_surface, PsiSpec, DEFAULT_CONVEXITY_TOLERANCE,
};
use bgc_core::Error;
use proptest::prelude::*;

/// Exact `|x|^n / ω₁ + ω₂` for integer inputs as a reduced fraction.
fn spliced_exact(x: i64, n: u32, omega1: i64, omega2: i64) -> (i128, i128) {
    let num = (x.unsigned_abs() as i128).pow(n) + omega2 as i128 * omega1 as i128;
    let den = omega1 as i128;
    let g = gcd(num.abs(), den);
    (num / g, den / g)
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn spliced_value_against_exact_arithmetic() {
    let spec = PsiSpec::spliced(200.0, 5.0);
    assert_eq!(spliced_exact(-10, 3, 200, 5), (10, 1));
    assert_eq!(eval_psi(&spec, -10.0, 0.0).unwrap(), 10.0);
    for x in -40i64..=40 {
        let (num, den) = spliced_exact(x, 3, 200, 5);
        let exact = num as f64 / den as f64;
        let got = eval_psi(&spec, x as f64, 0.0).unwrap();
        assert!(
            (got - exact).abs() <= 2.0 * f64::EPSILON * exact.abs(),
            "x = {x}: {got} vs {num}/{den}"
        );
    }
}

#[test]
fn reference_values() {
    assert_eq!(eval_psi(&PsiSpec::parabolic(100.0), 10.0, 0.0).unwrap(), 1.0);
    assert_eq!(eval_psi(&PsiSpec::Wedge, -3.5, 0.0).unwrap(), 3.5);
    assert_eq!(eval_psi(&PsiSpec::ramped(200.0), 10.0, 0.0).unwrap(), 0.0);
    assert_eq!(eval_psi(&PsiSpec::ramped(200.0), 10.0, 2.0).unwrap(), 1.0);
    let d = eval_psi(&PsiSpec::double_exp(2000.0), 0.0, 0.0).unwrap();
    assert_eq!(d, 1e-3);
    assert!(matches!(
        eval_psi(&PsiSpec::Wedge, f64::NAN, 0.0),
        Err(Error::Domain(_))
    ));
}

#[test]
fn spliced_surface_minimum_sits_at_origin() {
    let grid = sample_surface(&PsiSpec::spliced(200.0, 5.0), (-50.0, 50.0), (0.0, 1.0), 101, 2).unwrap();
    for row in &grid.values {
        let (i, &min) = row.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(grid.x_values[i], 0.0);
        assert_eq!(min, 5.0);
    }
}

#[test]
fn vector_field_points_toward_origin() {
    let grid = sample_surface(&PsiSpec::parabolic(100.0), (-50.0, 50.0), (0.0, 1.0), 11, 3).unwrap();
    let field = export_vector_field(&grid).unwrap();
    let g = field.gradient.as_ref().unwrap();
    for (j, row) in g.iter().enumerate() {
        for (i, &f) in row.iter().enumerate() {
            let x = field.x_values[i];
            assert_eq!(f, -x.signum() * grid.values[j][i] * if x == 0.0 { 0.0 } else { 1.0 });
        }
    }
    let mut out = Vec::new();
    field.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,psi,force");
    assert_eq!(text.lines().count(), 1 + 11 * 3);
    assert_eq!(field.sidecar()["has_force"], true);
}

#[test]
fn grammar_round_trip() {
    for spec in [
        PsiSpec::Wedge,
        PsiSpec::Zero,
        PsiSpec::parabolic(80.0),
        PsiSpec::double_exp(2000.0),
        PsiSpec::ramped(200.0),
        PsiSpec::spliced(200.0, 5.0),
        PsiSpec::unspliced_cubic(150.0, -2.5),
        PsiSpec::Tabulated {
            xs: vec![-1.0, 0.0, 2.0],
            ys: vec![1.0, 0.0, 4.0],
        },
    ] {
        let parsed: PsiSpec = spec.to_string().parse().unwrap();
        assert_eq!(parsed, spec);
    }
    assert!("parabolic:omega=-1".parse::<PsiSpec>().is_err());
    assert!("cone".parse::<PsiSpec>().is_err());
    assert!("parabolic:width=3".parse::<PsiSpec>().is_err());
}

#[test]
fn convexity_rejects_bad_grids() {
    let spec = PsiSpec::parabolic(10.0);
    let tol = DEFAULT_CONVEXITY_TOLERANCE;
    assert!(matches!(
        classify_convexity(&spec, &linspace(-1.0, 1.0, 4), tol),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        classify_convexity(&spec, &linspace(-1.0, 2.0, 9), tol),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        classify_convexity(&spec, &[-2.0, -1.0, 0.0, 0.0, 1.0, 2.0], tol),
        Err(Error::Precondition(_))
    ));
}

fn any_symmetric_spec() -> impl Strategy<Value = PsiSpec> {
    prop_oneof![
        Just(PsiSpec::Wedge),
        (1.0f64..1e4).prop_map(PsiSpec::parabolic),
        (1.0f64..1e4).prop_map(PsiSpec::double_exp),
        (1.0f64..1e4).prop_map(PsiSpec::ramped),
        (1.0f64..1e4, -10.0f64..10.0, 1u32..6).prop_map(|(w1, w2, n)| PsiSpec::SplicedPolynomial {
            omega1: w1,
            omega2: w2,
            exponent: n,
            splice: true,
        }),
    ]
}

proptest! {
    #[test]
    fn symmetric_families_are_even(spec in any_symmetric_spec(), x in -60.0f64..60.0, t in 0.0f64..10.0) {
        prop_assert_eq!(eval_psi(&spec, x, t).unwrap(), eval_psi(&spec, -x, t).unwrap());
    }

    #[test]
    fn nonnegative_families_stay_nonnegative(spec in any_symmetric_spec(), x in -60.0f64..60.0, t in 0.0f64..10.0) {
        if !matches!(spec, PsiSpec::SplicedPolynomial { .. }) {
            prop_assert!(eval_psi(&spec, x, t).unwrap() >= 0.0);
        }
    }

    #[test]
    fn vector_field_is_odd(spec in any_symmetric_spec(), half in 1.0f64..50.0, nx in 2usize..40) {
        let grid = sample_surface(&spec, (-half, half), (0.0, 2.0), 2 * nx + 1, 3).unwrap();
        let field = export_vector_field(&grid).unwrap();
        let n = field.x_values.len();
        for row in field.gradient.as_ref().unwrap() {
            for i in 0..n {
                prop_assert_eq!(row[i], -row[n - 1 - i], "x {} vs {}", field.x_values[i], field.x_values[n - 1 - i]);
            }
        }
    }

    #[test]
    fn parabolic_is_always_bidirectionally_convex(omega in 0.5f64..1e3, half in 1.0f64..50.0, n in 5usize..200) {
        let r = classify_convexity(&PsiSpec::parabolic(omega), &linspace(-half, half, n), DEFAULT_CONVEXITY_TOLERANCE).unwrap();
        prop_assert!(r.is_bidirectionally_convex, "{r:?}");
    }
}
