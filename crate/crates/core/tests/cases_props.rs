use proptest::prelude::*;
use warpcheck::cases::{
    case_residuals, curvature_gap, f_equation_residuals, recover_f, substitute_u,
    substitution_factors, CaseParams, CaseTag,
};
use warpcheck::expr::{Constants, Expression};
use warpcheck::geometry::{Domain, Metric2D, Sign};

#[derive(Debug, Clone)]
struct Input {
    e: String,
    g: String,
    f: String,
}

fn arb_input() -> impl Strategy<Value = Input> {
    (
        0.2f64..2.0,
        -0.5f64..0.5,
        0.2f64..2.0,
        -0.5f64..0.5,
        -1.0f64..1.0,
        -1.0f64..1.0,
        0usize..3,
    )
        .prop_map(|(a, b, c, d, p, q, kind)| Input {
            e: format!("{a} + x^2*exp({b}*y)"),
            g: match kind {
                0 => format!("{c} + (x*y)^2 + {d}*sin(x)"),
                1 => format!("x^4*exp({d}*x*y) + {c}"),
                _ => format!("({c} + x^2 + y^2)^(3/2)"),
            },
            f: format!("1 + {p}*x^3*y + exp({q}*x) - 0.2*y^2"),
        })
}

fn arb_c() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0f64..-0.5, 0.5f64..3.0]
}

fn metric(t: &Input, scale: f64) -> Metric2D {
    Metric2D::new(
        ["x", "y"],
        &format!("{scale}*({})", t.e),
        &format!("{scale}*({})", t.g),
        &Constants::new(),
        [Sign::Plus, Sign::Plus],
        Domain::new([0.5, 0.5], [1.5, 1.5], false),
    )
    .unwrap()
}

fn field(t: &Input) -> Expression {
    Expression::parse_vars(&t.f, &["x", "y"]).unwrap()
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn substitution_scales_each_equation(
        t in arb_input(),
        c in arb_c(),
        lambda in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        mu in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        kind in 0usize..3,
        x in 0.5f64..1.5,
        y in 0.5f64..1.5,
    ) {
        let params = match kind {
            0 => CaseParams::new(CaseTag::OneA, 0.0, 0.0, c),
            1 => CaseParams::new(CaseTag::OneB, 0.0, mu, c),
            _ => CaseParams::new(CaseTag::TwoB, lambda, 0.0, c),
        }
        .unwrap();
        let g = metric(&t, 1.0);
        let f = field(&t);
        let u = substitute_u(&f, params.h).unwrap();
        let k = substitution_factors(&params);
        let ur = case_residuals(&g, &u, &params, &[x, y]).unwrap().as_array();
        let fr = f_equation_residuals(&g, &f, &params, &[x, y]).unwrap();
        for i in 0..3 {
            prop_assert!(close(ur[i], k[i] * fr[i], ur[i].abs() + (k[i] * fr[i]).abs()), "{i}: {} vs {}", ur[i], k[i] * fr[i]);
        }
    }

    #[test]
    fn recover_inverts_substitute(t in arb_input(), c in arb_c(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let f = field(&t);
        let h = c / 2.0;
        let back = recover_f(&substitute_u(&f, h).unwrap(), h).unwrap();
        let (a, b) = (f.eval(&[x, y]).unwrap(), back.eval(&[x, y]).unwrap());
        prop_assert!(close(a, b, a));
    }

    #[test]
    fn recombination_identities(
        t in arb_input(),
        lambda in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        x in 0.5f64..1.5,
        y in 0.5f64..1.5,
    ) {
        let g = metric(&t, 1.0);
        let u = field(&t);
        let uv = u.eval(&[x, y]).unwrap();
        for params in [
            CaseParams::new(CaseTag::OneA, 0.0, 0.0, -2.0).unwrap(),
            CaseParams::new(CaseTag::TwoB, lambda, 0.0, -2.0).unwrap(),
        ] {
            let r = case_residuals(&g, &u, &params, &[x, y]).unwrap();
            let scale = r.second.abs() + (uv * r.first).abs() + r.third.abs();
            prop_assert!(close(r.second, uv * r.first + r.third, scale), "{:?}: {r:?}", params.tag);
        }
    }

    #[test]
    fn gap_scales_under_homothety(t in arb_input(), s in 0.25f64..4.0, x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let u = field(&t);
        let u_scaled = u.scaled(1.0 / s);
        let a = curvature_gap(&metric(&t, 1.0), &u, &[x, y]).unwrap();
        let b = curvature_gap(&metric(&t, s), &u_scaled, &[x, y]).unwrap();
        prop_assert!(close(b.k * s, a.k, a.k));
        prop_assert!(close(b.k_plus_u * s, a.k_plus_u, a.k.abs() + a.u.abs()));
    }
}
