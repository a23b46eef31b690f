use proptest::prelude::*;
use warpcheck::expr::{Constants, Expression};
use warpcheck::geometry::{
    field_derivatives, gauss_curvature, gauss_curvature_with, ricci, BlockMetricND,
    ConnectionDerivative, Domain, Metric2D, Sign,
};

/// Positive metric components on x, y in [0.5, 1.5]; `X`/`Y` are placeholders
/// so the same template can be written in rescaled coordinates.
#[derive(Debug, Clone)]
struct Template {
    e: String,
    g: String,
    f: String,
}

fn arb_template() -> impl Strategy<Value = Template> {
    (
        0.2f64..2.0,
        -0.5f64..0.5,
        0.2f64..2.0,
        -0.5f64..0.5,
        -1.0f64..1.0,
        -1.0f64..1.0,
        0usize..3,
    )
        .prop_map(|(a, b, c, d, p, q, kind)| {
            let e = format!("{a} + X^2*exp({b}*Y)");
            let g = match kind {
                0 => format!("{c} + (X*Y)^2 + {d}*sin(X)"),
                1 => format!("X^4*exp({d}*X*Y) + {c}"),
                _ => format!("({c} + X^2 + Y^2)^(3/2)"),
            };
            let f = format!("{p}*X^3*Y + exp({q}*X) - Y^2");
            Template { e, g, f }
        })
}

fn fill(t: &str, x: &str, y: &str) -> String {
    t.replace('X', x).replace('Y', y)
}

fn domain() -> Domain {
    Domain::new([0.01, 0.01], [10.0, 10.0], false)
}

fn metric_from(t: &Template, x: &str, y: &str, signs: [Sign; 2]) -> Metric2D {
    Metric2D::new(
        ["x", "y"],
        &fill(&t.e, x, y),
        &fill(&t.g, x, y),
        &Constants::new(),
        signs,
        domain(),
    )
    .unwrap()
}

fn plain(t: &Template) -> Metric2D {
    metric_from(t, "x", "y", [Sign::Plus, Sign::Plus])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessian_trace_equals_laplacian(t in arb_template(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let g = plain(&t);
        let f = Expression::parse_vars(&fill(&t.f, "x", "y"), &["x", "y"]).unwrap();
        let d = field_derivatives(&g, &f, &[x, y]).unwrap();
        let comps = g.components(&[x, y]).unwrap();
        let trace = d.hessian[0][0] / comps[0] + d.hessian[1][1] / comps[1];
        prop_assert!((trace - d.laplacian).abs() <= 1e-12 * (1.0 + d.laplacian.abs()));
    }

    #[test]
    fn ricci_of_single_block_is_k_times_g(t in arb_template(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let g = plain(&t);
        let k = gauss_curvature(&g, &[x, y]).unwrap();
        let ric = ricci(&BlockMetricND::from_metric2d(&g), &[x, y]).unwrap();
        let comps = g.components(&[x, y]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { k * comps[i] } else { 0.0 };
                prop_assert!((ric[i][j] - expect).abs() <= 1e-7, "{} vs {}", ric[i][j], expect);
            }
        }
    }

    #[test]
    fn flipping_both_signs_negates_curvature(t in arb_template(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let g = plain(&t);
        let k = gauss_curvature(&g, &[x, y]).unwrap();
        let kn = gauss_curvature(&g.negated(), &[x, y]).unwrap();
        prop_assert!((kn + k).abs() <= 1e-9);
        // Δ_{-g} f = -Δ_g f
        let f = Expression::parse_vars(&fill(&t.f, "x", "y"), &["x", "y"]).unwrap();
        let l = field_derivatives(&g, &f, &[x, y]).unwrap().laplacian;
        let ln = field_derivatives(&g.negated(), &f, &[x, y]).unwrap().laplacian;
        prop_assert!((ln + l).abs() <= 1e-9 * (1.0 + l.abs()));
    }

    #[test]
    fn coordinate_rescaling_is_invariant(t in arb_template(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        // x = 2 x': E dx^2 = 4 E(2x') dx'^2
        let g = plain(&t);
        let scaled = Metric2D::new(
            ["x", "y"],
            &format!("4*({})", fill(&t.e, "(2*x)", "y")),
            &fill(&t.g, "(2*x)", "y"),
            &Constants::new(),
            [Sign::Plus, Sign::Plus],
            domain(),
        ).unwrap();
        let p = [x, y];
        let q = [x / 2.0, y];
        let k = gauss_curvature(&g, &p).unwrap();
        let k2 = gauss_curvature(&scaled, &q).unwrap();
        prop_assert!((k - k2).abs() <= 1e-9 * (1.0 + k.abs()));
        let f = Expression::parse_vars(&fill(&t.f, "x", "y"), &["x", "y"]).unwrap();
        let f2 = Expression::parse_vars(&fill(&t.f, "(2*x)", "y"), &["x", "y"]).unwrap();
        let l = field_derivatives(&g, &f, &p).unwrap().laplacian;
        let l2 = field_derivatives(&scaled, &f2, &q).unwrap().laplacian;
        prop_assert!((l - l2).abs() <= 1e-9 * (1.0 + l.abs()));
    }
}

#[test]
fn richardson_route_is_at_least_second_order() {
    let g = Metric2D::new(
        ["x", "y"],
        "1 + x^2*exp(0.3*y)",
        "(1 + x^2 + y^2)^(3/2)",
        &Constants::new(),
        [Sign::Plus, Sign::Plus],
        domain(),
    )
    .unwrap();
    let p = [0.8, 1.1];
    let exact = gauss_curvature(&g, &p).unwrap();
    let err = |h: f64| {
        (gauss_curvature_with(&g, &p, ConnectionDerivative::Richardson { step: Some(h) }).unwrap()
            - exact)
            .abs()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    assert!(e1 / e2 >= 3.5, "ratio {} ({e1:e} -> {e2:e})", e1 / e2);
}
