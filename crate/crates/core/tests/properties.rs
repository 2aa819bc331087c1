use proptest::prelude::*;
use saddle_core::factor::{linear_power_factor, segment_factorization};
use saddle_core::field::{CrossField, LineSource};
use saddle_core::index::HalfInt;
use saddle_core::jet::DiffPoly;
use saddle_core::poly::PolyLiteral;
use saddle_core::scenario::grid_csv;
use saddle_core::spaceform::{
    extrinsic_curvature_sign, fundamental_forms, gnomonic, gnomonic_inverse, graph_immersion, Point4,
};
use saddle_core::{Ambient, Poly2};

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

/// Polynomials of degree 2..=4 with random coefficients.
fn poly_strategy() -> impl Strategy<Value = Poly2> {
    coeffs(12).prop_map(|c| {
        let mut terms = Vec::new();
        let mut k = 0;
        for deg in 2..=4u32 {
            for i in 0..=deg {
                terms.push((i, deg - i, c[k]));
                k += 1;
            }
        }
        Poly2::from_terms(terms)
    })
}

fn unit4() -> impl Strategy<Value = Point4> {
    (0.05..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(_, a, b, c)| a * a + b * b + c * c > 1e-6)
        .prop_map(|(x0, a, b, c)| {
            let r = (a * a + b * b + c * c).sqrt();
            let s = (1.0 - x0 * x0).sqrt() / r;
            Point4([x0, a * s, b * s, c * s])
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gnomonic_round_trip(p in unit4()) {
        let back = gnomonic_inverse(gnomonic(&p).unwrap());
        for i in 0..4 {
            prop_assert!((back.0[i] - p.0[i]).abs() < 1e-13);
        }
    }

    /// Great-circle arcs in the upper hemisphere map to straight segments.
    #[test]
    fn great_circles_map_to_lines(p in unit4(), q in unit4(), s in 0.05..0.95f64) {
        let d = p.dot(&q);
        prop_assume!(d < 0.999 && d > -0.5);
        // A point of the arc from p to q.
        let w = Point4(std::array::from_fn(|i| (1.0 - s) * p.0[i] + s * q.0[i])).normalized();
        prop_assume!(w.0[0] > 0.05);
        let (a, b, m) = (gnomonic(&p).unwrap(), gnomonic(&q).unwrap(), gnomonic(&w).unwrap());
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let am = [m[0] - a[0], m[1] - a[1], m[2] - a[2]];
        let cross = [
            ab[1] * am[2] - ab[2] * am[1],
            ab[2] * am[0] - ab[0] * am[2],
            ab[0] * am[1] - ab[1] * am[0],
        ];
        let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let scale = norm(ab) * norm(am).max(1.0) + 1.0;
        prop_assert!(norm(cross) <= 1e-10 * scale);
    }

    #[test]
    fn immersion_lies_on_the_sphere(h in poly_strategy(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        prop_assert!((graph_immersion(&h, [x, y]).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jet_matches_finite_differences(h in poly_strategy(), x in -0.8..0.8f64, y in -0.8..0.8f64) {
        let j = DiffPoly::new(&h).jet([x, y]);
        let e = 1e-5;
        let f = |dx: f64, dy: f64| h.eval(x + dx, y + dy);
        let fx = (f(e, 0.0) - f(-e, 0.0)) / (2.0 * e);
        let fy = (f(0.0, e) - f(0.0, -e)) / (2.0 * e);
        let fxx = (f(e, 0.0) - 2.0 * j.f + f(-e, 0.0)) / (e * e);
        let fxy = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e);
        prop_assert!((j.f - h.eval(x, y)).abs() < 1e-14);
        prop_assert!((fx - j.fx).abs() < 1e-7 && (fy - j.fy).abs() < 1e-7);
        prop_assert!((fxx - j.fxx).abs() < 1e-3 && (fxy - j.fxy).abs() < 1e-3);
    }

    /// `x_theta^n * eta` splits back into the same order and cofactor.
    #[test]
    fn segment_factorization_reconstructs(
        theta in -1.5..1.5f64,
        n in 3u32..7,
        c0 in 0.3..2.0f64,
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let eta = Poly2::from_terms([(0, 0, c0), (0, 1, a), (2, 0, b)]);
        // Back to (x, y): rotated(c, -s) undoes the rotation by theta.
        let h = (&Poly2::monomial(n, 0, 1.0) * &eta).rotated(&theta.cos(), &-theta.sin());
        let seg = segment_factorization(&h, theta).unwrap();
        prop_assert_eq!(seg.n, n);
        prop_assert!(seg.reconstruction_error(&h) < 1e-10);
        prop_assert!((seg.eta.coeff(0, 0) - c0).abs() < 1e-9);
    }

    #[test]
    fn linear_power_reconstructs(a in 0.2..3.0f64, t in 0.0..3.1f64, n in 2u32..7) {
        let l = Poly2::from_terms([(1, 0, t.cos()), (0, 1, t.sin())]);
        let omega = l.pow(n).scale(&a);
        let lp = linear_power_factor(&omega).unwrap();
        prop_assert_eq!(lp.n, n);
        prop_assert!((&lp.to_poly() - &omega).max_abs_coeff() < 1e-9 * omega.max_abs_coeff());
    }

    /// `sign(eg - f^2) = sign(rt - s^2)` in both ambient spaces.
    #[test]
    fn curvature_sign_matches_hessian(h in poly_strategy(), x in -0.7..0.7f64, y in -0.7..0.7f64) {
        let det = DiffPoly::new(&h).jet([x, y]).hessian_det();
        let scale = DiffPoly::new(&h).jet([x, y]).hessian_max_abs().powi(2);
        prop_assume!(det.abs() > 1e-9 * scale);
        for ambient in [Ambient::Euclidean, Ambient::Spherical] {
            prop_assert_eq!(extrinsic_curvature_sign(&fundamental_forms(&h, [x, y], ambient)) as f64, det.signum());
        }
    }

    /// Principal directions are orthogonal for the first fundamental form,
    /// and `theta1` carries the larger normal curvature.
    #[test]
    fn principal_cross_is_first_form_orthogonal(h in poly_strategy(), x in -0.5..0.5f64, y in -0.5..0.5f64) {
        prop_assume!(x != 0.0 || y != 0.0);
        for ambient in [Ambient::Euclidean, Ambient::Spherical] {
            let f = CrossField::principal(&h, ambient, &[], 0.0).unwrap();
            let Ok(c) = LineSource::sample(&f, [x, y]) else { continue };
            let ff = fundamental_forms(&h, [x, y], ambient);
            let form = |m: [[f64; 2]; 2], u: [f64; 2], v: [f64; 2]| {
                m[0][0] * u[0] * v[0] + m[0][1] * (u[0] * v[1] + u[1] * v[0]) + m[1][1] * u[1] * v[1]
            };
            let (u, v) = ([c.theta1.cos(), c.theta1.sin()], [c.theta2.cos(), c.theta2.sin()]);
            let one = ff.first();
            prop_assert!(form(one, u, v).abs() < 1e-10 * (form(one, u, u) * form(one, v, v)).sqrt());
            let k = |w: [f64; 2]| form(ff.second(), w, w) / form(one, w, w);
            prop_assert!(k(u) >= k(v) - 1e-12 * (k(u).abs() + k(v).abs()));
        }
    }

    #[test]
    fn half_int_round_trips(k in -1000i64..1000) {
        let h = HalfInt(k);
        prop_assert_eq!(h.to_string().parse::<HalfInt>().unwrap(), h);
        let json = serde_json::to_string(&h).unwrap();
        prop_assert_eq!(serde_json::from_str::<HalfInt>(&json).unwrap(), h);
    }

    #[test]
    fn poly_literals_round_trip(h in poly_strategy()) {
        let json = serde_json::to_string(&PolyLiteral::from_poly(&h)).unwrap();
        let back: PolyLiteral = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.to_f64().unwrap(), h);
    }

    /// Grids have exactly `n^2` rows of five fields, whatever the field.
    #[test]
    fn grid_shape(h in poly_strategy(), n in 2usize..8) {
        let f = CrossField::new(&h, Ambient::Spherical, &[], 0.0, 0.5).unwrap();
        let csv = grid_csv(&f, [0.0, 0.0], 0.5, n);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        prop_assert_eq!(rows.len(), n * n);
        prop_assert!(rows.iter().all(|r| r.split(',').count() == 5));
    }
}
