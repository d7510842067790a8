use proptest::prelude::*;

use rm_plate::eigen::{solve_gep_smallest, EigOptions};
use rm_plate::experiments::fit_rate;
use rm_plate::fem::SparseSymMatrix;
use rm_plate::geometry::{build_thin_mesh, rescale_to_reference, Profile, ThinDomainSpec};
use rm_plate::thin::{ConnectingSystem, LimitData};

fn trapezoid(l: f64, r: f64, lo: f64, delta: f64) -> ThinDomainSpec {
    ThinDomainSpec::new((0.0, 1.0), Profile::constant(0.0, 1.0, lo), Profile::linear(0.0, 1.0, l, r), delta, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn thin_mesh_area_is_delta_times_section_integral(
        l in 0.1f64..2.0, r in 0.1f64..2.0, lo in 0.1f64..2.0, delta in 0.01f64..1.0, nx in 1usize..12, ny in 1usize..6,
    ) {
        let spec = trapezoid(l, r, lo, delta);
        let mesh = build_thin_mesh(&spec, nx, ny).unwrap();
        let exact = delta * (lo + 0.5 * (l + r));
        prop_assert!((mesh.total_measure() - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn rescaled_thin_mesh_is_reference_mesh(
        l in 0.1f64..2.0, r in 0.1f64..2.0, lo in 0.1f64..2.0, delta in 0.01f64..1.0, nx in 1usize..10, ny in 1usize..5,
    ) {
        let spec = trapezoid(l, r, lo, delta);
        let scaled = rescale_to_reference(&build_thin_mesh(&spec, nx, ny).unwrap(), &spec).unwrap();
        let reference = build_thin_mesh(&spec.with_delta(1.0).unwrap(), nx, ny).unwrap();
        for (p, q) in scaled.nodes.iter().zip(&reference.nodes) {
            prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
        prop_assert_eq!(&scaled.elements, &reference.elements);
    }

    #[test]
    fn fit_rate_slope_ignores_parameter_scale(
        errs in prop::collection::vec(1e-6f64..10.0, 3..7), scale in 1e-3f64..1e3,
    ) {
        let pts: Vec<(f64, f64)> = errs.iter().enumerate().map(|(i, &e)| (0.5f64.powi(i as i32), e)).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(p, e)| (scale * p, e)).collect();
        let (a, b) = (fit_rate(&pts).unwrap(), fit_rate(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-12 * a.slope.abs().max(1.0));
        prop_assert!((0.0..=1.0).contains(&a.r2));
    }

    #[test]
    fn averaging_is_adjoint_to_extension(
        seed in prop::collection::vec(-1.0f64..1.0, 200), delta in 0.02f64..0.8, l in 0.2f64..1.5,
    ) {
        let spec = trapezoid(l, 1.0, 0.5, delta);
        let conn = ConnectingSystem::new(&spec, 4, 3).unwrap();
        let nc = conn.n_columns();
        let nn = conn.thin.n_nodes();
        let pick = |i: usize| seed[i % seed.len()];
        let u: Vec<f64> = (0..3 * nn).map(|i| pick(7 * i + 1)).collect();
        let v0 = LimitData { phi: (0..nc).map(|i| pick(3 * i)).collect(), w: (0..nc).map(|i| pick(5 * i + 2)).collect() };
        let m = conn.average_pair(&u[..2 * nn], &u[2 * nn..]).unwrap();
        let lhs = conn.h0_inner(&m.phi, &v0.phi) + conn.h0_inner(&m.w, &v0.w);
        let (eb, ew) = conn.extend_pair(&v0).unwrap();
        let ev: Vec<f64> = eb.into_iter().chain(ew).collect();
        let rhs = conn.h_delta_inner(&u, &ev, 3);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        let back = conn.average(&conn.extend(&v0.w).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&v0.w) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shifting_the_pencil_shifts_eigenvalues(
        entries in prop::collection::vec(-1.0f64..1.0, 144), c in -0.5f64..20.0,
    ) {
        let n = 12;
        let a = nalgebra::DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
        let a = a.transpose() * &a + nalgebra::DMatrix::identity(n, n);
        let b = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 + entries[i] } else if i.abs_diff(j) == 1 { 0.3 } else { 0.0 });
        let (sa, sb) = (SparseSymMatrix::from_dense(&a).unwrap(), SparseSymMatrix::from_dense(&b).unwrap());
        let shifted = sa.add_scaled(1.0, &sb, c).unwrap();
        let opts = EigOptions::smallest(4);
        let base = solve_gep_smallest(&sa, &sb, &opts).unwrap();
        let moved = solve_gep_smallest(&shifted, &sb, &opts).unwrap();
        for (x, y) in base.eigenvalues.iter().zip(&moved.eigenvalues) {
            prop_assert!((y - x - c).abs() <= 1e-10 * y.abs().max(1.0));
        }
        for i in 0..4 {
            for j in 0..4 {
                let g = sb.bilinear(&base.eigenvectors[i], &base.eigenvectors[j]);
                let delta_ij = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g - delta_ij).abs() < 1e-8);
            }
        }
    }
}
