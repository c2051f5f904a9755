use proptest::prelude::*;

use perron::kernel::{
    density_estimate, eval_kernel, kernel_sum, radial_kernel, sphere_sup, tangent_rescale,
    KernelSpec, Normalization, ScalarField,
};
use perron::symmat::riesz_hessian;
use perron::{SubequationKind, SubequationSpec};

fn finite_catalog() -> Vec<SubequationSpec> {
    use SubequationKind::*;
    let mut v = Vec::new();
    for n in 2..=5 {
        for k in [
            PartialSum { p: 1.0 },
            PartialSum { p: 2.0 },
            DeltaCone { delta: 1.0 },
            MinMax { p: 1.5 },
            MinMax { p: 4.0 },
            MinSecond { p: 2.5 },
            SigmaK { k: 1 },
            SigmaK { k: 2 },
            TracePower { q: 3 },
            Pucci { lambda: 1.0, cap_lambda: 2.0 },
            PucciMax { lambda: 1.0, cap_lambda: 2.0 },
        ] {
            v.push(SubequationSpec::new(k, n).unwrap());
        }
    }
    v
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n).prop_filter("away from the origin", |x| {
        x.iter().map(|c| c * c).sum::<f64>() > 1e-4
    })
}

fn case() -> impl Strategy<Value = (SubequationSpec, Vec<f64>)> {
    let all = finite_catalog();
    (0..all.len()).prop_flat_map(move |i| {
        let s = all[i];
        (Just(s), point(s.n))
    })
}

fn ring(rho: f64) -> Vec<[f64; 2]> {
    (0..32)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 32.0 + 0.1;
            [rho * a.cos(), rho * a.sin()]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn kernel_hessian_is_harmonic((s, x) in case()) {
        let p = s.riesz_characteristic();
        let hess = riesz_hessian(&x, p).unwrap();
        let g = s.gauge(&hess).unwrap();
        prop_assert!(g.abs() <= 1e-8 * hess.frobenius_norm().max(1.0), "{s} at {x:?}: {g:e}");
    }

    #[test]
    fn kernels_increase_radially(p in 1.0f64..5.0, r in 1e-3f64..10.0, dr in 1e-3f64..1.0) {
        for norm in [Normalization::Classic, Normalization::Plain] {
            prop_assert!(radial_kernel(p, norm, r + dr) >= radial_kernel(p, norm, r));
        }
    }

    #[test]
    fn density_scales_with_theta_and_ignores_constants(
        p in prop::sample::select(vec![1.5, 2.0, 3.0, 4.0]),
        theta in 0.1f64..5.0,
        c in -3.0f64..3.0,
    ) {
        let reference = KernelSpec::new(p, Normalization::Classic, &[0.2, -0.1]).unwrap();
        let radii: Vec<f64> = (0..8).map(|i| 0.25 * 0.5f64.powi(i)).collect();
        let u = reference.clone().with_theta(theta);
        let d = density_estimate(&u, &reference, &radii).unwrap();
        prop_assert!((d.theta_hat - theta).abs() <= 1e-9 * theta);
        let shifted = u.clone().with_offset(c);
        let ds = density_estimate(&shifted, &reference, &radii).unwrap();
        prop_assert!((ds.theta_hat - d.theta_hat).abs() <= 1e-3, "{} vs {}", ds.theta_hat, d.theta_hat);
        let doubled = reference.clone().with_theta(2.0 * theta);
        let dd = density_estimate(&doubled, &reference, &radii).unwrap();
        prop_assert!((dd.theta_hat - 2.0 * d.theta_hat).abs() <= 1e-9 * theta);
    }

    #[test]
    fn flow_transfers_the_bound_inward(
        p in prop::sample::select(vec![2.5, 3.0, 4.0]),
        theta in 0.5f64..3.0,
        r in 0.01f64..0.5,
    ) {
        let k = KernelSpec::new(p, Normalization::Plain, &[0.0, 0.0]).unwrap();
        let u = move |x: &[f64]| theta * eval_kernel(&k, x) + (3.0 * x[0]).sin() + x[1] * x[1];
        let theta_k = KernelSpec::new(p, Normalization::Plain, &[0.0, 0.0]).unwrap().with_theta(theta);
        let ur = tangent_rescale(&u, &[0.0, 0.0], 1.0, r, p, 1.0).unwrap();
        let (mut c, mut inner) = (0.0_f64, 0.0_f64);
        for rho in [0.2, 0.5, 0.8, 1.0] {
            for x in ring(rho) {
                c = c.max((ur.eval(&x) - theta_k.eval(&x)).abs());
                let y = [r * x[0], r * x[1]];
                inner = inner.max((u(&y) - theta_k.eval(&y)).abs());
            }
        }
        prop_assert!(inner <= c * r.powf(2.0 - p) * (1.0 + 1e-9));
    }
}

#[test]
fn flow_fixes_plain_kernels() {
    for p in [1.0, 1.3, 1.5, 2.5, 3.0, 4.0, 6.0] {
        let k = KernelSpec::new(p, Normalization::Plain, &[0.0, 0.0]).unwrap();
        for r in [2.0, 0.5, 0.01] {
            let kr = tangent_rescale(&k, &[0.0, 0.0], 10.0, r, p, 1.0).unwrap();
            for rho in [0.1, 0.5, 1.0] {
                for x in ring(rho) {
                    let (a, b) = (kr.eval(&x), k.eval(&x));
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "p={p} r={r}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn two_power_example_rescales_in_closed_form() {
    let (n, pp, theta, r) = (4.0_f64, 3.0_f64, 1.7_f64, 0.1_f64);
    let u = move |x: &[f64]| {
        let d = x[0].hypot(x[1]);
        -theta * d.powf(2.0 - n) - d.powf(2.0 - pp)
    };
    let ur = tangent_rescale(&u, &[0.0, 0.0], 1.0, r, n, 1.0).unwrap();
    for x in ring(1.0) {
        let closed = -theta - r.powf(n - pp);
        assert!((ur.eval(&x) - closed).abs() <= 1e-12);
    }
}

#[test]
fn kernel_sum_is_even_for_mirrored_terms() {
    for p in [1.5, 2.0, 3.0] {
        let s = kernel_sum(&[(1.0, vec![0.4, 0.0]), (1.0, vec![-0.4, 0.0])], p, Normalization::Classic, 0.3)
            .unwrap();
        for x in ring(0.7) {
            assert!((s.eval(&x) - s.eval(&[-x[0], -x[1]])).abs() <= 1e-12);
            assert!((s.eval(&x) - s.eval(&[-x[0], x[1]])).abs() <= 1e-12);
        }
    }
    assert!(kernel_sum(&[(1.0, vec![0.0, 0.0]), (2.0, vec![0.0, 0.0])], 3.0, Normalization::Classic, 0.0).is_err());
}

#[test]
fn sphere_sup_of_radial_function_is_its_value() {
    let k = KernelSpec::new(3.0, Normalization::Classic, &[0.3, 0.3]).unwrap();
    for rho in [0.5, 0.05] {
        assert!((sphere_sup(&k, &[0.3, 0.3], rho, 64) - k.at_radius(rho)).abs() <= 1e-12 / rho);
    }
}
