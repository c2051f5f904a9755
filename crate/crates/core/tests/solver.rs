use std::sync::Arc;

use proptest::prelude::*;

use perron::grid::{build_domain, GridDomain, NodeClass, Shape, SolutionField, Stencil};
use perron::kernel::{KernelSpec, Normalization, ScalarField};
use perron::solver::{
    default_r_schedule, finite_family, green_function, perron_limit, solve_dirichlet, Singularity,
    SolveConfig,
};
use perron::{SubequationKind, SubequationSpec};

fn spec(kind: SubequationKind) -> SubequationSpec {
    SubequationSpec::new(kind, 2).unwrap()
}

fn steppable() -> impl Strategy<Value = SubequationSpec> {
    prop_oneof![
        Just(spec(SubequationKind::SigmaK { k: 1 })),
        (1.0f64..4.0).prop_map(|p| spec(SubequationKind::MinMax { p })),
        (1.0f64..2.0).prop_map(|p| spec(SubequationKind::PartialSum { p })),
        (0.0f64..3.0).prop_map(|delta| spec(SubequationKind::DeltaCone { delta })),
        (0.5f64..1.0).prop_map(|l| spec(SubequationKind::Pucci { lambda: l, cap_lambda: 1.0 })),
    ]
}

fn disk<F: ScalarField + ?Sized>(h: f64, phi: &F) -> Arc<GridDomain> {
    Arc::new(build_domain(Shape::disk(1.0), h, phi, Stencil::default()).unwrap())
}

fn active_values(f: &SolutionField) -> impl Iterator<Item = (usize, f64)> + '_ {
    f.domain
        .interior_nodes()
        .iter()
        .map(|&n| n as usize)
        .filter(|&n| f.domain.class(n) == NodeClass::Interior)
        .map(|n| (n, f.values[n]))
}

fn data(c: [f64; 4]) -> impl Fn(&[f64]) -> f64 + Sync + Copy {
    move |x: &[f64]| c[0] * (2.0 * x[0]).sin() + c[1] * x[1] * x[1] + c[2] * x[0] * x[1] + c[3]
}

/// Exact Green's function of the Laplacian on the unit disk.
fn disk_green(x: [f64; 2], y: [f64; 2]) -> f64 {
    let d = (x[0] - y[0]).hypot(x[1] - y[1]);
    let ny2 = y[0] * y[0] + y[1] * y[1];
    if ny2 == 0.0 {
        return d.ln();
    }
    let star = [y[0] / ny2, y[1] / ny2];
    d.ln() - (ny2.sqrt() * (x[0] - star[0]).hypot(x[1] - star[1])).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ordered_data_gives_ordered_solutions(
        s in steppable(),
        c in prop::array::uniform4(-1.0f64..1.0),
        g in prop::array::uniform3(0.0f64..1.0),
    ) {
        let lo = data(c);
        let hi = move |x: &[f64]| lo(x) + g[0] + g[1] * (x[0] + 1.0) + g[2] * x[1] * x[1];
        let cfg = SolveConfig::new(s);
        let a = solve_dirichlet(&disk(1.0 / 24.0, &lo), &cfg, None).unwrap();
        let b = solve_dirichlet(&disk(1.0 / 24.0, &hi), &cfg, None).unwrap();
        for (n, va) in active_values(&a) {
            prop_assert!(va <= b.values[n] + 1e-8, "{s}: {va} > {}", b.values[n]);
        }
    }

    #[test]
    fn solutions_scale_with_the_data(
        s in steppable(),
        c in prop::array::uniform4(-1.0f64..1.0),
        t in 0.1f64..10.0,
    ) {
        let f = data(c);
        let ft = move |x: &[f64]| t * f(x);
        let cfg = SolveConfig::new(s);
        let u = solve_dirichlet(&disk(1.0 / 24.0, &f), &cfg, None).unwrap();
        let ut = solve_dirichlet(&disk(1.0 / 24.0, &ft), &cfg, None).unwrap();
        let scale = t * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>());
        for (n, v) in active_values(&u) {
            prop_assert!((ut.values[n] - t * v).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn r_limit_is_monotone_and_sandwiched(
        p in prop::sample::select(vec![2.0, 3.0]),
        i in -8i32..=8,
        j in -8i32..=8,
        theta in 0.5f64..2.0,
    ) {
        let h = 1.0 / 32.0;
        let s = if p == 2.0 { spec(SubequationKind::SigmaK { k: 1 }) } else { spec(SubequationKind::MinMax { p }) };
        let dom = disk(h, &|_: &[f64]| 0.0);
        let x0 = [i as f64 * 2.0 * h, j as f64 * 2.0 * h];
        let rep = green_function(&dom, &SolveConfig::new(s), x0, theta).unwrap();
        let m = rep.field.monotonicity.as_ref().unwrap();
        prop_assert_eq!(m.violations, 0);
        prop_assert_eq!(m.sandwich_violations, 0);
        prop_assert!(m.steps >= 1);
        prop_assert!(rep.max_interior <= 1e-8);
    }
}

#[test]
fn two_pole_laplace_approaches_superposition() {
    let h = 1.0 / 64.0;
    let s = spec(SubequationKind::SigmaK { k: 1 });
    let poles = [[0.3, 0.0], [-0.3, 0.1]];
    let sing = poles.map(|c| Singularity { center: c, theta: 1.0 });
    let dom = disk(h, &|_: &[f64]| 0.0);
    let full = default_r_schedule(&dom, &SolveConfig::new(s), &poles).unwrap();
    assert!(full.len() >= 3);
    let mut errors = Vec::new();
    for k in 1..=full.len() {
        let mut cfg = SolveConfig::new(s);
        cfg.r_schedule = Some(full[..k].to_vec());
        let f = perron_limit(&dom, &cfg, &sing).unwrap();
        let (mut err, mut scale) = (0.0_f64, 0.0_f64);
        for (n, v) in active_values(&f) {
            let x = dom.coords(n);
            if poles.iter().any(|p| (x[0] - p[0]).hypot(x[1] - p[1]) < 0.1) {
                continue;
            }
            let e = disk_green(x, poles[0]) + disk_green(x, poles[1]);
            err = err.max((v - e).abs());
            scale = scale.max(e.abs());
        }
        errors.push(err / scale);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(*errors.last().unwrap() < 0.15, "{errors:?}");
}

#[test]
fn green_function_is_linear_in_theta_for_laplace() {
    let dom = disk(1.0 / 32.0, &|_: &[f64]| 0.0);
    let cfg = SolveConfig::new(spec(SubequationKind::SigmaK { k: 1 }));
    let one = green_function(&dom, &cfg, [0.125, 0.0], 1.0).unwrap();
    let two = green_function(&dom, &cfg, [0.125, 0.0], 2.0).unwrap();
    for (n, v) in active_values(&one.field) {
        assert!((two.field.values[n] - 2.0 * v).abs() <= 1e-8);
    }
    assert!((two.density.theta_hat - 2.0 * one.density.theta_hat).abs() <= 1e-6);
}

#[test]
fn annulus_matches_the_kernel() {
    for p in [1.5, 2.0, 3.0] {
        let k = KernelSpec::new(p, Normalization::Classic, &[0.0, 0.0]).unwrap();
        let err = |h: f64| {
            let dom = build_domain(Shape::disk(1.0), h, &k, Stencil::for_spacing(h).unwrap())
                .unwrap()
                .perforate(&[[0.0, 0.0]], 0.25)
                .unwrap();
            let dom = Arc::new(dom);
            let f = solve_dirichlet(&dom, &SolveConfig::new(spec(SubequationKind::MinMax { p })), Some(&k)).unwrap();
            let (mut e, mut scale) = (0.0_f64, 0.0_f64);
            for (n, v) in active_values(&f) {
                let exact = k.eval(&dom.coords(n));
                e = e.max((v - exact).abs());
                scale = scale.max(exact.abs());
            }
            e / scale
        };
        let e = err(1.0 / 64.0);
        assert!(e <= 0.02, "p={p}: {e}");
    }
}

#[test]
fn finite_family_pins_the_center_value() {
    let dom = disk(1.0 / 32.0, &|_: &[f64]| 0.0);
    let cfg = SolveConfig::new(spec(SubequationKind::MinMax { p: 1.5 }));
    let t = [0.0, 0.5, 1.0];
    let fam = finite_family(&dom, &cfg, [0.0, 0.0], &t).unwrap();
    for (i, f) in fam.fields.iter().enumerate() {
        let c = f.domain.nearest_node([0.0, 0.0]).unwrap();
        assert!((f.values[c] - (fam.h0_center - t[i])).abs() <= 1e-8, "t={}", t[i]);
        assert_eq!(fam.lower_violations[i], 0);
    }
    assert!(fam.f_values[0].abs() <= 0.05);
    assert!(fam.f_values.windows(2).all(|w| w[1] > w[0]));
}
