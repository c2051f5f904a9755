use std::sync::Arc;

use proptest::prelude::*;

use perron::grid::{build_domain, GridDomain, NodeClass, Shape, Stencil};
use perron::solver::SolveConfig;
use perron::valuecone::{
    cap_c, generators, in_cone, kernel_matrix, solve_value_problem, superadditivity_check,
    value_of, ValueProblem,
};
use perron::SubequationSpec;

const H: f64 = 1.0 / 32.0;

fn minmax() -> SubequationSpec {
    "kind=minmax n=2 p=1.5".parse().unwrap()
}

fn domain() -> Arc<GridDomain> {
    Arc::new(build_domain(Shape::disk(1.0), H, &|_: &[f64]| 0.0, Stencil::default()).unwrap())
}

/// Up to four grid points inside radius 0.75, at least 6h apart.
fn configuration() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-24i32..=24, -24i32..=24), 1..=4).prop_filter_map("well separated", |raw| {
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for (i, j) in raw {
            let x = [i as f64 * H, j as f64 * H];
            if x[0].hypot(x[1]) > 0.75 || pts.iter().any(|y| (x[0] - y[0]).hypot(x[1] - y[1]) < 6.0 * H) {
                return None;
            }
            pts.push(x);
        }
        Some(pts)
    })
}

fn problem(points: Vec<[f64; 2]>) -> ValueProblem {
    ValueProblem::new(domain(), minmax(), points).unwrap()
}

fn weights(k: usize, lo: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..2.0, k)
}

fn with_weights(lo: f64) -> impl Strategy<Value = (Vec<[f64; 2]>, Vec<f64>, Vec<f64>)> {
    configuration().prop_flat_map(move |pts| {
        let k = pts.len();
        (Just(pts), weights(k, lo), weights(k, lo))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cap_is_homogeneous_and_superadditive((pts, g1, g2) in with_weights(0.0), t in 0.1f64..5.0) {
        let vp = problem(pts);
        prop_assert!(superadditivity_check(&vp, &g1, &g2).unwrap());
        let scaled: Vec<f64> = g1.iter().map(|g| t * g).collect();
        let (c, ct) = (cap_c(&vp, &g1).unwrap(), cap_c(&vp, &scaled).unwrap());
        prop_assert!((ct - t * c).abs() <= 1e-12 * (1.0 + ct.abs()));
    }

    #[test]
    fn tight_values_round_trip((pts, g, _) in with_weights(0.1)) {
        let vp = problem(pts);
        let c = cap_c(&vp, &g).unwrap();
        let v = value_of(&vp, &g, c).unwrap();
        prop_assert!(v.iter().all(|x| *x <= 0.0));
        let m = in_cone(&vp, &v).unwrap();
        prop_assert!(m.member);
        let w = m.witness.unwrap();
        let err = g.iter().zip(&w.gamma).map(|(a, b)| (a - b).abs()).fold((c - w.c).abs(), f64::max);
        prop_assert!(err <= 1e-6, "{err:e}");
    }

    #[test]
    fn cone_is_closed_under_sums_and_scaling(
        (pts, g1, g2) in with_weights(0.0),
        slack in prop::array::uniform2(0.0f64..1.0),
        t in 0.1f64..5.0,
    ) {
        let vp = problem(pts);
        let v1 = value_of(&vp, &g1, cap_c(&vp, &g1).unwrap() - slack[0]).unwrap();
        let v2 = value_of(&vp, &g2, cap_c(&vp, &g2).unwrap() - slack[1]).unwrap();
        let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = v1.iter().map(|a| t * a).collect();
        prop_assert!(in_cone(&vp, &v1).unwrap().member);
        prop_assert!(in_cone(&vp, &sum).unwrap().member);
        prop_assert!(in_cone(&vp, &scaled).unwrap().member);
    }

    #[test]
    fn positive_entries_are_never_values(pts in configuration(), pick in any::<prop::sample::Index>(), bump in 1e-3f64..1.0) {
        let vp = problem(pts);
        let mut v = vec![-1.0; vp.k()];
        v[pick.index(vp.k())] = bump;
        prop_assert!(!in_cone(&vp, &v).unwrap().member);
    }

    #[test]
    fn generators_lie_in_the_negative_octant(pts in configuration()) {
        let vp = problem(pts);
        for (j, g) in generators(&vp).iter().enumerate() {
            prop_assert!(g.iter().all(|x| *x <= 0.0));
            let m = in_cone(&vp, g).unwrap();
            prop_assert!(m.member);
            let w = m.witness.unwrap();
            for (i, x) in w.gamma.iter().enumerate() {
                if i != j {
                    prop_assert!(x.abs() <= 1e-6 * w.gamma[j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn kernel_matrix_is_nonsingular(pts in configuration()) {
        let vp = problem(pts);
        prop_assume!(vp.k() >= 2);
        let a = kernel_matrix(&vp);
        prop_assert!(a.det().abs() > 1e-12 * a.scale().powi(vp.k() as i32));
        prop_assert!(a.condition().is_finite());
    }
}

#[test]
fn one_point_solution_scales_with_the_value() {
    let vp = problem(vec![[0.0, 0.0]]);
    let cfg = SolveConfig::new(minmax());
    let one = solve_value_problem(&vp, &cfg, &[-1.0]).unwrap();
    let two = solve_value_problem(&vp, &cfg, &[-2.0]).unwrap();
    assert!((one.values[0] + 1.0).abs() <= 0.03);
    let dom = &one.field.domain;
    for &n in dom.interior_nodes() {
        let n = n as usize;
        if dom.class(n) == NodeClass::Interior {
            assert!(one.field.values[n] < 0.0);
            assert!((two.field.values[n] - 2.0 * one.field.values[n]).abs() <= 1e-8);
        }
    }
}

#[test]
fn mirrored_points_give_a_mirrored_field() {
    let vp = problem(vec![[0.5, 0.0], [-0.5, 0.0]]);
    let sol = solve_value_problem(&vp, &SolveConfig::new(minmax()), &[-1.0, -1.0]).unwrap();
    let dom = &sol.field.domain;
    let mut worst = 0.0_f64;
    for idx in 0..dom.node_count() {
        let x = dom.coords(idx);
        let m = dom.nearest_node([-x[0], x[1]]).unwrap();
        let (a, b) = (sol.field.values[idx], sol.field.values[m]);
        if a.is_finite() && b.is_finite() {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
    assert!((sol.values[0] - sol.values[1]).abs() <= 1e-6);
}
