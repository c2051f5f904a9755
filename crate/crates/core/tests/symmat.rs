use perron::kernel::{radial_kernel, Normalization};
use perron::symmat::{proj_line, proj_perp, riesz_hessian, SymMatrix, UnitVector};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = SymMatrix> {
    (2usize..=8).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * (n + 1) / 2).prop_map(move |v| {
            let mut it = v.into_iter();
            SymMatrix::from_upper(n, |_, _| it.next().unwrap()).unwrap()
        })
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shift_moves_every_eigenvalue(a in matrix(), t in -5.0f64..5.0) {
        let l = a.eigvals().unwrap();
        let ls = a.shift(t).eigvals().unwrap();
        let tol = 1e-9 * (1.0 + a.frobenius_norm() + t.abs());
        for (x, y) in l.iter().zip(&ls) {
            prop_assert!((x + t - y).abs() <= tol, "{x} + {t} vs {y}");
        }
    }

    #[test]
    fn spectrum_is_sorted_and_reproduces_invariants(a in matrix()) {
        let l = a.eigvals().unwrap();
        prop_assert!(l.windows(2).all(|w| w[0] <= w[1]));
        let tr: f64 = l.iter().sum();
        let sq: f64 = l.iter().map(|x| x * x).sum();
        prop_assert!((tr - a.trace()).abs() <= 1e-10 * (1.0 + a.frobenius_norm()));
        prop_assert!((sq - a.frobenius_norm().powi(2)).abs() <= 1e-10 * (1.0 + a.frobenius_norm().powi(2)));
    }

    #[test]
    fn projections_sum_to_identity(v in (2usize..=8).prop_flat_map(point)) {
        let e = UnitVector::normalized(&v).unwrap();
        let n = e.dim();
        let s = &proj_line(&e) + &proj_perp(&e);
        prop_assert_eq!(s, SymMatrix::identity(n).unwrap());
    }

    #[test]
    fn hessian_matches_finite_differences(
        dir in (2usize..=4).prop_flat_map(point),
        r in 0.5f64..2.0,
        p in 1.0f64..4.0,
    ) {
        let n = dir.len();
        let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        let x: Vec<f64> = dir.iter().map(|c| c * r / norm).collect();
        let k = |y: &[f64]| radial_kernel(p, Normalization::Classic, y.iter().map(|c| c * c).sum::<f64>().sqrt());
        let h = riesz_hessian(&x, p).unwrap();
        let step = 1e-3;
        let tol = 1e-5 * (1.0 + h.frobenius_norm());
        for i in 0..n {
            for j in 0..n {
                let at = |di: f64, dj: f64| {
                    let mut y = x.clone();
                    y[i] += di;
                    y[j] += dj;
                    k(&y)
                };
                let fd = if i == j {
                    (at(step, 0.0) - 2.0 * k(&x) + at(-step, 0.0)) / (step * step)
                } else {
                    (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4.0 * step * step)
                };
                prop_assert!((fd - h.get(i, j)).abs() <= tol, "({i},{j}) fd={fd} exact={}", h.get(i, j));
            }
        }
    }
}
