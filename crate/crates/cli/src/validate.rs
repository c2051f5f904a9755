//! The invariant suite behind `perron validate`: named pass/fail checks over
//! every module at small sizes. Fields produced along the way are written
//! as CSV so runs can be compared byte for byte.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use perron::grid::{build_domain, GridDomain, NodeClass, Shape, SolutionField, Stencil};
use perron::kernel::{
    asym_equiv_check, density_estimate, kernel_sum, tangent_rescale, EquivMode, KernelSpec,
    Normalization, ScalarField,
};
use perron::solver::{
    comparison_check, curve_verdicts, finite_family, green_function, solve_dirichlet, Method,
    SolveConfig,
};
use perron::subeq::Dual;
use perron::symmat::{riesz_hessian, riesz_test_matrix, SymMatrix, UnitVector};
use perron::valuecone::{
    cap_c, generators, in_cone, kernel_matrix, solve_value_problem, superadditivity_check,
    value_of, ValueProblem,
};
use perron::{Gauge, Result, SubequationKind, SubequationSpec};

use crate::io::OutDir;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "invariant={} result={} {}",
            self.name,
            if self.pass { "pass" } else { "fail" },
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Test fixture: negate every gauge seen by the algebraic checks.
    pub flip_gauge: bool,
}

/// Gauge under test; optionally sign-flipped.
struct UnderTest {
    spec: SubequationSpec,
    flip: bool,
}

impl Gauge for UnderTest {
    fn dim(&self) -> usize {
        self.spec.n
    }

    fn gauge(&self, a: &SymMatrix) -> Result<f64> {
        let g = self.spec.gauge(a)?;
        Ok(if self.flip { -g } else { g })
    }
}

fn spec(kind: SubequationKind, n: usize) -> SubequationSpec {
    SubequationSpec::new(kind, n).expect("catalog entries are valid")
}

/// Catalog instances used by the algebraic checks.
pub fn catalog() -> Vec<SubequationSpec> {
    use SubequationKind::*;
    let mut v = Vec::new();
    for n in 2..=4 {
        v.extend([
            spec(PartialSum { p: 1.0 }, n),
            spec(PartialSum { p: 1.5 }, n),
            spec(DeltaCone { delta: 2.0 }, n),
            spec(MinMax { p: 1.5 }, n),
            spec(MinMax { p: 3.0 }, n),
            spec(MinSecond { p: 2.5 }, n),
            spec(SigmaK { k: 1 }, n),
            spec(SigmaK { k: 2 }, n),
            spec(TracePower { q: 3 }, n),
            spec(Pucci { lambda: 1.0, cap_lambda: 2.0 }, n),
            spec(PucciMax { lambda: 1.0, cap_lambda: 2.0 }, n),
            spec(LargestEigenvalue, n),
        ]);
    }
    v.push(spec(SigmaK { k: 3 }, 6));
    v.push(spec(TracePower { q: 3 }, 7));
    v
}

/// `(spec, expected p)` rows of the Riesz characteristic table.
pub fn riesz_table() -> Vec<(SubequationSpec, f64)> {
    use SubequationKind::*;
    let mut rows = vec![
        (spec(SigmaK { k: 2 }, 4), 2.0),
        (spec(SigmaK { k: 3 }, 6), 2.0),
        (spec(TracePower { q: 3 }, 9), 3.0),
    ];
    for p in [1.0, 1.5, 2.0, 2.5, 3.0] {
        rows.push((spec(PartialSum { p }, 3), p));
        rows.push((spec(MinMax { p }, 3), p));
    }
    for (n, p) in [(3usize, 1.5), (4, 2.0)] {
        rows.push((SubequationSpec::delta_cone_for(p, n).expect("valid"), p));
    }
    rows
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn spectrum_ok(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0_f64;
    let mut sorted = true;
    for n in 2..=6 {
        for _ in 0..50 {
            let a = SymMatrix::random_uniform(n, rng)?;
            let l = a.eigvals()?;
            sorted &= l.windows(2).all(|w| w[0] <= w[1]);
            let tr: f64 = l.iter().sum();
            let fro: f64 = l.iter().map(|x| x * x).sum();
            let scale = 1.0 + a.frobenius_norm().powi(2);
            worst = worst
                .max((tr - a.trace()).abs() / scale)
                .max((fro - a.frobenius_norm().powi(2)).abs() / scale);
        }
    }
    Ok(check("symmat_spectrum", sorted && worst <= 1e-10, format!("worst={worst:e}")))
}

fn gauge_checks(opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (mut mono_bad, mut cone_bad, mut dual_bad, mut kernel_worst) = (0usize, 0usize, 0usize, 0.0_f64);
    for s in catalog() {
        let g = UnderTest {
            spec: s,
            flip: opts.flip_gauge,
        };
        let n = s.n;
        for _ in 0..200 {
            let a = SymMatrix::random_uniform(n, rng)?;
            let p = SymMatrix::random_psd(n, rng)?;
            let ap = &a + &p;
            let ok = if s.gauge_is_monotone() {
                g.gauge(&a)? <= g.gauge(&ap)? + 1e-9
            } else {
                !g.is_member(&a, 0.0)? || g.is_member(&ap, 0.0)?
            };
            mono_bad += usize::from(!ok);
            let ga = g.gauge(&a)?;
            for t in [0.1, 2.0, 10.0] {
                let gt = g.gauge(&a.scale(t))?;
                if ga.abs() > 1e-7 && gt.signum() != ga.signum() {
                    cone_bad += 1;
                }
            }
            if ga.abs() > 1e-7 {
                let dd = Dual(Dual(&g));
                if dd.is_member(&a, 0.0)? != g.is_member(&a, 0.0)? {
                    dual_bad += 1;
                }
            }
        }
        let p = s.riesz_characteristic();
        if p.is_finite() {
            for _ in 0..20 {
                let e = UnitVector::random(n, rng)?;
                kernel_worst = kernel_worst.max(g.gauge(&riesz_test_matrix(&e, p))?.abs());
            }
        }
    }
    Ok(vec![
        check("gauge_monotone", mono_bad == 0, format!("violations={mono_bad}")),
        check("gauge_cone", cone_bad == 0, format!("violations={cone_bad}")),
        check("dual_involution", dual_bad == 0, format!("disagreements={dual_bad}")),
        check("boundary_kernel", kernel_worst <= 1e-8, format!("worst={kernel_worst:e}")),
    ])
}

fn riesz_checks() -> Vec<Check> {
    let mut worst = 0.0_f64;
    for (s, expected) in riesz_table() {
        worst = worst.max((s.riesz_characteristic() - expected).abs());
    }
    let f3_bad = catalog()
        .iter()
        .filter(|s| s.check_f3() != s.riesz_characteristic().is_finite())
        .count();
    vec![
        check("riesz_table", worst <= 1e-8, format!("worst={worst:e}")),
        check("f3_equivalence", f3_bad == 0, format!("mismatches={f3_bad}")),
    ]
}

/// `|gauge(riesz_hessian(x, p_F))|` over catalog specs with finite `p_F`.
pub fn kernel_harmonicity(samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0_f64;
    for s in catalog() {
        let p = s.riesz_characteristic();
        if !p.is_finite() {
            continue;
        }
        for _ in 0..samples {
            let x: Vec<f64> = (0..s.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if x.iter().all(|c| c.abs() < 1e-3) {
                continue;
            }
            let hess = riesz_hessian(&x, p)?;
            let scale = hess.frobenius_norm().max(1.0);
            worst = worst.max(s.gauge(&hess)?.abs() / scale);
        }
    }
    Ok(worst)
}

/// Tangent flow fixes plain kernels; density and equivalence on the
/// two-power example `u = -Θ|x|^{2-n} - |x|^{2-p'}` with `n = 4`, `p' = 3`.
pub fn appendix_a(theta: f64) -> Result<(f64, f64, bool)> {
    let mut fix_worst = 0.0_f64;
    for p in [1.2, 1.5, 3.0, 4.0] {
        let k = KernelSpec::new(p, Normalization::Plain, &[0.0, 0.0])?;
        for r in [0.5, 0.1, 0.01] {
            let kr = tangent_rescale(&k, &[0.0, 0.0], 1.0, r, p, 1.0)?;
            for i in 1..=16 {
                let a = i as f64 * 0.39;
                let x = [0.9 * a.cos(), 0.9 * a.sin()];
                let e = (kr.eval(&x) - k.eval(&x)).abs() / k.eval(&x).abs();
                fix_worst = fix_worst.max(e);
            }
        }
    }
    let (n, pp) = (4.0_f64, 3.0_f64);
    let u = move |x: &[f64]| {
        let r = x[0].hypot(x[1]);
        -theta * r.powf(2.0 - n) - r.powf(2.0 - pp)
    };
    let reference = KernelSpec::new(n, Normalization::Plain, &[0.0, 0.0])?;
    let radii: Vec<f64> = (0..10).map(|i| 0.1 * 0.5f64.powi(i)).collect();
    let d = density_estimate(&u, &reference, &radii)?;
    let eq = asym_equiv_check(&u, &reference.clone().with_theta(theta), &[0.0, 0.0], EquivMode::Polar, &radii[..8], 1.0)?;
    Ok((fix_worst, (d.theta_hat - theta).abs() / theta, eq.equivalent))
}

fn kernel_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let harm = kernel_harmonicity(20, rng)?;
    let (fix, dens, equivalent) = appendix_a(1.0)?;
    let mut dens_worst = 0.0_f64;
    for p in [1.5, 2.0, 3.0] {
        let reference = KernelSpec::new(p, Normalization::Classic, &[0.1, -0.2])?;
        let u = reference.clone().with_theta(2.5);
        let radii: Vec<f64> = (0..6).map(|i| 0.5 * 0.5f64.powi(i)).collect();
        dens_worst = dens_worst.max((density_estimate(&u, &reference, &radii)?.theta_hat - 2.5).abs());
    }
    Ok(vec![
        check("kernel_harmonic", harm <= 1e-8, format!("worst={harm:e}")),
        check("tangent_fixes_kernel", fix <= 1e-12, format!("worst={fix:e}")),
        check("density_exact_kernel", dens_worst <= 1e-12, format!("worst={dens_worst:e}")),
        check(
            "density_not_equivalence",
            dens <= 0.02 && !equivalent,
            format!("density_rel_error={dens:e} polar_equivalent={equivalent}"),
        ),
    ])
}

fn disk(h: f64, phi: &dyn ScalarField, stencil: Stencil) -> Result<Arc<GridDomain>> {
    Ok(Arc::new(build_domain(Shape::disk(1.0), h, phi, stencil)?))
}

fn grid_checks() -> Result<Check> {
    let q = |x: &[f64]| 0.5 * x[0] * x[0] + 1.5 * x[1] * x[1];
    let dom = disk(1.0 / 16.0, &q, Stencil::default())?;
    let f = SolutionField::from_fn(dom.clone(), &q);
    let mut worst = 0.0_f64;
    for s in dom.active_slots() {
        let (lo, hi) = f.eig_est(s);
        worst = worst.max((lo - 1.0).abs()).max((hi - 3.0).abs());
    }
    Ok(check("eig_est_quadratic", worst <= 1e-9, format!("worst={worst:e}")))
}

fn minmax(p: f64) -> SubequationSpec {
    spec(SubequationKind::MinMax { p }, 2)
}

/// Relative max error of the annulus solve `R = 1`, `r = 0.25` with exact
/// kernel data.
pub fn annulus_error(p: f64, h: f64, stencil: Stencil) -> Result<(f64, SolutionField)> {
    let k = KernelSpec::new(p, Normalization::Classic, &[0.0, 0.0])?;
    let dom = build_domain(Shape::disk(1.0), h, &k, stencil)?.perforate(&[[0.0, 0.0]], 0.25)?;
    let dom = Arc::new(dom);
    let cfg = SolveConfig::new(minmax(p));
    let field = solve_dirichlet(&dom, &cfg, Some(&k))?;
    let (mut err, mut scale) = (0.0_f64, 0.0_f64);
    for &n in dom.interior_nodes() {
        let n = n as usize;
        if dom.class(n) == NodeClass::Interior {
            let e = k.eval(&dom.coords(n));
            err = err.max((field.values[n] - e).abs());
            scale = scale.max(e.abs());
        }
    }
    Ok((err / scale, field))
}

/// Solutions of two kernel-sum Dirichlet problems, the second negated: `v`
/// is F-subharmonic and `w` F̃-subharmonic on the same grid.
pub fn comparison_pair(cfg: &SolveConfig, h: f64, rng: &mut ChaCha8Rng) -> Result<(SolutionField, SolutionField, f64)> {
    let p = cfg.spec.riesz_characteristic();
    let mut data = || -> Result<Box<dyn ScalarField>> {
        let m = rng.gen_range(1..=3);
        let terms: Vec<(f64, Vec<f64>)> = (0..m)
            .map(|_| {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let d = rng.gen_range(1.5..3.0);
                (rng.gen_range(0.2..2.0), vec![d * a.cos(), d * a.sin()])
            })
            .collect();
        let ks = kernel_sum(&terms, p, Normalization::Classic, rng.gen_range(-1.0..1.0))?;
        let (b0, b1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        Ok(Box::new(move |x: &[f64]| ks.eval(x) + b0 * x[0] + b1 * x[1]))
    };
    let (f1, f2) = (data()?, data()?);
    let stencil = Stencil::default();
    let v = solve_dirichlet(&disk(h, f1.as_ref(), stencil.clone())?, cfg, None)?;
    let u2 = solve_dirichlet(&disk(h, f2.as_ref(), stencil.clone())?, cfg, None)?;
    let neg = |x: &[f64]| -f2.eval(x);
    let dw = disk(h, &neg, stencil)?;
    let w = SolutionField {
        domain: dw,
        values: u2.values.iter().map(|x| -x).collect(),
        residual_history: u2.residual_history.clone(),
        r_schedule: Vec::new(),
        monotonicity: None,
    };
    let scale = v
        .values
        .iter()
        .chain(&w.values)
        .filter(|x| x.is_finite())
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    Ok((v, w, scale))
}

struct Writer<'a> {
    out: Option<&'a mut OutDir>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, text: &str) -> Result<()> {
        if let Some(o) = self.out.as_deref_mut() {
            o.write(name, text)?;
        }
        Ok(())
    }
}

fn solver_checks(rng: &mut ChaCha8Rng, w: &mut Writer) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let h = 1.0 / 64.0;

    let affine = |x: &[f64]| 0.3 * x[0] - 0.7 * x[1] + 0.2;
    let mut worst = 0.0_f64;
    for s in [spec(SubequationKind::SigmaK { k: 1 }, 2), minmax(1.5), minmax(3.0)] {
        let dom = disk(1.0 / 32.0, &affine, Stencil::default())?;
        let f = solve_dirichlet(&dom, &SolveConfig::new(s), None)?;
        for &n in dom.interior_nodes() {
            worst = worst.max((f.values[n as usize] - affine(&dom.coords(n as usize))).abs());
        }
    }
    out.push(check("affine_exact", worst <= 1e-8, format!("worst={worst:e}")));

    let mut worst = 0.0_f64;
    for p in [1.5, 2.0, 3.0] {
        let (err, field) = annulus_error(p, h, Stencil::for_spacing(h)?)?;
        worst = worst.max(err);
        w.csv(&format!("annulus_p{p}.csv"), &field.to_csv())?;
    }
    out.push(check("annulus_oracle", worst <= 0.02, format!("worst_rel_error={worst:e}")));

    let phi = |x: &[f64]| x[0] * x[0] * x[1] + (3.0 * x[1]).sin();
    let dom = disk(1.0 / 16.0, &phi, Stencil::default())?;
    let mut cfg = SolveConfig::new(minmax(2.5));
    let newton = solve_dirichlet(&dom, &cfg, None)?;
    cfg.method = Method::Jacobi;
    let run = |threads: usize| -> Result<SolutionField> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| perron::Error::InvalidInput(e.to_string()))?
            .install(|| solve_dirichlet(&dom, &cfg, None))
    };
    let (j1, j4) = (run(1)?, run(4)?);
    let same = j1.values.iter().zip(&j4.values).all(|(a, b)| a.to_bits() == b.to_bits());
    let gap = dom
        .interior_nodes()
        .iter()
        .map(|&n| (newton.values[n as usize] - j1.values[n as usize]).abs())
        .fold(0.0, f64::max);
    w.csv("jacobi.csv", &j4.to_csv())?;
    out.push(check(
        "jacobi_thread_independent",
        same && gap <= 1e-7,
        format!("bitwise_equal={same} gap_to_newton={gap:e}"),
    ));

    let mut mono_ok = true;
    let mut detail = String::new();
    for (s, exact_at_half) in [
        (spec(SubequationKind::SigmaK { k: 1 }, 2), 0.5f64.ln()),
        (minmax(3.0), -2.0 + 1.0),
    ] {
        let dom = disk(h, &|_: &[f64]| 0.0, Stencil::default())?;
        let rep = green_function(&dom, &SolveConfig::new(s), [0.0, 0.0], 1.0)?;
        let m = rep.field.monotonicity.as_ref().expect("r-limit reports monotonicity");
        let at_half = rep.field.interpolate([0.5, 0.0]);
        let value_err = (at_half - exact_at_half).abs() / exact_at_half.abs();
        let dens_err = (rep.density.theta_hat - 1.0).abs();
        mono_ok &= m.violations == 0 && m.sandwich_violations == 0 && value_err <= 0.02 && dens_err <= 0.05;
        detail.push_str(&format!(
            "[{s}: value_err={value_err:.3e} density={:.4} mono={} sandwich={}] ",
            rep.density.theta_hat, m.violations, m.sandwich_violations
        ));
        w.csv(&format!("green_p{}.csv", s.riesz_characteristic().round()), &rep.field.to_csv())?;
    }
    out.push(check("green_monotone_sandwich", mono_ok, detail.trim_end().to_string()));

    let cfg = SolveConfig::new(minmax(1.5));
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..4 {
        let (v, wf, scale) = comparison_pair(&cfg, 1.0 / 32.0, rng)?;
        match comparison_check(&v, &wf, &cfg.spec, 1e-8 * scale, 1e-6 * scale) {
            Ok(r) => {
                worst = worst.max(r.excess / scale);
                failures += usize::from(!r.holds);
            }
            Err(_) => failures += 1,
        }
    }
    out.push(check("discrete_comparison", failures == 0, format!("worst_excess={worst:e}")));

    let dom = disk(1.0 / 32.0, &|_: &[f64]| 0.0, Stencil::default())?;
    let t = [0.0, 0.5, 1.0, 1.5, 2.0];
    let fam = finite_family(&dom, &cfg, [0.0, 0.0], &t)?;
    let v = curve_verdicts(&t, &fam.f_values, &fam.lambda_values, 0.05);
    let mut csv = String::from("t,f,lambda\n");
    for i in 0..t.len() {
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", t[i], fam.f_values[i], fam.lambda_values[i]));
    }
    w.csv("finite_curve.csv", &csv)?;
    out.push(check(
        "finite_density_curve",
        v.f0 && v.superlinear && v.concave && v.upper_bound,
        format!(
            "f0={} superlinear={} concave={} upper_bound={} max_gap={:e}",
            v.f0, v.superlinear, v.concave, v.upper_bound, v.max_gap
        ),
    ));
    Ok(out)
}

fn random_points(rng: &mut ChaCha8Rng, h: f64, k: usize) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let m = (0.8 / h) as i64;
    while pts.len() < k {
        let x = [rng.gen_range(-m..=m) as f64 * h, rng.gen_range(-m..=m) as f64 * h];
        if x[0].hypot(x[1]) < 0.85_f64.min(1.0 - 7.0 * h) && pts.iter().all(|y| (x[0] - y[0]).hypot(x[1] - y[1]) >= 6.0 * h) {
            pts.push(x);
        }
    }
    pts
}

/// Value-cone algebra over random configurations: superadditivity failures,
/// smallest `|det A|/scale^k`, generators outside the closed negative octant,
/// and the worst round-trip error.
pub fn value_cone_algebra(
    dom: &Arc<GridDomain>,
    rng: &mut ChaCha8Rng,
    pairs: usize,
    configs: usize,
) -> Result<(usize, f64, usize, f64)> {
    let s = minmax(1.5);
    let mut super_bad = 0;
    let mut det_min = f64::INFINITY;
    let mut gen_bad = 0;
    let mut trip = 0.0_f64;
    for i in 0..pairs.max(configs) {
        let k = if i % 2 == 0 { 2 } else { 3 };
        let vp = ValueProblem::new(dom.clone(), s, random_points(rng, dom.h, k))?;
        if i < configs {
            let a = kernel_matrix(&vp);
            det_min = det_min.min(a.det().abs() / a.scale().powi(k as i32));
            gen_bad += generators(&vp).iter().flatten().filter(|x| **x > 0.0).count();
            let g: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
            let c = cap_c(&vp, &g)?;
            let v = value_of(&vp, &g, c)?;
            if let Some(w) = in_cone(&vp, &v)?.witness {
                let e = g.iter().zip(&w.gamma).map(|(a, b)| (a - b).abs()).fold((c - w.c).abs(), f64::max);
                trip = trip.max(e);
            } else {
                trip = f64::INFINITY;
            }
        }
        if i < pairs {
            let g1: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..2.0)).collect();
            let g2: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..2.0)).collect();
            super_bad += usize::from(!superadditivity_check(&vp, &g1, &g2)?);
        }
    }
    Ok((super_bad, det_min, gen_bad, trip))
}

fn value_checks(rng: &mut ChaCha8Rng, w: &mut Writer) -> Result<Vec<Check>> {
    let h = 1.0 / 32.0;
    let dom = disk(h, &|_: &[f64]| 0.0, Stencil::default())?;
    let (super_bad, det_min, gen_bad, trip) = value_cone_algebra(&dom, rng, 50, 50)?;
    let mut out = vec![
        check("cap_superadditive", super_bad == 0, format!("violations={super_bad}")),
        check("kernel_matrix_nonsingular", det_min > 1e-12, format!("min_rel_det={det_min:e}")),
        check("generators_nonpositive", gen_bad == 0, format!("positive_entries={gen_bad}")),
        check("cone_roundtrip", trip <= 1e-6, format!("worst={trip:e}")),
    ];
    let vp = ValueProblem::new(dom.clone(), minmax(1.5), vec![[0.0, 0.0]])?;
    let positive = in_cone(&vp, &[0.1])?.member;
    let sol = solve_value_problem(&vp, &SolveConfig::new(minmax(1.5)), &[-1.0])?;
    let max_h = sol
        .field
        .values
        .iter()
        .zip(sol.field.domain.classes())
        .filter(|(_, c)| matches!(c, NodeClass::Interior | NodeClass::InnerDisk(_)))
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    w.csv("value_k1.csv", &sol.field.to_csv())?;
    out.push(check(
        "one_point_value",
        !positive && sol.value_error <= 0.03 && max_h < 0.0,
        format!("value_error={:e} max_h={max_h:e} positive_member={positive}", sol.value_error),
    ));
    Ok(out)
}

/// Runs every check. Fields are written to `out` when given.
pub fn run_suite(opts: SuiteOptions, out: Option<&mut OutDir>) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w = Writer { out };
    let mut checks = Vec::new();
    checks.push(spectrum_ok(&mut rng)?);
    checks.extend(gauge_checks(&opts, &mut rng)?);
    checks.extend(riesz_checks());
    checks.extend(kernel_checks(&mut rng)?);
    checks.push(grid_checks()?);
    checks.extend(solver_checks(&mut rng, &mut w)?);
    checks.extend(value_checks(&mut rng, &mut w)?);
    Ok(checks)
}
