//! Subcommand bodies. Each returns the text printed to stdout and whether
//! every verdict passed.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use perron::grid::{build_domain, GridDomain, NodeClass, SolutionField};
use perron::kernel::{density_estimate, KernelSpec, Normalization, ScalarField};
use perron::solver::{
    curve_verdicts, field_density_radii, finite_family, green_function, perron_limit,
    prescribe_density, solve_dirichlet, summary_lines, Singularity,
};
use perron::subeq::Dual;
use perron::symmat::SymMatrix;
use perron::valuecone::{
    cap_c, generators, in_cone, kernel_matrix, solve_value_problem, value_of, ValueProblem,
};
use perron::{Error, Gauge, Result, SubequationSpec};

use crate::config::RunConfig;
use crate::io::OutDir;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: OutDir,
    pub seed: u64,
    pub emit_pgm: bool,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    pub ok: bool,
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
}

pub fn riesz_char(spec: &SubequationSpec) -> Outcome {
    let p = spec.riesz_characteristic();
    let mut s = String::new();
    let _ = writeln!(s, "{spec}");
    if p.is_finite() {
        let _ = writeln!(s, "p={p:.9}");
    } else {
        let _ = writeln!(s, "p=inf");
    }
    let f3 = spec.check_f3();
    let _ = writeln!(s, "f3={f3}");
    let mut ok = f3 == p.is_finite();
    match spec.closed_form_characteristic() {
        Some(c) => {
            let agree = (c.is_infinite() && p.is_infinite()) || (c - p).abs() <= 1e-8 * c.abs().max(1.0);
            ok &= agree;
            if c.is_finite() {
                let _ = writeln!(s, "closed_form={c:.9}");
            } else {
                let _ = writeln!(s, "closed_form=inf");
            }
            let _ = writeln!(s, "closed_form_match={agree}");
        }
        None => {
            let _ = writeln!(s, "closed_form=none");
        }
    }
    Outcome { text: s, ok }
}

/// Duality checks: `F̃̃ = F` on random matrices (skipping a `1e-7` band
/// around `∂F`), `0 ∈ F̃`, `-I ∉ F̃`, and optionally one diagonal matrix.
pub fn dual_check(spec: &SubequationSpec, samples: usize, seed: u64, diag: Option<&[f64]>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dd = Dual(Dual(*spec));
    let (mut agree, mut skipped) = (0usize, 0usize);
    for _ in 0..samples {
        let a = SymMatrix::random_uniform(spec.n, &mut rng)?;
        if spec.gauge(&a)?.abs() < 1e-7 {
            skipped += 1;
            continue;
        }
        if dd.is_member(&a, 0.0)? == spec.is_member(&a, 0.0)? {
            agree += 1;
        }
    }
    let zero = spec.dual_is_member(&SymMatrix::zeros(spec.n)?, 1e-9)?;
    let minus_i = spec.dual_is_member(&-&SymMatrix::identity(spec.n)?, 1e-9)?;
    let involution = agree + skipped == samples;
    let mut s = String::new();
    let _ = writeln!(s, "{spec}");
    let _ = writeln!(s, "samples={samples}");
    let _ = writeln!(s, "involution_agree={agree}");
    let _ = writeln!(s, "boundary_band_skipped={skipped}");
    let _ = writeln!(s, "involution={}", pass(involution));
    let _ = writeln!(s, "zero_in_dual={zero}");
    let _ = writeln!(s, "minus_identity_in_dual={minus_i}");
    if let Some(d) = diag {
        if d.len() != spec.n {
            return Err(Error::Config(format!("--diag needs {} entries, got {}", spec.n, d.len())));
        }
        let a = SymMatrix::diag(d)?;
        let _ = writeln!(s, "gauge={:.12e}", spec.gauge(&a)?);
        let _ = writeln!(s, "member={}", spec.is_member(&a, perron::subeq::MEMBER_TOL)?);
        let _ = writeln!(s, "dual_member={}", spec.dual_is_member(&a, perron::subeq::MEMBER_TOL)?);
    }
    Ok(Outcome {
        text: s,
        ok: involution && zero && !minus_i,
    })
}

fn characteristic(spec: &SubequationSpec) -> Result<f64> {
    let p = spec.riesz_characteristic();
    if !p.is_finite() {
        return Err(Error::Config(format!("{spec} has no finite Riesz characteristic")));
    }
    Ok(p)
}

/// `max|u - K| / max|K|` over interior nodes at distance `≥ min_radius` from `x0`.
fn oracle_error(field: &SolutionField, exact: &dyn ScalarField, x0: [f64; 2], min_radius: f64) -> (f64, f64, usize) {
    let d = &field.domain;
    let (mut err, mut scale, mut count) = (0.0_f64, 0.0_f64, 0usize);
    for &n in d.interior_nodes() {
        let n = n as usize;
        if d.class(n) != NodeClass::Interior {
            continue;
        }
        let x = d.coords(n);
        if (x[0] - x0[0]).hypot(x[1] - x0[1]) < min_radius {
            continue;
        }
        let k = exact.eval(&x);
        err = err.max((field.values[n] - k).abs());
        scale = scale.max(k.abs());
        count += 1;
    }
    let rel = if scale > 0.0 { err / scale } else { err };
    (err, rel, count)
}

fn write_field(ctx: &mut Ctx, stem: &str, field: &SolutionField, extra: &mut Vec<(String, String)>) -> Result<()> {
    ctx.out.write(&format!("{stem}.csv"), &field.to_csv())?;
    if ctx.emit_pgm {
        let (pgm, lo, hi) = field.to_pgm();
        ctx.out.write(&format!("{stem}.pgm"), &pgm)?;
        extra.push(("pgm_min".into(), format!("{lo:e}")));
        extra.push(("pgm_max".into(), format!("{hi:e}")));
    }
    Ok(())
}

fn finish(ctx: &mut Ctx, stem: &str, field: &SolutionField, extra: &[(String, String)], ok: bool) -> Result<Outcome> {
    let mut text = ctx.cfg.echo();
    text.push_str(&summary_lines(field, extra));
    let _ = writeln!(text, "status={}", pass(ok));
    ctx.out.write(&format!("{stem}_summary.txt"), &text)?;
    Ok(Outcome { text, ok })
}

fn single_point(cfg: &RunConfig) -> Result<([f64; 2], f64)> {
    let pts = cfg.points();
    if pts.len() != 1 {
        return Err(Error::Config(format!("this command takes one singular point, got {}", pts.len())));
    }
    Ok((pts[0], cfg.thetas()?[0]))
}

fn radial_oracle_geometry(dom: &GridDomain, x0: [f64; 2]) -> Result<f64> {
    match dom.shape {
        perron::grid::Shape::Disk { center, radius } if center == x0 => Ok(radius),
        _ => Err(Error::Config(
            "oracle=radial needs a disk centered at the singular point".into(),
        )),
    }
}

fn density_table(rep: &perron::kernel::DensityReport, extra: &mut Vec<(String, String)>) {
    extra.push(("density_theta_hat".into(), format!("{:.6}", rep.theta_hat)));
    for (i, (r, q)) in rep.radii.iter().zip(&rep.ratios).enumerate() {
        extra.push((format!("density_{i}"), format!("{r:e},{q:e}")));
    }
}

/// Green's function with one pole, zero outer data.
pub fn green(ctx: &mut Ctx) -> Result<Outcome> {
    let spec = ctx.cfg.subequation()?;
    let p = characteristic(&spec)?;
    let scfg = ctx.cfg.solve_config()?;
    let dom = ctx.cfg.domain()?;
    let (x0, theta) = single_point(&ctx.cfg)?;
    let rep = green_function(&dom, &scfg, x0, theta)?;
    let mut extra = Vec::new();
    density_table(&rep.density, &mut extra);
    extra.push(("max_interior".into(), format!("{:e}", rep.max_interior)));
    let mut ok = rep.max_interior <= 0.0;
    if let Some(m) = &rep.field.monotonicity {
        ok &= m.violations == 0 && m.sandwich_violations == 0;
    }
    if ctx.cfg.radial_oracle() {
        let radius = radial_oracle_geometry(&dom, x0)?;
        let k = KernelSpec::new(p, Normalization::Classic, &x0)?.with_theta(theta);
        let kr = k.at_radius(radius);
        let exact = move |x: &[f64]| k.eval(x) - kr;
        let (abs, rel, n) = oracle_error(&rep.field, &exact, x0, ctx.cfg.oracle_min_radius());
        extra.push(("oracle".into(), "radial".into()));
        extra.push(("oracle_nodes".into(), n.to_string()));
        extra.push(("oracle_max_abs_error".into(), format!("{abs:e}")));
        extra.push(("oracle_rel_error".into(), format!("{rel:e}")));
    }
    write_field(ctx, "green", &rep.field, &mut extra)?;
    finish(ctx, "green", &rep.field, &extra, ok)
}

/// Dirichlet solve; with `boundary=kernel` the outer and inner data are
/// `Θ K_p(· - x₀)` and `inner_radius` excises a disk around `x₀`.
pub fn solve(ctx: &mut Ctx) -> Result<Outcome> {
    let spec = ctx.cfg.subequation()?;
    let scfg = ctx.cfg.solve_config()?;
    let (x0, theta) = single_point(&ctx.cfg)?;
    let data: Box<dyn ScalarField> = if ctx.cfg.kernel_boundary() {
        let p = characteristic(&spec)?;
        Box::new(KernelSpec::new(p, Normalization::Classic, &x0)?.with_theta(theta))
    } else {
        Box::new(|_: &[f64]| 0.0)
    };
    let mut dom = build_domain(ctx.cfg.shape()?, ctx.cfg.h(), data.as_ref(), ctx.cfg.stencil()?)?;
    if let Some(r) = ctx.cfg.inner_radius() {
        dom = dom.perforate(&[x0], r)?;
    }
    let dom = Arc::new(dom);
    let field = solve_dirichlet(&dom, &scfg, Some(data.as_ref()))?;
    let mut extra = Vec::new();
    if ctx.cfg.radial_oracle() {
        if !ctx.cfg.kernel_boundary() {
            return Err(Error::Config("oracle=radial needs boundary=kernel".into()));
        }
        let (abs, rel, n) = oracle_error(&field, data.as_ref(), x0, 0.0);
        extra.push(("oracle".into(), "radial".into()));
        extra.push(("oracle_nodes".into(), n.to_string()));
        extra.push(("oracle_max_abs_error".into(), format!("{abs:e}")));
        extra.push(("oracle_rel_error".into(), format!("{rel:e}")));
    }
    write_field(ctx, "solve", &field, &mut extra)?;
    finish(ctx, "solve", &field, &extra, true)
}

/// Prescribed density: the finite-case search for `1 < p < 2`, the polar
/// r-limit (density re-measured) otherwise.
pub fn density(ctx: &mut Ctx) -> Result<Outcome> {
    let spec = ctx.cfg.subequation()?;
    let p = characteristic(&spec)?;
    let scfg = ctx.cfg.solve_config()?;
    let dom = ctx.cfg.domain()?;
    let (x0, _) = single_point(&ctx.cfg)?;
    let theta = ctx.cfg.finite_theta();
    let mut extra = vec![("target_theta".to_string(), format!("{theta}"))];
    let (field, ok) = if p < 2.0 {
        let pd = prescribe_density(&dom, &scfg, x0, theta)?;
        let node = dom.nearest_node(x0).ok_or_else(|| Error::Geometry("x0 is off the grid".into()))?;
        let center = pd.field.values[node];
        extra.push(("t_found".into(), format!("{:.9}", pd.t)));
        extra.push(("density_measured".into(), format!("{:.6}", pd.density)));
        extra.push(("h0_center".into(), format!("{:e}", pd.h0_center)));
        extra.push(("center_value".into(), format!("{center:e}")));
        extra.push(("center_expected".into(), format!("{:e}", pd.h0_center - pd.t)));
        for (i, (t, f)) in pd.curve.iter().enumerate() {
            extra.push((format!("search_{i}"), format!("{t:e},{f:e}")));
        }
        let ok = (pd.density - theta).abs() <= 0.05 * theta.max(1.0);
        (pd.field, ok)
    } else {
        let field = perron_limit(&dom, &scfg, &[Singularity { center: x0, theta }])?;
        let reference = KernelSpec::new(p, Normalization::Classic, &x0)?;
        let radii = field_density_radii(&dom, field.r_schedule[0], scfg.density_radii)?;
        let rep = density_estimate(&field, &reference, &radii)?;
        density_table(&rep, &mut extra);
        let ok = (rep.theta_hat - theta).abs() <= 0.05 * theta;
        (field, ok)
    };
    write_field(ctx, "density", &field, &mut extra)?;
    finish(ctx, "density", &field, &extra, ok)
}

/// Finite-case family `H^t` over the configured `t` grid.
pub fn finite_sweep(ctx: &mut Ctx) -> Result<Outcome> {
    let scfg = ctx.cfg.solve_config()?;
    let dom = ctx.cfg.domain()?;
    let (x0, _) = single_point(&ctx.cfg)?;
    let t = ctx.cfg.t_values()?;
    let tol = ctx.cfg.finite_tol();
    let res = finite_family(&dom, &scfg, x0, &t)?;
    let mut csv = String::from("t,f,lambda,t_plus_lambda,violations\n");
    for i in 0..t.len() {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            t[i],
            res.f_values[i],
            res.lambda_values[i],
            t[i] + res.lambda_values[i],
            res.lower_violations[i] + res.upper_violations[i]
        );
    }
    ctx.out.write("finite_sweep.csv", &csv)?;
    let v = curve_verdicts(&t, &res.f_values, &res.lambda_values, tol);
    let mut text = ctx.cfg.echo();
    let _ = writeln!(text, "h0_center={:e}", res.h0_center);
    for i in 0..t.len() {
        let _ = writeln!(
            text,
            "t={} f_minus_t={:e} lower_excess={:e} upper_excess={:e}",
            t[i],
            res.f_values[i] - t[i],
            res.lower_excess[i],
            res.upper_excess[i]
        );
    }
    for d in &res.diagnostics {
        let _ = writeln!(text, "note={d}");
    }
    let _ = writeln!(text, "max_gap={:e}", v.max_gap);
    let _ = writeln!(text, "f0={}", pass(v.f0));
    let _ = writeln!(text, "superlinear={}", pass(v.superlinear));
    let _ = writeln!(text, "concave={}", pass(v.concave));
    let _ = writeln!(text, "upper_bound={}", pass(v.upper_bound));
    let ok = v.f0 && v.superlinear && v.concave && v.upper_bound;
    let _ = writeln!(text, "status={}", pass(ok));
    ctx.out.write("finite_sweep_summary.txt", &text)?;
    Ok(Outcome { text, ok })
}

/// Generators, `det A`, membership of listed and sampled vectors, and
/// optional value-problem solves.
pub fn value_cone(ctx: &mut Ctx, solve: &[Vec<f64>]) -> Result<Outcome> {
    let spec = ctx.cfg.subequation()?;
    let scfg = ctx.cfg.solve_config()?;
    let dom = ctx.cfg.domain()?;
    let vp = ValueProblem::new(dom, spec, ctx.cfg.points())?;
    let k = vp.k();
    let a = kernel_matrix(&vp);
    let mut text = ctx.cfg.echo();
    let _ = writeln!(text, "k={k}");
    let _ = writeln!(text, "det={:e}", a.det());
    let _ = writeln!(text, "condition={:e}", a.condition());

    let mut gen_csv = String::from("j");
    for i in 0..k {
        let _ = write!(gen_csv, ",v_{}", i + 1);
    }
    gen_csv.push('\n');
    let mut ok = true;
    for (j, g) in generators(&vp).iter().enumerate() {
        let _ = writeln!(gen_csv, "{},{}", j + 1, fmt_vec(g));
        let _ = writeln!(text, "generator_{}={}", j + 1, fmt_vec(g));
        ok &= g.iter().all(|x| *x <= 0.0);
    }
    ctx.out.write("generators.csv", &gen_csv)?;

    let mut csv = String::from("source,index");
    for i in 0..k {
        let _ = write!(csv, ",v_{}", i + 1);
    }
    csv.push_str(",member");
    for i in 0..k {
        let _ = write!(csv, ",gamma_{}", i + 1);
    }
    csv.push_str(",c,roundtrip_error\n");
    let mut row = |source: &str, i: usize, v: &[f64], truth: Option<(&[f64], f64)>| -> Result<bool> {
        let m = in_cone(&vp, v)?;
        let _ = write!(csv, "{source},{i},{},{}", fmt_vec(v), m.member);
        let mut err = f64::NAN;
        match &m.witness {
            Some(w) => {
                let _ = write!(csv, ",{},{:.16e}", fmt_vec(&w.gamma), w.c);
                if let Some((g, c)) = truth {
                    err = g.iter().zip(&w.gamma).map(|(a, b)| (a - b).abs()).fold((c - w.c).abs(), f64::max);
                }
            }
            None => {
                for _ in 0..=k {
                    csv.push_str(",nan");
                }
            }
        }
        let _ = writeln!(csv, ",{err:e}");
        let _ = writeln!(text, "{source}_{i} v=({}) member={}", fmt_vec(v), m.member);
        Ok(truth.is_none() || (m.member && err <= 1e-6))
    };
    for (i, v) in ctx.cfg.value_vectors().iter().enumerate() {
        if v.len() != k {
            return Err(Error::Config(format!("value vector {i} has {} entries, need {k}", v.len())));
        }
        row("listed", i, v, None)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    for i in 0..ctx.cfg.value_samples() {
        let g: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
        let c = cap_c(&vp, &g)?;
        let v = value_of(&vp, &g, c)?;
        ok &= row("sampled", i, &v, Some((&g, c)))?;
    }
    ctx.out.write("value_cone.csv", &csv)?;

    let mut targets: Vec<Vec<f64>> = solve.to_vec();
    if ctx.cfg.value_solve() {
        targets.extend(ctx.cfg.value_vectors());
    }
    for (i, v) in targets.iter().enumerate() {
        if v.len() != k {
            return Err(Error::Config(format!("--solve vector has {} entries, need {k}", v.len())));
        }
        if !in_cone(&vp, v)?.member {
            let _ = writeln!(text, "solve_{i}=skipped (not a member)");
            continue;
        }
        let sol = solve_value_problem(&vp, &scfg, v)?;
        ctx.out.write(&format!("value_field_{i}.csv"), &sol.field.to_csv())?;
        let _ = writeln!(text, "solve_{i}_values={}", fmt_vec(&sol.values));
        let _ = writeln!(text, "solve_{i}_value_error={:e}", sol.value_error);
        let _ = writeln!(text, "solve_{i}_boundary_error={:e}", sol.boundary_error);
        for (j, (lo, hi)) in sol.ratio_bounds.iter().enumerate() {
            let _ = writeln!(text, "solve_{i}_ratio_{j}={lo:e},{hi:e}");
        }
        let _ = writeln!(text, "solve_{i}_lower_ratio={}", pass(sol.lower_ratio_ok));
        let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        ok &= sol.lower_ratio_ok && sol.value_error <= 0.03 * scale;
    }
    let _ = writeln!(text, "status={}", pass(ok));
    ctx.out.write("value_cone_summary.txt", &text)?;
    Ok(Outcome { text, ok })
}
