//! Monotone wide-stencil Dirichlet solver, the Perron r-limit for polar
//! singularities, the finite-case family `H^t` with its density curve, and
//! discrete comparison checks.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{second_diff_coeffs, GridDomain, MonotonicityReport, NodeClass, SolutionField};
use crate::kernel::{density_estimate, kernel_sum, DensityReport, KernelSpec, Normalization, ScalarField};
use crate::subeq::{Operator2d, SubequationSpec};

const MAX_DIRS: usize = 64;
const BOUND_SLACK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Policy iteration (semismooth Newton) with sparse direct solves,
    /// finished by SOR sweeps.
    Newton,
    /// Projected nonlinear successive over-relaxation with exact local solves.
    Sor,
    /// Damped nonlinear Jacobi with exact local solves (data-parallel).
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub spec: SubequationSpec,
    pub method: Method,
    /// SOR relaxation factor; `None` picks one from the grid size.
    pub omega: Option<f64>,
    /// Jacobi damping in `(0, 1]`.
    pub damping: f64,
    /// Target for the largest local correction in a sweep, relative to the
    /// data scale `max(1, max|data|)`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Largest excision radius of the r-limit; `None` means a quarter of the inradius.
    pub r0: Option<f64>,
    /// Explicit r-limit radii (strictly decreasing, all `≥ 3h`).
    pub r_schedule: Option<Vec<f64>>,
    /// Slack for the nodewise monotonicity and sandwich checks.
    pub tol_mono: f64,
    /// Number of radii used for density estimates of discrete fields.
    pub density_radii: usize,
}

impl SolveConfig {
    pub fn new(spec: SubequationSpec) -> Self {
        Self {
            spec,
            method: Method::Newton,
            omega: None,
            damping: 1.0,
            rel_tol: 1e-10,
            max_iters: 200_000,
            r0: None,
            r_schedule: None,
            tol_mono: 1e-8,
            density_radii: 6,
        }
    }

    pub fn operator(&self) -> Result<Operator2d> {
        self.spec.operator_2d()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub omega: f64,
    pub history: Vec<f64>,
}

/// `G(λ̂_min, λ̂_max)` at an active node.
pub fn evaluate_op(cfg: &SolveConfig, u: &SolutionField, slot: usize) -> Result<f64> {
    let op = cfg.operator()?;
    let (a, b) = u.eig_est(slot);
    Ok(op.eval(a, b))
}

/// Min of `G[u]` over active nodes.
pub fn subharmonic_residual(spec: &SubequationSpec, u: &SolutionField) -> Result<f64> {
    let op = spec.operator_2d()?;
    Ok(u.domain
        .active_slots()
        .into_iter()
        .map(|s| {
            let (a, b) = u.eig_est(s);
            op.eval(a, b)
        })
        .fold(f64::INFINITY, f64::min))
}

/// `G[u]` divided by its sensitivity to the center value, per active slot.
/// This is the size of the local correction, in value units.
fn normalized_residuals(op: &Operator2d, dom: &GridDomain, values: &[f64], flip: bool) -> Vec<(usize, f64)> {
    dom.active_slots()
        .into_iter()
        .map(|s| {
            let m = dom.stencil.len();
            let u0 = values[dom.interior_nodes()[s] as usize];
            let (mut lo, mut hi) = ((f64::INFINITY, 0.0), (f64::NEG_INFINITY, 0.0));
            for k in 0..m {
                let (a, b) = second_diff_coeffs(dom, values, s, k);
                let d = a - b * u0;
                if d < lo.0 {
                    lo = (d, b);
                }
                if d > hi.0 {
                    hi = (d, b);
                }
            }
            if flip {
                // eigenvalue estimates of -u
                let (l, h) = ((-hi.0, hi.1), (-lo.0, lo.1));
                let (s1, s2) = op.slopes(l.0, h.0);
                (s, op.eval(l.0, h.0) / (s1 * l.1 + s2 * h.1))
            } else {
                let (s1, s2) = op.slopes(lo.0, hi.0);
                (s, op.eval(lo.0, hi.0) / (s1 * lo.1 + s2 * hi.1))
            }
        })
        .collect()
}

/// Root in `u` of `G(min_k(a_k - b_k u), max_k(a_k - b_k u)) = 0`.
#[inline]
fn local_root(op: &Operator2d, a: &[f64], b: &[f64], u0: f64) -> f64 {
    let eval = |u: f64| {
        let (mut kmin, mut kmax) = (0, 0);
        let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..a.len() {
            let d = a[k] - b[k] * u;
            if d < lmin {
                lmin = d;
                kmin = k;
            }
            if d > lmax {
                lmax = d;
                kmax = k;
            }
        }
        let (s1, s2) = op.slopes(lmin, lmax);
        (op.eval(lmin, lmax), -(s1 * b[kmin] + s2 * b[kmax]))
    };
    let mut u = u0;
    let (mut g, mut dg) = eval(u);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..100 {
        if g == 0.0 {
            return u;
        }
        if g > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let mut next = u - g / dg;
        if !(next > lo && next < hi) {
            if lo.is_finite() && hi.is_finite() {
                next = 0.5 * (lo + hi);
            } else {
                return next;
            }
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * (1.0 + u.abs()) {
            return next;
        }
        u = next;
        (g, dg) = eval(u);
    }
    u
}

#[inline]
fn gather(dom: &GridDomain, values: &[f64], slot: usize, a: &mut [f64], b: &mut [f64]) {
    for k in 0..a.len() {
        let (ak, bk) = second_diff_coeffs(dom, values, slot, k);
        a[k] = ak;
        b[k] = bk;
    }
}

/// Scale of the fixed data seen by the active nodes.
fn data_scale(dom: &GridDomain, values: &[f64]) -> f64 {
    let mut s: f64 = 1.0;
    for c in 0..dom.crossing_count() {
        s = s.max(dom.crossing_value(c as u32).abs());
    }
    for &n in dom.interior_nodes() {
        if let NodeClass::InnerDisk(_) = dom.class(n as usize) {
            let v = values[n as usize];
            if v.is_finite() {
                s = s.max(v.abs());
            }
        }
    }
    s
}

fn auto_omega(dom: &GridDomain) -> f64 {
    let across = 2.0 * dom.shape.max_semi_axis() / dom.h;
    2.0 / (1.0 + (std::f64::consts::PI / across).sin() * 1.5)
}

/// Exact local corrections `max(ψ, root) - u` at every active slot.
fn local_corrections(
    dom: &GridDomain,
    op: &Operator2d,
    values: &[f64],
    obstacle: Option<&[f64]>,
    slots: &[usize],
    nodes: &[usize],
) -> f64 {
    let m = dom.stencil.len();
    let (mut a, mut b) = ([0.0; MAX_DIRS], [0.0; MAX_DIRS]);
    let mut worst = 0.0_f64;
    for (&s, &n) in slots.iter().zip(nodes) {
        gather(dom, values, s, &mut a[..m], &mut b[..m]);
        let mut root = local_root(op, &a[..m], &b[..m], values[n]);
        if let Some(obs) = obstacle {
            root = root.max(obs[n]);
        }
        worst = worst.max((root - values[n]).abs());
    }
    worst
}

/// Policy iteration: freezes the extremal directions (and the obstacle
/// contact set) at every node, solves the resulting linear system, repeats.
/// Stops at `tol`, after `max_steps`, or when progress stalls.
fn newton_phase(
    dom: &GridDomain,
    op: &Operator2d,
    values: &mut [f64],
    obstacle: Option<&[f64]>,
    tol: f64,
    max_steps: usize,
    history: &mut Vec<f64>,
) -> Result<bool> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};

    faer::set_global_parallelism(faer::Par::Seq);
    let m = dom.stencil.len();
    let slots = dom.active_slots();
    let nodes: Vec<usize> = slots.iter().map(|&s| dom.interior_nodes()[s] as usize).collect();
    let mut row_of = vec![usize::MAX; dom.node_count()];
    for (i, &n) in nodes.iter().enumerate() {
        row_of[n] = i;
    }
    let dim = nodes.len();
    let mut best = local_corrections(dom, op, values, obstacle, &slots, &nodes);
    let mut stalls = 0;
    for _ in 0..max_steps {
        if best <= tol {
            return Ok(true);
        }
        let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(5 * dim);
        let mut rhs = faer::Col::<f64>::zeros(dim);
        let (mut a, mut b) = ([0.0; MAX_DIRS], [0.0; MAX_DIRS]);
        for (i, (&s, &n)) in slots.iter().zip(&nodes).enumerate() {
            gather(dom, values, s, &mut a[..m], &mut b[..m]);
            let u0 = values[n];
            let (mut kmin, mut kmax) = (0, 0);
            for k in 1..m {
                if a[k] - b[k] * u0 < a[kmin] - b[kmin] * u0 {
                    kmin = k;
                }
                if a[k] - b[k] * u0 > a[kmax] - b[kmax] * u0 {
                    kmax = k;
                }
            }
            let (lmin, lmax) = (a[kmin] - b[kmin] * u0, a[kmax] - b[kmax] * u0);
            let (w1, w2) = op.slopes(lmin, lmax);
            if let Some(obs) = obstacle {
                // branch of max(G(u), c (ψ - u)) with c the diagonal weight
                let c = w1 * b[kmin] + w2 * b[kmax];
                if c * (obs[n] - u0) > op.eval(lmin, lmax) {
                    trip.push(Triplet::new(i, i, 1.0));
                    rhs[i] = obs[n];
                    continue;
                }
            }
            let nb = dom.neighbors(s);
            let mut diag = 0.0;
            for (k, w) in [(kmin, w1), (kmax, w2)] {
                if w == 0.0 {
                    continue;
                }
                let (plus, minus) = (nb[2 * k], nb[2 * k + 1]);
                let (h2, h1) = (plus.dist, minus.dist);
                let sc = 2.0 / (h1 + h2);
                diag -= w * 2.0 / (h1 * h2);
                for (nbr, c) in [(plus, sc / h2), (minus, sc / h1)] {
                    let c = w * c;
                    if nbr.node != crate::grid::NO_NODE && row_of[nbr.node as usize] != usize::MAX {
                        trip.push(Triplet::new(i, row_of[nbr.node as usize], c));
                    } else if nbr.node == crate::grid::NO_NODE {
                        rhs[i] -= c * dom.crossing_value(nbr.crossing);
                    } else {
                        rhs[i] -= c * values[nbr.node as usize];
                    }
                }
            }
            trip.push(Triplet::new(i, i, diag));
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &trip)
            .map_err(|e| Error::Divergence(format!("policy matrix assembly failed: {e:?}")))?;
        let lu = match mat.sp_lu() {
            Ok(lu) => lu,
            Err(_) => return Ok(false),
        };
        let sol = lu.solve(&rhs);
        let previous: Vec<f64> = nodes.iter().map(|&n| values[n]).collect();
        // backtracking on the largest local correction
        let mut alpha = 1.0;
        let mut corr = f64::INFINITY;
        for _ in 0..6 {
            for (i, &n) in nodes.iter().enumerate() {
                values[n] = previous[i] + alpha * (sol[i] - previous[i]);
            }
            corr = local_corrections(dom, op, values, obstacle, &slots, &nodes);
            if corr < best {
                break;
            }
            alpha *= 0.5;
        }
        if !corr.is_finite() {
            for (&n, v) in nodes.iter().zip(previous) {
                values[n] = v;
            }
            return Ok(false);
        }
        history.push(corr);
        if corr < best {
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 5 {
                if corr > best {
                    for (&n, v) in nodes.iter().zip(previous) {
                        values[n] = v;
                    }
                }
                return Ok(false);
            }
        }
        best = best.min(corr);
    }
    Ok(best <= tol)
}

/// Relaxes the active entries of `values` (full-grid array) to the discrete
/// solution. Fixed entries (excised nodes) are read, never written. With an
/// obstacle the solution is the least discrete supersolution above it.
pub fn relax(
    dom: &GridDomain,
    cfg: &SolveConfig,
    values: &mut [f64],
    obstacle: Option<&[f64]>,
) -> Result<SolveStats> {
    let op = cfg.operator()?;
    let m = dom.stencil.len();
    if m > MAX_DIRS {
        return Err(Error::InvalidInput(format!("stencil has more than {MAX_DIRS} directions")));
    }
    let slots = dom.active_slots();
    let nodes: Vec<usize> = slots.iter().map(|&s| dom.interior_nodes()[s] as usize).collect();
    let tol = cfg.rel_tol * data_scale(dom, values);
    let mut history = Vec::new();
    let mut omega = match cfg.method {
        Method::Sor | Method::Newton => cfg.omega.unwrap_or_else(|| auto_omega(dom)),
        Method::Jacobi => cfg.damping,
    };
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::InvalidInput(format!("relaxation factor {omega} outside (0, 2)")));
    }
    if let Some(obs) = obstacle {
        for &n in &nodes {
            if values[n] < obs[n] {
                values[n] = obs[n];
            }
        }
    }
    if cfg.method == Method::Newton {
        let before = history.len();
        let done = newton_phase(dom, &op, values, obstacle, tol, cfg.max_iters.min(200), &mut history)?;
        if done {
            let residual = local_corrections(dom, &op, values, obstacle, &slots, &nodes);
            if history.len() == before {
                // converged at the initial guess; keep the measured correction
                history.push(residual);
            }
            return Ok(SolveStats {
                iterations: history.len() - before,
                residual,
                omega,
                history,
            });
        }
    }
    let mut checkpoint = f64::INFINITY;
    for it in history.len() + 1..=cfg.max_iters {
        let mut worst = 0.0_f64;
        match cfg.method {
            Method::Sor | Method::Newton => {
                let (mut a, mut b) = ([0.0; MAX_DIRS], [0.0; MAX_DIRS]);
                for (&s, &n) in slots.iter().zip(&nodes) {
                    gather(dom, values, s, &mut a[..m], &mut b[..m]);
                    let old = values[n];
                    let mut root = local_root(&op, &a[..m], &b[..m], old);
                    let mut new = old + omega * (root - old);
                    if let Some(obs) = obstacle {
                        root = root.max(obs[n]);
                        new = new.max(obs[n]);
                    }
                    worst = worst.max((root - old).abs());
                    values[n] = new;
                }
            }
            Method::Jacobi => {
                let snapshot: &[f64] = values;
                let updates: Vec<(f64, f64)> = slots
                    .par_iter()
                    .zip(nodes.par_iter())
                    .map(|(&s, &n)| {
                        let (mut a, mut b) = ([0.0; MAX_DIRS], [0.0; MAX_DIRS]);
                        gather(dom, snapshot, s, &mut a[..m], &mut b[..m]);
                        let old = snapshot[n];
                        let mut root = local_root(&op, &a[..m], &b[..m], old);
                        let mut new = old + omega * (root - old);
                        if let Some(obs) = obstacle {
                            root = root.max(obs[n]);
                            new = new.max(obs[n]);
                        }
                        (new, (root - old).abs())
                    })
                    .collect();
                for (&n, (new, d)) in nodes.iter().zip(updates) {
                    values[n] = new;
                    worst = worst.max(d);
                }
            }
        }
        if !worst.is_finite() {
            return Err(Error::Divergence(format!("non-finite update in sweep {it}")));
        }
        history.push(worst);
        if worst <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: worst,
                omega,
                history,
            });
        }
        if cfg.method != Method::Jacobi && it % 200 == 0 {
            if checkpoint.is_finite() && worst > 1e6 * checkpoint.max(history[0]) {
                return Err(Error::Divergence(format!("updates grew to {worst:e}")));
            }
            if worst >= checkpoint && omega > 1.0 {
                omega = 1.0 + 0.5 * (omega - 1.0);
            }
            checkpoint = worst;
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Values for a fresh solve: boundary band from the domain, excised nodes
/// from `inner`, active nodes from `initial`.
fn initial_values(
    dom: &GridDomain,
    inner: Option<&dyn ScalarField>,
    initial: &dyn ScalarField,
) -> Vec<f64> {
    (0..dom.node_count())
        .map(|idx| match dom.class(idx) {
            NodeClass::Exterior => f64::NAN,
            NodeClass::OuterBand => dom.band_value(idx),
            NodeClass::Interior => initial.eval(&dom.coords(idx)),
            NodeClass::InnerDisk(_) => inner
                .map(|f| f.eval(&dom.coords(idx)))
                .unwrap_or(0.0),
        })
        .collect()
}

/// Solves `G[u] = 0` on the active nodes with the domain's boundary data and
/// `inner` on excised nodes.
pub fn solve_dirichlet(
    domain: &Arc<GridDomain>,
    cfg: &SolveConfig,
    inner: Option<&dyn ScalarField>,
) -> Result<SolutionField> {
    let zero = |_: &[f64]| 0.0;
    let mut values = initial_values(domain, inner, &zero);
    let stats = relax(domain, cfg, &mut values, None)?;
    Ok(SolutionField {
        domain: domain.clone(),
        values,
        residual_history: stats.history,
        r_schedule: Vec::new(),
        monotonicity: None,
    })
}

/// A prescribed polar singularity `Θ K_p(· - x_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub center: [f64; 2],
    pub theta: f64,
}

fn inradius(dom: &GridDomain) -> f64 {
    match dom.shape {
        crate::grid::Shape::Disk { radius, .. } => radius,
        crate::grid::Shape::Ellipse { a, b, .. } => a.min(b),
    }
}

/// Default schedule: halving from `r0` while `≥ 3h`.
pub fn default_r_schedule(dom: &GridDomain, cfg: &SolveConfig, centers: &[[f64; 2]]) -> Result<Vec<f64>> {
    if let Some(s) = &cfg.r_schedule {
        if s.is_empty() || s.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("r_schedule must be strictly decreasing".into()));
        }
        if s.iter().any(|&r| r < 3.0 * dom.h * (1.0 - 1e-12)) {
            return Err(Error::InvalidInput(format!("r_schedule entries must be >= 3h = {}", 3.0 * dom.h)));
        }
        return Ok(s.clone());
    }
    let mut r0 = cfg.r0.unwrap_or(inradius(dom) / 4.0);
    for (j, c) in centers.iter().enumerate() {
        r0 = r0.min(dom.shape.boundary_distance(*c) - 3.0 * dom.h);
        for e in &centers[..j] {
            r0 = r0.min(0.499 * (c[0] - e[0]).hypot(c[1] - e[1]));
        }
    }
    let mut out = Vec::new();
    let mut r = r0;
    while r >= 3.0 * dom.h * (1.0 - 1e-12) {
        out.push(r);
        r *= 0.5;
    }
    if out.is_empty() {
        return Err(Error::TooCoarse(format!(
            "no excision radius between 3h = {} and r0 = {r0}",
            3.0 * dom.h
        )));
    }
    Ok(out)
}

/// One r-limit over nodal inner data `psi` (used as lower obstacle and as
/// the values on excised nodes).
fn r_limit(
    base: &GridDomain,
    cfg: &SolveConfig,
    centers: &[[f64; 2]],
    psi: &[f64],
    schedule: &[f64],
    report: &mut MonotonicityReport,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut prev: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    for &r in schedule {
        let dom = base.perforate(centers, r)?;
        let mut values: Vec<f64> = (0..dom.node_count())
            .map(|idx| match dom.class(idx) {
                NodeClass::Exterior => f64::NAN,
                NodeClass::OuterBand => dom.band_value(idx),
                NodeClass::InnerDisk(_) => psi[idx],
                NodeClass::Interior => match &prev {
                    Some(p) => p[idx].max(psi[idx]),
                    None => psi[idx],
                },
            })
            .collect();
        let stats = relax(&dom, cfg, &mut values, Some(psi))?;
        history.extend(stats.history);
        if let Some(p) = &prev {
            report.steps += 1;
            for &n in dom.interior_nodes() {
                let idx = n as usize;
                let (a, b) = (p[idx], values[idx]);
                if a.is_finite() && b.is_finite() {
                    let drop = a - b;
                    report.worst_drop = report.worst_drop.max(drop);
                    if drop > cfg.tol_mono {
                        report.violations += 1;
                    }
                }
            }
        }
        prev = Some(values);
    }
    Ok((prev.expect("schedule is non-empty"), history))
}

/// r-limit over nodal inner data `psi` on an unperforated domain; the field
/// lives on the domain perforated at the last radius.
pub fn solve_r_limit(
    base: &GridDomain,
    cfg: &SolveConfig,
    centers: &[[f64; 2]],
    psi: &[f64],
    schedule: &[f64],
) -> Result<SolutionField> {
    if psi.len() != base.node_count() {
        return Err(Error::DimensionMismatch {
            expected: base.node_count(),
            got: psi.len(),
        });
    }
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty r schedule".into()));
    }
    let mut report = MonotonicityReport::default();
    let (values, history) = r_limit(base, cfg, centers, psi, schedule, &mut report)?;
    Ok(SolutionField {
        domain: Arc::new(base.perforate(centers, *schedule.last().unwrap())?),
        values,
        residual_history: history,
        r_schedule: schedule.to_vec(),
        monotonicity: Some(report),
    })
}

fn check_sandwich(
    dom: &GridDomain,
    values: &[f64],
    psi: &[f64],
    upper: &[f64],
    tol: f64,
    report: &mut MonotonicityReport,
) {
    for &n in dom.interior_nodes() {
        let idx = n as usize;
        let v = values[idx];
        if !v.is_finite() {
            continue;
        }
        let lo = psi[idx] - v;
        if lo.is_finite() {
            report.lower_excess = report.lower_excess.max(lo);
            if lo > tol {
                report.sandwich_violations += 1;
            }
        }
        let hi = v - upper[idx];
        if hi.is_finite() {
            report.upper_excess = report.upper_excess.max(hi);
            if hi > tol {
                report.sandwich_violations += 1;
            }
        }
    }
}

fn nodal<F: ScalarField + ?Sized>(dom: &GridDomain, f: &F) -> Vec<f64> {
    (0..dom.node_count())
        .map(|idx| match dom.class(idx) {
            NodeClass::Exterior => f64::NAN,
            _ => f.eval(&dom.coords(idx)),
        })
        .collect()
}

/// The r-limit `H = lim H̄_r` for polar singularities, with inner data
/// `ψ = Σ Θ_j K_p(· - x_j)` (classic normalization, `p` the Riesz
/// characteristic) shifted so that `max_{∂Ω}(ψ - φ) = 0`.
pub fn perron_limit(
    domain: &Arc<GridDomain>,
    cfg: &SolveConfig,
    singularities: &[Singularity],
) -> Result<SolutionField> {
    let p = cfg.spec.riesz_characteristic();
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::UnsupportedOperator(format!(
            "the polar r-limit needs a finite Riesz characteristic >= 2, got {p}"
        )));
    }
    if singularities.is_empty() {
        return Err(Error::InvalidInput("no singularities given".into()));
    }
    let base = domain.unperforate();
    let terms: Vec<(f64, Vec<f64>)> = singularities
        .iter()
        .map(|s| (s.theta, s.center.to_vec()))
        .collect();
    let raw = kernel_sum(&terms, p, Normalization::Classic, 0.0)?;
    let mut excess = f64::NEG_INFINITY;
    for c in 0..base.crossing_count() {
        let q = base.crossing_point(c as u32);
        excess = excess.max(raw.eval(&q) - base.crossing_value(c as u32));
    }
    let psi_fn = raw.shifted(-excess);
    let psi = nodal(&base, &psi_fn);
    let centers: Vec<[f64; 2]> = singularities.iter().map(|s| s.center).collect();
    let schedule = default_r_schedule(&base, cfg, &centers)?;

    let mut report = MonotonicityReport::default();
    if singularities.len() >= 2 && !cfg.spec.is_convex() {
        report.notes.push("multi-pole run with a non-convex kind: kernel-sum subharmonicity unverified".into());
        let probe = SolutionField::from_fn(Arc::new(base.clone()), &psi_fn);
        if let Ok(res) = subharmonic_residual(&cfg.spec, &probe) {
            report.notes.push(format!("psi_subharmonic_residual={res:e}"));
        }
    }
    let base_arc = Arc::new(base.clone());
    let dp = solve_dirichlet(&base_arc, cfg, None)?;
    let (values, history) = r_limit(&base, cfg, &centers, &psi, &schedule, &mut report)?;
    check_sandwich(&base, &values, &psi, &dp.values, cfg.tol_mono, &mut report);

    let r0 = schedule[0];
    for s in singularities {
        let k = KernelSpec::new(p, Normalization::Classic, &s.center)?.with_theta(s.theta);
        let mut c = f64::NEG_INFINITY;
        for idx in 0..values.len() {
            let x = base.coords(idx);
            let d = k.distance(&x);
            if d > 0.0 && d <= r0 && values[idx].is_finite() {
                c = c.max(values[idx] - k.eval(&x));
            }
        }
        report.pole_constants.push(c);
    }
    let last_dom = Arc::new(base.perforate(&centers, *schedule.last().unwrap())?);
    Ok(SolutionField {
        domain: last_dom,
        values,
        residual_history: history,
        r_schedule: schedule,
        monotonicity: Some(report),
    })
}

/// Log-spaced radii from `r_hi` down to `r_lo`.
pub fn log_radii(r_hi: f64, r_lo: f64, count: usize) -> Vec<f64> {
    let count = count.max(3);
    (0..count)
        .map(|i| r_hi * (r_lo / r_hi).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Density radii for a discrete field: from `r0` down to `5h`.
pub fn field_density_radii(dom: &GridDomain, r0: f64, count: usize) -> Result<Vec<f64>> {
    let lo = 5.0 * dom.h;
    if !(r0 > lo) {
        return Err(Error::TooCoarse(format!("density needs r0 = {r0} > 5h = {lo}")));
    }
    Ok(log_radii(r0, lo, count))
}

#[derive(Debug, Clone)]
pub struct GreenReport {
    pub field: SolutionField,
    pub density: DensityReport,
    /// Largest value over active nodes (should be `≤ 0`).
    pub max_interior: f64,
}

/// Nonlinear Green's function with pole `x0`, density `Θ` and zero outer data.
pub fn green_function(
    domain: &Arc<GridDomain>,
    cfg: &SolveConfig,
    x0: [f64; 2],
    theta: f64,
) -> Result<GreenReport> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("density {theta} must be > 0")));
    }
    let mut base = domain.unperforate();
    base.set_boundary_data(&|_: &[f64]| 0.0);
    let base = Arc::new(base);
    let field = perron_limit(&base, cfg, &[Singularity { center: x0, theta }])?;
    let p = cfg.spec.riesz_characteristic();
    let reference = KernelSpec::new(p, Normalization::Classic, &x0)?;
    let radii = field_density_radii(&base, field.r_schedule[0], cfg.density_radii)?;
    let density = density_estimate(&field, &reference, &radii)?;
    let max_interior = base
        .active_slots()
        .into_iter()
        .map(|s| field.values[base.interior_nodes()[s] as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GreenReport {
        field,
        density,
        max_interior,
    })
}

/// Finite-case family `H^t` and its density curve `f(t)`.
#[derive(Debug, Clone)]
pub struct FiniteFamilyResult {
    pub t_values: Vec<f64>,
    pub fields: Vec<SolutionField>,
    pub f_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub densities: Vec<DensityReport>,
    /// `H⁰(x₀)`.
    pub h0_center: f64,
    /// Per `t`, number of nodes with `ψ̲_t > H^t + tol`.
    pub lower_violations: Vec<usize>,
    /// Per `t`, number of nodes with `H^t > h̄_t + 0.01 (1 + t)`.
    pub upper_violations: Vec<usize>,
    /// Per `t`, `max(ψ̲_t - H^t)` over nodes of the closed domain.
    pub lower_excess: Vec<f64>,
    /// Per `t`, `max(H^t - h̄_t)`.
    pub upper_excess: Vec<f64>,
    pub diagnostics: Vec<String>,
}

/// Normalized kernel `h` with `h(x₀) = 0` and `sup_{∂Ω} h = 1`, plus `inf_{∂Ω} h`.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    pub kernel: KernelSpec,
    pub inf_boundary: f64,
}

pub fn finite_kernel(dom: &GridDomain, p: f64, x0: [f64; 2]) -> Result<FiniteKernel> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::UnsupportedOperator(format!("finite case needs 1 < p < 2, got {p}")));
    }
    let k = KernelSpec::new(p, Normalization::Classic, &x0)?;
    let f = |q: [f64; 2]| k.eval(&q);
    let (sup, _) = dom.shape.boundary_sup(f, 2048);
    let (inf, _) = dom.shape.boundary_inf(f, 2048);
    let kernel = k.with_theta(1.0 / sup);
    Ok(FiniteKernel {
        kernel,
        inf_boundary: inf / sup,
    })
}

fn sup_boundary_data(dom: &GridDomain) -> f64 {
    (0..dom.crossing_count())
        .map(|c| dom.crossing_value(c as u32))
        .fold(f64::NEG_INFINITY, f64::max)
}

struct FiniteContext {
    base: GridDomain,
    h0: Vec<f64>,
    h0_center: f64,
    hk: FiniteKernel,
    hvals: Vec<f64>,
    schedule: Vec<f64>,
    radii: Vec<f64>,
    sup_phi: f64,
    x0: [f64; 2],
}

fn finite_context(domain: &Arc<GridDomain>, cfg: &SolveConfig, x0: [f64; 2]) -> Result<FiniteContext> {
    let p = cfg.spec.riesz_characteristic();
    let base = domain.unperforate();
    let hk = finite_kernel(&base, p, x0)?;
    let x0_node = base
        .nearest_node(x0)
        .ok_or_else(|| Error::Geometry(format!("x0 = {x0:?} is off the grid")))?;
    if base.class(x0_node) != NodeClass::Interior {
        return Err(Error::Geometry(format!("x0 = {x0:?} is not interior")));
    }
    let h0_field = solve_dirichlet(&Arc::new(base.clone()), cfg, None)?;
    let h0 = h0_field.values;
    let h0_center = h0_field_value(&base, &h0, x0);
    let hvals = nodal(&base, &hk.kernel);
    let schedule = default_r_schedule(&base, cfg, &[x0])?;
    let radii = field_density_radii(&base, schedule[0], cfg.density_radii)?;
    let sup_phi = sup_boundary_data(&base);
    Ok(FiniteContext {
        base,
        h0,
        h0_center,
        hk,
        hvals,
        schedule,
        radii,
        sup_phi,
        x0,
    })
}

fn h0_field_value(dom: &GridDomain, values: &[f64], x: [f64; 2]) -> f64 {
    let f = SolutionField {
        domain: Arc::new(dom.clone()),
        values: values.to_vec(),
        residual_history: Vec::new(),
        r_schedule: Vec::new(),
        monotonicity: None,
    };
    f.interpolate(x)
}

struct FiniteMember {
    field: SolutionField,
    f: f64,
    lambda: f64,
    density: DensityReport,
    lower_violations: usize,
    upper_violations: usize,
    lower_excess: f64,
    upper_excess: f64,
}

fn finite_member(ctx: &FiniteContext, cfg: &SolveConfig, t: f64) -> Result<FiniteMember> {
    let base = &ctx.base;
    let psi: Vec<f64> = ctx
        .h0
        .iter()
        .zip(&ctx.hvals)
        .map(|(a, h)| a + t * (h - 1.0))
        .collect();
    let mut report = MonotonicityReport::default();
    let (values, history) = if t == 0.0 {
        (ctx.h0.clone(), Vec::new())
    } else {
        r_limit(base, cfg, &[ctx.x0], &psi, &ctx.schedule, &mut report)?
    };
    let lambda = (ctx.sup_phi - ctx.h0_center + t * (1.0 - ctx.hk.inf_boundary)) / ctx.hk.inf_boundary;
    let tol_lower = cfg.tol_mono.max(cfg.rel_tol * 10.0);
    // h̄_t is F-harmonic only up to the consistency error of the scheme
    let tol_upper = BOUND_SLACK * (1.0 + t);
    let (mut lower, mut upper) = (0, 0);
    let (mut lower_excess, mut upper_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &n in base.interior_nodes() {
        let idx = n as usize;
        let v = values[idx];
        if !v.is_finite() {
            continue;
        }
        lower_excess = lower_excess.max(psi[idx] - v);
        if psi[idx] > v + tol_lower {
            lower += 1;
        }
        let hbar = lambda * ctx.hvals[idx] + ctx.h0_center + t * (ctx.hvals[idx] - 1.0);
        upper_excess = upper_excess.max(v - hbar);
        if v > hbar + tol_upper {
            upper += 1;
        }
    }
    let dom = if t == 0.0 {
        Arc::new(base.clone())
    } else {
        Arc::new(base.perforate(&[ctx.x0], *ctx.schedule.last().unwrap())?)
    };
    let field = SolutionField {
        domain: dom,
        values,
        residual_history: history,
        r_schedule: if t == 0.0 { Vec::new() } else { ctx.schedule.clone() },
        monotonicity: if t == 0.0 { None } else { Some(report) },
    };
    let density = density_estimate(&field, &ctx.hk.kernel, &ctx.radii)?;
    Ok(FiniteMember {
        f: density.theta_hat,
        field,
        lambda,
        density,
        lower_violations: lower,
        upper_violations: upper,
        lower_excess,
        upper_excess,
    })
}

/// Builds `H^t` for each `t` (independently, in parallel) and measures
/// `f(t)`, the density of `H^t` at `x₀` relative to the normalized kernel `h`.
pub fn finite_family(
    domain: &Arc<GridDomain>,
    cfg: &SolveConfig,
    x0: [f64; 2],
    t_list: &[f64],
) -> Result<FiniteFamilyResult> {
    if t_list.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("t values must be finite and >= 0".into()));
    }
    let ctx = finite_context(domain, cfg, x0)?;
    let mut diagnostics = Vec::new();
    if !cfg.spec.is_convex() {
        let probe = SolutionField {
            domain: Arc::new(ctx.base.clone()),
            values: ctx.h0.iter().zip(&ctx.hvals).map(|(a, h)| a + h).collect(),
            residual_history: Vec::new(),
            r_schedule: Vec::new(),
            monotonicity: None,
        };
        let res = subharmonic_residual(&cfg.spec, &probe)?;
        diagnostics.push(format!("non-convex kind: min G[H0 + h] = {res:e}"));
    }
    let members: Vec<Result<FiniteMember>> = t_list.par_iter().map(|&t| finite_member(&ctx, cfg, t)).collect();
    let mut out = FiniteFamilyResult {
        t_values: t_list.to_vec(),
        fields: Vec::new(),
        f_values: Vec::new(),
        lambda_values: Vec::new(),
        densities: Vec::new(),
        h0_center: ctx.h0_center,
        lower_violations: Vec::new(),
        upper_violations: Vec::new(),
        lower_excess: Vec::new(),
        upper_excess: Vec::new(),
        diagnostics,
    };
    for (t, m) in t_list.iter().zip(members) {
        let m = m.map_err(|e| Error::InvalidInput(format!("t = {t}: {e}")))?;
        out.fields.push(m.field);
        out.f_values.push(m.f);
        out.lambda_values.push(m.lambda);
        out.densities.push(m.density);
        out.lower_violations.push(m.lower_violations);
        out.upper_violations.push(m.upper_violations);
        out.lower_excess.push(m.lower_excess);
        out.upper_excess.push(m.upper_excess);
    }
    Ok(out)
}

/// Verdicts on a sampled density curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveVerdicts {
    pub f0: bool,
    pub superlinear: bool,
    pub concave: bool,
    pub upper_bound: bool,
    /// Largest `f(t) - t`.
    pub max_gap: f64,
}

/// Checks `|f(0)| ≤ tol`, `f(s) + (t - s) ≤ f(t) + tol`, midpoint concavity
/// and `f(t) ≤ t + λ(t) + tol` on the samples (sorted by `t`).
pub fn curve_verdicts(t: &[f64], f: &[f64], lambda: &[f64], tol: f64) -> CurveVerdicts {
    let mut idx: Vec<usize> = (0..t.len()).collect();
    idx.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    let f0 = idx
        .iter()
        .find(|&&i| t[i] == 0.0)
        .map(|&i| f[i].abs() <= tol)
        .unwrap_or(true);
    let mut superlinear = true;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a..] {
            if f[i] + (t[j] - t[i]) > f[j] + tol {
                superlinear = false;
            }
        }
    }
    let mut concave = true;
    for (a, &i) in idx.iter().enumerate() {
        for &k in &idx[a + 1..] {
            let mid = 0.5 * (t[i] + t[k]);
            if let Some(&j) = idx.iter().find(|&&j| (t[j] - mid).abs() <= 1e-12 * (1.0 + mid)) {
                if 0.5 * (f[i] + f[k]) > f[j] + tol {
                    concave = false;
                }
            }
        }
    }
    let upper_bound = (0..t.len()).all(|i| f[i] <= t[i] + lambda[i] + tol);
    let max_gap = (0..t.len()).map(|i| f[i] - t[i]).fold(f64::NEG_INFINITY, f64::max);
    CurveVerdicts {
        f0,
        superlinear,
        concave,
        upper_bound,
        max_gap,
    }
}

#[derive(Debug, Clone)]
pub struct PrescribedDensity {
    pub field: SolutionField,
    pub t: f64,
    pub density: f64,
    pub h0_center: f64,
    /// `(t, f(t))` pairs evaluated during the search.
    pub curve: Vec<(f64, f64)>,
}

/// Finds `t` with `f(t) = Θ` by bracketing and bisection and returns `H^t`.
pub fn prescribe_density(
    domain: &Arc<GridDomain>,
    cfg: &SolveConfig,
    x0: [f64; 2],
    theta: f64,
) -> Result<PrescribedDensity> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidInput(format!("target density {theta} must be >= 0")));
    }
    let ctx = finite_context(domain, cfg, x0)?;
    let tol = 0.02 * (1.0 + theta);
    let t_max = 10.0 * theta + 10.0;
    let mut curve = Vec::new();
    let eval = |t: f64, curve: &mut Vec<(f64, f64)>| -> Result<FiniteMember> {
        let m = finite_member(&ctx, cfg, t)?;
        curve.push((t, m.f));
        Ok(m)
    };
    let done = |m: FiniteMember, t: f64, curve: Vec<(f64, f64)>| PrescribedDensity {
        field: m.field,
        t,
        density: m.f,
        h0_center: ctx.h0_center,
        curve,
    };
    if theta == 0.0 {
        let m = eval(0.0, &mut curve)?;
        return Ok(done(m, 0.0, curve));
    }
    let (mut lo, mut hi) = (0.0, theta.min(t_max));
    let mut m_hi = eval(hi, &mut curve)?;
    while m_hi.f < theta - tol {
        if (m_hi.f - theta).abs() <= tol {
            break;
        }
        lo = hi;
        if hi >= t_max {
            return Err(Error::BracketNotFound { target: theta, t_max, curve });
        }
        hi = (2.0 * hi).min(t_max);
        m_hi = eval(hi, &mut curve)?;
    }
    if (m_hi.f - theta).abs() <= tol {
        return Ok(done(m_hi, hi, curve));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let m = eval(mid, &mut curve)?;
        if (m.f - theta).abs() <= tol {
            return Ok(done(m, mid, curve));
        }
        if m.f < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BracketNotFound { target: theta, t_max, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `max_active(v + w) - max_boundary(v + w)`.
    pub excess: f64,
    pub interior_max: f64,
    pub boundary_max: f64,
    pub holds: bool,
}

/// Discrete comparison: with `v` F-subharmonic and `w` F̃-subharmonic on the
/// same geometry, `max(v + w)` over active nodes must not exceed its max over
/// the fixed data by more than `tol_cmp`. Subharmonicity is checked through
/// the local corrections (value units) against `tol_pre`.
pub fn comparison_check(
    v: &SolutionField,
    w: &SolutionField,
    spec: &SubequationSpec,
    tol_pre: f64,
    tol_cmp: f64,
) -> Result<ComparisonReport> {
    let (dv, dw) = (&v.domain, &w.domain);
    if dv.classes() != dw.classes() || dv.h != dw.h || dv.crossing_count() != dw.crossing_count() {
        return Err(Error::Precondition("fields live on different geometries".into()));
    }
    let op = spec.operator_2d()?;
    if let Some((s, r)) = normalized_residuals(&op, dv, &v.values, false)
        .into_iter()
        .find(|&(_, r)| r < -tol_pre)
    {
        return Err(Error::Precondition(format!(
            "v is not subharmonic at node {} (correction {r:e})",
            dv.interior_nodes()[s]
        )));
    }
    if let Some((s, r)) = normalized_residuals(&op, dw, &w.values, true)
        .into_iter()
        .find(|&(_, r)| r > tol_pre)
    {
        return Err(Error::Precondition(format!(
            "w is not dual-subharmonic at node {} (correction {r:e})",
            dw.interior_nodes()[s]
        )));
    }
    let mut boundary_max = f64::NEG_INFINITY;
    for c in 0..dv.crossing_count() {
        boundary_max = boundary_max.max(dv.crossing_value(c as u32) + dw.crossing_value(c as u32));
    }
    let mut interior_max = f64::NEG_INFINITY;
    for &n in dv.interior_nodes() {
        let n = n as usize;
        let s = v.values[n] + w.values[n];
        match dv.class(n) {
            NodeClass::Interior => interior_max = interior_max.max(s),
            NodeClass::InnerDisk(_) if s.is_finite() => boundary_max = boundary_max.max(s),
            _ => {}
        }
    }
    let excess = interior_max - boundary_max;
    Ok(ComparisonReport {
        excess,
        interior_max,
        boundary_max,
        holds: excess <= tol_cmp,
    })
}

/// Key=value summary of a field.
pub fn summary_lines(field: &SolutionField, extra: &[(String, String)]) -> String {
    let mut s = String::new();
    let d = &field.domain;
    let _ = writeln!(s, "nx={}", d.nx);
    let _ = writeln!(s, "ny={}", d.ny);
    let _ = writeln!(s, "h={:e}", d.h);
    let _ = writeln!(s, "shape={}", d.shape);
    let _ = writeln!(s, "iterations={}", field.residual_history.len());
    let _ = writeln!(
        s,
        "final_residual={:e}",
        field.residual_history.last().copied().unwrap_or(0.0)
    );
    if !field.r_schedule.is_empty() {
        let r: Vec<String> = field.r_schedule.iter().map(|r| format!("{r:e}")).collect();
        let _ = writeln!(s, "r_schedule={}", r.join(","));
    }
    if let Some(m) = &field.monotonicity {
        let _ = writeln!(s, "monotonicity_steps={}", m.steps);
        let _ = writeln!(s, "monotonicity_worst_drop={:e}", m.worst_drop);
        let _ = writeln!(s, "monotonicity_violations={}", m.violations);
        let _ = writeln!(s, "sandwich_lower_excess={:e}", m.lower_excess);
        let _ = writeln!(s, "sandwich_upper_excess={:e}", m.upper_excess);
        let _ = writeln!(s, "sandwich_violations={}", m.sandwich_violations);
        for (j, c) in m.pole_constants.iter().enumerate() {
            let _ = writeln!(s, "pole_constant_{j}={c:e}");
        }
        for n in &m.notes {
            let _ = writeln!(s, "note={n}");
        }
    }
    for (k, v) in extra {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}
