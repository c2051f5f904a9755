//! Values prescribable at finitely many singular points: kernel matrices, the
//! cap constant `C(γ)`, the value cone and value-problem solves.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{GridDomain, NodeClass, SolutionField};
use crate::solver::{
    default_r_schedule, field_density_radii, prescribe_density, solve_r_limit, SolveConfig,
};
use crate::subeq::SubequationSpec;

pub const MAX_POINTS: usize = 4;
pub const CAP_SAMPLES: usize = 512;
const SCAN_STEPS: usize = 4096;
const FACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ValueProblem {
    pub points: Vec<[f64; 2]>,
    pub p: f64,
    pub domain: Arc<GridDomain>,
    pub spec: SubequationSpec,
}

impl ValueProblem {
    /// Validates the points (distinct grid nodes, `≥ 6h` apart and from the
    /// boundary) and takes `p` from the spec.
    pub fn new(domain: Arc<GridDomain>, spec: SubequationSpec, points: Vec<[f64; 2]>) -> Result<Self> {
        let p = spec.riesz_characteristic();
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::UnsupportedOperator(format!("value problems need 1 < p < 2, got {p}")));
        }
        if points.is_empty() || points.len() > MAX_POINTS {
            return Err(Error::InvalidInput(format!("need 1 to {MAX_POINTS} points, got {}", points.len())));
        }
        let h = domain.h;
        for (j, x) in points.iter().enumerate() {
            let node = domain
                .nearest_node(*x)
                .ok_or_else(|| Error::Geometry(format!("point {x:?} is off the grid")))?;
            let c = domain.coords(node);
            if (c[0] - x[0]).hypot(c[1] - x[1]) > 1e-9 * h {
                return Err(Error::Geometry(format!("point {x:?} is not a grid node")));
            }
            if domain.class(node) == NodeClass::Exterior || domain.shape.level(*x) >= 0.0 {
                return Err(Error::Geometry(format!("point {x:?} is outside the domain")));
            }
            if domain.shape.boundary_distance(*x) < 6.0 * h {
                return Err(Error::Geometry(format!("point {x:?} is closer than 6h to the boundary")));
            }
            for y in &points[..j] {
                let d = (x[0] - y[0]).hypot(x[1] - y[1]);
                if d == 0.0 {
                    return Err(Error::InvalidInput(format!("coincident points at {x:?}")));
                }
                if d < 6.0 * h {
                    return Err(Error::Geometry(format!("points {x:?} and {y:?} are closer than 6h")));
                }
            }
        }
        Ok(Self {
            points,
            p,
            domain,
            spec,
        })
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    fn power(&self, x: [f64; 2], j: usize) -> f64 {
        let c = self.points[j];
        (x[0] - c[0]).hypot(x[1] - c[1]).powf(2.0 - self.p)
    }

    /// `F_γ(x) = Σ γ_j |x - x_j|^{2-p}`.
    pub fn f_gamma(&self, gamma: &[f64], x: [f64; 2]) -> f64 {
        gamma.iter().enumerate().map(|(j, g)| g * self.power(x, j)).sum()
    }

    /// `h_{γ,C} = F_γ + C`.
    pub fn h_gamma(&self, gamma: &[f64], c: f64, x: [f64; 2]) -> f64 {
        self.f_gamma(gamma, x) + c
    }
}

fn check_gamma(vp: &ValueProblem, gamma: &[f64]) -> Result<()> {
    if gamma.len() != vp.k() {
        return Err(Error::DimensionMismatch {
            expected: vp.k(),
            got: gamma.len(),
        });
    }
    if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidInput(format!("γ = {gamma:?} must be componentwise >= 0")));
    }
    Ok(())
}

/// `C(γ) = -sup_{∂Ω} F_γ`.
pub fn cap_c(vp: &ValueProblem, gamma: &[f64]) -> Result<f64> {
    check_gamma(vp, gamma)?;
    Ok(cap_c_samples(vp, gamma, CAP_SAMPLES))
}

fn cap_c_samples(vp: &ValueProblem, gamma: &[f64], samples: usize) -> f64 {
    let (sup, _) = vp.domain.shape.boundary_sup(|x| vp.f_gamma(gamma, x), samples);
    -sup
}

/// Kernel matrix `a_ij = |x_i - x_j|^{2-p}` (zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub k: usize,
    pub entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    fn mat(&self) -> Mat<f64> {
        Mat::from_fn(self.k, self.k, |i, j| self.get(i, j))
    }

    pub fn det(&self) -> f64 {
        self.mat().determinant()
    }

    /// Largest entry, the natural scale for `det`.
    pub fn scale(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// 2-norm condition number.
    pub fn condition(&self) -> f64 {
        let s = self.mat().singular_values().unwrap_or_default();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    pub fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.get(i, j) * gamma[j]).sum())
            .collect()
    }

    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.mat();
        let lu = m.partial_piv_lu();
        let b = Mat::from_fn(self.k, 1, |i, _| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..self.k).map(|i| x[(i, 0)]).collect();
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

pub fn kernel_matrix(vp: &ValueProblem) -> KernelMatrix {
    let k = vp.k();
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                entries[i * k + j] = vp.power(vp.points[i], j);
            }
        }
    }
    KernelMatrix { k, entries }
}

/// `v = A γ + C·1`; requires `C ≤ C(γ)`.
pub fn value_of(vp: &ValueProblem, gamma: &[f64], c: f64) -> Result<Vec<f64>> {
    let cap = cap_c(vp, gamma)?;
    if c > cap + 1e-12 * (1.0 + cap.abs()) {
        return Err(Error::InvalidInput(format!("C = {c} exceeds the cap C(γ) = {cap}")));
    }
    let a = kernel_matrix(vp);
    Ok(a.apply(gamma).into_iter().map(|x| x + c).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeWitness {
    pub gamma: Vec<f64>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Witness with the smallest feasible `C` (tight: `C = C(γ)` unless on a face).
    pub witness: Option<ConeWitness>,
    /// `(C, feasible)` pairs of the scan.
    pub trace: Vec<(f64, bool)>,
}

fn feasible(vp: &ValueProblem, a: &KernelMatrix, v: &[f64], c: f64) -> Option<Vec<f64>> {
    let rhs: Vec<f64> = v.iter().map(|x| x - c).collect();
    let mut gamma = a.solve(&rhs)?;
    // closed cone: faces γ_j = 0 are admitted up to roundoff
    let slack = FACE_TOL * (1.0 + gamma.iter().map(|g| g.abs()).fold(0.0, f64::max));
    if gamma.iter().any(|g| *g < -slack) {
        return None;
    }
    for g in &mut gamma {
        *g = g.max(0.0);
    }
    let cap = cap_c_samples(vp, &gamma, CAP_SAMPLES);
    (c <= cap + FACE_TOL * (1.0 + cap.abs())).then_some(gamma)
}

/// Decides `v ∈ 𝒱` by scanning `C` downward from `min v` and solving
/// `A γ = v - C·1`. Feasible `C` form an interval whose lower end is refined
/// by bisection.
pub fn in_cone(vp: &ValueProblem, v: &[f64]) -> Result<Membership> {
    if v.len() != vp.k() {
        return Err(Error::DimensionMismatch {
            expected: vp.k(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("values must be finite".into()));
    }
    if vp.k() == 1 {
        // A = [0]: C = v and the largest admissible γ is -v / sup|x - x₁|^{2-p}
        let c = v[0];
        if c > 0.0 {
            return Ok(Membership {
                member: false,
                witness: None,
                trace: vec![(c, false)],
            });
        }
        let sup = -cap_c_samples(vp, &[1.0], CAP_SAMPLES);
        return Ok(Membership {
            member: true,
            witness: Some(ConeWitness {
                gamma: vec![-c / sup],
                c,
            }),
            trace: vec![(c, true)],
        });
    }
    let a = kernel_matrix(vp);
    let top = v.iter().copied().fold(f64::INFINITY, f64::min);
    let span = 100.0 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let step = span / SCAN_STEPS as f64;
    let mut trace = Vec::new();
    let mut first = None;
    let mut last_ok = None;
    let mut below = None;
    for i in 0..=SCAN_STEPS {
        let c = top - i as f64 * step;
        let ok = feasible(vp, &a, v, c).is_some();
        trace.push((c, ok));
        if ok {
            first.get_or_insert(c);
            last_ok = Some(c);
        } else if first.is_some() {
            below = Some(c);
            break;
        }
    }
    let Some(mut lo_ok) = last_ok else {
        return Ok(Membership {
            member: false,
            witness: None,
            trace,
        });
    };
    // the feasible set is an interval; refine its lower end (tight witness)
    if let Some(mut bad) = below {
        for _ in 0..200 {
            let mid = 0.5 * (lo_ok + bad);
            if feasible(vp, &a, v, mid).is_some() {
                lo_ok = mid;
            } else {
                bad = mid;
            }
            if lo_ok - bad <= 1e-15 * (1.0 + lo_ok.abs()) {
                break;
            }
        }
    }
    let gamma = feasible(vp, &a, v, lo_ok).expect("refined end stays feasible");
    Ok(Membership {
        member: true,
        witness: Some(ConeWitness { gamma, c: lo_ok }),
        trace,
    })
}

/// `V_j = F(x_j) - sup_{∂Ω}|x - x_j|^{2-p}·1`.
pub fn generators(vp: &ValueProblem) -> Vec<Vec<f64>> {
    let a = kernel_matrix(vp);
    (0..vp.k())
        .map(|j| {
            let mut e = vec![0.0; vp.k()];
            e[j] = 1.0;
            let cap = cap_c_samples(vp, &e, CAP_SAMPLES);
            (0..vp.k()).map(|i| a.get(i, j) + cap).collect()
        })
        .collect()
}

/// `C(γ + γ') ≥ C(γ) + C(γ')` up to `1e-9` relative slack.
pub fn superadditivity_check(vp: &ValueProblem, gamma: &[f64], gamma2: &[f64]) -> Result<bool> {
    check_gamma(vp, gamma2)?;
    let sum: Vec<f64> = gamma.iter().zip(gamma2).map(|(a, b)| a + b).collect();
    let (c1, c2, c12) = (cap_c(vp, gamma)?, cap_c(vp, gamma2)?, cap_c(vp, &sum)?);
    Ok(c12 >= c1 + c2 - 1e-9 * (1.0 + c12.abs()))
}

#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub field: SolutionField,
    pub witness: ConeWitness,
    /// `H(x_j)`.
    pub values: Vec<f64>,
    /// Largest `|H(x_j) - v_j|`.
    pub value_error: f64,
    /// Largest `|H|` over the outer boundary crossings.
    pub boundary_error: f64,
    /// Per point, `(min, max)` over probe circles of `(H - v_j)/(h - v_j)`.
    pub ratio_bounds: Vec<(f64, f64)>,
    pub lower_ratio_ok: bool,
}

const RATIO_EPS: f64 = 0.1;

/// Runs the r-limit with inner data `h_{γ,C}` (witness from `in_cone`) and
/// zero outer data, then checks the values and the density ratio bounds.
pub fn solve_value_problem(vp: &ValueProblem, cfg: &SolveConfig, v: &[f64]) -> Result<ValueSolution> {
    let m = in_cone(vp, v)?;
    let witness = m
        .witness
        .ok_or_else(|| Error::Precondition(format!("v = {v:?} is not in the value cone")))?;
    let mut base = vp.domain.unperforate();
    base.set_boundary_data(&|_: &[f64]| 0.0);
    let hfun = |x: &[f64]| vp.h_gamma(&witness.gamma, witness.c, [x[0], x[1]]);
    let psi: Vec<f64> = (0..base.node_count())
        .map(|idx| match base.class(idx) {
            NodeClass::Exterior => f64::NAN,
            _ => hfun(&base.coords(idx)),
        })
        .collect();
    let schedule = default_r_schedule(&base, cfg, &vp.points)?;
    let field = solve_r_limit(&base, cfg, &vp.points, &psi, &schedule)?;
    let values: Vec<f64> = vp
        .points
        .iter()
        .map(|x| field.values[base.nearest_node(*x).expect("validated")])
        .collect();
    let value_error = values
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let boundary_error = (0..base.crossing_count())
        .map(|c| base.crossing_value(c as u32).abs())
        .fold(0.0, f64::max);
    let radii = field_density_radii(&base, schedule[0], cfg.density_radii)?;
    let mut ratio_bounds = Vec::new();
    for (j, x) in vp.points.iter().enumerate() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &rho in &radii {
            for s in 0..64 {
                let a = std::f64::consts::TAU * s as f64 / 64.0;
                let q = [x[0] + rho * a.cos(), x[1] + rho * a.sin()];
                let den = hfun(&q) - v[j];
                if den > 0.0 {
                    let r = (field.interpolate(q) - v[j]) / den;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        ratio_bounds.push((lo, hi));
    }
    let lower_ratio_ok = ratio_bounds.iter().all(|(lo, _)| *lo >= 1.0 - RATIO_EPS);
    Ok(ValueSolution {
        field,
        witness,
        values,
        value_error,
        boundary_error,
        ratio_bounds,
        lower_ratio_ok,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignReport {
    /// `(Θ, t, H(x₀))` per run.
    pub runs: Vec<(f64, f64, f64)>,
    pub all_negative: bool,
    pub decreasing: bool,
}

/// One-point problem with `φ = 0`: the prescribed-density solution has
/// `H(x₀) < 0` for every `Θ > 0`, more negative for larger `Θ`.
pub fn one_point_sign_check(vp: &ValueProblem, cfg: &SolveConfig, thetas: &[f64]) -> Result<SignReport> {
    if vp.k() != 1 {
        return Err(Error::InvalidInput("one-point check needs k = 1".into()));
    }
    let mut base = vp.domain.unperforate();
    base.set_boundary_data(&|_: &[f64]| 0.0);
    let base = Arc::new(base);
    let x0 = vp.points[0];
    let node = base.nearest_node(x0).expect("validated");
    let mut runs = Vec::new();
    for &theta in thetas {
        if !(theta > 0.0) {
            return Err(Error::InvalidInput(format!("Θ = {theta} must be > 0")));
        }
        let pd = prescribe_density(&base, cfg, x0, theta)?;
        runs.push((theta, pd.t, pd.field.values[node]));
    }
    let all_negative = runs.iter().all(|r| r.2 < 0.0);
    let mut sorted = runs.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = sorted.windows(2).all(|w| w[1].2 < w[0].2);
    Ok(SignReport {
        runs,
        all_negative,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, Shape, Stencil};

    fn problem(points: Vec<[f64; 2]>) -> ValueProblem {
        let dom = build_domain(Shape::disk(1.0), 1.0 / 32.0, &|_: &[f64]| 0.0, Stencil::default()).unwrap();
        ValueProblem::new(Arc::new(dom), "kind=minmax n=2 p=1.5".parse().unwrap(), points).unwrap()
    }

    #[test]
    fn cap_examples() {
        let vp = problem(vec![[0.0, 0.0]]);
        assert!((cap_c(&vp, &[1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((cap_c(&vp, &[3.0]).unwrap() + 3.0).abs() < 1e-12);
        let vp = problem(vec![[0.5, 0.0], [-0.5, 0.0]]);
        let g = [1.0, 2.0];
        let coarse = cap_c(&vp, &g).unwrap();
        let fine = cap_c_samples(&vp, &g, 10 * CAP_SAMPLES);
        assert!((coarse - fine).abs() < 1e-9, "{coarse} {fine}");
        let t = 2.5;
        assert!((cap_c(&vp, &[t, 2.0 * t]).unwrap() - t * coarse).abs() < 1e-9);
        assert!(matches!(cap_c(&vp, &[1.0, -0.1]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kernel_matrix_examples() {
        let vp = problem(vec![[0.25, 0.0], [-0.5, 0.0]]);
        let a = kernel_matrix(&vp);
        let d: f64 = 0.75;
        assert_eq!(a.get(0, 0), 0.0);
        assert!((a.get(0, 1) - d.sqrt()).abs() < 1e-15);
        assert!((a.det() + d).abs() < 1e-12);
        let one = problem(vec![[0.0, 0.0]]);
        assert_eq!(kernel_matrix(&one).det(), 0.0);
    }

    #[test]
    fn value_and_membership_examples() {
        let vp = problem(vec![[0.0, 0.0]]);
        assert_eq!(value_of(&vp, &[1.0], -1.0).unwrap(), vec![-1.0]);
        assert!(value_of(&vp, &[1.0], -0.5).is_err());
        assert!(!in_cone(&vp, &[0.1]).unwrap().member);
        let m = in_cone(&vp, &[-1.0]).unwrap();
        let w = m.witness.unwrap();
        assert!((w.gamma[0] - 1.0).abs() < 1e-12 && w.c == -1.0);
        assert_eq!(generators(&vp), vec![vec![-1.0]]);

        let vp = problem(vec![[0.5, 0.0], [-0.5, 0.0]]);
        let cap = cap_c(&vp, &[1.0, 1.0]).unwrap();
        let v = value_of(&vp, &[1.0, 1.0], cap).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-12);
        let v2 = value_of(&vp, &[2.0, 2.0], 2.0 * cap).unwrap();
        assert!((v2[0] - 2.0 * v[0]).abs() < 1e-9);
        let gens = generators(&vp);
        assert!((gens[0][0] - gens[1][1]).abs() < 1e-12 && (gens[0][1] - gens[1][0]).abs() < 1e-12);
        for g in &gens {
            assert!(g.iter().all(|x| *x <= 0.0));
            assert!(in_cone(&vp, g).unwrap().member);
        }
    }

    #[test]
    fn points_are_validated() {
        let dom = Arc::new(build_domain(Shape::disk(1.0), 1.0 / 32.0, &|_: &[f64]| 0.0, Stencil::default()).unwrap());
        let spec: SubequationSpec = "kind=minmax n=2 p=1.5".parse().unwrap();
        let make = |pts: Vec<[f64; 2]>| ValueProblem::new(dom.clone(), spec.clone(), pts);
        assert!(make(vec![[0.01, 0.0]]).is_err());
        assert!(make(vec![[0.0, 0.0], [0.0, 0.0]]).is_err());
        assert!(make(vec![[0.0, 0.0], [0.0625, 0.0]]).is_err());
        assert!(make(vec![[0.96875, 0.0]]).is_err());
        assert!(make(vec![[0.0, 0.0]; 5]).is_err());
        let lap = ValueProblem::new(dom.clone(), "kind=laplace n=2".parse().unwrap(), vec![[0.0, 0.0]]);
        assert!(matches!(lap, Err(Error::UnsupportedOperator(_))));
    }
}
