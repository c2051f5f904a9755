//! Cone subequations `F ⊂ Sym(Rⁿ)` represented by scalar gauges.
//!
//! Each catalog entry carries a gauge `g` with `F = {g ≥ 0}` and
//! `Int F = {g > 0}`. All gauges are functions of the ordered spectrum, so
//! every entry is `O(n)`-invariant and its Riesz characteristic can be read
//! off the diagonal test matrix `diag(-(q-1), 1, ..., 1)`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::symmat::{SymMatrix, UnitVector};

/// Default membership tolerance.
pub const MEMBER_TOL: f64 = 1e-9;

/// Specs only need the spectrum, so they may exceed the matrix cap; matrix
/// evaluation still requires `n ≤ 8`.
pub const MAX_SPEC_DIM: usize = 64;

const CHAR_Q_MAX: f64 = 1e6;
const CHAR_BISECTIONS: usize = 120;

/// Catalog of supported subequations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubequationKind {
    /// `λ_1 + ... + λ_[p] + (p - [p]) λ_[p]+1 ≥ 0`, `1 ≤ p ≤ n`.
    PartialSum { p: f64 },
    /// `A + (δ/n) tr(A) I ≥ 0`.
    DeltaCone { delta: f64 },
    /// `λ_min + (p-1) λ_max ≥ 0`.
    MinMax { p: f64 },
    /// `λ_min + (p-1) λ_2 ≥ 0`.
    MinSecond { p: f64 },
    /// `σ_1 ≥ 0, ..., σ_k ≥ 0`.
    SigmaK { k: usize },
    /// `tr(A^q) ≥ 0` for odd `q`.
    TracePower { q: u32 },
    /// Minimal Pucci operator `λ Σ⁺ + Λ Σ⁻ ≥ 0` (convex).
    Pucci { lambda: f64, cap_lambda: f64 },
    /// Maximal Pucci operator `Λ Σ⁺ + λ Σ⁻ ≥ 0` (not convex).
    PucciMax { lambda: f64, cap_lambda: f64 },
    /// `λ_max ≥ 0`; infinite Riesz characteristic, fails (F3).
    LargestEigenvalue,
}

/// A catalog entry in a fixed ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubequationSpec {
    pub kind: SubequationKind,
    pub n: usize,
}

/// Anything with a degenerate-elliptic gauge on `Sym(Rⁿ)`.
pub trait Gauge {
    fn dim(&self) -> usize;
    fn gauge(&self, a: &SymMatrix) -> Result<f64>;

    fn is_member(&self, a: &SymMatrix, tol: f64) -> Result<bool> {
        Ok(self.gauge(a)? >= -tol)
    }

    /// Membership in the dual `F̃ = ∼(-Int F)`, i.e. `-A ∉ Int F`.
    fn dual_is_member(&self, a: &SymMatrix, tol: f64) -> Result<bool> {
        Ok(self.gauge(&-a)? <= tol)
    }
}

/// The dual subequation, with gauge `A ↦ -g(-A)`.
#[derive(Debug, Clone)]
pub struct Dual<G>(pub G);

impl<G: Gauge> Gauge for Dual<G> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn gauge(&self, a: &SymMatrix) -> Result<f64> {
        Ok(-self.0.gauge(&-a)?)
    }
}

impl Gauge for SubequationSpec {
    fn dim(&self) -> usize {
        self.n
    }
    fn gauge(&self, a: &SymMatrix) -> Result<f64> {
        SubequationSpec::gauge(self, a)
    }
}

impl<G: Gauge + ?Sized> Gauge for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn gauge(&self, a: &SymMatrix) -> Result<f64> {
        (**self).gauge(a)
    }
}

impl SubequationSpec {
    pub fn new(kind: SubequationKind, n: usize) -> Result<Self> {
        if !(2..=MAX_SPEC_DIM).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "dimension {n} outside [2, {MAX_SPEC_DIM}]"
            )));
        }
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match kind {
            SubequationKind::PartialSum { p } if !(1.0..=n as f64).contains(&p) => {
                return bad(format!("partial-sum p = {p} outside [1, {n}]"))
            }
            SubequationKind::DeltaCone { delta } if !(delta >= 0.0 && delta.is_finite()) => {
                return bad(format!("delta = {delta} must be finite and >= 0"))
            }
            SubequationKind::MinMax { p } | SubequationKind::MinSecond { p }
                if !(p >= 1.0 && p.is_finite()) =>
            {
                return bad(format!("p = {p} must be finite and >= 1"))
            }
            SubequationKind::SigmaK { k } if !(1..=n).contains(&k) => {
                return bad(format!("k = {k} outside [1, {n}]"))
            }
            SubequationKind::TracePower { q } if q % 2 == 0 => {
                return bad(format!("trace power q = {q} must be odd"))
            }
            SubequationKind::Pucci { lambda, cap_lambda }
            | SubequationKind::PucciMax { lambda, cap_lambda }
                if !(lambda > 0.0 && lambda <= cap_lambda && cap_lambda.is_finite()) =>
            {
                return bad(format!(
                    "Pucci constants must satisfy 0 < lambda <= Lambda (got {lambda}, {cap_lambda})"
                ))
            }
            _ => {}
        }
        Ok(Self { kind, n })
    }

    /// `P(δ_p)` with `δ_p = n(p-1)/(n-p)`, the largest convex invariant cone of
    /// characteristic `p` (requires `p < n`).
    pub fn delta_cone_for(p: f64, n: usize) -> Result<Self> {
        if !(p >= 1.0 && p < n as f64) {
            return Err(Error::InvalidInput(format!("delta_p needs 1 <= p < n, got p={p}")));
        }
        let nf = n as f64;
        Self::new(
            SubequationKind::DeltaCone {
                delta: nf * (p - 1.0) / (nf - p),
            },
            n,
        )
    }

    pub fn gauge(&self, a: &SymMatrix) -> Result<f64> {
        if a.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: a.dim(),
            });
        }
        match self.kind {
            SubequationKind::SigmaK { k } => {
                let s = a.elementary_symmetric()?;
                Ok(s[..k].iter().copied().fold(f64::INFINITY, f64::min))
            }
            _ => Ok(self.gauge_sorted(&a.eigvals()?)),
        }
    }

    /// Gauge evaluated on an ascending spectrum of length `n`.
    pub fn gauge_sorted(&self, l: &[f64]) -> f64 {
        let n = l.len();
        match self.kind {
            SubequationKind::PartialSum { p } => {
                let whole = (p.floor() as usize).min(n);
                let mut g: f64 = l[..whole].iter().sum();
                if whole < n {
                    g += (p - whole as f64) * l[whole];
                }
                g
            }
            SubequationKind::DeltaCone { delta } => {
                l[0] + delta / n as f64 * l.iter().sum::<f64>()
            }
            SubequationKind::MinMax { p } => l[0] + (p - 1.0) * l[n - 1],
            SubequationKind::MinSecond { p } => l[0] + (p - 1.0) * l[1],
            SubequationKind::SigmaK { k } => {
                let mut e = vec![0.0; n + 1];
                e[0] = 1.0;
                for v in l {
                    for j in (1..=n).rev() {
                        e[j] += v * e[j - 1];
                    }
                }
                e[1..=k].iter().copied().fold(f64::INFINITY, f64::min)
            }
            SubequationKind::TracePower { q } => l.iter().map(|v| v.powi(q as i32)).sum(),
            SubequationKind::Pucci { lambda, cap_lambda } => l
                .iter()
                .map(|&v| if v > 0.0 { lambda * v } else { cap_lambda * v })
                .sum(),
            SubequationKind::PucciMax { lambda, cap_lambda } => l
                .iter()
                .map(|&v| if v > 0.0 { cap_lambda * v } else { lambda * v })
                .sum(),
            SubequationKind::LargestEigenvalue => l[n - 1],
        }
    }

    pub fn is_member(&self, a: &SymMatrix, tol: f64) -> Result<bool> {
        Ok(self.gauge(a)? >= -tol)
    }

    pub fn dual_is_member(&self, a: &SymMatrix, tol: f64) -> Result<bool> {
        Ok(self.gauge(&-a)? <= tol)
    }

    /// Gauge of `diag(-(q-1), 1, ..., 1)`.
    fn test_gauge(&self, q: f64) -> f64 {
        let mut l = vec![1.0; self.n];
        l[0] = -(q - 1.0);
        l.sort_by(f64::total_cmp);
        self.gauge_sorted(&l)
    }

    /// `sup{q : P_{e⊥} - (q-1) P_e ∈ F}` by bisection on `[1, 1e6]`;
    /// `f64::INFINITY` when the test matrix is still in `F` at the top.
    pub fn riesz_characteristic(&self) -> f64 {
        if self.test_gauge(CHAR_Q_MAX) >= 0.0 {
            return f64::INFINITY;
        }
        if self.test_gauge(1.0) < 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (1.0_f64, CHAR_Q_MAX);
        for _ in 0..CHAR_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if self.test_gauge(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Known closed form of the Riesz characteristic, if any.
    pub fn closed_form_characteristic(&self) -> Option<f64> {
        let n = self.n as f64;
        match self.kind {
            SubequationKind::PartialSum { p }
            | SubequationKind::MinMax { p }
            | SubequationKind::MinSecond { p } => Some(p),
            SubequationKind::DeltaCone { delta } => Some(1.0 + delta * (n - 1.0) / (n + delta)),
            SubequationKind::SigmaK { k } => Some(n / k as f64),
            SubequationKind::TracePower { q } => Some(1.0 + (n - 1.0).powf(1.0 / q as f64)),
            SubequationKind::Pucci { lambda, cap_lambda } => {
                Some(1.0 + lambda / cap_lambda * (n - 1.0))
            }
            SubequationKind::PucciMax { lambda, cap_lambda } => {
                Some(1.0 + cap_lambda / lambda * (n - 1.0))
            }
            SubequationKind::LargestEigenvalue => Some(f64::INFINITY),
        }
    }

    /// Condition (F3): `-P_e ∉ F`, tested at the first basis vector.
    pub fn check_f3(&self) -> bool {
        let mut l = vec![0.0; self.n];
        l[0] = -1.0;
        self.gauge_sorted(&l) < 0.0
    }

    /// Whether `gauge(tA) = t gauge(A)` for `t > 0`.
    pub fn gauge_is_homogeneous(&self) -> bool {
        !matches!(
            self.kind,
            SubequationKind::SigmaK { .. } | SubequationKind::TracePower { .. }
        )
    }

    /// Whether the gauge itself is monotone under positive semidefinite
    /// increments. `min σ_j` is not; the set `Σ_k` still is.
    pub fn gauge_is_monotone(&self) -> bool {
        !matches!(self.kind, SubequationKind::SigmaK { k } if k > 1)
    }

    pub fn is_convex(&self) -> bool {
        match self.kind {
            SubequationKind::PartialSum { .. }
            | SubequationKind::DeltaCone { .. }
            | SubequationKind::SigmaK { .. }
            | SubequationKind::Pucci { .. } => true,
            SubequationKind::MinMax { p } => p <= 2.0 && self.n == 2,
            SubequationKind::MinSecond { p } => p <= 2.0,
            SubequationKind::PucciMax { lambda, cap_lambda } => lambda == cap_lambda,
            SubequationKind::TracePower { q } => q == 1,
            SubequationKind::LargestEigenvalue => false,
        }
    }

    /// Degenerate-elliptic operator on `(λ̂_min, λ̂_max)` used by the 2D scheme.
    pub fn operator_2d(&self) -> Result<Operator2d> {
        if self.n != 2 {
            return Err(Error::UnsupportedOperator(format!(
                "stepping needs n = 2, spec has n = {}",
                self.n
            )));
        }
        let lin = |lo: f64, hi: f64| Ok(Operator2d::Linear { lo, hi });
        match self.kind {
            SubequationKind::PartialSum { p } => lin(1.0, p - 1.0),
            SubequationKind::DeltaCone { delta } => lin(1.0 + 0.5 * delta, 0.5 * delta),
            SubequationKind::MinMax { p } | SubequationKind::MinSecond { p } => lin(1.0, p - 1.0),
            SubequationKind::SigmaK { k: 1 } => lin(1.0, 1.0),
            SubequationKind::SigmaK { k: 2 } => lin(1.0, 0.0),
            SubequationKind::Pucci { lambda, cap_lambda } => Ok(Operator2d::Pucci {
                pos: lambda,
                neg: cap_lambda,
            }),
            SubequationKind::PucciMax { lambda, cap_lambda } => Ok(Operator2d::Pucci {
                pos: cap_lambda,
                neg: lambda,
            }),
            other => Err(Error::UnsupportedOperator(format!(
                "{other:?} has no monotone stepping operator"
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SubequationKind::PartialSum { .. } => "partialsum",
            SubequationKind::DeltaCone { .. } => "deltacone",
            SubequationKind::MinMax { .. } => "minmax",
            SubequationKind::MinSecond { .. } => "minsecond",
            SubequationKind::SigmaK { .. } => "sigmak",
            SubequationKind::TracePower { .. } => "tracepower",
            SubequationKind::Pucci { .. } => "pucci",
            SubequationKind::PucciMax { .. } => "puccimax",
            SubequationKind::LargestEigenvalue => "largesteig",
        }
    }
}

/// `G(λ̂_min, λ̂_max)`, nondecreasing in both arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operator2d {
    Linear { lo: f64, hi: f64 },
    /// `Σ_i pos·λ_i⁺ - neg·λ_i⁻` over both eigenvalues.
    Pucci { pos: f64, neg: f64 },
}

impl Operator2d {
    #[inline]
    pub fn eval(&self, lmin: f64, lmax: f64) -> f64 {
        match *self {
            Operator2d::Linear { lo, hi } => lo * lmin + hi * lmax,
            Operator2d::Pucci { pos, neg } => {
                let f = |v: f64| if v > 0.0 { pos * v } else { neg * v };
                f(lmin) + f(lmax)
            }
        }
    }

    /// Slopes `(∂G/∂λ_min, ∂G/∂λ_max)` at the given point.
    #[inline]
    pub fn slopes(&self, lmin: f64, lmax: f64) -> (f64, f64) {
        match *self {
            Operator2d::Linear { lo, hi } => (lo, hi),
            Operator2d::Pucci { pos, neg } => {
                let s = |v: f64| if v > 0.0 { pos } else { neg };
                (s(lmin), s(lmax))
            }
        }
    }

    /// Bound on `∂G/∂λ_min + ∂G/∂λ_max`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Operator2d::Linear { lo, hi } => lo + hi,
            Operator2d::Pucci { pos, neg } => 2.0 * pos.max(neg),
        }
    }
}

/// Outcome of sampling for `F_A ⊂ F_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionReport {
    pub holds: bool,
    pub samples: usize,
    pub counterexample: Option<SymMatrix>,
}

/// Moves `a` along the identity until it sits on `∂F` (member side).
fn shift_to_boundary<G: Gauge>(g: &G, a: &SymMatrix) -> Result<SymMatrix> {
    let member = |t: f64| -> Result<bool> { Ok(g.gauge(&a.shift(t))? >= 0.0) };
    let scale = 1.0 + a.frobenius_norm();
    let (mut lo, mut hi) = (-scale, scale);
    while member(lo)? {
        lo *= 2.0;
        if lo < -1e12 {
            return Ok(a.shift(lo));
        }
    }
    while !member(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(a.shift(hi));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(a.shift(hi))
}

/// Samples random matrices and boundary points of `A` looking for a member
/// of `A` that is not in `B` (gauge below `-1e-9`).
pub fn inclusion_check<A: Gauge, B: Gauge>(
    spec_a: &A,
    spec_b: &B,
    sample_count: usize,
    seed: u64,
) -> Result<InclusionReport> {
    let n = spec_a.dim();
    if spec_b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: spec_b.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let raw = SymMatrix::random_uniform(n, &mut rng)?;
        for a in [raw.clone(), shift_to_boundary(spec_a, &raw)?] {
            if spec_a.gauge(&a)? >= 0.0 && spec_b.gauge(&a)? < -1e-9 {
                return Ok(InclusionReport {
                    holds: false,
                    samples: sample_count,
                    counterexample: Some(a),
                });
            }
        }
    }
    Ok(InclusionReport {
        holds: true,
        samples: sample_count,
        counterexample: None,
    })
}

/// Checks `g(P_{e⊥} - (p-1)P_e) = 0` for random unit `e`; returns the worst gauge.
pub fn boundary_kernel_defect(spec: &SubequationSpec, count: usize, seed: u64) -> Result<f64> {
    let p = spec.riesz_characteristic();
    if !p.is_finite() {
        return Err(Error::InvalidInput("infinite Riesz characteristic".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let e = UnitVector::random(spec.n, &mut rng)?;
        let a = crate::symmat::riesz_test_matrix(&e, p);
        worst = worst.max(spec.gauge(&a)?.abs());
    }
    Ok(worst)
}

impl fmt::Display for SubequationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kind={} n={}", self.kind_name(), self.n)?;
        match self.kind {
            SubequationKind::PartialSum { p }
            | SubequationKind::MinMax { p }
            | SubequationKind::MinSecond { p } => write!(f, " p={p}"),
            SubequationKind::DeltaCone { delta } => write!(f, " delta={delta}"),
            SubequationKind::SigmaK { k } => write!(f, " k={k}"),
            SubequationKind::TracePower { q } => write!(f, " q={q}"),
            SubequationKind::Pucci { lambda, cap_lambda }
            | SubequationKind::PucciMax { lambda, cap_lambda } => {
                write!(f, " lambda={lambda} cap_lambda={cap_lambda}")
            }
            SubequationKind::LargestEigenvalue => Ok(()),
        }
    }
}

/// Parses `kind=minmax n=2 p=1.5` style lines. `kind=laplace` is accepted
/// as `sigmak` with `k=1`.
impl FromStr for SubequationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        from_pairs(&pairs)
    }
}

/// Builds a spec from key/value pairs; unknown keys are rejected.
pub fn from_pairs(pairs: &[(String, String)]) -> Result<SubequationSpec> {
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let num = |key: &str| -> Result<f64> {
        let v = get(key).ok_or_else(|| Error::Config(format!("missing key '{key}'")))?;
        v.parse::<f64>()
            .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number")))
    };
    let int = |key: &str| -> Result<usize> {
        let v = get(key).ok_or_else(|| Error::Config(format!("missing key '{key}'")))?;
        v.parse::<usize>()
            .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not an integer")))
    };
    let kind_name = get("kind").ok_or_else(|| Error::Config("missing key 'kind'".into()))?;
    let n = int("n")?;
    let (kind, allowed): (SubequationKind, &[&str]) = match kind_name {
        "partialsum" => (SubequationKind::PartialSum { p: num("p")? }, &["p"]),
        "deltacone" => (SubequationKind::DeltaCone { delta: num("delta")? }, &["delta"]),
        "minmax" => (SubequationKind::MinMax { p: num("p")? }, &["p"]),
        "minsecond" => (SubequationKind::MinSecond { p: num("p")? }, &["p"]),
        "sigmak" => (SubequationKind::SigmaK { k: int("k")? }, &["k"]),
        "laplace" => (SubequationKind::SigmaK { k: 1 }, &[]),
        "tracepower" => (SubequationKind::TracePower { q: int("q")? as u32 }, &["q"]),
        "pucci" => (
            SubequationKind::Pucci {
                lambda: num("lambda")?,
                cap_lambda: num("cap_lambda")?,
            },
            &["lambda", "cap_lambda"],
        ),
        "puccimax" => (
            SubequationKind::PucciMax {
                lambda: num("lambda")?,
                cap_lambda: num("cap_lambda")?,
            },
            &["lambda", "cap_lambda"],
        ),
        "largesteig" => (SubequationKind::LargestEigenvalue, &[]),
        other => return Err(Error::Config(format!("unknown subequation kind '{other}'"))),
    };
    for (k, _) in pairs {
        if k != "kind" && k != "n" && !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!(
                "key '{k}' is not valid for kind '{kind_name}'"
            )));
        }
    }
    SubequationSpec::new(kind, n).map_err(|e| Error::Config(e.to_string()))
}
