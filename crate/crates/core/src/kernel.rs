//! Riesz kernels, kernel sums, the tangent flow and density estimation.

use crate::error::{Error, Result};

/// Which constant multiple of the radial kernel is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `-|x|^{2-p}/(p-2)`, `log|x|` at `p = 2`.
    Classic,
    /// `-|x|^{2-p}` for `p > 2`, `|x|^{2-p}` for `p < 2`, `log|x|` at `p = 2`.
    Plain,
}

/// Radial kernel value at distance `r` (no scale, no offset).
pub fn radial_kernel(p: f64, norm: Normalization, r: f64) -> f64 {
    if r == 0.0 {
        return if p >= 2.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    if p == 2.0 {
        return r.ln();
    }
    let pw = r.powf(2.0 - p);
    match norm {
        Normalization::Classic => -pw / (p - 2.0),
        Normalization::Plain if p > 2.0 => -pw,
        Normalization::Plain => pw,
    }
}

/// Something that can be evaluated pointwise.
pub trait ScalarField: Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// `Θ·K_p(x - center) + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub p: f64,
    pub normalization: Normalization,
    pub center: Vec<f64>,
    pub theta: f64,
    pub offset: f64,
}

impl KernelSpec {
    pub fn new(p: f64, normalization: Normalization, center: &[f64]) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel exponent p = {p} must be >= 1")));
        }
        if center.is_empty() {
            return Err(Error::InvalidInput("kernel center has no coordinates".into()));
        }
        Ok(Self {
            p,
            normalization,
            center: center.to_vec(),
            theta: 1.0,
            offset: 0.0,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn is_polar(&self) -> bool {
        self.p >= 2.0
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt()
    }

    /// Kernel value at distance `r` from the center.
    pub fn at_radius(&self, r: f64) -> f64 {
        self.theta * radial_kernel(self.p, self.normalization, r) + self.offset
    }
}

pub fn eval_kernel(k: &KernelSpec, x: &[f64]) -> f64 {
    k.at_radius(k.distance(x))
}

impl ScalarField for KernelSpec {
    fn eval(&self, x: &[f64]) -> f64 {
        eval_kernel(self, x)
    }
}

/// `Σ Θ_j K_p(x - x_j) + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSum {
    pub terms: Vec<KernelSpec>,
    pub offset: f64,
}

pub fn kernel_sum(
    terms: &[(f64, Vec<f64>)],
    p: f64,
    normalization: Normalization,
    offset: f64,
) -> Result<KernelSum> {
    let mut out: Vec<KernelSpec> = Vec::with_capacity(terms.len());
    for (theta, x) in terms {
        if !(*theta > 0.0) {
            return Err(Error::InvalidInput(format!("kernel weight {theta} must be > 0")));
        }
        let k = KernelSpec::new(p, normalization, x)?.with_theta(*theta);
        if out.iter().any(|o| o.distance(x) == 0.0) {
            return Err(Error::InvalidInput(format!("duplicate kernel center {x:?}")));
        }
        out.push(k);
    }
    Ok(KernelSum { terms: out, offset })
}

impl KernelSum {
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            terms: self.terms.clone(),
            offset: self.offset + c,
        }
    }
}

impl ScalarField for KernelSum {
    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|k| eval_kernel(k, x)).sum::<f64>() + self.offset
    }
}

/// The tangent flow `u_r` about `center`:
/// `r^{p-2} u(c + r(x-c))` for `p ≥ 2`, `(u(c + r(x-c)) - u(c)) / r^{2-p}` for `p < 2`.
pub struct TangentRescaled<'a, U: ScalarField + ?Sized> {
    u: &'a U,
    r: f64,
    p: f64,
    center: Vec<f64>,
    u_center: f64,
}

/// Builds `u_r`. `domain_radius` is the radius about `center` on which `u`
/// is defined, and `target_radius` the radius on which `u_r` will be read.
pub fn tangent_rescale<'a, U: ScalarField + ?Sized>(
    u: &'a U,
    center: &[f64],
    domain_radius: f64,
    r: f64,
    p: f64,
    target_radius: f64,
) -> Result<TangentRescaled<'a, U>> {
    if !(r > 0.0) || !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("need r > 0 and p >= 1 (r={r}, p={p})")));
    }
    if r * target_radius > domain_radius {
        return Err(Error::DomainTooSmall(format!(
            "u known on radius {domain_radius}, flow needs {}",
            r * target_radius
        )));
    }
    let u_center = if p < 2.0 { u.eval(center) } else { 0.0 };
    Ok(TangentRescaled {
        u,
        r,
        p,
        center: center.to_vec(),
        u_center,
    })
}

impl<U: ScalarField + ?Sized> ScalarField for TangentRescaled<'_, U> {
    fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = self
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| c + self.r * (v - c))
            .collect();
        if self.p >= 2.0 {
            self.r.powf(self.p - 2.0) * self.u.eval(&y)
        } else {
            (self.u.eval(&y) - self.u_center) / self.r.powf(2.0 - self.p)
        }
    }
}

/// Minimum number of samples per circle when taking a sup over a sphere.
pub const SPHERE_SAMPLES: usize = 64;

fn circle_points(center: &[f64], rho: f64, samples: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..samples).map(move |i| {
        let a = std::f64::consts::TAU * i as f64 / samples as f64;
        let mut x = center.to_vec();
        x[0] += rho * a.cos();
        x[1] += rho * a.sin();
        x
    })
}

/// Max of `u` over equi-angular samples of the circle of radius `rho`
/// (in the first two coordinates).
pub fn sphere_sup<U: ScalarField + ?Sized>(u: &U, center: &[f64], rho: f64, samples: usize) -> f64 {
    circle_points(center, rho, samples.max(SPHERE_SAMPLES))
        .map(|x| u.eval(&x))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub theta_hat: f64,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub slope: f64,
}

/// Extrapolation variable for the ratio sequence.
fn extrapolation_variable(p: f64, reference: &KernelSpec, rho: f64) -> Result<f64> {
    if p > 2.0 {
        Ok(1.0 / radial_kernel(p, reference.normalization, rho))
    } else if p == 2.0 {
        if rho >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "density radii must be < 1 at p = 2 (got {rho})"
            )));
        }
        Ok(-1.0 / rho.ln())
    } else {
        Ok(rho.powf((2.0 - p).min(1.0)))
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Density of `u` at `reference.center` relative to the kernel
/// `reference.theta · K_p`. The ratio at radius `ρ` is `M(ρ)/K(ρ)` for
/// `p ≥ 2` and `(M(ρ) - u(x₀))/K(ρ)` for `p < 2`, with `M` the sampled sup
/// over the circle; the ratios are extrapolated to `ρ = 0` by a linear fit.
pub fn density_estimate<U: ScalarField + ?Sized>(
    u: &U,
    reference: &KernelSpec,
    radii: &[f64],
) -> Result<DensityReport> {
    let p = reference.p;
    if radii.len() < 3 {
        return Err(Error::InvalidInput("density needs at least 3 radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("density radii must be positive and decreasing".into()));
    }
    let x0 = &reference.center;
    let base = if p < 2.0 { u.eval(x0) } else { 0.0 };
    let mut ratios = Vec::with_capacity(radii.len());
    let mut xs = Vec::with_capacity(radii.len());
    for &rho in radii {
        let m = sphere_sup(u, x0, rho, SPHERE_SAMPLES);
        let k = reference.theta * radial_kernel(p, reference.normalization, rho);
        let ratio = (m - base) / k;
        if !ratio.is_finite() {
            return Err(Error::NoDensity(format!("non-finite ratio at radius {rho}")));
        }
        ratios.push(ratio);
        xs.push(extrapolation_variable(p, reference, rho)?);
    }
    let m = ratios.len();
    if m >= 3 {
        let tail = &ratios[m - 3..];
        let growing = tail[1].abs() > 2.0 * tail[0].abs() && tail[2].abs() > 2.0 * tail[1].abs();
        if growing {
            return Err(Error::NoDensity(format!(
                "ratios blow up toward the center: {tail:?}"
            )));
        }
    }
    let (theta_hat, slope) = linear_fit(&xs, &ratios);
    Ok(DensityReport {
        theta_hat,
        radii: radii.to_vec(),
        ratios,
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivMode {
    Polar,
    Finite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivReport {
    pub equivalent: bool,
    /// `sup|u - h|` per probe radius (polar) or the ratio per probe (finite).
    pub trace: Vec<f64>,
    /// Largest observed difference (polar) or last ratio (finite).
    pub bound: f64,
}

/// Polar mode: `sup|u - h|` on the annulus between consecutive probes,
/// bounded when it does not grow by more than 5% across the last three
/// probes. Finite mode: `(u - u(0))/(h - h(0))` at the smallest two probes
/// must lie within 2% of 1.
pub fn asym_equiv_check<U: ScalarField + ?Sized, H: ScalarField + ?Sized>(
    u: &U,
    h: &H,
    center: &[f64],
    mode: EquivMode,
    probes: &[f64],
    domain_radius: f64,
) -> Result<EquivReport> {
    if probes.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 probe radii".into()));
    }
    if probes.iter().any(|&r| !(r > 0.0) || r > domain_radius) {
        return Err(Error::DomainTooSmall(format!(
            "probe radii {probes:?} exceed domain radius {domain_radius}"
        )));
    }
    match mode {
        EquivMode::Polar => {
            let mut trace = Vec::with_capacity(probes.len());
            for w in probes.windows(2) {
                let (outer, inner) = (w[0].max(w[1]), w[0].min(w[1]));
                let mut sup = 0.0_f64;
                for j in 0..8 {
                    let rho = inner + (outer - inner) * j as f64 / 7.0;
                    for x in circle_points(center, rho, SPHERE_SAMPLES) {
                        sup = sup.max((u.eval(&x) - h.eval(&x)).abs());
                    }
                }
                trace.push(sup);
            }
            let m = trace.len();
            let tail = &trace[m.saturating_sub(3)..];
            let bounded = tail.iter().all(|v| v.is_finite())
                && tail.windows(2).all(|w| w[1] <= 1.05 * w[0] + 1e-300);
            let bound = trace.iter().copied().fold(0.0, f64::max);
            Ok(EquivReport {
                equivalent: bounded,
                trace,
                bound,
            })
        }
        EquivMode::Finite => {
            let (u0, h0) = (u.eval(center), h.eval(center));
            let trace: Vec<f64> = probes
                .iter()
                .map(|&rho| {
                    circle_points(center, rho, SPHERE_SAMPLES)
                        .map(|x| (u.eval(&x) - u0) / (h.eval(&x) - h0))
                        .fold(1.0_f64, |acc, r| if (r - 1.0).abs() > (acc - 1.0).abs() { r } else { acc })
                })
                .collect();
            let mut sorted: Vec<(f64, f64)> = probes.iter().copied().zip(trace.iter().copied()).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let equivalent = sorted[..2].iter().all(|(_, r)| (r - 1.0).abs() <= 0.02);
            Ok(EquivReport {
                equivalent,
                bound: sorted[0].1,
                trace,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointing {
    Downward,
    Not,
}

/// Classifies `|x|^α g(x/|x|)` (or `Θ log|x| + g` when `α = 0`) from sphere samples of `g`.
pub fn classify_homogeneous(g_samples: &[f64], alpha: f64) -> Result<Pointing> {
    if g_samples.is_empty() || g_samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sphere samples must be finite and non-empty".into()));
    }
    if alpha > 1.0 {
        return Err(Error::UnsupportedOperator(format!(
            "homogeneity {alpha} > 1 is not classified"
        )));
    }
    let min = g_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = g_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let down = if alpha > 0.0 {
        min > 0.0
    } else if alpha < 0.0 {
        max < 0.0
    } else {
        true
    };
    Ok(if down { Pointing::Downward } else { Pointing::Not })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p: f64, n: Normalization) -> KernelSpec {
        KernelSpec::new(p, n, &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(eval_kernel(&k(2.0, Normalization::Classic), &[1.0, 0.0]), 0.0);
        assert_eq!(eval_kernel(&k(3.0, Normalization::Classic), &[0.0, 1.0]), -1.0);
        assert!((eval_kernel(&k(1.5, Normalization::Plain), &[4.0, 0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(eval_kernel(&k(3.0, Normalization::Plain), &[0.0, 0.0]), f64::NEG_INFINITY);
        assert_eq!(eval_kernel(&k(2.0, Normalization::Plain), &[0.0, 0.0]), f64::NEG_INFINITY);
        let f = k(1.5, Normalization::Classic).with_offset(3.0);
        assert_eq!(eval_kernel(&f, &[0.0, 0.0]), 3.0);
    }

    #[test]
    fn kernels_radially_increasing() {
        for p in [1.0, 1.3, 2.0, 2.5, 4.0] {
            for norm in [Normalization::Classic, Normalization::Plain] {
                let mut prev = f64::NEG_INFINITY;
                for i in 1..200 {
                    let v = radial_kernel(p, norm, i as f64 * 0.05);
                    if p > 1.0 {
                        assert!(v > prev, "p={p} {norm:?}");
                    } else {
                        assert!(v >= prev);
                    }
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn kernel_sum_examples() {
        let s = kernel_sum(&[(2.0, vec![0.3, 0.1])], 3.0, Normalization::Classic, 0.0).unwrap();
        let single = KernelSpec::new(3.0, Normalization::Classic, &[0.3, 0.1]).unwrap().with_theta(2.0);
        assert_eq!(s.eval(&[0.7, -0.2]), single.eval(&[0.7, -0.2]));

        let s = kernel_sum(
            &[(1.0, vec![0.5, 0.0]), (1.0, vec![-0.5, 0.0])],
            2.5,
            Normalization::Classic,
            0.0,
        )
        .unwrap();
        for x in [[0.1, 0.2], [0.9, -0.3], [0.33, 0.0]] {
            assert!((s.eval(&x) - s.eval(&[-x[0], x[1]])).abs() < 1e-14);
            assert!((s.eval(&x) - s.eval(&[-x[0], -x[1]])).abs() < 1e-14);
        }

        // hand evaluation of Σ γ_j |x_i - x_j|^{1/2} + C at a center
        let pts = [vec![0.0, 0.0], vec![0.25, 0.0], vec![0.0, -0.64]];
        let g = [1.0, 2.0, 0.5];
        let terms: Vec<(f64, Vec<f64>)> = g.iter().copied().zip(pts.iter().cloned()).collect();
        let s = kernel_sum(&terms, 1.5, Normalization::Plain, -3.0).unwrap();
        assert!((s.eval(&pts[0]) - (2.0 * 0.5 + 0.5 * 0.8 - 3.0)).abs() < 1e-14);

        assert!(kernel_sum(&[(1.0, vec![0.0, 0.0]), (2.0, vec![0.0, 0.0])], 2.0, Normalization::Classic, 0.0).is_err());
        assert!(kernel_sum(&[(0.0, vec![0.0, 0.0])], 2.0, Normalization::Classic, 0.0).is_err());
    }

    #[test]
    fn finite_kernel_sum_has_local_minima_at_centers() {
        let pts = [vec![0.0, 0.0], vec![0.6, 0.2]];
        let s = kernel_sum(
            &[(1.0, pts[0].clone()), (0.7, pts[1].clone())],
            1.5,
            Normalization::Plain,
            0.0,
        )
        .unwrap();
        for c in &pts {
            let v = s.eval(c);
            for x in circle_points(c, 1e-3, 64) {
                assert!(s.eval(&x) > v);
            }
        }
    }

    #[test]
    fn tangent_flow_fixes_plain_kernels() {
        for p in [1.5, 3.0, 4.0] {
            let kp = k(p, Normalization::Plain);
            for r in [2.0, 0.5, 0.01] {
                let kr = tangent_rescale(&kp, &[0.0, 0.0], 1e9, r, p, 2.0).unwrap();
                for x in [[0.3, 0.4], [1.0, -1.0], [0.01, 0.02]] {
                    let a = kr.eval(&x);
                    let b = kp.eval(&x);
                    assert!((a - b).abs() <= 1e-14 * b.abs(), "p={p} r={r}: {a} {b}");
                }
            }
        }
        let kp = k(3.0, Normalization::Plain);
        assert!(matches!(
            tangent_rescale(&kp, &[0.0, 0.0], 1.0, 0.5, 3.0, 4.0),
            Err(Error::DomainTooSmall(_))
        ));
    }

    #[test]
    fn tangent_flow_converges_for_bounded_perturbation() {
        let p = 3.0;
        let u = |x: &[f64]| {
            let r = x[0].hypot(x[1]);
            -2.0 / r + (x[0] * 3.0).sin()
        };
        let kp = k(p, Normalization::Plain).with_theta(2.0);
        let mut prev = f64::INFINITY;
        for r in [0.1, 0.01, 0.001] {
            let ur = tangent_rescale(&u, &[0.0, 0.0], 1.0, r, p, 1.0).unwrap();
            let err = circle_points(&[0.0, 0.0], 0.7, 64)
                .map(|x| (ur.eval(&x) - kp.eval(&x)).abs())
                .fold(0.0, f64::max);
            assert!(err <= r + 1e-12 && err < prev);
            prev = err;
        }
    }

    #[test]
    fn tangent_flow_two_power_closed_form() {
        // u = -Θ|x|^{2-n} - |x|^{2-p'}, flowed with p = n: u_r = -Θ|x|^{2-n} - r^{n-p'}|x|^{2-p'}
        let (n, pp, theta) = (4.0_f64, 3.0_f64, 1.5);
        let u = move |x: &[f64]| {
            let r = x[0].hypot(x[1]);
            -theta * r.powf(2.0 - n) - r.powf(2.0 - pp)
        };
        let r = 0.1;
        let ur = tangent_rescale(&u, &[0.0, 0.0], 1.0, r, n, 1.0).unwrap();
        let closed = -theta - r.powf(n - pp);
        assert!((ur.eval(&[1.0, 0.0]) - closed).abs() < 1e-13);
        assert!((ur.eval(&[0.0, -1.0]) - closed).abs() < 1e-13);
    }

    #[test]
    fn tangent_bound_transfers_back() {
        // sup|u_r - ΘK| ≤ C on B_R implies sup|u - ΘK| ≤ C r^{2-p} on B_{rR}
        let p = 3.0;
        let theta = 1.0;
        let u = |x: &[f64]| {
            let r = x[0].hypot(x[1]);
            -1.0 / r + 0.3 * (5.0 * x[0]).cos() + x[1]
        };
        let kp = k(p, Normalization::Plain).with_theta(theta);
        let (r, big_r) = (0.2, 1.0);
        let ur = tangent_rescale(&u, &[0.0, 0.0], 1.0, r, p, big_r).unwrap();
        let radii: Vec<f64> = (1..=40).map(|i| big_r * i as f64 / 40.0).collect();
        let c = radii
            .iter()
            .flat_map(|&rho| circle_points(&[0.0, 0.0], rho, 64).collect::<Vec<_>>())
            .map(|x| (ur.eval(&x) - kp.eval(&x)).abs())
            .fold(0.0, f64::max);
        let lhs = radii
            .iter()
            .flat_map(|&rho| circle_points(&[0.0, 0.0], r * rho, 64).collect::<Vec<_>>())
            .map(|x| (u.eval(&x) - kp.eval(&x)).abs())
            .fold(0.0, f64::max);
        assert!(lhs <= c * r.powf(2.0 - p) * (1.0 + 1e-12));
    }

    fn radii(hi: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| hi * 0.5f64.powi(i as i32)).collect()
    }

    #[test]
    fn density_of_exact_kernels() {
        for p in [1.5, 2.0, 3.0] {
            let reference = k(p, Normalization::Classic);
            let u = reference.clone().with_theta(2.5);
            let rep = density_estimate(&u, &reference, &radii(0.5, 6)).unwrap();
            assert!((rep.theta_hat - 2.5).abs() < 1e-12, "p={p}");
            assert!(rep.ratios.iter().all(|r| (r - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn density_with_bounded_perturbation() {
        for p in [2.0, 3.0] {
            let reference = k(p, Normalization::Classic);
            let u = |x: &[f64]| reference.eval(x) * 1.7 + 0.4 * x[0] + 1.0;
            let rep = density_estimate(&u, &reference, &radii(0.1, 8)).unwrap();
            assert!((rep.theta_hat - 1.7).abs() < 2e-2, "p={p}: {}", rep.theta_hat);
        }
    }

    #[test]
    fn density_constant_shift_and_scaling() {
        let p = 3.0;
        let reference = k(p, Normalization::Classic);
        let base = |x: &[f64]| reference.eval(x) + x[1] * x[1];
        let shifted = |x: &[f64]| base(x) + 5.0;
        let scaled = |x: &[f64]| 3.0 * base(x);
        let rs = radii(0.05, 8);
        let a = density_estimate(&base, &reference, &rs).unwrap().theta_hat;
        let b = density_estimate(&shifted, &reference, &rs).unwrap().theta_hat;
        let c = density_estimate(&scaled, &reference, &rs).unwrap().theta_hat;
        assert!((a - b).abs() <= 1e-3);
        assert!((c - 3.0 * a).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn density_of_two_power_counterexample() {
        let (n, pp, theta) = (4.0_f64, 3.0_f64, 1.0);
        let u = move |x: &[f64]| {
            let r = x[0].hypot(x[1]);
            -theta * r.powf(2.0 - n) - r.powf(2.0 - pp)
        };
        let reference = k(n, Normalization::Plain);
        let rep = density_estimate(&u, &reference, &radii(0.1, 10)).unwrap();
        assert!((rep.theta_hat - theta).abs() <= 0.02 * theta);
        let eq = asym_equiv_check(&u, &reference, &[0.0, 0.0], EquivMode::Polar, &radii(0.1, 8), 1.0).unwrap();
        assert!(!eq.equivalent);
    }

    #[test]
    fn density_blowup_detected() {
        let u = |x: &[f64]| -(x[0].hypot(x[1])).powi(-3);
        let reference = k(3.0, Normalization::Plain);
        assert!(matches!(
            density_estimate(&u, &reference, &radii(0.1, 6)),
            Err(Error::NoDensity(_))
        ));
        assert!(density_estimate(&u, &reference, &[0.1, 0.05]).is_err());
        assert!(density_estimate(&u, &reference, &[0.1, 0.2, 0.05]).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let h = k(3.0, Normalization::Classic);
        let plus7 = |x: &[f64]| h.eval(x) + 7.0;
        let rep = asym_equiv_check(&plus7, &h, &[0.0, 0.0], EquivMode::Polar, &radii(0.1, 6), 1.0).unwrap();
        assert!(rep.equivalent);
        assert!((rep.bound - 7.0).abs() < 1e-9);

        let scaled = |x: &[f64]| 1.1 * h.eval(x);
        let rep = asym_equiv_check(&scaled, &h, &[0.0, 0.0], EquivMode::Polar, &radii(0.1, 6), 1.0).unwrap();
        assert!(!rep.equivalent);

        let hf = k(1.5, Normalization::Plain);
        let u = |x: &[f64]| {
            let v = hf.eval(x);
            v + v * v
        };
        let probes = radii(1e-2, 8);
        let rep = asym_equiv_check(&u, &hf, &[0.0, 0.0], EquivMode::Finite, &probes, 1.0).unwrap();
        assert!(rep.equivalent, "{:?}", rep.trace);
        let twice = |x: &[f64]| 2.0 * hf.eval(x);
        assert!(!asym_equiv_check(&twice, &hf, &[0.0, 0.0], EquivMode::Finite, &probes, 1.0).unwrap().equivalent);

        assert!(matches!(
            asym_equiv_check(&u, &hf, &[0.0, 0.0], EquivMode::Finite, &[2.0, 1.0, 0.5], 1.0),
            Err(Error::DomainTooSmall(_))
        ));
    }

    #[test]
    fn homogeneous_classification() {
        assert_eq!(classify_homogeneous(&[1.0; 16], 0.5).unwrap(), Pointing::Downward);
        assert_eq!(classify_homogeneous(&[-1.0; 16], -1.0).unwrap(), Pointing::Downward);
        assert_eq!(classify_homogeneous(&[1.0, -0.2, 0.5], 0.5).unwrap(), Pointing::Not);
        assert_eq!(classify_homogeneous(&[0.4, -2.0], 0.0).unwrap(), Pointing::Downward);
        assert_eq!(classify_homogeneous(&[0.4, 0.1], -0.5).unwrap(), Pointing::Not);
        assert!(matches!(
            classify_homogeneous(&[1.0], 1.5),
            Err(Error::UnsupportedOperator(_))
        ));
    }
}
