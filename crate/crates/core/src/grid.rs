//! Cartesian grids on strictly convex planar domains with excised disks and
//! wide-stencil directional second differences.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::ScalarField;

/// Strictly convex outer domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], a: f64, b: f64 },
}

impl Shape {
    pub fn disk(radius: f64) -> Self {
        Shape::Disk {
            center: [0.0, 0.0],
            radius,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            Shape::Disk { center, .. } | Shape::Ellipse { center, .. } => center,
        }
    }

    fn semi_axes(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { radius, .. } => (radius, radius),
            Shape::Ellipse { a, b, .. } => (a, b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.semi_axes();
        let c = self.center();
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && c.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!("degenerate shape {self}")));
        }
        Ok(())
    }

    /// Negative inside, zero on the boundary.
    pub fn level(&self, x: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        let c = self.center();
        let (u, v) = ((x[0] - c[0]) / a, (x[1] - c[1]) / b);
        u * u + v * v - 1.0
    }

    /// Smallest `s > 0` with `x + s·v` on the boundary, for `x` inside.
    pub fn crossing(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        let c = self.center();
        let (px, py) = ((x[0] - c[0]) / a, (x[1] - c[1]) / b);
        let (vx, vy) = (v[0] / a, v[1] / b);
        let qa = vx * vx + vy * vy;
        let qb = 2.0 * (px * vx + py * vy);
        let qc = px * px + py * py - 1.0;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        // qc < 0 so the roots have opposite signs; this form avoids cancellation
        if qb >= 0.0 {
            -2.0 * qc / (qb + disc)
        } else {
            (disc - qb) / (2.0 * qa)
        }
    }

    /// Boundary point at parameter angle `t`.
    pub fn boundary_point(&self, t: f64) -> [f64; 2] {
        let (a, b) = self.semi_axes();
        let c = self.center();
        [c[0] + a * t.cos(), c[1] + b * t.sin()]
    }

    /// Boundary point on the ray from the center through `x`.
    pub fn radial_projection(&self, x: [f64; 2]) -> [f64; 2] {
        let c = self.center();
        let d = [x[0] - c[0], x[1] - c[1]];
        if d[0] == 0.0 && d[1] == 0.0 {
            return self.boundary_point(0.0);
        }
        let s = self.crossing(c, d);
        [c[0] + s * d[0], c[1] + s * d[1]]
    }

    /// Lower bound for the distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            Shape::Disk { center, radius } => radius - (x[0] - center[0]).hypot(x[1] - center[1]),
            Shape::Ellipse { .. } => {
                let n = 4096;
                (0..n)
                    .map(|i| {
                        let q = self.boundary_point(std::f64::consts::TAU * i as f64 / n as f64);
                        (q[0] - x[0]).hypot(q[1] - x[1])
                    })
                    .fold(f64::INFINITY, f64::min)
                    * (1.0 - 1e-6)
            }
        }
    }

    /// Sup of `f` over the boundary: `samples` equi-parameter points, then
    /// golden-section refinement around the four best local maxima.
    /// Returns the value and the maximizing point.
    pub fn boundary_sup<F: Fn([f64; 2]) -> f64>(&self, f: F, samples: usize) -> (f64, [f64; 2]) {
        let n = samples.max(8);
        let step = std::f64::consts::TAU / n as f64;
        let vals: Vec<f64> = (0..n).map(|i| f(self.boundary_point(i as f64 * step))).collect();
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&i| vals[i] >= vals[(i + n - 1) % n] && vals[i] >= vals[(i + 1) % n])
            .collect();
        peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        peaks.truncate(4);
        let mut best = (vals[peaks[0]], peaks[0] as f64 * step);
        let g = |t: f64| f(self.boundary_point(t));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for &i in &peaks {
            let (mut a, mut b) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (g(c), g(d));
            for _ in 0..80 {
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = g(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = g(d);
                }
            }
            for (v, t) in [(fc, c), (fd, d)] {
                if v > best.0 {
                    best = (v, t);
                }
            }
        }
        (best.0, self.boundary_point(best.1))
    }

    /// Inf of `f` over the boundary (see `boundary_sup`).
    pub fn boundary_inf<F: Fn([f64; 2]) -> f64>(&self, f: F, samples: usize) -> (f64, [f64; 2]) {
        let (v, x) = self.boundary_sup(|q| -f(q), samples);
        (-v, x)
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.semi_axes();
        std::f64::consts::PI * a * b
    }

    pub fn max_semi_axis(&self) -> f64 {
        let (a, b) = self.semi_axes();
        a.max(b)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Disk { center, radius } => {
                write!(f, "disk(R={radius},c=({},{}))", center[0], center[1])
            }
            Shape::Ellipse { center, a, b } if a == b => {
                write!(f, "disk(R={a},c=({},{}))", center[0], center[1])
            }
            Shape::Ellipse { center, a, b } => {
                write!(f, "ellipse(a={a},b={b},c=({},{}))", center[0], center[1])
            }
        }
    }
}

/// Integer offset directions of a wide stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    dirs: Vec<[i32; 2]>,
    lens: Vec<f64>,
}

impl Default for Stencil {
    fn default() -> Self {
        Self::new(vec![
            [1, 0],
            [0, 1],
            [1, 1],
            [1, -1],
            [2, 1],
            [1, 2],
            [2, -1],
            [1, -2],
        ])
        .expect("default stencil is valid")
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    pub fn new(dirs: Vec<[i32; 2]>) -> Result<Self> {
        for (i, d) in dirs.iter().enumerate() {
            if d == &[0, 0] {
                return Err(Error::InvalidInput("zero stencil direction".into()));
            }
            for e in &dirs[..i] {
                if d[0] * e[1] - d[1] * e[0] == 0 {
                    return Err(Error::InvalidInput(format!("parallel directions {d:?} and {e:?}")));
                }
            }
        }
        let has = |t: [i32; 2]| dirs.iter().any(|d| d[0] * t[1] - d[1] * t[0] == 0);
        if !has([1, 0]) || !has([0, 1]) {
            return Err(Error::InvalidInput("stencil must contain both axes".into()));
        }
        let lens = dirs
            .iter()
            .map(|d| ((d[0] * d[0] + d[1] * d[1]) as f64).sqrt())
            .collect();
        Ok(Self { dirs, lens })
    }

    /// All primitive directions with `max(|a|, |b|) ≤ m`, one per line.
    pub fn with_radius(m: i32) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidInput(format!("stencil radius {m} must be >= 1")));
        }
        let mut dirs = Vec::new();
        for a in 0..=m {
            for b in -m..=m {
                if (a == 0 && b <= 0) || gcd(a, b) != 1 {
                    continue;
                }
                dirs.push([a, b]);
            }
        }
        dirs.sort_by(|x, y| {
            let lx = x[0] * x[0] + x[1] * x[1];
            let ly = y[0] * y[0] + y[1] * y[1];
            lx.cmp(&ly).then(x.cmp(y))
        });
        Self::new(dirs)
    }

    /// Stencil whose radius grows like `h^{-1/2}` (at least 2), so that the
    /// angular gap and the reach `≈ m·h` both vanish under refinement.
    pub fn for_spacing(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing {h} must be > 0")));
        }
        let m = (1.0 / (16.0 * h)).sqrt() - 1e-9;
        Self::with_radius((m.ceil() as i32).clamp(2, 6))
    }

    pub fn directions(&self) -> &[[i32; 2]] {
        &self.dirs
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lens
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Largest angle between a line and its nearest stencil line, in degrees.
    pub fn angular_gap_degrees(&self) -> f64 {
        let mut angles: Vec<f64> = self
            .dirs
            .iter()
            .map(|d| (d[1] as f64).atan2(d[0] as f64).rem_euclid(std::f64::consts::PI))
            .collect();
        angles.sort_by(f64::total_cmp);
        let mut gap: f64 = angles[0] + std::f64::consts::PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap.to_degrees()
    }

    /// Largest `|d|`, in grid units.
    pub fn reach(&self) -> f64 {
        self.lens.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Exterior,
    Interior,
    /// Exterior node read by some stencil; holds `φ` at its radial projection.
    OuterBand,
    /// Node inside the closed excision disk with this index.
    InnerDisk(u16),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excision {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Neighbor of an interior node along one stencil half-direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Node index, or `NO_NODE` when the ray leaves the domain first.
    pub node: u32,
    /// Index into the boundary crossing tables when `node == NO_NODE`.
    pub crossing: u32,
    /// Euclidean distance to the neighbor or crossing.
    pub dist: f64,
}

pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct GridDomain {
    pub shape: Shape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub stencil: Stencil,
    base_class: Vec<NodeClass>,
    class: Vec<NodeClass>,
    pub excisions: Vec<Excision>,
    /// Grid-interior nodes, in row-major order.
    interior: Vec<u32>,
    /// `2·len(stencil)` neighbors per interior node: `+d` then `-d`.
    neighbors: Vec<Neighbor>,
    crossing_points: Vec<[f64; 2]>,
    crossing_values: Vec<f64>,
    band_values: Vec<f64>,
}

impl GridDomain {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.nx, idx / self.nx);
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Grid-interior nodes (including those covered by excisions).
    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.class[idx] == NodeClass::Interior
    }

    /// Indices into `interior_nodes()` that are active (not excised).
    pub fn active_slots(&self) -> Vec<usize> {
        (0..self.interior.len())
            .filter(|&s| self.class[self.interior[s] as usize] == NodeClass::Interior)
            .collect()
    }

    pub fn neighbors(&self, slot: usize) -> &[Neighbor] {
        let m = 2 * self.stencil.len();
        &self.neighbors[slot * m..(slot + 1) * m]
    }

    pub fn crossing_value(&self, c: u32) -> f64 {
        self.crossing_values[c as usize]
    }

    pub fn crossing_point(&self, c: u32) -> [f64; 2] {
        self.crossing_points[c as usize]
    }

    pub fn crossing_count(&self) -> usize {
        self.crossing_points.len()
    }

    /// Index of the node nearest to `x`.
    pub fn nearest_node(&self, x: [f64; 2]) -> Option<usize> {
        let i = ((x[0] - self.origin[0]) / self.h).round();
        let j = ((x[1] - self.origin[1]) / self.h).round();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        Some(self.index(i as usize, j as usize))
    }

    /// Replaces the outer Dirichlet data.
    pub fn set_boundary_data<F: ScalarField + ?Sized>(&mut self, phi: &F) {
        for (v, q) in self.crossing_values.iter_mut().zip(&self.crossing_points) {
            *v = phi.eval(q);
        }
        for idx in 0..self.class.len() {
            if self.base_class[idx] == NodeClass::OuterBand {
                let q = self.shape.radial_projection(self.coords(idx));
                self.band_values[idx] = phi.eval(&q);
            }
        }
    }

    pub fn band_value(&self, idx: usize) -> f64 {
        self.band_values[idx]
    }

    /// Covers every grid-interior node in the closed disk `B̄_r(x_j)` by an
    /// excision. Requires `r ≥ 3h`, pairwise disjoint disks and clearance
    /// `≥ 3h` from the outer boundary.
    pub fn perforate(&self, centers: &[[f64; 2]], r: f64) -> Result<GridDomain> {
        let h = self.h;
        if !(r >= 3.0 * h * (1.0 - 1e-12)) {
            return Err(Error::Geometry(format!("excision radius {r} below 3h = {}", 3.0 * h)));
        }
        if centers.len() > u16::MAX as usize {
            return Err(Error::Geometry("too many excisions".into()));
        }
        let mut out = self.unperforate();
        for (j, c) in centers.iter().enumerate() {
            if self.shape.level(*c) >= 0.0 || self.shape.boundary_distance(*c) < r + 3.0 * h {
                return Err(Error::Geometry(format!(
                    "excision at {c:?} with radius {r} lacks 3h clearance from the boundary"
                )));
            }
            for e in &centers[..j] {
                if (c[0] - e[0]).hypot(c[1] - e[1]) <= 2.0 * r {
                    return Err(Error::Geometry(format!("excisions at {c:?} and {e:?} overlap")));
                }
            }
            out.excisions.push(Excision { center: *c, radius: r });
        }
        for &n in &out.interior {
            let x = out.coords(n as usize);
            for (j, e) in out.excisions.iter().enumerate() {
                if (x[0] - e.center[0]).hypot(x[1] - e.center[1]) <= e.radius {
                    out.class[n as usize] = NodeClass::InnerDisk(j as u16);
                }
            }
        }
        Ok(out)
    }

    pub fn unperforate(&self) -> GridDomain {
        let mut out = self.clone();
        out.class = out.base_class.clone();
        out.excisions.clear();
        out
    }
}

/// Classifies nodes and builds the cut-cell neighbor tables.
pub fn build_domain<F: ScalarField + ?Sized>(
    shape: Shape,
    h: f64,
    phi: &F,
    stencil: Stencil,
) -> Result<GridDomain> {
    shape.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("grid spacing h = {h} must be > 0")));
    }
    let c = shape.center();
    let (a, b) = shape.semi_axes();
    let pad = stencil.reach().ceil() as i64 + 1;
    let half_x = (a / h).ceil() as i64 + pad;
    let half_y = (b / h).ceil() as i64 + pad;
    let nx = (2 * half_x + 1) as usize;
    let ny = (2 * half_y + 1) as usize;
    if nx * ny > 50_000_000 {
        return Err(Error::InvalidInput(format!("grid of {nx}x{ny} nodes is too large")));
    }
    let origin = [c[0] - half_x as f64 * h, c[1] - half_y as f64 * h];
    let mut class = vec![NodeClass::Exterior; nx * ny];
    let mut interior = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let x = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
            if shape.level(x) < -1e-12 {
                class[j * nx + i] = NodeClass::Interior;
                interior.push((j * nx + i) as u32);
            }
        }
    }
    if interior.len() < 16 {
        return Err(Error::TooCoarse(format!(
            "only {} interior nodes at h = {h}",
            interior.len()
        )));
    }
    let m = stencil.len();
    let mut neighbors = Vec::with_capacity(interior.len() * 2 * m);
    let mut crossing_points = Vec::new();
    for &n in &interior {
        let (i, j) = ((n as usize % nx) as i64, (n as usize / nx) as i64);
        let x = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
        for (d, len) in stencil.dirs.iter().zip(&stencil.lens) {
            for sign in [1i64, -1] {
                let (ii, jj) = (i + sign * d[0] as i64, j + sign * d[1] as i64);
                let idx = (jj as usize) * nx + ii as usize;
                if class[idx] == NodeClass::Interior {
                    neighbors.push(Neighbor {
                        node: idx as u32,
                        crossing: 0,
                        dist: len * h,
                    });
                } else {
                    if class[idx] == NodeClass::Exterior {
                        class[idx] = NodeClass::OuterBand;
                    }
                    let v = [sign as f64 * d[0] as f64 * h, sign as f64 * d[1] as f64 * h];
                    let s = shape.crossing(x, v).clamp(0.0, 1.0);
                    crossing_points.push([x[0] + s * v[0], x[1] + s * v[1]]);
                    neighbors.push(Neighbor {
                        node: NO_NODE,
                        crossing: (crossing_points.len() - 1) as u32,
                        dist: (s * len * h).max(1e-300),
                    });
                }
            }
        }
    }
    let mut dom = GridDomain {
        shape,
        h,
        nx,
        ny,
        origin,
        stencil,
        base_class: class.clone(),
        class,
        excisions: Vec::new(),
        interior,
        neighbors,
        crossing_values: vec![0.0; crossing_points.len()],
        crossing_points,
        band_values: vec![0.0; nx * ny],
    };
    dom.set_boundary_data(phi);
    Ok(dom)
}

/// Per-node values over a domain, plus solve bookkeeping.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub domain: Arc<GridDomain>,
    /// One value per grid node; `NaN` on exterior nodes.
    pub values: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub r_schedule: Vec<f64>,
    pub monotonicity: Option<MonotonicityReport>,
}

/// Outcome of the nodewise checks performed during an r-limit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub steps: usize,
    /// Largest `H̄_{r_k} - H̄_{r_{k+1}}` over all steps and nodes.
    pub worst_drop: f64,
    pub violations: usize,
    /// Largest `ψ - H`.
    pub lower_excess: f64,
    /// Largest `H - H^DP`.
    pub upper_excess: f64,
    pub sandwich_violations: usize,
    /// Per singularity, `max (H - Θ_j K_p(· - x_j))` near `x_j`.
    pub pole_constants: Vec<f64>,
    pub notes: Vec<String>,
}

impl SolutionField {
    /// Field equal to `f` on interior and excised nodes and to the boundary
    /// data on band nodes.
    pub fn from_fn<F: ScalarField + ?Sized>(domain: Arc<GridDomain>, f: &F) -> Self {
        let values = (0..domain.node_count())
            .map(|idx| match domain.class(idx) {
                NodeClass::Exterior => f64::NAN,
                NodeClass::OuterBand => domain.band_value(idx),
                _ => f.eval(&domain.coords(idx)),
            })
            .collect();
        Self {
            domain,
            values,
            residual_history: Vec::new(),
            r_schedule: Vec::new(),
            monotonicity: None,
        }
    }

    pub fn value_at_node(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// `(u(x+hd) + u(x-hd) - 2u(x)) / (h²|d|²)` with cut-cell weights at the boundary.
    pub fn second_diff(&self, slot: usize, dir: usize) -> f64 {
        let (a, b) = second_diff_coeffs(&self.domain, &self.values, slot, dir);
        let u0 = self.values[self.domain.interior_nodes()[slot] as usize];
        a - b * u0
    }

    /// `(min, max)` of the second differences over the stencil.
    pub fn eig_est(&self, slot: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.domain.stencil.len() {
            let d = self.second_diff(slot, k);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Bilinear interpolation; corners without finite values are dropped
    /// and the remaining weights renormalized.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let d = &self.domain;
        let fx = (x[0] - d.origin[0]) / d.h;
        let fy = (x[1] - d.origin[1]) / d.h;
        if fx < 0.0 || fy < 0.0 || fx > (d.nx - 1) as f64 || fy > (d.ny - 1) as f64 {
            return f64::NAN;
        }
        let i = (fx.floor() as usize).min(d.nx - 2);
        let j = (fy.floor() as usize).min(d.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let corners = [
            (d.index(i, j), (1.0 - tx) * (1.0 - ty)),
            (d.index(i + 1, j), tx * (1.0 - ty)),
            (d.index(i, j + 1), (1.0 - tx) * ty),
            (d.index(i + 1, j + 1), tx * ty),
        ];
        let (mut s, mut w) = (0.0, 0.0);
        for (idx, wt) in corners {
            let v = self.values[idx];
            if wt == 0.0 {
                continue;
            }
            if v.is_finite() {
                s += wt * v;
                w += wt;
            } else if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
        }
        if w == 0.0 {
            f64::NAN
        } else {
            s / w
        }
    }

    /// Min and max over finite non-exterior values.
    pub fn finite_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (idx, v) in self.values.iter().enumerate() {
            if self.domain.class(idx) != NodeClass::Exterior && v.is_finite() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        (lo, hi)
    }

    /// CSV text: `# nx= ny= h= shape=` header, then `x,y,value` rows for
    /// every non-exterior node, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let d = &self.domain;
        let mut out = String::new();
        out.push_str(&format!(
            "# nx={} ny={} h={:e} shape={}\nx,y,value\n",
            d.nx, d.ny, d.h, d.shape
        ));
        for idx in 0..d.node_count() {
            if d.class(idx) == NodeClass::Exterior {
                continue;
            }
            let x = d.coords(idx);
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                x[0], x[1], self.values[idx]
            ));
        }
        out
    }

    /// 8-bit P2 image, rows top to bottom; exterior nodes are black and the
    /// finite range maps linearly onto 1..=255. Returns the text and the range.
    pub fn to_pgm(&self) -> (String, f64, f64) {
        let d = &self.domain;
        let (lo, hi) = self.finite_range();
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = format!("P2\n{} {}\n255\n", d.nx, d.ny);
        for j in (0..d.ny).rev() {
            let row: Vec<String> = (0..d.nx)
                .map(|i| {
                    let idx = d.index(i, j);
                    let v = self.values[idx];
                    if d.class(idx) == NodeClass::Exterior {
                        "0".to_string()
                    } else if v.is_finite() {
                        (1.0 + 254.0 * (v - lo) / span).round().clamp(1.0, 255.0).to_string()
                    } else {
                        "1".to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        (out, lo, hi)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

impl ScalarField for SolutionField {
    fn eval(&self, x: &[f64]) -> f64 {
        self.interpolate([x[0], x[1]])
    }
}

/// `(A, B)` with `D_d u = A - B·u(x)` along stencil direction `dir`.
#[inline]
pub fn second_diff_coeffs(dom: &GridDomain, values: &[f64], slot: usize, dir: usize) -> (f64, f64) {
    let nb = dom.neighbors(slot);
    let (plus, minus) = (nb[2 * dir], nb[2 * dir + 1]);
    let val = |n: &Neighbor| {
        if n.node == NO_NODE {
            dom.crossing_values[n.crossing as usize]
        } else {
            values[n.node as usize]
        }
    };
    let (h2, h1) = (plus.dist, minus.dist);
    let s = 2.0 / (h1 + h2);
    (s * (val(&plus) / h2 + val(&minus) / h1), 2.0 / (h1 * h2))
}
