//! Plain `key=value` run configuration with `[section]` headers and `#`
//! comments. Every key is checked against a fixed schema; defaults are
//! materialized so the effective configuration can be echoed verbatim.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use perron::grid::{build_domain, GridDomain, Shape, Stencil};
use perron::solver::{Method, SolveConfig};
use perron::{Error, Result, SubequationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Text,
    Real,
    Int,
    Bool,
    /// `x,y` pairs separated by `;`.
    Points,
    /// Comma-separated reals.
    Reals,
    /// Comma-separated vectors separated by `;`.
    Vectors,
}

struct Key {
    section: &'static str,
    name: &'static str,
    default: &'static str,
    kind: Kind,
}

const fn key(section: &'static str, name: &'static str, default: &'static str, kind: Kind) -> Key {
    Key {
        section,
        name,
        default,
        kind,
    }
}

// An empty default means "unset".
const SCHEMA: &[Key] = &[
    key("subequation", "kind", "laplace", Kind::Text),
    key("subequation", "n", "2", Kind::Int),
    key("subequation", "p", "", Kind::Real),
    key("subequation", "k", "", Kind::Int),
    key("subequation", "q", "", Kind::Int),
    key("subequation", "delta", "", Kind::Real),
    key("subequation", "lambda", "", Kind::Real),
    key("subequation", "cap_lambda", "", Kind::Real),
    key("domain", "shape", "disk", Kind::Text),
    key("domain", "center", "0,0", Kind::Reals),
    key("domain", "radius", "1", Kind::Real),
    key("domain", "a", "", Kind::Real),
    key("domain", "b", "", Kind::Real),
    key("domain", "h", "0.015625", Kind::Real),
    key("domain", "stencil", "default", Kind::Text),
    key("domain", "boundary", "zero", Kind::Text),
    key("domain", "inner_radius", "", Kind::Real),
    key("singularity", "points", "0,0", Kind::Points),
    key("singularity", "theta", "1", Kind::Reals),
    key("solver", "method", "newton", Kind::Text),
    key("solver", "rel_tol", "1e-10", Kind::Real),
    key("solver", "max_iters", "200000", Kind::Int),
    key("solver", "omega", "", Kind::Real),
    key("solver", "damping", "1", Kind::Real),
    key("solver", "r0", "", Kind::Real),
    key("solver", "tol_mono", "1e-8", Kind::Real),
    key("solver", "density_radii", "6", Kind::Int),
    key("finite", "t_values", "", Kind::Reals),
    key("finite", "t_start", "0", Kind::Real),
    key("finite", "t_stop", "2", Kind::Real),
    key("finite", "t_step", "0.25", Kind::Real),
    key("finite", "tol", "0.05", Kind::Real),
    key("finite", "theta", "1", Kind::Real),
    key("value", "v", "", Kind::Vectors),
    key("value", "samples", "10", Kind::Int),
    key("value", "solve", "false", Kind::Bool),
    key("output", "oracle", "none", Kind::Text),
    key("output", "oracle_min_radius", "0.1", Kind::Real),
];

const CHOICES: &[(&str, &[&str])] = &[
    ("domain.shape", &["disk", "ellipse"]),
    ("domain.stencil", &["default", "auto"]),
    ("domain.boundary", &["zero", "kernel"]),
    ("solver.method", &["newton", "sor", "jacobi"]),
    ("output.oracle", &["none", "radial"]),
];

/// Effective configuration: every schema key with its value (defaults filled in).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|k| (format!("{}.{}", k.section, k.name), k.default.to_string()))
            .collect();
        Self { values }
    }
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{t}' is not a number")))
        })
        .collect()
}

fn parse_vectors(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_reals).collect()
}

fn check_value(k: &Key, v: &str) -> Result<()> {
    if v.is_empty() {
        return Ok(());
    }
    let bad = |what: &str| Error::Config(format!("{}.{}: '{v}' is not {what}", k.section, k.name));
    match k.kind {
        Kind::Text => Ok(()),
        Kind::Real => v.parse::<f64>().map(|_| ()).map_err(|_| bad("a number")),
        Kind::Int => v.parse::<usize>().map(|_| ()).map_err(|_| bad("a non-negative integer")),
        Kind::Bool => v.parse::<bool>().map(|_| ()).map_err(|_| bad("true or false")),
        Kind::Reals => parse_reals(v).map(|_| ()).map_err(|_| bad("a list of numbers")),
        Kind::Vectors => parse_vectors(v).map(|_| ()).map_err(|_| bad("a list of vectors")),
        Kind::Points => {
            let pts = parse_vectors(v).map_err(|_| bad("a list of points"))?;
            if pts.iter().any(|p| p.len() != 2) {
                return Err(bad("a list of x,y points"));
            }
            Ok(())
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("malformed section header '{line}'")))?
                    .trim();
                if !SCHEMA.iter().any(|k| k.section == name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key=value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if section.is_empty() {
                return Err(at(format!("key '{k}' outside of any section")));
            }
            let entry = SCHEMA
                .iter()
                .find(|e| e.section == section && e.name == k)
                .ok_or_else(|| at(format!("unknown key '{k}' in [{section}]")))?;
            check_value(entry, v).map_err(|e| at(e.to_string()))?;
            let full = format!("{section}.{k}");
            if let Some((_, allowed)) = CHOICES.iter().find(|(n, _)| *n == full) {
                if !allowed.contains(&v) {
                    return Err(at(format!("{full} must be one of {allowed:?}, got '{v}'")));
                }
            }
            if seen.insert(full.clone(), lineno).is_some() {
                return Err(at(format!("duplicate key {full}")));
            }
            cfg.values.insert(full, v.to_string());
        }
        cfg.subequation()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn real(&self, key: &str) -> Option<f64> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| v.parse().expect("validated at parse time"))
    }

    fn req_real(&self, key: &str) -> Result<f64> {
        self.real(key).ok_or_else(|| Error::Config(format!("{key} is required")))
    }

    fn int(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated at parse time")
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("expected section.key, got '{key}'")))?;
        let entry = SCHEMA
            .iter()
            .find(|e| e.section == section && e.name == name)
            .ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
        check_value(entry, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn subequation(&self) -> Result<SubequationSpec> {
        let pairs: Vec<(String, String)> = SCHEMA
            .iter()
            .filter(|k| k.section == "subequation")
            .filter_map(|k| {
                let v = self.raw(&format!("subequation.{}", k.name));
                (!v.is_empty()).then(|| (k.name.to_string(), v.to_string()))
            })
            .collect();
        perron::subeq::from_pairs(&pairs)
    }

    pub fn shape(&self) -> Result<Shape> {
        let c = parse_reals(self.raw("domain.center"))?;
        if c.len() != 2 {
            return Err(Error::Config("domain.center must be x,y".into()));
        }
        let center = [c[0], c[1]];
        let shape = match self.raw("domain.shape") {
            "disk" => Shape::Disk {
                center,
                radius: self.req_real("domain.radius")?,
            },
            _ => Shape::Ellipse {
                center,
                a: self.req_real("domain.a")?,
                b: self.req_real("domain.b")?,
            },
        };
        shape.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(shape)
    }

    pub fn h(&self) -> f64 {
        self.real("domain.h").expect("has a default")
    }

    pub fn stencil(&self) -> Result<Stencil> {
        match self.raw("domain.stencil") {
            "auto" => Stencil::for_spacing(self.h()),
            _ => Ok(Stencil::default()),
        }
    }

    /// `true` when boundary (and inner) data is the kernel `Θ K_p(· - x₀)`.
    pub fn kernel_boundary(&self) -> bool {
        self.raw("domain.boundary") == "kernel"
    }

    pub fn inner_radius(&self) -> Option<f64> {
        self.real("domain.inner_radius")
    }

    /// Grid domain with zero outer data.
    pub fn domain(&self) -> Result<Arc<GridDomain>> {
        let dom = build_domain(self.shape()?, self.h(), &|_: &[f64]| 0.0, self.stencil()?)?;
        Ok(Arc::new(dom))
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        parse_vectors(self.raw("singularity.points"))
            .expect("validated at parse time")
            .into_iter()
            .map(|p| [p[0], p[1]])
            .collect()
    }

    /// One density per point; a single value is broadcast.
    pub fn thetas(&self) -> Result<Vec<f64>> {
        let t = parse_reals(self.raw("singularity.theta"))?;
        let k = self.points().len();
        match t.len() {
            1 => Ok(vec![t[0]; k]),
            n if n == k => Ok(t),
            n => Err(Error::Config(format!("singularity.theta has {n} entries for {k} points"))),
        }
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let mut cfg = SolveConfig::new(self.subequation()?);
        cfg.method = match self.raw("solver.method") {
            "sor" => Method::Sor,
            "jacobi" => Method::Jacobi,
            _ => Method::Newton,
        };
        cfg.rel_tol = self.req_real("solver.rel_tol")?;
        cfg.max_iters = self.int("solver.max_iters");
        cfg.omega = self.real("solver.omega");
        cfg.damping = self.req_real("solver.damping")?;
        cfg.r0 = self.real("solver.r0");
        cfg.tol_mono = self.req_real("solver.tol_mono")?;
        cfg.density_radii = self.int("solver.density_radii");
        Ok(cfg)
    }

    pub fn t_values(&self) -> Result<Vec<f64>> {
        let explicit = self.raw("finite.t_values");
        if !explicit.is_empty() {
            return parse_reals(explicit);
        }
        let (a, b, s) = (
            self.req_real("finite.t_start")?,
            self.req_real("finite.t_stop")?,
            self.req_real("finite.t_step")?,
        );
        if !(s > 0.0) || b < a {
            return Err(Error::Config("need t_step > 0 and t_stop >= t_start".into()));
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * s).collect())
    }

    pub fn finite_tol(&self) -> f64 {
        self.real("finite.tol").expect("has a default")
    }

    pub fn finite_theta(&self) -> f64 {
        self.real("finite.theta").expect("has a default")
    }

    pub fn value_vectors(&self) -> Vec<Vec<f64>> {
        parse_vectors(self.raw("value.v")).expect("validated at parse time")
    }

    pub fn value_samples(&self) -> usize {
        self.int("value.samples")
    }

    pub fn value_solve(&self) -> bool {
        self.raw("value.solve") == "true"
    }

    pub fn radial_oracle(&self) -> bool {
        self.raw("output.oracle") == "radial"
    }

    pub fn oracle_min_radius(&self) -> f64 {
        self.real("output.oracle_min_radius").expect("has a default")
    }

    /// The effective configuration as `config.section.key=value` lines, schema order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for k in SCHEMA {
            let full = format!("{}.{}", k.section, k.name);
            let _ = writeln!(s, "config.{full}={}", self.raw(&full));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = RunConfig::parse(
            "# green run\n[subequation]\nkind = minmax\np=3 # inline\n\n[domain]\nh=0.03125\n[solver]\nmethod=sor\n",
        )
        .unwrap();
        assert_eq!(cfg.subequation().unwrap().to_string(), "kind=minmax n=2 p=3");
        assert_eq!(cfg.h(), 0.03125);
        assert_eq!(cfg.solve_config().unwrap().method, Method::Sor);
        assert!(cfg.echo().contains("config.solver.rel_tol=1e-10\n"));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[domain]\nwidth=3\n",
            "[nowhere]\n",
            "kind=minmax\n",
            "[domain]\nh=abc\n",
            "[domain]\nh=1\nh=2\n",
            "[solver]\nmethod=multigrid\n",
            "[subequation]\nkind=minmax\n",
            "[subequation]\nkind=laplace\np=2\n",
            "[singularity]\npoints=0,0,1\n",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn t_grid_and_thetas() {
        let cfg = RunConfig::parse("[singularity]\npoints=0,0;0.5,0\ntheta=2\n").unwrap();
        assert_eq!(cfg.t_values().unwrap().len(), 9);
        assert_eq!(cfg.thetas().unwrap(), vec![2.0, 2.0]);
        let cfg = RunConfig::parse("[finite]\nt_values=0,1.5\n").unwrap();
        assert_eq!(cfg.t_values().unwrap(), vec![0.0, 1.5]);
    }
}
