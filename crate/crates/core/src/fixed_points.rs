//! Fixed points of max-affine and log-exp maps: the omega projection, meets,
//! critical graphs, uniqueness and fixed points from periodic orbits.

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::homogeneous::{certify_tstable, Certification, Outcome};
use crate::map_model::{compose, directional_derivative, power_map, HomogeneousMap, MapSpec, MonotoneMap};
use crate::nonneg_matrix::{critical_graph_witness, Digraph, Verification};

pub(crate) fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub(crate) fn sup_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a.abs()).fold(0.0, f64::max)
}

/// `||f(v) - v||` in sup norm.
pub fn residual(f: &dyn MonotoneMap, v: &[f64]) -> f64 {
    sup_dist(&f.apply(v), v)
}

fn fix_tol(cfg: &AnalysisConfig, v: &[f64]) -> f64 {
    cfg.tol.eps_fix * sup_norm(v).max(1.0)
}

pub fn require_fixed(f: &dyn MonotoneMap, v: &[f64], cfg: &AnalysisConfig) -> Result<()> {
    if v.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: v.len() });
    }
    let r = residual(f, v);
    if r > fix_tol(cfg, v) {
        return Err(Error::NotFixedPoint { residual: r });
    }
    Ok(())
}

/// Limit of the decreasing orbit of a sub-fixed point.
pub fn omega_limit(f: &dyn MonotoneMap, z: &[f64], cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    if z.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: z.len() });
    }
    let fz = f.apply(z);
    let excess = fz.iter().zip(z).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    if excess > cfg.tol.eps_order {
        return Err(Error::NotSubFixed { excess });
    }
    // A bounded decreasing orbit has steps tending to zero; steps that stop
    // shrinking for a long stretch mean a drift to minus infinity.
    const DRIFT_WINDOW: usize = 1000;
    let mut x = z.to_vec();
    let mut next = fz;
    let mut prev_step = f64::INFINITY;
    let mut flat = 0;
    for _ in 0..cfg.caps.omega_iterations {
        if next.iter().any(|v| !(*v >= -cfg.caps.magnitude)) {
            return Err(Error::UnboundedBelow);
        }
        let step = sup_dist(&next, &x);
        x = next;
        if step < fix_tol(cfg, &x) {
            return Ok(x);
        }
        flat = if step >= prev_step { flat + 1 } else { 0 };
        if flat >= DRIFT_WINDOW {
            return Err(Error::UnboundedBelow);
        }
        prev_step = step;
        next = f.apply(&x);
    }
    Err(Error::NotConverged { what: "omega limit", iterations: cfg.caps.omega_iterations })
}

/// Meet of two fixed points inside the fixed-point set.
pub fn meet(f: &dyn MonotoneMap, x: &[f64], y: &[f64], cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    require_fixed(f, x, cfg)?;
    require_fixed(f, y, cfg)?;
    let m: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.min(*b)).collect();
    omega_limit(f, &m, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapCriticalGraph {
    pub graph: Digraph,
    pub nodes: Vec<usize>,
    pub cyclicity: u64,
    pub verification: Verification,
}

/// Critical graph of the subdifferential at a fixed point.
pub fn map_critical_graph(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> Result<MapCriticalGraph> {
    require_fixed(f, v, cfg)?;
    derivative_critical_graph(&directional_derivative(f, v, cfg), cfg)
}

/// Critical graph of a max-of-linear map at the origin.
pub fn derivative_critical_graph(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<MapCriticalGraph> {
    match critical_graph_witness(h.generators(), cfg) {
        Ok(w) => Ok(MapCriticalGraph {
            cyclicity: w.graph.cyclicity(),
            graph: w.graph,
            nodes: w.critical_nodes,
            verification: w.verification,
        }),
        Err(Error::UnstableSelection { .. }) => Err(Error::UnstableFixedPoint),
        Err(e) => Err(e),
    }
}

/// True iff the map has no critical nodes, in which case the t-stable fixed
/// point is unique.
pub fn uniqueness_check(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> Result<bool> {
    Ok(map_critical_graph(f, v, cfg)?.nodes.is_empty())
}

/// Given fixed points with `w >= v` on a set meeting every strongly
/// connected component of the critical graph, reports whether `w >= v`
/// holds everywhere (within `eps_order`).
pub fn dominance_from_critical_set(
    f: &MapSpec,
    v: &[f64],
    w: &[f64],
    set: &[usize],
    cfg: &AnalysisConfig,
) -> Result<bool> {
    require_fixed(f, w, cfg)?;
    let cg = map_critical_graph(f, v, cfg)?;
    for comp in cg.graph.sccs() {
        if comp.iter().all(|i| cg.nodes.contains(i)) && !comp.iter().any(|i| set.contains(i)) {
            return Err(Error::InvalidInput(format!("set misses the critical component containing node {}", comp[0] + 1)));
        }
    }
    let eps = cfg.tol.eps_order;
    if set.iter().any(|&i| w[i] < v[i] - eps) {
        return Err(Error::InvalidInput("w is not above v on the given set".into()));
    }
    Ok(w.iter().zip(v).all(|(a, b)| *a >= *b - eps))
}

pub fn is_tstable_fixed(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> Result<Certification> {
    require_fixed(f, v, cfg)?;
    Ok(certify_tstable(&directional_derivative(f, v, cfg), cfg))
}

/// Directional derivative of `f^p` at `orbit[0]`, composed along the orbit.
pub fn orbit_derivative(f: &MapSpec, orbit: &[Vec<f64>], cfg: &AnalysisConfig) -> Result<HomogeneousMap> {
    let mut acc = directional_derivative(f, &orbit[0], cfg).to_spec();
    for point in &orbit[1..] {
        let d = directional_derivative(f, point, cfg).to_spec();
        acc = compose(&d, &acc, cfg)?;
    }
    HomogeneousMap::from_spec(&acc)
}

/// Checks that `orbit` is a cycle of `f` within `eps_fix`.
pub fn require_cycle(f: &dyn MonotoneMap, orbit: &[Vec<f64>], cfg: &AnalysisConfig) -> Result<()> {
    if orbit.is_empty() {
        return Err(Error::InvalidInput("orbit is empty".into()));
    }
    let p = orbit.len();
    for i in 0..p {
        let next = &orbit[(i + 1) % p];
        let r = sup_dist(&f.apply(&orbit[i]), next);
        if r > fix_tol(cfg, next) {
            return Err(Error::NotFixedPoint { residual: r });
        }
    }
    Ok(())
}

/// A fixed point of `f` below a t-stable periodic orbit.
pub fn fixed_from_periodic(f: &MapSpec, orbit: &[Vec<f64>], cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    require_cycle(f, orbit, cfg)?;
    let p = orbit.len();
    let fp = power_map(f, p, cfg)?;
    if certify_tstable(&orbit_derivative(f, orbit, cfg)?, cfg).outcome == Outcome::Unstable {
        return Err(Error::UnstableFixedPoint);
    }
    let n = f.n();
    let z: Vec<f64> = (0..n).map(|i| orbit.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min)).collect();
    let u = omega_limit(&fp, &z, cfg)?;
    require_fixed(f, &u, cfg)?;
    Ok(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointReport {
    pub point: Vec<f64>,
    pub residual: f64,
    pub tstable: Outcome,
    pub critical_nodes: Vec<usize>,
    /// Absent when the point is not t-stable.
    pub critical_graph: Option<Digraph>,
    pub cyclicity: Option<u64>,
}

pub fn fixed_point_report(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> Result<FixedPointReport> {
    let cert = is_tstable_fixed(f, v, cfg)?;
    let mut report = FixedPointReport {
        point: v.to_vec(),
        residual: residual(f, v),
        tstable: cert.outcome,
        critical_nodes: Vec::new(),
        critical_graph: None,
        cyclicity: None,
    };
    if cert.outcome != Outcome::Unstable {
        let cg = map_critical_graph(f, v, cfg)?;
        report.critical_nodes = cg.nodes;
        report.cyclicity = Some(cg.cyclicity);
        report.critical_graph = Some(cg.graph);
    }
    Ok(report)
}
