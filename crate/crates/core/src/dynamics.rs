//! Orbits, periods, the power identity for critical graphs, global
//! classification through the recession map, and the rotation example.

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::fixed_points::{
    derivative_critical_graph, fixed_point_report, omega_limit, sup_dist, sup_norm, MapCriticalGraph,
};
use crate::homogeneous::{certify_tstable, Outcome, WeightedNorm, NORM_SLACK};
use crate::map_model::{directional_derivative, power_map, recession, HomogeneousMap, MapSpec, MonotoneMap};
use crate::nonneg_matrix::{is_stable, Digraph, NonnegMatrix, Verification};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitStatus {
    Converged,
    Periodic,
    Diverged,
    Capped,
}

impl OrbitStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitStatus::Converged => "converged",
            OrbitStatus::Periodic => "periodic",
            OrbitStatus::Diverged => "diverged",
            OrbitStatus::Capped => "capped",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord {
    pub start: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub status: OrbitStatus,
    pub step_tol: f64,
}

/// Iterates until a step falls below `eps_fix`, a coordinate leaves the
/// magnitude bound, or `kmax` steps are taken. A capped run whose tail
/// recurs within `eps_cycle` is marked periodic.
pub fn simulate(f: &dyn MonotoneMap, x0: &[f64], kmax: usize, cfg: &AnalysisConfig) -> OrbitRecord {
    let mut states = vec![x0.to_vec()];
    let mut status = OrbitStatus::Capped;
    for _ in 0..kmax {
        let x = states.last().expect("non-empty");
        let next = f.apply(x);
        if next.iter().any(|v| !(v.abs() <= cfg.caps.magnitude)) {
            states.push(next);
            status = OrbitStatus::Diverged;
            break;
        }
        let step = sup_dist(&next, x);
        states.push(next);
        if step < cfg.tol.eps_fix {
            status = OrbitStatus::Converged;
            break;
        }
    }
    if status == OrbitStatus::Capped && recurrence(&states, cfg).is_some() {
        status = OrbitStatus::Periodic;
    }
    OrbitRecord { start: x0.to_vec(), states, status, step_tol: cfg.tol.eps_fix }
}

/// Smallest lag `p <= pmax` such that the last `p + 1` pairs of states `p`
/// apart agree within `eps_cycle`.
fn recurrence(states: &[Vec<f64>], cfg: &AnalysisConfig) -> Option<usize> {
    let len = states.len();
    (1..=cfg.caps.pmax).find(|&p| {
        if len < p + 2 {
            return false;
        }
        let first = len.saturating_sub(2 * p + 1);
        (first..len - p).all(|k| {
            let tol = cfg.tol.eps_cycle * sup_norm(&states[k]).max(1.0);
            sup_dist(&states[k], &states[k + p]) <= tol
        })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodReport {
    pub period: usize,
    pub orbit_points: Vec<Vec<f64>>,
    /// Largest `||f^p(x) - x||` over the orbit points.
    pub residual: f64,
    pub cyclicity: Option<u64>,
    pub divides: Option<bool>,
}

fn apply_n(f: &dyn MonotoneMap, x: &[f64], n: usize) -> Vec<f64> {
    let mut y = x.to_vec();
    for _ in 0..n {
        y = f.apply(&y);
    }
    y
}

fn cycle_from(f: &dyn MonotoneMap, x: &[f64], p: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![x.to_vec()];
    for _ in 1..p {
        pts.push(f.apply(pts.last().expect("non-empty")));
    }
    pts
}

fn cycle_residual(f: &dyn MonotoneMap, pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|x| sup_dist(&apply_n(f, x, pts.len()), x)).fold(0.0, f64::max)
}

/// Runs further rounds of `f^p` from `x` while that shrinks the residual.
fn polish(f: &dyn MonotoneMap, x: &[f64], p: usize, cfg: &AnalysisConfig) -> Vec<Vec<f64>> {
    let mut best = cycle_from(f, x, p);
    let mut best_res = cycle_residual(f, &best);
    let rounds = cfg.caps.iterations / p.max(1);
    let mut cur = x.to_vec();
    for _ in 0..rounds {
        if best_res <= 1e-3 * cfg.tol.eps_fix {
            break;
        }
        cur = apply_n(f, &cur, p);
        let cand = cycle_from(f, &cur, p);
        let res = cycle_residual(f, &cand);
        if res < best_res {
            best = cand;
            best_res = res;
        } else if res > 2.0 * best_res {
            break;
        }
    }
    best
}

/// Minimal period of the trailing part of an orbit. `fixed_point` supplies a
/// t-stable fixed point for the cyclicity; without it one is searched for
/// below the orbit.
pub fn detect_period(
    f: &MapSpec,
    tail: &[Vec<f64>],
    fixed_point: Option<&[f64]>,
    cfg: &AnalysisConfig,
) -> Result<PeriodReport> {
    let p = recurrence(tail, cfg).ok_or(Error::NoPeriod { pmax: cfg.caps.pmax })?;
    let start = &tail[tail.len() - p];
    let orbit_points = polish(f, start, p, cfg);
    let residual = cycle_residual(f, &orbit_points);
    let found;
    let v = match fixed_point {
        Some(v) => Some(v),
        None => {
            found = fixed_point_below(f, &orbit_points, cfg);
            found.as_deref()
        }
    };
    let cyclicity = v.and_then(|v| {
        let report = fixed_point_report(f, v, cfg).ok()?;
        if report.tstable == Outcome::Unstable {
            return None;
        }
        report.cyclicity
    });
    Ok(PeriodReport {
        period: p,
        orbit_points,
        residual,
        cyclicity,
        divides: cyclicity.map(|c| c % p as u64 == 0),
    })
}

/// The omega limit of the minimum over an orbit, when that minimum is
/// sub-fixed.
pub fn fixed_point_below(f: &dyn MonotoneMap, orbit: &[Vec<f64>], cfg: &AnalysisConfig) -> Option<Vec<f64>> {
    let n = f.dim();
    let z: Vec<f64> = (0..n).map(|i| orbit.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min)).collect();
    omega_limit(f, &z, cfg).ok()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerIdentity {
    pub k: usize,
    pub holds: bool,
    /// Critical graph of the k-th power.
    pub lhs: Digraph,
    /// Walks of length k in the critical graph.
    pub rhs: Digraph,
    pub verification: Verification,
}

/// Compares the critical graph of `f^k` with the k-step path graph of the
/// critical graph of `f`, both at the fixed point `v`.
///
/// Since `v` is fixed, the derivative of `f^k` at `v` is the k-th power of
/// the derivative of `f` at `v`; the power is taken on the derivative, whose
/// representation stays small.
pub fn verify_power_identity(f: &MapSpec, v: &[f64], k: usize, cfg: &AnalysisConfig) -> Result<PowerIdentity> {
    crate::fixed_points::require_fixed(f, v, cfg)?;
    let h = directional_derivative(f, v, cfg);
    let base = derivative_critical_graph(&h, cfg)?;
    let hk = HomogeneousMap::from_spec(&power_map(&h.to_spec(), k, cfg)?)?;
    let power: MapCriticalGraph = derivative_critical_graph(&hk, cfg)?;
    let rhs = base.graph.path_power(k);
    let verification = match (&base.verification, &power.verification) {
        (Verification::Exhaustive, Verification::Exhaustive) => Verification::Exhaustive,
        (a, b) => {
            let count = |v: &Verification| if let Verification::Partial { sampled } = v { *sampled } else { 0 };
            Verification::Partial { sampled: count(a) + count(b) }
        }
    };
    Ok(PowerIdentity { k, holds: power.graph == rhs, lhs: power.graph, rhs, verification })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalReport {
    pub outcome: Outcome,
    pub norm: Option<WeightedNorm>,
    /// Sampled worst expansion of f itself under the norm.
    pub max_expansion: Option<f64>,
    pub fixed_point: Option<Vec<f64>>,
    pub cyclicity: Option<u64>,
    pub conclusion: String,
}

impl GlobalReport {
    pub fn certified(&self) -> bool {
        self.outcome == Outcome::Certified
    }
}

pub fn classify_global(f: &MapSpec, cfg: &AnalysisConfig) -> GlobalReport {
    let cert = certify_tstable(&recession(f), cfg);
    let mut report = GlobalReport {
        outcome: cert.outcome,
        norm: None,
        max_expansion: None,
        fixed_point: None,
        cyclicity: None,
        conclusion: String::new(),
    };
    match cert.outcome {
        Outcome::Unstable => {
            report.conclusion = "no global-convergence certificate".into();
            return report;
        }
        Outcome::NecessaryOnly => {
            report.conclusion = "recession map passes sampled selection checks only; no certificate".into();
            return report;
        }
        Outcome::Certified => {}
    }
    let norm = cert.norm.expect("certified outcome carries a norm");
    let expansion = norm.max_expansion(|x| f.eval(x), cfg.caps.norm_samples, cfg.seed);
    report.max_expansion = Some(expansion);
    report.norm = Some(norm);
    if expansion > NORM_SLACK {
        report.outcome = Outcome::NecessaryOnly;
        report.conclusion = format!("map expands the recession norm by {expansion:e} on samples");
        return report;
    }
    report.fixed_point = search_fixed_point(f, cfg);
    match &report.fixed_point {
        Some(v) => {
            report.cyclicity = fixed_point_report(f, v, cfg).ok().and_then(|r| r.cyclicity);
            report.conclusion = match report.cyclicity {
                Some(c) => format!("every orbit converges to a periodic orbit with period dividing {c}"),
                None => "every orbit converges to a periodic orbit".into(),
            };
        }
        None => report.conclusion = "no fixed point found".into(),
    }
    report
}

/// Fixed point reached from the origin, directly or below a periodic orbit.
pub fn search_fixed_point(f: &MapSpec, cfg: &AnalysisConfig) -> Option<Vec<f64>> {
    let orbit = simulate(f, &vec![0.0; f.n()], cfg.caps.iterations, cfg);
    match orbit.status {
        OrbitStatus::Converged => orbit.states.last().cloned(),
        OrbitStatus::Periodic => {
            let p = recurrence(&orbit.states, cfg)?;
            let pts = polish(f, &orbit.states[orbit.states.len() - p], p, cfg);
            fixed_point_below(f, &pts, cfg)
        }
        OrbitStatus::Diverged | OrbitStatus::Capped => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationInstance {
    pub period: usize,
    pub angle: f64,
    /// Shear parameter of the change of basis, shrunk until B >= 0.
    pub shear: f64,
    pub b: f64,
    pub matrix: NonnegMatrix,
    /// A point of the rotation plane.
    pub point: Vec<f64>,
    pub stable: bool,
    pub detected_period: Option<usize>,
    /// `||B^p x - x||`
    pub closing_error: f64,
    /// `min over 1 <= m < p of ||B^m x - x||`
    pub min_gap: f64,
}

/// `B = P A P^-1` with `A` a rotation by `2 pi / p` in the first two
/// coordinates and scaling by `b` in the third, and
/// `P = [[1,0,1],[0,1,1],[-s,-s,1]]`.
pub fn rotation_matrix(p: usize, shear: f64, b: f64) -> [[f64; 3]; 3] {
    let t = 2.0 * std::f64::consts::PI / p as f64;
    let (c, s) = (t.cos(), t.sin());
    let a = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, b]];
    let pm = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [-shear, -shear, 1.0]];
    let pinv = inverse3(&pm);
    mul3(&mul3(&pm, &a), &pinv)
}

fn mul3(x: &[[f64; 3]; 3], y: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = adj[i][j] / det;
        }
    }
    out
}

/// Entries this close below zero are rounding noise and are clamped.
const CLAMP: f64 = 1e-12;

pub fn rotation_counterexample(p: usize, b: f64, cfg: &AnalysisConfig) -> Result<RotationInstance> {
    if p < 1 {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let mut shear = 1.0f64;
    let raw = loop {
        let m = rotation_matrix(p, shear, b);
        if m.iter().flatten().all(|v| *v >= -CLAMP) {
            break m;
        }
        shear *= 0.95;
        if shear < 1e-6 {
            return Err(Error::InvalidInput(format!("no nonnegative conjugate found for period {p}")));
        }
    };
    let rows = raw.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect();
    let matrix = NonnegMatrix::new(rows)?;
    let stable = is_stable(&matrix, cfg)?;
    let point = vec![1.0, 0.0, -shear];
    let states: Vec<Vec<f64>> = {
        let mut s = vec![point.clone()];
        for _ in 0..3 * p {
            s.push(matrix.mul_vec(s.last().expect("non-empty")));
        }
        s
    };
    let closing_error = sup_dist(&states[p], &point);
    let min_gap = (1..p).map(|m| sup_dist(&states[m], &point)).fold(f64::INFINITY, f64::min);
    let detected_period = recurrence(&states, cfg);
    Ok(RotationInstance {
        period: p,
        angle: 2.0 * std::f64::consts::PI / p as f64,
        shear,
        b,
        matrix,
        point,
        stable,
        detected_period,
        closing_error,
        min_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{AffineTerm, ClosureMap};

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    fn lin(rows: &[&[f64]]) -> MapSpec {
        MapSpec::linear(&NonnegMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap())
    }

    fn example_one() -> ClosureMap<impl Fn(&[f64]) -> Vec<f64>> {
        ClosureMap::new(1, |x: &[f64]| vec![(x[0] + x[0] * x[0]).max(0.0)])
    }

    #[test]
    fn simulate_examples() {
        let c = cfg();
        assert_eq!(simulate(&example_one(), &[0.1], 1000, &c).status, OrbitStatus::Diverged);
        let r = simulate(&example_one(), &[-0.5], 1000, &c);
        assert_eq!(r.status, OrbitStatus::Converged);
        assert_eq!(r.states.last().unwrap(), &vec![0.0]);
        let r = simulate(&lin(&[&[0.5]]), &[1.0], 1000, &c);
        assert_eq!(r.status, OrbitStatus::Converged);
        assert!(r.states.last().unwrap()[0].abs() < 1e-9);
        let r = simulate(&lin(&[&[0.0, 1.0], &[1.0, 0.0]]), &[1.0, 2.0], 50, &c);
        assert_eq!(r.status, OrbitStatus::Periodic);
    }

    #[test]
    fn period_examples() {
        let c = cfg();
        let f = lin(&[&[0.5]]);
        let r = detect_period(&f, &[vec![0.0], vec![0.0], vec![0.0]], None, &c).unwrap();
        assert_eq!((r.period, r.cyclicity, r.divides), (1, Some(1), Some(true)));
        let swap = lin(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let orbit = simulate(&swap, &[1.0, 2.0], 20, &c);
        let r = detect_period(&swap, &orbit.states, None, &c).unwrap();
        assert_eq!((r.period, r.cyclicity, r.divides), (2, Some(2), Some(true)));
        assert_eq!(r.residual, 0.0);
        let inst = rotation_counterexample(3, 3.0, &c).unwrap();
        let b = MapSpec::linear(&inst.matrix);
        let states: Vec<Vec<f64>> = crate::map_model::iterate(&b, &inst.point, 9, &c).unwrap();
        let r = detect_period(&b, &states, None, &c).unwrap();
        assert_eq!(r.period, 3);
        assert!(sup_dist(&apply_n(&b, &inst.point, 3), &inst.point) <= 1e-8);
    }

    #[test]
    fn slowly_converging_orbit_is_not_given_a_multiple_period() {
        let c = cfg();
        let f = lin(&[&[0.0, 1.0], &[0.999, 0.0]]);
        let orbit = simulate(&f, &[1.0, 0.0], 40, &c);
        assert!(detect_period(&f, &orbit.states, None, &c).is_err());
    }

    #[test]
    fn power_identity_examples() {
        let c = cfg();
        let cyc = lin(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let r = verify_power_identity(&cyc, &[0.0; 3], 3, &c).unwrap();
        assert!(r.holds);
        assert_eq!(r.lhs.arcs(), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(verify_power_identity(&cyc, &[0.0; 3], 1, &c).unwrap().holds);
        let proj = lin(&[&[0.0, 0.5, 0.5], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let r = verify_power_identity(&proj, &[1.0, 1.0, 1.0], 2, &c).unwrap();
        assert!(r.holds);
        assert_eq!(r.lhs.arcs(), vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn global_examples() {
        let c = cfg();
        let swap = lin(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let g = classify_global(&swap, &c);
        assert!(g.certified());
        assert_eq!(g.cyclicity, Some(2));
        let f = MapSpec::max_affine(1, vec![vec![AffineTerm { r: 0.0, p: vec![0.0] }, AffineTerm { r: 0.0, p: vec![2.0] }]]).unwrap();
        let g = classify_global(&f, &c);
        assert_eq!(g.outcome, Outcome::Unstable);
        assert_eq!(g.conclusion, "no global-convergence certificate");
        let sub = MapSpec::max_affine(
            2,
            vec![
                vec![AffineTerm { r: 0.0, p: vec![0.5, 0.5] }, AffineTerm { r: -1.0, p: vec![1.0, 0.0] }],
                vec![AffineTerm { r: 1.0, p: vec![0.0, 0.5] }],
            ],
        )
        .unwrap();
        let g = classify_global(&sub, &c);
        assert!(g.certified());
        assert!(g.fixed_point.is_some());
        assert!(g.cyclicity.is_some());
    }

    #[test]
    fn global_without_fixed_point() {
        let c = cfg();
        let up = MapSpec::affine(&NonnegMatrix::identity(1), &[1.0]);
        let g = classify_global(&up, &c);
        assert!(g.certified());
        assert_eq!(g.fixed_point, None);
        assert_eq!(g.conclusion, "no fixed point found");
    }

    #[test]
    fn rotation_periods_three_to_six() {
        let c = cfg();
        for p in 3..=6 {
            let inst = rotation_counterexample(p, 3.0, &c).unwrap();
            assert!(!inst.stable);
            assert_eq!(inst.detected_period, Some(p));
            assert!(inst.closing_error <= 1e-8);
            assert!(inst.min_gap > 1e-4);
            assert!((0..3).all(|i| (0..3).all(|j| inst.matrix.get(i, j) >= 0.0)));
        }
    }
}
