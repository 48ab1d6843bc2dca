//! Max-of-linear maps fixing the origin: A/B split, positive eigenvectors,
//! Collatz-Wielandt radius and the polyhedral norm certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::map_model::HomogeneousMap;
use crate::nonneg_matrix::{
    critical_graph_witness, decompose, digraph, graph_union_witness, right_perron, Digraph,
    NonnegMatrix, Verification,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ABSplit {
    /// Nodes with a path to a critical node.
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub critical_nodes: Vec<usize>,
    pub critical_graph: Digraph,
    /// Member of the generator set realizing the critical graph.
    pub witness: NonnegMatrix,
    pub verification: Verification,
}

pub fn ab_split(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<ABSplit> {
    let gens = h.generators();
    let w = critical_graph_witness(gens, cfg)?;
    let g = digraph(&graph_union_witness(gens), cfg.tol.arc);
    let reach = g.reversed().reachable_from(&w.critical_nodes);
    let n = h.n();
    let a: Vec<usize> = (0..n).filter(|&i| reach[i]).collect();
    let b: Vec<usize> = (0..n).filter(|&i| !reach[i]).collect();
    for &i in &b {
        for gen in gens.row(i) {
            if let Some(&j) = a.iter().find(|&&j| gen[j] > cfg.tol.arc) {
                return Err(Error::BlockStructure { row: i, col: j });
            }
        }
    }
    Ok(ABSplit {
        a,
        b,
        critical_nodes: w.critical_nodes,
        critical_graph: w.graph,
        witness: w.matrix,
        verification: w.verification,
    })
}

fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a.abs()).fold(0.0, f64::max)
}

/// Fixed point of `h`, positive on A and zero on B.
///
/// Starts from Perron vectors of the witness on its critical classes and
/// runs the averaged iteration `x <- (x + h(x)) / 2`, which has the same
/// fixed points as `h` but does not oscillate on periodic classes.
pub fn positive_eigenvector(h: &HomogeneousMap, split: &ABSplit, cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    if split.critical_nodes.is_empty() {
        return Err(Error::NoCriticalNodes);
    }
    let n = h.n();
    let mut x = vec![0.0; n];
    let dec = decompose(&split.witness, cfg)?;
    for cls in dec.critical_classes() {
        let u = right_perron(&split.witness, &cls, cfg)?;
        for (&i, ui) in cls.iter().zip(u) {
            x[i] = ui;
        }
    }
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..cfg.caps.iterations {
        let hx = h.eval(&x);
        let next: Vec<f64> = x.iter().zip(&hx).map(|(a, b)| 0.5 * (a + b)).collect();
        let step = sup_dist(&next, &x);
        x = next;
        if step <= 4.0 * f64::EPSILON * sup_norm(&x) {
            break;
        }
        if step < best {
            best = step;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 50 {
                break;
            }
        }
    }
    let residual = sup_dist(&h.eval(&x), &x);
    if residual > cfg.tol.eps_fix * sup_norm(&x).max(1.0) {
        return Err(Error::NotConverged { what: "positive eigenvector", iterations: cfg.caps.iterations });
    }
    for &i in &split.b {
        x[i] = 0.0;
    }
    if let Some(&i) = split.a.iter().find(|&&i| x[i] < cfg.tol.delta) {
        return Err(Error::Internal(format!("eigenvector vanishes at node {} of A", i + 1)));
    }
    Ok(x)
}

/// Upper Collatz-Wielandt estimate along a shifted power iteration on an
/// irreducible generator set, stopped once the ratio bracket closes.
fn block_radius(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<f64> {
    let m = h.n();
    let shift = sup_norm(&h.eval(&vec![1.0; m]));
    if shift == 0.0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0; m];
    for _ in 0..cfg.caps.iterations {
        let y = h.eval(&x);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(&x) {
            lo = lo.min(yi / xi);
            hi = hi.max(yi / xi);
        }
        if hi - lo <= cfg.tol.eps_rho / 10.0 * hi.max(1.0) {
            return Ok(hi);
        }
        let top = y.iter().zip(&x).map(|(a, b)| a + shift * b).fold(0.0, f64::max);
        x = y.iter().zip(&x).map(|(a, b)| (a + shift * b) / top).collect();
    }
    Err(Error::NotConverged { what: "Collatz-Wielandt iteration", iterations: cfg.caps.iterations })
}

/// Cone spectral radius, maximized over the strongly connected blocks of the
/// generator union graph.
pub fn cw_radius(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<f64> {
    let g = digraph(&graph_union_witness(h.generators()), cfg.tol.arc);
    let mut tau = 0.0f64;
    for block in g.sccs() {
        if g.has_circuit_in(&block) {
            tau = tau.max(block_radius(&h.restrict(&block), cfg)?);
        }
    }
    Ok(tau)
}

/// `(lambda, w)` with `w >= 1` and `hB(w) = lambda (w - 1) <= lambda w`.
pub fn sub_eigenpair(hb: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<(f64, Vec<f64>)> {
    let tau = cw_radius(hb, cfg)?;
    if tau >= 1.0 - cfg.tol.eps_rho {
        return Err(Error::RadiusNotBelowOne { tau });
    }
    let lambda = 0.5 * (1.0 + tau);
    let mut w = vec![1.0; hb.n()];
    for _ in 0..cfg.caps.iterations {
        let next: Vec<f64> = hb.eval(&w).iter().map(|v| 1.0 + v / lambda).collect();
        let step = sup_dist(&next, &w);
        w = next;
        if step <= cfg.tol.eps_fix * sup_norm(&w) {
            return Ok((lambda, w));
        }
    }
    Err(Error::NotConverged { what: "sub-eigenvector iteration", iterations: cfg.caps.iterations })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNorm {
    pub v: Vec<f64>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub alpha: f64,
    pub verified_pairs: usize,
}

impl WeightedNorm {
    pub fn norm(&self, x: &[f64]) -> f64 {
        let part = |set: &[usize]| set.iter().map(|&i| (x[i] / self.v[i]).abs()).fold(0.0, f64::max);
        part(&self.a) + self.alpha * part(&self.b)
    }

    /// Largest `norm(f(x) - f(y)) - norm(x - y)` over random pairs, relative
    /// to `max(1, norm(x - y))`.
    pub fn max_expansion<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F, samples: usize, seed: u64) -> f64 {
        let n = self.v.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::NEG_INFINITY;
        for s in 0..samples {
            let scale = [0.01, 1.0, 100.0][s % 3];
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
            let before = self.norm(&diff(&x, &y));
            let after = self.norm(&diff(&f(&x), &f(&y)));
            worst = worst.max((after - before) / before.max(1.0));
        }
        worst
    }
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Tolerance of the sampled non-expansiveness check.
pub const NORM_SLACK: f64 = 1e-10;

pub fn build_norm(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Result<WeightedNorm> {
    let split = ab_split(h, cfg)?;
    norm_from_split(h, &split, cfg)
}

fn norm_from_split(h: &HomogeneousMap, split: &ABSplit, cfg: &AnalysisConfig) -> Result<WeightedNorm> {
    let n = h.n();
    let mut v = if split.a.is_empty() { vec![0.0; n] } else { positive_eigenvector(h, split, cfg)? };
    let mut alpha = 1.0;
    if !split.b.is_empty() {
        let (lambda, w) = sub_eigenpair(&h.restrict(&split.b), cfg)?;
        for (&i, wi) in split.b.iter().zip(&w) {
            v[i] = *wi;
        }
        if !split.a.is_empty() {
            let mut probe = vec![0.0; n];
            for &i in &split.b {
                probe[i] = v[i];
            }
            let hp = h.eval(&probe);
            let c = split.a.iter().map(|&i| hp[i] / v[i]).fold(0.0, f64::max);
            if c > 0.0 {
                alpha = 2.0 * c / (1.0 - lambda);
            }
        }
    }
    let mut norm = WeightedNorm { v, a: split.a.clone(), b: split.b.clone(), alpha, verified_pairs: 0 };
    let excess = norm.max_expansion(|x| h.eval(x), cfg.caps.norm_samples, cfg.seed);
    if excess > NORM_SLACK {
        return Err(Error::CertificateFailed { excess });
    }
    norm.verified_pairs = cfg.caps.norm_samples;
    Ok(norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Certified,
    NecessaryOnly,
    Unstable,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Certified => "Certified",
            Outcome::NecessaryOnly => "NecessaryOnly",
            Outcome::Unstable => "Unstable",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub outcome: Outcome,
    pub norm: Option<WeightedNorm>,
    pub split: Option<ABSplit>,
    /// Generator index per row of an unstable selection.
    pub unstable_selection: Option<Vec<usize>>,
    pub detail: Option<String>,
}

pub fn certify_tstable(h: &HomogeneousMap, cfg: &AnalysisConfig) -> Certification {
    let none = |outcome, detail: Option<String>| Certification {
        outcome,
        norm: None,
        split: None,
        unstable_selection: None,
        detail,
    };
    let split = match ab_split(h, cfg) {
        Ok(s) => s,
        Err(Error::UnstableSelection { selection }) => {
            return Certification { unstable_selection: Some(selection), ..none(Outcome::Unstable, None) }
        }
        Err(e) => return none(Outcome::NecessaryOnly, Some(e.to_string())),
    };
    if let Verification::Partial { sampled } = split.verification {
        let detail = format!("selection enumeration capped, {sampled} sampled");
        return Certification { split: Some(split), ..none(Outcome::NecessaryOnly, Some(detail)) };
    }
    match norm_from_split(h, &split, cfg) {
        Ok(norm) => Certification { norm: Some(norm), split: Some(split), ..none(Outcome::Certified, None) },
        Err(e) => Certification { split: Some(split), ..none(Outcome::NecessaryOnly, Some(e.to_string())) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonneg_matrix::RectangularSet;
    use approx::assert_relative_eq;

    fn mat(rows: &[&[f64]]) -> HomogeneousMap {
        HomogeneousMap::from_matrix(&NonnegMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap())
    }

    fn scalar_max(slopes: &[f64]) -> HomogeneousMap {
        HomogeneousMap::new(RectangularSet::new(1, vec![slopes.iter().map(|s| vec![*s]).collect()]).unwrap())
    }

    fn projection() -> HomogeneousMap {
        mat(&[&[0.0, 0.5, 0.5], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])
    }

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn split_examples() {
        let s = ab_split(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), &cfg()).unwrap();
        assert_eq!((s.critical_nodes, s.a, s.b), (vec![0, 1], vec![0, 1], vec![]));
        let s = ab_split(&projection(), &cfg()).unwrap();
        assert_eq!((s.critical_nodes, s.a, s.b), (vec![1, 2], vec![0, 1, 2], vec![]));
        let s = ab_split(&mat(&[&[0.5]]), &cfg()).unwrap();
        assert_eq!((s.critical_nodes, s.a, s.b), (vec![], vec![], vec![0]));
    }

    #[test]
    fn eigenvector_examples() {
        let c = cfg();
        for h in [mat(&[&[0.0, 1.0], &[1.0, 0.0]]), projection(), mat(&[&[1.0]])] {
            let s = ab_split(&h, &c).unwrap();
            let v = positive_eigenvector(&h, &s, &c).unwrap();
            let top = v.iter().cloned().fold(0.0, f64::max);
            for x in &v {
                assert_relative_eq!(x / top, 1.0, epsilon = 1e-9);
            }
        }
        let h = mat(&[&[0.5]]);
        let s = ab_split(&h, &c).unwrap();
        assert_eq!(positive_eigenvector(&h, &s, &c), Err(Error::NoCriticalNodes));
    }

    #[test]
    fn eigenvector_of_weighted_cycle_is_exact() {
        let c = cfg();
        let h = mat(&[&[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0], &[0.5, 0.0, 0.0]]);
        let s = ab_split(&h, &c).unwrap();
        let v = positive_eigenvector(&h, &s, &c).unwrap();
        assert!(sup_dist(&h.eval(&v), &v) <= 1e-14);
    }

    #[test]
    fn cw_radius_examples() {
        let c = cfg();
        assert_relative_eq!(cw_radius(&mat(&[&[0.5]]), &c).unwrap(), 0.5);
        assert_relative_eq!(cw_radius(&scalar_max(&[0.3, 0.6]), &c).unwrap(), 0.6);
        assert_relative_eq!(cw_radius(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), &c).unwrap(), 1.0, epsilon = 1e-9);
        assert_eq!(cw_radius(&mat(&[&[0.0, 1.0], &[0.0, 0.0]]), &c).unwrap(), 0.0);
    }

    #[test]
    fn sub_eigenpair_examples() {
        let c = cfg();
        let (l, w) = sub_eigenpair(&mat(&[&[0.5]]), &c).unwrap();
        assert_relative_eq!(l, 0.75, epsilon = 1e-12);
        assert_relative_eq!(w[0], 3.0, epsilon = 1e-8);
        let (l, w) = sub_eigenpair(&mat(&[&[0.0]]), &c).unwrap();
        assert_eq!((l, w), (0.5, vec![1.0]));
        let (l, w) = sub_eigenpair(&scalar_max(&[0.3, 0.6]), &c).unwrap();
        assert_relative_eq!(l, 0.8, epsilon = 1e-12);
        assert_relative_eq!(w[0], 4.0, epsilon = 1e-8);
        assert!(matches!(sub_eigenpair(&mat(&[&[1.0]]), &c), Err(Error::RadiusNotBelowOne { .. })));
    }

    #[test]
    fn norm_examples() {
        let c = cfg();
        let n = build_norm(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), &c).unwrap();
        assert!(n.b.is_empty());
        assert_relative_eq!(n.norm(&[2.0, -3.0]) * n.v[0], 3.0, epsilon = 1e-9);
        let n = build_norm(&mat(&[&[0.5]]), &c).unwrap();
        assert_eq!((n.a.len(), n.b.clone(), n.alpha), (0, vec![0], 1.0));
        assert_eq!(n.verified_pairs, 1000);
        let n = build_norm(&mat(&[&[1.0, 0.0], &[0.0, 1.0]]), &c).unwrap();
        assert_eq!(n.alpha, 1.0);
    }

    #[test]
    fn norm_with_both_parts() {
        let c = cfg();
        // node 0 critical, node 1 feeds it and decays
        let h = HomogeneousMap::new(
            RectangularSet::new(
                3,
                vec![
                    vec![vec![1.0, 0.0, 0.0]],
                    vec![vec![0.3, 0.2, 0.0], vec![0.0, 0.5, 0.0]],
                    vec![vec![0.0, 0.0, 0.4], vec![0.0, 0.0, 0.2]],
                ],
            )
            .unwrap(),
        );
        let n = build_norm(&h, &c).unwrap();
        assert_eq!((n.a.clone(), n.b.clone()), (vec![0, 1], vec![2]));
        let (l, w) = sub_eigenpair(&h.restrict(&[2]), &c).unwrap();
        assert!(h.restrict(&[2]).eval(&w)[0] <= l * w[0]);
    }

    #[test]
    fn certification_examples() {
        let c = cfg();
        assert_eq!(certify_tstable(&mat(&[&[1.0, 1.0], &[0.0, 1.0]]), &c).outcome, Outcome::Unstable);
        assert_eq!(certify_tstable(&scalar_max(&[0.0, 2.0]), &c).outcome, Outcome::Unstable);
        assert_eq!(certify_tstable(&scalar_max(&[0.0, 1.0]), &c).outcome, Outcome::Certified);
        let mut capped = cfg();
        capped.caps.selections = 2;
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let h = HomogeneousMap::new(RectangularSet::new(2, vec![e.clone(), e]).unwrap());
        assert_eq!(certify_tstable(&h, &c).outcome, Outcome::Certified);
        assert_eq!(certify_tstable(&h, &capped).outcome, Outcome::NecessaryOnly);
    }
}
