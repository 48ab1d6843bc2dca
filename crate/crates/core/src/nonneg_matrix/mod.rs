//! Nonnegative matrices: digraphs, classes, stability, normal forms.

mod graph;
mod perron;
pub mod selection;

pub use graph::{gcd, lcm, Digraph};
pub use selection::{
    critical_graph_witness, graph_union_witness, max_selection_radius, CriticalWitness,
    RectangularSet, Verification,
};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};

/// Dense nonnegative square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegMatrix {
    n: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (j, v) in row.into_iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidInput(format!("entry ({}, {}) = {v} is not a finite nonnegative number", i + 1, j + 1)));
                }
                data.push(v);
            }
        }
        Ok(NonnegMatrix { n, data })
    }

    pub(crate) fn from_flat(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        debug_assert!(data.iter().all(|v| *v >= 0.0));
        NonnegMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        NonnegMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul(&self, other: &NonnegMatrix) -> NonnegMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..n {
                        data[i * n + j] += a * other.get(k, j);
                    }
                }
            }
        }
        NonnegMatrix { n, data }
    }

    /// Principal submatrix on `nodes`, in the given order.
    pub fn principal(&self, nodes: &[usize]) -> NonnegMatrix {
        let m = nodes.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in nodes {
            for &j in nodes {
                data.push(self.get(i, j));
            }
        }
        NonnegMatrix { n: m, data }
    }

    pub fn row_sum_max(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).iter().sum::<f64>()).fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn digraph(p: &NonnegMatrix, tol: f64) -> Digraph {
    let n = p.n();
    let mut g = Digraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if p.get(i, j) > tol {
                g.add_arc(i, j);
            }
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDecomposition {
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// Access relation between distinct classes (transitively closed).
    pub condensation: Digraph,
    pub radii: Vec<f64>,
    pub critical: Vec<bool>,
    /// The digraph the classes were computed from.
    pub graph: Digraph,
}

impl ClassDecomposition {
    pub fn spectral_radius(&self) -> f64 {
        self.radii.iter().cloned().fold(0.0, f64::max)
    }

    pub fn critical_classes(&self) -> Vec<Vec<usize>> {
        self.classes
            .iter()
            .zip(&self.critical)
            .filter(|(_, &c)| c)
            .map(|(c, _)| c.clone())
            .collect()
    }

    pub fn critical_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.critical_classes().into_iter().flatten().collect();
        nodes.sort_unstable();
        nodes
    }

    pub fn is_stable(&self, eps_rho: f64) -> bool {
        if self.spectral_radius() > 1.0 + eps_rho {
            return false;
        }
        !self.condensation.arcs().into_iter().any(|(a, b)| self.critical[a] && self.critical[b])
    }

    /// Arcs of the digraph restricted to critical nodes.
    pub fn critical_graph(&self) -> Digraph {
        let mut keep = vec![false; self.graph.n()];
        for i in self.critical_nodes() {
            keep[i] = true;
        }
        self.graph.induced(&keep)
    }
}

pub fn decompose(p: &NonnegMatrix, cfg: &AnalysisConfig) -> Result<ClassDecomposition> {
    let g = digraph(p, cfg.tol.arc);
    let classes = g.sccs();
    let mut class_of = vec![0; p.n()];
    for (c, cls) in classes.iter().enumerate() {
        for &i in cls {
            class_of[i] = c;
        }
    }
    let k = classes.len();
    let mut direct = Digraph::empty(k);
    for (i, j) in g.arcs() {
        if class_of[i] != class_of[j] {
            direct.add_arc(class_of[i], class_of[j]);
        }
    }
    let mut condensation = Digraph::empty(k);
    for c in 0..k {
        for (d, reached) in direct.reachable_from(&[c]).into_iter().enumerate() {
            if reached && d != c {
                condensation.add_arc(c, d);
            }
        }
    }
    let mut radii = Vec::with_capacity(k);
    for cls in &classes {
        let block = p.principal(cls);
        let radius = if g.has_circuit_in(cls) {
            perron::perron(&block.data, cls.len(), false, cfg)?.radius
        } else {
            0.0
        };
        radii.push(radius);
    }
    let critical = radii.iter().map(|r| (r - 1.0).abs() <= cfg.tol.eps_rho).collect();
    Ok(ClassDecomposition { classes, class_of, condensation, radii, critical, graph: g })
}

pub fn spectral_radius(p: &NonnegMatrix, cfg: &AnalysisConfig) -> Result<f64> {
    Ok(decompose(p, cfg)?.spectral_radius())
}

/// Bounded powers, decided combinatorially: radius at most one and no
/// critical class with access to another.
pub fn is_stable(p: &NonnegMatrix, cfg: &AnalysisConfig) -> Result<bool> {
    Ok(decompose(p, cfg)?.is_stable(cfg.tol.eps_rho))
}

/// Critical digraph and node set of a stable matrix.
pub fn critical_graph(p: &NonnegMatrix, cfg: &AnalysisConfig) -> Result<(Digraph, Vec<usize>)> {
    let dec = decompose(p, cfg)?;
    if !dec.is_stable(cfg.tol.eps_rho) {
        return Err(Error::NotStable);
    }
    Ok((dec.critical_graph(), dec.critical_nodes()))
}

/// Upstream, critical, downstream and independent node sets (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub u: Vec<usize>,
    pub c: Vec<usize>,
    pub d: Vec<usize>,
    pub i: Vec<usize>,
    pub critical_classes: Vec<Vec<usize>>,
    /// U, then C class by class, then D, then I.
    pub permutation: Vec<usize>,
    pub radius_u: f64,
    pub radius_d: f64,
    pub radius_i: f64,
}

impl NormalForm {
    /// Block label per node: 0 = U, 1 = C, 2 = D, 3 = I.
    pub fn labels(&self, n: usize) -> Vec<u8> {
        let mut lab = vec![0u8; n];
        for (tag, set) in [(0u8, &self.u), (1, &self.c), (2, &self.d), (3, &self.i)] {
            for &k in set {
                lab[k] = tag;
            }
        }
        lab
    }
}

pub fn normal_form(p: &NonnegMatrix, cfg: &AnalysisConfig) -> Result<NormalForm> {
    let dec = decompose(p, cfg)?;
    if !dec.is_stable(cfg.tol.eps_rho) {
        return Err(Error::NotStable);
    }
    let n = p.n();
    let g = &dec.graph;
    let c = dec.critical_nodes();
    let from_c = g.reachable_from(&c);
    let to_c = g.reversed().reachable_from(&c);
    let mut in_c = vec![false; n];
    for &k in &c {
        in_c[k] = true;
    }
    let mut u = Vec::new();
    let mut d = Vec::new();
    let mut i_set = Vec::new();
    for k in 0..n {
        if in_c[k] {
            continue;
        }
        if to_c[k] {
            u.push(k);
        } else if from_c[k] {
            d.push(k);
        } else {
            i_set.push(k);
        }
    }
    let critical_classes = dec.critical_classes();
    let mut permutation = u.clone();
    for cls in &critical_classes {
        permutation.extend(cls);
    }
    permutation.extend(&d);
    permutation.extend(&i_set);

    let nf = NormalForm {
        radius_u: block_radius(p, &u, cfg)?,
        radius_d: block_radius(p, &d, cfg)?,
        radius_i: block_radius(p, &i_set, cfg)?,
        u,
        c,
        d,
        i: i_set,
        critical_classes,
        permutation,
    };
    check_block_pattern(p, &nf, &dec, cfg.tol.arc)?;
    for r in [nf.radius_u, nf.radius_d, nf.radius_i] {
        if r >= 1.0 - cfg.tol.eps_rho {
            return Err(Error::Internal(format!("off-critical block radius {r} not below one")));
        }
    }
    Ok(nf)
}

fn block_radius(p: &NonnegMatrix, nodes: &[usize], cfg: &AnalysisConfig) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(0.0);
    }
    spectral_radius(&p.principal(nodes), cfg)
}

/// Zero blocks of the normal form: rows C, D, I see no U; rows D, I see no C;
/// rows C, D see no I; distinct critical classes do not see each other.
fn check_block_pattern(p: &NonnegMatrix, nf: &NormalForm, dec: &ClassDecomposition, tol: f64) -> Result<()> {
    let lab = nf.labels(p.n());
    const ZERO: [(u8, u8); 7] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (1, 3), (2, 3)];
    for row in 0..p.n() {
        for col in 0..p.n() {
            if p.get(row, col) <= tol {
                continue;
            }
            let pair = (lab[row], lab[col]);
            let cross_critical = pair == (1, 1) && dec.class_of[row] != dec.class_of[col];
            if ZERO.contains(&pair) || cross_critical {
                return Err(Error::BlockStructure { row, col });
            }
        }
    }
    Ok(())
}

/// Residuals of the conclusions for a sub-invariant vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SubinvariantReport {
    /// max |(P_CC z_C - z_C)_i|
    pub critical_residual: f64,
    /// max |z_i| over D
    pub downstream_max: f64,
    /// max |((Pz) - z)_i| over C and D
    pub closed_residual: f64,
    /// min z_i over I (0 when I is empty)
    pub independent_min: f64,
    pub holds: bool,
}

pub fn check_subinvariant(p: &NonnegMatrix, z: &[f64], cfg: &AnalysisConfig) -> Result<SubinvariantReport> {
    if z.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: z.len() });
    }
    let pz = p.mul_vec(z);
    let excess = pz.iter().zip(z).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    if excess > cfg.tol.eps_order {
        return Err(Error::NotSubInvariant { excess });
    }
    let nf = normal_form(p, cfg)?;
    let mut critical_residual = 0.0f64;
    for cls in &nf.critical_classes {
        for &i in cls {
            let s: f64 = cls.iter().map(|&j| p.get(i, j) * z[j]).sum();
            critical_residual = critical_residual.max((s - z[i]).abs());
        }
    }
    let downstream_max = nf.d.iter().map(|&i| z[i].abs()).fold(0.0, f64::max);
    let closed_residual = nf
        .c
        .iter()
        .chain(&nf.d)
        .map(|&i| (pz[i] - z[i]).abs())
        .fold(0.0, f64::max);
    let independent_min = nf.i.iter().map(|&i| z[i]).fold(f64::INFINITY, f64::min);
    let independent_min = if nf.i.is_empty() { 0.0 } else { independent_min };
    let eps = cfg.tol.eps_order;
    let holds = critical_residual <= eps
        && downstream_max <= eps
        && closed_residual <= eps
        && independent_min >= -eps;
    Ok(SubinvariantReport { critical_residual, downstream_max, closed_residual, independent_min, holds })
}

/// Positive left eigenvector of a critical class, max entry 1.
pub fn left_perron(p: &NonnegMatrix, cls: &[usize], cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    let mut cls = cls.to_vec();
    cls.sort_unstable();
    cls.dedup();
    if cls.is_empty() || cls.iter().any(|&i| i >= p.n()) {
        return Err(Error::InvalidInput("class must be a non-empty set of valid nodes".into()));
    }
    let dec = decompose(p, cfg)?;
    let c = dec.class_of[cls[0]];
    if dec.classes[c] != cls {
        return Err(Error::Reducible);
    }
    if !dec.critical[c] {
        return Err(Error::NotCritical { radius: dec.radii[c] });
    }
    let block = p.principal(&cls);
    Ok(perron::perron(&block.data, cls.len(), true, cfg)?.vector)
}

/// Right Perron vector of an irreducible block given by its node list.
pub(crate) fn right_perron(p: &NonnegMatrix, cls: &[usize], cfg: &AnalysisConfig) -> Result<Vec<f64>> {
    let block = p.principal(cls);
    Ok(perron::perron(&block.data, cls.len(), false, cfg)?.vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> NonnegMatrix {
        NonnegMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn projection() -> NonnegMatrix {
        m(&[&[0.0, 0.5, 0.5], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])
    }

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn rejects_negative_and_ragged_input() {
        assert!(NonnegMatrix::new(vec![vec![-1.0]]).is_err());
        assert!(NonnegMatrix::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(NonnegMatrix::new(vec![]).is_err());
        assert!(NonnegMatrix::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn digraph_examples() {
        assert_eq!(digraph(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), 0.0).arcs(), vec![(0, 1)]);
        assert_eq!(digraph(&NonnegMatrix::identity(2), 0.0).arcs(), vec![(0, 0), (1, 1)]);
        assert_eq!(digraph(&projection(), 0.0).arcs(), vec![(0, 1), (0, 2), (1, 1), (2, 2)]);
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &cfg()).unwrap();
        assert_eq!(d.classes, vec![vec![0, 1]]);
        assert_relative_eq!(d.radii[0], 1.0, epsilon = 1e-9);
        assert_eq!(d.critical, vec![true]);

        let d = decompose(&m(&[&[0.5]]), &cfg()).unwrap();
        assert_eq!(d.radii, vec![0.5]);
        assert_eq!(d.critical, vec![false]);

        let d = decompose(&projection(), &cfg()).unwrap();
        assert_eq!(d.classes, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(d.radii, vec![0.0, 1.0, 1.0]);
        assert_eq!(d.critical_classes(), vec![vec![1], vec![2]]);
        assert_eq!(d.condensation.arcs(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn stability_examples() {
        let c = cfg();
        assert!(!is_stable(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), &c).unwrap());
        assert!(is_stable(&m(&[&[0.3, 0.2], &[0.5, 0.5]]), &c).unwrap());
        assert!(is_stable(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &c).unwrap());
        assert!(!is_stable(&m(&[&[2.0]]), &c).unwrap());
        assert!(is_stable(&m(&[&[0.0]]), &c).unwrap());
    }

    #[test]
    fn spectral_radius_examples() {
        let c = cfg();
        assert_relative_eq!(spectral_radius(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), &c).unwrap(), 1.0);
        let r = spectral_radius(&m(&[&[0.3, 0.2], &[0.5, 0.5]]), &c).unwrap();
        // eigenvalues of [[0.3,0.2],[0.5,0.5]]: (0.8 + sqrt(0.04 + 0.4)) / 2
        assert_relative_eq!(r, (0.8 + 0.44f64.sqrt()) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn normal_form_examples() {
        let c = cfg();
        let nf = normal_form(&projection(), &c).unwrap();
        assert_eq!((nf.u.clone(), nf.c.clone()), (vec![0], vec![1, 2]));
        assert!(nf.d.is_empty() && nf.i.is_empty());
        assert_eq!(nf.critical_classes, vec![vec![1], vec![2]]);
        assert_eq!(nf.permutation, vec![0, 1, 2]);

        let nf = normal_form(&m(&[&[1.0, 1.0], &[0.0, 0.5]]), &c).unwrap();
        assert_eq!((nf.c, nf.d, nf.u.len(), nf.i.len()), (vec![0], vec![1], 0, 0));

        let nf = normal_form(&m(&[&[1.0, 0.0], &[0.0, 0.5]]), &c).unwrap();
        assert_eq!((nf.c, nf.i, nf.u.len(), nf.d.len()), (vec![0], vec![1], 0, 0));

        let nf = normal_form(&m(&[&[0.0]]), &c).unwrap();
        assert_eq!(nf.i, vec![0]);

        assert_eq!(normal_form(&m(&[&[1.0, 1.0], &[0.0, 1.0]]), &c), Err(Error::NotStable));
    }

    #[test]
    fn subinvariant_examples() {
        let c = cfg();
        let r = check_subinvariant(&NonnegMatrix::identity(2), &[1.0, -1.0], &c).unwrap();
        assert!(r.holds);
        let r = check_subinvariant(&m(&[&[1.0, 1.0], &[0.0, 0.5]]), &[1.0, 0.0], &c).unwrap();
        assert!(r.holds);
        assert_eq!(r.downstream_max, 0.0);
        let err = check_subinvariant(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &[2.0, 1.0], &c);
        assert!(matches!(err, Err(Error::NotSubInvariant { .. })));
    }

    #[test]
    fn left_perron_examples() {
        let c = cfg();
        let v = left_perron(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &[0, 1], &c).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(v[1], 1.0, epsilon = 1e-9);
        assert_eq!(left_perron(&m(&[&[1.0]]), &[0], &c).unwrap(), vec![1.0]);
        assert!(matches!(left_perron(&m(&[&[0.5]]), &[0], &c), Err(Error::NotCritical { .. })));
        assert_eq!(left_perron(&projection(), &[1, 2], &c), Err(Error::Reducible));
    }
}
