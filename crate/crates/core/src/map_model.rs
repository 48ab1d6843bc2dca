//! Max-affine and log-exp maps: evaluation, subdifferentials, directional
//! derivatives, recession maps and powers.

use std::collections::HashMap;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::nonneg_matrix::{dot, NonnegMatrix, RectangularSet};

/// Anything that maps R^n to R^n and can be iterated.
pub trait MonotoneMap {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineTerm {
    pub r: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpTerm {
    pub a: f64,
    pub j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapRows {
    /// f_i(x) = max over terms of r + p.x
    MaxAffine(Vec<Vec<AffineTerm>>),
    /// f_i(x) = log of the sum over terms of a exp(j.x)
    LogExp(Vec<Vec<ExpTerm>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    n: usize,
    rows: MapRows,
}

fn check_row_vec(v: &[f64], n: usize, what: &str, row: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput(format!("row {}: {what} entries must be finite and nonnegative", row + 1)));
    }
    Ok(())
}

impl MapSpec {
    pub fn max_affine(n: usize, rows: Vec<Vec<AffineTerm>>) -> Result<Self> {
        Self::check_shape(n, rows.len())?;
        for (i, terms) in rows.iter().enumerate() {
            if terms.is_empty() {
                return Err(Error::InvalidInput(format!("row {} has no terms", i + 1)));
            }
            for t in terms {
                if !t.r.is_finite() {
                    return Err(Error::InvalidInput(format!("row {}: constant must be finite", i + 1)));
                }
                check_row_vec(&t.p, n, "p", i)?;
            }
        }
        Ok(MapSpec { n, rows: MapRows::MaxAffine(rows) })
    }

    pub fn log_exp(n: usize, rows: Vec<Vec<ExpTerm>>) -> Result<Self> {
        Self::check_shape(n, rows.len())?;
        for (i, terms) in rows.iter().enumerate() {
            if terms.is_empty() {
                return Err(Error::InvalidInput(format!("row {} has no terms", i + 1)));
            }
            for t in terms {
                if !(t.a.is_finite() && t.a > 0.0) {
                    return Err(Error::InvalidInput(format!("row {}: coefficient must be positive", i + 1)));
                }
                check_row_vec(&t.j, n, "exponent", i)?;
            }
        }
        Ok(MapSpec { n, rows: MapRows::LogExp(rows) })
    }

    fn check_shape(n: usize, rows: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if rows != n {
            return Err(Error::DimensionMismatch { expected: n, got: rows });
        }
        Ok(())
    }

    /// x -> Px + r
    pub fn affine(p: &NonnegMatrix, r: &[f64]) -> Self {
        assert_eq!(r.len(), p.n());
        let rows = (0..p.n()).map(|i| vec![AffineTerm { r: r[i], p: p.row(i).to_vec() }]).collect();
        MapSpec { n: p.n(), rows: MapRows::MaxAffine(rows) }
    }

    pub fn linear(p: &NonnegMatrix) -> Self {
        Self::affine(p, &vec![0.0; p.n()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &MapRows {
        &self.rows
    }

    pub fn max_affine_rows(&self) -> Result<&[Vec<AffineTerm>]> {
        match &self.rows {
            MapRows::MaxAffine(rows) => Ok(rows),
            MapRows::LogExp(_) => Err(Error::UnsupportedVariant),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch in eval");
        match &self.rows {
            MapRows::MaxAffine(rows) => rows
                .iter()
                .map(|terms| terms.iter().map(|t| t.r + dot(&t.p, x)).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
            MapRows::LogExp(rows) => rows
                .iter()
                .map(|terms| {
                    let args: Vec<f64> = terms.iter().map(|t| t.a.ln() + dot(&t.j, x)).collect();
                    let m = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    m + args.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
                })
                .collect(),
        }
    }
}

impl MonotoneMap for MapSpec {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
}

impl MonotoneMap for NonnegMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
    }
}

/// A map known only through evaluation; usable for simulation only.
pub struct ClosureMap<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> ClosureMap<F> {
    pub fn new(n: usize, f: F) -> Self {
        ClosureMap { n, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> MonotoneMap for ClosureMap<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Returns `[x0, f(x0), ..., f^k(x0)]`.
pub fn iterate(f: &dyn MonotoneMap, x0: &[f64], k: usize, cfg: &AnalysisConfig) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x0.to_vec());
    for step in 1..=k {
        let next = f.apply(&out[step - 1]);
        if next.iter().any(|v| !(v.abs() <= cfg.caps.magnitude)) {
            return Err(Error::Divergence { step });
        }
        out.push(next);
    }
    Ok(out)
}

/// Max-of-linear map x -> (max over generators g of row i of g.x)_i.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousMap {
    gens: RectangularSet,
}

impl HomogeneousMap {
    pub fn new(gens: RectangularSet) -> Self {
        HomogeneousMap { gens }
    }

    pub fn from_matrix(p: &NonnegMatrix) -> Self {
        HomogeneousMap { gens: RectangularSet::from_matrix(p) }
    }

    /// Accepts max-affine maps whose constants are all zero.
    pub fn from_spec(f: &MapSpec) -> Result<Self> {
        let rows = f.max_affine_rows()?;
        if rows.iter().flatten().any(|t| t.r != 0.0) {
            return Err(Error::InvalidInput("homogeneous map needs all constants equal to zero".into()));
        }
        let gens = rows.iter().map(|ts| ts.iter().map(|t| t.p.clone()).collect()).collect();
        Ok(HomogeneousMap { gens: RectangularSet::new(f.n(), gens)? })
    }

    pub fn n(&self) -> usize {
        self.gens.n()
    }

    pub fn generators(&self) -> &RectangularSet {
        &self.gens
    }

    pub fn to_spec(&self) -> MapSpec {
        let rows = self
            .gens
            .rows()
            .iter()
            .map(|gs| gs.iter().map(|g| AffineTerm { r: 0.0, p: g.clone() }).collect())
            .collect();
        MapSpec { n: self.n(), rows: MapRows::MaxAffine(rows) }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.gens
            .rows()
            .iter()
            .map(|gs| gs.iter().map(|g| dot(g, x)).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// The map on `nodes` obtained by dropping all other rows and columns.
    pub fn restrict(&self, nodes: &[usize]) -> HomogeneousMap {
        let rows = nodes
            .iter()
            .map(|&i| {
                let mut gs: Vec<Vec<f64>> = Vec::new();
                for g in self.gens.row(i) {
                    let r: Vec<f64> = nodes.iter().map(|&j| g[j]).collect();
                    if !gs.contains(&r) {
                        gs.push(r);
                    }
                }
                gs
            })
            .collect();
        HomogeneousMap { gens: RectangularSet::new(nodes.len(), rows).expect("restriction of a valid set") }
    }
}

impl MonotoneMap for HomogeneousMap {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdiff {
    pub point: Vec<f64>,
    pub generators: RectangularSet,
}

fn push_unique(list: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if !list.contains(&v) {
        list.push(v);
    }
}

pub fn subdifferential(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> Subdiff {
    assert_eq!(v.len(), f.n, "dimension mismatch in subdifferential");
    let rows: Vec<Vec<Vec<f64>>> = match &f.rows {
        MapRows::MaxAffine(rows) => rows
            .iter()
            .map(|terms| {
                let vals: Vec<f64> = terms.iter().map(|t| t.r + dot(&t.p, v)).collect();
                let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let band = cfg.tol.eps_active * (top.abs() + 1.0);
                let mut gens = Vec::new();
                for (t, val) in terms.iter().zip(&vals) {
                    if *val >= top - band {
                        push_unique(&mut gens, t.p.clone());
                    }
                }
                gens
            })
            .collect(),
        MapRows::LogExp(rows) => rows
            .iter()
            .map(|terms| {
                let args: Vec<f64> = terms.iter().map(|t| t.a.ln() + dot(&t.j, v)).collect();
                let m = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = args.iter().map(|a| (a - m).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut grad = vec![0.0; f.n];
                for (t, wt) in terms.iter().zip(&w) {
                    for (g, e) in grad.iter_mut().zip(&t.j) {
                        *g += wt / total * e;
                    }
                }
                vec![grad]
            })
            .collect(),
    };
    Subdiff { point: v.to_vec(), generators: RectangularSet::new(f.n, rows).expect("generators are valid") }
}

pub fn directional_derivative(f: &MapSpec, v: &[f64], cfg: &AnalysisConfig) -> HomogeneousMap {
    HomogeneousMap::new(subdifferential(f, v, cfg).generators)
}

/// Recession map: all slopes of each row, constants dropped.
pub fn recession(f: &MapSpec) -> HomogeneousMap {
    let rows = match &f.rows {
        MapRows::MaxAffine(rows) => rows
            .iter()
            .map(|ts| {
                let mut gens = Vec::new();
                for t in ts {
                    push_unique(&mut gens, t.p.clone());
                }
                gens
            })
            .collect(),
        MapRows::LogExp(rows) => rows
            .iter()
            .map(|ts| {
                let mut gens = Vec::new();
                for t in ts {
                    push_unique(&mut gens, t.j.clone());
                }
                gens
            })
            .collect(),
    };
    HomogeneousMap::new(RectangularSet::new(f.n, rows).expect("slopes are valid"))
}

/// Collects affine terms, keeping one term per slope with the largest
/// constant. Pointwise dominance over all coordinates is not used: it is
/// unsound once arguments may be negative.
#[derive(Default)]
struct TermSet {
    index: HashMap<Vec<u64>, usize>,
    terms: Vec<AffineTerm>,
}

impl TermSet {
    fn insert(&mut self, t: AffineTerm) {
        // adding 0.0 maps -0.0 to 0.0
        let key: Vec<u64> = t.p.iter().map(|v| (v + 0.0).to_bits()).collect();
        match self.index.get(&key) {
            Some(&k) => self.terms[k].r = self.terms[k].r.max(t.r),
            None => {
                self.index.insert(key, self.terms.len());
                self.terms.push(t);
            }
        }
    }

    fn len(&self) -> usize {
        self.terms.len()
    }
}

fn prune(terms: Vec<AffineTerm>) -> Vec<AffineTerm> {
    let mut set = TermSet::default();
    for t in terms {
        set.insert(t);
    }
    set.terms
}

/// Max-affine representation of `outer` after `inner`. Each outer term is
/// expanded one inner row at a time, merging equal slopes after every step.
pub fn compose(outer: &MapSpec, inner: &MapSpec, cfg: &AnalysisConfig) -> Result<MapSpec> {
    let f = outer.max_affine_rows()?;
    let g = inner.max_affine_rows()?;
    if outer.n != inner.n {
        return Err(Error::DimensionMismatch { expected: outer.n, got: inner.n });
    }
    let n = outer.n;
    let cap = cfg.caps.terms;
    let mut rows = Vec::with_capacity(n);
    for (i, terms) in f.iter().enumerate() {
        let mut row = TermSet::default();
        for t in terms {
            let mut partial = vec![AffineTerm { r: t.r, p: vec![0.0; n] }];
            for j in (0..n).filter(|&j| t.p[j] != 0.0) {
                let w = t.p[j];
                let mut next = TermSet::default();
                for a in &partial {
                    for b in &g[j] {
                        let p = a.p.iter().zip(&b.p).map(|(x, y)| x + w * y).collect();
                        next.insert(AffineTerm { r: a.r + w * b.r, p });
                    }
                }
                if next.len() > cap {
                    return Err(Error::TermBlowup { row: i, terms: next.len() });
                }
                partial = next.terms;
            }
            for a in partial {
                row.insert(a);
            }
            if row.len() > cap {
                return Err(Error::TermBlowup { row: i, terms: row.len() });
            }
        }
        rows.push(row.terms);
    }
    Ok(MapSpec { n, rows: MapRows::MaxAffine(rows) })
}

/// Explicit max-affine representation of the k-fold composition.
pub fn power_map(f: &MapSpec, k: usize, cfg: &AnalysisConfig) -> Result<MapSpec> {
    let rows = f.max_affine_rows()?;
    if k == 0 {
        return Ok(MapSpec::linear(&NonnegMatrix::identity(f.n)));
    }
    let base = MapSpec { n: f.n, rows: MapRows::MaxAffine(rows.iter().map(|ts| prune(ts.clone())).collect()) };
    let mut acc = base.clone();
    for _ in 1..k {
        acc = compose(&base, &acc, cfg)?;
    }
    Ok(acc)
}
