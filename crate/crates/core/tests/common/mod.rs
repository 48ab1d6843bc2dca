//! Independent reference computations: dense linear algebra through
//! nalgebra and brute-force graph and selection enumeration.
#![allow(dead_code)]

use nalgebra::DMatrix;

pub fn dense(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_row_slice(n, n, &rows.concat())
}

/// Largest eigenvalue modulus from a dense eigen-solver. The QR iteration
/// can stall on highly cyclic matrices; then the Gelfand limit
/// `||P^k||^(1/k)` at `k = 2^60` is used instead.
pub fn eig_radius(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    match nalgebra::linalg::Schur::try_new(dense(rows), f64::EPSILON, 20_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max),
        None => gelfand_radius(rows),
    }
}

pub fn gelfand_radius(rows: &[Vec<f64>]) -> f64 {
    let mut m = dense(rows);
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..60 {
        m = &m * &m;
        log_scale *= 2.0;
        k *= 2.0;
        let top = m.amax();
        if top == 0.0 {
            return 0.0;
        }
        m /= top;
        log_scale += top.ln();
    }
    (log_scale / k).exp()
}

fn rank(m: &DMatrix<f64>) -> usize {
    let sv = nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, 20_000)
        .expect("svd converges")
        .singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    sv.iter().filter(|s| **s > 1e-8 * top).count()
}

/// Stability from the spectrum: radius below 1, or radius 1 with the
/// eigenvalue 1 semisimple (for nonnegative matrices the other peripheral
/// eigenvalues then are too).
pub fn eigen_stable(rows: &[Vec<f64>]) -> bool {
    let rho = eig_radius(rows);
    if rho > 1.0 + 1e-6 {
        return false;
    }
    if rho < 1.0 - 1e-6 {
        return true;
    }
    let n = rows.len();
    let a = dense(rows) - DMatrix::identity(n, n);
    rank(&a) == rank(&(&a * &a))
}

fn max_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| if v.is_nan() { f64::INFINITY } else { acc.max(*v) })
}

/// Bounded powers, checked at `P^(2^j)` for `j <= 40` with growth threshold 1e6.
pub fn powers_stable(rows: &[Vec<f64>]) -> bool {
    let mut m = dense(rows);
    for _ in 0..40 {
        m = &m * &m;
        if max_entry(&m) > 1e6 {
            return false;
        }
    }
    true
}

/// Bounded powers with `P^k`, `k <= 200`, threshold 1e6.
pub fn powers_stable_200(rows: &[Vec<f64>]) -> bool {
    let p = dense(rows);
    let mut m = p.clone();
    for _ in 1..200 {
        if max_entry(&m) > 1e6 {
            return false;
        }
        m = &m * &p;
    }
    max_entry(&m) <= 1e6
}

pub fn sub(rows: &[Vec<f64>], nodes: &[usize]) -> Vec<Vec<f64>> {
    nodes.iter().map(|&i| nodes.iter().map(|&j| rows[i][j]).collect()).collect()
}

/// Reflexive-transitive closure of the positive pattern.
pub fn closure(rows: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let n = rows.len();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || rows[i][j] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

/// Strongly connected classes, each sorted, ordered by smallest node.
pub fn classes(rows: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let r = closure(rows);
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let cls: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
        for &j in &cls {
            seen[j] = true;
        }
        out.push(cls);
    }
    out
}

pub type Arcs = std::collections::BTreeSet<(usize, usize)>;

/// Critical graph of a matrix with row sums at most 1 and exact entries: a
/// class is critical when its block is stochastic.
pub fn substochastic_critical_arcs(rows: &[Vec<f64>]) -> Arcs {
    let mut arcs = Arcs::new();
    for cls in classes(rows) {
        let has_circuit = cls.len() > 1 || rows[cls[0]][cls[0]] > 0.0;
        let stochastic = cls.iter().all(|&i| cls.iter().map(|&j| rows[i][j]).sum::<f64>() == 1.0);
        if has_circuit && stochastic {
            for &i in &cls {
                for &j in &cls {
                    if rows[i][j] > 0.0 {
                        arcs.insert((i, j));
                    }
                }
            }
        }
    }
    arcs
}

/// Every choice of one generator per row.
pub fn selections(rows: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new()];
    for gens in rows {
        out = out
            .into_iter()
            .flat_map(|partial: Vec<Vec<f64>>| {
                gens.iter().map(move |g| {
                    let mut next = partial.clone();
                    next.push(g.clone());
                    next
                })
            })
            .collect();
    }
    out
}

/// Walks of length exactly k.
pub fn arc_power(n: usize, arcs: &Arcs, k: usize) -> Arcs {
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for _ in 0..k {
        reach = (0..n).map(|i| (0..n).map(|j| (0..n).any(|m| reach[i][m] && arcs.contains(&(m, j)))).collect()).collect();
    }
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| reach[i][j]).collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Per class, the gcd of closed-walk lengths up to the class size; lcm over
/// classes with a circuit; 1 without circuits.
pub fn cyclicity(n: usize, arcs: &Arcs) -> u64 {
    let rows: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if arcs.contains(&(i, j)) { 1.0 } else { 0.0 }).collect()).collect();
    let mut c = 1;
    for cls in classes(&rows) {
        let mut g = 0;
        for k in 1..=cls.len() {
            let walks = arc_power(n, arcs, k);
            if cls.iter().any(|&i| walks.contains(&(i, i))) {
                g = gcd(g, k as u64);
            }
        }
        if g > 0 {
            c = c / gcd(c, g) * g;
        }
    }
    c
}

pub const LANDAU: [u64; 7] = [1, 1, 2, 3, 4, 6, 6];

/// All generators active at `v` for a max-affine map, as (r, p) rows.
pub fn active_generators(rows: &[Vec<(f64, Vec<f64>)>], v: &[f64], tol: f64) -> Vec<Vec<Vec<f64>>> {
    rows.iter()
        .map(|terms| {
            let vals: Vec<f64> = terms.iter().map(|(r, p)| r + p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()).collect();
            let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            terms
                .iter()
                .zip(&vals)
                .filter(|(_, val)| **val >= top - tol * (1.0 + top.abs()))
                .map(|((_, p), _)| p.clone())
                .collect()
        })
        .collect()
}

pub fn eval_max_affine(rows: &[Vec<(f64, Vec<f64>)>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|terms| {
            terms
                .iter()
                .map(|(r, p)| r + p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
