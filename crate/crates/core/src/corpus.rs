//! Seeded random instances for the property suites. Every generator takes
//! its own RNG so instances can be built independently and in any order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::AnalysisConfig;
use crate::fixed_points::omega_limit;
use crate::homogeneous::{certify_tstable, Outcome};
use crate::map_model::{directional_derivative, AffineTerm, HomogeneousMap, MapSpec};
use crate::nonneg_matrix::{NonnegMatrix, RectangularSet};

/// RNG for instance `index` of a suite run with `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Largest order of a permutation of `n` letters.
pub fn landau(n: usize) -> u64 {
    fn best(n: usize, min_part: usize) -> u64 {
        let mut top = 1;
        for part in min_part..=n {
            top = top.max(crate::nonneg_matrix::lcm(part as u64, best(n - part, part)));
        }
        top
    }
    best(n, 1)
}

/// Nonnegative vector of multiples of 1/4 with a total of `k / 4`, `k` drawn from `quarters`.
fn quarter_vector<R: Rng>(rng: &mut R, n: usize, quarters: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    let mut p = vec![0.0; n];
    for _ in 0..rng.gen_range(quarters) {
        p[rng.gen_range(0..n)] += 0.25;
    }
    p
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[j] = 1.0;
    p
}

fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Max-affine map on at most four coordinates that fixes the origin.
///
/// Active terms (r = 0) are permutation rows or (sub)stochastic rows, inactive
/// terms have r in [-2, -0.5]. Every row sum is at most 1, so the recession map
/// is stable as well. Resamples until the origin certifies as t-stable.
pub fn origin_fixed_map<R: Rng>(rng: &mut R, cfg: &AnalysisConfig) -> MapSpec {
    loop {
        let f = origin_fixed_candidate(rng);
        let h = directional_derivative(&f, &vec![0.0; f.n()], cfg);
        if certify_tstable(&h, cfg).outcome == Outcome::Certified {
            return f;
        }
    }
}

fn origin_fixed_candidate<R: Rng>(rng: &mut R) -> MapSpec {
    let n = rng.gen_range(1..=4);
    let perm = random_permutation(rng, n);
    let rows = (0..n)
        .map(|i| {
            let mut terms = Vec::new();
            let first = if rng.gen_bool(0.5) { unit(n, perm[i]) } else { quarter_vector(rng, n, 1..=4) };
            terms.push(AffineTerm { r: 0.0, p: first });
            if rng.gen_bool(0.3) {
                terms.push(AffineTerm { r: 0.0, p: quarter_vector(rng, n, 0..=4) });
            }
            for _ in 0..rng.gen_range(0..=2) {
                let r = -(rng.gen_range(2..=8) as f64) / 4.0;
                terms.push(AffineTerm { r, p: quarter_vector(rng, n, 0..=4) });
            }
            terms
        })
        .collect();
    MapSpec::max_affine(n, rows).expect("generated rows are valid")
}

/// Max-linear map on at most five coordinates that certifies as stable.
/// Rows may have sums above 1 when they do not feed back into themselves.
pub fn stable_max_linear<R: Rng>(rng: &mut R, cfg: &AnalysisConfig) -> HomogeneousMap {
    for attempt in 0.. {
        let n = rng.gen_range(1..=5);
        let perm = random_permutation(rng, n);
        let heavy = attempt < 50;
        let rows = (0..n)
            .map(|i| {
                (0..rng.gen_range(1..=3))
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            unit(n, perm[i])
                        } else {
                            let max_quarters = if heavy { 6 } else { 4 };
                            quarter_vector(rng, n, 0..=max_quarters)
                        }
                    })
                    .collect()
            })
            .collect();
        let h = HomogeneousMap::new(RectangularSet::new(n, rows).expect("generated rows are valid"));
        if certify_tstable(&h, cfg).outcome == Outcome::Certified {
            return h;
        }
    }
    unreachable!()
}

/// Adds random constants in [-1, 1] to every generator of a max-linear map.
pub fn with_constants<R: Rng>(rng: &mut R, h: &HomogeneousMap) -> MapSpec {
    let rows = h
        .generators()
        .rows()
        .iter()
        .map(|gens| gens.iter().map(|p| AffineTerm { r: rng.gen_range(-1.0..=1.0), p: p.clone() }).collect())
        .collect();
    MapSpec::max_affine(h.n(), rows).expect("generated rows are valid")
}

/// A matrix built class by class, with the data used to build it.
#[derive(Clone, Debug)]
pub struct StructuredMatrix {
    pub matrix: NonnegMatrix,
    pub classes: Vec<Vec<usize>>,
    /// Spectral radius of each diagonal block, exact up to rounding.
    pub radii: Vec<f64>,
    /// `reach[a][b]`: class a has access to class b (reflexive, transitive).
    pub reach: Vec<Vec<bool>>,
}

impl StructuredMatrix {
    /// Stable when every class radius is at most 1 and no two unit-radius
    /// classes have access to each other.
    pub fn nominally_stable(&self) -> bool {
        let unit: Vec<bool> = self.radii.iter().map(|r| *r == 1.0).collect();
        self.radii.iter().all(|r| *r <= 1.0)
            && (0..self.classes.len()).all(|a| {
                (0..self.classes.len()).all(|b| a == b || !(unit[a] && unit[b] && self.reach[a][b]))
            })
    }

    pub fn unit_classes(&self) -> Vec<Vec<usize>> {
        self.classes.iter().zip(&self.radii).filter(|(_, r)| **r == 1.0).map(|(c, _)| c.clone()).collect()
    }
}

struct Skeleton {
    classes: Vec<Vec<usize>>,
    reach: Vec<Vec<bool>>,
    arcs: Vec<(usize, usize)>,
    n: usize,
}

fn skeleton<R: Rng>(rng: &mut R) -> Skeleton {
    let n = rng.gen_range(1..=6);
    let labels = random_permutation(rng, n);
    let mut classes = Vec::new();
    let mut next = 0;
    while next < n {
        let size = rng.gen_range(1..=3).min(n - next);
        let mut cls: Vec<usize> = labels[next..next + size].to_vec();
        cls.sort_unstable();
        classes.push(cls);
        next += size;
    }
    let m = classes.len();
    let mut reach = vec![vec![false; m]; m];
    let mut arcs = Vec::new();
    for a in 0..m {
        reach[a][a] = true;
        for b in a + 1..m {
            if rng.gen_bool(0.35) {
                arcs.push((a, b));
                reach[a][b] = true;
            }
        }
    }
    for k in 0..m {
        for a in 0..m {
            for b in 0..m {
                if reach[a][k] && reach[k][b] {
                    reach[a][b] = true;
                }
            }
        }
    }
    Skeleton { classes, reach, arcs, n }
}

/// Irreducible block with row sums exactly `radius` (hence that spectral radius).
fn class_block<R: Rng>(rng: &mut R, size: usize, radius: f64) -> Vec<Vec<f64>> {
    if size == 1 {
        return vec![vec![radius]];
    }
    (0..size)
        .map(|i| {
            let mut w: Vec<f64> = vec![0.0; size];
            w[(i + 1) % size] = rng.gen_range(0.2..1.0);
            for wj in w.iter_mut() {
                if *wj == 0.0 && rng.gen_bool(0.3) {
                    *wj = rng.gen_range(0.2..1.0);
                }
            }
            let s: f64 = w.iter().sum();
            w.iter().map(|x| radius * x / s).collect()
        })
        .collect()
}

fn assemble<R: Rng>(rng: &mut R, sk: Skeleton, radii: Vec<f64>) -> StructuredMatrix {
    let mut rows = vec![vec![0.0; sk.n]; sk.n];
    for (cls, &radius) in sk.classes.iter().zip(&radii) {
        let block = class_block(rng, cls.len(), radius);
        for (bi, &i) in cls.iter().enumerate() {
            for (bj, &j) in cls.iter().enumerate() {
                rows[i][j] = block[bi][bj];
            }
        }
    }
    for &(a, b) in &sk.arcs {
        for _ in 0..rng.gen_range(1..=2) {
            let i = *sk.classes[a].choose(rng).expect("non-empty class");
            let j = *sk.classes[b].choose(rng).expect("non-empty class");
            rows[i][j] = rng.gen_range(0.05..1.0);
        }
    }
    let matrix = NonnegMatrix::new(rows).expect("generated entries are nonnegative");
    StructuredMatrix { matrix, classes: sk.classes, radii, reach: sk.reach }
}

/// Stable matrix of size at most 6. Unit-radius classes form an antichain
/// for access; every other class has radius at most 0.9.
pub fn stable_structured<R: Rng>(rng: &mut R) -> StructuredMatrix {
    let sk = skeleton(rng);
    let m = sk.classes.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut unit = vec![false; m];
    for &a in &order {
        let free = (0..m).all(|b| !unit[b] || (!sk.reach[a][b] && !sk.reach[b][a]));
        if free && rng.gen_bool(0.6) {
            unit[a] = true;
        }
    }
    let radii = (0..m)
        .map(|a| {
            if unit[a] {
                1.0
            } else if sk.classes[a].len() == 1 && rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(1..=9) as f64 / 10.0
            }
        })
        .collect();
    assemble(rng, sk, radii)
}

pub const ORACLE_RADII: [f64; 7] = [0.3, 0.6, 0.9, 1.0, 1.2, 1.5, 2.0];

/// Matrix of size at most 6 whose class radii are drawn from [`ORACLE_RADII`];
/// about one instance in twenty has a class radius within 1e-9 of 1 without
/// being exactly 1.
pub fn oracle_structured<R: Rng>(rng: &mut R) -> StructuredMatrix {
    let sk = skeleton(rng);
    let near_unit = rng.gen_bool(0.05);
    let mut radii: Vec<f64> = sk.classes.iter().map(|_| *ORACLE_RADII.choose(rng).expect("non-empty")).collect();
    if near_unit {
        let a = rng.gen_range(0..radii.len());
        radii[a] = if rng.gen_bool(0.5) { 1.0 + 5e-10 } else { 1.0 - 5e-10 };
    }
    assemble(rng, sk, radii)
}

/// Sub-invariant vector of a stable matrix: the average over 60 consecutive
/// steps of a long orbit, which is invariant in the limit, plus the series
/// `sum_k P^k s` for `s >= 0` supported on `support`.
pub fn subinvariant_vector<R: Rng>(rng: &mut R, p: &NonnegMatrix, support: &[usize]) -> Vec<f64> {
    let n = p.n();
    let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    for _ in 0..3000 {
        y = p.mul_vec(&y);
    }
    let mut avg = vec![0.0; n];
    for _ in 0..60 {
        for (a, v) in avg.iter_mut().zip(&y) {
            *a += v / 60.0;
        }
        y = p.mul_vec(&y);
    }
    let mut term = vec![0.0; n];
    for &i in support {
        term[i] = rng.gen_range(0.0..=1.0);
    }
    for _ in 0..3000 {
        for (a, t) in avg.iter_mut().zip(&term) {
            *a += t;
        }
        term = p.mul_vec(&term);
    }
    avg
}

/// Map with a continuum of t-stable fixed points and several of them.
#[derive(Clone, Debug)]
pub struct SemilatticeInstance {
    pub map: MapSpec,
    /// Nodes whose coordinates are fixed by the critical blocks.
    pub critical: Vec<usize>,
    pub fixed_points: Vec<Vec<f64>>,
}

/// Critical blocks are identity, swap or averaging rows on one or two
/// coordinates, some with an extra term that is inactive near the fixed
/// points. Up to two upstream coordinates depend on the blocks and on each
/// other with total weight at most 1/2.
pub fn semilattice_map<R: Rng>(rng: &mut R, cfg: &AnalysisConfig) -> SemilatticeInstance {
    let n_blocks = rng.gen_range(1..=2);
    let sizes: Vec<usize> = (0..n_blocks).map(|_| rng.gen_range(1..=2)).collect();
    let n_c: usize = sizes.iter().sum();
    let n_u = rng.gen_range(0..=2);
    let n = n_c + n_u;
    let labels = random_permutation(rng, n);
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut next = 0;
    for &s in &sizes {
        blocks.push(labels[next..next + s].to_vec());
        next += s;
    }
    let upstream: Vec<usize> = labels[n_c..].to_vec();
    let critical: Vec<usize> = {
        let mut c = labels[..n_c].to_vec();
        c.sort_unstable();
        c
    };
    let mut rows: Vec<Vec<AffineTerm>> = vec![Vec::new(); n];
    for block in &blocks {
        let kind = rng.gen_range(0..3);
        for (k, &i) in block.iter().enumerate() {
            let p = match (block.len(), kind) {
                (1, _) | (_, 0) => unit(n, i),
                (_, 1) => unit(n, block[1 - k]),
                _ => {
                    let mut p = vec![0.0; n];
                    p[block[0]] = 0.5;
                    p[block[1]] = 0.5;
                    p
                }
            };
            rows[i].push(AffineTerm { r: 0.0, p });
            if rng.gen_bool(0.5) {
                let j = *critical.choose(rng).expect("non-empty");
                rows[i].push(AffineTerm { r: -4.0, p: unit(n, j) });
            }
        }
    }
    for &i in &upstream {
        for _ in 0..rng.gen_range(1..=2) {
            let mut p = vec![0.0; n];
            for _ in 0..rng.gen_range(1..=4) {
                p[*critical.choose(rng).expect("non-empty")] += 0.25;
            }
            for _ in 0..rng.gen_range(0..=2) {
                p[*upstream.choose(rng).expect("non-empty")] += 0.25;
            }
            let r = rng.gen_range(-1.0..=1.0);
            rows[i].push(AffineTerm { r, p });
        }
    }
    let map = MapSpec::max_affine(n, rows).expect("generated rows are valid");
    let mut fixed_points = Vec::new();
    for _ in 0..4 {
        let mut z = vec![100.0; n];
        for block in &blocks {
            let c = rng.gen_range(-1.0..=1.0);
            for &i in block {
                z[i] = c;
            }
        }
        if let Ok(v) = omega_limit(&map, &z, cfg) {
            fixed_points.push(v);
        }
    }
    SemilatticeInstance { map, critical, fixed_points }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landau_values() {
        let g: Vec<u64> = (1..=7).map(landau).collect();
        assert_eq!(g, vec![1, 2, 3, 4, 6, 6, 12]);
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = AnalysisConfig::default();
        let a = origin_fixed_map(&mut instance_rng(7, 3), &cfg);
        let b = origin_fixed_map(&mut instance_rng(7, 3), &cfg);
        assert_eq!(a, b);
        let a = stable_structured(&mut instance_rng(7, 3));
        let b = stable_structured(&mut instance_rng(7, 3));
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn origin_is_fixed() {
        let cfg = AnalysisConfig::default();
        for i in 0..20 {
            let f = origin_fixed_map(&mut instance_rng(1, i), &cfg);
            assert!(f.eval(&vec![0.0; f.n()]).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn structured_matrices_are_stable() {
        let cfg = AnalysisConfig::default();
        for i in 0..50 {
            let s = stable_structured(&mut instance_rng(2, i));
            assert!(s.nominally_stable());
            assert!(crate::nonneg_matrix::is_stable(&s.matrix, &cfg).unwrap());
        }
    }

    #[test]
    fn semilattice_points_are_fixed() {
        let cfg = AnalysisConfig::default();
        for i in 0..20 {
            let s = semilattice_map(&mut instance_rng(3, i), &cfg);
            assert_eq!(s.fixed_points.len(), 4);
            for v in &s.fixed_points {
                assert!(crate::fixed_points::residual(&s.map, v) <= 1e-9);
            }
        }
    }
}
