//! Rectangular sets of nonnegative matrices and their selections.
//!
//! A selection picks one generator per row. Stability of every selection and
//! the union of their critical graphs are decided block by block over the
//! strongly connected components of the union graph: inside a block only the
//! restriction of each generator to the block's columns matters, and chains
//! between critical classes of different blocks are found by a reachability
//! search from the exits of critical classes to the entries of others.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{decompose, digraph, dot, Digraph, NonnegMatrix};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RectangularSet {
    n: usize,
    rows: Vec<Vec<Vec<f64>>>,
}

impl RectangularSet {
    pub fn new(n: usize, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if rows.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
        }
        for (i, gens) in rows.iter().enumerate() {
            if gens.is_empty() {
                return Err(Error::InvalidInput(format!("row {} has no generators", i + 1)));
            }
            for g in gens {
                if g.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: g.len() });
                }
                if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidInput(format!("row {} has a negative or non-finite generator entry", i + 1)));
                }
            }
        }
        Ok(RectangularSet { n, rows })
    }

    pub fn from_matrix(p: &NonnegMatrix) -> Self {
        RectangularSet { n: p.n(), rows: p.rows().into_iter().map(|r| vec![r]).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[Vec<f64>] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<Vec<f64>>] {
        &self.rows
    }

    /// Number of selection matrices, saturating.
    pub fn selection_count(&self) -> u128 {
        self.rows.iter().fold(1u128, |acc, g| acc.saturating_mul(g.len() as u128))
    }

    pub fn selection(&self, choice: &[usize]) -> NonnegMatrix {
        let data = choice.iter().enumerate().flat_map(|(i, &c)| self.rows[i][c].iter().cloned()).collect();
        NonnegMatrix::from_flat(self.n, data)
    }
}

/// Per-row average of all generators; its digraph is the union of the
/// digraphs of all selections.
pub fn graph_union_witness(r: &RectangularSet) -> NonnegMatrix {
    let n = r.n;
    let mut data = vec![0.0; n * n];
    for (i, gens) in r.rows.iter().enumerate() {
        let w = 1.0 / gens.len() as f64;
        for g in gens {
            for j in 0..n {
                data[i * n + j] += w * g[j];
            }
        }
    }
    NonnegMatrix::from_flat(n, data)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verification {
    Exhaustive,
    /// Some block exceeded the selection cap and was sampled.
    Partial { sampled: usize },
}

impl Verification {
    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Verification::Exhaustive)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalWitness {
    /// A member of the set whose critical graph is the union.
    pub matrix: NonnegMatrix,
    pub graph: Digraph,
    pub critical_nodes: Vec<usize>,
    pub verification: Verification,
}

/// Witness of the critical-graph union; errors with an unstable selection if
/// one exists.
pub fn critical_graph_witness(r: &RectangularSet, cfg: &AnalysisConfig) -> Result<CriticalWitness> {
    let a = analyze(r, cfg)?;
    let n = r.n;
    let mut data = Vec::with_capacity(n * n);
    for k in 0..n {
        let gens: Vec<usize> = if a.realizing[k].is_empty() {
            vec![0]
        } else {
            a.realizing[k].iter().cloned().collect()
        };
        let w = 1.0 / gens.len() as f64;
        let mut row = vec![0.0; n];
        for g in gens {
            for j in 0..n {
                row[j] += w * r.rows[k][g][j];
            }
        }
        data.extend(row);
    }
    let matrix = NonnegMatrix::from_flat(n, data);
    let dec = decompose(&matrix, cfg)?;
    let consistent = dec.is_stable(cfg.tol.eps_rho) && dec.critical_graph() == a.graph;
    if !consistent && a.verification.is_exhaustive() {
        return Err(Error::Internal("averaged witness does not reproduce the critical graph".into()));
    }
    Ok(CriticalWitness { matrix, graph: a.graph, critical_nodes: a.critical_nodes, verification: a.verification })
}

/// Largest spectral radius over all selections, or `None` if a block had to
/// be sampled.
pub fn max_selection_radius(r: &RectangularSet, cfg: &AnalysisConfig) -> Result<Option<f64>> {
    let union = digraph(&graph_union_witness(r), cfg.tol.arc);
    let mut best = 0.0f64;
    for block in union.sccs() {
        if !union.has_circuit_in(&block) {
            continue;
        }
        let choices = block_choices(r, &block, cfg);
        let count = choices.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
        if count > cfg.caps.selections as u128 {
            return Ok(None);
        }
        let mut odo = vec![0usize; block.len()];
        loop {
            let q = restricted_matrix(&choices, &odo);
            best = best.max(decompose(&q, cfg)?.spectral_radius());
            if !advance(&mut odo, &choices) {
                break;
            }
        }
    }
    Ok(Some(best))
}

/// A distinct restriction of a row's generators to a block, with every full
/// generator index that has it.
#[derive(Clone, Debug)]
struct Choice {
    restricted: Vec<f64>,
    members: Vec<usize>,
}

fn close(a: f64, b: f64, t: f64) -> bool {
    (a - b).abs() <= t * (1.0 + a.abs().max(b.abs()))
}

/// Deduplicated restrictions per block row, with strictly dominated ones
/// removed. A dominated restriction can be swapped for its dominator without
/// losing instability, and never lies in a critical class when all
/// selections are stable.
fn block_choices(r: &RectangularSet, block: &[usize], cfg: &AnalysisConfig) -> Vec<Vec<Choice>> {
    let t = cfg.tol.delta;
    block
        .iter()
        .map(|&k| {
            let mut choices: Vec<Choice> = Vec::new();
            for (gi, g) in r.rows[k].iter().enumerate() {
                let restricted: Vec<f64> = block.iter().map(|&j| g[j]).collect();
                match choices.iter_mut().find(|c| c.restricted.iter().zip(&restricted).all(|(a, b)| close(*a, *b, t))) {
                    Some(c) => c.members.push(gi),
                    None => choices.push(Choice { restricted, members: vec![gi] }),
                }
            }
            let dominated = |a: &Choice, b: &Choice| {
                a.restricted.iter().zip(&b.restricted).all(|(x, y)| *x <= *y || close(*x, *y, t))
                    && a.restricted.iter().zip(&b.restricted).any(|(x, y)| *x < *y && !close(*x, *y, t))
            };
            let keep: Vec<bool> = (0..choices.len())
                .map(|i| !(0..choices.len()).any(|j| j != i && dominated(&choices[i], &choices[j])))
                .collect();
            choices.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect()
        })
        .collect()
}

fn selection_total(choices: &[Vec<Choice>]) -> u128 {
    choices.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
}

enum Tightened {
    /// Every selection of the block has radius below 1.
    NoCritical,
    /// A selection of the block with radius above 1.
    Unstable(Vec<usize>),
    /// Choices reduced to those tight at a positive eigenvector.
    Tight,
    /// The eigenvalue bracket did not settle; choices unchanged.
    Unknown,
}

/// Uses a positive eigenvector `x` of the block map `y -> max_c c.y`, which
/// exists because the block is strongly connected. Every selection has
/// `Qx <= tau x`; when `tau = 1`, a critical class of a selection must use
/// rows with `c.x = x_i` and nothing else of the block, so the other choices
/// cannot contribute to the critical graph.
fn tighten(choices: &mut [Vec<Choice>], cfg: &AnalysisConfig) -> Result<Tightened> {
    let m = choices.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        choices.iter().map(|cs| cs.iter().map(|c| dot(&c.restricted, x)).fold(0.0, f64::max)).collect()
    };
    let shift = choices.iter().flatten().map(|c| c.restricted.iter().sum::<f64>()).fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(Tightened::NoCritical);
    }
    let eps = cfg.tol.eps_rho;
    let mut x = vec![1.0; m];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..cfg.caps.iterations {
        let y = apply(&x);
        lo = (0..m).map(|a| y[a] / x[a]).fold(f64::INFINITY, f64::min);
        hi = (0..m).map(|a| y[a] / x[a]).fold(0.0, f64::max);
        if hi < 1.0 - eps {
            return Ok(Tightened::NoCritical);
        }
        if lo > 1.0 + eps || hi - lo <= 1e-3 * eps {
            break;
        }
        let next: Vec<f64> = (0..m).map(|a| y[a] + shift * x[a]).collect();
        let top = next.iter().cloned().fold(0.0, f64::max);
        x = next.iter().map(|v| v / top).collect();
    }
    let y = apply(&x);
    if lo > 1.0 + eps {
        let sel: Vec<usize> = (0..m)
            .map(|a| {
                let best = choices[a].iter().map(|c| dot(&c.restricted, &x)).fold(0.0, f64::max);
                choices[a].iter().position(|c| dot(&c.restricted, &x) >= best).expect("non-empty row")
            })
            .collect();
        return Ok(Tightened::Unstable(sel));
    }
    if hi - lo > 1e-3 * eps {
        return Ok(Tightened::Unknown);
    }
    let slack = 1e-6 * x.iter().cloned().fold(0.0, f64::max);
    for (a, cs) in choices.iter_mut().enumerate() {
        cs.retain(|c| dot(&c.restricted, &x) >= y[a] - slack);
    }
    Ok(Tightened::Tight)
}

fn restricted_matrix(choices: &[Vec<Choice>], sel: &[usize]) -> NonnegMatrix {
    let m = choices.len();
    let data = (0..m).flat_map(|a| choices[a][sel[a]].restricted.iter().cloned()).collect();
    NonnegMatrix::from_flat(m, data)
}

fn advance(odo: &mut [usize], choices: &[Vec<Choice>]) -> bool {
    for pos in 0..odo.len() {
        odo[pos] += 1;
        if odo[pos] < choices[pos].len() {
            return true;
        }
        odo[pos] = 0;
    }
    false
}

/// Where a selection of a block lets a critical class escape the block.
#[derive(Clone, Debug)]
struct Exit {
    selection: Vec<usize>,
    from: usize,
    generator: usize,
}

struct BlockInfo {
    nodes: Vec<usize>,
    choices: Vec<Vec<Choice>>,
    /// Critical node -> a selection under which it is critical.
    critical_in: BTreeMap<usize, Vec<usize>>,
    /// Target outside the block -> how a critical class reaches it.
    exits: BTreeMap<usize, Exit>,
}

struct Analysis {
    graph: Digraph,
    critical_nodes: Vec<usize>,
    realizing: Vec<BTreeSet<usize>>,
    verification: Verification,
}

fn first_members(info: &BlockInfo, sel: &[usize], choice: &mut [usize]) {
    for (a, &k) in info.nodes.iter().enumerate() {
        choice[k] = info.choices[a][sel[a]].members[0];
    }
}

fn analyze(r: &RectangularSet, cfg: &AnalysisConfig) -> Result<Analysis> {
    let n = r.n;
    let tol = cfg.tol.arc;
    let union = digraph(&graph_union_witness(r), tol);
    let sccs = union.sccs();
    let mut block_of = vec![usize::MAX; n];
    for (b, s) in sccs.iter().enumerate() {
        for &k in s {
            block_of[k] = b;
        }
    }

    let mut graph = Digraph::empty(n);
    let mut critical = vec![false; n];
    let mut realizing = vec![BTreeSet::new(); n];
    let mut sampled_total = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut blocks: BTreeMap<usize, BlockInfo> = BTreeMap::new();

    for (b, nodes) in sccs.iter().enumerate() {
        if !union.has_circuit_in(nodes) {
            continue;
        }
        let choices = block_choices(r, nodes, cfg);
        let mut info = BlockInfo { nodes: nodes.clone(), choices, critical_in: BTreeMap::new(), exits: BTreeMap::new() };
        let mut count = selection_total(&info.choices);
        if count > cfg.caps.selections as u128 {
            match tighten(&mut info.choices, cfg)? {
                Tightened::NoCritical => continue,
                Tightened::Unstable(sel) => {
                    let mut choice = vec![0; n];
                    first_members(&info, &sel, &mut choice);
                    return Err(Error::UnstableSelection { selection: choice });
                }
                Tightened::Tight | Tightened::Unknown => count = selection_total(&info.choices),
            }
        }
        let exhaustive = count <= cfg.caps.selections as u128;
        let budget = if exhaustive { count as usize } else { cfg.caps.selections };
        if !exhaustive {
            sampled_total += budget;
        }
        let mut odo = vec![0usize; nodes.len()];
        for step in 0..budget {
            if !exhaustive {
                for (a, slot) in odo.iter_mut().enumerate() {
                    *slot = rng.gen_range(0..info.choices[a].len());
                }
            } else if step > 0 {
                advance(&mut odo, &info.choices);
            }
            inspect_selection(r, &mut info, &odo, cfg, &mut graph, &mut critical, &mut realizing)?;
        }
        blocks.insert(b, info);
    }

    if sampled_total > 0 {
        let avg = graph_union_witness(r);
        if !decompose(&avg, cfg)?.is_stable(cfg.tol.eps_rho) {
            return Err(Error::Internal("averaged matrix is unstable but no unstable selection was sampled".into()));
        }
    }

    find_cross_block_chain(r, &union, &block_of, &blocks, cfg)?;

    let critical_nodes = (0..n).filter(|&k| critical[k]).collect();
    let verification = if sampled_total > 0 {
        Verification::Partial { sampled: sampled_total }
    } else {
        Verification::Exhaustive
    };
    Ok(Analysis { graph, critical_nodes, realizing, verification })
}

#[allow(clippy::too_many_arguments)]
fn inspect_selection(
    r: &RectangularSet,
    info: &mut BlockInfo,
    sel: &[usize],
    cfg: &AnalysisConfig,
    graph: &mut Digraph,
    critical: &mut [bool],
    realizing: &mut [BTreeSet<usize>],
) -> Result<()> {
    let q = restricted_matrix(&info.choices, sel);
    let dec = decompose(&q, cfg)?;
    if !dec.is_stable(cfg.tol.eps_rho) {
        let mut choice = vec![0; r.n];
        first_members(info, sel, &mut choice);
        return Err(Error::UnstableSelection { selection: choice });
    }
    let local_critical = dec.critical_nodes();
    if local_critical.is_empty() {
        return Ok(());
    }
    for (a, b) in dec.critical_graph().arcs() {
        graph.add_arc(info.nodes[a], info.nodes[b]);
    }
    for &a in &local_critical {
        let k = info.nodes[a];
        critical[k] = true;
        realizing[k].extend(info.choices[a][sel[a]].members.iter().cloned());
    }
    for &a in &local_critical {
        info.critical_in.entry(info.nodes[a]).or_insert_with(|| sel.to_vec());
    }
    let in_block: BTreeSet<usize> = info.nodes.iter().cloned().collect();
    let reached = dec.graph.reachable_from(&local_critical);
    for a in (0..info.nodes.len()).filter(|&a| reached[a]) {
        let k = info.nodes[a];
        let gens: Vec<usize> = if dec.critical[dec.class_of[a]] {
            info.choices[a][sel[a]].members.clone()
        } else {
            (0..r.rows[k].len()).collect()
        };
        for g in gens {
            for (j, &v) in r.rows[k][g].iter().enumerate() {
                if v > cfg.tol.arc && !in_block.contains(&j) {
                    info.exits.entry(j).or_insert_with(|| Exit { selection: sel.to_vec(), from: k, generator: g });
                }
            }
        }
    }
    Ok(())
}

/// Searches the union graph for a path from an exit of one block to an entry
/// of another; such a path assembles into an unstable selection.
fn find_cross_block_chain(
    r: &RectangularSet,
    union: &Digraph,
    block_of: &[usize],
    blocks: &BTreeMap<usize, BlockInfo>,
    cfg: &AnalysisConfig,
) -> Result<()> {
    let n = r.n;
    let is_critical = |b: usize| blocks.get(&block_of[b]).is_some_and(|info| info.critical_in.contains_key(&b));
    for info in blocks.values() {
        if info.exits.is_empty() {
            continue;
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut origin = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        let mut hit: Option<(usize, Option<usize>)> = None;
        for &x in info.exits.keys() {
            seen[x] = true;
            origin[x] = x;
            queue.push_back(x);
            if hit.is_none() && is_critical(x) {
                hit = Some((x, None));
            }
        }
        while hit.is_none() {
            let Some(a) = queue.pop_front() else { break };
            for &b in union.successors(a) {
                if is_critical(b) {
                    hit = Some((b, Some(a)));
                    break;
                }
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some(a);
                    origin[b] = origin[a];
                    queue.push_back(b);
                }
            }
        }
        let Some((entry, last)) = hit else { continue };

        let mut path = Vec::new();
        if let Some(mut a) = last {
            path.push(a);
            while let Some(p) = parent[a] {
                path.push(p);
                a = p;
            }
            path.reverse();
        }
        path.push(entry);
        let exit = &info.exits[&path[0]];

        let mut choice = vec![0; n];
        first_members(info, &exit.selection, &mut choice);
        choice[exit.from] = exit.generator;
        let target = &blocks[&block_of[entry]];
        first_members(target, &target.critical_in[&entry], &mut choice);
        // nodes on the path are critical in no selection, so overriding them
        // leaves the target class intact or merges it into an unstable one
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            choice[u] = r.rows[u].iter().position(|g| g[v] > cfg.tol.arc).expect("union arc has a generator");
        }

        if decompose(&r.selection(&choice), cfg)?.is_stable(cfg.tol.eps_rho) {
            return Err(Error::Internal("assembled chain selection turned out stable".into()));
        }
        return Err(Error::UnstableSelection { selection: choice });
    }
    Ok(())
}
