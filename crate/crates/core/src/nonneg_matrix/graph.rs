use std::collections::VecDeque;

/// Directed graph on nodes `0..n` with sorted, duplicate-free adjacency.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Digraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn empty(n: usize) -> Self {
        Digraph { n, adj: vec![Vec::new(); n] }
    }

    /// Panics if an arc endpoint is out of range.
    pub fn from_arcs<I: IntoIterator<Item = (usize, usize)>>(n: usize, arcs: I) -> Self {
        let mut g = Digraph::empty(n);
        for (i, j) in arcs {
            g.add_arc(i, j);
        }
        g
    }

    pub fn add_arc(&mut self, i: usize, j: usize) {
        assert!(i < self.n && j < self.n, "arc ({i}, {j}) out of range for n = {}", self.n);
        if let Err(pos) = self.adj[i].binary_search(&j) {
            self.adj[i].insert(pos, j);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn arc_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Nodes that carry at least one arc, either end.
    pub fn touched_nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        for (i, j) in self.arcs() {
            seen[i] = true;
            seen[j] = true;
        }
        (0..self.n).filter(|&i| seen[i]).collect()
    }

    pub fn reversed(&self) -> Digraph {
        Digraph::from_arcs(self.n, self.arcs().into_iter().map(|(i, j)| (j, i)))
    }

    /// Keeps only arcs with both ends in `keep`.
    pub fn induced(&self, keep: &[bool]) -> Digraph {
        Digraph::from_arcs(
            self.n,
            self.arcs().into_iter().filter(|&(i, j)| keep[i] && keep[j]),
        )
    }

    /// Nodes reachable from `sources` by paths of length >= 0.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Strongly connected components, each sorted, ordered by smallest node.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        // iterative Tarjan
        const UNSEEN: usize = usize::MAX;
        let n = self.n;
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (u, ref mut next)) = call.last_mut() {
                if *next < self.adj[u].len() {
                    let v = self.adj[u][*next];
                    *next += 1;
                    if index[v] == UNSEEN {
                        index[v] = counter;
                        low[v] = counter;
                        counter += 1;
                        stack.push(v);
                        on_stack[v] = true;
                        call.push((v, 0));
                    } else if on_stack[v] {
                        low[u] = low[u].min(index[v]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[u]);
                    }
                    if low[u] == index[u] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == u {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Whether the node set (assumed strongly connected) carries a circuit.
    pub fn has_circuit_in(&self, comp: &[usize]) -> bool {
        comp.len() > 1 || self.has_arc(comp[0], comp[0])
    }

    /// Arcs (i, j) such that G has a walk of length exactly `k` from i to j.
    pub fn path_power(&self, k: usize) -> Digraph {
        let mut out = Digraph::empty(self.n);
        for i in 0..self.n {
            let mut frontier = vec![false; self.n];
            frontier[i] = true;
            for _ in 0..k {
                let mut next = vec![false; self.n];
                for u in (0..self.n).filter(|&u| frontier[u]) {
                    for &v in &self.adj[u] {
                        next[v] = true;
                    }
                }
                frontier = next;
            }
            for j in (0..self.n).filter(|&j| frontier[j]) {
                out.add_arc(i, j);
            }
        }
        out
    }

    /// gcd of circuit lengths per component, lcm across components; 1 if no circuit.
    pub fn cyclicity(&self) -> u64 {
        let mut comp_of = vec![usize::MAX; self.n];
        let comps = self.sccs();
        for (c, comp) in comps.iter().enumerate() {
            for &u in comp {
                comp_of[u] = c;
            }
        }
        let mut total = 1u64;
        for (c, comp) in comps.iter().enumerate() {
            if !self.has_circuit_in(comp) {
                continue;
            }
            let mut level = vec![usize::MAX; self.n];
            level[comp[0]] = 0;
            let mut queue = VecDeque::from([comp[0]]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if comp_of[v] == c && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            let mut g = 0u64;
            for &u in comp {
                for &v in &self.adj[u] {
                    if comp_of[v] == c {
                        let d = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs();
                        g = gcd(g, d);
                    }
                }
            }
            total = lcm(total, g.max(1));
        }
        total
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize, offset: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (offset + i, offset + (i + 1) % n)).collect()
    }

    #[test]
    fn three_cycle_has_cyclicity_three() {
        let g = Digraph::from_arcs(3, cycle(3, 0));
        assert_eq!(g.cyclicity(), 3);
        assert_eq!(g.sccs(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn two_loops_have_cyclicity_one() {
        let g = Digraph::from_arcs(2, [(0, 0), (1, 1)]);
        assert_eq!(g.cyclicity(), 1);
    }

    #[test]
    fn disjoint_two_and_three_cycles() {
        let mut arcs = cycle(2, 0);
        arcs.extend(cycle(3, 2));
        assert_eq!(Digraph::from_arcs(5, arcs).cyclicity(), 6);
    }

    #[test]
    fn acyclic_graph_has_cyclicity_one() {
        let g = Digraph::from_arcs(3, [(0, 1), (1, 2)]);
        assert_eq!(g.cyclicity(), 1);
        assert_eq!(g.sccs().len(), 3);
        assert_eq!(Digraph::empty(4).cyclicity(), 1);
    }

    #[test]
    fn mixed_circuit_lengths_take_gcd() {
        // circuits of length 2 and 3 through node 0
        let g = Digraph::from_arcs(4, [(0, 1), (1, 0), (1, 2), (2, 0)]);
        assert_eq!(g.cyclicity(), 1);
        // circuits of length 2 and 4
        let g = Digraph::from_arcs(4, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(g.cyclicity(), 2);
    }

    #[test]
    fn path_power_of_cycle() {
        let g = Digraph::from_arcs(3, cycle(3, 0));
        let g3 = g.path_power(3);
        assert_eq!(g3.arcs(), vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(g.path_power(1), g);
        assert_eq!(g.path_power(2).arcs(), vec![(0, 2), (1, 0), (2, 1)]);
    }

    #[test]
    fn sccs_of_condensable_graph() {
        let g = Digraph::from_arcs(5, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 2), (4, 4)]);
        assert_eq!(g.sccs(), vec![vec![0, 1], vec![2, 3], vec![4]]);
        let r = g.reachable_from(&[2]);
        assert_eq!(r, vec![false, false, true, true, false]);
    }

    #[test]
    fn long_path_does_not_overflow_stack() {
        let n = 200_000;
        let g = Digraph::from_arcs(n, (0..n).map(|i| (i, (i + 1) % n)));
        assert_eq!(g.sccs().len(), 1);
        assert_eq!(g.cyclicity(), n as u64);
    }
}
