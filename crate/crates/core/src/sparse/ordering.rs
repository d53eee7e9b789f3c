//! Fill-reducing symmetric ordering by level-structure nested dissection.

use alloc::vec;
use alloc::vec::Vec;

use super::SparseMatrix;

const LEAF_SIZE: usize = 48;

/// Adjacency of the pattern of `A + A^T` without the diagonal.
struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    fn symmetrized(a: &SparseMatrix) -> Self {
        let n = a.nrows();
        let mut deg = vec![0usize; n + 1];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    deg[i + 1] += 1;
                    deg[j + 1] += 1;
                }
            }
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut next = deg.clone();
        let mut adj = vec![0; deg[n]];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    adj[next[i]] = j;
                    next[i] += 1;
                    adj[next[j]] = i;
                    next[j] += 1;
                }
            }
        }
        // dedupe each list
        let mut ptr = Vec::with_capacity(n + 1);
        let mut out = Vec::with_capacity(adj.len());
        ptr.push(0);
        for i in 0..n {
            let list = &mut adj[deg[i]..deg[i + 1]];
            list.sort_unstable();
            let mut last = usize::MAX;
            for &j in list.iter() {
                if j != last {
                    out.push(j);
                    last = j;
                }
            }
            ptr.push(out.len());
        }
        Graph { ptr, adj: out }
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Dissector<'g> {
    graph: &'g Graph,
    /// Part label of every node; only nodes carrying the active label are visited.
    label: Vec<usize>,
    next_label: usize,
    level: Vec<usize>,
    order: Vec<usize>,
}

impl Dissector<'_> {
    /// Breadth-first level structure from `root` within `part`; returns the
    /// nodes in visiting order and the level boundaries.
    fn bfs(&mut self, root: usize, part: usize) -> (Vec<usize>, Vec<usize>) {
        const VISITED: usize = usize::MAX;
        let mut queue = vec![root];
        self.level[root] = 0;
        self.label[root] = VISITED;
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &w in self.graph.neighbors(v) {
                if self.label[w] == part {
                    self.label[w] = VISITED;
                    self.level[w] = self.level[v] + 1;
                    queue.push(w);
                }
            }
        }
        for &v in &queue {
            self.label[v] = part;
        }
        let mut bounds = vec![0];
        for i in 1..queue.len() {
            if self.level[queue[i]] != self.level[queue[i - 1]] {
                bounds.push(i);
            }
        }
        bounds.push(queue.len());
        (queue, bounds)
    }

    fn dissect(&mut self, nodes: Vec<usize>, part: usize) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend(nodes);
            return;
        }
        // split into connected components first
        let (reached, _) = self.bfs(nodes[0], part);
        if reached.len() < nodes.len() {
            let mut components = Vec::new();
            for &v in &nodes {
                if self.label[v] == part {
                    let (comp, _) = self.bfs(v, part);
                    let comp_label = self.fresh_label();
                    for &w in &comp {
                        self.label[w] = comp_label;
                    }
                    components.push((comp, comp_label));
                }
            }
            for (comp, comp_label) in components {
                self.dissect(comp, comp_label);
            }
            return;
        }

        // pseudo-peripheral root: restart from the last node of the deepest level
        let (mut queue, mut bounds) = self.bfs(nodes[0], part);
        for _ in 0..4 {
            let candidate = *queue.last().unwrap();
            let (q2, b2) = self.bfs(candidate, part);
            if b2.len() <= bounds.len() {
                break;
            }
            queue = q2;
            bounds = b2;
        }
        let nlevels = bounds.len() - 1;
        if nlevels < 3 {
            self.order.extend(queue);
            return;
        }
        let half = queue.len() / 2;
        let mut sep_level = (1..nlevels - 1)
            .find(|&l| bounds[l + 1] > half)
            .unwrap_or(nlevels - 2);
        sep_level = sep_level.clamp(1, nlevels - 2);

        let low_label = self.fresh_label();
        let high_label = self.fresh_label();
        let sep_label = self.fresh_label();
        let low: Vec<usize> = queue[..bounds[sep_level]].to_vec();
        let sep: Vec<usize> = queue[bounds[sep_level]..bounds[sep_level + 1]].to_vec();
        let high: Vec<usize> = queue[bounds[sep_level + 1]..].to_vec();
        for &v in &low {
            self.label[v] = low_label;
        }
        for &v in &high {
            self.label[v] = high_label;
        }
        for &v in &sep {
            self.label[v] = sep_label;
        }
        self.dissect(low, low_label);
        self.dissect(high, high_label);
        self.order.extend(sep);
    }

    fn fresh_label(&mut self) -> usize {
        self.next_label += 1;
        self.next_label
    }
}

/// Elimination order for `a`: `order[k]` is the original index eliminated
/// at step `k`. Separators come after the parts they split.
pub fn nested_dissection(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let graph = Graph::symmetrized(a);
    let mut d = Dissector {
        graph: &graph,
        label: vec![0; n],
        next_label: 0,
        level: vec![0; n],
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect(), 0);
    d.order
}
