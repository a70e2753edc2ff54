//! Transportation simplex on the bipartite source/target graph.

/// Basic feasible solution of a transportation problem with its spanning tree.
pub(crate) struct Transportation<'a> {
    cost: &'a [Vec<f64>],
    m: usize,
    n: usize,
    /// Basic cells `(i, j, flow)`; always `m + n - 1` of them.
    basis: Vec<(usize, usize, f64)>,
}

const DEGENERATE_RUN: usize = 50;

impl<'a> Transportation<'a> {
    /// North-west corner start. `supply` and `demand` must have equal sums.
    pub(crate) fn new(cost: &'a [Vec<f64>], supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]).max(0.0);
            basis.push((i, j, q));
            let advance_row = if i == m - 1 {
                false
            } else if j == n - 1 {
                true
            } else {
                s[i] <= d[j]
            };
            s[i] -= q;
            d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if advance_row {
                i += 1;
            } else {
                j += 1;
            }
        }
        Transportation { cost, m, n, basis }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        // node ids: rows 0..m, columns m..m+n; edge payload = (neighbour, basis index)
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.basis.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        let mut stack = vec![0usize];
        pot[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &(nb, k) in &adj[node] {
                if pot[nb].is_nan() {
                    let (i, j, _) = self.basis[k];
                    let c = self.cost[i][j];
                    pot[nb] = c - pot[node];
                    stack.push(nb);
                }
            }
        }
        for p in pot.iter_mut() {
            if p.is_nan() {
                *p = 0.0;
            }
        }
        let v = pot.split_off(m);
        (pot, v)
    }

    /// Tree path from `from` to `to` as a list of basis indices.
    fn tree_path(&self, adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &(nb, k) in &adj[node] {
                if !seen[nb] {
                    seen[nb] = true;
                    parent[nb] = Some((node, k));
                    queue.push_back(nb);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = to;
        while node != from {
            let (prev, k) = parent[node].expect("basis spans the graph");
            path.push(k);
            node = prev;
        }
        path.reverse();
        path
    }

    /// Pivots until no cell has negative reduced cost.
    pub(crate) fn solve(&mut self) {
        let scale = 1.0 + self.cost.iter().flat_map(|r| r.iter()).fold(0.0f64, |s, c| s.max(c.abs()));
        let tol = 1e-12 * scale;
        let mut degenerate = 0usize;
        let max_iter = 20 * (self.m * self.n + self.m + self.n) + 1000;
        for _ in 0..max_iter {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -tol;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    let rc = self.cost[i][j] - u[i] - v[j];
                    if rc < best {
                        enter = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = rc;
                    }
                }
            }
            let Some((ei, ej)) = enter else { return };
            // Cycle: entering cell (+), then the tree path from column ej back to row ei.
            let path = self.tree_path(&adj, self.m + ej, ei);
            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for (step, &k) in path.iter().enumerate() {
                if step % 2 == 0 {
                    let (i, j, f) = self.basis[k];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let (li, lj, _) = self.basis[l];
                            f < theta || (f == theta && (i, j) < (li, lj))
                        }
                    };
                    if better {
                        theta = f;
                        leave = Some(k);
                    }
                }
            }
            let leave = leave.expect("cycle has a decreasing edge");
            let theta = theta.max(0.0);
            if theta == 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for (step, &k) in path.iter().enumerate() {
                let f = &mut self.basis[k].2;
                if step % 2 == 0 {
                    *f = (*f - theta).max(0.0);
                } else {
                    *f += theta;
                }
            }
            self.basis[leave] = (ei, ej, theta);
        }
    }

    pub(crate) fn flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.basis.iter().copied()
    }
}
