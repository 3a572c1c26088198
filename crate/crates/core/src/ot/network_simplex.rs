//! Primal network simplex for the dense transportation problem.
//!
//! The bipartite graph has `m` supply nodes, `n` demand nodes and one arc per
//! (supply, demand) pair, all uncapacitated. An artificial root node joins
//! every real node so that the initial spanning tree is feasible. The spanning
//! tree is stored with parent / thread / reverse-thread / subtree-size arrays
//! and is kept strongly feasible, which rules out cycling on degenerate pivots
//! without perturbing the supplies. Entering arcs are chosen by block search.
//!
//! Arc `e < m·n` is the real arc `(e / n, m + e % n)`; arc `m·n + u` is the
//! artificial arc of node `u`.

const NONE: usize = usize::MAX;

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;

const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Optimal flows and node potentials.
pub(crate) struct FlowSolution {
    /// Row-major `m × n` flows on the real arcs.
    pub flow: Vec<f64>,
    /// Supply-node potentials `u_i` and demand-node potentials `v_j` with
    /// `u_i + v_j <= C_ij` (up to the pivot tolerance) and equality on basic arcs.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Real arcs that are in the final spanning tree.
    pub basis: Vec<usize>,
    pub pivots: usize,
    /// Largest flow left on an artificial arc; nonzero only if the supplies
    /// and demands do not balance.
    pub artificial_flow: f64,
}

pub(crate) struct NetworkSimplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    real_arcs: usize,
    node_num: usize,
    root: usize,

    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,

    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,
    tolerance: f64,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> NetworkSimplex<'a> {
    /// `supply` has length `m` (nonnegative), `demand` length `n` (nonnegative);
    /// `cost` is row-major `m × n`.
    pub(crate) fn new(cost: &'a [f64], supply: &[f64], demand: &[f64]) -> Self {
        let m = supply.len();
        let n = demand.len();
        assert_eq!(cost.len(), m * n);
        let real_arcs = m * n;
        let node_num = m + n;
        let root = node_num;
        let all_arcs = real_arcs + node_num;

        let max_cost = cost.iter().copied().fold(0.0f64, f64::max);
        let art_cost_value = (max_cost + 1.0) * node_num as f64;

        let mut s = Self {
            m,
            n,
            cost,
            real_arcs,
            node_num,
            root,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            art_cost: vec![0.0; node_num],
            flow: vec![0.0; all_arcs],
            state: vec![STATE_LOWER; all_arcs],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![DIR_UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![1; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            block_size: ((real_arcs as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            // Potentials carry magnitudes up to the artificial cost; anything
            // below a few ulps of that is rounding noise.
            tolerance: 16.0 * f64::EPSILON * art_cost_value,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;

        for u in 0..node_num {
            let e = real_arcs + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if u < m {
                // Supply node: artificial arc u -> root at zero cost.
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = supply[u];
                s.art_cost[u] = 0.0;
            } else {
                // Demand node: artificial arc root -> u at a prohibitive cost.
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost_value;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = demand[u - m];
                s.art_cost[u] = art_cost_value;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.real_arcs {
            e / self.n
        } else {
            self.art_source[e - self.real_arcs]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.real_arcs {
            self.m + e % self.n
        } else {
            self.art_target[e - self.real_arcs]
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs {
            self.cost[e]
        } else {
            self.art_cost[e - self.real_arcs]
        }
    }

    /// Block search: scan arcs cyclically from `next_arc`, stop at the end of
    /// the first block that contains an arc with negative reduced cost, and
    /// take the most negative one seen.
    fn find_entering_arc(&mut self) -> bool {
        let total = self.real_arcs;
        let (m, n) = (self.m, self.n);
        let mut min = -self.tolerance;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / n;
        let mut j = e % n;
        let mut pi_i = self.pi[i];
        for _ in 0..total {
            if self.state[e] == STATE_LOWER {
                let c = self.cost[e] + pi_i - self.pi[m + j];
                if c < min {
                    min = c;
                    found = e;
                }
            }
            e += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if e == total {
                    e = 0;
                    i = 0;
                }
                pi_i = self.pi[i];
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Picks the blocking arc on the cycle closed by `in_arc`. Ties keep the
    /// tree strongly feasible: first side strict, second side non-strict.
    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs always sit at their lower bound here.
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0u8;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }

        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = STATE_LOWER;
        // The blocking arc drops to exactly zero.
        self.flow[out] = 0.0;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem u_in .. u_out under v_in, reversing parent links.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // pred, pred_dir, last_succ and succ_num along the reversed stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        // last_succ from v_in towards the root.
        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        // last_succ from v_out towards the root.
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - f64::from(self.pred_dir[u_in]) * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Runs pivots to optimality. `check` (tests only) validates the tree
    /// after every pivot.
    pub(crate) fn run(mut self, check: bool) -> Result<FlowSolution, String> {
        let mut pivots = 0usize;
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err("unbounded transport problem (negative cycle)".into());
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
            if check {
                self.validate()?;
            }
        }

        let (m, n) = (self.m, self.n);
        let artificial_flow = self.flow[self.real_arcs..]
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
        let basis = (0..self.node_num)
            .map(|u| self.pred[u])
            .filter(|&e| e < self.real_arcs)
            .collect();
        // Reduced cost C_ij + pi_i - pi_{m+j} >= 0, so u_i = -pi_i and
        // v_j = pi_{m+j}. Shift so that u_0 = 0; the dual objective is
        // unchanged because total supply equals total demand.
        let offset = -self.pi[0];
        let u = (0..m).map(|i| -self.pi[i] - offset).collect();
        let v = (0..n).map(|j| self.pi[m + j] + offset).collect();
        let mut flow = self.flow;
        flow.truncate(self.real_arcs);
        Ok(FlowSolution {
            flow,
            u,
            v,
            basis,
            pivots,
            artificial_flow,
        })
    }

    /// Structural consistency of the spanning tree; used by tests.
    fn validate(&self) -> Result<(), String> {
        let nodes = self.node_num + 1;
        // Thread is one cycle through all nodes starting at the root.
        let mut seen = vec![false; nodes];
        let mut u = self.root;
        for _ in 0..nodes {
            if seen[u] {
                return Err(format!("thread revisits node {u}"));
            }
            seen[u] = true;
            if self.rev_thread[self.thread[u]] != u {
                return Err(format!("rev_thread inconsistent at {u}"));
            }
            u = self.thread[u];
        }
        if u != self.root {
            return Err("thread does not close at root".into());
        }
        for u in 0..self.node_num {
            let e = self.pred[u];
            let p = self.parent[u];
            let (s, t) = (self.source(e), self.target(e));
            let ok = match self.pred_dir[u] {
                DIR_UP => s == u && t == p,
                _ => s == p && t == u,
            };
            if !ok {
                return Err(format!("pred arc of {u} does not join it to its parent"));
            }
            if self.state[e] != STATE_TREE {
                return Err(format!("pred arc of {u} not marked as tree arc"));
            }
            let rc = self.arc_cost(e) + self.pi[s] - self.pi[t];
            if rc.abs() > 1e-6 * (1.0 + self.pi[s].abs() + self.pi[t].abs()) {
                return Err(format!("tree arc {e} has reduced cost {rc}"));
            }
            if self.flow[e] < 0.0 {
                return Err(format!("negative flow on arc {e}"));
            }
        }
        // Subtree sizes and last successors via a thread walk.
        for u in 0..nodes {
            let mut count = 1;
            let mut w = u;
            let mut last = u;
            loop {
                let next = self.thread[w];
                if next == self.root && u != self.root {
                    break;
                }
                if !self.is_descendant(next, u) || next == u {
                    break;
                }
                count += 1;
                last = next;
                w = next;
            }
            if u != self.root && count != self.succ_num[u] {
                return Err(format!("succ_num[{u}] = {} but subtree has {count}", self.succ_num[u]));
            }
            if u != self.root && last != self.last_succ[u] {
                return Err(format!("last_succ[{u}] = {} but walk ends at {last}", self.last_succ[u]));
            }
        }
        Ok(())
    }

    fn is_descendant(&self, mut v: usize, ancestor: usize) -> bool {
        while v != NONE {
            if v == ancestor {
                return true;
            }
            v = self.parent[v];
        }
        false
    }
}

#[cfg(test)]
pub(crate) fn solve_checked(cost: &[f64], supply: &[f64], demand: &[f64]) -> FlowSolution {
    NetworkSimplex::new(cost, supply, demand).run(true).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_stays_consistent_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let m = rng.random_range(1..9);
            let n = rng.random_range(1..9);
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random_range(0..5) as f64).collect();
            // Integer supplies force many degenerate pivots.
            let supply = vec![n as f64; m];
            let demand = vec![m as f64; n];
            let sol = solve_checked(&cost, &supply, &demand);
            assert_eq!(sol.artificial_flow, 0.0);
            for i in 0..m {
                let row: f64 = sol.flow[i * n..(i + 1) * n].iter().sum();
                assert_eq!(row, n as f64);
            }
        }
    }

    #[test]
    fn general_supplies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = rng.random_range(1..12);
            let n = rng.random_range(1..12);
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
            let mut supply: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
            let mut demand: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
            supply.iter_mut().for_each(|v| *v /= sa);
            demand.iter_mut().for_each(|v| *v /= sb);
            let sol = solve_checked(&cost, &supply, &demand);
            assert!(sol.artificial_flow < 1e-12);
            for (e, &c) in cost.iter().enumerate() {
                let (i, j) = (e / n, e % n);
                assert!(sol.u[i] + sol.v[j] <= c + 1e-9);
            }
        }
    }
}
