//! Uncapacitated bipartite network simplex.
//!
//! Minimum-cost transport between `m` weighted sources and `n` weighted
//! targets. The basis is a spanning tree over sources, targets, and one
//! artificial root; the initial basis routes everything through big-M
//! artificial arcs, and pivots drive that mass onto structural arcs.
//!
//! Design points, following the classical primal network simplex:
//!
//! * structure-of-arrays arc storage, with the `m + n` artificial arcs at
//!   indices `0..m+n` so structural arcs can be appended later (column
//!   generation) without disturbing the basis;
//! * block pricing: scan a `√A`-sized block of arcs, pivot on the most
//!   negative reduced cost found, resume the scan where it stopped;
//! * the spanning tree is stored per node (`parent`, entering arc, arc
//!   orientation, flow on that arc, depth, child lists), the pivot cycle is
//!   found by walking both endpoints to their lowest common ancestor, and the
//!   cut subtree is re-rooted in place;
//! * potentials are updated incrementally per pivot and can be recomputed
//!   exactly from the tree (together with exact flows) to wash out
//!   accumulated rounding before optimality is certified.
//!
//! Flows on non-tree arcs are identically zero (the problem is
//! uncapacitated), so each node stores only the flow of the arc linking it to
//! its parent.

use crate::error::{Error, Result};
use crate::num::Real;

const NONE: u32 = u32::MAX;

/// One unit of transport in an optimal plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FlowEntry<T> {
    pub source: usize,
    pub target: usize,
    pub amount: T,
}

pub(crate) struct Simplex<T: Real> {
    m: usize,
    n: usize,
    root: u32,
    eps: T,
    /// Arcs; `0..m+n` artificial (node `k` ↔ root, cost `big_m`), rest structural.
    arc_src: Vec<u32>,
    arc_dst: Vec<u32>,
    arc_cost: Vec<T>,
    /// Net balance per node: `+supply` for sources, `−demand` for targets, 0 at the root.
    balance: Vec<T>,
    parent: Vec<u32>,
    pred_arc: Vec<u32>,
    /// `+1` when the node is the source endpoint of its pred arc, `−1` otherwise.
    pred_dir: Vec<i8>,
    /// Flow carried by the node's pred arc.
    node_flow: Vec<T>,
    depth: Vec<u32>,
    first_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
    pi: Vec<T>,
    next_arc: usize,
    pivot_count: u64,
}

impl<T: Real> Simplex<T> {
    /// Sets up the artificial basis. `cost_cap` must dominate every structural
    /// arc cost that will ever be added; it scales both the big-M penalty and
    /// the pricing tolerance.
    pub fn new(supplies: &[T], demands: &[T], cost_cap: T) -> Result<Self> {
        let (m, n) = (supplies.len(), demands.len());
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("transport needs ≥ 1 source and target".into()));
        }
        for &s in supplies.iter().chain(demands) {
            if !s.is_finite() || s < T::zero() {
                return Err(Error::InvalidInput("transport masses must be finite and ≥ 0".into()));
            }
        }
        let total_s = supplies.iter().fold(T::zero(), |a, &b| a + b);
        let total_d = demands.iter().fold(T::zero(), |a, &b| a + b);
        if (total_s - total_d).abs() > T::of(1e-9) * total_s.max(total_d).max(T::one()) {
            return Err(Error::MassMismatch { mu: total_s.as_f64(), nu: total_d.as_f64() });
        }
        // Rescale demands so the totals match to rounding dust; the residual
        // rides on artificial arcs and stays below the feasibility tolerance.
        let rescale = total_s / total_d;

        let nodes = m + n + 1;
        let root = (m + n) as u32;
        let scale = cost_cap.max(T::one());
        let big_m = T::of_usize(2 * (m + n)) * scale + T::one();
        let eps = T::of(1e-12) * scale;

        let mut s = Simplex {
            m,
            n,
            root,
            eps,
            arc_src: Vec::with_capacity(m + n),
            arc_dst: Vec::with_capacity(m + n),
            arc_cost: Vec::with_capacity(m + n),
            balance: vec![T::zero(); nodes],
            parent: vec![NONE; nodes],
            pred_arc: vec![NONE; nodes],
            pred_dir: vec![0; nodes],
            node_flow: vec![T::zero(); nodes],
            depth: vec![1; nodes],
            first_child: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            pi: vec![T::zero(); nodes],
            next_arc: 0,
            pivot_count: 0,
        };
        for (i, &sup) in supplies.iter().enumerate() {
            s.arc_src.push(i as u32);
            s.arc_dst.push(root);
            s.arc_cost.push(big_m);
            s.balance[i] = sup;
            s.pred_dir[i] = 1;
            s.node_flow[i] = sup;
            s.pi[i] = -big_m;
        }
        for (j, &dem) in demands.iter().enumerate() {
            let node = (m + j) as u32;
            s.arc_src.push(root);
            s.arc_dst.push(node);
            s.arc_cost.push(big_m);
            let d = dem * rescale;
            s.balance[m + j] = -d;
            s.pred_dir[m + j] = -1;
            s.node_flow[m + j] = d;
            s.pi[m + j] = big_m;
        }
        s.depth[root as usize] = 0;
        for k in 0..(m + n) as u32 {
            s.parent[k as usize] = root;
            s.pred_arc[k as usize] = k;
            s.attach_child(k, root);
        }
        Ok(s)
    }

    pub fn num_structural_arcs(&self) -> usize {
        self.arc_src.len() - (self.m + self.n)
    }

    #[cfg(test)]
    pub fn pivots(&self) -> u64 {
        self.pivot_count
    }

    /// Appends a structural arc from source `i` to target `j`.
    pub fn add_arc(&mut self, i: usize, j: usize, cost: T) {
        debug_assert!(i < self.m && j < self.n);
        debug_assert!(cost.is_finite() && cost >= T::zero());
        self.arc_src.push(i as u32);
        self.arc_dst.push((self.m + j) as u32);
        self.arc_cost.push(cost);
    }

    pub fn pi_source(&self, i: usize) -> T {
        self.pi[i]
    }

    pub fn pi_target(&self, j: usize) -> T {
        self.pi[self.m + j]
    }

    /// `cost + π_src − π_dst`; a structural arc prices in when this is negative.
    #[cfg(test)]
    pub fn virtual_reduced_cost(&self, i: usize, j: usize, cost: T) -> T {
        cost + self.pi[i] - self.pi[self.m + j]
    }

    pub fn pricing_eps(&self) -> T {
        self.eps
    }

    /// Total flow still carried by artificial arcs. Zero (up to rounding dust)
    /// once the structural arcs can route everything.
    pub fn artificial_mass(&self) -> T {
        let mut total = T::zero();
        for k in 0..(self.m + self.n) {
            if self.pred_arc[k] == k as u32 {
                total = total + self.node_flow[k];
            }
        }
        total
    }

    /// Σ flow·cost over structural arcs of the current basis.
    pub fn structural_cost(&self) -> T {
        let base = (self.m + self.n) as u32;
        let mut total = T::zero();
        for x in 0..(self.m + self.n) {
            let e = self.pred_arc[x];
            if e != NONE && e >= base {
                total = total + self.node_flow[x] * self.arc_cost[e as usize];
            }
        }
        total
    }

    /// The positive flows of the current basis as `(source, target, amount)`.
    pub fn flows(&self, min_flow: T) -> Vec<FlowEntry<T>> {
        let base = (self.m + self.n) as u32;
        let mut out = Vec::new();
        for x in 0..(self.m + self.n) {
            let e = self.pred_arc[x];
            if e != NONE && e >= base && self.node_flow[x] > min_flow {
                out.push(FlowEntry {
                    source: self.arc_src[e as usize] as usize,
                    target: self.arc_dst[e as usize] as usize - self.m,
                    amount: self.node_flow[x],
                });
            }
        }
        out.sort_by(|a, b| (a.source, a.target).cmp(&(b.source, b.target)));
        out
    }

    /// Pivots until no materialized arc prices in. Warm-starts from the
    /// current basis, so it can be called again after `add_arc`.
    pub fn optimize(&mut self) -> Result<()> {
        let cap = 10_000 + 60 * (self.m + self.n) as u64 + 10 * self.arc_src.len() as u64;
        while let Some(e) = self.find_entering() {
            if self.pivot_count >= cap {
                return Err(Error::Domain(format!(
                    "network simplex exceeded its pivot budget of {cap}"
                )));
            }
            self.pivot(e);
        }
        Ok(())
    }

    fn reduced(&self, e: usize) -> T {
        self.arc_cost[e] + self.pi[self.arc_src[e] as usize] - self.pi[self.arc_dst[e] as usize]
    }

    fn is_tree_arc(&self, e: u32) -> bool {
        self.pred_arc[self.arc_src[e as usize] as usize] == e
            || self.pred_arc[self.arc_dst[e as usize] as usize] == e
    }

    /// Block pricing over the structural arcs: returns the most negative arc
    /// of the first block (starting at the cursor) that holds one.
    fn find_entering(&mut self) -> Option<u32> {
        let base = self.m + self.n;
        let total = self.arc_src.len() - base;
        if total == 0 {
            return None;
        }
        let block = 64.max((total as f64).sqrt() as usize);
        let mut best: Option<u32> = None;
        let mut best_rc = -self.eps;
        let mut in_block = 0usize;
        for step in 0..total {
            let e = base + (self.next_arc + step) % total;
            let rc = self.reduced(e);
            if rc < best_rc && !self.is_tree_arc(e as u32) {
                best = Some(e as u32);
                best_rc = rc;
            }
            in_block += 1;
            if in_block == block {
                if best.is_some() {
                    self.next_arc = (self.next_arc + step + 1) % total;
                    return best;
                }
                in_block = 0;
            }
        }
        self.next_arc = 0;
        best
    }

    fn attach_child(&mut self, x: u32, p: u32) {
        let head = self.first_child[p as usize];
        self.prev_sib[x as usize] = NONE;
        self.next_sib[x as usize] = head;
        if head != NONE {
            self.prev_sib[head as usize] = x;
        }
        self.first_child[p as usize] = x;
    }

    fn detach_child(&mut self, x: u32) {
        let p = self.parent[x as usize];
        let prev = self.prev_sib[x as usize];
        let next = self.next_sib[x as usize];
        if prev != NONE {
            self.next_sib[prev as usize] = next;
        } else {
            self.first_child[p as usize] = next;
        }
        if next != NONE {
            self.prev_sib[next as usize] = prev;
        }
    }

    fn pivot(&mut self, e: u32) {
        self.pivot_count += 1;
        let u = self.arc_src[e as usize];
        let v = self.arc_dst[e as usize];
        let rc = self.reduced(e as usize);

        // Lowest common ancestor by depth walk.
        let (mut x, mut y) = (u, v);
        while self.depth[x as usize] > self.depth[y as usize] {
            x = self.parent[x as usize];
        }
        while self.depth[y as usize] > self.depth[x as usize] {
            y = self.parent[y as usize];
        }
        while x != y {
            x = self.parent[x as usize];
            y = self.parent[y as usize];
        }
        let join = x;

        // Pushing θ along u→v raises flow on arcs pointing with the cycle and
        // drains arcs pointing against it. On the u-side the cycle runs
        // parent→node (drained when the arc runs node→parent, dir = +1); on
        // the v-side it runs node→parent (drained when dir = −1). Ties keep
        // the later v-side candidate, which keeps the walk deterministic.
        let mut theta = T::infinity();
        let mut leave = NONE;
        let mut leave_on_v_side = false;
        let mut x = u;
        while x != join {
            if self.pred_dir[x as usize] == 1 && self.node_flow[x as usize] < theta {
                theta = self.node_flow[x as usize];
                leave = x;
                leave_on_v_side = false;
            }
            x = self.parent[x as usize];
        }
        let mut x = v;
        while x != join {
            if self.pred_dir[x as usize] == -1 && self.node_flow[x as usize] <= theta {
                theta = self.node_flow[x as usize];
                leave = x;
                leave_on_v_side = true;
            }
            x = self.parent[x as usize];
        }
        // Sources have no incoming arcs, so every cycle drains some arc.
        debug_assert!(leave != NONE, "transport cycle with no reverse arc");
        theta = theta.max(T::zero());

        let mut x = u;
        while x != join {
            let f = self.node_flow[x as usize];
            self.node_flow[x as usize] = if self.pred_dir[x as usize] == 1 { f - theta } else { f + theta };
            x = self.parent[x as usize];
        }
        let mut x = v;
        while x != join {
            let f = self.node_flow[x as usize];
            self.node_flow[x as usize] = if self.pred_dir[x as usize] == 1 { f + theta } else { f - theta };
            x = self.parent[x as usize];
        }
        self.node_flow[leave as usize] = T::zero();

        // Cut the leaving arc; the severed subtree hangs from `leave` and
        // contains exactly one endpoint of the entering arc. Re-root the
        // subtree at that endpoint and hang it off the other side.
        let (q, attach) = if leave_on_v_side { (v, u) } else { (u, v) };
        let mut path = vec![q];
        let mut node = q;
        while node != leave {
            node = self.parent[node as usize];
            path.push(node);
        }
        let saved: Vec<(u32, i8, T)> = path
            .iter()
            .map(|&p| (self.pred_arc[p as usize], self.pred_dir[p as usize], self.node_flow[p as usize]))
            .collect();
        for (i, &nd) in path.iter().enumerate() {
            self.detach_child(nd);
            if i == 0 {
                self.parent[nd as usize] = attach;
                self.pred_arc[nd as usize] = e;
                self.pred_dir[nd as usize] = if nd == u { 1 } else { -1 };
                self.node_flow[nd as usize] = theta;
            } else {
                let (arc, dir, flow) = saved[i - 1];
                self.parent[nd as usize] = path[i - 1];
                self.pred_arc[nd as usize] = arc;
                self.pred_dir[nd as usize] = -dir;
                self.node_flow[nd as usize] = flow;
            }
            let p = self.parent[nd as usize];
            self.attach_child(nd, p);
        }

        // Shift potentials across the moved subtree so the entering arc's
        // reduced cost becomes zero, and rebuild its depths.
        let delta = if q == v { rc } else { -rc };
        let mut stack = vec![q];
        while let Some(nd) = stack.pop() {
            self.pi[nd as usize] = self.pi[nd as usize] + delta;
            self.depth[nd as usize] = self.depth[self.parent[nd as usize] as usize] + 1;
            let mut c = self.first_child[nd as usize];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c as usize];
            }
        }
    }

    /// Recomputes potentials and flows exactly from the basis tree, washing
    /// out the rounding drift of incremental pivot updates.
    pub fn refresh_exact(&mut self) -> Result<()> {
        // Depth-first order from the root; children see their parent first.
        let mut order = Vec::with_capacity(self.m + self.n);
        let mut stack = vec![self.root];
        self.pi[self.root as usize] = T::zero();
        self.depth[self.root as usize] = 0;
        while let Some(nd) = stack.pop() {
            if nd != self.root {
                order.push(nd);
                let p = self.parent[nd as usize];
                let c = self.arc_cost[self.pred_arc[nd as usize] as usize];
                self.depth[nd as usize] = self.depth[p as usize] + 1;
                self.pi[nd as usize] = if self.pred_dir[nd as usize] == 1 {
                    self.pi[p as usize] - c
                } else {
                    self.pi[p as usize] + c
                };
            }
            let mut c = self.first_child[nd as usize];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c as usize];
            }
        }
        // Leaf-strip flow recomputation: every node's pred arc carries the net
        // balance of its subtree.
        let mut acc = self.balance.clone();
        for &nd in order.iter().rev() {
            let flow = if self.pred_dir[nd as usize] == 1 { acc[nd as usize] } else { -acc[nd as usize] };
            if flow < -T::of(1e-9) {
                return Err(Error::Domain(format!(
                    "transport basis became infeasible (flow {flow} on node {nd})"
                )));
            }
            self.node_flow[nd as usize] = flow.max(T::zero());
            let p = self.parent[nd as usize];
            acc[p as usize] = acc[p as usize] + acc[nd as usize];
        }
        Ok(())
    }

    /// Worst reduced cost over the materialized structural arcs.
    pub fn worst_structural_violation(&self) -> T {
        let base = self.m + self.n;
        let mut worst = T::zero();
        for e in base..self.arc_src.len() {
            if !self.is_tree_arc(e as u32) {
                worst = worst.min(self.reduced(e));
            }
        }
        worst
    }
}
