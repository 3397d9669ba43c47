//! Join trees and local message passing.
//!
//! A family of hyperedges (valuations over small scopes) is compiled into a
//! tree of cliques with the running-intersection property. Messages between
//! neighbouring cliques then yield marginals of the combined valuation
//! without ever building it on the full frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frame::{frame_limit, FrameSet, Scope, Variable};
use crate::mass::MassFunction;
use crate::network::{BeliefNetwork, EvidenceSet};
use crate::revision::{combine_max, marginalize_max};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombinationMode {
    /// Dempster's rule and ordinary marginalization.
    SumProduct,
    /// Max-product: no normalization, projections keep the best score.
    MaxProduct,
}

/// A valuation contributed to a join tree. `max` differs from `sum` only for
/// probability tables, whose raw entries are kept for max-product scores.
#[derive(Clone, Debug)]
pub struct Hyperedge<S = f64> {
    label: String,
    sum: MassFunction<S>,
    max: MassFunction<S>,
}

impl<S: Scalar> Hyperedge<S> {
    pub fn new(label: impl Into<String>, mass: MassFunction<S>) -> Self {
        Hyperedge { label: label.into(), max: mass.clone(), sum: mass }
    }

    pub fn with_max(label: impl Into<String>, sum: MassFunction<S>, max: MassFunction<S>) -> Result<Self> {
        if sum.scope() != max.scope() {
            return Err(Error::scope("sum and max forms of a hyperedge differ in scope"));
        }
        Ok(Hyperedge { label: label.into(), sum, max })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scope(&self) -> &Scope {
        self.sum.scope()
    }

    pub fn mass(&self, mode: CombinationMode) -> &MassFunction<S> {
        match mode {
            CombinationMode::SumProduct => &self.sum,
            CombinationMode::MaxProduct => &self.max,
        }
    }
}

/// Hyperedges of every node valuation plus one per finding.
pub fn network_hyperedges<S: Scalar>(net: &BeliefNetwork<S>, evidence: &EvidenceSet) -> Result<Vec<Hyperedge<S>>> {
    let mut out = Vec::new();
    for v in net.valuations() {
        out.push(Hyperedge::with_max(format!("node {}", v.name()), v.to_mass()?, v.to_unweighted_mass()?)?);
    }
    for ((name, _), m) in evidence.iter().zip(evidence.to_masses(net.variables())?) {
        out.push(Hyperedge::new(format!("evidence {name}"), m));
    }
    Ok(out)
}

/// Fusion algorithm step: combines every member of `family` whose scope
/// contains `var` and replaces them by the combination with `var` summed out.
pub fn eliminate_variable<S: Scalar>(family: Vec<MassFunction<S>>, var: &str) -> Result<Vec<MassFunction<S>>> {
    let (with, mut rest): (Vec<_>, Vec<_>) = family.into_iter().partition(|m| m.scope().contains(var));
    let Some(first) = with.first() else { return Ok(rest) };
    let mut acc = first.clone();
    for m in &with[1..] {
        acc = acc.combine_extended(m)?;
    }
    rest.push(acc.marginalize(&acc.scope().without(var))?);
    Ok(rest)
}

/// A message on a directed tree edge. In max mode `witnesses[k]` lists the
/// focal sets of the sender's fused valuation attaining the score of
/// focal `k`.
#[derive(Clone, Debug)]
pub struct Message<S = f64> {
    pub mass: MassFunction<S>,
    pub witnesses: Vec<Vec<FrameSet>>,
}

#[derive(Clone, Debug)]
pub struct JoinTree<S = f64> {
    family: Vec<Hyperedge<S>>,
    scopes: Vec<Scope>,
    attached: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    root: usize,
    elimination_order: Vec<String>,
    mode: CombinationMode,
    locals: Vec<Option<MassFunction<S>>>,
    mailboxes: BTreeMap<(usize, usize), Message<S>>,
}

/// Builds a join tree for `family` with a node containing `root_scope`.
pub fn build_join_tree<S: Scalar>(family: Vec<Hyperedge<S>>, root_scope: &Scope) -> Result<JoinTree<S>> {
    JoinTree::build(family, root_scope)
}

fn fill_in(adj: &BTreeMap<String, BTreeSet<String>>, v: &str) -> usize {
    let ns: Vec<&String> = adj[v].iter().collect();
    let mut fill = 0;
    for (i, a) in ns.iter().enumerate() {
        for b in &ns[i + 1..] {
            if !adj[a.as_str()].contains(b.as_str()) {
                fill += 1;
            }
        }
    }
    fill
}

impl<S: Scalar> JoinTree<S> {
    pub fn build(family: Vec<Hyperedge<S>>, root_scope: &Scope) -> Result<Self> {
        let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
        for h in &family {
            for v in h.scope().vars() {
                if let Some(prev) = vars.insert(v.name().to_string(), v.clone()) {
                    if prev != *v {
                        return Err(Error::scope(format!("variable `{}` used with two domains", v.name())));
                    }
                }
            }
        }
        for v in root_scope.vars() {
            if vars.get(v.name()) != Some(v) {
                return Err(Error::scope(format!("root variable `{}` is not covered by the family", v.name())));
            }
        }

        // interaction graph
        let mut adj: BTreeMap<String, BTreeSet<String>> = vars.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for s in family.iter().map(Hyperedge::scope).chain([root_scope]) {
            for a in s.names() {
                for b in s.names() {
                    if a != b {
                        adj.get_mut(a).unwrap().insert(b.to_string());
                    }
                }
            }
        }

        // min-fill elimination, ties by name
        let mut order = Vec::new();
        let mut cliques: Vec<Scope> = Vec::new();
        while !adj.is_empty() {
            let v = adj.keys().min_by_key(|v| (fill_in(&adj, v), (*v).clone())).unwrap().clone();
            let ns = adj.remove(&v).unwrap();
            let clique = Scope::new(ns.iter().chain([&v]).map(|n| vars[n].clone()))?;
            let size = clique.frame_size_unchecked();
            if size > frame_limit() as u128 {
                return Err(Error::Capacity { size, limit: frame_limit() });
            }
            for a in &ns {
                let row = adj.get_mut(a).unwrap();
                row.remove(&v);
                row.extend(ns.iter().filter(|b| *b != a).cloned());
            }
            order.push(v);
            cliques.push(clique);
        }
        if cliques.is_empty() {
            cliques.push(Scope::empty());
        }

        // elimination tree: parent is the clique of the earliest eliminated remaining variable
        let step: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut up: Vec<Option<usize>> = (0..cliques.len())
            .map(|i| cliques[i].names().filter(|n| order.get(i).is_none_or(|v| v != n)).map(|n| step[n]).min())
            .collect();
        let last = cliques.len() - 1;
        for p in up.iter_mut().take(last) {
            // link forest components with empty separators
            if p.is_none() {
                *p = Some(last);
            }
        }

        // contract cliques contained in a neighbour
        let mut alive = vec![true; cliques.len()];
        let mut links: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cliques.len()];
        for (i, p) in up.iter().enumerate() {
            if let Some(p) = *p {
                links[i].insert(p);
                links[p].insert(i);
            }
        }
        loop {
            let found = (0..cliques.len()).filter(|&a| alive[a]).find_map(|a| {
                links[a].iter().copied().find(|&b| cliques[b].contains_scope(&cliques[a])).map(|b| (a, b))
            });
            let Some((a, b)) = found else { break };
            alive[a] = false;
            let moved: Vec<usize> = links[a].iter().copied().filter(|&n| n != b).collect();
            for n in moved {
                links[n].remove(&a);
                links[n].insert(b);
                links[b].insert(n);
            }
            links[b].remove(&a);
            links[a].clear();
        }
        let renumber: BTreeMap<usize, usize> =
            (0..cliques.len()).filter(|&i| alive[i]).enumerate().map(|(new, old)| (old, new)).collect();
        let scopes: Vec<Scope> = renumber.keys().map(|&o| cliques[o].clone()).collect();
        let neighbors: Vec<Vec<usize>> =
            renumber.keys().map(|&o| links[o].iter().map(|n| renumber[n]).collect()).collect();
        up.clear();

        let smallest_container = |s: &Scope| {
            (0..scopes.len())
                .filter(|&i| scopes[i].contains_scope(s))
                .min_by_key(|&i| (scopes[i].frame_size_unchecked(), i))
        };
        let mut attached = vec![Vec::new(); scopes.len()];
        for (k, h) in family.iter().enumerate() {
            let node = smallest_container(h.scope()).expect("hyperedge scopes are cliques of the interaction graph");
            attached[node].push(k);
        }
        let root = smallest_container(root_scope).expect("root scope is a clique of the interaction graph");

        let mut tree = JoinTree {
            family,
            locals: vec![None; scopes.len()],
            parent: vec![None; scopes.len()],
            scopes,
            attached,
            neighbors,
            root,
            elimination_order: order,
            mode: CombinationMode::SumProduct,
            mailboxes: BTreeMap::new(),
        };
        tree.reroot(root);
        Ok(tree)
    }

    fn reroot(&mut self, root: usize) {
        self.root = root;
        self.parent = vec![None; self.scopes.len()];
        let mut stack = vec![root];
        let mut seen = vec![false; self.scopes.len()];
        seen[root] = true;
        while let Some(n) = stack.pop() {
            for &c in &self.neighbors[n] {
                if !seen[c] {
                    seen[c] = true;
                    self.parent[c] = Some(n);
                    stack.push(c);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    pub fn scope(&self, node: usize) -> &Scope {
        &self.scopes[node]
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Neighbours away from the root.
    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[node].iter().copied().filter(move |&c| self.parent[c] == Some(node))
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn family(&self) -> &[Hyperedge<S>] {
        &self.family
    }

    /// Indices into [`JoinTree::family`] of the hyperedges stored at `node`.
    pub fn attached(&self, node: usize) -> &[usize] {
        &self.attached[node]
    }

    pub fn elimination_order(&self) -> &[String] {
        &self.elimination_order
    }

    pub fn mode(&self) -> CombinationMode {
        self.mode
    }

    /// Undirected tree edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out
    }

    pub fn separator(&self, a: usize, b: usize) -> Scope {
        self.scopes[a].intersection(&self.scopes[b])
    }

    /// Node with the smallest frame containing `scope`.
    pub fn node_containing(&self, scope: &Scope) -> Option<usize> {
        (0..self.len())
            .filter(|&i| self.scopes[i].contains_scope(scope))
            .min_by_key(|&i| (self.scopes[i].frame_size_unchecked(), i))
    }

    /// Checks the tree shape, the running-intersection property and that
    /// every hyperedge sits at a node covering its scope.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.len();
        if self.edges().len() + 1 != n {
            return Err(Error::invalid("join tree has the wrong number of edges"));
        }
        if (0..n).any(|i| i != self.root && self.parent[i].is_none()) {
            return Err(Error::invalid("join tree is not connected"));
        }
        let vars: BTreeSet<&str> = self.scopes.iter().flat_map(|s| s.names()).collect();
        for v in vars {
            let holders: Vec<usize> = (0..n).filter(|&i| self.scopes[i].contains(v)).collect();
            // a connected subtree has exactly one node whose parent lacks v
            let tops = holders.iter().filter(|&&i| self.parent[i].is_none_or(|p| !self.scopes[p].contains(v))).count();
            if tops != 1 {
                return Err(Error::invalid(format!("running intersection fails for `{v}`")));
            }
        }
        for (node, hs) in self.attached.iter().enumerate() {
            for &h in hs {
                if !self.scopes[node].contains_scope(self.family[h].scope()) {
                    return Err(Error::invalid(format!("hyperedge `{}` misplaced", self.family[h].label)));
                }
            }
        }
        Ok(())
    }

    /// Switches the combination mode. Cached locals and messages are dropped
    /// when the mode changes.
    pub fn set_mode(&mut self, mode: CombinationMode) {
        if mode != self.mode {
            self.mode = mode;
            self.reset();
        }
    }

    /// Empties every mailbox and forgets the cached locals.
    pub fn reset(&mut self) {
        self.mailboxes.clear();
        self.locals.iter_mut().for_each(|l| *l = None);
    }

    fn vacuous(&self, scope: &Scope) -> Result<MassFunction<S>> {
        MassFunction::vacuous(scope)
    }

    fn combine(&self, a: &MassFunction<S>, b: &MassFunction<S>) -> Result<MassFunction<S>> {
        match self.mode {
            CombinationMode::SumProduct => a.combine(b),
            CombinationMode::MaxProduct => combine_max(a, b),
        }
    }

    fn local(&mut self, node: usize) -> Result<MassFunction<S>> {
        if let Some(l) = &self.locals[node] {
            return Ok(l.clone());
        }
        let scope = self.scopes[node].clone();
        let mut acc = self.vacuous(&scope)?;
        for &h in &self.attached[node] {
            let m = self.family[h].mass(self.mode).extend(&scope)?;
            acc = self.combine(&acc, &m)?;
        }
        self.locals[node] = Some(acc.clone());
        Ok(acc)
    }

    /// The local valuation of `node` combined with every incoming message
    /// except the one from `exclude`.
    pub fn fused(&mut self, node: usize, exclude: Option<usize>) -> Result<MassFunction<S>> {
        let mut acc = self.local(node)?;
        let scope = self.scopes[node].clone();
        for &g in &self.neighbors[node] {
            if Some(g) == exclude {
                continue;
            }
            let msg = self
                .mailboxes
                .get(&(g, node))
                .ok_or_else(|| Error::invalid(format!("mailbox {g}->{node} is empty; propagate first")))?;
            acc = self.combine(&acc, &msg.mass.extend(&scope)?)?;
        }
        Ok(acc)
    }

    /// Computes and stores the message `from -> to`. Fails when a message
    /// it depends on has not been sent yet.
    pub fn send_message(&mut self, from: usize, to: usize) -> Result<()> {
        if !self.neighbors[from].contains(&to) {
            return Err(Error::invalid(format!("nodes {from} and {to} are not adjacent")));
        }
        let fused = self.fused(from, Some(to))?;
        let sep = self.separator(from, to);
        let msg = match self.mode {
            CombinationMode::SumProduct => Message { mass: fused.marginalize(&sep)?, witnesses: vec![] },
            CombinationMode::MaxProduct => {
                let p = marginalize_max(&fused, &sep)?;
                Message { mass: p.mass, witnesses: p.witnesses }
            }
        };
        self.mailboxes.insert((from, to), msg);
        Ok(())
    }

    pub fn message(&self, from: usize, to: usize) -> Option<&Message<S>> {
        self.mailboxes.get(&(from, to))
    }

    /// Directed edges whose message is missing but can be computed now.
    pub fn ready_messages(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for from in 0..self.len() {
            for &to in &self.neighbors[from] {
                if self.mailboxes.contains_key(&(from, to)) {
                    continue;
                }
                let ready = self.neighbors[from].iter().all(|&g| g == to || self.mailboxes.contains_key(&(g, from)));
                if ready {
                    out.push((from, to));
                }
            }
        }
        out
    }

    /// Collect towards the root, then distribute away from it.
    pub fn schedule(&self) -> Vec<(usize, usize)> {
        let mut pre = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            pre.push(n);
            stack.extend(self.children(n));
        }
        let mut out: Vec<(usize, usize)> = pre.iter().rev().filter_map(|&n| self.parent[n].map(|p| (n, p))).collect();
        out.extend(pre.iter().filter_map(|&n| self.parent[n].map(|p| (p, n))));
        out
    }

    /// Fills every mailbox in `mode`.
    pub fn propagate(&mut self, mode: CombinationMode) -> Result<()> {
        self.set_mode(mode);
        for (from, to) in self.schedule() {
            if !self.mailboxes.contains_key(&(from, to)) {
                self.send_message(from, to)?;
            }
        }
        Ok(())
    }

    /// Marginal of the combined family on the scope of `node`.
    pub fn node_marginal(&mut self, node: usize) -> Result<MassFunction<S>> {
        self.fused(node, None)
    }

    /// Marginal on `scope`, which must fit inside a single node.
    pub fn marginal(&mut self, scope: &Scope) -> Result<MassFunction<S>> {
        let node =
            self.node_containing(scope).ok_or_else(|| Error::scope(format!("no join tree node contains {scope}")))?;
        let m = self.node_marginal(node)?;
        match self.mode {
            CombinationMode::SumProduct => m.marginalize(scope),
            CombinationMode::MaxProduct => Ok(marginalize_max(&m, scope)?.mass),
        }
    }

    /// Deterministic human-readable description of nodes and mailboxes.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "elimination order: {}", self.elimination_order.join(" "));
        let _ = writeln!(out, "root: {}", self.root);
        for i in 0..self.len() {
            let labels: Vec<&str> = self.attached[i].iter().map(|&h| self.family[h].label.as_str()).collect();
            let parent = self.parent[i].map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(out, "node {i} {} parent {parent} [{}]", self.scopes[i], labels.join("; "));
        }
        for ((from, to), msg) in &self.mailboxes {
            let _ = writeln!(out, "message {from}->{to} {}: {} focal sets", msg.mass.scope(), msg.mass.len());
        }
        out
    }
}

/// Posterior marginal of `var` given `evidence`, by propagation.
pub fn query_marginal<S: Scalar>(net: &BeliefNetwork<S>, var: &str, evidence: &EvidenceSet) -> Result<MassFunction<S>> {
    let scope = Scope::new([net.variable(var)?.clone()])?;
    query_marginal_scope(net, &scope, evidence)
}

/// Posterior marginal on several variables at once.
pub fn query_marginal_scope<S: Scalar>(
    net: &BeliefNetwork<S>,
    scope: &Scope,
    evidence: &EvidenceSet,
) -> Result<MassFunction<S>> {
    for v in scope.vars() {
        if net.variable(v.name())? != v {
            return Err(Error::scope(format!("variable `{}` has a different domain in the network", v.name())));
        }
    }
    let mut tree = build_join_tree(network_hyperedges(net, evidence)?, scope)?;
    tree.propagate(CombinationMode::SumProduct)?;
    tree.marginal(scope)
}
