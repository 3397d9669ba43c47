//! Belief networks: a dag whose nodes store (pseudo-)conditional
//! valuations. The underlying joint distribution is the combination of all
//! node valuations; for conditional probability tables this reduces to the
//! familiar product `∏ P(x_i | x_π(i))`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope, Variable};
use crate::mass::MassFunction;
use crate::scalar::Scalar;

/// Directed acyclic graph over named nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
    parents: BTreeMap<String, Vec<String>>,
    children: BTreeMap<String, Vec<String>>,
}

impl Dag {
    pub fn new<N: Into<String>>(
        nodes: impl IntoIterator<Item = N>,
        edges: impl IntoIterator<Item = (N, N)>,
    ) -> Result<Self> {
        let mut nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        nodes.sort();
        if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate node `{}`", w[0])));
        }
        let mut edges: Vec<(String, String)> = edges.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        edges.sort();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate edge {} -> {}", w[0].0, w[0].1)));
        }
        let mut parents: BTreeMap<String, Vec<String>> = nodes.iter().map(|n| (n.clone(), vec![])).collect();
        let mut children = parents.clone();
        for (a, b) in &edges {
            for n in [a, b] {
                if !parents.contains_key(n) {
                    return Err(Error::unknown_variable(n.clone()));
                }
            }
            if a == b {
                return Err(Error::invalid(format!("cycle detected: self-loop on `{a}`")));
            }
            parents.get_mut(b).unwrap().push(a.clone());
            children.get_mut(a).unwrap().push(b.clone());
        }
        let dag = Dag { nodes, edges, parents, children };
        if dag.topological_order().len() != dag.nodes.len() {
            return Err(Error::invalid("cycle detected"));
        }
        Ok(dag)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn contains(&self, node: &str) -> bool {
        self.parents.contains_key(node)
    }

    /// Parents in name order.
    pub fn parents(&self, node: &str) -> &[String] {
        self.parents.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn children(&self, node: &str) -> &[String] {
        self.children.get(node).map_or(&[], Vec::as_slice)
    }

    /// Kahn's algorithm, ties broken by node name. Shorter than `nodes()` iff cyclic.
    pub fn topological_order(&self) -> Vec<String> {
        let mut indeg: BTreeMap<&str, usize> = self.parents.iter().map(|(n, ps)| (n.as_str(), ps.len())).collect();
        let mut ready: BTreeSet<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(n, _)| *n).collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            out.push(n.to_string());
            for c in self.children(n) {
                let d = indeg.get_mut(c.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        out
    }

    /// `nodes` together with all their ancestors.
    pub fn ancestral_closure<'a>(&'a self, nodes: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = nodes.into_iter().collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.parents(n).iter().map(String::as_str));
            }
        }
        seen
    }
}

fn resolve_set<'a>(dag: &'a Dag, names: &[&str], what: &str) -> Result<BTreeSet<&'a str>> {
    names
        .iter()
        .map(|n| {
            dag.nodes()
                .iter()
                .find(|m| m.as_str() == *n)
                .map(String::as_str)
                .ok_or_else(|| Error::Unknown { kind: "node", name: format!("{n} (in {what})") })
        })
        .collect()
}

/// Whether `l` d-separates `j` from `k`: no trail between them is active given `l`.
///
/// Decided by a reachability sweep over (node, direction) states: a trail may
/// pass a non-collider outside `l`, and a collider that is in `l` or has a
/// descendant in `l`.
pub fn d_separated(dag: &Dag, j: &[&str], k: &[&str], l: &[&str]) -> Result<bool> {
    let js = resolve_set(dag, j, "J")?;
    let ks = resolve_set(dag, k, "K")?;
    let ls = resolve_set(dag, l, "L")?;
    if !js.is_disjoint(&ks) || !js.is_disjoint(&ls) || !ks.is_disjoint(&ls) {
        return Err(Error::invalid("J, K and L must be pairwise disjoint"));
    }
    // colliders in an ancestor of L (or in L) can be passed
    let opened = dag.ancestral_closure(ls.iter().copied());

    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum Dir {
        FromChild,
        FromParent,
    }
    let mut visited: BTreeSet<(&str, Dir)> = BTreeSet::new();
    let mut queue: VecDeque<(&str, Dir)> = js.iter().map(|&n| (n, Dir::FromChild)).collect();
    while let Some((node, dir)) = queue.pop_front() {
        if !visited.insert((node, dir)) {
            continue;
        }
        let blocked_here = ls.contains(node);
        if !blocked_here && ks.contains(node) {
            return Ok(false);
        }
        match dir {
            Dir::FromChild if !blocked_here => {
                queue.extend(dag.parents(node).iter().map(|p| (p.as_str(), Dir::FromChild)));
                queue.extend(dag.children(node).iter().map(|c| (c.as_str(), Dir::FromParent)));
            }
            Dir::FromChild => {}
            Dir::FromParent => {
                if !blocked_here {
                    queue.extend(dag.children(node).iter().map(|c| (c.as_str(), Dir::FromParent)));
                }
                if opened.contains(node) {
                    queue.extend(dag.parents(node).iter().map(|p| (p.as_str(), Dir::FromChild)));
                }
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkMode {
    Probabilistic,
    Ds,
}

/// Knowledge stored at one node: a conditional probability table or a
/// (pseudo-)belief function over the node and its parents.
#[derive(Clone, Debug, PartialEq)]
pub enum Valuation<S = f64> {
    /// `rows[u][x] = P(node = x | parents = u)`, rows in parent-configuration order.
    Probabilistic(Vec<Vec<S>>),
    Ds(MassFunction<S>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeValuation<S = f64> {
    node: Variable,
    parents: Scope,
    valuation: Valuation<S>,
}

impl<S: Scalar> NodeValuation<S> {
    pub fn probabilistic(node: Variable, parents: Vec<Variable>, rows: Vec<Vec<S>>) -> Result<Self> {
        let parents = Scope::new(parents)?;
        if parents.contains(node.name()) {
            return Err(Error::invalid(format!("node `{}` lists itself as a parent", node.name())));
        }
        let expected = parents.frame_size()?;
        if rows.len() != expected {
            return Err(Error::invalid(format!(
                "node `{}`: {} parent configurations covered, {expected} expected",
                node.name(),
                rows.len()
            )));
        }
        for (u, row) in rows.iter().enumerate() {
            let at = || format!("node `{}`, row {}", node.name(), describe_parent_row(&parents, u));
            if row.len() != node.size() {
                return Err(Error::invalid(format!("{}: {} entries, {} expected", at(), row.len(), node.size())));
            }
            if row.iter().any(|p| p.is_negative()) {
                return Err(Error::invalid(format!("{}: negative probability", at())));
            }
            let total = row.iter().fold(S::zero(), |a, p| a + p.clone());
            if !total.approx_eq(&S::one()) {
                return Err(Error::invalid(format!("{}: row sums to {}", at(), total.to_f64_lossy())));
            }
        }
        Ok(NodeValuation { node, parents, valuation: Valuation::Probabilistic(rows) })
    }

    pub fn ds(node: Variable, parents: Vec<Variable>, mass: MassFunction<S>) -> Result<Self> {
        let parents = Scope::new(parents)?;
        if parents.contains(node.name()) {
            return Err(Error::invalid(format!("node `{}` lists itself as a parent", node.name())));
        }
        let scope = parents.union(&Scope::new([node.clone()])?)?;
        if *mass.scope() != scope {
            return Err(Error::scope(format!(
                "valuation of `{}` is over {}, expected {scope}",
                node.name(),
                mass.scope()
            )));
        }
        mass.validate()?;
        Ok(NodeValuation { node, parents, valuation: Valuation::Ds(mass) })
    }

    pub fn node(&self) -> &Variable {
        &self.node
    }

    pub fn name(&self) -> &str {
        self.node.name()
    }

    pub fn parents(&self) -> &Scope {
        &self.parents
    }

    pub fn valuation(&self) -> &Valuation<S> {
        &self.valuation
    }

    pub fn is_probabilistic(&self) -> bool {
        matches!(self.valuation, Valuation::Probabilistic(_))
    }

    /// `{node} ∪ parents`.
    pub fn scope(&self) -> Scope {
        self.parents.union(&Scope::new([self.node.clone()]).unwrap()).unwrap()
    }

    /// `P(node = value | parents = row)` for probabilistic valuations.
    pub fn probability(&self, row: usize, value: usize) -> Option<&S> {
        match &self.valuation {
            Valuation::Probabilistic(rows) => rows.get(row)?.get(value),
            Valuation::Ds(_) => None,
        }
    }

    /// Valuation as a mass function over [`NodeValuation::scope`].
    ///
    /// A table becomes singleton focals; each entry is divided by the number
    /// of parent configurations so the masses sum to 1 (combination is
    /// insensitive to that constant factor).
    pub fn to_mass(&self) -> Result<MassFunction<S>> {
        match &self.valuation {
            Valuation::Ds(m) => Ok(m.clone()),
            Valuation::Probabilistic(rows) => {
                let weight = S::one() / S::from_count(rows.len());
                self.table_mass(|p| p.clone() * weight.clone())
            }
        }
    }

    /// Like [`NodeValuation::to_mass`] but tables keep their raw entries
    /// (the masses then sum to the number of parent configurations). Used by
    /// max-product propagation where scores are not renormalized.
    pub fn to_unweighted_mass(&self) -> Result<MassFunction<S>> {
        match &self.valuation {
            Valuation::Ds(m) => Ok(m.clone()),
            Valuation::Probabilistic(_) => self.table_mass(S::clone),
        }
    }

    fn table_mass(&self, f: impl Fn(&S) -> S) -> Result<MassFunction<S>> {
        let Valuation::Probabilistic(rows) = &self.valuation else { unreachable!() };
        let scope = self.scope();
        let n = scope.frame_size()?;
        let node_pos = scope.position(self.node.name()).unwrap();
        let parent_map = scope.projection_map(&self.parents)?;
        let entries = (0..n).filter_map(|i| {
            let p = &rows[parent_map[i]][scope.digit(i, node_pos)];
            (!p.is_zero()).then(|| (FrameSet::singleton(n, i), f(p)))
        });
        MassFunction::unnormalized(&scope, entries)
    }

    /// The same knowledge as a ds valuation (singleton focals).
    pub fn lower(&self) -> Result<Self> {
        Ok(NodeValuation {
            node: self.node.clone(),
            parents: self.parents.clone(),
            valuation: Valuation::Ds(self.to_mass()?),
        })
    }

    /// Reads a Bayesian (singleton-focal) mass over `{node} ∪ parents` as a
    /// table, normalizing every parent row. Rows without mass become uniform
    /// and are reported in the returned warnings.
    pub fn raise(&self) -> Result<(Self, Vec<String>)> {
        let mass = match &self.valuation {
            Valuation::Probabilistic(_) => return Ok((self.clone(), vec![])),
            Valuation::Ds(m) => m,
        };
        if !mass.is_bayesian() || mass.is_pseudo() {
            return Err(Error::invalid(format!(
                "valuation of `{}` is not a conditional probability table",
                self.name()
            )));
        }
        let scope = mass.scope();
        let node_pos = scope.position(self.node.name()).unwrap();
        let parent_map = scope.projection_map(&self.parents)?;
        let mut rows = vec![vec![S::zero(); self.node.size()]; self.parents.frame_size()?];
        for (set, m) in mass.focals() {
            let i = set.iter().next().unwrap();
            rows[parent_map[i]][scope.digit(i, node_pos)] = m.clone();
        }
        let mut warnings = Vec::new();
        for (u, row) in rows.iter_mut().enumerate() {
            let total = row.iter().fold(S::zero(), |a, p| a + p.clone());
            if total.is_zero() {
                warnings.push(format!(
                    "node `{}`: no mass for parent configuration {}; using uniform distribution",
                    self.name(),
                    describe_parent_row(&self.parents, u)
                ));
                let share = S::one() / S::from_count(row.len());
                row.iter_mut().for_each(|p| *p = share.clone());
            } else {
                row.iter_mut().for_each(|p| *p = p.clone() / total.clone());
            }
        }
        let v = NodeValuation::probabilistic(self.node.clone(), self.parents.vars().to_vec(), rows)?;
        Ok((v, warnings))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> NodeValuation<T> {
        let valuation = match &self.valuation {
            Valuation::Probabilistic(rows) => {
                Valuation::Probabilistic(rows.iter().map(|r| r.iter().map(&f).collect()).collect())
            }
            Valuation::Ds(m) => Valuation::Ds(m.map_scalar(&f)),
        };
        NodeValuation { node: self.node.clone(), parents: self.parents.clone(), valuation }
    }
}

pub(crate) fn describe_parent_row(parents: &Scope, row: usize) -> String {
    if parents.is_empty() {
        return "(no parents)".into();
    }
    let parts: Vec<String> = parents
        .decode(row)
        .into_iter()
        .zip(parents.vars())
        .map(|(i, v)| format!("{}='{}'", v.name(), v.domain()[i]))
        .collect();
    parts.join(" AND ")
}

/// A dag together with one valuation per node.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefNetwork<S = f64> {
    variables: Vec<Variable>,
    dag: Dag,
    valuations: Vec<NodeValuation<S>>,
}

impl<S: Scalar> BeliefNetwork<S> {
    pub fn build(variables: Vec<Variable>, dag: Dag, valuations: Vec<NodeValuation<S>>) -> Result<Self> {
        let mut variables = variables;
        variables.sort_by(|a, b| a.name().cmp(b.name()));
        if let Some(w) = variables.windows(2).find(|w| w[0].name() == w[1].name()) {
            return Err(Error::invalid(format!("duplicate variable `{}`", w[0].name())));
        }
        let names: Vec<&str> = variables.iter().map(Variable::name).collect();
        if names != dag.nodes().iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::invalid("dag nodes and network variables differ"));
        }
        let mut valuations = valuations;
        valuations.sort_by(|a, b| a.name().cmp(b.name()));
        for w in valuations.windows(2) {
            if w[0].name() == w[1].name() {
                return Err(Error::invalid(format!("node `{}` has two valuations", w[0].name())));
            }
        }
        for var in &variables {
            let Ok(i) = valuations.binary_search_by(|v| v.name().cmp(var.name())) else {
                return Err(Error::invalid(format!("node `{}` has no valuation", var.name())));
            };
            let val = &valuations[i];
            if val.node() != var {
                return Err(Error::invalid(format!("valuation of `{}` uses a different domain", var.name())));
            }
            let vp: Vec<&str> = val.parents().names().collect();
            let dp: Vec<&str> = dag.parents(var.name()).iter().map(String::as_str).collect();
            if vp != dp {
                return Err(Error::invalid(format!(
                    "valuation of `{}` has parents [{}] but the dag has [{}]",
                    var.name(),
                    vp.join(", "),
                    dp.join(", ")
                )));
            }
            for p in val.parents().vars() {
                if variables.iter().find(|v| v.name() == p.name()) != Some(p) {
                    return Err(Error::invalid(format!(
                        "parent `{}` of `{}` uses a different domain",
                        p.name(),
                        var.name()
                    )));
                }
            }
        }
        if valuations.len() != variables.len() {
            let extra = valuations.iter().find(|v| !names.contains(&v.name())).unwrap();
            return Err(Error::unknown_variable(extra.name()));
        }
        Ok(BeliefNetwork { variables, dag, valuations })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables.iter().find(|v| v.name() == name).ok_or_else(|| Error::unknown_variable(name))
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn valuations(&self) -> &[NodeValuation<S>] {
        &self.valuations
    }

    pub fn valuation(&self, node: &str) -> Result<&NodeValuation<S>> {
        self.valuations.iter().find(|v| v.name() == node).ok_or_else(|| Error::unknown_variable(node))
    }

    pub fn mode(&self) -> NetworkMode {
        if self.valuations.iter().all(NodeValuation::is_probabilistic) {
            NetworkMode::Probabilistic
        } else {
            NetworkMode::Ds
        }
    }

    /// Scope of all variables.
    pub fn scope(&self) -> Scope {
        Scope::new(self.variables.iter().cloned()).unwrap()
    }

    /// Returns a new network with `valuation` added as a fresh node.
    pub fn with_node(&self, valuation: NodeValuation<S>) -> Result<Self> {
        let name = valuation.name().to_string();
        if self.dag.contains(&name) {
            return Err(Error::invalid(format!("node `{name}` already exists")));
        }
        let mut variables = self.variables.clone();
        variables.push(valuation.node().clone());
        let nodes = variables.iter().map(|v| v.name().to_string());
        let mut edges = self.dag.edges().to_vec();
        edges.extend(valuation.parents().names().map(|p| (p.to_string(), name.clone())));
        let dag = Dag::new(nodes, edges)?;
        let mut valuations = self.valuations.clone();
        valuations.push(valuation);
        Self::build(variables, dag, valuations)
    }

    /// The underlying distribution: the product of all tables for
    /// probabilistic networks, the combination of all valuations otherwise.
    pub fn joint_distribution(&self) -> Result<MassFunction<S>> {
        match self.mode() {
            NetworkMode::Probabilistic => self.joint_product(),
            NetworkMode::Ds => self.joint_by_combination(),
        }
    }

    /// `⊕` of every node valuation after minimal extension to all variables.
    pub fn joint_by_combination(&self) -> Result<MassFunction<S>> {
        let scope = self.scope();
        let mut acc = MassFunction::vacuous(&scope)?;
        for v in &self.valuations {
            acc = acc.combine(&v.to_mass()?.extend(&scope)?)?;
        }
        Ok(acc)
    }

    /// `∏ P(x_i | x_π(i))` evaluated configuration by configuration.
    pub fn joint_product(&self) -> Result<MassFunction<S>> {
        if self.mode() != NetworkMode::Probabilistic {
            return Err(Error::invalid("product form needs a probabilistic network"));
        }
        let scope = self.scope();
        let n = scope.frame_size()?;
        let maps: Vec<(usize, Vec<usize>)> = self
            .valuations
            .iter()
            .map(|v| Ok((scope.position(v.name()).unwrap(), scope.projection_map(v.parents())?)))
            .collect::<Result<_>>()?;
        let mut entries = Vec::new();
        for i in 0..n {
            let mut p = S::one();
            for (v, (pos, map)) in self.valuations.iter().zip(&maps) {
                p = p * v.probability(map[i], scope.digit(i, *pos)).unwrap().clone();
                if p.is_zero() {
                    break;
                }
            }
            if !p.is_zero() {
                entries.push((FrameSet::singleton(n, i), p));
            }
        }
        MassFunction::unnormalized(&scope, entries)?.normalize()
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> BeliefNetwork<T> {
        BeliefNetwork {
            variables: self.variables.clone(),
            dag: self.dag.clone(),
            valuations: self.valuations.iter().map(|v| v.map_scalar(&f)).collect(),
        }
    }
}

/// Observed findings: each variable restricted to a non-empty set of values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvidenceSet {
    assignments: BTreeMap<String, BTreeSet<String>>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `var = value`.
    pub fn with(mut self, var: &str, value: &str) -> Self {
        self.assignments.insert(var.to_string(), [value.to_string()].into());
        self
    }

    /// `var ∈ values`.
    pub fn with_values<V: Into<String>>(mut self, var: &str, values: impl IntoIterator<Item = V>) -> Self {
        self.assignments.insert(var.to_string(), values.into_iter().map(Into::into).collect());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.assignments.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, var: &str) -> bool {
        self.assignments.contains_key(var)
    }

    pub fn allowed(&self, var: &str, value: &str) -> bool {
        self.assignments.get(var).is_none_or(|vs| vs.contains(value))
    }

    /// Union of both sets of findings; `other` wins on shared variables.
    pub fn merged(&self, other: &EvidenceSet) -> EvidenceSet {
        let mut out = self.clone();
        for (k, v) in &other.assignments {
            out.assignments.insert(k.clone(), v.clone());
        }
        out
    }

    /// One categorical mass per finding, over that single variable.
    pub fn to_masses<S: Scalar>(&self, variables: &[Variable]) -> Result<Vec<MassFunction<S>>> {
        self.assignments
            .iter()
            .map(|(name, values)| {
                let var = variables.iter().find(|v| v.name() == name).ok_or_else(|| Error::unknown_variable(name))?;
                if values.is_empty() {
                    return Err(Error::invalid(format!("empty evidence for `{name}`")));
                }
                let idx = values.iter().map(|v| var.value_index(v)).collect::<Result<Vec<_>>>()?;
                let scope = Scope::new([var.clone()])?;
                MassFunction::categorical(&scope, FrameSet::from_indices(var.size(), idx))
            })
            .collect()
    }
}

/// `BEL ⊖ (BEL↓h)↑`: the technical conditional stored at network nodes.
/// For probability distributions it is ordinary conditioning.
pub fn pseudo_condition<S: Scalar>(bel: &MassFunction<S>, h: &Scope) -> Result<MassFunction<S>> {
    let marginal = bel.marginalize(h)?.extend(bel.scope())?;
    bel.decombine(&marginal)
}

/// Node valuations estimated from a joint by projection and pseudo-conditioning.
#[derive(Clone, Debug)]
pub struct Factorization<S = f64> {
    pub valuations: Vec<NodeValuation<S>>,
    pub warnings: Vec<String>,
}

/// Splits a joint distribution into one valuation per dag node:
/// `joint↓({X_i} ∪ π(i)) | π(i)`. Bayesian joints yield probability tables.
///
/// The valuations are recombined and compared against the joint; a mismatch
/// (the dag is not an I-map of the joint) is reported as a warning.
pub fn factorize_joint<S: Scalar>(joint: &MassFunction<S>, dag: &Dag) -> Result<Factorization<S>> {
    let scope = joint.scope();
    let names: Vec<&str> = scope.names().collect();
    if names != dag.nodes().iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::scope("joint scope and dag nodes differ"));
    }
    let bayesian = joint.is_bayesian() && !joint.is_pseudo();
    let mut valuations = Vec::new();
    let mut warnings = Vec::new();
    for node in dag.nodes() {
        let var = scope.variable(node).unwrap().clone();
        let parents: Vec<Variable> = dag.parents(node).iter().map(|p| scope.variable(p).unwrap().clone()).collect();
        let family = Scope::new(parents.iter().cloned().chain([var.clone()]))?;
        let parent_scope = Scope::new(parents.iter().cloned())?;
        let local = pseudo_condition(&joint.marginalize(&family)?, &parent_scope)?;
        let v = NodeValuation::ds(var, parents, local)?;
        if bayesian {
            let (v, w) = v.raise()?;
            warnings.extend(w);
            valuations.push(v);
        } else {
            valuations.push(v);
        }
    }
    let net = BeliefNetwork::build(scope.vars().to_vec(), dag.clone(), valuations.clone())?;
    match net.joint_distribution() {
        Ok(back) if back.approx_eq(joint) => {}
        Ok(back) => warnings.push(format!(
            "dag is not an I-map of the joint: recombined valuations differ by up to {}",
            back.max_abs_diff(joint).map_or(f64::NAN, |d| d.to_f64_lossy())
        )),
        Err(e) => warnings.push(format!("recombination failed: {e}")),
    }
    Ok(Factorization { valuations, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(name: &str) -> Variable {
        Variable::new(name, ["t", "f"]).unwrap()
    }

    /// a -> b with P(a=t)=0.7, P(b=t|a=t)=0.9, P(b=t|a=f)=0.5
    fn ab_net() -> BeliefNetwork {
        let dag = Dag::new(["a", "b"], [("a", "b")]).unwrap();
        let va = NodeValuation::probabilistic(tf("a"), vec![], vec![vec![0.7, 0.3]]).unwrap();
        let vb = NodeValuation::probabilistic(tf("b"), vec![tf("a")], vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        BeliefNetwork::build(vec![tf("a"), tf("b")], dag, vec![va, vb]).unwrap()
    }

    #[test]
    fn dag_validation() {
        assert!(Dag::new(["a", "b"], [("a", "b"), ("b", "a")]).is_err());
        assert!(Dag::new(["a"], [("a", "a")]).is_err());
        assert!(Dag::new(["a", "b"], [("a", "b"), ("a", "b")]).is_err());
        assert!(Dag::new(["a"], [("a", "c")]).is_err());
        let d = Dag::new(["c", "b", "a"], [("c", "a"), ("b", "a")]).unwrap();
        assert_eq!(d.topological_order(), ["b", "c", "a"]);
        assert_eq!(d.parents("a"), ["b", "c"]);
    }

    #[test]
    fn single_node_network() {
        let dag = Dag::new(["a"], Vec::<(&str, &str)>::new()).unwrap();
        let v = NodeValuation::probabilistic(tf("a"), vec![], vec![vec![0.7, 0.3]]).unwrap();
        let net = BeliefNetwork::build(vec![tf("a")], dag, vec![v.clone()]).unwrap();
        assert_eq!(net.joint_distribution().unwrap(), v.to_mass().unwrap());
    }

    #[test]
    fn build_rejects_inconsistencies() {
        let dag = Dag::new(["a", "b"], [("a", "b")]).unwrap();
        let va = NodeValuation::probabilistic(tf("a"), vec![], vec![vec![0.7, 0.3]]).unwrap();
        let vb_wrong = NodeValuation::probabilistic(tf("b"), vec![], vec![vec![0.5, 0.5]]).unwrap();
        assert!(BeliefNetwork::build(vec![tf("a"), tf("b")], dag.clone(), vec![va.clone(), vb_wrong]).is_err());
        assert!(BeliefNetwork::build(vec![tf("a"), tf("b")], dag, vec![va]).is_err());
        let bad_row = NodeValuation::probabilistic(tf("b"), vec![tf("a")], vec![vec![0.5, 0.3], vec![0.5, 0.5]]);
        let msg = bad_row.unwrap_err().to_string();
        assert!(msg.contains("node `b`") && msg.contains("a='t'"), "{msg}");
        assert!(NodeValuation::probabilistic(tf("b"), vec![tf("a")], vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn joint_of_two_node_chain() {
        let net = ab_net();
        let joint = net.joint_distribution().unwrap();
        // frame order (a,b): tt, tf, ft, ff
        let expect = [0.63, 0.07, 0.15, 0.15];
        for (i, e) in expect.iter().enumerate() {
            assert!((joint.point_mass(i) - e).abs() < 1e-12);
        }
        let combined = net.joint_by_combination().unwrap();
        assert!(combined.approx_eq(&joint));
    }

    #[test]
    fn lowering_is_reversible() {
        let net = ab_net();
        for v in net.valuations() {
            let (back, warnings) = v.lower().unwrap().raise().unwrap();
            assert!(warnings.is_empty());
            let (Valuation::Probabilistic(a), Valuation::Probabilistic(b)) = (v.valuation(), back.valuation()) else {
                panic!()
            };
            for (ra, rb) in a.iter().zip(b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pseudo_conditioning_of_probabilities_is_conditioning() {
        let net = ab_net();
        let joint = net.joint_distribution().unwrap();
        let a = Scope::new([tf("a")]).unwrap();
        let cond = pseudo_condition(&joint, &a).unwrap();
        // P(b|a) rows, each scaled by 1/2
        let expect = [0.9, 0.1, 0.5, 0.5];
        for (i, e) in expect.iter().enumerate() {
            assert!((cond.point_mass(i) * 2.0 - e).abs() < 1e-12);
        }
        // full scope: neutral element
        let full = pseudo_condition(&joint, joint.scope()).unwrap();
        assert!(full.combine(&joint).unwrap().approx_eq(&joint));
    }

    #[test]
    fn factorization_recovers_tables() {
        let net = ab_net();
        let joint = net.joint_distribution().unwrap();
        let f = factorize_joint(&joint, net.dag()).unwrap();
        assert!(f.warnings.is_empty(), "{:?}", f.warnings);
        for (got, want) in f.valuations.iter().zip(net.valuations()) {
            let (Valuation::Probabilistic(a), Valuation::Probabilistic(b)) = (got.valuation(), want.valuation()) else {
                panic!()
            };
            for (ra, rb) in a.iter().zip(b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
        // independence dag is not an I-map of a dependent joint
        let empty = Dag::new(["a", "b"], Vec::<(&str, &str)>::new()).unwrap();
        let f = factorize_joint(&joint, &empty).unwrap();
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn modus_ponens_network() {
        let p = tf("p");
        let q = tf("q");
        let pq = Scope::new([p.clone(), q.clone()]).unwrap();
        // p -> q: {(t,t),(f,t),(f,f)} in frame order tt=0 tf=1 ft=2 ff=3
        let imp = MassFunction::categorical(&pq, FrameSet::from_indices(4, [0, 2, 3])).unwrap();
        let fact = MassFunction::categorical(&Scope::new([p.clone()]).unwrap(), FrameSet::singleton(2, 0)).unwrap();
        let dag = Dag::new(["p", "q"], [("p", "q")]).unwrap();
        let net = BeliefNetwork::build(
            vec![p.clone(), q.clone()],
            dag,
            vec![NodeValuation::ds(p, vec![], fact).unwrap(), NodeValuation::ds(q, vec![tf("p")], imp).unwrap()],
        )
        .unwrap();
        let joint = net.joint_distribution().unwrap();
        assert_eq!(joint.focals(), &[(FrameSet::singleton(4, 0), 1.0)]);
    }

    #[test]
    fn d_separation_fixtures() {
        let chain = Dag::new(["A", "B", "C"], [("A", "B"), ("B", "C")]).unwrap();
        assert!(d_separated(&chain, &["A"], &["C"], &["B"]).unwrap());
        assert!(!d_separated(&chain, &["A"], &["C"], &[]).unwrap());

        let collider = Dag::new(["A", "B", "C"], [("A", "B"), ("C", "B")]).unwrap();
        assert!(d_separated(&collider, &["A"], &["C"], &[]).unwrap());
        assert!(!d_separated(&collider, &["A"], &["C"], &["B"]).unwrap());

        let desc = Dag::new(["A", "B", "C", "D"], [("A", "B"), ("C", "B"), ("B", "D")]).unwrap();
        assert!(!d_separated(&desc, &["A"], &["C"], &["D"]).unwrap());

        assert!(d_separated(&chain, &["A"], &["A"], &[]).is_err());
        assert!(d_separated(&chain, &["A"], &["Z"], &[]).is_err());
    }

    #[test]
    fn evidence_masses() {
        let ev = EvidenceSet::new().with("a", "t").with_values("b", ["t", "f"]);
        let ms: Vec<MassFunction> = ev.to_masses(&[tf("a"), tf("b")]).unwrap();
        assert_eq!(ms[0].focals()[0].0, FrameSet::singleton(2, 0));
        assert!(ms[1].is_vacuous());
        assert!(EvidenceSet::new().with("a", "x").to_masses::<f64>(&[tf("a")]).is_err());
        assert!(EvidenceSet::new().with("z", "t").to_masses::<f64>(&[tf("a")]).is_err());
    }
}
