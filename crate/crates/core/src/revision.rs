//! Belief revision: the most plausible joint configuration given evidence.
//!
//! Max-product propagation over the join tree scores every configuration
//! by the product of the node valuations; witnesses recorded in the
//! messages let the winning configuration be read back node by node.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope};
use crate::jointree::{build_join_tree, network_hyperedges, query_marginal, CombinationMode, JoinTree};
use crate::mass::MassFunction;
use crate::network::{BeliefNetwork, EvidenceSet, NetworkMode};
use crate::scalar::Scalar;

/// `m(A) = max { m1(B)·m2(C) : B ∩ C = A }`, without normalization.
pub fn combine_max<S: Scalar>(m1: &MassFunction<S>, m2: &MassFunction<S>) -> Result<MassFunction<S>> {
    let focals = m1.fold_intersections(m2, |acc, p| {
        if p > *acc {
            *acc = p
        }
    })?;
    let focals = focals.into_iter().filter(|(_, m)| !m.is_zero()).collect();
    Ok(MassFunction::from_parts(m1.scope(), m1.frame_len(), focals))
}

/// Result of a max-marginalization: `witnesses[k]` holds the source focal
/// sets (in [`lex_cmp`] order) attaining the score of `mass.focals()[k]`.
#[derive(Clone, Debug)]
pub struct MaxProjection<S = f64> {
    pub mass: MassFunction<S>,
    pub witnesses: Vec<Vec<FrameSet>>,
}

/// Whether two scores are equal up to the relative prune threshold.
pub fn scores_tie<S: Scalar>(a: &S, b: &S) -> bool {
    let scale = a.abs().max_of(b.abs());
    (a.clone() - b.clone()).abs() <= S::prune_threshold() * scale
}

/// `m↓max(B) = max { m(A) : A↓ = B }` with the maximizing sets kept as witnesses.
pub fn marginalize_max<S: Scalar>(m: &MassFunction<S>, target: &Scope) -> Result<MaxProjection<S>> {
    if !m.scope().contains_scope(target) {
        return Err(Error::scope(format!("{target} is not contained in {}", m.scope())));
    }
    let map = m.scope().projection_map(target)?;
    let n = target.frame_size()?;
    let mut best: HashMap<FrameSet, (S, Vec<FrameSet>)> = HashMap::new();
    for (set, v) in m.focals() {
        let image = set.map_through(&map, n);
        match best.get_mut(&image) {
            None => {
                best.insert(image, (v.clone(), vec![set.clone()]));
            }
            Some((b, ws)) => {
                if scores_tie(v, b) {
                    ws.push(set.clone());
                    if *v > *b {
                        *b = v.clone();
                    }
                } else if *v > *b {
                    *b = v.clone();
                    *ws = vec![set.clone()];
                }
            }
        }
    }
    let mut entries: Vec<(FrameSet, (S, Vec<FrameSet>))> = best.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut focals = Vec::with_capacity(entries.len());
    let mut witnesses = Vec::with_capacity(entries.len());
    for (set, (v, mut ws)) in entries {
        ws.sort_by(lex_cmp);
        focals.push((set, v));
        witnesses.push(ws);
    }
    Ok(MaxProjection { mass: MassFunction::from_parts(target, n, focals), witnesses })
}

/// Orders sets by their sorted member lists; for singletons this is the
/// lexicographic order of configurations.
pub fn lex_cmp(a: &FrameSet, b: &FrameSet) -> Ordering {
    a.iter().cmp(b.iter())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RevisionMode {
    /// Most plausible explanation, reported with `var` at the tree root.
    Explanatory(String),
    /// As if `var = value` had been observed.
    Hypothesizing(String, String),
    /// Given the extra findings.
    Conditioning(EvidenceSet),
}

/// A most plausible configuration of the variables not fixed by the
/// findings. Values are sets so that belief-function
/// networks can report set-valued explanations; for probabilistic networks
/// every entry is a single value.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation<S = f64> {
    pub assignment: BTreeMap<String, Vec<String>>,
    pub score: S,
    /// Set when another configuration reaches the same score.
    pub tied: bool,
}

impl<S: Scalar> Explanation<S> {
    /// Single value of `var`, if the explanation is point-valued there.
    pub fn value(&self, var: &str) -> Option<&str> {
        match self.assignment.get(var)?.as_slice() {
            [v] => Some(v),
            _ => None,
        }
    }
}

impl<S: Scalar> fmt::Display for Explanation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (var, vals) in &self.assignment {
            if vals.len() == 1 {
                write!(f, "{var}={} ", vals[0])?;
            } else {
                write!(f, "{var}={{{}}} ", vals.join(","))?;
            }
        }
        write!(f, "beta={}", crate::scalar::format_sig(self.score.to_f64_lossy(), 12))
    }
}

fn effective_evidence(evidence: &EvidenceSet, mode: &RevisionMode) -> EvidenceSet {
    match mode {
        RevisionMode::Explanatory(_) => evidence.clone(),
        RevisionMode::Hypothesizing(var, value) => evidence.clone().with(var, value),
        RevisionMode::Conditioning(extra) => evidence.merged(extra),
    }
}

fn max_tree<S: Scalar>(net: &BeliefNetwork<S>, evidence: &EvidenceSet, root: &Scope) -> Result<JoinTree<S>> {
    let mut tree = build_join_tree(network_hyperedges(net, evidence)?, root)?;
    tree.propagate(CombinationMode::MaxProduct)?;
    Ok(tree)
}

fn best_focal<S: Scalar>(candidates: impl Iterator<Item = (usize, S, FrameSet)>) -> Option<(usize, S, bool)> {
    let mut best: Option<(usize, S, FrameSet, bool)> = None;
    for (k, v, set) in candidates {
        best = match best {
            None => Some((k, v, set, false)),
            Some((bk, bv, bs, tied)) => {
                if scores_tie(&v, &bv) {
                    if lex_cmp(&set, &bs) == Ordering::Less {
                        Some((k, bv.max_of(v), set, true))
                    } else {
                        Some((bk, bv.max_of(v), bs, true))
                    }
                } else if v > bv {
                    Some((k, v, set, false))
                } else {
                    Some((bk, bv, bs, tied))
                }
            }
        };
    }
    best.map(|(k, v, _, t)| (k, v, t))
}

/// Decodes the best configuration from a propagated max-product tree.
fn decode<S: Scalar>(tree: &mut JoinTree<S>) -> Result<(BTreeMap<usize, FrameSet>, S, bool)> {
    let root = tree.root();
    let root_fused = tree.node_marginal(root)?;
    let (k, score, mut tied) =
        best_focal(root_fused.focals().iter().enumerate().map(|(k, (s, v))| (k, v.clone(), s.clone())))
            .ok_or_else(|| Error::conflict("no configuration is compatible with the evidence"))?;
    let mut chosen = BTreeMap::new();
    chosen.insert(root, root_fused.focals()[k].0.clone());
    let mut stack = vec![root];
    while let Some(p) = stack.pop() {
        let set_p = chosen[&p].clone();
        let children: Vec<usize> = tree.children(p).collect();
        for c in children {
            let sep = tree.separator(c, p);
            let map = tree.scope(p).projection_map(&sep)?;
            let image = set_p.map_through(&map, sep.frame_size()?);
            let msg = tree.message(c, p).ok_or_else(|| Error::invalid("max-product tree not propagated"))?;
            let (j, _, t) = best_focal(
                msg.mass
                    .focals()
                    .iter()
                    .enumerate()
                    .filter(|(_, (s, _))| image.is_subset(s))
                    .map(|(j, (s, v))| (j, v.clone(), s.clone())),
            )
            .ok_or_else(|| Error::invalid("max-product witnesses are inconsistent"))?;
            tied |= t || msg.witnesses[j].len() > 1;
            chosen.insert(c, msg.witnesses[j][0].clone());
            stack.push(c);
        }
    }
    Ok((chosen, score, tied))
}

fn assignment_from<S: Scalar>(
    tree: &JoinTree<S>,
    chosen: &BTreeMap<usize, FrameSet>,
) -> Result<BTreeMap<String, Vec<String>>> {
    // root-first breadth order decides which node reports each variable
    let mut order = vec![tree.root()];
    let mut i = 0;
    while i < order.len() {
        order.extend(tree.children(order[i]));
        i += 1;
    }
    let mut out = BTreeMap::new();
    for node in order {
        let scope = tree.scope(node);
        for (pos, var) in scope.vars().iter().enumerate() {
            if out.contains_key(var.name()) {
                continue;
            }
            let mut idx: Vec<usize> = chosen[&node].iter().map(|c| scope.digit(c, pos)).collect();
            idx.sort_unstable();
            idx.dedup();
            out.insert(var.name().to_string(), idx.into_iter().map(|i| var.domain()[i].clone()).collect());
        }
    }
    Ok(out)
}

/// Most plausible configuration under `mode`.
///
/// The score is the max-product value `max_x ∏ valuations(x)` with the
/// findings clamped (for probabilistic networks the joint `P(x*, e)`).
/// Among equally scored configurations the lexicographically smallest (by
/// variable name, then domain order) is returned.
pub fn revise<S: Scalar>(
    net: &BeliefNetwork<S>,
    evidence: &EvidenceSet,
    mode: &RevisionMode,
) -> Result<Explanation<S>> {
    let ev = effective_evidence(evidence, mode);
    let root = match mode {
        RevisionMode::Explanatory(var) => Scope::new([net.variable(var)?.clone()])?,
        _ => Scope::empty(),
    };
    let mut tree = max_tree(net, &ev, &root)?;
    let (chosen, score, tied) = decode(&mut tree)?;
    let mut assignment = assignment_from(&tree, &chosen)?;
    if tied && net.mode() == NetworkMode::Probabilistic {
        assignment = lexmin_by_clamping(net, &ev, &score)?;
    }
    // clamped variables are findings, not part of the explanation
    assignment.retain(|var, _| ev.iter().all(|(e, values)| e != var || values.len() > 1));
    Ok(Explanation { assignment, score, tied })
}

fn best_score<S: Scalar>(net: &BeliefNetwork<S>, evidence: &EvidenceSet) -> Result<Option<S>> {
    let mut tree = match max_tree(net, evidence, &Scope::empty()) {
        Ok(t) => t,
        Err(Error::TotalConflict(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let root = tree.node_marginal(tree.root())?;
    Ok(root.focals().iter().map(|(_, v)| v.clone()).reduce(S::max_of))
}

/// Fixes variables one at a time in canonical order, keeping the smallest
/// value that still reaches `score`.
fn lexmin_by_clamping<S: Scalar>(
    net: &BeliefNetwork<S>,
    evidence: &EvidenceSet,
    score: &S,
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut ev = evidence.clone();
    let mut out = BTreeMap::new();
    for var in net.variables() {
        let mut fixed = None;
        for value in var.domain() {
            if !evidence.allowed(var.name(), value) {
                continue;
            }
            let trial = ev.clone().with(var.name(), value);
            if let Some(s) = best_score(net, &trial)? {
                if scores_tie(&s, score) || s > *score {
                    fixed = Some((value.clone(), trial));
                    break;
                }
            }
        }
        let (value, trial) = fixed.ok_or_else(|| Error::invalid("tie resolution lost the optimum"))?;
        out.insert(var.name().to_string(), vec![value]);
        ev = trial;
    }
    Ok(out)
}

/// Every point configuration reaching the optimal score, in lexicographic
/// order. Probabilistic networks only.
pub fn optimal_explanations<S: Scalar>(
    net: &BeliefNetwork<S>,
    evidence: &EvidenceSet,
) -> Result<Vec<BTreeMap<String, String>>> {
    if net.mode() != NetworkMode::Probabilistic {
        return Err(Error::invalid("tie enumeration needs a probabilistic network"));
    }
    let Some(score) = best_score(net, evidence)? else {
        return Err(Error::conflict("no configuration is compatible with the evidence"));
    };
    let mut out = Vec::new();
    let mut stack = vec![(0usize, evidence.clone(), BTreeMap::new())];
    while let Some((depth, ev, partial)) = stack.pop() {
        if depth == net.variables().len() {
            out.push(partial);
            continue;
        }
        let var = &net.variables()[depth];
        let mut branches = Vec::new();
        for value in var.domain() {
            if !evidence.allowed(var.name(), value) {
                continue;
            }
            let trial = ev.clone().with(var.name(), value);
            if let Some(s) = best_score(net, &trial)? {
                if scores_tie(&s, &score) {
                    let mut p = partial.clone();
                    p.insert(var.name().to_string(), value.clone());
                    branches.push((depth + 1, trial, p));
                }
            }
        }
        stack.extend(branches.into_iter().rev());
    }
    Ok(out)
}

/// `P(e)` by the chain rule over single-variable posteriors.
pub fn evidence_probability<S: Scalar>(net: &BeliefNetwork<S>, evidence: &EvidenceSet) -> Result<S> {
    if net.mode() != NetworkMode::Probabilistic {
        return Err(Error::invalid("evidence probability needs a probabilistic network"));
    }
    let mut p = S::one();
    let mut given = EvidenceSet::new();
    for (var, values) in evidence.iter() {
        let v = net.variable(var)?;
        let m = query_marginal(net, var, &given)?;
        let mut share = S::zero();
        for value in values {
            share = share + m.point_mass(v.value_index(value)?);
        }
        p = p * share;
        if p.is_zero() {
            return Ok(p);
        }
        given = given.with_values(var, values.iter().cloned());
    }
    Ok(p)
}
