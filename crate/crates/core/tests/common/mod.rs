// Shared generators and brute-force oracles for the integration tests.
// Everything here avoids the join tree: joints are built by enumerating
// configurations, d-separation by listing simple trails.
#![allow(dead_code)]

use std::collections::BTreeMap;

use evidential_core::{
    BeliefNetwork, Dag, EvidenceSet, Expr, FrameSet, MassFunction, Network, NodeValuation, Scope, Variable,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn binary(name: &str) -> Variable {
    Variable::new(name, ["t", "f"]).unwrap()
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Random dag over `v0..v{n-1}`: a shuffled order, each forward pair linked
/// with probability `p`, at most `max_parents` parents per node.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64, max_parents: usize) -> Dag {
    let nodes = names(n);
    let mut order = nodes.clone();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for j in 0..n {
        let mut count = 0;
        for i in 0..j {
            if count < max_parents && rng.gen_bool(p) {
                edges.push((order[i].clone(), order[j].clone()));
                count += 1;
            }
        }
    }
    Dag::new(nodes, edges).unwrap()
}

fn random_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Probabilistic network over binary variables with random positive tables.
pub fn random_prob_network(rng: &mut ChaCha8Rng, n: usize) -> Network {
    let dag = random_dag(rng, n, 0.45, 3);
    let vars: Vec<Variable> = dag.nodes().iter().map(|n| binary(n)).collect();
    let vals = vars
        .iter()
        .map(|v| {
            let parents: Vec<Variable> = dag.parents(v.name()).iter().map(|p| binary(p)).collect();
            let rows = (0..1usize << parents.len()).map(|_| random_row(rng, 2)).collect();
            NodeValuation::probabilistic(v.clone(), parents, rows).unwrap()
        })
        .collect();
    BeliefNetwork::build(vars, dag, vals).unwrap()
}

/// Random mass over `scope` with up to `max_focals` focal sets; the full
/// frame always carries some mass so combinations never fully conflict.
pub fn random_mass(rng: &mut ChaCha8Rng, scope: &Scope, max_focals: usize) -> MassFunction<f64> {
    let n = scope.frame_size().unwrap();
    let mut entries = vec![(FrameSet::full(n), rng.gen_range(0.05..1.0))];
    for _ in 1..rng.gen_range(1..=max_focals.max(1)) {
        let set = random_nonempty_set(rng, n);
        entries.push((set, rng.gen_range(0.05..1.0)));
    }
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let mut merged: BTreeMap<FrameSet, f64> = BTreeMap::new();
    for (s, v) in entries {
        *merged.entry(s).or_default() += v / total;
    }
    MassFunction::from_focals(scope, merged).unwrap()
}

/// Like [`random_mass`] but without the guaranteed full-frame focal.
pub fn random_mass_any(rng: &mut ChaCha8Rng, scope: &Scope, max_focals: usize) -> MassFunction<f64> {
    let n = scope.frame_size().unwrap();
    let mut merged: BTreeMap<FrameSet, f64> = BTreeMap::new();
    for _ in 0..rng.gen_range(1..=max_focals.max(1)) {
        *merged.entry(random_nonempty_set(rng, n)).or_default() += rng.gen_range(0.05..1.0);
    }
    let total: f64 = merged.values().sum();
    MassFunction::from_focals(scope, merged.into_iter().map(|(s, v)| (s, v / total))).unwrap()
}

/// Random Bayesian (singleton-focal) mass.
pub fn random_bayesian(rng: &mut ChaCha8Rng, scope: &Scope) -> MassFunction<f64> {
    let n = scope.frame_size().unwrap();
    let row = random_row(rng, n);
    MassFunction::from_focals(scope, row.into_iter().enumerate().map(|(i, p)| (FrameSet::singleton(n, i), p))).unwrap()
}

pub fn random_nonempty_set(rng: &mut ChaCha8Rng, n: usize) -> FrameSet {
    loop {
        let s = FrameSet::from_indices(n, (0..n).filter(|_| rng.gen_bool(0.5)));
        if !s.is_empty() {
            return s;
        }
    }
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize) -> FrameSet {
    FrameSet::from_indices(n, (0..n).filter(|_| rng.gen_bool(0.5)))
}

/// Scope of `k` binary variables `x0..`.
pub fn binary_scope(prefix: &str, k: usize) -> Scope {
    Scope::new((0..k).map(|i| binary(&format!("{prefix}{i}")))).unwrap()
}

/// DS network over binary variables, each node valuation a random mass over
/// its family.
pub fn random_ds_network(rng: &mut ChaCha8Rng, n: usize, max_focals: usize) -> Network {
    let dag = random_dag(rng, n, 0.45, 2);
    let vars: Vec<Variable> = dag.nodes().iter().map(|n| binary(n)).collect();
    let vals = vars
        .iter()
        .map(|v| {
            let parents: Vec<Variable> = dag.parents(v.name()).iter().map(|p| binary(p)).collect();
            let scope = Scope::new(parents.iter().cloned().chain([v.clone()])).unwrap();
            NodeValuation::ds(v.clone(), parents, random_mass(rng, &scope, max_focals)).unwrap()
        })
        .collect();
    BeliefNetwork::build(vars, dag, vals).unwrap()
}

/// Random evidence on up to `max` variables, single values.
pub fn random_evidence(rng: &mut ChaCha8Rng, net: &Network, max: usize) -> EvidenceSet {
    let mut ev = EvidenceSet::new();
    let mut vars: Vec<&Variable> = net.variables().iter().collect();
    vars.shuffle(rng);
    for v in vars.into_iter().take(rng.gen_range(0..=max)) {
        let value = v.domain().choose(rng).unwrap();
        ev = ev.with(v.name(), value);
    }
    ev
}

/// Random expression over the network variables with at most `atoms` atoms.
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[Variable], atoms: usize) -> Expr {
    if atoms <= 1 {
        let v = vars.choose(rng).unwrap();
        let leaf = Expr::atom(v.name(), v.domain().choose(rng).unwrap());
        return if rng.gen_bool(0.25) { Expr::Not(Box::new(leaf)) } else { leaf };
    }
    let left = rng.gen_range(1..atoms);
    let a = random_expr(rng, vars, left);
    let b = random_expr(rng, vars, atoms - left);
    let e = if rng.gen_bool(0.5) { Expr::And(vec![a, b]) } else { Expr::Or(vec![a, b]) };
    if rng.gen_bool(0.15) {
        Expr::Not(Box::new(e))
    } else {
        e
    }
}

// ---- enumeration oracles for probabilistic networks ----

/// Every configuration of the network variables (value indices in variable
/// order) with its joint probability, computed as a product of table entries.
pub fn enumerate_joint(net: &Network) -> Vec<(Vec<usize>, f64)> {
    let vars = net.variables();
    let pos: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.name(), i)).collect();
    let total: usize = vars.iter().map(Variable::size).product();
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut cfg = vec![0; vars.len()];
        for i in (0..vars.len()).rev() {
            cfg[i] = idx % vars[i].size();
            idx /= vars[i].size();
        }
        let mut p = 1.0;
        for val in net.valuations() {
            // parents in name order, first parent most significant
            let mut row = 0;
            for parent in val.parents().vars() {
                row = row * parent.size() + cfg[pos[parent.name()]];
            }
            p *= val.probability(row, cfg[pos[val.name()]]).unwrap();
        }
        out.push((cfg, p));
    }
    out
}

pub fn label<'a>(net: &'a Network, cfg: &[usize], var: &str) -> Option<&'a str> {
    let i = net.variables().iter().position(|v| v.name() == var)?;
    Some(net.variables()[i].domain()[cfg[i]].as_str())
}

pub fn consistent(net: &Network, cfg: &[usize], ev: &EvidenceSet) -> bool {
    ev.iter().all(|(var, values)| values.contains(label(net, cfg, var).unwrap()))
}

/// `P(var = value | ev)` for every value of `var`.
pub fn brute_marginal(net: &Network, var: &str, ev: &EvidenceSet) -> Vec<f64> {
    let v = net.variable(var).unwrap();
    let i = net.variables().iter().position(|x| x.name() == var).unwrap();
    let mut acc = vec![0.0; v.size()];
    for (cfg, p) in enumerate_joint(net) {
        if consistent(net, &cfg, ev) {
            acc[cfg[i]] += p;
        }
    }
    let z: f64 = acc.iter().sum();
    acc.iter().map(|x| x / z).collect()
}

pub fn brute_event(net: &Network, expr: &Expr, given: Option<&Expr>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (cfg, p) in enumerate_joint(net) {
        let look = |name: &str| label(net, &cfg, name);
        if given.is_none_or(|g| g.eval(&look).unwrap()) {
            den += p;
            if expr.eval(&look).unwrap() {
                num += p;
            }
        }
    }
    num / den
}

/// Best joint score consistent with `ev` and the lexicographically smallest
/// configuration reaching it within a relative 1e-12.
pub fn brute_mpe(net: &Network, ev: &EvidenceSet) -> (Vec<usize>, f64) {
    let scored: Vec<_> = enumerate_joint(net).into_iter().filter(|(c, _)| consistent(net, c, ev)).collect();
    let best = scored.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    // enumeration order is lexicographic already
    let first = scored.iter().find(|(_, p)| (best - p).abs() <= 1e-12 * best.abs()).unwrap();
    (first.0.clone(), best)
}

// ---- d-separation by trail enumeration ----

/// `j` and `k` are d-separated by `l` iff no simple trail between them is
/// active: every collider on it has itself or a descendant in `l`, every
/// other inner node is outside `l`.
pub fn dsep_oracle(dag: &Dag, j: &[&str], k: &[&str], l: &[&str]) -> bool {
    let descendants = |n: &str| {
        let mut seen = vec![n.to_string()];
        let mut stack = vec![n.to_string()];
        while let Some(x) = stack.pop() {
            for c in dag.children(&x) {
                if !seen.contains(c) {
                    seen.push(c.clone());
                    stack.push(c.clone());
                }
            }
        }
        seen
    };
    let neighbours = |n: &str| -> Vec<String> { dag.parents(n).iter().chain(dag.children(n)).cloned().collect() };
    let is_edge = |a: &str, b: &str| dag.parents(b).iter().any(|p| p == a);
    let active = |trail: &[String]| {
        trail.windows(3).all(|w| {
            let collider = is_edge(&w[0], &w[1]) && is_edge(&w[2], &w[1]);
            if collider {
                descendants(&w[1]).iter().any(|d| l.contains(&d.as_str()))
            } else {
                !l.contains(&w[1].as_str())
            }
        })
    };
    fn walk(
        trail: &mut Vec<String>,
        goal: &[&str],
        neighbours: &dyn Fn(&str) -> Vec<String>,
        active: &dyn Fn(&[String]) -> bool,
    ) -> bool {
        let last = trail.last().unwrap().clone();
        if trail.len() > 1 && goal.contains(&last.as_str()) {
            return active(trail);
        }
        for n in neighbours(&last) {
            if trail.contains(&n) {
                continue;
            }
            trail.push(n);
            // prune once a prefix is already blocked
            if (trail.len() < 3 || active(&trail[trail.len() - 3..])) && walk(trail, goal, neighbours, active) {
                return true;
            }
            trail.pop();
        }
        false
    }
    for a in j {
        let mut trail = vec![a.to_string()];
        if walk(&mut trail, k, &neighbours, &active) {
            return false;
        }
    }
    true
}

pub fn max_diff(a: &MassFunction<f64>, b: &MassFunction<f64>) -> f64 {
    a.max_abs_diff(b).unwrap_or(f64::INFINITY)
}
