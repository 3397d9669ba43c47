//! Rule-oriented view of a network.
//!
//! Node valuations are shown as beams of `IF ... THEN ... WITH w` rules and
//! can be read back from that form. Logical queries are answered by
//! amending a copy of the network with deterministic gate nodes and
//! propagating.
//!
//! Beam text:
//!
//! ```text
//! NODE y GIVEN x, z KIND PROBABILISTIC
//! IF x='x1' AND z='z1' THEN y='y1' WITH 0.2
//! ...
//! NODE y GIVEN x, z KIND DS
//! IF x='x1' AND z='z1' THEN y='y2'
//! AND IF x='x1' AND z='z3' THEN y='y2' WITH 0.35
//! ```
//!
//! A probabilistic beam lists every table entry. A ds beam has one group per
//! focal set, one conditional per configuration, weighted by the
//! commonality of the focal set. Parentless nodes use `IF TRUE THEN ...`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope, Variable};
use crate::jointree::query_marginal;
use crate::mass::MassFunction;
use crate::network::{BeliefNetwork, EvidenceSet, NetworkMode, NodeValuation, Valuation};
use crate::query::{parse_expr, Atom, Expr};
use crate::scalar::{round_sig, Scalar};

pub const GATE_TRUE: &str = "t";
pub const GATE_FALSE: &str = "n";
pub const RULE_IDLE: &str = "?";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeamKind {
    Probabilistic,
    Ds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleLine {
    /// Parent assignments in canonical order; empty for parentless nodes.
    pub premise: Vec<Atom>,
    pub conclusion: Atom,
}

/// Conditionals sharing one weight. Probabilistic groups hold a single line.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleGroup {
    pub lines: Vec<RuleLine>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleBeam {
    pub node: String,
    pub parents: Vec<String>,
    pub kind: BeamKind,
    pub groups: Vec<RuleGroup>,
}

impl RuleBeam {
    /// Total number of `IF` lines.
    pub fn line_count(&self) -> usize {
        self.groups.iter().map(|g| g.lines.len()).sum()
    }
}

fn format_weight(w: f64) -> String {
    let r = round_sig(w, 15);
    if r == r.trunc() && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

impl fmt::Display for RuleLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.premise.is_empty() {
            write!(f, "IF TRUE")?;
        } else {
            let parts: Vec<String> = self.premise.iter().map(ToString::to_string).collect();
            write!(f, "IF {}", parts.join(" AND "))?;
        }
        write!(f, " THEN {}", self.conclusion)
    }
}

impl fmt::Display for RuleBeam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NODE {}", self.node)?;
        if !self.parents.is_empty() {
            write!(f, " GIVEN {}", self.parents.join(", "))?;
        }
        let kind = match self.kind {
            BeamKind::Probabilistic => "PROBABILISTIC",
            BeamKind::Ds => "DS",
        };
        writeln!(f, " KIND {kind}")?;
        for g in &self.groups {
            for (i, line) in g.lines.iter().enumerate() {
                if i > 0 {
                    write!(f, "AND ")?;
                }
                write!(f, "{line}")?;
                if i + 1 == g.lines.len() {
                    write!(f, " WITH {}", format_weight(g.weight))?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

fn config_line(scope: &Scope, node: &str, index: usize) -> RuleLine {
    let mut premise = Vec::new();
    let mut conclusion = None;
    for (v, d) in scope.vars().iter().zip(scope.decode(index)) {
        let atom = Atom::new(v.name(), v.domain()[d].clone());
        if v.name() == node {
            conclusion = Some(atom);
        } else {
            premise.push(atom);
        }
    }
    RuleLine { premise, conclusion: conclusion.expect("node in its own scope") }
}

/// The beam of rules describing the valuation of `node`.
pub fn render_rule_beam<S: Scalar>(net: &BeliefNetwork<S>, node: &str) -> Result<RuleBeam> {
    render_valuation(net.valuation(node)?)
}

/// Beam for a single valuation.
pub fn render_valuation<S: Scalar>(v: &NodeValuation<S>) -> Result<RuleBeam> {
    let node = v.name().to_string();
    let parents: Vec<String> = v.parents().names().map(String::from).collect();
    let mut groups = Vec::new();
    let kind = match v.valuation() {
        Valuation::Probabilistic(rows) => {
            let pscope = v.parents();
            for (u, row) in rows.iter().enumerate() {
                let premise: Vec<Atom> = pscope
                    .vars()
                    .iter()
                    .zip(pscope.decode(u))
                    .map(|(p, d)| Atom::new(p.name(), p.domain()[d].clone()))
                    .collect();
                for (x, p) in row.iter().enumerate() {
                    let conclusion = Atom::new(&node, v.node().domain()[x].clone());
                    groups.push(RuleGroup {
                        lines: vec![RuleLine { premise: premise.clone(), conclusion }],
                        weight: p.to_f64_lossy(),
                    });
                }
            }
            BeamKind::Probabilistic
        }
        Valuation::Ds(m) => {
            for (set, _) in m.focals() {
                let lines = set.iter().map(|i| config_line(m.scope(), &node, i)).collect();
                groups.push(RuleGroup { lines, weight: m.commonality(set)?.to_f64_lossy() });
            }
            BeamKind::Ds
        }
    };
    Ok(RuleBeam { node, parents, kind, groups })
}

/// Splits at the first occurrence of keyword `kw` outside quotes, on word
/// boundaries, ignoring case.
fn split_keyword<'a>(s: &'a str, kw: &str) -> Option<(&'a str, &'a str)> {
    let bytes = s.as_bytes();
    let mut quoted = false;
    let boundary = |i: usize| i >= bytes.len() || !(bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_');
    for i in 0..bytes.len() {
        if bytes[i] == b'\'' {
            quoted = !quoted;
            continue;
        }
        if quoted || (i > 0 && !boundary(i - 1)) {
            continue;
        }
        let end = i + kw.len();
        if end <= bytes.len() && s[i..end].eq_ignore_ascii_case(kw) && boundary(end) {
            return Some((&s[..i], &s[end..]));
        }
    }
    None
}

fn strip_keyword<'a>(s: &'a str, kw: &str) -> Option<&'a str> {
    let s = s.trim_start();
    match split_keyword(s, kw) {
        Some(("", rest)) => Some(rest),
        _ => None,
    }
}

fn conjunction_atoms(e: Expr, offset: usize) -> Result<Vec<Atom>> {
    match e {
        Expr::Atom(a) => Ok(vec![a]),
        Expr::And(es) => {
            let mut out = Vec::new();
            for e in es {
                out.extend(conjunction_atoms(e, offset)?);
            }
            Ok(out)
        }
        _ => Err(Error::parse(offset, "rule premise must be a conjunction of atoms")),
    }
}

/// Syntax-only reading of beam text.
pub fn parse_rule_beam_text(text: &str) -> Result<RuleBeam> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hno, header) = lines.next().ok_or_else(|| Error::parse(0, "empty rule beam"))?;
    let bad_header = || Error::parse(hno, "expected `NODE <name> [GIVEN <parents>] KIND PROBABILISTIC|DS`");
    let rest = strip_keyword(header, "NODE").ok_or_else(bad_header)?;
    let (head, kind) = split_keyword(rest, "KIND").ok_or_else(bad_header)?;
    let kind = match kind.trim().to_ascii_uppercase().as_str() {
        "PROBABILISTIC" => BeamKind::Probabilistic,
        "DS" => BeamKind::Ds,
        _ => return Err(bad_header()),
    };
    let (node, parents) = match split_keyword(head, "GIVEN") {
        Some((n, ps)) => (n.trim(), ps.split(',').map(|p| p.trim().to_string()).collect::<Vec<_>>()),
        None => (head.trim(), vec![]),
    };
    if node.is_empty() || parents.iter().any(String::is_empty) {
        return Err(bad_header());
    }

    let mut groups = Vec::new();
    let mut open: Vec<RuleLine> = Vec::new();
    for (no, line) in lines {
        let body = if open.is_empty() {
            strip_keyword(line, "IF").ok_or_else(|| Error::parse(no, "expected `IF`"))?
        } else {
            strip_keyword(line, "AND")
                .and_then(|r| strip_keyword(r, "IF"))
                .ok_or_else(|| Error::parse(no, "expected `AND IF` continuing the group"))?
        };
        let (premise, rest) = split_keyword(body, "THEN").ok_or_else(|| Error::parse(no, "missing `THEN`"))?;
        let (conclusion, weight) = match split_keyword(rest, "WITH") {
            Some((c, w)) => (c, Some(w.trim())),
            None => (rest, None),
        };
        let premise = if premise.trim().eq_ignore_ascii_case("TRUE") {
            vec![]
        } else {
            let e = parse_expr(premise).map_err(|e| Error::parse(no, format!("premise: {e}")))?;
            conjunction_atoms(e, no)?
        };
        let conclusion = match parse_expr(conclusion).map_err(|e| Error::parse(no, format!("conclusion: {e}")))? {
            Expr::Atom(a) => a,
            _ => return Err(Error::parse(no, "conclusion must be a single atom")),
        };
        open.push(RuleLine { premise, conclusion });
        if let Some(w) = weight {
            let weight: f64 = w.parse().map_err(|_| Error::parse(no, format!("bad weight `{w}`")))?;
            if !weight.is_finite() {
                return Err(Error::parse(no, format!("bad weight `{w}`")));
            }
            if kind == BeamKind::Probabilistic && open.len() > 1 {
                return Err(Error::parse(no, "probabilistic beams have one line per weight"));
            }
            groups.push(RuleGroup { lines: std::mem::take(&mut open), weight });
        }
    }
    if !open.is_empty() {
        return Err(Error::parse(text.lines().count(), "last group has no `WITH` weight"));
    }
    Ok(RuleBeam { node: node.to_string(), parents, kind, groups })
}

impl RuleBeam {
    /// Converts to a valuation, resolving names against `variables`.
    pub fn to_valuation<S: Scalar>(&self, variables: &[Variable]) -> Result<NodeValuation<S>> {
        let find = |name: &str| {
            variables.iter().find(|v| v.name() == name).cloned().ok_or_else(|| Error::unknown_variable(name))
        };
        let node = find(&self.node)?;
        let parents: Vec<Variable> = self.parents.iter().map(|p| find(p)).collect::<Result<_>>()?;
        let scope = Scope::new(parents.iter().cloned().chain([node.clone()]))?;
        let pscope = Scope::new(parents.iter().cloned())?;
        let locate = |line: &RuleLine| -> Result<usize> {
            if line.conclusion.var != self.node {
                return Err(Error::invalid(format!(
                    "rule concludes on `{}`, not `{}`",
                    line.conclusion.var, self.node
                )));
            }
            let mut seen = BTreeSet::new();
            for a in &line.premise {
                if !pscope.contains(&a.var) {
                    return Err(Error::invalid(format!("`{}` is not a parent of `{}`", a.var, self.node)));
                }
                if !seen.insert(a.var.as_str()) {
                    return Err(Error::invalid(format!("`{}` appears twice in a premise", a.var)));
                }
            }
            if seen.len() != pscope.len() {
                return Err(Error::invalid(format!("premise `{}` does not fix every parent", line)));
            }
            let labels = line.premise.iter().chain([&line.conclusion]).map(|a| (a.var.as_str(), a.value.as_str()));
            scope.index_of_labels(labels)
        };
        match self.kind {
            BeamKind::Probabilistic => {
                let node_pos = scope.position(node.name()).unwrap();
                let pmap = scope.projection_map(&pscope)?;
                let mut rows: Vec<Vec<Option<S>>> = vec![vec![None; node.size()]; pscope.frame_size()?];
                for g in &self.groups {
                    let line = &g.lines[0];
                    let i = locate(line)?;
                    let cell = &mut rows[pmap[i]][scope.digit(i, node_pos)];
                    if cell.is_some() {
                        return Err(Error::invalid(format!("duplicate rule `{line}`")));
                    }
                    *cell = Some(S::lit(g.weight));
                }
                let mut full = Vec::with_capacity(rows.len());
                for (u, row) in rows.into_iter().enumerate() {
                    if row.iter().all(Option::is_none) {
                        return Err(Error::invalid(format!(
                            "node `{}`: no rules for parent configuration {}",
                            self.node,
                            crate::network::describe_parent_row(&pscope, u)
                        )));
                    }
                    full.push(row.into_iter().map(|p| p.unwrap_or_else(S::zero)).collect());
                }
                NodeValuation::probabilistic(node, parents, full)
            }
            BeamKind::Ds => {
                let n = scope.frame_size()?;
                let mut table = Vec::with_capacity(self.groups.len());
                for g in &self.groups {
                    let idx = g.lines.iter().map(&locate).collect::<Result<Vec<_>>>()?;
                    table.push((FrameSet::from_indices(n, idx), S::lit(g.weight)));
                }
                let mut sets: Vec<&FrameSet> = table.iter().map(|(s, _)| s).collect();
                sets.sort();
                if sets.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::invalid("two rule groups describe the same focal set"));
                }
                let mass = MassFunction::from_commonality(&scope, &table)?;
                NodeValuation::ds(node, parents, mass)
            }
        }
    }
}

/// Reads a beam and converts it to a valuation; domains come from `variables`.
pub fn parse_rule_beam<S: Scalar>(text: &str, variables: &[Variable]) -> Result<NodeValuation<S>> {
    parse_rule_beam_text(text)?.to_valuation(variables)
}

/// A boolean input to a gate: `atom` or its negation.
#[derive(Clone, Debug)]
struct Literal {
    atom: Atom,
    negated: bool,
}

#[derive(Clone, Copy, Debug)]
enum GateOp {
    And,
    Or,
    /// Single input passed through (possibly negated).
    Pass,
    /// `t` if premise and conclusion, `n` if premise only, `?` otherwise.
    Rule,
}

/// Network amended with gate nodes.
#[derive(Clone, Debug)]
pub struct CompiledQuery<S = f64> {
    pub network: BeliefNetwork<S>,
    /// The node whose marginal answers the query.
    pub node: String,
    /// Every node added, in creation order.
    pub added: Vec<String>,
}

struct GateBuilder<S: Scalar> {
    net: BeliefNetwork<S>,
    added: Vec<String>,
    counter: usize,
}

impl<S: Scalar> GateBuilder<S> {
    fn fresh_name(&mut self) -> String {
        loop {
            self.counter += 1;
            let name = format!("x{}", self.counter);
            if self.net.variable(&name).is_err() {
                return name;
            }
        }
    }

    fn check_atom(&self, a: &Atom) -> Result<()> {
        self.net.variable(&a.var)?.value_index(&a.value).map(|_| ())
    }

    fn signal(&mut self, e: &Expr) -> Result<Literal> {
        Ok(match e {
            Expr::Atom(a) => {
                self.check_atom(a)?;
                Literal { atom: a.clone(), negated: false }
            }
            Expr::Not(inner) => {
                let mut l = self.signal(inner)?;
                l.negated = !l.negated;
                l
            }
            Expr::And(es) | Expr::Or(es) => {
                let inputs = es.iter().map(|e| self.signal(e)).collect::<Result<Vec<_>>>()?;
                let op = if matches!(e, Expr::And(_)) { GateOp::And } else { GateOp::Or };
                let name = self.gate(op, &inputs)?;
                Literal { atom: Atom::new(name, GATE_TRUE), negated: false }
            }
        })
    }

    /// Adds a deterministic node computing `op` over `inputs`.
    fn gate(&mut self, op: GateOp, inputs: &[Literal]) -> Result<String> {
        let name = self.fresh_name();
        let domain: &[&str] = match op {
            GateOp::Rule => &[GATE_TRUE, GATE_FALSE, RULE_IDLE],
            _ => &[GATE_TRUE, GATE_FALSE],
        };
        let var = Variable::new(&name, domain.iter().copied())?;
        let parent_names: BTreeSet<&str> = inputs.iter().map(|l| l.atom.var.as_str()).collect();
        let parents: Vec<Variable> =
            parent_names.iter().map(|p| self.net.variable(p).cloned()).collect::<Result<_>>()?;
        let pscope = Scope::new(parents.iter().cloned())?;
        let rows_n = pscope.frame_size()?;
        let value_of = |row: usize, l: &Literal| -> bool {
            let pos = pscope.position(&l.atom.var).unwrap();
            let v = &pscope.vars()[pos];
            (v.domain()[pscope.digit(row, pos)] == l.atom.value) != l.negated
        };
        let outputs: Vec<usize> = (0..rows_n)
            .map(|row| {
                let bits: Vec<bool> = inputs.iter().map(|l| value_of(row, l)).collect();
                let yes = |b: bool| if b { 0 } else { 1 };
                match op {
                    GateOp::And => yes(bits.iter().all(|&b| b)),
                    GateOp::Or => yes(bits.iter().any(|&b| b)),
                    GateOp::Pass => yes(bits[0]),
                    GateOp::Rule => match (bits[0], bits[1]) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, _) => 2,
                    },
                }
            })
            .collect();
        let valuation = match self.net.mode() {
            NetworkMode::Probabilistic => {
                let rows = outputs
                    .iter()
                    .map(|&o| (0..domain.len()).map(|x| if x == o { S::one() } else { S::zero() }).collect())
                    .collect();
                NodeValuation::probabilistic(var.clone(), parents, rows)?
            }
            NetworkMode::Ds => {
                // the gate relation as a categorical valuation
                let scope = Scope::new(parents.iter().cloned().chain([var.clone()]))?;
                let pmap = scope.projection_map(&pscope)?;
                let gpos = scope.position(&name).unwrap();
                let n = scope.frame_size()?;
                let set = FrameSet::from_indices(n, (0..n).filter(|&i| scope.digit(i, gpos) == outputs[pmap[i]]));
                NodeValuation::ds(var.clone(), parents, MassFunction::categorical(&scope, set)?)?
            }
        };
        self.net = self.net.with_node(valuation)?;
        self.added.push(name.clone());
        Ok(name)
    }
}

/// Amends a copy of `net` with gate nodes for `query`. An expression yields
/// a final `{t, n}` node; a rule yields a final `{t, n, ?}` node.
pub fn compile_query_node<S: Scalar>(net: &BeliefNetwork<S>, query: &crate::query::Query) -> Result<CompiledQuery<S>> {
    let mut b = GateBuilder { net: net.clone(), added: Vec::new(), counter: 0 };
    let node = match query {
        crate::query::Query::Expr(e) => match b.signal(e)? {
            l if l.negated || !b.added.contains(&l.atom.var) => b.gate(GateOp::Pass, &[l])?,
            l => l.atom.var,
        },
        crate::query::Query::Rule { premise, conclusion } => {
            let p = b.signal(premise)?;
            b.check_atom(conclusion)?;
            let c = Literal { atom: conclusion.clone(), negated: false };
            b.gate(GateOp::Rule, &[p, c])?
        }
    };
    Ok(CompiledQuery { network: b.net, node, added: b.added })
}

/// Reads an expression as findings when it is a conjunction of atoms or of
/// disjunctions over a single variable (`a='t' and (b='x' or b='y')`).
pub fn evidence_from_expr(expr: &Expr) -> Option<EvidenceSet> {
    fn values_of(e: &Expr, var: &mut Option<String>, out: &mut BTreeSet<String>) -> bool {
        match e {
            Expr::Atom(a) => {
                if var.get_or_insert_with(|| a.var.clone()) != &a.var {
                    return false;
                }
                out.insert(a.value.clone());
                true
            }
            Expr::Or(es) => es.iter().all(|e| values_of(e, var, out)),
            _ => false,
        }
    }
    let conjuncts: Vec<&Expr> = match expr {
        Expr::And(es) => es.iter().collect(),
        e => vec![e],
    };
    let mut ev = EvidenceSet::new();
    let mut seen = BTreeSet::new();
    for c in conjuncts {
        let (mut var, mut values) = (None, BTreeSet::new());
        if !values_of(c, &mut var, &mut values) {
            return None;
        }
        let var = var?;
        if !seen.insert(var.clone()) {
            return None;
        }
        ev = ev.with_values(&var, values);
    }
    Some(ev)
}

/// Lower and upper probability of an event; equal for probabilistic networks.
#[derive(Clone, Debug, PartialEq)]
pub struct EventAnswer<S = f64> {
    pub belief: S,
    pub plausibility: S,
    /// Marginal of the gate node over `{t, n}`.
    pub mass: MassFunction<S>,
}

impl<S: Scalar> EventAnswer<S> {
    pub fn is_point(&self) -> bool {
        self.belief.approx_eq(&self.plausibility)
    }
}

/// Compiles `given` and adds `gate = t` as a finding.
fn with_given<S: Scalar>(net: &BeliefNetwork<S>, given: Option<&Expr>) -> Result<(BeliefNetwork<S>, EvidenceSet)> {
    match given {
        None => Ok((net.clone(), EvidenceSet::new())),
        Some(g) => {
            let c = compile_query_node(net, &crate::query::Query::Expr(g.clone()))?;
            let ev = EvidenceSet::new().with(&c.node, GATE_TRUE);
            Ok((c.network, ev))
        }
    }
}

fn conditioned<S: Scalar>(r: Result<MassFunction<S>>) -> Result<MassFunction<S>> {
    r.map_err(|e| match e {
        Error::TotalConflict(_) => Error::conflict("the given event has zero plausibility"),
        e => e,
    })
}

/// Probability (belief and plausibility for ds networks) of `expr`,
/// optionally conditioned on `given`. `net` itself is left untouched.
pub fn evaluate_expression_query<S: Scalar>(
    net: &BeliefNetwork<S>,
    expr: &Expr,
    given: Option<&Expr>,
) -> Result<EventAnswer<S>> {
    let (base, ev) = with_given(net, given)?;
    let c = compile_query_node(&base, &crate::query::Query::Expr(expr.clone()))?;
    let mass = conditioned(query_marginal(&c.network, &c.node, &ev))?;
    let t = FrameSet::singleton(2, 0);
    Ok(EventAnswer { belief: mass.belief(&t)?, plausibility: mass.plausibility(&t)?, mass })
}

/// Posterior marginal of `var`, optionally conditioned on an expression.
pub fn marginal_given<S: Scalar>(net: &BeliefNetwork<S>, var: &str, given: Option<&Expr>) -> Result<MassFunction<S>> {
    net.variable(var)?;
    let (base, ev) = with_given(net, given)?;
    conditioned(query_marginal(&base, var, &ev))
}

/// How often a rule fires correctly (`t`), fires wrongly (`n`) or does not
/// fire (`q`). For ds networks these are the masses of the singletons and
/// `ignorance` holds the mass left on larger sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeValuedAnswer<S = f64> {
    pub t: S,
    pub n: S,
    pub q: S,
    pub ignorance: S,
}

pub fn validate_rule_query<S: Scalar>(
    net: &BeliefNetwork<S>,
    premise: &Expr,
    conclusion: &Atom,
) -> Result<ThreeValuedAnswer<S>> {
    let query = crate::query::Query::Rule { premise: premise.clone(), conclusion: conclusion.clone() };
    let c = compile_query_node(net, &query)?;
    let m = query_marginal(&c.network, &c.node, &EvidenceSet::new())?;
    let (t, n, q) = (m.point_mass(0), m.point_mass(1), m.point_mass(2));
    let ignorance = S::one() - t.clone() - n.clone() - q.clone();
    let ignorance = if ignorance.is_negligible() { S::zero() } else { ignorance };
    Ok(ThreeValuedAnswer { t, n, q, ignorance })
}
