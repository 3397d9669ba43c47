//! Mass functions (basic probability assignments) over a scope and the
//! operations of the belief-function calculus: set functions, Möbius
//! inversion, Dempster combination, decombination, minimal extension,
//! marginalization and conditioning.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope};
use crate::query::Expr;
use crate::scalar::{format_sig, Scalar};

/// Largest frame for which dense (all-subsets) tables are built.
pub const DENSE_FRAME_LIMIT: usize = 20;

/// Cap on the number of sets in an intersection-closed family.
const FAMILY_LIMIT: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetFunctionKind {
    Belief,
    Plausibility,
    Commonality,
}

/// A basic probability assignment stored as a sparse, canonically ordered
/// list of focal sets. A *pseudo* mass function may carry negative masses
/// as long as every commonality stays non-negative.
#[derive(Clone, PartialEq)]
pub struct MassFunction<S = f64> {
    scope: Scope,
    frame_len: usize,
    focals: Vec<(FrameSet, S)>,
    pseudo: bool,
}

fn merge<S: Scalar>(entries: impl IntoIterator<Item = (FrameSet, S)>) -> Vec<(FrameSet, S)> {
    let mut acc: HashMap<FrameSet, S> = HashMap::new();
    for (set, m) in entries {
        match acc.get_mut(&set) {
            Some(v) => *v = v.clone() + m,
            None => {
                acc.insert(set, m);
            }
        }
    }
    let mut out: Vec<(FrameSet, S)> = acc.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn sum<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v.clone())
}

impl<S: Scalar> MassFunction<S> {
    fn check_sets<'a>(scope: &Scope, sets: impl IntoIterator<Item = &'a FrameSet>) -> Result<usize> {
        let n = scope.frame_size()?;
        for s in sets {
            if s.frame_len() != n {
                return Err(Error::scope(format!(
                    "set over {} configurations used with scope {scope} of {n}",
                    s.frame_len()
                )));
            }
        }
        Ok(n)
    }

    /// Builds a mass function, merging duplicate focal sets.
    ///
    /// The merged masses must sum to 1 and put no mass on the empty set; use
    /// [`MassFunction::unnormalized`] followed by [`MassFunction::normalize`]
    /// when that is not the case.
    pub fn from_focals(scope: &Scope, entries: impl IntoIterator<Item = (FrameSet, S)>) -> Result<Self> {
        let m = Self::unnormalized(scope, entries)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds a mass function without checking totals. Duplicates are merged
    /// and zero masses dropped; the empty set may carry mass.
    pub fn unnormalized(scope: &Scope, entries: impl IntoIterator<Item = (FrameSet, S)>) -> Result<Self> {
        let entries: Vec<(FrameSet, S)> = entries.into_iter().collect();
        let frame_len = Self::check_sets(scope, entries.iter().map(|(s, _)| s))?;
        let focals: Vec<_> = merge(entries).into_iter().filter(|(_, m)| !m.is_zero()).collect();
        let pseudo = focals.iter().any(|(_, m)| m.is_negative());
        Ok(MassFunction { scope: scope.clone(), frame_len, focals, pseudo })
    }

    /// Trusted constructor for already merged, sorted, pruned focals.
    pub(crate) fn from_parts(scope: &Scope, frame_len: usize, focals: Vec<(FrameSet, S)>) -> Self {
        let pseudo = focals.iter().any(|(_, m)| m.is_negative());
        MassFunction { scope: scope.clone(), frame_len, focals, pseudo }
    }

    /// Checks the invariants of a (pseudo) mass function.
    pub fn validate(&self) -> Result<()> {
        if self.focals.is_empty() {
            return Err(Error::invalid("mass function has no focal sets"));
        }
        if self.focals.iter().any(|(s, m)| s.is_empty() && !m.is_negligible()) {
            return Err(Error::invalid("mass assigned to the empty set; normalize first"));
        }
        let total = self.total();
        if !total.approx_eq(&S::one()) {
            return Err(Error::invalid(format!("masses sum to {}, not 1", total.to_f64_lossy())));
        }
        if self.pseudo {
            let floor = -S::prune_threshold();
            for (set, q) in self.commonality_table()? {
                if q < floor {
                    return Err(Error::invalid(format!(
                        "negative commonality {} on a set of {} configurations",
                        q.to_f64_lossy(),
                        set.count()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn vacuous(scope: &Scope) -> Result<Self> {
        let n = scope.frame_size()?;
        Ok(Self::from_parts(scope, n, vec![(FrameSet::full(n), S::one())]))
    }

    /// `m(A) = 1`.
    pub fn categorical(scope: &Scope, set: FrameSet) -> Result<Self> {
        let n = Self::check_sets(scope, [&set])?;
        if set.is_empty() {
            return Err(Error::invalid("categorical mass on the empty set"));
        }
        Ok(Self::from_parts(scope, n, vec![(set, S::one())]))
    }

    /// `m(A) = alpha`, `m(Θ) = 1 - alpha` for `alpha` in `(0, 1]`.
    pub fn simple_support(scope: &Scope, set: FrameSet, alpha: S) -> Result<Self> {
        if !(alpha > S::zero() && alpha <= S::one()) {
            return Err(Error::invalid(format!("support {} outside (0,1]", alpha.to_f64_lossy())));
        }
        if alpha == S::one() || set.is_full() {
            return Self::categorical(scope, set);
        }
        let n = Self::check_sets(scope, [&set])?;
        if set.is_empty() {
            return Err(Error::invalid("simple support on the empty set"));
        }
        let rest = S::one() - alpha.clone();
        Self::from_focals(scope, [(set, alpha), (FrameSet::full(n), rest)])
    }

    /// Categorical mass on the configurations satisfying a logical expression.
    pub fn logical(scope: &Scope, expr: &Expr) -> Result<Self> {
        let set = expr.satisfying_set(scope)?;
        if set.is_empty() {
            return Err(Error::invalid(format!("`{expr}` is unsatisfiable")));
        }
        Self::categorical(scope, set)
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Focal sets in canonical (bitset value) order.
    pub fn focals(&self) -> &[(FrameSet, S)] {
        &self.focals
    }

    pub fn len(&self) -> usize {
        self.focals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.focals.is_empty()
    }

    pub fn is_pseudo(&self) -> bool {
        self.pseudo
    }

    /// True when all focal sets are singletons, i.e. `m` is a probability distribution.
    pub fn is_bayesian(&self) -> bool {
        self.focals.iter().all(|(s, _)| s.count() == 1)
    }

    pub fn is_vacuous(&self) -> bool {
        self.focals.len() == 1 && self.focals[0].0.is_full()
    }

    pub fn total(&self) -> S {
        sum(self.focals.iter().map(|(_, m)| m))
    }

    pub fn mass(&self, set: &FrameSet) -> S {
        match self.focals.binary_search_by(|(s, _)| s.cmp(set)) {
            Ok(i) => self.focals[i].1.clone(),
            Err(_) => S::zero(),
        }
    }

    /// Mass of the singleton `{index}`.
    pub fn point_mass(&self, index: usize) -> S {
        self.mass(&FrameSet::singleton(self.frame_len, index))
    }

    pub fn empty_set(&self) -> FrameSet {
        FrameSet::empty(self.frame_len)
    }

    pub fn full_set(&self) -> FrameSet {
        FrameSet::full(self.frame_len)
    }

    /// Divides by the mass outside the empty set and drops the empty set.
    pub fn normalize(&self) -> Result<Self> {
        let kept: Vec<(FrameSet, S)> = self.focals.iter().filter(|(s, _)| !s.is_empty()).cloned().collect();
        let total = sum(kept.iter().map(|(_, m)| m));
        if total <= S::prune_threshold() || total.is_zero() {
            return Err(Error::conflict("no mass outside the empty set"));
        }
        let focals = kept.into_iter().map(|(s, m)| (s, m / total.clone())).collect();
        Ok(Self::from_parts(&self.scope, self.frame_len, focals))
    }

    /// Bel, Pl or Q at `set`.
    pub fn set_function(&self, kind: SetFunctionKind, set: &FrameSet) -> Result<S> {
        Self::check_sets(&self.scope, [set])?;
        let pick = |b: &FrameSet| match kind {
            SetFunctionKind::Belief => !b.is_empty() && b.is_subset(set),
            SetFunctionKind::Plausibility => b.intersects(set),
            SetFunctionKind::Commonality => set.is_subset(b),
        };
        Ok(sum(self.focals.iter().filter(|(b, _)| pick(b)).map(|(_, m)| m)))
    }

    pub fn belief(&self, set: &FrameSet) -> Result<S> {
        self.set_function(SetFunctionKind::Belief, set)
    }

    pub fn plausibility(&self, set: &FrameSet) -> Result<S> {
        self.set_function(SetFunctionKind::Plausibility, set)
    }

    pub fn commonality(&self, set: &FrameSet) -> Result<S> {
        self.set_function(SetFunctionKind::Commonality, set)
    }

    fn commonality_unchecked(&self, set: &FrameSet) -> S {
        sum(self.focals.iter().filter(|(b, _)| set.is_subset(b)).map(|(_, m)| m))
    }

    /// Commonality values on the intersection closure of the focal sets.
    /// Every other non-empty set has the commonality of its closure, or 0.
    pub fn commonality_table(&self) -> Result<Vec<(FrameSet, S)>> {
        let family = intersection_closure(self.focals.iter().map(|(s, _)| s))?;
        Ok(family
            .into_iter()
            .map(|s| {
                let q = self.commonality_unchecked(&s);
                (s, q)
            })
            .collect())
    }

    /// Recovers masses from commonalities given on a family of sets that
    /// contains every focal set of the result (an intersection-closed family
    /// generated by the focal sets qualifies). Sets outside the family are
    /// taken to carry no mass.
    pub fn from_commonality(scope: &Scope, table: &[(FrameSet, S)]) -> Result<Self> {
        Self::check_sets(scope, table.iter().map(|(s, _)| s))?;
        let floor = -S::prune_threshold();
        if let Some((_, q)) = table.iter().find(|(_, q)| *q < floor) {
            return Err(Error::invalid(format!("negative commonality {}", q.to_f64_lossy())));
        }
        let n = scope.frame_size()?;
        let masses = mobius_on_family(table);
        let m = Self::from_parts(scope, n, prune(masses));
        m.validate()?;
        Ok(m)
    }

    /// Dense commonality table indexed by subset bitmask (frames of at most
    /// [`DENSE_FRAME_LIMIT`] configurations).
    pub fn commonality_dense(&self) -> Result<Vec<S>> {
        let n = dense_len(self.frame_len)?;
        let mut q = vec![S::zero(); 1 << n];
        for (set, m) in &self.focals {
            q[mask_of(set)] = q[mask_of(set)].clone() + m.clone();
        }
        // zeta transform over supersets
        for bit in 0..n {
            for mask in 0..q.len() {
                if mask & (1 << bit) == 0 {
                    let hi = q[mask | (1 << bit)].clone();
                    q[mask] = q[mask].clone() + hi;
                }
            }
        }
        Ok(q)
    }

    /// Inverse of [`MassFunction::commonality_dense`].
    pub fn from_commonality_dense(scope: &Scope, table: &[S]) -> Result<Self> {
        let len = scope.frame_size()?;
        let n = dense_len(len)?;
        if table.len() != 1 << n {
            return Err(Error::invalid(format!("dense table needs {} entries", 1usize << n)));
        }
        let floor = -S::prune_threshold();
        if table.iter().skip(1).any(|q| *q < floor) {
            return Err(Error::invalid("negative commonality in table"));
        }
        let mut m = table.to_vec();
        for bit in 0..n {
            for mask in 0..m.len() {
                if mask & (1 << bit) == 0 {
                    let hi = m[mask | (1 << bit)].clone();
                    m[mask] = m[mask].clone() - hi;
                }
            }
        }
        let focals = m
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_negligible())
            .map(|(mask, v)| (FrameSet::from_indices(len, (0..n).filter(|b| mask >> b & 1 == 1)), v))
            .collect::<Vec<_>>();
        let out = Self::from_parts(scope, len, merge(focals));
        out.validate()?;
        Ok(out)
    }

    /// Dense belief table indexed by subset bitmask: `Bel(A) = Σ_{∅≠B⊆A} m(B)`.
    pub fn belief_dense(&self) -> Result<Vec<S>> {
        let n = dense_len(self.frame_len)?;
        let mut b = vec![S::zero(); 1 << n];
        for (set, m) in self.focals.iter().filter(|(s, _)| !s.is_empty()) {
            b[mask_of(set)] = b[mask_of(set)].clone() + m.clone();
        }
        for bit in 0..n {
            for mask in 0..b.len() {
                if mask & (1 << bit) != 0 {
                    let lo = b[mask ^ (1 << bit)].clone();
                    b[mask] = b[mask].clone() + lo;
                }
            }
        }
        Ok(b)
    }

    /// Inverse of [`MassFunction::belief_dense`].
    pub fn from_belief_dense(scope: &Scope, table: &[S]) -> Result<Self> {
        let len = scope.frame_size()?;
        let n = dense_len(len)?;
        if table.len() != 1 << n {
            return Err(Error::invalid(format!("dense table needs {} entries", 1usize << n)));
        }
        let mut m = table.to_vec();
        for bit in 0..n {
            for mask in (0..m.len()).rev() {
                if mask & (1 << bit) != 0 {
                    let lo = m[mask ^ (1 << bit)].clone();
                    m[mask] = m[mask].clone() - lo;
                }
            }
        }
        let focals = m
            .into_iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| !v.is_negligible())
            .map(|(mask, v)| (FrameSet::from_indices(len, (0..n).filter(|b| mask >> b & 1 == 1)), v))
            .collect::<Vec<_>>();
        let out = Self::from_parts(scope, len, merge(focals));
        out.validate()?;
        Ok(out)
    }

    fn same_scope(&self, other: &Self) -> Result<()> {
        if self.scope != other.scope {
            return Err(Error::scope(format!("{} vs {}; extend first", self.scope, other.scope)));
        }
        Ok(())
    }

    /// Accumulates `f(acc, m1(B)·m2(C))` over all pairs with non-empty `B ∩ C`.
    pub(crate) fn fold_intersections(&self, other: &Self, mut f: impl FnMut(&mut S, S)) -> Result<Vec<(FrameSet, S)>> {
        self.same_scope(other)?;
        let mut acc: HashMap<FrameSet, S> = HashMap::new();
        for (b, mb) in &self.focals {
            for (c, mc) in &other.focals {
                let a = b.intersection(c);
                if a.is_empty() {
                    continue;
                }
                let p = mb.clone() * mc.clone();
                match acc.get_mut(&a) {
                    Some(v) => f(v, p),
                    None => {
                        acc.insert(a, p);
                    }
                }
            }
        }
        let mut out: Vec<_> = acc.into_iter().collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Dempster's rule: intersect focal sets, multiply masses, drop the
    /// conflict and renormalize. Masses below the prune threshold are
    /// discarded before renormalizing.
    pub fn combine(&self, other: &Self) -> Result<Self> {
        let raw = self.fold_intersections(other, |acc, p| *acc = acc.clone() + p)?;
        let kept = prune(raw);
        let total = sum(kept.iter().map(|(_, m)| m));
        if total <= S::prune_threshold() || total.is_zero() {
            return Err(Error::conflict(format!("combination over {} is totally conflicting", self.scope)));
        }
        let focals = kept.into_iter().map(|(s, m)| (s, m / total.clone())).collect();
        Ok(Self::from_parts(&self.scope, self.frame_len, focals))
    }

    /// Combines after extending both operands to the union of their scopes.
    pub fn combine_extended(&self, other: &Self) -> Result<Self> {
        let scope = self.scope.union(&other.scope)?;
        self.extend(&scope)?.combine(&other.extend(&scope)?)
    }

    /// Inverse of combination: a (pseudo) mass function `r` with
    /// `Q_r(A) = c·Q_self(A)/Q_other(A)` wherever `Q_other(A) ≠ 0` and
    /// `Q_r(A) = 0` elsewhere, scaled so the masses sum to 1.
    pub fn decombine(&self, other: &Self) -> Result<Self> {
        self.same_scope(other)?;
        let sets = self.focals.iter().chain(&other.focals).map(|(s, _)| s);
        let family = intersection_closure(sets)?;
        let mut table = Vec::with_capacity(family.len());
        for set in family {
            let q12 = self.commonality_unchecked(&set);
            let q2 = other.commonality_unchecked(&set);
            let q = if q2.is_negligible() || q2.is_zero() {
                if !q12.is_negligible() {
                    return Err(Error::Undefined(format!(
                        "divisor commonality vanishes on a set of {} configurations where the dividend is {}",
                        set.count(),
                        q12.to_f64_lossy()
                    )));
                }
                S::zero()
            } else {
                q12 / q2
            };
            table.push((set, q));
        }
        let masses = prune(mobius_on_family(&table));
        if masses.is_empty() {
            return Self::vacuous(&self.scope);
        }
        let total = sum(masses.iter().map(|(_, m)| m));
        if total <= S::prune_threshold() {
            return Err(Error::Undefined("decombined masses have non-positive total".into()));
        }
        let focals = masses.into_iter().map(|(s, m)| (s, m / total.clone())).collect();
        Ok(Self::from_parts(&self.scope, self.frame_len, focals))
    }

    /// Minimal extension: every focal `A` becomes the cylinder `A × Θ.(target − scope)`.
    pub fn extend(&self, target: &Scope) -> Result<Self> {
        if !target.contains_scope(&self.scope) {
            return Err(Error::scope(format!("{target} does not contain {}", self.scope)));
        }
        if *target == self.scope {
            return Ok(self.clone());
        }
        let map = target.projection_map(&self.scope)?;
        let mut focals: Vec<_> = self.focals.iter().map(|(s, m)| (s.preimage(&map), m.clone())).collect();
        focals.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::from_parts(target, map.len(), focals))
    }

    /// Marginalization: masses of sets with equal projections are summed.
    pub fn marginalize(&self, target: &Scope) -> Result<Self> {
        if !self.scope.contains_scope(target) {
            return Err(Error::scope(format!("{target} is not contained in {}", self.scope)));
        }
        if *target == self.scope {
            return Ok(self.clone());
        }
        let map = self.scope.projection_map(target)?;
        let n = target.frame_size()?;
        let merged = merge(self.focals.iter().map(|(s, m)| (s.map_through(&map, n), m.clone())));
        Ok(Self::from_parts(target, n, prune(merged)))
    }

    /// Combination with the categorical mass on `set`, i.e. `Bel(· | set)`.
    pub fn condition_on(&self, set: &FrameSet) -> Result<Self> {
        let cat = Self::categorical(&self.scope, set.clone())?;
        self.combine(&cat)
    }

    /// Focal-wise comparison within the scalar tolerance.
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.max_abs_diff(other).is_some_and(|d| d <= S::eq_tolerance())
    }

    /// Largest focal-wise difference, or `None` for different scopes.
    pub fn max_abs_diff(&self, other: &Self) -> Option<S> {
        if self.scope != other.scope {
            return None;
        }
        let keys: HashSet<&FrameSet> = self.focals.iter().chain(&other.focals).map(|(s, _)| s).collect();
        Some(keys.into_iter().fold(S::zero(), |acc, k| acc.max_of((self.mass(k) - other.mass(k)).abs())))
    }

    /// Converts every mass into another scalar type.
    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> MassFunction<T> {
        let focals = self.focals.iter().map(|(s, m)| (s.clone(), f(m))).collect();
        MassFunction::from_parts(&self.scope, self.frame_len, focals)
    }

    /// Renders one focal set, e.g. `{(f,f),(f,t)}`.
    pub fn render_set(&self, set: &FrameSet) -> String {
        render_set(&self.scope, set)
    }
}

impl<S: Scalar> fmt::Display for MassFunction<S> {
    /// One line per focal set: `{config,...}: mass`, 12 significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (set, m) in &self.focals {
            writeln!(f, "{}: {}", self.render_set(set), format_sig(m.to_f64_lossy(), 12))?;
        }
        Ok(())
    }
}

impl<S: fmt::Debug> fmt::Debug for MassFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MassFunction{} ", self.scope)?;
        f.debug_map().entries(self.focals.iter().map(|(s, m)| (render_set(&self.scope, s), m))).finish()
    }
}

fn render_set(scope: &Scope, set: &FrameSet) -> String {
    let items: Vec<String> = set.iter().map(|i| scope.render_config(i)).collect();
    format!("{{{}}}", items.join(","))
}

fn prune<S: Scalar>(entries: Vec<(FrameSet, S)>) -> Vec<(FrameSet, S)> {
    entries.into_iter().filter(|(_, m)| !m.is_negligible() && !m.is_zero()).collect()
}

fn dense_len(frame_len: usize) -> Result<usize> {
    if frame_len > DENSE_FRAME_LIMIT {
        return Err(Error::Capacity { size: 1u128 << frame_len.min(127), limit: 1 << DENSE_FRAME_LIMIT });
    }
    Ok(frame_len)
}

fn mask_of(set: &FrameSet) -> usize {
    set.iter().fold(0, |acc, i| acc | 1 << i)
}

/// All non-empty intersections of members of `sets` (the members included).
pub(crate) fn intersection_closure<'a>(sets: impl IntoIterator<Item = &'a FrameSet>) -> Result<Vec<FrameSet>> {
    let mut generators: Vec<FrameSet> = Vec::new();
    let mut seen: HashSet<FrameSet> = HashSet::new();
    for s in sets {
        if !s.is_empty() && seen.insert(s.clone()) {
            generators.push(s.clone());
        }
    }
    let mut family = generators.clone();
    let mut frontier = generators.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for x in &frontier {
            for g in &generators {
                let y = x.intersection(g);
                if !y.is_empty() && seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        family.extend(next.iter().cloned());
        if family.len() > FAMILY_LIMIT {
            return Err(Error::Capacity { size: family.len() as u128, limit: FAMILY_LIMIT });
        }
        frontier = next;
    }
    family.sort();
    Ok(family)
}

/// `m(A) = Q(A) − Σ{m(B) | B ⊋ A, B in family}`; exact when the family holds every focal set.
fn mobius_on_family<S: Scalar>(table: &[(FrameSet, S)]) -> Vec<(FrameSet, S)> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].0.count().cmp(&table[a].0.count()).then(table[a].0.cmp(&table[b].0)));
    let mut done: Vec<(FrameSet, S)> = Vec::with_capacity(table.len());
    for i in order {
        let (set, q) = &table[i];
        let above = sum(done.iter().filter(|(b, _)| b != set && set.is_subset(b)).map(|(_, m)| m));
        done.push((set.clone(), q.clone() - above));
    }
    merge(done)
}
