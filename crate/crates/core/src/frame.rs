//! Variables, scopes, configurations and subsets of a frame.
//!
//! A scope is a set of variables kept in canonical (name) order. Its frame
//! is the cross product of the domains, enumerated lexicographically by
//! variable name and then domain index, so configuration `0` assigns the
//! first label to every variable and the last variable varies fastest.
//! Subsets of a frame are bitsets over that enumeration.

use std::cmp::Ordering;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Default upper bound on the number of configurations in any frame an
/// operation materializes.
pub const DEFAULT_FRAME_LIMIT: usize = 1 << 20;

/// Environment variable that overrides [`DEFAULT_FRAME_LIMIT`].
pub const CAPACITY_ENV: &str = "EVIDENTIAL_CAPACITY";

static LIMIT_OVERRIDE: AtomicUsize = AtomicUsize::new(0);
static ENV_LIMIT: OnceLock<usize> = OnceLock::new();

/// Current frame capacity: an explicit override, else `EVIDENTIAL_CAPACITY`,
/// else [`DEFAULT_FRAME_LIMIT`].
pub fn frame_limit() -> usize {
    match LIMIT_OVERRIDE.load(AtomicOrdering::Relaxed) {
        0 => *ENV_LIMIT.get_or_init(|| {
            std::env::var(CAPACITY_ENV)
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&v| v > 0)
                .unwrap_or(DEFAULT_FRAME_LIMIT)
        }),
        n => n,
    }
}

/// Overrides the frame capacity for the whole process. `0` restores the default lookup.
pub fn set_frame_limit(limit: usize) {
    LIMIT_OVERRIDE.store(limit, AtomicOrdering::Relaxed);
}

/// A named discrete variable with an ordered domain.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    name: Arc<str>,
    domain: Arc<[String]>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: &str, domain: impl IntoIterator<Item = S>) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::invalid("variable name must not be empty"));
        }
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        if domain.is_empty() {
            return Err(Error::invalid(format!("variable `{name}` has an empty domain")));
        }
        for (i, v) in domain.iter().enumerate() {
            if domain[..i].contains(v) {
                return Err(Error::invalid(format!("variable `{name}` repeats value `{v}`")));
            }
        }
        Ok(Variable { name: name.into(), domain: domain.into() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn value_index(&self, value: &str) -> Result<usize> {
        self.domain.iter().position(|v| v == value).ok_or_else(|| Error::unknown_value(&self.name, value))
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.name, self.domain)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct ScopeInner {
    vars: Vec<Variable>,
    strides: Vec<usize>,
    size: u128,
}

/// An ordered set of variables; order is canonical (by name).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scope(Arc<ScopeInner>);

impl Scope {
    pub fn new(vars: impl IntoIterator<Item = Variable>) -> Result<Self> {
        let mut vars: Vec<Variable> = vars.into_iter().collect();
        vars.sort_by(|a, b| a.name().cmp(b.name()));
        for w in vars.windows(2) {
            if w[0].name() == w[1].name() {
                return Err(Error::invalid(format!("duplicate variable `{}` in scope", w[0].name())));
            }
        }
        Ok(Self::from_sorted(vars))
    }

    pub fn empty() -> Self {
        Self::from_sorted(Vec::new())
    }

    fn from_sorted(vars: Vec<Variable>) -> Self {
        let size = vars.iter().fold(1u128, |acc, v| acc.saturating_mul(v.size() as u128));
        let mut strides = vec![0usize; vars.len()];
        let mut stride = 1u128;
        for (i, v) in vars.iter().enumerate().rev() {
            strides[i] = stride.min(usize::MAX as u128) as usize;
            stride = stride.saturating_mul(v.size() as u128);
        }
        Scope(Arc::new(ScopeInner { vars, strides, size }))
    }

    pub fn vars(&self) -> &[Variable] {
        &self.0.vars
    }

    pub fn len(&self) -> usize {
        self.0.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.vars.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.vars.iter().map(|v| v.name())
    }

    /// Number of configurations, without a capacity check (saturating).
    pub fn frame_size_unchecked(&self) -> u128 {
        self.0.size
    }

    /// Number of configurations, failing when above [`frame_limit`].
    pub fn frame_size(&self) -> Result<usize> {
        let limit = frame_limit();
        if self.0.size > limit as u128 {
            return Err(Error::Capacity { size: self.0.size, limit });
        }
        Ok(self.0.size as usize)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.vars.binary_search_by(|v| v.name().cmp(name)).ok()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.position(name).map(|i| &self.0.vars[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// True when every variable of `other` belongs to `self` (with the same domain).
    pub fn contains_scope(&self, other: &Scope) -> bool {
        other.vars().iter().all(|v| self.variable(v.name()) == Some(v))
    }

    pub fn union(&self, other: &Scope) -> Result<Scope> {
        let mut vars = self.0.vars.clone();
        for v in other.vars() {
            match self.variable(v.name()) {
                Some(w) if w == v => {}
                Some(_) => return Err(Error::scope(format!("variable `{}` has two domains", v.name()))),
                None => vars.push(v.clone()),
            }
        }
        Scope::new(vars)
    }

    pub fn intersection(&self, other: &Scope) -> Scope {
        Self::from_sorted(self.vars().iter().filter(|v| other.contains(v.name())).cloned().collect())
    }

    pub fn difference(&self, other: &Scope) -> Scope {
        Self::from_sorted(self.vars().iter().filter(|v| !other.contains(v.name())).cloned().collect())
    }

    pub fn without(&self, name: &str) -> Scope {
        Self::from_sorted(self.vars().iter().filter(|v| v.name() != name).cloned().collect())
    }

    /// Index of a configuration given per-variable value indices.
    pub fn encode(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.0.strides).map(|(v, s)| v * s).sum()
    }

    /// Per-variable value indices of configuration `index`.
    pub fn decode(&self, index: usize) -> Vec<usize> {
        self.0.vars.iter().zip(&self.0.strides).map(|(v, s)| (index / s) % v.size()).collect()
    }

    /// Value index of variable at `position` inside configuration `index`.
    pub fn digit(&self, index: usize, position: usize) -> usize {
        (index / self.0.strides[position]) % self.0.vars[position].size()
    }

    /// For each configuration of `self`, the index of its projection onto `sub`.
    pub fn projection_map(&self, sub: &Scope) -> Result<Vec<usize>> {
        if !self.contains_scope(sub) {
            return Err(Error::scope(format!("{sub} is not contained in {self}")));
        }
        let n = self.frame_size()?;
        let positions: Vec<usize> = sub.names().map(|name| self.position(name).unwrap()).collect();
        Ok((0..n).map(|i| positions.iter().zip(&sub.0.strides).map(|(&p, &s)| self.digit(i, p) * s).sum()).collect())
    }

    pub fn configuration(&self, index: usize) -> Configuration {
        Configuration { scope: self.clone(), values: self.decode(index) }
    }

    /// Parses labels given as `(name, value)` pairs covering every variable.
    pub fn index_of_labels<'a>(&self, labels: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<usize> {
        let mut values = vec![usize::MAX; self.len()];
        for (name, value) in labels {
            let pos = self.position(name).ok_or_else(|| Error::unknown_variable(name))?;
            if values[pos] != usize::MAX {
                return Err(Error::invalid(format!("variable `{name}` assigned twice")));
            }
            values[pos] = self.0.vars[pos].value_index(value)?;
        }
        if let Some(p) = values.iter().position(|&v| v == usize::MAX) {
            return Err(Error::invalid(format!("no value for variable `{}`", self.0.vars[p].name())));
        }
        Ok(self.encode(&values))
    }

    /// Renders a configuration as `t` (one variable) or `(t,f)`.
    pub fn render_config(&self, index: usize) -> String {
        let labels: Vec<&str> =
            self.decode(index).into_iter().zip(self.vars()).map(|(i, v)| v.domain()[i].as_str()).collect();
        if labels.len() == 1 {
            labels[0].to_string()
        } else {
            format!("({})", labels.join(","))
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.names().collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

impl fmt::Debug for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A point of a scope's frame.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Configuration {
    scope: Scope,
    values: Vec<usize>,
}

impl Configuration {
    pub fn new(scope: &Scope, values: Vec<usize>) -> Result<Self> {
        if values.len() != scope.len() {
            return Err(Error::scope("configuration length differs from scope"));
        }
        for (v, var) in values.iter().zip(scope.vars()) {
            if *v >= var.size() {
                return Err(Error::invalid(format!("value index {v} out of range for `{}`", var.name())));
            }
        }
        Ok(Configuration { scope: scope.clone(), values })
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn index(&self) -> usize {
        self.scope.encode(&self.values)
    }

    pub fn label(&self, name: &str) -> Option<&str> {
        let p = self.scope.position(name)?;
        Some(self.scope.vars()[p].domain()[self.values[p]].as_str())
    }

    /// Drops the components outside `sub`.
    pub fn project(&self, sub: &Scope) -> Result<Configuration> {
        if !self.scope.contains_scope(sub) {
            return Err(Error::scope(format!("{sub} is not contained in {}", self.scope)));
        }
        let values = sub.names().map(|n| self.values[self.scope.position(n).unwrap()]).collect();
        Ok(Configuration { scope: sub.clone(), values })
    }
}

/// A subset of a frame stored as a bitset over configuration indices.
///
/// Ordering compares sets as unsigned integers whose bit `i` is configuration `i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FrameSet {
    len: usize,
    words: Vec<u64>,
}

impl FrameSet {
    pub fn empty(len: usize) -> Self {
        FrameSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for w in &mut s.words {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn singleton(len: usize, index: usize) -> Self {
        let mut s = Self::empty(len);
        s.insert(index);
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Size of the underlying frame.
    pub fn frame_len(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "configuration {i} outside frame of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        FrameSet { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        FrameSet { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect() }
    }

    pub fn complement(&self) -> Self {
        let mut s = FrameSet { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        s.trim();
        s
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Image of the set under an index map into a frame of `len` configurations.
    pub fn map_through(&self, map: &[usize], len: usize) -> FrameSet {
        FrameSet::from_indices(len, self.iter().map(|i| map[i]))
    }

    /// Pre-image of the set under an index map defined on a frame of `map.len()` configurations.
    pub fn preimage(&self, map: &[usize]) -> FrameSet {
        FrameSet::from_indices(map.len(), (0..map.len()).filter(|&i| self.contains(map[i])))
    }
}

impl Ord for FrameSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len.cmp(&other.len).then_with(|| {
            for (a, b) in self.words.iter().rev().zip(other.words.iter().rev()) {
                match a.cmp(b) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for FrameSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FrameSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
