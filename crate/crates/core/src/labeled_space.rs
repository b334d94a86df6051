//! Vectors whose components are keyed by labels, and the distance,
//! projection and shadow-distance calculus over them.
//!
//! Two vectors with different label sets are compared only on the labels
//! they share. Sets live in a labeled space of their own; projecting onto a
//! set whose labels are not all present in the point leaves the missing
//! coordinates free, so [`TargetSet::project`] returns one canonical member:
//! free coordinates take the feasible value closest to zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance for claims that should hold up to rounding.
pub const EXACT_TOL: f64 = 1e-12;
/// Absolute tolerance for chained computations (sums over many edges).
pub const CHAINED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Agent(u64),
    /// Ordered agent pair `(i, j)`.
    Edge(u64, u64),
    AgentCoord(u64, usize),
    EdgeCoord(u64, u64, usize),
    Name(String),
}

impl Label {
    pub fn name(s: impl Into<String>) -> Self {
        Label::Name(s.into())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Agent(i) => write!(f, "{i}"),
            Label::Edge(i, j) => write!(f, "({i},{j})"),
            Label::AgentCoord(i, l) => write!(f, "{i}:{l}"),
            Label::EdgeCoord(i, j, l) => write!(f, "({i},{j}):{l}"),
            Label::Name(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Name(s.to_owned())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet(BTreeSet<Label>);

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.0.contains(label)
    }

    pub fn insert(&mut self, label: Label) -> bool {
        self.0.insert(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Label> {
        self.0.iter()
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.union(&other.0).cloned().collect())
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<T: IntoIterator<Item = Label>>(iter: T) -> Self {
        LabelSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledVector {
    entries: BTreeMap<Label, f64>,
}

impl LabeledVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector, rejecting non-finite values. Later duplicates win.
    pub fn from_entries<L: Into<Label>>(entries: impl IntoIterator<Item = (L, f64)>) -> Result<Self> {
        let mut out = Self::new();
        for (label, value) in entries {
            out.set(label.into(), value)?;
        }
        Ok(out)
    }

    pub fn set(&mut self, label: Label, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(label.to_string()));
        }
        self.entries.insert(label, value);
        Ok(())
    }

    pub fn get(&self, label: &Label) -> Option<f64> {
        self.entries.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> LabelSet {
        self.entries.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, f64)> {
        self.entries.iter().map(|(l, v)| (l, *v))
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Restriction to the labels in `labels` that are present.
    pub fn restrict(&self, labels: &LabelSet) -> LabeledVector {
        LabeledVector {
            entries: self.entries.iter().filter(|(l, _)| labels.contains(l)).map(|(l, v)| (l.clone(), *v)).collect(),
        }
    }
}

/// Euclidean distance over the common labels; zero when none are shared.
pub fn open_distance(x: &LabeledVector, y: &LabeledVector) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    small.entries.iter().filter_map(|(l, a)| large.entries.get(l).map(|b| (a - b) * (a - b))).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn point(v: f64) -> Result<Self> {
        Self::new(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Axis-aligned box over a label set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledBox {
    bounds: BTreeMap<Label, Interval>,
}

impl LabeledBox {
    pub fn new<L: Into<Label>>(bounds: impl IntoIterator<Item = (L, Interval)>) -> Self {
        Self { bounds: bounds.into_iter().map(|(l, i)| (l.into(), i)).collect() }
    }

    pub fn labels(&self) -> LabelSet {
        self.bounds.keys().cloned().collect()
    }

    pub fn get(&self, label: &Label) -> Option<Interval> {
        self.bounds.get(label).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, Interval)> {
        self.bounds.iter().map(|(l, i)| (l, *i))
    }
}

/// One constraint `x[a] + x[b] = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePair {
    pub a: Label,
    pub b: Label,
    pub target: f64,
}

/// Product of per-pair affine constraints `x[a] + x[b] = t`, each label used
/// by exactly one pair. With ordered-edge labels this is the set of edge
/// states whose two directions sum to a prescribed value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineEdgeSet {
    pairs: Vec<AffinePair>,
    index: BTreeMap<Label, usize>,
}

impl AffineEdgeSet {
    pub fn new(pairs: impl IntoIterator<Item = AffinePair>) -> Result<Self> {
        let mut out = Self::default();
        for pair in pairs {
            if pair.a == pair.b || out.index.contains_key(&pair.a) || out.index.contains_key(&pair.b) {
                return Err(Error::DegenerateAffinePair(pair.a.to_string(), pair.b.to_string()));
            }
            if !pair.target.is_finite() {
                return Err(Error::NonFinite(pair.a.to_string()));
            }
            let idx = out.pairs.len();
            out.index.insert(pair.a.clone(), idx);
            out.index.insert(pair.b.clone(), idx);
            out.pairs.push(pair);
        }
        Ok(out)
    }

    pub fn pairs(&self) -> &[AffinePair] {
        &self.pairs
    }

    pub fn labels(&self) -> LabelSet {
        self.index.keys().cloned().collect()
    }

    /// Same unordered pairing of the same labels.
    fn same_structure(&self, other: &AffineEdgeSet) -> bool {
        self.pairs.len() == other.pairs.len()
            && self.pairs.iter().all(|p| {
                other.index.get(&p.a).is_some_and(|&k| {
                    let q = &other.pairs[k];
                    (q.a == p.a && q.b == p.b) || (q.a == p.b && q.b == p.a)
                })
            })
    }

    fn target_of(&self, label: &Label) -> Option<f64> {
        self.index.get(label).map(|&k| self.pairs[k].target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    Box(LabeledBox),
    Affine(AffineEdgeSet),
}

impl From<LabeledBox> for TargetSet {
    fn from(b: LabeledBox) -> Self {
        TargetSet::Box(b)
    }
}

impl From<AffineEdgeSet> for TargetSet {
    fn from(a: AffineEdgeSet) -> Self {
        TargetSet::Affine(a)
    }
}

impl TargetSet {
    pub fn labels(&self) -> LabelSet {
        match self {
            TargetSet::Box(b) => b.labels(),
            TargetSet::Affine(a) => a.labels(),
        }
    }

    /// A set over no labels carries no constraint to measure against and is
    /// reported as empty.
    pub fn is_empty(&self) -> bool {
        match self {
            TargetSet::Box(b) => b.bounds.is_empty(),
            TargetSet::Affine(a) => a.pairs.is_empty(),
        }
    }

    /// `inf` over members of the open distance to `x`.
    pub fn distance(&self, x: &LabeledVector) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        let sq: f64 = match self {
            TargetSet::Box(b) => {
                b.bounds.iter().filter_map(|(l, iv)| x.get(l).map(|v| (v - iv.clamp(v)).powi(2))).sum()
            }
            TargetSet::Affine(a) => a
                .pairs
                .iter()
                .filter_map(|p| match (x.get(&p.a), x.get(&p.b)) {
                    (Some(u), Some(v)) => Some((u + v - p.target).powi(2) / 2.0),
                    _ => None,
                })
                .sum(),
        };
        Ok(sq.sqrt())
    }

    /// Canonical member of the projection of `x`, over this set's labels.
    pub fn project(&self, x: &LabeledVector) -> Result<LabeledVector> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut out = BTreeMap::new();
        match self {
            TargetSet::Box(b) => {
                for (l, iv) in &b.bounds {
                    out.insert(l.clone(), iv.clamp(x.get(l).unwrap_or(0.0)));
                }
            }
            TargetSet::Affine(a) => {
                for p in &a.pairs {
                    let (u, v) = match (x.get(&p.a), x.get(&p.b)) {
                        (Some(u), Some(v)) => {
                            // A pair can land a few ulps off the constraint;
                            // treating that as membership keeps projection
                            // idempotent.
                            let shift = (u + v - p.target) / 2.0;
                            let scale = u.abs().max(v.abs()).max(p.target.abs());
                            if shift.abs() <= 4.0 * f64::EPSILON * scale {
                                (u, v)
                            } else {
                                let a = u - shift;
                                (a, p.target - a)
                            }
                        }
                        (Some(u), None) => (u, p.target - u),
                        (None, Some(v)) => (p.target - v, v),
                        (None, None) => (p.target / 2.0, p.target / 2.0),
                    };
                    out.insert(p.a.clone(), u);
                    out.insert(p.b.clone(), v);
                }
            }
        }
        Ok(LabeledVector { entries: out })
    }
}

/// Shadow distance value, flagged with whether it was computed in closed form
/// or estimated from random probes (in which case it is a lower bound).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shadow {
    pub value: f64,
    pub exact: bool,
}

/// `sup_z d(proj(z, X), proj(z, Y))`.
///
/// Closed form for two boxes over the same labels and for two affine sets
/// with the same pairing. Any other combination samples `probes` random
/// points over the union of labels.
pub fn shadow_distance<R: Rng + ?Sized>(
    x_set: &TargetSet,
    y_set: &TargetSet,
    probes: usize,
    rng: &mut R,
) -> Result<Shadow> {
    if x_set.is_empty() || y_set.is_empty() {
        return Err(Error::EmptySet);
    }
    match (x_set, y_set) {
        (TargetSet::Box(bx), TargetSet::Box(by)) if bx.labels() == by.labels() => {
            let sq: f64 = bx.bounds.iter().map(|(l, ix)| interval_shadow(*ix, by.bounds[l]).powi(2)).sum();
            Ok(Shadow { value: sq.sqrt(), exact: true })
        }
        (TargetSet::Affine(ax), TargetSet::Affine(ay)) if ax.same_structure(ay) => {
            // Projections of any z differ by (t - t')/2 on both labels of a pair.
            let sq: f64 = ax
                .pairs
                .iter()
                .map(|p| {
                    let d = p.target - ay.target_of(&p.a).expect("same structure");
                    d * d / 2.0
                })
                .sum();
            Ok(Shadow { value: sq.sqrt(), exact: true })
        }
        _ => {
            let labels = x_set.labels().union(&y_set.labels());
            let scale = 2.0 * (1.0 + x_set.magnitude().max(y_set.magnitude()));
            let mut best = 0.0f64;
            for _ in 0..probes {
                let z = LabeledVector {
                    entries: labels.iter().map(|l| (l.clone(), rng.gen_range(-scale..=scale))).collect(),
                };
                let d = open_distance(&x_set.project(&z)?, &y_set.project(&z)?);
                best = best.max(d);
            }
            Ok(Shadow { value: best, exact: false })
        }
    }
}

impl TargetSet {
    /// Largest finite bound or target, used to size the probe region.
    fn magnitude(&self) -> f64 {
        match self {
            TargetSet::Box(b) => b
                .bounds
                .values()
                .flat_map(|iv| [iv.lo, iv.hi])
                .filter(|v| v.is_finite())
                .fold(0.0, |m, v| m.max(v.abs())),
            TargetSet::Affine(a) => a.pairs.iter().fold(0.0, |m, p| m.max(p.target.abs())),
        }
    }
}

/// `sup_z |clamp_x(z) - clamp_y(z)|` for scalar intervals. The difference is
/// piecewise linear in `z` with breakpoints at the endpoints, so the sup is at
/// a finite endpoint or in one of the two tails.
fn interval_shadow(x: Interval, y: Interval) -> f64 {
    let tail = |a: f64, b: f64| match (a.is_finite(), b.is_finite()) {
        (true, true) => (a - b).abs(),
        (false, false) => 0.0,
        _ => f64::INFINITY,
    };
    let mut best = tail(x.lo, y.lo).max(tail(x.hi, y.hi));
    for z in [x.lo, x.hi, y.lo, y.hi] {
        if z.is_finite() {
            best = best.max((x.clamp(z) - y.clamp(z)).abs());
        }
    }
    best
}
