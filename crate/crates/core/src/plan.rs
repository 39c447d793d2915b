//! Placement and delivery data structures shared by the schemes and the simulator.
//!
//! All positions and lengths are exact fractions of the file size `F`. A file
//! occupies `[0, 1)`; every subfile is a contiguous range of it.

use std::collections::HashMap;
use std::fmt;

use num::Zero;

use crate::combinatorics::{enumerate_subsets, Rational, UserSet};
use crate::error::{Error, Result};

/// Memory-sharing layer: the first `alpha F` bits or the last `(1 - alpha) F` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Alpha,
    Beta,
}

/// Which part of a file a subfile belongs to when the two-level scheme
/// splits files between two sub-systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Share {
    /// No split.
    Whole,
    /// The `gamma` fraction handled with large caches of size `Phi`.
    Gamma,
    /// The `1 - gamma` fraction stored entirely at the large-cache users.
    Rest,
}

/// Second-stage placement of a piece of a stage-1 subfile.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Refinement {
    /// Memory-sharing layer of the second-level scheme the piece belongs to.
    pub layer: Layer,
    /// Every user caching the piece; a superset of the stage-1 set.
    pub holders: UserSet,
}

/// A labelled, contiguous part of one file.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubfileId {
    /// 1-based file index.
    pub file: usize,
    pub share: Share,
    pub layer: Layer,
    pub stage1_set: UserSet,
    pub refinement: Option<Refinement>,
    /// Offset inside the file, as a fraction of `F`.
    pub start: Rational,
    pub length: Rational,
}

impl SubfileId {
    /// Users caching this exact range.
    pub fn holders(&self) -> &UserSet {
        match &self.refinement {
            Some(r) => &r.holders,
            None => &self.stage1_set,
        }
    }

    /// Users that received this range during refinement.
    pub fn added_users(&self) -> UserSet {
        self.holders().difference(&self.stage1_set)
    }

    /// The single extra user of a one-step refinement `T -> T ∪ {j}`.
    pub fn extra_user(&self) -> Option<usize> {
        let added = self.added_users();
        (added.len() == 1).then(|| added.members()[0])
    }

    pub fn end(&self) -> Rational {
        &self.start + &self.length
    }
}

/// File names `A`, `B`, ... for small examples, `W12` beyond 26 files.
pub fn file_name(file: usize) -> String {
    if (1..=26).contains(&file) {
        char::from(b'A' + (file - 1) as u8).to_string()
    } else {
        format!("W{file}")
    }
}

impl fmt::Display for SubfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layer = match self.layer {
            Layer::Alpha => "a",
            Layer::Beta => "b",
        };
        let share = match self.share {
            Share::Whole => "",
            Share::Gamma => "g:",
            Share::Rest => "r:",
        };
        write!(f, "{}[{share}{layer}]{}", file_name(self.file), self.stage1_set)?;
        if let Some(r) = &self.refinement {
            write!(f, "->{}", r.holders)?;
        }
        write!(f, "@{}+{}", self.start, self.length)
    }
}

/// One MAN layer of a placement: subfiles of every file inside `[start, start + width)`
/// are indexed by the `t`-subsets of `users`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub share: Share,
    pub layer: Layer,
    pub users: UserSet,
    pub t: usize,
    pub start: Rational,
    pub width: Rational,
}

/// One layer of the second-level scheme run over refined pieces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondLevelSpec {
    pub share: Share,
    pub layer: Layer,
    pub users: UserSet,
    /// Holder-set size of the pieces in this layer.
    pub t: usize,
}

/// Complete uncoded placement.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementMap {
    pub files: usize,
    pub users: usize,
    /// Cache size of each user in units of `F` (index 0 is user 1).
    pub budgets: Vec<Rational>,
    /// Stage-1 partition of every file.
    pub subfiles: Vec<SubfileId>,
    /// Finer pieces of refined stage-1 subfiles; each refined subfile is covered exactly.
    pub refined: Vec<SubfileId>,
    /// Contents of each user's cache (index 0 is user 1).
    pub caches: Vec<Vec<SubfileId>>,
    pub layers: Vec<LayerSpec>,
    pub second_level: Vec<SecondLevelSpec>,
}

impl PlacementMap {
    pub(crate) fn empty(files: usize, budgets: Vec<Rational>) -> Self {
        PlacementMap {
            files,
            users: budgets.len(),
            caches: vec![Vec::new(); budgets.len()],
            budgets,
            subfiles: Vec::new(),
            refined: Vec::new(),
            layers: Vec::new(),
            second_level: Vec::new(),
        }
    }

    /// Cache content of `user` (1-based).
    pub fn cache(&self, user: usize) -> &[SubfileId] {
        &self.caches[user - 1]
    }

    /// Total cached length of `user`, in units of `F`.
    pub fn cached_length(&self, user: usize) -> Rational {
        self.cache(user).iter().map(|s| &s.length).sum()
    }

    /// Cached length of `user` restricted to one file.
    pub fn footprint(&self, user: usize, file: usize) -> Rational {
        self.cache(user).iter().filter(|s| s.file == file).map(|s| &s.length).sum()
    }

    /// Every position and length that must land on a whole bit.
    pub fn boundaries(&self) -> impl Iterator<Item = &Rational> {
        self.subfiles.iter().chain(self.refined.iter()).flat_map(|s| [&s.start, &s.length])
    }

    /// Inserts a layer of stage-1 subfiles and places each at its owner set.
    pub(crate) fn add_man_layer(&mut self, spec: LayerSpec) {
        if spec.width.is_zero() {
            return;
        }
        let sets = enumerate_subsets(&spec.users, spec.t);
        if sets.is_empty() {
            return;
        }
        let piece = &spec.width / Rational::from_integer((sets.len() as i64).into());
        for file in 1..=self.files {
            for (i, set) in sets.iter().enumerate() {
                let start = &spec.start + &piece * Rational::from_integer((i as i64).into());
                let id = SubfileId {
                    file,
                    share: spec.share,
                    layer: spec.layer,
                    stage1_set: set.clone(),
                    refinement: None,
                    start,
                    length: piece.clone(),
                };
                for user in set.iter() {
                    self.caches[user - 1].push(id.clone());
                }
                self.subfiles.push(id);
            }
        }
        self.layers.push(spec);
    }

    /// Sorts every cache into canonical order.
    pub(crate) fn normalize(&mut self) {
        for cache in &mut self.caches {
            cache.sort_by(|a, b| (a.file, &a.start).cmp(&(b.file, &b.start)));
        }
    }
}

/// Range `[start, start + length)` of the file labelled by `id`; a sub-range of `id`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment {
    pub id: SubfileId,
    pub start: Rational,
    pub length: Rational,
}

impl Segment {
    pub fn whole(id: &SubfileId) -> Self {
        Segment { id: id.clone(), start: id.start.clone(), length: id.length.clone() }
    }

    pub fn file(&self) -> usize {
        self.id.file
    }
}

/// One part of an XOR: `segment` is intended for `target`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TxPart {
    pub segment: Segment,
    pub target: usize,
}

/// Bitwise XOR of equal-length segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub parts: Vec<TxPart>,
}

impl Transmission {
    pub fn length(&self) -> Rational {
        self.parts.first().map(|p| p.segment.length.clone()).unwrap_or_else(Rational::zero)
    }

    pub fn targets(&self) -> UserSet {
        self.parts.iter().map(|p| p.target).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeliveryPlan {
    pub transmissions: Vec<Transmission>,
    /// Sum of transmission lengths, in units of `F`.
    pub total_load: Rational,
}

impl DeliveryPlan {
    pub fn new() -> Self {
        DeliveryPlan { transmissions: Vec::new(), total_load: Rational::zero() }
    }

    pub fn push(&mut self, tx: Transmission) {
        self.total_load += tx.length();
        self.transmissions.push(tx);
    }

    pub fn extend(&mut self, other: DeliveryPlan) {
        for tx in other.transmissions {
            self.push(tx);
        }
    }

    pub fn len(&self) -> usize {
        self.transmissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmissions.is_empty()
    }

    /// Checks that every transmission XORs equal-length segments.
    pub fn check_lengths(&self) -> Result<()> {
        for (index, tx) in self.transmissions.iter().enumerate() {
            let len = tx.length();
            if tx.parts.iter().any(|p| p.segment.length != len) {
                return Err(Error::UnequalSegments { index });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_demand(demand: &[usize], files: usize, users: usize) -> Result<()> {
    if demand.len() != users {
        return Err(Error::DemandLength { got: demand.len(), expected: users });
    }
    for (i, &file) in demand.iter().enumerate() {
        if file == 0 || file > files {
            return Err(Error::DemandOutOfRange { user: i + 1, file, n: files });
        }
    }
    Ok(())
}

/// Index from `(file, set)` to the ordered pieces labelled by that set.
pub(crate) type PieceIndex<'a> = HashMap<(usize, UserSet), Vec<&'a SubfileId>>;

/// Emits `XOR_{s in S} V(d_s, S \ s)` for every `S` of size `set_size` in `universe`
/// accepted by `keep`, where `V` concatenates the pieces in `index`.
///
/// Components are cut at the union of their piece boundaries so that every
/// emitted transmission XORs single contiguous segments of equal length.
pub(crate) fn xor_delivery(
    universe: &UserSet,
    set_size: usize,
    demand: &[usize],
    index: &PieceIndex<'_>,
    keep: impl Fn(&UserSet) -> bool,
    plan: &mut DeliveryPlan,
) {
    for set in enumerate_subsets(universe, set_size) {
        if !keep(&set) {
            continue;
        }
        let components: Vec<(usize, &[&SubfileId])> = set
            .iter()
            .map(|s| {
                let key = (demand[s - 1], set.without(s));
                let pieces = index.get(&key).map(|v| v.as_slice()).unwrap_or(&[]);
                (s, pieces)
            })
            .collect();
        for tx in split_components(&components) {
            plan.push(tx);
        }
    }
}

fn split_components(components: &[(usize, &[&SubfileId])]) -> Vec<Transmission> {
    let total = |pieces: &[&SubfileId]| -> Rational { pieces.iter().map(|p| &p.length).sum() };
    let length = components.first().map(|(_, p)| total(p)).unwrap_or_else(Rational::zero);
    assert!(components.iter().all(|(_, p)| total(p) == length), "XOR components of unequal total length");
    if length.is_zero() {
        return Vec::new();
    }
    let mut cuts: Vec<Rational> = Vec::new();
    for (_, pieces) in components {
        let mut acc = Rational::zero();
        for p in pieces.iter() {
            acc += &p.length;
            cuts.push(acc.clone());
        }
    }
    cuts.sort();
    cuts.dedup();

    let mut out = Vec::with_capacity(cuts.len());
    let mut lo = Rational::zero();
    for hi in cuts {
        let parts = components
            .iter()
            .map(|(target, pieces)| TxPart { segment: slice(pieces, &lo, &hi), target: *target })
            .collect();
        out.push(Transmission { parts });
        lo = hi;
    }
    out
}

/// Range `[lo, hi)` of the concatenation of `pieces`; must fall inside a single piece.
fn slice(pieces: &[&SubfileId], lo: &Rational, hi: &Rational) -> Segment {
    let mut acc = Rational::zero();
    for p in pieces {
        let end = &acc + &p.length;
        if lo < &end {
            debug_assert!(hi <= &end);
            return Segment { id: (*p).clone(), start: &p.start + (lo - &acc), length: hi - lo };
        }
        acc = end;
    }
    unreachable!("cut beyond component length")
}
