//! Incremental placement: grow every cache in a user pool without touching
//! bits that are already placed, so that the result is again an equal-cache
//! placement for the larger cache size.
//!
//! Each pooled subfile cached at `T` is cut into pieces and each piece is
//! handed to a superset `T* ⊇ T`. Pieces sharing the same `T*` form one
//! subfile of the larger scheme. For the integer step `t -> t + 1` this is
//! the split of `W_T` into `K - t` equal parts, part `j` going to user `j`.
//!
//! For fractional targets the pool's mass per holder-set size is moved to the
//! target sizes `t'_int` and `t'_int + 1` with the monotone (quantile)
//! coupling: smallest sets are filled first. Inside one size the mass is split
//! evenly over all admissible supersets, which keeps every target subfile of
//! a given size at the same total length.

use std::collections::{BTreeMap, HashSet};

use num::{One, Zero};

use crate::combinatorics::{binom_q, enumerate_supersets, floor_usize, int, Rational, UserSet};
use crate::equal_cache::EqualCacheParams;
use crate::error::{Error, Result};
use crate::plan::{Layer, PlacementMap, Refinement, SecondLevelSpec, Share, SubfileId};

/// Memory-sharing point of the enlarged placement, in holder-set sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefineTarget {
    pub t_int: usize,
    /// Share of the pooled mass at size `t_int`; the rest sits at `t_int + 1`.
    pub alpha: Rational,
}

impl RefineTarget {
    pub fn integer(t: usize) -> Self {
        RefineTarget { t_int: t, alpha: Rational::one() }
    }

    /// `t_int = floor(t)`, `alpha = t_int + 1 - t`.
    pub fn from_t(t: &Rational) -> Self {
        let t_int = floor_usize(t);
        RefineTarget { t_int, alpha: int(t_int as i64 + 1) - t }
    }

    pub fn from_params(params: &EqualCacheParams) -> Self {
        RefineTarget { t_int: params.t_int, alpha: params.alpha.clone() }
    }

    fn mean(&self) -> Rational {
        int(self.t_int as i64) + Rational::one() - &self.alpha
    }
}

/// Splits every subfile `W_T` of a `man_placement(N, K, t)` into `K - t`
/// parts `W_{T,j}`, `j ∉ T`, and adds part `j` to user `j`'s cache.
pub fn refine_placement(placement: &PlacementMap, n: usize, k: usize, t: usize) -> Result<PlacementMap> {
    if t >= k {
        return Err(Error::NothingToRefine(t));
    }
    let mut pm = placement.clone();
    refine_pool(&mut pm, &UserSet::range(1, k), Share::Whole, n, &RefineTarget::integer(t + 1))?;
    Ok(pm)
}

/// Treats the subfiles cached only inside `pool` as one file per library file
/// and enlarges the pool's placement to the `target` memory-sharing point.
pub fn refine_placement_restricted(
    placement: &PlacementMap,
    pool: &UserSet,
    n: usize,
    target: &RefineTarget,
) -> Result<PlacementMap> {
    let mut pm = placement.clone();
    refine_pool(&mut pm, pool, Share::Whole, n, target)?;
    Ok(pm)
}

/// In-place refinement of the `share` subfiles whose stage-1 set lies in `pool`.
///
/// Returns the pooled length per file (`F'`).
pub(crate) fn refine_pool(
    pm: &mut PlacementMap,
    pool: &UserSet,
    share: Share,
    n: usize,
    target: &RefineTarget,
) -> Result<Rational> {
    let pooled: Vec<SubfileId> = pm
        .subfiles
        .iter()
        .filter(|s| s.share == share && s.refinement.is_none() && s.stage1_set.is_subset(pool))
        .cloned()
        .collect();

    // Mass per holder-set size, measured on file 1; every file is laid out alike.
    let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
    for s in pooled.iter().filter(|s| s.file == 1) {
        *mass.entry(s.stage1_set.len()).or_insert_with(Rational::zero) += &s.length;
    }
    let pooled_len: Rational = mass.values().sum();
    if pooled_len.is_zero() {
        return Ok(pooled_len);
    }

    let current_mean: Rational = mass.iter().map(|(s, m)| int(*s as i64) * m).sum::<Rational>() / &pooled_len;
    let target_mean = target.mean();
    let pool_size = int(pool.len() as i64);
    if target_mean < current_mean || target_mean > pool_size {
        let to_cache = |mean: &Rational| mean * int(n as i64) / &pool_size;
        return Err(Error::CannotShrink {
            target: Box::new(to_cache(&target_mean)),
            current: Box::new(to_cache(&current_mean)),
        });
    }

    let mut demand_at: Vec<(usize, Rational)> = vec![(target.t_int, &target.alpha * &pooled_len)];
    let upper = (Rational::one() - &target.alpha) * &pooled_len;
    if !upper.is_zero() {
        demand_at.push((target.t_int + 1, upper));
    }
    let flows = quantile_coupling(&mass, &demand_at)?;

    let layer_of = |size: usize| if size == target.t_int { Layer::Alpha } else { Layer::Beta };
    for piece in &pooled {
        let s = piece.stage1_set.len();
        let mut cursor = piece.start.clone();
        for (&(from, to), flow) in flows.range((s, 0)..(s + 1, 0)) {
            debug_assert_eq!(from, s);
            let supersets = enumerate_supersets(pool, &piece.stage1_set, to);
            let share_of_piece = &piece.length * flow / &mass[&s];
            let each = share_of_piece / binom_q(pool.len() - s, (to - s) as i64);
            for holders in supersets {
                let id = SubfileId {
                    refinement: Some(Refinement { layer: layer_of(to), holders: holders.clone() }),
                    start: cursor.clone(),
                    length: each.clone(),
                    ..piece.clone()
                };
                cursor += &each;
                for user in holders.difference(&piece.stage1_set).iter() {
                    pm.budgets[user - 1] += &id.length;
                    pm.caches[user - 1].push(id.clone());
                }
                pm.refined.push(id);
            }
        }
        debug_assert_eq!(cursor, piece.end());
    }

    for (size, _) in &demand_at {
        pm.second_level.push(SecondLevelSpec { share, layer: layer_of(*size), users: pool.clone(), t: *size });
    }
    pm.normalize();
    Ok(pooled_len)
}

/// Northwest-corner transport from source sizes to target sizes.
///
/// Mass only moves to sizes at least as large; fails if that is impossible.
fn quantile_coupling(
    sources: &BTreeMap<usize, Rational>,
    targets: &[(usize, Rational)],
) -> Result<BTreeMap<(usize, usize), Rational>> {
    let mut flows = BTreeMap::new();
    let mut targets: Vec<(usize, Rational)> = targets.to_vec();
    let mut j = 0;
    for (&from, amount) in sources {
        let mut left = amount.clone();
        while !left.is_zero() {
            let (to, room) = targets.get_mut(j).expect("target mass covers source mass");
            if *to < from {
                return Err(Error::CannotShrink {
                    target: Box::new(int(*to as i64)),
                    current: Box::new(int(from as i64)),
                });
            }
            let moved = if &left < room { left.clone() } else { room.clone() };
            *room -= &moved;
            left -= &moved;
            if !moved.is_zero() {
                *flows.entry((from, *to)).or_insert_with(Rational::zero) += moved;
            }
            if room.is_zero() {
                j += 1;
            }
        }
    }
    Ok(flows)
}

/// Groups refined pieces by holder set: `(file, T') -> total length`.
///
/// Stage-1 subfiles that were never refined count under their own set.
pub fn merged_view(pm: &PlacementMap) -> BTreeMap<(usize, UserSet), Rational> {
    let parent = |s: &SubfileId| (s.file, s.share, s.layer, s.stage1_set.clone());
    let refined: HashSet<_> = pm.refined.iter().map(parent).collect();
    let mut out: BTreeMap<(usize, UserSet), Rational> = BTreeMap::new();
    let whole = pm.subfiles.iter().filter(|s| !refined.contains(&parent(s)));
    for s in whole.chain(pm.refined.iter()) {
        *out.entry((s.file, s.holders().clone())).or_insert_with(Rational::zero) += &s.length;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::rat;
    use crate::equal_cache::{equal_params, equal_placement, man_placement};

    fn label(pm: &PlacementMap, user: usize) -> Vec<(usize, UserSet, UserSet, Rational)> {
        pm.cache(user).iter().map(|s| (s.file, s.stage1_set.clone(), s.holders().clone(), s.length.clone())).collect()
    }

    #[test]
    fn integer_step_splits_into_k_minus_t_parts() {
        let base = man_placement(4, 4, 1, Layer::Alpha, &int(1));
        let pm = refine_placement(&base, 4, 4, 1).unwrap();
        let parts: Vec<_> = pm.refined.iter().filter(|p| p.file == 1 && p.stage1_set == UserSet::new([1])).collect();
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|p| p.length == rat(1, 12)));
        assert_eq!(parts.iter().map(|p| p.extra_user().unwrap()).collect::<Vec<_>>(), vec![2, 3, 4]);
        for user in 1..=4 {
            assert_eq!(pm.cached_length(user), int(2));
        }
    }

    #[test]
    fn last_step_has_single_part() {
        let base = man_placement(3, 3, 2, Layer::Alpha, &int(1));
        let pm = refine_placement(&base, 3, 3, 2).unwrap();
        assert_eq!(pm.refined.len(), pm.subfiles.len());
        assert_eq!(refine_placement(&base, 3, 3, 3), Err(Error::NothingToRefine(3)));
    }

    #[test]
    fn merge_reproduces_next_placement() {
        let base = man_placement(3, 3, 1, Layer::Alpha, &int(1));
        let refined = refine_placement(&base, 3, 3, 1).unwrap();
        let direct = man_placement(3, 3, 2, Layer::Alpha, &int(1));
        let want: BTreeMap<_, _> =
            direct.subfiles.iter().map(|s| ((s.file, s.stage1_set.clone()), s.length.clone())).collect();
        assert_eq!(merged_view(&refined), want);
    }

    #[test]
    fn restricted_worked_example() {
        // Pool {1,2,3} inside a 4-user t = 1 placement; target t' = 2 over three users.
        let base = equal_placement(4, 4, &int(1)).unwrap();
        let pm = refine_placement_restricted(&base, &UserSet::range(1, 3), 4, &RefineTarget::integer(2)).unwrap();
        let pieces: Vec<_> = pm
            .refined
            .iter()
            .filter(|p| p.file == 1)
            .map(|p| (p.stage1_set.clone(), p.holders().clone(), p.length.clone()))
            .collect();
        let s = |v: &[usize]| UserSet::new(v.iter().copied());
        assert_eq!(
            pieces,
            vec![
                (s(&[1]), s(&[1, 2]), rat(1, 8)),
                (s(&[1]), s(&[1, 3]), rat(1, 8)),
                (s(&[2]), s(&[1, 2]), rat(1, 8)),
                (s(&[2]), s(&[2, 3]), rat(1, 8)),
                (s(&[3]), s(&[1, 3]), rat(1, 8)),
                (s(&[3]), s(&[2, 3]), rat(1, 8)),
            ]
        );
        for user in 1..=3 {
            assert_eq!(pm.cached_length(user), int(2));
        }
        assert_eq!(pm.cached_length(4), int(1));
    }

    #[test]
    fn unchanged_when_target_equals_current() {
        let base = equal_placement(6, 4, &rat(3, 2)).unwrap();
        let pool = UserSet::range(1, 2);
        // t = 1: the alpha pieces inside {1,2} sit at size 1 and the beta pieces at size 2.
        let p = equal_params(6, 4, &rat(3, 2)).unwrap();
        let a = &p.alpha * rat(2, 4);
        let b = p.beta() * rat(1, 6);
        let mean = (a.clone() + int(2) * &b) / (a.clone() + &b);
        let target = RefineTarget { t_int: 1, alpha: int(2) - mean };
        let pm = refine_placement_restricted(&base, &pool, 6, &target).unwrap();
        for user in 1..=4 {
            assert_eq!(label(&pm, user).len(), label(&base, user).len());
            assert_eq!(pm.cached_length(user), base.cached_length(user));
        }
        assert!(pm.refined.iter().all(|p| p.added_users().is_empty()));
    }

    #[test]
    fn cannot_shrink() {
        let base = equal_placement(4, 4, &int(2)).unwrap();
        let err = refine_placement_restricted(&base, &UserSet::range(1, 3), 4, &RefineTarget::integer(1));
        assert!(matches!(err, Err(Error::CannotShrink { .. })));
    }

    #[test]
    fn non_destructive() {
        let base = equal_placement(5, 4, &rat(7, 4)).unwrap();
        let pm =
            refine_placement_restricted(&base, &UserSet::range(1, 3), 5, &RefineTarget { t_int: 2, alpha: rat(1, 3) })
                .unwrap();
        for user in 1..=4 {
            for id in base.cache(user) {
                assert!(pm.cache(user).contains(id));
            }
        }
    }
}
