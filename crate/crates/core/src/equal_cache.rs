//! Equal cache sizes: MAN placement, XOR delivery and memory sharing between
//! the two integer points around a fractional `t = K M / N`.

use num::{One, Zero};

use crate::combinatorics::{binom_ratio, floor_usize, int, Rational, UserSet};
use crate::error::{Error, Result};
use crate::plan::{check_demand, xor_delivery, DeliveryPlan, Layer, LayerSpec, PieceIndex, PlacementMap, Share};

/// Derived parameters of the equal-cache scheme for `(N, K, M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EqualCacheParams {
    pub n: usize,
    pub k: usize,
    pub m: Rational,
    /// `K M / N`.
    pub t: Rational,
    pub t_int: usize,
    /// Fraction of each file handled at `t_int`; the rest runs at `t_int + 1`.
    pub alpha: Rational,
}

impl EqualCacheParams {
    pub fn beta(&self) -> Rational {
        Rational::one() - &self.alpha
    }

    pub fn is_integer(&self) -> bool {
        self.alpha.is_one()
    }

    /// Memory-sharing rate, in units of `F`.
    pub fn rate(&self) -> Rational {
        let t = self.t_int as i64;
        &self.alpha * binom_ratio(self.k, t + 1, self.k, t) + self.beta() * binom_ratio(self.k, t + 2, self.k, t + 1)
    }
}

fn check_cache(n: usize, m: &Rational) -> Result<()> {
    if m < &Rational::zero() || m > &int(n as i64) {
        return Err(Error::CacheOutOfRange { m: m.clone(), n });
    }
    Ok(())
}

/// Computes `t`, `t_int` and `alpha` for `N >= K >= 1`, `0 <= M <= N`.
pub fn equal_params(n: usize, k: usize, m: &Rational) -> Result<EqualCacheParams> {
    if n == 0 || k == 0 {
        return Err(Error::EmptySystem);
    }
    if k > n {
        return Err(Error::MoreUsersThanFiles { n, k });
    }
    check_cache(n, m)?;
    let t = m * int(k as i64) / int(n as i64);
    let t_int = floor_usize(&t);
    let alpha = int(t_int as i64 + 1) - &t;
    Ok(EqualCacheParams { n, k, m: m.clone(), t, t_int, alpha })
}

/// Worst-case rate of the equal-cache scheme, exact.
pub fn rate_eq(n: usize, k: usize, m: &Rational) -> Result<Rational> {
    Ok(equal_params(n, k, m)?.rate())
}

/// Single MAN layer over users `1..=K`: each file's layer is split into
/// `C(K, t)` subfiles, subfile `T` cached at the users in `T`.
///
/// The alpha layer starts at offset 0, the beta layer ends at offset 1.
pub fn man_placement(n: usize, k: usize, t: usize, layer: Layer, layer_fraction: &Rational) -> PlacementMap {
    assert!(t <= k, "t = {t} exceeds K = {k}");
    let per_user = int(n as i64) * layer_fraction * binom_ratio(k - 1, t as i64 - 1, k, t as i64);
    let mut pm = PlacementMap::empty(n, vec![per_user; k]);
    let start = match layer {
        Layer::Alpha => Rational::zero(),
        Layer::Beta => Rational::one() - layer_fraction,
    };
    pm.add_man_layer(LayerSpec {
        share: Share::Whole,
        layer,
        users: UserSet::range(1, k),
        t,
        start,
        width: layer_fraction.clone(),
    });
    pm.normalize();
    pm
}

/// Delivery for a placement built by [`man_placement`] with the same `t` and `layer`.
pub fn man_delivery(placement: &PlacementMap, demand: &[usize], t: usize, layer: Layer) -> Result<DeliveryPlan> {
    check_demand(demand, placement.files, placement.users)?;
    let mut plan = DeliveryPlan::new();
    for spec in placement.layers.iter().filter(|s| s.layer == layer && s.t == t) {
        let index = stage1_index(placement, spec.share, spec.layer);
        xor_delivery(&spec.users, spec.t + 1, demand, &index, |_| true, &mut plan);
    }
    Ok(plan)
}

/// Adds both memory-sharing layers of the `(N, |users|, M)` scheme on the file
/// window `[start, start + width)`.
pub(crate) fn add_equal_layers(
    pm: &mut PlacementMap,
    params: &EqualCacheParams,
    users: &UserSet,
    share: Share,
    start: &Rational,
    width: &Rational,
) {
    let alpha_width = width * &params.alpha;
    pm.add_man_layer(LayerSpec {
        share,
        layer: Layer::Alpha,
        users: users.clone(),
        t: params.t_int,
        start: start.clone(),
        width: alpha_width.clone(),
    });
    pm.add_man_layer(LayerSpec {
        share,
        layer: Layer::Beta,
        users: users.clone(),
        t: params.t_int + 1,
        start: start + &alpha_width,
        width: width - &alpha_width,
    });
}

/// Stage-1 subfiles of one share and layer, keyed by `(file, set)`.
pub(crate) fn stage1_index(pm: &PlacementMap, share: Share, layer: Layer) -> PieceIndex<'_> {
    let mut index = PieceIndex::new();
    for id in pm.subfiles.iter().filter(|s| s.share == share && s.layer == layer) {
        index.entry((id.file, id.stage1_set.clone())).or_default().push(id);
    }
    index
}

/// Stage-1 delivery for every layer of `pm`, skipping sets rejected by `keep`.
pub(crate) fn deliver_stage1(
    pm: &PlacementMap,
    demand: &[usize],
    keep: impl Fn(&LayerSpec, &UserSet) -> bool,
    plan: &mut DeliveryPlan,
) {
    for spec in &pm.layers {
        let index = stage1_index(pm, spec.share, spec.layer);
        xor_delivery(&spec.users, spec.t + 1, demand, &index, |s| keep(spec, s), plan);
    }
}

/// Memory-sharing placement for `(N, K, M)`.
pub fn equal_placement(n: usize, k: usize, m: &Rational) -> Result<PlacementMap> {
    let params = equal_params(n, k, m)?;
    let mut pm = PlacementMap::empty(n, vec![m.clone(); k]);
    add_equal_layers(&mut pm, &params, &UserSet::range(1, k), Share::Whole, &Rational::zero(), &Rational::one());
    pm.normalize();
    Ok(pm)
}

/// XOR delivery for every layer of an equal-cache placement.
pub fn equal_delivery(placement: &PlacementMap, demand: &[usize]) -> Result<DeliveryPlan> {
    check_demand(demand, placement.files, placement.users)?;
    let mut plan = DeliveryPlan::new();
    deliver_stage1(placement, demand, |_, _| true, &mut plan);
    Ok(plan)
}

/// Placement and delivery for demand `demand`; the load equals [`rate_eq`].
pub fn equal_scheme(n: usize, k: usize, m: &Rational, demand: &[usize]) -> Result<(PlacementMap, DeliveryPlan)> {
    let placement = equal_placement(n, k, m)?;
    let plan = equal_delivery(&placement, demand)?;
    Ok((placement, plan))
}
