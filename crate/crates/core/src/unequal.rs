//! Two cache levels: the first `L` users hold `M̂ F` bits, the others `M F`.
//!
//! Stage 1 places the equal-cache scheme for `(N, K, M)` and ignores the extra
//! memory. Stage 2 pools, per file, the stage-1 subfiles cached only inside
//! the large-cache group `𝓛` (length `F'`) and grows that pool into the
//! equal-cache placement for `(N, L, M')` without moving any stage-1 bit.
//! Delivery keeps every stage-1 transmission that involves a small-cache user
//! and replaces the ones serving only `𝓛` by the second-level delivery.
//!
//! When `M' > N` the scheme shares memory between `M̂ = Phi` (where `M' = N`)
//! and `M̂ = N` (where the large-cache users store everything and drop out).

use num::{One, Zero};

use crate::combinatorics::{binom_ratio, int, Rational, UserSet};
use crate::equal_cache::{add_equal_layers, deliver_stage1, equal_params, rate_eq, EqualCacheParams};
use crate::error::{Error, Result};
use crate::incremental::{refine_pool, RefineTarget};
use crate::plan::{check_demand, xor_delivery, DeliveryPlan, PieceIndex, PlacementMap, Refinement, Share, SubfileId};

/// `N` files, `K` users, users `1..=L` with cache `M̂`, users `L+1..=K` with cache `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnequalConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub mhat: Rational,
    pub m: Rational,
}

impl UnequalConfig {
    pub fn new(n: usize, k: usize, l: usize, mhat: Rational, m: Rational) -> Result<Self> {
        let cfg = UnequalConfig { n, k, l, mhat, m };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 || self.k == 0 {
            return Err(Error::EmptySystem);
        }
        if self.k > self.n {
            return Err(Error::MoreUsersThanFiles { n: self.n, k: self.k });
        }
        if self.l == 0 || self.l >= self.k {
            return bad(format!("need 1 <= L < K, got L = {} with K = {}", self.l, self.k));
        }
        if self.mhat < self.m {
            return bad(format!("Mhat = {} is below M = {}", self.mhat, self.m));
        }
        let n = int(self.n as i64);
        if self.m < Rational::zero() || self.mhat > n {
            return bad(format!("cache sizes must satisfy 0 <= M <= Mhat <= N = {}", self.n));
        }
        Ok(())
    }

    /// The large-cache group `{1, ..., L}`.
    pub fn large_users(&self) -> UserSet {
        UserSet::range(1, self.l)
    }

    pub fn small_users(&self) -> UserSet {
        UserSet::range(self.l + 1, self.k)
    }

    /// Per-user cache sizes, descending.
    pub fn cache_vector(&self) -> Vec<Rational> {
        (1..=self.k).map(|i| if i <= self.l { self.mhat.clone() } else { self.m.clone() }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// `M' <= N`: the second-level scheme fits.
    One,
    /// `M' > N`: memory sharing between `M̂ = Phi` and `M̂ = N`.
    Two,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }
}

/// Derived quantities of the two-level scheme; lengths in units of `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnequalParams {
    pub base: EqualCacheParams,
    /// Pooled length per file of the stage-1 subfiles cached only inside `𝓛`.
    pub fprime: Rational,
    /// Per-user cache share those subfiles already occupy at each large user.
    pub pooled_occupancy: Rational,
    /// Cache size of the second-level system; `None` when `F' = 0`.
    pub mprime: Option<Rational>,
    /// Stage-1 load of the transmissions that serve only `𝓛`.
    pub rprime: Rational,
    pub scenario: Scenario,
    pub phi: Option<Rational>,
    pub gamma: Option<Rational>,
    /// Set when `F' = 0`: the extra cache is unusable by this construction.
    pub no_pool: bool,
}

pub fn unequal_params(cfg: &UnequalConfig) -> Result<UnequalParams> {
    cfg.validate()?;
    let (n, k, l) = (cfg.n, cfg.k, cfg.l);
    let base = equal_params(n, k, &cfg.m)?;
    let t = base.t_int as i64;
    let alpha = &base.alpha;
    let beta = base.beta();
    let nq = int(n as i64);

    let fprime = binom_ratio(l, t, k, t) * alpha + binom_ratio(l, t + 1, k, t + 1) * &beta;
    let pooled_occupancy =
        binom_ratio(l - 1, t - 1, k, t) * &nq * alpha + binom_ratio(l - 1, t, k, t + 1) * &nq * &beta;
    let rprime = alpha * binom_ratio(l, t + 1, k, t) + &beta * binom_ratio(l, t + 2, k, t + 1);

    if fprime.is_zero() {
        return Ok(UnequalParams {
            base,
            fprime,
            pooled_occupancy,
            mprime: None,
            rprime,
            scenario: Scenario::One,
            phi: None,
            gamma: None,
            no_pool: true,
        });
    }

    let mprime = (&pooled_occupancy + &cfg.mhat - &cfg.m) / &fprime;
    let (scenario, phi, gamma) = if mprime <= nq {
        (Scenario::One, None, None)
    } else {
        let phi = &cfg.m - &pooled_occupancy + &nq * &fprime;
        // M̂ = gamma Phi + (1 - gamma) N
        let gamma = (&nq - &cfg.mhat) / (&nq - &phi);
        (Scenario::Two, Some(phi), Some(gamma))
    };
    Ok(UnequalParams {
        base,
        fprime,
        pooled_occupancy,
        mprime: Some(mprime),
        rprime,
        scenario,
        phi,
        gamma,
        no_pool: false,
    })
}

impl UnequalParams {
    /// `R_eq(N, K, M) - R' + R_eq(N, L, M') F'`, for any `M' <= N`.
    pub fn scenario1_rate(&self, l: usize, mprime: &Rational) -> Result<Rational> {
        Ok(self.base.rate() - &self.rprime + rate_eq(self.base.n, l, mprime)? * &self.fprime)
    }

    /// `gamma (R_eq(N, K, M) - R') + (1 - gamma) R_eq(N, K - L, M)`.
    pub fn scenario2_rate(&self, l: usize, gamma: &Rational) -> Result<Rational> {
        let rest = rate_eq(self.base.n, self.base.k - l, &self.base.m)?;
        Ok(gamma * (self.base.rate() - &self.rprime) + (Rational::one() - gamma) * rest)
    }
}

/// Rate of the two-level scheme together with its intermediates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnequalRate {
    pub rate: Rational,
    pub params: UnequalParams,
}

pub fn rate_ueq(cfg: &UnequalConfig) -> Result<UnequalRate> {
    let params = unequal_params(cfg)?;
    let rate = if params.no_pool {
        params.base.rate()
    } else {
        match params.scenario {
            Scenario::One => params.scenario1_rate(cfg.l, params.mprime.as_ref().expect("pool"))?,
            Scenario::Two => params.scenario2_rate(cfg.l, params.gamma.as_ref().expect("scenario 2"))?,
        }
    };
    Ok(UnequalRate { rate, params })
}

/// Stage 1 plus stage 2 placement. Users `1..=L` end at `M̂`, the rest at `M`.
pub fn two_stage_placement(cfg: &UnequalConfig) -> Result<PlacementMap> {
    let params = unequal_params(cfg)?;
    let mut pm = PlacementMap::empty(cfg.n, vec![cfg.m.clone(); cfg.k]);
    let everyone = UserSet::range(1, cfg.k);
    let large = cfg.large_users();
    let zero = Rational::zero();
    let one = Rational::one();

    if params.no_pool || cfg.mhat == cfg.m {
        add_equal_layers(&mut pm, &params.base, &everyone, Share::Whole, &zero, &one);
    } else {
        match params.scenario {
            Scenario::One => {
                add_equal_layers(&mut pm, &params.base, &everyone, Share::Whole, &zero, &one);
                let mprime = params.mprime.as_ref().expect("pool");
                let tprime = mprime * int(cfg.l as i64) / int(cfg.n as i64);
                refine_pool(&mut pm, &large, Share::Whole, cfg.n, &RefineTarget::from_t(&tprime))?;
            }
            Scenario::Two => {
                let gamma = params.gamma.clone().expect("scenario 2");
                if !gamma.is_zero() {
                    add_equal_layers(&mut pm, &params.base, &everyone, Share::Gamma, &zero, &gamma);
                    refine_pool(&mut pm, &large, Share::Gamma, cfg.n, &RefineTarget::integer(cfg.l))?;
                }
                let rest = &one - &gamma;
                if !rest.is_zero() {
                    let small = cfg.small_users();
                    let sub = equal_params(cfg.n, small.len(), &cfg.m)?;
                    add_equal_layers(&mut pm, &sub, &small, Share::Rest, &gamma, &rest);
                    store_everywhere(&mut pm, &large);
                }
            }
        }
    }
    for user in large.iter() {
        pm.budgets[user - 1] = cfg.mhat.clone();
    }
    pm.normalize();
    Ok(pm)
}

/// Every `Rest` subfile is additionally cached at all of `large`.
fn store_everywhere(pm: &mut PlacementMap, large: &UserSet) {
    let rest: Vec<SubfileId> = pm.subfiles.iter().filter(|s| s.share == Share::Rest).cloned().collect();
    for s in rest {
        let id = SubfileId { refinement: Some(Refinement { layer: s.layer, holders: s.stage1_set.union(large) }), ..s };
        for user in large.iter() {
            pm.caches[user - 1].push(id.clone());
        }
        pm.refined.push(id);
    }
}

/// Delivery for a [`two_stage_placement`]; the load equals [`rate_ueq`].
pub fn two_stage_delivery(cfg: &UnequalConfig, placement: &PlacementMap, demand: &[usize]) -> Result<DeliveryPlan> {
    check_demand(demand, placement.files, placement.users)?;
    let large = cfg.large_users();
    let replaced = |share: Share| placement.second_level.iter().any(|s| s.share == share);
    let mut plan = DeliveryPlan::new();
    deliver_stage1(placement, demand, |spec, set| !(replaced(spec.share) && set.is_subset(&large)), &mut plan);
    for spec in &placement.second_level {
        let mut index = PieceIndex::new();
        for piece in &placement.refined {
            match &piece.refinement {
                Some(r) if piece.share == spec.share && r.layer == spec.layer && r.holders.len() == spec.t => {
                    index.entry((piece.file, r.holders.clone())).or_default().push(piece);
                }
                _ => {}
            }
        }
        xor_delivery(&spec.users, spec.t + 1, demand, &index, |_| true, &mut plan);
    }
    Ok(plan)
}

/// Placement and delivery of the two-level scheme for one demand vector.
pub fn two_stage_scheme(cfg: &UnequalConfig, demand: &[usize]) -> Result<(PlacementMap, DeliveryPlan)> {
    let placement = two_stage_placement(cfg)?;
    let plan = two_stage_delivery(cfg, &placement, demand)?;
    Ok((placement, plan))
}
