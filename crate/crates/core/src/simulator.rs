//! Bit-level execution of placements and delivery plans.
//!
//! Files are random bit strings of `F_bits` bits, where `F_bits` makes every
//! subfile boundary a whole bit. The server XORs segments, each user decodes
//! from its own cache and the broadcast only, and the result is compared
//! bit-for-bit with the library.

use std::fmt;

use bitvec::prelude::*;
use itertools::Itertools;
use num::{BigInt, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::{lcm_denominators, Rational};
use crate::equal_cache::{equal_delivery, equal_placement, rate_eq};
use crate::error::{Error, Result};
use crate::plan::{DeliveryPlan, PlacementMap, Segment};
use crate::unequal::{rate_ueq, two_stage_delivery, two_stage_placement, UnequalConfig};

type Bits = BitVec<u64, Lsb0>;

/// A scheme applied to a concrete system.
#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Equal { n: usize, k: usize, m: Rational },
    Proposed(UnequalConfig),
}

impl Instance {
    pub fn files(&self) -> usize {
        match self {
            Instance::Equal { n, .. } => *n,
            Instance::Proposed(cfg) => cfg.n,
        }
    }

    pub fn users(&self) -> usize {
        match self {
            Instance::Equal { k, .. } => *k,
            Instance::Proposed(cfg) => cfg.k,
        }
    }

    pub fn placement(&self) -> Result<PlacementMap> {
        match self {
            Instance::Equal { n, k, m } => equal_placement(*n, *k, m),
            Instance::Proposed(cfg) => two_stage_placement(cfg),
        }
    }

    pub fn delivery(&self, placement: &PlacementMap, demand: &[usize]) -> Result<DeliveryPlan> {
        match self {
            Instance::Equal { .. } => equal_delivery(placement, demand),
            Instance::Proposed(cfg) => two_stage_delivery(cfg, placement, demand),
        }
    }

    /// Closed-form worst-case rate of the scheme.
    pub fn rate(&self) -> Result<Rational> {
        match self {
            Instance::Equal { n, k, m } => rate_eq(*n, *k, m),
            Instance::Proposed(cfg) => Ok(rate_ueq(cfg)?.rate),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instance::Equal { n, k, m } => write!(f, "equal N={n} K={k} M={m}"),
            Instance::Proposed(c) => write!(f, "proposed N={} K={} L={} Mhat={} M={}", c.n, c.k, c.l, c.mhat, c.m),
        }
    }
}

/// The library: `N` files of `f_bits` bits each.
#[derive(Clone, Debug, PartialEq)]
pub struct FileStore {
    pub f_bits: u64,
    files: Vec<Bits>,
}

impl FileStore {
    /// File `file` (1-based).
    pub fn file(&self, file: usize) -> &BitSlice<u64, Lsb0> {
        &self.files[file - 1]
    }

    pub fn files(&self) -> usize {
        self.files.len()
    }
}

/// Cache content of one user: known bits of every file.
#[derive(Clone, Debug, PartialEq)]
pub struct UserCache {
    data: Vec<Bits>,
    known: Vec<Bits>,
    stored_bits: u64,
}

impl UserCache {
    pub fn stored_bits(&self) -> u64 {
        self.stored_bits
    }

    fn read(&self, file: usize, range: std::ops::Range<usize>) -> Option<&BitSlice<u64, Lsb0>> {
        self.known[file - 1][range.clone()].all().then(|| &self.data[file - 1][range])
    }
}

/// Every user's cache after placement.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheImage {
    pub users: Vec<UserCache>,
}

impl CacheImage {
    pub fn user(&self, user: usize) -> &UserCache {
        &self.users[user - 1]
    }

    pub fn is_empty(&self) -> bool {
        self.users.iter().all(|u| u.stored_bits == 0)
    }
}

/// Broadcast content, one bit string per transmission.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionLog {
    pub payloads: Vec<Bits>,
}

impl TransmissionLog {
    pub fn total_bits(&self) -> u64 {
        self.payloads.iter().map(|p| p.len() as u64).sum()
    }

    /// Flips one bit of one transmission.
    pub fn flip(&mut self, transmission: usize, bit: usize) {
        let payload = &mut self.payloads[transmission];
        let old = payload[bit];
        payload.set(bit, !old);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UserStatus {
    Decoded,
    /// Some transmission required a segment the user does not hold.
    MissingSideInformation {
        transmission: usize,
    },
    /// Bits of the demanded file that were neither cached nor delivered.
    Incomplete {
        missing_bits: usize,
    },
    /// The reconstruction disagrees with the library.
    Mismatch {
        wrong_bits: usize,
    },
}

impl UserStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, UserStatus::Decoded)
    }
}

impl fmt::Display for UserStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserStatus::Decoded => write!(f, "ok"),
            UserStatus::MissingSideInformation { transmission } => write!(f, "missing@{transmission}"),
            UserStatus::Incomplete { missing_bits } => write!(f, "incomplete:{missing_bits}"),
            UserStatus::Mismatch { wrong_bits } => write!(f, "mismatch:{wrong_bits}"),
        }
    }
}

/// Outcome of one demand vector.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub demand: Vec<usize>,
    pub statuses: Vec<UserStatus>,
    pub measured_load_bits: u64,
    pub formula_load_bits: Rational,
    pub pass: bool,
}

impl VerificationReport {
    /// Measured load in units of `F`.
    pub fn load(&self, f_bits: u64) -> Rational {
        Rational::new(BigInt::from(self.measured_load_bits), BigInt::from(f_bits))
    }

    /// One tab-separated record: demand, per-user status, load as `p/q`, verdict.
    pub fn to_record(&self, f_bits: u64) -> String {
        format!(
            "demand={}\tstatus={}\tload={}\tformula={}\tbits={}\tpass={}",
            self.demand.iter().join(","),
            self.statuses.iter().join(","),
            self.load(f_bits),
            &self.formula_load_bits / Rational::from_integer(BigInt::from(f_bits)),
            self.measured_load_bits,
            self.pass
        )
    }
}

fn bit_index(position: &Rational, f_bits: u64) -> Option<usize> {
    let scaled = position * Rational::from_integer(BigInt::from(f_bits));
    if scaled.is_integer() {
        scaled.to_integer().to_usize()
    } else {
        None
    }
}

fn bit_range(seg: &Segment, f_bits: u64) -> Result<std::ops::Range<usize>> {
    let err = || Error::Indivisible { f_bits, subfile: seg.id.to_string() };
    let lo = bit_index(&seg.start, f_bits).ok_or_else(err)?;
    let len = bit_index(&seg.length, f_bits).ok_or_else(err)?;
    Ok(lo..lo + len)
}

/// A transmission part with its bit range worked out.
struct ResolvedPart {
    file: usize,
    range: std::ops::Range<usize>,
    target: usize,
}

fn resolve(plan: &DeliveryPlan, f_bits: u64) -> Result<Vec<Vec<ResolvedPart>>> {
    plan.transmissions
        .iter()
        .map(|tx| {
            tx.parts
                .iter()
                .map(|p| {
                    Ok(ResolvedPart { file: p.segment.file(), range: bit_range(&p.segment, f_bits)?, target: p.target })
                })
                .collect()
        })
        .collect()
}

/// Smallest file size that puts every boundary of `placement` on a whole bit.
pub fn required_file_bits(placement: &PlacementMap) -> Result<u64> {
    let lcm = lcm_denominators(placement.boundaries())?;
    lcm.to_u64().ok_or_else(|| Error::Io(format!("file size {lcm} bits does not fit in 64 bits")))
}

/// Draws the library from `seed` and fills every cache per `placement`.
///
/// `f_bits` defaults to [`required_file_bits`]; an explicit value must be a
/// multiple of it, otherwise the first subfile that does not split is named.
pub fn materialize(placement: &PlacementMap, f_bits: Option<u64>, seed: u64) -> Result<(FileStore, CacheImage)> {
    let f_bits = match f_bits {
        Some(bits) => bits,
        None => required_file_bits(placement)?,
    };
    for id in placement.subfiles.iter().chain(placement.refined.iter()) {
        bit_range(&Segment::whole(id), f_bits)?;
    }
    let len = usize::try_from(f_bits).map_err(|_| Error::Io("file size exceeds address space".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let files: Vec<Bits> = (0..placement.files)
        .map(|_| {
            let mut bits = Bits::with_capacity(len);
            let words = len.div_ceil(64);
            for _ in 0..words {
                bits.extend_from_bitslice(rng.next_u64().view_bits::<Lsb0>());
            }
            bits.truncate(len);
            bits
        })
        .collect();
    let store = FileStore { f_bits, files };

    let mut users = Vec::with_capacity(placement.users);
    for (i, cache) in placement.caches.iter().enumerate() {
        let mut uc = UserCache {
            data: vec![bitvec![u64, Lsb0; 0; len]; placement.files],
            known: vec![bitvec![u64, Lsb0; 0; len]; placement.files],
            stored_bits: 0,
        };
        for id in cache {
            let range = bit_range(&Segment::whole(id), f_bits)?;
            uc.data[id.file - 1][range.clone()].copy_from_bitslice(&store.files[id.file - 1][range.clone()]);
            uc.known[id.file - 1][range.clone()].fill(true);
            uc.stored_bits += range.len() as u64;
        }
        let budget = (&placement.budgets[i] * Rational::from_integer(BigInt::from(f_bits))).floor();
        assert!(
            Rational::from_integer(BigInt::from(uc.stored_bits)) <= budget,
            "user {} stores {} bits over a budget of {}",
            i + 1,
            uc.stored_bits,
            budget
        );
        users.push(uc);
    }
    Ok((store, CacheImage { users }))
}

/// XORs the segments of each transmission.
pub fn execute_delivery(store: &FileStore, plan: &DeliveryPlan) -> Result<TransmissionLog> {
    plan.check_lengths()?;
    let payloads = resolve(plan, store.f_bits)?
        .iter()
        .map(|parts| {
            let mut payload: Option<Bits> = None;
            for part in parts {
                let bits = &store.file(part.file)[part.range.clone()];
                match payload.as_mut() {
                    None => payload = Some(bits.to_bitvec()),
                    Some(acc) => *acc ^= bits,
                }
            }
            payload.unwrap_or_default()
        })
        .collect();
    Ok(TransmissionLog { payloads })
}

/// Runs every user's decoder and checks the result against the library.
///
/// Users only read their own cache, the broadcast payloads, and the plan's
/// labels (which segment of which file each XOR carries).
pub fn decode_all(
    store: &FileStore,
    caches: &CacheImage,
    plan: &DeliveryPlan,
    log: &TransmissionLog,
    demand: &[usize],
    formula_rate: &Rational,
) -> VerificationReport {
    let f_bits = store.f_bits;
    let statuses = match resolve(plan, f_bits) {
        Ok(resolved) => (1..=demand.len())
            .map(|user| decode_user(store, caches.user(user), &resolved, log, user, demand[user - 1]))
            .collect::<Vec<_>>(),
        Err(_) => vec![UserStatus::MissingSideInformation { transmission: 0 }; demand.len()],
    };
    let measured_load_bits = log.total_bits();
    let formula_load_bits = formula_rate * Rational::from_integer(BigInt::from(f_bits));
    let pass = statuses.iter().all(UserStatus::is_ok)
        && Rational::from_integer(BigInt::from(measured_load_bits)) == formula_load_bits;
    VerificationReport { demand: demand.to_vec(), statuses, measured_load_bits, formula_load_bits, pass }
}

fn decode_user(
    store: &FileStore,
    cache: &UserCache,
    plan: &[Vec<ResolvedPart>],
    log: &TransmissionLog,
    user: usize,
    wanted: usize,
) -> UserStatus {
    let mut recon = cache.data[wanted - 1].clone();
    let mut known = cache.known[wanted - 1].clone();

    for (index, (parts, payload)) in plan.iter().zip(&log.payloads).enumerate() {
        let mut mine = parts.iter().filter(|p| p.target == user);
        let Some(target) = mine.next() else { continue };
        if mine.next().is_some() {
            return UserStatus::MissingSideInformation { transmission: index };
        }
        let mut bits = payload.clone();
        for part in parts.iter().filter(|p| p.target != user) {
            match cache.read(part.file, part.range.clone()) {
                Some(side) => bits ^= side,
                None => return UserStatus::MissingSideInformation { transmission: index },
            }
        }
        recon[target.range.clone()].copy_from_bitslice(&bits);
        known[target.range.clone()].fill(true);
    }

    let missing_bits = known.count_zeros();
    if missing_bits > 0 {
        return UserStatus::Incomplete { missing_bits };
    }
    let diff = recon ^ store.file(wanted);
    match diff.count_ones() {
        0 => UserStatus::Decoded,
        wrong_bits => UserStatus::Mismatch { wrong_bits },
    }
}

/// Which demand vectors to try.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemandMode {
    /// All `N^K` vectors.
    Exhaustive,
    /// All assignments of distinct files to users; the worst case for
    /// file-symmetric schemes when `N >= K`.
    Distinct,
}

/// Limit on `N^K` for exhaustive enumeration.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

pub fn demand_vectors(n: usize, k: usize, mode: DemandMode) -> Result<Vec<Vec<usize>>> {
    match mode {
        DemandMode::Exhaustive => {
            let count = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
            if count > EXHAUSTIVE_LIMIT {
                return Err(Error::TooManyDemands { count });
            }
            Ok((0..k).map(|_| 1..=n).multi_cartesian_product().collect())
        }
        DemandMode::Distinct => Ok((1..=n).permutations(k).collect()),
    }
}

/// Result of verifying one instance over a set of demand vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationSummary {
    pub f_bits: u64,
    pub formula_rate: Rational,
    /// Largest measured load over all demands, in units of `F`.
    pub worst_load: Rational,
    /// Reports in demand enumeration order.
    pub reports: Vec<VerificationReport>,
}

impl VerificationSummary {
    pub fn passed(&self) -> usize {
        self.reports.iter().filter(|r| r.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.passed() == self.reports.len()
    }

    pub fn first_failure(&self) -> Option<&VerificationReport> {
        self.reports.iter().find(|r| !r.pass)
    }
}

/// Optional fault to inject into every run: flip bit `bit` of transmission `transmission`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub transmission: usize,
    pub bit: usize,
}

/// Simulates `instance` for every demand vector of `mode`.
///
/// Demand vectors are checked in parallel; reports keep enumeration order.
pub fn verify(instance: &Instance, mode: DemandMode, seed: u64, fault: Option<Fault>) -> Result<VerificationSummary> {
    let placement = instance.placement()?;
    let (store, caches) = materialize(&placement, None, seed)?;
    let formula_rate = instance.rate()?;
    let demands = demand_vectors(instance.files(), instance.users(), mode)?;

    let reports = demands
        .par_iter()
        .map(|demand| {
            let plan = instance.delivery(&placement, demand)?;
            let mut log = execute_delivery(&store, &plan)?;
            if let Some(f) = fault {
                if f.transmission < log.payloads.len() && f.bit < log.payloads[f.transmission].len() {
                    log.flip(f.transmission, f.bit);
                }
            }
            Ok(decode_all(&store, &caches, &plan, &log, demand, &formula_rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let worst_bits = reports.iter().map(|r| r.measured_load_bits).max().unwrap_or(0);
    Ok(VerificationSummary {
        f_bits: store.f_bits,
        worst_load: Rational::new(BigInt::from(worst_bits), BigInt::from(store.f_bits)),
        formula_rate,
        reports,
    })
}

/// Largest measured load over the demands of `mode`, exact.
pub fn worst_case_load(instance: &Instance, mode: DemandMode) -> Result<Rational> {
    Ok(verify(instance, mode, 0, None)?.worst_load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{int, rat};

    fn example() -> Instance {
        Instance::Proposed(UnequalConfig::new(4, 4, 3, int(2), int(1)).unwrap())
    }

    #[test]
    fn deterministic_store() {
        let pm = example().placement().unwrap();
        let (a, ca) = materialize(&pm, None, 7).unwrap();
        let (b, cb) = materialize(&pm, None, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        let (c, _) = materialize(&pm, None, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn worked_example_needs_eight_bits() {
        let pm = example().placement().unwrap();
        assert_eq!(required_file_bits(&pm).unwrap(), 8);
        assert!(materialize(&pm, Some(16), 1).is_ok());
        match materialize(&pm, Some(12), 1) {
            Err(Error::Indivisible { f_bits: 12, subfile }) => assert!(subfile.starts_with('A')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_cache_is_empty() {
        let inst = Instance::Equal { n: 3, k: 3, m: int(0) };
        let (_, caches) = materialize(&inst.placement().unwrap(), None, 1).unwrap();
        assert!(caches.is_empty());
    }

    #[test]
    fn single_segment_is_plaintext() {
        let inst = Instance::Equal { n: 2, k: 2, m: int(0) };
        let pm = inst.placement().unwrap();
        let (store, _) = materialize(&pm, None, 3).unwrap();
        let plan = inst.delivery(&pm, &[2, 1]).unwrap();
        let log = execute_delivery(&store, &plan).unwrap();
        assert_eq!(log.payloads[0].as_bitslice(), store.file(2));
        assert_eq!(log.payloads[1].as_bitslice(), store.file(1));
    }

    #[test]
    fn xor_matches_direct_computation() {
        let inst = Instance::Equal { n: 4, k: 4, m: int(1) };
        let pm = inst.placement().unwrap();
        let (store, _) = materialize(&pm, Some(4 * 64), 11).unwrap();
        let plan = inst.delivery(&pm, &[1, 2, 3, 4]).unwrap();
        let log = execute_delivery(&store, &plan).unwrap();
        // First transmission is A_2 xor B_1: A's second quarter, B's first quarter.
        let q = 64;
        let want: Bits = store.file(1)[q..2 * q].iter().zip(store.file(2)[..q].iter()).map(|(a, b)| *a ^ *b).collect();
        assert_eq!(log.payloads[0], want);
    }

    #[test]
    fn worked_example_rates() {
        let eq = Instance::Equal { n: 4, k: 4, m: int(1) };
        let summary = verify(&eq, DemandMode::Distinct, 1, None).unwrap();
        assert!(summary.all_pass());
        assert_eq!(summary.worst_load, rat(3, 2));

        let summary = verify(&example(), DemandMode::Exhaustive, 1, None).unwrap();
        assert_eq!(summary.reports.len(), 256);
        assert!(summary.all_pass());
        assert_eq!(summary.worst_load, int(1));
        let plan_bits = summary.reports[0].measured_load_bits;
        assert_eq!(plan_bits, summary.f_bits);
    }

    #[test]
    fn full_cache_costs_nothing() {
        let inst = Instance::Equal { n: 3, k: 3, m: int(3) };
        assert_eq!(worst_case_load(&inst, DemandMode::Exhaustive).unwrap(), int(0));
    }

    #[test]
    fn flipped_bit_is_detected() {
        let fault = Fault { transmission: 0, bit: 0 };
        let summary = verify(&example(), DemandMode::Distinct, 5, Some(fault)).unwrap();
        assert_eq!(summary.passed(), 0);
        let first = summary.first_failure().unwrap();
        assert!(first.statuses.iter().any(|s| matches!(s, UserStatus::Mismatch { .. })));
    }

    #[test]
    fn exhaustive_limit() {
        assert!(matches!(demand_vectors(40, 4, DemandMode::Exhaustive), Err(Error::TooManyDemands { .. })));
        assert_eq!(demand_vectors(4, 2, DemandMode::Distinct).unwrap().len(), 12);
        assert_eq!(demand_vectors(3, 2, DemandMode::Exhaustive).unwrap().len(), 9);
    }

    #[test]
    fn record_format() {
        let summary = verify(&example(), DemandMode::Distinct, 1, None).unwrap();
        let line = summary.reports[0].to_record(summary.f_bits);
        assert_eq!(line, "demand=1,2,3,4\tstatus=ok,ok,ok,ok\tload=1\tformula=1\tbits=8\tpass=true");
    }
}
