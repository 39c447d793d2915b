//! Exact arithmetic and subset bookkeeping shared by every scheme.

use std::fmt;

use itertools::Itertools;
use num::{BigInt, BigRational, Integer, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Builds `num / den` in lowest terms. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"p/q"`, an integer, or a decimal such as `"2.75"` or `"-0.125"`.
///
/// Decimals are read exactly as a fraction over a power of ten.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::ParseRational(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let denom = num::pow(BigInt::from(10), frac.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Nearest `f64`, for display only.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Formats a rational as a decimal with `digits` significant digits.
pub fn to_decimal(value: &Rational, digits: usize) -> String {
    let x = to_f64(value);
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Binomial coefficient with the convention `C(a, b) = 0` whenever `b < 0` or `b > a`.
pub fn binom(a: u64, b: i64) -> BigInt {
    if b < 0 || b as u64 > a {
        return BigInt::zero();
    }
    let b = (b as u64).min(a - b as u64);
    let mut acc = BigInt::one();
    for i in 0..b {
        acc *= BigInt::from(a - i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

/// `C(a, b)` as an exact rational, zero outside the support.
pub fn binom_q(a: usize, b: i64) -> Rational {
    Rational::from_integer(binom(a as u64, b))
}

/// `C(a1, b1) / C(a2, b2)`, treating a zero denominator as a zero ratio.
///
/// Every ratio in the rate formulas has a denominator `C(K, t)` with `t <= K`
/// whenever its numerator is non-zero, so the guard only silences empty terms.
pub fn binom_ratio(a1: usize, b1: i64, a2: usize, b2: i64) -> Rational {
    let den = binom(a2 as u64, b2);
    if den.is_zero() {
        return Rational::zero();
    }
    Rational::new(binom(a1 as u64, b1), den)
}

/// Least common multiple of the denominators of `lengths`.
pub fn lcm_denominators<'a, I>(lengths: I) -> Result<BigInt>
where
    I: IntoIterator<Item = &'a Rational>,
{
    let mut iter = lengths.into_iter().peekable();
    if iter.peek().is_none() {
        return Err(Error::NoLengths);
    }
    Ok(iter.fold(BigInt::one(), |acc, q| acc.lcm(q.denom())))
}

/// Sorted, duplicate-free set of 1-based user indices.
///
/// Ordering is lexicographic over the sorted member list, which is the order
/// used for every subset enumeration in the crate.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserSet(Vec<usize>);

impl UserSet {
    pub fn new<I: IntoIterator<Item = usize>>(members: I) -> Self {
        let mut v: Vec<usize> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        UserSet(v)
    }

    pub fn empty() -> Self {
        UserSet(Vec::new())
    }

    /// `{first, first + 1, ..., last}`; empty when `last < first`.
    pub fn range(first: usize, last: usize) -> Self {
        UserSet((first..=last).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.0.binary_search(&user).is_ok()
    }

    pub fn is_subset(&self, other: &UserSet) -> bool {
        self.0.iter().all(|u| other.contains(*u))
    }

    pub fn with(&self, user: usize) -> UserSet {
        UserSet::new(self.0.iter().copied().chain(std::iter::once(user)))
    }

    pub fn without(&self, user: usize) -> UserSet {
        UserSet(self.0.iter().copied().filter(|u| *u != user).collect())
    }

    pub fn union(&self, other: &UserSet) -> UserSet {
        UserSet::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn difference(&self, other: &UserSet) -> UserSet {
        UserSet(self.0.iter().copied().filter(|u| !other.contains(*u)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

impl FromIterator<usize> for UserSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        UserSet::new(iter)
    }
}

/// All `size`-subsets of `ground` in lexicographic order; empty if `size > |ground|`.
pub fn enumerate_subsets(ground: &UserSet, size: usize) -> Vec<UserSet> {
    if size > ground.len() {
        return Vec::new();
    }
    ground.members().iter().copied().combinations(size).map(UserSet).collect()
}

/// Supersets of `base` inside `ground` with exactly `size` members, lexicographic.
pub fn enumerate_supersets(ground: &UserSet, base: &UserSet, size: usize) -> Vec<UserSet> {
    if size < base.len() {
        return Vec::new();
    }
    let free = ground.difference(base);
    enumerate_subsets(&free, size - base.len()).into_iter().map(|extra| extra.union(base)).collect()
}

pub(crate) fn floor_usize(q: &Rational) -> usize {
    q.floor().to_integer().to_usize().expect("non-negative bounded floor")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_examples() {
        assert_eq!(binom(4, 2), BigInt::from(6));
        assert_eq!(binom(3, 5), BigInt::zero());
        assert_eq!(binom(2, -1), BigInt::zero());
        assert_eq!(binom(0, 0), BigInt::one());
        assert_eq!(binom(64, 32), BigInt::from(1_832_624_140_942_590_534u64));
    }

    #[test]
    fn pascal_rule() {
        for a in 1..=64u64 {
            for b in 1..=a as i64 {
                assert_eq!(binom(a, b), binom(a - 1, b - 1) + binom(a - 1, b), "C({a},{b})");
            }
        }
    }

    #[test]
    fn subsets_lexicographic() {
        let ground = UserSet::range(1, 3);
        let got = enumerate_subsets(&ground, 2);
        let want = vec![UserSet::new([1, 2]), UserSet::new([1, 3]), UserSet::new([2, 3])];
        assert_eq!(got, want);
        assert_eq!(enumerate_subsets(&UserSet::range(1, 2), 0), vec![UserSet::empty()]);
        assert_eq!(enumerate_subsets(&UserSet::range(1, 4), 3).len(), 4);
        assert!(enumerate_subsets(&UserSet::range(1, 2), 3).is_empty());
    }

    #[test]
    fn supersets() {
        let ground = UserSet::range(1, 3);
        let got = enumerate_supersets(&ground, &UserSet::new([1]), 2);
        assert_eq!(got, vec![UserSet::new([1, 2]), UserSet::new([1, 3])]);
    }

    #[test]
    fn lcm_examples() {
        assert_eq!(lcm_denominators(&[rat(1, 4), rat(1, 8)]).unwrap(), BigInt::from(8));
        assert_eq!(lcm_denominators(&[int(1)]).unwrap(), BigInt::from(1));
        assert_eq!(lcm_denominators(&[rat(3, 4), rat(1, 6)]).unwrap(), BigInt::from(12));
        assert_eq!(lcm_denominators(&[]), Err(Error::NoLengths));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/2").unwrap(), rat(3, 2));
        assert_eq!(parse_rational("6/4").unwrap(), rat(3, 2));
        assert_eq!(parse_rational("2.75").unwrap(), rat(11, 4));
        assert_eq!(parse_rational("-0.125").unwrap(), rat(-1, 8));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("4").unwrap(), int(4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn display_canonical() {
        assert_eq!(rat(6, 4).to_string(), "3/2");
        assert_eq!(int(1).to_string(), "1");
        assert_eq!(to_decimal(&int(1), 4), "1.000");
        assert_eq!(to_decimal(&rat(3, 2), 4), "1.500");
    }
}
