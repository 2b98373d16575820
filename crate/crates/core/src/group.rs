//! Finite abelian groups `Z/n_1 × … × Z/n_k`, their elements, characters and
//! subsets.
//!
//! Elements are addressed by their mixed-radix rank: the first factor is the
//! most significant digit, so in `Z/2 × Z/6` the element `(1, 5)` has rank
//! `1·6 + 5 = 11`. The dual group is identified with the group itself through
//! the same coordinates, the character `γ_t` acting by
//! `γ_t(x) = exp(2πi Σ_j t_j x_j / n_j)`.

use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

struct GroupInner {
    factors: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
    /// lcm of the factors; character phases are integers modulo this.
    exponent: u128,
    /// `digits[r * k + j]` is coordinate `j` of the element of rank `r`.
    digits: Vec<u32>,
}

/// A finite abelian group given as a product of cyclic factors.
///
/// Cloning is cheap; the coordinate table is shared.
#[derive(Clone)]
pub struct AbelianGroup {
    inner: Arc<GroupInner>,
}

impl PartialEq for AbelianGroup {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.factors == other.inner.factors
    }
}

impl Eq for AbelianGroup {}

impl fmt::Debug for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbelianGroup{:?}", self.inner.factors)
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.inner.factors.iter().map(|n| format!("Z/{n}")).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

impl AbelianGroup {
    pub fn new(factors: &[usize]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyFactors);
        }
        if let Some(index) = factors.iter().position(|&n| n == 0) {
            return Err(Error::ZeroFactor { index });
        }
        let k = factors.len();
        let mut strides = vec![1usize; k];
        for j in (0..k.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * factors[j + 1];
        }
        let order: usize = factors.iter().product();
        let exponent = factors.iter().fold(1u128, |acc, &n| acc.lcm(&(n as u128)));
        let mut digits = vec![0u32; order * k];
        for r in 0..order {
            for j in 0..k {
                digits[r * k + j] = ((r / strides[j]) % factors[j]) as u32;
            }
        }
        Ok(Self {
            inner: Arc::new(GroupInner {
                factors: factors.to_vec(),
                strides,
                order,
                exponent,
                digits,
            }),
        })
    }

    /// `Z/n`.
    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    /// The additive group of `F_p^n`, i.e. `(Z/p)^n` for a prime `p`.
    pub fn prime_field_power(p: usize, n: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::EmptyFactors);
        }
        Self::new(&vec![p; n])
    }

    pub fn factors(&self) -> &[usize] {
        &self.inner.factors
    }

    pub fn rank_count(&self) -> usize {
        self.inner.factors.len()
    }

    pub fn order(&self) -> usize {
        self.inner.order
    }

    /// `Some(p)` when every factor equals the same prime `p`.
    pub fn prime_field_characteristic(&self) -> Option<usize> {
        let p = self.inner.factors[0];
        (is_prime(p) && self.inner.factors.iter().all(|&n| n == p)).then_some(p)
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.inner.order
    }

    #[inline]
    pub fn digit(&self, x: usize, j: usize) -> usize {
        self.inner.digits[x * self.inner.factors.len() + j] as usize
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        let k = self.inner.factors.len();
        self.inner.digits[x * k..(x + 1) * k].iter().map(|&d| d as usize).collect()
    }

    pub fn rank(&self, coords: &[usize]) -> Result<usize> {
        let k = self.inner.factors.len();
        if coords.len() != k {
            return Err(Error::ShapeMismatch { expected: k, got: coords.len() });
        }
        let mut r = 0;
        for (j, &c) in coords.iter().enumerate() {
            let n = self.inner.factors[j];
            if c >= n {
                return Err(Error::CoordinateOutOfRange { value: c, modulus: n });
            }
            r += c * self.inner.strides[j];
        }
        Ok(r)
    }

    /// Rank of the element whose coordinates are `coords` reduced modulo the factors.
    pub fn rank_reduced(&self, coords: &[i64]) -> Result<usize> {
        let k = self.inner.factors.len();
        if coords.len() != k {
            return Err(Error::ShapeMismatch { expected: k, got: coords.len() });
        }
        Ok(coords
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let n = self.inner.factors[j] as i64;
                (c.rem_euclid(n) as usize) * self.inner.strides[j]
            })
            .sum())
    }

    pub fn check_rank(&self, x: usize) -> Result<usize> {
        if x < self.inner.order {
            Ok(x)
        } else {
            Err(Error::RankOutOfRange { rank: x, order: self.inner.order })
        }
    }

    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        let g = &*self.inner;
        if g.factors.len() == 1 {
            let s = a + b;
            return if s >= g.order { s - g.order } else { s };
        }
        let k = g.factors.len();
        let (da, db) = (&g.digits[a * k..a * k + k], &g.digits[b * k..b * k + k]);
        let mut r = 0;
        for j in 0..k {
            let n = g.factors[j];
            let s = da[j] as usize + db[j] as usize;
            r += (if s >= n { s - n } else { s }) * g.strides[j];
        }
        r
    }

    #[inline]
    pub fn neg(&self, a: usize) -> usize {
        let g = &*self.inner;
        if g.factors.len() == 1 {
            return if a == 0 { 0 } else { g.order - a };
        }
        let k = g.factors.len();
        let mut r = 0;
        for j in 0..k {
            let d = g.digits[a * k + j] as usize;
            let n = g.factors[j];
            r += (if d == 0 { 0 } else { n - d }) * g.strides[j];
        }
        r
    }

    #[inline]
    pub fn sub(&self, a: usize, b: usize) -> usize {
        let g = &*self.inner;
        if g.factors.len() == 1 {
            return if a >= b { a - b } else { a + g.order - b };
        }
        let k = g.factors.len();
        let mut r = 0;
        for j in 0..k {
            let n = g.factors[j];
            let (x, y) = (g.digits[a * k + j] as usize, g.digits[b * k + j] as usize);
            r += (if x >= y { x - y } else { x + n - y }) * g.strides[j];
        }
        r
    }

    /// `m·a`.
    pub fn scalar_mul(&self, m: i64, a: usize) -> usize {
        let coords: Vec<i64> = self.coords(a).iter().map(|&c| c as i64 * m).collect();
        self.rank_reduced(&coords).expect("shape is correct by construction")
    }

    /// Phase numerator `t` with `γ(x) = exp(2πi t / e)`, `e` the group exponent.
    pub fn phase(&self, gamma: usize, x: usize) -> u128 {
        let g = &*self.inner;
        let k = g.factors.len();
        let mut t = 0u128;
        for j in 0..k {
            let n = g.factors[j] as u128;
            let prod = (g.digits[gamma * k + j] as u128 * g.digits[x * k + j] as u128) % n;
            t += prod * (g.exponent / n);
        }
        t % g.exponent
    }

    pub fn exponent(&self) -> u128 {
        self.inner.exponent
    }

    /// `γ(x)` as a unit complex number.
    pub fn character(&self, gamma: usize, x: usize) -> Complex64 {
        let t = self.phase(gamma, x) as f64 / self.inner.exponent as f64;
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
    }

    /// `|1 − γ(x)| = 2|sin(π t / e)|`, evaluated without forming `γ(x)`.
    pub fn character_distance_from_one(&self, gamma: usize, x: usize) -> f64 {
        let t = self.phase(gamma, x);
        if t == 0 {
            return 0.0;
        }
        let frac = t as f64 / self.inner.exponent as f64;
        2.0 * (std::f64::consts::PI * frac).sin().abs()
    }

    pub fn element(&self, x: usize) -> GroupElement {
        GroupElement { coords: self.coords(x) }
    }

    pub fn dual_element(&self, x: usize) -> DualElement {
        DualElement { coords: self.coords(x) }
    }
}

/// An element of the group in coordinate form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub coords: Vec<usize>,
}

impl GroupElement {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn rank_in(&self, group: &AbelianGroup) -> Result<usize> {
        group.rank(&self.coords)
    }
}

/// A character of the group, indexed by the same coordinate space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualElement {
    pub coords: Vec<usize>,
}

impl DualElement {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn trivial(group: &AbelianGroup) -> Self {
        Self { coords: vec![0; group.rank_count()] }
    }

    pub fn rank_in(&self, group: &AbelianGroup) -> Result<usize> {
        group.rank(&self.coords)
    }
}

pub fn evaluate_character(
    group: &AbelianGroup,
    gamma: &DualElement,
    x: &GroupElement,
) -> Result<Complex64> {
    let g = gamma.rank_in(group)?;
    let x = x.rank_in(group)?;
    Ok(group.character(g, x))
}

/// A subset of a group stored as a bitset over element ranks.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ElementSet {
    bits: FixedBitSet,
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl ElementSet {
    pub fn empty(order: usize) -> Self {
        Self { bits: FixedBitSet::with_capacity(order) }
    }

    pub fn full(order: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(order);
        bits.insert_range(..);
        Self { bits }
    }

    pub fn singleton(order: usize, x: usize) -> Self {
        let mut s = Self::empty(order);
        s.insert(x);
        s
    }

    pub fn from_elements<I: IntoIterator<Item = usize>>(order: usize, elems: I) -> Self {
        let mut s = Self::empty(order);
        for x in elems {
            s.insert(x);
        }
        s
    }

    pub fn from_predicate(order: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        Self::from_elements(order, (0..order).filter(|&x| pred(x)))
    }

    /// Size of the ambient group.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.bits.contains(x)
    }

    pub fn insert(&mut self, x: usize) {
        self.bits.insert(x);
    }

    pub fn remove(&mut self, x: usize) {
        self.bits.set(x, false);
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn min(&self) -> Option<usize> {
        self.bits.minimum()
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        self.bits.intersection_count(&other.bits)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Self { bits }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Self { bits }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits.is_subset(&other.bits)
    }

    /// `A + g`.
    pub fn translate(&self, group: &AbelianGroup, g: usize) -> Self {
        Self::from_elements(self.universe(), self.iter().map(|x| group.add(x, g)))
    }

    /// `−A`.
    pub fn negate(&self, group: &AbelianGroup) -> Self {
        Self::from_elements(self.universe(), self.iter().map(|x| group.neg(x)))
    }

    /// `A + B` as a set.
    pub fn sumset(&self, group: &AbelianGroup, other: &Self) -> Self {
        let mut out = Self::empty(self.universe());
        for a in self.iter() {
            for b in other.iter() {
                out.insert(group.add(a, b));
            }
        }
        out
    }
}

impl Serialize for ElementSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

pub fn is_prime(p: usize) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_and_mixed_radix() {
        let g = AbelianGroup::new(&[2, 2, 2]).unwrap();
        assert_eq!(g.order(), 8);
        let z12 = AbelianGroup::cyclic(12).unwrap();
        assert_eq!(z12.add(7, 8), 3);
        let g = AbelianGroup::new(&[2, 6]).unwrap();
        assert_eq!(g.order(), 12);
        assert_eq!(g.rank(&[1, 5]).unwrap(), 11);
        assert_eq!(g.coords(11), vec![1, 5]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(AbelianGroup::new(&[]), Err(Error::EmptyFactors)));
        assert!(matches!(AbelianGroup::new(&[3, 0]), Err(Error::ZeroFactor { index: 1 })));
        assert!(matches!(AbelianGroup::prime_field_power(4, 2), Err(Error::NotPrime(4))));
        let g = AbelianGroup::new(&[2, 6]).unwrap();
        assert!(g.rank(&[1]).is_err());
        assert!(g.rank(&[2, 0]).is_err());
    }

    #[test]
    fn arithmetic_is_consistent() {
        let g = AbelianGroup::new(&[3, 4, 2]).unwrap();
        for a in g.elements() {
            assert_eq!(g.add(a, g.neg(a)), 0);
            for b in g.elements() {
                assert_eq!(g.sub(g.add(a, b), b), a);
                assert_eq!(g.add(a, b), g.add(b, a));
            }
        }
        assert_eq!(g.scalar_mul(-1, 5), g.neg(5));
    }

    #[test]
    fn character_values() {
        let z4 = AbelianGroup::cyclic(4).unwrap();
        let v = evaluate_character(&z4, &DualElement::new(vec![1]), &GroupElement::new(vec![2])).unwrap();
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let z12 = AbelianGroup::cyclic(12).unwrap();
        let v = evaluate_character(&z12, &DualElement::new(vec![3]), &GroupElement::new(vec![2])).unwrap();
        let direct = Complex64::new(0.0, 2.0 * std::f64::consts::PI * 6.0 / 12.0).exp();
        assert!((v - direct).norm() < 1e-12);
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let g = AbelianGroup::new(&[2, 6]).unwrap();
        let trivial = DualElement::trivial(&g);
        for x in g.elements() {
            let v = evaluate_character(&g, &trivial, &g.element(x)).unwrap();
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            for gamma in g.elements() {
                assert!((g.character(gamma, x).norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(evaluate_character(&g, &DualElement::new(vec![1]), &g.element(0)).is_err());
    }

    #[test]
    fn set_translation_and_negation() {
        let g = AbelianGroup::cyclic(8).unwrap();
        let a = ElementSet::from_elements(8, [1, 2, 7]);
        assert_eq!(a.translate(&g, 3).to_vec(), vec![2, 4, 5]);
        assert_eq!(a.negate(&g).to_vec(), vec![1, 6, 7]);
        assert_eq!(a.len(), 3);
        assert!(ElementSet::singleton(8, 2).is_subset(&a));
    }
}
