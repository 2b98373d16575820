//! Functions on a finite abelian group: convolutions, Fourier transforms,
//! measured norms and inner products.
//!
//! All averages use the normalized counting measure on `G`:
//! `(f ∗ g)(x) = E_y f(y) g(x − y)`, `(f ∘ g)(x) = E_y f(y) g(x + y)`,
//! `f̂(γ) = E_x f(x) γ(−x)`. On the dual side the counting measure is used,
//! so that `(f·g)^ = f̂ ∗ ĝ` with a plain sum.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::group::{AbelianGroup, ElementSet};

/// Float tolerance used when nothing more specific is supplied.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Field of function values.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn to_complex(&self) -> Complex64;
    fn modulus(&self) -> f64;

    fn from_usize(v: usize) -> Self {
        Self::from_i64(v as i64)
    }
}

/// Ordered scalars: the value types measures and level sets can be built from.
pub trait RealScalar: Scalar + PartialOrd {
    fn as_f64(&self) -> f64;
    fn abs_value(&self) -> Self;
    /// Exact equality for rationals, `DEFAULT_TOL` closeness for floats.
    fn approx_one(&self) -> bool;
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.as_f64(), 0.0)
    }
    fn modulus(&self) -> f64 {
        self.as_f64().abs()
    }
}

impl RealScalar for BigRational {
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
    fn approx_one(&self) -> bool {
        One::is_one(self)
    }
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl RealScalar for f64 {
    fn as_f64(&self) -> f64 {
        *self
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
    fn approx_one(&self) -> bool {
        (self - 1.0).abs() <= DEFAULT_TOL
    }
}

impl Scalar for Complex64 {
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A dense function `G → T`, indexed by element rank.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFunction<T> {
    group: AbelianGroup,
    values: Vec<T>,
}

pub type RationalFunction = GroupFunction<BigRational>;
pub type RealFunction = GroupFunction<f64>;
pub type ComplexFunction = GroupFunction<Complex64>;

impl<T: Scalar> GroupFunction<T> {
    pub fn new(group: &AbelianGroup, values: Vec<T>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::LengthMismatch { expected: group.order(), got: values.len() });
        }
        Ok(Self { group: group.clone(), values })
    }

    pub fn from_fn(group: &AbelianGroup, f: impl FnMut(usize) -> T) -> Self {
        Self { group: group.clone(), values: group.elements().map(f).collect() }
    }

    pub fn constant(group: &AbelianGroup, c: T) -> Self {
        Self { group: group.clone(), values: vec![c; group.order()] }
    }

    pub fn zero(group: &AbelianGroup) -> Self {
        Self::constant(group, T::zero())
    }

    pub fn indicator(group: &AbelianGroup, set: &ElementSet) -> Self {
        Self::from_fn(group, |x| if set.contains(x) { T::one() } else { T::zero() })
    }

    /// `c · 1_{{a}}`.
    pub fn point_mass(group: &AbelianGroup, a: usize, c: T) -> Self {
        Self::from_fn(group, |x| if x == a { c.clone() } else { T::zero() })
    }

    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, x: usize) -> &T {
        &self.values[x]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> GroupFunction<U> {
        GroupFunction { group: self.group.clone(), values: self.values.iter().map(f).collect() }
    }

    pub fn to_complex(&self) -> ComplexFunction {
        self.map(|v| v.to_complex())
    }

    fn same_group(&self, other: &Self) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::GroupMismatch)
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self> {
        self.same_group(other)?;
        Ok(Self {
            group: self.group.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() * b.clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    pub fn add_constant(&self, c: &T) -> Self {
        self.map(|v| v.clone() + c.clone())
    }

    pub fn sum(&self) -> T {
        self.values.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    /// `E_x f(x)`.
    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.group.order())
    }

    pub fn pointwise_pow(&self, p: u32) -> Self {
        self.map(|v| pow(v, p))
    }

    /// `f^g(x) = f(x − g)`.
    pub fn translate(&self, g: usize) -> Self {
        let grp = &self.group;
        Self::from_fn(grp, |x| self.values[grp.sub(x, g)].clone())
    }

    /// `x ↦ f(−x)`.
    pub fn reflect(&self) -> Self {
        let grp = &self.group;
        Self::from_fn(grp, |x| self.values[grp.neg(x)].clone())
    }

    /// `(f ∗ g)(x) = E_y f(y) g(x − y)`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let grp = &self.group;
        let n = T::from_usize(grp.order());
        let support: Vec<usize> = grp.elements().filter(|&y| !self.values[y].is_zero()).collect();
        Ok(Self::from_fn(grp, |x| {
            let mut acc = T::zero();
            for &y in &support {
                let v = &other.values[grp.sub(x, y)];
                if !v.is_zero() {
                    acc = acc + self.values[y].clone() * v.clone();
                }
            }
            acc / n.clone()
        }))
    }

    /// `(f ∘ g)(x) = E_y f(y) g(x + y)`.
    pub fn diff_convolve(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let grp = &self.group;
        let n = T::from_usize(grp.order());
        let support: Vec<usize> = grp.elements().filter(|&y| !self.values[y].is_zero()).collect();
        Ok(Self::from_fn(grp, |x| {
            let mut acc = T::zero();
            for &y in &support {
                let v = &other.values[grp.add(x, y)];
                if !v.is_zero() {
                    acc = acc + self.values[y].clone() * v.clone();
                }
            }
            acc / n.clone()
        }))
    }

    /// `f^{(1)} = f`, `f^{(p)} = f ∗ f^{(p−1)}`.
    pub fn p_fold_convolve(&self, p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("p-fold convolution needs p ≥ 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..p {
            acc = self.convolve(&acc)?;
        }
        Ok(acc)
    }

    /// `⟨f, g⟩ = E_x f(x) g(x)`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.same_group(other)?;
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        Ok(s / T::from_usize(self.group.order()))
    }

    /// `max_x |f(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }
}

impl<T: RealScalar> GroupFunction<T> {
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= T::zero())
    }

    /// `⟨f, g⟩_ν = E_x ν(x) f(x) g(x)`.
    pub fn inner_with(&self, other: &Self, nu: Option<&Measure<T>>) -> Result<T> {
        match nu {
            None => self.inner(other),
            Some(nu) => self.pointwise_mul(nu.as_function())?.inner(other),
        }
    }

    /// `{x : f(x) > θ}`.
    pub fn superlevel_set(&self, threshold: &T) -> ElementSet {
        ElementSet::from_predicate(self.group.order(), |x| self.values[x] > *threshold)
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .cloned()
            .fold(None, |m: Option<T>, v| match m {
                Some(m) if m >= v => Some(m),
                _ => Some(v),
            })
            .expect("groups are nonempty")
    }

    pub fn to_real(&self) -> RealFunction {
        self.map(|v| v.as_f64())
    }

    pub fn support(&self) -> ElementSet {
        ElementSet::from_predicate(self.group.order(), |x| !self.values[x].is_zero())
    }
}

fn pow<T: Scalar>(v: &T, p: u32) -> T {
    let mut acc = T::one();
    for _ in 0..p {
        acc = acc * v.clone();
    }
    acc
}

/// A probability distribution in the normalization `E_x ν(x) = 1`, `ν ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure<T> {
    density: GroupFunction<T>,
}

pub type RationalMeasure = Measure<BigRational>;
pub type RealMeasure = Measure<f64>;

impl<T: RealScalar> Measure<T> {
    pub fn new(density: GroupFunction<T>) -> Result<Self> {
        if !density.is_nonnegative() {
            return Err(Error::NotAMeasure("negative value".into()));
        }
        let mean = density.mean();
        if !mean.approx_one() {
            return Err(Error::NotAMeasure(format!("mean is {:?}, not 1", mean.as_f64())));
        }
        Ok(Self { density })
    }

    /// The uniform distribution `μ ≡ 1`.
    pub fn uniform(group: &AbelianGroup) -> Self {
        Self { density: GroupFunction::constant(group, T::one()) }
    }

    /// `μ_A = (|G|/|A|)·1_A`.
    pub fn normalized_indicator(group: &AbelianGroup, set: &ElementSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let c = T::from_usize(group.order()) / T::from_usize(set.len());
        Ok(Self {
            density: GroupFunction::from_fn(group, |x| if set.contains(x) { c.clone() } else { T::zero() }),
        })
    }

    /// `|G|·1_{{a}}`.
    pub fn point_mass(group: &AbelianGroup, a: usize) -> Self {
        Self { density: GroupFunction::point_mass(group, a, T::from_usize(group.order())) }
    }

    /// `ν_f(x) = ν(x) f(x) / ν(f)` for non-negative `f`.
    pub fn relative(nu: Option<&Self>, f: &GroupFunction<T>) -> Result<Self> {
        if !f.is_nonnegative() {
            return Err(Error::NotAMeasure("weight function has a negative value".into()));
        }
        let weighted = match nu {
            Some(nu) => nu.density.pointwise_mul(f)?,
            None => f.clone(),
        };
        let mass = weighted.mean();
        if mass.is_zero() {
            return Err(Error::ZeroMass);
        }
        Ok(Self { density: weighted.map(|v| v.clone() / mass.clone()) })
    }

    /// `f / E[f]`, the `μ_f` notation for a non-negative function.
    pub fn normalize(f: &GroupFunction<T>) -> Result<Self> {
        Self::relative(None, f)
    }

    pub fn as_function(&self) -> &GroupFunction<T> {
        &self.density
    }

    pub fn into_function(self) -> GroupFunction<T> {
        self.density
    }

    pub fn group(&self) -> &AbelianGroup {
        self.density.group()
    }

    pub fn support(&self) -> ElementSet {
        self.density.support()
    }

    /// `ν ∗ ν′` is again a measure.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        Ok(Self { density: self.density.convolve(&other.density)? })
    }

    /// `ν ∘ ν′` is again a measure.
    pub fn diff_convolve(&self, other: &Self) -> Result<Self> {
        Ok(Self { density: self.density.diff_convolve(&other.density)? })
    }

    pub fn translate(&self, g: usize) -> Self {
        Self { density: self.density.translate(g) }
    }

    pub fn to_real(&self) -> RealMeasure {
        Measure { density: self.density.to_real() }
    }
}

/// Order of a measured norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormOrder {
    Finite(u32),
    Infinity,
}

/// `‖f‖_{p(ν)} = (E_x ν(x)|f(x)|^p)^{1/p}`; `‖f‖_∞ = max_x |f(x)|` regardless of ν.
pub fn lp_norm<T: Scalar, R: RealScalar>(
    f: &GroupFunction<T>,
    p: NormOrder,
    nu: Option<&Measure<R>>,
) -> Result<f64> {
    if let Some(nu) = nu {
        if nu.group() != f.group() {
            return Err(Error::GroupMismatch);
        }
    }
    match p {
        NormOrder::Infinity => Ok(f.sup_norm()),
        NormOrder::Finite(0) => Err(Error::InvalidParameter("norm order must be ≥ 1".into())),
        NormOrder::Finite(p) => {
            let n = f.group().order() as f64;
            let total: f64 = f
                .values()
                .iter()
                .enumerate()
                .map(|(x, v)| {
                    let w = nu.map_or(1.0, |nu| nu.as_function().at(x).as_f64());
                    w * v.modulus().powi(p as i32)
                })
                .sum();
            Ok((total / n).powf(1.0 / p as f64))
        }
    }
}

/// An exact measured norm: the `p`-th power as a rational, plus its real root.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactNorm {
    pub power: BigRational,
    pub value: f64,
}

/// `E_x ν(x)|f(x)|^p` exactly.
pub fn lp_norm_exact(
    f: &RationalFunction,
    p: u32,
    nu: Option<&RationalMeasure>,
) -> Result<ExactNorm> {
    if p == 0 {
        return Err(Error::InvalidParameter("norm order must be ≥ 1".into()));
    }
    let abs = f.map(|v| v.abs());
    let powered = abs.pointwise_pow(p);
    let power = match nu {
        Some(nu) => powered.inner(nu.as_function())?,
        None => powered.mean(),
    };
    let value = power.as_f64().powf(1.0 / p as f64);
    Ok(ExactNorm { power, value })
}

/// `⟨f, g⟩_ν`.
pub fn inner_product<T: RealScalar>(
    f: &GroupFunction<T>,
    g: &GroupFunction<T>,
    nu: Option<&Measure<T>>,
) -> Result<T> {
    f.inner_with(g, nu)
}

/// `μ_A` for a nonempty subset.
pub fn normalized_indicator<T: RealScalar>(group: &AbelianGroup, set: &ElementSet) -> Result<Measure<T>> {
    Measure::normalized_indicator(group, set)
}

pub fn translate<T: Scalar>(f: &GroupFunction<T>, g: usize) -> GroupFunction<T> {
    f.translate(g)
}

/// A function on the dual group, indexed by character rank.
#[derive(Clone, Debug, PartialEq)]
pub struct DualFunction {
    group: AbelianGroup,
    values: Vec<Complex64>,
}

impl DualFunction {
    pub fn new(group: &AbelianGroup, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::LengthMismatch { expected: group.order(), got: values.len() });
        }
        Ok(Self { group: group.clone(), values })
    }

    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, gamma: usize) -> Complex64 {
        self.values[gamma]
    }

    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { group: self.group.clone(), values })
    }

    pub fn pointwise_pow(&self, p: u32) -> Self {
        Self { group: self.group.clone(), values: self.values.iter().map(|v| v.powu(p)).collect() }
    }

    /// Counting-measure convolution `(F ∗ H)(γ) = Σ_τ F(τ) H(γ − τ)`.
    pub fn convolve_counting(&self, other: &Self) -> Result<Self> {
        if self.group != other.group {
            return Err(Error::GroupMismatch);
        }
        let g = &self.group;
        let values = g
            .elements()
            .map(|gamma| g.elements().map(|tau| self.values[tau] * other.values[g.sub(gamma, tau)]).sum())
            .collect();
        Ok(Self { group: g.clone(), values })
    }

    pub fn p_fold_counting(&self, p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("p-fold convolution needs p ≥ 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..p {
            acc = self.convolve_counting(&acc)?;
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// One DFT pass along every axis, `sign = −1` for the forward direction.
fn per_axis_transform(group: &AbelianGroup, data: &mut [Complex64], sign: f64) {
    let factors = group.factors();
    let k = factors.len();
    let mut stride = 1;
    for j in (0..k).rev() {
        let n = factors[j];
        if n > 1 {
            let twiddle: Vec<Complex64> = (0..n)
                .map(|t| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * t as f64 / n as f64))
                .collect();
            let block = stride * n;
            let mut line = vec![Complex64::zero(); n];
            let mut out = vec![Complex64::zero(); n];
            for base_hi in (0..data.len()).step_by(block) {
                for base_lo in 0..stride {
                    let base = base_hi + base_lo;
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + t * stride];
                    }
                    for (freq, o) in out.iter_mut().enumerate() {
                        let mut acc = Complex64::zero();
                        for (t, v) in line.iter().enumerate() {
                            acc += v * twiddle[(freq * t) % n];
                        }
                        *o = acc;
                    }
                    for (freq, o) in out.iter().enumerate() {
                        data[base + freq * stride] = *o;
                    }
                }
            }
        }
        stride *= n;
    }
}

/// `f̂(γ) = E_x f(x) γ(−x)`, one cyclic axis at a time: `O(|G|·Σ n_j)`.
pub fn fourier_transform<T: Scalar>(f: &GroupFunction<T>) -> DualFunction {
    let group = f.group();
    let mut data: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
    per_axis_transform(group, &mut data, -1.0);
    let n = group.order() as f64;
    for v in &mut data {
        *v /= n;
    }
    DualFunction { group: group.clone(), values: data }
}

/// Reference `O(|G|²)` transform straight from the definition.
pub fn fourier_transform_naive<T: Scalar>(f: &GroupFunction<T>) -> DualFunction {
    let group = f.group();
    let n = group.order() as f64;
    let values = group
        .elements()
        .map(|gamma| {
            let s: Complex64 = group
                .elements()
                .map(|x| f.at(x).to_complex() * group.character(gamma, group.neg(x)))
                .sum();
            s / n
        })
        .collect();
    DualFunction { group: group.clone(), values }
}

/// `f(x) = Σ_γ f̂(γ) γ(x)`.
pub fn inverse_fourier(hat: &DualFunction) -> ComplexFunction {
    let mut data = hat.values.clone();
    per_axis_transform(&hat.group, &mut data, 1.0);
    GroupFunction { group: hat.group.clone(), values: data }
}

/// Real parts of all coefficients at least `−tol`, imaginary parts within `tol`.
pub fn is_spectrally_nonneg<T: Scalar>(f: &GroupFunction<T>, tol: f64) -> bool {
    fourier_transform(f).values().iter().all(|c| c.re >= -tol && c.im.abs() <= tol)
}

/// JSON wire format `{"factors":[..],"kind":"rational|real|complex","values":[..]}`.
pub mod json {
    use super::*;
    use serde::{Deserialize, Serialize};
    use serde_json::Value;

    #[derive(Clone, Debug, PartialEq)]
    pub enum AnyFunction {
        Rational(RationalFunction),
        Real(RealFunction),
        Complex(ComplexFunction),
    }

    #[derive(Serialize, Deserialize)]
    struct Wire {
        factors: Vec<usize>,
        kind: String,
        values: Vec<Value>,
    }

    pub fn rational_to_string(v: &BigRational) -> String {
        format!("{}/{}", v.numer(), v.denom())
    }

    pub fn parse_rational(s: &str) -> Result<BigRational> {
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: BigInt = n.parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d.parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(BigRational::new(n, d))
    }

    pub fn to_value(f: &AnyFunction) -> Value {
        let (group, kind, values): (&AbelianGroup, &str, Vec<Value>) = match f {
            AnyFunction::Rational(f) => (
                f.group(),
                "rational",
                f.values().iter().map(|v| Value::String(rational_to_string(v))).collect(),
            ),
            AnyFunction::Real(f) => (f.group(), "real", f.values().iter().map(|v| Value::from(*v)).collect()),
            AnyFunction::Complex(f) => (
                f.group(),
                "complex",
                f.values().iter().map(|v| Value::from(vec![v.re, v.im])).collect(),
            ),
        };
        serde_json::to_value(Wire { factors: group.factors().to_vec(), kind: kind.into(), values })
            .expect("wire struct serializes")
    }

    pub fn to_string(f: &AnyFunction) -> String {
        to_value(f).to_string()
    }

    pub fn from_str(s: &str) -> Result<AnyFunction> {
        let wire: Wire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let group = AbelianGroup::new(&wire.factors)?;
        let bad = |v: &Value| Error::Parse(format!("unexpected value {v}"));
        match wire.kind.as_str() {
            "rational" => {
                let values = wire
                    .values
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => parse_rational(s),
                        Value::Number(n) if n.is_i64() => Ok(BigRational::from_i64(n.as_i64().unwrap())),
                        other => Err(bad(other)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyFunction::Rational(GroupFunction::new(&group, values)?))
            }
            "real" => {
                let values =
                    wire.values.iter().map(|v| v.as_f64().ok_or_else(|| bad(v))).collect::<Result<Vec<_>>>()?;
                Ok(AnyFunction::Real(GroupFunction::new(&group, values)?))
            }
            "complex" => {
                let values = wire
                    .values
                    .iter()
                    .map(|v| match v.as_array().map(|a| a.as_slice()) {
                        Some([re, im]) => Ok(Complex64::new(
                            re.as_f64().ok_or_else(|| bad(v))?,
                            im.as_f64().ok_or_else(|| bad(v))?,
                        )),
                        _ => Err(bad(v)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyFunction::Complex(GroupFunction::new(&group, values)?))
            }
            other => Err(Error::Parse(format!("unknown kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(n: usize) -> AbelianGroup {
        AbelianGroup::cyclic(n).unwrap()
    }

    fn random_real(g: &AbelianGroup, rng: &mut ChaCha8Rng) -> RealFunction {
        GroupFunction::from_fn(g, |_| rng.gen_range(-1.0..1.0))
    }

    fn random_rational(g: &AbelianGroup, rng: &mut ChaCha8Rng) -> RationalFunction {
        GroupFunction::from_fn(g, |_| rational(rng.gen_range(-5..=5), rng.gen_range(1..=4)))
    }

    #[test]
    fn transform_of_constant_and_delta() {
        let g = AbelianGroup::new(&[2, 3]).unwrap();
        let one = fourier_transform(&RealFunction::constant(&g, 1.0));
        assert!((one.at(0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for gamma in 1..g.order() {
            assert!(one.at(gamma).norm() < 1e-12);
        }
        let delta = fourier_transform(&RealFunction::point_mass(&g, 0, g.order() as f64));
        for gamma in g.elements() {
            assert!((delta.at(gamma) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn fast_transform_matches_naive_on_z6() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = z(6);
        let f = random_real(&g, &mut rng);
        assert!(fourier_transform(&f).max_abs_diff(&fourier_transform_naive(&f)) < 1e-9);
    }

    #[test]
    fn conjugate_symmetry_of_real_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = AbelianGroup::new(&[3, 4]).unwrap();
        let hat = fourier_transform(&random_real(&g, &mut rng));
        for gamma in g.elements() {
            assert!((hat.at(g.neg(gamma)) - hat.at(gamma).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_examples() {
        let g = z(5);
        let one = RationalFunction::constant(&g, BigRational::one());
        assert_eq!(one.convolve(&one).unwrap(), one);
        assert_eq!(one.diff_convolve(&one).unwrap(), one);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_rational(&g, &mut rng);
        let delta = RationalFunction::point_mass(&g, 2, BigRational::from_usize(5));
        assert_eq!(delta.convolve(&f).unwrap(), f.translate(2));

        let norm_sq = f.inner(&f).unwrap();
        assert_eq!(f.diff_convolve(&f).unwrap().at(0), &norm_sq);
    }

    #[test]
    fn indicator_convolution_counts_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = z(8);
        for _ in 0..10 {
            let a = ElementSet::from_predicate(8, |_| rng.gen_bool(0.5));
            let b = ElementSet::from_predicate(8, |_| rng.gen_bool(0.5));
            let conv = RationalFunction::indicator(&g, &a).convolve(&RationalFunction::indicator(&g, &b)).unwrap();
            for x in g.elements() {
                let pairs = a.iter().filter(|&y| b.contains(g.sub(x, y))).count();
                assert_eq!(conv.at(x) * BigRational::from_usize(64), BigRational::from_usize(pairs * 8));
            }
        }
    }

    #[test]
    fn adjoint_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = z(5);
        let (f, gg, h) = (random_rational(&g, &mut rng), random_rational(&g, &mut rng), random_rational(&g, &mut rng));
        let lhs = f.inner(&gg.convolve(&h).unwrap()).unwrap();
        let rhs = h.diff_convolve(&f).unwrap().inner(&gg).unwrap();
        // Both sides by direct summation.
        let n = BigRational::from_usize(5);
        let mut direct = BigRational::zero();
        for x in 0..5 {
            for y in 0..5 {
                direct += f.at(x) * gg.at(y) * h.at(g.sub(x, y));
            }
        }
        direct = direct / (n.clone() * n);
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, direct);
    }

    #[test]
    fn p_fold_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = z(4);
        let f = random_rational(&g, &mut rng);
        assert_eq!(f.p_fold_convolve(1).unwrap(), f);
        let one = RationalFunction::constant(&g, BigRational::one());
        assert_eq!(one.p_fold_convolve(4).unwrap(), one);
        let iterated = f.convolve(&f).unwrap().convolve(&f).unwrap();
        assert_eq!(f.p_fold_convolve(3).unwrap(), iterated);
        assert!(f.p_fold_convolve(0).is_err());

        let fr = f.to_real();
        let hat = fourier_transform(&fr);
        let folded = fourier_transform(&fr.p_fold_convolve(3).unwrap());
        assert!(folded.max_abs_diff(&hat.pointwise_pow(3)) < 1e-9);
        // Pointwise powers on the group side become counting-measure
        // convolutions on the dual side.
        let powered = fourier_transform(&fr.pointwise_pow(3));
        assert!(powered.max_abs_diff(&hat.p_fold_counting(3).unwrap()) < 1e-9);
    }

    #[test]
    fn norms() {
        let g = z(6);
        let c = RealFunction::constant(&g, -2.5);
        let b = ElementSet::from_elements(6, [0, 1, 5]);
        let mu_b: RealMeasure = Measure::normalized_indicator(&g, &b).unwrap();
        for p in [1, 2, 3] {
            assert!((lp_norm(&c, NormOrder::Finite(p), Some(&mu_b)).unwrap() - 2.5).abs() < 1e-12);
        }
        let a = ElementSet::from_elements(6, [2, 3]);
        let mu_a: RealMeasure = Measure::normalized_indicator(&g, &a).unwrap();
        assert!((lp_norm::<f64, f64>(mu_a.as_function(), NormOrder::Infinity, None).unwrap() - 3.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_real(&g, &mut rng);
        let direct = (g.elements().map(|x| mu_b.as_function().at(x) * f.at(x).powi(2)).sum::<f64>() / 6.0).sqrt();
        assert!((lp_norm(&f, NormOrder::Finite(2), Some(&mu_b)).unwrap() - direct).abs() < 1e-12);

        let fq = random_rational(&g, &mut rng);
        let mu_bq: RationalMeasure = Measure::normalized_indicator(&g, &b).unwrap();
        let exact = lp_norm_exact(&fq, 4, Some(&mu_bq)).unwrap();
        let float = lp_norm(&fq, NormOrder::Finite(4), Some(&mu_bq)).unwrap();
        assert!((exact.value - float).abs() < 1e-12);
        assert!(lp_norm(&f, NormOrder::Finite(0), Some(&mu_b)).is_err());
    }

    #[test]
    fn measures_and_normalized_indicators() {
        let g = z(8);
        let full: RationalMeasure = Measure::normalized_indicator(&g, &ElementSet::full(8)).unwrap();
        assert_eq!(full, Measure::uniform(&g));
        let zero: RationalMeasure = Measure::normalized_indicator(&g, &ElementSet::singleton(8, 0)).unwrap();
        assert_eq!(zero.as_function().at(0), &BigRational::from_usize(8));
        assert!(zero.as_function().values()[1..].iter().all(|v| v.is_zero()));
        assert!(matches!(
            Measure::<BigRational>::normalized_indicator(&g, &ElementSet::empty(8)),
            Err(Error::EmptySet)
        ));

        let bad = RationalFunction::constant(&g, rational(1, 2));
        assert!(matches!(Measure::new(bad), Err(Error::NotAMeasure(_))));
        let neg = RationalFunction::from_fn(&g, |x| if x == 0 { rational(-1, 1) } else { rational(9, 7) });
        assert!(matches!(Measure::new(neg), Err(Error::NotAMeasure(_))));

        // ν_f with ν = μ_B, f = 1_A equals μ_{A∩B}.
        let a = ElementSet::from_elements(8, [1, 2, 3, 6]);
        let b = ElementSet::from_elements(8, [0, 1, 2, 7]);
        let mu_b: RationalMeasure = Measure::normalized_indicator(&g, &b).unwrap();
        let rel = Measure::relative(Some(&mu_b), &RationalFunction::indicator(&g, &a)).unwrap();
        let direct: RationalMeasure = Measure::normalized_indicator(&g, &a.intersection(&b)).unwrap();
        assert_eq!(rel, direct);
        let disjoint = RationalFunction::indicator(&g, &ElementSet::from_elements(8, [4]));
        assert!(matches!(Measure::relative(Some(&mu_b), &disjoint), Err(Error::ZeroMass)));
    }

    #[test]
    fn inner_products() {
        let g = z(7);
        let one = RationalFunction::constant(&g, BigRational::one());
        assert!(one.inner(&one).unwrap().is_one());
        let a = ElementSet::from_elements(7, [1, 4]);
        let mu_a: RationalMeasure = Measure::normalized_indicator(&g, &a).unwrap();
        assert!(mu_a.as_function().inner(&RationalFunction::indicator(&g, &a)).unwrap().is_one());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (f, h) = (random_real(&g, &mut rng), random_real(&g, &mut rng));
        let (fh, hh) = (fourier_transform(&f), fourier_transform(&h));
        let plancherel: f64 = g.elements().map(|gamma| (fh.at(gamma) * hh.at(gamma).conj()).re).sum();
        assert!((f.inner(&h).unwrap() - plancherel).abs() < 1e-9);
    }

    #[test]
    fn translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = AbelianGroup::new(&[2, 4]).unwrap();
        let f = random_rational(&g, &mut rng);
        assert_eq!(f.translate(0), f);
        for s in g.elements() {
            assert_eq!(f.translate(s).translate(g.neg(s)), f);
        }
        let delta = RationalFunction::indicator(&g, &ElementSet::singleton(8, 3));
        assert_eq!(delta.translate(5), RationalFunction::indicator(&g, &ElementSet::singleton(8, g.add(3, 5))));
        let fr = f.to_real();
        let n2 = lp_norm::<f64, f64>(&fr, NormOrder::Finite(3), None).unwrap();
        assert!((lp_norm::<f64, f64>(&fr.translate(6), NormOrder::Finite(3), None).unwrap() - n2).abs() < 1e-12);
    }

    #[test]
    fn spectral_nonnegativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = z(9);
        let f = random_real(&g, &mut rng);
        assert!(is_spectrally_nonneg(&f.diff_convolve(&f).unwrap(), 1e-9));

        let g5 = z(5);
        let spike = RealFunction::point_mass(&g5, 0, 5.0).add_constant(&-1.0);
        assert!(is_spectrally_nonneg(&spike, 1e-9));

        // 1_{1} − 1_{2} on Z/4: coefficients (0, (−i − (−1))/4, (−1 − 1)/4, (i + 1)/4).
        let g4 = z(4);
        let f = RealFunction::from_fn(&g4, |x| match x {
            1 => 1.0,
            2 => -1.0,
            _ => 0.0,
        });
        let hat = fourier_transform(&f);
        assert!((hat.at(2) - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        assert!((hat.at(1) - Complex64::new(0.25, -0.25)).norm() < 1e-12);
        assert!(!is_spectrally_nonneg(&f, 1e-9));
    }

    #[test]
    fn json_round_trip_preserves_kind() {
        let g = AbelianGroup::new(&[2, 3]).unwrap();
        let q = json::AnyFunction::Rational(GroupFunction::from_fn(&g, |x| rational(x as i64 - 2, 3)));
        let text = json::to_string(&q);
        assert!(text.contains("\"-2/3\""));
        assert_eq!(json::from_str(&text).unwrap(), q);
        let c = json::AnyFunction::Complex(GroupFunction::from_fn(&g, |x| Complex64::new(x as f64, -0.5)));
        assert_eq!(json::from_str(&json::to_string(&c)).unwrap(), c);
        assert!(json::from_str(r#"{"factors":[2],"kind":"real","values":[1.0]}"#).is_err());
        assert!(json::from_str(r#"{"factors":[2],"kind":"rational","values":["1/0","2"]}"#).is_err());
    }
}
