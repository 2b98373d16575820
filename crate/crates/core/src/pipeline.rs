//! The analytic chain behind the structure-vs-pseudorandomness dichotomy:
//! non-uniformity, decoupling, unbalancing, robust witnesses by dependent
//! random choice, almost periodicity, and the driver combining them.
//!
//! Steps whose proofs live elsewhere are run as searches whose outputs are
//! checked against their contracts before being returned.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bohr::BohrSet;
use crate::config::Constants;
use crate::corners::{count_skew_corners_brute, ColumnFamily, SkewInstance};
use crate::error::{Error, Result};
use crate::function::json::rational_to_string;
use crate::function::{is_spectrally_nonneg, RationalFunction, RealFunction, RealMeasure};
use crate::group::{AbelianGroup, ElementSet};
use crate::spread::{autocorrelation_counts, infnorm_value};
use crate::subspace::{enumerate_subspaces, Subspace};

/// Largest group on which the exhaustive witness fallback runs.
pub const EXHAUSTIVE_WITNESS_MAX_ORDER: usize = 16;

/// A parameter as an exact rational.
pub fn exact_param(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn indicator(n: usize, set: &ElementSet) -> Vec<f64> {
    (0..n).map(|x| if set.contains(x) { 1.0 } else { 0.0 }).collect()
}

fn mu(n: usize, set: &ElementSet) -> Vec<f64> {
    let scale = n as f64 / set.len() as f64;
    (0..n).map(|x| if set.contains(x) { scale } else { 0.0 }).collect()
}

/// `(f ∘ h)(x) = E_y f(y) h(x + y)`.
fn diff_conv(group: &AbelianGroup, f: &[f64], h: &[f64]) -> Vec<f64> {
    let n = group.order();
    let support: Vec<usize> = (0..n).filter(|&y| f[y] != 0.0).collect();
    (0..n)
        .map(|x| support.iter().map(|&y| f[y] * h[group.add(x, y)]).sum::<f64>() / n as f64)
        .collect()
}

/// `(f ∗ h)(x) = E_y f(y) h(x − y)`.
fn conv(group: &AbelianGroup, f: &[f64], h: &[f64]) -> Vec<f64> {
    let n = group.order();
    let support: Vec<usize> = (0..n).filter(|&y| f[y] != 0.0).collect();
    (0..n)
        .map(|x| support.iter().map(|&y| f[y] * h[group.sub(x, y)]).sum::<f64>() / n as f64)
        .collect()
}

fn mean_inner(f: &[f64], h: &[f64]) -> f64 {
    f.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
}

/// `(E_x ν(x)|f(x)|^p)^{1/p}`, scaled by the largest `|f|` on the support
/// of `ν` so that large `p` does not overflow.
pub fn measured_norm(values: &[f64], nu: Option<&[f64]>, p: u32) -> f64 {
    let weight = |x: usize| nu.map_or(1.0, |nu| nu[x]);
    let m = (0..values.len()).filter(|&x| weight(x) > 0.0).map(|x| values[x].abs()).fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = (0..values.len()).map(|x| weight(x) * (values[x].abs() / m).powi(p as i32)).sum::<f64>()
        / values.len() as f64;
    m * s.powf(1.0 / f64::from(p))
}

fn check_column_mass(fam: &ColumnFamily, d: u32, index_size: usize, container: usize) -> Result<()> {
    let lhs = BigInt::from(fam.total_size()) << d;
    if lhs < BigInt::from(index_size) * BigInt::from(container) {
        return Err(Error::Precondition(format!(
            "Σ|A_g| = {} is below 2^-{d} · {index_size} · {container}",
            fam.total_size()
        )));
    }
    Ok(())
}

/// `K_F(x) = Σ_g #{y ∈ A_g : x + y − g ∈ A_g}`, so `F = K_F / |G|`.
fn corner_counts(fam: &ColumnFamily) -> Vec<u128> {
    let group = fam.group();
    let mut k = vec![0u128; group.order()];
    for g in fam.index().iter() {
        let col = fam.column(g);
        for y in col.iter() {
            for z in col.iter() {
                // z = x + y − g
                k[group.add(group.sub(z, y), g)] += 1;
            }
        }
    }
    k
}

/// `η = ⟨μ_F, μ_D⟩` with `F = Σ_g 1_{A_g} ∘ 1_{A_g+g}` and `D(x) = |A_x|`.
pub fn corner_eta(fam: &ColumnFamily) -> Result<BigRational> {
    if fam.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = corner_counts(fam);
    let dprof = fam.profile();
    let kd: u128 = k.iter().zip(dprof).map(|(&a, &b)| a * b as u128).sum();
    let n = fam.group().order() as u128;
    Ok(ratio(n * kd, fam.square_sum() * fam.total_size() as u128))
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonUniformity {
    Uniform {
        eta: BigRational,
    },
    Gap {
        eta: BigRational,
        p: u32,
        /// `‖μ_F − 1‖_p`.
        gap: f64,
        /// `‖μ_F − 1‖_p ‖μ_D‖_∞^{1/p}`, which must exceed `ε`.
        holder: f64,
        mu_d_sup: f64,
    },
}

impl NonUniformity {
    pub fn eta(&self) -> &BigRational {
        match self {
            NonUniformity::Uniform { eta } | NonUniformity::Gap { eta, .. } => eta,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            NonUniformity::Uniform { eta } => json!({"branch": "uniform", "eta": rational_to_string(eta)}),
            NonUniformity::Gap { eta, p, gap, holder, mu_d_sup } => json!({
                "branch": "gap", "eta": rational_to_string(eta), "p": p, "gap": gap,
                "holder": holder, "mu_d_sup": mu_d_sup,
            }),
        }
    }
}

/// Either `|⟨μ_F, μ_D⟩ − 1| ≤ ε`, or `‖μ_F − 1‖_p ≥ ε/2` with `p = ⌈d⌉`.
pub fn nonuniformity_gap(fam: &ColumnFamily, eps: f64, d: u32) -> Result<NonUniformity> {
    let group = fam.group();
    let n = group.order();
    check_column_mass(fam, d, n, n)?;
    let eta = corner_eta(fam)?;
    if (&eta - BigRational::one()).abs() <= exact_param(eps) {
        return Ok(NonUniformity::Uniform { eta });
    }
    let p = d.max(1);
    let k = corner_counts(fam);
    let sq = fam.square_sum() as f64;
    let centered: Vec<f64> = k.iter().map(|&v| v as f64 * n as f64 / sq - 1.0).collect();
    let gap = measured_norm(&centered, None, p);
    let total = fam.total_size() as f64;
    let mu_d_sup = fam.profile().iter().map(|&v| v as f64 * n as f64 / total).fold(0.0, f64::max);
    let holder = gap * mu_d_sup.powf(1.0 / f64::from(p));
    if mu_d_sup > 2f64.powi(d as i32) * (1.0 + 1e-12) {
        return Err(Error::BugTrap(format!("‖μ_D‖_∞ = {mu_d_sup} exceeds 2^{d}")));
    }
    if !(holder > eps - 1e-12) || gap < eps / 2.0 - 1e-12 {
        return Err(Error::BugTrap(format!("Hölder chain fails: gap {gap}, holder {holder}, eps {eps}")));
    }
    Ok(NonUniformity::Gap { eta, p, gap, holder, mu_d_sup })
}

/// Bohr-case non-uniformity with the four error terms reported separately.
#[derive(Clone, Debug, PartialEq)]
pub struct BohrNonUniformity {
    pub eta: f64,
    pub mu_r_inv: f64,
    pub uniform: bool,
    /// The main term and the three error terms of the expansion of
    /// `⟨(1/α) f_0, μ_D⟩`.
    pub terms: [f64; 4],
    pub term_bound: f64,
    pub terms_ok: bool,
    /// `|⟨(1/α) f_0, μ_D⟩ − (t1 − t2 − t3 + t4)|`.
    pub identity_defect: f64,
    pub p: u32,
    /// `‖(1/α) f_0‖_{p(μ_C)}`.
    pub gap: f64,
    pub gap_bound: f64,
    pub gap_ok: bool,
    /// `σ ≤ c_σ ε / (r 2^d)`.
    pub regime: bool,
    pub diagnostics: Vec<String>,
}

impl BohrNonUniformity {
    /// Asserted checks pass; outside the regime nothing is asserted.
    pub fn ok(&self) -> bool {
        !self.regime || (self.terms_ok && (self.uniform || self.gap_ok))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "eta": self.eta, "mu_r_inv": self.mu_r_inv, "uniform": self.uniform,
            "terms": self.terms, "term_bound": self.term_bound, "terms_ok": self.terms_ok,
            "identity_defect": self.identity_defect, "p": self.p, "gap": self.gap,
            "gap_bound": self.gap_bound, "gap_ok": self.gap_ok, "regime": self.regime,
            "diagnostics": self.diagnostics,
        })
    }
}

/// Smallest even `p ≥ 2` with `2^{d/p} ≤ 3/2`.
pub fn even_moment_for(d: u32) -> u32 {
    let need = (f64::from(d) / 1.5f64.log2()).ceil() as u32;
    let p = need.max(2);
    p + p % 2
}

/// Family indexed inside `C = R_σ`, columns inside `R`.
pub fn nonuniformity_gap_bohr(
    fam: &ColumnFamily,
    r_set: &BohrSet,
    sigma: f64,
    eps: f64,
    d: u32,
    consts: &Constants,
) -> Result<BohrNonUniformity> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must be positive")));
    }
    let group = fam.group();
    if group != r_set.group() {
        return Err(Error::GroupMismatch);
    }
    let n = group.order();
    let c_set = r_set.dilate(sigma)?;
    let c = c_set.members();
    let r = r_set.members();
    if !fam.index().is_subset(c) {
        return Err(Error::Precondition("index set is not inside R_σ".into()));
    }
    if let Some(g) = fam.index().iter().find(|&g| !fam.column(g).is_subset(r)) {
        return Err(Error::Precondition(format!("column {g} is not inside R")));
    }
    if fam.is_empty() {
        return Err(Error::EmptySet);
    }
    check_column_mass(fam, d, c.len(), r.len())?;
    let mut diagnostics = Vec::new();
    let rank = r_set.rank() as f64;
    let regime = sigma <= consts.c_sigma * eps / (rank * 2f64.powi(d as i32));
    if !regime {
        diagnostics.push(format!("sigma = {sigma} outside the regime c_sigma·ε/(r·2^d)"));
    }
    let mu_r_inv = n as f64 / r.len() as f64;
    let mu_r = mu(n, r);
    let total = fam.total_size() as f64;
    let mu_d: Vec<f64> = fam.profile().iter().map(|&v| v as f64 * n as f64 / total).collect();
    let alpha_g = |g: usize| fam.column(g).len() as f64 / n as f64;
    let alpha: f64 = fam.index().iter().map(|g| alpha_g(g).powi(2)).sum();

    let mut f0 = vec![0.0; n];
    let mut t = [0.0f64; 4];
    for g in fam.index().iter() {
        let a = alpha_g(g);
        let one_a = indicator(n, fam.column(g));
        let one_ag = indicator(n, &fam.column(g).translate(group, g));
        let mu_rg = mu(n, &r.translate(group, g));
        let c1 = diff_conv(group, &one_a, &one_ag);
        let c2 = diff_conv(group, &one_a, &mu_rg);
        let c3 = diff_conv(group, &mu_r, &one_ag);
        let c4 = diff_conv(group, &mu_r, &mu_rg);
        t[0] += mean_inner(&c1, &mu_d);
        t[1] += a * mean_inner(&c2, &mu_d);
        t[2] += a * mean_inner(&c3, &mu_d);
        t[3] += a * a * mean_inner(&c4, &mu_d);
        for x in 0..n {
            f0[x] += c1[x] - a * c2[x] - a * c3[x] + a * a * c4[x];
        }
    }
    for v in f0.iter_mut() {
        *v /= alpha;
    }
    for ti in t.iter_mut() {
        *ti = *ti / alpha - mu_r_inv;
    }
    let eta = t[0] + mu_r_inv;
    let identity_defect = (mean_inner(&f0, &mu_d) - (t[0] - t[1] - t[2] + t[3])).abs();
    let term_bound = eps / 16.0 * mu_r_inv;
    let terms_ok = t[1..].iter().all(|v| v.abs() <= term_bound + consts.tol);
    if regime && !terms_ok {
        diagnostics.push(format!("error terms {:?} exceed {term_bound}", &t[1..]));
    }
    let uniform = (eta - mu_r_inv).abs() <= eps * mu_r_inv + consts.tol;
    let p = even_moment_for(d);
    let mu_c = mu(n, c);
    let gap = measured_norm(&f0, Some(&mu_c), p);
    let gap_bound = eps / 2.0 * mu_r_inv;
    let gap_ok = gap >= gap_bound - consts.tol;
    Ok(BohrNonUniformity {
        eta,
        mu_r_inv,
        uniform,
        terms: t,
        term_bound,
        terms_ok,
        identity_defect,
        p,
        gap,
        gap_bound,
        gap_ok,
        regime,
        diagnostics,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl NormComparison {
    pub fn to_json(&self) -> Value {
        json!({"lhs": self.lhs, "rhs": self.rhs, "pass": self.pass})
    }
}

fn collection_sums(fs: &[(usize, RealFunction)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let group = fs.first().map(|(_, f)| f.group().clone()).ok_or(Error::EmptySet)?;
    let n = group.order();
    let mut same = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    for (g, f) in fs {
        if f.group() != &group {
            return Err(Error::GroupMismatch);
        }
        group.check_rank(*g)?;
        let v = f.values();
        let vg = f.translate(*g);
        let a = diff_conv(&group, v, v);
        let b = diff_conv(&group, v, vg.values());
        for x in 0..n {
            same[x] += a[x];
            shifted[x] += b[x];
        }
    }
    Ok((same, shifted))
}

/// `‖Σ f_g ∘ f_g‖_p` and `‖Σ f_g ∘ f_g^g‖_p` for any `p ≥ 1`, without asserting.
pub fn decoupling_measure(fs: &[(usize, RealFunction)], p: u32) -> Result<NormComparison> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    let (same, shifted) = collection_sums(fs)?;
    let lhs = measured_norm(&same, None, p);
    let rhs = measured_norm(&shifted, None, p);
    Ok(NormComparison { lhs, rhs, pass: lhs >= rhs - 1e-9 })
}

/// `‖Σ f_g ∘ f_g‖_p ≥ ‖Σ f_g ∘ f_g^g‖_p` for even `p`.
pub fn decoupling_check(fs: &[(usize, RealFunction)], p: u32) -> Result<NormComparison> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::InvalidParameter(format!("decoupling needs an even p, got {p}")));
    }
    decoupling_measure(fs, p)
}

/// `ν = μ_{B′} ∘ μ_{B′} ∗ μ_{B″} ∘ μ_{B″}`.
pub fn shift_removal_measure(group: &AbelianGroup, b1: &ElementSet, b2: &ElementSet) -> Vec<f64> {
    let n = group.order();
    let m1 = mu(n, b1);
    let m2 = mu(n, b2);
    conv(group, &diff_conv(group, &m1, &m1), &diff_conv(group, &m2, &m2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftRemovalReport {
    /// `‖Σ f_g ∘ f_g‖_{p(ν)}`.
    pub lhs: f64,
    /// `‖Σ f_g ∘ f_g^g‖_{p(μ_B)}`.
    pub rhs: f64,
    pub pass: bool,
}

impl ShiftRemovalReport {
    pub fn to_json(&self) -> Value {
        json!({"lhs": self.lhs, "rhs": self.rhs, "pass": self.pass})
    }
}

/// Checks `‖Σ f_g ∘ f_g‖_{p(ν)} ≥ ½ ‖Σ f_g ∘ f_g^g‖_{p(μ_B)}` for regular
/// `B` and regular `B′, B″ ⊆ B_τ` with `τ ≤ c_τ / rk(B)`.
pub fn shift_removal_check(
    fs: &[(usize, RealFunction)],
    b: &BohrSet,
    b1: &BohrSet,
    b2: &BohrSet,
    tau: f64,
    p: u32,
    consts: &Constants,
) -> Result<ShiftRemovalReport> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::InvalidParameter(format!("shift removal needs an even p, got {p}")));
    }
    if tau > consts.c_tau / b.rank() as f64 {
        return Err(Error::Precondition(format!("tau = {tau} exceeds c_tau / rk(B)")));
    }
    let narrow = b.dilate(tau)?;
    for (name, set) in [("B", b), ("B′", b1), ("B″", b2)] {
        if !set.is_regular() {
            return Err(Error::Precondition(format!("{name} is not regular")));
        }
    }
    for (name, set) in [("B′", b1), ("B″", b2)] {
        if !set.members().is_subset(narrow.members()) {
            return Err(Error::Precondition(format!("{name} is not inside B_τ")));
        }
    }
    let (same, shifted) = collection_sums(fs)?;
    let group = b.group();
    let nu = shift_removal_measure(group, b1.members(), b2.members());
    let mu_b = mu(group.order(), b.members());
    let lhs = measured_norm(&same, Some(&nu), p);
    let rhs = measured_norm(&shifted, Some(&mu_b), p);
    Ok(ShiftRemovalReport { lhs, rhs, pass: lhs >= rhs / 2.0 - 1e-9 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnbalanceReport {
    pub p_prime: u32,
    /// `‖f + 1‖_{p′(ν)}`.
    pub value: f64,
    pub target: f64,
    pub p_max: u32,
    /// `‖f‖_{p(ν)}`.
    pub input_norm: f64,
}

impl UnbalanceReport {
    pub fn to_json(&self) -> Value {
        json!({"p_prime": self.p_prime, "value": self.value, "target": self.target,
               "p_max": self.p_max, "input_norm": self.input_norm})
    }
}

/// Smallest `p′ ≤ P_max` with `‖f + 1‖_{p′(ν)} ≥ 1 + ε/2`, given spectrally
/// non-negative `f` and `ν` and `‖f‖_{p(ν)} ≥ ε`.
pub fn unbalance(f: &RealFunction, nu: &RealMeasure, eps: f64, p: u32, consts: &Constants) -> Result<UnbalanceReport> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    if f.group() != nu.group() {
        return Err(Error::GroupMismatch);
    }
    if !is_spectrally_nonneg(f, consts.tol) {
        return Err(Error::Precondition("f has a negative Fourier coefficient".into()));
    }
    if !is_spectrally_nonneg(nu.as_function(), consts.tol) {
        return Err(Error::Precondition("ν has a negative Fourier coefficient".into()));
    }
    let weights = nu.as_function().values();
    let input_norm = measured_norm(f.values(), Some(weights), p);
    if input_norm < eps {
        return Err(Error::Precondition(format!("‖f‖_p(ν) = {input_norm} is below ε = {eps}")));
    }
    let shifted: Vec<f64> = f.values().iter().map(|v| v + 1.0).collect();
    let target = 1.0 + eps / 2.0;
    let p_max = (consts.unbalance_factor * f64::from(p) / eps).ceil() as u32;
    for q in 1..=p_max {
        let value = measured_norm(&shifted, Some(weights), q);
        if value >= target {
            return Ok(UnbalanceReport { p_prime: q, value, target, p_max, input_norm });
        }
    }
    let last = measured_norm(&shifted, Some(weights), p_max);
    Err(Error::BugTrap(format!(
        "no p′ ≤ {p_max} reaches ‖f+1‖ ≥ {target}; at p_max the norm is {last}, input norm {input_norm}"
    )))
}

/// Sets `M₁ ⊆ B₁`, `M₂ ⊆ B₂` with their relative densities.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessPair {
    pub m1: ElementSet,
    pub m2: ElementSet,
    pub density1: f64,
    pub density2: f64,
}

impl WitnessPair {
    fn new(m1: ElementSet, m2: ElementSet, b1: &ElementSet, b2: &ElementSet) -> Self {
        let density1 = m1.len() as f64 / b1.len() as f64;
        let density2 = m2.len() as f64 / b2.len() as f64;
        Self { m1, m2, density1, density2 }
    }

    pub fn min_density(&self) -> f64 {
        self.density1.min(self.density2)
    }
}

/// `S = {x : μ_f(x) > θ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub threshold: f64,
    pub set: ElementSet,
    /// The norm the threshold was derived from, and its order.
    pub norm: f64,
    pub p: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessMethod {
    Trivial,
    DependentChoice { points: usize, trial: u64 },
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustWitness {
    pub pair: WitnessPair,
    pub level: LevelSet,
    /// `⟨μ_{M₁} ∘ μ_{M₂}, 1_S⟩`, exact.
    pub correlation: BigRational,
    pub method: WitnessMethod,
    /// `(2^{-d} ‖μ_f‖_{p(ν)})^{2p}`, reported only.
    pub density_floor: f64,
    /// `ζ` of the embedding into `G × G`.
    pub zeta: f64,
}

impl RobustWitness {
    pub fn to_json(&self) -> Value {
        let method = match &self.method {
            WitnessMethod::Trivial => json!({"kind": "trivial"}),
            WitnessMethod::DependentChoice { points, trial } => {
                json!({"kind": "dependent_choice", "points": points, "trial": trial})
            }
            WitnessMethod::Exhaustive => json!({"kind": "exhaustive"}),
        };
        json!({
            "m1": self.pair.m1.to_vec(), "m2": self.pair.m2.to_vec(),
            "density1": self.pair.density1, "density2": self.pair.density2,
            "threshold": self.level.threshold, "level_set": self.level.set.to_vec(),
            "norm": self.level.norm, "p": self.level.p,
            "correlation": rational_to_string(&self.correlation),
            "method": method, "density_floor": self.density_floor, "zeta": self.zeta,
        })
    }
}

/// `⟨μ_{M₁} ∘ μ_{M₂}, 1_S⟩`: the fraction of pairs `(y, z) ∈ M₁ × M₂` with `z − y ∈ S`.
pub fn pair_correlation(group: &AbelianGroup, m1: &ElementSet, m2: &ElementSet, s: &ElementSet) -> BigRational {
    let z: Vec<usize> = m2.to_vec();
    let hits: u128 = m1.iter().map(|y| z.iter().filter(|&&b| s.contains(group.sub(b, y))).count() as u128).sum();
    ratio(hits, m1.len() as u128 * m2.len() as u128)
}

/// For each `M₁ ⊆ B₁` the best `M₂` is a prefix of `B₂` sorted by the
/// fraction of `M₁` it meets in `S`; scanning every `M₁` maximizes the
/// smaller of the two densities. Ties keep the first mask.
pub fn exhaustive_witness_pair(
    group: &AbelianGroup,
    b1: &ElementSet,
    b2: &ElementSet,
    s: &ElementSet,
    delta: f64,
) -> Result<Option<WitnessPair>> {
    if group.order() > EXHAUSTIVE_WITNESS_MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "exhaustive witness search is limited to groups of order ≤ {EXHAUSTIVE_WITNESS_MAX_ORDER}"
        )));
    }
    let e1 = b1.to_vec();
    let e2 = b2.to_vec();
    let need = BigRational::one() - exact_param(delta);
    let masks: Vec<u32> = (1u32..(1u32 << e1.len())).collect();
    let results: Vec<Option<(usize, usize, u32, Vec<usize>)>> = masks
        .par_iter()
        .map(|&mask| {
            let m1: Vec<usize> = (0..e1.len()).filter(|&i| mask >> i & 1 == 1).map(|i| e1[i]).collect();
            let mut hits: Vec<(usize, usize)> =
                e2.iter().map(|&z| (m1.iter().filter(|&&y| s.contains(group.sub(z, y))).count(), z)).collect();
            hits.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut acc = 0u128;
            let mut best_len = 0;
            for (k, &(h, _)) in hits.iter().enumerate() {
                acc += h as u128;
                if ratio(acc, (k as u128 + 1) * m1.len() as u128) >= need {
                    best_len = k + 1;
                }
            }
            (best_len > 0).then(|| (m1.len(), best_len, mask, hits[..best_len].iter().map(|&(_, z)| z).collect()))
        })
        .collect();
    let mut best: Option<(usize, usize, u32, Vec<usize>)> = None;
    let score = |a: usize, b: usize| (a as f64 / e1.len() as f64).min(b as f64 / e2.len() as f64);
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| score(r.0, r.1) > score(b.0, b.1)) {
            best = Some(r);
        }
    }
    Ok(best.map(|(_, _, mask, m2)| {
        let n = group.order();
        let m1 = ElementSet::from_elements(n, (0..e1.len()).filter(|&i| mask >> i & 1 == 1).map(|i| e1[i]));
        WitnessPair::new(m1, ElementSet::from_elements(n, m2), b1, b2)
    }))
}

/// `μ_f` for `f = Σ_{g ∈ C} 1_{A_g} ∘ 1_{A_g}`.
pub fn autocorrelation_measure(fam: &ColumnFamily) -> Vec<f64> {
    let n = fam.group().order() as f64;
    let sq = fam.square_sum() as f64;
    autocorrelation_counts(fam).iter().map(|&k| k as f64 * n / sq).collect()
}

/// `ν = μ_{B₁} ∘ μ_{B₂}`.
pub fn difference_measure(group: &AbelianGroup, b1: &ElementSet, b2: &ElementSet) -> Vec<f64> {
    let n = group.order();
    diff_conv(group, &mu(n, b1), &mu(n, b2))
}

/// Robust witness: `M₁ ⊆ B₁`, `M₂ ⊆ B₂` with `⟨μ_{M₁} ∘ μ_{M₂}, 1_S⟩ ≥ 1 − δ`
/// for `S = {μ_f > (1 − ε) ‖μ_f‖_{p(ν)}}`, `ν = μ_{B₁} ∘ μ_{B₂}`.
///
/// Tries `(B₁, B₂)` itself, then dependent random choice inside
/// `H = G × G` on the embedded set `{(g, y) : y ∈ A_g}`, then the exhaustive
/// search on small groups.
#[allow(clippy::too_many_arguments)]
pub fn find_robust_witness(
    fam: &ColumnFamily,
    b1: &ElementSet,
    b2: &ElementSet,
    p: u32,
    eps: f64,
    delta: f64,
    d: u32,
    consts: &Constants,
    seed: u64,
) -> Result<RobustWitness> {
    let group = fam.group();
    let n = group.order();
    if b1.is_empty() || b2.is_empty() || fam.is_empty() {
        return Err(Error::EmptySet);
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    check_column_mass(fam, d, n, fam.index().len())?;
    let mu_f = autocorrelation_measure(fam);
    let nu = difference_measure(group, b1, b2);
    let norm = measured_norm(&mu_f, Some(&nu), p);
    let threshold = (1.0 - eps) * norm;
    let s = ElementSet::from_predicate(n, |x| mu_f[x] > threshold);
    let level = LevelSet { threshold, set: s.clone(), norm, p };
    let need = BigRational::one() - exact_param(delta);
    let total = fam.total_size() as f64;
    let zeta = n as f64 * fam.square_sum() as f64 / (total * total);
    let density_floor = (norm / 2f64.powi(d as i32)).powi(2 * p as i32);
    let finish = |pair: WitnessPair, method: WitnessMethod| -> Result<RobustWitness> {
        let correlation = pair_correlation(group, &pair.m1, &pair.m2, &s);
        if correlation < need || !pair.m1.is_subset(b1) || !pair.m2.is_subset(b2) || pair.m1.is_empty() || pair.m2.is_empty() {
            return Err(Error::BugTrap("witness pair failed its contract on recomputation".into()));
        }
        Ok(RobustWitness { pair, level: level.clone(), correlation, method, density_floor, zeta })
    };

    if pair_correlation(group, b1, b2, &s) >= need {
        return finish(WitnessPair::new(b1.clone(), b2.clone(), b1, b2), WitnessMethod::Trivial);
    }

    // Dependent random choice in H = G × G with L = {0} × G: a point
    // (0, b) survives the translate A − (g, y) iff b + y ∈ A_g.
    let h = AbelianGroup::new(&[group.factors(), group.factors()].concat())?;
    let embed = |g: usize, y: usize| g * n + y;
    let a_h = ElementSet::from_elements(h.order(), fam.points().map(|(g, y)| embed(g, y)));
    let nonempty: Vec<usize> = fam.index().iter().filter(|&g| !fam.column(g).is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_points = (2 * p as usize + 2).max(2);
    let mut best: Option<(BigRational, WitnessPair, usize, u64)> = None;
    for trial in 0..consts.witness_trials {
        let points = 1 + (trial as usize % max_points);
        let shifts: Vec<usize> =
            (0..points).map(|_| embed(nonempty[rng.gen_range(0..nonempty.len())], rng.gen_range(0..n))).collect();
        let sift = |base: &ElementSet| {
            ElementSet::from_predicate(n, |b| {
                base.contains(b) && shifts.iter().all(|&s0| a_h.contains(h.add(embed(0, b), s0)))
            })
        };
        let m1 = sift(b1);
        let m2 = sift(b2);
        if m1.is_empty() || m2.is_empty() {
            continue;
        }
        let corr = pair_correlation(group, &m1, &m2, &s);
        let pair = WitnessPair::new(m1, m2, b1, b2);
        if corr >= need {
            return finish(pair, WitnessMethod::DependentChoice { points, trial });
        }
        if best.as_ref().is_none_or(|b| corr > b.0) {
            best = Some((corr, pair, points, trial));
        }
    }
    if n <= EXHAUSTIVE_WITNESS_MAX_ORDER {
        if let Some(pair) = exhaustive_witness_pair(group, b1, b2, &s, delta)? {
            return finish(pair, WitnessMethod::Exhaustive);
        }
    }
    let best_corr = best.map_or(0.0, |b| ratio_f64(&b.0));
    Err(Error::BudgetExhausted(format!(
        "no witness pair within {} trials; best correlation {best_corr}",
        consts.witness_trials
    )))
}

/// `M₁ ∗ M₂` or `M₁ ∘ M₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairForm {
    Sum,
    Difference,
}

/// `P(x)` = number of pairs `(y, z) ∈ M₁ × M₂` with `y + z = x` (sum form)
/// or `z − y = x` (difference form); `μ_{M₁} ⋆ μ_{M₂} = |G| P / (|M₁||M₂|)`.
fn pair_counts(group: &AbelianGroup, m1: &ElementSet, m2: &ElementSet, form: PairForm) -> Vec<u128> {
    let mut out = vec![0u128; group.order()];
    let z: Vec<usize> = m2.to_vec();
    for y in m1.iter() {
        for &b in &z {
            let x = match form {
                PairForm::Sum => group.add(y, b),
                PairForm::Difference => group.sub(b, y),
            };
            out[x] += 1;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PeriodicityReport {
    pub witness: Option<Subspace>,
    /// `⟨μ_{M₁} ⋆ μ_{M₂}, 1_S⟩`.
    pub base: BigRational,
    /// `⟨μ_W ∗ μ_{M₁} ⋆ μ_{M₂}, 1_S⟩`.
    pub smoothed: BigRational,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

impl PeriodicityReport {
    pub fn deviation(&self) -> BigRational {
        (&self.smoothed - &self.base).abs()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "witness": self.witness.as_ref().map(|v| json!({"dual_basis": v.dual_basis(), "codim": v.codim()})),
            "base": rational_to_string(&self.base),
            "smoothed": rational_to_string(&self.smoothed),
            "deviation": ratio_f64(&self.deviation()),
            "pass": self.pass,
            "diagnostics": self.diagnostics,
        })
    }
}

fn periodicity_values(
    group: &AbelianGroup,
    w: &ElementSet,
    counts: &[u128],
    s: &ElementSet,
    pairs: u128,
) -> (BigRational, BigRational) {
    let base: u128 = s.iter().map(|x| counts[x]).sum();
    let wv = w.to_vec();
    let smoothed: u128 = s.iter().map(|x| wv.iter().map(|&v| counts[group.sub(x, v)]).sum::<u128>()).sum();
    (ratio(base, pairs), ratio(smoothed, pairs * wv.len() as u128))
}

/// Pure verifier for a subspace or Bohr set `W`. With `container` given
/// (the Bohr set holding `M₁`), `|S| ≤ 2|B|` is checked as a diagnostic.
pub fn almost_periodicity_verify(
    w: &ElementSet,
    m1: &ElementSet,
    m2: &ElementSet,
    s: &ElementSet,
    eps: f64,
    form: PairForm,
    group: &AbelianGroup,
    container: Option<&ElementSet>,
) -> Result<PeriodicityReport> {
    if m1.is_empty() || m2.is_empty() || w.is_empty() {
        return Err(Error::EmptySet);
    }
    let counts = pair_counts(group, m1, m2, form);
    let (base, smoothed) = periodicity_values(group, w, &counts, s, m1.len() as u128 * m2.len() as u128);
    let mut diagnostics = Vec::new();
    if let Some(b) = container {
        if s.len() > 2 * b.len() {
            diagnostics.push(format!("|S| = {} exceeds 2|B| = {}", s.len(), 2 * b.len()));
        }
    }
    let pass = (&smoothed - &base).abs() <= exact_param(eps);
    Ok(PeriodicityReport { witness: None, base, smoothed, pass, diagnostics })
}

/// First subspace, by increasing co-dimension up to `max_codim`, whose
/// smoothing moves the correlation by at most `ε`.
pub fn almost_periodicity_search(
    m1: &ElementSet,
    m2: &ElementSet,
    s: &ElementSet,
    eps: f64,
    max_codim: usize,
    form: PairForm,
    group: &AbelianGroup,
) -> Result<PeriodicityReport> {
    let p = group
        .prime_field_characteristic()
        .ok_or_else(|| Error::InvalidParameter(format!("{group} is not a prime-field vector space")))?;
    if m1.is_empty() || m2.is_empty() {
        return Err(Error::EmptySet);
    }
    let counts = pair_counts(group, m1, m2, form);
    let pairs = m1.len() as u128 * m2.len() as u128;
    let tol = exact_param(eps);
    let max_codim = max_codim.min(group.rank_count());
    for v in enumerate_subspaces(p, group.rank_count(), max_codim)? {
        let (base, smoothed) = periodicity_values(group, v.members(), &counts, s, pairs);
        if (&smoothed - &base).abs() <= tol {
            return Ok(PeriodicityReport { witness: Some(v), base, smoothed, pass: true, diagnostics: vec![] });
        }
    }
    Err(Error::BudgetExhausted(format!("no subspace of co-dimension ≤ {max_codim} is ε-almost periodic")))
}

/// Outcome of the field-case dichotomy.
#[derive(Clone, Debug)]
pub enum Certificate {
    Uniform { eta: BigRational, eps: f64 },
    Increment { witness: Subspace, peak: BigRational, eps: f64 },
    NoCertificate { eta: BigRational, best_peak: BigRational, eps: f64 },
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Uniform { .. } => "uniform",
            Certificate::Increment { .. } => "increment",
            Certificate::NoCertificate { .. } => "none",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub step: String,
    pub ok: bool,
    pub detail: Value,
}

#[derive(Clone, Debug)]
pub struct DriverReport {
    pub certificate: Certificate,
    pub eta: BigRational,
    pub best_peak: BigRational,
    pub trace: Vec<TraceStep>,
}

impl DriverReport {
    pub fn to_json(&self) -> Value {
        let (witness, peak) = match &self.certificate {
            Certificate::Increment { witness, peak, .. } => {
                (json!({"dual_basis": witness.dual_basis(), "codim": witness.codim()}), json!(rational_to_string(peak)))
            }
            _ => (Value::Null, Value::Null),
        };
        json!({
            "kind": self.certificate.kind(),
            "eta": rational_to_string(&self.eta),
            "witness": witness,
            "peak": peak,
            "best_peak": rational_to_string(&self.best_peak),
            "trace": self.trace.iter().map(|t| json!({"step": t.step, "ok": t.ok, "detail": t.detail})).collect::<Vec<_>>(),
        })
    }
}

/// `(1 + ε/8)(1 − ε/16) ≥ 1 + ε/32`.
pub fn field_chain_holds(eps: f64) -> bool {
    let e = exact_param(eps);
    let one = BigRational::one();
    let lhs = (&one + &e / BigInt::from(8)) * (&one - &e / BigInt::from(16));
    lhs >= &one + &e / BigInt::from(32)
}

/// `(1 − ε/64)(1 − ε/32)(1 + ε/16) ≥ 1 + ε/80`.
pub fn bohr_chain_holds(eps: f64) -> bool {
    let e = exact_param(eps);
    let one = BigRational::one();
    let rhs = (&one - &e / BigInt::from(64)) * (&one - &e / BigInt::from(32)) * (&one + &e / BigInt::from(16));
    rhs >= &one + &e / BigInt::from(80)
}

fn step(name: &str, res: std::result::Result<Value, String>) -> TraceStep {
    match res {
        Ok(detail) => TraceStep { step: name.into(), ok: true, detail },
        Err(e) => TraceStep { step: name.into(), ok: false, detail: json!(e) },
    }
}

/// Runs the chain non-authoritatively and records each stage.
fn instrumented_trace(fam: &ColumnFamily, eps: f64, d: u32, r_max: usize, consts: &Constants, seed: u64) -> Vec<TraceStep> {
    let mut trace = Vec::new();
    let group = fam.group();
    let n = group.order();
    let gap = match nonuniformity_gap(fam, eps, d) {
        Ok(g) => {
            trace.push(step("nonuniformity", Ok(g.to_json())));
            g
        }
        Err(e) => {
            trace.push(step("nonuniformity", Err(e.to_string())));
            return trace;
        }
    };
    let NonUniformity::Gap { p, .. } = gap else { return trace };
    let p_even = p + p % 2;
    let fs: Vec<(usize, RealFunction)> = fam
        .index()
        .iter()
        .map(|g| {
            let a = fam.column(g).len() as f64 / n as f64;
            let col = fam.column(g);
            (g, RealFunction::from_fn(group, |x| if col.contains(x) { 1.0 - a } else { -a }))
        })
        .collect();
    trace.push(step("decoupling", decoupling_check(&fs, p_even).map(|r| r.to_json()).map_err(|e| e.to_string())));

    let mu_fp = autocorrelation_measure(fam);
    let centered = RealFunction::from_fn(group, |x| mu_fp[x] - 1.0);
    let uniform = RealMeasure::uniform(group);
    let unb = unbalance(&centered, &uniform, eps / 2.0, p_even, consts);
    trace.push(step("unbalance", unb.as_ref().map(|r| r.to_json()).map_err(|e| e.to_string())));
    let Ok(unb) = unb else { return trace };

    let full = ElementSet::full(n);
    let target = ElementSet::from_predicate(n, |x| mu_fp[x] > 1.0 + eps / 8.0);
    let witness = find_robust_witness(fam, &full, &full, unb.p_prime, eps / 16.0, eps / 32.0, d, consts, seed);
    let witness = match witness {
        Ok(w) => {
            let mut detail = w.to_json();
            let contained = w.level.set.is_subset(&target);
            let corr = pair_correlation(group, &w.pair.m1, &w.pair.m2, &target);
            detail["level_set_inside_target"] = json!(contained);
            detail["target_correlation"] = json!(ratio_f64(&corr));
            trace.push(step("robust_witness", Ok(detail)));
            w
        }
        Err(e) => {
            trace.push(step("robust_witness", Err(e.to_string())));
            return trace;
        }
    };
    let ap = almost_periodicity_search(
        &witness.pair.m1,
        &witness.pair.m2,
        &target,
        eps / 32.0,
        r_max,
        PairForm::Difference,
        group,
    );
    match ap {
        Ok(rep) => {
            let v = rep.witness.clone().expect("search reports carry a witness");
            let peak = infnorm_value(fam, v.members());
            let mut detail = rep.to_json();
            detail["peak"] = json!(ratio_f64(&peak));
            detail["chain_holds"] = json!(field_chain_holds(eps));
            trace.push(step("almost_periodicity", Ok(detail)));
        }
        Err(e) => trace.push(step("almost_periodicity", Err(e.to_string()))),
    }
    trace
}

/// Field-case dichotomy: `|⟨μ_F, μ_D⟩ − 1| ≤ ε`, or a subspace `V` of
/// co-dimension ≤ `r_max` with `‖μ_{F′} ∗ μ_V‖_∞ ≥ 1 + ε/32`.
///
/// The peak search is exhaustive and runs first, so a family with a peak
/// always gets an increment certificate.
pub fn structure_vs_pseudorandomness(
    fam: &ColumnFamily,
    eps: f64,
    d: u32,
    r_max: usize,
    consts: &Constants,
    seed: u64,
) -> Result<DriverReport> {
    let group = fam.group();
    let p = group
        .prime_field_characteristic()
        .ok_or_else(|| Error::InvalidParameter(format!("{group} is not a prime-field vector space")))?;
    let n = group.order();
    check_column_mass(fam, d, n, n)?;
    let eta = corner_eta(fam)?;
    let threshold = BigRational::one() + exact_param(eps) / BigInt::from(32);
    let subspaces: Vec<Subspace> = enumerate_subspaces(p, group.rank_count(), r_max.min(group.rank_count()))?.collect();
    let peaks: Vec<BigRational> = subspaces.par_iter().map(|v| infnorm_value(fam, v.members())).collect();
    let best_peak = peaks.iter().max().cloned().unwrap_or_else(BigRational::zero);
    let first = peaks.iter().position(|pk| pk >= &threshold);
    let certificate = if let Some(i) = first {
        Certificate::Increment { witness: subspaces[i].clone(), peak: peaks[i].clone(), eps }
    } else if (&eta - BigRational::one()).abs() <= exact_param(eps) {
        Certificate::Uniform { eta: eta.clone(), eps }
    } else {
        Certificate::NoCertificate { eta: eta.clone(), best_peak: best_peak.clone(), eps }
    };
    let trace = if matches!(certificate, Certificate::Uniform { .. }) {
        Vec::new()
    } else {
        instrumented_trace(fam, eps, d, r_max, consts, seed)
    };
    Ok(DriverReport { certificate, eta, best_peak, trace })
}

/// Re-verifies a certificate from the raw family along independent code
/// paths: the brute-force corner count for `η` and rational convolutions
/// for the peak.
pub fn verify_certificate(fam: &ColumnFamily, cert: &Certificate) -> Result<bool> {
    let group = fam.group();
    match cert {
        Certificate::Uniform { eta, eps } => {
            let total = count_skew_corners_brute(&SkewInstance::Group(fam.clone())).total;
            let recomputed = ratio(
                total as u128 * group.order() as u128,
                fam.square_sum() * fam.total_size() as u128,
            );
            Ok(&recomputed == eta && (&recomputed - BigRational::one()).abs() <= exact_param(*eps))
        }
        Certificate::Increment { witness, peak, eps } => {
            let mut f = RationalFunction::zero(group);
            for g in fam.index().iter() {
                let a = RationalFunction::indicator(group, fam.column(g));
                f = f.plus(&a.diff_convolve(&a)?)?;
            }
            let mu_f = f.scale(&(BigRational::one() / f.mean()));
            let mu_v = RationalFunction::indicator(group, witness.members())
                .scale(&ratio(group.order() as u128, witness.len() as u128));
            let smoothed = mu_f.convolve(&mu_v)?;
            let recomputed = smoothed.max_value();
            let threshold = BigRational::one() + exact_param(*eps) / BigInt::from(32);
            Ok(&recomputed == peak && recomputed >= threshold)
        }
        Certificate::NoCertificate { .. } => Ok(true),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombiningReport {
    pub eta: f64,
    pub mu_r_inv: f64,
    pub branch1: bool,
    /// `‖μ_{F′} ∗ μ_B‖_∞`.
    pub peak: f64,
    pub peak_threshold: f64,
    pub branch2: bool,
    pub chain_lhs: f64,
    pub chain_rhs: f64,
    pub chain_holds: bool,
    pub regime: bool,
    pub diagnostics: Vec<String>,
}

impl CombiningReport {
    pub fn to_json(&self) -> Value {
        json!({
            "eta": self.eta, "mu_r_inv": self.mu_r_inv, "branch1": self.branch1,
            "peak": self.peak, "peak_threshold": self.peak_threshold, "branch2": self.branch2,
            "chain_lhs": self.chain_lhs, "chain_rhs": self.chain_rhs, "chain_holds": self.chain_holds,
            "regime": self.regime, "diagnostics": self.diagnostics,
        })
    }
}

/// Bohr-case dichotomy quantities for a supplied `B`: branch (1)
/// `|⟨μ_F, μ_D⟩ − μ(R)^{-1}| ≤ ε μ(R)^{-1}` and branch (2)
/// `‖μ_{F′} ∗ μ_B‖_∞ ≥ (1 + ε/80) μ(R)^{-1}`.
pub fn verify_int_combining(
    fam: &ColumnFamily,
    r_set: &BohrSet,
    sigma: f64,
    eps: f64,
    b: &BohrSet,
    d: u32,
    consts: &Constants,
) -> Result<CombiningReport> {
    if fam.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = fam.group().order();
    let mu_r_inv = n as f64 / r_set.len() as f64;
    let eta = ratio_f64(&corner_eta(fam)?);
    let branch1 = (eta - mu_r_inv).abs() <= eps * mu_r_inv + consts.tol;
    let peak = ratio_f64(&infnorm_value(fam, b.members()));
    let peak_threshold = (1.0 + eps / 80.0) * mu_r_inv;
    let branch2 = peak >= peak_threshold - consts.tol;
    let chain_lhs = 1.0 + eps / 80.0;
    let chain_rhs = (1.0 - eps / 64.0) * (1.0 - eps / 32.0) * (1.0 + eps / 16.0);
    let regime = sigma <= consts.c_sigma * eps / (r_set.rank() as f64 * 2f64.powi(d as i32));
    let mut diagnostics = Vec::new();
    if !regime {
        diagnostics.push(format!("sigma = {sigma} outside the regime c_sigma·ε/(r·2^d)"));
    }
    Ok(CombiningReport {
        eta,
        mu_r_inv,
        branch1,
        peak,
        peak_threshold,
        branch2,
        chain_lhs,
        chain_rhs,
        chain_holds: bohr_chain_holds(eps),
        regime,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2(n: usize) -> AbelianGroup {
        AbelianGroup::prime_field_power(2, n).unwrap()
    }

    fn random_family(g: &AbelianGroup, density: f64, rng: &mut ChaCha8Rng) -> ColumnFamily {
        let n = g.order();
        let cols = (0..n).map(|_| ElementSet::from_predicate(n, |_| rng.gen_bool(density))).collect();
        ColumnFamily::full_index(g, cols).unwrap()
    }

    fn density_exponent(fam: &ColumnFamily) -> u32 {
        let n = fam.group().order() as u128;
        (0..64u32).find(|&d| (fam.total_size() as u128) << d >= n * n).unwrap()
    }

    #[test]
    fn eta_matches_brute_count() {
        let g = AbelianGroup::new(&[2, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let fam = random_family(&g, 0.4, &mut rng);
            if fam.is_empty() {
                continue;
            }
            let total = count_skew_corners_brute(&SkewInstance::Group(fam.clone())).total;
            let expected = ratio(total as u128 * 12, fam.square_sum() * fam.total_size() as u128);
            assert_eq!(corner_eta(&fam).unwrap(), expected);
        }
    }

    #[test]
    fn full_columns_uniform() {
        let g = f2(3);
        let fam = ColumnFamily::constant(&g, &ElementSet::full(8), &ElementSet::full(8));
        assert_eq!(nonuniformity_gap(&fam, 0.1, 0).unwrap(), NonUniformity::Uniform { eta: BigRational::one() });
        let rep = structure_vs_pseudorandomness(&fam, 0.5, 0, 2, &Constants::default(), 1).unwrap();
        assert!(matches!(&rep.certificate, Certificate::Uniform { eta, .. } if eta.is_one()));
        assert!(verify_certificate(&fam, &rep.certificate).unwrap());
    }

    #[test]
    fn half_space_is_nonuniform() {
        // Columns indexed by V, each equal to V: every skew corner stays in V × V.
        let g = f2(4);
        let v = Subspace::kernel(&g, &[vec![1, 0, 0, 0]]).unwrap();
        let fam = ColumnFamily::constant(&g, v.members(), v.members());
        let d = density_exponent(&fam);
        match nonuniformity_gap(&fam, 0.5, d).unwrap() {
            NonUniformity::Gap { gap, holder, .. } => {
                assert!(gap >= 0.25);
                assert!(holder > 0.5);
            }
            other => panic!("expected a gap, got {other:?}"),
        }
        let rep = structure_vs_pseudorandomness(&fam, 0.5, d, 2, &Constants::default(), 9).unwrap();
        let Certificate::Increment { peak, .. } = &rep.certificate else { panic!("expected increment") };
        assert!(peak >= &ratio(65, 64));
        assert!(verify_certificate(&fam, &rep.certificate).unwrap());
    }

    #[test]
    fn decoupling_rejects_odd_and_holds() {
        let g = AbelianGroup::cyclic(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let fs: Vec<(usize, RealFunction)> =
            (0..4).map(|i| (i * 2, RealFunction::from_fn(&g, |_| rng.gen_range(-1.0..1.0)))).collect();
        assert!(decoupling_check(&fs, 3).is_err());
        for p in [2, 4] {
            assert!(decoupling_check(&fs, p).unwrap().pass);
        }
        let single = vec![(0, fs[0].1.clone())];
        let r = decoupling_check(&single, 2).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
    }

    #[test]
    fn unbalance_delta_spike() {
        let g = AbelianGroup::cyclic(10).unwrap();
        let f = RealFunction::from_fn(&g, |x| if x == 0 { 9.0 } else { -1.0 });
        let nu = RealMeasure::uniform(&g);
        let consts = Constants::default();
        for eps in [0.25, 0.5, 1.0] {
            let rep = unbalance(&f, &nu, eps, 2, &consts).unwrap();
            let closed = (1.0 / (1.0 - (1.0 + eps / 2.0).ln() / 10f64.ln())).ceil() as u32;
            assert_eq!(rep.p_prime, closed);
            assert!((rep.value - 10f64.powf(1.0 - 1.0 / f64::from(closed))).abs() < 1e-9);
        }
        let zero = RealFunction::zero(&g);
        assert!(unbalance(&zero, &nu, 0.5, 2, &consts).is_err());
    }

    #[test]
    fn robust_witness_trivial_when_threshold_low() {
        let g = AbelianGroup::cyclic(8).unwrap();
        let fam = ColumnFamily::constant(&g, &ElementSet::full(8), &ElementSet::full(8));
        let full = ElementSet::full(8);
        // μ_f ≡ 1, so ε close to 1 puts the threshold below every value.
        let w = find_robust_witness(&fam, &full, &full, 2, 0.99, 0.1, 0, &Constants::default(), 0).unwrap();
        assert_eq!(w.method, WitnessMethod::Trivial);
        assert!(w.correlation.is_one());
    }

    #[test]
    fn exhaustive_fallback_on_small_group() {
        let g = AbelianGroup::cyclic(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fam = random_family(&g, 0.5, &mut rng);
        let mu_f = autocorrelation_measure(&fam);
        let full = ElementSet::full(8);
        let nu = difference_measure(&g, &full, &full);
        let s = ElementSet::from_predicate(8, |x| mu_f[x] > 0.9 * measured_norm(&mu_f, Some(&nu), 4));
        let pair = exhaustive_witness_pair(&g, &full, &full, &s, 0.05).unwrap().unwrap();
        assert!(pair_correlation(&g, &pair.m1, &pair.m2, &s) >= exact_param(0.95));
    }

    #[test]
    fn periodicity_on_coset_unions() {
        let g = f2(4);
        let v = Subspace::kernel(&g, &[vec![1, 1, 0, 0], vec![0, 0, 1, 0]]).unwrap();
        let m1 = v.members().union(&v.members().translate(&g, 1));
        let m2 = v.members().clone();
        let s = ElementSet::from_elements(16, [0, 3, 5, 6]);
        let rep = almost_periodicity_verify(v.members(), &m1, &m2, &s, 0.0, PairForm::Difference, &g, None).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.deviation(), BigRational::zero());
        let found = almost_periodicity_search(&m1, &m2, &s, 0.0, 4, PairForm::Sum, &g).unwrap();
        assert!(found.pass);
    }

    #[test]
    fn chains_hold() {
        for eps in [0.01, 0.25, 0.5, 1.0] {
            assert!(field_chain_holds(eps));
            assert!(bohr_chain_holds(eps));
        }
    }

    #[test]
    fn even_moment() {
        assert_eq!(even_moment_for(0), 2);
        assert_eq!(even_moment_for(1), 2);
        assert_eq!(even_moment_for(2), 4);
        for d in 0..20 {
            let p = even_moment_for(d);
            assert_eq!(p % 2, 0);
            assert!(2f64.powf(f64::from(d) / f64::from(p)) <= 1.5 + 1e-12);
        }
    }

    #[test]
    fn bohr_nonuniformity_full_columns() {
        let g = AbelianGroup::cyclic(101).unwrap();
        let r = BohrSet::new(&g, &[1], 1.0).unwrap();
        let sigma = 0.05;
        let c = r.dilate(sigma).unwrap();
        let mut cols = std::collections::BTreeMap::new();
        for x in c.members().iter() {
            cols.insert(x, r.members().clone());
        }
        let fam = ColumnFamily::new(&g, cols, None).unwrap();
        let rep = nonuniformity_gap_bohr(&fam, &r, sigma, 0.5, 0, &Constants::default()).unwrap();
        assert!(rep.identity_defect < 1e-9);
        assert!(rep.uniform, "{rep:?}");
    }
}
