//! Bohr sets `Bohr(Γ, φ) = {x : |1 − γ(x)| ≤ φ for all γ ∈ Γ}`, their
//! dilates, regularity, and instance-wise checks of the smoothing lemmas.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Constants;
use crate::error::{Error, Result};
use crate::function::{Measure, RealFunction, RealMeasure};
use crate::group::{AbelianGroup, DualElement, ElementSet};

/// Regularity constant in `|B_{1+κ}| ≤ (1 + 100κr)|B|`.
pub const REGULARITY_CONSTANT: f64 = 100.0;

/// A Bohr set carried as the tuple `(Γ, φ)` together with its members.
#[derive(Clone, Debug)]
pub struct BohrSet {
    group: AbelianGroup,
    gamma: Vec<usize>,
    phi: f64,
    /// `r(x) = max_{γ ∈ Γ} |1 − γ(x)|`; shared by all dilates.
    radius: Arc<Vec<f64>>,
    /// Radii in increasing order.
    sorted: Arc<Vec<f64>>,
    members: ElementSet,
    ties: Vec<usize>,
    clamped: bool,
    tie_tol: f64,
}

impl PartialEq for BohrSet {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.gamma == other.gamma && self.phi == other.phi
    }
}

impl BohrSet {
    /// `Γ` given by character ranks; duplicates are dropped.
    pub fn new(group: &AbelianGroup, gamma: &[usize], phi: f64) -> Result<Self> {
        Self::with_tolerance(group, gamma, phi, Constants::default().tie_tol)
    }

    pub fn with_tolerance(group: &AbelianGroup, gamma: &[usize], phi: f64, tie_tol: f64) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidParameter("frequency set must be nonempty".into()));
        }
        if !(0.0..=2.0).contains(&phi) {
            return Err(Error::InvalidParameter(format!("width {phi} outside [0, 2]")));
        }
        for &t in gamma {
            group.check_rank(t)?;
        }
        let mut gamma = gamma.to_vec();
        gamma.sort_unstable();
        gamma.dedup();
        let radius: Vec<f64> = group
            .elements()
            .map(|x| gamma.iter().map(|&t| group.character_distance_from_one(t, x)).fold(0.0, f64::max))
            .collect();
        let mut sorted = radius.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self::from_parts(group, gamma, phi, Arc::new(radius), Arc::new(sorted), false, tie_tol))
    }

    pub fn from_duals(group: &AbelianGroup, gamma: &[DualElement], phi: f64) -> Result<Self> {
        let ranks = gamma.iter().map(|g| g.rank_in(group)).collect::<Result<Vec<_>>>()?;
        Self::new(group, &ranks, phi)
    }

    /// The whole group, as `Bohr({0}, 2)`.
    pub fn whole(group: &AbelianGroup) -> Self {
        Self::new(group, &[0], 2.0).expect("trivial character is valid")
    }

    fn from_parts(
        group: &AbelianGroup,
        gamma: Vec<usize>,
        phi: f64,
        radius: Arc<Vec<f64>>,
        sorted: Arc<Vec<f64>>,
        clamped: bool,
        tie_tol: f64,
    ) -> Self {
        let members = ElementSet::from_predicate(group.order(), |x| radius[x] <= phi + tie_tol);
        let ties = group.elements().filter(|&x| (radius[x] - phi).abs() <= tie_tol).collect();
        Self { group: group.clone(), gamma, phi, radius, sorted, members, ties, clamped, tie_tol }
    }

    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    pub fn frequencies(&self) -> &[usize] {
        &self.gamma
    }

    pub fn width(&self) -> f64 {
        self.phi
    }

    /// `rk(B) = |Γ|`.
    pub fn rank(&self) -> usize {
        self.gamma.len()
    }

    pub fn members(&self) -> &ElementSet {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(x)
    }

    /// `μ(B) = |B| / |G|`.
    pub fn density(&self) -> f64 {
        self.len() as f64 / self.group.order() as f64
    }

    pub fn radius(&self, x: usize) -> f64 {
        self.radius[x]
    }

    /// Elements whose radius sits within the tie tolerance of the width;
    /// they are counted as members.
    pub fn ties(&self) -> &[usize] {
        &self.ties
    }

    /// Whether this set came from a dilate whose width was clamped to 2.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    pub fn measure(&self) -> RealMeasure {
        Measure::normalized_indicator(&self.group, &self.members).expect("0 is always a member")
    }

    /// `B_ρ = Bohr(Γ, ρφ)`, with `ρφ` clamped to 2.
    pub fn dilate(&self, rho: f64) -> Result<Self> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::InvalidParameter(format!("dilation factor {rho} must be positive")));
        }
        let width = rho * self.phi;
        let (width, clamped) = if width > 2.0 { (2.0, true) } else { (width, false) };
        Ok(Self::from_parts(
            &self.group,
            self.gamma.clone(),
            width,
            self.radius.clone(),
            self.sorted.clone(),
            clamped,
            self.tie_tol,
        ))
    }

    /// `|Bohr(Γ, w)|` for an arbitrary width.
    pub fn count_within(&self, width: f64) -> usize {
        let t = width + self.tie_tol;
        self.sorted.partition_point(|&r| r <= t)
    }

    /// `#{x : r(x) < t}` with ties to `t` excluded.
    fn count_strictly_below(&self, t: f64) -> usize {
        let t = t - self.tie_tol;
        self.sorted.partition_point(|&r| r < t)
    }

    /// Regularity decided exactly on the breakpoints of `κ ↦ |B_{1±κ}|`.
    pub fn is_regular(&self) -> bool {
        self.regularity_failure().is_none()
    }

    /// The first `κ` at which one of the two regularity inequalities fails.
    pub fn regularity_failure(&self) -> Option<f64> {
        if self.phi == 0.0 {
            return None;
        }
        let r = self.rank() as f64;
        let kmax = 1.0 / (REGULARITY_CONSTANT * r);
        let size = self.len() as f64;
        let slack = 1e-9;
        // Growth: the count jumps at κ_x = r(x)/φ − 1 and the bound is
        // smallest at the left end of each constancy interval.
        for &rx in self.sorted.iter() {
            let kappa = rx / self.phi - 1.0;
            if kappa <= 0.0 {
                continue;
            }
            if kappa > kmax {
                break;
            }
            let count = self.count_within(rx) as f64;
            if count > (1.0 + REGULARITY_CONSTANT * kappa * r) * size + slack {
                return Some(kappa);
            }
        }
        // Shrink: just after a = 1 − r(y)/φ the count drops to the strict
        // count below r(y), while the bound approaches its value at a.
        for &ry in self.sorted.iter().rev() {
            if ry > self.phi + self.tie_tol {
                continue;
            }
            let a = (1.0 - ry / self.phi).max(0.0);
            if a >= kmax {
                break;
            }
            let count = self.count_strictly_below(ry) as f64;
            if count < (1.0 - REGULARITY_CONSTANT * a * r) * size - slack {
                return Some(a);
            }
        }
        None
    }

    /// Regularity sampled on `points` evenly spaced values of `κ ∈ [0, 1/100r]`.
    pub fn is_regular_sampled(&self, points: usize) -> bool {
        if self.phi == 0.0 {
            return true;
        }
        let r = self.rank() as f64;
        let kmax = 1.0 / (REGULARITY_CONSTANT * r);
        let size = self.len() as f64;
        (0..points).all(|i| {
            let kappa = kmax * i as f64 / (points.max(2) - 1) as f64;
            let grow = self.count_within((1.0 + kappa) * self.phi) as f64;
            let shrink = self.count_within((1.0 - kappa) * self.phi) as f64;
            grow <= (1.0 + REGULARITY_CONSTANT * kappa * r) * size + 1e-9
                && shrink >= (1.0 - REGULARITY_CONSTANT * kappa * r) * size - 1e-9
        })
    }
}

/// `B′ ≤ B`: `Γ′ ⊇ Γ` and `φ′ ≤ φ`. When true, member containment of the
/// sets and of a few dilates is checked as well.
pub fn is_sub_bohr(b_prime: &BohrSet, b: &BohrSet) -> Result<bool> {
    if b_prime.group != b.group {
        return Err(Error::GroupMismatch);
    }
    let freq = b.gamma.iter().all(|t| b_prime.gamma.binary_search(t).is_ok());
    if !(freq && b_prime.phi <= b.phi) {
        return Ok(false);
    }
    for rho in [1.0, 0.25, 0.5, 1.5] {
        if !b_prime.dilate(rho)?.members.is_subset(&b.dilate(rho)?.members) {
            return Err(Error::BugTrap(format!("sub-Bohr dilate by {rho} is not contained in the parent dilate")));
        }
    }
    Ok(true)
}

/// Largest `ρ ∈ [1/2, 1]` with `B_ρ` regular: scans the breakpoints
/// `r(x)/φ` and both endpoints, then a fine grid.
pub fn find_regular_dilate(b: &BohrSet) -> Result<(f64, BohrSet)> {
    if b.phi == 0.0 {
        return Ok((1.0, b.clone()));
    }
    let mut candidates = vec![1.0, 0.5];
    candidates.extend(
        b.sorted.iter().map(|&r| r / b.phi).filter(|&rho| (0.5..=1.0).contains(&rho)),
    );
    candidates.sort_by(|a, c| c.total_cmp(a));
    candidates.dedup();
    for rho in candidates {
        let d = b.dilate(rho)?;
        if d.is_regular() {
            return Ok((rho, d));
        }
    }
    for i in 0..=10_000 {
        let rho = 1.0 - 0.5 * i as f64 / 10_000.0;
        let d = b.dilate(rho)?;
        if d.is_regular() {
            return Ok((rho, d));
        }
    }
    Err(Error::BugTrap(format!("no regular dilate of Bohr set of rank {} and width {}", b.rank(), b.phi)))
}

/// One instance-wise inequality check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// False when the instance is outside the regime in which the bound is claimed.
    pub asserted: bool,
    pub diagnostics: Vec<String>,
}

pub const CHECK_CSV_HEADER: &str = "check,instance,lhs,rhs,pass";

impl CheckReport {
    fn new(check: &str, lhs: f64, rhs: f64, pass: bool, asserted: bool) -> Self {
        Self {
            check: check.into(),
            instance: String::new(),
            lhs,
            rhs,
            pass,
            asserted,
            diagnostics: Vec::new(),
        }
    }

    pub fn named(mut self, instance: &str) -> Self {
        self.instance = instance.into();
        self
    }

    /// Passing, or not claimed in this regime.
    pub fn ok(&self) -> bool {
        self.pass || !self.asserted
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.12e},{:.12e},{}", self.check, self.instance, self.lhs, self.rhs, self.ok())
    }
}

/// `|B_ρ| ≥ (ρ/4)^r |B|`.
pub fn check_size_bound(b: &BohrSet, rho: f64) -> Result<CheckReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("ρ = {rho} outside (0, 1)")));
    }
    let lhs = b.dilate(rho)?.len() as f64;
    let rhs = (rho / 4.0).powi(b.rank() as i32) * b.len() as f64;
    Ok(CheckReport::new("size_bound", lhs, rhs, lhs >= rhs, true))
}

fn check_support(nu: &RealMeasure, b_rho: &BohrSet) -> Result<()> {
    if nu.group() != b_rho.group() {
        return Err(Error::GroupMismatch);
    }
    if !nu.support().is_subset(b_rho.members()) {
        return Err(Error::Precondition("measure is not supported on B_ρ".into()));
    }
    Ok(())
}

/// `μ_B ≤ 2 μ_{B_{1+ρ}} ∗ ν` pointwise; `lhs` is the largest violation.
pub fn check_domination(b: &BohrSet, nu: &RealMeasure, rho: f64, consts: &Constants) -> Result<CheckReport> {
    let b_rho = b.dilate(rho)?;
    check_support(nu, &b_rho)?;
    let mu_b = b.measure();
    let mu_wide = b.dilate(1.0 + rho)?.measure();
    let smoothed = mu_wide.convolve(nu)?;
    let violation = b
        .group()
        .elements()
        .map(|x| mu_b.as_function().at(x) - 2.0 * smoothed.as_function().at(x))
        .fold(0.0, f64::max);
    let mut report = CheckReport::new("domination", violation, consts.tol, violation <= consts.tol, true);
    if rho > consts.c_dom / b.rank() as f64 {
        report.diagnostics.push(format!("ρ = {rho} exceeds c_dom/r = {}", consts.c_dom / b.rank() as f64));
    }
    if !b.is_regular() {
        report.diagnostics.push("B is not regular".into());
    }
    Ok(report)
}

/// `‖μ_B ∗ ν − μ_B‖₁ ≤ C ρ r`, asserted when `ρ ≤ 1/100r` and `B` is regular.
pub fn check_l1_smoothing(b: &BohrSet, nu: &RealMeasure, rho: f64, consts: &Constants) -> Result<CheckReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("ρ = {rho} outside (0, 1)")));
    }
    check_support(nu, &b.dilate(rho)?)?;
    let mu_b = b.measure();
    let smoothed = mu_b.convolve(nu)?;
    let diff = smoothed.as_function().minus(mu_b.as_function())?;
    let lhs = diff.values().iter().map(|v| v.abs()).sum::<f64>() / b.group().order() as f64;
    let r = b.rank() as f64;
    let rhs = consts.c_smooth * rho * r;
    let asserted = rho <= 1.0 / (REGULARITY_CONSTANT * r) && b.is_regular();
    Ok(CheckReport::new("l1_smoothing", lhs, rhs, lhs <= rhs + consts.tol, asserted))
}

/// `|⟨f ∗ ν, μ_B⟩ − ⟨f, μ_B⟩| ≤ C ‖f‖_∞ ρ r` in the same regime.
pub fn check_approx_invariance(
    f: &RealFunction,
    b: &BohrSet,
    nu: &RealMeasure,
    rho: f64,
    consts: &Constants,
) -> Result<CheckReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("ρ = {rho} outside (0, 1)")));
    }
    check_support(nu, &b.dilate(rho)?)?;
    let mu_b = b.measure();
    let smoothed = f.convolve(nu.as_function())?;
    let lhs = (smoothed.inner(mu_b.as_function())? - f.inner(mu_b.as_function())?).abs();
    let r = b.rank() as f64;
    let rhs = consts.c_smooth * f.sup_norm() * rho * r;
    let asserted = rho <= 1.0 / (REGULARITY_CONSTANT * r) && b.is_regular();
    Ok(CheckReport::new("approx_invariance", lhs, rhs, lhs <= rhs + consts.tol, asserted))
}

/// Bohr set wire format `{"factors":[..],"gamma":[[coords]..],"phi":..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrJson {
    pub factors: Vec<usize>,
    pub gamma: Vec<Vec<usize>>,
    pub phi: f64,
}

impl BohrJson {
    pub fn from_bohr(b: &BohrSet) -> Self {
        Self {
            factors: b.group().factors().to_vec(),
            gamma: b.frequencies().iter().map(|&t| b.group().coords(t)).collect(),
            phi: b.width(),
        }
    }

    pub fn to_bohr(&self) -> Result<BohrSet> {
        let g = AbelianGroup::new(&self.factors)?;
        let ranks = self.gamma.iter().map(|c| g.rank(c)).collect::<Result<Vec<_>>>()?;
        BohrSet::new(&g, &ranks, self.phi)
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

    #[test]
    fn trivial_and_full_width() {
        let g = AbelianGroup::new(&[4, 6]).unwrap();
        assert_eq!(BohrSet::new(&g, &[0], 0.3).unwrap().len(), 24);
        assert_eq!(BohrSet::new(&g, &[5, 7, 13], 2.0).unwrap().len(), 24);
        assert!(BohrSet::new(&g, &[], 1.0).is_err());
        assert!(BohrSet::new(&g, &[1], 2.5).is_err());
    }

    #[test]
    fn z12_example() {
        let g = z(12);
        let b = BohrSet::new(&g, &[1], 1.0).unwrap();
        // 2|sin(πx/12)| ≤ 1 by direct evaluation.
        let direct: Vec<usize> = (0..12)
            .filter(|&x| 2.0 * (std::f64::consts::PI * x as f64 / 12.0).sin().abs() <= 1.0 + 1e-12)
            .collect();
        assert_eq!(direct, vec![0, 1, 2, 10, 11]);
        assert_eq!(b.members().to_vec(), direct);
        // x = 2 and 10 sit exactly on the boundary.
        assert_eq!(b.ties(), &[2, 10]);

        let half = b.dilate(0.5).unwrap();
        let direct: Vec<usize> =
            (0..12).filter(|&x| 2.0 * (std::f64::consts::PI * x as f64 / 12.0).sin().abs() <= 0.5).collect();
        assert_eq!(half.members().to_vec(), direct);
        assert_eq!(b.dilate(1.0).unwrap().members(), b.members());
        assert_eq!(b.dilate(1e-6).unwrap().members().to_vec(), vec![0]);
        assert!(b.dilate(0.0).is_err());
        assert!(b.dilate(3.0).unwrap().was_clamped());
    }

    #[test]
    fn symmetric_and_contains_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..30 {
            let g = AbelianGroup::new(&[rng.gen_range(2..20), rng.gen_range(1..5)]).unwrap();
            let gamma: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..g.order())).collect();
            let b = BohrSet::new(&g, &gamma, rng.gen_range(0.0..2.0)).unwrap();
            assert!(b.contains(0));
            for x in b.members().iter() {
                assert!(b.contains(g.neg(x)));
            }
        }
    }

    #[test]
    fn sub_bohr_relation() {
        let g = z(30);
        let b = BohrSet::new(&g, &[1], 1.2).unwrap();
        assert!(is_sub_bohr(&b.dilate(0.7).unwrap(), &b).unwrap());
        let bp = BohrSet::new(&g, &[1, 7], 1.2).unwrap();
        assert!(is_sub_bohr(&bp, &b).unwrap());
        assert!(bp.members().is_subset(b.members()));
        // Nested members but disjoint frequency sets.
        let tiny = BohrSet::new(&g, &[7], 0.0).unwrap();
        assert!(tiny.members().is_subset(b.members()));
        assert!(!is_sub_bohr(&tiny, &b).unwrap());
    }

    #[test]
    fn regularity_trivial_cases() {
        let g = z(50);
        assert!(BohrSet::whole(&g).is_regular());
        assert!(BohrSet::new(&g, &[3], 0.0).unwrap().is_regular());
        assert_eq!(find_regular_dilate(&BohrSet::whole(&g)).unwrap().0, 1.0);
    }

    #[test]
    fn regularity_matches_grid_oracle_rank_one() {
        let mut disagreements = 0;
        let mut irregular = 0;
        for n in [37usize, 60, 100, 101, 211] {
            let g = z(n);
            for step in 1..80 {
                let phi = 2.0 * step as f64 / 80.0;
                let b = BohrSet::new(&g, &[1], phi).unwrap();
                if !b.ties().is_empty() {
                    continue;
                }
                let exact = b.is_regular();
                if !exact {
                    irregular += 1;
                }
                if exact != b.is_regular_sampled(1000) {
                    disagreements += 1;
                }
            }
        }
        assert!(irregular > 0);
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn irregular_instance_in_z100() {
        let g = z(100);
        let found = (1..200).map(|i| i as f64 / 100.0).find_map(|phi| {
            let b = BohrSet::new(&g, &[1], phi).unwrap();
            (b.ties().is_empty() && !b.is_regular()).then_some(b)
        });
        let b = found.expect("some rank-1 width is irregular");
        assert!(!b.is_regular_sampled(1000));
        let (rho, d) = find_regular_dilate(&b).unwrap();
        assert!((0.5..=1.0).contains(&rho));
        assert!(d.is_regular());
    }

    #[test]
    fn size_bound_examples() {
        let b = BohrSet::new(&z(101), &[1], 1.0).unwrap();
        assert!(check_size_bound(&b, 0.5).unwrap().pass);
        assert!(check_size_bound(&b, 0.999).unwrap().pass);
        let b2 = BohrSet::new(&z(60), &[1, 7], 1.5).unwrap();
        let rep = check_size_bound(&b2, 1.0 / 3.0).unwrap();
        assert_eq!(rep.lhs, b2.dilate(1.0 / 3.0).unwrap().len() as f64);
        assert!(rep.pass);
    }

    #[test]
    fn smoothing_checks() {
        let consts = Constants::default();
        let g = z(400);
        let (_, b) = find_regular_dilate(&BohrSet::new(&g, &[1], 1.0).unwrap()).unwrap();
        let delta: RealMeasure = Measure::point_mass(&g, 0);
        let dom = check_domination(&b, &delta, 0.005, &consts).unwrap();
        assert!(dom.pass, "{dom:?}");
        let l1 = check_l1_smoothing(&b, &delta, 0.005, &consts).unwrap();
        assert_eq!(l1.lhs, 0.0);

        let rho = 1.0 / 200.0;
        let nu = b.dilate(rho).unwrap().measure();
        assert!(check_domination(&b, &nu, rho, &consts).unwrap().pass);
        let l1 = check_l1_smoothing(&b, &nu, rho, &consts).unwrap();
        assert!(l1.asserted && l1.pass);
        let far = check_l1_smoothing(&b, &b.dilate(0.9).unwrap().measure(), 0.9, &consts).unwrap();
        assert!(!far.asserted);

        let outside: RealMeasure = Measure::point_mass(&g, 200);
        assert!(matches!(check_domination(&b, &outside, rho, &consts), Err(Error::Precondition(_))));

        let constant = RealFunction::constant(&g, 3.0);
        assert!(check_approx_invariance(&constant, &b, &nu, rho, &consts).unwrap().lhs < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = ElementSet::from_predicate(400, |_| rng.gen_bool(0.3));
        let f = RealFunction::indicator(&g, &a);
        assert!(check_approx_invariance(&f, &b, &nu, rho, &consts).unwrap().ok());
        let member = b.dilate(rho).unwrap().members().iter().find(|&x| x != 0);
        if let Some(x) = member {
            let shifted: RealMeasure = Measure::point_mass(&g, x);
            assert!(check_approx_invariance(&f, &b, &shifted, rho, &consts).unwrap().ok());
        }
    }

    #[test]
    fn json_round_trip() {
        let g = AbelianGroup::new(&[3, 5]).unwrap();
        let b = BohrSet::new(&g, &[4, 7], 0.8).unwrap();
        let back = BohrJson::from_bohr(&b).to_bohr().unwrap();
        assert_eq!(back, b);
        assert_eq!(back.members(), b.members());
    }
}
