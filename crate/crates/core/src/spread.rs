//! Simultaneous spreadness of a column family, and the density increments
//! that turn a spreadness violation into a denser sub-instance.
//!
//! Field case: witnesses are subspaces `V ≤ F_p^n` of co-dimension at most
//! `r`, and the family is spread when
//! `Σ_g (|(A_g − x_g) ∩ V| / |V|)² ≤ λ Σ_g (|A_g| / |G|)²` for all shifts.
//! Bohr case: witnesses come from an explicit candidate list of regular
//! sub-Bohr sets `B′ ≤ B`, with densities measured relative to `|B|`.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bohr::{find_regular_dilate, is_sub_bohr, BohrJson, BohrSet};
use crate::config::Constants;
use crate::corners::ColumnFamily;
use crate::error::{Error, Result};
use crate::function::json::rational_to_string;
use crate::group::{AbelianGroup, ElementSet};
use crate::subspace::{best_shift_count, enumerate_subspaces, Subspace};

/// Subspaces scored per parallel batch.
const BATCH: usize = 256;

/// Width halvings tried by the Bohr candidate generator.
pub const CANDIDATE_WIDTH_STEPS: u32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadParams {
    /// Co-dimension (field) or extra rank (Bohr) budget.
    pub r: usize,
    pub lambda: f64,
    /// Minimum relative measure of a Bohr witness.
    pub delta: f64,
    /// Increment slack; increments test spreadness at `λ = 1 + ε`.
    pub epsilon: f64,
    /// Density exponent: `Σ_g |A_g|² ≥ 2^{-d} |G|³`.
    pub d: u32,
}

impl SpreadParams {
    pub fn new(r: usize, lambda: f64, delta: f64, epsilon: f64, d: u32) -> Result<Self> {
        let p = Self { r, lambda, delta, epsilon, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidParameter("r must be at least 1".into()));
        }
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {} must exceed 1", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} outside (0, 1)", self.epsilon)));
        }
        Ok(())
    }

    fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn sq(x: usize) -> u128 {
    (x as u128) * (x as u128)
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug)]
pub enum Witness {
    Subspace(Subspace),
    Bohr(BohrSet),
}

impl Witness {
    pub fn members(&self) -> &ElementSet {
        match self {
            Witness::Subspace(v) => v.members(),
            Witness::Bohr(b) => b.members(),
        }
    }

    pub fn len(&self) -> usize {
        self.members().len()
    }

    pub fn is_empty(&self) -> bool {
        self.members().is_empty()
    }

    pub fn to_json(&self) -> Value {
        match self {
            Witness::Subspace(v) => json!({
                "kind": "subspace",
                "p": v.characteristic(),
                "n": v.ambient_dimension(),
                "dual_basis": v.dual_basis(),
            }),
            Witness::Bohr(b) => {
                let j = BohrJson::from_bohr(b);
                json!({"kind": "bohr", "factors": j.factors, "gamma": j.gamma, "phi": j.phi, "size": b.len()})
            }
        }
    }
}

/// A strict failure of the spreadness inequality.
#[derive(Clone, Debug)]
pub struct Violation {
    pub witness: Witness,
    /// Best shift `x_g` for every index `g`.
    pub shifts: BTreeMap<usize, usize>,
    /// Affine index shift; zero for a plain spreadness check.
    pub offset: usize,
    /// `Σ_g (|(A_g − x_g) ∩ W| / |W|)²`.
    pub lhs: BigRational,
    /// `Σ_g (|A_g| / |F|)²`, with `F` the ambient group or container.
    pub rhs: BigRational,
    pub lambda: BigRational,
    /// `|F|`.
    pub ambient: usize,
}

impl Violation {
    pub fn ratio(&self) -> f64 {
        to_f64(&(&self.lhs / &self.rhs))
    }

    /// Recomputes both sides from the family and the stored shifts.
    pub fn verify(&self, fam: &ColumnFamily) -> bool {
        let w = self.witness.members();
        let g = fam.group();
        let mut lhs_num = 0u128;
        for x in fam.index().iter() {
            let shift = self.shifts.get(&x).copied().unwrap_or(0);
            let hits = fam.column(x).iter().filter(|&y| w.contains(g.sub(y, shift))).count();
            lhs_num += sq(hits);
        }
        let lhs = ratio(lhs_num, sq(w.len()));
        let rhs = ratio(fam.square_sum(), sq(self.ambient));
        lhs == self.lhs && rhs == self.rhs && lhs > &self.lambda * &rhs
    }

    pub fn to_json(&self) -> Value {
        json!({
            "witness": self.witness.to_json(),
            "shifts": self.shifts.iter().map(|(&g, &x)| [g, x]).collect::<Vec<_>>(),
            "offset": self.offset,
            "lhs": rational_to_string(&self.lhs),
            "rhs": rational_to_string(&self.rhs),
            "ratio": self.ratio(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadCertificate {
    pub r: usize,
    pub lambda: f64,
    /// Witnesses examined.
    pub checked: usize,
    /// Candidates rejected before evaluation, with the reason.
    pub skipped: Vec<String>,
    /// Largest `lhs / rhs` seen.
    pub max_ratio: f64,
    pub family_hash: u64,
}

impl SpreadCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "kind": "spread",
            "r": self.r,
            "lambda": self.lambda,
            "checked": self.checked,
            "skipped": self.skipped,
            "max_ratio": self.max_ratio,
            "family_hash": format!("{:016x}", self.family_hash),
        })
    }
}

#[derive(Clone, Debug)]
pub enum SpreadOutcome {
    Spread(SpreadCertificate),
    Violated(Box<Violation>),
}

impl SpreadOutcome {
    pub fn is_spread(&self) -> bool {
        matches!(self, SpreadOutcome::Spread(_))
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            SpreadOutcome::Violated(v) => Some(v),
            SpreadOutcome::Spread(_) => None,
        }
    }

    pub fn certificate(&self) -> Option<&SpreadCertificate> {
        match self {
            SpreadOutcome::Spread(c) => Some(c),
            SpreadOutcome::Violated(_) => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            SpreadOutcome::Spread(c) => c.to_json(),
            SpreadOutcome::Violated(v) => {
                let mut j = v.to_json();
                j["kind"] = json!("violation");
                j
            }
        }
    }
}

/// Stable hash of the family's points, for tying certificates to data.
pub fn family_hash(fam: &ColumnFamily) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    fam.group().factors().hash(&mut h);
    for g in fam.index().iter() {
        g.hash(&mut h);
        fam.column(g).to_vec().hash(&mut h);
    }
    h.finish()
}

#[derive(Clone, Copy, PartialEq)]
enum Pick {
    First,
    MaxGain,
}

/// Which of two scores `num / |W|²` is larger, exactly.
fn beats(a: (u128, usize), b: (u128, usize)) -> bool {
    a.0 * sq(b.1) > b.0 * sq(a.1)
}

struct Scan {
    best: Option<Violation>,
    checked: usize,
    skipped: Vec<String>,
    max_ratio: f64,
}

fn prime_field(group: &AbelianGroup) -> Result<usize> {
    group
        .prime_field_characteristic()
        .ok_or_else(|| Error::InvalidParameter(format!("{group} is not a prime-field vector space")))
}

fn field_scan(fam: &ColumnFamily, max_codim: usize, lambda: f64, pick: Pick) -> Result<Scan> {
    let group = fam.group();
    let order = group.order();
    let denom = fam.square_sum();
    let mut scan = Scan { best: None, checked: 0, skipped: Vec::new(), max_ratio: 0.0 };
    if order == 1 {
        scan.checked = 1;
        scan.max_ratio = if denom > 0 { 1.0 } else { 0.0 };
        return Ok(scan);
    }
    let p = prime_field(group)?;
    let n = group.rank_count();
    let lam = exact(lambda);
    let rhs = ratio(denom, sq(order));
    let index: Vec<usize> = fam.index().iter().collect();
    let mut stream = enumerate_subspaces(p, n, max_codim)?;
    let mut best_score: Option<(u128, usize)> = None;
    loop {
        let batch: Vec<Subspace> = stream.by_ref().take(BATCH).collect();
        if batch.is_empty() {
            break;
        }
        let scores: Vec<u128> = batch
            .par_iter()
            .map(|v| index.iter().map(|&g| sq(best_shift_count(fam.column(g), v).1)).sum())
            .collect();
        for (v, score) in batch.into_iter().zip(scores) {
            scan.checked += 1;
            if denom == 0 {
                continue;
            }
            let size = v.len();
            let lhs = ratio(score, sq(size));
            scan.max_ratio = scan.max_ratio.max(to_f64(&(&lhs / &rhs)));
            if lhs <= &lam * &rhs {
                continue;
            }
            if best_score.is_some_and(|b| !beats((score, size), b)) {
                continue;
            }
            best_score = Some((score, size));
            let shifts = index.iter().map(|&g| (g, best_shift_count(fam.column(g), &v).0)).collect();
            scan.best = Some(Violation {
                witness: Witness::Subspace(v),
                shifts,
                offset: 0,
                lhs,
                rhs: rhs.clone(),
                lambda: lam.clone(),
                ambient: order,
            });
            if pick == Pick::First {
                return Ok(scan);
            }
        }
    }
    Ok(scan)
}

fn finish(fam: &ColumnFamily, scan: Scan, r: usize, lambda: f64) -> SpreadOutcome {
    match scan.best {
        Some(v) => SpreadOutcome::Violated(Box::new(v)),
        None => SpreadOutcome::Spread(SpreadCertificate {
            r,
            lambda,
            checked: scan.checked,
            skipped: scan.skipped,
            max_ratio: scan.max_ratio,
            family_hash: family_hash(fam),
        }),
    }
}

/// Exhaustive `(r, λ)`-simultaneous spreadness over `F_p^n`. Returns the
/// first strict violation in subspace enumeration order.
pub fn is_sim_spread(fam: &ColumnFamily, params: &SpreadParams) -> Result<SpreadOutcome> {
    let group = fam.group();
    prime_field(group)?;
    if params.r > group.rank_count() {
        return Err(Error::InvalidParameter(format!(
            "r = {} exceeds the dimension {}",
            params.r,
            group.rank_count()
        )));
    }
    let scan = field_scan(fam, params.r, params.lambda, Pick::First)?;
    Ok(finish(fam, scan, params.r, params.lambda))
}

/// Best shift of `A` against an arbitrary witness set `W`: the smallest
/// `x` maximizing `|(A − x) ∩ W|`, with that count.
pub fn best_shift_against(group: &AbelianGroup, a: &ElementSet, w: &ElementSet) -> (usize, usize) {
    let mut hist = vec![0usize; group.order()];
    let wv = w.to_vec();
    for y in a.iter() {
        for &b in &wv {
            hist[group.sub(y, b)] += 1;
        }
    }
    let mut best = (0, hist[0]);
    for (x, &c) in hist.iter().enumerate() {
        if c > best.1 {
            best = (x, c);
        }
    }
    best
}

fn bohr_candidate_problem(c: &BohrSet, b: &BohrSet, params: &SpreadParams) -> Result<Option<String>> {
    if !is_sub_bohr(c, b)? {
        return Ok(Some("not a sub-Bohr set".into()));
    }
    if c.rank() > b.rank() + params.r {
        return Ok(Some(format!("rank {} exceeds {}", c.rank(), b.rank() + params.r)));
    }
    if (c.len() as f64) < params.delta * b.len() as f64 {
        return Ok(Some(format!("size {} below delta * {}", c.len(), b.len())));
    }
    if !c.is_regular() {
        return Ok(Some("not regular".into()));
    }
    Ok(None)
}

fn bohr_scan(
    fam: &ColumnFamily,
    b: &BohrSet,
    candidates: &[BohrSet],
    params: &SpreadParams,
    pick: Pick,
) -> Result<Scan> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty candidate list".into()));
    }
    if fam.group() != b.group() {
        return Err(Error::GroupMismatch);
    }
    if let Some(g) = fam.index().iter().find(|&g| !fam.column(g).is_subset(b.members())) {
        return Err(Error::Precondition(format!("column {g} is not inside the Bohr set")));
    }
    let group = fam.group();
    let denom = fam.square_sum();
    let lam = exact(params.lambda);
    let rhs = ratio(denom, sq(b.len()));
    let index: Vec<usize> = fam.index().iter().collect();
    let problems = candidates
        .iter()
        .map(|c| bohr_candidate_problem(c, b, params))
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<usize> = (0..candidates.len()).filter(|&i| problems[i].is_none()).collect();
    let mut scan = Scan { best: None, checked: 0, skipped: Vec::new(), max_ratio: 0.0 };
    for (i, p) in problems.iter().enumerate() {
        if let Some(p) = p {
            scan.skipped.push(format!("candidate {i}: {p}"));
        }
    }
    let scored: Vec<(Vec<(usize, usize)>, u128)> = valid
        .par_iter()
        .map(|&i| {
            let shifts: Vec<(usize, usize)> = index
                .iter()
                .map(|&g| best_shift_against(group, fam.column(g), candidates[i].members()))
                .collect();
            let score = shifts.iter().map(|&(_, c)| sq(c)).sum();
            (shifts, score)
        })
        .collect();
    let mut best_score: Option<(u128, usize)> = None;
    for (&i, (shifts, score)) in valid.iter().zip(scored) {
        scan.checked += 1;
        if denom == 0 {
            continue;
        }
        let c = &candidates[i];
        let lhs = ratio(score, sq(c.len()));
        scan.max_ratio = scan.max_ratio.max(to_f64(&(&lhs / &rhs)));
        if lhs <= &lam * &rhs || best_score.is_some_and(|s| !beats((score, c.len()), s)) {
            continue;
        }
        best_score = Some((score, c.len()));
        scan.best = Some(Violation {
            witness: Witness::Bohr(c.clone()),
            shifts: index.iter().zip(&shifts).map(|(&g, &(x, _))| (g, x)).collect(),
            offset: 0,
            lhs,
            rhs: rhs.clone(),
            lambda: lam.clone(),
            ambient: b.len(),
        });
        if pick == Pick::First {
            break;
        }
    }
    Ok(scan)
}

/// `(r, δ, λ)`-simultaneous spreadness in `B`, decided against the supplied
/// candidates. Invalid candidates are skipped and listed in the certificate.
pub fn is_sim_spread_bohr(
    fam: &ColumnFamily,
    b: &BohrSet,
    candidates: &[BohrSet],
    params: &SpreadParams,
) -> Result<SpreadOutcome> {
    let scan = bohr_scan(fam, b, candidates, params, Pick::First)?;
    Ok(finish(fam, scan, params.r, params.lambda))
}

/// Regular sub-Bohr sets of `B`: one extra frequency (or none) and widths
/// `φ 2^{-k}`, each regularized by [`find_regular_dilate`], filtered by
/// measure and deduplicated by member set.
pub fn bohr_candidates(b: &BohrSet, params: &SpreadParams) -> Result<Vec<BohrSet>> {
    let group = b.group();
    let per_gamma: Vec<Vec<BohrSet>> = group
        .elements()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&t| -> Result<Vec<BohrSet>> {
            let mut gamma = b.frequencies().to_vec();
            gamma.push(t);
            let mut out = Vec::new();
            for k in 0..=CANDIDATE_WIDTH_STEPS {
                let width = b.width() / f64::from(1u32 << k);
                let raw = BohrSet::new(group, &gamma, width)?;
                let (_, reg) = find_regular_dilate(&raw)?;
                if reg.rank() <= b.rank() + params.r && reg.len() as f64 >= params.delta * b.len() as f64 {
                    out.push(reg);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for c in per_gamma.into_iter().flatten() {
        if seen.insert(c.members().to_vec()) {
            out.push(c);
        }
    }
    Ok(out)
}

/// One recorded increment step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Witness in the coordinates of the step.
    pub witness: Witness,
    /// Order of the ambient space (field) or container size (Bohr) before the step.
    pub ambient: usize,
    pub offset: usize,
    pub shifts: BTreeMap<usize, usize>,
    pub potential_before: BigRational,
    pub potential_after: BigRational,
    /// Column sizes after the step.
    pub sizes: Vec<usize>,
    /// Bohr case: the `τ` that passed the averaging check and the halvings used.
    pub tau: Option<f64>,
    pub retries: u32,
}

impl StepRecord {
    pub fn gain(&self) -> BigRational {
        &self.potential_after / &self.potential_before
    }

    pub fn to_json(&self) -> Value {
        json!({
            "witness": self.witness.to_json(),
            "ambient": self.ambient,
            "offset": self.offset,
            "shifts": self.shifts.iter().map(|(&g, &x)| [g, x]).collect::<Vec<_>>(),
            "potential_before": rational_to_string(&self.potential_before),
            "potential_after": rational_to_string(&self.potential_after),
            "gain": to_f64(&self.gain()),
            "sizes": self.sizes,
            "tau": self.tau,
            "retries": self.retries,
        })
    }
}

fn iteration_bound(d: u32, factor: f64) -> usize {
    (f64::from(d) / factor.log2()).ceil() as usize + 1
}

fn check_density(square_sum: u128, d: u32, cube: u128) -> Result<()> {
    if BigInt::from(square_sum) << d < BigInt::from(cube) {
        return Err(Error::Precondition(format!("Σ|A_g|² = {square_sum} is below 2^-{d} · {cube}")));
    }
    Ok(())
}

/// Field-case increment trace. The final collection lives in
/// `V ≅ F_p^{dim V}`; `embedding` maps it back.
#[derive(Clone, Debug)]
pub struct IncrementTrace {
    pub steps: Vec<StepRecord>,
    pub initial_potential: BigRational,
    pub iteration_bound: usize,
    /// Final collection indexed by all of `V`, in `V` coordinates.
    pub family: ColumnFamily,
    /// `V` coordinates to original group elements.
    pub embedding: Vec<usize>,
    /// `w`: the final index set is `V + w`.
    pub offset: usize,
    /// Composite shift `x_g` for the index `g = w + embedding[u]`, stored by `u`.
    pub shifts: Vec<usize>,
    pub certificate: SpreadCertificate,
}

impl IncrementTrace {
    /// `Σ_g |A_g|² / |G|³` of the current ambient space.
    pub fn final_potential(&self) -> BigRational {
        let n = self.family.group().order() as u128;
        ratio(self.family.square_sum(), n * n * n)
    }

    /// The final subspace as a set of original group elements.
    pub fn subspace(&self, original: &AbelianGroup) -> ElementSet {
        ElementSet::from_elements(original.order(), self.embedding.iter().copied())
    }

    /// `(g, x_g)` in original coordinates for every `g ∈ V + w`.
    pub fn original_shifts(&self, original: &AbelianGroup) -> BTreeMap<usize, usize> {
        self.embedding
            .iter()
            .zip(&self.shifts)
            .map(|(&e, &x)| (original.add(self.offset, e), x))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "steps": self.steps.iter().map(StepRecord::to_json).collect::<Vec<_>>(),
            "initial_potential": rational_to_string(&self.initial_potential),
            "final_potential": rational_to_string(&self.final_potential()),
            "iteration_bound": self.iteration_bound,
            "final_dimension": self.family.group().rank_count(),
            "offset": self.offset,
            "subspace": self.embedding,
            "shifts": self.shifts,
            "certificate": self.certificate.to_json(),
        })
    }
}

/// Field density increment: while the family is not `(r, 1+ε)`-spread,
/// restrict to the maximal-gain witness `V` and the best affine index slice
/// `V + w`, and recurse inside `V`.
pub fn density_increment(fam: &ColumnFamily, params: &SpreadParams) -> Result<IncrementTrace> {
    params.validate()?;
    let original = fam.group().clone();
    prime_field(&original)?;
    let order = original.order() as u128;
    check_density(fam.square_sum(), params.d, order * order * order)?;
    let bound = iteration_bound(params.d, 1.0 + params.epsilon);
    let lam = 1.0 + params.epsilon;
    let lam_exact = exact(lam);

    let mut group = original.clone();
    let mut columns: Vec<ElementSet> = original.elements().map(|g| fam.column(g).clone()).collect();
    let mut embedding: Vec<usize> = original.elements().collect();
    let mut offset = 0usize;
    let mut shifts = vec![0usize; original.order()];
    let mut steps = Vec::new();
    let initial_potential = ratio(fam.square_sum(), order * order * order);

    loop {
        let current = ColumnFamily::full_index(&group, columns.clone())?;
        let n = group.rank_count();
        let scan = field_scan(&current, params.r.min(n), lam, Pick::MaxGain)?;
        let Some(viol) = scan.best else {
            let certificate = match finish(&current, scan, params.r, lam) {
                SpreadOutcome::Spread(c) => c,
                SpreadOutcome::Violated(_) => unreachable!("no violation was recorded"),
            };
            let trace = IncrementTrace {
                steps,
                initial_potential,
                iteration_bound: bound,
                family: current,
                embedding,
                offset,
                shifts,
                certificate,
            };
            let size = group.order() as u128;
            check_density(trace.family.square_sum(), params.d, size * size * size)
                .map_err(|e| Error::BugTrap(format!("conclusion (2) fails on the final collection: {e}")))?;
            return Ok(trace);
        };
        if steps.len() >= bound {
            return Err(Error::BugTrap(format!("density increment exceeded {bound} iterations")));
        }
        let Witness::Subspace(v) = &viol.witness else { unreachable!("field scans return subspaces") };
        let g_order = group.order() as u128;
        let v_size = v.len() as u128;

        // Averaging over the cosets of V in the index set.
        let counts: Vec<u128> =
            group.elements().map(|g| sq(columns[g].iter().filter(|&y| v.contains(group.sub(y, viol.shifts[&g]))).count())).collect();
        let mut per_coset = vec![0u128; v.num_cosets()];
        for g in group.elements() {
            per_coset[v.coset_of(g)] += counts[g];
        }
        let reps = v.coset_representatives();
        let best = (0..per_coset.len())
            .max_by(|&a, &b| per_coset[a].cmp(&per_coset[b]).then(reps[b].cmp(&reps[a])))
            .expect("at least one coset");
        let w = reps[best];
        let slice = ratio(per_coset[best], v_size * v_size);
        let target = &lam_exact * ratio(v_size, g_order) * ratio(current.square_sum(), g_order * g_order);
        if slice <= target {
            return Err(Error::BugTrap("no affine slice achieves the averaged gain".into()));
        }

        let (small, map) = v.embedding()?;
        let new_columns: Vec<ElementSet> = small
            .elements()
            .map(|u| {
                let g = group.add(w, map[u]);
                let x = viol.shifts[&g];
                ElementSet::from_predicate(small.order(), |t| columns[g].contains(group.add(map[t], x)))
            })
            .collect();
        let new_embedding: Vec<usize> = map.iter().map(|&m| embedding[m]).collect();
        let new_shifts: Vec<usize> = small
            .elements()
            .map(|u| {
                let g = group.add(w, map[u]);
                original.add(shifts[g], embedding[viol.shifts[&g]])
            })
            .collect();
        let new_offset = original.add(offset, embedding[w]);
        let s = small.order() as u128;
        let after: u128 = new_columns.iter().map(|c| sq(c.len())).sum();
        let record = StepRecord {
            witness: viol.witness.clone(),
            ambient: group.order(),
            offset: w,
            shifts: viol.shifts.clone(),
            potential_before: ratio(current.square_sum(), g_order * g_order * g_order),
            potential_after: ratio(after, s * s * s),
            sizes: new_columns.iter().map(ElementSet::len).collect(),
            tau: None,
            retries: 0,
        };
        if record.potential_after <= &lam_exact * &record.potential_before {
            return Err(Error::BugTrap("increment step gained less than 1 + ε".into()));
        }
        steps.push(record);
        group = small;
        columns = new_columns;
        embedding = new_embedding;
        shifts = new_shifts;
        offset = new_offset;
    }
}

/// Bohr-case increment trace. The final index set is `C = R_σ + w` and
/// column `g ∈ C` is contained in `(A_g − x_g) ∩ R`.
#[derive(Clone, Debug)]
pub struct BohrIncrementTrace {
    pub steps: Vec<StepRecord>,
    pub initial_potential: BigRational,
    pub iteration_bound: usize,
    pub container: BohrSet,
    pub sigma: f64,
    /// `R_σ`, regular.
    pub index_base: BohrSet,
    pub offset: usize,
    /// Indexed by `C`, columns inside `R`.
    pub family: ColumnFamily,
    /// Composite shift for every `g ∈ C`.
    pub shifts: BTreeMap<usize, usize>,
    pub certificate: SpreadCertificate,
}

impl BohrIncrementTrace {
    /// `Σ_{g ∈ C} |A_g|² / (|C| |R|²)`.
    pub fn final_potential(&self) -> BigRational {
        bohr_potential(&self.family, self.family.index().len(), self.container.len())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "steps": self.steps.iter().map(StepRecord::to_json).collect::<Vec<_>>(),
            "initial_potential": rational_to_string(&self.initial_potential),
            "final_potential": rational_to_string(&self.final_potential()),
            "iteration_bound": self.iteration_bound,
            "container": Witness::Bohr(self.container.clone()).to_json(),
            "sigma": self.sigma,
            "offset": self.offset,
            "index": self.family.index().to_vec(),
            "shifts": self.shifts.iter().map(|(&g, &x)| [g, x]).collect::<Vec<_>>(),
            "certificate": self.certificate.to_json(),
        })
    }
}

fn bohr_potential(fam: &ColumnFamily, index_size: usize, container: usize) -> BigRational {
    ratio(fam.square_sum(), index_size as u128 * sq(container))
}

/// Bohr density increment starting from the family indexed by `B` itself
/// (`σ = 1`, `w = 0`). Candidates for each step come from [`bohr_candidates`].
pub fn density_increment_bohr(
    fam: &ColumnFamily,
    b: &BohrSet,
    params: &SpreadParams,
    consts: &Constants,
) -> Result<BohrIncrementTrace> {
    params.validate()?;
    let group = fam.group().clone();
    if &group != b.group() {
        return Err(Error::GroupMismatch);
    }
    if !b.is_regular() {
        return Err(Error::Precondition("starting Bohr set is not regular".into()));
    }
    if !fam.index().is_subset(b.members()) {
        return Err(Error::Precondition("index set is not inside the starting Bohr set".into()));
    }
    check_density(fam.square_sum(), params.d, b.len() as u128 * sq(b.len()))?;
    let eps = params.epsilon;
    let lam = params.with_lambda(1.0 + eps);
    let eps_exact = exact(eps);
    let bound = iteration_bound(params.d, 1.0 + eps / 2.0);
    let d = f64::from(params.d.max(1));
    let tau0 = consts.tau_scale * eps * eps / (params.r as f64 * d * 2f64.powf(d));

    let n = group.order();
    let mut container = b.clone();
    let mut sigma = 1.0;
    let mut index_base = b.clone();
    let mut offset = 0usize;
    let mut columns: BTreeMap<usize, ElementSet> = b.members().iter().map(|g| (g, fam.column(g).clone())).collect();
    let mut shifts: BTreeMap<usize, usize> = columns.keys().map(|&g| (g, 0)).collect();
    let mut steps = Vec::new();
    let initial_potential = bohr_potential(fam, b.len(), b.len());

    loop {
        let current = ColumnFamily::new(&group, columns.clone(), Some(container.members().clone()))?;
        let candidates = bohr_candidates(&container, params)?;
        let scan = bohr_scan(&current, &container, &candidates, &lam, Pick::MaxGain)?;
        let Some(viol) = scan.best else {
            let certificate = match finish(&current, scan, params.r, lam.lambda) {
                SpreadOutcome::Spread(c) => c,
                SpreadOutcome::Violated(_) => unreachable!("no violation was recorded"),
            };
            let c = current.index().len() as u128;
            check_density(current.square_sum(), params.d, c * sq(container.len()))
                .map_err(|e| Error::BugTrap(format!("conclusion (2) fails on the final collection: {e}")))?;
            return Ok(BohrIncrementTrace {
                steps,
                initial_potential,
                iteration_bound: bound,
                container,
                sigma,
                index_base,
                offset,
                family: current,
                shifts,
                certificate,
            });
        };
        if steps.len() >= bound {
            return Err(Error::BugTrap(format!("Bohr density increment exceeded {bound} iterations")));
        }
        let Witness::Bohr(bp) = &viol.witness else { unreachable!("Bohr scans return Bohr sets") };
        let index: Vec<usize> = current.index().iter().collect();
        let restricted: BTreeMap<usize, ElementSet> = index
            .iter()
            .map(|&g| {
                let x = viol.shifts[&g];
                let col = ElementSet::from_predicate(n, |t| bp.contains(t) && current.column(g).contains(group.add(t, x)));
                (g, col)
            })
            .collect();
        // f(g) = (|A′_g| / |B′|)², numerators only; zero off the index set.
        let mut f = vec![0u128; n];
        for (&g, col) in &restricted {
            f[g] = sq(col.len());
        }
        let f_sum: u128 = f.iter().sum();

        let mut tau = tau0;
        let mut retries = 0;
        let (sigma_new, narrow) = loop {
            let (c, narrow) = find_regular_dilate(&bp.dilate(sigma * tau)?)?;
            let members = narrow.members().to_vec();
            let smoothed: u128 = index.iter().map(|&g| members.iter().map(|&h| f[group.add(g, h)]).sum::<u128>()).sum();
            let lhs = ratio(smoothed, 1);
            let rhs = (BigRational::one() - &eps_exact / BigInt::from(4)) * ratio(members.len() as u128 * f_sum, 1);
            if lhs >= rhs {
                break (c * sigma * tau, narrow);
            }
            retries += 1;
            if retries > consts.tau_retries {
                return Err(Error::BugTrap(format!("averaging inequality still fails after {retries} halvings of tau")));
            }
            tau /= 2.0;
        };
        let members = narrow.members().to_vec();
        let slide = |g: usize| -> u128 { members.iter().map(|&h| f[group.add(g, h)]).sum() };
        let (w, best) = index.iter().map(|&g| (g, slide(g))).fold((usize::MAX, 0u128), |acc, (g, s)| {
            if acc.0 == usize::MAX || s > acc.1 {
                (g, s)
            } else {
                acc
            }
        });
        let mut new_columns = BTreeMap::new();
        let mut new_shifts = BTreeMap::new();
        for &h in &members {
            let g = group.add(w, h);
            let (col, x) = match restricted.get(&g) {
                Some(col) => (col.clone(), group.add(shifts[&g], viol.shifts[&g])),
                None => (ElementSet::empty(n), 0),
            };
            new_columns.insert(g, col);
            new_shifts.insert(g, x);
        }
        let after_fam = ColumnFamily::new(&group, new_columns.clone(), None)?;
        let record = StepRecord {
            witness: viol.witness.clone(),
            ambient: container.len(),
            offset: w,
            shifts: viol.shifts.clone(),
            potential_before: bohr_potential(&current, index.len(), container.len()),
            potential_after: bohr_potential(&after_fam, members.len(), bp.len()),
            sizes: new_columns.values().map(ElementSet::len).collect(),
            tau: Some(tau),
            retries,
        };
        debug_assert_eq!(best, after_fam.square_sum());
        let half = BigRational::one() + &eps_exact / BigInt::from(2);
        if record.potential_after < &half * &record.potential_before {
            return Err(Error::BugTrap("Bohr increment step gained less than 1 + ε/2".into()));
        }
        steps.push(record);
        container = bp.clone();
        sigma = sigma_new;
        index_base = narrow;
        offset = w;
        columns = new_columns;
        shifts = new_shifts;
    }
}

/// Outcome of the infinity-norm consequence check.
#[derive(Clone, Debug)]
pub struct InfNormReport {
    /// `‖(1/α Σ 1_{A_i} ∘ 1_{A_i}) ∗ μ_W‖_∞`.
    pub value: BigRational,
    /// `√λ` or `√λ μ(B)^{-1}`.
    pub bound: f64,
    pub pass: bool,
    pub witness: Witness,
}

impl InfNormReport {
    pub fn to_json(&self) -> Value {
        json!({
            "witness": self.witness.to_json(),
            "value": to_f64(&self.value),
            "bound": self.bound,
            "pass": self.pass,
        })
    }
}

/// `K(x) = Σ_i #{y ∈ A_i : x + y ∈ A_i}`, so that `Σ_i 1_{A_i} ∘ 1_{A_i} = K / |G|`.
pub fn autocorrelation_counts(fam: &ColumnFamily) -> Vec<u128> {
    let group = fam.group();
    let mut k = vec![0u128; group.order()];
    for g in fam.index().iter() {
        let col = fam.column(g).to_vec();
        for &y in &col {
            for &z in &col {
                k[group.sub(z, y)] += 1;
            }
        }
    }
    k
}

/// `‖(1/α) F′ ∗ μ_W‖_∞` exactly, with `F′ = Σ_i 1_{A_i} ∘ 1_{A_i}` and
/// `α = Σ_i (|A_i| / |G|)²`.
pub fn infnorm_value(fam: &ColumnFamily, w: &ElementSet) -> BigRational {
    let group = fam.group();
    let denom = fam.square_sum();
    if denom == 0 {
        return BigRational::from_integer(BigInt::from(0));
    }
    let k = autocorrelation_counts(fam);
    let wv = w.to_vec();
    let peak = group
        .elements()
        .map(|x| wv.iter().map(|&v| k[group.sub(x, v)]).sum::<u128>())
        .max()
        .unwrap_or(0);
    ratio(group.order() as u128 * peak, wv.len() as u128 * denom)
}

/// Field case: certifies `(r, λ)`-spreadness, then checks
/// `‖(1/α) F′ ∗ μ_V‖_∞ ≤ √λ` for the given `V`.
pub fn check_infnorm_field(fam: &ColumnFamily, v: &Subspace, params: &SpreadParams) -> Result<InfNormReport> {
    if v.codim() > params.r {
        return Err(Error::InvalidParameter(format!("co-dimension {} exceeds r = {}", v.codim(), params.r)));
    }
    if !is_sim_spread(fam, params)?.is_spread() {
        return Err(Error::Precondition("family is not certified spread".into()));
    }
    Ok(field_infnorm_report(fam, v, params.lambda))
}

fn field_infnorm_report(fam: &ColumnFamily, v: &Subspace, lambda: f64) -> InfNormReport {
    let value = infnorm_value(fam, v.members());
    let pass = &value * &value <= exact(lambda);
    InfNormReport { value, bound: lambda.sqrt(), pass, witness: Witness::Subspace(v.clone()) }
}

/// Field case over every subspace of co-dimension at most `r`; returns the
/// report with the largest value.
pub fn check_infnorm_field_all(fam: &ColumnFamily, params: &SpreadParams) -> Result<InfNormReport> {
    if !is_sim_spread(fam, params)?.is_spread() {
        return Err(Error::Precondition("family is not certified spread".into()));
    }
    let group = fam.group();
    let p = prime_field(group)?;
    let reports: Vec<InfNormReport> = enumerate_subspaces(p, group.rank_count(), params.r)?
        .collect::<Vec<_>>()
        .par_iter()
        .map(|v| field_infnorm_report(fam, v, params.lambda))
        .collect();
    let mut best: Option<InfNormReport> = None;
    for r in reports {
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::BugTrap("no subspaces enumerated".into()))
}

/// Bohr case: certifies spreadness at the single witness `B′`, then checks
/// `‖(1/α) F′ ∗ μ_{B′}‖_∞ ≤ √λ μ(B)^{-1}`.
pub fn check_infnorm_bohr(
    fam: &ColumnFamily,
    b: &BohrSet,
    b_prime: &BohrSet,
    params: &SpreadParams,
) -> Result<InfNormReport> {
    let outcome = is_sim_spread_bohr(fam, b, std::slice::from_ref(b_prime), params)?;
    match &outcome {
        SpreadOutcome::Spread(c) if c.skipped.is_empty() => {}
        SpreadOutcome::Spread(c) => {
            return Err(Error::Precondition(format!("witness rejected: {}", c.skipped.join("; "))));
        }
        SpreadOutcome::Violated(_) => return Err(Error::Precondition("family is not certified spread".into())),
    }
    let value = infnorm_value(fam, b_prime.members());
    let n = fam.group().order() as u128;
    let limit = exact(params.lambda) * ratio(n * n, sq(b.len()));
    let pass = &value * &value <= limit;
    let bound = params.lambda.sqrt() * n as f64 / b.len() as f64;
    Ok(InfNormReport { value, bound, pass, witness: Witness::Bohr(b_prime.clone()) })
}
