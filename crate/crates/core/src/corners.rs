//! Subsets of `G × G` stored column by column, and skew-corner counting.
//!
//! A skew corner is a triple `(x, y), (x, y + h), (x + h, y′)`; it is
//! nontrivial when `h ≠ 0`. Corners force `y′ = y`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{RationalFunction, Scalar};
use crate::group::{AbelianGroup, ElementSet};

/// A collection `{A_g}_{g ∈ C}` of subsets of `G`, read as the set
/// `A = {(g, y) : g ∈ C, y ∈ A_g} ⊆ G × G`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnFamily {
    group: AbelianGroup,
    index: ElementSet,
    columns: Vec<ElementSet>,
    container: Option<ElementSet>,
    profile: Vec<usize>,
}

impl ColumnFamily {
    /// Columns given by index; indices not mentioned are outside `C`.
    pub fn new(
        group: &AbelianGroup,
        columns: BTreeMap<usize, ElementSet>,
        container: Option<ElementSet>,
    ) -> Result<Self> {
        let n = group.order();
        let mut index = ElementSet::empty(n);
        let mut cols = vec![ElementSet::empty(n); n];
        for (g, col) in columns {
            group.check_rank(g)?;
            if col.universe() != n {
                return Err(Error::LengthMismatch { expected: n, got: col.universe() });
            }
            if let Some(r) = &container {
                if !col.is_subset(r) {
                    return Err(Error::Precondition(format!("column {g} is not inside the container")));
                }
            }
            index.insert(g);
            cols[g] = col;
        }
        Ok(Self::assemble(group, index, cols, container))
    }

    /// Index set `C = G`, column `g` taken from `columns[g]`.
    pub fn full_index(group: &AbelianGroup, columns: Vec<ElementSet>) -> Result<Self> {
        if columns.len() != group.order() {
            return Err(Error::LengthMismatch { expected: group.order(), got: columns.len() });
        }
        Self::new(group, columns.into_iter().enumerate().collect(), None)
    }

    /// Index set `C`, every column equal to `column`.
    pub fn constant(group: &AbelianGroup, index: &ElementSet, column: &ElementSet) -> Self {
        let n = group.order();
        let cols = (0..n).map(|g| if index.contains(g) { column.clone() } else { ElementSet::empty(n) }).collect();
        Self::assemble(group, index.clone(), cols, None)
    }

    /// The set `A ⊆ G × G` given by its points `(x, y)`.
    pub fn from_points(group: &AbelianGroup, points: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = group.order();
        let mut cols = vec![ElementSet::empty(n); n];
        for (x, y) in points {
            group.check_rank(x)?;
            group.check_rank(y)?;
            cols[x].insert(y);
        }
        Self::full_index(group, cols)
    }

    fn assemble(group: &AbelianGroup, index: ElementSet, columns: Vec<ElementSet>, container: Option<ElementSet>) -> Self {
        let profile = columns.iter().map(ElementSet::len).collect();
        Self { group: group.clone(), index, columns, container, profile }
    }

    pub fn with_container(mut self, container: ElementSet) -> Result<Self> {
        if let Some(g) = self.index.iter().find(|&g| !self.columns[g].is_subset(&container)) {
            return Err(Error::Precondition(format!("column {g} is not inside the container")));
        }
        self.container = Some(container);
        Ok(self)
    }

    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    pub fn index(&self) -> &ElementSet {
        &self.index
    }

    pub fn container(&self) -> Option<&ElementSet> {
        self.container.as_ref()
    }

    /// `A_g`; empty outside `C`.
    pub fn column(&self, g: usize) -> &ElementSet {
        &self.columns[g]
    }

    pub fn columns(&self) -> &[ElementSet] {
        &self.columns
    }

    /// `D(x) = |A_x|`.
    pub fn profile(&self) -> &[usize] {
        &self.profile
    }

    pub fn profile_function(&self) -> RationalFunction {
        RationalFunction::from_fn(&self.group, |x| BigRational::from_usize(self.profile[x]))
    }

    /// `|A| = Σ_g |A_g|`.
    pub fn total_size(&self) -> usize {
        self.profile.iter().sum()
    }

    /// `Σ_g |A_g|²`.
    pub fn square_sum(&self) -> u128 {
        self.profile.iter().map(|&d| (d as u128) * (d as u128)).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.index.iter().flat_map(move |x| self.columns[x].iter().map(move |y| (x, y)))
    }

    pub fn is_empty(&self) -> bool {
        self.total_size() == 0
    }
}

/// Either a subset of `G × G` or a subset of the grid `[n] × [n]`.
#[derive(Clone, Debug, PartialEq)]
pub enum SkewInstance {
    Group(ColumnFamily),
    /// Points with 1-based coordinates in `[1, n]`.
    Grid { n: usize, points: BTreeSet<(usize, usize)> },
}

impl SkewInstance {
    pub fn grid(n: usize, points: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let points: BTreeSet<_> = points.into_iter().collect();
        for &(x, y) in &points {
            if x == 0 || y == 0 || x > n || y > n {
                return Err(Error::InvalidParameter(format!("grid point ({x}, {y}) outside [1, {n}]²")));
            }
        }
        Ok(Self::Grid { n, points })
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Group(fam) => fam.total_size(),
            Self::Grid { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerCounts {
    pub total: u64,
    pub nontrivial: u64,
}

/// Grid membership table with column sizes, padded so that `n + 1` is valid.
struct GridColumns {
    n: usize,
    cols: Vec<Vec<bool>>,
    sizes: Vec<u64>,
}

impl GridColumns {
    fn new(n: usize, points: &BTreeSet<(usize, usize)>) -> Self {
        let mut cols = vec![vec![false; n + 2]; n + 2];
        let mut sizes = vec![0u64; n + 2];
        for &(x, y) in points {
            cols[x][y] = true;
            sizes[x] += 1;
        }
        Self { n, cols, sizes }
    }

    fn contains(&self, x: i64, y: i64) -> bool {
        x >= 1 && y >= 1 && x <= self.n as i64 && y <= self.n as i64 && self.cols[x as usize][y as usize]
    }

    fn size(&self, x: i64) -> u64 {
        if x >= 1 && x <= self.n as i64 {
            self.sizes[x as usize]
        } else {
            0
        }
    }
}

/// Counts `(x, y, y′, h)` with all three points present, by iterating
/// `(x, y, h)` and multiplying by `|A_{x+h}|`.
pub fn count_skew_corners_brute(inst: &SkewInstance) -> CornerCounts {
    match inst {
        SkewInstance::Group(fam) => {
            let g = fam.group();
            let mut total = 0u64;
            let mut trivial = 0u64;
            for x in fam.index().iter() {
                let col = fam.column(x);
                for y in col.iter() {
                    for h in g.elements() {
                        if col.contains(g.add(y, h)) {
                            let third = fam.profile()[g.add(x, h)] as u64;
                            total += third;
                            if h == 0 {
                                trivial += third;
                            }
                        }
                    }
                }
            }
            debug_assert_eq!(trivial as u128, fam.square_sum());
            CornerCounts { total, nontrivial: total - trivial }
        }
        SkewInstance::Grid { n, points } => {
            let cols = GridColumns::new(*n, points);
            let n = *n as i64;
            let mut total = 0u64;
            let mut trivial = 0u64;
            for &(x, y) in points {
                let (x, y) = (x as i64, y as i64);
                for h in (1 - n)..n {
                    if cols.contains(x, y + h) {
                        let third = cols.size(x + h);
                        total += third;
                        if h == 0 {
                            trivial += third;
                        }
                    }
                }
            }
            CornerCounts { total, nontrivial: total - trivial }
        }
    }
}

/// Corners `(x, y), (x, y + h), (x + h, y)`.
pub fn count_corners_brute(inst: &SkewInstance) -> CornerCounts {
    match inst {
        SkewInstance::Group(fam) => {
            let g = fam.group();
            let mut total = 0u64;
            let mut trivial = 0u64;
            for (x, y) in fam.points() {
                for h in g.elements() {
                    if fam.column(x).contains(g.add(y, h)) && fam.column(g.add(x, h)).contains(y) {
                        total += 1;
                        if h == 0 {
                            trivial += 1;
                        }
                    }
                }
            }
            CornerCounts { total, nontrivial: total - trivial }
        }
        SkewInstance::Grid { n, points } => {
            let cols = GridColumns::new(*n, points);
            let n = *n as i64;
            let mut total = 0u64;
            let mut trivial = 0u64;
            for &(x, y) in points {
                let (x, y) = (x as i64, y as i64);
                for h in (1 - n)..n {
                    if cols.contains(x, y + h) && cols.contains(x + h, y) {
                        total += 1;
                        if h == 0 {
                            trivial += 1;
                        }
                    }
                }
            }
            CornerCounts { total, nontrivial: total - trivial }
        }
    }
}

/// `F = Σ_x 1_{A_x} ∘ 1_{A_x + x}`, exactly.
pub fn corner_kernel(fam: &ColumnFamily) -> RationalFunction {
    let g = fam.group();
    let mut acc = RationalFunction::zero(g);
    for x in fam.index().iter() {
        let col = fam.column(x);
        if col.is_empty() {
            continue;
        }
        let a = RationalFunction::indicator(g, col);
        let shifted = RationalFunction::indicator(g, &col.translate(g, x));
        acc = acc.plus(&a.diff_convolve(&shifted).expect("same group")).expect("same group");
    }
    acc
}

/// `|G|² Σ_x ⟨1_{A_x} ∘ 1_{A_x+x}, D⟩`, which equals the total skew-corner count.
pub fn count_skew_corners_analytic(inst: &SkewInstance) -> Result<BigRational> {
    let SkewInstance::Group(fam) = inst else {
        return Err(Error::InvalidParameter("grid instances must be embedded into a group first".into()));
    };
    let n = BigRational::from_usize(fam.group().order());
    let inner = corner_kernel(fam).inner(&fam.profile_function())?;
    Ok(n.clone() * n * inner)
}

/// `η = ⟨μ_F, μ_D⟩` together with the guaranteed lower bound `η|A|³/|G|²`
/// on the total count.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerDensity {
    pub eta: BigRational,
    pub lower_bound: BigRational,
    pub total: u64,
}

pub fn normalized_corner_density(fam: &ColumnFamily) -> Result<CornerDensity> {
    if fam.is_empty() {
        return Err(Error::EmptySet);
    }
    let f = corner_kernel(fam);
    let d = fam.profile_function();
    let eta = f.inner(&d)? / (f.mean() * d.mean());
    let size = BigRational::from_usize(fam.total_size());
    let order = BigRational::from_usize(fam.group().order());
    let lower_bound = eta.clone() * size.clone() * size.clone() * size / (order.clone() * order);
    let total = count_skew_corners_brute(&SkewInstance::Group(fam.clone())).total;
    if BigRational::from_integer(BigInt::from(total)) < lower_bound {
        return Err(Error::BugTrap(format!("skew-corner total {total} is below the normalized bound")));
    }
    Ok(CornerDensity { eta, lower_bound, total })
}

/// Vertical shifts for `shift_instance`: one per column.
#[derive(Clone, Debug, PartialEq)]
pub enum VerticalShift {
    Constant(i64),
    PerColumn(BTreeMap<i64, i64>),
}

impl VerticalShift {
    fn at(&self, x: i64) -> i64 {
        match self {
            Self::Constant(b) => *b,
            Self::PerColumn(m) => m.get(&x).copied().unwrap_or(0),
        }
    }
}

/// `(x, y) ↦ (x + a, y + b(x))`; keyed by the original column.
pub fn shift_instance(inst: &SkewInstance, a: i64, b: &VerticalShift) -> Result<SkewInstance> {
    match inst {
        SkewInstance::Group(fam) => {
            let g = fam.group();
            let a = g.check_rank(a.rem_euclid(g.order() as i64) as usize)?;
            let mut cols = BTreeMap::new();
            for x in fam.index().iter() {
                let shift = b.at(x as i64).rem_euclid(g.order() as i64) as usize;
                cols.insert(g.add(x, a), fam.column(x).translate(g, shift));
            }
            let container = fam.container().cloned().filter(|_| matches!(b, VerticalShift::Constant(0)));
            Ok(SkewInstance::Group(ColumnFamily::new(g, cols, container)?))
        }
        SkewInstance::Grid { n, points } => {
            let mut out = BTreeSet::new();
            for &(x, y) in points {
                let nx = x as i64 + a;
                let ny = y as i64 + b.at(x as i64);
                if nx < 1 || ny < 1 || nx > *n as i64 || ny > *n as i64 {
                    return Err(Error::InvalidParameter(format!("shifted point ({nx}, {ny}) leaves the grid")));
                }
                out.insert((nx as usize, ny as usize));
            }
            Ok(SkewInstance::Grid { n: *n, points: out })
        }
    }
}

/// Places `[n] × [n]` inside `Z/2n × Z/2n` via `(x, y) ↦ (x − 1, y − 1)`;
/// no wrap-around pattern can appear, so nontrivial counts agree.
pub fn embed_grid(inst: &SkewInstance) -> Result<SkewInstance> {
    let SkewInstance::Grid { n, points } = inst else {
        return Err(Error::InvalidParameter("only grid instances can be embedded".into()));
    };
    let g = AbelianGroup::cyclic(2 * (*n).max(1))?;
    let fam = ColumnFamily::from_points(&g, points.iter().map(|&(x, y)| (x - 1, y - 1)))?;
    Ok(SkewInstance::Group(fam))
}

/// Instance wire format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum InstanceJson {
    Group { factors: Vec<usize>, columns: BTreeMap<String, Vec<usize>> },
    Grid { n: usize, points: Vec<[usize; 2]> },
}

impl InstanceJson {
    pub fn from_instance(inst: &SkewInstance) -> Self {
        match inst {
            SkewInstance::Group(fam) => Self::Group {
                factors: fam.group().factors().to_vec(),
                columns: fam.index().iter().map(|g| (g.to_string(), fam.column(g).to_vec())).collect(),
            },
            SkewInstance::Grid { n, points } => {
                Self::Grid { n: *n, points: points.iter().map(|&(x, y)| [x, y]).collect() }
            }
        }
    }

    pub fn to_instance(&self) -> Result<SkewInstance> {
        match self {
            Self::Group { factors, columns } => {
                let g = AbelianGroup::new(factors)?;
                let mut cols = BTreeMap::new();
                for (key, ys) in columns {
                    let x: usize = key.parse().map_err(|_| Error::Parse(format!("bad column key {key:?}")))?;
                    for &y in ys {
                        g.check_rank(y)?;
                    }
                    cols.insert(x, ElementSet::from_elements(g.order(), ys.iter().copied()));
                }
                Ok(SkewInstance::Group(ColumnFamily::new(&g, cols, None)?))
            }
            Self::Grid { n, points } => SkewInstance::grid(*n, points.iter().map(|p| (p[0], p[1]))),
        }
    }
}

pub fn instance_from_json(text: &str) -> Result<SkewInstance> {
    let wire: InstanceJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    wire.to_instance()
}

pub fn instance_to_json(inst: &SkewInstance) -> String {
    serde_json::to_string(&InstanceJson::from_instance(inst)).expect("instance serializes")
}

/// One row of the counts CSV: `instance_id,total,nontrivial,corner_nontrivial,eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountReport {
    pub instance_id: String,
    pub skew: CornerCounts,
    pub corner_nontrivial: u64,
    pub analytic: Option<BigRational>,
    pub eta: Option<BigRational>,
}

pub const COUNTS_CSV_HEADER: &str = "instance_id,total,nontrivial,corner_nontrivial,eta";

impl CountReport {
    pub fn compute(instance_id: &str, inst: &SkewInstance) -> Result<Self> {
        let skew = count_skew_corners_brute(inst);
        let corner_nontrivial = count_corners_brute(inst).nontrivial;
        let (analytic, eta) = match inst {
            SkewInstance::Group(fam) => {
                let analytic = count_skew_corners_analytic(inst)?;
                let eta = if fam.is_empty() { None } else { Some(normalized_corner_density(fam)?.eta) };
                (Some(analytic), eta)
            }
            SkewInstance::Grid { .. } => (None, None),
        };
        Ok(Self { instance_id: instance_id.to_string(), skew, corner_nontrivial, analytic, eta })
    }

    /// The analytic identity, when it applies.
    pub fn identity_holds(&self) -> bool {
        self.analytic
            .as_ref()
            .is_none_or(|a| *a == BigRational::from_integer(BigInt::from(self.skew.total)))
    }

    pub fn csv_row(&self) -> String {
        let eta = self.eta.as_ref().map_or(String::new(), crate::function::json::rational_to_string);
        format!(
            "{},{},{},{},{}",
            self.instance_id, self.skew.total, self.skew.nontrivial, self.corner_nontrivial, eta
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full(g: &AbelianGroup) -> ColumnFamily {
        ColumnFamily::constant(g, &ElementSet::full(g.order()), &ElementSet::full(g.order()))
    }

    /// `(x, y, y′, h)` by four nested loops.
    fn quad_loop(fam: &ColumnFamily) -> CornerCounts {
        let g = fam.group();
        let mut c = CornerCounts::default();
        for x in g.elements() {
            for y in g.elements() {
                for yp in g.elements() {
                    for h in g.elements() {
                        if fam.column(x).contains(y)
                            && fam.column(x).contains(g.add(y, h))
                            && fam.column(g.add(x, h)).contains(yp)
                        {
                            c.total += 1;
                            if h != 0 {
                                c.nontrivial += 1;
                            }
                        }
                    }
                }
            }
        }
        c
    }

    fn random_family(g: &AbelianGroup, k: usize, rng: &mut ChaCha8Rng) -> ColumnFamily {
        let n = g.order();
        ColumnFamily::from_points(g, (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))).unwrap()
    }

    #[test]
    fn full_z3() {
        let g = AbelianGroup::cyclic(3).unwrap();
        let inst = SkewInstance::Group(full(&g));
        assert_eq!(count_skew_corners_brute(&inst), CornerCounts { total: 81, nontrivial: 54 });
        assert_eq!(count_skew_corners_analytic(&inst).unwrap(), BigRational::from_usize(81));
        let c = count_corners_brute(&inst);
        // Triple loop over (x, y, h ≠ 0).
        let mut oracle = 0;
        for _x in 0..3 {
            for _y in 0..3 {
                for h in 0..3 {
                    if h != 0 {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(c.nontrivial, oracle);
        assert_eq!(c.nontrivial, 18);
        let d = normalized_corner_density(&full(&g)).unwrap();
        assert_eq!(d.eta, BigRational::from_usize(1));
        assert_eq!(d.lower_bound, BigRational::from_usize(81));
    }

    #[test]
    fn single_column() {
        let g = AbelianGroup::cyclic(5).unwrap();
        let mut cols = BTreeMap::new();
        cols.insert(2, ElementSet::full(5));
        let fam = ColumnFamily::new(&g, cols, None).unwrap();
        let inst = SkewInstance::Group(fam.clone());
        assert_eq!(count_skew_corners_brute(&inst), CornerCounts { total: 25, nontrivial: 0 });
        assert_eq!(count_corners_brute(&inst).nontrivial, 0);
        let d = normalized_corner_density(&fam).unwrap();
        assert_eq!(d.eta, BigRational::from_usize(1));

        // A column of size k: direct expansion of the two normalizations.
        let mut cols = BTreeMap::new();
        cols.insert(1, ElementSet::from_elements(5, [0, 3]));
        let fam = ColumnFamily::new(&g, cols, None).unwrap();
        let d = normalized_corner_density(&fam).unwrap();
        // F = 1_{A}∘1_{A+1}: E F = k²/|G|²; D = k·1_{1}: E D = k/|G|;
        // ⟨F, D⟩ = F(1)·k/|G| = (k/|G|)·(k/|G|). So η = |G|/k.
        let k = 2i64;
        let n = 5i64;
        let f_mean = BigRational::new((k * k).into(), (n * n).into());
        let d_mean = BigRational::new(k.into(), n.into());
        let inner = BigRational::new((k * k).into(), (n * n).into());
        assert_eq!(d.eta, inner / (f_mean * d_mean));
        assert_eq!(d.eta, BigRational::new(n.into(), k.into()));
        let mut cols = BTreeMap::new();
        cols.insert(0, ElementSet::singleton(5, 4));
        let d = normalized_corner_density(&ColumnFamily::new(&g, cols, None).unwrap()).unwrap();
        assert_eq!(d.eta, BigRational::from_usize(5));
    }

    #[test]
    fn empty_set_counts_zero() {
        let g = AbelianGroup::cyclic(4).unwrap();
        let inst = SkewInstance::Group(ColumnFamily::from_points(&g, []).unwrap());
        assert_eq!(count_skew_corners_analytic(&inst).unwrap(), BigRational::zero());
        assert_eq!(count_skew_corners_brute(&inst), CornerCounts::default());
        assert!(normalized_corner_density(&ColumnFamily::from_points(&g, []).unwrap()).is_err());
    }

    #[test]
    fn random_sets_match_quadruple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = AbelianGroup::new(&[6]).unwrap();
        for _ in 0..20 {
            let fam = random_family(&g, 10, &mut rng);
            let inst = SkewInstance::Group(fam.clone());
            let c = count_skew_corners_brute(&inst);
            assert_eq!(c, quad_loop(&fam));
            assert_eq!(c.total - c.nontrivial, fam.square_sum() as u64);
            assert_eq!(count_skew_corners_analytic(&inst).unwrap(), BigRational::from_integer(c.total.into()));
            assert!(count_corners_brute(&inst).nontrivial <= c.nontrivial);
        }
    }

    #[test]
    fn row_is_free_of_both_patterns() {
        let g = AbelianGroup::cyclic(4).unwrap();
        let row = ColumnFamily::from_points(&g, (0..4).map(|x| (x, 1))).unwrap();
        let inst = SkewInstance::Group(row);
        assert_eq!(count_corners_brute(&inst).nontrivial, 0);
        assert_eq!(count_skew_corners_brute(&inst).nontrivial, 0);
    }

    #[test]
    fn shifts_preserve_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = AbelianGroup::new(&[2, 3]).unwrap();
        for _ in 0..10 {
            let inst = SkewInstance::Group(random_family(&g, 12, &mut rng));
            let before = count_skew_corners_brute(&inst);
            assert_eq!(shift_instance(&inst, 0, &VerticalShift::Constant(0)).unwrap(), inst);
            let b = VerticalShift::PerColumn((0..6).map(|x| (x, rng.gen_range(0..6))).collect());
            let shifted = shift_instance(&inst, rng.gen_range(0..6), &b).unwrap();
            assert_eq!(count_skew_corners_brute(&shifted), before);
            let shifted = shift_instance(&inst, 3, &VerticalShift::Constant(5)).unwrap();
            assert_eq!(count_skew_corners_brute(&shifted), before);
        }
        let grid = SkewInstance::grid(3, [(1, 1), (3, 3)]).unwrap();
        assert!(shift_instance(&grid, 1, &VerticalShift::Constant(0)).is_err());
    }

    #[test]
    fn grid_embedding() {
        let full2 = SkewInstance::grid(2, [(1, 1), (1, 2), (2, 1), (2, 2)]).unwrap();
        let emb = embed_grid(&full2).unwrap();
        assert_eq!(count_skew_corners_brute(&full2).nontrivial, count_skew_corners_brute(&emb).nontrivial);
        assert!(embed_grid(&SkewInstance::grid(3, []).unwrap()).unwrap().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let pts: Vec<_> = (0..rng.gen_range(0..=n * n))
                .map(|_| (rng.gen_range(1..=n), rng.gen_range(1..=n)))
                .collect();
            let grid = SkewInstance::grid(n, pts).unwrap();
            let emb = embed_grid(&grid).unwrap();
            assert_eq!(count_skew_corners_brute(&grid).nontrivial, count_skew_corners_brute(&emb).nontrivial);
            assert_eq!(count_corners_brute(&grid).nontrivial, count_corners_brute(&emb).nontrivial);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = AbelianGroup::new(&[2, 2]).unwrap();
        let inst = SkewInstance::Group(ColumnFamily::from_points(&g, [(0, 1), (3, 2), (3, 0)]).unwrap());
        let text = instance_to_json(&inst);
        assert!(text.contains("\"mode\":\"group\""));
        let back = instance_from_json(&text).unwrap();
        assert_eq!(count_skew_corners_brute(&back), count_skew_corners_brute(&inst));
        let grid = instance_from_json(r#"{"mode":"grid","n":2,"points":[[1,1],[2,2]]}"#).unwrap();
        assert_eq!(grid.len(), 2);
        assert!(instance_from_json(r#"{"mode":"grid","n":2,"points":[[0,1]]}"#).is_err());
    }

    #[test]
    fn csv_row_format() {
        let g = AbelianGroup::cyclic(3).unwrap();
        let r = CountReport::compute("full3", &SkewInstance::Group(full(&g))).unwrap();
        assert!(r.identity_holds());
        assert_eq!(r.csv_row(), "full3,81,54,18,1/1");
    }
}
