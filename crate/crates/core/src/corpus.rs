//! Seeded generators for test corpora.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bohr::BohrSet;
use crate::corners::{ColumnFamily, SkewInstance};
use crate::error::Result;
use crate::function::RealFunction;
use crate::group::{AbelianGroup, ElementSet};
use crate::subspace::Subspace;

/// Groups of order at most 16 used by the counting criteria.
pub fn small_groups() -> Vec<AbelianGroup> {
    let shapes: [&[usize]; 10] = [&[12], &[2, 2, 2], &[2, 6], &[8], &[16], &[2, 2, 2, 2], &[3, 3], &[5], &[2, 4], &[7]];
    shapes.iter().map(|s| AbelianGroup::new(s).expect("valid shape")).collect()
}

pub fn random_set(n: usize, density: f64, rng: &mut impl Rng) -> ElementSet {
    ElementSet::from_predicate(n, |_| rng.gen_bool(density))
}

/// Every column present, each element kept with probability `density`.
pub fn random_family(group: &AbelianGroup, density: f64, rng: &mut impl Rng) -> ColumnFamily {
    let n = group.order();
    let cols = (0..n).map(|_| random_set(n, density, rng)).collect();
    ColumnFamily::full_index(group, cols).expect("columns match the group")
}

/// Random index set and per-column densities; may be empty.
pub fn random_instance(group: &AbelianGroup, rng: &mut impl Rng) -> ColumnFamily {
    let n = group.order();
    let keep = rng.gen_range(0.2..1.0);
    let mut cols = BTreeMap::new();
    for x in 0..n {
        if rng.gen_bool(keep) {
            let density = rng.gen_range(0.05..0.95);
            cols.insert(x, random_set(n, density, rng));
        }
    }
    ColumnFamily::new(group, cols, None).expect("columns match the group")
}

/// Random points of `[n] × [n]`.
pub fn random_grid(n: usize, rng: &mut impl Rng) -> SkewInstance {
    let density = rng.gen_range(0.1..0.9);
    let pts: Vec<(usize, usize)> =
        (1..=n).flat_map(|x| (1..=n).map(move |y| (x, y))).filter(|_| rng.gen_bool(density)).collect();
    SkewInstance::grid(n, pts).expect("points in range")
}

pub fn random_real_function(group: &AbelianGroup, rng: &mut impl Rng) -> RealFunction {
    RealFunction::from_fn(group, |_| rng.gen_range(-1.0..1.0))
}

/// `1_A − |A|/|G|` for a random `A`.
pub fn random_balanced_indicator(group: &AbelianGroup, rng: &mut impl Rng) -> RealFunction {
    let n = group.order();
    let a = random_set(n, rng.gen_range(0.1..0.9), rng);
    let alpha = a.len() as f64 / n as f64;
    RealFunction::from_fn(group, |x| if a.contains(x) { 1.0 - alpha } else { -alpha })
}

/// Random Bohr set in `Z/N` with `N ≤ max_n` and rank `1..=max_rank`.
pub fn random_bohr(max_n: usize, max_rank: usize, rng: &mut impl Rng) -> Result<BohrSet> {
    let n = rng.gen_range(20..=max_n);
    let g = AbelianGroup::cyclic(n)?;
    let rank = rng.gen_range(1..=max_rank);
    let gamma: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..n)).collect();
    let phi = rng.gen_range(0.3..1.6);
    BohrSet::new(&g, &gamma, phi)
}

/// Random subspace of `F_p^n` of the given co-dimension.
pub fn random_subspace(group: &AbelianGroup, codim: usize, rng: &mut impl Rng) -> Result<Subspace> {
    let p = group.factors()[0];
    let n = group.rank_count();
    loop {
        let rows: Vec<Vec<usize>> = (0..codim).map(|_| (0..n).map(|_| rng.gen_range(0..p)).collect()).collect();
        let v = Subspace::kernel(group, &rows)?;
        if v.codim() == codim {
            return Ok(v);
        }
    }
}

/// Columns planted inside random cosets of one subspace, so that the
/// family has a large simultaneous increment.
pub fn planted_family(group: &AbelianGroup, codim: usize, rng: &mut impl Rng) -> Result<ColumnFamily> {
    let v = random_subspace(group, codim, rng)?;
    let n = group.order();
    let reps = v.coset_representatives();
    let density = rng.gen_range(0.6..1.0);
    let cols = (0..n)
        .map(|_| {
            let c = reps[rng.gen_range(0..reps.len())];
            ElementSet::from_elements(n, v.members().iter().map(|y| group.add(y, c)).filter(|_| rng.gen_bool(density)))
        })
        .collect();
    ColumnFamily::full_index(group, cols)
}

/// Half the columns dense inside one subspace, the rest sparse.
pub fn mixed_family(group: &AbelianGroup, codim: usize, rng: &mut impl Rng) -> Result<ColumnFamily> {
    let v = random_subspace(group, codim, rng)?;
    let n = group.order();
    let cols = (0..n)
        .map(|g| {
            if g % 2 == 0 {
                ElementSet::from_elements(n, v.members().iter().filter(|_| rng.gen_bool(0.9)))
            } else {
                random_set(n, 0.15, rng)
            }
        })
        .collect();
    ColumnFamily::full_index(group, cols)
}

/// Smallest `d` with `Σ_g |A_g|² · 2^d ≥ |G|³`.
pub fn square_exponent(fam: &ColumnFamily) -> Option<u32> {
    let n = fam.group().order() as u128;
    let s = fam.square_sum();
    (s > 0).then(|| (0..128u32).find(|&d| s << d >= n * n * n).expect("bounded"))
}

/// Smallest `d` with `Σ_g |A_g| · 2^d ≥ |G|²`.
pub fn mass_exponent(fam: &ColumnFamily) -> Option<u32> {
    let n = fam.group().order() as u128;
    let s = fam.total_size() as u128;
    (s > 0).then(|| (0..128u32).find(|&d| s << d >= n * n).expect("bounded"))
}
