//! Subspaces of `F_p^n` given by reduced row-echelon dual bases.
//!
//! `V = {x : ⟨ℓ_i, x⟩ = 0 for all i}`; the reduced echelon form of the
//! functionals is canonical, so enumeration never repeats a subspace.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::group::{is_prime, AbelianGroup, ElementSet};

#[derive(Clone, Debug)]
pub struct Subspace {
    group: AbelianGroup,
    p: usize,
    n: usize,
    rows: Vec<Vec<usize>>,
    pivots: Vec<usize>,
    members: ElementSet,
    /// Coset index of each element: the vector `(⟨ℓ_i, x⟩)_i` read in base `p`.
    coset: Vec<usize>,
    /// Smallest-rank element of each coset.
    reps: Vec<usize>,
}

impl PartialEq for Subspace {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.n == other.n && self.rows == other.rows
    }
}

impl Eq for Subspace {}

impl Subspace {
    /// From a dual basis already in reduced echelon form.
    fn from_echelon(group: &AbelianGroup, p: usize, n: usize, rows: Vec<Vec<usize>>, pivots: Vec<usize>) -> Self {
        let codim = rows.len();
        let num_cosets = p.pow(codim as u32);
        let mut coset = Vec::with_capacity(group.order());
        let mut reps = vec![usize::MAX; num_cosets];
        for x in group.elements() {
            let mut id = 0;
            for row in &rows {
                let v = (0..n).map(|j| row[j] * group.digit(x, j)).sum::<usize>() % p;
                id = id * p + v;
            }
            if reps[id] == usize::MAX {
                reps[id] = x;
            }
            coset.push(id);
        }
        let members = ElementSet::from_predicate(group.order(), |x| coset[x] == 0);
        Self { group: group.clone(), p, n, rows, pivots, members, coset, reps }
    }

    /// The kernel of arbitrary functionals, reduced to canonical form.
    pub fn kernel(group: &AbelianGroup, functionals: &[Vec<usize>]) -> Result<Self> {
        let p = group
            .prime_field_characteristic()
            .ok_or_else(|| Error::InvalidParameter(format!("{group} is not a prime-field vector space")))?;
        let n = group.rank_count();
        let mut rows: Vec<Vec<usize>> = Vec::new();
        for f in functionals {
            if f.len() != n {
                return Err(Error::ShapeMismatch { expected: n, got: f.len() });
            }
            rows.push(f.iter().map(|&v| v % p).collect());
        }
        let (rows, pivots) = row_reduce(rows, p);
        Ok(Self::from_echelon(group, p, n, rows, pivots))
    }

    /// The whole space (co-dimension 0).
    pub fn full(group: &AbelianGroup) -> Result<Self> {
        Self::kernel(group, &[])
    }

    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    pub fn characteristic(&self) -> usize {
        self.p
    }

    pub fn ambient_dimension(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.n - self.rows.len()
    }

    pub fn dual_basis(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn members(&self) -> &ElementSet {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.coset[x] == 0
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_cosets(&self) -> usize {
        self.reps.len()
    }

    pub fn coset_of(&self, x: usize) -> usize {
        self.coset[x]
    }

    /// Smallest-rank representative of each coset, indexed by coset id.
    pub fn coset_representatives(&self) -> &[usize] {
        &self.reps
    }

    /// Free (non-pivot) coordinates, in increasing order.
    pub fn free_coordinates(&self) -> Vec<usize> {
        (0..self.n).filter(|j| !self.pivots.contains(j)).collect()
    }

    /// Identifies `V` with `F_p^{dim V}` through its free coordinates:
    /// `embedding()[u]` is the element of `V` whose free coordinates are those of `u`.
    pub fn embedding(&self) -> Result<(AbelianGroup, Vec<usize>)> {
        let dim = self.dim();
        if dim == 0 {
            return Ok((AbelianGroup::cyclic(1)?, vec![0]));
        }
        let small = AbelianGroup::prime_field_power(self.p, dim)?;
        let free = self.free_coordinates();
        let p = self.p;
        let map = small
            .elements()
            .map(|u| {
                let mut coords = vec![0usize; self.n];
                for (k, &j) in free.iter().enumerate() {
                    coords[j] = small.digit(u, k);
                }
                for (row, &c) in self.rows.iter().zip(&self.pivots) {
                    let s: usize = free.iter().map(|&j| row[j] * coords[j]).sum::<usize>() % p;
                    coords[c] = (p - s) % p;
                }
                self.group.rank(&coords).expect("coordinates are reduced")
            })
            .collect();
        Ok((small, map))
    }
}

/// Reduced row echelon form over `F_p`, dropping zero rows.
fn row_reduce(mut rows: Vec<Vec<usize>>, p: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(i) = (r..rows.len()).find(|&i| rows[i][col] != 0) else { continue };
        rows.swap(r, i);
        let inv = mod_inverse(rows[r][col], p);
        for v in rows[r].iter_mut() {
            *v = *v * inv % p;
        }
        for i in 0..rows.len() {
            if i != r && rows[i][col] != 0 {
                let f = rows[i][col];
                for j in 0..n {
                    rows[i][j] = (rows[i][j] + p * p - f * rows[r][j] % p) % p;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    (rows, pivots)
}

fn mod_inverse(a: usize, p: usize) -> usize {
    (1..p).find(|&b| a * b % p == 1).expect("p is prime and a is nonzero")
}

/// `[n choose r]_p`, the number of subspaces of co-dimension `r`.
pub fn gaussian_binomial(n: usize, r: usize, p: usize) -> u128 {
    if r > n {
        return 0;
    }
    let p = p as u128;
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..r {
        num *= p.pow((n - i) as u32) - 1;
        den *= p.pow((i + 1) as u32) - 1;
    }
    num / den
}

/// Streams every subspace of `F_p^n` of co-dimension `0..=max_codim` once:
/// by co-dimension, then pivot columns lexicographically, then free entries.
pub struct SubspaceStream {
    group: AbelianGroup,
    p: usize,
    n: usize,
    max_codim: usize,
    codim: usize,
    pivots: Option<Vec<usize>>,
    free_slots: Vec<(usize, usize)>,
    counter: Vec<usize>,
    exhausted_counter: bool,
}

pub fn enumerate_subspaces(p: usize, n: usize, max_codim: usize) -> Result<SubspaceStream> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if max_codim > n {
        return Err(Error::InvalidParameter(format!("co-dimension {max_codim} exceeds dimension {n}")));
    }
    let group = AbelianGroup::prime_field_power(p, n)?;
    Ok(SubspaceStream {
        group,
        p,
        n,
        max_codim,
        codim: 0,
        pivots: None,
        free_slots: Vec::new(),
        counter: Vec::new(),
        exhausted_counter: true,
    })
}

impl SubspaceStream {
    pub fn group(&self) -> &AbelianGroup {
        &self.group
    }

    fn set_pivots(&mut self, pivots: Vec<usize>) {
        self.free_slots = pivots
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| ((c + 1)..self.n).filter(|j| !pivots.contains(j)).map(move |j| (i, j)))
            .collect();
        self.counter = vec![0; self.free_slots.len()];
        self.exhausted_counter = false;
        self.pivots = Some(pivots);
    }

    /// Moves to the next pivot set, possibly raising the co-dimension.
    fn advance_pivots(&mut self) -> bool {
        let next = match &self.pivots {
            None => Some((0..self.codim).collect::<Vec<_>>()),
            Some(cur) => next_combination(cur, self.n),
        };
        match next {
            Some(piv) => {
                self.set_pivots(piv);
                true
            }
            None => {
                self.codim += 1;
                if self.codim > self.max_codim {
                    return false;
                }
                self.set_pivots((0..self.codim).collect());
                true
            }
        }
    }
}

fn next_combination(cur: &[usize], n: usize) -> Option<Vec<usize>> {
    let k = cur.len();
    let mut c = cur.to_vec();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return Some(c);
        }
    }
    None
}

impl SubspaceStream {
    /// Next canonical dual basis and its pivot columns, without building the subspace.
    pub fn next_dual_basis(&mut self) -> Option<(Vec<Vec<usize>>, Vec<usize>)> {
        if self.codim > self.max_codim {
            return None;
        }
        if self.exhausted_counter && !self.advance_pivots() {
            return None;
        }
        let pivots = self.pivots.clone().expect("pivots are set after advancing");
        let mut rows = vec![vec![0usize; self.n]; pivots.len()];
        for (i, &c) in pivots.iter().enumerate() {
            rows[i][c] = 1;
        }
        for (&(i, j), &v) in self.free_slots.iter().zip(&self.counter) {
            rows[i][j] = v;
        }
        // Increment the counter, the last slot fastest.
        let mut carry = true;
        for v in self.counter.iter_mut().rev() {
            *v += 1;
            if *v < self.p {
                carry = false;
                break;
            }
            *v = 0;
        }
        if carry {
            self.exhausted_counter = true;
        }
        Some((rows, pivots))
    }
}

impl Iterator for SubspaceStream {
    type Item = Subspace;

    fn next(&mut self) -> Option<Subspace> {
        let (rows, pivots) = self.next_dual_basis()?;
        Some(Subspace::from_echelon(&self.group, self.p, self.n, rows, pivots))
    }
}

/// `|(A − x) ∩ V| / |V|`.
pub fn coset_density(a: &ElementSet, v: &Subspace, x: usize) -> BigRational {
    let target = v.coset_of(x);
    let hits = a.iter().filter(|&y| v.coset_of(y) == target).count();
    BigRational::new(BigInt::from(hits), BigInt::from(v.len()))
}

/// Number of elements of `A` in each coset of `V`.
pub fn coset_histogram(a: &ElementSet, v: &Subspace) -> Vec<usize> {
    let mut hist = vec![0usize; v.num_cosets()];
    for y in a.iter() {
        hist[v.coset_of(y)] += 1;
    }
    hist
}

/// A shift maximizing `|(A − x) ∩ V|`, smallest-rank among maximizers,
/// with the count achieved.
pub fn best_shift_count(a: &ElementSet, v: &Subspace) -> (usize, usize) {
    let hist = coset_histogram(a, v);
    let reps = v.coset_representatives();
    let mut best = (reps[0], hist[0]);
    for (id, &count) in hist.iter().enumerate() {
        if count > best.1 || (count == best.1 && reps[id] < best.0) {
            best = (reps[id], count);
        }
    }
    best
}

pub fn best_shift(a: &ElementSet, v: &Subspace) -> (usize, BigRational) {
    let (x, count) = best_shift_count(a, v);
    (x, BigRational::new(BigInt::from(count), BigInt::from(v.len())))
}
