//! Skew-corner-free sets: verification, exact maxima on small instances and
//! a greedy lower bound.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::corners::{count_skew_corners_brute, instance_to_json, ColumnFamily, SkewInstance};
use crate::error::{Error, Result};
use crate::group::AbelianGroup;

/// `true` iff the instance has no nontrivial skew corner.
pub fn verify_scf(inst: &SkewInstance) -> bool {
    count_skew_corners_brute(inst).nontrivial == 0
}

/// Where to search.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchSpec {
    /// `[n] × [n]`.
    Grid(usize),
    /// All of `G × G`.
    Group(AbelianGroup),
    /// `{0..w} × {0..w}` inside `Z/m × Z/m`.
    Window { modulus: usize, width: usize },
}

impl SearchSpec {
    pub fn label(&self) -> String {
        match self {
            SearchSpec::Grid(n) => format!("grid:{n}"),
            SearchSpec::Group(g) => format!("group:{g}"),
            SearchSpec::Window { modulus, width } => format!("window:{width}/Z{modulus}"),
        }
    }

    /// Trivial lower bound: one full row.
    pub fn row_size(&self) -> usize {
        match self {
            SearchSpec::Grid(n) => *n,
            SearchSpec::Group(g) => g.order(),
            SearchSpec::Window { width, .. } => *width,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub spec: SearchSpec,
    pub best_size: usize,
    /// Points in the instance's own coordinates (1-based for grids).
    pub witness: Vec<(usize, usize)>,
    pub optimal: bool,
    pub nodes: u64,
    pub wall_time_ms: u128,
}

impl SearchResult {
    pub fn instance(&self) -> Result<SkewInstance> {
        match &self.spec {
            SearchSpec::Grid(n) => SkewInstance::grid(*n, self.witness.iter().copied()),
            SearchSpec::Group(g) => Ok(SkewInstance::Group(ColumnFamily::from_points(g, self.witness.iter().copied())?)),
            SearchSpec::Window { modulus, .. } => {
                let g = AbelianGroup::cyclic(*modulus)?;
                Ok(SkewInstance::Group(ColumnFamily::from_points(&g, self.witness.iter().copied())?))
            }
        }
    }

    pub fn witness_string(&self) -> String {
        self.witness.iter().map(|(x, y)| format!("{x}:{y}")).collect::<Vec<_>>().join(";")
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.spec.row_size(), self.best_size, self.optimal, self.witness_string())
    }

    /// Wall time is left out so that outputs stay reproducible.
    pub fn to_json(&self) -> Value {
        let instance = self
            .instance()
            .map(|i| serde_json::from_str::<Value>(&instance_to_json(&i)).expect("instance JSON"))
            .unwrap_or(Value::Null);
        json!({
            "spec": self.spec.label(), "best_size": self.best_size, "optimal": self.optimal,
            "nodes": self.nodes, "witness": instance,
        })
    }
}

pub const TABLE_HEADER: &str = "n,max_size,optimal,witness";

enum Geometry {
    Grid(usize),
    Group(AbelianGroup),
}

/// Membership with per-column sizes and difference counts
/// `diff[x][h] = #{y : (x, y), (x, y + h) ∈ S}`.
struct Board {
    geo: Geometry,
    side: usize,
    steps: Vec<i64>,
    member: Vec<bool>,
    size: Vec<usize>,
    diff: Vec<Vec<u32>>,
}

impl Board {
    fn new(geo: Geometry) -> Self {
        let side = match &geo {
            Geometry::Grid(n) => *n,
            Geometry::Group(g) => g.order(),
        };
        let steps: Vec<i64> = match &geo {
            Geometry::Grid(n) => (1 - *n as i64..*n as i64).filter(|&h| h != 0).collect(),
            Geometry::Group(g) => (1..g.order() as i64).collect(),
        };
        let width = 2 * side + 1;
        Self {
            geo,
            side,
            steps,
            member: vec![false; side * side],
            size: vec![0; side],
            diff: vec![vec![0; width]; side],
        }
    }

    fn slot(&self, h: i64) -> usize {
        (h + self.side as i64) as usize
    }

    fn fwd(&self, x: usize, h: i64) -> Option<usize> {
        match &self.geo {
            Geometry::Grid(n) => {
                let v = x as i64 + h;
                (v >= 0 && v < *n as i64).then_some(v as usize)
            }
            Geometry::Group(g) => Some(g.add(x, h as usize)),
        }
    }

    fn back(&self, x: usize, h: i64) -> Option<usize> {
        match &self.geo {
            Geometry::Grid(n) => {
                let v = x as i64 - h;
                (v >= 0 && v < *n as i64).then_some(v as usize)
            }
            Geometry::Group(g) => Some(g.sub(x, h as usize)),
        }
    }

    fn has(&self, x: usize, y: usize) -> bool {
        self.member[x * self.side + y]
    }

    /// Whether adding `(a, b)` creates a nontrivial skew corner. The new
    /// point can only play one role, since the third point's column differs.
    fn can_add(&self, a: usize, b: usize) -> bool {
        for &h in &self.steps {
            if let Some(c) = self.fwd(a, h) {
                if self.size[c] > 0 {
                    let up = self.fwd(b, h).is_some_and(|y| self.has(a, y));
                    let down = self.back(b, h).is_some_and(|y| self.has(a, y));
                    if up || down {
                        return false;
                    }
                }
            }
            if let Some(x) = self.back(a, h) {
                if self.diff[x][self.slot(h)] > 0 {
                    return false;
                }
            }
        }
        true
    }

    fn toggle(&mut self, a: usize, b: usize, on: bool) {
        for i in 0..self.steps.len() {
            let h = self.steps[i];
            let s = self.slot(h);
            let pairs = usize::from(self.fwd(b, h).is_some_and(|y| self.has(a, y)))
                + usize::from(self.back(b, h).is_some_and(|y| self.has(a, y)));
            if on {
                self.diff[a][s] += pairs as u32;
            } else {
                self.diff[a][s] -= pairs as u32;
            }
        }
        self.member[a * self.side + b] = on;
        if on {
            self.size[a] += 1;
        } else {
            self.size[a] -= 1;
        }
    }
}

/// Board plus the allowed points in row-major order and a map back to
/// instance coordinates.
fn setup(spec: &SearchSpec) -> Result<(Board, Vec<(usize, usize)>, Box<dyn Fn((usize, usize)) -> (usize, usize)>)> {
    match spec {
        SearchSpec::Grid(n) => {
            if *n == 0 {
                return Err(Error::InvalidParameter("grid side must be positive".into()));
            }
            let pts = (0..*n).flat_map(|x| (0..*n).map(move |y| (x, y))).collect();
            Ok((Board::new(Geometry::Grid(*n)), pts, Box::new(|(x, y)| (x + 1, y + 1))))
        }
        SearchSpec::Group(g) => {
            let m = g.order();
            let pts = (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).collect();
            Ok((Board::new(Geometry::Group(g.clone())), pts, Box::new(|p| p)))
        }
        SearchSpec::Window { modulus, width } => {
            if *width == 0 || width > modulus {
                return Err(Error::InvalidParameter(format!("window {width} does not fit in Z/{modulus}")));
            }
            let g = AbelianGroup::cyclic(*modulus)?;
            let pts = (0..*width).flat_map(|x| (0..*width).map(move |y| (x, y))).collect();
            Ok((Board::new(Geometry::Group(g)), pts, Box::new(|p| p)))
        }
    }
}

struct Dfs<'a> {
    board: Board,
    points: &'a [(usize, usize)],
    current: Vec<usize>,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Dfs<'_> {
    fn run(&mut self, i: usize) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if self.current.len() > self.best.len() {
            self.best = self.current.clone();
        }
        if i == self.points.len() || self.current.len() + (self.points.len() - i) <= self.best.len() {
            return;
        }
        let (a, b) = self.points[i];
        if self.board.can_add(a, b) {
            self.board.toggle(a, b, true);
            self.current.push(i);
            self.run(i + 1);
            self.current.pop();
            self.board.toggle(a, b, false);
        }
        self.run(i + 1);
    }
}

/// Include-first depth-first search over points in row-major order with
/// incremental feasibility and a remaining-points bound. Among maximum
/// sets the first one found is kept, which is the lexicographically
/// smallest point list.
pub fn exact_max_scf(spec: &SearchSpec, budget: u64) -> Result<SearchResult> {
    let start = Instant::now();
    let (board, points, map) = setup(spec)?;
    let mut dfs = Dfs { board, points: &points, current: vec![], best: vec![], nodes: 0, budget, exhausted: false };
    dfs.run(0);
    let witness: Vec<(usize, usize)> = dfs.best.iter().map(|&i| map(points[i])).collect();
    Ok(SearchResult {
        spec: spec.clone(),
        best_size: witness.len(),
        witness,
        optimal: !dfs.exhausted,
        nodes: dfs.nodes,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

/// Random-order greedy insertion seeded with the first row `{(x, y₀)}`.
pub fn greedy_scf(spec: &SearchSpec, seed: u64) -> Result<SearchResult> {
    let start = Instant::now();
    let (mut board, points, map) = setup(spec)?;
    let y0 = points[0].1;
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for (i, &(a, b)) in points.iter().enumerate() {
        if b == y0 && board.can_add(a, b) {
            board.toggle(a, b, true);
            chosen.insert(i);
        }
    }
    let mut order: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut nodes = 0u64;
    for i in order {
        nodes += 1;
        let (a, b) = points[i];
        if board.can_add(a, b) {
            board.toggle(a, b, true);
            chosen.insert(i);
        }
    }
    let witness: Vec<(usize, usize)> = chosen.iter().map(|&i| map(points[i])).collect();
    Ok(SearchResult {
        spec: spec.clone(),
        best_size: witness.len(),
        witness,
        optimal: false,
        nodes,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

/// Exact grid maxima, as found by completed searches.
pub const FROZEN_GRID_MAXIMA: [(usize, usize); 4] = [(1, 1), (2, 2), (3, 4), (4, 6)];

/// Ground-truth table for grids `1..=max_n`.
pub fn ground_truth_table(max_n: usize, budget: u64) -> Result<(String, Vec<SearchResult>)> {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    let mut rows = Vec::new();
    for n in 1..=max_n {
        let r = exact_max_scf(&SearchSpec::Grid(n), budget)?;
        out.push_str(&r.csv_row());
        out.push('\n');
        rows.push(r);
    }
    Ok((out, rows))
}
