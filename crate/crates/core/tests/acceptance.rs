//! Acceptance run: one `criterion N: PASS/FAIL` line per criterion.
//!
//! Each criterion combines the library suite's result with checks against
//! oracles written here from the definitions.

use std::collections::BTreeSet;
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewcorner::config::Constants;
use skewcorner::corners::{count_skew_corners_analytic, ColumnFamily, SkewInstance};
use skewcorner::corpus;
use skewcorner::function::{fourier_transform, RealFunction, RealMeasure};
use skewcorner::group::{AbelianGroup, ElementSet};
use skewcorner::pipeline::{
    almost_periodicity_search, autocorrelation_measure, corner_eta, decoupling_check, find_robust_witness,
    structure_vs_pseudorandomness, unbalance, Certificate, PairForm,
};
use skewcorner::search::{exact_max_scf, SearchSpec};
use skewcorner::spread::density_increment;
use skewcorner::suite::{self, SuiteReport, KNOWN_FAILING};

const SEED: u64 = 7;

struct Verdict {
    pass: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn from_suite(report: &SuiteReport, id: u32) -> Self {
        let c = &report.criteria[id as usize - 1];
        Self { pass: c.pass(), notes: c.failures.clone() }
    }

    fn require(&mut self, ok: bool, note: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            if self.notes.len() < 5 {
                self.notes.push(note());
            }
        }
    }
}

fn rat(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Quadruples `(x, y, y′, h)` straight from the definition.
fn oracle_skew_count(fam: &ColumnFamily) -> u64 {
    let g = fam.group();
    let has = |x: usize, y: usize| fam.index().contains(x) && fam.column(x).contains(y);
    let mut total = 0;
    for x in g.elements() {
        for y in g.elements() {
            for h in g.elements() {
                if has(x, y) && has(x, g.add(y, h)) {
                    total += g.elements().filter(|&yp| has(g.add(x, h), yp)).count() as u64;
                }
            }
        }
    }
    total
}

fn oracle_grid_count(n: usize, pts: &BTreeSet<(usize, usize)>) -> (u64, u64) {
    let n = n as i64;
    let has = |x: i64, y: i64| x >= 1 && y >= 1 && pts.contains(&(x as usize, y as usize));
    let (mut total, mut trivial) = (0, 0);
    for x in 1..=n {
        for y in 1..=n {
            for h in -n..=n {
                if has(x, y) && has(x, y + h) {
                    let third = (1..=n).filter(|&yp| has(x + h, yp)).count() as u64;
                    total += third;
                    if h == 0 {
                        trivial += third;
                    }
                }
            }
        }
    }
    (total, total - trivial)
}

/// `η = |G| Σ_x K(x) D(x) / (Σ K · Σ D)` with `K(x) = Σ_g #{y ∈ A_g : x + y ∈ A_g + g}`.
fn oracle_eta(fam: &ColumnFamily) -> BigRational {
    let g = fam.group();
    let n = g.order();
    let mut k = vec![0u128; n];
    for x in g.elements() {
        for c in fam.index().iter() {
            let a = fam.column(c);
            let shifted = a.translate(g, c);
            k[x] += a.iter().filter(|&y| shifted.contains(g.add(x, y))).count() as u128;
        }
    }
    let d: Vec<u128> = g.elements().map(|x| if fam.index().contains(x) { fam.column(x).len() as u128 } else { 0 }).collect();
    let kd: u128 = k.iter().zip(&d).map(|(a, b)| a * b).sum();
    rat(n as u128 * kd, k.iter().sum::<u128>() * d.iter().sum::<u128>())
}

fn oracle_dft(g: &AbelianGroup, f: &[f64]) -> Vec<Complex64> {
    let n = g.order();
    (0..n)
        .map(|gamma| {
            let gc = g.coords(gamma);
            let s: Complex64 = (0..n)
                .map(|x| {
                    let phase: f64 =
                        g.coords(x).iter().zip(&gc).zip(g.factors()).map(|((a, b), m)| (a * b) as f64 / *m as f64).sum();
                    f[x] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase)
                })
                .sum();
            s / n as f64
        })
        .collect()
}

fn oracle_diff_conv(g: &AbelianGroup, f: &[f64], h: &[f64]) -> Vec<f64> {
    let n = g.order();
    (0..n).map(|x| (0..n).map(|y| f[y] * h[g.add(x, y)]).sum::<f64>() / n as f64).collect()
}

fn oracle_norm(v: &[f64], p: u32) -> f64 {
    (v.iter().map(|a| a.abs().powi(p as i32)).sum::<f64>() / v.len() as f64).powf(1.0 / f64::from(p))
}

/// Subspaces of co-dimension ≤ r of `F_p^n`, as kernels of functional tuples.
fn oracle_subspaces(g: &AbelianGroup, r: usize) -> Vec<ElementSet> {
    let p = g.factors()[0];
    let n = g.order();
    let dot = |t: usize, x: usize| g.coords(t).iter().zip(g.coords(x)).map(|(a, b)| a * b).sum::<usize>() % p;
    let mut out: Vec<ElementSet> = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(chosen) = stack.pop() {
        let set = ElementSet::from_predicate(n, |x| chosen.iter().all(|&t| dot(t, x) == 0));
        if !out.contains(&set) {
            out.push(set);
        }
        if chosen.len() < r {
            for t in chosen.last().map_or(1, |&l| l + 1)..n {
                let mut c = chosen.clone();
                c.push(t);
                stack.push(c);
            }
        }
    }
    out
}

fn oracle_spread_violated(fam: &ColumnFamily, r: usize, lambda: f64) -> bool {
    let g = fam.group();
    let n = g.order() as f64;
    let rhs: f64 = fam.index().iter().map(|i| (fam.column(i).len() as f64 / n).powi(2)).sum();
    oracle_subspaces(g, r).iter().any(|v| {
        let lhs: f64 = fam
            .index()
            .iter()
            .map(|i| {
                let best = g.elements().map(|x| fam.column(i).iter().filter(|&y| v.contains(g.sub(y, x))).count()).max();
                (best.unwrap_or(0) as f64 / v.len() as f64).powi(2)
            })
            .sum();
        lhs > lambda * rhs + 1e-12
    })
}

/// `max_x (μ_{F′} ∗ μ_V)(x)` with `F′ = Σ_g 1_{A_g} ∘ 1_{A_g}`.
fn oracle_peak(fam: &ColumnFamily, v: &ElementSet) -> f64 {
    let g = fam.group();
    let n = g.order();
    let mut f = vec![0.0; n];
    for c in fam.index().iter() {
        let a: Vec<f64> = (0..n).map(|x| if fam.column(c).contains(x) { 1.0 } else { 0.0 }).collect();
        for (acc, val) in f.iter_mut().zip(oracle_diff_conv(g, &a, &a)) {
            *acc += val;
        }
    }
    let mean = f.iter().sum::<f64>() / n as f64;
    let vs = v.to_vec();
    (0..n).map(|x| vs.iter().map(|&w| f[g.sub(x, w)] / mean).sum::<f64>() / vs.len() as f64).fold(0.0, f64::max)
}

fn oracle_pair_correlation(g: &AbelianGroup, m1: &ElementSet, m2: &ElementSet, s: &ElementSet) -> f64 {
    let mut hits = 0usize;
    for y in m1.iter() {
        for z in m2.iter() {
            if s.contains(g.sub(z, y)) {
                hits += 1;
            }
        }
    }
    hits as f64 / (m1.len() * m2.len()) as f64
}

fn criterion_1(report: &SuiteReport) -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::from_suite(report, 1);
    let fams = suite::counting_corpus(SEED);
    v.require(fams.len() >= 200, || "corpus too small".into());
    for shape in [vec![12], vec![2, 2, 2], vec![2, 6]] {
        v.require(fams.iter().any(|f| f.group().factors() == shape.as_slice()), || format!("corpus misses {shape:?}"));
    }
    for (i, fam) in fams.iter().enumerate() {
        let brute = oracle_skew_count(fam);
        let analytic = count_skew_corners_analytic(&SkewInstance::Group(fam.clone())).expect("group instance");
        v.require(analytic == BigRational::from_integer(BigInt::from(brute)), || format!("instance {i}"));
    }
    v.require(start.elapsed().as_secs_f64() < 10.0, || "over 10 s".into());
    v
}

fn criterion_2(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 2);
    for (i, fam) in suite::counting_corpus(SEED).iter().enumerate().filter(|(_, f)| !f.is_empty()) {
        let eta = oracle_eta(fam);
        v.require(corner_eta(fam).ok() == Some(eta.clone()), || format!("instance {i}: η differs from oracle"));
        let size = BigRational::from_integer(BigInt::from(fam.total_size()));
        let order = BigRational::from_integer(BigInt::from(fam.group().order()));
        let bound = eta * &size * &size * &size / (&order * &order);
        let total = BigRational::from_integer(BigInt::from(oracle_skew_count(fam)));
        v.require(total >= bound, || format!("instance {i}: bound fails"));
    }
    v
}

fn criterion_3(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let groups = corpus::small_groups();
    for i in 0..100 {
        let g = &groups[i % groups.len()];
        let fam = corpus::random_instance(g, &mut rng);
        let a = rng.gen_range(0..g.order());
        let b: Vec<usize> = (0..g.order()).map(|_| rng.gen_range(0..g.order())).collect();
        let moved = ColumnFamily::from_points(g, fam.points().map(|(x, y)| (g.add(x, a), g.add(y, b[x])))).unwrap();
        v.require(oracle_skew_count(&fam) == oracle_skew_count(&moved), || format!("instance {i}: shift changes count"));
    }
    for i in 0..50 {
        let n = rng.gen_range(1..=6);
        let SkewInstance::Grid { points, .. } = corpus::random_grid(n, &mut rng) else { unreachable!() };
        let g = AbelianGroup::cyclic(2 * n).unwrap();
        let emb = ColumnFamily::from_points(&g, points.iter().map(|&(x, y)| (x - 1, y - 1))).unwrap();
        let (total, _) = oracle_grid_count(n, &points);
        v.require(total == oracle_skew_count(&emb), || format!("grid {i}: embedding changes count"));
    }
    v
}

fn criterion_4(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    for g in suite::harmonic_groups() {
        for i in 0..20 {
            let f = corpus::random_real_function(&g, &mut rng);
            let ours = oracle_dft(&g, f.values());
            let theirs = fourier_transform(&f);
            let err = ours.iter().zip(theirs.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            v.require(err <= 1e-9, || format!("{g} function {i}: transform differs by {err:e}"));
        }
    }
    v
}

fn criterion_5(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    for i in 0..100 {
        let g = AbelianGroup::new(if i % 2 == 0 { &[12] } else { &[2, 2, 2] }).unwrap();
        let fs: Vec<(usize, RealFunction)> =
            (0..rng.gen_range(1..=5)).map(|_| (rng.gen_range(0..g.order()), corpus::random_real_function(&g, &mut rng))).collect();
        let n = g.order();
        let mut same = vec![0.0; n];
        let mut shifted = vec![0.0; n];
        for (s, f) in &fs {
            let fv = f.values();
            let fs_: Vec<f64> = (0..n).map(|x| fv[g.sub(x, *s)]).collect();
            for (acc, val) in same.iter_mut().zip(oracle_diff_conv(&g, fv, fv)) {
                *acc += val;
            }
            for (acc, val) in shifted.iter_mut().zip(oracle_diff_conv(&g, fv, &fs_)) {
                *acc += val;
            }
        }
        for p in [2, 4] {
            let (l, r) = (oracle_norm(&same, p), oracle_norm(&shifted, p));
            let lib = decoupling_check(&fs, p).unwrap();
            v.require(l >= r - 1e-9, || format!("collection {i}, p = {p}: oracle {l} < {r}"));
            v.require((lib.lhs - l).abs() < 1e-9 && (lib.rhs - r).abs() < 1e-9, || format!("collection {i}: norms differ"));
        }
    }
    v
}

fn criterion_6(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    for i in 0..50 {
        let b = corpus::random_bohr(400, 3, &mut rng).unwrap();
        let n = b.group().order();
        for x in 0..n {
            let radius = b
                .frequencies()
                .iter()
                .map(|&t| (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (t * x) as f64 / n as f64)).norm())
                .fold(0.0, f64::max);
            if (radius - b.width()).abs() > 1e-9 {
                v.require((radius <= b.width()) == b.contains(x), || format!("Bohr set {i}: membership of {x}"));
            }
        }
    }
    v
}

fn criterion_7(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 7);
    let start = Instant::now();
    for (i, (name, fam)) in suite::increment_corpus(SEED).iter().enumerate() {
        let params = suite::increment_params(i, fam).unwrap();
        let trace = density_increment(fam, &params).unwrap();
        let r = params.r.min(trace.family.group().rank_count());
        v.require(!oracle_spread_violated(&trace.family, r, params.lambda), || format!("{name}: oracle finds a violation"));
        let mut prev = trace.initial_potential.clone();
        for s in &trace.steps {
            v.require(s.potential_after >= &prev * rat(3, 2), || format!("{name}: gain below 3/2"));
            prev = s.potential_after.clone();
        }
    }
    v.require(start.elapsed().as_secs_f64() < 300.0, || "over 5 min".into());
    v
}

fn criterion_8(report: &SuiteReport) -> Verdict {
    let mut v = Verdict::from_suite(report, 8);
    for (i, (name, fam)) in suite::increment_corpus(SEED).iter().enumerate().step_by(4) {
        let params = suite::increment_params(i, fam).unwrap();
        let trace = density_increment(fam, &params).unwrap();
        let r = params.r.min(trace.family.group().rank_count());
        for w in oracle_subspaces(trace.family.group(), r) {
            let peak = oracle_peak(&trace.family, &w);
            v.require(peak <= params.lambda.sqrt() + 1e-9, || format!("{name}: peak {peak} over √λ"));
        }
    }
    v
}

fn criterion_9(report: &SuiteReport, consts: &Constants) -> Verdict {
    let mut v = Verdict::from_suite(report, 9);
    let eps = suite::DRIVER_EPSILON;
    let g = AbelianGroup::prime_field_power(2, 4).unwrap();
    let subspaces = oracle_subspaces(&g, suite::DRIVER_R_MAX);
    for (i, fam) in suite::driver_corpus(SEED).iter().enumerate().take(40) {
        let d = corpus::mass_exponent(fam).unwrap();
        let rep = structure_vs_pseudorandomness(fam, eps, d, suite::DRIVER_R_MAX, consts, SEED ^ i as u64).unwrap();
        let peak = subspaces.iter().map(|w| oracle_peak(fam, w)).fold(0.0, f64::max);
        if peak >= 1.0 + eps / 32.0 + 1e-9 {
            v.require(matches!(rep.certificate, Certificate::Increment { .. }), || format!("family {i}: peak {peak}"));
        }
        if let Certificate::Uniform { eta, .. } = &rep.certificate {
            v.require(*eta == oracle_eta(fam), || format!("family {i}: η differs from oracle"));
        }
    }
    let full = ColumnFamily::constant(&g, &ElementSet::full(16), &ElementSet::full(16));
    let rep = structure_vs_pseudorandomness(&full, eps, 0, 2, consts, SEED).unwrap();
    v.require(matches!(&rep.certificate, Certificate::Uniform { eta, .. } if eta.is_one()), || "full columns".into());
    v
}

fn criterion_10(report: &SuiteReport, consts: &Constants) -> Verdict {
    let mut v = Verdict::from_suite(report, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    for (i, fam) in suite::witness_corpus(SEED).iter().enumerate().step_by(2) {
        let g = fam.group();
        let n = g.order();
        let full = ElementSet::full(n);
        let d = corpus::mass_exponent(fam).unwrap();
        let delta = 0.1;
        let w = match find_robust_witness(fam, &full, &full, 2, 0.2, delta, d, consts, i as u64) {
            Ok(w) => w,
            Err(e) => {
                v.require(false, || format!("family {i}: {e}"));
                continue;
            }
        };
        let corr = oracle_pair_correlation(g, &w.pair.m1, &w.pair.m2, &w.level.set);
        v.require(corr >= 1.0 - delta - 1e-12, || format!("family {i}: correlation {corr}"));
        let mu = autocorrelation_measure(fam);
        let centered = RealFunction::from_fn(g, |x| mu[x] - 1.0);
        let norm = oracle_norm(centered.values(), 2);
        if norm > 1e-6 {
            let eps = norm.min(1.0) * rng.gen_range(0.5..1.0);
            let u = unbalance(&centered, &RealMeasure::uniform(g), eps, 2, consts).unwrap();
            let shifted: Vec<f64> = centered.values().iter().map(|x| x + 1.0).collect();
            let direct = oracle_norm(&shifted, u.p_prime);
            v.require(direct >= 1.0 + eps / 2.0 - 1e-9, || format!("family {i}: unbalance {direct}"));
        }
        if g.prime_field_characteristic().is_some() {
            let ap = almost_periodicity_search(&w.pair.m1, &w.pair.m2, &w.level.set, 0.05, 4, PairForm::Difference, g).unwrap();
            let sub = ap.witness.unwrap();
            let base = oracle_pair_correlation(g, &w.pair.m1, &w.pair.m2, &w.level.set);
            let smoothed: f64 = sub
                .members()
                .iter()
                .map(|t| oracle_pair_correlation(g, &w.pair.m1, &w.pair.m2, &w.level.set.translate(g, g.neg(t))))
                .sum::<f64>()
                / sub.len() as f64;
            v.require((smoothed - base).abs() <= 0.05 + 1e-12, || format!("family {i}: deviation {}", smoothed - base));
        }
    }
    v
}

fn oracle_grid_max(n: usize) -> usize {
    let pts: Vec<(usize, usize)> = (1..=n).flat_map(|x| (1..=n).map(move |y| (x, y))).collect();
    (0u32..1 << pts.len())
        .filter_map(|mask| {
            let set: BTreeSet<_> = (0..pts.len()).filter(|&i| mask >> i & 1 == 1).map(|i| pts[i]).collect();
            (oracle_grid_count(n, &set).1 == 0).then_some(set.len())
        })
        .max()
        .unwrap()
}

fn criterion_11(report: &SuiteReport) -> Verdict {
    let start = Instant::now();
    let mut v = Verdict::from_suite(report, 11);
    for n in 1..=4 {
        let r = exact_max_scf(&SearchSpec::Grid(n), u64::MAX).unwrap();
        let expected = oracle_grid_max(n);
        v.require(r.optimal && r.best_size == expected, || format!("n = {n}: {} vs exhaustive {expected}", r.best_size));
        let pts: BTreeSet<_> = r.witness.iter().copied().collect();
        v.require(oracle_grid_count(n, &pts).1 == 0, || format!("n = {n}: witness has a skew corner"));
    }
    v.require(start.elapsed().as_secs_f64() < 600.0, || "over 10 min".into());
    v
}

fn main() {
    let consts = Constants::default();
    let single = suite::run_suite_with_threads(SEED, &consts, 1).expect("thread pool");
    let multi = suite::run_suite_with_threads(SEED, &consts, 4).expect("thread pool");
    let mut verdicts: Vec<(u32, Verdict)> = vec![
        (1, criterion_1(&multi)),
        (2, criterion_2(&multi)),
        (3, criterion_3(&multi)),
        (4, criterion_4(&multi)),
        (5, criterion_5(&multi)),
        (6, criterion_6(&multi)),
        (7, criterion_7(&multi)),
        (8, criterion_8(&multi)),
        (9, criterion_9(&multi, &consts)),
        (10, criterion_10(&multi, &consts)),
        (11, criterion_11(&multi)),
    ];
    let mut twelve = Verdict::from_suite(&multi, 12);
    twelve.require(single.render() == multi.render(), || "reports differ between 1 and 4 threads".into());
    verdicts.push((12, twelve));

    let mut unexpected = Vec::new();
    for (id, v) in &verdicts {
        println!("criterion {id}: {}", if v.pass { "PASS" } else { "FAIL" });
        for note in &v.notes {
            println!("    {note}");
        }
        if !v.pass && !KNOWN_FAILING.contains(id) {
            unexpected.push(*id);
        }
    }
    for id in KNOWN_FAILING {
        println!("criterion {id} is a documented known failure (see README)");
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

