//! `skewbench`: batch front-end for the skew-corner toolkit.
//!
//! Exit status is 0 when every asserted check passes, 1 when one fails and
//! 2 for unreadable input or bad arguments.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use skewcorner::bohr::{
    check_domination, check_l1_smoothing, check_size_bound, find_regular_dilate, BohrJson, BohrSet, CheckReport,
};
use skewcorner::config::Constants;
use skewcorner::corners::{instance_from_json, CountReport, SkewInstance, COUNTS_CSV_HEADER};
use skewcorner::corpus::{mass_exponent, square_exponent};
use skewcorner::error::Error;
use skewcorner::function::json::rational_to_string;
use skewcorner::group::AbelianGroup;
use skewcorner::pipeline::{nonuniformity_gap_bohr, structure_vs_pseudorandomness, verify_certificate, verify_int_combining};
use skewcorner::search::{exact_max_scf, greedy_scf, ground_truth_table, verify_scf, SearchSpec};
use skewcorner::spread::{
    bohr_candidates, density_increment, density_increment_bohr, is_sim_spread, is_sim_spread_bohr, SpreadParams,
};
use skewcorner::suite::{run_suite_with_threads, KNOWN_FAILING};

#[derive(Parser, Debug)]
#[command(name = "skewbench", version, about = "Skew corners: counts, Bohr sets, spreadness, pipeline, search")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Float comparison tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Constant override, e.g. `--const C_smooth=250`.
    #[arg(long = "const", global = true, value_name = "KEY=VAL")]
    constants: Vec<String>,
    /// Node budget for exact search.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Brute-force and analytic skew-corner counts.
    Count {
        #[arg(long)]
        input: PathBuf,
        /// Emit a CSV row instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Regular dilate and the Bohr-set inequality checks.
    Bohr {
        #[arg(long)]
        input: PathBuf,
    },
    /// Simultaneous spreadness check or density increment.
    Spread {
        #[arg(long)]
        input: PathBuf,
        /// Bohr container; switches to the Bohr variant.
        #[arg(long)]
        container: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Density exponent; the smallest valid one by default.
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        increment: bool,
    },
    /// Structure-vs-pseudorandomness driver, or the Bohr verifiers.
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long, default_value_t = 2)]
        r_max: usize,
        /// Bohr set `R` holding the columns; switches to the Bohr verifiers.
        #[arg(long)]
        container: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        /// Bohr set `B` for the increment branch.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Exact or greedy skew-corner-free sets.
    Search {
        #[arg(long, conflicts_with_all = ["group", "table"])]
        grid: Option<usize>,
        /// Cyclic factors, e.g. `2,2,2`.
        #[arg(long, value_delimiter = ',', conflicts_with = "table")]
        group: Option<Vec<usize>>,
        /// CSV table of exact grid maxima for `1..=N`.
        #[arg(long)]
        table: Option<usize>,
        #[arg(long)]
        greedy: bool,
    },
    /// Full acceptance run emitting a report.
    Suite,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

struct Output {
    text: String,
    failed: Option<String>,
}

impl Output {
    fn json(v: &Value, failed: Option<String>) -> Self {
        Self { text: serde_json::to_string_pretty(v).expect("JSON value") + "\n", failed }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_bohr(path: &PathBuf) -> Result<BohrSet, Failure> {
    let wire: BohrJson = serde_json::from_str(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    wire.to_bohr().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_instance(path: &PathBuf) -> Result<SkewInstance, Failure> {
    instance_from_json(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_family(path: &PathBuf) -> Result<skewcorner::corners::ColumnFamily, Failure> {
    match read_instance(path)? {
        SkewInstance::Group(fam) => Ok(fam),
        SkewInstance::Grid { .. } => Err(Failure::Usage("expected a group-mode instance".into())),
    }
}

fn first_failed(reports: &[CheckReport]) -> Option<String> {
    reports.iter().find(|r| !r.ok()).map(|r| format!("{} on {}", r.check, r.instance))
}

fn count(input: &PathBuf, csv: bool) -> Result<Output, Failure> {
    let inst = read_instance(input)?;
    let id = input.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned());
    let rep = CountReport::compute(&id, &inst)?;
    let failed = (!rep.identity_holds()).then(|| "analytic count differs from brute force".to_string());
    if csv {
        return Ok(Output { text: format!("{COUNTS_CSV_HEADER}\n{}\n", rep.csv_row()), failed });
    }
    let v = json!({
        "instance_id": rep.instance_id,
        "total": rep.skew.total,
        "nontrivial": rep.skew.nontrivial,
        "corner_nontrivial": rep.corner_nontrivial,
        "analytic": rep.analytic.as_ref().map(rational_to_string),
        "eta": rep.eta.as_ref().map(rational_to_string),
        "identity_holds": rep.identity_holds(),
    });
    Ok(Output::json(&v, failed))
}

fn bohr(input: &PathBuf, consts: &Constants) -> Result<Output, Failure> {
    let b = read_bohr(input)?;
    let (rho, reg) = find_regular_dilate(&b)?;
    let mut reports = Vec::new();
    for r in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        reports.push(check_size_bound(&b, r)?.named("B"));
    }
    let small = 1.0 / (100.0 * reg.rank() as f64);
    let nu = reg.dilate(small)?.measure();
    reports.push(check_domination(&reg, &nu, small, consts)?.named("regular dilate"));
    reports.push(check_l1_smoothing(&reg, &nu, small, consts)?.named("regular dilate"));
    let v = json!({
        "size": b.len(),
        "rank": b.rank(),
        "regular": b.is_regular(),
        "regular_dilate": {"rho": rho, "size": reg.len(), "set": BohrJson::from_bohr(&reg)},
        "checks": reports,
    });
    Ok(Output::json(&v, first_failed(&reports)))
}

#[allow(clippy::too_many_arguments)]
fn spread(
    input: &PathBuf,
    container: Option<&PathBuf>,
    r: usize,
    lambda: f64,
    delta: f64,
    eps: f64,
    d: Option<u32>,
    increment: bool,
    consts: &Constants,
) -> Result<Output, Failure> {
    let fam = read_family(input)?;
    let d = d.or_else(|| square_exponent(&fam)).ok_or_else(|| Failure::Usage("family is empty".into()))?;
    let params = SpreadParams::new(r, lambda, delta, eps, d)?;
    let v = match (container, increment) {
        (None, false) => is_sim_spread(&fam, &params)?.to_json(),
        (None, true) => density_increment(&fam, &params)?.to_json(),
        (Some(path), false) => {
            let b = read_bohr(path)?;
            let cands = bohr_candidates(&b, &params)?;
            is_sim_spread_bohr(&fam, &b, &cands, &params)?.to_json()
        }
        (Some(path), true) => density_increment_bohr(&fam, &read_bohr(path)?, &params, consts)?.to_json(),
    };
    Ok(Output::json(&v, None))
}

#[allow(clippy::too_many_arguments)]
fn pipeline(
    input: &PathBuf,
    eps: f64,
    d: Option<u32>,
    r_max: usize,
    container: Option<&PathBuf>,
    sigma: f64,
    witness: Option<&PathBuf>,
    consts: &Constants,
    seed: u64,
) -> Result<Output, Failure> {
    let fam = read_family(input)?;
    let d = d.or_else(|| mass_exponent(&fam)).ok_or_else(|| Failure::Usage("family is empty".into()))?;
    if let Some(path) = container {
        let r = read_bohr(path)?;
        let gap = nonuniformity_gap_bohr(&fam, &r, sigma, eps, d, consts)?;
        let mut failed = (!gap.ok()).then(|| "Bohr non-uniformity".to_string());
        let combining = match witness {
            Some(wpath) => {
                let rep = verify_int_combining(&fam, &r, sigma, eps, &read_bohr(wpath)?, d, consts)?;
                if !rep.chain_holds && failed.is_none() {
                    failed = Some("combining chain".into());
                }
                rep.to_json()
            }
            None => Value::Null,
        };
        return Ok(Output::json(&json!({"nonuniformity": gap.to_json(), "combining": combining}), failed));
    }
    let rep = structure_vs_pseudorandomness(&fam, eps, d, r_max, consts, seed)?;
    let verified = verify_certificate(&fam, &rep.certificate)?;
    let mut v = rep.to_json();
    v["verified"] = json!(verified);
    Ok(Output::json(&v, (!verified).then(|| format!("{} certificate re-verification", rep.certificate.kind()))))
}

fn search(
    grid: Option<usize>,
    group: Option<Vec<usize>>,
    table: Option<usize>,
    greedy: bool,
    consts: &Constants,
    seed: u64,
) -> Result<Output, Failure> {
    if let Some(n) = table {
        let (csv, rows) = ground_truth_table(n, consts.search_budget)?;
        let failed = rows
            .iter()
            .find(|r| !r.instance().map(|i| verify_scf(&i)).unwrap_or(false))
            .map(|r| format!("witness for {}", r.spec.label()));
        return Ok(Output { text: csv, failed });
    }
    let spec = match (grid, group) {
        (Some(n), None) => SearchSpec::Grid(n),
        (None, Some(f)) => SearchSpec::Group(AbelianGroup::new(&f)?),
        _ => return Err(Failure::Usage("give exactly one of --grid, --group or --table".into())),
    };
    let r = if greedy { greedy_scf(&spec, seed)? } else { exact_max_scf(&spec, consts.search_budget)? };
    let ok = r.instance().map(|i| verify_scf(&i)).unwrap_or(false);
    Ok(Output::json(&r.to_json(), (!ok).then(|| "witness is not skew-corner-free".to_string())))
}

fn suite(consts: &Constants, seed: u64, threads: usize) -> Result<Output, Failure> {
    let report = run_suite_with_threads(seed, consts, threads)?;
    let failed = report
        .criteria
        .iter()
        .find(|c| !c.pass() && !KNOWN_FAILING.contains(&c.id))
        .map(|c| format!("criterion {} ({})", c.id, c.name));
    for c in report.criteria.iter().filter(|c| !c.pass() && KNOWN_FAILING.contains(&c.id)) {
        eprintln!("note: criterion {} fails as documented: {}", c.id, c.failures.join("; "));
    }
    Ok(Output { text: report.render(), failed })
}

fn run(cli: Cli) -> Result<Output, Failure> {
    let mut consts = Constants::default();
    for kv in &cli.common.constants {
        consts.set(kv)?;
    }
    if let Some(t) = cli.common.tol {
        consts.tol = t;
    }
    if let Some(b) = cli.common.budget {
        consts.search_budget = b;
    }
    let threads = cli.common.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Failure::Usage("--threads must be positive".into()));
    }
    let seed = cli.common.seed;
    if let Command::Suite = cli.command {
        return suite(&consts, seed, threads);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Count { input, csv } => count(input, *csv),
        Command::Bohr { input } => bohr(input, &consts),
        Command::Spread { input, container, r, lambda, delta, eps, d, increment } => {
            spread(input, container.as_ref(), *r, *lambda, *delta, *eps, *d, *increment, &consts)
        }
        Command::Pipeline { input, eps, d, r_max, container, sigma, witness } => {
            pipeline(input, *eps, *d, *r_max, container.as_ref(), *sigma, witness.as_ref(), &consts, seed)
        }
        Command::Search { grid, group, table, greedy } => search(*grid, group.clone(), *table, *greedy, &consts, seed),
        Command::Suite => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = cli.common.output.clone();
    match run(cli) {
        Ok(out) => {
            let written = match &output {
                Some(path) => fs::write(path, &out.text).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            match out.failed {
                Some(check) => {
                    eprintln!("check failed: {check}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    }
}
