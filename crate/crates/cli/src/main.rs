//! `cds`: batch front end for the cds-core toolkit.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input or config, 3 an invariant
//! check failed.

mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use cds_core::arith::{self, euler_phi, factor, gcd, is_prime, omega, tau, BruteForce};
use cds_core::characters::pv_records;
use cds_core::equidist::{overlap_decay_sweep, psi_estimate};
use cds_core::experiment;
use cds_core::format::sig12;
use cds_core::rational::{parse_rational, ratio, to_exact_string, Rational};
use cds_core::residue_group::{unit_group, Coset, Subgroup, SubgroupRule};
use cds_core::verify::{run_suite, Scale};
use cds_core::{Error, ExperimentConfig};

use table::{Format, Table};

#[derive(Parser, Debug)]
#[command(
    name = "cds",
    version,
    about = "Power-residue cosets, character sums and constrained Diophantine approximation"
)]
struct Cli {
    /// Worker threads; 0 picks one per core. Output never depends on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write the table or summary here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// phi, tau, omega, u_d, r_d per n, optionally diffed against enumeration.
    Arith(ArithArgs),
    /// A subgroup of (Z/nZ)^x and its cosets.
    Group(GroupArgs),
    /// Worst partial character sum per non-principal character against
    /// the Polya-Vinogradov bound 2 sqrt(n) ln n (natural log).
    Chars(CharsArgs),
    /// Coset counts against mu |G| and the bound tau(n) + 2 sqrt(n) ln n,
    /// or with --overlap the interval-system overlap sweep.
    Equidist(EquidistArgs),
    /// Condition report and Monte Carlo hit fractions from a JSON config.
    Experiment(ExperimentArgs),
    /// Run the invariant suite and print one line per check.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ArithArgs {
    #[arg(long, default_value_t = 1000)]
    n_max: u64,
    #[arg(long, default_value_t = 2)]
    d: u64,
    /// Add brute-force u_d, r_d and a mismatch column.
    #[arg(long)]
    oracle: bool,
    /// Dyadic-block maxima of tau(n)/n^eps and (2d)^omega(n)/n^eps up to 2^LOG2 instead.
    #[arg(long, value_name = "LOG2")]
    growth: Option<u32>,
    /// Exponents for --growth; repeatable.
    #[arg(long, default_values_t = [0.5, 0.25])]
    epsilon: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    DthPowers,
    Generators,
    Trivial,
}

#[derive(Args, Debug)]
struct GroupArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, value_enum, default_value_t = Mode::DthPowers)]
    mode: Mode,
    #[arg(long, default_value_t = 2)]
    d: u64,
    /// Generators for --mode generators, comma separated.
    #[arg(long, value_delimiter = ',')]
    generators: Vec<u64>,
    /// List only the coset of this unit.
    #[arg(long)]
    a: Option<u64>,
}

#[derive(Args, Debug)]
struct CharsArgs {
    #[arg(long, default_value_t = 3)]
    n_min: u64,
    #[arg(long, default_value_t = 100)]
    n_max: u64,
}

#[derive(Args, Debug)]
struct EquidistArgs {
    #[arg(long, default_value_t = 2)]
    n_min: u64,
    #[arg(long, default_value_t = 500)]
    n_max: u64,
    #[arg(long, value_enum, default_value_t = Mode::DthPowers)]
    mode: Mode,
    #[arg(long, default_value_t = 2)]
    d: u64,
    #[arg(long, value_delimiter = ',')]
    generators: Vec<u64>,
    /// Values of mu, comma separated rationals.
    #[arg(long, value_delimiter = ',', default_values = ["1/4", "1/3", "1/2", "2/3", "3/4", "1"])]
    mu: Vec<String>,
    /// Overlap sweep over primes in [n-min, n-max] instead of the count sweep.
    #[arg(long)]
    overlap: bool,
    /// Interval radius factor for --overlap.
    #[arg(long, default_value = "1/4")]
    alpha: String,
    /// Decay reference exponent d - 1/2 - epsilon for --overlap.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Every step-th prime in the range, for --overlap.
    #[arg(long, default_value_t = 1)]
    step: usize,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-hit CSV: sample_index, k, q, p, error_num, error_den.
    #[arg(long)]
    hits: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Small ranges; seconds instead of minutes.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(format!("i/o: {e}"))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("invariant violated: {m}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Arith(a) => arith_cmd(cli, a),
        Command::Group(a) => group_cmd(cli, a),
        Command::Chars(a) => chars_cmd(cli, a),
        Command::Equidist(a) if a.overlap => overlap_cmd(cli, a),
        Command::Equidist(a) => equidist_cmd(cli, a),
        Command::Experiment(a) => experiment_cmd(cli, a),
        Command::Verify(a) => verify_cmd(cli, a),
    }
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(cli: &Cli, t: &Table) -> CliResult {
    let mut out = open_out(cli.out.as_deref())?;
    t.write(cli.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn rule_of(mode: Mode, d: u64, generators: &[u64]) -> Result<Option<SubgroupRule>, Failure> {
    Ok(match mode {
        Mode::Full => Some(SubgroupRule::Full),
        Mode::DthPowers if d == 0 => return Err(Failure::Validation("--d must be at least 1".into())),
        Mode::DthPowers => Some(SubgroupRule::DthPowers(d)),
        Mode::Generators if generators.is_empty() => {
            return Err(Failure::Validation("--mode generators needs --generators".into()))
        }
        Mode::Generators => Some(SubgroupRule::Generators(generators.to_vec())),
        Mode::Trivial => None,
    })
}

fn build_subgroup(n: u64, rule: &Option<SubgroupRule>) -> cds_core::Result<Subgroup> {
    let g = unit_group(n)?;
    match rule {
        Some(r) => r.build(&g),
        None => Ok(Subgroup::trivial(g)),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------

fn arith_cmd(cli: &Cli, a: &ArithArgs) -> CliResult {
    if let Some(log2) = a.growth {
        if !(2..=28).contains(&log2) {
            return Err(Failure::Validation("--growth must lie in 2..=28".into()));
        }
        let mut t = Table::new(&["block_end", "epsilon", "tau_max", "omega_power_max"]);
        t.extend(arith::growth_scan(log2, &a.epsilon, a.d).into_iter().map(|r| {
            vec![
                r.block_end.to_string(),
                sig12(r.epsilon),
                sig12(r.tau_max),
                sig12(r.omega_power_max),
            ]
        }));
        return emit(cli, &t);
    }
    if a.n_max == 0 || a.d == 0 {
        return Err(Failure::Validation("--n-max and --d must be at least 1".into()));
    }
    let brute = BruteForce::default();
    if a.oracle && a.n_max > brute.cutoff {
        return Err(Error::AboveCutoff {
            modulus: a.n_max,
            cutoff: brute.cutoff,
        }
        .into());
    }
    let mut cols = vec!["n", "d", "phi", "tau", "omega", "u_d", "r_d", "s_d"];
    if a.oracle {
        cols.extend(["brute_u_d", "brute_r_d", "mismatches"]);
    }
    let rows: Vec<(Vec<String>, u64)> = (1..=a.n_max)
        .into_par_iter()
        .map(|n| {
            let f = factor(n).expect("n >= 1");
            let (u, r) = (arith::u_d(&f, a.d), arith::r_d(&f, a.d));
            let mut row = vec![
                n.to_string(),
                a.d.to_string(),
                euler_phi(&f).to_string(),
                tau(&f).to_string(),
                omega(&f).to_string(),
                u.to_string(),
                r.to_string(),
                to_exact_string(&Rational::new(r.into(), n.into())),
            ];
            let mut bad = 0;
            if a.oracle {
                let (bu, br) = (brute.u_d(n, a.d).unwrap(), brute.r_d(n, a.d).unwrap());
                bad = u64::from(bu != u) + u64::from(br != r);
                row.extend([bu.to_string(), br.to_string(), bad.to_string()]);
            }
            (row, bad)
        })
        .collect();
    let mismatches: u64 = rows.iter().map(|r| r.1).sum();
    let mut t = Table::new(&cols);
    t.extend(rows.into_iter().map(|r| r.0));
    emit(cli, &t)?;
    if mismatches > 0 {
        return Err(Failure::Invariant(format!(
            "{mismatches} formula/oracle mismatches"
        )));
    }
    Ok(())
}

fn group_cmd(cli: &Cli, a: &GroupArgs) -> CliResult {
    let rule = rule_of(a.mode, a.d, &a.generators)?;
    let h = Arc::new(build_subgroup(a.n, &rule)?);
    let cosets = match a.a {
        Some(rep) => vec![Coset::new(rep % a.n, Arc::clone(&h))?],
        None => h.cosets(),
    };
    let mut t = Table::new(&[
        "modulus",
        "subgroup_order",
        "index",
        "representative",
        "size",
        "elements",
    ]);
    t.extend(cosets.iter().map(|c| {
        vec![
            a.n.to_string(),
            h.order().to_string(),
            h.index().to_string(),
            c.representative().to_string(),
            c.len().to_string(),
            join(c.elements()),
        ]
    }));
    emit(cli, &t)
}

fn chars_cmd(cli: &Cli, a: &CharsArgs) -> CliResult {
    if a.n_min < 2 || a.n_min > a.n_max {
        return Err(Failure::Validation("need 2 <= --n-min <= --n-max".into()));
    }
    let per_n: Vec<_> = (a.n_min..=a.n_max)
        .into_par_iter()
        .map(pv_records)
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&[
        "n",
        "exponents",
        "h",
        "sum_re",
        "sum_im",
        "abs_sum",
        "bound",
        "slack",
    ]);
    let mut violations = 0;
    for r in per_n.into_iter().flatten() {
        violations += usize::from(r.slack() < 0.0);
        t.push(vec![
            r.modulus.to_string(),
            join(&r.exponents),
            r.h.to_string(),
            sig12(r.sum.re),
            sig12(r.sum.im),
            sig12(r.sum.norm()),
            sig12(r.bound),
            sig12(r.slack()),
        ]);
    }
    emit(cli, &t)?;
    if violations > 0 {
        return Err(Failure::Invariant(format!(
            "{violations} partial sums exceed the bound"
        )));
    }
    Ok(())
}

fn parse_mus(raw: &[String]) -> Result<Vec<Rational>, Failure> {
    raw.iter()
        .map(|s| {
            let mu = parse_rational(s)?;
            if mu <= ratio(0, 1) || mu > ratio(1, 1) {
                return Err(Failure::Validation(format!("mu = {s} is outside (0, 1]")));
            }
            Ok(mu)
        })
        .collect()
}

fn equidist_cmd(cli: &Cli, a: &EquidistArgs) -> CliResult {
    if a.n_min < 2 || a.n_min > a.n_max {
        return Err(Failure::Validation("need 2 <= --n-min <= --n-max".into()));
    }
    let rule = rule_of(a.mode, a.d, &a.generators)?;
    let mus = parse_mus(&a.mu)?;
    let per_n: Vec<Vec<(Vec<String>, bool)>> = (a.n_min..=a.n_max)
        .into_par_iter()
        .map(|n| -> cds_core::Result<_> {
            if let Some(SubgroupRule::Generators(gens)) = &rule {
                if gens.iter().any(|&g| gcd(g % n, n) != 1) {
                    return Ok(Vec::new());
                }
            }
            let h = Arc::new(build_subgroup(n, &rule)?);
            let mut reps = vec![1];
            if n > 2 {
                reps.push(n - 1);
            }
            let mut rows = Vec::new();
            for rep in reps {
                let c = Coset::new(rep, Arc::clone(&h))?;
                for mu in &mus {
                    let e = psi_estimate(mu, &c)?;
                    rows.push((
                        vec![
                            n.to_string(),
                            rep.to_string(),
                            to_exact_string(mu),
                            h.order().to_string(),
                            e.exact_count().to_string(),
                            to_exact_string(e.main_term()),
                            to_exact_string(e.abs_error()),
                            sig12(e.bound()),
                            sig12(e.normalized_error()),
                            e.within_bound().to_string(),
                        ],
                        e.within_bound(),
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&[
        "n",
        "a",
        "mu",
        "subgroup_order",
        "exact_count",
        "main_term",
        "abs_error",
        "bound",
        "normalized_error",
        "within_bound",
    ]);
    let mut violations = 0;
    for (row, ok) in per_n.into_iter().flatten() {
        violations += usize::from(!ok);
        t.push(row);
    }
    emit(cli, &t)?;
    if violations > 0 {
        return Err(Failure::Invariant(format!(
            "{violations} rows exceed tau(n) + 2 sqrt(n) ln n"
        )));
    }
    Ok(())
}

fn overlap_cmd(cli: &Cli, a: &EquidistArgs) -> CliResult {
    let rule = rule_of(a.mode, a.d, &a.generators)?.unwrap_or(SubgroupRule::Generators(vec![1]));
    let alpha = parse_rational(&a.alpha)?;
    let d = u32::try_from(a.d).map_err(|_| Failure::Validation("--d is too large".into()))?;
    let qs: Vec<u64> = (a.n_min.max(3)..=a.n_max)
        .filter(|&q| is_prime(q))
        .step_by(a.step.max(1))
        .collect();
    if qs.is_empty() {
        return Err(Failure::Validation("no odd primes in [n-min, n-max]".into()));
    }
    let pieces = vec![
        (ratio(1, 10), ratio(1, 5)),
        (ratio(1, 3), ratio(1, 2)),
        (ratio(3, 5), ratio(7, 8)),
    ];
    let report = overlap_decay_sweep(&qs, d, &alpha, 1, &rule, &pieces, a.epsilon)?;
    let mut t = Table::new(&[
        "q",
        "lambda_a",
        "lambda_e",
        "lambda_ae",
        "multiplier",
        "excess",
        "reference_rate",
    ]);
    t.extend(report.rows.iter().map(|r| {
        vec![
            r.q.to_string(),
            to_exact_string(&r.report.lambda_a),
            to_exact_string(&r.report.lambda_e),
            to_exact_string(&r.report.lambda_ae),
            to_exact_string(&r.report.multiplier),
            sig12(r.excess),
            sig12(r.reference_rate),
        ]
    }));
    emit(cli, &t)?;
    eprintln!("log-log slope of |excess| against q: {}", sig12(report.slope));
    eprintln!("largest |excess| / reference rate: {}", sig12(report.max_ratio));
    Ok(())
}

/// Line of the first `"key"` in `text`, for pointing at a rejected field.
fn line_of_key(text: &str, field: &str) -> Option<usize> {
    let key = field.split(['.', '[']).next()?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Failure::Validation(format!(
            "{}:{}:{}: field `{}`: {inner}",
            path.display(),
            inner.line(),
            inner.column(),
            e.path()
        ))
    })?;
    Ok(cfg)
}

fn experiment_cmd(cli: &Cli, a: &ExperimentArgs) -> CliResult {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let (_, _, mc, summary) = experiment::run(cfg, cli.threads).map_err(|e| match &e {
        Error::Config { field, .. } => {
            match line_of_key(&std::fs::read_to_string(&a.config).unwrap_or_default(), field) {
                Some(line) => Failure::Validation(format!("{}:{line}: {e}", a.config.display())),
                None => Failure::Validation(format!("{}: {e}", a.config.display())),
            }
        }
        _ => e.into(),
    })?;

    let mut out = open_out(cli.out.as_deref())?;
    out.write_all(summary.to_json().as_bytes())?;
    out.flush()?;

    if let Some(path) = &a.hits {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record([
            "schema_version",
            "sample_index",
            "k",
            "q",
            "p",
            "error_num",
            "error_den",
        ])
        .map_err(io::Error::from)?;
        let version = cds_core::SCHEMA_VERSION.to_string();
        for o in &mc.outcomes {
            for h in &o.hits {
                w.write_record([
                    version.clone(),
                    o.index.to_string(),
                    h.k.to_string(),
                    h.q.to_string(),
                    h.p.to_string(),
                    h.error.numer().to_string(),
                    h.error.denom().to_string(),
                ])
                .map_err(io::Error::from)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs) -> CliResult {
    let scale = if a.quick { Scale::quick() } else { Scale::full() };
    let report = run_suite(&scale);
    let mut t = Table::new(&["check", "status", "cases", "failures", "seconds", "detail"]);
    t.extend(report.outcomes.iter().map(|o| {
        vec![
            o.name.to_string(),
            if o.passed() { "PASS" } else { "FAIL" }.to_string(),
            o.cases.to_string(),
            o.failures.to_string(),
            format!("{:.2}", o.elapsed.as_secs_f64()),
            o.detail.clone(),
        ]
    }));
    emit(cli, &t)?;
    if !report.all_passed() {
        let failed: Vec<&str> = report
            .outcomes
            .iter()
            .filter(|o| !o.passed())
            .map(|o| o.name)
            .collect();
        return Err(Failure::Invariant(failed.join(", ")));
    }
    Ok(())
}
