mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bfree::abundant::{
    classes_up_to, deficient_run_density, generator_reciprocal_sums, longest_abundant_run,
    primitive_abundant_generators, smallest_abundant_coprime_to, Class,
};
use bfree::admissibility::{
    admissible, entropy_estimate, entropy_lower_bound, eta_admissible_search, ther_solve, CountMode,
};
use bfree::density::{davenport_erdos, taut_check_finite, DensityOptions};
use bfree::dynamics::{
    build_minimal_toeplitz, proximality_suite, sample_max_entropy, toeplitz_verify, PeriodStrategy,
    ProximalityOptions,
};
use bfree::progressions::rogers_check;
use bfree::sieve::{ones_frequency, sieve_window};
use bfree::taut::{reduce_taut, verify_mirsky_preserved};
use bfree::{BFamily, Block, Budget, EtaWindow, Parallelism};
use clap::{Args, CommandFactory, Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde_json::{json, Value};

use output::Format;

/// Computable combinatorics of B-free integers.
#[derive(Parser, Debug)]
#[command(name = "bfree", version)]
struct Cli {
    /// Worker threads (BFREE_THREADS takes precedence). 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Largest lcm, in bits, for exact routines.
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..=4096))]
    lcm_bits: u32,
    /// Largest residue table for exact routines.
    #[arg(long, global = true, default_value_t = 1 << 27, value_parser = clap::value_parser!(u64).range(1..))]
    table_limit: u64,
    /// Longest word for exact block counting.
    #[arg(long, global = true, default_value_t = 28, value_parser = clap::value_parser!(u64).range(1..=64))]
    enum_n: u64,
    /// Node budget for backtracking searches.
    #[arg(long, global = true, default_value_t = 50_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    nodes: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct FamilyArg {
    /// Family descriptor (JSON file).
    #[arg(long, conflicts_with = "mods", required_unless_present = "mods")]
    family: Option<PathBuf>,
    /// Explicit moduli, comma separated (instead of --family).
    #[arg(long, value_delimiter = ',')]
    mods: Option<Vec<u64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sieve eta over a window.
    Sieve {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1)]
        start: i64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        len: u64,
        /// Bit dump; `.json` writes a bit string, anything else the raw format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Davenport-Erdos sequence and density diagnostics.
    Density {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        kgrid: Vec<u64>,
        /// Window [1, N] for sampled values.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        sample_window: u64,
        /// Same as --format json.
        #[arg(long)]
        json: bool,
    },
    /// Tautness check and taut reduction.
    Taut {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        reduce: bool,
        #[arg(long, requires = "reduce")]
        verify_mirsky: bool,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        window: u64,
        #[arg(long, default_value_t = 3)]
        blocklen: usize,
    },
    /// Y-signature, T_her solution and search in eta for a block.
    Admissible {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        block: Block,
        #[arg(long)]
        ther: bool,
        /// Moduli above this bound are ignored by --ther for symbolic families.
        #[arg(long, default_value_t = 10_000)]
        ther_bound: u64,
        /// Search offsets [0, N) of eta.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        search: Option<u64>,
        #[arg(long, requires = "search")]
        dominated: bool,
    },
    /// Block-count entropy estimates.
    Entropy {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, value_delimiter = ',', default_value = "6,12,18")]
        ngrid: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Mode::Dominated)]
        mode: Mode,
        /// Required deficiencies `b:s`, for --mode deficiency.
        #[arg(long, value_delimiter = ',')]
        deficiency: Vec<String>,
        /// Symbolic families are cut at this bound.
        #[arg(long, default_value_t = 100)]
        bound: u64,
        /// Window for the sieved lower bound.
        #[arg(long, default_value_t = 1_000_000)]
        window: u64,
    },
    /// Proximality evidence.
    Proximal {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 10_000)]
        truncation: u64,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
        #[arg(long, default_value_t = 1_000_000)]
        scan_window: u64,
    },
    /// Toeplitz skeleton, or period certification with --verify.
    Toeplitz {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        verify: bool,
        /// Window `A:N` (start A, length N).
        #[arg(long, allow_hyphen_values = true, default_value = "1:100000", value_parser = parse_window)]
        window: (i64, u64),
        /// Candidate periods: divisors of D.
        #[arg(long, conflicts_with = "dyadic")]
        dmax: Option<u64>,
        /// Candidate periods `b_1..b_min(a,K) 2^(a+1)` from these odd factors.
        #[arg(long, value_delimiter = ',')]
        dyadic: Option<Vec<u64>>,
        #[arg(long, default_value_t = 4)]
        stages: usize,
    },
    /// Sample eta AND fair coins.
    SampleMme {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1)]
        start: i64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        len: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Abundant, perfect and deficient numbers.
    Abundant {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        limit: u64,
        #[arg(long)]
        generators: bool,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        runs: Option<u64>,
        #[arg(long)]
        coprime_k: Option<usize>,
    },
    /// Random instances of the Rogers inequality.
    RogersFuzz {
        #[arg(long, default_value_t = 10_000)]
        instances: u64,
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..=20))]
        kmax: u64,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
        max_mod: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Mode {
    All,
    Dominated,
    Deficiency,
}

fn parse_window(s: &str) -> Result<(i64, u64), String> {
    let (a, n) = s.split_once(':').ok_or("expected A:N")?;
    let a = a.parse().map_err(|e| format!("start: {e}"))?;
    let n: u64 = n.parse().map_err(|e| format!("length: {e}"))?;
    if n == 0 {
        return Err("length must be positive".into());
    }
    Ok((a, n))
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<bfree::Error> for Failure {
    fn from(e: bfree::Error) -> Self {
        match e {
            bfree::Error::InvalidArgument(_) | bfree::Error::Descriptor(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Compute(e.to_string()),
        }
    }
}

type Run<T> = Result<T, Failure>;

fn load_family(f: &FamilyArg) -> Run<BFamily> {
    match (&f.family, &f.mods) {
        (_, Some(m)) => Ok(BFamily::explicit(m.clone())),
        (Some(p), None) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(BFamily::from_json(&text)?)
        }
        (None, None) => Err(Failure::Usage("--family or --mods is required".into())),
    }
}

fn write_bits(path: &Path, w: &EtaWindow) -> Run<()> {
    let io = |e: std::io::Error| Failure::Compute(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let bits: String = (0..w.len())
            .map(|i| if w.bit(i) { '1' } else { '0' })
            .collect();
        let v = json!({"start": w.start, "len": w.len(), "bits": bits});
        std::fs::write(path, output::render(&v, Format::Json)).map_err(io)
    } else {
        let mut bytes = Vec::with_capacity(16 + w.len().div_ceil(8) as usize);
        bytes.extend_from_slice(&w.start.to_le_bytes());
        bytes.extend_from_slice(&w.len().to_le_bytes());
        bytes.extend_from_slice(&w.to_le_bytes());
        std::fs::write(path, bytes).map_err(io)
    }
}

fn window_summary(w: &EtaWindow) -> Value {
    json!({
        "start": w.start,
        "len": w.len(),
        "ones": w.count_ones(),
        "frequency": ones_frequency(w),
        "moduli_used": w.moduli.len(),
    })
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report serializes")
}

fn parse_deficiency(items: &[String]) -> Run<Vec<(u64, u64)>> {
    items
        .iter()
        .map(|it| {
            let (b, s) = it
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("deficiency `{it}`: expected b:s")))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<u64>()
                    .map_err(|e| Failure::Usage(format!("deficiency `{it}`: {e}")))
            };
            Ok((p(b)?, p(s)?))
        })
        .collect()
}

fn run(cli: &Cli) -> Run<Value> {
    let budget = Budget {
        lcm_bits: cli.lcm_bits,
        table_limit: cli.table_limit,
        enum_n: cli.enum_n as usize,
        nodes: cli.nodes,
    };
    let par = Parallelism::Rayon;
    match &cli.command {
        Command::Sieve {
            family,
            start,
            len,
            out,
        } => {
            let fam = load_family(family)?;
            let w = sieve_window(&fam, *start, *len, par)?;
            if let Some(p) = out {
                write_bits(p, &w)?;
            }
            Ok(window_summary(&w))
        }
        Command::Density {
            family,
            kgrid,
            sample_window,
            ..
        } => {
            let fam = load_family(family)?;
            let opts = DensityOptions {
                sample_window: *sample_window,
                budget,
                par,
            };
            Ok(to_value(&davenport_erdos(&fam, kgrid, &opts)?))
        }
        Command::Taut {
            family,
            reduce,
            verify_mirsky,
            window,
            blocklen,
        } => {
            let fam = load_family(family)?;
            let mut v = json!({});
            if fam.is_explicit() {
                let mods = fam.elements();
                v["taut_check"] = match taut_check_finite(&mods, &budget) {
                    Ok(t) => to_value(&t),
                    Err(e @ bfree::Error::NotPrimitive { .. }) => json!({"error": e.to_string()}),
                    Err(e) => return Err(e.into()),
                };
            }
            if *reduce {
                let r = reduce_taut(&fam)?;
                if *verify_mirsky {
                    v["mirsky"] = to_value(&verify_mirsky_preserved(
                        &fam, &r.output, *window, *blocklen, par,
                    )?);
                }
                v["reduction"] = to_value(&r);
            }
            Ok(v)
        }
        Command::Admissible {
            family,
            block,
            ther,
            ther_bound,
            search,
            dominated,
        } => {
            let fam = load_family(family)?;
            let n = block.len() as u64;
            let sig = admissible(block, &fam.truncate(n.max(1)));
            let mut v = json!({
                "block": block.to_string(),
                "admissible": sig.is_admissible(),
                "signature": to_value(&sig),
            });
            if *ther {
                let support: Vec<i64> = block.support().iter().map(|&p| p as i64).collect();
                let mods = if fam.is_explicit() {
                    fam.elements()
                } else {
                    fam.truncate(*ther_bound)
                };
                v["ther"] = to_value(&ther_solve(&support, &mods, &budget)?);
            }
            if let Some(bound) = search {
                let r = eta_admissible_search(block, &fam, *bound, *dominated, &budget, par)?;
                v["found"] = json!(r.found_at.is_some());
                v["found_at"] = json!(r.found_at);
                v["definitive"] = json!(r.definitive);
            }
            Ok(v)
        }
        Command::Entropy {
            family,
            ngrid,
            mode,
            deficiency,
            bound,
            window,
        } => {
            let fam = load_family(family)?;
            let mods = if fam.is_explicit() {
                fam.elements()
            } else {
                fam.truncate(*bound)
            };
            let mode = match mode {
                Mode::All => CountMode::AllAdmissible,
                Mode::Dominated => CountMode::EtaDominated,
                Mode::Deficiency => CountMode::DeficiencyAtLeast {
                    s: parse_deficiency(deficiency)?,
                },
            };
            let pts = entropy_estimate(&mods, ngrid, &mode, &budget, par)?;
            let lower: Vec<Value> = ngrid
                .iter()
                .filter(|&&n| n > 0)
                .map(|&n| Ok(json!({"n": n, "bound": entropy_lower_bound(&fam, n, *window, par)?})))
                .collect::<Run<_>>()?;
            Ok(json!({
                "moduli": mods,
                "truncated": !fam.is_explicit(),
                "mode": to_value(&mode),
                "estimates": to_value(&pts),
                "lower_bounds": lower,
            }))
        }
        Command::Proximal {
            family,
            truncation,
            kmax,
            scan_window,
        } => {
            let fam = load_family(family)?;
            let opts = ProximalityOptions {
                truncation: *truncation,
                k_max: *kmax,
                scan_window: *scan_window,
                budget,
                par,
            };
            Ok(to_value(&proximality_suite(&fam, &opts)?))
        }
        Command::Toeplitz {
            family,
            verify,
            window,
            dmax,
            dyadic,
            stages,
        } => {
            let fam = load_family(family)?;
            let (start, len) = *window;
            if !*verify {
                return Ok(to_value(&build_minimal_toeplitz(
                    &fam, *stages, start, len, par,
                )?));
            }
            let strategy = match (dmax, dyadic) {
                (_, Some(odd)) => PeriodStrategy::DyadicScaled {
                    odd_factors: odd.clone(),
                },
                (Some(d), None) => PeriodStrategy::Divisors { d_max: *d },
                (None, None) => {
                    let l =
                        bfree::bset::lcm_of(&fam, if fam.is_explicit() { u64::MAX } else { 30 })?;
                    let d = u64::try_from(l)
                        .map_err(|_| Failure::Compute("default --dmax overflows".into()))?;
                    PeriodStrategy::Divisors { d_max: d }
                }
            };
            let r = toeplitz_verify(&fam, start, len, &strategy, &budget, par)?;
            Ok(json!({"strategy": to_value(&strategy), "report": to_value(&r)}))
        }
        Command::SampleMme {
            family,
            start,
            len,
            seed,
            out,
        } => {
            let fam = load_family(family)?;
            let w = sample_max_entropy(&fam, *start, *len, *seed, par)?;
            if let Some(p) = out {
                write_bits(p, &w)?;
            }
            let mut v = window_summary(&w);
            v["seed"] = json!(seed);
            Ok(v)
        }
        Command::Abundant {
            limit,
            generators,
            runs,
            coprime_k,
        } => {
            let classes = classes_up_to(*limit, par);
            let count = |c: Class| classes.iter().filter(|&&x| x == c).count();
            let (run_len, run_start) = longest_abundant_run(*limit, par);
            let mut v = json!({
                "limit": limit,
                "abundant": count(Class::Abundant),
                "perfect": count(Class::Perfect),
                "deficient": count(Class::Deficient),
                "longest_abundant_run": {"length": run_len, "start": run_start},
            });
            if *generators {
                let g = primitive_abundant_generators(*limit, par)?.elements();
                v["generators"] = json!({
                    "count": g.len(),
                    "reciprocal_sums": generator_reciprocal_sums(&g, *limit),
                    "elements": g,
                });
            }
            if let Some(r) = runs {
                v["runs"] = to_value(&deficient_run_density(*limit, *r, par)?);
            }
            if let Some(k) = coprime_k {
                let n = smallest_abundant_coprime_to(*k, &budget)?;
                v["smallest_abundant_coprime"] = json!({"k": k, "n": n.to_string()});
            }
            Ok(v)
        }
        Command::RogersFuzz {
            instances,
            kmax,
            max_mod,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut violations = 0u64;
            let mut first = Value::Null;
            for _ in 0..*instances {
                let k = 1 + rng.next_u64() % kmax;
                let mods: Vec<u64> = (0..k).map(|_| 2 + rng.next_u64() % (max_mod - 1)).collect();
                let res: Vec<u64> = mods.iter().map(|&b| rng.next_u64() % b).collect();
                let r = rogers_check(&mods, &res)?;
                if !r.holds {
                    violations += 1;
                    if first.is_null() {
                        first = json!({"mods": mods, "residues": res, "check": to_value(&r)});
                    }
                }
            }
            Ok(json!({
                "instances": instances,
                "seed": seed,
                "violations": violations,
                "first_violation": first,
            }))
        }
    }
}

fn thread_count(flag: usize) -> Result<usize, String> {
    match std::env::var("BFREE_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| format!("BFREE_THREADS=`{s}`: {e}")),
        Err(_) => Ok(flag),
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    eprintln!("{}", Cli::command().render_usage());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => return usage_error(&e),
    };
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(1);
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;

    let format = match &cli.command {
        Command::Density { json: true, .. } => Format::Json,
        _ => cli.format,
    };
    match run(&cli) {
        Ok(v) => {
            print!("{}", output::render(&v, format));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(m)) => usage_error(&m),
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
