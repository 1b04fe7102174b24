use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use corrcache::allocator::optimize_allocation;
use corrcache::closed_form::{
    cacc_direct_rate, cacc_rate, cauc_optimal_allocation, cauc_rate, cicc_rate,
};
use corrcache::combinatorics::part_unit;
use corrcache::delivery::{
    cauc_deliver, cicc_deliver, decode, deliver, place, place_cauc, place_cicc, Scheme,
    ScheduleSource, SharingPolicy,
};
use corrcache::experiment::{figure1_spec, figure2_spec, run_sweep, unit_grid, CSV_HEADER};
use corrcache::model::{
    ratios_to_sizes, CacheAllocation, ContentStore, DemandVector, ExperimentSpec, LibraryConfig,
};
use corrcache::oracle::{compare_schemes, config_digest, verify_all_demands, worst_case_demand};
use corrcache::schedule::{example1_schedule, AssignmentSchedule};
use corrcache::Error;

#[derive(Parser)]
#[command(name = "corrcache", version, about = "Correlation-aware coded caching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rates of every scheme for one library.
    Rates(RatesArgs),
    /// Optimal per-level cache allocation.
    Optimize(RatesArgs),
    /// Place, deliver and decode one demand vector.
    Simulate(SimulateArgs),
    /// Deliver and decode every demand vector.
    Verify(VerifyArgs),
    /// Rate sweep over the share of one level.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum, Default, PartialEq)]
enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cacc,
    Cauc,
    Cicc,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Cacc => Scheme::Cacc,
            SchemeArg::Cauc => Scheme::Cauc,
            SchemeArg::Cicc => Scheme::Cicc,
        }
    }
}

#[derive(Args, Clone)]
struct Library {
    /// Number of files.
    #[arg(long = "n")]
    n: usize,
    /// Number of users.
    #[arg(long = "k")]
    k: usize,
    /// Cache size in files.
    #[arg(long = "m", default_value_t = 0.0)]
    m: f64,
    /// Per-level shares of the file size; missing trailing levels are zero.
    #[arg(long, value_delimiter = ',', conflicts_with = "level_sizes")]
    ratios: Option<Vec<f64>>,
    /// File size in bits used with --ratios.
    #[arg(long)]
    file_bits: Option<f64>,
    /// Subfile size in bits of every level.
    #[arg(long, value_delimiter = ',')]
    level_sizes: Option<Vec<f64>>,
}

impl Library {
    fn spec(&self) -> Result<ExperimentSpec, Error> {
        let mut ratios = self.ratios.clone().unwrap_or_else(|| vec![1.0]);
        if ratios.len() > self.n {
            return Err(Error::InvalidConfig(format!(
                "{} ratios for {} files",
                ratios.len(),
                self.n
            )));
        }
        ratios.resize(self.n, 0.0);
        Ok(ExperimentSpec {
            n_files: self.n,
            n_users: self.k,
            cache_capacity: self.m,
            file_bits: self
                .file_bits
                .unwrap_or(1000.0 * part_unit(self.k) as f64),
            ratios,
            sweep_level: 1,
            grid: vec![],
        })
    }

    /// Exact real sizes, for formulas.
    fn exact(&self) -> Result<LibraryConfig, Error> {
        match &self.level_sizes {
            Some(sizes) => LibraryConfig::new(self.n, self.k, self.m, sizes.clone()),
            None => self.spec()?.exact_config(),
        }
    }

    /// Whole-bit sizes, for simulation.
    fn bits(&self) -> Result<LibraryConfig, Error> {
        match &self.level_sizes {
            Some(_) => self.exact(),
            None => ratios_to_sizes(&self.spec()?),
        }
    }
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    lib: Library,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    lib: Library,
    /// Requested file of each user; defaults to a worst-case vector.
    #[arg(long, value_delimiter = ',')]
    demands: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "cacc")]
    scheme: SchemeArg,
    /// Caching parameter of every level; defaults to the optimal allocation.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Schedule fixture: `example1` or a fixture file. Without --t, runs
    /// every level at t = 1 without memory sharing.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print every transmission.
    #[arg(long)]
    dump: bool,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    lib: Library,
    #[arg(long, value_enum, default_value = "cacc")]
    scheme: SchemeArg,
    /// Caching parameter of every level; defaults to the optimal allocation.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the per-demand CSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Preset library: 1 sweeps 2-subfiles, 2 sweeps 10-subfiles.
    #[arg(long)]
    figure: Option<u8>,
    #[arg(long = "n", default_value_t = 10)]
    n: usize,
    #[arg(long = "k", default_value_t = 10)]
    k: usize,
    #[arg(long = "m", default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 2)]
    sweep_level: usize,
    /// Number of evenly spaced points in [0, 1], or an explicit list.
    #[arg(long, value_delimiter = ',', default_value = "11")]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn allocation(config: &LibraryConfig, t: &Option<Vec<f64>>) -> Result<CacheAllocation, Error> {
    match t {
        Some(t) => {
            let mut t = t.clone();
            t.resize(config.n_files(), 0.0);
            CacheAllocation::from_t(config.n_users(), &t)
        }
        None => Ok(optimize_allocation(config)?.alloc),
    }
}

fn load_fixture(name: &str) -> Result<AssignmentSchedule, Error> {
    if name == "example1" {
        return Ok(example1_schedule());
    }
    let text = fs::read_to_string(name)
        .map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
    AssignmentSchedule::parse_fixture(&text)
}

fn rates(args: &RatesArgs) -> Result<(), Error> {
    let c = args.lib.exact()?;
    let s = compare_schemes(&c)?;
    match args.format {
        Format::Csv => println!("m,r_cauc,r_cacc,r_cicc,r_cutset\n{},{},{},{},{}", s.memory, s.cauc, s.cacc, s.cicc, s.cutset),
        Format::Text => {
            println!("{}", config_digest(&c));
            for (name, r) in s.rows() {
                println!("{name:>7} {r:.6}");
            }
        }
    }
    Ok(())
}

fn optimize(args: &RatesArgs) -> Result<(), Error> {
    let c = args.lib.exact()?;
    let sol = optimize_allocation(&c)?;
    let t = sol.t(c.n_users());
    match args.format {
        Format::Csv => {
            println!("level,p,t");
            for (l, tl) in t.iter().enumerate() {
                println!("{},{},{}", l + 1, sol.alloc.fraction(l + 1), tl);
            }
            println!("# rate={}", sol.rate);
        }
        Format::Text => {
            println!("{}", config_digest(&c));
            for (l, tl) in t.iter().enumerate() {
                println!("level {:>2}: p={:.6} t={:.6}", l + 1, sol.alloc.fraction(l + 1), tl);
            }
            println!("rate {:.6}", sol.rate);
            let uncoded = cauc_optimal_allocation(&c);
            println!("uncoded rate {:.6}", cauc_rate(&c, &uncoded));
        }
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<bool, Error> {
    let c = args.lib.bits()?;
    let n = c.n_files();
    let demands = match &args.demands {
        Some(d) => DemandVector::new(n, d.clone())?,
        None => worst_case_demand(&c),
    };
    let store = ContentStore::random(&c, args.seed)?;
    let mut schedules = ScheduleSource::generated(args.seed);
    let mut policy = SharingPolicy::Envelope;
    let mut t = args.t.clone();
    if let Some(name) = &args.fixture {
        schedules = schedules.with_fixture(load_fixture(name)?);
        policy = SharingPolicy::Direct;
        t.get_or_insert_with(|| vec![1.0; n]);
    }
    let scheme: Scheme = args.scheme.into();
    let (placement, formula) = match scheme {
        Scheme::Cacc => {
            let alloc = allocation(&c, &t)?;
            let formula = match policy {
                SharingPolicy::Envelope => cacc_rate(&c, &alloc),
                SharingPolicy::Direct => cacc_direct_rate(&c, &alloc),
            };
            (place(&c, &alloc, &store, policy)?, formula)
        }
        Scheme::Cauc => {
            let alloc = match &t {
                Some(_) => allocation(&c, &t)?,
                None => cauc_optimal_allocation(&c),
            };
            (place_cauc(&c, &alloc, &store)?, cauc_rate(&c, &alloc))
        }
        Scheme::Cicc => (place_cicc(&c, &store, policy)?, cicc_rate(&c)),
    };
    let tr = match scheme {
        Scheme::Cacc => deliver(&placement, &demands, &store, &schedules)?,
        Scheme::Cauc => cauc_deliver(&placement, &demands, &store)?,
        Scheme::Cicc => cicc_deliver(&placement, &demands, &store)?,
    };
    let decoded: Vec<bool> = placement
        .caches
        .iter()
        .map(|cache| {
            decode(cache, &placement.layout, &tr, &demands)
                .is_ok_and(|b| b == store.file(demands.of(cache.user)))
        })
        .collect();
    let f = c.file_size();
    match args.format {
        Format::Csv => {
            println!("# {} scheme={scheme} seed={}", config_digest(&c), args.seed);
            println!("demand,total_bits,measured_rate,formula_rate,slack_bits,decode_ok");
            println!(
                "{demands},{},{},{formula},{},{}",
                tr.total_bits(),
                tr.rate(f),
                tr.slack_bits(),
                decoded.iter().all(|&d| d)
            );
        }
        Format::Text => {
            println!("{} scheme={scheme} seed={}", config_digest(&c), args.seed);
            println!("demands {demands}");
            println!("total_bits {}", tr.total_bits());
            println!("file_bits {f}");
            println!("measured_rate {:.6}", tr.rate(f));
            println!("formula_rate {formula:.6}");
            println!("slack_bits {}", tr.slack_bits());
            for l in 0..=n {
                let bits = tr.level_bits(l);
                if bits > 0 {
                    let steps = tr.step_counts(l);
                    println!("level {l}: bits {bits} coded steps {steps:?}");
                }
            }
            for (k, ok) in decoded.iter().enumerate() {
                println!("user {}: {}", k + 1, if *ok { "decoded" } else { "FAILED" });
            }
        }
    }
    if args.dump {
        print!("{}", tr.dump());
    }
    Ok(decoded.iter().all(|&d| d))
}

fn verify(args: &VerifyArgs) -> Result<bool, Error> {
    let c = args.lib.bits()?;
    let scheme: Scheme = args.scheme.into();
    let alloc = match (scheme, &args.t) {
        (Scheme::Cauc, None) => cauc_optimal_allocation(&c),
        _ => allocation(&c, &args.t)?,
    };
    let report = verify_all_demands(&c, &alloc, scheme, args.seed)?;
    emit(&args.out, &report.to_csv())?;
    eprintln!(
        "{} scheme={scheme}: {} demands, max rate {:.6}, formula {:.6}, {} violations",
        report.config_digest,
        report.outcomes.len(),
        report.max_rate,
        report.formula_rate,
        report.violations.len()
    );
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(report.is_clean())
}

fn sweep(args: &SweepArgs) -> Result<(), Error> {
    let mut spec = match args.figure {
        Some(1) => figure1_spec(),
        Some(2) => figure2_spec(),
        Some(other) => return Err(Error::InvalidConfig(format!("no figure preset {other}"))),
        None => {
            let mut ratios = vec![0.0; args.n];
            ratios[0] = 1.0;
            ExperimentSpec {
                n_files: args.n,
                n_users: args.k,
                cache_capacity: args.m,
                file_bits: 1_000_000.0,
                ratios,
                sweep_level: args.sweep_level,
                grid: vec![],
            }
        }
    };
    spec.grid = match args.grid[..] {
        [points] if points.fract() == 0.0 && points >= 1.0 => unit_grid(points as usize),
        _ => args.grid.clone(),
    };
    let result = run_sweep(&spec)?;
    let text = match args.format {
        Format::Csv => format!("# seed={}\n{}", args.seed, result.to_csv()),
        Format::Text => {
            let mut s = format!("{}\n", CSV_HEADER.replace(',', "\t"));
            for i in 0..result.len() {
                s += &format!(
                    "{:.2}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                    result.xs[i], result.cauc[i], result.cacc[i], result.cicc[i], result.cutset[i]
                );
            }
            s
        }
    };
    emit(&args.out, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Rates(a) => rates(a).map(|_| true),
        Command::Optimize(a) => optimize(a).map(|_| true),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
