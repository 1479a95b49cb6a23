mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dp_hotelling::decision::{run_test_seeded, TestConfig, TestOutcome, ThresholdKind};
use dp_hotelling::mechanisms::BoundPolicy;
use dp_hotelling::numlin::Matrix;
use dp_hotelling::simbench::{
    example32_cells, power_grid, run_grid, table1_grid, table2_grid, Cell, GridProfile,
    RejectionTable,
};

/// Smallest number of bootstrap replicates allowed in the upper α tail.
const MIN_TAIL_REPLICATES: f64 = 10.0;

#[derive(Parser)]
#[command(name = "dphot", version, about = "Differentially private two-sample Hotelling test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privatize two samples and test equality of their means.
    Test(TestArgs),
    /// Report the bootstrap threshold next to the χ² reference.
    Calibrate(CalibrateArgs),
    /// Run a rejection-rate grid and write it as CSV.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with one observation of the first sample per row.
    x: PathBuf,
    /// CSV file with one observation of the second sample per row.
    y: PathBuf,
    /// Total privacy budget ε. "inf" requires --unsafe-no-privacy.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: f64,
    /// Every coordinate of every observation lies in [-m, m].
    #[arg(long = "bound-m")]
    bound_m: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of bootstrap replicates.
    #[arg(long = "bootstrap-B", visible_alias = "bootstrap-b", default_value_t = 200)]
    bootstrap_b: usize,
    /// Clip out-of-range values to [-m, m] instead of failing.
    #[arg(long)]
    clamp: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
    /// Allow --epsilon inf, which releases the data without any noise.
    #[arg(long = "unsafe-no-privacy")]
    unsafe_no_privacy: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = Mode::Bootstrap)]
    mode: Mode,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bootstrap,
    Asymptotic,
}

impl From<Mode> for ThresholdKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Bootstrap => ThresholdKind::Bootstrap,
            Mode::Asymptotic => ThresholdKind::Asymptotic,
        }
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("grid").required(true).multiple(false))]
struct SimulateArgs {
    /// Uniform-cube null grid, both rules (96 cells).
    #[arg(long, group = "grid")]
    table1: bool,
    /// Toeplitz null grid, bootstrap rule (24 cells).
    #[arg(long, group = "grid")]
    table2: bool,
    /// Uniform-cube power grid at a = 1 (48 cells).
    #[arg(long, group = "grid")]
    power: bool,
    /// Truncated-Gaussian asymptotic-rule inflation at ε = 4 and ε = 1.
    #[arg(long, group = "grid")]
    example32: bool,
    /// 200 replications for n = 100000 cells, 1000 elsewhere (default).
    #[arg(long, conflicts_with_all = ["full", "reps"])]
    fast: bool,
    /// 1000 replications in every cell.
    #[arg(long, conflicts_with = "reps")]
    full: bool,
    /// Fixed replication count for every cell.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    reps: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON summary to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

enum Failure {
    Usage(String),
    Bound(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Bound(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Bound(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<dp_hotelling::Error> for Failure {
    fn from(e: dp_hotelling::Error) -> Self {
        if e.is_bound_violation() {
            Failure::Bound(e.to_string())
        } else if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dphot: error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

const NO_PRIVACY_BANNER: &str =
    "WARNING: privacy disabled (--epsilon inf). This output is NOT differentially private.";

fn config(data: &DataArgs, kind: ThresholdKind) -> Result<TestConfig, Failure> {
    if data.epsilon.is_infinite() && data.epsilon > 0.0 && !data.unsafe_no_privacy {
        return Err(Failure::Usage(
            "--epsilon inf disables privacy and requires --unsafe-no-privacy".into(),
        ));
    }
    let policy = if data.clamp {
        BoundPolicy::Clamp
    } else {
        BoundPolicy::Reject
    };
    let cfg = TestConfig::new(data.alpha, data.epsilon, data.bound_m)
        .with_kind(kind)
        .with_bootstrap_b(data.bootstrap_b)
        .with_seed(data.seed)
        .with_bound_policy(policy);
    cfg.validate()?;
    if kind == ThresholdKind::Bootstrap {
        check_bootstrap_resolution(cfg.alpha, cfg.bootstrap_b)?;
    }
    Ok(cfg)
}

fn check_bootstrap_resolution(alpha: f64, b: usize) -> Result<(), Failure> {
    let tail = alpha * b as f64;
    if tail + 1e-9 < MIN_TAIL_REPLICATES {
        let index = dp_hotelling::decision::order_statistic_index(alpha, b)
            .map(|k| k.to_string())
            .unwrap_or_else(|_| "0".into());
        let needed = (MIN_TAIL_REPLICATES / alpha - 1e-9).ceil();
        return Err(Failure::Usage(format!(
            "--bootstrap-B {b} is too coarse for alpha {alpha}: order statistic floor((1-alpha)*B) = {index} \
             leaves {tail} replicates in the tail; B must satisfy alpha*B >= {MIN_TAIL_REPLICATES} (B >= {needed})"
        )));
    }
    Ok(())
}

fn load(data: &DataArgs) -> Result<(Matrix, Matrix), Failure> {
    let x = input::read_data(&data.x).map_err(Failure::Usage)?;
    let y = input::read_data(&data.y).map_err(Failure::Usage)?;
    if x.cols() != y.cols() {
        return Err(Failure::Usage(format!(
            "{} has {} columns but {} has {}",
            data.x.display(),
            x.cols(),
            data.y.display(),
            y.cols()
        )));
    }
    if !data.clamp {
        check_bounds(&data.x, &x, data.bound_m)?;
        check_bounds(&data.y, &y, data.bound_m)?;
    }
    Ok((x, y))
}

fn check_bounds(path: &Path, data: &Matrix, m: f64) -> Result<(), Failure> {
    for (i, row) in data.iter_rows().enumerate() {
        if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| v.abs() > m) {
            return Err(Failure::Bound(format!(
                "{}: observation {}, column {}: value {v} lies outside [-{m}, {m}] (use --clamp to clip)",
                path.display(),
                i + 1,
                j + 1
            )));
        }
    }
    Ok(())
}

fn banner(data: &DataArgs) -> bool {
    let off = data.epsilon.is_infinite();
    if off {
        eprintln!("{NO_PRIVACY_BANNER}");
    }
    off
}

fn cmd_test(args: TestArgs) -> Result<(), Failure> {
    let data = &args.data;
    let cfg = config(data, args.mode.into())?;
    let (x, y) = load(data)?;
    let no_privacy = banner(data);
    let outcome = run_test_seeded(&x, &y, &cfg)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let written = if data.json {
        write_json(&mut out, &outcome)
    } else {
        write_test_report(&mut out, &outcome, no_privacy)
    };
    written.map_err(|e| Failure::Usage(format!("writing report: {e}")))
}

fn write_json(out: &mut impl Write, outcome: &TestOutcome) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, outcome)?;
    writeln!(out)
}

fn write_test_report(out: &mut impl Write, o: &TestOutcome, no_privacy: bool) -> io::Result<()> {
    if no_privacy {
        writeln!(out, "{NO_PRIVACY_BANNER}")?;
    }
    writeln!(out, "samples        n1 = {}, n2 = {}, d = {}", o.n1, o.n2, o.dim)?;
    match (&o.epsilon, &o.budget) {
        (Some(eps), Some(b)) => {
            let s = b.split();
            writeln!(out, "epsilon        {eps}")?;
            writeln!(
                out,
                "budget split   mean_x = {}, mean_y = {}, cov_x = {}, cov_y = {}",
                s.mean_x, s.mean_y, s.cov_x, s.cov_y
            )?;
        }
        _ => writeln!(out, "epsilon        inf (no privatization)")?,
    }
    writeln!(out, "statistic      {:.6}", o.statistic)?;
    match (o.bootstrap_b, o.diagnostics.order_index) {
        (Some(b), Some(k)) => writeln!(
            out,
            "threshold      {:.6} (bootstrap, B = {b}, order statistic {k})",
            o.threshold
        )?,
        _ => writeln!(out, "threshold      {:.6} (asymptotic chi-square)", o.threshold)?,
    }
    writeln!(
        out,
        "chi2 reference {:.6} (chi-square {} quantile at {})",
        o.diagnostics.chi2_reference,
        o.dim,
        1.0 - o.alpha
    )?;
    writeln!(out, "alpha          {}", o.alpha)?;
    writeln!(
        out,
        "decision       {}",
        if o.reject {
            "reject equal means"
        } else {
            "do not reject equal means"
        }
    )
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let data = &args.data;
    let cfg = config(data, ThresholdKind::Bootstrap)?;
    let (x, y) = load(data)?;
    let no_privacy = banner(data);
    let o = run_test_seeded(&x, &y, &cfg)?;
    let index = o.diagnostics.order_index.unwrap_or_default();
    let chi2 = o.diagnostics.chi2_reference;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let written = if data.json {
        let v = serde_json::json!({
            "alpha": o.alpha,
            "dim": o.dim,
            "n1": o.n1,
            "n2": o.n2,
            "epsilon": o.epsilon,
            "bootstrap_b": cfg.bootstrap_b,
            "order_index": index,
            "bootstrap_threshold": o.threshold,
            "chi2_reference": chi2,
        });
        serde_json::to_writer_pretty(&mut out, &v)
            .map_err(io::Error::from)
            .and_then(|_| writeln!(out))
    } else {
        (|| {
            if no_privacy {
                writeln!(out, "{NO_PRIVACY_BANNER}")?;
            }
            writeln!(out, "samples              n1 = {}, n2 = {}, d = {}", o.n1, o.n2, o.dim)?;
            writeln!(out, "alpha                {}", o.alpha)?;
            writeln!(
                out,
                "bootstrap threshold  {:.6} (B = {}, order statistic {index})",
                o.threshold, cfg.bootstrap_b
            )?;
            writeln!(out, "chi2 reference       {chi2:.6}")?;
            writeln!(out, "ratio                {:.4}", o.threshold / chi2)
        })()
    };
    written.map_err(|e| Failure::Usage(format!("writing report: {e}")))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let profile = match (args.full, args.reps) {
        (_, Some(r)) => GridProfile::Reps(r as usize),
        (true, None) => GridProfile::Full,
        (false, None) => GridProfile::Fast,
    };
    let cells: Vec<Cell> = if args.table1 {
        table1_grid(profile)
    } else if args.table2 {
        table2_grid(profile)
    } else if args.power {
        power_grid(profile)
    } else {
        let reps = match profile {
            GridProfile::Reps(r) => r,
            GridProfile::Fast | GridProfile::Full => 1000,
        };
        example32_cells(reps)
    };

    // Open destinations before the run so a bad path fails immediately.
    let csv_sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_failure(p, e))?)),
        None => Box::new(io::stdout().lock()),
    };
    let json_sink = match &args.json {
        Some(p) => Some((p, File::create(p).map_err(|e| io_failure(p, e))?)),
        None => None,
    };

    let results = run_grid(&cells, args.seed, args.threads)?;
    let table = RejectionTable::from_results(&results);
    table.write_csv(csv_sink)?;
    if let Some((path, file)) = json_sink {
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", table.to_json()?)
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    if let Some((i, msg)) = table.failures.first() {
        return Err(Failure::Numerical(format!(
            "{} of {} cells failed; first failure in row {}: {msg}",
            table.failures.len(),
            table.len(),
            i + 1
        )));
    }
    Ok(())
}
