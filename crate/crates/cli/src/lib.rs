//! `idstat` command-line front end.
//!
//! Every subcommand writes CSV (header row, 17 significant digits) or JSON to
//! the output stream and diagnostics to the error stream. Exit codes: 0 on
//! success, 1 when `selftest` finds a failure, 2 on usage errors, 3 on domain
//! errors and 4 on non-convergence.

pub mod config;
mod selftest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{load_config, Config, ConfigError, OutputFormat};
use idstat::balance::{
    ladder_channels, perturb, stationary_population, uniform_bins, BalanceError, CondensatePopulation, Kind,
    RelaxOptions, Relaxer, SweepRecord,
};
use idstat::counting::{
    count, ln_count, oracle_count, CellStatistics, CountingError, OccupancyRegion, ORACLE_LIMIT,
};
use idstat::distributions::{
    closed_form_occupancies, max_entropy_occupancies, solve_mu, DistributionError, GasSpec, MomentumGrid, Statistics,
};
use idstat::spinstat::{exchange_phase, HalfInt, SpinError};
use idstat::symmetry::{antisymmetrize, symmetrize, StateDocument, SymmetryError};
use idstat::wavepacket::{Grid, WavePacket, WavepacketError};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::io::{Read, Write};

pub use config::ParseError;

pub const SEED_VAR: &str = "IDSTAT_SEED";

#[derive(Debug, Parser)]
#[command(name = "idstat", version, about = "Identical-particle statistics toolkit")]
struct Cli {
    /// JSON file with unit constants, output format and seed.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,
    /// Overrides the format from the config file.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a free Gaussian packet on a grid at one or more times.
    Evolve(EvolveArgs),
    /// Symmetrize or antisymmetrize a JSON state read from a file or stdin.
    Symmetrize(SymmetrizeArgs),
    /// Phase acquired when exchange is completed by rotations in one sense.
    ExchangePhase(ExchangeArgs),
    /// Number of arrangements of n particles over g cells.
    Count(CountArgs),
    /// Occupancies of a free gas on a momentum grid.
    Distribute(DistributeArgs),
    /// Relax a perturbed two-kind condensed-packet population to detailed balance.
    Balance(BalanceArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EvolveArgs {
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.0)]
    k0: f64,
    /// Sample times, comma separated; defaults to t0.
    #[arg(long = "t", value_delimiter = ',')]
    times: Vec<f64>,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Grid bounds; default spans six density widths around the extreme centres.
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
}

#[derive(Debug, Args)]
struct SymmetrizeArgs {
    /// State file; `-` or absent reads stdin.
    #[arg(long)]
    input: Option<std::path::PathBuf>,
    #[arg(long)]
    anti: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ExchangeArgs {
    /// Spin as an integer or `k/2`.
    #[arg(long)]
    spin: String,
    /// Magnetic quantum number; defaults to the spin.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    chi_a: f64,
    #[arg(long)]
    chi_b: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CellStat {
    Bose,
    Fermi,
    Boltzmann,
}

impl From<CellStat> for CellStatistics {
    fn from(s: CellStat) -> Self {
        match s {
            CellStat::Bose => Self::Bose,
            CellStat::Fermi => Self::Fermi,
            CellStat::Boltzmann => Self::Boltzmann,
        }
    }
}

#[derive(Debug, Args)]
struct CountArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    g: u64,
    #[arg(long, value_enum)]
    stat: CellStat,
    /// Also count by explicit enumeration (n + g must be small).
    #[arg(long)]
    oracle: bool,
    /// Also print k ln w.
    #[arg(long)]
    entropy: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GasStat {
    Bose,
    Fermi,
}

impl From<GasStat> for Statistics {
    fn from(s: GasStat) -> Self {
        match s {
            GasStat::Bose => Self::Bose,
            GasStat::Fermi => Self::Fermi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    Closed,
    Maxent,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct DistributeArgs {
    #[arg(long, value_enum)]
    stat: GasStat,
    #[arg(long = "T")]
    temperature: f64,
    #[arg(long = "N")]
    particles: f64,
    #[arg(long = "V", default_value_t = 1.0)]
    volume: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 0.0)]
    pmin: f64,
    #[arg(long)]
    pmax: f64,
    #[arg(long, value_enum, default_value = "closed")]
    via: Route,
    /// Total energy for the maxent route; defaults to that of the closed form at (T, N).
    #[arg(long = "E")]
    energy: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct BalanceArgs {
    #[arg(long, default_value_t = 16)]
    bins: usize,
    #[arg(long, default_value_t = 64)]
    smax: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Chemical potential of the first kind.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Chemical potential of the second kind; defaults to `mu`.
    #[arg(long)]
    mu2: Option<f64>,
    #[arg(long, value_enum, default_value = "bose")]
    stat: GasStat,
    #[arg(long, default_value_t = 1.0)]
    e0: f64,
    #[arg(long, default_value_t = 0.25)]
    de: f64,
    /// Modes per bin.
    #[arg(long, default_value_t = 20.0)]
    modes: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Overrides the seed from the environment and config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 4000)]
    moves: usize,
    #[arg(long, default_value_t = 0.5)]
    strength: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

/// A failure with its exit code and a stable machine-readable tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub exit: u8,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 2, code, message: message.into() }
    }

    fn domain(code: &'static str, message: impl ToString) -> Self {
        Self { exit: 3, code, message: message.to_string() }
    }

    fn convergence(message: impl ToString) -> Self {
        Self { exit: 4, code: "no-convergence", message: message.to_string() }
    }
}

impl From<WavepacketError> for CliError {
    fn from(e: WavepacketError) -> Self {
        let code = match e {
            WavepacketError::InvalidParameter(_) => "invalid-parameter",
            WavepacketError::InvalidGrid(_) => "invalid-grid",
            WavepacketError::GridTooNarrow { .. } => "grid-too-narrow",
        };
        Self::domain(code, e)
    }
}

impl From<SymmetryError> for CliError {
    fn from(e: SymmetryError) -> Self {
        let code = match e {
            SymmetryError::SizeMismatch { .. } => "size-mismatch",
            SymmetryError::Wavepacket(w) => return w.into(),
            _ => "invalid-state",
        };
        Self::domain(code, e)
    }
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        let code = match e {
            SpinError::InvalidSpin(_) => "invalid-spin",
            SpinError::DegenerateAngles(_) => "degenerate-angles",
            SpinError::SpinMismatch(_) => "spin-mismatch",
            SpinError::UnknownMode(_) => "unknown-mode",
            SpinError::Symmetry(s) => return s.into(),
        };
        Self::domain(code, e)
    }
}

impl From<CountingError> for CliError {
    fn from(e: CountingError) -> Self {
        let code = match e {
            CountingError::PauliViolation { .. } => "pauli-violation",
            CountingError::NoCells => "no-cells",
            CountingError::TooLarge(_) => "too-large",
            CountingError::NoOracle(_) => "no-oracle",
            CountingError::DomainError(_) | CountingError::EmptyRegionSet => "domain",
            CountingError::InvalidConstant(_) => "invalid-constant",
        };
        Self::domain(code, e)
    }
}

impl From<DistributionError> for CliError {
    fn from(e: DistributionError) -> Self {
        let code = match e {
            DistributionError::NoConvergence { .. } => return Self::convergence(e),
            DistributionError::InvalidParameter(_) => "invalid-parameter",
            DistributionError::BosePole { .. } => "bose-pole",
            DistributionError::SaturationExceeded { .. } => "saturation-exceeded",
            DistributionError::NoBracket(_) => "no-bracket",
            DistributionError::Infeasible(_) => "infeasible",
        };
        Self::domain(code, e)
    }
}

impl From<BalanceError> for CliError {
    fn from(e: BalanceError) -> Self {
        let code = match e {
            BalanceError::NonConvergence { .. } => return Self::convergence(e),
            BalanceError::InvalidPopulation(_) => "invalid-population",
            BalanceError::InvalidParameter(_) => "invalid-parameter",
            BalanceError::OffGrid(_) => "off-grid",
            BalanceError::OrderOverflow { .. } | BalanceError::OrderUnderflow { .. } => "order-range",
            BalanceError::DivergentSeries { .. } => "divergent-series",
            BalanceError::TruncatedTail { .. } => "truncated-tail",
            BalanceError::EnergyMismatch { .. } => "energy-mismatch",
            BalanceError::InvariantViolation { .. } => "invariant-violation",
        };
        Self::domain(code, e)
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError { exit: 2, code: "io", message: e.to_string() }
}

/// Resolved settings shared by all subcommands.
struct Context {
    config: Config,
    format: OutputFormat,
}

/// Seed precedence: explicit flag, then `IDSTAT_SEED`, then the config file.
fn resolve_seed(flag: Option<u64>, config: &Config) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage("bad-seed", format!("{SEED_VAR}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(config.seed),
    }
}

/// Parse `argv` (program name first), execute, and return the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {}", e.code, e.message);
            e.exit
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    let config = match &cli.config {
        None => Config::default(),
        Some(path) => load_config(path).map_err(|e| match e {
            ConfigError::Io { .. } => CliError::usage("config", e.to_string()),
            ConfigError::Parse(p) => CliError::usage("config-parse", p.to_string()),
        })?,
    };
    let format = cli.format.unwrap_or(config.output_format);
    let ctx = Context { config, format };
    match cli.command {
        Command::Evolve(a) => evolve(&ctx, a, out).map(|()| 0),
        Command::Symmetrize(a) => symmetrize_cmd(a, out).map(|()| 0),
        Command::ExchangePhase(a) => exchange(&ctx, a, out).map(|()| 0),
        Command::Count(a) => count_cmd(&ctx, a, out).map(|()| 0),
        Command::Distribute(a) => distribute(&ctx, a, out, err).map(|()| 0),
        Command::Balance(a) => balance(&ctx, a, out, err).map(|()| 0),
        Command::Selftest => selftest::run(&ctx.config, out),
    }
}

/// Round-trip-exact text form of a double.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| io_error(e.into()))?;
    writeln!(out).map_err(io_error)
}

fn emit_csv(out: &mut dyn Write, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    writeln!(out, "{header}").map_err(io_error)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io_error)?;
    }
    Ok(())
}

fn evolve(ctx: &Context, a: EvolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let packet = WavePacket::with_hbar(a.mass, a.sigma, a.x0, a.t0, a.k0, ctx.config.hbar)?;
    let times = if a.times.is_empty() { vec![a.t0] } else { a.times };
    if times.iter().any(|t| !t.is_finite()) {
        return Err(CliError::usage("bad-time", "sample times must be finite"));
    }
    let reach = |t: f64, side: f64| packet.center(t) + side * 6.0 * packet.density_width(t);
    let x_min = a.x_min.unwrap_or_else(|| times.iter().map(|&t| reach(t, -1.0)).fold(f64::INFINITY, f64::min));
    let x_max = a.x_max.unwrap_or_else(|| times.iter().map(|&t| reach(t, 1.0)).fold(f64::NEG_INFINITY, f64::max));
    let grid = Grid::new(x_min, x_max, a.points)?;
    let mut rows = Vec::with_capacity(times.len() * a.points);
    for &t in &times {
        for x in grid.points() {
            let psi = packet.evaluate(x, t);
            rows.push((t, x, psi.re, psi.im, psi.norm_sqr()));
        }
    }
    match ctx.format {
        OutputFormat::Csv => emit_csv(
            out,
            "t,x,re,im,density",
            rows.iter().map(|r| [r.0, r.1, r.2, r.3, r.4].map(real).join(",")),
        ),
        OutputFormat::Json => {
            let rows: Vec<_> =
                rows.iter().map(|r| json!({"t": r.0, "x": r.1, "re": r.2, "im": r.3, "density": r.4})).collect();
            emit_json(out, &rows)
        }
    }
}

fn symmetrize_cmd(a: SymmetrizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match a.input.as_deref() {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)
            .map_err(|e| CliError::usage("io", format!("cannot read {}: {e}", p.display())))?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(io_error)?;
            s
        }
    };
    let doc: StateDocument = serde_json::from_str(&text).map_err(|e| {
        let p = ParseError::from(e);
        CliError::usage("state-parse", p.to_string())
    })?;
    if doc.schema != StateDocument::SCHEMA {
        return Err(CliError::usage("state-schema", format!("unsupported schema {}", doc.schema)));
    }
    let (state, labels) = doc.to_state()?;
    let projected = if a.anti { antisymmetrize(&state) } else { symmetrize(&state) };
    // The state schema is JSON regardless of the requested format.
    emit_json(out, &StateDocument::from_state(&projected, &labels))
}

fn exchange(ctx: &Context, a: ExchangeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spin = HalfInt::parse(&a.spin)?;
    if spin.twice() < 0 {
        return Err(SpinError::InvalidSpin(format!("spin {spin} is negative")).into());
    }
    let m = match &a.m {
        Some(text) => HalfInt::parse(text)?,
        None => spin,
    };
    if m.twice().abs() > spin.twice() || (spin.twice() - m.twice()) % 2 != 0 {
        return Err(SpinError::SpinMismatch(format!("m = {m} is not on the ladder of spin {spin}")).into());
    }
    let phase = exchange_phase(m, a.chi_a, a.chi_b)?;
    let expected = if spin.is_half_odd() { -1 } else { 1 };
    match ctx.format {
        OutputFormat::Json => emit_json(
            out,
            &json!({
                "spin": spin.to_string(),
                "m": m.to_string(),
                "factor": [phase.factor.re, phase.factor.im],
                "first": [phase.first.re, phase.first.im],
                "second": [phase.second.re, phase.second.im],
                "sign": phase.sign(),
                "expected_sign": expected,
            }),
        ),
        OutputFormat::Csv => emit_csv(
            out,
            "spin,m,factor_re,factor_im,first_re,first_im,second_re,second_im",
            [format!(
                "{spin},{m},{}",
                [phase.factor.re, phase.factor.im, phase.first.re, phase.first.im, phase.second.re, phase.second.im]
                    .map(real)
                    .join(",")
            )],
        ),
    }
}

fn count_cmd(ctx: &Context, a: CountArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let region = OccupancyRegion::new(a.n, a.g)?;
    let stat = CellStatistics::from(a.stat);
    let exact = count(region, stat)?;
    let oracle = if a.oracle {
        if a.n + a.g > ORACLE_LIMIT {
            return Err(CountingError::TooLarge(a.n + a.g).into());
        }
        let o = oracle_count(region, stat)?;
        if exact == BigRational::from_integer(BigInt::from(o.clone())) {
            Some(o.to_string())
        } else {
            return Err(CliError::domain("oracle-mismatch", format!("closed form {exact} but enumeration {o}")));
        }
    } else {
        None
    };
    let entropy = if a.entropy { Some(ctx.config.k_boltzmann * ln_count(region, stat)?) } else { None };
    let name = format!("{:?}", a.stat).to_lowercase();
    match ctx.format {
        OutputFormat::Json => {
            let mut v = json!({"stat": name, "n": a.n, "g": a.g, "count": exact.to_string()});
            if let Some(o) = &oracle {
                v["oracle"] = json!(o);
            }
            if let Some(s) = entropy {
                v["entropy"] = json!(s);
            }
            emit_json(out, &v)
        }
        OutputFormat::Csv => {
            let mut header = String::from("stat,n,g,count");
            let mut row = format!("{name},{},{},{exact}", a.n, a.g);
            if let Some(o) = &oracle {
                header.push_str(",oracle");
                row.push_str(&format!(",{o}"));
            }
            if let Some(s) = entropy {
                header.push_str(",entropy");
                row.push_str(&format!(",{}", real(s)));
            }
            emit_csv(out, &header, [row])
        }
    }
}

fn distribute(ctx: &Context, a: DistributeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let c = &ctx.config;
    let spec =
        GasSpec::with_units(a.volume, a.temperature, a.mass, a.stat.into(), c.c_light, c.h_planck, c.k_boltzmann)?;
    let grid = MomentumGrid::new(a.pmin, a.pmax, a.bins)?;
    let levels = grid.levels(&spec);
    let (occupancies, mu) = match a.via {
        Route::Closed => {
            let mu = solve_mu(a.particles, &spec, &grid)?;
            (closed_form_occupancies(&levels, mu, &spec)?, mu)
        }
        Route::Maxent => {
            let e_target = match a.energy {
                Some(e) => e,
                None => {
                    let mu = solve_mu(a.particles, &spec, &grid)?;
                    let occ = closed_form_occupancies(&levels, mu, &spec)?;
                    occ.iter().zip(&levels).map(|(n, l)| n * l.energy).sum()
                }
            };
            let sol = max_entropy_occupancies(&spec, &grid, a.particles, e_target)?;
            if let Some(t) = sol.temperature {
                let _ = writeln!(err, "maxent: T = {} after {} iterations", real(t), sol.iterations);
            }
            (sol.occupancies, sol.mu.unwrap_or(f64::NAN))
        }
    };
    let _ = writeln!(err, "mu = {}", real(mu));
    match ctx.format {
        OutputFormat::Csv => emit_csv(
            out,
            "p,eps,g_p,occupancy",
            levels.iter().zip(&occupancies).map(|(l, n)| [l.p, l.energy, l.modes, *n].map(real).join(",")),
        ),
        OutputFormat::Json => {
            let rows: Vec<_> = levels
                .iter()
                .zip(&occupancies)
                .map(|(l, n)| json!({"p": l.p, "eps": l.energy, "g_p": l.modes, "occupancy": n}))
                .collect();
            emit_json(out, &json!({"mu": mu, "rows": rows}))
        }
    }
}

fn balance(ctx: &Context, a: BalanceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed, &ctx.config)?;
    if a.bins == 0 {
        return Err(CliError::usage("bad-bins", "need at least one bin"));
    }
    let bins = uniform_bins(a.e0, a.de, a.bins, a.modes);
    let stat: Statistics = a.stat.into();
    let c1 = a.beta * a.mu;
    let c2 = a.beta * a.mu2.unwrap_or(a.mu);
    let mut one = stationary_population(Kind::One, stat, bins.clone(), a.beta, c1, a.smax)?;
    let mut two = stationary_population(Kind::Two, stat, bins, a.beta, c2, a.smax)?;
    let channels = ladder_channels(&one, &two);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb(&mut one, &mut two, &channels, a.moves, a.strength, 6, &mut rng)?;
    let options = RelaxOptions { steps: a.steps, seed, tol: a.tol, k: ctx.config.k_boltzmann, ..RelaxOptions::default() };
    let mut relaxer = Relaxer::new(one, two, &channels, options)?;
    let mut history: Vec<SweepRecord> = vec![relaxer.record()];
    while history.last().is_some_and(|r| r.max_residual > a.tol) && relaxer.sweeps() < a.steps {
        history.push(relaxer.sweep());
    }
    let (one, two) = relaxer.populations();
    let table = |pop: &CondensatePopulation, kind: u8| {
        let mut rows = Vec::new();
        for (b, bin) in pop.bins().iter().enumerate() {
            for (s, p) in pop.row(b).iter().enumerate() {
                rows.push((kind, bin.energy, s, *p));
            }
        }
        rows
    };
    let mut finals = table(&one, 1);
    finals.extend(table(&two, 2));
    match ctx.format {
        OutputFormat::Csv => {
            emit_csv(
                out,
                "sweep,max_residual,entropy,total_quanta",
                history.iter().map(|r| {
                    format!("{},{},{},{}", r.sweep, real(r.max_residual), real(r.entropy), real(r.total_quanta))
                }),
            )?;
            writeln!(out).map_err(io_error)?;
            emit_csv(
                out,
                "kind,eps,s,p",
                finals.iter().map(|(k, e, s, p)| format!("{k},{},{s},{}", real(*e), real(*p))),
            )?;
        }
        OutputFormat::Json => {
            let finals: Vec<_> =
                finals.iter().map(|(k, e, s, p)| json!({"kind": k, "eps": e, "s": s, "p": p})).collect();
            emit_json(out, &json!({"seed": seed, "history": history, "final": finals}))?;
        }
    }
    let last = history.last().map_or(f64::NAN, |r| r.max_residual);
    if last > a.tol {
        return Err(BalanceError::NonConvergence { sweeps: relaxer.sweeps(), residual: last }.into());
    }
    let _ = writeln!(err, "converged after {} sweeps (seed {seed})", relaxer.sweeps());
    Ok(())
}
