//! Command-line front end: every experiment as a subcommand with
//! reproducible seeds and machine-readable output.
//!
//! Data goes to `--out PATH` when given, otherwise to stdout; progress and
//! summary lines go to stderr. Identical invocations (including seed)
//! produce byte-identical data output: floats are serialized at 17
//! significant digits and nothing depends on the worker count.
//!
//! Exit codes: 0 success, 1 invalid input, 2 verification failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chain_lab::chain::{build_stiffness, energy, ChainParams, PhaseState};
use chain_lab::dynamics::{
    admissible_dt, default_horizon, exact_trajectory, fit_decay, integrate,
    theoretical_decay_rate, DecayFit, Trajectory,
};
use chain_lab::tolerances::DT_GUARD;
use chain_lab::number_theory::{
    conserved_dimension, cumulative_average, cumulative_average_brute, dimension_table,
    growth_scan,
};
use chain_lab::rng::gaussian_state;
use chain_lab::spectral::{
    closed_form_spectrum, conserved_dimension_krylov, conserved_dimension_spectral,
    mode_vanishes_at_site, numeric_spectrum, project, split_subspaces, SubspaceSplit,
};

/// Ranges above this get a stderr warning before a long scan.
const WARN_RANGE: u64 = 10_000_000;
/// Trajectories above this many stored floats are refused.
const MAX_TRAJECTORY_FLOATS: u64 = 200_000_000;

#[derive(Parser)]
#[command(
    name = "chain-lab",
    version,
    about = "Numerical experiments on a pinned harmonic chain with one damped particle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conserved dimension D_n(N) = gcd(N, 2n−1) − 1, optionally
    /// cross-checked against the spectral and Krylov routes
    Dim(DimArgs),
    /// Mean dimension S(N) and its growth ratios over a range of N
    Scan(ScanArgs),
    /// Evolve a seeded Gaussian state and write its trajectory
    Simulate(SimulateArgs),
    /// Decay-rate experiment on the decaying subspace
    Decay(DecayArgs),
    /// Cumulative average of S(N)/N up to a cutoff
    Avg(AvgArgs),
    /// Closed-form vs numeric stiffness spectrum
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProjectMode {
    /// Project onto the conserved subspace before evolving
    Zero,
    /// Project onto the decaying subspace before evolving
    Minus,
    /// Evolve the raw Gaussian state
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Iterated one-step matrix exponential (exact, unconditionally stable)
    Exact,
    /// Fixed-step classical Runge–Kutta (order dt⁴, step guard applies)
    Rk4,
}

/// Chain parameters shared by the dynamical subcommands.
#[derive(Args)]
struct ChainOpts {
    /// Number of particles N
    #[arg(long = "N")]
    particles: usize,
    /// Damped site n (1-based)
    #[arg(long = "n", default_value_t = 1)]
    site: usize,
    /// Friction coefficient α
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// On-site stiffness ω₀
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    /// Nearest-neighbour stiffness ω₁
    #[arg(long, default_value_t = 1.0)]
    omega1: f64,
}

impl ChainOpts {
    fn params(&self) -> Result<ChainParams, CliFailure> {
        Ok(ChainParams::new(
            self.particles,
            self.site,
            self.alpha,
            self.omega0,
            self.omega1,
        )?)
    }
}

#[derive(Args)]
struct DimArgs {
    /// Number of particles N
    particles: u64,
    /// Damped site n (omit with --all-n)
    site: Option<u64>,
    /// Tabulate every site 1..=N
    #[arg(long)]
    all_n: bool,
    /// Also compute the spectral and Krylov dimensions and compare
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ScanArgs {
    /// Scan S(N) for all N up to this bound
    n_max: u64,
    /// Exponents ε for the ratios S(N)/N^ε
    #[arg(long = "epsilon", default_values_t = [0.5, 1.0])]
    epsilons: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    chain: ChainOpts,
    /// RNG seed for the Gaussian initial state
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizon (default 40/c₂ for the chain's theoretical rate)
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Step (default 0.1/√λ_max, the stability-guard limit)
    #[arg(long)]
    dt: Option<f64>,
    /// Subspace to project the initial state onto
    #[arg(long, value_enum, default_value_t = ProjectMode::None)]
    project: ProjectMode,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    /// Include q_1..q_N,p_1..p_N columns in the output
    #[arg(long)]
    coords: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    chain: ChainOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizon (default 40/c₂)
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Step (default 0.1/√λ_max)
    #[arg(long)]
    dt: Option<f64>,
    /// Fraction of the horizon to discard before fitting
    #[arg(long, default_value_t = 0.5)]
    skip: f64,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    /// Fail (exit 2) unless the decay reaches 1e−6 and the fitted rate is
    /// within 20% of theory
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct AvgArgs {
    /// Cutoff N₀ of the cumulative average
    n0: u64,
    /// Recompute by the brute-force double loop and require exact agreement
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Number of particles N
    #[arg(long = "N")]
    particles: usize,
    /// Damped site n, sets the vanishes_at_site column
    #[arg(long = "n", default_value_t = 1)]
    site: usize,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long, default_value_t = 1.0)]
    omega1: f64,
    /// Fail (exit 2) if closed-form and numeric spectra disagree beyond
    /// 1e−10 on eigenvalues or 1e−8 on subspace angles
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

enum CliFailure {
    /// Exit code 1: bad arguments, bad parameters, I/O trouble.
    Input(String),
    /// Exit code 2: a cross-check the tool itself ran came out unequal.
    Verification(String),
}

impl From<chain_lab::ChainError> for CliFailure {
    fn from(e: chain_lab::ChainError) -> Self {
        CliFailure::Input(e.to_string())
    }
}

impl From<io::Error> for CliFailure {
    fn from(e: io::Error) -> Self {
        CliFailure::Input(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = configure_threads().and_then(|()| run(cli)) {
        let (code, msg) = match e {
            CliFailure::Input(m) => (1, m),
            CliFailure::Verification(m) => (2, m),
        };
        eprintln!("error: {msg}");
        std::process::exit(code);
    }
}

fn configure_threads() -> Result<(), CliFailure> {
    if let Ok(raw) = std::env::var("CHAIN_LAB_THREADS") {
        let threads: usize = raw.trim().parse().map_err(|_| {
            CliFailure::Input(format!(
                "CHAIN_LAB_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
        if threads == 0 {
            return Err(CliFailure::Input(
                "CHAIN_LAB_THREADS must be at least 1".into(),
            ));
        }
        // ignore "already initialized": only possible in-process, not here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Dim(args) => cmd_dim(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Decay(args) => cmd_decay(args),
        Command::Avg(args) => cmd_avg(args),
        Command::Spectrum(args) => cmd_spectrum(args),
    }
}

/// Runs `emit` against `--out` when given, stdout otherwise.
fn with_output<F>(out: &Option<PathBuf>, emit: F) -> Result<(), CliFailure>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliFailure>,
{
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliFailure::Input(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            emit(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------- dim ----

fn cmd_dim(args: DimArgs) -> Result<(), CliFailure> {
    let n = args.particles;
    let sites: Vec<u64> = if args.all_n {
        if args.site.is_some() {
            return Err(CliFailure::Input(
                "give either a site or --all-n, not both".into(),
            ));
        }
        if n > 100_000_000 {
            return Err(CliFailure::Input(format!(
                "--all-n is capped at N ≤ 1e8, got {n}"
            )));
        }
        if n > WARN_RANGE {
            eprintln!("warning: tabulating {n} sites; this may take a while");
        }
        (1..=n).collect()
    } else {
        match args.site {
            Some(s) => vec![s],
            None => {
                return Err(CliFailure::Input(
                    "give a damped site n or pass --all-n".into(),
                ))
            }
        }
    };

    if args.verify {
        let cap = if args.all_n { 200 } else { 1000 };
        if n > cap {
            return Err(CliFailure::Input(format!(
                "--verify runs the Krylov route and is capped at N ≤ {cap} here, got {n}"
            )));
        }
    }

    let mut disagreement = None;
    let mut rows: Vec<(u64, u64, Option<(usize, usize, bool)>)> = Vec::with_capacity(sites.len());
    for &site in &sites {
        let d = conserved_dimension(n, site)?;
        let check = if args.verify {
            let params = ChainParams::new(n as usize, site as usize, 1.0, 1.0, 1.0)?;
            let d_spec = conserved_dimension_spectral(&params);
            let d_kry = conserved_dimension_krylov(&params)?;
            let agree = d_spec as u64 == d && d_kry as u64 == d;
            if !agree && disagreement.is_none() {
                disagreement = Some(format!(
                    "dimension routes disagree at N={n}, n={site}: gcd={d}, spectral={d_spec}, krylov={d_kry}"
                ));
            }
            Some((d_spec, d_kry, agree))
        } else {
            None
        };
        rows.push((d, site, check));
    }

    with_output(&args.out, |w| {
        match args.format {
            Format::Csv => {
                if args.verify {
                    writeln!(w, "N,n,D_gcd,D_spectral,D_krylov,agree")?;
                } else {
                    writeln!(w, "N,n,D")?;
                }
                for &(d, site, check) in &rows {
                    match check {
                        Some((ds, dk, agree)) => {
                            writeln!(w, "{n},{site},{d},{ds},{dk},{agree}")?
                        }
                        None => writeln!(w, "{n},{site},{d}")?,
                    }
                }
            }
            Format::Json => {
                writeln!(w, "[")?;
                for (i, &(d, site, check)) in rows.iter().enumerate() {
                    let sep = if i + 1 == rows.len() { "" } else { "," };
                    match check {
                        Some((ds, dk, agree)) => writeln!(
                            w,
                            "{{\"N\":{n},\"n\":{site},\"D\":{d},\"D_spectral\":{ds},\"D_krylov\":{dk},\"agree\":{agree}}}{sep}"
                        )?,
                        None => writeln!(w, "{{\"N\":{n},\"n\":{site},\"D\":{d}}}{sep}")?,
                    }
                }
                writeln!(w, "]")?;
            }
        }
        Ok(())
    })?;

    if args.all_n {
        let table = dimension_table(n)?;
        eprintln!("S({n}) = {}", fmt(table.mean));
    }
    match disagreement {
        Some(msg) => Err(CliFailure::Verification(msg)),
        None => Ok(()),
    }
}

// --------------------------------------------------------------- scan ----

fn cmd_scan(args: ScanArgs) -> Result<(), CliFailure> {
    if args.n_max > WARN_RANGE {
        eprintln!(
            "warning: scanning up to N = {}; this may take a while",
            args.n_max
        );
    }
    let table = growth_scan(args.n_max, &args.epsilons)?;
    with_output(&args.out, |w| {
        match args.format {
            Format::Csv => table.write_csv(&mut *w)?,
            Format::Json => {
                write!(w, "{{\"N_max\":{},\"epsilons\":[", args.n_max)?;
                let eps: Vec<String> = table.epsilons.iter().map(|&e| fmt(e)).collect();
                write!(w, "{}],\"peaks\":[", eps.join(","))?;
                for (i, p) in table.peaks.iter().enumerate() {
                    let sep = if i + 1 == table.peaks.len() { "" } else { "," };
                    write!(
                        w,
                        "{{\"epsilon\":{},\"max_ratio\":{},\"argmax\":{}}}{sep}",
                        fmt(p.epsilon),
                        fmt(p.max_ratio),
                        p.argmax
                    )?;
                }
                write!(w, "],\"rows\":[")?;
                for (i, r) in table.rows.iter().enumerate() {
                    let sep = if i + 1 == table.rows.len() { "" } else { "," };
                    let ratios: Vec<String> = r.ratios.iter().map(|&x| fmt(x)).collect();
                    write!(
                        w,
                        "{{\"N\":{},\"S\":{},\"ratios\":[{}]}}{sep}",
                        r.particles,
                        fmt(r.mean),
                        ratios.join(",")
                    )?;
                }
                writeln!(w, "]}}")?;
            }
        }
        Ok(())
    })?;
    for p in &table.peaks {
        eprintln!(
            "epsilon = {}: max S(N)/N^eps = {} at N = {}",
            p.epsilon,
            fmt(p.max_ratio),
            p.argmax
        );
    }
    Ok(())
}

// ----------------------------------------------------------- simulate ----

struct Experiment {
    params: ChainParams,
    split: SubspaceSplit,
    c2_theory: f64,
    t_end: f64,
    dt: f64,
}

fn prepare_experiment(
    chain: &ChainOpts,
    t_end: Option<f64>,
    dt: Option<f64>,
) -> Result<Experiment, CliFailure> {
    let params = chain.params()?;
    let split = split_subspaces(&params, &closed_form_spectrum(&params))?;
    let c2_theory = theoretical_decay_rate(&params, &split)?;
    let t_end = t_end.unwrap_or_else(|| default_horizon(c2_theory));
    let dt = dt.unwrap_or_else(|| admissible_dt(&params));
    // Both integration methods sample at dt, so the guard applies to the
    // exact propagator too: coarser sampling would break the energy-balance
    // diagnostics downstream.
    let guard = dt * params.lambda_max().sqrt();
    if guard > DT_GUARD * (1.0 + 1e-12) {
        return Err(CliFailure::Input(format!(
            "time step too large: dt·√λ_max = {guard:.3e} exceeds {DT_GUARD}; \
             largest admissible dt is {:.6e}",
            admissible_dt(&params)
        )));
    }
    let approx_steps = (t_end / dt).ceil().max(1.0);
    let floats = approx_steps * (2 * params.particles + 3) as f64;
    if !floats.is_finite() || floats > MAX_TRAJECTORY_FLOATS as f64 {
        return Err(CliFailure::Input(format!(
            "trajectory would hold ~{floats:.1e} values; raise --dt or lower --t-end"
        )));
    }
    if approx_steps > 2_000_000.0 {
        eprintln!("warning: {approx_steps:.1e} integration steps ahead");
    }
    Ok(Experiment {
        params,
        split,
        c2_theory,
        t_end,
        dt,
    })
}

fn run_trajectory(
    exp: &Experiment,
    psi0: &PhaseState,
    method: Method,
) -> Result<Trajectory, CliFailure> {
    let traj = match method {
        Method::Exact => exact_trajectory(&exp.params, psi0, exp.t_end, exp.dt)?,
        Method::Rk4 => integrate(&exp.params, psi0, exp.t_end, exp.dt)?,
    };
    Ok(traj)
}

fn write_trajectory_json(
    w: &mut dyn Write,
    traj: &Trajectory,
    coords: bool,
) -> Result<(), CliFailure> {
    let join = |xs: &[f64]| xs.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(",");
    write!(
        w,
        "{{\"times\":[{}],\"energies\":[{}],\"powers\":[{}]",
        join(&traj.times),
        join(&traj.energies),
        join(&traj.powers)
    )?;
    if coords {
        let emit = |w: &mut dyn Write, pick: fn(&PhaseState) -> &nalgebra::DVector<f64>| -> Result<(), CliFailure> {
            for (i, s) in traj.states.iter().enumerate() {
                let sep = if i + 1 == traj.states.len() { "" } else { "," };
                let vals: Vec<String> = pick(s).iter().map(|&x| fmt(x)).collect();
                write!(w, "[{}]{sep}", vals.join(","))?;
            }
            Ok(())
        };
        write!(w, ",\"q\":[")?;
        emit(w, |s| &s.q)?;
        write!(w, "],\"p\":[")?;
        emit(w, |s| &s.p)?;
        write!(w, "]")?;
    }
    writeln!(w, "}}")?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliFailure> {
    let exp = prepare_experiment(&args.chain, args.t_end, args.dt)?;
    let raw = gaussian_state(exp.params.particles, args.seed);
    let (conserved, decaying) = project(&raw, &exp.split)?;
    let psi0 = match args.project {
        ProjectMode::None => raw,
        ProjectMode::Zero => {
            if exp.split.dim_conserved == 0 {
                eprintln!("warning: conserved subspace is trivial; initial state is zero");
            }
            conserved.clone()
        }
        ProjectMode::Minus => decaying,
    };
    let (psi0_conserved, _) = project(&psi0, &exp.split)?;

    let traj = run_trajectory(&exp, &psi0, args.method)?;
    with_output(&args.out, |w| match args.format {
        Format::Csv => Ok(traj.write_csv(&mut *w, args.coords)?),
        Format::Json => write_trajectory_json(w, &traj, args.coords),
    })?;

    let stiff = build_stiffness(&exp.params);
    eprintln!("H(0) = {}", fmt(traj.initial_energy()));
    eprintln!(
        "H(conserved component of psi0) = {}",
        fmt(energy(&psi0_conserved, &stiff)?)
    );
    eprintln!(
        "H(t_end = {}) = {}",
        fmt(*traj.times.last().unwrap_or(&0.0)),
        fmt(traj.final_energy())
    );
    eprintln!("c2_theory = {}", fmt(exp.c2_theory));
    match fit_decay(&traj, 0.5) {
        Ok(fit) => eprintln!(
            "fitted c2 = {} (r^2 = {})",
            fmt(fit.c2_hat),
            fmt(fit.r_squared)
        ),
        Err(e) => eprintln!("fitted c2: not available ({e})"),
    }
    Ok(())
}

// -------------------------------------------------------------- decay ----

fn cmd_decay(args: DecayArgs) -> Result<(), CliFailure> {
    let exp = prepare_experiment(&args.chain, args.t_end, args.dt)?;
    let raw = gaussian_state(exp.params.particles, args.seed);
    let (_, psi0) = project(&raw, &exp.split)?;
    let stiff = build_stiffness(&exp.params);
    let h0 = energy(&psi0, &stiff)?;
    if h0 <= 0.0 {
        return Err(CliFailure::Input(
            "projected initial state carries no energy; try another seed".into(),
        ));
    }

    let traj = run_trajectory(&exp, &psi0, args.method)?;
    let fit: DecayFit = fit_decay(&traj, args.skip)?;
    let h_final = traj.final_energy();
    let h_ratio = h_final / h0;
    let rate_ratio = fit.c2_hat / exp.c2_theory;
    let p = &exp.params;

    with_output(&args.out, |w| {
        match args.format {
            Format::Json => writeln!(
                w,
                "{{\"N\":{},\"n\":{},\"alpha\":{},\"omega0\":{},\"omega1\":{},\"seed\":{},\"t_end\":{},\"dt\":{},\"c2_theory\":{},\"c2_hat\":{},\"r_squared\":{},\"rate_ratio\":{},\"H0\":{},\"H_final\":{},\"H_ratio\":{}}}",
                p.particles, p.damped_site, fmt(p.damping), fmt(p.pinning), fmt(p.coupling),
                args.seed, fmt(exp.t_end), fmt(exp.dt), fmt(exp.c2_theory), fmt(fit.c2_hat),
                fmt(fit.r_squared), fmt(rate_ratio), fmt(h0), fmt(h_final), fmt(h_ratio)
            )?,
            Format::Csv => {
                writeln!(w, "N,n,alpha,omega0,omega1,seed,t_end,dt,c2_theory,c2_hat,r_squared,rate_ratio,H0,H_final,H_ratio")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.particles, p.damped_site, fmt(p.damping), fmt(p.pinning), fmt(p.coupling),
                    args.seed, fmt(exp.t_end), fmt(exp.dt), fmt(exp.c2_theory), fmt(fit.c2_hat),
                    fmt(fit.r_squared), fmt(rate_ratio), fmt(h0), fmt(h_final), fmt(h_ratio)
                )?;
            }
        }
        Ok(())
    })?;

    eprintln!(
        "decay: H(t_end)/H(0) = {}, c2_hat/c2_theory = {}",
        fmt(h_ratio),
        fmt(rate_ratio)
    );
    if args.verify {
        if h_ratio > 1e-6 {
            return Err(CliFailure::Verification(format!(
                "energy ratio {} exceeds 1e-6 at t_end = {}",
                fmt(h_ratio),
                fmt(exp.t_end)
            )));
        }
        if (rate_ratio - 1.0).abs() > 0.2 {
            return Err(CliFailure::Verification(format!(
                "fitted rate is off theory by {:.1}%",
                100.0 * (rate_ratio - 1.0).abs()
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- avg ----

fn cmd_avg(args: AvgArgs) -> Result<(), CliFailure> {
    if args.n0 > WARN_RANGE {
        eprintln!(
            "warning: averaging up to N0 = {}; this may take a while",
            args.n0
        );
    }
    let report = cumulative_average(args.n0)?;
    if args.verify {
        if args.n0 > 20_000 {
            return Err(CliFailure::Input(format!(
                "--verify reruns the O(N0²) brute force and is capped at N0 ≤ 20000, got {}",
                args.n0
            )));
        }
        let brute = cumulative_average_brute(args.n0)?;
        if brute != report {
            return Err(CliFailure::Verification(format!(
                "fast path {} vs brute force {} differ at N0 = {}",
                fmt(report.cumulative),
                fmt(brute.cumulative),
                args.n0
            )));
        }
    }
    with_output(&args.out, |w| {
        match args.format {
            Format::Json => report.write_json(&mut *w)?,
            Format::Csv => {
                writeln!(w, "N0,cumulative,ratio_to_log")?;
                writeln!(
                    w,
                    "{},{},{}",
                    report.n0,
                    fmt(report.cumulative),
                    fmt(report.ratio_to_log)
                )?;
            }
        }
        Ok(())
    })?;
    eprintln!(
        "cumulative = {}, ratio_to_log = {}",
        fmt(report.cumulative),
        fmt(report.ratio_to_log)
    );
    Ok(())
}

// ------------------------------------------------------------ spectrum ----

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), CliFailure> {
    if args.particles > 1000 {
        return Err(CliFailure::Input(format!(
            "spectrum runs a dense eigensolver and is capped at N ≤ 1000, got {}",
            args.particles
        )));
    }
    let params = ChainParams::new(args.particles, args.site, 1.0, args.omega0, args.omega1)?;
    let closed = closed_form_spectrum(&params);
    let numeric = numeric_spectrum(&build_stiffness(&params))?;

    let n = params.particles;
    let mut max_rel = 0.0f64;
    let mut max_angle = 0.0f64;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let a = closed.eigenvalues[k];
        let b = numeric.eigenvalues[k];
        let rel = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
        // sin of the principal angle via the orthogonal residual; the naive
        // sqrt(1 - dot^2) bottoms out at sqrt(eps) ~ 1.5e-8.
        let v = closed.eigenvector(k);
        let w = numeric.eigenvector(k);
        let angle = (&w - &v * v.dot(&w)).norm();
        max_rel = max_rel.max(rel);
        max_angle = max_angle.max(angle);
        let vanishes = mode_vanishes_at_site(n as u64, params.damped_site as u64, k as u64);
        rows.push((k, a, b, rel, vanishes));
    }

    with_output(&args.out, |w| {
        match args.format {
            Format::Csv => {
                writeln!(w, "k,lambda_closed,lambda_numeric,rel_diff,vanishes_at_site")?;
                for &(k, a, b, rel, vanishes) in &rows {
                    writeln!(w, "{k},{},{},{},{vanishes}", fmt(a), fmt(b), fmt(rel))?;
                }
            }
            Format::Json => {
                write!(
                    w,
                    "{{\"N\":{},\"n\":{},\"omega0\":{},\"omega1\":{},\"modes\":[",
                    n,
                    params.damped_site,
                    fmt(params.pinning),
                    fmt(params.coupling)
                )?;
                for (i, &(k, a, b, rel, vanishes)) in rows.iter().enumerate() {
                    let sep = if i + 1 == rows.len() { "" } else { "," };
                    write!(
                        w,
                        "{{\"k\":{k},\"lambda_closed\":{},\"lambda_numeric\":{},\"rel_diff\":{},\"vanishes_at_site\":{vanishes}}}{sep}",
                        fmt(a), fmt(b), fmt(rel)
                    )?;
                }
                writeln!(
                    w,
                    "],\"max_rel_diff\":{},\"max_subspace_angle\":{}}}",
                    fmt(max_rel),
                    fmt(max_angle)
                )?;
            }
        }
        Ok(())
    })?;

    eprintln!(
        "max relative eigenvalue residual = {}, max subspace angle = {}",
        fmt(max_rel),
        fmt(max_angle)
    );
    if args.verify && (max_rel > 1e-10 || max_angle > 1e-8) {
        return Err(CliFailure::Verification(format!(
            "spectra disagree: max relative residual {}, max angle {}",
            fmt(max_rel),
            fmt(max_angle)
        )));
    }
    Ok(())
}
