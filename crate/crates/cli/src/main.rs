//! `sampled-iqc`: certification and simulation of feedback loops closed
//! through asynchronous sample-and-hold links.
//!
//! Exit status: 0 on success or a feasible certificate, 2 when the requested
//! property is verified not to hold (infeasible, violated), 1 on errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod grid;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sampled_iqc::certify::{
    performance_csv, stability_csv, sweep_performance, sweep_stability, CertificationReport, Certifier, SearchSpec,
    YMode,
};
use sampled_iqc::events::{
    bounds_from_h_delta, delay_profile, gen_admissible, validate, AsyncBounds, EventSequence, GeneratorMode,
};
use sampled_iqc::iqc::{
    batch_csv, run_lemma_batch, synchronous_sinusoid_sweep, BatchSpec, TOL_LEMMA_EXACT, TOL_LEMMA_INTERP,
};
use sampled_iqc::sim::{empirical_gain, monte_carlo_gains, pulse, simulate_loop, SimOptions};
use sampled_iqc::system::{Block, LoopBlocks, SystemFile};

#[derive(Parser)]
#[command(name = "sampled-iqc", version, about = "Robustness certificates for asynchronous sample-and-hold loops")]
struct Cli {
    /// Directory for CSV tables and plot scripts.
    #[arg(long, global = true, env = "SAMPLED_IQC_OUT", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a sample/update sequence pair against timing bounds.
    Validate(ValidateArgs),
    /// Tabulate the composed delay of a sequence pair (read or generated).
    DelayProfile(DelayProfileArgs),
    /// Randomized checks of the gain and passivity bounds of the delay perturbation.
    LemmaCheck(LemmaArgs),
    /// Certify robust stability at one (h, delta).
    CertifyStability(CertifyArgs),
    /// Certify an L2-gain bound from d to z at one (h, delta).
    CertifyPerformance(CertifyArgs),
    /// Largest certified h for each delta of a grid.
    SweepStability(SweepStabilityArgs),
    /// Certified gain over an (h, delta) grid.
    SweepPerformance(SweepPerformanceArgs),
    /// Simulate the sampled loop on random admissible schedules.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SequenceArgs {
    /// Sample instants, one per line; `# horizon X` sets the horizon.
    #[arg(long)]
    samples: PathBuf,
    /// Hold-update instants, same format.
    #[arg(long)]
    updates: PathBuf,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    /// tau',tau*,tau_circ,tau_natural
    #[arg(long)]
    bounds: String,
}

#[derive(Args)]
struct DelayProfileArgs {
    #[arg(long, requires = "updates")]
    samples: Option<PathBuf>,
    #[arg(long, requires = "samples")]
    updates: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Generate a pair for these bounds instead of reading files.
    #[arg(long, conflicts_with = "samples")]
    bounds: Option<String>,
    #[arg(long, default_value = "jittered-delay")]
    mode: GeneratorMode,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of points of the tabulated delay.
    #[arg(long, default_value_t = 1000)]
    points: usize,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    bounds: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Input support in units of tau'.
    #[arg(long, default_value_t = 20.0)]
    horizon_periods: f64,
    #[arg(long, default_value_t = 24)]
    pieces: usize,
    /// Also run the synchronous sinusoid sweep with this many inputs (period tau').
    #[arg(long)]
    sweep: Option<usize>,
}

#[derive(Args)]
struct SystemArgs {
    /// JSON system definition.
    #[arg(long)]
    system: PathBuf,
    /// Restrict the multiplier to Y = 0 or leave it free.
    #[arg(long)]
    y_mode: Option<YMode>,
    /// Write a matplotlib script next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Also write the loaded blocks, as explicit realizations, to this file.
    #[arg(long)]
    save_system: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Inter-sample bound; defaults to the system file value.
    #[arg(long)]
    h: Option<f64>,
    /// Asynchrony ratio; defaults to the system file value, then 0.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct SweepStabilityArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// start:step:stop, a list, or one value.
    #[arg(long, default_value = "0:0.25:2")]
    delta: String,
}

#[derive(Args)]
struct SweepPerformanceArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long)]
    h: String,
    #[arg(long, default_value = "0")]
    delta: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "jittered-delay")]
    mode: GeneratorMode,
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
    /// Width of the unit disturbance pulse.
    #[arg(long, default_value_t = 1.0)]
    pulse: f64,
    /// Rows of the trace table.
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Additional Monte-Carlo schedules (seeds seed+1, ...) for the gain table.
    #[arg(long, default_value_t = 0)]
    trials: u64,
}

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

enum Outcome {
    Success,
    Infeasible,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Validate(a) => cmd_validate(out, a),
        Command::DelayProfile(a) => cmd_delay_profile(out, a),
        Command::LemmaCheck(a) => cmd_lemma(out, a),
        Command::CertifyStability(a) => cmd_certify(out, a, false),
        Command::CertifyPerformance(a) => cmd_certify(out, a, true),
        Command::SweepStability(a) => cmd_sweep_stability(out, a),
        Command::SweepPerformance(a) => cmd_sweep_performance(out, a),
        Command::Simulate(a) => cmd_simulate(out, a),
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn read_sequence(path: &Path, horizon: Option<f64>) -> Result<EventSequence> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    EventSequence::from_text(&text, horizon).with_context(|| format!("parsing {}", path.display()))
}

fn bounds_arg(spec: &str) -> Result<AsyncBounds> {
    let [a, b, c, d] = grid::parse_bounds(spec)?;
    Ok(AsyncBounds::new(a, b, c, d)?)
}

fn cmd_validate(out: &Path, a: ValidateArgs) -> Result<Outcome> {
    let tp = read_sequence(&a.seq.samples, a.seq.horizon)?;
    let ts = read_sequence(&a.seq.updates, a.seq.horizon)?;
    let b = bounds_arg(&a.bounds)?;
    let report = validate(&tp, &ts, &b)?;
    let mut csv = String::from("constraint,index,value[s],bound[s]\n");
    for v in &report.violations {
        csv.push_str(&format!("{},{},{},{}\n", v.constraint.name(), v.index, v.value, v.bound));
    }
    write(out, "validation.csv", &csv)?;
    if !report.incomplete_coverage.is_empty() {
        eprintln!(
            "warning: {} samples have no covering update before the horizon",
            report.incomplete_coverage.len()
        );
    }
    say!("{} violations", report.violations.len());
    Ok(if report.passed() { Outcome::Success } else { Outcome::Infeasible })
}

fn cmd_delay_profile(out: &Path, a: DelayProfileArgs) -> Result<Outcome> {
    let (tp, ts) = match (&a.samples, &a.updates, &a.bounds) {
        (Some(s), Some(u), None) => (read_sequence(s, a.horizon)?, read_sequence(u, a.horizon)?),
        (None, None, Some(bounds)) => {
            let Some(seed) = a.seed else { bail!("--seed is required when generating sequences") };
            let Some(horizon) = a.horizon else { bail!("--horizon is required when generating sequences") };
            let (tp, ts) = gen_admissible(&bounds_arg(bounds)?, horizon, a.mode, seed)?;
            write(out, "samples.txt", &tp.to_text())?;
            write(out, "updates.txt", &ts.to_text())?;
            (tp, ts)
        }
        _ => bail!("give either --samples and --updates, or --bounds with --seed and --horizon"),
    };
    let horizon = tp.horizon().min(ts.horizon());
    let p = delay_profile(&tp, &ts, horizon)?;
    let mut csv = String::from("update_time[s],source_index,source_time[s],reset_value[s],noop\n");
    for u in p.updates() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            u.time,
            u.source_index,
            u.source_time,
            u.time - u.source_time,
            u.noop
        ));
    }
    write(out, "delay_profile.csv", &csv)?;
    let mut sigma = String::from("time[s],sigma[s]\n");
    let n = a.points.max(2);
    for i in 0..n {
        let t = horizon * i as f64 / n as f64;
        sigma.push_str(&format!("{t},{}\n", p.sigma(t)));
    }
    write(out, "sigma.csv", &sigma)?;
    say!(
        "{} updates, max reset value {}, max reset interval {}",
        p.updates().len(),
        p.max_reset_value(),
        p.max_reset_interval()
    );
    Ok(Outcome::Success)
}

fn cmd_lemma(out: &Path, a: LemmaArgs) -> Result<Outcome> {
    let b = bounds_arg(&a.bounds)?;
    let spec = BatchSpec { trials: a.trials, seed: a.seed, horizon_periods: a.horizon_periods, pieces: a.pieces };
    let recs = run_lemma_batch(&b, &spec)?;
    write(out, "lemma_check.csv", &batch_csv(&b, &recs))?;
    let max_ratio = recs.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_slack = recs.iter().map(|r| r.slack_normalized).fold(f64::INFINITY, f64::min);
    let mut ok = max_ratio <= 1.0 + TOL_LEMMA_EXACT && min_slack >= -TOL_LEMMA_EXACT;
    say!("trials {}: max gain ratio {max_ratio}, min slack / |v|^2 {min_slack}", recs.len());
    if let Some(n) = a.sweep {
        let pts = synchronous_sinusoid_sweep(b.tau_prime, n, 50)?;
        let mut csv = String::from("omega[rad/s],phase[rad],gain_ratio[-],interp_error_bound[-]\n");
        for p in &pts {
            csv.push_str(&format!("{},{},{},{}\n", p.omega, p.phase, p.ratio, p.interp_error_bound));
        }
        write(out, "lemma_sweep.csv", &csv)?;
        let sup = pts.iter().map(|p| p.ratio).fold(0.0, f64::max);
        ok &= sup <= 1.0 + TOL_LEMMA_INTERP;
        say!("synchronous sweep: sup gain ratio {sup}");
    }
    Ok(if ok { Outcome::Success } else { Outcome::Infeasible })
}

fn load_system(args: &SystemArgs) -> Result<(SystemFile, LoopBlocks, SearchSpec)> {
    let text = fs::read_to_string(&args.system).with_context(|| format!("reading {}", args.system.display()))?;
    let sys = SystemFile::parse(&text).with_context(|| format!("in {}", args.system.display()))?;
    let blocks = sys.blocks()?;
    if let Some(path) = &args.save_system {
        let realized = SystemFile {
            p: Block::from_state_space(&blocks.p),
            f: Block::from_state_space(&blocks.f),
            w: Some(Block::from_state_space(&blocks.w)),
            ..sys.clone()
        };
        fs::write(path, realized.to_json()).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    let mut spec = sys.search_spec();
    if let Some(m) = args.y_mode {
        spec = spec.with_y_mode(m);
    }
    Ok((sys, blocks, spec))
}

fn certifier(blocks: &LoopBlocks, spec: SearchSpec) -> Result<Certifier> {
    Ok(Certifier::new(&blocks.p, &blocks.f, &blocks.w, spec)?)
}

fn h_delta(sys: &SystemFile, h: Option<f64>, delta: Option<f64>) -> Result<(f64, f64)> {
    let Some(h) = h.or(sys.h) else { bail!("--h is required (the system file sets no default)") };
    Ok((h, delta.or(sys.delta).unwrap_or(0.0)))
}

fn report_row(r: &CertificationReport) -> String {
    let gamma = r.gamma.map_or_else(|| "inf".to_string(), |g| g.to_string());
    format!(
        "{},{},{},{},{},{},{},{}\n",
        r.h, r.delta, r.feasible, gamma, r.x, r.y, r.worst_omega, r.margin
    )
}

fn cmd_certify(out: &Path, a: CertifyArgs, performance: bool) -> Result<Outcome> {
    let (sys, blocks, spec) = load_system(&a.sys)?;
    let (h, delta) = h_delta(&sys, a.h, a.delta)?;
    let c = certifier(&blocks, spec)?;
    let (name, report) = if performance {
        ("certify_performance.csv", c.certify_performance(h, delta)?)
    } else {
        ("certify_stability.csv", c.certify_stability(h, delta)?)
    };
    let mut csv = String::from("h[s],delta[-],feasible,gamma[-],X[-],Y[s^-1],worst_omega[rad/s],margin[-]\n");
    csv.push_str(&report_row(&report));
    write(out, name, &csv)?;
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.feasible { Outcome::Success } else { Outcome::Infeasible })
}

fn cmd_sweep_stability(out: &Path, a: SweepStabilityArgs) -> Result<Outcome> {
    let (_, blocks, spec) = load_system(&a.sys)?;
    let deltas = grid::parse_grid(&a.delta)?;
    let rows = sweep_stability(&certifier(&blocks, spec)?, &deltas)?;
    write(out, "sweep_stability.csv", &stability_csv(&rows))?;
    if a.sys.plot {
        write(out, "sweep_stability.py", &plot::stability_sweep("sweep_stability.csv"))?;
    }
    for r in rows.iter().filter(|r| !r.monotone) {
        eprintln!("warning: feasibility was not monotone in h near delta = {}", r.delta);
    }
    Ok(Outcome::Success)
}

fn cmd_sweep_performance(out: &Path, a: SweepPerformanceArgs) -> Result<Outcome> {
    let (_, blocks, spec) = load_system(&a.sys)?;
    let hs = grid::parse_grid(&a.h)?;
    let deltas = grid::parse_grid(&a.delta)?;
    let rows = sweep_performance(&certifier(&blocks, spec)?, &hs, &deltas)?;
    write(out, "sweep_performance.csv", &performance_csv(&rows))?;
    if a.sys.plot {
        write(out, "sweep_performance.py", &plot::performance_sweep("sweep_performance.csv"))?;
    }
    Ok(Outcome::Success)
}

fn cmd_simulate(out: &Path, a: SimulateArgs) -> Result<Outcome> {
    let (sys, blocks, _) = load_system(&a.sys)?;
    let (h, delta) = h_delta(&sys, a.h, a.delta)?;
    let b = bounds_from_h_delta(h, delta)?;
    let d = pulse(a.pulse, a.horizon)?;
    let opts = SimOptions::default();
    let (tp, ts) = gen_admissible(&b, a.horizon, a.mode, a.seed)?;
    let trace = simulate_loop(&blocks.p, &blocks.f, &blocks.w, &tp, &ts, &d, &opts)?;
    let n = a.points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| a.horizon * i as f64 / n as f64).collect();
    write(out, "simulate.csv", &trace.to_csv(&grid))?;
    let mut events = String::from("kind,time[s],index,value\n");
    for (k, s) in trace.samples.iter().enumerate() {
        events.push_str(&format!("sample,{},{k},{}\n", s.time, s.value));
    }
    for u in &trace.updates {
        events.push_str(&format!("update,{},{},{}\n", u.time, u.source_index, u.value));
    }
    write(out, "simulate_events.csv", &events)?;
    if a.sys.plot {
        write(out, "simulate.py", &plot::trace("simulate.csv"))?;
    }
    let gain = empirical_gain(&trace)?;
    say!("seed {}: |z| / |d| = {gain}", a.seed);
    if a.trials > 0 {
        let recs = monte_carlo_gains(
            &blocks.p,
            &blocks.f,
            &blocks.w,
            &b,
            &d,
            &[a.mode],
            a.seed + 1..a.seed + 1 + a.trials,
            &opts,
        )?;
        let mut csv = String::from("seed,mode,gain[-]\n");
        for r in &recs {
            csv.push_str(&format!("{},{},{}\n", r.seed, a.mode_name(), r.gain));
        }
        write(out, "simulate_gains.csv", &csv)?;
        let worst = recs.iter().map(|r| r.gain).fold(gain, f64::max);
        say!("max |z| / |d| over {} schedules = {worst}", recs.len() + 1);
    }
    Ok(Outcome::Success)
}

impl SimulateArgs {
    fn mode_name(&self) -> &'static str {
        match self.mode {
            GeneratorMode::JitteredDelay => "jittered-delay",
            GeneratorMode::DownSampling => "down-sampling",
            GeneratorMode::Synchronous => "synchronous",
        }
    }
}
