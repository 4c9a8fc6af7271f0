use std::path::PathBuf;
use std::process::ExitCode;

use bd_sym::acceptance;
use bd_sym::figures::{figure_csv, FigureId, DEFAULT_STEPS, DEFAULT_T_MAX, DEFAULT_T_MIN};
use bd_sym::fpt::{
    fpt_bilateral, fpt_catastrophe, fpt_renewal, fpt_symmetric_absorbing, fpt_symmetric_reflecting, taboo_bilateral,
    taboo_catastrophe, taboo_reflecting, taboo_renewal, taboo_symmetric_absorbing, Direction,
};
use bd_sym::kernels::{time_grid, transition_grid};
use bd_sym::rates::{build_preset, check_symmetry, Family, PresetParams, PresetTag, StateSpace};
use bd_sym::sim::{estimate, estimates_csv, Observable, SimConfig};
use bd_sym::twod::{crossing_probability, line_crossing, PlaneModel};
use bd_sym::{Error, RateModel};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bd-sym", version, about = "Symmetric birth-death processes: transition probabilities, first-passage densities, taboo probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transition probabilities p_{k,n}(t) over all states.
    Prob {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        k: i64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// First-passage density from k to s.
    Fpt {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        k: i64,
        /// Target state; defaults to the symmetry state.
        #[arg(long, allow_negative_numbers = true)]
        s: Option<i64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Probabilities of reaching n from k without visiting s.
    Avoid {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        k: i64,
        /// Taboo state; defaults to the symmetry state.
        #[arg(long, allow_negative_numbers = true)]
        s: Option<i64>,
        /// End states; defaults to every state on the side of k.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        n: Vec<i64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Planar process with independent coordinates: crossing of x2 = x1 + r.
    Twod {
        /// Birth rates of the two coordinates.
        #[arg(long, num_args = 2, value_names = ["L1", "L2"], required = true)]
        lambda: Vec<f64>,
        /// Death rates of the two coordinates.
        #[arg(long, num_args = 2, value_names = ["M1", "M2"], required = true)]
        mu: Vec<f64>,
        /// Start point.
        #[arg(long, num_args = 2, value_names = ["K1", "K2"], allow_negative_numbers = true, required = true)]
        k: Vec<i64>,
        #[arg(long, allow_negative_numbers = true)]
        r: i64,
        #[arg(long, value_enum, default_value_t = Quantity::H)]
        quantity: Quantity,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo frequencies of occupation, taboo and hitting events.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        k: i64,
        /// States whose occupation is estimated.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        n: Vec<i64>,
        /// Taboo state: occupation of n without visiting s is estimated too.
        #[arg(long, allow_negative_numbers = true)]
        s: Option<i64>,
        /// Target whose hitting probability by each time is estimated.
        #[arg(long, allow_negative_numbers = true)]
        hit: Option<i64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10_000)]
        replications: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Runs the acceptance suite; exits 1 if any criterion fails.
    Validate {
        /// Run only this criterion.
        #[arg(long)]
        criterion: Option<u8>,
    },
    /// Curves of a reference figure panel (1a to 4b).
    Figure {
        id: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    /// Density of the first-passage time through the line.
    H,
    /// Sub-densities by landing site.
    G,
    /// Probability of ever reaching the line, as JSON.
    Pi,
}

#[derive(Args)]
struct ModelArgs {
    /// Preset name, e.g. ehrenfest or constant-absorbing.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    preset: Option<String>,
    /// Model JSON document.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "N")]
    big_n: Option<i64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Computational window of bilateral models.
    #[arg(long, num_args = 2, value_names = ["L", "R"], allow_negative_numbers = true)]
    window: Option<Vec<i64>>,
}

#[derive(Args)]
struct GridArgs {
    /// Explicit evaluation times; overrides the grid.
    #[arg(long, num_args = 1..)]
    t: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_T_MIN)]
    tmin: f64,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    tmax: f64,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn failed(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::GridTooCoarse { .. }
            | Error::WindowTooSmall { .. }
            | Error::QuadratureNonConvergence { .. }
            | Error::OrderTooLarge { .. }
            | Error::Overflow { .. } => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

impl ModelArgs {
    fn build(&self) -> Outcome<RateModel> {
        if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            return Ok(RateModel::from_json(&text)?);
        }
        let name = self.preset.as_deref().expect("clap requires a model source");
        let tag: PresetTag = name.parse()?;
        let params = PresetParams {
            n: self.big_n,
            lambda: self.lambda,
            mu: self.mu,
            alpha: self.alpha,
            c: self.c,
            window: self.window.as_ref().map(|w| (w[0], w[1])),
        };
        Ok(build_preset(tag, params)?)
    }
}

impl GridArgs {
    fn times(&self) -> Outcome<Vec<f64>> {
        if self.t.is_empty() {
            Ok(time_grid(self.tmin, self.tmax, self.steps)?)
        } else {
            let mut t = self.t.clone();
            t.sort_by(f64::total_cmp);
            t.dedup();
            Ok(t)
        }
    }
}

impl OutArgs {
    fn write(&self, text: &str) -> Outcome<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

/// State through which the closed forms pass.
fn symmetry_state(model: &RateModel) -> Option<i64> {
    match model.space() {
        StateSpace::Truncated { n } if n % 2 == 0 => Some(n / 2),
        StateSpace::Truncated { .. } => None,
        StateSpace::Bilateral { .. } => Some(model.mirror_axis()),
    }
}

/// True when the closed forms apply to passage through `s`.
fn closed_form_applies(model: &RateModel, s: i64) -> Outcome<bool> {
    let symmetric = check_symmetry(model, model.family())?.satisfied;
    Ok(symmetric && model.mirror_axis() == 0 && symmetry_state(model) == Some(s))
}

fn target(model: &RateModel, s: Option<i64>) -> Outcome<i64> {
    s.or_else(|| symmetry_state(model)).ok_or_else(|| Failure::usage("--s is required when the model has no symmetry state"))
}

fn fpt(model: &RateModel, k: i64, s: i64, times: &[f64], tol: f64) -> Outcome<String> {
    if k == s {
        return Err(Failure::usage("--k and --s coincide"));
    }
    let g = if closed_form_applies(model, s)? {
        match model.family() {
            Family::Absorbing => fpt_symmetric_absorbing(model, k, times, tol)?,
            Family::Reflecting => fpt_symmetric_reflecting(model, k, times, tol)?,
            Family::Bilateral => fpt_bilateral(model, k, times, tol)?,
            _ => fpt_catastrophe(model, k, times, tol)?,
        }
    } else {
        let direction = if k < s { Direction::Up } else { Direction::Down };
        fpt_renewal(model, k, s, direction, times, tol)?
    };
    Ok(g.to_csv())
}

fn side_states(model: &RateModel, k: i64, s: i64) -> Outcome<Vec<i64>> {
    let (lo, hi) = model
        .rate_domain()
        .or_else(|| model.window())
        .ok_or_else(|| Failure::usage("--n is required for this model"))?;
    Ok(if k < s { (lo..s).collect() } else { (s + 1..=hi).collect() })
}

fn avoid(model: &RateModel, k: i64, s: i64, states: &[i64], times: &[f64], tol: f64) -> Outcome<String> {
    let grid = if closed_form_applies(model, s)? {
        match model.family() {
            Family::Absorbing => taboo_symmetric_absorbing(model, k, states, times, tol)?,
            Family::Reflecting => taboo_reflecting(model, k, states, times, tol)?,
            Family::Bilateral => taboo_bilateral(model, k, states, times, tol)?,
            _ => taboo_catastrophe(model, k, states, times, tol)?,
        }
    } else {
        taboo_renewal(model, k, s, states, times, tol)?
    };
    Ok(grid.to_csv())
}

fn simulate(model: &RateModel, k: i64, states: &[i64], s: Option<i64>, hit: Option<i64>, times: &[f64], config: SimConfig) -> Outcome<String> {
    let mut obs = Vec::new();
    for &t in times {
        for &n in states {
            obs.push(Observable::StateAt { n, t });
            if let Some(taboo) = s {
                obs.push(Observable::AvoidingAt { taboo, n, t });
            }
        }
        if let Some(target) = hit {
            obs.push(Observable::HitBy { target, t });
        }
    }
    if obs.is_empty() {
        return Err(Failure::usage("nothing to estimate: give --n or --hit"));
    }
    Ok(estimates_csv(&estimate(model, k, &obs, config)?))
}

fn validate(criterion: Option<u8>) -> Outcome<String> {
    let results = match criterion {
        Some(id) => vec![acceptance::run(id)],
        None => acceptance::run_all(),
    };
    let mut report = String::new();
    for r in &results {
        report.push_str(&r.to_string());
        report.push('\n');
    }
    let failed: Vec<&acceptance::CriterionResult> = results.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        let names: Vec<String> = failed.iter().map(|r| format!("{} {} ({})", r.id, r.name, r.detail)).collect();
        Err(Failure::failed(format!("validation failed: {}", names.join("; "))))
    }
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Prob { model, k, grid, tol, out } => {
            let m = model.build()?;
            out.write(&transition_grid(&m, k, &grid.times()?, tol)?.to_csv())
        }
        Command::Fpt { model, k, s, grid, tol, out } => {
            let m = model.build()?;
            let s = target(&m, s)?;
            out.write(&fpt(&m, k, s, &grid.times()?, tol)?)
        }
        Command::Avoid { model, k, s, n, grid, tol, out } => {
            let m = model.build()?;
            let s = target(&m, s)?;
            let states = if n.is_empty() { side_states(&m, k, s)? } else { n };
            out.write(&avoid(&m, k, s, &states, &grid.times()?, tol)?)
        }
        Command::Twod { lambda, mu, k, r, quantity, grid, out } => {
            let m = PlaneModel::new(lambda[0], lambda[1], mu[0], mu[1])?;
            let start = (k[0], k[1]);
            let text = match quantity {
                Quantity::Pi => crossing_probability(&m, start, r)?.to_json()? + "\n",
                Quantity::H => line_crossing(&m, start, r, &grid.times()?)?.h_csv(),
                Quantity::G => line_crossing(&m, start, r, &grid.times()?)?.g_csv(),
            };
            out.write(&text)
        }
        Command::Simulate { model, k, n, s, hit, grid, replications, seed, out } => {
            let m = model.build()?;
            let config = SimConfig::new(replications, seed)?;
            out.write(&simulate(&m, k, &n, s, hit, &grid.times()?, config)?)
        }
        Command::Validate { criterion } => {
            print!("{}", validate(criterion)?);
            Ok(())
        }
        Command::Figure { id, grid, out } => {
            let id: FigureId = id.parse()?;
            out.write(&figure_csv(id, &grid.times()?)?)
        }
    }
}

fn configure_threads() -> Outcome<()> {
    let Ok(value) = std::env::var("BD_SYM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("BD_SYM_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::failed(format!("cannot configure the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
