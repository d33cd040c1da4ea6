//! `locc-lab`: command-line frontend for locc-core.
//!
//! Every subcommand prints one JSON document on stdout; diagnostics go to
//! stderr. Exit status is 0 for member/feasible/pass, 2 for
//! not_found/infeasible/violation and 1 for input errors.

mod inputs;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use locc_core::bipartite::{assemble, random_density, schmidt_decompose, Ensemble};
use locc_core::linalg::real;
use locc_core::ensemble_protocols::convert_to_ensemble;
use locc_core::majorization::{majorization_deficit, max_probability};
use locc_core::mixed_membership::{
    approx_fidelity_fmax, example1_structural_check, fmax_from_maxent, membership_hull, membership_prob, membership_splus,
    vidal_monotone, MembershipVerdict,
};
use locc_core::positivity_maps::{k_positivity_implication_check, mu_positivity_check, HermitianPreservingMap};
use locc_core::pure_protocols::{optimal_probability, optimal_pure_fidelity, synthesize_exact};
use locc_core::qubit_pair::{self, TwoQubitMu};
use locc_core::search::SearchConfig;
use locc_core::{parallel, DensityMatrix, Dims, Error, PureState, SchmidtVector, TOL};

use inputs::{input_error, parse_vector, read_json, resolve_pair, resolve_source, InputError, StateArg};

#[derive(Parser)]
#[command(name = "locc-lab", version, about = "Single-copy LOCC conversions between bipartite states")]
struct Cli {
    /// Search step tolerance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Master seed for searches and sampling.
    #[arg(long, global = true, env = "LOCC_LAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Prob,
    Fidelity,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetKind {
    /// Reachable by a single commuting measurement (average majorizes mu).
    Splus,
    /// Mixtures of pure states each majorizing mu.
    Hull,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Example1,
    Example2,
    Theorem4,
}

#[derive(Subcommand)]
enum Command {
    /// Schmidt decomposition of a pure state.
    Schmidt { state: PathBuf },
    /// Pure-to-pure conversion; states are JSON files or inline Schmidt vectors.
    Convert {
        source: String,
        target: String,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
    },
    /// Protocol converting a pure source into an ensemble.
    Ensemble { source: String, ensemble: PathBuf },
    /// Membership of a mixed state in a reachable set.
    Membership {
        rho: PathBuf,
        #[arg(long)]
        mu: String,
        /// Success probability.
        #[arg(long, conflicts_with = "f")]
        p: Option<f64>,
        /// Required approximation fidelity.
        #[arg(long)]
        f: Option<f64>,
        #[arg(long, value_enum, default_value = "splus")]
        set: SetKind,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long)]
        ensemble_size: Option<usize>,
        /// Use the numeric search even where a closed form exists.
        #[arg(long)]
        force_numeric: bool,
    },
    /// Two-qubit closed forms.
    Qubit2 {
        rho: PathBuf,
        /// Smaller source Schmidt coefficient, enabling the membership verdicts.
        #[arg(long)]
        mu2: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        f: f64,
    },
    /// Convex-roof tail monotone `E_l`.
    Monotone {
        rho: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Sampled positivity of a map on the states majorizing mu.
    MuPositive {
        map: PathBuf,
        #[arg(long)]
        mu: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Also sample Schmidt rank rank(mu) and report consistency.
        #[arg(long)]
        implication: bool,
    },
    /// Reproduces a worked case.
    Reproduce {
        #[arg(long, value_enum)]
        case: Case,
    },
}

enum Failure {
    Input(InputError),
    Compute(Error),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) => e.fmt(f),
            Failure::Compute(e) => e.fmt(f),
        }
    }
}

/// JSON report plus whether it is a positive answer.
struct Report {
    body: Value,
    positive: bool,
}

impl Report {
    fn new(body: impl Serialize, positive: bool) -> Result<Self, Failure> {
        Ok(Report {
            body: serde_json::to_value(body).map_err(Error::from)?,
            positive,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match parallel::with_threads(threads, || run(&cli)) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report.body).expect("JSON values serialize");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(if report.positive { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn search_config(cli: &Cli, restarts: usize, ensemble_size: Option<usize>) -> SearchConfig {
    SearchConfig {
        max_ensemble_size: ensemble_size,
        restarts,
        tolerance: cli.tol,
        seed: cli.seed,
        ..SearchConfig::default()
    }
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    match &cli.command {
        Command::Schmidt { state } => {
            let psi: PureState = read_json("state", state)?;
            Report::new(schmidt_decompose(&psi)?, true)
        }
        Command::Convert { source, target, mode } => {
            let (source, target) = resolve_pair(StateArg::parse("source", source)?, StateArg::parse("target", target)?)?;
            convert(&source, &target, *mode)
        }
        Command::Ensemble { source, ensemble } => {
            let ensemble: Ensemble = read_json("ensemble", ensemble)?;
            let source = resolve_source(StateArg::parse("source", source)?, ensemble.dims())?;
            match convert_to_ensemble(&source, &ensemble) {
                Ok(protocol) => Report::new(protocol, true),
                Err(Error::NotReachable { index, deficit }) => {
                    eprintln!("ensemble not reachable: prefix {index} short by {deficit:e}");
                    Report::new(json!({"reachable": false, "index": index, "deficit": deficit}), false)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Membership {
            rho,
            mu,
            p,
            f,
            set,
            restarts,
            ensemble_size,
            force_numeric,
        } => {
            let rho: DensityMatrix = read_json("rho", rho)?;
            let mu = parse_vector("mu", mu)?;
            check_mu_fits("mu", &mu, rho.dims())?;
            let cfg = search_config(cli, *restarts, *ensemble_size);
            let closed = rho.dims() == Dims(2, 2) && !force_numeric && matches!(set, SetKind::Splus);
            if closed {
                membership_closed_form(&rho, &mu, *p, *f)
            } else {
                membership_numeric(&rho, &mu, *p, *f, *set, &cfg)
            }
        }
        Command::Qubit2 { rho, mu2, p, f } => {
            let rho: DensityMatrix = read_json("rho", rho)?;
            let report = qubit_pair::report(&rho)?;
            let mut body = serde_json::to_value(report).map_err(Error::from)?;
            if let Some(mu2) = mu2 {
                let mu = TwoQubitMu::new(*mu2).map_err(|e| input_error("mu2", e))?;
                body["exact"] = json!(qubit_pair::membership_exact_2q(&rho, mu)?);
                body["prob"] = json!(qubit_pair::membership_prob_2q(&rho, mu, *p)?);
                body["approx"] = json!(qubit_pair::membership_approx_2q(&rho, mu, *f)?);
            }
            Report::new(body, true)
        }
        Command::Monotone { rho, l, restarts } => {
            let rho: DensityMatrix = read_json("rho", rho)?;
            Report::new(vidal_monotone(&rho, *l, &search_config(cli, *restarts, None))?, true)
        }
        Command::MuPositive {
            map,
            mu,
            samples,
            implication,
        } => {
            let map: HermitianPreservingMap = read_json("map", map)?;
            let mu = parse_vector("mu", mu)?;
            if *implication {
                let report = k_positivity_implication_check(&map, &mu, *samples, cli.seed)?;
                if !report.consistent {
                    eprintln!("inconsistent: positive on the mu set but a Schmidt-rank-{} violation was found", report.k);
                }
                let ok = report.consistent && report.mu_check.passed();
                return Report::new(report, ok);
            }
            let report = mu_positivity_check(&map, &mu, *samples, cli.seed)?;
            if !report.passed() {
                eprintln!("violation: min eigenvalue {:e}", report.min_eigenvalue);
            }
            let ok = report.passed();
            Report::new(report, ok)
        }
        Command::Reproduce { case } => match case {
            Case::Example1 => reproduce_example1(cli),
            Case::Example2 => reproduce_example2(cli),
            Case::Theorem4 => reproduce_theorem4(cli),
        },
    }
}

fn check_mu_fits(argument: &str, mu: &SchmidtVector, dims: Dims) -> Result<(), InputError> {
    if mu.rank() > dims.schmidt_len() {
        return Err(input_error(
            argument,
            format!("Schmidt rank {} exceeds {} for dimensions {}x{}", mu.rank(), dims.schmidt_len(), dims.0, dims.1),
        ));
    }
    Ok(())
}

fn convert(source: &PureState, target: &PureState, mode: Mode) -> Result<Report, Failure> {
    let mu = source.schmidt_vector()?;
    let lambda = target.schmidt_vector()?;
    match mode {
        Mode::Exact => match synthesize_exact(source, target) {
            Ok(protocol) => Report::new(json!({"mode": "exact", "feasible": true, "protocol": protocol}), true),
            Err(Error::NotMajorized { index, deficit }) => {
                eprintln!("infeasible: target prefix {index} short by {deficit:e}");
                Report::new(
                    json!({"mode": "exact", "feasible": false, "index": index, "deficit": deficit,
                           "max_probability": max_probability(&lambda, &mu)}),
                    false,
                )
            }
            Err(e) => Err(e.into()),
        },
        Mode::Prob => {
            let conv = optimal_probability(source, target)?;
            let ok = conv.p_max > 0.0;
            Report::new(
                json!({"mode": "prob", "p_max": conv.p_max, "intermediate": conv.xi, "protocol": conv.protocol}),
                ok,
            )
        }
        Mode::Fidelity => {
            let (f, nu) = optimal_pure_fidelity(target, &mu)?;
            let (deficit, _) = majorization_deficit(&nu, &mu);
            Report::new(json!({"mode": "fidelity", "fidelity": f, "nu": nu, "deficit": deficit}), true)
        }
    }
}

fn not_found_message(v: &MembershipVerdict) {
    eprintln!("no certificate found (violation {:e} after {} evaluations)", v.violation, v.evaluations);
}

fn verdict_report(method: &str, verdict: MembershipVerdict) -> Result<Report, Failure> {
    if !verdict.is_member() {
        not_found_message(&verdict);
    }
    let ok = verdict.is_member();
    let mut body = serde_json::to_value(&verdict).map_err(Error::from)?;
    body["method"] = json!(method);
    Ok(Report { body, positive: ok })
}

fn membership_numeric(
    rho: &DensityMatrix,
    mu: &SchmidtVector,
    p: Option<f64>,
    f: Option<f64>,
    set: SetKind,
    cfg: &SearchConfig,
) -> Result<Report, Failure> {
    if let Some(f) = f {
        let est = approx_fidelity_fmax(rho, mu, cfg)?;
        let ok = est.f_max >= f - TOL;
        if !ok {
            eprintln!(
                "no certificate found (best fidelity {} below {f} after {} evaluations)",
                est.f_max, est.evaluations
            );
        }
        let mut body = serde_json::to_value(&est).map_err(Error::from)?;
        body["status"] = json!(if ok { "member" } else { "not_found" });
        body["method"] = json!("search");
        return Ok(Report { body, positive: ok });
    }
    let verdict = match (p, set) {
        (Some(p), _) => membership_prob(rho, mu, p, cfg)?,
        (None, SetKind::Splus) => membership_splus(rho, mu, cfg)?,
        (None, SetKind::Hull) => membership_hull(rho, mu, cfg)?,
    };
    verdict_report("search", verdict)
}

fn membership_closed_form(rho: &DensityMatrix, mu: &SchmidtVector, p: Option<f64>, f: Option<f64>) -> Result<Report, Failure> {
    let m = TwoQubitMu::from_vector(mu).map_err(|e| input_error("mu", e))?;
    let min_mu2 = qubit_pair::min_mu2(rho)?;
    let (member, required) = match (p, f) {
        (Some(q), _) => (
            qubit_pair::membership_prob_2q(rho, m, q)?,
            if q <= 2.0 * m.mu2 { 0.5 } else { m.mu2 / q },
        ),
        (None, Some(f)) => (
            qubit_pair::membership_approx_2q(rho, m, f)?,
            1.0 - qubit_pair::approx_threshold(m, f)?,
        ),
        (None, None) => (qubit_pair::membership_exact_2q(rho, m)?, m.mu2),
    };
    if !member {
        eprintln!("not a member: min_mu2 {min_mu2} exceeds {required} (closed form)");
    }
    Report::new(
        json!({
            "status": if member { "member" } else { "not_found" },
            "method": "closed_form",
            "min_mu2": min_mu2,
            "required_mu2": required,
            "violation": (min_mu2 - required).max(0.0),
            "evaluations": 0,
        }),
        member,
    )
}

fn example1_state(eps: f64) -> Result<DensityMatrix, Failure> {
    let d = Dims(3, 3);
    let psi0 = PureState::basis(d, 0, 0)?;
    let s = 0.5f64.sqrt();
    let mut amplitudes = vec![real(0.0); 9];
    amplitudes[4] = real(s);
    amplitudes[8] = real(s);
    let psi12 = PureState::new(d, amplitudes)?;
    Ok(assemble(&Ensemble::new(vec![(1.0 - eps, psi0), (eps, psi12)])?)?)
}

fn reproduce_example1(cli: &Cli) -> Result<Report, Failure> {
    let eps = 0.5;
    let rho = example1_state(eps)?;
    let mu = SchmidtVector::new(vec![1.0 - eps / 2.0, eps / 2.0, 0.0])?;
    let splus = membership_splus(&rho, &mu, &search_config(cli, 32, None))?;
    let structural = example1_structural_check(eps)?;
    let hull = membership_hull(&rho, &mu, &search_config(cli, 64, None))?;
    if !hull.is_member() {
        eprint!("hull search: ");
        not_found_message(&hull);
    }
    let ok = splus.is_member() && structural;
    Report::new(
        json!({
            "case": "example1",
            "epsilon": eps,
            "mu": mu,
            "splus": splus,
            "hull_structural_non_membership": structural,
            "hull_search": hull,
        }),
        ok,
    )
}

fn reproduce_example2(cli: &Cli) -> Result<Report, Failure> {
    let cfg = search_config(cli, 32, None);
    let beta = SchmidtVector::new(vec![0.5, 0.3, 0.2])?;
    let pure = DensityMatrix::from_pure(&PureState::standard_form(Dims(3, 3), &beta)?);
    let pure_fmax = fmax_from_maxent(&pure, 2, &cfg)?;
    let rho = random_density(Dims(2, 2), 2, cli.seed)?;
    let product = SchmidtVector::new(vec![1.0, 0.0])?;
    let searched = fmax_from_maxent(&rho, 1, &cfg)?;
    let direct = approx_fidelity_fmax(&rho, &product, &cfg)?.f_max;
    let closed = (1.0 - qubit_pair::min_mu2(&rho)?).sqrt();
    let ok = (pure_fmax - 0.8f64.sqrt()).abs() < 1e-9 && (searched - closed).abs() < 2e-4 && (direct - closed).abs() < 2e-4;
    Report::new(
        json!({
            "case": "example2",
            "pure": {"beta": beta, "m": 2, "f_max": pure_fmax, "expected": 0.8f64.sqrt()},
            "mixed": {"seed": cli.seed, "f_max_from_monotone": searched, "f_max_direct": direct, "closed_form": closed},
        }),
        ok,
    )
}

fn reproduce_theorem4(cli: &Cli) -> Result<Report, Failure> {
    let source = PureState::standard_form(Dims(2, 2), &SchmidtVector::new(vec![0.8, 0.2])?)?;
    let bell = PureState::standard_form(Dims(2, 2), &SchmidtVector::new(vec![0.5, 0.5])?)?;
    let p_max = optimal_probability(&source, &bell)?.p_max;
    let rho = DensityMatrix::from_pure(&bell);
    let mu = TwoQubitMu::new(0.2)?;
    let cfg = search_config(cli, 32, None);
    let mut rows = Vec::new();
    let mut ok = (p_max - 0.4).abs() < 1e-12;
    for q in [0.3, 0.4, 0.5] {
        let closed = qubit_pair::membership_prob_2q(&rho, mu, q)?;
        let searched = membership_prob(&rho, &mu.vector(), q, &cfg)?;
        ok &= !searched.is_member() || closed;
        rows.push(json!({"q": q, "closed_form": closed, "search": searched.status}));
    }
    Report::new(
        json!({"case": "theorem4", "mu": mu.vector(), "p_max_to_bell": p_max, "bell_membership": rows}),
        ok,
    )
}
