use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use grpglm::bounds::{bound_report, BoundInputs};
use grpglm::io::{parse_groups, read_dataset, write_text};
use grpglm::simulate::{
    metrics_json, roc_csv, roc_curve, run_protocol, table_report, DesignId, Estimator,
    ProtocolConfig, SimDesign, ROC_POINTS,
};
use grpglm::{
    fit, path, select_lambda, Dataset, Error, ExponentialFamily, FitConfig, FitResult,
    GroupStructure, PenaltyKind, PenaltySpec, SparsityProfile,
};

#[derive(Parser)]
#[command(
    name = "grpglm",
    version,
    about = "Penalized GLM fitting, bounds and simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one penalized model and write the result as JSON.
    Fit(FitArgs),
    /// Fit a regularization path; optionally select lambda on a validation file.
    Path(PathArgs),
    /// Evaluate the bound calculators and write a flat JSON report.
    Bounds(BoundsArgs),
    /// Run the train / validate / test protocol on simulation designs.
    Simulate(SimulateArgs),
    /// Emit a selection curve (lambda, tp_fraction, fp_fraction) as CSV.
    Roc(RocArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Data CSV with a `y` column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "poisson")]
    family: ExponentialFamily,
    #[arg(long, default_value = "grouplasso")]
    penalty: PenaltyKind,
    /// Elastic net ridge weight.
    #[arg(long)]
    tn: Option<f64>,
    /// Group sizes: a JSON file or an inline list such as `10,10,5`.
    /// Defaults to singleton groups.
    #[arg(long)]
    groups: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, mut cfg: FitConfig) -> FitConfig {
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Penalty level r_n.
    #[arg(long)]
    rn: f64,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda_min_ratio: f64,
    /// Validation CSV used to pick lambda.
    #[arg(long)]
    valid: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value = "poisson")]
    family: ExponentialFamily,
    #[arg(long)]
    groups: String,
    /// Indices of the groups carrying signal, e.g. `0,1`.
    #[arg(long, value_delimiter = ',', required = true)]
    active: Vec<usize>,
    /// Sup-norm bound on the covariates.
    #[arg(long = "l")]
    l: f64,
    /// Bound on the regularizer norm of the true coefficients.
    #[arg(long = "b")]
    b: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rn: f64,
    #[arg(long)]
    tn: Option<f64>,
    #[arg(long = "a", default_value_t = 2.0)]
    a: f64,
    /// Universal constant of the concentration step.
    #[arg(long = "k", default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 0.5)]
    k_stabil: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design ids, e.g. `1`, `1,2,3` or `all`.
    #[arg(long, default_value = "all")]
    design: String,
    /// `lasso`, `grouplasso` or `both`.
    #[arg(long, default_value = "both")]
    estimator: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Table CSV; stdout gets the aligned text view either way.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics JSON with the protocol settings.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long, default_value = "R1")]
    design: DesignId,
    #[arg(long, default_value = "grouplasso")]
    estimator: Estimator,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    #[arg(long, default_value_t = ROC_POINTS)]
    n_lambda: usize,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    NotConverged,
}

#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_numeric(&e) {
            Failure::Numeric(e.into())
        } else {
            Failure::Input(e.into())
        }
    }
}

fn is_numeric(e: &Error) -> bool {
    match e {
        Error::Divergence { .. } => true,
        Error::Path { source, .. } | Error::Replicate { source, .. } => is_numeric(source),
        _ => false,
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(anyhow::anyhow!(msg.into()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_text(p, text).map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn load_model(m: &ModelArgs) -> Result<(Dataset, GroupStructure, PenaltyKind), Failure> {
    let kind = match (m.penalty, m.tn) {
        (PenaltyKind::ElasticNet { .. }, Some(t_n)) => PenaltyKind::ElasticNet { t_n },
        (PenaltyKind::ElasticNet { .. }, None) => {
            return Err(input("--penalty elasticnet requires --tn"))
        }
        (_, Some(_)) => return Err(input("--tn applies only to --penalty elasticnet")),
        (kind, None) => kind,
    };
    let data = read_dataset(&m.data)?;
    let gs = match &m.groups {
        Some(g) => parse_groups(g)?,
        None => GroupStructure::singletons(data.p())?,
    };
    if gs.p() != data.p() {
        return Err(input(format!(
            "groups cover {} columns but {} has {} covariates",
            gs.p(),
            m.data.display(),
            data.p()
        )));
    }
    Ok((data, gs, kind))
}

fn fit_json(r: &FitResult) -> Value {
    json!({
        "beta_hat": r.beta_hat.to_vec(),
        "active_groups": r.active_groups,
        "objective": r.objective(),
        "kkt_residual": r.kkt_residual,
        "iterations": r.iterations,
        "converged": r.converged,
    })
}

fn cmd_fit(a: &FitArgs) -> CmdResult {
    let (data, gs, kind) = load_model(&a.model)?;
    let spec = PenaltySpec::new(kind, a.rn)?;
    let cfg = a.model.solver.apply(FitConfig::default());
    let res = fit(a.model.family, &data, &gs, &spec, &cfg, None)?;
    let mut v = fit_json(&res);
    v["family"] = json!(a.model.family.to_string());
    v["penalty"] = json!(kind.to_string());
    v["r_n"] = json!(a.rn);
    v["t_n"] = json!(spec.t_n());
    emit(a.model.out.as_deref(), &to_json(&v))?;
    Ok(if res.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn cmd_path(a: &PathArgs) -> CmdResult {
    let (data, gs, kind) = load_model(&a.model)?;
    let valid = a.valid.as_deref().map(read_dataset).transpose()?;
    let cfg = a.model.solver.apply(FitConfig::default());
    let res = path(
        a.model.family,
        &data,
        &gs,
        kind,
        a.n_lambda,
        a.lambda_min_ratio,
        &cfg,
    )?;
    let mut v = json!({
        "family": a.model.family.to_string(),
        "penalty": kind.to_string(),
        "lambda_max": res.lambda_max,
        "lambda_grid": res.lambda_grid,
        "fits": res.fits.iter().map(fit_json).collect::<Vec<_>>(),
    });
    if let Some(valid) = &valid {
        let sel = select_lambda(&res, a.model.family, valid)?;
        v["selection"] = json!({
            "index": sel.index,
            "lambda_opt": sel.lambda_opt,
            "beta_opt": sel.beta_opt.to_vec(),
            "validation_error": sel.validation_error,
        });
    }
    emit(a.model.out.as_deref(), &to_json(&v))?;
    Ok(if res.all_converged() {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn cmd_bounds(a: &BoundsArgs) -> CmdResult {
    let gs = parse_groups(&a.groups)?;
    let profile = SparsityProfile::from_groups(&gs, a.active.iter().copied())?;
    let inputs = BoundInputs::new(a.family, a.l, a.b, a.n, gs, profile)?
        .with_a(a.a)?
        .with_k_const(a.k)?
        .with_k_stabil(a.k_stabil)?;
    let report = bound_report(&inputs, a.rn, a.tn)?;
    let mut s = serde_json::to_string_pretty(&report).map_err(|e| Failure::Input(e.into()))?;
    s.push('\n');
    emit(a.out.as_deref(), &s)?;
    Ok(Outcome::Done)
}

fn parse_designs(s: &str) -> Result<Vec<DesignId>, Failure> {
    if s.trim() == "all" {
        return Ok(DesignId::TABLE.to_vec());
    }
    s.split(',')
        .map(|t| t.trim().parse::<DesignId>().map_err(Failure::from))
        .collect()
}

fn parse_estimators(s: &str) -> Result<Vec<Estimator>, Failure> {
    if s.trim() == "both" {
        return Ok(vec![Estimator::Lasso, Estimator::GroupLasso]);
    }
    s.split(',')
        .map(|t| t.trim().parse::<Estimator>().map_err(Failure::from))
        .collect()
}

fn protocol_config(solver: &SolverArgs) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::default();
    cfg.fit = solver.apply(cfg.fit);
    cfg
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, Failure> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(input("--workers must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(job))
            .map_err(|e| Failure::Input(e.into())),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let designs = parse_designs(&a.design)?;
    let estimators = parse_estimators(&a.estimator)?;
    if let Some(d) = designs.iter().find(|d| d.is_roc()) {
        return Err(input(format!(
            "design {d} is a selection-curve design; use the roc command"
        )));
    }
    let mut cfg = protocol_config(&a.protocol.solver);
    if let Some(n) = a.n_lambda {
        cfg.n_lambda = n;
    }
    if let Some(r) = a.lambda_min_ratio {
        cfg.lambda_min_ratio = r;
    }
    let metrics = with_workers(a.protocol.workers, || {
        let mut all = Vec::new();
        for &id in &designs {
            let design = SimDesign::new(id, a.protocol.seed);
            for &est in &estimators {
                all.push(run_protocol(&design, est, a.reps, &cfg)?);
            }
        }
        Ok::<_, Error>(all)
    })??;
    let table = table_report(&metrics);
    match &a.out {
        Some(p) => {
            write_text(p, &table.to_csv()?)?;
            print!("{}", table.to_text());
        }
        None => print!("{}", table.to_text()),
    }
    if let Some(p) = &a.json {
        let mut s = metrics_json(&metrics)?;
        s.push('\n');
        write_text(p, &s)?;
    }
    Ok(Outcome::Done)
}

fn cmd_roc(a: &RocArgs) -> CmdResult {
    if !a.design.is_roc() {
        return Err(input(format!(
            "design {} is not a selection-curve design (expected R1, R2 or R3)",
            a.design
        )));
    }
    let cfg = protocol_config(&a.protocol.solver);
    let design = SimDesign::new(a.design, a.protocol.seed);
    let points = with_workers(a.protocol.workers, || {
        roc_curve(&design, a.estimator, a.replicate, a.n_lambda, &cfg)
    })??;
    emit(a.out.as_deref(), &roc_csv(&points)?)?;
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Path(a) => cmd_path(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Roc(a) => cmd_roc(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: solver did not converge; result written anyway");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
