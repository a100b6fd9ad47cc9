//! Command-line front end. Every subcommand writes JSON (or CSV) to stdout
//! or `--out`; exit codes are 0 on success, 2 for configuration errors and
//! 3 for numerical or degeneracy errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use wbic::criteria::{
    aic, baseline_reports, bic, fit_map_or_mle, select_model, waic, CriterionReport, FitMode, FitOptions,
};
use wbic::free_energy::{stepping_stone, CurvePoint, TemperatureSchedule};
use wbic::harness::{run_experiment, ExperimentPlan, ExperimentReport, ModelSpec, ReportFormat};
use wbic::io::{load_dataset, read_truth_json, save_dataset, write_truth_json};
use wbic::mcmc::{expected_nll, run_chains, write_chain_binary, write_chain_csv, Chain, ChainConfig, ChainInit, ChainSidecar, TemperedTarget};
use wbic::models::{
    empirical_entropy, generate_rrr_dataset, theoretical_rlct_rrr, ConjugateTruth, Dataset, RrrDataConfig, TheoryRlct,
};
use wbic::numeric::{derive_seed, mean, sample_std};
use wbic::quadrature::{integrate, GridSpec};
use wbic::rlct::{rlct_regression, rlct_reweighted, rlct_two_chain, RlctEstimate};
use wbic::{Error, Result};

#[derive(Parser)]
#[command(name = "wbic", version, about = "WBIC, WAIC, RLCT and free energy estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset (CSV) and its generating truth (JSON).
    Generate(GenerateArgs),
    /// WBIC: posterior mean of n L_n at beta = beta_mult / log n.
    Wbic(EstimatorArgs),
    /// WAIC from a beta = 1 chain.
    Waic(EstimatorArgs),
    /// Real log canonical threshold from two temperatures.
    Rlct(RlctArgs),
    /// Stepping-stone free energy.
    Evidence(EvidenceArgs),
    /// Compare candidate models by WBIC.
    Select(SelectArgs),
    /// Run an experiment plan from a JSON file.
    Experiment(ExperimentArgs),
    /// Grid quadrature of Z(beta) and E^beta[n L_n] for d <= 3.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Rrr,
    Conjugate,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "rrr")]
    family: Family,
    /// Input dimension M (rrr).
    #[arg(long, default_value_t = 6)]
    inputs: usize,
    /// Output dimension N (rrr).
    #[arg(long, default_value_t = 6)]
    outputs: usize,
    #[arg(long, default_value_t = 3)]
    true_rank: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 3.0)]
    x_std: f64,
    #[arg(long, default_value_t = 0.2)]
    coef_std: f64,
    /// Dimension (conjugate).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    /// Per-coordinate mean (conjugate).
    #[arg(long, default_value_t = 0.5)]
    mean: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Truth JSON path.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ChainArgs {
    #[arg(long, default_value_t = 1)]
    n_chains: usize,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    /// Initial proposal standard deviation.
    #[arg(long)]
    step_std: Option<f64>,
    /// Start chains from a prior draw times this factor.
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ChainArgs {
    fn config(&self, spec: &ModelSpec) -> ChainConfig {
        let mut cfg = spec.default_chain_config();
        cfg.burn_in = self.burn_in.unwrap_or(cfg.burn_in);
        cfg.thin = self.thin.unwrap_or(cfg.thin);
        cfg.draws = self.draws.unwrap_or(cfg.draws);
        cfg.step_std_init = self.step_std.unwrap_or(cfg.step_std_init);
        if let Some(scale) = self.init_scale {
            cfg.init = if scale == 1.0 { ChainInit::PriorDraw } else { ChainInit::ScaledPriorDraw { scale } };
        }
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// e.g. rrr:M=6,N=6,H=3 or conjugate:d=2,prior_std=1
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    /// Sample at beta = beta_mult / log n (wbic only).
    #[arg(long, default_value_t = 1.0)]
    beta_mult: f64,
    /// Truth JSON; adds WBIC - n S_n to the output.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write retained draws here, with a JSON sidecar at <path>.json.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    dump_format: DumpFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Csv,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Reweight,
    TwoChain,
    Regression,
}

#[derive(Args)]
struct RlctArgs {
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_enum, default_value = "reweight")]
    method: MethodArg,
    /// beta1 = beta_mult / log n.
    #[arg(long, default_value_t = 1.0)]
    beta_mult: f64,
    /// beta2 = beta2_mult / log n.
    #[arg(long, default_value_t = 1.5)]
    beta2_mult: f64,
    /// Independent repetitions on the same data; the reported value is their mean.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// True rank, for the reference value of an rrr model.
    #[arg(long)]
    true_rank: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvidenceArgs {
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    /// Number of rungs J in the (j/J)^exponent ladder.
    #[arg(long, default_value_t = 20)]
    rungs: usize,
    #[arg(long, default_value_t = 5.0)]
    exponent: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Candidate model; repeat the flag for each candidate.
    #[arg(long = "model", required = true)]
    models: Vec<ModelSpec>,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also compute WAIC.
    #[arg(long)]
    waic: bool,
    /// Also compute BIC and AIC at the maximum likelihood fit.
    #[arg(long)]
    bic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// ExperimentPlan JSON.
    #[arg(long)]
    config: PathBuf,
    /// Published repeat count and chain lengths.
    #[arg(long)]
    paper_exact: bool,
    /// Overrides the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    data: PathBuf,
    /// beta = beta_mult / log n.
    #[arg(long, default_value_t = 1.0)]
    beta_mult: f64,
    /// Use this beta directly instead.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 401)]
    points: usize,
    /// Grid half-width; defaults to 8 prior standard deviations, or 10
    /// posterior standard deviations around the posterior mean when a
    /// closed form exists.
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn dump_chain(chain: &Chain, path: &Path, format: DumpFormat) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        DumpFormat::Csv => write_chain_csv(chain, file)?,
        DumpFormat::Binary => {
            let mut file = file;
            write_chain_binary(chain, &mut file)?;
            file.flush()?;
        }
    }
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    emit_json(&ChainSidecar::from(chain), Some(Path::new(&sidecar)))
}

fn sample(spec: &ModelSpec, data: &Dataset, beta: f64, args: &ChainArgs) -> Result<Chain> {
    let model = spec.build()?;
    let target = TemperedTarget::new(model.as_ref(), data, beta)?;
    run_chains(&target, &args.config(spec), args.n_chains)
}

fn entropy_from(truth: Option<&PathBuf>, data: &Dataset) -> Result<Option<f64>> {
    truth
        .map(|p| {
            let t = read_truth_json(File::open(p)?)?;
            empirical_entropy(Some(&t), data)
        })
        .transpose()
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    match a.family {
        Family::Rrr => {
            let cfg = RrrDataConfig {
                inputs: a.inputs,
                outputs: a.outputs,
                true_rank: a.true_rank,
                n: a.n,
                sigma: a.sigma,
                x_std: a.x_std,
                coef_std: a.coef_std,
            };
            let (data, truth) = generate_rrr_dataset(&cfg, a.seed)?;
            save_dataset(&data, &a.out)?;
            if let Some(p) = &a.truth {
                write_truth_json(&truth, BufWriter::new(File::create(p)?))?;
            }
        }
        Family::Conjugate => {
            let truth = ConjugateTruth { mean: vec![a.mean; a.dim], noise_std: a.noise_std };
            let data = truth.sample(a.n, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
            save_dataset(&data, &a.out)?;
            if let Some(p) = &a.truth {
                emit_json(&truth, Some(p))?;
            }
        }
    }
    Ok(())
}

fn cmd_wbic(a: &EstimatorArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let n = data.n();
    if n < 3 {
        return Err(Error::Config("WBIC needs n >= 3".into()));
    }
    if !(a.beta_mult > 0.0) {
        return Err(Error::Config("beta_mult must be positive".into()));
    }
    let beta = a.beta_mult / (n as f64).ln();
    let chain = sample(&a.model, &data, beta, &a.chain)?;
    if let Some(p) = &a.dump {
        dump_chain(&chain, p, a.dump_format)?;
    }
    let e = expected_nll(&chain);
    let s_n = entropy_from(a.truth.as_ref(), &data)?;
    emit_json(
        &json!({
            "model": a.model.to_string(),
            "n": n,
            "beta": beta,
            "beta_mult": a.beta_mult,
            "wbic": e,
            "wbic1": s_n.map(|s| e.mean - n as f64 * s),
            "acceptance_rate": chain.acceptance_rate,
            "chain_seeds": chain.per_chain.iter().map(|c| c.seed).collect::<Vec<_>>(),
            "model_fingerprint": chain.model_fingerprint,
            "data_fingerprint": chain.data_fingerprint,
        }),
        a.out.as_deref(),
    )
}

fn cmd_waic(a: &EstimatorArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let chain = sample(&a.model, &data, 1.0, &a.chain)?;
    if let Some(p) = &a.dump {
        dump_chain(&chain, p, a.dump_format)?;
    }
    let model = a.model.build()?;
    let w = waic(&chain, model.as_ref(), &data)?;
    emit_json(
        &json!({
            "model": a.model.to_string(),
            "n": data.n(),
            "waic": w.value,
            "t_n": w.t_n,
            "v_n": w.v_n,
            "acceptance_rate": chain.acceptance_rate,
            "chain_seeds": chain.per_chain.iter().map(|c| c.seed).collect::<Vec<_>>(),
            "data_fingerprint": chain.data_fingerprint,
        }),
        a.out.as_deref(),
    )
}

fn theory_for(spec: &ModelSpec, true_rank: Option<usize>) -> Option<TheoryRlct> {
    match *spec {
        ModelSpec::Rrr { inputs, outputs, rank, .. } => {
            true_rank.and_then(|h0| theoretical_rlct_rrr(inputs, outputs, rank, h0))
        }
        ModelSpec::Conjugate { dim, .. } => Some(TheoryRlct { lambda: dim as f64 / 2.0, multiplicity: 1 }),
    }
}

fn rlct_once(a: &RlctArgs, data: &Dataset, seed: u64) -> Result<RlctEstimate> {
    let log_n = (data.n() as f64).ln();
    let (b1, b2) = (a.beta_mult / log_n, a.beta2_mult / log_n);
    let chain_args = ChainArgs { seed, ..a.chain.clone() };
    let at = |beta: f64, stream: u64| {
        sample(&a.model, data, beta, &ChainArgs { seed: derive_seed(seed, stream), ..chain_args.clone() })
    };
    let point = |c: &Chain| {
        let e = expected_nll(c);
        CurvePoint { beta: c.beta, mean: e.mean, mcse: e.mcse }
    };
    match a.method {
        MethodArg::Reweight => rlct_reweighted(&at(b1, 0)?, b2),
        MethodArg::TwoChain => rlct_two_chain(point(&at(b1, 0)?), point(&at(b2, 1)?)),
        MethodArg::Regression => {
            let curve = [b1, 0.5 * (b1 + b2), b2]
                .iter()
                .enumerate()
                .map(|(i, &b)| at(b, i as u64).map(|c| point(&c)))
                .collect::<Result<Vec<_>>>()?;
            rlct_regression(&curve)
        }
    }
}

fn cmd_rlct(a: &RlctArgs) -> Result<()> {
    if a.repeats < 1 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let data = load_dataset(&a.data)?;
    if data.n() < 3 {
        return Err(Error::Config("n must be >= 3".into()));
    }
    let runs = (0..a.repeats)
        .map(|r| {
            let seed = if a.repeats == 1 { a.chain.seed } else { derive_seed(a.chain.seed, r as u64) };
            rlct_once(a, &data, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let theory = theory_for(&a.model, a.true_rank);
    let lambdas: Vec<f64> = runs.iter().map(|r| r.lambda_hat).collect();
    let (lambda_hat, std_error) = if runs.len() == 1 {
        (runs[0].lambda_hat, runs[0].std_error)
    } else {
        (mean(&lambdas), sample_std(&lambdas) / (lambdas.len() as f64).sqrt())
    };
    let ess: Option<f64> = runs.iter().map(|r| r.ess).collect::<Option<Vec<f64>>>().map(|v| mean(&v));
    emit_json(
        &json!({
            "lambda_hat": lambda_hat,
            "std_error": std_error,
            "ess": ess,
            "theory": theory,
            "method": runs[0].method,
            "beta1": runs[0].beta1,
            "beta2": runs[0].beta2,
            "model": a.model.to_string(),
            "runs": runs,
        }),
        a.out.as_deref(),
    )
}

fn cmd_evidence(a: &EvidenceArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let model = a.model.build()?;
    let schedule = TemperatureSchedule::power(a.rungs, a.exponent)?;
    let est = stepping_stone(model.as_ref(), &data, &schedule, &a.chain.config(&a.model))?;
    emit_json(&est, a.out.as_deref())
}

fn cmd_select(a: &SelectArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    if data.n() < 3 {
        return Err(Error::Config("n must be >= 3".into()));
    }
    let beta = 1.0 / (data.n() as f64).ln();
    let s_n = entropy_from(a.truth.as_ref(), &data)?;
    let mut reports = Vec::new();
    for (i, spec) in a.models.iter().enumerate() {
        let model = spec.build()?;
        let args = ChainArgs { seed: derive_seed(a.chain.seed, i as u64), ..a.chain.clone() };
        let chain = sample(spec, &data, beta, &args)?;
        let mut report = CriterionReport::from_wbic_chain(model.as_ref(), &chain)?;
        report.wbic1 = s_n.map(|s| report.wbic.mean - data.n() as f64 * s);
        if a.waic {
            let hot = sample(spec, &data, 1.0, &ChainArgs { seed: derive_seed(args.seed, 1), ..args.clone() })?;
            report.waic = Some(waic(&hot, model.as_ref(), &data)?);
        }
        if a.bic {
            let fit = FitOptions {
                mode: FitMode::Mle,
                seed: derive_seed(args.seed, 2),
                start_scale: spec.fit_start_scale(),
                ..FitOptions::default()
            };
            let w = fit_map_or_mle(model.as_ref(), &data, &fit)?;
            report.bic = Some(bic(model.as_ref(), &data, &w.0)?);
            report.aic = Some(aic(model.as_ref(), &data, &w.0)?);
        }
        reports.push(report);
    }
    let baseline = baseline_reports(&reports, s_n)?;
    let selection = select_model(&reports)?;
    emit_json(
        &json!({ "reports": reports, "baseline": baseline, "selection": selection }),
        a.out.as_deref(),
    )
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let text = std::fs::read_to_string(&a.config)?;
    let mut plan: ExperimentPlan =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.config.display())))?;
    if a.paper_exact || plan.paper_exact {
        plan = plan.into_paper_exact();
    }
    if let Some(seed) = a.seed {
        plan.seed = seed;
    }
    let report: ExperimentReport = run_experiment(&plan)?;
    let bytes = report.render(format)?;
    let mut out = output(a.out.as_deref())?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let model = a.model.build()?;
    let beta = match a.beta {
        Some(b) => b,
        None => a.beta_mult / (data.n() as f64).ln(),
    };
    let grid = match (&a.model, model.oracle()) {
        (ModelSpec::Conjugate { dim, prior_std, noise_std }, Some(_)) if a.half_width.is_none() => {
            let conj = wbic::models::ConjugateNormalModel::new(*dim, *noise_std, *prior_std)?;
            let moments = conj.posterior_moments(beta, &data)?;
            let centers: Vec<f64> = moments.iter().map(|m| m.0).collect();
            let widths: Vec<f64> = moments.iter().map(|m| 10.0 * m.1.sqrt()).collect();
            GridSpec::centered(&centers, &widths, a.points)?
        }
        (spec, _) => {
            let prior_std = match spec {
                ModelSpec::Rrr { prior_std, .. } | ModelSpec::Conjugate { prior_std, .. } => *prior_std,
            };
            let h = a.half_width.unwrap_or(8.0 * prior_std);
            GridSpec::cube(model.dim(), -h, h, a.points)?
        }
    };
    let integral = integrate(model.as_ref(), &data, beta, &grid)?;
    let closed_form = match model.oracle() {
        Some(o) => Some(json!({
            "log_partition": o.log_partition(beta, &data)?,
            "expected_nll": o.expected_nll(beta, &data)?,
        })),
        None => None,
    };
    emit_json(
        &json!({
            "model": a.model.to_string(),
            "beta": beta,
            "grid": grid,
            "integral": integral,
            "closed_form": closed_form,
        }),
        a.out.as_deref(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Wbic(a) => cmd_wbic(a),
        Command::Waic(a) => cmd_waic(a),
        Command::Rlct(a) => cmd_rlct(a),
        Command::Evidence(a) => cmd_evidence(a),
        Command::Select(a) => cmd_select(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
