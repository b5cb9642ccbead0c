//! The `prevtrial` command-line front end.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical
//! failure. Results go to stdout unless `--output` is given, in which case
//! the file is replaced atomically.

pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::bnab::{
    self, auc_score, AucScale, CensorMode, CombinationModel, ParticipantPk, Regimen, VirusPanel,
};
use crate::counterfactual::{
    additive_difference, rate_ratio, sentinel_pooled_incidence, uncertainty_interval_for,
    ArmSummary, EfficacyParameter, SentinelCohort, ThetaCInterval,
};
use crate::design::{
    self, Allocation, DesignKind, DesignSpec, DropoutMode, EventAccrualModel, HypothesisPair,
    IncidenceScenario,
};
use crate::error::{Error, Result};
use crate::sim;

pub use report::{Cell, OutputFormat, Report, Table};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "PREVTRIAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "prevtrial", version, about = "Design and analysis of two-arm HIV prevention efficacy trials")]
pub struct RunConfig {
    /// Worker threads for Monte Carlo replicates and per-virus scoring (0 = auto).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Required events and total sample size for one design.
    Size(SizeArgs),
    /// Recompute the published sample-size table.
    Table2(Table2Args),
    /// Monte Carlo power of the one-sided log-rank test.
    Power(PowerArgs),
    /// Efficacy versus a counterfactual placebo group.
    Counterfactual(CounterfactualArgs),
    /// Score a bnAb regimen against a virus panel.
    BnabScore(BnabScoreArgs),
    /// Score and rank several bnAb regimens.
    BnabRank(BnabRankArgs),
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Exponential,
    Linear,
    Both,
}

/// Design flags; every value may also come from `--config`, flags win.
#[derive(Debug, Args, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArgs {
    /// JSON file with any of the design fields below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long)]
    pub pe_null: Option<f64>,
    #[arg(long)]
    pub pe_alt: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub power: Option<f64>,
    /// Annual incidence in arm 1 (experimental) under H1.
    #[arg(long)]
    pub inc_treat: Option<f64>,
    /// Annual incidence in arm 2 (control) under H1.
    #[arg(long)]
    pub inc_control: Option<f64>,
    #[arg(long)]
    pub followup: Option<f64>,
    #[arg(long)]
    pub accrual: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// `total` (over follow-up) or `annual`.
    #[arg(long)]
    pub dropout_mode: Option<String>,
    /// Allocation ratio arm1:arm2.
    #[arg(long)]
    pub allocation: Option<String>,
}

impl DesignArgs {
    fn merged(&self) -> Result<DesignArgs> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let text = read_text(path)?;
        let file: DesignArgs = serde_json::from_str(&text)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Ok(DesignArgs {
            config: self.config.clone(),
            design: self.design.clone().or(file.design),
            pe_null: self.pe_null.or(file.pe_null),
            pe_alt: self.pe_alt.or(file.pe_alt),
            alpha: self.alpha.or(file.alpha),
            power: self.power.or(file.power),
            inc_treat: self.inc_treat.or(file.inc_treat),
            inc_control: self.inc_control.or(file.inc_control),
            followup: self.followup.or(file.followup),
            accrual: self.accrual.or(file.accrual),
            dropout: self.dropout.or(file.dropout),
            dropout_mode: self.dropout_mode.clone().or(file.dropout_mode),
            allocation: self.allocation.clone().or(file.allocation),
        })
    }
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub model: ModelChoice,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// Append the uptake-to-incidence mapping at this efficacy of B.
    #[arg(long)]
    pub uptake_efficacy: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Total enrollment; defaults to the closed-form size under `--model`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accrual model used for the default `--n`.
    #[arg(long, value_enum, default_value = "linear")]
    pub model: ModelChoice,
    /// Dump the first replicate's dataset as CSV.
    #[arg(long)]
    pub dump_dataset: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParameterChoice {
    Pe,
    Air,
    Both,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    /// JSON with experimental, control and theta_c.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub parameter: ParameterChoice,
    /// CSV of sentinel cohorts: label,calendar_window,events,person_years.
    #[arg(long)]
    pub sentinel: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFlag {
    Additivity,
    BlissHill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleFlag {
    Linear,
    Log10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CensorFlag {
    Resistant,
    UseBound,
}

#[derive(Debug, Args, Clone)]
pub struct ScoringArgs {
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, value_enum)]
    pub model: Option<ModelFlag>,
    #[arg(long)]
    pub window: Option<u32>,
    #[arg(long, value_enum)]
    pub auc_scale: Option<ScaleFlag>,
    #[arg(long, value_enum)]
    pub censor_mode: Option<CensorFlag>,
}

impl ScoringArgs {
    fn apply(&self, regimen: &mut Regimen) {
        if let Some(m) = self.model {
            regimen.model = match m {
                ModelFlag::Additivity => CombinationModel::Additivity,
                ModelFlag::BlissHill => CombinationModel::BlissHill,
            };
        }
        if let Some(w) = self.window {
            regimen.window_days = w;
        }
        if let Some(s) = self.auc_scale {
            regimen.auc_scale = match s {
                ScaleFlag::Linear => AucScale::Linear,
                ScaleFlag::Log10 => AucScale::Log10,
            };
        }
        if let Some(c) = self.censor_mode {
            regimen.censor_mode = match c {
                CensorFlag::Resistant => CensorMode::Resistant,
                CensorFlag::UseBound => CensorMode::UseBound,
            };
        }
    }
}

#[derive(Debug, Args)]
pub struct BnabScoreArgs {
    #[arg(long)]
    pub regimen: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// JSON list of participant-specific PK parameters.
    #[arg(long)]
    pub participants: Option<PathBuf>,
    /// Write daily ID80 curves as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BnabRankArgs {
    #[arg(long = "regimen", required = true)]
    pub regimens: Vec<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Runs the CLI with the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Some(n) = config.threads {
        // A second configuration in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&config.command, stderr) {
        Ok((report, out)) => {
            let format = out.format.unwrap_or(default_format(&config.command));
            let text = report.render(format);
            match &out.output {
                Some(path) => match report::write_atomic(path, text.as_bytes()) {
                    Ok(()) => 0,
                    Err(e) => fail(stderr, &[e]),
                },
                None => match stdout.write_all(text.as_bytes()) {
                    Ok(()) => 0,
                    Err(e) => fail(stderr, &[Error::io("stdout", e)]),
                },
            }
        }
        Err(errors) => fail(stderr, &errors),
    }
}

fn default_format(command: &Command) -> OutputFormat {
    match command {
        Command::Table2(_) => OutputFormat::Markdown,
        _ => OutputFormat::Csv,
    }
}

fn fail(stderr: &mut dyn Write, errors: &[Error]) -> i32 {
    for e in errors {
        let _ = writeln!(stderr, "error: {e}");
    }
    errors.iter().map(Error::exit_code).max().unwrap_or(2)
}

type Outcome = std::result::Result<(Report, OutputArgs), Vec<Error>>;

fn execute(command: &Command, stderr: &mut dyn Write) -> Outcome {
    match command {
        Command::Size(a) => size(a).map(|r| (r, a.out.clone())),
        Command::Table2(a) => table2(a).map(|r| (r, a.out.clone())),
        Command::Power(a) => power(a, stderr).map(|r| (r, a.out.clone())),
        Command::Counterfactual(a) => counterfactual(a).map(|r| (r, a.out.clone())),
        Command::BnabScore(a) => bnab_score(a).map(|r| (r, a.out.clone())),
        Command::BnabRank(a) => bnab_rank(a).map(|r| (r, a.out.clone())),
    }
}

fn one(e: Error) -> Vec<Error> {
    vec![e]
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// A validated design and scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignInputs {
    pub spec: DesignSpec,
    pub scenario: IncidenceScenario,
}

/// Checks every design field, reporting all problems with their field paths.
pub fn validate_inputs(args: &DesignArgs) -> std::result::Result<DesignInputs, Vec<Error>> {
    let args = args.merged().map_err(one)?;
    let mut errs = Vec::new();
    let mut required = |name: &str, v: Option<f64>| {
        if v.is_none() {
            errs.push(Error::invalid(name, "required"));
        }
        v.unwrap_or(f64::NAN)
    };
    let pe_null = required("hypotheses.pe_null", args.pe_null);
    let pe_alt = required("hypotheses.pe_alt", args.pe_alt);
    let inc_treat = required("annual_incidence_arm1", args.inc_treat);
    let inc_control = required("annual_incidence_arm2", args.inc_control);

    let kind = match args.design.as_deref().map(str::parse::<DesignKind>) {
        None => DesignKind::Layer,
        Some(Ok(k)) => k,
        Some(Err(e)) => {
            errs.push(e);
            DesignKind::Layer
        }
    };
    let dropout_mode = match args.dropout_mode.as_deref().map(str::parse::<DropoutMode>) {
        None => DropoutMode::default(),
        Some(Ok(m)) => m,
        Some(Err(e)) => {
            errs.push(e);
            DropoutMode::default()
        }
    };
    let allocation = match args.allocation.as_deref().map(str::parse::<Allocation>) {
        None => Allocation::default(),
        Some(Ok(a)) => a,
        Some(Err(e)) => {
            errs.push(e);
            Allocation::default()
        }
    };
    let mut hyp = HypothesisPair::new(pe_null, pe_alt);
    if let Some(a) = args.alpha {
        hyp.one_sided_alpha = a;
    }
    if let Some(p) = args.power {
        hyp.power = p;
    }
    let mut spec = DesignSpec::new(kind, hyp);
    spec.followup_years = args.followup.unwrap_or(spec.followup_years);
    spec.accrual_years = args.accrual.unwrap_or(spec.accrual_years);
    spec.annual_dropout = args.dropout.unwrap_or(spec.annual_dropout);
    spec.dropout_mode = dropout_mode;
    spec.allocation = allocation;
    let scenario = IncidenceScenario::new(inc_treat, inc_control);

    let reported: Vec<String> = errs.iter().filter_map(field_of).collect();
    errs.extend(
        spec.field_errors()
            .into_iter()
            .chain(scenario.field_errors())
            .filter(|e| field_of(e).is_none_or(|f| !reported.contains(&f))),
    );
    if errs.is_empty() {
        Ok(DesignInputs { spec, scenario })
    } else {
        Err(errs)
    }
}

fn field_of(e: &Error) -> Option<String> {
    match e {
        Error::InvalidParameter { field, .. } => Some(field.clone()),
        _ => None,
    }
}

fn design_config(report: &mut Report, inputs: &DesignInputs) {
    let s = &inputs.spec;
    report.config("design", s.kind.label());
    report.config("pe_null", s.hypotheses.pe_null);
    report.config("pe_alt", s.hypotheses.pe_alt);
    report.config("one_sided_alpha", s.hypotheses.one_sided_alpha);
    report.config("power", s.hypotheses.power);
    report.config("annual_incidence_arm1", inputs.scenario.annual_incidence_arm1);
    report.config("annual_incidence_arm2", inputs.scenario.annual_incidence_arm2);
    report.config("followup_years", s.followup_years);
    report.config("accrual_years", s.accrual_years);
    report.config("annual_dropout", s.annual_dropout);
    report.config(
        "dropout_mode",
        match s.dropout_mode {
            DropoutMode::TotalOverFollowup => "total",
            DropoutMode::Annual => "annual",
        },
    );
    report.config("allocation", s.allocation);
}

fn models(choice: ModelChoice) -> Vec<EventAccrualModel> {
    match choice {
        ModelChoice::Exponential => vec![EventAccrualModel::ExponentialDepletion],
        ModelChoice::Linear => vec![EventAccrualModel::LinearPersonTime],
        ModelChoice::Both => EventAccrualModel::ALL.to_vec(),
    }
}

fn size(a: &SizeArgs) -> std::result::Result<Report, Vec<Error>> {
    let inputs = validate_inputs(&a.design)?;
    let mut report = Report::new("size");
    design_config(&mut report, &inputs);
    let mut table = Table::new(
        "sample_size",
        &[
            "design",
            "model",
            "events",
            "n_total",
            "n_arm1",
            "n_arm2",
            "event_probability_arm1",
            "event_probability_arm2",
        ],
    );
    for model in models(a.model) {
        let spec = inputs.spec.with_model(model);
        let n = design::total_sample_size(&spec, &inputs.scenario).map_err(one)?;
        table.push(vec![
            spec.kind.label().into(),
            model.label().into(),
            n.events.into(),
            n.n_total.into(),
            n.n_arm1.into(),
            n.n_arm2.into(),
            n.event_probability_arm1.into(),
            n.event_probability_arm2.into(),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}

fn pct(v: f64) -> String {
    format!("{}%", (v * 100.0).round())
}

/// Hypothesis label in the style of the published table.
pub fn hypothesis_label(kind: DesignKind, pe_null: f64, pe_alt: f64) -> String {
    let name = if kind.provides_b_in_arms() { "RPE" } else { "PE" };
    format!(
        "H0: {name} = {} vs. H1: {name} = {}",
        pct(pe_null),
        pct(pe_alt)
    )
}

/// Builds the `table2` report.
pub fn table2_report(uptake_efficacy: Option<f64>) -> Result<Report> {
    let mut report = Report::new("table2");
    report.config("followup_years", 2);
    report.config("annual_dropout", "0.1 (total over follow-up)");
    report.config("allocation", "1:1");
    report.config("one_sided_alpha", 0.025);
    report.config("power", 0.9);
    let mut table = Table::new(
        "table2",
        &[
            "design",
            "comparison",
            "hypotheses",
            "incidence_arm1_arm2",
            "events",
            "n_exponential",
            "n_linear",
            "n_published",
            "deviation_exponential",
            "deviation_linear",
        ],
    );
    for row in design::table2() {
        table.push(vec![
            row.kind.label().into(),
            row.comparison.into(),
            hypothesis_label(row.kind, row.pe_null, row.pe_alt).into(),
            format!("{} : {}", row.incidence_arm1, row.incidence_arm2).into(),
            row.events.into(),
            row.n_exponential.into(),
            row.n_linear.into(),
            row.published_n.into(),
            row.relative_deviation(EventAccrualModel::ExponentialDepletion).into(),
            row.relative_deviation(EventAccrualModel::LinearPersonTime).into(),
        ]);
    }
    report.tables.push(table);

    if let Some(e) = uptake_efficacy {
        report.config("b_efficacy", e);
        let mut uptake = Table::new(
            "uptake",
            &["b_uptake", "b_efficacy", "incidence", "nominal_incidence", "relative_deviation"],
        );
        for row in design::uptake_scenarios(0.03, e)? {
            uptake.push(vec![
                row.uptake.into(),
                row.efficacy.into(),
                row.incidence.into(),
                row.nominal_incidence.into(),
                row.relative_deviation.into(),
            ]);
        }
        report.tables.push(uptake);
    }
    Ok(report)
}

fn table2(a: &Table2Args) -> std::result::Result<Report, Vec<Error>> {
    table2_report(a.uptake_efficacy).map_err(one)
}

fn power(a: &PowerArgs, stderr: &mut dyn Write) -> std::result::Result<Report, Vec<Error>> {
    let inputs = validate_inputs(&a.design);
    let seed = a.seed.ok_or_else(|| Error::invalid("seed", "required for stochastic commands"));
    let (inputs, seed) = match (inputs, seed) {
        (Ok(i), Ok(s)) => (i, s),
        (Err(mut errs), Err(e)) => {
            errs.push(e);
            return Err(errs);
        }
        (Err(errs), _) => return Err(errs),
        (_, Err(e)) => return Err(vec![e]),
    };
    if a.reps < 100 {
        return Err(vec![Error::invalid("reps", format!("need at least 100, got {}", a.reps))]);
    }
    let _ = writeln!(stderr, "seed: {seed}");

    let model = match a.model {
        ModelChoice::Exponential => EventAccrualModel::ExponentialDepletion,
        _ => EventAccrualModel::LinearPersonTime,
    };
    let spec = inputs.spec.with_model(model);
    let n_total = match a.n {
        Some(n) => n,
        None => design::total_sample_size(&spec, &inputs.scenario)
            .map_err(one)?
            .n_total as usize,
    };
    let estimate =
        sim::estimate_power(&spec, &inputs.scenario, n_total, a.reps, seed).map_err(one)?;

    if let Some(path) = &a.dump_dataset {
        let data = sim::simulate_trial(&spec, &inputs.scenario, n_total, sim::replicate_seed(seed, 0))
            .map_err(one)?;
        let mut buf = Vec::new();
        data.write_csv(&mut buf)
            .map_err(|e| vec![Error::io(path.display().to_string(), e)])?;
        report::write_atomic(path, &buf).map_err(one)?;
    }

    let mut report = Report::new("power");
    design_config(&mut report, &inputs);
    report.config("seed", seed);
    report.config("reps", a.reps);
    report.config("n_total", n_total);
    let mut table = Table::new(
        "power",
        &[
            "n_total",
            "replicates",
            "rejection_rate",
            "mc_halfwidth_95",
            "no_event_replicates",
            "target_power",
        ],
    );
    table.push(vec![
        n_total.into(),
        estimate.mc_replicates.into(),
        estimate.rejection_rate.into(),
        estimate.mc_halfwidth_95.into(),
        estimate.no_event_replicates.into(),
        spec.hypotheses.power.into(),
    ]);
    report.tables.push(table);
    Ok(report)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterfactualInput {
    experimental: ArmSummary,
    control: ArmSummary,
    theta_c: ThetaCInterval,
}

#[derive(Debug, Deserialize)]
struct SentinelRow {
    label: String,
    calendar_window: String,
    events: u64,
    person_years: f64,
}

fn read_sentinel(path: &Path) -> Result<Vec<SentinelCohort>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    rdr.deserialize::<SentinelRow>()
        .map(|r| {
            let r = r?;
            Ok(SentinelCohort {
                label: r.label,
                calendar_window: r.calendar_window,
                summary: ArmSummary::new(r.events, r.person_years),
            })
        })
        .collect()
}

fn counterfactual(a: &CounterfactualArgs) -> std::result::Result<Report, Vec<Error>> {
    let text = read_text(&a.input).map_err(one)?;
    let input: CounterfactualInput = serde_json::from_str(&text).map_err(|e| vec![e.into()])?;
    let mut errs = Vec::new();
    for (name, arm) in [("experimental", &input.experimental), ("control", &input.control)] {
        if let Err(e) = arm.validate(name) {
            errs.push(e);
        }
    }
    if let Err(e) = input.theta_c.validate() {
        errs.push(e);
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let ratio = rate_ratio(&input.experimental, &input.control).map_err(one)?;

    let mut report = Report::new("counterfactual");
    report.config("input", a.input.display());
    report.config("theta_c_low", input.theta_c.low);
    report.config("theta_c_high", input.theta_c.high);

    let mut rr = Table::new("rate_ratio", &["rr", "log_se", "ci_low", "ci_high", "one_sided"]);
    rr.push(vec![
        ratio.rr.into(),
        ratio.log_se.map_or(Cell::Text("NA".into()), Cell::Num),
        ratio.ci_low.into(),
        ratio.ci_high.into(),
        ratio.one_sided.into(),
    ]);
    report.tables.push(rr);

    let params: &[EfficacyParameter] = match a.parameter {
        ParameterChoice::Pe => &[EfficacyParameter::PreventionEfficacy],
        ParameterChoice::Air => &[EfficacyParameter::AvertedInfectionsRatio],
        ParameterChoice::Both => &[
            EfficacyParameter::PreventionEfficacy,
            EfficacyParameter::AvertedInfectionsRatio,
        ],
    };
    let mut est = Table::new(
        "efficacy",
        &["parameter", "theta_c", "point", "ci_low", "ci_high", "ui_low", "ui_high"],
    );
    for &p in params {
        let e = uncertainty_interval_for(&ratio, &input.theta_c, p).map_err(one)?;
        est.push(vec![
            p.label().into(),
            e.theta_c.into(),
            e.point.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            e.ui_low.into(),
            e.ui_high.into(),
        ]);
    }
    report.tables.push(est);

    let diff = additive_difference(&input.experimental, &input.control).map_err(one)?;
    let mut add = Table::new("additive_difference", &["diff", "se", "ci_low", "ci_high"]);
    add.push(vec![diff.diff.into(), diff.se.into(), diff.ci_low.into(), diff.ci_high.into()]);
    report.tables.push(add);

    if let Some(path) = &a.sentinel {
        report.config("sentinel", path.display());
        let cohorts = read_sentinel(path).map_err(one)?;
        let pooled = sentinel_pooled_incidence(&cohorts).map_err(one)?;
        let mut t = Table::new(
            "sentinel",
            &["calendar_window", "cohorts", "events", "person_years", "rate", "ci_low", "ci_high"],
        );
        for p in pooled {
            t.push(vec![
                p.calendar_window.into(),
                p.cohorts.into(),
                p.events.into(),
                p.person_years.into(),
                p.rate.into(),
                p.ci_low.into(),
                p.ci_high.into(),
            ]);
        }
        report.tables.push(t);
    }
    Ok(report)
}

fn load_regimen(path: &Path, scoring: &ScoringArgs) -> std::result::Result<Regimen, Vec<Error>> {
    let text = read_text(path).map_err(one)?;
    let mut regimen: Regimen = serde_json::from_str(&text).map_err(|e| vec![e.into()])?;
    scoring.apply(&mut regimen);
    let errs = regimen.field_errors();
    if errs.is_empty() {
        Ok(regimen)
    } else {
        Err(errs)
    }
}

fn scoring_config(report: &mut Report, regimen: &Regimen, scoring: &ScoringArgs) {
    report.config("panel", scoring.panel.display());
    report.config(
        "model",
        match regimen.model {
            CombinationModel::Additivity => "additivity",
            CombinationModel::BlissHill => "bliss-hill",
        },
    );
    report.config("window_days", regimen.window_days);
    report.config(
        "auc_scale",
        match regimen.auc_scale {
            AucScale::Linear => "linear",
            AucScale::Log10 => "log10",
        },
    );
    report.config(
        "censor_mode",
        match regimen.censor_mode {
            CensorMode::Resistant => "resistant",
            CensorMode::UseBound => "use-bound",
        },
    );
}

fn auc_header(scale: AucScale) -> &'static str {
    match scale {
        AucScale::Linear => "auc_titer_days",
        AucScale::Log10 => "auc_log10_titer_days",
    }
}

fn bnab_score(a: &BnabScoreArgs) -> std::result::Result<Report, Vec<Error>> {
    let regimen = load_regimen(&a.regimen, &a.scoring)?;
    let panel = VirusPanel::from_path(&a.scoring.panel).map_err(one)?;
    let curves = bnab::score::panel_curves(&regimen, &panel).map_err(one)?;
    let score = bnab::score::score_from_curves(&regimen, &curves);

    let mut report = Report::new("bnab-score");
    report.config("regimen", a.regimen.display());
    scoring_config(&mut report, &regimen, &a.scoring);

    // Both scales are reported; `auc_scale` selects the one behind the score.
    let mut table = Table::new(
        "scores",
        &["regimen", "virus_id", auc_header(AucScale::Linear), auc_header(AucScale::Log10)],
    );
    let (mut linear_sum, mut log_sum) = (0.0, 0.0);
    for c in &curves {
        let linear = auc_score(c, AucScale::Linear);
        let log = auc_score(c, AucScale::Log10);
        linear_sum += linear;
        log_sum += log;
        table.push(vec![
            score.regimen.as_str().into(),
            c.virus_id.as_str().into(),
            linear.into(),
            log.into(),
        ]);
    }
    let n = curves.len() as f64;
    table.push(vec![
        score.regimen.as_str().into(),
        "mean".into(),
        (linear_sum / n).into(),
        (log_sum / n).into(),
    ]);
    report.tables.push(table);

    if let Some(path) = &a.participants {
        report.config("participants", path.display());
        let text = read_text(path).map_err(one)?;
        let people: Vec<ParticipantPk> =
            serde_json::from_str(&text).map_err(|e| vec![e.into()])?;
        let summary = bnab::participant_scores(&regimen, &people, &panel).map_err(one)?;
        let mut t = Table::new("participants", &["regimen", "participant_id", "score"]);
        for (id, s) in &summary.scores {
            t.push(vec![summary.regimen.as_str().into(), id.as_str().into(), (*s).into()]);
        }
        for (label, v) in [("q1", summary.q1), ("median", summary.median), ("q3", summary.q3)] {
            t.push(vec![summary.regimen.as_str().into(), label.into(), v.into()]);
        }
        report.tables.push(t);
    }

    if let Some(path) = &a.curves {
        let mut out = String::from("virus_id,day,id80\n");
        for c in &curves {
            for (day, t) in c.days().zip(&c.id80) {
                out.push_str(&format!("{},{},{}\n", c.virus_id, day, report::sig6(*t)));
            }
        }
        report::write_atomic(path, out.as_bytes()).map_err(one)?;
    }
    Ok(report)
}

fn bnab_rank(a: &BnabRankArgs) -> std::result::Result<Report, Vec<Error>> {
    let panel = VirusPanel::from_path(&a.scoring.panel).map_err(one)?;
    let mut regimens = Vec::new();
    let mut errs = Vec::new();
    for path in &a.regimens {
        match load_regimen(path, &a.scoring) {
            Ok(r) => regimens.push(r),
            Err(e) => errs.extend(e),
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let scores = regimens
        .iter()
        .map(|r| bnab::regimen_score(r, &panel))
        .collect::<Result<Vec<_>>>()
        .map_err(one)?;
    let ranked = bnab::rank_regimens(&scores);

    let mut report = Report::new("bnab-rank");
    report.config(
        "regimens",
        a.regimens
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    scoring_config(&mut report, &regimens[0], &a.scoring);
    let mut table = Table::new("ranking", &["rank", "regimen", "score", "tied"]);
    for r in ranked {
        table.push(vec![r.rank.into(), r.regimen.into(), r.score.into(), r.tied.into()]);
    }
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design_args() -> DesignArgs {
        DesignArgs {
            pe_null: Some(0.25),
            pe_alt: Some(0.7),
            inc_treat: Some(0.0015),
            inc_control: Some(0.005),
            ..DesignArgs::default()
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut a = design_args();
        a.dropout = Some(1.2);
        let errs = validate_inputs(&a).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().starts_with("annual_dropout:"));

        let errs = validate_inputs(&DesignArgs::default()).unwrap_err();
        let fields: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        assert!(fields.iter().any(|f| f.starts_with("hypotheses.pe_null")));
        assert!(fields.iter().any(|f| f.starts_with("annual_incidence_arm2")));
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.json");
        std::fs::write(&path, r#"{"pe_null": 0.0, "pe_alt": 0.5, "inc_treat": 0.015, "inc_control": 0.03, "dropout": 0.2}"#)
            .unwrap();
        let a = DesignArgs {
            config: Some(path),
            dropout: Some(0.1),
            ..DesignArgs::default()
        };
        let inputs = validate_inputs(&a).unwrap();
        assert_eq!(inputs.spec.annual_dropout, 0.1);
        assert_eq!(inputs.spec.hypotheses.pe_alt, 0.5);
    }

    #[test]
    fn hypothesis_labels() {
        assert_eq!(hypothesis_label(DesignKind::Layer, 0.25, 0.7), "H0: PE = 25% vs. H1: PE = 70%");
        assert_eq!(hypothesis_label(DesignKind::Compare, 0.0, 0.4), "H0: RPE = 0% vs. H1: RPE = 40%");
    }

    #[test]
    fn table2_report_has_twelve_rows() {
        let r = table2_report(None).unwrap();
        assert_eq!(r.tables[0].rows.len(), 12);
        let r = table2_report(Some(0.67)).unwrap();
        assert_eq!(r.tables[1].rows.len(), 3);
    }
}
