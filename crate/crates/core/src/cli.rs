//! Command-line front end. Each `cmd_*` returns the files it would write plus the text
//! for stdout; `run` does the I/O and maps outcomes to exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::compiler::{compile_factor_graph, to_pairwise, PARAM_LIMIT};
use crate::error::{Error, Result};
use crate::factor_graph::{total_variation, FactorGraph};
use crate::hamiltonian::{
    spectrum_report, spectrum_with, tn_parent_terms, transformed_terms, verify_frustration_free, ParentHamiltonian,
    SpectrumOptions,
};
use crate::history::{
    clock_gap, clock_hamiltonian, gradient_encoding_demo, history_problem, history_state, pi_parts, psd_rank,
    verify_eta, Circuit, Layout,
};
use crate::inference::{self, trace_csv, DataSet, TrainOptions};
use crate::model::{
    group_tensors, project_conditioned, tensor_network_of, Assignment, ModelFile, QgmModel, DEFAULT_QUBIT_CAP,
};
use crate::preparation::{network_problem, summarize, PlanOptions, PreparationPlan, PreparationProblem};
use crate::tensor::statevec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Largest brute-force factor graph checked after compilation.
pub const VERIFY_MAX_VARS: usize = 14;
pub const COMPILE_TV_TOL: f64 = 1e-6;
pub const PREPARE_FIDELITY_TOL: f64 = 1e-6;
pub const ETA_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "qgm", version, about = "Exact simulator for quantum generative models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct Opts {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, global = true, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub chi: f64,
    /// Selector penalty A used when rewriting factors of arity three or more.
    #[arg(long, global = true, default_value_t = PARAM_LIMIT)]
    pub sharpness: f64,
    /// Degree d of the n^d cost charged per measurement.
    #[arg(long = "cost-poly", global = true, default_value_t = 1)]
    pub cost_poly: u32,
    #[arg(long = "max-qubits", global = true, default_value_t = DEFAULT_QUBIT_CAP)]
    pub max_qubits: usize,
    /// Train without rescaling matrices to unit minimum singular value.
    #[arg(long = "no-normalize", global = true)]
    pub no_normalize: bool,
    /// Output directory; omitted means stdout only.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Compile a factor-graph JSON file into a QGM model file.
    Compile { factor_graph: PathBuf },
    /// Conditional or marginal probabilities of visible vertices.
    Infer {
        model: PathBuf,
        /// Query vertices, e.g. `0,2` (default: every visible vertex not in --given).
        #[arg(long)]
        vars: Option<String>,
        /// Evidence, e.g. `1=0,3=1`.
        #[arg(long)]
        given: Option<String>,
    },
    /// Gradient-descent training on a bitstring dataset.
    Train { model: PathBuf, data: PathBuf },
    /// Parent-Hamiltonian spectrum of a model or circuit file.
    Spectrum {
        input: PathBuf,
        #[arg(long)]
        given: Option<String>,
    },
    /// Simulate recursive state preparation for a model (optionally conditioned) or circuit.
    Prepare {
        input: PathBuf,
        #[arg(long)]
        given: Option<String>,
    },
    /// η table, projector ranks, clock gap and gradient encoding for a circuit file.
    HistoryDemo { circuit: PathBuf },
}

/// Everything that determines a command's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vars: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
    #[serde(flatten)]
    pub opts: Opts,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        let (command, inputs, vars, given) = match &cli.command {
            Command::Compile { factor_graph } => ("compile", vec![factor_graph.clone()], None, None),
            Command::Infer { model, vars, given } => ("infer", vec![model.clone()], vars.clone(), given.clone()),
            Command::Train { model, data } => ("train", vec![model.clone(), data.clone()], None, None),
            Command::Spectrum { input, given } => ("spectrum", vec![input.clone()], None, given.clone()),
            Command::Prepare { input, given } => ("prepare", vec![input.clone()], None, given.clone()),
            Command::HistoryDemo { circuit } => ("history-demo", vec![circuit.clone()], None, None),
        };
        Self {
            command: command.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            vars,
            given,
            opts: cli.opts.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    fn value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn comment(&self) -> String {
        format!("# config: {}\n", self.to_json())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CmdOutput {
    /// (file name, contents), written under --out.
    pub files: Vec<(String, String)>,
    pub stdout: String,
    pub tolerance_failed: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. }
        | Error::Solver(_)
        | Error::NotUnique { .. }
        | Error::DegenerateStage { .. }
        | Error::ZeroIntermediate { .. } => EXIT_TOLERANCE,
        _ => EXIT_VALIDATION,
    }
}

pub fn parse_assignment(s: &str) -> Result<Assignment> {
    let mut a = Assignment::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (v, b) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected vertex=bit, got {part:?}")))?;
        let v: usize = v.trim().parse().map_err(|_| Error::Parse(format!("bad vertex {v:?}")))?;
        let b: u8 = match b.trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(Error::Parse(format!("bad bit {b:?}"))),
        };
        if a.get(v).is_some() {
            return Err(Error::Parse(format!("vertex {v} given twice")));
        }
        a.insert(v, b);
    }
    Ok(a)
}

pub fn parse_vars(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::Parse(format!("bad vertex {p:?}"))))
        .collect()
}

fn check_qubits(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::TooManyQubits { requested: n, cap });
    }
    Ok(())
}

fn model_file(model: &QgmModel, cfg: &RunConfig) -> String {
    let mut f = ModelFile::from(model);
    f.config = Some(cfg.value());
    serde_json::to_string_pretty(&f).expect("model serializes") + "\n"
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}

enum Input {
    Model(QgmModel),
    Circuit(Circuit),
}

/// Model JSON if it parses as one, else circuit JSON.
fn load_input(path: &Path) -> Result<Input> {
    let text = std::fs::read_to_string(path)?;
    match QgmModel::from_json(&text) {
        Ok(m) => Ok(Input::Model(m)),
        Err(model_err) => Circuit::from_json(&text).map(Input::Circuit).map_err(|circuit_err| {
            Error::Parse(format!(
                "{} is neither a model ({model_err}) nor a circuit ({circuit_err})",
                path.display()
            ))
        }),
    }
}

pub fn cmd_compile(cfg: &RunConfig, path: &Path) -> Result<CmdOutput> {
    let fg = FactorGraph::load(path)?;
    let pw = to_pairwise(&fg, cfg.opts.sharpness)?;
    let model = compile_factor_graph(&pw)?;
    let verify = fg.n_vars() <= VERIFY_MAX_VARS && model.m() <= cfg.opts.max_qubits;
    let tv = if verify {
        let p = fg.visible_distribution()?;
        let q = inference::visible_distribution(&model)?;
        Some(total_variation(&p, &q))
    } else {
        None
    };
    // error introduced by rewriting k-ary factors, checked on the factor graphs themselves
    let decomposition_tv = if fg.n_vars() <= VERIFY_MAX_VARS && pw.n_vars() <= DEFAULT_QUBIT_CAP {
        Some(total_variation(&fg.visible_distribution()?, &pw.visible_distribution()?))
    } else {
        None
    };
    let failed = tv.is_some_and(|t| t > COMPILE_TV_TOL) || decomposition_tv.is_some_and(|t| t > COMPILE_TV_TOL);
    let report = json!({
        "config": cfg.value(),
        "factor_graph_vars": fg.n_vars(),
        "pairwise_vars": pw.n_vars(),
        "qubits": model.m(),
        "visible": model.graph.visible(),
        "total_variation": tv,
        "decomposition_total_variation": decomposition_tv,
        "tolerance": COMPILE_TV_TOL,
        "verified": tv.is_some(),
        "pass": !failed,
    });
    let show = |t: Option<f64>| t.map_or("skipped".to_string(), |t| format!("{t:e}"));
    let stdout = format!(
        "compiled {} variables into {} qubits; TV = {}; decomposition TV = {}\n",
        fg.n_vars(),
        model.m(),
        show(tv),
        show(decomposition_tv)
    );
    Ok(CmdOutput {
        files: vec![
            ("model.json".into(), model_file(&model, cfg)),
            ("compile_report.json".into(), pretty(&report)),
        ],
        stdout,
        tolerance_failed: failed,
    })
}

pub fn cmd_infer(cfg: &RunConfig, path: &Path, vars: Option<&str>, given: Option<&str>) -> Result<CmdOutput> {
    let model = QgmModel::load(path)?;
    check_qubits(model.m(), cfg.opts.max_qubits)?;
    let z = given.map(parse_assignment).transpose()?.unwrap_or_default();
    let vars = match vars {
        Some(v) => parse_vars(v)?,
        None => model.graph.visible().iter().copied().filter(|v| z.get(*v).is_none()).collect(),
    };
    let mut csv = cfg.comment();
    let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(csv, "# vars: {}", names.join(","));
    csv.push_str("assignment,probability\n");
    for idx in 0..1usize << vars.len() {
        let bits: Vec<u8> = (0..vars.len()).map(|i| ((idx >> (vars.len() - 1 - i)) & 1) as u8).collect();
        let x = Assignment::from_pairs(&vars.iter().copied().zip(bits.iter().copied()).collect::<Vec<_>>());
        let p = inference::conditional(&model, &x, &z)?;
        let s: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
        let _ = writeln!(csv, "{s},{p}");
    }
    Ok(CmdOutput {
        files: vec![("infer.csv".into(), csv.clone())],
        stdout: csv,
        tolerance_failed: false,
    })
}

pub fn cmd_train(cfg: &RunConfig, model_path: &Path, data_path: &Path) -> Result<CmdOutput> {
    let model = QgmModel::load(model_path)?;
    check_qubits(model.m(), cfg.opts.max_qubits)?;
    let data = DataSet::load(data_path)?;
    let opts = TrainOptions {
        lr: cfg.opts.lr,
        steps: cfg.opts.steps,
        chi: cfg.opts.chi,
        seed: cfg.opts.seed,
        normalize: !cfg.opts.no_normalize,
    };
    let out = inference::train(&model, &data, &opts)?;
    let last = out.trace.last().map_or(f64::NAN, |r| r.objective);
    let first = out.trace.first().map_or(f64::NAN, |r| r.objective);
    Ok(CmdOutput {
        files: vec![
            ("model.json".into(), model_file(&out.model, cfg)),
            ("loss.csv".into(), trace_csv(&out.trace, &format!("config: {}", cfg.to_json()))),
        ],
        stdout: format!("trained {} steps; negative log-likelihood {first} -> {last}\n", cfg.opts.steps),
        tolerance_failed: false,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig, path: &Path, given: Option<&str>) -> Result<CmdOutput> {
    let (h, target): (ParentHamiltonian, Vec<_>) = match load_input(path)? {
        Input::Model(model) => {
            check_qubits(model.m(), cfg.opts.max_qubits)?;
            match given.map(parse_assignment).transpose()? {
                Some(z) if !z.is_empty() => {
                    let tn = tensor_network_of(&model, &z)?;
                    let grouping = group_tensors(&tn)?;
                    (tn_parent_terms(&tn, &grouping)?, project_conditioned(&model, &z)?.into_data())
                }
                _ => (transformed_terms(&model)?, model.q_state()?.into_data()),
            }
        }
        Input::Circuit(c) => (clock_hamiltonian(&c)?, history_state(&c).amplitudes),
    };
    let s = spectrum_with(
        &h,
        SpectrumOptions {
            max_qubits: cfg.opts.max_qubits,
            ..Default::default()
        },
    )?;
    let ff = verify_frustration_free(&h, &target)?;
    let mut text = cfg.comment();
    text.push_str(&spectrum_report(&h, &s, Some(&ff)));
    let _ = writeln!(text, "target_fidelity = {:e}", statevec::fidelity(&s.ground_vector, &target));
    Ok(CmdOutput {
        files: vec![("spectrum.txt".into(), text.clone())],
        stdout: text,
        tolerance_failed: !ff.pass,
    })
}

pub fn cmd_prepare(cfg: &RunConfig, path: &Path, given: Option<&str>) -> Result<CmdOutput> {
    let problem: PreparationProblem = match load_input(path)? {
        Input::Model(model) => {
            check_qubits(model.m(), cfg.opts.max_qubits)?;
            let z = given.map(parse_assignment).transpose()?.unwrap_or_default();
            let tn = tensor_network_of(&model, &z)?;
            let grouping = group_tensors(&tn)?;
            network_problem(&tn, &grouping, None)?
        }
        Input::Circuit(c) => {
            check_qubits(c.n_qubits(), cfg.opts.max_qubits)?;
            history_problem(&c)?
        }
    };
    let plan = PreparationPlan::new(
        &problem.seq,
        &problem.hams,
        PlanOptions {
            cost_degree: cfg.opts.cost_poly,
            ..Default::default()
        },
    )?;
    let traces = plan.run_trials(cfg.opts.seed, cfg.opts.trials)?;
    let summary = summarize(&plan, &traces);
    let failed = summary.min_final_fidelity < 1.0 - PREPARE_FIDELITY_TOL;
    let mut files: Vec<(String, String)> = traces
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let comment = format!("config: {} trial: {i}", cfg.to_json());
            (format!("trace_{i:05}.csv"), tr.to_csv(&comment))
        })
        .collect();
    let doc = json!({
        "config": cfg.value(),
        "seed": cfg.opts.seed,
        "qubits": plan.n_qubits,
        "merged_windows": problem.merged,
        "degeneracies": plan.degeneracies,
        "summary": summary,
    });
    files.push(("summary.json".into(), pretty(&doc)));
    let mut stdout = String::new();
    let _ = writeln!(stdout, "stage,eta,gap,expected_substeps,mean_substeps,direct");
    for s in &summary.stages {
        let expected = s.expected_substeps.map_or("none".to_string(), |e| e.to_string());
        let _ = writeln!(
            stdout,
            "{},{},{},{},{},{}",
            s.stage, s.eta, s.gap, expected, s.mean_substeps, s.direct
        );
    }
    let _ = writeln!(
        stdout,
        "trials = {}, mean total cost = {}, min fidelity = {}",
        summary.trials, summary.mean_total_cost, summary.min_final_fidelity
    );
    Ok(CmdOutput {
        files,
        stdout,
        tolerance_failed: failed,
    })
}

pub fn cmd_history_demo(cfg: &RunConfig, path: &Path) -> Result<CmdOutput> {
    let c = Circuit::load(path)?;
    check_qubits(c.n_qubits(), cfg.opts.max_qubits)?;
    let rows = verify_eta(&c)?;
    let eta_ok = rows.iter().all(|r| r.diff <= ETA_TOL);
    let ranks: Option<Vec<[usize; 5]>> = (c.layout == Layout::Chain).then(|| {
        c.gates
            .iter()
            .map(|g| {
                let parts = pi_parts(&g.matrix);
                let total = parts.iter().fold(nalgebra::DMatrix::zeros(32, 32), |a, b| a + b);
                let r: Vec<usize> = parts.iter().map(psd_rank).collect();
                [r[0], r[1], r[2], r[3], psd_rank(&total)]
            })
            .collect()
    });
    let ranks_ok = ranks.as_ref().is_none_or(|rs| rs.iter().all(|r| *r == [16, 5, 4, 2, 27]));
    let gap = clock_gap(&c)?;
    let gap_ok = gap.degeneracy == 1 && gap.ground_energy.abs() <= 1e-9;
    let demo = gradient_encoding_demo(&c)?;

    let mut eta_csv = cfg.comment();
    eta_csv.push_str("t,eta,expected,diff,boundary\n");
    for r in &rows {
        let _ = writeln!(eta_csv, "{},{},{},{},{}", r.t, r.eta, r.expected, r.diff, r.boundary);
    }
    let mut text = cfg.comment();
    let _ = writeln!(text, "gates = {}\nlayout = {:?}", c.t(), c.layout);
    text.push_str("[eta]\nt,eta,expected,diff,boundary\n");
    for r in &rows {
        let _ = writeln!(text, "{},{},{},{:e},{}", r.t, r.eta, r.expected, r.diff, r.boundary);
    }
    let _ = writeln!(text, "eta_pass = {eta_ok}");
    text.push_str("[ranks]\n");
    match &ranks {
        None => text.push_str("n/a (register layout)\n"),
        Some(rs) if rs.is_empty() => text.push_str("n/a (no gates)\n"),
        Some(rs) => {
            // identical for every gate when ranks_ok; otherwise list each
            let distinct: Vec<&[usize; 5]> = if ranks_ok { vec![&rs[0]] } else { rs.iter().collect() };
            for r in distinct {
                let _ = writeln!(text, "{},{},{},{},total {}", r[0], r[1], r[2], r[3], r[4]);
            }
        }
    }
    let _ = writeln!(text, "ranks_pass = {ranks_ok}");
    let _ = writeln!(
        text,
        "[gap]\nground_energy = {:e}\ngap = {}\ndegeneracy = {}\nground_fidelity = {}",
        gap.ground_energy, gap.gap, gap.degeneracy, gap.fidelity
    );
    let _ = writeln!(
        text,
        "[gradient]\noutput_qubit = {}\np0 = {}\nvalue = {}\nraw = {}\ndata_term = {}\nmodel_term = {}",
        demo.output_qubit, demo.p0, demo.value, demo.raw, demo.data_term, demo.model_term
    );
    let report = json!({
        "config": cfg.value(),
        "eta": rows,
        "ranks": ranks,
        "gap": gap,
        "gradient": demo,
    });
    Ok(CmdOutput {
        files: vec![
            ("eta.csv".into(), eta_csv),
            ("history_report.txt".into(), text.clone()),
            ("history_report.json".into(), pretty(&report)),
        ],
        stdout: text,
        tolerance_failed: !(eta_ok && ranks_ok && gap_ok),
    })
}

pub fn execute(cli: &Cli) -> Result<CmdOutput> {
    let cfg = RunConfig::from_cli(cli);
    match &cli.command {
        Command::Compile { factor_graph } => cmd_compile(&cfg, factor_graph),
        Command::Infer { model, vars, given } => cmd_infer(&cfg, model, vars.as_deref(), given.as_deref()),
        Command::Train { model, data } => cmd_train(&cfg, model, data),
        Command::Spectrum { input, given } => cmd_spectrum(&cfg, input, given.as_deref()),
        Command::Prepare { input, given } => cmd_prepare(&cfg, input, given.as_deref()),
        Command::HistoryDemo { circuit } => cmd_history_demo(&cfg, circuit),
    }
}

/// Runs a parsed command, writes outputs, returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let out = match execute(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(dir) = &cli.opts.out {
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir)?;
            for (name, contents) in &out.files {
                std::fs::write(dir.join(name), contents)?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    }
    print!("{}", out.stdout);
    if out.tolerance_failed {
        eprintln!("tolerance check failed");
        EXIT_TOLERANCE
    } else {
        EXIT_OK
    }
}

pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            }
        }
    }
}
