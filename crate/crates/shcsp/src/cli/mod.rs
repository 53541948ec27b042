//! The `shcsp` command line: parse/validate programs, sample runs to disk,
//! estimate probability formulas, check certificate requests, and print Lie
//! derivatives.
//!
//! Exit codes are part of the interface and deterministic for fixed inputs
//! and seed:
//!
//! * `parse` — 0 valid, 1 invalid, 2 unreadable.
//! * `simulate` — 0 all runs recorded, 1 some run failed, 2 bad input.
//! * `estimate` — 0 holds, 1 fails, 3 inconclusive, 2 bad input/formula.
//! * `certify` — 0 certified, 1 rejected, 3 unsupported/partial evidence,
//!   2 malformed request.
//! * `lie` — 0 printed, 1 no usable derivative, 2 bad input.
//!
//! The master seed comes from `--seed`, overridden by the `SHCSP_SEED`
//! environment variable when set; run `i` of a batch uses substream
//! `mix64(master, i)`.

pub mod output;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assertions::{estimate_prob, parse_prob_formula, Verdict};
use crate::cert::{check_sde_rule, io as cert_io, lie_derivative, CertVerdict};
use crate::exec::{run, RepeatPolicy, RunConfig};
use crate::rng;
use crate::syntax::ast::{Process, SdeBlock};
use crate::syntax::{parse, parse_expr, parse_rational, pretty, pretty_expr, validate};

#[derive(Parser)]
#[command(name = "shcsp", version, about = "Stochastic hybrid CSP toolbox")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a program, echoing its normalized form.
    Parse {
        #[arg(long)]
        program: PathBuf,
    },
    /// Sample runs and write one JSON record per run plus an index.
    Simulate {
        #[command(flatten)]
        job: Job,
        /// Directory for `run_XXXXX.json` and `index.json`.
        #[arg(long)]
        out: PathBuf,
        /// Also write each flow as `run_XXXXX.csv`.
        #[arg(long)]
        csv: bool,
    },
    /// Estimate a probability formula over sampled runs.
    Estimate {
        #[command(flatten)]
        job: Job,
        /// File holding one probability formula.
        #[arg(long)]
        formula: PathBuf,
        /// Confidence parameter delta for the Hoeffding interval.
        #[arg(long, default_value_t = 0.05)]
        confidence: f64,
        /// Optional directory for `estimate.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the SDE proof rule for a JSON certificate request.
    Certify {
        #[arg(long)]
        request: PathBuf,
        /// Optional directory for `certificate.json` and `certificate.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the simplified Lie derivative of `f` along a program's block.
    Lie {
        #[arg(long)]
        program: PathBuf,
        /// The function to differentiate, e.g. `y*y`.
        #[arg(long)]
        f: String,
    },
}

/// Options shared by the run-sampling commands.
#[derive(Args)]
struct Job {
    #[arg(long)]
    program: PathBuf,
    /// Initial valuation, `x=0,y=0.1`.
    #[arg(long, default_value = "")]
    init: String,
    #[arg(long)]
    runs: usize,
    /// Master seed (`SHCSP_SEED` overrides).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integrator step.
    #[arg(long)]
    dt: Option<f64>,
    /// Model-time horizon.
    #[arg(long)]
    tmax: Option<f64>,
    /// Repetition policy for `P*`: `fixed:N` or `geom:Q`.
    #[arg(long)]
    repeat: Option<String>,
}

/// Run the CLI against the process arguments; returns the exit code.
pub fn main() -> i32 {
    match Cli::parse().cmd {
        Cmd::Parse { program } => cmd_parse(&program),
        Cmd::Simulate { job, out, csv } => cmd_simulate(&job, &out, csv),
        Cmd::Estimate { job, formula, confidence, out } => {
            cmd_estimate(&job, &formula, confidence, out.as_deref())
        }
        Cmd::Certify { request, out } => cmd_certify(&request, out.as_deref()),
        Cmd::Lie { program, f } => cmd_lie(&program, &f),
    }
}

fn fail(code: i32, message: impl Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn read(path: &Path) -> Result<String, i32> {
    fs::read_to_string(path).map_err(|e| fail(2, format_args!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Process, i32> {
    let text = read(path)?;
    let process = parse(&text).map_err(|e| fail(2, e))?;
    let diagnostics = validate(&process);
    if let Some(d) = diagnostics.first() {
        return Err(fail(2, &d.message));
    }
    Ok(process)
}

fn cmd_parse(program: &Path) -> i32 {
    let text = match read(program) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let process = match parse(&text) {
        Ok(p) => p,
        Err(e) => return fail(1, e),
    };
    let diagnostics = validate(&process);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("error: {}", d.message);
        }
        return 1;
    }
    println!("{}", pretty(&process));
    0
}

impl Job {
    /// Resolve everything a sampling command needs; the error is the exit
    /// code (the message is already on stderr).
    fn load(&self) -> Result<(Process, BTreeMap<String, f64>, RunConfig, u64), i32> {
        Ok((
            load_program(&self.program)?,
            self.initial()?,
            self.config()?,
            self.master_seed()?,
        ))
    }

    fn config(&self) -> Result<RunConfig, i32> {
        let mut cfg = RunConfig::default();
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(tmax) = self.tmax {
            cfg.t_max = tmax;
        }
        if let Some(repeat) = &self.repeat {
            cfg.repeat_policy = parse_repeat(repeat).map_err(|e| fail(2, e))?;
        }
        cfg.check().map_err(|e| fail(2, e))?;
        Ok(cfg)
    }

    fn master_seed(&self) -> Result<u64, i32> {
        match std::env::var("SHCSP_SEED") {
            Ok(value) => value
                .trim()
                .parse()
                .map_err(|_| fail(2, format_args!("SHCSP_SEED is not a u64: `{value}`"))),
            Err(_) => Ok(self.seed),
        }
    }

    fn initial(&self) -> Result<BTreeMap<String, f64>, i32> {
        parse_init(&self.init).map_err(|e| fail(2, e))
    }
}

fn parse_repeat(text: &str) -> Result<RepeatPolicy, String> {
    if let Some(n) = text.strip_prefix("fixed:") {
        let n: u32 = n
            .parse()
            .map_err(|_| format!("bad repeat count in `{text}`"))?;
        return Ok(RepeatPolicy::Fixed(n));
    }
    if let Some(q) = text.strip_prefix("geom:") {
        let q = parse_rational(q).map_err(|e| format!("bad repeat probability: {e}"))?;
        return Ok(RepeatPolicy::Geometric(q));
    }
    Err(format!("--repeat takes `fixed:N` or `geom:Q`, got `{text}`"))
}

fn parse_init(text: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for pair in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--init entries are `name=value`, got `{pair}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad value for `{}` in --init", name.trim()))?;
        out.insert(name.trim().to_string(), value);
    }
    Ok(out)
}

fn cmd_simulate(job: &Job, out: &Path, csv: bool) -> i32 {
    let (process, init, cfg, master) = match job.load() {
        Ok(x) => x,
        Err(code) => return code,
    };
    if let Err(e) = fs::create_dir_all(out) {
        return fail(2, format_args!("{}: {e}", out.display()));
    }

    let mut files = Vec::new();
    let mut exits = Vec::new();
    let mut errors: Vec<(usize, String)> = Vec::new();
    for i in 0..job.runs {
        let seed = rng::mix64(master, i as u64);
        match run(&process, &init, seed, &cfg) {
            Ok(record) => {
                let stem = format!("run_{i:05}");
                let json_path = out.join(format!("{stem}.json"));
                if let Err(e) = fs::write(&json_path, output::record_json(&record)) {
                    return fail(2, format_args!("{}: {e}", json_path.display()));
                }
                if csv {
                    let csv_path = out.join(format!("{stem}.csv"));
                    if let Err(e) = fs::write(&csv_path, output::flow_csv(&record.flow)) {
                        return fail(2, format_args!("{}: {e}", csv_path.display()));
                    }
                }
                files.push(format!("{stem}.json"));
                exits.push(record.exit);
            }
            Err(e) => errors.push((i, e.to_string())),
        }
    }

    let index = output::index_json(
        job.runs,
        master,
        cfg.dt,
        cfg.t_max,
        &files,
        &output::tally_exits(&exits),
        &errors,
    );
    let index_path = out.join("index.json");
    if let Err(e) = fs::write(&index_path, index) {
        return fail(2, format_args!("{}: {e}", index_path.display()));
    }
    if errors.is_empty() {
        0
    } else {
        fail(
            1,
            format_args!("{} of {} runs failed; see index.json", errors.len(), job.runs),
        )
    }
}

fn cmd_estimate(job: &Job, formula: &Path, confidence: f64, out: Option<&Path>) -> i32 {
    let (process, init, cfg, master) = match job.load() {
        Ok(x) => x,
        Err(code) => return code,
    };
    let formula_text = match read(formula) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let pf = match parse_prob_formula(formula_text.trim()) {
        Ok(pf) => pf,
        Err(e) => return fail(2, e),
    };
    let est = match estimate_prob(&pf, &process, &init, job.runs as u64, confidence, master, &cfg) {
        Ok(est) => est,
        Err(e) => return fail(2, e),
    };
    if est.failures > 0 {
        eprintln!(
            "note: {} of {} runs failed to evaluate and were excluded",
            est.failures,
            job.runs
        );
    }
    let json = est.to_json();
    println!("{json}");
    if let Some(dir) = out {
        if let Err(e) = fs::create_dir_all(dir) {
            return fail(2, format_args!("{}: {e}", dir.display()));
        }
        let path = dir.join("estimate.json");
        if let Err(e) = fs::write(&path, json) {
            return fail(2, format_args!("{}: {e}", path.display()));
        }
    }
    match est.verdict {
        Verdict::Holds => 0,
        Verdict::Fails => 1,
        Verdict::Inconclusive => 3,
    }
}

fn cmd_certify(request: &Path, out: Option<&Path>) -> i32 {
    let text = match read(request) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let req = match cert_io::request_from_json(&text) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };
    let result = match check_sde_rule(&req) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };
    println!("{}", cert_io::result_to_json(&result));
    eprint!("{}", cert_io::result_report(&result));
    if let Some(dir) = out {
        if let Err(e) = fs::create_dir_all(dir) {
            return fail(2, format_args!("{}: {e}", dir.display()));
        }
        let json_path = dir.join("certificate.json");
        if let Err(e) = fs::write(&json_path, cert_io::result_to_json(&result)) {
            return fail(2, format_args!("{}: {e}", json_path.display()));
        }
        let txt_path = dir.join("certificate.txt");
        if let Err(e) = fs::write(&txt_path, cert_io::result_report(&result)) {
            return fail(2, format_args!("{}: {e}", txt_path.display()));
        }
    }
    match result.verdict {
        CertVerdict::Certified => 0,
        CertVerdict::Rejected { .. } => 1,
        CertVerdict::Unsupported { .. } => 3,
    }
}

fn cmd_lie(program: &Path, f: &str) -> i32 {
    let process = match load_program(program) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let Some(block) = first_block(&process) else {
        return fail(2, "the program has no SDE block");
    };
    let f = match parse_expr(f) {
        Ok(f) => f,
        Err(e) => return fail(2, e),
    };
    match lie_derivative(&f, block) {
        Ok(lf) => {
            println!("{}", pretty_expr(&lf));
            0
        }
        Err(e) => fail(1, e),
    }
}

/// The first SDE block in syntactic order, if any.
fn first_block(p: &Process) -> Option<&SdeBlock> {
    match p {
        Process::Sde(block) | Process::Interrupt(block, _) => Some(block),
        Process::Seq(a, b) | Process::Parallel(a, b) => {
            first_block(a).or_else(|| first_block(b))
        }
        Process::PChoice(a, _, b) => first_block(a).or_else(|| first_block(b)),
        Process::Cond(_, body) | Process::Repeat(body) => first_block(body),
        Process::Skip | Process::Assign(..) | Process::Input(..) | Process::Output(..) => None,
    }
}
