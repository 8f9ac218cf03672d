//! Command-line front end.
//!
//! Exit codes: 0 success, 1 compile/validation failure, 2 integrity-check
//! failure (invalid code word, trapped run), 3 usage errors.

use std::fs;
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use branchguard::ancode::{AnParams, AnWord};
use branchguard::cfi::CheckPolicy;
use branchguard::container::Container;
use branchguard::enccmp::{classify_symbol, encoded_compare, symbols_for, Predicate, SymbolClass};
use branchguard::faultsim::{
    program_monte_carlo, trace_exhaustive_campaign, trace_monte_carlo, CampaignResult, FaultPlan,
    FaultSpec, ModelMix, OutcomeClass, RunContext,
};
use branchguard::instrument::{build, ModMode, PipelineConfig, PipelineKind};
use branchguard::mir::{self, interpret, parse, ExecOptions, HaltStatus, Inputs, Reg};

mod report;

const EXIT_OK: u8 = 0;
const EXIT_COMPILE: u8 = 1;
const EXIT_INTEGRITY: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "branchguard",
    about = "Fault-attack hardening for conditional branches: AN-coded comparisons, \
             CFI linking, and a fault-injection simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    /// Encoding constant A.
    #[arg(long, default_value_t = 63877)]
    a: u32,
    /// Additive constant for equality comparisons.
    #[arg(long, default_value_t = 14991)]
    c_eq: u32,
    /// Additive constant for ordering comparisons.
    #[arg(long, default_value_t = 29982)]
    c_ord: u32,
    /// Largest legal functional value.
    #[arg(long, default_value_t = 65535)]
    n_max: u32,
}

impl ParamArgs {
    fn params(&self) -> Result<AnParams, CliError> {
        AnParams::new(self.a, self.c_eq, self.c_ord, self.n_max)
            .map_err(|e| CliError::usage(format!("invalid parameters: {e}")))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode functional values as AN code words.
    Encode {
        #[command(flatten)]
        params: ParamArgs,
        /// Functional values (decimal or 0x hex).
        #[arg(required = true)]
        values: Vec<String>,
    },
    /// Check 32-bit words against the AN code; prints the decoded value.
    Check {
        #[command(flatten)]
        params: ParamArgs,
        /// Code words (decimal or 0x hex).
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Run an encoded comparison of two functional values.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        /// Predicate: eq ne lt le gt ge.
        pred: String,
        x: String,
        y: String,
    },
    /// Compile a .mir program into an instrumented container.
    Compile {
        #[command(flatten)]
        params: ParamArgs,
        /// Input program.
        input: String,
        /// Output container path (stdout when omitted).
        #[arg(short, long)]
        output: Option<String>,
        /// Pipeline: an+cfi, cfi, or dup:K.
        #[arg(long, default_value = "an+cfi")]
        pipeline: String,
        /// Seed for instruction ids and signatures.
        #[arg(long, default_value_t = 0xB1A5_0F5E)]
        seed: u64,
        /// Check placement policy.
        #[arg(long, value_enum, default_value_t = ChecksArg::Block)]
        checks: ChecksArg,
        /// Modulo lowering mode.
        #[arg(long = "mod", value_enum, default_value_t = ModArg::Umod)]
        mod_mode: ModArg,
        /// Branch on the false symbol instead of the true one.
        #[arg(long)]
        branch_on_false: bool,
        /// Accept AND/OR/XOR/SELECT slice boundaries with an encode step.
        #[arg(long)]
        allow_bitop_boundaries: bool,
    },
    /// Execute a compiled container, optionally injecting faults.
    Run {
        /// Container produced by `compile`.
        container: String,
        /// Function to run (default: first function).
        #[arg(long)]
        func: Option<String>,
        /// Initial state: rN=V or mem:ADDR=V (repeatable).
        #[arg(long = "input")]
        inputs: Vec<String>,
        /// Faults: regflip@I=rN^0xMASK, branchforce@I=true|false, skip@I.
        #[arg(long = "fault")]
        faults: Vec<String>,
        /// Instruction budget.
        #[arg(long, default_value_t = 10_000_000)]
        fuel: u64,
        /// Check code-word validity at protected branches (fault-free runs).
        #[arg(long)]
        assert_an: bool,
    },
    /// Run a fault-injection campaign over a container or a bare
    /// comparison trace.
    Campaign {
        #[command(flatten)]
        params: ParamArgs,
        /// Container to attack (omit when using --trace).
        container: Option<String>,
        /// Attack a standalone encoded comparison: eq ne lt le gt ge.
        #[arg(long)]
        trace: Option<String>,
        /// Bit budget (exhaustive: all placements of 1..=BITS flips;
        /// Monte Carlo: exactly BITS flips per sample).
        #[arg(long, default_value_t = 3)]
        bits: u32,
        /// exhaustive or mc.
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
        /// Monte-Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Input pairs for exhaustive trace campaigns.
        #[arg(long, default_value_t = 10)]
        pairs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads (results are identical for any value).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Evaluation bound for exhaustive mode.
        #[arg(long, default_value_t = 200_000_000)]
        bound: u64,
        /// Function to attack in a container.
        #[arg(long)]
        func: Option<String>,
        /// Initial state for container campaigns: rN=V or mem:ADDR=V.
        #[arg(long = "input")]
        inputs: Vec<String>,
        /// Fault models for container campaigns.
        #[arg(long, default_value = "regflip,branchforce,skip")]
        models: String,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Tabulate containers and campaign reports side by side.
    Report {
        /// Container or campaign JSON files.
        #[arg(required = true)]
        files: Vec<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ChecksArg {
    Block,
    Exit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModArg {
    Umod,
    Mls,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum ModeArg {
    Exhaustive,
    Mc,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
    fn compile(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPILE,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_u32(s: &str) -> Result<u32, CliError> {
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    parsed.map_err(|_| CliError::usage(format!("`{s}` is not a 32-bit integer")))
}

fn parse_pred(s: &str) -> Result<Predicate, CliError> {
    Predicate::from_str(s).map_err(CliError::usage)
}

fn dispatch(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Encode { params, values } => {
            let p = params.params()?;
            for v in values {
                let n = parse_u32(&v)?;
                let w = p.encode(n).map_err(|e| CliError::usage(e.to_string()))?;
                println!("{}", w.raw());
            }
            Ok(EXIT_OK)
        }
        Command::Check { params, words } => {
            let p = params.params()?;
            let mut all_valid = true;
            for w in words {
                let raw = parse_u32(&w)?;
                match p.decode(AnWord(raw)) {
                    Ok(n) => println!("valid (n={n})"),
                    Err(_) => {
                        println!("invalid");
                        all_valid = false;
                    }
                }
            }
            Ok(if all_valid { EXIT_OK } else { EXIT_INTEGRITY })
        }
        Command::Compare { params, pred, x, y } => {
            let p = params.params()?;
            let pred = parse_pred(&pred)?;
            let xn = parse_u32(&x)?;
            let yn = parse_u32(&y)?;
            let xe = p.encode(xn).map_err(|e| CliError::usage(e.to_string()))?;
            let ye = p.encode(yn).map_err(|e| CliError::usage(e.to_string()))?;
            let sym = encoded_compare(pred, xe, ye, &p);
            let class = classify_symbol(sym, pred, &p);
            let pair = symbols_for(pred, &p);
            println!(
                "cond = {} ({:?}; true = {}, false = {})",
                sym.value(),
                class,
                pair.true_symbol.value(),
                pair.false_symbol.value()
            );
            Ok(if class == SymbolClass::Invalid {
                EXIT_INTEGRITY
            } else {
                EXIT_OK
            })
        }
        Command::Compile {
            params,
            input,
            output,
            pipeline,
            seed,
            checks,
            mod_mode,
            branch_on_false,
            allow_bitop_boundaries,
        } => {
            let p = params.params()?;
            let text = fs::read_to_string(&input)
                .map_err(|e| CliError::usage(format!("cannot read {input}: {e}")))?;
            let prog = parse(&text).map_err(|e| CliError::compile(format!("{input}:{e}")))?;
            let kind = parse_pipeline(&pipeline)?;
            let cfg = PipelineConfig {
                kind,
                params: p,
                seed,
                policy: match checks {
                    ChecksArg::Block => CheckPolicy::EveryBlock,
                    ChecksArg::Exit => CheckPolicy::FunctionExit,
                },
                mod_mode: match mod_mode {
                    ModArg::Umod => ModMode::Umod,
                    ModArg::Mls => ModMode::Mls,
                },
                branch_on_false,
                bitop_boundaries: allow_bitop_boundaries,
            };
            let out = build(&prog, &cfg).map_err(|e| CliError::compile(e.to_string()))?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            // Cycle figure from a fault-free run of the first function on
            // default inputs, when it completes.
            let cycles = prog.functions.first().and_then(|f| {
                let opts = ExecOptions {
                    initial_cfi: out.meta.initial_state(&f.name).unwrap_or(0),
                    ..Default::default()
                };
                interpret(
                    &out.program,
                    &f.name,
                    &Inputs::default(),
                    &FaultPlan::default(),
                    &opts,
                )
                .ok()
                .filter(|r| matches!(r.status, HaltStatus::Returned(_)))
                .map(|r| r.cycles)
            });
            let container = Container::from_build(&out, &cfg, cycles);
            let json = container.to_json();
            match output {
                Some(path) => fs::write(&path, json)
                    .map_err(|e| CliError::usage(format!("cannot write {path}: {e}")))?,
                None => println!("{json}"),
            }
            Ok(EXIT_OK)
        }
        Command::Run {
            container,
            func,
            inputs,
            faults,
            fuel,
            assert_an,
        } => {
            let c = load_container(&container)?;
            let prog = c
                .parse_program()
                .map_err(|e| CliError::compile(format!("container program: {e}")))?;
            let diags = mir::validate(
                &prog,
                &mir::ValidateOptions {
                    allow_cfi: true,
                    params: c.params,
                },
            );
            if mir::has_errors(&diags) {
                let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
                return Err(CliError::compile(format!(
                    "container program is invalid:\n{}",
                    msgs.join("\n")
                )));
            }
            let func = match func {
                Some(f) => f,
                None => prog
                    .functions
                    .first()
                    .map(|f| f.name.clone())
                    .ok_or_else(|| CliError::compile("container program has no functions"))?,
            };
            let ins = parse_inputs(&inputs)?;
            let mut opts = c.exec_options(&func, assert_an);
            opts.fuel = fuel;
            let plan = parse_faults(&faults)?;

            let (result, outcome) = if plan.faults.is_empty() {
                let r = interpret(&prog, &func, &ins, &plan, &opts)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                (r, None)
            } else {
                let ctx = RunContext::new(&prog, &func, ins, opts)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                let (class, r) = ctx
                    .inject(&plan)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                (r, Some(class))
            };

            println!("{}", run_json(&result, outcome));
            Ok(match result.status {
                HaltStatus::Returned(_) => EXIT_OK,
                HaltStatus::Trapped(_) => EXIT_INTEGRITY,
            })
        }
        Command::Campaign {
            params,
            container,
            trace,
            bits,
            mode,
            samples,
            pairs,
            seed,
            jobs,
            bound,
            func,
            inputs,
            models,
            format,
        } => {
            let result = run_campaign(
                params, container, trace, bits, mode, samples, pairs, seed, jobs, bound, func,
                inputs, models,
            )?;
            match format {
                FormatArg::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&result).expect("report serializes")
                ),
                FormatArg::Csv => print!("{}", report::campaign_csv(&result)),
                FormatArg::Text => print!("{}", report::campaign_csv(&result)),
            }
            Ok(EXIT_OK)
        }
        Command::Report { files, format } => {
            let text = report::build_report(&files, format == FormatArg::Csv)?;
            print!("{text}");
            Ok(EXIT_OK)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_campaign(
    params: ParamArgs,
    container: Option<String>,
    trace: Option<String>,
    bits: u32,
    mode: ModeArg,
    samples: u64,
    pairs: u64,
    seed: u64,
    jobs: usize,
    bound: u64,
    func: Option<String>,
    inputs: Vec<String>,
    models: String,
) -> Result<CampaignResult, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot build worker pool: {e}")))?;

    match (container, trace) {
        (None, Some(pred)) => {
            let p = params.params()?;
            let pred = parse_pred(&pred)?;
            pool.install(|| match mode {
                ModeArg::Exhaustive => trace_exhaustive_campaign(pred, p, bits, pairs, seed, bound)
                    .map_err(|e| CliError::usage(e.to_string())),
                ModeArg::Mc => Ok(trace_monte_carlo(pred, p, bits, samples, seed)),
            })
        }
        (Some(path), None) => {
            if mode == ModeArg::Exhaustive {
                return Err(CliError::usage(
                    "exhaustive mode applies to --trace campaigns; container campaigns are \
                     Monte Carlo",
                ));
            }
            let c = load_container(&path)?;
            let prog = c
                .parse_program()
                .map_err(|e| CliError::compile(format!("container program: {e}")))?;
            let func = match func {
                Some(f) => f,
                None => prog
                    .functions
                    .first()
                    .map(|f| f.name.clone())
                    .ok_or_else(|| CliError::compile("container program has no functions"))?,
            };
            let ins = parse_inputs(&inputs)?;
            let opts = c.exec_options(&func, false);
            let mix = parse_models(&models)?;
            let ctx = RunContext::new(&prog, &func, ins, opts)
                .map_err(|e| CliError::usage(e.to_string()))?;
            pool.install(|| {
                program_monte_carlo(&ctx, mix, bits, samples, seed)
                    .map_err(|e| CliError::usage(e.to_string()))
            })
        }
        (Some(_), Some(_)) => Err(CliError::usage(
            "give either a container or --trace, not both",
        )),
        (None, None) => Err(CliError::usage("give a container path or --trace PRED")),
    }
}

fn parse_pipeline(s: &str) -> Result<PipelineKind, CliError> {
    match s {
        "an+cfi" => Ok(PipelineKind::AnCfi),
        "cfi" => Ok(PipelineKind::CfiOnly),
        _ => {
            if let Some(k) = s.strip_prefix("dup:") {
                let k: u32 = k
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad duplication factor in `{s}`")))?;
                if k == 0 {
                    return Err(CliError::usage("duplication factor must be >= 1"));
                }
                Ok(PipelineKind::Dup(k))
            } else {
                Err(CliError::usage(format!(
                    "unknown pipeline `{s}` (expected an+cfi, cfi, or dup:K)"
                )))
            }
        }
    }
}

fn parse_inputs(specs: &[String]) -> Result<Inputs, CliError> {
    let mut ins = Inputs::default();
    for s in specs {
        let (target, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("bad input `{s}` (want rN=V or mem:A=V)")))?;
        let value = parse_u32(value)?;
        if let Some(addr) = target.strip_prefix("mem:") {
            ins.mem.push((parse_u32(addr)?, value));
        } else if let Some(reg) = target.strip_prefix('r') {
            let idx: u32 = reg
                .parse()
                .map_err(|_| CliError::usage(format!("bad register in `{s}`")))?;
            ins.regs.push((Reg(idx), value));
        } else {
            return Err(CliError::usage(format!("bad input target `{target}`")));
        }
    }
    Ok(ins)
}

fn parse_faults(specs: &[String]) -> Result<FaultPlan, CliError> {
    let mut plan = FaultPlan::default();
    for s in specs {
        let (kind, rest) = s
            .split_once('@')
            .ok_or_else(|| CliError::usage(format!("bad fault `{s}` (want model@index...)")))?;
        let fault = match kind {
            "skip" => FaultSpec::InstrSkip {
                at: parse_index(rest)?,
            },
            "branchforce" => {
                let (at, dir) = rest.split_once('=').ok_or_else(|| {
                    CliError::usage(format!("bad fault `{s}` (want branchforce@I=true|false)"))
                })?;
                let taken_true = match dir {
                    "true" | "taken" => true,
                    "false" | "nottaken" => false,
                    _ => {
                        return Err(CliError::usage(format!(
                            "bad direction `{dir}` (want true or false)"
                        )))
                    }
                };
                FaultSpec::BranchForce {
                    at: parse_index(at)?,
                    taken_true,
                }
            }
            "regflip" => {
                let (at, payload) = rest.split_once('=').ok_or_else(|| {
                    CliError::usage(format!("bad fault `{s}` (want regflip@I=rN^0xMASK)"))
                })?;
                let (reg, mask) = payload.split_once('^').ok_or_else(|| {
                    CliError::usage(format!("bad fault `{s}` (want regflip@I=rN^0xMASK)"))
                })?;
                let idx: u32 = reg
                    .strip_prefix('r')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| CliError::usage(format!("bad register in `{s}`")))?;
                FaultSpec::RegFlip {
                    at: parse_index(at)?,
                    reg: Reg(idx),
                    mask: parse_u32(mask)?,
                }
            }
            other => {
                return Err(CliError::usage(format!(
                    "unknown fault model `{other}` (regflip, branchforce, skip)"
                )))
            }
        };
        plan.faults.push(fault);
    }
    Ok(plan)
}

fn parse_index(s: &str) -> Result<u64, CliError> {
    s.parse()
        .map_err(|_| CliError::usage(format!("bad dynamic index `{s}`")))
}

fn parse_models(s: &str) -> Result<ModelMix, CliError> {
    let mut mix = ModelMix {
        reg_flip: false,
        branch_force: false,
        instr_skip: false,
    };
    for part in s.split(',') {
        match part.trim() {
            "regflip" => mix.reg_flip = true,
            "branchforce" => mix.branch_force = true,
            "skip" => mix.instr_skip = true,
            other => return Err(CliError::usage(format!("unknown fault model `{other}`"))),
        }
    }
    Ok(mix)
}

fn load_container(path: &str) -> Result<Container, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {path}: {e}")))?;
    Container::from_json(&text)
        .map_err(|e| CliError::compile(format!("{path} is not a valid container: {e}")))
}

fn run_json(result: &mir::ExecResult, outcome: Option<OutcomeClass>) -> String {
    let mut doc = serde_json::json!({
        "status": match result.status {
            HaltStatus::Returned(_) => "returned",
            HaltStatus::Trapped(_) => "trapped",
        },
        "cycles": result.cycles,
        "trace_len": result.trace.len(),
        "mem_digest": format!("{:#018x}", result.mem_digest),
    });
    match result.status {
        HaltStatus::Returned(v) => doc["return"] = v.into(),
        HaltStatus::Trapped(kind) => {
            doc["trap"] = serde_json::to_value(kind).expect("trap kind serializes")
        }
    }
    if let Some(class) = outcome {
        doc["outcome"] = serde_json::to_value(class).expect("outcome serializes");
    }
    serde_json::to_string_pretty(&doc).expect("run report serializes")
}
