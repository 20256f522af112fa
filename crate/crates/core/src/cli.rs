//! Command-line front end.
//!
//! Exit codes: 0 pass or success, 1 property violated (trace emitted),
//! 2 bound or resource limit hit, 3 usage, parse or type error,
//! 4 infrastructure error (I/O, SPIN).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use crate::explorer::{self, CheckConfig, ExploreError, Verdict};
use crate::integration::{self, ConsistencyStatus, IntegrationError, InterfaceStub, LearnConfig, ReplayOutcome};
use crate::kernel::{EnvPolicy, Kernel, KernelConfig, KernelError};
use crate::promela::{self, CrosscheckError, EmitOptions};
use crate::scl::{self, Design, DesignAst};
use crate::testgen::{self, AbstractTestCase, ConcretizationMap, Criterion};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_BOUND: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_INFRA: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "scver", version, about = "Verification toolchain for SystemC-style component models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Env {
    MostGeneral,
    ClosedDefault,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Simulation time horizon.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    max_time: u32,
    /// Delta cycles allowed per time point.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    max_delta: u32,
    /// Maximum number of stored states.
    #[arg(long, default_value_t = 5_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    state_cap: u64,
    /// Environment for open inputs (default: most-general, closed-default for simulate).
    #[arg(long, value_enum)]
    env: Option<Env>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn check_config(&self, default_env: EnvPolicy) -> CheckConfig {
        CheckConfig {
            kernel: KernelConfig { max_time: self.max_time, max_delta: self.max_delta, ..KernelConfig::default() },
            env: match self.env {
                None => default_env,
                Some(Env::MostGeneral) => EnvPolicy::MostGeneral,
                Some(Env::ClosedDefault) => EnvPolicy::ClosedDefault,
            },
            state_cap: self.state_cap as usize,
            check_deadlock: true,
        }
    }

    fn learn_config(&self) -> LearnConfig {
        let c = self.check_config(EnvPolicy::MostGeneral);
        LearnConfig { kernel: c.kernel, state_cap: c.state_cap, cancel: None }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a property, or assertions and deadlock when none is named.
    Check {
        model: PathBuf,
        #[arg(long)]
        prop: Option<String>,
        /// Do not report deadlocks.
        #[arg(long)]
        no_deadlock: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Emit a Promela model.
    EmitPromela {
        model: PathBuf,
        /// Properties to include (default: all).
        #[arg(long)]
        prop: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the internal verdict with SPIN's.
    Crosscheck {
        model: PathBuf,
        #[arg(long)]
        prop: Option<String>,
        /// SPIN executable (default: $SCVER_SPIN).
        #[arg(long)]
        spin: Option<PathBuf>,
        /// Directory for SPIN's artifacts (default: a fresh directory under the system temp dir).
        #[arg(long)]
        scratch: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Learn an interface stub for one instance.
    Stub {
        model: PathBuf,
        #[arg(long)]
        instance: String,
        #[arg(short, long, default_value_t = integration::DEFAULT_K)]
        k: usize,
        /// History window length.
        #[arg(long, default_value_t = integration::DEFAULT_H)]
        history: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check that a stub over-approximates its component up to depth k.
    Consistency {
        model: PathBuf,
        #[arg(long)]
        instance: String,
        #[arg(long)]
        stub: PathBuf,
        #[arg(short, long, default_value_t = integration::DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Verify a property with instances replaced by stubs, replaying any
    /// counterexample on the concrete system.
    Compose {
        model: PathBuf,
        #[arg(long, required = true)]
        stub: Vec<PathBuf>,
        #[arg(long)]
        prop: String,
        #[arg(long)]
        no_replay: bool,
        /// Do not report deadlocks.
        #[arg(long)]
        no_deadlock: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate abstract test cases.
    Testgen {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "statements,toggles")]
        criteria: Vec<Criterion>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Translate abstract tests into CSV scripts.
    Concretize {
        tests: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        stimulus: Option<PathBuf>,
        #[arg(long)]
        expect: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run one maximal simulation and print its observations.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// A failed command: exit code plus diagnostic.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<ExploreError> for Failure {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::StateCap { .. } => fail(EXIT_BOUND, e.to_string()),
            ExploreError::UnknownProperty(_) => fail(EXIT_USAGE, e.to_string()),
        }
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::Explore(x) => x.into(),
            IntegrationError::StateCap { .. } | IntegrationError::Kernel(_) => fail(EXIT_BOUND, e.to_string()),
            IntegrationError::Cancelled => fail(EXIT_INFRA, e.to_string()),
            _ => fail(EXIT_USAGE, e.to_string()),
        }
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        fail(EXIT_BOUND, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_INFRA, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_INFRA, format!("{}: {e}", path.display())))
}

fn load_ast(path: &Path) -> Result<DesignAst, Failure> {
    let text = read(path)?;
    scl::parse(&text).map_err(|e| fail(EXIT_USAGE, format!("{}:{e}", path.display())))
}

fn load(path: &Path) -> Result<(DesignAst, Design), Failure> {
    let ast = load_ast(path)?;
    let d = scl::elaborate(&ast).map_err(|e| fail(EXIT_USAGE, format!("{}:{e}", path.display())))?;
    Ok((ast, d))
}

fn load_stub(path: &Path) -> Result<InterfaceStub, Failure> {
    InterfaceStub::from_json_str(&read(path)?).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn verdict_code(v: &Verdict) -> i32 {
    if v.status.is_violation() {
        EXIT_VIOLATION
    } else if v.status.is_bound() {
        EXIT_BOUND
    } else {
        EXIT_PASS
    }
}

fn json_text(j: &Json) -> String {
    let mut s = serde_json::to_string_pretty(j).expect("JSON values serialize");
    s.push('\n');
    s
}

fn plain_verdict(d: &Design, v: &Verdict) -> String {
    let mut s = format!("status: {:?}\n", v.status);
    if let Some(p) = &v.property {
        s += &format!("property: {p}\n");
    }
    if let Some(x) = &v.detail {
        s += &format!("detail: {x}\n");
    }
    s += &format!("states: {}, transitions: {}\n", v.stats.states_stored, v.stats.transitions);
    if let Some(t) = &v.trace {
        s += &format!("trace ({} steps):\n", t.len());
        let names = d.obs_names();
        let types = d.obs_types();
        for (i, st) in t.steps.iter().enumerate() {
            let mark = if t.loop_start == Some(i) { " <- loop" } else { "" };
            let vals: Vec<String> =
                st.observations.iter().enumerate().map(|(j, v)| format!("{}={}", names[j], types[j].render(*v))).collect();
            s += &format!(
                "  {i:>3} t={} d={} {}{mark}\n      {}\n",
                st.time,
                st.delta,
                explorer::choice_json(d, &st.choice),
                vals.join(" ")
            );
        }
    }
    s
}

/// Output text plus exit code.
type Outcome = Result<(String, i32), Failure>;

fn execute(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Check { model, prop, no_deadlock, common } => {
            let (_, d) = load(&model)?;
            let mut cfg = common.check_config(EnvPolicy::MostGeneral);
            cfg.check_deadlock = !no_deadlock;
            let v = match &prop {
                Some(p) => explorer::check_property(&d, p, &cfg)?,
                None => explorer::check_design(&d, &cfg)?,
            };
            let text = match common.format {
                Format::Json => json_text(&v.to_json(&d, &cfg)),
                Format::Plain => plain_verdict(&d, &v),
            };
            Ok((text, verdict_code(&v)))
        }
        Cmd::EmitPromela { model, prop, output, common } => {
            let (_, d) = load(&model)?;
            let cfg = common.check_config(EnvPolicy::MostGeneral);
            let opts = EmitOptions { kernel: cfg.kernel, env: cfg.env };
            let names: Vec<&str> = prop.iter().map(String::as_str).collect();
            let sel = (!names.is_empty()).then_some(names.as_slice());
            let pml = promela::emit_promela(&d, sel, &opts).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
            match output {
                Some(p) => {
                    write_file(&p, &pml)?;
                    Ok((String::new(), EXIT_PASS))
                }
                None => Ok((pml, EXIT_PASS)),
            }
        }
        Cmd::Crosscheck { model, prop, spin, scratch, common } => {
            let (_, d) = load(&model)?;
            let cfg = common.check_config(EnvPolicy::MostGeneral);
            let spin = spin
                .or_else(promela::spin_from_env)
                .ok_or_else(|| fail(EXIT_INFRA, format!("no SPIN executable: pass --spin or set {}", promela::SPIN_ENV)))?;
            let scratch = scratch.unwrap_or_else(|| std::env::temp_dir().join(format!("scver-spin-{}", std::process::id())));
            let r = promela::spin_crosscheck(&d, prop.as_deref(), &spin, &scratch, &cfg).map_err(|e| match e {
                CrosscheckError::Emit(_) => fail(EXIT_USAGE, e.to_string()),
                CrosscheckError::Explore(x) => x.into(),
                _ => fail(EXIT_INFRA, e.to_string()),
            })?;
            let code = if r.agree { EXIT_PASS } else { EXIT_VIOLATION };
            let text = match common.format {
                Format::Json => json_text(&serde_json::to_value(&r).expect("report serializes")),
                Format::Plain => format!(
                    "internal: {:?}\nspin: {:?}\n{}\n",
                    r.internal,
                    r.spin,
                    if r.agree { "agree" } else { "DISAGREE" }
                ),
            };
            Ok((text, code))
        }
        Cmd::Stub { model, instance, k, history, output, common } => {
            let ast = load_ast(&model)?;
            let stub = integration::learn_stub(&ast, &instance, k, history, &common.learn_config())?;
            let json = stub.to_json_string();
            let summary = format!(
                "stub for {instance}: {} states, {} transitions, {} letters, {}\n",
                stub.states.len(),
                stub.transitions.len(),
                stub.letters.len(),
                if stub.saturated { "saturated" } else { "NOT saturated within k" }
            );
            let text = match (&output, common.format) {
                (Some(p), f) => {
                    write_file(p, &json)?;
                    if f == Format::Plain {
                        summary
                    } else {
                        String::new()
                    }
                }
                (None, Format::Json) => json,
                (None, Format::Plain) => summary,
            };
            Ok((text, EXIT_PASS))
        }
        Cmd::Consistency { model, instance, stub, k, common } => {
            let ast = load_ast(&model)?;
            let s = load_stub(&stub)?;
            let r = integration::check_consistency(&ast, &instance, &s, k, &common.learn_config())?;
            let code = if r.status == ConsistencyStatus::Pass { EXIT_PASS } else { EXIT_VIOLATION };
            let j = r.to_json(&s.alphabet);
            let text = match common.format {
                Format::Json => json_text(&j),
                Format::Plain => {
                    let mut t = format!("consistency: {}\n", j["status"].as_str().unwrap_or("?"));
                    if let Some(w) = j["witness"].as_array() {
                        t += "witness:\n";
                        for l in w {
                            t += &format!("  {}\n", l.as_str().unwrap_or(""));
                        }
                    }
                    t
                }
            };
            Ok((text, code))
        }
        Cmd::Compose { model, stub, prop, no_replay, no_deadlock, common } => {
            let (ast, concrete) = load(&model)?;
            let stubs: Vec<InterfaceStub> = stub.iter().map(|p| load_stub(p)).collect::<Result<_, _>>()?;
            let mut cfg = common.check_config(EnvPolicy::MostGeneral);
            cfg.check_deadlock = !no_deadlock;
            let c = integration::compose_and_verify(&ast, &stubs, &prop, &cfg)?;
            let mut report = json!({ "verdict": c.verdict.to_json(&c.design, &cfg) });
            let mut plain = plain_verdict(&c.design, &c.verdict);
            if let (false, Some(t)) = (no_replay, &c.verdict.trace) {
                let target = integration::select_property(&ast, &prop)
                    .ok()
                    .and_then(|a| scl::elaborate(&a).ok())
                    .unwrap_or(concrete);
                let outcome = integration::replay_on_concrete(&c.design, &target, t, &cfg, &common.learn_config())?;
                report["replay"] = outcome.to_json(&target);
                plain += match outcome {
                    ReplayOutcome::Confirmed(_) => "replay: confirmed on the concrete system\n".to_string(),
                    ReplayOutcome::Spurious(dv) => format!("replay: spurious at step {}: {}\n", dv.step, dv.reason),
                }
                .as_str();
            }
            let text = match common.format {
                Format::Json => json_text(&report),
                Format::Plain => plain,
            };
            Ok((text, verdict_code(&c.verdict)))
        }
        Cmd::Testgen { model, criteria, output, common } => {
            let (_, d) = load(&model)?;
            let cfg = common.check_config(EnvPolicy::MostGeneral);
            let k = Kernel::new(&d, cfg.kernel.clone(), cfg.env);
            let goals = testgen::enumerate_goals(&d, &criteria);
            let g = testgen::generate_tests(&k, &goals, cfg.state_cap);
            let json = json_text(&g.to_json());
            let summary = format!("{} goals, {} tests, {} uncovered\n", goals.len(), g.tests.len(), g.uncovered.len())
                + &g.uncovered.iter().map(|u| format!("  uncovered {}: {}\n", u.goal, u.reason)).collect::<String>();
            let text = match (&output, common.format) {
                (Some(p), f) => {
                    write_file(p, &json)?;
                    if f == Format::Plain {
                        summary
                    } else {
                        String::new()
                    }
                }
                (None, Format::Json) => json,
                (None, Format::Plain) => summary,
            };
            Ok((text, EXIT_PASS))
        }
        Cmd::Concretize { tests, map, stimulus, expect, format } => {
            let tj: Json = serde_json::from_str(&read(&tests)?)
                .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", tests.display())))?;
            let cases: Vec<AbstractTestCase> = serde_json::from_value(tj.get("tests").cloned().unwrap_or(tj.clone()))
                .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", tests.display())))?;
            let m: ConcretizationMap = serde_json::from_str(&read(&map)?)
                .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", map.display())))?;
            let out = testgen::concretize(&cases, &m).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
            if let Some(p) = &stimulus {
                write_file(p, &out.stimulus)?;
            }
            if let Some(p) = &expect {
                write_file(p, &out.expectations)?;
            }
            let text = match format {
                Format::Json if stimulus.is_none() || expect.is_none() => {
                    json_text(&json!({ "stimulus": out.stimulus, "expectations": out.expectations }))
                }
                Format::Json => String::new(),
                Format::Plain => format!("# stimulus\n{}# expectations\n{}", out.stimulus, out.expectations),
            };
            Ok((text, EXIT_PASS))
        }
        Cmd::Simulate { model, steps, common } => {
            let (_, d) = load(&model)?;
            let cfg = common.check_config(EnvPolicy::ClosedDefault);
            let k = Kernel::new(&d, cfg.kernel.clone(), cfg.env);
            let (path, bound) = explorer::simulate(&k, steps);
            let names = d.obs_names();
            let types = d.obs_types();
            let obs: Vec<Json> = path
                .iter()
                .map(|(c, s)| {
                    let o = k.observe(s);
                    let vals: serde_json::Map<String, Json> =
                        o.values.iter().enumerate().map(|(i, v)| (names[i].to_string(), types[i].to_json(*v))).collect();
                    json!({ "choice": explorer::choice_json(&d, c), "time": o.time, "delta": o.delta, "phase": o.phase, "values": vals })
                })
                .collect();
            let faulted = path.last().is_some_and(|(_, s)| s.fault.is_some());
            let code = if faulted {
                EXIT_VIOLATION
            } else if bound.is_some() {
                EXIT_BOUND
            } else {
                EXIT_PASS
            };
            let text = match common.format {
                Format::Json => json_text(&json!({
                    "config": cfg,
                    "observations": obs,
                    "bound": bound.as_ref().map(|b| b.to_string()),
                    "fault": faulted,
                })),
                Format::Plain => {
                    let mut t = String::new();
                    for o in &obs {
                        let vals: Vec<String> = o["values"]
                            .as_object()
                            .map(|m| m.iter().map(|(k, v)| format!("{k}={v}")).collect())
                            .unwrap_or_default();
                        t += &format!("t={} d={} {}\n", o["time"], o["delta"], vals.join(" "));
                    }
                    if let Some(b) = &bound {
                        t += &format!("stopped: {b}\n");
                    }
                    t
                }
            };
            Ok((text, code))
        }
    }
}

/// Runs the CLI on `args` (program name first), writing results to `out`
/// and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.cmd) {
        Ok((text, code)) => {
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_INFRA;
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> ! {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code)
}
