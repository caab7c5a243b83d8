//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the model fails a semantic stage
//! (requirements, translation, scheduling, simulation or comparison), 2 on
//! usage, schema and file errors. Failures are reported as
//! `error[<stage>]: <message>` on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::codegen::{emit_code, emit_harness, CodegenOptions};
use crate::interpreter::{compare_traces, run_mil, stimulus, CompareReport, Trace};
use crate::model::{load_model, save_model, BlockModel, Rational};
use crate::normalizer::Depth;
use crate::pipeline::{self, Compiled, PipelineError};
use crate::sdf::export_dot;
use crate::validator::{check_requirements, report_json, report_text};

#[derive(Debug, Parser)]
#[command(name = "mbd2sdf", version, about = "Multirate block diagrams to synchronous dataflow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report every reason the model cannot be translated.
    Check(Common),
    /// Normalize and translate; writes model, graph, DOT and report files.
    Translate(Common),
    /// Print the repetition vector and a static schedule.
    Schedule(Common),
    /// Simulate the block model and print its output trace.
    SimulateMil(Common),
    /// Simulate the dataflow graph and print its output trace.
    SimulateSil(Common),
    /// Compare block-model and dataflow simulations.
    Verify(Common),
    /// Emit C sources and a test harness.
    Codegen(Common),
    /// Print the dataflow graph in Graphviz format.
    ExportDot(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model document (JSON).
    pub model: PathBuf,
    /// Flattening depth: a level number or "full".
    #[arg(long, default_value = "full", value_parser = parse_depth)]
    pub depth: Depth,
    /// Base steps to simulate.
    #[arg(long, default_value_t = 100)]
    pub steps: u64,
    /// Schedule iterations to simulate; overrides --steps.
    #[arg(long)]
    pub periods: Option<u64>,
    /// Relative tolerance for f64 signals.
    #[arg(long, default_value_t = 1e-12, value_parser = parse_tol)]
    pub tol: f64,
    /// Output directory (translate, codegen) or file (other commands).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the graph as DOT next to the other outputs.
    #[arg(long)]
    pub emit_dot: bool,
    /// Compile out the queue checks in generated code.
    #[arg(long)]
    pub no_asserts: bool,
    /// Reference trace (CSV) that the dataflow simulation must also match.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

fn parse_depth(s: &str) -> Result<Depth, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(Depth::Full);
    }
    s.parse::<usize>()
        .map(Depth::Level)
        .map_err(|_| format!("expected a non-negative integer or \"full\", got {s:?}"))
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t >= 0.0 => Ok(t),
        _ => Err(format!("tolerance must be a non-negative number, got {s:?}")),
    }
}

/// A failure with the stage it belongs to and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            stage: "io",
            code: 2,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn semantic(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            code: 1,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Model(_) | PipelineError::Io(_) => 2,
            _ => 1,
        };
        Failure {
            stage: e.stage(),
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error[{}]: {}", f.stage, f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<BlockModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    load_model(&text).map_err(|e| Failure {
        stage: "load",
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

/// Prints to stdout, or writes to `--out` when it is given.
fn deliver(c: &Common, out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(p) => write_file(p, text),
        None => emit(out, text),
    }
}

fn steps_for(c: &Common, compiled: &Compiled) -> u64 {
    match c.periods {
        Some(n) => n * compiled.iteration_steps(),
        None => c.steps,
    }
}

fn trace_text(c: &Common, t: &Trace) -> String {
    if c.json {
        format!("{}\n", serde_json::to_string_pretty(&t.to_json()).expect("serializable"))
    } else {
        t.to_csv()
    }
}

fn compare_text(r: &CompareReport, what: &str) -> String {
    match &r.first_divergence {
        None => format!("{what}: pass ({} samples)\n", r.samples),
        Some(d) => format!(
            "{what}: FAIL at {} t={} element {}: {} vs {}\n",
            d.signal, d.time, d.element, d.left, d.right
        ),
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Check(c) => {
            let m = load(&c.model)?;
            let v = check_requirements(&m, c.depth);
            let text = if c.json {
                format!("{}\n", report_json(&v))
            } else if v.is_empty() {
                "ok: no violations\n".to_string()
            } else {
                report_text(&v)
            };
            deliver(c, out, &text)?;
            Ok(if v.is_empty() { 0 } else { 1 })
        }
        Command::Translate(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let name = &compiled.graph.name;
            let files = [
                (format!("{name}.normalized.json"), save_model(&compiled.normalized.model)),
                (
                    format!("{name}.sdfg.json"),
                    serde_json::to_string_pretty(&compiled.graph.to_json()).expect("serializable") + "\n",
                ),
                (format!("{name}.dot"), export_dot(&compiled.graph)),
                (
                    format!("{name}.report.json"),
                    serde_json::to_string_pretty(&compiled.report).expect("serializable") + "\n",
                ),
                (format!("{name}.provenance.json"), compiled.normalized.provenance_json() + "\n"),
            ];
            for (f, text) in &files {
                write_file(&dir.join(f), text)?;
            }
            let r = &compiled.report;
            let text = if c.json {
                let names: Vec<&String> = files.iter().map(|f| &f.0).collect();
                format!("{}\n", json!({"files": names, "report": r}))
            } else {
                let mut s = format!(
                    "{} actors, {} channels ({} control, {} event), {} replicated ports\n",
                    r.actors, r.channels, r.control_channels, r.event_channels, r.replicated_ports
                );
                for (f, _) in &files {
                    s.push_str(&format!("wrote {}\n", dir.join(f).display()));
                }
                s
            };
            emit(out, &text)?;
            Ok(0)
        }
        Command::Schedule(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            let text = if c.json {
                format!(
                    "{}\n",
                    json!({
                        "repetition": compiled.repetition,
                        "schedule": compiled.schedule.firings,
                        "peak": compiled.schedule.peak,
                        "iteration_steps": compiled.iteration_steps(),
                    })
                )
            } else {
                let mut s = String::from("repetition vector:\n");
                for (a, q) in &compiled.repetition {
                    s.push_str(&format!("  {a} {q}\n"));
                }
                s.push_str(&format!("schedule: {}\n", compiled.schedule.render()));
                s.push_str(&format!("base steps per iteration: {}\n", compiled.iteration_steps()));
                s
            };
            deliver(c, out, &text)?;
            maybe_dot(c, &compiled)?;
            Ok(0)
        }
        Command::SimulateMil(c) => {
            let m = load(&c.model)?;
            let steps = match c.periods {
                Some(_) => steps_for(c, &pipeline::compile(&m, c.depth)?),
                None => c.steps,
            };
            let t = run_mil(&m, steps).map_err(PipelineError::from)?;
            deliver(c, out, &trace_text(c, &t))?;
            Ok(0)
        }
        Command::SimulateSil(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            let t = compiled.simulate(steps_for(c, &compiled)).map_err(PipelineError::from)?;
            deliver(c, out, &trace_text(c, &t))?;
            maybe_dot(c, &compiled)?;
            Ok(0)
        }
        Command::Verify(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            let steps = steps_for(c, &compiled);
            let v = pipeline::verify(&m, c.depth, steps, c.tol)?;
            let mut reports = vec![("mil-vs-sil", v.report)];
            if let Some(path) = &c.golden {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                let golden = Trace::from_csv(&text).map_err(|e| Failure::io(path, e))?;
                let r = compare_traces(&golden, &v.sil, c.tol)
                    .map_err(|e| Failure::semantic("compare", format!("golden trace: {e}")))?;
                reports.push(("golden-vs-sil", r));
            }
            let pass = reports.iter().all(|(_, r)| r.pass);
            let text = if c.json {
                let list: Vec<_> = reports
                    .iter()
                    .map(|(w, r)| json!({"comparison": w, "report": r}))
                    .collect();
                format!("{}\n", json!({"pass": pass, "steps": steps, "comparisons": list}))
            } else {
                reports.iter().map(|(w, r)| compare_text(r, w)).collect()
            };
            deliver(c, out, &text)?;
            maybe_dot(c, &compiled)?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Codegen(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            let opts = CodegenOptions {
                no_asserts: c.no_asserts,
            };
            let mut bundle = emit_code(&compiled.graph, &compiled.schedule, opts)
                .map_err(|e| Failure::semantic("codegen", e.to_string()))?;
            let h = compiled.iteration_steps().max(1);
            let iterations = c.periods.unwrap_or_else(|| c.steps.div_ceil(h));
            let stim = harness_stimulus(&m, &compiled, iterations)?;
            let (name, text) = emit_harness(&compiled.graph, &stim, iterations)
                .map_err(|e| Failure::semantic("codegen", e.to_string()))?;
            bundle.files.insert(name, text);
            if c.emit_dot {
                bundle
                    .files
                    .insert(format!("{}.dot", compiled.graph.name), export_dot(&compiled.graph));
            }
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let written = bundle.write_to(&dir).map_err(|e| Failure::io(&dir, e))?;
            let text = if c.json {
                format!("{}\n", json!({"dir": dir.display().to_string(), "files": written, "iterations": iterations}))
            } else {
                written.iter().map(|f| format!("{}\n", dir.join(f).display())).collect()
            };
            emit(out, &text)?;
            Ok(0)
        }
        Command::ExportDot(c) => {
            let m = load(&c.model)?;
            let compiled = pipeline::compile(&m, c.depth)?;
            deliver(c, out, &export_dot(&compiled.graph))?;
            Ok(0)
        }
    }
}

/// Inport samples of the block-model simulation, keyed by the actor that
/// replaces each inport.
fn harness_stimulus(m: &BlockModel, c: &Compiled, iterations: u64) -> Result<Trace, Failure> {
    let steps = iterations * c.iteration_steps();
    let mut t = stimulus(m, steps).map_err(PipelineError::from)?;
    t.signals.retain(|k, _| c.graph.actor(k).is_some());
    let end = c.graph.base_step * Rational::from_integer(steps as i64);
    t.truncate(end);
    Ok(t)
}

fn maybe_dot(c: &Common, compiled: &Compiled) -> Result<(), Failure> {
    if !c.emit_dot {
        return Ok(());
    }
    let path = match &c.out {
        Some(p) => p.with_extension("dot"),
        None => PathBuf::from(format!("{}.dot", compiled.graph.name)),
    };
    write_file(&path, &export_dot(&compiled.graph))
}
