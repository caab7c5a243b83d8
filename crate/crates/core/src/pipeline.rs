//! End-to-end compilation: check, normalize, translate, schedule.

use thiserror::Error;

use crate::interpreter::{compare_traces, run_mil, run_sil, CompareReport, ShapeError, SimError, Trace};
use crate::model::{BlockModel, ModelError, Rational};
use crate::normalizer::{normalize, Depth, NormalizeError, NormalizedModel};
use crate::sdf::{build_schedule, repetition_vector, RepetitionVector, Schedule, SdfError, Sdfg};
use crate::translator::{translate, TranslateError, TranslationReport};
use crate::validator::{check_requirements, report_text, Violation};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{} requirement violation(s):\n{}", .0.len(), report_text(.0))]
    Requirements(Vec<Violation>),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Sdf(#[from] SdfError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{0}")]
    Io(String),
}

impl PipelineError {
    /// Short name of the stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Model(_) => "load",
            PipelineError::Requirements(_) => "check",
            PipelineError::Normalize(_) => "normalize",
            PipelineError::Translate(_) => "translate",
            PipelineError::Sdf(_) => "schedule",
            PipelineError::Sim(_) => "simulate",
            PipelineError::Shape(_) => "compare",
            PipelineError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub normalized: NormalizedModel,
    pub graph: Sdfg,
    pub report: TranslationReport,
    pub repetition: RepetitionVector,
    pub schedule: Schedule,
}

impl Compiled {
    /// Base steps covered by one schedule iteration.
    pub fn iteration_steps(&self) -> u64 {
        iteration_steps(&self.graph, &self.repetition)
    }

    /// Runs enough iterations to cover `steps` base steps and drops samples
    /// beyond them.
    pub fn simulate(&self, steps: u64) -> Result<Trace, SimError> {
        let h = self.iteration_steps().max(1);
        let mut t = run_sil(&self.graph, &self.schedule, steps.div_ceil(h))?;
        t.truncate(self.graph.base_step * Rational::from_integer(steps as i64));
        Ok(t)
    }
}

pub fn iteration_steps(g: &Sdfg, q: &RepetitionVector) -> u64 {
    g.actors
        .iter()
        .filter_map(|a| {
            let ticks = a.period? / g.base_step;
            ticks.is_integer().then(|| q[&a.id] * *ticks.numer() as u64)
        })
        .max()
        .unwrap_or(1)
}

pub fn check(m: &BlockModel, depth: Depth) -> Result<(), PipelineError> {
    let v = check_requirements(m, depth);
    if v.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Requirements(v))
    }
}

pub fn compile(m: &BlockModel, depth: Depth) -> Result<Compiled, PipelineError> {
    check(m, depth)?;
    let normalized = normalize(m, depth)?;
    let (graph, report) = translate(&normalized)?;
    let repetition = repetition_vector(&graph)?;
    let schedule = build_schedule(&graph, &repetition)?;
    Ok(Compiled {
        normalized,
        graph,
        report,
        repetition,
        schedule,
    })
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub mil: Trace,
    pub sil: Trace,
    pub report: CompareReport,
}

/// Simulates the model directly and through its dataflow graph over the
/// same number of base steps and compares the outputs.
pub fn verify(m: &BlockModel, depth: Depth, steps: u64, tol: f64) -> Result<Verification, PipelineError> {
    let c = compile(m, depth)?;
    let mil = run_mil(m, steps)?;
    let sil = c.simulate(steps)?;
    let report = compare_traces(&mil, &sil, tol)?;
    Ok(Verification { mil, sil, report })
}
