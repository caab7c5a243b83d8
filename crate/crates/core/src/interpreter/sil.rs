//! Token-level execution of an SDF graph along a static schedule.

use std::collections::{BTreeMap, VecDeque};

use crate::blocks::{self, State};
use crate::model::*;
use crate::sdf::{ActorKind, Schedule, Sdfg};

use super::{MilEngine, Signal, SimError, Trace};

struct Runtime {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    y: Vec<Token>,
    state: State,
    /// A stateful actor's update waits for the inputs of its next firing.
    pending: bool,
    prev: f64,
    firings: u64,
    body: Option<MilEngine>,
}

/// Executes actors in schedule order with FIFO channels.
pub struct SilEngine<'g> {
    g: &'g Sdfg,
    index: BTreeMap<&'g str, usize>,
    queues: Vec<VecDeque<Token>>,
    high_water: Vec<u64>,
    rt: Vec<Runtime>,
    trace: Trace,
}

impl<'g> SilEngine<'g> {
    pub fn new(g: &'g Sdfg) -> Result<Self, SimError> {
        let index: BTreeMap<&str, usize> =
            g.actors.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let mut rt = Vec::with_capacity(g.actors.len());
        let mut trace = Trace::default();
        for a in &g.actors {
            let body = match &a.body {
                Some(m) => Some(MilEngine::uniform(m)?),
                None => None,
            };
            let state = match &a.kind {
                ActorKind::Block(k) => blocks::initial_state(k, &a.block_outputs),
                ActorKind::EnableSource(_) => State::None,
            };
            if matches!(a.kind, ActorKind::Block(BlockKind::Outport)) {
                let spec = a.block_inputs[0];
                trace.signals.insert(a.id.clone(), Signal::new(spec.dtype, spec.width));
            }
            rt.push(Runtime {
                inputs: vec![usize::MAX; a.inputs.len()],
                outputs: vec![usize::MAX; a.outputs.len()],
                y: a.block_outputs.iter().map(SignalSpec::zero).collect(),
                state,
                pending: false,
                prev: 0.0,
                firings: 0,
                body,
            });
        }
        for (k, c) in g.channels.iter().enumerate() {
            let (Some(&s), Some(&d)) = (index.get(c.src.actor.as_str()), index.get(c.dst.actor.as_str()))
            else {
                return Err(SimError::Unsupported(c.id.clone(), "dangling channel".into()));
            };
            rt[s].outputs[c.src.port] = k;
            rt[d].inputs[c.dst.port] = k;
        }
        for (a, r) in g.actors.iter().zip(&rt) {
            if let Some(p) = r.inputs.iter().position(|&k| k == usize::MAX) {
                return Err(SimError::Unsupported(format!("{}:{}", a.id, p), "unconnected input".into()));
            }
        }
        let queues: Vec<VecDeque<Token>> = g
            .channels
            .iter()
            .map(|c| c.initial_values.iter().cloned().collect())
            .collect();
        let high_water = queues.iter().map(|q| q.len() as u64).collect();
        Ok(SilEngine {
            g,
            index,
            queues,
            high_water,
            rt,
            trace,
        })
    }

    /// Highest occupancy observed on each channel so far.
    pub fn high_water(&self) -> &[u64] {
        &self.high_water
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Fires every actor of one schedule iteration.
    pub fn run_iteration(&mut self, s: &Schedule) -> Result<(), SimError> {
        for id in &s.firings {
            let a = *self
                .index
                .get(id.as_str())
                .ok_or_else(|| SimError::Unsupported(id.clone(), "unknown actor".into()))?;
            self.fire(a)?;
        }
        Ok(())
    }

    pub fn fire(&mut self, a: usize) -> Result<(), SimError> {
        let actor = &self.g.actors[a];
        let mut data: Vec<Token> = actor.block_inputs.iter().map(SignalSpec::zero).collect();
        let mut enabled = true;
        for (p, port) in actor.inputs.iter().enumerate() {
            let k = self.rt[a].inputs[p];
            let q = &mut self.queues[k];
            if (q.len() as u64) < port.rate {
                return Err(SimError::Underflow {
                    channel: self.g.channels[k].id.clone(),
                    actor: actor.id.clone(),
                });
            }
            let mut last = None;
            for _ in 0..port.rate {
                last = q.pop_front();
            }
            let last = last.expect("rate is positive");
            if port.event {
                enabled = last[0] != 0.0;
            } else {
                data[port.block_port] = last;
            }
        }

        let r = &mut self.rt[a];
        let k = r.firings;
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        match &actor.kind {
            ActorKind::EnableSource(mode) => {
                let en = blocks::control_enable(*mode, data[0][0], enabled, &mut r.prev);
                r.y[0] = vec![if en { 1.0 } else { 0.0 }];
            }
            ActorKind::Block(BlockKind::Inport(p)) => {
                let spec = actor.block_outputs[0];
                let v = match &p.waveform {
                    Some(w) => w.sample(k, spec.width),
                    None => spec.zero(),
                };
                r.y[0] = v.into_iter().map(|x| spec.dtype.quantize(x)).collect();
            }
            ActorKind::Block(BlockKind::Outport) => {
                let period = actor.period.unwrap_or(self.g.base_step);
                let time = period * Rational::from_integer(k as i64);
                if enabled {
                    let sig = self.trace.signals.get_mut(&actor.id).expect("registered");
                    sig.samples.push((time, data[0].clone()));
                }
            }
            ActorKind::Block(kind) if kind.is_stateful() => {
                if r.pending {
                    blocks::state_update(kind, &mut r.state, &refs, &actor.block_outputs);
                }
                r.pending = enabled;
                if enabled {
                    r.y = blocks::state_output(kind, &r.state, &actor.block_outputs);
                }
            }
            ActorKind::Block(kind) if kind.is_subsystem() => {
                let body = r.body.as_mut().ok_or_else(|| {
                    SimError::Unsupported(actor.id.clone(), "subsystem without body".into())
                })?;
                let mode = kind.subsystem_mode().unwrap_or(SubsystemMode::Normal);
                let n = body.input_count();
                let run = if mode.is_control() {
                    let ctrl = data.get(n).map_or(0.0, |t| t[0]);
                    blocks::control_enable(mode, ctrl, enabled, &mut r.prev)
                } else {
                    enabled
                };
                if run {
                    for (i, v) in data.iter().take(n).enumerate() {
                        body.set_input(i, v.clone());
                    }
                    body.step();
                    r.y = (0..body.output_count()).map(|o| body.output(o)).collect();
                }
            }
            ActorKind::Block(kind) => {
                if enabled {
                    r.y = blocks::compute(kind, &refs, &actor.block_outputs);
                }
            }
        }
        r.firings += 1;

        for (p, port) in actor.outputs.iter().enumerate() {
            let k = self.rt[a].outputs[p];
            if k == usize::MAX {
                continue;
            }
            let tok = self.rt[a].y[port.block_port].clone();
            let q = &mut self.queues[k];
            for _ in 0..port.rate {
                q.push_back(tok.clone());
            }
            self.high_water[k] = self.high_water[k].max(q.len() as u64);
        }
        Ok(())
    }
}

/// Runs `iterations` schedule iterations and returns the recorded outputs.
pub fn run_sil(g: &Sdfg, s: &Schedule, iterations: u64) -> Result<Trace, SimError> {
    let mut e = SilEngine::new(g)?;
    for _ in 0..iterations {
        e.run_iteration(s)?;
    }
    Ok(e.into_trace())
}
