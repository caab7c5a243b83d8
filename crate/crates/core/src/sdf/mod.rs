//! Synchronous dataflow graphs and their static analyses.

mod analysis;
mod dot;

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::model::{BlockKind, BlockModel, Rational, SignalSpec, SubsystemMode, Token};

pub use analysis::{
    build_schedule, check_consistency, repetition_vector, Consistency, RepetitionVector,
    Schedule, SdfError,
};
pub use dot::export_dot;

/// What an actor computes when it fires.
#[derive(Debug, Clone, PartialEq)]
pub enum ActorKind {
    /// Behaviour of the block it was translated from.
    Block(BlockKind),
    /// Evaluates a dissolved subsystem's control signal and broadcasts the
    /// resulting enable flag to every member.
    EnableSource(SubsystemMode),
}

impl ActorKind {
    pub fn name(&self) -> &str {
        match self {
            ActorKind::Block(k) => k.name(),
            ActorKind::EnableSource(_) => "EnableSource",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    /// Tokens per firing.
    pub rate: u64,
    pub token: SignalSpec,
    /// Port of the source block this port stands for; replicated output
    /// ports share it.
    pub block_port: usize,
    /// Carries an enable flag rather than data.
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: String,
    pub kind: ActorKind,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    /// Activation period of the source block, used to timestamp firings.
    pub period: Option<Rational>,
    /// Port signatures of the originating block (before replication).
    pub block_inputs: Vec<SignalSpec>,
    pub block_outputs: Vec<SignalSpec>,
    /// Contents of an opaque subsystem.
    pub body: Option<Box<BlockModel>>,
}

impl Actor {
    /// Actor with no ports; ports are added as channels are connected.
    pub fn new(id: impl Into<String>, kind: ActorKind) -> Self {
        Actor {
            id: id.into(),
            kind,
            inputs: Vec::new(),
            outputs: Vec::new(),
            period: None,
            block_inputs: Vec::new(),
            block_outputs: Vec::new(),
            body: None,
        }
    }

    /// Index of the enable input, if the actor is gated.
    pub fn event_input(&self) -> Option<usize> {
        self.inputs.iter().position(|p| p.event)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub actor: String,
    pub port: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub id: String,
    pub src: PortRef,
    pub dst: PortRef,
    pub rate_src: u64,
    pub rate_dst: u64,
    pub delay: u64,
    pub token: SignalSpec,
    /// One literal per initial token.
    pub initial_values: Vec<Token>,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sdfg {
    pub name: String,
    pub base_step: Rational,
    pub actors: Vec<Actor>,
    pub channels: Vec<Channel>,
    /// Actor id to the model element it was derived from.
    pub provenance: BTreeMap<String, String>,
}

impl Sdfg {
    pub fn new(name: impl Into<String>, base_step: Rational) -> Self {
        Sdfg {
            name: name.into(),
            base_step,
            actors: Vec::new(),
            channels: Vec::new(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn actor(&self, id: &str) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn actor_index(&self, id: &str) -> Option<usize> {
        self.actors.iter().position(|a| a.id == id)
    }

    pub fn event_channel_count(&self) -> usize {
        self.channels.iter().filter(|c| c.event).count()
    }

    /// Adds a fresh port on each side and a channel between them. Used to
    /// build graphs directly; the translator wires ports itself.
    pub fn connect(&mut self, src: &str, dst: &str, rate_src: u64, rate_dst: u64, delay: u64) {
        let token = SignalSpec::f64(1);
        let s = self.actor_index(src).expect("source actor exists");
        let sp = self.actors[s].outputs.len();
        self.actors[s].outputs.push(Port {
            name: format!("Out{}", sp + 1),
            rate: rate_src,
            token,
            block_port: sp,
            event: false,
        });
        let d = self.actor_index(dst).expect("destination actor exists");
        let dp = self.actors[d].inputs.len();
        self.actors[d].inputs.push(Port {
            name: format!("In{}", dp + 1),
            rate: rate_dst,
            token,
            block_port: dp,
            event: false,
        });
        let id = format!("c{}", self.channels.len());
        self.channels.push(Channel {
            id,
            src: PortRef {
                actor: src.to_string(),
                port: sp,
            },
            dst: PortRef {
                actor: dst.to_string(),
                port: dp,
            },
            rate_src,
            rate_dst,
            delay,
            token,
            initial_values: vec![token.zero(); delay as usize],
            event: false,
        });
    }

    /// `{name, actors:[{id,kind,ports,state}], channels:[...]}`
    pub fn to_json(&self) -> Value {
        let port = |p: &Port| {
            json!({
                "name": p.name,
                "rate": p.rate,
                "dtype": p.token.dtype.to_string(),
                "width": p.token.width,
                "event": p.event,
            })
        };
        let actors: Vec<Value> = self
            .actors
            .iter()
            .map(|a| {
                let (kind, state) = match &a.kind {
                    ActorKind::Block(k) => k.to_parts(),
                    ActorKind::EnableSource(m) => ("EnableSource".to_string(), json!({ "mode": m })),
                };
                let period = a.period.map(|p| json!({"num": p.numer(), "den": p.denom()}));
                json!({
                    "id": a.id,
                    "kind": kind,
                    "period": period,
                    "ports": {
                        "in": a.inputs.iter().map(port).collect::<Vec<_>>(),
                        "out": a.outputs.iter().map(port).collect::<Vec<_>>(),
                    },
                    "state": state,
                })
            })
            .collect();
        let channels: Vec<Value> = self
            .channels
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "src": [c.src.actor, c.src.port],
                    "dst": [c.dst.actor, c.dst.port],
                    "rate_src": c.rate_src,
                    "rate_dst": c.rate_dst,
                    "delay": c.delay,
                    "dtype": c.token.dtype.to_string(),
                    "width": c.token.width,
                    "initial_values": c.initial_values,
                    "event": c.event,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "base_step": {"num": self.base_step.numer(), "den": self.base_step.denom()},
            "actors": actors,
            "channels": channels,
            "provenance": self.provenance,
        })
    }
}
