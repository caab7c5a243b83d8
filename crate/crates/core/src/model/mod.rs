//! Hierarchical block-diagram intermediate representation.
//!
//! Block ids are path-qualified in memory (`Heater/Sum1`); the root
//! subsystem is a container and does not contribute a path segment.
//! Connections always join two sibling blocks, and every connection lives in
//! the model-wide [`BlockModel::connections`] list.

mod json;
mod kinds;
mod resolve;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use json::{load_model, save_model};
pub use kinds::*;
pub use resolve::{RoutingIndex, TraceError, Tracer};

/// Exact model time.
pub type Rational = Ratio<i64>;

/// One sample of a signal: `width` elements, each already quantized to the
/// signal's dtype. Integers and booleans are carried exactly in `f64`.
pub type Token = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("type error: {0}")]
    Type(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F64,
    I32,
    Bool,
    /// Virtual grouped signal produced by `BusCreator`; width counts elements.
    Bus,
}

impl DType {
    /// Converts a computed value to this type. `i32` saturates and truncates
    /// toward zero (NaN maps to 0); `bool` is nonzero-ness.
    pub fn quantize(self, v: f64) -> f64 {
        match self {
            DType::F64 | DType::Bus => v,
            DType::I32 => (v as i32) as f64,
            DType::Bool => {
                if v != 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, DType::I32 | DType::Bool)
    }

    pub fn c_type(self) -> &'static str {
        match self {
            DType::F64 | DType::Bus => "double",
            DType::I32 => "int32_t",
            DType::Bool => "uint8_t",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::F64 => "f64",
            DType::I32 => "i32",
            DType::Bool => "bool",
            DType::Bus => "bus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub dtype: DType,
    pub width: usize,
}

impl SignalSpec {
    pub const BOOL: SignalSpec = SignalSpec {
        dtype: DType::Bool,
        width: 1,
    };

    pub fn new(dtype: DType, width: usize) -> Self {
        SignalSpec { dtype, width }
    }

    pub fn f64(width: usize) -> Self {
        SignalSpec::new(DType::F64, width)
    }

    pub fn zero(&self) -> Token {
        vec![0.0; self.width]
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.dtype, self.width)
    }
}

/// Block activation rate. Offsets are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleTime {
    Periodic(Rational),
    /// Resolved at load time from the block's drivers.
    Inherited,
    /// Not supported by translation; reported by the validator.
    Continuous,
}

impl SampleTime {
    pub fn period(&self) -> Option<Rational> {
        match self {
            SampleTime::Periodic(p) => Some(*p),
            _ => None,
        }
    }

    pub fn periodic(num: i64, den: i64) -> Self {
        SampleTime::Periodic(Ratio::new(num, den))
    }
}

/// `(block, port)` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub block: String,
    pub port: usize,
}

impl Endpoint {
    pub fn new(block: impl Into<String>, port: usize) -> Self {
        Endpoint {
            block: block.into(),
            port,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Connection {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub spec: SignalSpec,
}

impl Connection {
    pub fn new(src: Endpoint, dst: Endpoint, spec: SignalSpec) -> Self {
        Connection { src, dst, spec }
    }

    /// Stable location string used in reports.
    pub fn location(&self) -> String {
        format!("{}->{}", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
    pub sample_time: SampleTime,
    pub in_ports: Vec<SignalSpec>,
    pub out_ports: Vec<SignalSpec>,
    pub children: Vec<Block>,
}

impl Block {
    pub fn new(id: impl Into<String>, kind: BlockKind) -> Self {
        Block {
            id: id.into(),
            kind,
            sample_time: SampleTime::Inherited,
            in_ports: Vec::new(),
            out_ports: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_period(mut self, p: Rational) -> Self {
        self.sample_time = SampleTime::Periodic(p);
        self
    }

    pub fn with_ports(mut self, ins: Vec<SignalSpec>, outs: Vec<SignalSpec>) -> Self {
        self.in_ports = ins;
        self.out_ports = outs;
        self
    }

    pub fn period(&self) -> Option<Rational> {
        self.sample_time.period()
    }

    /// Last path segment of the id.
    pub fn local_name(&self) -> &str {
        self.id.rsplit('/').next().unwrap_or(&self.id)
    }

    /// Pre-order walk over this block and all descendants.
    pub fn walk(&self) -> Vec<&Block> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(b) = stack.pop() {
            out.push(b);
            for c in b.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&Block> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut Block> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Boundary `Inport` children in port order.
    pub fn inports(&self) -> Vec<&Block> {
        self.children
            .iter()
            .filter(|c| matches!(c.kind, BlockKind::Inport(_)))
            .collect()
    }

    /// Boundary `Outport` children in port order.
    pub fn outports(&self) -> Vec<&Block> {
        self.children
            .iter()
            .filter(|c| matches!(c.kind, BlockKind::Outport))
            .collect()
    }

    /// Index of the control in-port for triggered/enabled subsystems.
    pub fn control_port(&self) -> Option<usize> {
        match self.kind.subsystem_mode() {
            Some(m) if m.is_control() => Some(self.in_ports.len().saturating_sub(1)),
            _ => None,
        }
    }

    /// Nesting height: 0 for leaves and empty subsystems.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .filter(|c| c.kind.is_subsystem())
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }
}

/// Metadata left behind when a triggered/enabled subsystem is dissolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGroup {
    /// Path of the dissolved subsystem.
    pub id: String,
    pub mode: SubsystemMode,
    /// Driver of the subsystem's control port.
    pub source: (String, usize),
    /// Blocks whose innermost enclosing control subsystem is this one.
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl ControlGroup {
    pub fn source(&self) -> Endpoint {
        Endpoint::new(self.source.0.clone(), self.source.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    pub name: String,
    pub base_step: Rational,
    pub data_stores: Vec<String>,
    pub root: Block,
    pub connections: Vec<Connection>,
    pub control_groups: Vec<ControlGroup>,
}

impl BlockModel {
    pub fn new(name: impl Into<String>, base_step: Rational) -> Self {
        BlockModel {
            name: name.into(),
            base_step,
            data_stores: Vec::new(),
            root: Block::new("root", BlockKind::Subsystem(SubsystemParams::default())),
            connections: Vec::new(),
            control_groups: Vec::new(),
        }
    }

    /// Every block in the tree including the root container.
    pub fn block_count(&self) -> usize {
        self.root.walk().len()
    }

    /// All non-root blocks.
    pub fn blocks(&self) -> Vec<&Block> {
        self.root.walk().into_iter().skip(1).collect()
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        if id == self.root.id {
            return None;
        }
        self.root.children.iter().find_map(|c| c.find(id))
    }

    pub fn block_mut(&mut self, id: &str) -> Option<&mut Block> {
        self.root.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Map of block id to parent id; top-level blocks map to `None`.
    pub fn parents(&self) -> BTreeMap<String, Option<String>> {
        fn go(b: &Block, parent: Option<&str>, out: &mut BTreeMap<String, Option<String>>) {
            for c in &b.children {
                out.insert(c.id.clone(), parent.map(str::to_string));
                go(c, Some(&c.id), out);
            }
        }
        let mut out = BTreeMap::new();
        go(&self.root, None, &mut out);
        out
    }

    /// Connection driving `dst`, if any.
    pub fn driver(&self, dst: &Endpoint) -> Option<&Connection> {
        self.connections.iter().find(|c| &c.dst == dst)
    }

    pub fn consumers<'a>(&'a self, src: &'a Endpoint) -> impl Iterator<Item = &'a Connection> {
        self.connections.iter().filter(move |c| &c.src == src)
    }

    /// Period in base steps. `None` if not periodic or not an integer multiple.
    pub fn ticks(&self, period: Rational) -> Option<u64> {
        let r = period / self.base_step;
        if r.is_integer() && r > Ratio::zero() {
            Some(*r.numer() as u64)
        } else {
            None
        }
    }

    pub fn block_ticks(&self, b: &Block) -> Option<u64> {
        b.period().and_then(|p| self.ticks(p))
    }

    /// Period of a subsystem's contents: the fastest non-virtual descendant
    /// period, falling back to its own sample time.
    pub fn content_period(&self, b: &Block) -> Option<Rational> {
        b.walk()
            .into_iter()
            .skip(1)
            .filter(|d| !d.kind.is_subsystem() && !is_virtual(&d.kind))
            .filter_map(|d| d.period())
            .min()
            .or_else(|| b.period())
    }

    /// Standalone model whose root is the subsystem `id`, with the
    /// connections internal to it.
    pub fn submodel(&self, id: &str) -> Option<BlockModel> {
        let b = self.block(id)?;
        let inside: std::collections::BTreeSet<&str> =
            b.walk().iter().skip(1).map(|d| d.id.as_str()).collect();
        let connections = self
            .connections
            .iter()
            .filter(|c| inside.contains(c.src.block.as_str()) && inside.contains(c.dst.block.as_str()))
            .cloned()
            .collect();
        Some(BlockModel {
            name: id.to_string(),
            base_step: self.base_step,
            data_stores: self.data_stores.clone(),
            root: b.clone(),
            connections,
            control_groups: Vec::new(),
        })
    }

    /// Sorts connections and children into canonical order.
    pub fn canonicalize(&mut self) {
        self.connections.sort();
        self.connections.dedup();
        self.control_groups.sort_by(|a, b| a.id.cmp(&b.id));
        for g in &mut self.control_groups {
            g.members.sort();
        }
    }
}

/// Blocks that only move data between other blocks.
pub fn is_virtual(kind: &BlockKind) -> bool {
    kind.is_routing() || matches!(kind, BlockKind::Inport(_) | BlockKind::Outport)
}
