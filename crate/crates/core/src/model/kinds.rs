//! The closed block vocabulary and per-kind parameters.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DType, ModelError, Token};

/// Time-varying stimulus attached to a root `Inport`. Sample `k` is the value
/// presented at the inport's `k`-th activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Waveform {
    Constant {
        value: Token,
    },
    /// Table indexed by activation; holds the last entry unless `repeat`.
    Table {
        values: Vec<Token>,
        #[serde(default)]
        repeat: bool,
    },
    Ramp {
        start: f64,
        slope: f64,
    },
    Pulse {
        /// Activations per cycle.
        period: u64,
        /// Activations per cycle spent at `high`.
        width: u64,
        high: f64,
        low: f64,
    },
    Sine {
        amplitude: f64,
        /// Activations per full cycle.
        period: f64,
        #[serde(default)]
        bias: f64,
    },
}

impl Waveform {
    /// Raw sample at activation `k`, broadcast to `width` elements.
    pub fn sample(&self, k: u64, width: usize) -> Token {
        match self {
            Waveform::Constant { value } => broadcast(value, width),
            Waveform::Table { values, repeat } => {
                if values.is_empty() {
                    return vec![0.0; width];
                }
                let n = values.len() as u64;
                let idx = if *repeat { k % n } else { k.min(n - 1) };
                broadcast(&values[idx as usize], width)
            }
            Waveform::Ramp { start, slope } => vec![start + slope * k as f64; width],
            Waveform::Pulse {
                period,
                width: on,
                high,
                low,
            } => {
                let phase = if *period == 0 { 0 } else { k % period };
                vec![if phase < *on { *high } else { *low }; width]
            }
            Waveform::Sine {
                amplitude,
                period,
                bias,
            } => {
                let x = std::f64::consts::TAU * k as f64 / period;
                vec![bias + amplitude * x.sin(); width]
            }
        }
    }
}

fn broadcast(value: &Token, width: usize) -> Token {
    if value.len() == width {
        value.clone()
    } else if value.len() == 1 {
        vec![value[0]; width]
    } else {
        let mut v = value.clone();
        v.resize(width, 0.0);
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InportParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<Waveform>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    pub value: Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainParams {
    pub gain: f64,
}

/// One sign character (`+` or `-`) per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumParams {
    pub signs: String,
}

/// One operator character (`*` or `/`) per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductParams {
    pub ops: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Token>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationParams {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchCriterion {
    /// control >= threshold
    Ge,
    /// control > threshold
    Gt,
    /// control != 0
    Ne0,
}

/// Inputs are `[u1, control, u3]`; output is `u1` when the criterion holds, else `u3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchParams {
    pub criterion: SwitchCriterion,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub allow_varsize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl RelOp {
    pub fn eval(self, a: f64, b: f64) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }

    pub fn c_op(self) -> &'static str {
        match self {
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelParams {
    pub op: RelOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogicOp {
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Not,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicParams {
    pub op: LogicOp,
}

/// Piecewise-linear table with end clamping. Breakpoints strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookupParams {
    pub breakpoints: Vec<f64>,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardOp {
    #[serde(rename = "always")]
    Always,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl GuardOp {
    pub fn holds(self, x: f64, threshold: f64) -> bool {
        match self {
            GuardOp::Always => true,
            GuardOp::Lt => x < threshold,
            GuardOp::Le => x <= threshold,
            GuardOp::Gt => x > threshold,
            GuardOp::Ge => x >= threshold,
            GuardOp::Eq => x == threshold,
            GuardOp::Ne => x != threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub input: usize,
    #[serde(default)]
    pub element: usize,
    pub op: GuardOp,
    #[serde(default)]
    pub threshold: f64,
}

/// Moore machine: outputs depend on the current state only; at most one
/// transition (the first enabled one, in table order) is taken per activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartParams {
    pub states: Vec<String>,
    #[serde(default)]
    pub initial: usize,
    pub transitions: Vec<Transition>,
    /// `outputs[state][out_port]`
    pub outputs: Vec<Vec<Token>>,
    #[serde(default)]
    pub allow_varsize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateDirection {
    FastToSlow,
    SlowToFast,
    Same,
}

/// Filled in by the normalizer; absent on user-authored blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTransitionParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<RateDirection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemMode {
    #[default]
    Normal,
    /// Executes on a rising edge of the control signal.
    Triggered,
    /// Executes while the control signal is nonzero.
    Enabled,
}

impl SubsystemMode {
    pub fn is_control(self) -> bool {
        !matches!(self, SubsystemMode::Normal)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemParams {
    #[serde(default, skip_serializing_if = "is_normal")]
    pub mode: SubsystemMode,
    /// Atomic subsystems are never dissolved by flattening.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub atomic: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_varsize: bool,
}

fn is_normal(m: &SubsystemMode) -> bool {
    *m == SubsystemMode::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagParams {
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreParams {
    pub store: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    pub store: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Token>,
}

/// Output `j` carries bus element `elements[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSelectorParams {
    pub elements: Vec<usize>,
    #[serde(default)]
    pub output_as_bus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
enum KnownKind {
    Inport(InportParams),
    Outport(NoParams),
    Constant(ConstantParams),
    Gain(GainParams),
    Sum(SumParams),
    Product(ProductParams),
    UnitDelay(DelayParams),
    Saturation(SaturationParams),
    Switch(SwitchParams),
    RelationalOp(RelParams),
    LogicalOp(LogicParams),
    Lookup1D(LookupParams),
    Chart(ChartParams),
    RateTransition(RateTransitionParams),
    Subsystem(SubsystemParams),
    Goto(TagParams),
    From(TagParams),
    DataStoreWrite(StoreParams),
    DataStoreMemory(MemoryParams),
    DataStoreRead(StoreParams),
    BusCreator(NoParams),
    BusSelector(BusSelectorParams),
}

const KNOWN: &[&str] = &[
    "Inport",
    "Outport",
    "Constant",
    "Gain",
    "Sum",
    "Product",
    "UnitDelay",
    "Saturation",
    "Switch",
    "RelationalOp",
    "LogicalOp",
    "Lookup1D",
    "Chart",
    "RateTransition",
    "Subsystem",
    "Goto",
    "From",
    "DataStoreWrite",
    "DataStoreMemory",
    "DataStoreRead",
    "BusCreator",
    "BusSelector",
];

/// Block kind with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "KindRepr", try_from = "KindRepr")]
pub enum BlockKind {
    Inport(InportParams),
    Outport,
    Constant(ConstantParams),
    Gain(GainParams),
    Sum(SumParams),
    Product(ProductParams),
    UnitDelay(DelayParams),
    Saturation(SaturationParams),
    Switch(SwitchParams),
    RelationalOp(RelParams),
    LogicalOp(LogicParams),
    Lookup1D(LookupParams),
    Chart(ChartParams),
    RateTransition(RateTransitionParams),
    Subsystem(SubsystemParams),
    Goto(TagParams),
    From(TagParams),
    DataStoreWrite(StoreParams),
    DataStoreMemory(MemoryParams),
    DataStoreRead(StoreParams),
    BusCreator,
    BusSelector(BusSelectorParams),
    /// Anything outside the vocabulary. Kept so the validator can report it.
    Unsupported { kind: String, params: Value },
}

/// `{kind, params}` pair as it appears in documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KindRepr {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

impl From<BlockKind> for KindRepr {
    fn from(k: BlockKind) -> Self {
        let (kind, params) = k.to_parts();
        KindRepr { kind, params }
    }
}

impl TryFrom<KindRepr> for BlockKind {
    type Error = ModelError;
    fn try_from(r: KindRepr) -> Result<Self, ModelError> {
        BlockKind::from_parts(&r.kind, r.params)
    }
}

impl BlockKind {
    pub fn from_parts(kind: &str, params: Value) -> Result<BlockKind, ModelError> {
        if !KNOWN.contains(&kind) {
            return Ok(BlockKind::Unsupported {
                kind: kind.to_string(),
                params,
            });
        }
        let params = if params.is_null() {
            Value::Object(Default::default())
        } else {
            params
        };
        let doc = serde_json::json!({ "kind": kind, "params": params });
        let known: KnownKind = serde_json::from_value(doc)
            .map_err(|e| ModelError::Schema(format!("bad params for {kind}: {e}")))?;
        Ok(match known {
            KnownKind::Inport(p) => BlockKind::Inport(p),
            KnownKind::Outport(_) => BlockKind::Outport,
            KnownKind::Constant(p) => BlockKind::Constant(p),
            KnownKind::Gain(p) => BlockKind::Gain(p),
            KnownKind::Sum(p) => BlockKind::Sum(p),
            KnownKind::Product(p) => BlockKind::Product(p),
            KnownKind::UnitDelay(p) => BlockKind::UnitDelay(p),
            KnownKind::Saturation(p) => BlockKind::Saturation(p),
            KnownKind::Switch(p) => BlockKind::Switch(p),
            KnownKind::RelationalOp(p) => BlockKind::RelationalOp(p),
            KnownKind::LogicalOp(p) => BlockKind::LogicalOp(p),
            KnownKind::Lookup1D(p) => BlockKind::Lookup1D(p),
            KnownKind::Chart(p) => BlockKind::Chart(p),
            KnownKind::RateTransition(p) => BlockKind::RateTransition(p),
            KnownKind::Subsystem(p) => BlockKind::Subsystem(p),
            KnownKind::Goto(p) => BlockKind::Goto(p),
            KnownKind::From(p) => BlockKind::From(p),
            KnownKind::DataStoreWrite(p) => BlockKind::DataStoreWrite(p),
            KnownKind::DataStoreMemory(p) => BlockKind::DataStoreMemory(p),
            KnownKind::DataStoreRead(p) => BlockKind::DataStoreRead(p),
            KnownKind::BusCreator(_) => BlockKind::BusCreator,
            KnownKind::BusSelector(p) => BlockKind::BusSelector(p),
        })
    }

    pub fn to_parts(&self) -> (String, Value) {
        let known = match self.clone() {
            BlockKind::Unsupported { kind, params } => return (kind, params),
            BlockKind::Inport(p) => KnownKind::Inport(p),
            BlockKind::Outport => KnownKind::Outport(NoParams {}),
            BlockKind::Constant(p) => KnownKind::Constant(p),
            BlockKind::Gain(p) => KnownKind::Gain(p),
            BlockKind::Sum(p) => KnownKind::Sum(p),
            BlockKind::Product(p) => KnownKind::Product(p),
            BlockKind::UnitDelay(p) => KnownKind::UnitDelay(p),
            BlockKind::Saturation(p) => KnownKind::Saturation(p),
            BlockKind::Switch(p) => KnownKind::Switch(p),
            BlockKind::RelationalOp(p) => KnownKind::RelationalOp(p),
            BlockKind::LogicalOp(p) => KnownKind::LogicalOp(p),
            BlockKind::Lookup1D(p) => KnownKind::Lookup1D(p),
            BlockKind::Chart(p) => KnownKind::Chart(p),
            BlockKind::RateTransition(p) => KnownKind::RateTransition(p),
            BlockKind::Subsystem(p) => KnownKind::Subsystem(p),
            BlockKind::Goto(p) => KnownKind::Goto(p),
            BlockKind::From(p) => KnownKind::From(p),
            BlockKind::DataStoreWrite(p) => KnownKind::DataStoreWrite(p),
            BlockKind::DataStoreMemory(p) => KnownKind::DataStoreMemory(p),
            BlockKind::DataStoreRead(p) => KnownKind::DataStoreRead(p),
            BlockKind::BusCreator => KnownKind::BusCreator(NoParams {}),
            BlockKind::BusSelector(p) => KnownKind::BusSelector(p),
        };
        let mut v = serde_json::to_value(known).expect("kind params serialize");
        let obj = v.as_object_mut().expect("adjacently tagged object");
        let kind = obj["kind"].as_str().unwrap_or_default().to_string();
        let params = obj.remove("params").unwrap_or(Value::Null);
        (kind, params)
    }

    pub fn name(&self) -> &str {
        match self {
            BlockKind::Inport(_) => "Inport",
            BlockKind::Outport => "Outport",
            BlockKind::Constant(_) => "Constant",
            BlockKind::Gain(_) => "Gain",
            BlockKind::Sum(_) => "Sum",
            BlockKind::Product(_) => "Product",
            BlockKind::UnitDelay(_) => "UnitDelay",
            BlockKind::Saturation(_) => "Saturation",
            BlockKind::Switch(_) => "Switch",
            BlockKind::RelationalOp(_) => "RelationalOp",
            BlockKind::LogicalOp(_) => "LogicalOp",
            BlockKind::Lookup1D(_) => "Lookup1D",
            BlockKind::Chart(_) => "Chart",
            BlockKind::RateTransition(_) => "RateTransition",
            BlockKind::Subsystem(_) => "Subsystem",
            BlockKind::Goto(_) => "Goto",
            BlockKind::From(_) => "From",
            BlockKind::DataStoreWrite(_) => "DataStoreWrite",
            BlockKind::DataStoreMemory(_) => "DataStoreMemory",
            BlockKind::DataStoreRead(_) => "DataStoreRead",
            BlockKind::BusCreator => "BusCreator",
            BlockKind::BusSelector(_) => "BusSelector",
            BlockKind::Unsupported { kind, .. } => kind,
        }
    }

    pub fn is_subsystem(&self) -> bool {
        matches!(self, BlockKind::Subsystem(_))
    }

    pub fn subsystem_mode(&self) -> Option<SubsystemMode> {
        match self {
            BlockKind::Subsystem(p) => Some(p.mode),
            _ => None,
        }
    }

    /// Connectionless or grouping blocks removed before translation.
    pub fn is_routing(&self) -> bool {
        matches!(
            self,
            BlockKind::Goto(_)
                | BlockKind::From(_)
                | BlockKind::DataStoreWrite(_)
                | BlockKind::DataStoreRead(_)
                | BlockKind::BusCreator
                | BlockKind::BusSelector(_)
        )
    }

    /// Output depends only on internal state; inputs are consumed by the update.
    pub fn is_stateful(&self) -> bool {
        matches!(
            self,
            BlockKind::UnitDelay(_) | BlockKind::DataStoreMemory(_) | BlockKind::Chart(_)
        )
    }

    pub fn is_rate_transition(&self) -> bool {
        matches!(self, BlockKind::RateTransition(_))
    }

    /// Initial state token of delay-like blocks.
    pub fn initial_token(&self, dtype: DType, width: usize) -> Option<Token> {
        let init = match self {
            BlockKind::UnitDelay(p) => p.initial.clone(),
            BlockKind::DataStoreMemory(p) => p.initial.clone(),
            _ => return None,
        };
        let t = init.map(|v| broadcast(&v, width)).unwrap_or(vec![0.0; width]);
        Some(t.into_iter().map(|x| dtype.quantize(x)).collect())
    }
}
