//! Canonical JSON document format for [`BlockModel`].

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::resolve::{resolve_sample_times, RoutingIndex};
use super::*;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRatio {
    num: i64,
    den: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSampleTime {
    Period(RawRatio),
    Word(String),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPorts {
    #[serde(default, rename = "in")]
    inputs: Vec<SignalSpec>,
    #[serde(default, rename = "out")]
    outputs: Vec<SignalSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    id: String,
    kind: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    sample_time: Option<RawSampleTime>,
    #[serde(default)]
    ports: RawPorts,
    #[serde(default)]
    children: Vec<RawBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConnection {
    src: (String, usize),
    dst: (String, usize),
    dtype: DType,
    width: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    base_step: RawRatio,
    #[serde(default)]
    data_stores: Vec<String>,
    root: RawBlock,
    #[serde(default)]
    connections: Vec<RawConnection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    control_groups: Vec<ControlGroup>,
}

fn ratio(r: &RawRatio, what: &str) -> Result<Rational, ModelError> {
    if r.den <= 0 || r.num <= 0 {
        return Err(ModelError::Schema(format!(
            "{what} must be a positive ratio, got {}/{}",
            r.num, r.den
        )));
    }
    Ok(Ratio::new(r.num, r.den))
}

/// Parses, resolves and checks a model document.
pub fn load_model(document: &str) -> Result<BlockModel, ModelError> {
    let raw: RawModel =
        serde_json::from_str(document).map_err(|e| ModelError::Schema(e.to_string()))?;
    let base_step = ratio(&raw.base_step, "base_step")?;
    if raw.root.kind != "Subsystem" {
        return Err(ModelError::Schema("root must be a Subsystem".into()));
    }
    let root = build_root(raw.root)?;
    if !root.in_ports.is_empty() || !root.out_ports.is_empty() {
        return Err(ModelError::Schema("root subsystem cannot have ports".into()));
    }

    let connections = raw
        .connections
        .into_iter()
        .map(|c| {
            Connection::new(
                Endpoint::new(c.src.0, c.src.1),
                Endpoint::new(c.dst.0, c.dst.1),
                SignalSpec::new(c.dtype, c.width),
            )
        })
        .collect();
    let mut model = BlockModel {
        name: raw.name,
        base_step,
        data_stores: raw.data_stores,
        root,
        connections,
        control_groups: raw.control_groups,
    };
    check_model(&model)?;
    resolve_sample_times(&mut model);
    model.canonicalize();
    Ok(model)
}

fn build_block(raw: RawBlock, prefix: Option<&str>) -> Result<Block, ModelError> {
    // Root-level ids may be hierarchical paths left behind by flattening.
    let path_ok = prefix.is_none()
        && !raw.id.starts_with('/')
        && !raw.id.ends_with('/')
        && !raw.id.contains("//");
    if raw.id.is_empty()
        || raw.id.contains([',', '"', '\n', ':', '>'])
        || (raw.id.contains('/') && !path_ok)
    {
        return Err(ModelError::Schema(format!("invalid block id {:?}", raw.id)));
    }
    let id = match prefix {
        Some(p) => format!("{p}/{}", raw.id),
        None => raw.id,
    };
    let kind = BlockKind::from_parts(&raw.kind, raw.params)
        .map_err(|e| ModelError::Schema(format!("{id}: {e}")))?;
    let sample_time = match raw.sample_time {
        None => SampleTime::Inherited,
        Some(RawSampleTime::Period(r)) => SampleTime::Periodic(ratio(&r, &id)?),
        Some(RawSampleTime::Word(w)) => match w.as_str() {
            "inherited" => SampleTime::Inherited,
            "continuous" => SampleTime::Continuous,
            _ => return Err(ModelError::Schema(format!("{id}: bad sample_time {w:?}"))),
        },
    };
    if !kind.is_subsystem() && !raw.children.is_empty() {
        return Err(ModelError::Schema(format!("{id}: only subsystems have children")));
    }
    let children = raw
        .children
        .into_iter()
        .map(|c| build_block(c, Some(&id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Block {
        id,
        kind,
        sample_time,
        in_ports: raw.ports.inputs,
        out_ports: raw.ports.outputs,
        children,
    })
}

/// Builds the root container; its children are not prefixed.
fn build_root(raw: RawBlock) -> Result<Block, ModelError> {
    let kind = BlockKind::from_parts(&raw.kind, raw.params)
        .map_err(|e| ModelError::Schema(format!("root: {e}")))?;
    let children = raw
        .children
        .into_iter()
        .map(|c| build_block(c, None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Block {
        id: raw.id,
        kind,
        sample_time: SampleTime::Inherited,
        in_ports: raw.ports.inputs,
        out_ports: raw.ports.outputs,
        children,
    })
}

fn check_model(m: &BlockModel) -> Result<(), ModelError> {
    let blocks = m.blocks();
    let mut ids = BTreeSet::new();
    for b in &blocks {
        if !ids.insert(b.id.as_str()) {
            return Err(ModelError::Resolution(format!("duplicate block id {}", b.id)));
        }
        for s in b.in_ports.iter().chain(&b.out_ports) {
            if s.width == 0 {
                return Err(ModelError::Schema(format!("{}: port width must be >= 1", b.id)));
            }
        }
        check_kind(b)?;
    }
    let parents = m.parents();
    let by_id: BTreeMap<&str, &Block> = blocks.iter().map(|b| (b.id.as_str(), *b)).collect();

    let mut driven = BTreeSet::new();
    for c in &m.connections {
        let src = by_id
            .get(c.src.block.as_str())
            .ok_or_else(|| ModelError::Resolution(format!("unknown source block {}", c.src)))?;
        let dst = by_id
            .get(c.dst.block.as_str())
            .ok_or_else(|| ModelError::Resolution(format!("unknown destination block {}", c.dst)))?;
        if parents[&src.id] != parents[&dst.id] {
            return Err(ModelError::Resolution(format!(
                "{} connects blocks at different hierarchy levels",
                c.location()
            )));
        }
        let src_spec = src
            .out_ports
            .get(c.src.port)
            .ok_or_else(|| ModelError::Resolution(format!("no output port {}", c.src)))?;
        let dst_spec = dst
            .in_ports
            .get(c.dst.port)
            .ok_or_else(|| ModelError::Resolution(format!("no input port {}", c.dst)))?;
        if *src_spec != c.spec || *dst_spec != c.spec {
            return Err(ModelError::Type(format!(
                "{} carries {} but ports are {} -> {}",
                c.location(),
                c.spec,
                src_spec,
                dst_spec
            )));
        }
        if !driven.insert(&c.dst) {
            return Err(ModelError::Resolution(format!("{} has more than one driver", c.dst)));
        }
    }
    for b in &blocks {
        for k in 0..b.in_ports.len() {
            if !driven.contains(&Endpoint::new(b.id.clone(), k)) {
                return Err(ModelError::Resolution(format!("input {}:{k} is unconnected", b.id)));
            }
        }
    }

    for b in m.root.walk() {
        if b.kind.is_subsystem() && b.id != m.root.id {
            check_boundary(b)?;
        }
    }

    let stores: BTreeSet<&str> = m.data_stores.iter().map(String::as_str).collect();
    let idx = RoutingIndex::new(m);
    for b in &blocks {
        let store = match &b.kind {
            BlockKind::DataStoreRead(p) | BlockKind::DataStoreWrite(p) => Some(&p.store),
            BlockKind::DataStoreMemory(p) => Some(&p.store),
            _ => None,
        };
        if let Some(s) = store {
            if !stores.contains(s.as_str()) {
                return Err(ModelError::Resolution(format!(
                    "{} references undeclared data store {s}",
                    b.id
                )));
            }
            if let Some(mem) = idx.memories.get(s).and_then(|v| v.first()) {
                let mem_spec = by_id[mem.as_str()].out_ports[0];
                let spec = match b.kind {
                    BlockKind::DataStoreWrite(_) => b.in_ports[0],
                    _ => b.out_ports[0],
                };
                if spec != mem_spec {
                    return Err(ModelError::Type(format!(
                        "{} is {spec} but store {s} holds {mem_spec}",
                        b.id
                    )));
                }
            }
        }
    }
    for (tag, froms) in &idx.froms {
        if let Some(goto) = idx.gotos.get(tag).and_then(|v| v.first()) {
            let spec = by_id[goto.as_str()].in_ports[0];
            for f in froms {
                if by_id[f.as_str()].out_ports[0] != spec {
                    return Err(ModelError::Type(format!("{f} does not match Goto {goto}")));
                }
            }
        }
    }
    for g in &m.control_groups {
        for id in g.members.iter().chain(std::iter::once(&g.source.0)) {
            if !by_id.contains_key(id.as_str()) {
                return Err(ModelError::Resolution(format!(
                    "control group {} references unknown block {id}",
                    g.id
                )));
            }
        }
    }
    Ok(())
}

fn check_boundary(b: &Block) -> Result<(), ModelError> {
    let ins = b.inports();
    let outs = b.outports();
    let control = usize::from(b.control_port().is_some());
    if ins.len() + control != b.in_ports.len() || outs.len() != b.out_ports.len() {
        return Err(ModelError::Schema(format!(
            "{}: {} inports/{} outports do not match {} inputs/{} outputs",
            b.id,
            ins.len(),
            outs.len(),
            b.in_ports.len(),
            b.out_ports.len()
        )));
    }
    for (k, i) in ins.iter().enumerate() {
        if i.out_ports[0] != b.in_ports[k] {
            return Err(ModelError::Type(format!("{}: inport {k} type mismatch", b.id)));
        }
    }
    for (k, o) in outs.iter().enumerate() {
        if o.in_ports[0] != b.out_ports[k] {
            return Err(ModelError::Type(format!("{}: outport {k} type mismatch", b.id)));
        }
    }
    if control == 1 && b.in_ports.last().map(|s| s.width) != Some(1) {
        return Err(ModelError::Type(format!("{}: control input must be scalar", b.id)));
    }
    Ok(())
}

fn arity(b: &Block, ins: usize, outs: usize) -> Result<(), ModelError> {
    if b.in_ports.len() != ins || b.out_ports.len() != outs {
        return Err(ModelError::Schema(format!(
            "{} ({}) needs {ins} inputs and {outs} outputs, has {} and {}",
            b.id,
            b.kind.name(),
            b.in_ports.len(),
            b.out_ports.len()
        )));
    }
    Ok(())
}

/// Elementwise blocks: every non-bus data port has the output width.
fn same_width(b: &Block, ports: &[SignalSpec]) -> Result<(), ModelError> {
    let w = b.out_ports[0].width;
    if ports.iter().chain(&b.out_ports).any(|s| s.dtype == DType::Bus) {
        return Ok(());
    }
    if ports.iter().any(|s| s.width != w) {
        return Err(ModelError::Type(format!("{}: input widths must equal output width {w}", b.id)));
    }
    Ok(())
}

fn check_kind(b: &Block) -> Result<(), ModelError> {
    let bad = |msg: String| Err(ModelError::Schema(format!("{}: {msg}", b.id)));
    match &b.kind {
        BlockKind::Inport(_) => arity(b, 0, 1),
        BlockKind::Outport => arity(b, 1, 0),
        BlockKind::Constant(p) => {
            arity(b, 0, 1)?;
            let w = b.out_ports[0].width;
            if p.value.len() != w && p.value.len() != 1 {
                return bad(format!("value has {} elements, port width is {w}", p.value.len()));
            }
            Ok(())
        }
        BlockKind::Gain(_) | BlockKind::UnitDelay(_) | BlockKind::Lookup1D(_) => {
            arity(b, 1, 1)?;
            same_width(b, &b.in_ports)?;
            if let BlockKind::Lookup1D(p) = &b.kind {
                if p.breakpoints.len() < 2 || p.breakpoints.len() != p.table.len() {
                    return bad("lookup needs >= 2 breakpoints and an equal-length table".into());
                }
                if p.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("breakpoints must be strictly increasing".into());
                }
            }
            Ok(())
        }
        BlockKind::Saturation(p) => {
            arity(b, 1, 1)?;
            same_width(b, &b.in_ports)?;
            if !(p.lower <= p.upper) {
                return bad("lower bound exceeds upper bound".into());
            }
            Ok(())
        }
        BlockKind::Sum(p) => {
            if p.signs.is_empty() || p.signs.chars().any(|c| c != '+' && c != '-') {
                return bad("signs must be a nonempty string of '+'/'-'".into());
            }
            arity(b, p.signs.len(), 1)?;
            same_width(b, &b.in_ports)
        }
        BlockKind::Product(p) => {
            if p.ops.is_empty() || p.ops.chars().any(|c| c != '*' && c != '/') {
                return bad("ops must be a nonempty string of '*'/'/'".into());
            }
            arity(b, p.ops.len(), 1)?;
            same_width(b, &b.in_ports)
        }
        BlockKind::Switch(_) => {
            arity(b, 3, 1)?;
            same_width(b, &[b.in_ports[0], b.in_ports[2]])?;
            let w = b.out_ports[0].width;
            if b.in_ports[1].width != 1 && b.in_ports[1].width != w {
                return Err(ModelError::Type(format!("{}: switch control width", b.id)));
            }
            Ok(())
        }
        BlockKind::RelationalOp(_) => {
            arity(b, 2, 1)?;
            same_width(b, &b.in_ports)
        }
        BlockKind::LogicalOp(p) => {
            if p.op == LogicOp::Not {
                arity(b, 1, 1)?;
            } else if b.in_ports.is_empty() || b.out_ports.len() != 1 {
                return bad("logical operator needs >= 1 inputs and one output".into());
            }
            same_width(b, &b.in_ports)
        }
        BlockKind::Chart(p) => {
            if p.states.is_empty() || p.initial >= p.states.len() {
                return bad("chart needs states and a valid initial state".into());
            }
            for t in &p.transitions {
                if t.from >= p.states.len() || t.to >= p.states.len() {
                    return bad("transition references unknown state".into());
                }
                if t.op != GuardOp::Always {
                    match b.in_ports.get(t.input) {
                        Some(s) if t.element < s.width => {}
                        _ => return bad("transition guard references unknown input".into()),
                    }
                }
            }
            if p.outputs.len() != p.states.len() {
                return bad("one output row per state required".into());
            }
            for row in &p.outputs {
                if row.len() != b.out_ports.len()
                    || row.iter().zip(&b.out_ports).any(|(t, s)| t.len() != s.width)
                {
                    return bad("output row does not match output ports".into());
                }
            }
            Ok(())
        }
        BlockKind::RateTransition(_) => {
            arity(b, 1, 1)?;
            if b.in_ports[0] != b.out_ports[0] {
                return Err(ModelError::Type(format!("{}: rate transition changes type", b.id)));
            }
            Ok(())
        }
        BlockKind::Subsystem(_) => Ok(()),
        BlockKind::Goto(_) | BlockKind::DataStoreWrite(_) => arity(b, 1, 0),
        BlockKind::From(_) | BlockKind::DataStoreRead(_) => arity(b, 0, 1),
        BlockKind::DataStoreMemory(_) => {
            if b.out_ports.len() != 1 || b.in_ports.len() > 1 {
                return bad("data store memory has one output and at most one input".into());
            }
            if b.in_ports.first().is_some_and(|s| *s != b.out_ports[0]) {
                return Err(ModelError::Type(format!("{}: memory type mismatch", b.id)));
            }
            Ok(())
        }
        BlockKind::BusCreator => {
            if b.in_ports.is_empty() || b.out_ports.len() != 1 {
                return bad("bus creator needs inputs and one output".into());
            }
            if b.out_ports[0] != SignalSpec::new(DType::Bus, b.in_ports.len()) {
                return Err(ModelError::Type(format!(
                    "{}: output must be bus[{}]",
                    b.id,
                    b.in_ports.len()
                )));
            }
            Ok(())
        }
        BlockKind::BusSelector(p) => {
            if b.in_ports.len() != 1 || b.in_ports[0].dtype != DType::Bus {
                return Err(ModelError::Type(format!("{}: input must be a bus", b.id)));
            }
            if !p.output_as_bus && p.elements.len() != b.out_ports.len() {
                return bad("one output per selected element".into());
            }
            if p.elements.iter().any(|&e| e >= b.in_ports[0].width) {
                return bad("selected element out of range".into());
            }
            Ok(())
        }
        BlockKind::Unsupported { .. } => Ok(()),
    }
}

fn raw_block(b: &Block, parent: Option<&str>) -> RawBlock {
    let id = match parent {
        Some(p) => b.id.strip_prefix(&format!("{p}/")).unwrap_or(&b.id).to_string(),
        None => b.id.clone(),
    };
    let (kind, params) = b.kind.to_parts();
    let params = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params
    };
    let sample_time = match b.sample_time {
        SampleTime::Periodic(p) => Some(RawSampleTime::Period(RawRatio {
            num: *p.numer(),
            den: *p.denom(),
        })),
        SampleTime::Inherited => None,
        SampleTime::Continuous => Some(RawSampleTime::Word("continuous".into())),
    };
    RawBlock {
        id,
        kind,
        params,
        sample_time,
        ports: RawPorts {
            inputs: b.in_ports.clone(),
            outputs: b.out_ports.clone(),
        },
        children: Vec::new(),
    }
}

fn raw_tree(b: &Block, parent: Option<&str>, is_root: bool) -> RawBlock {
    let mut raw = raw_block(b, parent);
    let prefix = if is_root { None } else { Some(b.id.as_str()) };
    raw.children = b.children.iter().map(|c| raw_tree(c, prefix, false)).collect();
    raw
}

/// Canonical document: sorted keys, sorted connections, two-space indent.
pub fn save_model(m: &BlockModel) -> String {
    let mut m = m.clone();
    m.canonicalize();
    let raw = RawModel {
        name: m.name.clone(),
        base_step: RawRatio {
            num: *m.base_step.numer(),
            den: *m.base_step.denom(),
        },
        data_stores: m.data_stores.clone(),
        root: raw_tree(&m.root, None, true),
        connections: m
            .connections
            .iter()
            .map(|c| RawConnection {
                src: (c.src.block.clone(), c.src.port),
                dst: (c.dst.block.clone(), c.dst.port),
                dtype: c.spec.dtype,
                width: c.spec.width,
            })
            .collect(),
        control_groups: m.control_groups.clone(),
    };
    // Round-tripping through `Value` sorts object keys.
    let value = serde_json::to_value(&raw).expect("model serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "name": "minimal",
      "base_step": {"num": 1, "den": 1},
      "root": {"id": "root", "kind": "Subsystem", "children": [
        {"id": "C", "kind": "Constant", "params": {"value": [3.0]},
         "sample_time": {"num": 1, "den": 1}, "ports": {"out": [{"dtype": "f64", "width": 1}]}},
        {"id": "Out1", "kind": "Outport", "ports": {"in": [{"dtype": "f64", "width": 1}]}}
      ]},
      "connections": [{"src": ["C", 0], "dst": ["Out1", 0], "dtype": "f64", "width": 1}]
    }"#;

    #[test]
    fn loads_minimal_and_inherits_period() {
        let m = load_model(MINIMAL).unwrap();
        assert_eq!(m.block_count(), 3);
        assert_eq!(m.block("Out1").unwrap().period(), Some(Ratio::from_integer(1)));
    }

    #[test]
    fn empty_subsystem_document() {
        let doc = r#"{"name":"e","base_step":{"num":1,"den":1},"root":{"id":"root","kind":"Subsystem"}}"#;
        let m = load_model(doc).unwrap();
        assert!(m.root.children.is_empty());
        assert_eq!(m.blocks().len(), 0);
    }

    #[test]
    fn dangling_connection_is_resolution_error() {
        let doc = MINIMAL.replace(r#""dst": ["Out1", 0]"#, r#""dst": ["Out9", 0]"#);
        assert!(matches!(load_model(&doc), Err(ModelError::Resolution(_))));
        let doc = MINIMAL.replace(r#""dst": ["Out1", 0]"#, r#""dst": ["Out1", 3]"#);
        assert!(matches!(load_model(&doc), Err(ModelError::Resolution(_))));
    }

    #[test]
    fn spec_mismatch_is_type_error() {
        let doc = MINIMAL.replace(r#""dtype": "f64", "width": 1}]"#, r#""dtype": "f64", "width": 1}]"#)
            .replace(r#""dst": ["Out1", 0], "dtype": "f64""#, r#""dst": ["Out1", 0], "dtype": "i32""#);
        assert!(matches!(load_model(&doc), Err(ModelError::Type(_))));
    }

    #[test]
    fn unknown_field_is_schema_error() {
        let doc = MINIMAL.replace(r#""name": "minimal","#, r#""name": "minimal", "solver": "ode45","#);
        assert!(matches!(load_model(&doc), Err(ModelError::Schema(_))));
    }

    #[test]
    fn duplicate_id_is_resolution_error() {
        let doc = MINIMAL.replace(r#""id": "Out1""#, r#""id": "C""#);
        assert!(matches!(load_model(&doc), Err(ModelError::Resolution(_))));
    }

    #[test]
    fn root_ids_may_be_paths() {
        let doc = MINIMAL.replace(r#""id": "Out1""#, r#""id": "Sub/Out1""#).replace(r#""Out1""#, r#""Sub/Out1""#);
        let m = load_model(&doc).unwrap();
        assert!(m.blocks().iter().any(|b| b.id == "Sub/Out1"));
        for bad in ["/Out1", "Sub/", "Sub//Out1"] {
            let doc = MINIMAL.replace(r#""Out1""#, &format!("{bad:?}"));
            assert!(matches!(load_model(&doc), Err(ModelError::Schema(_))), "{bad}");
        }
    }

    #[test]
    fn save_is_byte_stable() {
        let m = load_model(MINIMAL).unwrap();
        let a = save_model(&m);
        let b = save_model(&load_model(&a).unwrap());
        assert_eq!(a, b);
        assert_eq!(load_model(&a).unwrap(), m);
    }
}
