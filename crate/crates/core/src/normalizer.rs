//! Pre-translation rewriting: flattening, routing removal and rate
//! transition insertion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::model::*;

/// How many hierarchy levels to dissolve. Top-level blocks are level 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Depth {
    Level(usize),
    #[default]
    Full,
}

impl Depth {
    /// Whether a subsystem at `level` lies within the depth.
    pub fn covers(self, level: usize) -> bool {
        match self {
            Depth::Full => true,
            Depth::Level(d) => level <= d,
        }
    }
}

impl FromStr for Depth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Depth::Full);
        }
        s.parse()
            .map(Depth::Level)
            .map_err(|_| format!("depth must be a non-negative integer or \"full\", got {s:?}"))
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Full => f.write_str("full"),
            Depth::Level(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizeError {
    #[error("routing: {0}")]
    Routing(#[from] TraceError),
    #[error("block {0} has no resolved sample time")]
    NoPeriod(String),
}

/// A flat, routing-free model with rate transitions in place.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedModel {
    pub model: BlockModel,
    /// New block id to the original element it came from.
    pub provenance: BTreeMap<String, String>,
}

impl NormalizedModel {
    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("map serializes")
    }
}

fn level(id: &str) -> usize {
    id.matches('/').count() + 1
}

fn dissolvable(b: &Block, depth: Depth) -> bool {
    matches!(&b.kind, BlockKind::Subsystem(p) if !p.atomic) && depth.covers(level(&b.id))
}

/// Subsystems that survive flattening at `depth`, including everything
/// nested inside a surviving one.
pub fn kept_subsystems(m: &BlockModel, depth: Depth) -> Vec<&Block> {
    fn go<'a>(b: &'a Block, depth: Depth, out: &mut Vec<&'a Block>) {
        for c in &b.children {
            if !c.kind.is_subsystem() {
                continue;
            }
            if dissolvable(c, depth) {
                go(c, depth, out);
            } else {
                out.extend(c.walk().into_iter().filter(|d| d.kind.is_subsystem()));
            }
        }
    }
    let mut out = Vec::new();
    go(&m.root, depth, &mut out);
    out
}

/// Dissolves every non-atomic subsystem whose level is within `depth`.
pub fn flatten(m: &BlockModel, depth: Depth) -> BlockModel {
    let height = m.root.height();
    let depth = match depth {
        Depth::Level(d) if d > height => {
            log::warn!("depth {d} exceeds model height {height}; clamped");
            Depth::Level(height)
        }
        d => d,
    };
    let mut m = m.clone();
    while let Some(id) = m
        .root
        .children
        .iter()
        .find(|c| dissolvable(c, depth))
        .map(|c| c.id.clone())
    {
        dissolve(&mut m, &id);
    }
    m.canonicalize();
    m
}

/// Removes top-level subsystem `sid`, promoting its children and splicing
/// its boundary ports.
fn dissolve(m: &mut BlockModel, sid: &str) {
    let pos = m.root.children.iter().position(|c| c.id == sid).expect("top level");
    let s = m.root.children.remove(pos);
    let inports: Vec<String> = s.inports().iter().map(|b| b.id.clone()).collect();
    let outports: Vec<String> = s.outports().iter().map(|b| b.id.clone()).collect();
    let drivers: BTreeMap<Endpoint, Endpoint> =
        m.connections.iter().map(|c| (c.dst.clone(), c.src.clone())).collect();

    let resolve = |ep: &Endpoint| -> Option<Endpoint> {
        let mut ep = ep.clone();
        for _ in 0..=drivers.len() {
            if ep.block == sid {
                ep = drivers.get(&Endpoint::new(outports.get(ep.port)?.clone(), 0))?.clone();
            } else if let Some(k) = inports.iter().position(|i| *i == ep.block) {
                ep = drivers.get(&Endpoint::new(sid, k))?.clone();
            } else {
                return Some(ep);
            }
        }
        None
    };

    let mut conns = Vec::new();
    for c in &m.connections {
        if c.dst.block == sid || outports.contains(&c.dst.block) {
            continue;
        }
        if let Some(src) = resolve(&c.src) {
            conns.push(Connection::new(src, c.dst.clone(), c.spec));
        }
    }
    m.connections = conns;

    for g in &mut m.control_groups {
        if let Some(src) = resolve(&g.source()) {
            g.source = (src.block, src.port);
        }
    }

    let boundary: BTreeSet<&String> = inports.iter().chain(&outports).collect();
    let promoted: Vec<Block> = s
        .children
        .iter()
        .filter(|c| !boundary.contains(&c.id))
        .cloned()
        .collect();
    let promoted_ids: Vec<String> = promoted.iter().map(|b| b.id.clone()).collect();

    let enclosing = m
        .control_groups
        .iter()
        .position(|g| g.members.iter().any(|x| x == sid));
    let parent_group = enclosing.map(|i| m.control_groups[i].id.clone());
    if let Some(i) = enclosing {
        m.control_groups[i].members.retain(|x| x != sid);
    }
    match s.control_port() {
        Some(cp) => {
            let source = drivers
                .get(&Endpoint::new(sid, cp))
                .and_then(|e| resolve(e))
                .expect("control port is driven");
            m.control_groups.push(ControlGroup {
                id: sid.to_string(),
                mode: s.kind.subsystem_mode().unwrap_or_default(),
                source: (source.block, source.port),
                members: promoted_ids,
                parent: parent_group,
            });
        }
        None => {
            if let Some(i) = enclosing {
                m.control_groups[i].members.extend(promoted_ids);
            }
        }
    }
    for (k, b) in promoted.into_iter().enumerate() {
        m.root.children.insert(pos + k, b);
    }
}

/// Replaces Goto/From, data store access and bus blocks with direct
/// connections, in the top level and inside every remaining subsystem.
pub fn remove_routing(m: &BlockModel) -> Result<BlockModel, NormalizeError> {
    let tracer = Tracer::new(m);
    let stop = |b: &Block| b.kind.is_subsystem() || matches!(b.kind, BlockKind::Inport(_));
    let routing: BTreeSet<String> = m
        .blocks()
        .into_iter()
        .filter(|b| b.kind.is_routing())
        .map(|b| b.id.clone())
        .collect();
    if routing.is_empty() {
        return Ok(m.clone());
    }

    let mut conns = Vec::new();
    for c in &m.connections {
        if routing.contains(&c.dst.block) {
            continue;
        }
        let src = tracer.source_of(&c.dst, &stop)?;
        conns.push(Connection::new(src, c.dst.clone(), c.spec));
    }
    let mut memory_inputs = Vec::new();
    for b in m.blocks() {
        if let BlockKind::DataStoreMemory(_) = b.kind {
            if b.in_ports.is_empty() {
                if let Some(src) = tracer.store_input(b, &stop)? {
                    memory_inputs.push((b.id.clone(), src, b.out_ports[0]));
                }
            }
        }
    }
    let mut groups = m.control_groups.clone();
    for g in &mut groups {
        let src = tracer.resolve_output(&g.source(), &stop)?;
        g.source = (src.block, src.port);
    }

    let mut out = m.clone();
    for (id, src, spec) in memory_inputs {
        out.block_mut(&id).expect("memory exists").in_ports = vec![spec];
        conns.push(Connection::new(src, Endpoint::new(id, 0), spec));
    }
    fn prune(b: &mut Block, routing: &BTreeSet<String>) {
        b.children.retain(|c| !routing.contains(&c.id));
        for c in &mut b.children {
            prune(c, routing);
        }
    }
    prune(&mut out.root, &routing);
    for g in &mut groups {
        g.members.retain(|x| !routing.contains(x));
    }
    out.connections = conns;
    out.control_groups = groups;
    out.canonicalize();
    Ok(out)
}

/// Period at which a control group evaluates its condition: the fastest
/// period among its members and nested groups.
pub fn group_period(m: &BlockModel, group: &str) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    let mut stack = vec![group.to_string()];
    while let Some(g) = stack.pop() {
        let Some(cg) = m.control_groups.iter().find(|x| x.id == g) else { continue };
        for id in &cg.members {
            let p = m.block(id).and_then(|b| {
                if b.kind.is_subsystem() {
                    m.content_period(b)
                } else {
                    b.period()
                }
            });
            if let Some(p) = p {
                best = Some(best.map_or(p, |q: Rational| q.min(p)));
            }
        }
        stack.extend(
            m.control_groups
                .iter()
                .filter(|x| x.parent.as_deref() == Some(&g))
                .map(|x| x.id.clone()),
        );
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RateAdapter {
    pub direction: RateDirection,
    pub ratio: u64,
}

/// Direction and ratio of a transition from period `src` to period `dst`.
pub fn rate_adapter(src: Rational, dst: Rational) -> RateAdapter {
    let ratio = |a: Rational, b: Rational| (a / b).to_integer() as u64;
    if src < dst {
        RateAdapter {
            direction: RateDirection::FastToSlow,
            ratio: ratio(dst, src),
        }
    } else if src > dst {
        RateAdapter {
            direction: RateDirection::SlowToFast,
            ratio: ratio(src, dst),
        }
    } else {
        RateAdapter {
            direction: RateDirection::Same,
            ratio: 1,
        }
    }
}

/// Splices a RateTransition into every top-level connection whose endpoint
/// periods differ, fills in parameters of existing rate transitions and
/// marks surviving subsystems atomic.
pub fn insert_rate_transitions(m: &BlockModel) -> Result<NormalizedModel, NormalizeError> {
    let mut m = m.clone();
    let mut provenance: BTreeMap<String, String> =
        m.blocks().iter().map(|b| (b.id.clone(), b.id.clone())).collect();

    // Surviving subsystems run at the rate of their contents.
    let top: Vec<String> = m.root.children.iter().map(|b| b.id.clone()).collect();
    for id in &top {
        let b = m.block(id).expect("exists");
        if b.kind.is_subsystem() {
            let p = m.content_period(b).ok_or_else(|| NormalizeError::NoPeriod(id.clone()))?;
            let b = m.block_mut(id).expect("exists");
            b.sample_time = SampleTime::Periodic(p);
            mark_atomic(b);
        }
    }

    let period = |m: &BlockModel, id: &str| -> Result<Rational, NormalizeError> {
        m.block(id)
            .and_then(Block::period)
            .ok_or_else(|| NormalizeError::NoPeriod(id.to_string()))
    };
    let mut used: BTreeSet<String> = m.blocks().iter().map(|b| b.id.clone()).collect();
    let mut fresh = move || {
        let mut n = 0usize;
        loop {
            let id = if n == 0 {
                "RateTransition".to_string()
            } else {
                format!("RateTransition{n}")
            };
            if used.insert(id.clone()) {
                return id;
            }
            n += 1;
        }
    };
    let make_rt = |id: &str, ps: Rational, pd: Rational, spec: SignalSpec| {
        let a = rate_adapter(ps, pd);
        Block::new(
            id,
            BlockKind::RateTransition(RateTransitionParams {
                direction: Some(a.direction),
                ratio: Some(a.ratio),
            }),
        )
        .with_period(ps.max(pd))
        .with_ports(vec![spec], vec![spec])
    };

    let top: BTreeSet<String> = m.root.children.iter().map(|b| b.id.clone()).collect();
    let mut conns = Vec::new();
    let mut new_blocks = Vec::new();
    let old = std::mem::take(&mut m.connections);
    for c in old {
        if !top.contains(&c.src.block) || !top.contains(&c.dst.block) {
            conns.push(c);
            continue;
        }
        let ps = period(&m, &c.src.block)?;
        let pd = period(&m, &c.dst.block)?;
        let rt_end = m.block(&c.src.block).is_some_and(|b| b.kind.is_rate_transition())
            || m.block(&c.dst.block).is_some_and(|b| b.kind.is_rate_transition());
        if ps == pd || rt_end {
            conns.push(c);
            continue;
        }
        let id = fresh();
        provenance.insert(id.clone(), c.location());
        new_blocks.push(make_rt(&id, ps, pd, c.spec));
        conns.push(Connection::new(c.src.clone(), Endpoint::new(id.clone(), 0), c.spec));
        conns.push(Connection::new(Endpoint::new(id, 0), c.dst, c.spec));
    }

    // Control signals sampled at a different rate than their group.
    let groups = m.control_groups.clone();
    let mut updated = Vec::new();
    for mut g in groups {
        let (Some(pg), Ok(ps)) = (group_period(&m, &g.id), period(&m, &g.source.0)) else {
            updated.push(g);
            continue;
        };
        let src_is_rt = m.block(&g.source.0).is_some_and(|b| b.kind.is_rate_transition());
        if pg != ps && !src_is_rt {
            let spec = m.block(&g.source.0).expect("exists").out_ports[g.source.1];
            let id = fresh();
            provenance.insert(id.clone(), format!("{}->{}", g.source(), g.id));
            new_blocks.push(make_rt(&id, ps, pg, spec));
            conns.push(Connection::new(g.source(), Endpoint::new(id.clone(), 0), spec));
            g.source = (id, 0);
        }
        updated.push(g);
    }
    m.control_groups = updated;
    m.root.children.extend(new_blocks);
    m.connections = conns;

    // Explicit rate transitions: record what they adapt between.
    let rts: Vec<String> = m
        .root
        .children
        .iter()
        .filter(|b| b.kind.is_rate_transition())
        .map(|b| b.id.clone())
        .collect();
    for id in rts {
        let own = period(&m, &id)?;
        let src = m
            .driver(&Endpoint::new(id.clone(), 0))
            .map(|c| c.src.block.clone())
            .map(|s| period(&m, &s))
            .transpose()?
            .unwrap_or(own);
        let fastest_consumer = m
            .consumers(&Endpoint::new(id.clone(), 0))
            .filter_map(|c| m.block(&c.dst.block).and_then(Block::period))
            .chain(
                m.control_groups
                    .iter()
                    .filter(|g| g.source.0 == id)
                    .filter_map(|g| group_period(&m, &g.id)),
            )
            .min()
            .unwrap_or(own);
        let a = if src != own {
            rate_adapter(src, own)
        } else {
            rate_adapter(own, fastest_consumer)
        };
        if let Some(BlockKind::RateTransition(p)) = m.block_mut(&id).map(|b| &mut b.kind) {
            p.direction = Some(a.direction);
            p.ratio = Some(a.ratio);
        }
    }

    for b in m.blocks() {
        provenance.entry(b.id.clone()).or_insert_with(|| b.id.clone());
    }
    m.canonicalize();
    Ok(NormalizedModel {
        model: m,
        provenance,
    })
}

fn mark_atomic(b: &mut Block) {
    if let BlockKind::Subsystem(p) = &mut b.kind {
        p.atomic = true;
    }
}

/// Full pre-translation pipeline.
pub fn normalize(m: &BlockModel, depth: Depth) -> Result<NormalizedModel, NormalizeError> {
    let flat = flatten(m, depth);
    let clean = remove_routing(&flat)?;
    insert_rate_transitions(&clean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn s() -> SignalSpec {
        SignalSpec::f64(1)
    }

    fn gain(id: &str, period: i64) -> Block {
        Block::new(id, BlockKind::Gain(GainParams { gain: 2.0 }))
            .with_period(Ratio::from_integer(period))
            .with_ports(vec![s()], vec![s()])
    }

    fn conn(a: &str, ap: usize, b: &str, bp: usize) -> Connection {
        Connection::new(Endpoint::new(a, ap), Endpoint::new(b, bp), s())
    }

    /// C -> Sub{In1 -> G -> Out1} -> O
    fn nested() -> BlockModel {
        let mut m = BlockModel::new("n", Ratio::from_integer(1));
        let c = Block::new("C", BlockKind::Constant(ConstantParams { value: vec![1.0] }))
            .with_period(Ratio::from_integer(1))
            .with_ports(vec![], vec![s()]);
        let mut sub = Block::new("Sub", BlockKind::Subsystem(SubsystemParams::default()))
            .with_ports(vec![s()], vec![s()]);
        sub.children = vec![
            Block::new("Sub/In1", BlockKind::Inport(InportParams::default()))
                .with_ports(vec![], vec![s()]),
            gain("Sub/G", 1),
            Block::new("Sub/Out1", BlockKind::Outport).with_ports(vec![s()], vec![]),
        ];
        let o = Block::new("O", BlockKind::Outport).with_ports(vec![s()], vec![]);
        m.root.children = vec![c, sub, o];
        m.connections = vec![
            conn("C", 0, "Sub", 0),
            conn("Sub/In1", 0, "Sub/G", 0),
            conn("Sub/G", 0, "Sub/Out1", 0),
            conn("Sub", 0, "O", 0),
        ];
        m
    }

    #[test]
    fn depth_parses() {
        assert_eq!("full".parse::<Depth>(), Ok(Depth::Full));
        assert_eq!("2".parse::<Depth>(), Ok(Depth::Level(2)));
        assert!("x".parse::<Depth>().is_err());
    }

    #[test]
    fn flatten_splices_boundaries() {
        let f = flatten(&nested(), Depth::Full);
        let ids: Vec<&str> = f.blocks().iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["C", "Sub/G", "O"]);
        assert_eq!(f.connections, vec![conn("C", 0, "Sub/G", 0), conn("Sub/G", 0, "O", 0)]);
    }

    #[test]
    fn depth_zero_is_identity() {
        let m = nested();
        let mut expect = m.clone();
        expect.canonicalize();
        assert_eq!(flatten(&m, Depth::Level(0)), expect);
    }

    #[test]
    fn chain_gets_two_transitions() {
        let mut m = BlockModel::new("r", Ratio::from_integer(1));
        m.root.children = vec![gain("A", 1), gain("B", 2), gain("C", 4)];
        m.root.children[0].in_ports.clear();
        m.root.children[0].kind = BlockKind::Constant(ConstantParams { value: vec![1.0] });
        m.connections = vec![conn("A", 0, "B", 0), conn("B", 0, "C", 0)];
        let n = insert_rate_transitions(&m).unwrap();
        let rts: Vec<&Block> =
            n.model.blocks().into_iter().filter(|b| b.kind.is_rate_transition()).collect();
        assert_eq!(rts.len(), 2);
        assert_eq!(rts[0].id, "RateTransition");
        assert_eq!(rts[0].period(), Some(Ratio::from_integer(2)));
        assert_eq!(n.provenance["RateTransition"], "A:0->B:0");
    }

    #[test]
    fn rate_adapter_directions() {
        let r = |a, b| rate_adapter(Ratio::from_integer(a), Ratio::from_integer(b));
        assert_eq!(r(2, 4).direction, RateDirection::FastToSlow);
        assert_eq!(r(4, 1).ratio, 4);
        assert_eq!(r(3, 3).direction, RateDirection::Same);
    }
}
