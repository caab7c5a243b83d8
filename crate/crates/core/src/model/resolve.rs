//! Name-based routing lookup, sample-time inheritance and source tracing.

use std::collections::{BTreeMap, BTreeSet};

use super::*;

/// Blocks indexed by Goto tag and data store name.
#[derive(Debug, Default, Clone)]
pub struct RoutingIndex {
    pub gotos: BTreeMap<String, Vec<String>>,
    pub froms: BTreeMap<String, Vec<String>>,
    pub writes: BTreeMap<String, Vec<String>>,
    pub reads: BTreeMap<String, Vec<String>>,
    pub memories: BTreeMap<String, Vec<String>>,
}

impl RoutingIndex {
    pub fn new(m: &BlockModel) -> Self {
        Self::of_tree(&m.root)
    }

    pub fn of_tree(root: &Block) -> Self {
        let mut idx = RoutingIndex::default();
        for b in root.walk() {
            let (map, key) = match &b.kind {
                BlockKind::Goto(p) => (&mut idx.gotos, &p.tag),
                BlockKind::From(p) => (&mut idx.froms, &p.tag),
                BlockKind::DataStoreWrite(p) => (&mut idx.writes, &p.store),
                BlockKind::DataStoreRead(p) => (&mut idx.reads, &p.store),
                BlockKind::DataStoreMemory(p) => (&mut idx.memories, &p.store),
                _ => continue,
            };
            map.entry(key.clone()).or_default().push(b.id.clone());
        }
        idx
    }

    pub fn goto_for(&self, tag: &str) -> Option<&str> {
        self.gotos.get(tag).and_then(|v| v.first()).map(String::as_str)
    }

    pub fn memory_for(&self, store: &str) -> Option<&str> {
        self.memories.get(store).and_then(|v| v.first()).map(String::as_str)
    }

    pub fn write_for(&self, store: &str) -> Option<&str> {
        self.writes.get(store).and_then(|v| v.first()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("{0} is not driven")]
    Undriven(String),
    #[error("{0}: no matching Goto or data store")]
    Unmatched(String),
    #[error("{0}: bus element selected from a non-bus signal")]
    NotABus(String),
    #[error("{0}: a bus reaches a non-routing input")]
    BusAtConsumer(String),
    #[error("{0}: routing cycle")]
    Cycle(String),
}

/// Follows virtual blocks backwards from the input `dst` to the output port
/// of the block that actually computes the value.
///
/// Subsystems, non-root boundary ports, Goto/From, DataStoreRead and bus
/// blocks are traversed unless `stop` returns true for them, in which case
/// the trace ends at that block's output.
pub struct Tracer<'a> {
    model: &'a BlockModel,
    parents: BTreeMap<String, Option<String>>,
    idx: RoutingIndex,
    drivers: BTreeMap<&'a Endpoint, &'a Endpoint>,
}

impl<'a> Tracer<'a> {
    pub fn new(model: &'a BlockModel) -> Self {
        Tracer {
            model,
            parents: model.parents(),
            idx: RoutingIndex::new(model),
            drivers: model.connections.iter().map(|c| (&c.dst, &c.src)).collect(),
        }
    }

    pub fn index(&self) -> &RoutingIndex {
        &self.idx
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parents.get(id).and_then(|p| p.as_deref())
    }

    pub fn driver_of(&self, dst: &Endpoint) -> Option<&'a Endpoint> {
        self.drivers.get(dst).copied()
    }

    /// Real source feeding input `dst`.
    pub fn source_of(
        &self,
        dst: &Endpoint,
        stop: &dyn Fn(&Block) -> bool,
    ) -> Result<Endpoint, TraceError> {
        let src = self
            .driver_of(dst)
            .ok_or_else(|| TraceError::Undriven(dst.to_string()))?;
        let mut elems = Vec::new();
        let out = self.resolve(src.clone(), &mut elems, stop, 0)?;
        if !elems.is_empty() {
            return Err(TraceError::NotABus(dst.to_string()));
        }
        Ok(out)
    }

    /// Real block output behind the output endpoint `src`.
    pub fn resolve_output(
        &self,
        src: &Endpoint,
        stop: &dyn Fn(&Block) -> bool,
    ) -> Result<Endpoint, TraceError> {
        let mut elems = Vec::new();
        let out = self.resolve(src.clone(), &mut elems, stop, 0)?;
        if !elems.is_empty() {
            return Err(TraceError::NotABus(src.to_string()));
        }
        Ok(out)
    }

    /// Real source written into the data store memory `mem`, if any.
    pub fn store_input(
        &self,
        mem: &Block,
        stop: &dyn Fn(&Block) -> bool,
    ) -> Result<Option<Endpoint>, TraceError> {
        if !mem.in_ports.is_empty() {
            return self.source_of(&Endpoint::new(mem.id.clone(), 0), stop).map(Some);
        }
        let BlockKind::DataStoreMemory(p) = &mem.kind else {
            return Ok(None);
        };
        match self.idx.write_for(&p.store) {
            Some(w) => self.source_of(&Endpoint::new(w, 0), stop).map(Some),
            None => Ok(None),
        }
    }

    fn resolve(
        &self,
        src: Endpoint,
        elems: &mut Vec<usize>,
        stop: &dyn Fn(&Block) -> bool,
        depth: usize,
    ) -> Result<Endpoint, TraceError> {
        if depth > 10_000 {
            return Err(TraceError::Cycle(src.to_string()));
        }
        let b = self
            .model
            .block(&src.block)
            .ok_or_else(|| TraceError::Undriven(src.to_string()))?;
        if stop(b) {
            return Ok(src);
        }
        let next_input = |port: usize| Endpoint::new(b.id.clone(), port);
        let follow = |dst: Endpoint, elems: &mut Vec<usize>| -> Result<Endpoint, TraceError> {
            let s = self
                .driver_of(&dst)
                .ok_or_else(|| TraceError::Undriven(dst.to_string()))?;
            self.resolve(s.clone(), elems, stop, depth + 1)
        };
        match &b.kind {
            BlockKind::Subsystem(_) => {
                let out = b
                    .outports()
                    .get(src.port)
                    .map(|o| o.id.clone())
                    .ok_or_else(|| TraceError::Undriven(src.to_string()))?;
                follow(Endpoint::new(out, 0), elems)
            }
            BlockKind::Inport(_) => match self.parent(&b.id) {
                None => Ok(src),
                Some(p) => {
                    let parent = self.model.block(p).expect("parent exists");
                    let k = parent
                        .inports()
                        .iter()
                        .position(|i| i.id == b.id)
                        .expect("inport is a child");
                    follow(Endpoint::new(p, k), elems)
                }
            },
            BlockKind::From(t) => {
                let g = self
                    .idx
                    .goto_for(&t.tag)
                    .ok_or_else(|| TraceError::Unmatched(b.id.clone()))?;
                follow(Endpoint::new(g, 0), elems)
            }
            BlockKind::DataStoreRead(s) => {
                let m = self
                    .idx
                    .memory_for(&s.store)
                    .ok_or_else(|| TraceError::Unmatched(b.id.clone()))?;
                self.resolve(Endpoint::new(m, 0), elems, stop, depth + 1)
            }
            BlockKind::BusCreator => match elems.pop() {
                Some(e) => follow(next_input(e), elems),
                None => Err(TraceError::BusAtConsumer(src.to_string())),
            },
            BlockKind::BusSelector(p) => {
                let e = if p.output_as_bus {
                    match elems.pop() {
                        Some(i) => p.elements.get(i).copied(),
                        None => return Err(TraceError::BusAtConsumer(src.to_string())),
                    }
                } else {
                    p.elements.get(src.port).copied()
                };
                let e = e.ok_or_else(|| TraceError::NotABus(src.to_string()))?;
                elems.push(e);
                follow(next_input(0), elems)
            }
            _ => {
                if elems.is_empty() {
                    Ok(src)
                } else {
                    Err(TraceError::NotABus(src.to_string()))
                }
            }
        }
    }
}

/// Fills in inherited sample times from drivers.
///
/// A block takes the fastest (smallest) period among the blocks feeding it,
/// where subsystem boundaries, Goto/From pairs and data stores count as
/// feeding links. Blocks whose drivers never resolve fall back to the
/// nearest ancestor with a declared period, then to the base step.
/// Subsystems without a declared period take the fastest period inside them.
pub(crate) fn resolve_sample_times(m: &mut BlockModel) {
    let parents = m.parents();
    let idx = RoutingIndex::new(m);
    let blocks: BTreeMap<String, Block> = m
        .blocks()
        .into_iter()
        .map(|b| (b.id.clone(), shallow(b)))
        .collect();

    // Driver links between non-subsystem blocks.
    let mut feeds: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let out_source = |src: &Endpoint| -> Option<String> {
        let b = blocks.get(&src.block)?;
        if b.kind.is_subsystem() {
            let full = m.block(&b.id)?;
            full.outports().get(src.port).map(|o| o.id.clone())
        } else {
            Some(b.id.clone())
        }
    };
    for c in &m.connections {
        let Some(src) = out_source(&c.src) else { continue };
        let dst = &blocks[&c.dst.block];
        if dst.kind.is_subsystem() {
            let full = m.block(&dst.id).expect("exists");
            if let Some(i) = full.inports().get(c.dst.port) {
                feeds.entry(i.id.clone()).or_default().insert(src);
            }
        } else {
            feeds.entry(dst.id.clone()).or_default().insert(src);
        }
    }
    for (tag, froms) in &idx.froms {
        for g in idx.gotos.get(tag).into_iter().flatten() {
            for f in froms {
                feeds.entry(f.clone()).or_default().insert(g.clone());
            }
        }
    }
    for (store, mems) in &idx.memories {
        for mem in mems {
            for w in idx.writes.get(store).into_iter().flatten() {
                feeds.entry(mem.clone()).or_default().insert(w.clone());
            }
            for r in idx.reads.get(store).into_iter().flatten() {
                feeds.entry(r.clone()).or_default().insert(mem.clone());
            }
        }
    }

    let mut resolved: BTreeMap<String, Option<Rational>> = BTreeMap::new();
    let mut pending = Vec::new();
    for b in blocks.values() {
        if b.kind.is_subsystem() {
            continue;
        }
        match b.sample_time {
            SampleTime::Periodic(p) => {
                resolved.insert(b.id.clone(), Some(p));
            }
            SampleTime::Continuous => {
                resolved.insert(b.id.clone(), None);
            }
            SampleTime::Inherited => pending.push(b.id.clone()),
        }
    }

    let min_of = |ds: &BTreeSet<String>, resolved: &BTreeMap<String, Option<Rational>>| {
        ds.iter().filter_map(|d| resolved.get(d).copied().flatten()).min()
    };
    loop {
        let mut progress = false;
        // Strict pass: all drivers known.
        loop {
            let mut changed = false;
            pending.retain(|id| {
                let Some(ds) = feeds.get(id) else { return true };
                if ds.iter().all(|d| resolved.contains_key(d)) {
                    if let Some(p) = min_of(ds, &resolved) {
                        resolved.insert(id.clone(), Some(p));
                        changed = true;
                        return false;
                    }
                }
                true
            });
            if !changed {
                break;
            }
            progress = true;
        }
        // Relaxed pass: accept a partial set to break cycles.
        let candidate = pending.iter().position(|id| {
            feeds
                .get(id)
                .is_some_and(|ds| min_of(ds, &resolved).is_some())
        });
        if let Some(i) = candidate {
            let id = pending.remove(i);
            let p = min_of(&feeds[&id], &resolved);
            resolved.insert(id, p);
            progress = true;
        }
        if !progress {
            break;
        }
    }

    let declared = |start: &str| -> Rational {
        let mut id = parents[start].clone();
        while let Some(i) = id {
            if let Some(p) = blocks[&i].sample_time.period() {
                return p;
            }
            id = parents[&i].clone();
        }
        m.base_step
    };
    for id in pending {
        let p = declared(&id);
        resolved.insert(id, Some(p));
    }

    fn apply(b: &mut Block, resolved: &BTreeMap<String, Option<Rational>>) -> Option<Rational> {
        let mut fastest: Option<Rational> = None;
        for c in &mut b.children {
            if let Some(p) = apply(c, resolved) {
                fastest = Some(fastest.map_or(p, |f| f.min(p)));
            }
        }
        if b.kind.is_subsystem() {
            if b.sample_time == SampleTime::Inherited {
                if let Some(p) = fastest {
                    b.sample_time = SampleTime::Periodic(p);
                }
            }
            return fastest.or(b.period());
        }
        if let Some(Some(p)) = resolved.get(&b.id) {
            b.sample_time = SampleTime::Periodic(*p);
        }
        b.period()
    }
    for c in &mut m.root.children {
        apply(c, &resolved);
    }
}

fn shallow(b: &Block) -> Block {
    Block {
        children: Vec::new(),
        ..b.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn spec() -> SignalSpec {
        SignalSpec::f64(1)
    }

    fn conn(a: &str, ap: usize, b: &str, bp: usize) -> Connection {
        Connection::new(Endpoint::new(a, ap), Endpoint::new(b, bp), spec())
    }

    /// Constant(2) -> Gain(inherited) -> Out, Constant(1) -> Goto / From -> Out2
    fn model() -> BlockModel {
        let mut m = BlockModel::new("t", Ratio::from_integer(1));
        let c = Block::new("C", BlockKind::Constant(ConstantParams { value: vec![1.0] }))
            .with_period(Ratio::from_integer(2))
            .with_ports(vec![], vec![spec()]);
        let g = Block::new("G", BlockKind::Gain(GainParams { gain: 2.0 }))
            .with_ports(vec![spec()], vec![spec()]);
        let o = Block::new("Out", BlockKind::Outport).with_ports(vec![spec()], vec![]);
        let goto = Block::new("Goto", BlockKind::Goto(TagParams { tag: "a".into() }))
            .with_ports(vec![spec()], vec![]);
        let from = Block::new("From", BlockKind::From(TagParams { tag: "a".into() }))
            .with_ports(vec![], vec![spec()]);
        let o2 = Block::new("Out2", BlockKind::Outport).with_ports(vec![spec()], vec![]);
        m.root.children = vec![c, g, o, goto, from, o2];
        m.connections = vec![
            conn("C", 0, "G", 0),
            conn("G", 0, "Out", 0),
            conn("G", 0, "Goto", 0),
            conn("From", 0, "Out2", 0),
        ];
        m
    }

    #[test]
    fn inherits_through_goto() {
        let mut m = model();
        resolve_sample_times(&mut m);
        for id in ["G", "Out", "Goto", "From", "Out2"] {
            assert_eq!(m.block(id).unwrap().period(), Some(Ratio::from_integer(2)), "{id}");
        }
    }

    #[test]
    fn traces_through_goto() {
        let m = model();
        let t = Tracer::new(&m);
        let src = t.source_of(&Endpoint::new("Out2", 0), &|_| false).unwrap();
        assert_eq!(src, Endpoint::new("G", 0));
    }

    #[test]
    fn stop_predicate_halts_trace() {
        let m = model();
        let t = Tracer::new(&m);
        let stop = |b: &Block| matches!(b.kind, BlockKind::From(_));
        let src = t.source_of(&Endpoint::new("Out2", 0), &stop).unwrap();
        assert_eq!(src, Endpoint::new("From", 0));
    }
}
