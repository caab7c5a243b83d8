//! Translatability checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::model::*;
use crate::normalizer::Depth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    FixedStep,
    HarmonicRates,
    Hierarchy,
    VariableSize,
    DanglingRouting,
    BusPairing,
    BusOutput,
    UnsupportedBlock,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.rule, self.location, self.message)
    }
}

#[derive(Default)]
struct Report(BTreeMap<(String, Rule), String>);

impl Report {
    fn add(&mut self, rule: Rule, location: impl Into<String>, message: impl Into<String>) {
        self.0.entry((location.into(), rule)).or_insert_with(|| message.into());
    }
}

/// Every reason the model cannot be translated at `depth`, sorted by
/// location then rule. Empty means translatable.
pub fn check_requirements(m: &BlockModel, depth: Depth) -> Vec<Violation> {
    let mut r = Report::default();
    let kept = crate::normalizer::kept_subsystems(m, depth);
    check_fixed_step(m, &mut r);
    check_harmonic(m, &mut r);
    check_hierarchy(m, &kept, &mut r);
    check_varsize(m, &mut r);
    check_routing(m, &mut r);
    check_buses(m, &mut r);
    check_supported(m, &kept, &mut r);
    r.0.into_iter()
        .map(|((location, rule), message)| Violation {
            rule,
            location,
            message,
        })
        .collect()
}

pub fn report_text(vs: &[Violation]) -> String {
    vs.iter().map(|v| format!("{v}\n")).collect()
}

pub fn report_json(vs: &[Violation]) -> String {
    serde_json::to_string_pretty(vs).expect("violations serialize")
}

fn check_fixed_step(m: &BlockModel, r: &mut Report) {
    for b in m.blocks() {
        match b.sample_time {
            SampleTime::Continuous => {
                r.add(Rule::FixedStep, &b.id, "continuous sample time");
            }
            SampleTime::Periodic(p) if m.ticks(p).is_none() => {
                r.add(
                    Rule::FixedStep,
                    &b.id,
                    format!("period {p} is not a multiple of the base step {}", m.base_step),
                );
            }
            _ => {}
        }
    }
}

fn harmonic(a: Rational, b: Rational) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (hi / lo).is_integer()
}

fn check_harmonic(m: &BlockModel, r: &mut Report) {
    let tracer = Tracer::new(m);
    let never = |_: &Block| false;
    let period_of = |id: &str| m.block(id).and_then(Block::period);
    for b in m.blocks() {
        if b.kind.is_subsystem() || is_virtual(&b.kind) && !is_root_port(&tracer, b) {
            continue;
        }
        let Some(pd) = b.period() else { continue };
        for k in 0..b.in_ports.len() {
            let dst = Endpoint::new(b.id.clone(), k);
            let Ok(src) = tracer.source_of(&dst, &never) else { continue };
            let Some(ps) = period_of(&src.block) else { continue };
            if !harmonic(ps, pd) {
                r.add(
                    Rule::HarmonicRates,
                    format!("{src}->{dst}"),
                    format!("periods {ps} and {pd} do not divide"),
                );
            }
        }
        if let BlockKind::DataStoreMemory(_) = b.kind {
            if let Ok(Some(src)) = tracer.store_input(b, &never) {
                if let Some(ps) = period_of(&src.block) {
                    if !harmonic(ps, pd) {
                        r.add(
                            Rule::HarmonicRates,
                            format!("{src}->{}", b.id),
                            format!("periods {ps} and {pd} do not divide"),
                        );
                    }
                }
            }
        }
        if b.kind.is_rate_transition() {
            for c in m.consumers(&Endpoint::new(b.id.clone(), 0)) {
                if let Some(pc) = period_of(&c.dst.block) {
                    if !harmonic(pd, pc) {
                        r.add(
                            Rule::HarmonicRates,
                            c.location(),
                            format!("periods {pd} and {pc} do not divide"),
                        );
                    }
                }
            }
        }
    }
    // Control signals against the period of the subsystem they gate.
    for b in m.blocks() {
        let Some(cp) = b.control_port() else { continue };
        let Some(pg) = m.content_period(b) else { continue };
        let dst = Endpoint::new(b.id.clone(), cp);
        let Ok(src) = tracer.source_of(&dst, &never) else { continue };
        if let Some(ps) = period_of(&src.block) {
            if !harmonic(ps, pg) {
                r.add(
                    Rule::HarmonicRates,
                    format!("{src}->{dst}"),
                    format!("control period {ps} and subsystem period {pg} do not divide"),
                );
            }
        }
    }
}

fn is_root_port(t: &Tracer, b: &Block) -> bool {
    matches!(b.kind, BlockKind::Inport(_) | BlockKind::Outport) && t.parent(&b.id).is_none()
}

fn subtree_ids(b: &Block) -> BTreeSet<&str> {
    b.walk().into_iter().map(|d| d.id.as_str()).collect()
}

fn check_hierarchy(m: &BlockModel, kept: &[&Block], r: &mut Report) {
    let idx = RoutingIndex::new(m);
    for s in kept {
        let inside = subtree_ids(s);
        let outside = |ids: Option<&Vec<String>>| {
            ids.into_iter().flatten().any(|i| !inside.contains(i.as_str()))
        };
        for b in s.walk().into_iter().skip(1) {
            let crosses = match &b.kind {
                BlockKind::Goto(p) => outside(idx.froms.get(&p.tag)),
                BlockKind::From(p) => outside(idx.gotos.get(&p.tag)),
                BlockKind::DataStoreWrite(p) | BlockKind::DataStoreRead(p) => {
                    outside(idx.memories.get(&p.store))
                }
                BlockKind::DataStoreMemory(p) => {
                    outside(idx.reads.get(&p.store)) || outside(idx.writes.get(&p.store))
                }
                _ => false,
            };
            if crosses {
                r.add(
                    Rule::Hierarchy,
                    &b.id,
                    format!("routing peer lies outside atomic subsystem {}", s.id),
                );
            }
        }
        let bus_port = s
            .in_ports
            .iter()
            .chain(&s.out_ports)
            .any(|p| p.dtype == DType::Bus);
        if bus_port {
            r.add(
                Rule::Hierarchy,
                &s.id,
                "bus signal crosses the boundary of an atomic subsystem",
            );
        }
    }
}

fn check_varsize(m: &BlockModel, r: &mut Report) {
    for b in m.blocks() {
        let varsize = match &b.kind {
            BlockKind::Switch(p) => p.allow_varsize,
            BlockKind::Chart(p) => p.allow_varsize,
            BlockKind::Subsystem(p) => p.allow_varsize,
            _ => false,
        };
        if varsize {
            r.add(Rule::VariableSize, &b.id, "variable-size outputs are not supported");
        }
    }
}

fn check_routing(m: &BlockModel, r: &mut Report) {
    let idx = RoutingIndex::new(m);
    let count = |map: &BTreeMap<String, Vec<String>>, k: &str| map.get(k).map_or(0, Vec::len);
    for (tag, gotos) in &idx.gotos {
        for g in gotos {
            if count(&idx.froms, tag) == 0 {
                r.add(Rule::DanglingRouting, g, format!("Goto tag {tag:?} has no From"));
            }
        }
        for g in gotos.iter().skip(1) {
            r.add(Rule::DanglingRouting, g, format!("duplicate Goto tag {tag:?}"));
        }
    }
    for (tag, froms) in &idx.froms {
        if count(&idx.gotos, tag) == 0 {
            for f in froms {
                r.add(Rule::DanglingRouting, f, format!("From tag {tag:?} has no Goto"));
            }
        }
    }
    for (store, writes) in &idx.writes {
        for w in writes {
            if count(&idx.memories, store) == 0 {
                r.add(
                    Rule::DanglingRouting,
                    w,
                    format!("data store {store:?} has no DataStoreMemory"),
                );
            }
            if count(&idx.reads, store) == 0 {
                r.add(
                    Rule::DanglingRouting,
                    w,
                    format!("data store {store:?} has no DataStoreRead"),
                );
            }
        }
        for w in writes.iter().skip(1) {
            r.add(
                Rule::DanglingRouting,
                w,
                format!("data store {store:?} has more than one writer"),
            );
        }
    }
    for (store, reads) in &idx.reads {
        if count(&idx.memories, store) == 0 {
            for x in reads {
                r.add(
                    Rule::DanglingRouting,
                    x,
                    format!("data store {store:?} has no DataStoreMemory"),
                );
            }
        }
    }
    for (store, mems) in &idx.memories {
        for x in mems.iter().skip(1) {
            r.add(
                Rule::DanglingRouting,
                x,
                format!("data store {store:?} declared by more than one DataStoreMemory"),
            );
        }
    }
}

fn check_buses(m: &BlockModel, r: &mut Report) {
    let tracer = Tracer::new(m);
    let is_creator = |b: &Block| matches!(b.kind, BlockKind::BusCreator);
    for b in m.blocks() {
        match &b.kind {
            BlockKind::BusSelector(p) => {
                if p.output_as_bus {
                    r.add(Rule::BusOutput, &b.id, "BusSelector outputs a bus");
                }
                let src = tracer.source_of(&Endpoint::new(b.id.clone(), 0), &is_creator);
                let paired = src.is_ok_and(|s| m.block(&s.block).is_some_and(|x| is_creator(x)));
                if !paired {
                    r.add(Rule::BusPairing, &b.id, "BusSelector is not fed by a BusCreator");
                }
            }
            BlockKind::BusCreator => {
                if m.consumers(&Endpoint::new(b.id.clone(), 0)).next().is_none() {
                    r.add(Rule::BusPairing, &b.id, "BusCreator output is unused");
                }
            }
            _ => {}
        }
        // Bus-typed inputs may only enter selectors or subsystem boundaries.
        let parent = tracer.parent(&b.id);
        for (k, spec) in b.in_ports.iter().enumerate() {
            if spec.dtype != DType::Bus {
                continue;
            }
            let ok = match b.kind {
                BlockKind::BusSelector(_) | BlockKind::Subsystem(_) => true,
                BlockKind::Outport => parent.is_some(),
                _ => false,
            };
            if !ok {
                let dst = Endpoint::new(b.id.clone(), k);
                let loc = m.driver(&dst).map_or(dst.to_string(), Connection::location);
                r.add(
                    Rule::BusPairing,
                    loc,
                    format!("bus reaches {} instead of a BusSelector", b.kind.name()),
                );
            }
        }
        for spec in &b.out_ports {
            let ok = matches!(b.kind, BlockKind::BusCreator | BlockKind::Subsystem(_))
                || matches!(&b.kind, BlockKind::BusSelector(p) if p.output_as_bus)
                || matches!(b.kind, BlockKind::Inport(_)) && parent.is_some();
            if spec.dtype == DType::Bus && !ok {
                r.add(Rule::BusPairing, &b.id, "only BusCreator may produce a bus");
            }
        }
    }
}

/// Real blocks inside `s` (excluding `s`).
fn real_descendants(s: &Block) -> impl Iterator<Item = &Block> {
    s.walk()
        .into_iter()
        .skip(1)
        .filter(|d| !d.kind.is_subsystem() && !is_virtual(&d.kind))
}

fn check_supported(m: &BlockModel, kept: &[&Block], r: &mut Report) {
    for b in m.blocks() {
        if let BlockKind::Unsupported { kind, .. } = &b.kind {
            r.add(Rule::UnsupportedBlock, &b.id, format!("block kind {kind:?} is not supported"));
        }
    }
    let kept_ids: BTreeSet<&str> = kept.iter().map(|b| b.id.as_str()).collect();
    for s in m.blocks() {
        let Some(mode) = s.kind.subsystem_mode() else { continue };
        let opaque = kept_ids.contains(s.id.as_str());
        if !opaque && !mode.is_control() {
            continue;
        }
        let periods: BTreeSet<Rational> = real_descendants(s).filter_map(Block::period).collect();
        if periods.len() > 1 {
            let what = if mode.is_control() { "control" } else { "atomic" };
            r.add(
                Rule::UnsupportedBlock,
                &s.id,
                format!("{what} subsystem mixes {} sample rates", periods.len()),
            );
        }
        for o in passthrough_outports(m, s) {
            r.add(
                Rule::UnsupportedBlock,
                o,
                format!("output of {} is wired straight to one of its inputs", s.id),
            );
        }
    }
}

/// Outports of `s` whose value comes straight from one of its Inports.
fn passthrough_outports<'a>(m: &BlockModel, s: &'a Block) -> Vec<&'a str> {
    let tracer = Tracer::new(m);
    let own_inports: BTreeSet<&str> = s.inports().iter().map(|i| i.id.as_str()).collect();
    let stop = |b: &Block| own_inports.contains(b.id.as_str());
    s.outports()
        .into_iter()
        .filter(|o| {
            tracer
                .source_of(&Endpoint::new(o.id.clone(), 0), &stop)
                .is_ok_and(|src| own_inports.contains(src.block.as_str()))
        })
        .map(|o| o.id.as_str())
        .collect()
}
