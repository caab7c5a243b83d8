//! Time-stepped simulation of the hierarchical block model.

use std::collections::{BTreeMap, BTreeSet};

use crate::blocks::{self, State};
use crate::model::*;
use crate::normalizer::group_period;

use super::{Signal, SimError, Trace};

fn never(_: &Block) -> bool {
    false
}

struct Node {
    id: String,
    kind: BlockKind,
    ticks: u64,
    in_specs: Vec<SignalSpec>,
    out_specs: Vec<SignalSpec>,
    inputs: Vec<Option<(usize, usize)>>,
    outputs: Vec<Token>,
    state: State,
    group: Option<usize>,
    /// Set for boundary ports of the simulated model.
    root_port: bool,
    external: Option<Token>,
}

struct Group {
    id: String,
    mode: SubsystemMode,
    ticks: u64,
    control: Option<(usize, usize)>,
    parent: Option<usize>,
    enabled: bool,
    prev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Node(usize),
    Group(usize),
}

/// Evaluates every non-virtual block once per activation, in data
/// dependency order, on a global tick of one base step.
pub struct MilEngine {
    nodes: Vec<Node>,
    groups: Vec<Group>,
    order: Vec<Step>,
    inports: Vec<usize>,
    outports: Vec<usize>,
    base_step: Rational,
    tick: u64,
}

impl MilEngine {
    /// Engine honouring every block's own period.
    pub fn new(m: &BlockModel) -> Result<Self, SimError> {
        Self::build(m, false)
    }

    /// Engine that activates every block on every tick; used for the body
    /// of an opaque subsystem, which is single-rate by construction.
    pub fn uniform(m: &BlockModel) -> Result<Self, SimError> {
        Self::build(m, true)
    }

    fn build(m: &BlockModel, uniform: bool) -> Result<Self, SimError> {
        let tracer = Tracer::new(m);
        let parents = m.parents();
        let ticks_of = |id: &str, p: Option<Rational>| -> Result<u64, SimError> {
            if uniform {
                return Ok(1);
            }
            p.and_then(|p| m.ticks(p))
                .ok_or_else(|| SimError::NoPeriod(id.to_string()))
        };

        let mut nodes = Vec::new();
        let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
        let (mut inports, mut outports) = (Vec::new(), Vec::new());
        for b in m.blocks() {
            let top = parents.get(&b.id).map_or(true, Option::is_none);
            let root_port = top && matches!(b.kind, BlockKind::Inport(_) | BlockKind::Outport);
            if b.kind.is_subsystem() || (is_virtual(&b.kind) && !root_port) {
                continue;
            }
            if let BlockKind::Unsupported { kind, .. } = &b.kind {
                return Err(SimError::Unsupported(b.id.clone(), kind.clone()));
            }
            let i = nodes.len();
            match b.kind {
                BlockKind::Inport(_) => inports.push(i),
                BlockKind::Outport => outports.push(i),
                _ => {}
            }
            by_id.insert(b.id.clone(), i);
            nodes.push(Node {
                id: b.id.clone(),
                kind: b.kind.clone(),
                ticks: ticks_of(&b.id, b.period())?,
                in_specs: b.in_ports.clone(),
                out_specs: b.out_ports.clone(),
                inputs: Vec::new(),
                outputs: b.out_ports.iter().map(SignalSpec::zero).collect(),
                state: blocks::initial_state(&b.kind, &b.out_ports),
                group: None,
                root_port,
                external: None,
            });
        }
        let locate = |e: &Endpoint| -> Result<(usize, usize), SimError> {
            by_id
                .get(&e.block)
                .map(|&i| (i, e.port))
                .ok_or_else(|| SimError::Unsupported(e.block.clone(), "non-computing source".into()))
        };

        for n in nodes.iter_mut() {
            let b = m.block(&n.id).expect("node block");
            let mut inputs = Vec::new();
            for k in 0..b.in_ports.len() {
                let src = tracer.source_of(&Endpoint::new(b.id.clone(), k), &never)?;
                inputs.push(Some(locate(&src)?));
            }
            if matches!(b.kind, BlockKind::DataStoreMemory(_)) && b.in_ports.is_empty() {
                if let Some(src) = tracer.store_input(b, &never)? {
                    inputs.push(Some(locate(&src)?));
                }
            }
            n.inputs = inputs;
        }

        // Gating groups: control subsystems still in the tree, then groups
        // left behind by flattening.
        let mut groups: Vec<Group> = Vec::new();
        let mut tree_group: BTreeMap<String, usize> = BTreeMap::new();
        for b in m.blocks() {
            if let Some(mode) = b.kind.subsystem_mode().filter(|x| x.is_control()) {
                let cp = b.control_port().expect("control subsystem");
                let src = tracer.source_of(&Endpoint::new(b.id.clone(), cp), &never)?;
                tree_group.insert(b.id.clone(), groups.len());
                groups.push(Group {
                    id: b.id.clone(),
                    mode,
                    ticks: ticks_of(&b.id, m.content_period(b))?,
                    control: Some(locate(&src)?),
                    parent: None,
                    enabled: false,
                    prev: 0.0,
                });
            }
        }
        let mut flat_group: BTreeMap<String, usize> = BTreeMap::new();
        for cg in &m.control_groups {
            let src = tracer.resolve_output(&cg.source(), &never)?;
            flat_group.insert(cg.id.clone(), groups.len());
            groups.push(Group {
                id: cg.id.clone(),
                mode: cg.mode,
                ticks: match group_period(m, &cg.id) {
                    Some(p) => ticks_of(&cg.id, Some(p))?,
                    None => 1,
                },
                control: Some(locate(&src)?),
                parent: None,
                enabled: false,
                prev: 0.0,
            });
        }
        let member_of: BTreeMap<&str, usize> = m
            .control_groups
            .iter()
            .flat_map(|cg| {
                let g = flat_group[&cg.id];
                cg.members.iter().map(move |x| (x.as_str(), g))
            })
            .collect();
        // Innermost gating group enclosing `id` (excluding `id` itself).
        let enclosing = |id: &str| -> Option<usize> {
            let mut cur = parents.get(id).cloned().flatten();
            let mut flat = member_of.get(id).copied();
            while let Some(p) = cur {
                if let Some(&g) = tree_group.get(&p) {
                    return Some(g);
                }
                flat = flat.or_else(|| member_of.get(p.as_str()).copied());
                cur = parents.get(&p).cloned().flatten();
            }
            flat
        };
        for (id, &g) in &tree_group {
            groups[g].parent = enclosing(id);
        }
        for cg in &m.control_groups {
            let g = flat_group[&cg.id];
            groups[g].parent = cg.parent.as_ref().and_then(|p| flat_group.get(p).copied());
        }
        for n in nodes.iter_mut() {
            n.group = enclosing(&n.id);
        }

        let order = Self::sort(&nodes, &groups)?;
        Ok(MilEngine {
            nodes,
            groups,
            order,
            inports,
            outports,
            base_step: m.base_step,
            tick: 0,
        })
    }

    /// Kahn's algorithm with ties broken by id.
    fn sort(nodes: &[Node], groups: &[Group]) -> Result<Vec<Step>, SimError> {
        let key = |s: Step| match s {
            Step::Node(i) => nodes[i].id.clone(),
            Step::Group(g) => format!("{}/Enable", groups[g].id),
        };
        let all: Vec<Step> = (0..nodes.len())
            .map(Step::Node)
            .chain((0..groups.len()).map(Step::Group))
            .collect();
        let mut succ: BTreeMap<Step, Vec<Step>> = BTreeMap::new();
        let mut indeg: BTreeMap<Step, usize> = all.iter().map(|&s| (s, 0)).collect();
        let mut edge = |a: Step, b: Step| {
            succ.entry(a).or_default().push(b);
            *indeg.get_mut(&b).expect("known step") += 1;
        };
        for (i, n) in nodes.iter().enumerate() {
            if !n.kind.is_stateful() {
                for &(s, _) in n.inputs.iter().flatten() {
                    edge(Step::Node(s), Step::Node(i));
                }
            }
            if let Some(g) = n.group {
                edge(Step::Group(g), Step::Node(i));
            }
        }
        for (g, gr) in groups.iter().enumerate() {
            if let Some((s, _)) = gr.control {
                edge(Step::Node(s), Step::Group(g));
            }
            if let Some(p) = gr.parent {
                edge(Step::Group(p), Step::Group(g));
            }
        }
        let mut ready: BTreeSet<(String, Step)> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&s, _)| (key(s), s))
            .collect();
        let mut order = Vec::with_capacity(all.len());
        while let Some(first) = ready.iter().next().cloned() {
            ready.remove(&first);
            let s = first.1;
            order.push(s);
            for &t in succ.get(&s).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indeg.get_mut(&t).expect("known step");
                *d -= 1;
                if *d == 0 {
                    ready.insert((key(t), t));
                }
            }
        }
        if order.len() < all.len() {
            let mut stuck: Vec<String> = indeg
                .iter()
                .filter(|(s, &d)| d > 0 && !order.contains(s))
                .map(|(&s, _)| key(s))
                .collect();
            stuck.sort();
            return Err(SimError::AlgebraicLoop(stuck));
        }
        Ok(order)
    }

    /// Ids in evaluation order; enable conditions appear as `<group>/Enable`.
    pub fn evaluation_order(&self) -> Vec<String> {
        self.order
            .iter()
            .map(|&s| match s {
                Step::Node(i) => self.nodes[i].id.clone(),
                Step::Group(g) => format!("{}/Enable", self.groups[g].id),
            })
            .collect()
    }

    pub fn input_count(&self) -> usize {
        self.inports.len()
    }

    pub fn output_count(&self) -> usize {
        self.outports.len()
    }

    /// Overrides the waveform of boundary input `k`.
    pub fn set_input(&mut self, k: usize, value: Token) {
        let i = self.inports[k];
        self.nodes[i].external = Some(value);
    }

    /// Value currently presented at boundary output `k`.
    pub fn output(&self, k: usize) -> Token {
        self.input_value(self.outports[k], 0)
    }

    fn input_value(&self, n: usize, k: usize) -> Token {
        match self.nodes[n].inputs.get(k).copied().flatten() {
            Some((s, p)) => self.nodes[s].outputs[p].clone(),
            None => self.nodes[n].in_specs[k].zero(),
        }
    }

    fn input_values(&self, n: usize) -> Vec<Token> {
        (0..self.nodes[n].inputs.len()).map(|k| self.input_value(n, k)).collect()
    }

    fn active(&self, n: usize, t: u64) -> bool {
        let node = &self.nodes[n];
        t % node.ticks == 0 && node.group.map_or(true, |g| self.groups[g].enabled)
    }

    /// Advances one base step. Returns the boundary outputs that were
    /// sampled on this tick as `(output index, value)`.
    pub fn step(&mut self) -> Vec<(usize, Token)> {
        let t = self.tick;
        let mut active = vec![false; self.nodes.len()];
        for s in self.order.clone() {
            match s {
                Step::Group(g) => {
                    if t % self.groups[g].ticks != 0 {
                        continue;
                    }
                    let parent = self.groups[g].parent.map_or(true, |p| self.groups[p].enabled);
                    let ctrl = self.groups[g]
                        .control
                        .map_or(0.0, |(s, p)| self.nodes[s].outputs[p][0]);
                    let gr = &mut self.groups[g];
                    gr.enabled = blocks::control_enable(gr.mode, ctrl, parent, &mut gr.prev);
                }
                Step::Node(n) => {
                    if !self.active(n, t) {
                        continue;
                    }
                    active[n] = true;
                    let inputs = self.input_values(n);
                    let node = &mut self.nodes[n];
                    match &node.kind {
                        BlockKind::Inport(p) if node.root_port => {
                            let spec = node.out_specs[0];
                            let v = match (&node.external, &p.waveform) {
                                (Some(v), _) => v.clone(),
                                (None, Some(w)) => w.sample(t / node.ticks, spec.width),
                                (None, None) => spec.zero(),
                            };
                            node.outputs[0] = v.into_iter().map(|x| spec.dtype.quantize(x)).collect();
                        }
                        BlockKind::Outport => {}
                        k if k.is_stateful() => {
                            node.outputs = blocks::state_output(k, &node.state, &node.out_specs);
                        }
                        k => {
                            let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                            node.outputs = blocks::compute(k, &refs, &node.out_specs);
                        }
                    }
                }
            }
        }
        for n in 0..self.nodes.len() {
            if active[n] && self.nodes[n].kind.is_stateful() {
                let inputs = self.input_values(n);
                let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                let node = &mut self.nodes[n];
                blocks::state_update(&node.kind, &mut node.state, &refs, &node.out_specs);
            }
        }
        self.tick += 1;
        self.outports
            .iter()
            .enumerate()
            .filter(|&(_, &n)| active[n])
            .map(|(k, &n)| (k, self.input_value(n, 0)))
            .collect()
    }
}

/// Static evaluation plan of a [`MilEngine`], for code emission.
#[derive(Debug, Clone)]
pub struct Plan {
    pub nodes: Vec<PlanNode>,
    pub groups: Vec<PlanGroup>,
    pub order: Vec<PlanStep>,
    pub inports: Vec<usize>,
    pub outports: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PlanNode {
    pub id: String,
    pub kind: BlockKind,
    pub in_specs: Vec<SignalSpec>,
    pub out_specs: Vec<SignalSpec>,
    /// `(node, output port)` feeding each input.
    pub inputs: Vec<(usize, usize)>,
    pub group: Option<usize>,
    pub root_port: bool,
}

#[derive(Debug, Clone)]
pub struct PlanGroup {
    pub id: String,
    pub mode: SubsystemMode,
    pub control: (usize, usize),
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStep {
    Node(usize),
    Group(usize),
}

impl MilEngine {
    pub fn plan(&self) -> Plan {
        Plan {
            nodes: self
                .nodes
                .iter()
                .map(|n| PlanNode {
                    id: n.id.clone(),
                    kind: n.kind.clone(),
                    in_specs: n.in_specs.clone(),
                    out_specs: n.out_specs.clone(),
                    inputs: n.inputs.iter().flatten().copied().collect(),
                    group: n.group,
                    root_port: n.root_port,
                })
                .collect(),
            groups: self
                .groups
                .iter()
                .map(|g| PlanGroup {
                    id: g.id.clone(),
                    mode: g.mode,
                    control: g.control.unwrap_or((0, 0)),
                    parent: g.parent,
                })
                .collect(),
            order: self
                .order
                .iter()
                .map(|&s| match s {
                    Step::Node(i) => PlanStep::Node(i),
                    Step::Group(g) => PlanStep::Group(g),
                })
                .collect(),
            inports: self.inports.clone(),
            outports: self.outports.clone(),
        }
    }
}

/// Simulates `steps` base steps and records every top-level output port.
pub fn run_mil(m: &BlockModel, steps: u64) -> Result<Trace, SimError> {
    let mut e = MilEngine::new(m)?;
    let mut trace = Trace::default();
    for &n in &e.outports {
        let spec = e.nodes[n].in_specs[0];
        trace
            .signals
            .insert(e.nodes[n].id.clone(), Signal::new(spec.dtype, spec.width));
    }
    for _ in 0..steps {
        let t = e.tick;
        let time = e.base_step * Rational::from_integer(t as i64);
        for (k, v) in e.step() {
            let id = &e.nodes[e.outports[k]].id;
            trace.signals.get_mut(id).expect("registered").samples.push((time, v));
        }
    }
    Ok(trace)
}

/// Samples the waveform of every top-level input over `steps` base steps.
pub fn stimulus(m: &BlockModel, steps: u64) -> Result<Trace, SimError> {
    let mut trace = Trace::default();
    for b in &m.root.children {
        let BlockKind::Inport(p) = &b.kind else { continue };
        let spec = b.out_ports[0];
        let ticks = m
            .block_ticks(b)
            .ok_or_else(|| SimError::NoPeriod(b.id.clone()))?;
        let mut s = Signal::new(spec.dtype, spec.width);
        for t in (0..steps).step_by(ticks as usize) {
            let v = match &p.waveform {
                Some(w) => w.sample(t / ticks, spec.width),
                None => spec.zero(),
            };
            let v = v.into_iter().map(|x| spec.dtype.quantize(x)).collect();
            s.samples.push((m.base_step * Rational::from_integer(t as i64), v));
        }
        trace.signals.insert(b.id.clone(), s);
    }
    Ok(trace)
}
