//! C source emission for a scheduled SDF graph.
//!
//! A bundle holds the queue runtime, one `_actor()`/`_step()` pair per
//! actor, the `sdfg_step()` schedule and, optionally, a harness `main` that
//! replays a stimulus and prints the output trace as CSV. Tokens travel as
//! arrays of `double`; producers convert values to the channel's element
//! type before enqueueing, exactly as the interpreters do.

mod emit;
mod runtime;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use thiserror::Error;

use crate::interpreter::{MilEngine, PlanStep, SimError, Signal, Trace};
use crate::model::*;
use crate::sdf::{ActorKind, RepetitionVector, Schedule, Sdfg};

pub use emit::lit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodegenError {
    #[error("actor {0}: no code template for kind {1}")]
    UnsupportedKind(String, String),
    #[error("stimulus: {0}")]
    Shape(String),
    #[error(transparent)]
    Body(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CodegenOptions {
    /// Compile out the runtime queue checks.
    pub no_asserts: bool,
}

/// Generated files keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceBundle {
    pub files: BTreeMap<String, String>,
}

impl SourceBundle {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        for (path, text) in &self.files {
            let p = dir.join(path);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text)?;
        }
        Ok(self.files.keys().cloned().collect())
    }

    /// C files to hand to the compiler.
    pub fn sources(&self) -> Vec<&str> {
        self.files
            .keys()
            .filter(|k| k.ends_with(".c"))
            .map(String::as_str)
            .collect()
    }
}

/// Maps arbitrary ids to distinct C identifiers.
fn identifiers<'a>(ids: impl Iterator<Item = &'a str>) -> BTreeMap<String, String> {
    let mut used = BTreeSet::new();
    let mut out = BTreeMap::new();
    for id in ids {
        let mut base: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        if !base.starts_with(|c: char| c.is_ascii_alphabetic()) {
            base.insert_str(0, "a_");
        }
        let mut name = base.clone();
        let mut n = 1;
        while !used.insert(name.clone()) {
            n += 1;
            name = format!("{base}_{n}");
        }
        out.insert(id.to_string(), name);
    }
    out
}

fn file_stem(name: &str) -> String {
    identifiers(std::iter::once(name))[name].clone()
}

fn inport_order(g: &Sdfg) -> Vec<usize> {
    (0..g.actors.len())
        .filter(|&i| matches!(g.actors[i].kind, ActorKind::Block(BlockKind::Inport(_))))
        .collect()
}

fn outport_order(g: &Sdfg) -> Vec<usize> {
    (0..g.actors.len())
        .filter(|&i| matches!(g.actors[i].kind, ActorKind::Block(BlockKind::Outport)))
        .collect()
}

pub fn emit_code(g: &Sdfg, s: &Schedule, opts: CodegenOptions) -> Result<SourceBundle, CodegenError> {
    let stem = file_stem(&g.name);
    let names = identifiers(g.actors.iter().map(|a| a.id.as_str()));
    let mut b = SourceBundle::default();
    b.files.insert("runtime/sdf_queue.h".into(), runtime::QUEUE_H.into());
    b.files.insert("runtime/sdf_queue.c".into(), runtime::QUEUE_C.into());

    let (ah, ac) = emit_actors(g, &stem, &names)?;
    b.files.insert(format!("actors_{stem}.h"), ah);
    b.files.insert(format!("actors_{stem}.c"), ac);

    // Graph header.
    let mut h = String::new();
    let guard = format!("SDFG_{}_H", stem.to_ascii_uppercase());
    writeln!(h, "#ifndef {guard}\n#define {guard}\n").unwrap();
    if opts.no_asserts {
        h.push_str("#ifndef SDF_NO_ASSERTS\n#define SDF_NO_ASSERTS\n#endif\n\n");
    }
    h.push_str("#include <stdint.h>\n\n");
    h.push_str("/* Supplied by the embedding program. */\n");
    h.push_str("void sdfg_read_input(int port, uint64_t firing, double *token);\n");
    h.push_str("void sdfg_write_output(int port, uint64_t firing, const double *token);\n\n");
    h.push_str("void sdfg_init(void);\n/* One iteration of the static schedule. */\nvoid sdfg_step(void);\n\n");
    writeln!(h, "#endif").unwrap();
    b.files.insert(format!("sdfg_{stem}.h"), h);

    // Graph implementation.
    let mut c = String::new();
    writeln!(c, "#include \"sdfg_{stem}.h\"\n#include \"actors_{stem}.h\"\n#include \"runtime/sdf_queue.h\"\n").unwrap();
    let mut init = String::new();
    for (k, ch) in g.channels.iter().enumerate() {
        let peak = s.peak.get(k).copied().unwrap_or(ch.delay);
        let cap = (peak + ch.delay).max(1);
        let w = ch.token.width;
        writeln!(
            c,
            "/* {}: {} -> {}, {} x{}, rates {}/{}, delay {} */",
            ch.id, ch.src.actor, ch.dst.actor, ch.token.dtype, w, ch.rate_src, ch.rate_dst, ch.delay
        )
        .unwrap();
        writeln!(c, "static double q{k}_buf[{}];\nstatic sdf_queue q{k};", cap as usize * w).unwrap();
        writeln!(init, "    sdf_queue_init(&q{k}, q{k}_buf, {w}, {cap}, \"{}\");", ch.id).unwrap();
        for tok in &ch.initial_values {
            writeln!(init, "    {{\n        static const double t[] = {{{}}};\n        enqueue(q{k}, t);\n    }}", emit::lits(tok))
                .unwrap();
        }
    }
    c.push('\n');

    let mut ins: Vec<Vec<usize>> = vec![Vec::new(); g.actors.len()];
    let mut outs: Vec<Vec<usize>> = vec![Vec::new(); g.actors.len()];
    let index: BTreeMap<&str, usize> =
        g.actors.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    for a in &g.actors {
        ins[index[a.id.as_str()]] = vec![usize::MAX; a.inputs.len()];
        outs[index[a.id.as_str()]] = vec![usize::MAX; a.outputs.len()];
    }
    for (k, ch) in g.channels.iter().enumerate() {
        ins[index[ch.dst.actor.as_str()]][ch.dst.port] = k;
        outs[index[ch.src.actor.as_str()]][ch.src.port] = k;
    }

    for (ai, a) in g.actors.iter().enumerate() {
        let n = &names[&a.id];
        writeln!(c, "static void {n}_actor(void)\n{{").unwrap();
        for (p, port) in a.inputs.iter().enumerate() {
            let k = ins[ai][p];
            let field = if port.event { "En".to_string() } else { format!("In{}", port.block_port + 1) };
            writeln!(
                c,
                "    SDF_CHECK(sdf_queue_count(&q{k}) >= {}, \"missing input\", \"{}\");",
                port.rate, g.channels[k].id
            )
            .unwrap();
            for _ in 0..port.rate {
                writeln!(c, "    dequeue(q{k}, {n}_U.{field});").unwrap();
            }
        }
        let stateful = matches!(&a.kind, ActorKind::Block(k) if k.is_stateful());
        let always = matches!(
            &a.kind,
            ActorKind::EnableSource(_)
                | ActorKind::Block(BlockKind::Inport(_))
                | ActorKind::Block(BlockKind::Subsystem(_))
        );
        if stateful {
            writeln!(c, "    if ({n}_pending) {{\n        {n}_update();\n    }}").unwrap();
            writeln!(c, "    {n}_pending = {n}_U.En[0] != 0.0;").unwrap();
            writeln!(c, "    if ({n}_pending) {{\n        {n}_step();\n    }}").unwrap();
        } else if always {
            writeln!(c, "    {n}_step();").unwrap();
        } else {
            writeln!(c, "    if ({n}_U.En[0] != 0.0) {{\n        {n}_step();\n    }}").unwrap();
        }
        writeln!(c, "    {n}_firings++;").unwrap();
        for (p, port) in a.outputs.iter().enumerate() {
            let k = outs[ai][p];
            if k == usize::MAX {
                continue;
            }
            for _ in 0..port.rate {
                writeln!(c, "    enqueue(q{k}, {n}_Y.Out{});", port.block_port + 1).unwrap();
            }
        }
        c.push_str("}\n\n");
    }

    writeln!(c, "void sdfg_init(void)\n{{").unwrap();
    c.push_str(&init);
    writeln!(c, "    actors_{stem}_init();\n}}\n").unwrap();
    writeln!(c, "void sdfg_step(void)\n{{").unwrap();
    for id in &s.firings {
        writeln!(c, "    {}_actor();", names[id]).unwrap();
    }
    c.push_str("}\n");
    b.files.insert(format!("sdfg_{stem}.c"), c);
    Ok(b)
}

fn emit_actors(
    g: &Sdfg,
    stem: &str,
    names: &BTreeMap<String, String>,
) -> Result<(String, String), CodegenError> {
    let mut h = String::new();
    let guard = format!("ACTORS_{}_H", stem.to_ascii_uppercase());
    writeln!(h, "#ifndef {guard}\n#define {guard}\n\n#include <stdint.h>\n").unwrap();
    let mut c = String::new();
    writeln!(
        c,
        "#include <math.h>\n\n#include \"actors_{stem}.h\"\n#include \"sdfg_{stem}.h\"\n#include \"runtime/sdf_queue.h\"\n"
    )
    .unwrap();
    let mut init = String::new();
    let inports = inport_order(g);
    let outports = outport_order(g);

    for (ai, a) in g.actors.iter().enumerate() {
        let n = &names[&a.id];
        writeln!(h, "/* {} ({}) */", a.id, a.kind.name()).unwrap();
        h.push_str("typedef struct {\n");
        for (k, spec) in a.block_inputs.iter().enumerate() {
            writeln!(h, "    double In{}[{}]; /* {} */", k + 1, spec.width, spec.dtype).unwrap();
        }
        h.push_str("    double En[1];\n");
        writeln!(h, "}} {n}_U_t;").unwrap();
        if !a.block_outputs.is_empty() {
            h.push_str("typedef struct {\n");
            for (k, spec) in a.block_outputs.iter().enumerate() {
                writeln!(h, "    double Out{}[{}]; /* {} */", k + 1, spec.width, spec.dtype).unwrap();
            }
            writeln!(h, "}} {n}_Y_t;").unwrap();
            writeln!(h, "extern {n}_Y_t {n}_Y;").unwrap();
            writeln!(c, "{n}_Y_t {n}_Y;").unwrap();
        }
        writeln!(h, "extern {n}_U_t {n}_U;\nextern uint64_t {n}_firings;").unwrap();
        writeln!(c, "{n}_U_t {n}_U;\nuint64_t {n}_firings;").unwrap();
        writeln!(init, "    memset(&{n}_U, 0, sizeof {n}_U);\n    {n}_U.En[0] = 1.0;\n    {n}_firings = 0;").unwrap();
        if !a.block_outputs.is_empty() {
            writeln!(init, "    memset(&{n}_Y, 0, sizeof {n}_Y);").unwrap();
        }

        let ins: Vec<String> = (0..a.block_inputs.len()).map(|k| format!("{n}_U.In{}", k + 1)).collect();
        let outs: Vec<String> = (0..a.block_outputs.len()).map(|k| format!("{n}_Y.Out{}", k + 1)).collect();
        let mut step = String::new();
        match &a.kind {
            ActorKind::EnableSource(mode) => {
                writeln!(c, "static double {n}_prev;").unwrap();
                writeln!(init, "    {n}_prev = 0.0;").unwrap();
                writeln!(
                    step,
                    "    {n}_Y.Out1[0] = sdf_enable({}, {n}_U.In1[0], {n}_U.En[0], &{n}_prev);",
                    emit::mode_const(*mode)
                )
                .unwrap();
            }
            ActorKind::Block(BlockKind::Inport(_)) => {
                let port = inports.iter().position(|&i| i == ai).expect("listed");
                let spec = a.block_outputs[0];
                writeln!(step, "    sdfg_read_input({port}, {n}_firings, {n}_Y.Out1);").unwrap();
                writeln!(
                    step,
                    "    for (int i = 0; i < {}; i++) {{\n        {n}_Y.Out1[i] = {};\n    }}",
                    spec.width,
                    emit::quantize(spec.dtype, &format!("{n}_Y.Out1[i]"))
                )
                .unwrap();
            }
            ActorKind::Block(BlockKind::Outport) => {
                let port = outports.iter().position(|&i| i == ai).expect("listed");
                writeln!(step, "    sdfg_write_output({port}, {n}_firings, {n}_U.In1);").unwrap();
            }
            ActorKind::Block(kind @ BlockKind::Subsystem(p)) => {
                let body = a.body.as_deref().ok_or_else(|| {
                    CodegenError::UnsupportedKind(a.id.clone(), "Subsystem without body".into())
                })?;
                writeln!(c, "static double {n}_prev;").unwrap();
                writeln!(init, "    {n}_prev = 0.0;").unwrap();
                let (decls, body_init, body_fn, copy_out) = emit_body(n, body, &ins, &outs)?;
                c.push_str(&decls);
                c.push_str(&body_fn);
                init.push_str(&body_init);
                let ctrl = if p.mode.is_control() {
                    format!(
                        "sdf_enable({}, {}[0], {n}_U.En[0], &{n}_prev)",
                        emit::mode_const(p.mode),
                        ins.last().expect("control input")
                    )
                } else {
                    format!("{n}_U.En[0]")
                };
                let _ = kind;
                writeln!(step, "    if ({ctrl} != 0.0) {{\n        {n}_body();").unwrap();
                step.push_str(&copy_out);
                step.push_str("    }\n");
            }
            ActorKind::Block(kind) if kind.is_stateful() => {
                c.push_str(&emit::state_decls(n, kind, &a.block_outputs));
                init.push_str(&emit::state_init(n, kind, &a.block_outputs, "    "));
                writeln!(c, "static int {n}_pending;").unwrap();
                writeln!(init, "    {n}_pending = 0;").unwrap();
                writeln!(h, "void {n}_update(void);").unwrap();
                writeln!(
                    c,
                    "void {n}_update(void)\n{{\n{}}}\n",
                    emit::state_update(n, kind, &ins, &a.block_outputs, "    ")
                )
                .unwrap();
                step.push_str(&emit::state_output(n, kind, &outs, &a.block_outputs, "    "));
                writeln!(h, "extern int {n}_pending;").unwrap();
                // `_pending` is read by the actor function in the graph file.
                c = c.replace(&format!("static int {n}_pending;"), &format!("int {n}_pending;"));
            }
            ActorKind::Block(kind) => {
                step.push_str(&emit::compute(&a.id, kind, &ins, &a.block_inputs, &outs, &a.block_outputs, "    ")?);
            }
        }
        writeln!(h, "void {n}_step(void);\n").unwrap();
        writeln!(c, "void {n}_step(void)\n{{\n{step}}}\n").unwrap();
    }
    writeln!(h, "void actors_{stem}_init(void);\n\n#endif").unwrap();
    c = c.replacen("#include <math.h>\n", "#include <math.h>\n#include <string.h>\n", 1);
    writeln!(c, "void actors_{stem}_init(void)\n{{\n{init}}}").unwrap();
    Ok((h, c))
}

/// Declarations, initialisation, evaluation function and output copy for
/// the contents of an opaque subsystem actor `n`.
fn emit_body(
    n: &str,
    body: &BlockModel,
    actor_ins: &[String],
    actor_outs: &[String],
) -> Result<(String, String, String, String), CodegenError> {
    let plan = MilEngine::uniform(body)?.plan();
    let mut decls = String::new();
    let mut init = String::new();
    let reg = |node: usize, port: usize| format!("{n}_r{node}_{port}");
    for (i, node) in plan.nodes.iter().enumerate() {
        writeln!(decls, "/* {}: {} */", node.id, node.kind.name()).unwrap();
        for (p, spec) in node.out_specs.iter().enumerate() {
            writeln!(decls, "static double {}[{}];", reg(i, p), spec.width).unwrap();
            writeln!(init, "    memset({0}, 0, sizeof {0});", reg(i, p)).unwrap();
        }
        if node.kind.is_stateful() {
            let prefix = format!("{n}_n{i}");
            decls.push_str(&emit::state_decls(&prefix, &node.kind, &node.out_specs));
            init.push_str(&emit::state_init(&prefix, &node.kind, &node.out_specs, "    "));
        }
    }
    for (gi, _) in plan.groups.iter().enumerate() {
        writeln!(decls, "static double {n}_g{gi}_en;\nstatic double {n}_g{gi}_prev;").unwrap();
        writeln!(init, "    {n}_g{gi}_en = 0.0;\n    {n}_g{gi}_prev = 0.0;").unwrap();
    }

    let active = |node: usize| match plan.nodes[node].group {
        Some(g) => format!("{n}_g{g}_en != 0.0"),
        None => "1".to_string(),
    };
    let mut f = format!("static void {n}_body(void)\n{{\n");
    for step in &plan.order {
        match *step {
            PlanStep::Group(gi) => {
                let gr = &plan.groups[gi];
                let parent = gr.parent.map_or("1.0".to_string(), |p| format!("{n}_g{p}_en"));
                writeln!(
                    f,
                    "    {n}_g{gi}_en = sdf_enable({}, {}[0], {parent}, &{n}_g{gi}_prev); /* {} */",
                    emit::mode_const(gr.mode),
                    reg(gr.control.0, gr.control.1),
                    gr.id
                )
                .unwrap();
            }
            PlanStep::Node(i) => {
                let node = &plan.nodes[i];
                if matches!(node.kind, BlockKind::Outport) {
                    continue;
                }
                let outs: Vec<String> = (0..node.out_specs.len()).map(|p| reg(i, p)).collect();
                let ins: Vec<String> = node.inputs.iter().map(|&(s, p)| reg(s, p)).collect();
                let code = match &node.kind {
                    BlockKind::Inport(_) if node.root_port => {
                        let k = plan.inports.iter().position(|&x| x == i).expect("listed");
                        let spec = node.out_specs[0];
                        format!(
                            "        for (int i = 0; i < {}; i++) {{\n            {}[i] = {};\n        }}\n",
                            spec.width,
                            outs[0],
                            emit::quantize(spec.dtype, &format!("{}[i]", actor_ins[k]))
                        )
                    }
                    k if k.is_stateful() => {
                        emit::state_output(&format!("{n}_n{i}"), k, &outs, &node.out_specs, "        ")
                    }
                    k => emit::compute(&node.id, k, &ins, &node.in_specs, &outs, &node.out_specs, "        ")?,
                };
                writeln!(f, "    if ({}) {{ /* {} */\n{code}    }}", active(i), node.id).unwrap();
            }
        }
    }
    for (i, node) in plan.nodes.iter().enumerate() {
        if node.kind.is_stateful() {
            let ins: Vec<String> = node.inputs.iter().map(|&(s, p)| reg(s, p)).collect();
            writeln!(
                f,
                "    if ({}) {{\n{}    }}",
                active(i),
                emit::state_update(&format!("{n}_n{i}"), &node.kind, &ins, &node.out_specs, "        ")
            )
            .unwrap();
        }
    }
    f.push_str("}\n\n");

    let mut copy = String::new();
    for (o, &node) in plan.outports.iter().enumerate() {
        let (s, p) = plan.nodes[node].inputs[0];
        let w = plan.nodes[node].in_specs[0].width;
        writeln!(
            copy,
            "        for (int i = 0; i < {w}; i++) {{\n            {}[i] = {}[i];\n        }}",
            actor_outs[o],
            reg(s, p)
        )
        .unwrap();
    }
    Ok((decls, init, f, copy))
}

/// Stimulus for every input actor over `iterations` schedule iterations,
/// sampled from the waveforms attached to the inports.
pub fn graph_stimulus(g: &Sdfg, q: &RepetitionVector, iterations: u64) -> Trace {
    let mut t = Trace::default();
    for &i in &inport_order(g) {
        let a = &g.actors[i];
        let ActorKind::Block(BlockKind::Inport(p)) = &a.kind else { continue };
        let spec = a.block_outputs[0];
        let period = a.period.unwrap_or(g.base_step);
        let mut s = Signal::new(spec.dtype, spec.width);
        for k in 0..iterations * q.get(&a.id).copied().unwrap_or(0) {
            let v = match &p.waveform {
                Some(w) => w.sample(k, spec.width),
                None => spec.zero(),
            };
            let v = v.into_iter().map(|x| spec.dtype.quantize(x)).collect();
            s.samples.push((period * Rational::from_integer(k as i64), v));
        }
        t.signals.insert(a.id.clone(), s);
    }
    t
}

/// Decimal digits needed to print multiples of `r` exactly, if any.
fn exact_digits(r: Rational) -> Option<(u32, i64)> {
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return None;
    }
    let digits = twos.max(fives);
    let scaled = r * Rational::from_integer(10i64.pow(digits));
    Some((digits, scaled.to_integer()))
}

/// A `main` that feeds `stimulus` into the graph, runs `iterations`
/// schedule iterations and prints every output sample as CSV.
pub fn emit_harness(g: &Sdfg, stimulus: &Trace, iterations: u64) -> Result<(String, String), CodegenError> {
    let stem = file_stem(&g.name);
    let mut c = String::new();
    writeln!(
        c,
        "#include <inttypes.h>\n#include <math.h>\n#include <stdio.h>\n#include <stdlib.h>\n\n#include \"sdfg_{stem}.h\"\n"
    )
    .unwrap();
    writeln!(c, "#define SDF_ITERATIONS {iterations}\n").unwrap();

    let inports = inport_order(g);
    for name in stimulus.signals.keys() {
        if !inports.iter().any(|&i| &g.actors[i].id == name) {
            return Err(CodegenError::Shape(format!("{name} is not an input of the graph")));
        }
    }
    let mut reads = String::new();
    for (port, &i) in inports.iter().enumerate() {
        let a = &g.actors[i];
        let w = a.block_outputs[0].width;
        let sig = stimulus
            .signals
            .get(&a.id)
            .ok_or_else(|| CodegenError::Shape(format!("no stimulus for input {}", a.id)))?;
        let mut rows = Vec::new();
        for (t, v) in &sig.samples {
            if v.len() != w {
                return Err(CodegenError::Shape(format!(
                    "{} at {}: width {} but port width is {w}",
                    a.id,
                    t,
                    v.len()
                )));
            }
            rows.push(format!("    {{{}}}", emit::lits(v)));
        }
        if rows.is_empty() {
            rows.push(format!("    {{{}}}", emit::lits(&vec![0.0; w])));
        }
        writeln!(c, "/* {} */\nstatic const double stim{port}[{}][{w}] = {{\n{}\n}};\n", a.id, rows.len(), rows.join(",\n"))
            .unwrap();
        writeln!(
            reads,
            "    case {port}:\n        row = firing < {n} ? firing : {n} - 1;\n        for (i = 0; i < {w}; i++) {{\n            token[i] = stim{port}[row][i];\n        }}\n        break;",
            n = rows.len()
        )
        .unwrap();
    }
    writeln!(
        c,
        "void sdfg_read_input(int port, uint64_t firing, double *token)\n{{\n    uint64_t row;\n    int i;\n    (void)row;\n    (void)i;\n    (void)firing;\n    (void)token;\n    switch (port) {{\n{reads}    default:\n        break;\n    }}\n}}\n"
    )
    .unwrap();

    c.push_str(
        r#"void print_time(uint64_t k, int64_t num, int64_t den, int digits, int64_t step)
{
    if (digits < 0) {
        printf("%.17g", (double)((int64_t)k * num) / (double)den);
        return;
    }
    {
        uint64_t scale = 1, scaled = k * (uint64_t)step;
        int d;
        for (d = 0; d < digits; d++) {
            scale *= 10;
        }
        printf("%" PRIu64, scaled / scale);
        if (scaled % scale != 0) {
            uint64_t rest = scaled % scale;
            putchar('.');
            while (rest != 0) {
                scale /= 10;
                putchar('0' + (int)(rest / scale));
                rest %= scale;
            }
        }
    }
}

void print_value(double v, int exact)
{
    if (exact) {
        printf("%lld", (long long)v);
    } else if (v != v) {
        printf("nan");
    } else if (isinf(v)) {
        printf(v > 0 ? "inf" : "-inf");
    } else {
        printf("%.17g", v);
    }
}

"#,
    );
    let mut writes = String::new();
    for (port, &i) in outport_order(g).iter().enumerate() {
        let a = &g.actors[i];
        let spec = a.block_inputs[0];
        let period = a.period.unwrap_or(g.base_step);
        let (digits, step) = exact_digits(period).map_or((-1, 0), |(d, s)| (d as i64, s));
        writeln!(
            writes,
            "    case {port}:\n        print_time(firing, {}, {}, {digits}, {step});\n        printf(\",{}\");\n        w = {};\n        exact = {};\n        break;",
            period.numer(),
            period.denom(),
            a.id,
            spec.width,
            u8::from(spec.dtype.is_exact())
        )
        .unwrap();
    }
    writeln!(
        c,
        "void sdfg_write_output(int port, uint64_t firing, const double *token)\n{{\n    int i, w = 0, exact = 0;\n    switch (port) {{\n{writes}    default:\n        return;\n    }}\n    for (i = 0; i < w; i++) {{\n        putchar(i == 0 ? ',' : ' ');\n        print_value(token[i], exact);\n    }}\n    putchar('\\n');\n}}\n"
    )
    .unwrap();
    c.push_str(
        r#"int main(int argc, char **argv)
{
    uint64_t n = SDF_ITERATIONS, i;
    if (argc > 1) {
        n = strtoull(argv[1], NULL, 10);
    }
    printf("time,signal,value\n");
    sdfg_init();
    for (i = 0; i < n; i++) {
        sdfg_step();
    }
    return 0;
}
"#,
    );
    Ok((format!("harness_{stem}.c"), c))
}
