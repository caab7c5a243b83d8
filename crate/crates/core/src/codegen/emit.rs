//! C statements for the step semantics of each block kind.
//!
//! Every template mirrors `crate::blocks` operation for operation so the
//! generated code reproduces interpreter results exactly.

use std::fmt::Write;

use crate::blocks::{self, State};
use crate::interpreter::format_g17;
use crate::model::*;

use super::CodegenError;

/// C literal for a double.
pub fn lit(x: f64) -> String {
    if x.is_nan() {
        return "NAN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "INFINITY".into() } else { "(-INFINITY)".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let s = format_g17(x);
    if s.contains(['.', 'e']) {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn lits(xs: &[f64]) -> String {
    xs.iter().map(|&x| lit(x)).collect::<Vec<_>>().join(", ")
}

/// Wraps `expr` in the conversion to `dtype`.
pub fn quantize(dtype: DType, expr: &str) -> String {
    match dtype {
        DType::F64 | DType::Bus => expr.to_string(),
        DType::I32 => format!("sdf_q_i32({expr})"),
        DType::Bool => format!("sdf_q_bool({expr})"),
    }
}

pub fn mode_const(m: SubsystemMode) -> &'static str {
    match m {
        SubsystemMode::Normal => "SDF_MODE_NORMAL",
        SubsystemMode::Enabled => "SDF_MODE_ENABLED",
        SubsystemMode::Triggered => "SDF_MODE_TRIGGERED",
    }
}

/// Statements computing the outputs of a stateless block. `ins` are C
/// arrays holding each input token, `outs` the output arrays.
pub fn compute(
    owner: &str,
    kind: &BlockKind,
    ins: &[String],
    in_specs: &[SignalSpec],
    outs: &[String],
    out_specs: &[SignalSpec],
    indent: &str,
) -> Result<String, CodegenError> {
    let mut s = String::new();
    let (Some(y), Some(&spec)) = (outs.first(), out_specs.first()) else {
        return Ok(s);
    };
    let w = spec.width;
    let q = |e: &str| quantize(spec.dtype, e);
    let each = |s: &mut String, body: &str| {
        writeln!(s, "{indent}for (int i = 0; i < {w}; i++) {{").unwrap();
        for line in body.lines() {
            writeln!(s, "{indent}    {line}").unwrap();
        }
        writeln!(s, "{indent}}}").unwrap();
    };
    match kind {
        BlockKind::Constant(_) => {
            let v = blocks::compute(kind, &[], out_specs).remove(0);
            for (i, x) in v.iter().enumerate() {
                writeln!(s, "{indent}{y}[{i}] = {};", lit(*x)).unwrap();
            }
        }
        BlockKind::Gain(p) => {
            each(&mut s, &format!("{y}[i] = {};", q(&format!("{} * {}[i]", lit(p.gain), ins[0]))));
        }
        BlockKind::Sum(p) => {
            let mut body = String::new();
            let mut signs = p.signs.chars();
            let first = if signs.next() == Some('-') { "-" } else { "" };
            writeln!(body, "double acc = {first}{}[i];", ins[0]).unwrap();
            for (j, c) in signs.enumerate() {
                writeln!(body, "acc = acc {c} {}[i];", ins[j + 1]).unwrap();
            }
            write!(body, "{y}[i] = {};", q("acc")).unwrap();
            each(&mut s, &body);
        }
        BlockKind::Product(p) => {
            let mut body = String::new();
            let mut ops = p.ops.chars();
            if ops.next() == Some('/') {
                writeln!(body, "double acc = 1.0 / {}[i];", ins[0]).unwrap();
            } else {
                writeln!(body, "double acc = {}[i];", ins[0]).unwrap();
            }
            for (j, c) in ops.enumerate() {
                writeln!(body, "acc = acc {c} {}[i];", ins[j + 1]).unwrap();
            }
            write!(body, "{y}[i] = {};", q("acc")).unwrap();
            each(&mut s, &body);
        }
        BlockKind::Saturation(p) => {
            let (lo, hi) = (lit(p.lower), lit(p.upper));
            each(
                &mut s,
                &format!(
                    "double u = {}[i];\n{y}[i] = {};",
                    ins[0],
                    q(&format!("u > {hi} ? {hi} : (u < {lo} ? {lo} : u)"))
                ),
            );
        }
        BlockKind::Switch(p) => {
            let c = if in_specs[1].width == 1 {
                format!("{}[0]", ins[1])
            } else {
                format!("{}[i]", ins[1])
            };
            let cond = match p.criterion {
                SwitchCriterion::Ge => format!("{c} >= {}", lit(p.threshold)),
                SwitchCriterion::Gt => format!("{c} > {}", lit(p.threshold)),
                SwitchCriterion::Ne0 => format!("{c} != 0.0"),
            };
            each(
                &mut s,
                &format!("{y}[i] = {};", q(&format!("({cond}) ? {}[i] : {}[i]", ins[0], ins[2]))),
            );
        }
        BlockKind::RelationalOp(p) => {
            each(
                &mut s,
                &format!(
                    "{y}[i] = {};",
                    q(&format!("({}[i] {} {}[i]) ? 1.0 : 0.0", ins[0], p.op.c_op(), ins[1]))
                ),
            );
        }
        BlockKind::LogicalOp(p) => {
            let mut body = String::from("int all = 1, any = 0, odd = 0, t;\n");
            for u in ins {
                writeln!(body, "t = {u}[i] != 0.0;\nall = all && t;\nany = any || t;\nodd ^= t;")
                    .unwrap();
            }
            let r = match p.op {
                LogicOp::And => "all",
                LogicOp::Or => "any",
                LogicOp::Xor => "odd",
                LogicOp::Nand => "!all",
                LogicOp::Nor | LogicOp::Not => "!any",
            };
            write!(body, "{y}[i] = {};", q(&format!("({r}) ? 1.0 : 0.0"))).unwrap();
            each(&mut s, &body);
        }
        BlockKind::Lookup1D(p) => {
            writeln!(s, "{indent}static const double bp[] = {{{}}};", lits(&p.breakpoints)).unwrap();
            writeln!(s, "{indent}static const double tb[] = {{{}}};", lits(&p.table)).unwrap();
            each(
                &mut s,
                &format!(
                    "{y}[i] = {};",
                    q(&format!("sdf_lookup(bp, tb, {}, {}[i])", p.breakpoints.len(), ins[0]))
                ),
            );
        }
        BlockKind::RateTransition(_) => {
            each(&mut s, &format!("{y}[i] = {};", q(&format!("{}[i]", ins[0]))));
        }
        other => {
            return Err(CodegenError::UnsupportedKind(
                owner.to_string(),
                other.name().to_string(),
            ))
        }
    }
    Ok(s)
}

/// Storage a stateful block keeps between firings, as C declarations with
/// the given name prefix.
pub fn state_decls(prefix: &str, kind: &BlockKind, out_specs: &[SignalSpec]) -> String {
    match blocks::initial_state(kind, out_specs) {
        State::Value(v) => format!("static double {prefix}_state[{}];\n", v.len()),
        State::Chart(_) => format!("static int {prefix}_state;\n"),
        State::None => String::new(),
    }
}

pub fn state_init(prefix: &str, kind: &BlockKind, out_specs: &[SignalSpec], indent: &str) -> String {
    let mut s = String::new();
    match blocks::initial_state(kind, out_specs) {
        State::Value(v) => {
            for (i, x) in v.iter().enumerate() {
                writeln!(s, "{indent}{prefix}_state[{i}] = {};", lit(*x)).unwrap();
            }
        }
        State::Chart(c) => writeln!(s, "{indent}{prefix}_state = {c};").unwrap(),
        State::None => {}
    }
    s
}

/// Statements copying a stateful block's state to its outputs.
pub fn state_output(prefix: &str, kind: &BlockKind, outs: &[String], out_specs: &[SignalSpec], indent: &str) -> String {
    let mut s = String::new();
    match kind {
        BlockKind::Chart(p) => {
            writeln!(s, "{indent}switch ({prefix}_state) {{").unwrap();
            for (k, _) in p.states.iter().enumerate() {
                writeln!(s, "{indent}case {k}:").unwrap();
                let row = blocks::state_output(kind, &State::Chart(k), out_specs);
                for (o, tok) in row.iter().enumerate() {
                    for (i, x) in tok.iter().enumerate() {
                        writeln!(s, "{indent}    {}[{i}] = {};", outs[o], lit(*x)).unwrap();
                    }
                }
                writeln!(s, "{indent}    break;").unwrap();
            }
            writeln!(s, "{indent}default:\n{indent}    break;\n{indent}}}").unwrap();
        }
        _ => {
            let w = out_specs[0].width;
            writeln!(
                s,
                "{indent}for (int i = 0; i < {w}; i++) {{\n{indent}    {}[i] = {prefix}_state[i];\n{indent}}}",
                outs[0]
            )
            .unwrap();
        }
    }
    s
}

/// Statements advancing a stateful block's state from its inputs.
pub fn state_update(prefix: &str, kind: &BlockKind, ins: &[String], out_specs: &[SignalSpec], indent: &str) -> String {
    let mut s = String::new();
    match kind {
        BlockKind::Chart(p) => {
            writeln!(s, "{indent}switch ({prefix}_state) {{").unwrap();
            for (k, _) in p.states.iter().enumerate() {
                writeln!(s, "{indent}case {k}:").unwrap();
                let mut first = true;
                for t in p.transitions.iter().filter(|t| t.from == k) {
                    let guard = if t.op == GuardOp::Always {
                        "1".to_string()
                    } else {
                        format!("{}[{}] {} {}", ins[t.input], t.element, guard_op(t.op), lit(t.threshold))
                    };
                    let kw = if first { "if" } else { "} else if" };
                    writeln!(s, "{indent}    {kw} ({guard}) {{\n{indent}        {prefix}_state = {};", t.to)
                        .unwrap();
                    first = false;
                }
                if !first {
                    writeln!(s, "{indent}    }}").unwrap();
                }
                writeln!(s, "{indent}    break;").unwrap();
            }
            writeln!(s, "{indent}default:\n{indent}    break;\n{indent}}}").unwrap();
        }
        _ => {
            if let Some(u) = ins.first() {
                let spec = out_specs[0];
                writeln!(
                    s,
                    "{indent}for (int i = 0; i < {}; i++) {{\n{indent}    {prefix}_state[i] = {};\n{indent}}}",
                    spec.width,
                    quantize(spec.dtype, &format!("{u}[i]"))
                )
                .unwrap();
            }
        }
    }
    s
}

fn guard_op(op: GuardOp) -> &'static str {
    match op {
        GuardOp::Always => "",
        GuardOp::Lt => "<",
        GuardOp::Le => "<=",
        GuardOp::Gt => ">",
        GuardOp::Ge => ">=",
        GuardOp::Eq => "==",
        GuardOp::Ne => "!=",
    }
}
