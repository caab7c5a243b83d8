//! Step semantics of every block kind, shared by both interpreters.
//!
//! Arithmetic is carried out in `f64` in a fixed operation order and the
//! result is converted to the output type at the end. The C templates in
//! `codegen` follow the same order so results agree bit for bit.

use crate::model::*;

/// Internal state of a block between activations.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    None,
    /// Held value of a unit delay or data store memory.
    Value(Token),
    /// Current chart state.
    Chart(usize),
}

pub fn initial_state(kind: &BlockKind, out: &[SignalSpec]) -> State {
    match kind {
        BlockKind::UnitDelay(_) | BlockKind::DataStoreMemory(_) => {
            let s = out[0];
            State::Value(kind.initial_token(s.dtype, s.width).expect("delay-like"))
        }
        BlockKind::Chart(p) => State::Chart(p.initial),
        _ => State::None,
    }
}

fn quantize(spec: SignalSpec, mut t: Token) -> Token {
    for x in &mut t {
        *x = spec.dtype.quantize(*x);
    }
    t
}

fn truth(x: f64) -> bool {
    x != 0.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Piecewise-linear interpolation with clamping at both ends.
pub fn lookup(bp: &[f64], table: &[f64], u: f64) -> f64 {
    let n = bp.len();
    if !(u > bp[0]) {
        return table[0];
    }
    if u >= bp[n - 1] {
        return table[n - 1];
    }
    let mut i = 0;
    while i + 2 < n && u >= bp[i + 1] {
        i += 1;
    }
    table[i] + (u - bp[i]) * (table[i + 1] - table[i]) / (bp[i + 1] - bp[i])
}

/// Outputs of a block without internal state, from its current inputs.
pub fn compute(kind: &BlockKind, inputs: &[&[f64]], out: &[SignalSpec]) -> Vec<Token> {
    let w = out.first().map_or(0, |s| s.width);
    let y: Token = match kind {
        BlockKind::Constant(p) => {
            if p.value.len() == w {
                p.value.clone()
            } else {
                vec![p.value[0]; w]
            }
        }
        BlockKind::Gain(p) => inputs[0].iter().map(|&u| p.gain * u).collect(),
        BlockKind::Sum(p) => (0..w)
            .map(|i| {
                let mut signs = p.signs.chars();
                let mut acc = match signs.next() {
                    Some('-') => -inputs[0][i],
                    _ => inputs[0][i],
                };
                for (j, s) in signs.enumerate() {
                    let u = inputs[j + 1][i];
                    acc = if s == '-' { acc - u } else { acc + u };
                }
                acc
            })
            .collect(),
        BlockKind::Product(p) => (0..w)
            .map(|i| {
                let mut ops = p.ops.chars();
                let mut acc = match ops.next() {
                    Some('/') => 1.0 / inputs[0][i],
                    _ => inputs[0][i],
                };
                for (j, o) in ops.enumerate() {
                    let u = inputs[j + 1][i];
                    acc = if o == '/' { acc / u } else { acc * u };
                }
                acc
            })
            .collect(),
        BlockKind::Saturation(p) => inputs[0]
            .iter()
            .map(|&u| {
                if u > p.upper {
                    p.upper
                } else if u < p.lower {
                    p.lower
                } else {
                    u
                }
            })
            .collect(),
        BlockKind::Switch(p) => (0..w)
            .map(|i| {
                let ctrl = inputs[1];
                let c = if ctrl.len() == 1 { ctrl[0] } else { ctrl[i] };
                let pass = match p.criterion {
                    SwitchCriterion::Ge => c >= p.threshold,
                    SwitchCriterion::Gt => c > p.threshold,
                    SwitchCriterion::Ne0 => c != 0.0,
                };
                if pass {
                    inputs[0][i]
                } else {
                    inputs[2][i]
                }
            })
            .collect(),
        BlockKind::RelationalOp(p) => (0..w)
            .map(|i| flag(p.op.eval(inputs[0][i], inputs[1][i])))
            .collect(),
        BlockKind::LogicalOp(p) => (0..w)
            .map(|i| {
                let mut all = true;
                let mut any = false;
                let mut odd = false;
                for u in inputs {
                    let t = truth(u[i]);
                    all = all && t;
                    any = any || t;
                    odd ^= t;
                }
                flag(match p.op {
                    LogicOp::And => all,
                    LogicOp::Or => any,
                    LogicOp::Xor => odd,
                    LogicOp::Nand => !all,
                    LogicOp::Nor => !any,
                    LogicOp::Not => !any,
                })
            })
            .collect(),
        BlockKind::Lookup1D(p) => inputs[0]
            .iter()
            .map(|&u| lookup(&p.breakpoints, &p.table, u))
            .collect(),
        BlockKind::RateTransition(_) => inputs[0].to_vec(),
        other => panic!("{} has no stateless step", other.name()),
    };
    match out.first() {
        Some(&spec) => vec![quantize(spec, y)],
        None => Vec::new(),
    }
}

/// Outputs of a stateful block, which depend on its state only.
pub fn state_output(kind: &BlockKind, state: &State, out: &[SignalSpec]) -> Vec<Token> {
    match (kind, state) {
        (BlockKind::Chart(p), State::Chart(s)) => p.outputs[*s]
            .iter()
            .zip(out)
            .map(|(t, &spec)| quantize(spec, t.clone()))
            .collect(),
        (_, State::Value(v)) => vec![v.clone()],
        _ => panic!("{} has no state output", kind.name()),
    }
}

/// Advances the state of a stateful block with the inputs of the current
/// activation.
pub fn state_update(kind: &BlockKind, state: &mut State, inputs: &[&[f64]], out: &[SignalSpec]) {
    match (kind, state) {
        (BlockKind::Chart(p), State::Chart(s)) => {
            let from = *s;
            if let Some(t) = p.transitions.iter().find(|t| {
                t.from == from
                    && (t.op == GuardOp::Always || t.op.holds(inputs[t.input][t.element], t.threshold))
            }) {
                *s = t.to;
            }
        }
        (BlockKind::UnitDelay(_) | BlockKind::DataStoreMemory(_), State::Value(v)) => {
            if let Some(u) = inputs.first() {
                *v = quantize(out[0], u.to_vec());
            }
        }
        _ => panic!("{} has no state update", kind.name()),
    }
}

/// Evaluates a control condition. `prev` holds the last sampled control
/// value for edge detection and is only advanced when the parent is enabled.
pub fn control_enable(mode: SubsystemMode, ctrl: f64, parent_enabled: bool, prev: &mut f64) -> bool {
    if !parent_enabled {
        return false;
    }
    let en = match mode {
        SubsystemMode::Normal => true,
        SubsystemMode::Enabled => ctrl > 0.0,
        SubsystemMode::Triggered => ctrl > 0.0 && !(*prev > 0.0),
    };
    *prev = ctrl;
    en
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(kind: BlockKind, ins: &[&[f64]]) -> Token {
        compute(&kind, ins, &[SignalSpec::f64(ins.first().map_or(1, |i| i.len()))])
            .remove(0)
    }

    #[test]
    fn sum_signs() {
        let k = BlockKind::Sum(SumParams { signs: "-+-".into() });
        assert_eq!(run(k, &[&[1.0], &[5.0], &[2.0]]), vec![2.0]);
    }

    #[test]
    fn product_ops() {
        let k = BlockKind::Product(ProductParams { ops: "*/".into() });
        assert_eq!(run(k, &[&[6.0, 1.0], &[3.0, 4.0]]), vec![2.0, 0.25]);
    }

    #[test]
    fn lookup_interpolates_and_clamps() {
        let bp = [0.0, 10.0, 20.0];
        let t = [0.0, 100.0, 400.0];
        assert_eq!(lookup(&bp, &t, -5.0), 0.0);
        assert_eq!(lookup(&bp, &t, 5.0), 50.0);
        assert_eq!(lookup(&bp, &t, 15.0), 250.0);
        assert_eq!(lookup(&bp, &t, 25.0), 400.0);
        assert_eq!(lookup(&bp, &t, 10.0), 100.0);
    }

    #[test]
    fn saturation_bounds() {
        let k = BlockKind::Saturation(SaturationParams { lower: -1.0, upper: 1.0 });
        assert_eq!(run(k, &[&[-3.0, 0.5, 3.0]]), vec![-1.0, 0.5, 1.0]);
    }

    #[test]
    fn switch_selects_elementwise() {
        let k = BlockKind::Switch(SwitchParams {
            criterion: SwitchCriterion::Ge,
            threshold: 0.5,
            allow_varsize: false,
        });
        assert_eq!(run(k, &[&[1.0, 2.0], &[1.0, 0.0], &[9.0, 8.0]]), vec![1.0, 8.0]);
    }

    #[test]
    fn logic_ops() {
        let xor = BlockKind::LogicalOp(LogicParams { op: LogicOp::Xor });
        assert_eq!(run(xor, &[&[1.0, 1.0], &[0.0, 2.0]]), vec![1.0, 0.0]);
        let not = BlockKind::LogicalOp(LogicParams { op: LogicOp::Not });
        assert_eq!(run(not, &[&[0.0, 3.0]]), vec![1.0, 0.0]);
    }

    #[test]
    fn i32_output_truncates() {
        let k = BlockKind::Gain(GainParams { gain: 0.5 });
        let y = compute(&k, &[&[5.0]], &[SignalSpec::new(DType::I32, 1)]);
        assert_eq!(y, vec![vec![2.0]]);
    }

    #[test]
    fn chart_takes_first_enabled_transition() {
        let p = ChartParams {
            states: vec!["a".into(), "b".into(), "c".into()],
            initial: 0,
            transitions: vec![
                Transition { from: 0, to: 1, input: 0, element: 0, op: GuardOp::Gt, threshold: 1.0 },
                Transition { from: 0, to: 2, input: 0, element: 0, op: GuardOp::Gt, threshold: 0.0 },
            ],
            outputs: vec![vec![vec![0.0]], vec![vec![1.0]], vec![vec![2.0]]],
            allow_varsize: false,
        };
        let k = BlockKind::Chart(p);
        let out = [SignalSpec::f64(1)];
        let mut s = initial_state(&k, &out);
        state_update(&k, &mut s, &[&[5.0]], &out);
        assert_eq!(s, State::Chart(1));
        assert_eq!(state_output(&k, &s, &out), vec![vec![1.0]]);
    }

    #[test]
    fn trigger_is_rising_edge() {
        let mut prev = 0.0;
        let fired: Vec<bool> = [0.0, 1.0, 1.0, 0.0, 1.0]
            .iter()
            .map(|&c| control_enable(SubsystemMode::Triggered, c, true, &mut prev))
            .collect();
        assert_eq!(fired, [false, true, false, false, true]);
    }
}
