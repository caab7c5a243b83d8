//! Seeded generator of translatable multirate block models.
//!
//! Models nest subsystems up to a given depth and draw every period from
//! {1, 2, 4, 8}. Feedback loops always pass through a UnitDelay and never
//! through a subsystem. Conditional and atomic subsystems run at a single
//! rate, as the checker requires.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mbd2sdf::model::{load_model, BlockModel};

pub const PERIODS: [i64; 4] = [1, 2, 4, 8];

#[derive(Clone)]
struct Sig {
    block: String,
    port: usize,
    dtype: &'static str,
    width: usize,
    /// Depends on a subsystem output.
    tainted: bool,
    /// Comes straight from the scope's own Inport.
    boundary: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    width: usize,
    conns: Vec<Value>,
    next: usize,
    tags: usize,
}

fn period(p: i64) -> Value {
    json!({"num": p, "den": 1})
}

fn spec(dtype: &str, width: usize) -> Value {
    json!({"dtype": dtype, "width": width})
}

impl Gen {
    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("{stem}{}", self.next)
    }

    fn wire(&mut self, prefix: &str, s: &Sig, dst: &str, port: usize) {
        self.conns.push(json!({
            "src": [s.block, s.port],
            "dst": [format!("{prefix}{dst}"), port],
            "dtype": s.dtype,
            "width": s.width,
        }));
    }

    fn sig(&self, prefix: &str, id: &str, port: usize, dtype: &'static str, width: usize, tainted: bool) -> Sig {
        Sig {
            block: format!("{prefix}{id}"),
            port,
            dtype,
            width,
            tainted,
            boundary: false,
        }
    }

    fn pick(&mut self, pool: &[Sig], dtype: &str) -> Option<Sig> {
        let w = self.width;
        let c: Vec<&Sig> = pool.iter().filter(|s| s.dtype == dtype && s.width == w).collect();
        c.choose(&mut self.rng).map(|s| (*s).clone())
    }

    fn period_for(&mut self, fixed: Option<i64>) -> i64 {
        fixed.unwrap_or_else(|| *PERIODS.choose(&mut self.rng).expect("nonempty"))
    }

    fn waveform(&mut self) -> Value {
        match self.rng.gen_range(0..4) {
            0 => json!({"kind": "sine", "amplitude": self.rng.gen_range(1.0..10.0),
                        "period": self.rng.gen_range(5.0..60.0), "bias": self.rng.gen_range(-2.0..2.0)}),
            1 => json!({"kind": "ramp", "start": self.rng.gen_range(-5.0..5.0), "slope": self.rng.gen_range(-0.5..0.5)}),
            2 => {
                let period = self.rng.gen_range(2..9u64);
                json!({"kind": "pulse", "period": period, "width": self.rng.gen_range(1..period),
                       "high": 1.0, "low": 0.0})
            }
            _ => {
                let values: Vec<Vec<f64>> = (0..self.rng.gen_range(2..7))
                    .map(|_| vec![self.rng.gen_range(-4i32..5) as f64 * 0.75])
                    .collect();
                json!({"kind": "table", "values": values, "repeat": true})
            }
        }
    }

    /// Fills one scope. `pool` starts with the scope's inputs.
    fn scope(
        &mut self,
        prefix: &str,
        depth_left: usize,
        mut pool: Vec<Sig>,
        fixed: Option<i64>,
        children: &mut Vec<Value>,
    ) -> Vec<Sig> {
        let w = self.width;
        let mut delays: Vec<(String, bool)> = Vec::new();
        let count = self.rng.gen_range(3..9);
        for _ in 0..count {
            let p = self.period_for(fixed);
            let roll = self.rng.gen_range(0..100);
            let f = self.pick(&pool, "f64");
            match (roll, f) {
                (_, None) | (0..=9, _) => {
                    let id = self.fresh("Const");
                    let v: Vec<f64> = (0..w).map(|_| self.rng.gen_range(-3i32..4) as f64 * 0.5).collect();
                    children.push(json!({"id": id, "kind": "Constant", "params": {"value": v},
                        "sample_time": period(p), "ports": {"out": [spec("f64", w)]}}));
                    pool.push(self.sig(prefix, &id, 0, "f64", w, false));
                }
                (10..=19, Some(a)) => {
                    let id = self.fresh("Gain");
                    let g = self.rng.gen_range(-2.0..2.0);
                    self.unary(prefix, &id, json!({"kind": "Gain", "params": {"gain": g}}), p, &a, children, &mut pool);
                }
                (20..=29, Some(a)) => {
                    let b = self.pick(&pool, "f64").expect("present");
                    let id = self.fresh("Sum");
                    let signs = *["++", "+-", "-+"].choose(&mut self.rng).expect("nonempty");
                    children.push(json!({"id": id, "kind": "Sum", "params": {"signs": signs},
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w), spec("f64", w)], "out": [spec("f64", w)]}}));
                    self.wire(prefix, &a, &id, 0);
                    self.wire(prefix, &b, &id, 1);
                    pool.push(self.sig(prefix, &id, 0, "f64", w, a.tainted || b.tainted));
                }
                (30..=36, Some(a)) => {
                    let b = self.pick(&pool, "f64").expect("present");
                    let id = self.fresh("Prod");
                    let ops = if self.rng.gen_bool(0.8) { "**" } else { "*/" };
                    children.push(json!({"id": id, "kind": "Product", "params": {"ops": ops},
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w), spec("f64", w)], "out": [spec("f64", w)]}}));
                    self.wire(prefix, &a, &id, 0);
                    self.wire(prefix, &b, &id, 1);
                    pool.push(self.sig(prefix, &id, 0, "f64", w, a.tainted || b.tainted));
                }
                (37..=43, Some(a)) => {
                    let id = self.fresh("Sat");
                    let lo = self.rng.gen_range(-5.0..0.0);
                    let hi = self.rng.gen_range(0.0..5.0);
                    self.unary(prefix, &id, json!({"kind": "Saturation", "params": {"lower": lo, "upper": hi}}), p, &a, children, &mut pool);
                }
                (44..=49, Some(a)) => {
                    let id = self.fresh("Lut");
                    let params = json!({"breakpoints": [-4.0, 0.0, 1.0, 6.0], "table": [2.0, -1.0, 0.5, 3.0]});
                    self.unary(prefix, &id, json!({"kind": "Lookup1D", "params": params}), p, &a, children, &mut pool);
                }
                (50..=57, Some(a)) => {
                    let b = self.pick(&pool, "f64").expect("present");
                    let id = self.fresh("Rel");
                    let op = *["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).expect("nonempty");
                    children.push(json!({"id": id, "kind": "RelationalOp", "params": {"op": op},
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w), spec("f64", w)], "out": [spec("bool", w)]}}));
                    self.wire(prefix, &a, &id, 0);
                    self.wire(prefix, &b, &id, 1);
                    pool.push(self.sig(prefix, &id, 0, "bool", w, a.tainted || b.tainted));
                }
                (58..=63, Some(a)) => {
                    let b = self.pick(&pool, "f64").expect("present");
                    let ctrl = self.pick(&pool, "bool").unwrap_or_else(|| b.clone());
                    let id = self.fresh("Switch");
                    let crit = *["ge", "gt", "ne0"].choose(&mut self.rng).expect("nonempty");
                    children.push(json!({"id": id, "kind": "Switch",
                        "params": {"criterion": crit, "threshold": 0.5},
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w), spec(ctrl.dtype, ctrl.width), spec("f64", w)],
                                  "out": [spec("f64", w)]}}));
                    self.wire(prefix, &a, &id, 0);
                    self.wire(prefix, &ctrl, &id, 1);
                    self.wire(prefix, &b, &id, 2);
                    pool.push(self.sig(prefix, &id, 0, "f64", w, a.tainted || b.tainted || ctrl.tainted));
                }
                (64..=67, _) if self.pick(&pool, "bool").is_some() => {
                    let a = self.pick(&pool, "bool").expect("present");
                    let b = self.pick(&pool, "bool").expect("present");
                    let id = self.fresh("Logic");
                    let op = *["AND", "OR", "XOR"].choose(&mut self.rng).expect("nonempty");
                    children.push(json!({"id": id, "kind": "LogicalOp", "params": {"op": op},
                        "sample_time": period(p),
                        "ports": {"in": [spec("bool", w), spec("bool", w)], "out": [spec("bool", w)]}}));
                    self.wire(prefix, &a, &id, 0);
                    self.wire(prefix, &b, &id, 1);
                    pool.push(self.sig(prefix, &id, 0, "bool", w, a.tainted || b.tainted));
                }
                (68..=77, _) => {
                    // Input wired once the scope is complete, closing a loop.
                    let id = self.fresh("Delay");
                    let init: Vec<f64> = (0..w).map(|_| self.rng.gen_range(-2i32..3) as f64).collect();
                    children.push(json!({"id": id, "kind": "UnitDelay", "params": {"initial": init},
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w)], "out": [spec("f64", w)]}}));
                    delays.push((id.clone(), false));
                    pool.push(self.sig(prefix, &id, 0, "f64", w, false));
                }
                (78..=83, Some(a)) => {
                    let id = self.fresh("Chart");
                    let i32_out = self.rng.gen_bool(0.4);
                    let (dtype, outs) = if i32_out {
                        ("i32", json!([[[0.0]], [[2.0]], [[-1.0]]]))
                    } else {
                        ("f64", json!([[[0.5]], [[1.5]], [[-2.5]]]))
                    };
                    let e = self.rng.gen_range(0..w);
                    let params = json!({
                        "states": ["A", "B", "C"], "initial": 0,
                        "transitions": [
                            {"from": 0, "to": 1, "input": 0, "element": e, "op": ">", "threshold": 0.5},
                            {"from": 1, "to": 2, "input": 0, "element": 0, "op": "<", "threshold": -0.5},
                            {"from": 1, "to": 0, "input": 0, "element": e, "op": "<=", "threshold": 0.0},
                            {"from": 2, "to": 0, "input": 0, "element": 0, "op": ">=", "threshold": 1.0}
                        ],
                        "outputs": outs
                    });
                    children.push(json!({"id": id, "kind": "Chart", "params": params,
                        "sample_time": period(p),
                        "ports": {"in": [spec("f64", w)], "out": [spec(dtype, 1)]}}));
                    self.wire(prefix, &a, &id, 0);
                    pool.push(self.sig(prefix, &id, 0, dtype, 1, a.tainted));
                }
                (84..=87, Some(a)) => {
                    // Goto/From pair, both in this scope.
                    self.tags += 1;
                    let tag = format!("t{}", self.tags);
                    let gid = self.fresh("Goto");
                    let fid = self.fresh("From");
                    children.push(json!({"id": gid, "kind": "Goto", "params": {"tag": tag},
                        "ports": {"in": [spec("f64", w)]}}));
                    children.push(json!({"id": fid, "kind": "From", "params": {"tag": tag},
                        "ports": {"out": [spec("f64", w)]}}));
                    self.wire(prefix, &a, &gid, 0);
                    pool.push(Sig { boundary: a.boundary, ..self.sig(prefix, &fid, 0, "f64", w, a.tainted) });
                }
                (88..=91, Some(a)) => {
                    let b = self.pick(&pool, "f64").expect("present");
                    let cid = self.fresh("Bus");
                    let sid = self.fresh("Sel");
                    children.push(json!({"id": cid, "kind": "BusCreator",
                        "ports": {"in": [spec("f64", w), spec("f64", w)], "out": [spec("bus", 2)]}}));
                    children.push(json!({"id": sid, "kind": "BusSelector", "params": {"elements": [1, 0]},
                        "ports": {"in": [spec("bus", 2)], "out": [spec("f64", w), spec("f64", w)]}}));
                    self.wire(prefix, &a, &cid, 0);
                    self.wire(prefix, &b, &cid, 1);
                    self.conns.push(json!({"src": [format!("{prefix}{cid}"), 0], "dst": [format!("{prefix}{sid}"), 0],
                        "dtype": "bus", "width": 2}));
                    pool.push(Sig { boundary: b.boundary, ..self.sig(prefix, &sid, 0, "f64", w, b.tainted) });
                    pool.push(Sig { boundary: a.boundary, ..self.sig(prefix, &sid, 1, "f64", w, a.tainted) });
                }
                (_, Some(a)) if depth_left > 0 => {
                    let outs = self.subsystem(prefix, depth_left, fixed, &a, children, &pool);
                    pool.extend(outs);
                }
                (_, Some(a)) => {
                    let id = self.fresh("Gain");
                    self.unary(prefix, &id, json!({"kind": "Gain", "params": {"gain": 0.75}}), p, &a, children, &mut pool);
                }
            }
        }
        for (id, _) in &mut delays {
            let c: Vec<Sig> = pool
                .iter()
                .filter(|s| s.dtype == "f64" && s.width == self.width && !s.tainted)
                .cloned()
                .collect();
            let src = c.choose(&mut self.rng).expect("delay outputs are untainted").clone();
            let id = id.clone();
            self.wire(prefix, &src, &id, 0);
        }
        pool
    }

    #[allow(clippy::too_many_arguments)]
    fn unary(
        &mut self,
        prefix: &str,
        id: &str,
        kind: Value,
        p: i64,
        a: &Sig,
        children: &mut Vec<Value>,
        pool: &mut Vec<Sig>,
    ) {
        let w = self.width;
        let mut b = kind;
        b["id"] = json!(id);
        b["sample_time"] = period(p);
        b["ports"] = json!({"in": [spec("f64", w)], "out": [spec("f64", w)]});
        children.push(b);
        self.wire(prefix, a, id, 0);
        pool.push(self.sig(prefix, id, 0, "f64", w, a.tainted));
    }

    fn subsystem(
        &mut self,
        prefix: &str,
        depth_left: usize,
        fixed: Option<i64>,
        data: &Sig,
        children: &mut Vec<Value>,
        pool: &[Sig],
    ) -> Vec<Sig> {
        let w = self.width;
        let id = self.fresh("Sub");
        let scalars: Vec<Sig> = pool
            .iter()
            .filter(|s| s.width == 1 && matches!(s.dtype, "f64" | "bool"))
            .cloned()
            .collect();
        let mode = *["normal", "normal", "enabled", "triggered"].choose(&mut self.rng).expect("nonempty");
        let mode = if scalars.is_empty() { "normal" } else { mode };
        let atomic = mode == "normal" && self.rng.gen_bool(0.4);
        let inner_fixed = if mode != "normal" || atomic { Some(self.period_for(fixed)) } else { fixed };
        let inner = format!("{prefix}{id}/");

        let mut ins = vec![data.clone()];
        if self.rng.gen_bool(0.5) {
            ins.push(self.pick(pool, "f64").expect("present"));
        }
        let mut body = Vec::new();
        let mut inner_pool = Vec::new();
        for (k, s) in ins.iter().enumerate() {
            let pid = format!("In{}", k + 1);
            body.push(json!({"id": pid, "kind": "Inport", "ports": {"out": [spec("f64", w)]}}));
            inner_pool.push(Sig { boundary: true, ..self.sig(&inner, &pid, 0, "f64", w, false) });
            self.wire(prefix, s, &id, k);
        }
        let mut in_specs: Vec<Value> = ins.iter().map(|_| spec("f64", w)).collect();
        if mode != "normal" {
            let ctrl = scalars.choose(&mut self.rng).expect("nonempty").clone();
            in_specs.push(spec(ctrl.dtype, ctrl.width));
            self.wire(prefix, &ctrl, &id, ins.len());
            ins.push(ctrl);
        }
        // Make sure the body has something to publish besides its inputs.
        let seed = inner_pool[0].clone();
        let gid = self.fresh("Gain");
        let p = self.period_for(inner_fixed);
        self.unary(&inner, &gid, json!({"kind": "Gain", "params": {"gain": 1.25}}), p, &seed, &mut body, &mut inner_pool);
        let inner_pool = self.scope(&inner, depth_left - 1, inner_pool, inner_fixed, &mut body);

        let candidates: Vec<Sig> = inner_pool
            .iter()
            .filter(|s| !s.boundary && matches!(s.dtype, "f64" | "bool") && s.width == w)
            .cloned()
            .collect();
        let n = self.rng.gen_range(1..3);
        let mut out_specs = Vec::new();
        let mut outs = Vec::new();
        for k in 0..n {
            let s = candidates.choose(&mut self.rng).expect("gain output qualifies").clone();
            let oid = format!("Out{}", k + 1);
            body.push(json!({"id": oid, "kind": "Outport", "ports": {"in": [spec(s.dtype, w)]}}));
            self.wire(&inner, &s, &oid, 0);
            out_specs.push(spec(s.dtype, w));
            outs.push(Sig {
                block: format!("{prefix}{id}"),
                port: k,
                dtype: s.dtype,
                width: w,
                tainted: true,
                boundary: false,
            });
        }
        let mut params = json!({});
        if mode != "normal" {
            params["mode"] = json!(mode);
        }
        if atomic {
            params["atomic"] = json!(true);
        }
        children.push(json!({"id": id, "kind": "Subsystem", "params": params,
            "ports": {"in": in_specs, "out": out_specs}, "children": body}));
        outs
    }
}

/// JSON text of a random translatable model.
pub fn random_model_json(seed: u64, max_depth: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = if rng.gen_bool(0.7) { 1 } else { 2 };
    let depth = rng.gen_range(0..=max_depth);
    let mut g = Gen {
        rng,
        width,
        conns: Vec::new(),
        next: 0,
        tags: 0,
    };
    let mut children = Vec::new();
    let mut pool = Vec::new();
    for k in 0..g.rng.gen_range(1..3) {
        let id = format!("In{}", k + 1);
        let p = g.period_for(None);
        let wf = g.waveform();
        children.push(json!({"id": id, "kind": "Inport", "params": {"waveform": wf},
            "sample_time": period(p), "ports": {"out": [spec("f64", width)]}}));
        pool.push(g.sig("", &id, 0, "f64", width, false));
    }
    let pool = g.scope("", depth, pool, None, &mut children);

    let n = g.rng.gen_range(1..4);
    let mut outs: Vec<Sig> = pool.iter().rev().take(3).cloned().collect();
    outs.extend(pool.iter().filter(|s| s.block.contains("Sub")).cloned());
    outs.dedup_by(|a, b| a.block == b.block && a.port == b.port);
    for k in 0..n.max(outs.len().min(4)) {
        let s = outs.get(k).cloned().unwrap_or_else(|| pool.choose(&mut g.rng).expect("nonempty").clone());
        let id = format!("Out{}", k + 1);
        let p = g.period_for(None);
        children.push(json!({"id": id, "kind": "Outport", "sample_time": period(p),
            "ports": {"in": [spec(s.dtype, s.width)]}}));
        g.wire("", &s, &id, 0);
    }
    let model = json!({
        "name": format!("rnd{seed}"),
        "base_step": {"num": 1, "den": 1},
        "root": {"id": "root", "kind": "Subsystem", "children": children},
        "connections": g.conns,
    });
    serde_json::to_string_pretty(&model).expect("serializable")
}

pub fn random_model(seed: u64, max_depth: usize) -> BlockModel {
    let text = random_model_json(seed, max_depth);
    load_model(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"))
}
