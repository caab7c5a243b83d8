//! Random SDF graphs with a known repetition vector.

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mbd2sdf::model::BlockKind;
use mbd2sdf::sdf::{Actor, ActorKind, Sdfg};

pub struct Planted {
    pub graph: Sdfg,
    /// Firings per iteration the rates were derived from (not reduced).
    pub planted: Vec<u64>,
}

fn empty(n: usize) -> Sdfg {
    let mut g = Sdfg::new("rnd", Ratio::from_integer(1));
    for i in 0..n {
        g.actors.push(Actor::new(format!("a{i}"), ActorKind::Block(BlockKind::BusCreator)));
    }
    g
}

/// Rates of a channel between actors that fire `ts` and `td` times.
fn rates(rng: &mut ChaCha8Rng, ts: u64, td: u64) -> (u64, u64) {
    let l = ts.lcm(&td);
    let k = rng.gen_range(1..=2);
    (k * l / ts, k * l / td)
}

/// A connected consistent graph. Edges of a random spanning tree point from
/// lower to higher index; extra edges may point backwards, and those carry
/// one iteration's worth of initial tokens so the graph stays live.
pub fn consistent(seed: u64, max_actors: usize) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_actors);
    let t: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let mut g = empty(n);
    for j in 1..n {
        let i = rng.gen_range(0..j);
        let (rs, rd) = rates(&mut rng, t[i], t[j]);
        g.connect(&format!("a{i}"), &format!("a{j}"), rs, rd, 0);
    }
    for _ in 0..rng.gen_range(0..n) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let (rs, rd) = rates(&mut rng, t[i], t[j]);
        let delay = if j <= i { rd * t[j] } else { rng.gen_range(0..3) };
        g.connect(&format!("a{i}"), &format!("a{j}"), rs, rd, delay);
    }
    Planted { graph: g, planted: t }
}

/// A consistent graph plus one channel parallel to an existing one whose
/// rate ratio differs.
pub fn with_mismatched_parallel(seed: u64, max_actors: usize) -> Sdfg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut p = consistent(seed, max_actors.max(2));
    if p.graph.channels.is_empty() {
        p.graph.actors.push(Actor::new("b", ActorKind::Block(BlockKind::BusCreator)));
        p.graph.connect("a0", "b", 1, 1, 0);
    }
    let k = rng.gen_range(0..p.graph.channels.len());
    let c = p.graph.channels[k].clone();
    let (rs, rd) = loop {
        let rs = rng.gen_range(1..=9u64);
        let rd = rng.gen_range(1..=9u64);
        if rs * c.rate_dst != rd * c.rate_src {
            break (rs, rd);
        }
    };
    p.graph.connect(&c.src.actor, &c.dst.actor, rs, rd, 0);
    p.graph
}

/// A consistent graph with an added directed cycle whose channels carry no
/// initial tokens.
pub fn with_empty_cycle(seed: u64, max_actors: usize) -> Sdfg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1c1e);
    let p = consistent(seed, max_actors.max(2));
    let mut g = p.graph;
    let n = g.actors.len();
    let len = rng.gen_range(1..=n.min(4));
    let mut members: Vec<usize> = (0..n).collect();
    for i in 0..len {
        let j = rng.gen_range(i..n);
        members.swap(i, j);
    }
    members.truncate(len);
    for w in 0..len {
        let a = members[w];
        let b = members[(w + 1) % len];
        let (rs, rd) = rates(&mut rng, p.planted[a], p.planted[b]);
        g.connect(&format!("a{a}"), &format!("a{b}"), rs, rd, 0);
    }
    g
}
