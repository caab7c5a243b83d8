use std::collections::{BTreeMap, VecDeque};

use num_integer::Integer;
use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use super::Sdfg;

pub type RepetitionVector = BTreeMap<String, u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SdfError {
    #[error("inconsistent graph: {0}")]
    Inconsistent(String),
    #[error("deadlock: {0}")]
    Deadlock(String),
    #[error("periods {0} and {1} are not harmonic")]
    NonHarmonic(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    /// Actor ids in firing order for one iteration.
    pub firings: Vec<String>,
    /// Highest token count seen on each channel, initial delays included.
    pub peak: Vec<u64>,
}

impl Schedule {
    /// Run-length rendering, e.g. `A A B` becomes `A^2 B`.
    pub fn render(&self) -> String {
        let mut out: Vec<String> = Vec::new();
        let mut i = 0;
        while i < self.firings.len() {
            let mut j = i;
            while j < self.firings.len() && self.firings[j] == self.firings[i] {
                j += 1;
            }
            if j - i == 1 {
                out.push(self.firings[i].clone());
            } else {
                out.push(format!("{}^{}", self.firings[i], j - i));
            }
            i = j;
        }
        out.join(" ")
    }
}

/// Smallest positive integer solution of the balance equations.
///
/// Each connected component is solved independently. When every actor
/// carries a period, components are scaled so that all of them span the
/// same amount of model time per iteration.
pub fn repetition_vector(g: &Sdfg) -> Result<RepetitionVector, SdfError> {
    let n = g.actors.len();
    let index: BTreeMap<&str, usize> =
        g.actors.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut adj: Vec<Vec<(usize, Ratio<i128>)>> = vec![Vec::new(); n];
    for c in &g.channels {
        let (Some(&s), Some(&d)) = (index.get(c.src.actor.as_str()), index.get(c.dst.actor.as_str()))
        else {
            return Err(SdfError::Inconsistent(format!("channel {} has a dangling endpoint", c.id)));
        };
        if c.rate_src == 0 || c.rate_dst == 0 {
            return Err(SdfError::Inconsistent(format!("channel {} has a zero rate", c.id)));
        }
        // q[d] = q[s] * rate_src / rate_dst
        let f = Ratio::new(c.rate_src as i128, c.rate_dst as i128);
        adj[s].push((d, f));
        adj[d].push((s, f.recip()));
    }

    let mut q: Vec<Option<Ratio<i128>>> = vec![None; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if q[start].is_some() {
            continue;
        }
        let mut members = vec![start];
        q[start] = Some(Ratio::from_integer(1));
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let qu = q[u].expect("visited");
            for &(v, f) in &adj[u] {
                let want = qu * f;
                match q[v] {
                    None => {
                        q[v] = Some(want);
                        members.push(v);
                        queue.push_back(v);
                    }
                    Some(have) if have != want => {
                        return Err(SdfError::Inconsistent(format!(
                            "actor {} needs {} and {} firings relative to {}",
                            g.actors[v].id, have, want, g.actors[start].id
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
        components.push(members);
    }

    let mut out = vec![0u128; n];
    for members in &components {
        let lcm = members
            .iter()
            .fold(1i128, |acc, &i| acc.lcm(q[i].expect("solved").denom()));
        let ints: Vec<i128> = members
            .iter()
            .map(|&i| (q[i].expect("solved") * lcm).to_integer())
            .collect();
        let gcd = ints.iter().fold(0i128, |acc, &x| acc.gcd(&x));
        for (&i, &x) in members.iter().zip(&ints) {
            out[i] = (x / gcd) as u128;
        }
    }

    // Align components in time when every actor has a period.
    if components.len() > 1 {
        let ticks: Option<Vec<u128>> = g
            .actors
            .iter()
            .map(|a| {
                a.period.and_then(|p| {
                    let r = p / g.base_step;
                    r.is_integer().then(|| *r.numer() as u128)
                })
            })
            .collect();
        if let Some(ticks) = ticks {
            let spans: Vec<u128> = components.iter().map(|m| out[m[0]] * ticks[m[0]]).collect();
            let aligned = components
                .iter()
                .all(|m| m.iter().all(|&i| out[i] * ticks[i] == out[m[0]] * ticks[m[0]]));
            if aligned {
                let h = spans.iter().fold(1u128, |acc, s| acc.lcm(s));
                for (m, s) in components.iter().zip(&spans) {
                    for &i in m {
                        out[i] *= h / s;
                    }
                }
            }
        }
    }

    Ok(g.actors
        .iter()
        .zip(out)
        .map(|(a, x)| (a.id.clone(), x as u64))
        .collect())
}

/// One iteration of `q`, firing the enabled actor with the smallest id
/// whenever more than one could fire.
pub fn build_schedule(g: &Sdfg, q: &RepetitionVector) -> Result<Schedule, SdfError> {
    let mut order: Vec<usize> = (0..g.actors.len()).collect();
    order.sort_by(|&a, &b| g.actors[a].id.cmp(&g.actors[b].id));
    let index: BTreeMap<&str, usize> =
        g.actors.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut ins: Vec<Vec<usize>> = vec![Vec::new(); g.actors.len()];
    let mut outs: Vec<Vec<usize>> = vec![Vec::new(); g.actors.len()];
    for (k, c) in g.channels.iter().enumerate() {
        outs[index[c.src.actor.as_str()]].push(k);
        ins[index[c.dst.actor.as_str()]].push(k);
    }
    let mut tokens: Vec<u64> = g.channels.iter().map(|c| c.delay).collect();
    let mut peak = tokens.clone();
    let target: Vec<u64> = g.actors.iter().map(|a| q.get(&a.id).copied().unwrap_or(0)).collect();
    let total: u64 = target.iter().sum();
    let mut fired = vec![0u64; g.actors.len()];
    let mut firings = Vec::with_capacity(total as usize);

    while (firings.len() as u64) < total {
        let next = order.iter().copied().find(|&a| {
            fired[a] < target[a] && ins[a].iter().all(|&k| tokens[k] >= g.channels[k].rate_dst)
        });
        let Some(a) = next else {
            let stuck: Vec<&str> = order
                .iter()
                .filter(|&&a| fired[a] < target[a])
                .map(|&a| g.actors[a].id.as_str())
                .collect();
            return Err(SdfError::Deadlock(format!(
                "no actor can fire; waiting: {}",
                stuck.join(", ")
            )));
        };
        for &k in &ins[a] {
            tokens[k] -= g.channels[k].rate_dst;
        }
        for &k in &outs[a] {
            tokens[k] += g.channels[k].rate_src;
            peak[k] = peak[k].max(tokens[k]);
        }
        fired[a] += 1;
        firings.push(g.actors[a].id.clone());
    }
    Ok(Schedule { firings, peak })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Consistency {
    Consistent {
        repetition_vector: RepetitionVector,
        schedule: Schedule,
    },
    Inconsistent {
        reason: String,
    },
    Deadlocked {
        reason: String,
    },
}

impl Consistency {
    pub fn is_ok(&self) -> bool {
        matches!(self, Consistency::Consistent { .. })
    }
}

pub fn check_consistency(g: &Sdfg) -> Consistency {
    let q = match repetition_vector(g) {
        Ok(q) => q,
        Err(e) => {
            return Consistency::Inconsistent {
                reason: e.to_string(),
            }
        }
    };
    match build_schedule(g, &q) {
        Ok(schedule) => Consistency::Consistent {
            repetition_vector: q,
            schedule,
        },
        Err(e) => Consistency::Deadlocked {
            reason: e.to_string(),
        },
    }
}
