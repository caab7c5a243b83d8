//! Normalized block model to SDF graph.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::*;
use crate::normalizer::{group_period, NormalizedModel};
use crate::sdf::{Actor, ActorKind, Channel, Port, PortRef, SdfError, Sdfg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranslateError {
    #[error(transparent)]
    Rates(#[from] SdfError),
    #[error("block {0} has no resolved period")]
    NoPeriod(String),
    #[error("block {0} of kind {1} cannot be translated")]
    Unsupported(String, String),
    #[error("{0} is not connected")]
    Unconnected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelRates {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub rate_src: u64,
    pub rate_dst: u64,
    pub delay: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranslationReport {
    pub actors: usize,
    pub channels: usize,
    /// Output ports added beyond the first for fanout.
    pub replicated_ports: usize,
    pub event_channels: usize,
    /// Channels feeding control signals into enable sources.
    pub control_channels: usize,
    pub per_channel: Vec<ChannelRates>,
}

/// Port rates of a rate transition placed between blocks with periods
/// `src` and `dst`: `(rate_in, rate_out, delay on the input channel)`.
pub fn assign_multirate(src: Rational, dst: Rational) -> Result<(u64, u64, u64), SdfError> {
    let r = if src >= dst { src / dst } else { dst / src };
    if !r.is_integer() {
        return Err(SdfError::NonHarmonic(src.to_string(), dst.to_string()));
    }
    let r = r.to_integer() as u64;
    Ok(if src > dst {
        (1, r, 0)
    } else if src < dst {
        (r, 1, r - 1)
    } else {
        (1, 1, 0)
    })
}

/// `(rate_src, rate_dst, delay)` of a channel from a producer with period
/// `ps` to a consumer with period `pd`. A slower producer repeats its token;
/// a faster one is sampled, with the delay making the freshest consumed
/// token the one produced at the consumer's own activation instant.
pub fn channel_rates(ps: Rational, pd: Rational) -> Result<(u64, u64, u64), SdfError> {
    let (rate_in, rate_out, delay) = assign_multirate(ps, pd)?;
    Ok((rate_out, rate_in, delay))
}

fn period_of(b: &Block) -> Result<Rational, TranslateError> {
    b.period().ok_or_else(|| TranslateError::NoPeriod(b.id.clone()))
}

enum Sink {
    Data(Endpoint, SignalSpec),
    Control(String),
}

pub fn translate(n: &NormalizedModel) -> Result<(Sdfg, TranslationReport), TranslateError> {
    let m = &n.model;
    let mut g = Sdfg::new(m.name.clone(), m.base_step);

    // Blocks to actors.
    for b in &m.root.children {
        if let BlockKind::Unsupported { kind, .. } = &b.kind {
            return Err(TranslateError::Unsupported(b.id.clone(), kind.clone()));
        }
        let mut a = Actor::new(b.id.clone(), ActorKind::Block(b.kind.clone()));
        a.period = Some(period_of(b)?);
        a.block_inputs = b.in_ports.clone();
        a.block_outputs = b.out_ports.clone();
        if b.kind.is_subsystem() {
            a.body = m.submodel(&b.id).map(Box::new);
        }
        a.inputs = b
            .in_ports
            .iter()
            .enumerate()
            .map(|(k, &token)| Port {
                name: format!("In{}", k + 1),
                rate: 1,
                token,
                block_port: k,
                event: false,
            })
            .collect();
        g.provenance.insert(
            b.id.clone(),
            n.provenance.get(&b.id).cloned().unwrap_or_else(|| b.id.clone()),
        );
        g.actors.push(a);
    }
    let index: BTreeMap<String, usize> =
        g.actors.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();

    // Groups that actually gate something, with their enable-source actors.
    let live: Vec<&ControlGroup> = m
        .control_groups
        .iter()
        .filter(|cg| group_period(m, &cg.id).is_some())
        .collect();
    let mut enable_of: BTreeMap<&str, String> = BTreeMap::new();
    for cg in &live {
        let mut id = format!("{}/Enable", cg.id);
        while index.contains_key(&id) {
            id.push('_');
        }
        enable_of.insert(cg.id.as_str(), id);
    }

    // Every consumer of every block output, data first, then control.
    let mut sinks: BTreeMap<Endpoint, Vec<Sink>> = BTreeMap::new();
    let nested: std::collections::BTreeSet<&str> = m
        .root
        .children
        .iter()
        .flat_map(|b| b.walk().into_iter().skip(1))
        .map(|b| b.id.as_str())
        .collect();
    for c in &m.connections {
        if nested.contains(c.src.block.as_str()) && nested.contains(c.dst.block.as_str()) {
            // Carried by the body of an opaque subsystem actor.
            continue;
        }
        if !index.contains_key(&c.src.block) || !index.contains_key(&c.dst.block) {
            return Err(TranslateError::Unconnected(c.location()));
        }
        sinks
            .entry(c.src.clone())
            .or_default()
            .push(Sink::Data(c.dst.clone(), c.spec));
    }
    for cg in &live {
        sinks
            .entry(cg.source())
            .or_default()
            .push(Sink::Control(cg.id.clone()));
    }

    let mut replicated = 0;
    let mut data = Vec::new();
    let mut control = Vec::new();
    for (src, list) in &sinks {
        let ai = *index
            .get(&src.block)
            .ok_or_else(|| TranslateError::Unconnected(src.to_string()))?;
        let token = g.actors[ai].block_outputs[src.port];
        replicated += list.len() - 1;
        for (j, sink) in list.iter().enumerate() {
            let name = if list.len() == 1 {
                format!("Out{}", src.port + 1)
            } else {
                format!("Out{}_{}", src.port + 1, j + 1)
            };
            let port = g.actors[ai].outputs.len();
            g.actors[ai].outputs.push(Port {
                name,
                rate: 1,
                token,
                block_port: src.port,
                event: false,
            });
            let from = PortRef {
                actor: src.block.clone(),
                port,
            };
            match sink {
                Sink::Data(dst, spec) => data.push((from, dst.clone(), *spec)),
                Sink::Control(gid) => control.push((from, gid.clone(), token)),
            }
        }
    }

    let data_channels = data.len();
    let mut channels = Vec::new();
    for (from, dst, spec) in data {
        let ps = g.actors[index[&from.actor]].period.expect("set");
        let consumer = &g.actors[index[&dst.block]];
        let pd = consumer.period.expect("set");
        let (rs, rd, mut delay) = channel_rates(ps, pd)?;
        if let ActorKind::Block(k) = &consumer.kind {
            // Stateful blocks read the previous activation's input.
            if k.is_stateful() {
                delay += rd;
            }
        }
        channels.push(Channel {
            id: String::new(),
            src: from,
            dst: PortRef {
                actor: dst.block,
                port: dst.port,
            },
            rate_src: rs,
            rate_dst: rd,
            delay,
            token: spec,
            initial_values: vec![spec.zero(); delay as usize],
            event: false,
        });
    }

    // Enable sources and event channels.
    let mut events = Vec::new();
    for cg in &live {
        let pg = group_period(m, &cg.id).expect("live group");
        let es_id = enable_of[cg.id.as_str()].clone();
        let mut es = Actor::new(es_id.clone(), ActorKind::EnableSource(cg.mode));
        es.period = Some(pg);
        es.block_outputs = vec![SignalSpec::BOOL];
        g.provenance.insert(es_id.clone(), cg.id.clone());
        g.actors.push(es);
    }
    let index: BTreeMap<String, usize> =
        g.actors.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();

    let add_input = |g: &mut Sdfg, actor: &str, name: &str, token: SignalSpec, event: bool| {
        let a = &mut g.actors[index[actor]];
        let k = a.inputs.len();
        a.inputs.push(Port {
            name: name.to_string(),
            rate: 1,
            token,
            block_port: k,
            event,
        });
        if !event {
            a.block_inputs.push(token);
        }
        k
    };
    let add_output = |g: &mut Sdfg, actor: &str| {
        let a = &mut g.actors[index[actor]];
        let k = a.outputs.len();
        a.outputs.push(Port {
            name: format!("Out1_{}", k + 1),
            rate: 1,
            token: SignalSpec::BOOL,
            block_port: 0,
            event: true,
        });
        k
    };

    for (from, gid, token) in control {
        let es_id = enable_of[gid.as_str()].clone();
        let ps = g.actors[index[&from.actor]].period.expect("set");
        let pg = g.actors[index[&es_id]].period.expect("set");
        let (rs, rd, delay) = channel_rates(ps, pg)?;
        let port = add_input(&mut g, &es_id, "Ctrl", token, false);
        channels.push(Channel {
            id: String::new(),
            src: from,
            dst: PortRef {
                actor: es_id,
                port,
            },
            rate_src: rs,
            rate_dst: rd,
            delay,
            token,
            initial_values: vec![token.zero(); delay as usize],
            event: false,
        });
    }
    for cg in &live {
        let es_id = enable_of[cg.id.as_str()].clone();
        let mut targets: Vec<String> = cg
            .members
            .iter()
            .filter(|x| index.contains_key(*x))
            .cloned()
            .collect();
        targets.extend(
            live.iter()
                .filter(|c| c.parent.as_deref() == Some(cg.id.as_str()))
                .map(|c| enable_of[c.id.as_str()].clone()),
        );
        for t in targets {
            let sp = add_output(&mut g, &es_id);
            let dp = add_input(&mut g, &t, "En", SignalSpec::BOOL, true);
            events.push(Channel {
                id: String::new(),
                src: PortRef {
                    actor: es_id.clone(),
                    port: sp,
                },
                dst: PortRef { actor: t, port: dp },
                rate_src: 1,
                rate_dst: 1,
                delay: 0,
                token: SignalSpec::BOOL,
                initial_values: Vec::new(),
                event: true,
            });
        }
    }
    // An enable source with a single member keeps the plain port name.
    for a in g.actors.iter_mut() {
        if matches!(a.kind, ActorKind::EnableSource(_)) && a.outputs.len() == 1 {
            a.outputs[0].name = "Out1".into();
        }
    }

    let control_channels = channels.len() - data_channels;
    channels.extend(events);
    for (i, c) in channels.iter_mut().enumerate() {
        c.id = format!("c{i}");
    }
    // Input ports take their channel's consumption rate.
    for c in &channels {
        let a = &mut g.actors[index[&c.dst.actor]];
        a.inputs[c.dst.port].rate = c.rate_dst;
    }
    for c in &channels {
        let a = &mut g.actors[index[&c.src.actor]];
        a.outputs[c.src.port].rate = c.rate_src;
    }
    g.channels = channels;

    let report = TranslationReport {
        actors: g.actors.len(),
        channels: g.channels.len(),
        replicated_ports: replicated,
        event_channels: g.event_channel_count(),
        control_channels,
        per_channel: g
            .channels
            .iter()
            .map(|c| ChannelRates {
                id: c.id.clone(),
                src: format!("{}:{}", c.src.actor, c.src.port),
                dst: format!("{}:{}", c.dst.actor, c.dst.port),
                rate_src: c.rate_src,
                rate_dst: c.rate_dst,
                delay: c.delay,
            })
            .collect(),
    };
    Ok((g, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn r(x: i64) -> Rational {
        Ratio::from_integer(x)
    }

    #[test]
    fn fast_to_slow_rates() {
        assert_eq!(assign_multirate(r(2), r(4)), Ok((2, 1, 1)));
    }

    #[test]
    fn slow_to_fast_rates() {
        assert_eq!(assign_multirate(r(4), r(1)), Ok((1, 4, 0)));
        assert_eq!(assign_multirate(r(4), r(2)), Ok((1, 2, 0)));
    }

    #[test]
    fn equal_rates() {
        assert_eq!(assign_multirate(r(3), r(3)), Ok((1, 1, 0)));
    }

    #[test]
    fn non_harmonic_rejected() {
        assert!(matches!(assign_multirate(r(2), r(3)), Err(SdfError::NonHarmonic(..))));
    }
}
