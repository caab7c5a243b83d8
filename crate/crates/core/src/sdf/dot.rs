use std::fmt::Write;

use super::Sdfg;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering. Edge labels give production rate, consumption rate,
/// delay (also drawn as bullets) and token type and size.
pub fn export_dot(g: &Sdfg) -> String {
    let mut s = String::new();
    writeln!(s, "digraph {} {{", quote(&g.name)).unwrap();
    s.push_str("  rankdir=LR;\n");
    for a in &g.actors {
        let shape = if a.event_input().is_some() || a.kind.name() == "EnableSource" {
            ", style=dashed"
        } else {
            ""
        };
        writeln!(
            s,
            "  {} [shape=box, label={}{}];",
            quote(&a.id),
            quote(&format!("{}\n{}", a.id, a.kind.name())),
            shape
        )
        .unwrap();
    }
    for c in &g.channels {
        let bullets = if c.delay == 0 {
            String::new()
        } else {
            format!(" {}", "\u{2022}".repeat(c.delay as usize))
        };
        let label = format!(
            "prod {} / rate {} / delay {}{}\n{} x{}",
            c.rate_src, c.rate_dst, c.delay, bullets, c.token.dtype, c.token.width
        );
        let style = if c.event { ", style=dashed" } else { "" };
        writeln!(
            s,
            "  {} -> {} [label={}{}];",
            quote(&c.src.actor),
            quote(&c.dst.actor),
            quote(&label),
            style
        )
        .unwrap();
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn empty_graph_is_header_only() {
        let g = Sdfg::new("empty", Ratio::from_integer(1));
        assert_eq!(export_dot(&g), "digraph \"empty\" {\n  rankdir=LR;\n}\n");
    }
}
