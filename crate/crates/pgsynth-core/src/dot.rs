//! Graphviz export of game graphs and strategies.

use std::fmt::Write;

use crate::buchi::{BuchiGame, NodeState};
use crate::game::PTGame;
use crate::occurrence::OccurrenceNet;

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// System nodes are boxes, environment nodes diamonds, accepting nodes double-bordered.
pub fn game_dot(g: &BuchiGame, game: &PTGame) -> String {
    let mut out = String::from("digraph game {\n  node [fontname=\"monospace\"];\n");
    for (v, n) in g.nodes.iter().enumerate() {
        let state = match &n.state {
            NodeState::Explicit(d) => d.display(game).to_string(),
            NodeState::Canonical(c) => c.rep.display(&game.hl.net).to_string(),
        };
        let shape = if n.player1 { "diamond" } else { "box" };
        let per = if n.accepting { 2 } else { 1 };
        let _ = writeln!(out, "  n{v} [shape={shape}, peripheries={per}, label=\"{v}: {}\"];", esc(&state));
    }
    let _ = writeln!(out, "  init [shape=point];\n  init -> n{};", g.initial);
    for (v, n) in g.nodes.iter().enumerate() {
        for (w, l) in &n.succ {
            let _ = writeln!(out, "  n{v} -> n{w} [label=\"{}\"];", esc(&l.name(game)));
        }
    }
    out.push_str("}\n");
    out
}

/// System places gray, environment places white, bad places double-bordered; events are boxes.
pub fn strategy_dot(s: &OccurrenceNet, game: &PTGame) -> String {
    let mut out = String::from("digraph strategy {\n  node [fontname=\"monospace\"];\n");
    for (i, p) in s.places.iter().enumerate() {
        let l = p.label as usize;
        let fill = if game.is_env(l) { "white" } else { "gray" };
        let per = if game.is_bad(l) { 2 } else { 1 };
        let mark = if s.initial.contains(&(i as u32)) { ", penwidth=2" } else { "" };
        let open = if s.truncated.contains(&(i as u32)) { ", style=\"filled,dashed\"" } else { ", style=filled" };
        let _ = writeln!(
            out,
            "  p{i} [shape=circle, fillcolor={fill}, peripheries={per}{open}{mark}, label=\"{}\"];",
            esc(&p.name)
        );
    }
    for (i, t) in s.transitions.iter().enumerate() {
        let _ = writeln!(out, "  t{i} [shape=box, label=\"{}\"];", esc(&t.name));
        for p in &t.pre {
            let _ = writeln!(out, "  p{p} -> t{i};");
        }
        for p in &t.post {
            let _ = writeln!(out, "  t{i} -> p{p};");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buchi::{build_game, solve_buchi, Approach, BuildOptions};
    use crate::cs::generate_cs;
    use crate::strategy::{synthesize, SynthesisLimits};

    #[test]
    fn game_dot_shapes_and_determinism() {
        let game = generate_cs(1).expand().unwrap();
        let (g, _) = build_game(&game, Approach::Canonical, &BuildOptions::default()).unwrap();
        let a = game_dot(&g, &game);
        assert!(a.starts_with("digraph game {"));
        assert!(a.contains("shape=diamond"));
        assert!(a.contains("shape=box"));
        assert!(a.contains("peripheries=2"));
        assert_eq!(a.matches(" -> n").count(), g.nodes.iter().map(|n| n.succ.len()).sum::<usize>() + 1);
        let (g2, _) = build_game(&game, Approach::Canonical, &BuildOptions::default()).unwrap();
        assert_eq!(a, game_dot(&g2, &game));
    }

    #[test]
    fn strategy_dot_colors() {
        let game = generate_cs(2).expand().unwrap();
        let (g, _) = build_game(&game, Approach::Canonical, &BuildOptions::default()).unwrap();
        let sol = solve_buchi(&g).unwrap();
        let s = synthesize(&game, &g, &sol, &SynthesisLimits::default()).unwrap();
        let d = strategy_dot(&s.net, &game);
        assert!(d.contains("fillcolor=gray"));
        assert!(d.contains("fillcolor=white"));
        assert!(!d.contains("peripheries=2"), "winning strategies have no bad places");
        assert_eq!(d.matches("shape=box").count(), s.net.transitions.len());
    }
}
