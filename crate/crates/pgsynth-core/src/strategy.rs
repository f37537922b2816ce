//! Direct generation of a Petri-game strategy from a memoryless Büchi strategy.
//!
//! The strategy is unfolded into a tree of game nodes. Every tree node carries a set of
//! cuts of the strategy under construction; each cut holds the decision set it stands for,
//! which is always a member of the node's orbit. A concrete decision set determines the
//! valid assignment of the node's representation, so cuts track decision sets directly.

use std::collections::{HashMap, HashSet};

use crate::buchi::{BuchiGame, Label, NodeState, SolveResult};
use crate::canon::Canonicalizer;
use crate::decision::{Decision, DecisionSet};
use crate::error::{Error, Result};
use crate::game::PTGame;
use crate::occurrence::OccurrenceNet;

/// What happens when a branch revisits a game node of one of its ancestors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LassoPolicy {
    /// End the branch at the first revisit.
    Stop,
    /// Keep unfolding through revisits; end the branch at the given depth.
    UnrollToDepth(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthesisLimits {
    pub max_depth: usize,
    /// Bound on tree nodes and on places plus transitions of the strategy.
    pub max_nodes: usize,
    pub lasso: LassoPolicy,
}

impl Default for SynthesisLimits {
    fn default() -> Self {
        SynthesisLimits { max_depth: 10_000, max_nodes: 200_000, lasso: LassoPolicy::Stop }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub game_node: u32,
    pub parent: Option<u32>,
    /// Label of the edge from the parent.
    pub label: Option<Label>,
    pub depth: usize,
    pub children: Vec<u32>,
    /// Ancestor with the same game node where this branch was cut off.
    pub back_ref: Option<u32>,
}

/// The memoryless strategy unfolded from the initial node, breadth first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrategyTree {
    pub nodes: Vec<TreeNode>,
}

impl StrategyTree {
    pub fn lassos(&self) -> usize {
        self.nodes.iter().filter(|n| n.back_ref.is_some()).count()
    }

    /// Labels along the branch that takes the first child at every node.
    pub fn first_branch(&self) -> Vec<&Label> {
        let mut out = Vec::new();
        let mut v = 0;
        while let Some(&c) = self.nodes.get(v).and_then(|n| n.children.first()) {
            out.extend(self.nodes[c as usize].label.as_ref());
            v = c as usize;
        }
        out
    }
}

/// Unfolds `sol`'s strategy: one child at system nodes, every successor at environment nodes.
pub fn unfold_strategy_tree(g: &BuchiGame, sol: &SolveResult, limits: &SynthesisLimits) -> Result<StrategyTree> {
    if g.nodes.is_empty() || !sol.winning[g.initial as usize] {
        return Err(Error::NotWinning);
    }
    let mut t = StrategyTree {
        nodes: vec![TreeNode { game_node: g.initial, parent: None, label: None, depth: 0, children: Vec::new(), back_ref: None }],
    };
    let mut i = 0;
    while i < t.nodes.len() {
        let v = t.nodes[i].game_node as usize;
        let depth = t.nodes[i].depth;
        let node = &g.nodes[v];
        i += 1;
        if node.flags.is_sink() {
            continue;
        }
        let mut anc = t.nodes[i - 1].parent;
        let mut back = None;
        while let Some(a) = anc {
            if t.nodes[a as usize].game_node as usize == v {
                back = Some(a);
                break;
            }
            anc = t.nodes[a as usize].parent;
        }
        if let Some(a) = back {
            let stop = match limits.lasso {
                LassoPolicy::Stop => true,
                LassoPolicy::UnrollToDepth(k) => depth >= k,
            };
            if stop {
                t.nodes[i - 1].back_ref = Some(a);
                continue;
            }
        }
        if depth >= limits.max_depth {
            return Err(Error::LimitExceeded(format!("strategy tree deeper than {}", limits.max_depth)));
        }
        let edges: Vec<&(u32, Label)> = if node.player1 {
            node.succ.iter().collect()
        } else {
            let e = sol.strategy[v].ok_or(Error::NotWinning)?;
            vec![&node.succ[e]]
        };
        for (w, l) in edges {
            if !sol.winning[*w as usize] {
                return Err(Error::NotWinning);
            }
            if t.nodes.len() >= limits.max_nodes {
                return Err(Error::LimitExceeded(format!("more than {} strategy tree nodes", limits.max_nodes)));
            }
            let id = t.nodes.len() as u32;
            t.nodes[i - 1].children.push(id);
            t.nodes.push(TreeNode {
                game_node: *w,
                parent: Some(i as u32 - 1),
                label: Some(l.clone()),
                depth: depth + 1,
                children: Vec::new(),
                back_ref: None,
            });
        }
    }
    Ok(t)
}

/// A cut of the strategy with the decision set it realizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    /// Strategy places, ascending.
    pub places: Vec<u32>,
    pub ds: DecisionSet,
}

/// The generated strategy and the cuts associated with every tree node.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub tree: StrategyTree,
    pub net: OccurrenceNet,
    pub cuts: Vec<Vec<Cut>>,
}

impl Synthesis {
    /// Cut place names per tree node.
    pub fn cut_report(&self) -> Vec<Vec<Vec<String>>> {
        self.cuts
            .iter()
            .map(|cs| cs.iter().map(|c| c.places.iter().map(|&p| self.net.places[p as usize].name.clone()).collect()).collect())
            .collect()
    }
}

/// Decides whether a concrete decision set belongs to a game node.
struct Matcher<'g> {
    game: &'g PTGame,
    g: &'g BuchiGame,
    canon: Canonicalizer<'g>,
}

impl Matcher<'_> {
    fn matches(&self, v: u32, d: &DecisionSet) -> bool {
        match (&self.g.nodes[v as usize].state, self.g.approach) {
            (NodeState::Canonical(c), _) => self.canon.canon(d).key == c.key,
            (NodeState::Explicit(n), crate::buchi::Approach::Membership) => {
                (0..self.game.symmetries.len()).any(|si| if si == 0 { d == n } else { &d.apply_symmetry(self.game, si) == n })
            }
            (NodeState::Explicit(n), _) => d == n,
        }
    }
}

struct Builder<'g> {
    game: &'g PTGame,
    net: OccurrenceNet,
    events: HashMap<(u32, Vec<u32>), u32>,
    place_count: HashMap<u32, usize>,
    trans_count: HashMap<u32, usize>,
    /// Commitments already chosen for strategy places, shared by all cuts containing them.
    committed: HashMap<u32, Decision>,
    max_nodes: usize,
}

impl Builder<'_> {
    fn budget(&self) -> Result<()> {
        if self.net.places.len() + self.net.transitions.len() > self.max_nodes {
            return Err(Error::LimitExceeded(format!("strategy has more than {} places and transitions", self.max_nodes)));
        }
        Ok(())
    }

    fn place(&mut self, label: u32, producer: Option<u32>) -> u32 {
        let k = self.place_count.entry(label).or_default();
        let name = format!("{}#{}", self.game.place_name(label as usize), k);
        *k += 1;
        self.net.add_place(name, label, producer)
    }

    /// Event `t` on the places of `cut` it consumes; an event with the same label and preset is reused.
    fn fire(&mut self, cut: &Cut, t: usize) -> Result<Cut> {
        let pre_labels: Vec<u32> = self.game.pt.pre[t].iter().map(|&(p, _)| p as u32).collect();
        let pre: Vec<u32> = cut
            .places
            .iter()
            .copied()
            .filter(|&q| pre_labels.contains(&self.net.places[q as usize].label))
            .collect();
        if pre.len() != pre_labels.len() {
            return Err(Error::AssignmentMismatch(format!(
                "cut does not hold the preset of {}",
                self.game.transition_name(t)
            )));
        }
        let key = (t as u32, pre.clone());
        let e = match self.events.get(&key) {
            Some(&e) => e,
            None => {
                let k = self.trans_count.entry(t as u32).or_default();
                let name = format!("{}#{}", self.game.transition_name(t), k);
                *k += 1;
                let e = self.net.add_transition(name, t as u32, pre.clone());
                for i in 0..self.game.pt.post[t].len() {
                    let l = self.game.pt.post[t][i].0 as u32;
                    let p = self.place(l, Some(e));
                    self.net.transitions[e as usize].post.push(p);
                }
                self.events.insert(key, e);
                self.budget()?;
                e
            }
        };
        let mut places: Vec<u32> = cut.places.iter().copied().filter(|q| !pre.contains(q)).collect();
        places.extend(&self.net.transitions[e as usize].post);
        places.sort_unstable();
        Ok(Cut { places, ds: cut.ds.fire(self.game, t)? })
    }

    /// Whether `d` agrees with the commitments already fixed for the places of `cut`.
    fn consistent(&self, cut: &Cut, d: &DecisionSet) -> bool {
        cut.places.iter().all(|q| match self.committed.get(q) {
            Some(c) => d.get(self.net.places[*q as usize].label) == Some(*c),
            None => true,
        })
    }

    fn record(&mut self, cut: &Cut) {
        for &q in &cut.places {
            if let Some(Decision::Commit(m)) = cut.ds.get(self.net.places[q as usize].label) {
                self.committed.entry(q).or_insert(Decision::Commit(m));
            }
        }
    }
}

fn hl_of(game: &PTGame, label: &Label) -> Option<usize> {
    match label {
        Label::Concrete(t) => Some(game.pt.transitions[*t as usize].trans),
        Label::Symbolic(s) => Some(s.trans as usize),
        _ => None,
    }
}

/// Generates the strategy: ⊤-edges rechoose decisions on the same cuts, system nodes add one
/// event per cut, environment nodes add every event leading to the child.
pub fn generate_strategy(game: &PTGame, g: &BuchiGame, tree: &StrategyTree, max_nodes: usize) -> Result<Synthesis> {
    let m = Matcher { game, g, canon: Canonicalizer::new(game) };
    let mut b = Builder {
        game,
        net: OccurrenceNet::default(),
        events: HashMap::new(),
        place_count: HashMap::new(),
        trans_count: HashMap::new(),
        committed: HashMap::new(),
        max_nodes,
    };
    let d0 = DecisionSet::initial(game)?;
    let mut places: Vec<u32> = d0.entries.iter().map(|&(p, _)| b.place(p, None)).collect();
    places.sort_unstable();
    let root = Cut { places, ds: d0 };
    if tree.nodes.is_empty() {
        return Err(Error::NotWinning);
    }
    if !m.matches(tree.nodes[0].game_node, &root.ds) {
        return Err(Error::AssignmentMismatch("initial decision set is not the root node".into()));
    }
    b.record(&root);
    let mut cuts: Vec<Vec<Cut>> = vec![Vec::new(); tree.nodes.len()];
    cuts[0].push(root);
    for i in 0..tree.nodes.len() {
        let node = &tree.nodes[i];
        let v = node.game_node as usize;
        let player1 = g.nodes[v].player1;
        for &c in &node.children {
            let child = &tree.nodes[c as usize];
            let w = child.game_node;
            let label = child.label.as_ref().expect("child edge has a label");
            let mut out: Vec<Cut> = Vec::new();
            for cut in &cuts[i] {
                match label {
                    Label::Top => {
                        let mut first = None;
                        let mut pick = None;
                        cut.ds.for_each_top_successor(game, |d| {
                            if !m.matches(w, &d) {
                                return true;
                            }
                            if b.consistent(cut, &d) {
                                pick = Some(d);
                                return false;
                            }
                            first.get_or_insert(d);
                            true
                        })?;
                        let d = pick.or(first).ok_or_else(|| {
                            Error::AssignmentMismatch(format!("no decision of tree node {i} resolves to game node {w}"))
                        })?;
                        let next = Cut { places: cut.places.clone(), ds: d };
                        b.record(&next);
                        out.push(next);
                    }
                    Label::Loop => {}
                    _ => {
                        let hl = hl_of(game, label);
                        let mut found = false;
                        for t in cut.ds.enabled(game) {
                            if !player1 && Some(game.pt.transitions[t].trans) != hl {
                                continue;
                            }
                            let d = cut.ds.fire(game, t)?;
                            if !m.matches(w, &d) {
                                continue;
                            }
                            let next = b.fire(cut, t)?;
                            found = true;
                            if !out.contains(&next) {
                                out.push(next);
                            }
                            if !player1 {
                                break;
                            }
                        }
                        if !found && !player1 {
                            return Err(Error::AssignmentMismatch(format!(
                                "no instance of {} leads from tree node {i} to game node {w}",
                                label.name(game)
                            )));
                        }
                    }
                }
            }
            if out.is_empty() {
                return Err(Error::AssignmentMismatch(format!("tree node {c} received no cut")));
            }
            cuts[c as usize] = out;
        }
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.back_ref.is_some() {
            for cut in &cuts[i] {
                b.net.truncated.extend(&cut.places);
            }
        }
    }
    b.net.truncated.sort_unstable();
    b.net.truncated.dedup();
    Ok(Synthesis { tree: tree.clone(), net: b.net, cuts })
}

/// Unfolds and generates in one go.
pub fn synthesize(game: &PTGame, g: &BuchiGame, sol: &SolveResult, limits: &SynthesisLimits) -> Result<Synthesis> {
    let tree = unfold_strategy_tree(g, sol, limits)?;
    generate_strategy(game, g, &tree, limits.max_nodes)
}

/// Distinct labels of the strategy's events.
pub fn event_labels(net: &OccurrenceNet, game: &PTGame) -> HashSet<String> {
    net.transitions.iter().map(|t| game.transition_name(t.label as usize)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buchi::{build_game, solve_buchi, Approach, BuildOptions};
    use crate::cs::generate_cs;
    use crate::occurrence::{causal_analysis, validate_strategy};

    fn run(n: usize, approach: Approach) -> (PTGame, BuchiGame, Synthesis) {
        let game = generate_cs(n).expand().unwrap();
        let (g, _) = build_game(&game, approach, &BuildOptions::default()).unwrap();
        let sol = solve_buchi(&g).unwrap();
        assert!(sol.realizable);
        let s = synthesize(&game, &g, &sol, &SynthesisLimits::default()).unwrap();
        (game, g, s)
    }

    #[test]
    fn strategies_validate_for_every_approach() {
        for n in 1..=2 {
            for a in Approach::ALL {
                let (game, _, s) = run(n, a);
                let r = validate_strategy(&s.net, &game, 100_000).unwrap();
                assert!(r.all_pass(), "CS-{n} {a}: {:?}", r.violations);
                assert!(causal_analysis(&s.net).is_ok());
            }
        }
    }

    #[test]
    fn cuts_realize_their_nodes() {
        let (game, g, s) = run(2, Approach::Canonical);
        let cz = Canonicalizer::new(&game);
        for (i, cs) in s.cuts.iter().enumerate() {
            let NodeState::Canonical(c) = &g.nodes[s.tree.nodes[i].game_node as usize].state else { unreachable!() };
            for cut in cs {
                assert_eq!(cz.canon(&cut.ds).key, c.key);
                let mut labels: Vec<u32> = cut.places.iter().map(|&p| s.net.places[p as usize].label).collect();
                labels.sort_unstable();
                assert_eq!(labels, cut.ds.marking());
            }
        }
    }

    #[test]
    fn top_edge_keeps_the_cuts() {
        let (_, _, s) = run(2, Approach::Canonical);
        assert_eq!(s.tree.nodes[1].label, Some(Label::Top));
        assert_eq!(s.cuts[0].len(), 1);
        assert_eq!(s.cuts[1].len(), 1);
        assert_eq!(s.cuts[0][0].places, s.cuts[1][0].places);
    }

    #[test]
    fn not_winning_is_reported() {
        let game = generate_cs(1).expand().unwrap();
        let (g, _) = build_game(&game, Approach::Explicit, &BuildOptions::default()).unwrap();
        let mut sol = solve_buchi(&g).unwrap();
        sol.winning[g.initial as usize] = false;
        assert_eq!(unfold_strategy_tree(&g, &sol, &SynthesisLimits::default()), Err(Error::NotWinning));
    }

    #[test]
    fn limits_are_enforced() {
        let game = generate_cs(2).expand().unwrap();
        let (g, _) = build_game(&game, Approach::Canonical, &BuildOptions::default()).unwrap();
        let sol = solve_buchi(&g).unwrap();
        let shallow = SynthesisLimits { max_depth: 2, ..Default::default() };
        assert!(matches!(unfold_strategy_tree(&g, &sol, &shallow), Err(Error::LimitExceeded(_))));
        let small = SynthesisLimits { max_nodes: 3, ..Default::default() };
        assert!(matches!(synthesize(&game, &g, &sol, &small), Err(Error::LimitExceeded(_))));
    }
}
