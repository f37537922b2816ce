//! The two-player Büchi game over decision sets and its solver.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::canon::{CanonRep, Canonicalizer, SymbolicInstance};
use crate::decision::{DecisionSet, Flags};
use crate::error::{Error, Result};
use crate::game::PTGame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Approach {
    /// Plain decision sets of the expanded game.
    Explicit,
    /// First-seen representatives, new states matched by applying every symmetry.
    Membership,
    /// Canonical representations keyed by their encoding.
    Canonical,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Explicit, Approach::Membership, Approach::Canonical];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Explicit => "explicit",
            Approach::Membership => "membership",
            Approach::Canonical => "canonical",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approach::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown approach {s:?}; expected explicit, membership or canonical")))
    }
}

/// Edge label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Top,
    /// The self-loop of a sink.
    Loop,
    /// A transition of the expanded game.
    Concrete(u32),
    Symbolic(SymbolicInstance),
}

impl Label {
    pub fn name(&self, game: &PTGame) -> String {
        match self {
            Label::Top => "T".into(),
            Label::Loop => "loop".into(),
            Label::Concrete(t) => game.transition_name(*t as usize),
            Label::Symbolic(s) => s.name(&game.hl.net),
        }
    }
}

/// The state a node stands for.
#[derive(Clone, Debug)]
pub enum NodeState {
    Explicit(DecisionSet),
    Canonical(CanonRep),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub state: NodeState,
    pub flags: Flags,
    /// Owned by the environment player.
    pub player1: bool,
    pub accepting: bool,
    /// Successors with the label of the first edge found; sinks carry only their self-loop.
    pub succ: Vec<(u32, Label)>,
}

#[derive(Clone, Debug)]
pub struct BuchiGame {
    pub approach: Approach,
    pub nodes: Vec<Node>,
    pub initial: u32,
    /// Diagnostics raised during construction.
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub model: String,
    pub approach: String,
    pub num_nodes: u64,
    /// Edges other than self-loops.
    pub num_edges: u64,
    pub num_accepting: u64,
    pub num_symmetries: u128,
    pub comparisons: u64,
    pub orderings_enumerated: u64,
    /// Largest number of orderings of a single canonicalization.
    pub max_orderings_per_node: u64,
    pub build_ms: u64,
    pub solve_ms: u64,
    pub realizable: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub max_nodes: usize,
    pub timeout: Option<Duration>,
    /// Explore successors in reverse order; the resulting game must be the same up to numbering.
    pub reverse_successors: bool,
}

pub const DEFAULT_MAX_NODES: usize = 5_000_000;

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_nodes: DEFAULT_MAX_NODES, timeout: None, reverse_successors: false }
    }
}

impl BuchiGame {
    pub fn num_edges(&self) -> u64 {
        self.nodes.iter().enumerate().map(|(v, n)| n.succ.iter().filter(|s| s.0 as usize != v).count() as u64).sum()
    }

    pub fn num_accepting(&self) -> u64 {
        self.nodes.iter().filter(|n| n.accepting).count() as u64
    }

    /// A cycle through non-accepting system nodes, which the input assumptions rule out.
    pub fn system_cycle(&self) -> Option<Vec<u32>> {
        let relevant = |v: usize| {
            let n = &self.nodes[v];
            !n.player1 && !n.accepting && !n.flags.is_sink()
        };
        let mut color = vec![0u8; self.nodes.len()];
        for start in 0..self.nodes.len() {
            if !relevant(start) || color[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = 1;
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                let succ = &self.nodes[v].succ;
                if *i < succ.len() {
                    let w = succ[*i].0 as usize;
                    *i += 1;
                    if !relevant(w) {
                        continue;
                    }
                    if color[w] == 1 {
                        let pos = stack.iter().position(|&(x, _)| x == w).expect("on stack");
                        return Some(stack[pos..].iter().map(|&(x, _)| x as u32).collect());
                    }
                    if color[w] == 0 {
                        color[w] = 1;
                        stack.push((w, 0));
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }
}

/// Builds the game of `game` under `approach`.
pub fn build_game(game: &PTGame, approach: Approach, opts: &BuildOptions) -> Result<(BuchiGame, BuildStats)> {
    let (g, stats) = build_game_partial(game, approach, opts);
    Ok((g?, stats))
}

/// Like [`build_game`], but also returns the statistics gathered before a failure.
pub fn build_game_partial(game: &PTGame, approach: Approach, opts: &BuildOptions) -> (Result<BuchiGame>, BuildStats) {
    let start = Instant::now();
    let mut stats = BuildStats {
        model: game.hl.name.clone(),
        approach: approach.name().into(),
        num_symmetries: game.hl.num_symmetries(),
        ..Default::default()
    };
    let mut b = match Builder::new(game, approach, opts) {
        Ok(b) => b,
        Err(e) => return (Err(e), stats),
    };
    if let Err(e) = b.run(start) {
        stats.num_nodes = b.nodes.len() as u64;
        stats.num_edges = b.nodes.iter().enumerate().map(|(v, n)| n.succ.iter().filter(|s| s.0 as usize != v).count() as u64).sum();
        stats.num_accepting = b.nodes.iter().filter(|n| n.accepting).count() as u64;
        stats.comparisons = b.comparisons;
        stats.orderings_enumerated = b.canon.orderings();
        stats.max_orderings_per_node = b.canon.max_orderings();
        stats.build_ms = start.elapsed().as_millis() as u64;
        return (Err(e), stats);
    }
    let mut g = BuchiGame { approach, nodes: b.nodes, initial: 0, warnings: Vec::new() };
    if let Some(cycle) = g.system_cycle() {
        g.warnings.push(format!(
            "the system can proceed forever without the environment: cycle through {} non-accepting system nodes starting at node {}",
            cycle.len(),
            cycle[0]
        ));
    }
    stats.num_nodes = g.nodes.len() as u64;
    stats.num_edges = g.num_edges();
    stats.num_accepting = g.num_accepting();
    stats.comparisons = b.comparisons;
    stats.orderings_enumerated = b.canon.orderings();
    stats.max_orderings_per_node = b.canon.max_orderings();
    stats.build_ms = start.elapsed().as_millis() as u64;
    (Ok(g), stats)
}

struct Builder<'g> {
    game: &'g PTGame,
    approach: Approach,
    opts: &'g BuildOptions,
    canon: Canonicalizer<'g>,
    nodes: Vec<Node>,
    explicit_index: FxHashMap<DecisionSet, u32>,
    key_index: FxHashMap<Vec<u32>, u32>,
    comparisons: u64,
}

impl<'g> Builder<'g> {
    fn new(game: &'g PTGame, approach: Approach, opts: &'g BuildOptions) -> Result<Self> {
        if approach == Approach::Membership && !game.tabulated() {
            return Err(Error::invalid(format!(
                "the membership approach needs at most {} symmetries, the model has {}",
                crate::game::MAX_TABULATED_SYMMETRIES,
                game.hl.num_symmetries()
            )));
        }
        Ok(Builder {
            game,
            approach,
            opts,
            canon: Canonicalizer::new(game),
            nodes: Vec::new(),
            explicit_index: FxHashMap::default(),
            key_index: FxHashMap::default(),
            comparisons: 0,
        })
    }

    fn budget(&self, start: Instant) -> Result<()> {
        if self.nodes.len() > self.opts.max_nodes {
            return Err(Error::BoundExceeded(format!(
                "more than {} nodes ({} edges so far)",
                self.opts.max_nodes,
                self.nodes.iter().map(|n| n.succ.len()).sum::<usize>()
            )));
        }
        if let Some(t) = self.opts.timeout {
            if start.elapsed() > t {
                return Err(Error::BoundExceeded(format!(
                    "time limit of {:.1}s reached after {} nodes",
                    t.as_secs_f64(),
                    self.nodes.len()
                )));
            }
        }
        Ok(())
    }

    fn push(&mut self, state: NodeState) -> u32 {
        self.nodes.push(Node { state, flags: Flags::default(), player1: false, accepting: false, succ: Vec::new() });
        (self.nodes.len() - 1) as u32
    }

    /// Node id of a concrete successor state, creating it if new.
    fn intern_ds(&mut self, d: DecisionSet) -> u32 {
        match self.approach {
            Approach::Explicit => {
                self.comparisons += 1;
                if let Some(&id) = self.explicit_index.get(&d) {
                    return id;
                }
            }
            Approach::Membership => {
                for si in 0..self.game.symmetries.len() {
                    self.comparisons += 1;
                    let img = if si == 0 { d.clone() } else { d.apply_symmetry(self.game, si) };
                    if let Some(&id) = self.explicit_index.get(&img) {
                        return id;
                    }
                }
            }
            Approach::Canonical => unreachable!("canonical nodes are interned by key"),
        }
        let id = self.push(NodeState::Explicit(d.clone()));
        self.explicit_index.insert(d, id);
        id
    }

    fn intern_canon(&mut self, c: CanonRep) -> u32 {
        self.comparisons += 1;
        if let Some(&id) = self.key_index.get(&c.key) {
            return id;
        }
        self.comparisons += c.rep.num_orderings();
        let key = c.key.clone();
        let id = self.push(NodeState::Canonical(c));
        self.key_index.insert(key, id);
        id
    }

    fn run(&mut self, start: Instant) -> Result<()> {
        let game = self.game;
        let d0 = DecisionSet::initial(game)?;
        match self.approach {
            Approach::Canonical => {
                let c = self.canon.canon(&d0);
                self.intern_canon(c);
            }
            _ => {
                self.intern_ds(d0);
            }
        }
        let mut v = 0;
        while v < self.nodes.len() {
            if v % 64 == 0 {
                self.budget(start)?;
            }
            self.expand(v)?;
            v += 1;
        }
        self.budget(start)
    }

    fn expand(&mut self, v: usize) -> Result<()> {
        let game = self.game;
        let state = self.nodes[v].state.clone();
        let flags = match &state {
            NodeState::Explicit(d) => d.flags(game),
            NodeState::Canonical(c) => self.canon.properties(c),
        };
        let mut succ: Vec<(u32, Label)> = Vec::new();
        if flags.is_sink() {
            succ.push((v as u32, Label::Loop));
        } else {
            match &state {
                NodeState::Explicit(d) => {
                    let mut next: Vec<(DecisionSet, Label)> = if d.has_top() {
                        d.top_successors(game)?.into_iter().map(|n| (n, Label::Top)).collect()
                    } else {
                        let mut out = Vec::new();
                        for t in d.enabled(game) {
                            if flags.env_dependent || !game.env_trans[t] {
                                out.push((d.fire(game, t)?, Label::Concrete(t as u32)));
                            }
                        }
                        out
                    };
                    if self.opts.reverse_successors {
                        next.reverse();
                    }
                    for (n, l) in next {
                        let id = self.intern_ds(n);
                        succ.push((id, l));
                    }
                }
                NodeState::Canonical(c) => {
                    let mut next: Vec<(CanonRep, Label)> = if c.rep.has_top() {
                        self.canon.top_successors(c)?.into_iter().map(|n| (n, Label::Top)).collect()
                    } else {
                        self.canon
                            .transition_successors(c)?
                            .into_iter()
                            .filter(|s| flags.env_dependent || !game.env_trans_hl[s.inst.trans as usize])
                            .map(|s| (s.target, Label::Symbolic(s.inst)))
                            .collect()
                    };
                    if self.opts.reverse_successors {
                        next.reverse();
                    }
                    for (n, l) in next {
                        let id = self.intern_canon(n);
                        succ.push((id, l));
                    }
                }
            }
            let mut seen = FxHashSet::default();
            if self.opts.reverse_successors {
                // Keep the label that forward exploration would have kept.
                succ.reverse();
                succ.retain(|s| seen.insert(s.0));
                succ.reverse();
            } else {
                succ.retain(|s| seen.insert(s.0));
            }
            if succ.is_empty() {
                return Err(Error::Anomaly(format!(
                    "node {v} has no successor but is neither bad, deadlocked, terminating nor nondeterministic"
                )));
            }
        }
        let n = &mut self.nodes[v];
        n.flags = flags;
        n.player1 = flags.env_dependent;
        n.accepting = flags.accepting();
        n.succ = succ;
        Ok(())
    }
}

/// Winning region of the system player and a memoryless strategy on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub winning: Vec<bool>,
    /// For system nodes in the winning region, the index of the chosen edge in `succ`.
    pub strategy: Vec<Option<usize>>,
    pub realizable: bool,
}

/// Minimal view of a game graph for the solver.
pub trait Arena {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn player1(&self, v: usize) -> bool;
    fn accepting(&self, v: usize) -> bool;
    fn successors(&self, v: usize) -> Vec<usize>;
    fn initial(&self) -> usize;
}

impl Arena for BuchiGame {
    fn len(&self) -> usize {
        self.nodes.len()
    }
    fn player1(&self, v: usize) -> bool {
        self.nodes[v].player1
    }
    fn accepting(&self, v: usize) -> bool {
        self.nodes[v].accepting
    }
    fn successors(&self, v: usize) -> Vec<usize> {
        self.nodes[v].succ.iter().map(|s| s.0 as usize).collect()
    }
    fn initial(&self) -> usize {
        self.initial as usize
    }
}

/// A plain arena, used for tests and the random oracle comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleArena {
    pub player1: Vec<bool>,
    pub accepting: Vec<bool>,
    pub succ: Vec<Vec<usize>>,
    pub initial: usize,
}

impl Arena for SimpleArena {
    fn len(&self) -> usize {
        self.succ.len()
    }
    fn player1(&self, v: usize) -> bool {
        self.player1[v]
    }
    fn accepting(&self, v: usize) -> bool {
        self.accepting[v]
    }
    fn successors(&self, v: usize) -> Vec<usize> {
        self.succ[v].clone()
    }
    fn initial(&self) -> usize {
        self.initial
    }
}

/// Attractor of `target` for `player1` (or the system) inside `inside`, with the rank of every node.
fn attractor(
    succ: &[Vec<usize>],
    pred: &[Vec<usize>],
    owner1: &[bool],
    inside: &[bool],
    target: &[bool],
    for_player1: bool,
) -> (Vec<bool>, Vec<u32>) {
    let n = succ.len();
    let mut attr = vec![false; n];
    let mut rank = vec![u32::MAX; n];
    let mut count: Vec<usize> = (0..n).map(|v| succ[v].iter().filter(|&&w| inside[w]).count()).collect();
    let mut queue = VecDeque::new();
    for v in 0..n {
        if inside[v] && target[v] {
            attr[v] = true;
            rank[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(w) = queue.pop_front() {
        for &v in &pred[w] {
            if !inside[v] || attr[v] {
                continue;
            }
            let join = if owner1[v] == for_player1 {
                true
            } else {
                count[v] -= 1;
                count[v] == 0
            };
            if join {
                attr[v] = true;
                rank[v] = rank[w] + 1;
                queue.push_back(v);
            }
        }
    }
    (attr, rank)
}

/// Classical Büchi fixpoint: repeatedly drop the environment attractor of nodes that cannot reach acceptance.
pub fn solve_buchi<A: Arena>(game: &A) -> Result<SolveResult> {
    let n = game.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|v| game.successors(v)).collect();
    if let Some(v) = succ.iter().position(|s| s.is_empty()) {
        return Err(Error::NonTotalGame(v));
    }
    let mut pred = vec![Vec::new(); n];
    for (v, ss) in succ.iter().enumerate() {
        for &w in ss {
            if !pred[w].contains(&v) {
                pred[w].push(v);
            }
        }
    }
    let owner1: Vec<bool> = (0..n).map(|v| game.player1(v)).collect();
    let acc: Vec<bool> = (0..n).map(|v| game.accepting(v)).collect();
    let mut inside = vec![true; n];
    loop {
        let (reach, _) = attractor(&succ, &pred, &owner1, &inside, &acc, false);
        let trap: Vec<bool> = (0..n).map(|v| inside[v] && !reach[v]).collect();
        if !trap.iter().any(|&b| b) {
            break;
        }
        let (lose, _) = attractor(&succ, &pred, &owner1, &inside, &trap, true);
        for v in 0..n {
            if lose[v] {
                inside[v] = false;
            }
        }
    }
    let (_, rank) = attractor(&succ, &pred, &owner1, &inside, &acc, false);
    let strategy = (0..n)
        .map(|v| {
            if !inside[v] || owner1[v] {
                return None;
            }
            let pick = if acc[v] {
                succ[v].iter().position(|&w| inside[w])
            } else {
                succ[v].iter().position(|&w| inside[w] && rank[w] < rank[v])
            };
            Some(pick.expect("winning system node has a winning move"))
        })
        .collect();
    let realizable = n > 0 && inside[game.initial()];
    Ok(SolveResult { winning: inside, strategy, realizable })
}

/// Winning region by enumerating every memoryless system strategy; only for tiny arenas.
///
/// With the system strategy fixed, the environment wins from `v` iff it can reach a cycle
/// of non-accepting nodes.
pub fn brute_force_winning<A: Arena>(game: &A) -> Vec<bool> {
    let n = game.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|v| game.successors(v)).collect();
    let sys: Vec<usize> = (0..n).filter(|&v| !game.player1(v)).collect();
    let mut win = vec![false; n];
    let mut choice = vec![0usize; sys.len()];
    loop {
        let restricted: Vec<Vec<usize>> = (0..n)
            .map(|v| match sys.iter().position(|&s| s == v) {
                Some(k) => vec![succ[v][choice[k]]],
                None => succ[v].clone(),
            })
            .collect();
        // Nodes on or able to reach a cycle of non-accepting nodes, restricted to non-accepting ones.
        let mut bad_cycle = vec![false; n];
        for v in 0..n {
            if game.accepting(v) {
                continue;
            }
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = restricted[v].iter().copied().filter(|&w| !game.accepting(w)).collect();
            while let Some(w) = stack.pop() {
                if seen[w] {
                    continue;
                }
                seen[w] = true;
                stack.extend(restricted[w].iter().copied().filter(|&x| !game.accepting(x)));
            }
            bad_cycle[v] = seen[v];
        }
        for v in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![v];
            let mut lost = false;
            while let Some(w) = stack.pop() {
                if seen[w] {
                    continue;
                }
                seen[w] = true;
                if bad_cycle[w] {
                    lost = true;
                    break;
                }
                stack.extend(restricted[w].iter().copied());
            }
            if !lost {
                win[v] = true;
            }
        }
        let mut k = 0;
        loop {
            if k == sys.len() {
                return win;
            }
            choice[k] += 1;
            if choice[k] < succ[sys[k]].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// Outcome of comparing an explicit game with a canonical one through orbits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuotientReport {
    pub explicit_nodes: usize,
    /// Orbits of explicit nodes, counted by applying every symmetry.
    pub orbits: usize,
    pub canonical_nodes: usize,
    pub mismatch: Option<String>,
}

impl QuotientReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none() && self.orbits == self.canonical_nodes
    }
}

/// Canonical key of every node of a game built from decision sets or canonical forms.
fn node_keys(g: &BuchiGame, cz: &Canonicalizer<'_>) -> Vec<Vec<u32>> {
    g.nodes
        .iter()
        .map(|n| match &n.state {
            NodeState::Explicit(d) => cz.canon(d).key,
            NodeState::Canonical(c) => c.key.clone(),
        })
        .collect()
}

/// Per canonical key: owner, acceptance and sorted successor keys.
pub type Signature = FxHashMap<Vec<u32>, (bool, bool, Vec<Vec<u32>>)>;

/// The game up to node numbering, as seen through canonical forms.
pub fn signature(g: &BuchiGame, game: &PTGame) -> Signature {
    let cz = Canonicalizer::new(game);
    let keys = node_keys(g, &cz);
    let mut out = Signature::default();
    for (v, n) in g.nodes.iter().enumerate() {
        let mut s: Vec<Vec<u32>> = n.succ.iter().map(|x| keys[x.0 as usize].clone()).collect();
        s.sort();
        s.dedup();
        out.insert(keys[v].clone(), (n.player1, n.accepting, s));
    }
    out
}

/// Checks that the orbit quotient of `explicit` is the canonical game.
pub fn quotient_check(explicit: &BuchiGame, canonical: &BuchiGame, game: &PTGame) -> QuotientReport {
    let mut report = QuotientReport {
        explicit_nodes: explicit.nodes.len(),
        canonical_nodes: canonical.nodes.len(),
        ..Default::default()
    };
    let mut orbits = FxHashSet::default();
    for n in &explicit.nodes {
        if let NodeState::Explicit(d) = &n.state {
            let m = (0..game.symmetries.len()).map(|si| d.apply_symmetry(game, si)).min().unwrap_or_else(|| d.clone());
            orbits.insert(m);
        }
    }
    report.orbits = orbits.len();
    let cz = Canonicalizer::new(game);
    let ekeys = node_keys(explicit, &cz);
    let cindex: FxHashMap<&Vec<u32>, usize> =
        canonical.nodes.iter().enumerate().filter_map(|(v, n)| match &n.state {
            NodeState::Canonical(c) => Some((&c.key, v)),
            NodeState::Explicit(_) => None,
        })
        .collect();
    if cindex.len() != canonical.nodes.len() {
        report.mismatch = Some("the second game is not canonical".into());
        return report;
    }
    for (v, n) in explicit.nodes.iter().enumerate() {
        let Some(&c) = cindex.get(&ekeys[v]) else {
            report.mismatch = Some(format!("explicit node {v} has no canonical counterpart"));
            return report;
        };
        let cn = &canonical.nodes[c];
        if cn.player1 != n.player1 || cn.accepting != n.accepting {
            report.mismatch = Some(format!("explicit node {v} and canonical node {c} differ in owner or acceptance"));
            return report;
        }
        let mut a: Vec<usize> = n.succ.iter().map(|s| cindex.get(&ekeys[s.0 as usize]).copied().unwrap_or(usize::MAX)).collect();
        let mut b: Vec<usize> = cn.succ.iter().map(|s| s.0 as usize).collect();
        a.sort_unstable();
        a.dedup();
        b.sort_unstable();
        if a != b {
            report.mismatch = Some(format!("successor orbits of explicit node {v} differ from canonical node {c}"));
            return report;
        }
    }
    let hit: FxHashSet<&Vec<u32>> = ekeys.iter().collect();
    if hit.len() != canonical.nodes.len() {
        report.mismatch = Some(format!("{} canonical nodes but {} orbits reached", canonical.nodes.len(), hit.len()));
    }
    report
}
