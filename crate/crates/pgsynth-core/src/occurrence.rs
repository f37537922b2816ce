//! Occurrence nets, their causal structure, and the Petri-game strategy conditions.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::game::PTGame;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnPlace {
    pub name: String,
    /// P/T place this condition is labeled with.
    pub label: u32,
    /// Producing transition, `None` for initial places.
    pub producer: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnTransition {
    pub name: String,
    /// P/T transition this event is labeled with.
    pub label: u32,
    pub pre: Vec<u32>,
    pub post: Vec<u32>,
}

/// A labeled occurrence net; used for Petri-game strategies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OccurrenceNet {
    pub places: Vec<OnPlace>,
    pub transitions: Vec<OnTransition>,
    pub initial: Vec<u32>,
    /// Places at which a finite prefix stops although the game may continue.
    pub truncated: Vec<u32>,
}

impl OccurrenceNet {
    pub fn add_place(&mut self, name: String, label: u32, producer: Option<u32>) -> u32 {
        self.places.push(OnPlace { name, label, producer });
        let id = self.places.len() as u32 - 1;
        if producer.is_none() {
            self.initial.push(id);
        }
        id
    }

    /// Adds an event; its postset is added separately.
    pub fn add_transition(&mut self, name: String, label: u32, pre: Vec<u32>) -> u32 {
        self.transitions.push(OnTransition { name, label, pre, post: Vec::new() });
        self.transitions.len() as u32 - 1
    }

    /// Events consuming place `p`.
    pub fn consumers(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.places.len()];
        for (t, tr) in self.transitions.iter().enumerate() {
            for &p in &tr.pre {
                out[p as usize].push(t as u32);
            }
        }
        out
    }

    pub fn enabled(&self, cut: &[u32], t: usize) -> bool {
        self.transitions[t].pre.iter().all(|p| cut.binary_search(p).is_ok())
    }

    pub fn fire(&self, cut: &[u32], t: usize) -> Vec<u32> {
        let tr = &self.transitions[t];
        let mut out: Vec<u32> = cut.iter().copied().filter(|p| !tr.pre.contains(p)).collect();
        out.extend(&tr.post);
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn union(&mut self, o: &BitSet) {
        self.0.iter_mut().zip(&o.0).for_each(|(a, b)| *a |= b);
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }
}

/// Causality, conflict and concurrency over all nodes; places come first, then events.
#[derive(Clone, Debug)]
pub struct Relations {
    pub num_places: usize,
    below: Vec<BitSet>,
    conflict: Vec<BitSet>,
}

impl Relations {
    pub fn place(&self, p: u32) -> usize {
        p as usize
    }
    pub fn transition(&self, t: u32) -> usize {
        self.num_places + t as usize
    }
    /// Reflexive-transitive flow order `x ≤ y`.
    pub fn le(&self, x: usize, y: usize) -> bool {
        self.below[y].get(x)
    }
    pub fn conflict(&self, x: usize, y: usize) -> bool {
        self.conflict[x].get(y)
    }
    pub fn co(&self, x: usize, y: usize) -> bool {
        !self.le(x, y) && !self.le(y, x) && !self.conflict(x, y)
    }
}

/// Computes `≤`, `♯` and `co`; fails on cyclic flow.
pub fn causal_analysis(net: &OccurrenceNet) -> Result<Relations> {
    let np = net.places.len();
    let n = np + net.transitions.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (t, tr) in net.transitions.iter().enumerate() {
        for &p in &tr.pre {
            succ[p as usize].push(np + t);
            indeg[np + t] += 1;
        }
        for &p in &tr.post {
            succ[np + t].push(p as usize);
            indeg[p as usize] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| indeg[x] == 0).collect();
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &y in &succ[x] {
            indeg[y] -= 1;
            if indeg[y] == 0 {
                queue.push_back(y);
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicFlow);
    }
    let mut below = vec![BitSet::new(n); n];
    for &x in &order {
        below[x].set(x);
        let bx = below[x].clone();
        for &y in &succ[x] {
            below[y].union(&bx);
        }
    }
    let mut above = vec![BitSet::new(n); n];
    for y in 0..n {
        for x in below[y].ones() {
            above[x].set(y);
        }
    }
    let mut conflict = vec![BitSet::new(n); n];
    for p in 0..np {
        let post: Vec<usize> = succ[p].clone();
        for (i, &t1) in post.iter().enumerate() {
            for &t2 in &post[i + 1..] {
                let a2 = above[t2].clone();
                let a1 = above[t1].clone();
                for x in a1.ones() {
                    conflict[x].union(&a2);
                }
                for x in a2.ones() {
                    conflict[x].union(&a1);
                }
            }
        }
    }
    Ok(Relations { num_places: np, below, conflict })
}

/// All reachable cuts (sorted place lists), breadth-first, at most `bound` of them.
pub fn reachable_cuts(net: &OccurrenceNet, bound: usize) -> Result<Vec<Vec<u32>>> {
    let mut init = net.initial.clone();
    init.sort_unstable();
    let mut seen: HashSet<Vec<u32>> = HashSet::from([init.clone()]);
    let mut out = vec![init];
    let mut i = 0;
    while i < out.len() {
        let cut = out[i].clone();
        i += 1;
        for t in 0..net.transitions.len() {
            if net.enabled(&cut, t) {
                let next = net.fire(&cut, t);
                if seen.insert(next.clone()) {
                    if out.len() >= bound {
                        return Err(Error::BoundExceeded(format!("more than {bound} reachable cuts")));
                    }
                    out.push(next);
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of checking a strategy against its game.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrategyReport {
    pub structural: bool,
    pub justified_refusal: bool,
    pub determinism: bool,
    pub deadlock_free: bool,
    pub winning: bool,
    pub cuts_checked: usize,
    pub violations: Vec<String>,
}

impl StrategyReport {
    pub fn all_pass(&self) -> bool {
        self.structural && self.justified_refusal && self.determinism && self.deadlock_free && self.winning
    }
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v
}

/// Checks occurrence-net structure and the strategy conditions on every reachable cut.
///
/// Cuts touching truncated places are exempt from refusal and deadlock checks:
/// the prefix deliberately stops there.
pub fn validate_strategy(sigma: &OccurrenceNet, game: &PTGame, bound: usize) -> Result<StrategyReport> {
    let mut r = StrategyReport {
        structural: true,
        justified_refusal: true,
        determinism: true,
        deadlock_free: true,
        winning: true,
        ..Default::default()
    };
    let fail = |flag: &mut bool, msg: String, viol: &mut Vec<String>| {
        *flag = false;
        if viol.len() < 50 {
            viol.push(msg);
        }
    };
    let mut violations = Vec::new();
    let mut structural = true;
    let consumers = sigma.consumers();
    let rel = causal_analysis(sigma);
    if rel.is_err() {
        fail(&mut structural, "flow relation is cyclic".into(), &mut violations);
    }
    let mut produced = vec![0usize; sigma.places.len()];
    for tr in &sigma.transitions {
        for &p in &tr.post {
            produced[p as usize] += 1;
        }
    }
    for (p, pl) in sigma.places.iter().enumerate() {
        let expected = usize::from(pl.producer.is_some());
        if produced[p] != expected {
            fail(&mut structural, format!("place {} has {} producers", pl.name, produced[p]), &mut violations);
        }
    }
    let init_labels = sorted(sigma.initial.iter().map(|&p| sigma.places[p as usize].label).collect());
    if init_labels != game.initial_places().unwrap_or_default() {
        fail(&mut structural, "initial cut is not labeled with the initial marking".into(), &mut violations);
    }
    let mut seen_events = HashSet::new();
    for tr in &sigma.transitions {
        let t = tr.label as usize;
        let pre = sorted(tr.pre.iter().map(|&p| sigma.places[p as usize].label).collect());
        let post = sorted(tr.post.iter().map(|&p| sigma.places[p as usize].label).collect());
        let gpre: Vec<u32> = game.pt.pre[t].iter().map(|&(p, _)| p as u32).collect();
        let gpost: Vec<u32> = game.pt.post[t].iter().map(|&(p, _)| p as u32).collect();
        if pre != gpre || post != gpost {
            fail(&mut structural, format!("event {} is not labeled homomorphically", tr.name), &mut violations);
        }
        if !seen_events.insert((sorted(tr.pre.clone()), tr.label)) {
            fail(&mut structural, format!("event {} duplicates an event with the same preset", tr.name), &mut violations);
        }
    }
    if let Ok(rel) = &rel {
        for t in 0..sigma.transitions.len() {
            let x = rel.transition(t as u32);
            if rel.conflict(x, x) {
                fail(&mut structural, format!("event {} is in self-conflict", sigma.transitions[t].name), &mut violations);
            }
        }
    }
    r.structural = structural;
    for pl in &sigma.places {
        if game.is_bad(pl.label as usize) {
            fail(&mut r.winning, format!("bad place {} occurs", pl.name), &mut violations);
        }
    }
    let truncated: HashSet<u32> = sigma.truncated.iter().copied().collect();
    let cuts = if structural { reachable_cuts(sigma, bound)? } else { Vec::new() };
    r.cuts_checked = cuts.len();
    for cut in &cuts {
        let labels: Vec<u32> = cut.iter().map(|&p| sigma.places[p as usize].label).collect();
        let mut marking = vec![0u32; game.num_places()];
        for &l in &labels {
            marking[l as usize] += 1;
        }
        let open = cut.iter().any(|p| truncated.contains(p));
        let enabled_events: Vec<usize> = (0..sigma.transitions.len()).filter(|&t| sigma.enabled(cut, t)).collect();
        let enabled_labels: HashSet<u32> = enabled_events.iter().map(|&t| sigma.transitions[t].label).collect();
        let names = || labels.iter().map(|&l| game.place_name(l as usize)).collect::<Vec<_>>().join(",");
        let mut game_enabled = false;
        for t in 0..game.num_transitions() {
            if !game.pt.enabled(&marking, t) {
                continue;
            }
            game_enabled = true;
            if open || enabled_labels.contains(&(t as u32)) {
                continue;
            }
            let refused = cut.iter().any(|&q| {
                let l = sigma.places[q as usize].label as usize;
                game.is_sys(l)
                    && game.pt.pre[t].iter().any(|&(p, _)| p == l)
                    && consumers[q as usize].iter().all(|&e| sigma.transitions[e as usize].label != t as u32)
            });
            if !refused {
                fail(
                    &mut r.justified_refusal,
                    format!("{} is missing at {{{}}} without a refusing system place", game.transition_name(t), names()),
                    &mut violations,
                );
            }
        }
        if game_enabled && enabled_events.is_empty() && !open {
            fail(&mut r.deadlock_free, format!("deadlock at {{{}}}", names()), &mut violations);
        }
        for &q in cut {
            if !game.is_sys(sigma.places[q as usize].label as usize) {
                continue;
            }
            let k = enabled_events.iter().filter(|&&e| sigma.transitions[e].pre.contains(&q)).count();
            if k > 1 {
                fail(
                    &mut r.determinism,
                    format!("{} allows {k} enabled events at {{{}}}", sigma.places[q as usize].name, names()),
                    &mut violations,
                );
            }
        }
    }
    r.violations = violations;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// p0 -> t0 -> p1 and p0 -> t1 -> p2.
    fn branching() -> OccurrenceNet {
        let mut n = OccurrenceNet::default();
        let p0 = n.add_place("p0".into(), 0, None);
        let t0 = n.add_transition("t0".into(), 0, vec![p0]);
        let p1 = n.add_place("p1".into(), 1, Some(t0));
        n.transitions[t0 as usize].post.push(p1);
        let t1 = n.add_transition("t1".into(), 1, vec![p0]);
        let p2 = n.add_place("p2".into(), 2, Some(t1));
        n.transitions[t1 as usize].post.push(p2);
        n
    }

    #[test]
    fn chain_is_ordered() {
        let n = branching();
        let r = causal_analysis(&n).unwrap();
        assert!(r.le(r.place(0), r.place(1)));
        assert!(!r.co(r.place(0), r.place(1)));
    }

    #[test]
    fn shared_input_gives_conflict() {
        let n = branching();
        let r = causal_analysis(&n).unwrap();
        assert!(r.conflict(r.transition(0), r.transition(1)));
        assert!(r.conflict(r.place(1), r.place(2)));
        assert!(!r.conflict(r.transition(0), r.transition(0)));
        // the three relations partition all pairs
        let n_nodes = n.places.len() + n.transitions.len();
        for x in 0..n_nodes {
            for y in 0..n_nodes {
                let kinds = [r.le(x, y) || r.le(y, x), r.conflict(x, y), r.co(x, y)];
                assert_eq!(kinds.iter().filter(|&&k| k).count(), 1, "{x} {y}");
            }
        }
    }

    #[test]
    fn cuts() {
        let mut empty = OccurrenceNet::default();
        empty.add_place("p".into(), 0, None);
        assert_eq!(reachable_cuts(&empty, 10).unwrap().len(), 1);
        let mut single = OccurrenceNet::default();
        let p = single.add_place("p".into(), 0, None);
        single.add_transition("t".into(), 0, vec![p]);
        assert_eq!(reachable_cuts(&single, 10).unwrap().len(), 2);
        assert!(matches!(reachable_cuts(&branching(), 2), Err(Error::BoundExceeded(_))));
    }

    #[test]
    fn cyclic_flow_is_rejected() {
        let mut n = OccurrenceNet::default();
        let p = n.add_place("p".into(), 0, None);
        let t = n.add_transition("t".into(), 0, vec![p]);
        n.transitions[t as usize].post.push(p);
        assert!(matches!(causal_analysis(&n), Err(Error::CyclicFlow)));
    }
}
