//! Explicit decision sets over the P/T game.

use std::fmt;

use crate::error::{Error, Result};
use crate::game::PTGame;

/// Commitment of one token: a pending choice or a set of transitions of its postset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Top,
    /// Bit `k` stands for the `k`-th transition of the place's postset.
    Commit(u64),
}

/// A marking whose tokens carry decisions; entries sorted by place.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DecisionSet {
    pub entries: Vec<(u32, Decision)>,
}

/// The five state properties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Flags {
    pub env_dependent: bool,
    pub bad: bool,
    pub deadlock: bool,
    pub terminating: bool,
    pub nondet: bool,
}

impl Flags {
    /// Bad, deadlocked, terminating and nondeterministic states only loop.
    pub fn is_sink(&self) -> bool {
        self.bad || self.deadlock || self.terminating || self.nondet
    }

    pub fn accepting(&self) -> bool {
        (self.terminating || self.env_dependent) && !(self.deadlock || self.nondet || self.bad)
    }
}

impl DecisionSet {
    /// Environment tokens allow their whole postset, system tokens still choose.
    pub fn initial(game: &PTGame) -> Result<Self> {
        let entries = game
            .initial_places()?
            .into_iter()
            .map(|p| {
                let d = if game.is_env(p as usize) { Decision::Commit(game.full_mask(p as usize)) } else { Decision::Top };
                (p, d)
            })
            .collect();
        Ok(DecisionSet { entries })
    }

    pub fn has_top(&self) -> bool {
        self.entries.iter().any(|e| e.1 == Decision::Top)
    }

    pub fn marking(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn get(&self, p: u32) -> Option<Decision> {
        self.entries.binary_search_by_key(&p, |e| e.0).ok().map(|i| self.entries[i].1)
    }

    pub fn contains(&self, p: u32) -> bool {
        self.entries.binary_search_by_key(&p, |e| e.0).is_ok()
    }

    /// Enabled in the underlying marking.
    pub fn marking_enables(&self, game: &PTGame, t: usize) -> bool {
        game.pt.pre[t].iter().all(|&(p, n)| n == 1 && self.contains(p as u32))
    }

    /// Enabled in the decision set: every preset token commits to `t`.
    pub fn enables(&self, game: &PTGame, t: usize) -> bool {
        game.pt.pre[t].iter().all(|&(_, n)| n == 1)
            && game.pre_bits[t].iter().all(|&(p, b)| matches!(self.get(p), Some(Decision::Commit(m)) if m >> b & 1 == 1))
    }

    /// Transitions enabled in the underlying marking, ascending.
    pub fn marking_enabled(&self, game: &PTGame) -> Vec<usize> {
        let mut cand: Vec<usize> =
            self.entries.iter().flat_map(|&(p, _)| game.post[p as usize].iter().map(|&t| t as usize)).collect();
        cand.sort_unstable();
        cand.dedup();
        cand.retain(|&t| self.marking_enables(game, t));
        cand
    }

    /// Transitions enabled in the decision set, ascending; empty while a top is pending.
    pub fn enabled(&self, game: &PTGame) -> Vec<usize> {
        let mut cand = Vec::new();
        for &(p, d) in &self.entries {
            if let Decision::Commit(mut m) = d {
                while m != 0 {
                    let b = m.trailing_zeros() as usize;
                    m &= m - 1;
                    cand.push(game.post[p as usize][b] as usize);
                }
            }
        }
        cand.sort_unstable();
        cand.dedup();
        cand.retain(|&t| self.enables(game, t));
        cand
    }

    pub fn flags(&self, game: &PTGame) -> Flags {
        let top = self.has_top();
        let bad = self.entries.iter().any(|&(p, _)| game.is_bad(p as usize));
        let m_enabled = !self.marking_enabled(game).is_empty();
        let enabled = if top { Vec::new() } else { self.enabled(game) };
        let env_dependent = !top && enabled.iter().all(|&t| game.env_trans[t]);
        let deadlock = !top && m_enabled && enabled.is_empty();
        let mut nondet = false;
        if !top {
            'outer: for (i, &t1) in enabled.iter().enumerate() {
                for &t2 in &enabled[i + 1..] {
                    let shared = game.pt.pre[t1]
                        .iter()
                        .any(|&(p, _)| game.is_sys(p) && game.pt.pre[t2].iter().any(|&(q, _)| q == p));
                    if shared {
                        nondet = true;
                        break 'outer;
                    }
                }
            }
        }
        Flags { env_dependent, bad, deadlock, terminating: !m_enabled, nondet }
    }

    /// Number of top successors: every top entry picks any subset of its postset.
    pub fn num_top_successors(&self, game: &PTGame) -> u128 {
        self.entries
            .iter()
            .filter(|e| e.1 == Decision::Top)
            .map(|&(p, _)| 1u128 << game.post[p as usize].len())
            .product()
    }

    /// Calls `f` on every top successor; `f` returns `false` to stop early.
    pub fn for_each_top_successor(&self, game: &PTGame, mut f: impl FnMut(DecisionSet) -> bool) -> Result<()> {
        let tops: Vec<usize> = (0..self.entries.len()).filter(|&i| self.entries[i].1 == Decision::Top).collect();
        if tops.is_empty() {
            return Err(Error::NoTop);
        }
        let limits: Vec<u64> = tops.iter().map(|&i| game.full_mask(self.entries[i].0 as usize)).collect();
        let mut cur = vec![0u64; tops.len()];
        let mut d = self.clone();
        loop {
            for (k, &i) in tops.iter().enumerate() {
                d.entries[i].1 = Decision::Commit(cur[k]);
            }
            if !f(d.clone()) {
                return Ok(());
            }
            let mut k = tops.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                if cur[k] < limits[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
            }
        }
    }

    /// All top successors, in odometer order over the top entries.
    pub fn top_successors(&self, game: &PTGame) -> Result<Vec<DecisionSet>> {
        let mut out = Vec::new();
        self.for_each_top_successor(game, |d| {
            out.push(d);
            true
        })?;
        Ok(out)
    }

    /// Fires `t`: new system tokens get a top, new environment tokens their full postset.
    pub fn fire(&self, game: &PTGame, t: usize) -> Result<DecisionSet> {
        if self.has_top() {
            return Err(Error::TopPresent);
        }
        if !self.enables(game, t) {
            return Err(Error::NotEnabledInDs(game.transition_name(t)));
        }
        let pre = &game.pt.pre[t];
        let mut entries: Vec<(u32, Decision)> =
            self.entries.iter().copied().filter(|&(p, _)| !pre.iter().any(|&(q, _)| q as u32 == p)).collect();
        for &(p, n) in &game.pt.post[t] {
            if n > 1 || entries.iter().any(|e| e.0 == p as u32) {
                return Err(Error::UnsafeNet(format!(
                    "firing {} puts a second token on {}",
                    game.transition_name(t),
                    game.place_name(p)
                )));
            }
            let d = if game.is_env(p) { Decision::Commit(game.full_mask(p)) } else { Decision::Top };
            entries.push((p as u32, d));
        }
        entries.sort_unstable_by_key(|e| e.0);
        if entries.iter().filter(|e| game.is_env(e.0 as usize)).count() > 1 {
            return Err(Error::MultipleEnvironmentTokens(format!("after firing {}", game.transition_name(t))));
        }
        Ok(DecisionSet { entries })
    }

    /// Image under the `si`-th tabulated symmetry of `game`.
    pub fn apply_symmetry(&self, game: &PTGame, si: usize) -> DecisionSet {
        let mut entries: Vec<(u32, Decision)> = self
            .entries
            .iter()
            .map(|&(p, d)| {
                let q = game.place_perm[si][p as usize];
                let d = match d {
                    Decision::Top => Decision::Top,
                    Decision::Commit(m) => Decision::Commit(game.permute_mask(si, p as usize, m)),
                };
                (q, d)
            })
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        DecisionSet { entries }
    }

    /// Transitions committed to by the token on `p`.
    pub fn commitment(&self, game: &PTGame, p: u32) -> Option<Vec<usize>> {
        match self.get(p)? {
            Decision::Top => None,
            Decision::Commit(m) => Some(
                game.post[p as usize].iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, &t)| t as usize).collect(),
            ),
        }
    }

    pub fn display<'a>(&'a self, game: &'a PTGame) -> DisplayDs<'a> {
        DisplayDs { d: self, game }
    }
}

pub struct DisplayDs<'a> {
    d: &'a DecisionSet,
    game: &'a PTGame,
}

impl fmt::Display for DisplayDs<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .d
            .entries
            .iter()
            .map(|&(p, _)| {
                let dec = match self.d.commitment(self.game, p) {
                    None => "T".to_string(),
                    Some(ts) => {
                        let names: Vec<String> = ts.iter().map(|&t| self.game.transition_name(t)).collect();
                        format!("{{{}}}", names.join(","))
                    }
                };
                format!("({},{})", self.game.place_name(p as usize), dec)
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::generate_cs;
    use crate::game::{HLGame, PlaceKind};

    fn place(g: &PTGame, name: &str) -> u32 {
        (0..g.num_places()).find(|&p| g.place_name(p) == name).unwrap() as u32
    }

    fn trans(g: &PTGame, name: &str) -> usize {
        (0..g.num_transitions()).find(|&t| g.transition_name(t) == name).unwrap()
    }

    fn commit(g: &PTGame, p: u32, ts: &[&str]) -> Decision {
        let mut m = 0;
        for t in ts {
            let t = trans(g, t) as u32;
            m |= 1 << g.post[p as usize].binary_search(&t).unwrap();
        }
        Decision::Commit(m)
    }

    #[test]
    fn initial_decision_set_of_three_computers() {
        let g = generate_cs(3).expand().unwrap();
        let d = DecisionSet::initial(&g).unwrap();
        let env = place(&g, "Env.dot");
        let expected = vec![
            (env, Decision::Commit(g.full_mask(env as usize))),
            (place(&g, "Sys.c1"), Decision::Top),
            (place(&g, "Sys.c2"), Decision::Top),
            (place(&g, "Sys.c3"), Decision::Top),
        ];
        assert_eq!(d.entries, expected);
        let f = d.flags(&g);
        assert!(!f.env_dependent && !f.bad);
    }

    #[test]
    fn environment_only_game_has_no_top() {
        let (net, m0) = crate::net::tests::toy(1);
        let g = HLGame { name: "t".into(), net, m0, kinds: vec![PlaceKind::Env, PlaceKind::Env] }.expand().unwrap();
        let d = DecisionSet::initial(&g).unwrap();
        assert!(!d.has_top());
    }

    #[test]
    fn two_environment_tokens_are_rejected() {
        let (net, m0) = crate::net::tests::toy(2);
        let g = HLGame { name: "t".into(), net, m0, kinds: vec![PlaceKind::Env, PlaceKind::Sys] }.expand().unwrap();
        assert!(matches!(DecisionSet::initial(&g), Err(Error::MultipleEnvironmentTokens(_))));
    }

    #[test]
    fn top_successor_counts() {
        let g1 = generate_cs(1).expand().unwrap();
        let d = DecisionSet::initial(&g1).unwrap();
        assert_eq!(d.top_successors(&g1).unwrap().len(), 4);
        let g2 = generate_cs(2).expand().unwrap();
        let d = DecisionSet::initial(&g2).unwrap();
        let all = d.top_successors(&g2).unwrap();
        let post: usize = g2.post[place(&g2, "Sys.c1") as usize].len();
        assert_eq!(all.len(), 1 << (2 * post));
        assert_eq!(d.num_top_successors(&g2), all.len() as u128);
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
        let g3 = generate_cs(3).expand().unwrap();
        let d = DecisionSet::initial(&g3).unwrap();
        let post = g3.post[place(&g3, "Sys.c1") as usize].len();
        assert_eq!(post, 6);
        assert_eq!(d.num_top_successors(&g3), 1u128 << (3 * post));
        let empty = all.iter().find(|x| x.entries.iter().all(|e| !g2.is_sys(e.0 as usize) || e.1 == Decision::Commit(0))).unwrap();
        assert!(empty.enabled(&g2).iter().all(|&t| g2.env_trans[t]));
        assert!(matches!(empty.top_successors(&g2), Err(Error::NoTop)));
    }

    #[test]
    fn environment_decision_fires() {
        let g = generate_cs(3).expand().unwrap();
        let env = place(&g, "Env.dot");
        let mut d = DecisionSet::initial(&g).unwrap();
        for c in 1..=3 {
            let p = place(&g, &format!("Sys.c{c}"));
            let i = d.entries.iter().position(|e| e.0 == p).unwrap();
            d.entries[i].1 = commit(&g, p, &["inf.c1", "inf.c2", "inf.c3"]);
        }
        assert!(d.flags(&g).env_dependent);
        let d1 = d.fire(&g, trans(&g, "d.c1")).unwrap();
        let i1 = place(&g, "I.c1");
        assert_eq!(d1.get(i1), Some(Decision::Commit(g.full_mask(i1 as usize))));
        assert!(!d1.contains(env));
        for c in 1..=3 {
            let p = place(&g, &format!("Sys.c{c}"));
            assert_eq!(d1.get(p), d.get(p));
        }
        assert_eq!(d1.enabled(&g), vec![trans(&g, "inf.c1")]);
        let d2 = d1.fire(&g, trans(&g, "inf.c1")).unwrap();
        assert!(d2.has_top());
        assert!(matches!(d2.fire(&g, trans(&g, "a.(c1,c1)")), Err(Error::TopPresent)));
    }

    #[test]
    fn missing_commitment_blocks_firing() {
        let g = generate_cs(2).expand().unwrap();
        let mut d = DecisionSet::initial(&g).unwrap();
        for e in d.entries.iter_mut() {
            if e.1 == Decision::Top {
                e.1 = Decision::Commit(0);
            }
        }
        assert!(matches!(d.fire(&g, trans(&g, "a.(c1,c2)")), Err(Error::NotEnabledInDs(_))));
        let f = d.flags(&g);
        assert!(!f.deadlock, "the environment can still move");
        let p = place(&g, "Sys.c1");
        let i = d.entries.iter().position(|e| e.0 == p).unwrap();
        d.entries[i].1 = commit(&g, p, &["a.(c1,c1)", "a.(c1,c2)"]);
        assert!(d.flags(&g).nondet);
    }

    #[test]
    fn deadlock_when_all_refuse() {
        let g = generate_cs(1).expand().unwrap();
        let sys = place(&g, "Sys.c1");
        let d = DecisionSet { entries: vec![(sys, Decision::Commit(0))] };
        let f = d.flags(&g);
        assert!(f.deadlock && !f.terminating && f.env_dependent);
        let h = place(&g, "H.c1");
        let t = DecisionSet { entries: vec![(h, Decision::Top)] };
        let f = t.flags(&g);
        assert!(f.terminating && !f.deadlock);
    }

    #[test]
    fn firing_agrees_with_marking_semantics() {
        let g = generate_cs(2).expand().unwrap();
        let d0 = DecisionSet::initial(&g).unwrap();
        for d in d0.top_successors(&g).unwrap() {
            for t in d.enabled(&g) {
                let next = d.fire(&g, t).unwrap();
                let mut m = vec![0u32; g.num_places()];
                for p in d.marking() {
                    m[p as usize] = 1;
                }
                let fired = g.pt.fire(&m, t).unwrap();
                let img: Vec<u32> = (0..g.num_places() as u32).filter(|&p| fired[p as usize] == 1).collect();
                assert_eq!(next.marking(), img);
            }
        }
    }

    #[test]
    fn symmetry_commutes_with_firing() {
        let g = generate_cs(2).expand().unwrap();
        let d0 = DecisionSet::initial(&g).unwrap();
        for si in 0..g.symmetries.len() {
            assert_eq!(d0.apply_symmetry(&g, si), d0);
        }
        for d in d0.top_successors(&g).unwrap() {
            for si in 0..g.symmetries.len() {
                let sd = d.apply_symmetry(&g, si);
                assert_eq!(sd.flags(&g), d.flags(&g));
                for t in d.enabled(&g) {
                    let st = g.trans_perm[si][t] as usize;
                    assert_eq!(d.fire(&g, t).unwrap().apply_symmetry(&g, si), sd.fire(&g, st).unwrap());
                }
            }
        }
    }
}
