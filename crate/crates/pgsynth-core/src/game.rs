//! Petri games over symmetric nets and their P/T expansion.

use crate::color::Symmetry;
use crate::error::{Error, Result};
use crate::net::{HLMarking, HLNet, PTNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlaceKind {
    Env,
    Sys,
    /// A bad place; bad places are system places.
    Bad,
}

impl PlaceKind {
    pub fn is_env(self) -> bool {
        self == PlaceKind::Env
    }
}

/// A high-level Petri game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HLGame {
    pub name: String,
    pub net: HLNet,
    pub m0: HLMarking,
    pub kinds: Vec<PlaceKind>,
}

impl HLGame {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.len() != self.net.places.len() {
            return Err(Error::invalid("every place needs a kind"));
        }
        self.net.validate(&self.m0)
    }

    /// Expands into the P/T game; validates first.
    pub fn expand(&self) -> Result<PTGame> {
        self.validate()?;
        PTGame::new(self.clone())
    }

    pub fn num_symmetries(&self) -> u128 {
        self.net.universe.num_symmetries()
    }
}

/// Largest symmetry group for which per-symmetry index tables are precomputed.
pub const MAX_TABULATED_SYMMETRIES: u128 = 40_320;

/// The expanded P/T game with lookup tables used by the decision-set layer.
#[derive(Clone, Debug)]
pub struct PTGame {
    pub hl: HLGame,
    pub pt: PTNet,
    pub kind: Vec<PlaceKind>,
    /// Transitions with the place in their preset, ascending.
    pub post: Vec<Vec<u32>>,
    /// Preset places of every transition paired with the transition's bit in that place's postset.
    pub pre_bits: Vec<Vec<(u32, u8)>>,
    pub post_places: Vec<Vec<u32>>,
    /// Transition has an environment place in its preset.
    pub env_trans: Vec<bool>,
    /// High-level transition has an environment place in its preset.
    pub env_trans_hl: Vec<bool>,
    pub symmetries: Vec<Symmetry>,
    pub place_perm: Vec<Vec<u32>>,
    pub trans_perm: Vec<Vec<u32>>,
}

impl PTGame {
    fn new(hl: HLGame) -> Result<Self> {
        let pt = hl.net.expand(&hl.m0)?;
        let kind: Vec<PlaceKind> = pt.places.iter().map(|p| hl.kinds[p.place]).collect();
        let mut post = vec![Vec::new(); pt.places.len()];
        for (t, pre) in pt.pre.iter().enumerate() {
            for &(p, _) in pre {
                post[p].push(t as u32);
            }
        }
        for (p, ts) in post.iter().enumerate() {
            if ts.len() > 64 {
                return Err(Error::invalid(format!(
                    "postset of {} has {} transitions; at most 64 are supported",
                    hl.net.place_instance_name(pt.places[p].place, &pt.places[p].colors),
                    ts.len()
                )));
            }
        }
        let pre_bits = pt
            .pre
            .iter()
            .enumerate()
            .map(|(t, pre)| {
                pre.iter()
                    .map(|&(p, _)| {
                        let bit = post[p].binary_search(&(t as u32)).expect("transition in postset");
                        (p as u32, bit as u8)
                    })
                    .collect()
            })
            .collect();
        let post_places = pt.post.iter().map(|ps| ps.iter().map(|&(p, _)| p as u32).collect()).collect();
        let env_trans = pt.pre.iter().map(|pre| pre.iter().any(|&(p, _)| kind[p].is_env())).collect();
        let env_trans_hl = (0..hl.net.transitions.len())
            .map(|t| hl.net.arcs_of(t, true).any(|a| hl.kinds[a.place].is_env()))
            .collect();
        let mut g = PTGame {
            hl,
            pt,
            kind,
            post,
            pre_bits,
            post_places,
            env_trans,
            env_trans_hl,
            symmetries: Vec::new(),
            place_perm: Vec::new(),
            trans_perm: Vec::new(),
        };
        if g.hl.num_symmetries() <= MAX_TABULATED_SYMMETRIES {
            g.symmetries = g.hl.net.universe.enumerate_symmetries();
            g.place_perm = g.symmetries.iter().map(|s| g.permute_places(s)).collect();
            g.trans_perm = g.symmetries.iter().map(|s| g.permute_transitions(s)).collect();
        }
        Ok(g)
    }

    pub fn num_places(&self) -> usize {
        self.pt.places.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.pt.transitions.len()
    }

    pub fn is_env(&self, p: usize) -> bool {
        self.kind[p].is_env()
    }

    pub fn is_bad(&self, p: usize) -> bool {
        self.kind[p] == PlaceKind::Bad
    }

    pub fn is_sys(&self, p: usize) -> bool {
        !self.is_env(p)
    }

    pub fn place_name(&self, p: usize) -> String {
        let pi = &self.pt.places[p];
        self.hl.net.place_instance_name(pi.place, &pi.colors)
    }

    pub fn transition_name(&self, t: usize) -> String {
        let ti = &self.pt.transitions[t];
        self.hl.net.transition_instance_name(ti.trans, &ti.mode)
    }

    /// Image of every P/T place under `s`.
    pub fn permute_places(&self, s: &Symmetry) -> Vec<u32> {
        let net = &self.hl.net;
        self.pt
            .places
            .iter()
            .map(|pi| {
                let c = s.tuple(&net.places[pi.place].ty, &pi.colors);
                self.pt.place_index(net, pi.place, &c) as u32
            })
            .collect()
    }

    /// Image of every P/T transition under `s`.
    pub fn permute_transitions(&self, s: &Symmetry) -> Vec<u32> {
        let net = &self.hl.net;
        self.pt
            .transitions
            .iter()
            .map(|ti| {
                let m = s.tuple(&net.transitions[ti.trans].var_classes(), &ti.mode);
                self.pt.transition_index(net, ti.trans, &m).expect("guards are symmetric") as u32
            })
            .collect()
    }

    /// Initial marking as a sorted list of places; fails on unsafe or multi-environment markings.
    pub fn initial_places(&self) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        let mut env = 0;
        for (p, &n) in self.pt.m0.iter().enumerate() {
            if n > 1 {
                return Err(Error::UnsafeNet(format!("{} holds {n} tokens initially", self.place_name(p))));
            }
            if n == 1 {
                out.push(p as u32);
                env += self.is_env(p) as usize;
            }
        }
        if env > 1 {
            return Err(Error::MultipleEnvironmentTokens(format!("{env} environment tokens initially")));
        }
        Ok(out)
    }

    /// Full commitment mask of place `p`.
    pub fn full_mask(&self, p: usize) -> u64 {
        let n = self.post[p].len();
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    /// Maps a commitment mask over `post(p)` through symmetry number `si`.
    pub fn permute_mask(&self, si: usize, p: usize, mask: u64) -> u64 {
        let q = self.place_perm[si][p] as usize;
        let mut out = 0u64;
        let mut m = mask;
        while m != 0 {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            let t = self.trans_perm[si][self.post[p][b] as usize];
            let nb = self.post[q].binary_search(&t).expect("symmetric postsets");
            out |= 1 << nb;
        }
        out
    }

    pub fn tabulated(&self) -> bool {
        !self.symmetries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::generate_cs;

    #[test]
    fn classification_is_lifted() {
        let g = generate_cs(3).expand().unwrap();
        let sys: Vec<String> =
            (0..g.num_places()).filter(|&p| g.hl.net.places[g.pt.places[p].place].name == "Sys").map(|p| g.place_name(p)).collect();
        assert_eq!(sys, vec!["Sys.c1", "Sys.c2", "Sys.c3"]);
        assert!((0..g.num_places()).filter(|&p| sys.contains(&g.place_name(p))).all(|p| g.is_sys(p)));
        let env = g.pt.places.iter().position(|p| g.hl.net.places[p.place].name == "Env").unwrap();
        assert!(g.is_env(env));
        let bad = (0..g.num_places()).filter(|&p| g.is_bad(p)).count();
        assert_eq!(bad, 9);
    }

    #[test]
    fn no_bad_places_without_bad_kind() {
        let (net, m0) = crate::net::tests::toy(2);
        let g = HLGame { name: "toy".into(), net, m0, kinds: vec![PlaceKind::Sys, PlaceKind::Env] };
        let pg = g.expand().unwrap();
        assert_eq!((0..pg.num_places()).filter(|&p| pg.is_bad(p)).count(), 0);
    }

    #[test]
    fn connect_expands_to_nine_instances() {
        let g = generate_cs(3).expand().unwrap();
        let a = g.hl.net.transition_index("a").unwrap();
        assert_eq!(g.pt.transitions.iter().filter(|t| t.trans == a).count(), 9);
        let g1 = generate_cs(1).expand().unwrap();
        assert_eq!(g1.pt.transitions.iter().filter(|t| t.trans == a).count(), 1);
    }

    #[test]
    fn pre_and_post_commute_with_symmetries() {
        let g = generate_cs(2).expand().unwrap();
        for si in 0..g.symmetries.len() {
            let pp = &g.place_perm[si];
            for t in 0..g.num_transitions() {
                let st = g.trans_perm[si][t] as usize;
                let mut img: Vec<(usize, u32)> = g.pt.pre[t].iter().map(|&(p, n)| (pp[p] as usize, n)).collect();
                img.sort();
                assert_eq!(img, g.pt.pre[st]);
                let mut img: Vec<(usize, u32)> = g.pt.post[t].iter().map(|&(p, n)| (pp[p] as usize, n)).collect();
                img.sort();
                assert_eq!(img, g.pt.post[st]);
            }
        }
    }
}
