//! Dynamic and canonical representations of symbolic decision sets.
//!
//! A dynamic representation replaces colors by dynamic subclasses of a given
//! cardinality. An entry `(p.Z, C)` stands for every concrete tuple `c` whose
//! colors are assigned to `Z`, with commitment `{t.v in post(p.c) : va(v) in C}`.
//! The canonical representation merges subclasses with equal context and then
//! picks the subclass order with the smallest flat encoding.

use std::cell::Cell;
use std::fmt;

use itertools::Itertools;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::color::ColorUniverse;
use crate::decision::{Decision, DecisionSet, Flags};
use crate::error::{Error, Result};
use crate::game::PTGame;
use crate::net::{HLNet, Term};

/// Leading tag of the external key form.
pub const ENCODING_TAG: &str = "pgc1";
const ENCODING_VERSION: u32 = 1;
/// Stands for the replaced occurrence in a context.
const NABLA: u32 = u32::MAX;
const TOP_MARK: u32 = u32::MAX;

/// A block of interchangeable colors of one class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DynSubclass {
    pub stat: u32,
    pub card: u32,
}

/// A transition with one subclass per variable slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymInst {
    pub trans: u32,
    pub args: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DynDecision {
    Top,
    /// Sorted, duplicate free.
    Commit(Vec<SymInst>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DynEntry {
    pub place: u32,
    pub tuple: Vec<u32>,
    pub dec: DynDecision,
}

/// Subclasses per color class plus a dynamic decision set (sorted entries).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DynRep {
    pub subclasses: Vec<Vec<DynSubclass>>,
    pub entries: Vec<DynEntry>,
}

/// A minimal and ordered representation with its encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonRep {
    pub rep: DynRep,
    pub key: Vec<u32>,
}

impl CanonRep {
    /// External form of the key, e.g. `pgc1:1.2.3...`.
    pub fn key_string(&self) -> String {
        format!("{ENCODING_TAG}:{}", self.key.iter().join("."))
    }
}

/// Per class, the subclass index of every color.
pub type Assignment = Vec<Vec<u32>>;

fn slot_classes(net: &HLNet, t: u32) -> impl Iterator<Item = usize> + '_ {
    net.transitions[t as usize].vars.iter().map(|v| v.class)
}

impl DynRep {
    /// Sorts commitments and entries and drops duplicates.
    pub fn normalize(&mut self) {
        for e in &mut self.entries {
            if let DynDecision::Commit(c) = &mut e.dec {
                c.sort_unstable();
                c.dedup();
            }
        }
        self.entries.sort_unstable();
        self.entries.dedup();
    }

    /// Renames subclass `j` of class `i` to `perm[i][j]`; several old names may share a new one.
    fn rename(&self, net: &HLNet, perm: &[Vec<u32>]) -> Vec<DynEntry> {
        let mut entries: Vec<DynEntry> = self
            .entries
            .iter()
            .map(|e| {
                let ty = &net.places[e.place as usize].ty;
                let tuple = e.tuple.iter().zip(ty).map(|(&z, &i)| perm[i][z as usize]).collect();
                let dec = match &e.dec {
                    DynDecision::Top => DynDecision::Top,
                    DynDecision::Commit(c) => {
                        let mut c: Vec<SymInst> = c
                            .iter()
                            .map(|s| SymInst {
                                trans: s.trans,
                                args: s.args.iter().zip(slot_classes(net, s.trans)).map(|(&z, i)| perm[i][z as usize]).collect(),
                            })
                            .collect();
                        c.sort_unstable();
                        c.dedup();
                        DynDecision::Commit(c)
                    }
                };
                DynEntry { place: e.place, tuple, dec }
            })
            .collect();
        entries.sort_unstable();
        entries.dedup();
        entries
    }

    /// Applies a bijective renaming of subclass indices.
    pub fn permute(&self, net: &HLNet, perm: &[Vec<u32>]) -> DynRep {
        let mut subclasses = self.subclasses.clone();
        for (i, p) in perm.iter().enumerate() {
            for (j, &nj) in p.iter().enumerate() {
                subclasses[i][nj as usize] = self.subclasses[i][j];
            }
        }
        DynRep { subclasses, entries: self.rename(net, perm) }
    }

    /// Flat encoding: version, per-class `(stat, card)` vectors, then the sorted entries.
    pub fn encode(&self) -> Vec<u32> {
        let mut out = vec![ENCODING_VERSION, self.subclasses.len() as u32];
        for cls in &self.subclasses {
            out.push(cls.len() as u32);
            for z in cls {
                out.extend([z.stat, z.card]);
            }
        }
        out.push(self.entries.len() as u32);
        for e in &self.entries {
            out.push(e.place);
            out.extend(&e.tuple);
            match &e.dec {
                DynDecision::Top => out.push(TOP_MARK),
                DynDecision::Commit(c) => {
                    out.push(c.len() as u32);
                    for s in c {
                        out.push(s.trans);
                        out.extend(&s.args);
                    }
                }
            }
        }
        out
    }

    pub fn has_top(&self) -> bool {
        self.entries.iter().any(|e| e.dec == DynDecision::Top)
    }

    /// Orderings tried when ordering this representation: exchanges of subclasses equal in stat and cardinality.
    pub fn num_orderings(&self) -> u64 {
        self.subclasses
            .iter()
            .flat_map(|cls| cls.iter().counts().into_values())
            .map(|m| (1..=m as u64).product::<u64>())
            .product()
    }

    fn check_subclass(&self, i: usize, j: u32) -> Result<()> {
        if i < self.subclasses.len() && (j as usize) < self.subclasses[i].len() {
            Ok(())
        } else {
            Err(Error::UnknownSubclass(format!("Z{}^{}", i + 1, j + 1)))
        }
    }

    /// Entries around subclass `j` of class `i` with exactly one occurrence replaced by a placeholder.
    pub fn context(&self, net: &HLNet, i: usize, j: u32) -> Result<Vec<DynEntry>> {
        self.check_subclass(i, j)?;
        let mut out = Vec::new();
        for e in &self.entries {
            let ty = &net.places[e.place as usize].ty;
            for (k, (&z, &ci)) in e.tuple.iter().zip(ty).enumerate() {
                if ci == i && z == j {
                    let mut s = e.clone();
                    s.tuple[k] = NABLA;
                    out.push(s);
                }
            }
            if let DynDecision::Commit(c) = &e.dec {
                for (n, s) in c.iter().enumerate() {
                    for (k, (&z, ci)) in s.args.iter().zip(slot_classes(net, s.trans)).enumerate() {
                        if ci == i && z == j {
                            let mut c2 = c.clone();
                            c2[n].args[k] = NABLA;
                            c2.sort_unstable();
                            out.push(DynEntry { place: e.place, tuple: e.tuple.clone(), dec: DynDecision::Commit(c2) });
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Per subclass of class `i`, an order-independent hash of its context.
    fn context_fingerprints(&self, net: &HLNet, i: usize) -> Vec<u64> {
        let mut fp = vec![0u64; self.subclasses[i].len()];
        let mut inst_h = Vec::new();
        for e in &self.entries {
            let ty = &net.places[e.place as usize].ty;
            inst_h.clear();
            let dec_h = match &e.dec {
                DynDecision::Top => TOP_HASH,
                DynDecision::Commit(c) => {
                    inst_h.extend(c.iter().map(|s| inst_hash(s, None)));
                    inst_h.iter().fold(0u64, |a, &h| a.wrapping_add(h))
                }
            };
            for (k, (&z, &ci)) in e.tuple.iter().zip(ty).enumerate() {
                if ci == i {
                    fp[z as usize] = fp[z as usize].wrapping_add(entry_hash(e.place, &e.tuple, Some(k), dec_h));
                }
            }
            if let DynDecision::Commit(c) = &e.dec {
                for (n, s) in c.iter().enumerate() {
                    for (k, (&z, ci)) in s.args.iter().zip(slot_classes(net, s.trans)).enumerate() {
                        if ci == i {
                            let h = dec_h.wrapping_sub(inst_h[n]).wrapping_add(inst_hash(s, Some(k)));
                            fp[z as usize] = fp[z as usize].wrapping_add(entry_hash(e.place, &e.tuple, None, h));
                        }
                    }
                }
            }
        }
        fp
    }

    /// Groups of same-stat subclasses of class `i` sharing a context, in order of first member.
    fn merge_groups(&self, net: &HLNet, i: usize) -> Vec<Vec<u32>> {
        let m = self.subclasses[i].len();
        let fp = self.context_fingerprints(net, i);
        let mut bucket: FxHashMap<(u32, u64), Vec<u32>> = FxHashMap::default();
        for j in 0..m {
            bucket.entry((self.subclasses[i][j].stat, fp[j])).or_default().push(j as u32);
        }
        // Equal contexts imply equal fingerprints; exact contexts settle collisions.
        let mut group_of: Vec<u32> = (0..m as u32).collect();
        for members in bucket.values().filter(|b| b.len() > 1) {
            let ctx: Vec<Vec<DynEntry>> = members.iter().map(|&j| self.context(net, i, j).expect("subclass exists")).collect();
            for a in 0..members.len() {
                if let Some(b) = (0..a).find(|&b| ctx[b] == ctx[a]) {
                    group_of[members[a] as usize] = group_of[members[b] as usize];
                }
            }
        }
        let mut groups: Vec<Vec<u32>> = Vec::new();
        let mut slot: FxHashMap<u32, usize> = FxHashMap::default();
        for j in 0..m as u32 {
            let g = *slot.entry(group_of[j as usize]).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(j);
        }
        groups
    }

    /// No two same-stat subclasses of a class have equal context.
    pub fn is_minimal(&self, net: &HLNet) -> bool {
        (0..self.subclasses.len()).all(|i| self.merge_groups(net, i).len() == self.subclasses[i].len())
    }

    /// Colors of every subclass under `va`.
    fn members(&self, va: &Assignment) -> Vec<Vec<Vec<usize>>> {
        self.subclasses
            .iter()
            .enumerate()
            .map(|(i, cls)| {
                let mut m = vec![Vec::new(); cls.len()];
                for (c, &z) in va[i].iter().enumerate() {
                    m[z as usize].push(c);
                }
                m
            })
            .collect()
    }

    /// Checks that `va` respects cardinalities and static subclasses.
    pub fn check_assignment(&self, universe: &ColorUniverse, va: &Assignment) -> Result<()> {
        if va.len() != self.subclasses.len() || universe.classes.len() != va.len() {
            return Err(Error::InvalidAssignment("wrong number of classes".into()));
        }
        for (i, cls) in self.subclasses.iter().enumerate() {
            let cc = universe.class(i);
            if va[i].len() != cc.len() {
                return Err(Error::InvalidAssignment(format!("class {} needs {} colors", cc.name, cc.len())));
            }
            let mut count = vec![0u32; cls.len()];
            for (c, &z) in va[i].iter().enumerate() {
                let Some(sub) = cls.get(z as usize) else {
                    return Err(Error::InvalidAssignment(format!("subclass {z} of class {} does not exist", cc.name)));
                };
                if sub.stat as usize != cc.subclass_of(c) {
                    return Err(Error::InvalidAssignment(format!("color {} violates its static subclass", cc.colors[c])));
                }
                count[z as usize] += 1;
            }
            if count.iter().zip(cls).any(|(&n, z)| n != z.card) {
                return Err(Error::InvalidAssignment(format!("cardinalities of class {} not respected", cc.name)));
            }
        }
        Ok(())
    }

    /// The assignment filling subclasses with consecutive colors in index order.
    pub fn first_assignment(&self, universe: &ColorUniverse) -> Assignment {
        self.subclasses
            .iter()
            .enumerate()
            .map(|(i, cls)| {
                let cc = universe.class(i);
                let mut va = vec![0u32; cc.len()];
                for (q, range) in cc.subclasses().enumerate() {
                    let mut colors = range;
                    for (j, z) in cls.iter().enumerate().filter(|(_, z)| z.stat as usize == q) {
                        for _ in 0..z.card {
                            if let Some(c) = colors.next() {
                                va[c] = j as u32;
                            }
                        }
                    }
                }
                va
            })
            .collect()
    }

    /// Every valid assignment.
    pub fn assignments(&self, universe: &ColorUniverse) -> Vec<Assignment> {
        let per_class: Vec<Vec<Vec<u32>>> = self
            .subclasses
            .iter()
            .enumerate()
            .map(|(i, cls)| {
                let cc = universe.class(i);
                let mut out = vec![vec![0u32; cc.len()]];
                for (q, range) in cc.subclasses().enumerate() {
                    let colors: Vec<usize> = range.collect();
                    let subs: Vec<(u32, u32)> =
                        cls.iter().enumerate().filter(|(_, z)| z.stat as usize == q).map(|(j, z)| (j as u32, z.card)).collect();
                    let mut next = Vec::new();
                    for partial in &out {
                        distribute(&colors, &subs, partial.clone(), &mut next);
                    }
                    out = next;
                }
                out
            })
            .collect();
        per_class.into_iter().multi_cartesian_product().collect()
    }

    /// The concrete decision set obtained under `va`.
    pub fn realize(&self, game: &PTGame, va: &Assignment) -> Result<DecisionSet> {
        let net = &game.hl.net;
        self.check_assignment(&net.universe, va)?;
        let members = self.members(va);
        let mut entries = Vec::new();
        for e in &self.entries {
            let ty = &net.places[e.place as usize].ty;
            let choices: Vec<&Vec<usize>> = e.tuple.iter().zip(ty).map(|(&z, &i)| &members[i][z as usize]).collect();
            for colors in choices.into_iter().multi_cartesian_product() {
                let colors: Vec<usize> = colors.into_iter().copied().collect();
                let p = game.pt.place_index(net, e.place as usize, &colors);
                let dec = match &e.dec {
                    DynDecision::Top => Decision::Top,
                    DynDecision::Commit(c) => {
                        let mut mask = 0u64;
                        for (b, &t) in game.post[p].iter().enumerate() {
                            let ti = &game.pt.transitions[t as usize];
                            let classes = net.transitions[ti.trans].vars.iter().map(|v| v.class);
                            let inst = SymInst {
                                trans: ti.trans as u32,
                                args: ti.mode.iter().zip(classes).map(|(&c, i)| va[i][c]).collect(),
                            };
                            if c.binary_search(&inst).is_ok() {
                                mask |= 1 << b;
                            }
                        }
                        Decision::Commit(mask)
                    }
                };
                entries.push((p as u32, dec));
            }
        }
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidAssignment("two entries realize the same place".into()));
        }
        Ok(DecisionSet { entries })
    }

    /// Splits subclass `j` of class `i` into `k` singletons followed by the remainder, if any.
    pub fn split(&self, net: &HLNet, i: usize, j: u32, k: u32) -> Result<DynRep> {
        self.check_subclass(i, j)?;
        let z = self.subclasses[i][j as usize];
        if k == 0 || k > z.card {
            return Err(Error::invalid(format!("cannot instantiate {k} of {} colors", z.card)));
        }
        let rest = z.card - k;
        let pieces: Vec<u32> = (j..j + k + (rest > 0) as u32).collect();
        let shift = pieces.len() as u32 - 1;
        let mut subclasses = self.subclasses.clone();
        let mut new = vec![DynSubclass { stat: z.stat, card: 1 }; k as usize];
        if rest > 0 {
            new.push(DynSubclass { stat: z.stat, card: rest });
        }
        subclasses[i].splice(j as usize..j as usize + 1, new);
        let renamed = |z: u32| if z > j { vec![z + shift] } else if z == j { pieces.clone() } else { vec![z] };
        let mut entries = Vec::new();
        for e in &self.entries {
            let ty = &net.places[e.place as usize].ty;
            let tuples: Vec<Vec<u32>> = e
                .tuple
                .iter()
                .zip(ty)
                .map(|(&z, &ci)| if ci == i { renamed(z) } else { vec![z] })
                .multi_cartesian_product()
                .collect();
            let tuples = if e.tuple.is_empty() { vec![Vec::new()] } else { tuples };
            let dec = match &e.dec {
                DynDecision::Top => DynDecision::Top,
                DynDecision::Commit(c) => DynDecision::Commit(
                    c.iter()
                        .flat_map(|s| {
                            let args: Vec<Vec<u32>> = s
                                .args
                                .iter()
                                .zip(slot_classes(net, s.trans))
                                .map(|(&z, ci)| if ci == i { renamed(z) } else { vec![z] })
                                .collect();
                            let combos: Vec<Vec<u32>> =
                                if args.is_empty() { vec![Vec::new()] } else { args.into_iter().multi_cartesian_product().collect() };
                            combos.into_iter().map(move |a| SymInst { trans: s.trans, args: a })
                        })
                        .collect(),
                ),
            };
            for t in tuples {
                entries.push(DynEntry { place: e.place, tuple: t, dec: dec.clone() });
            }
        }
        let mut r = DynRep { subclasses, entries };
        r.normalize();
        Ok(r)
    }

    pub fn display<'a>(&'a self, net: &'a HLNet) -> DisplayRep<'a> {
        DisplayRep { r: self, net }
    }
}

/// Appends every way to hand `colors` out to `subs` (index, count) on top of `partial`.
fn distribute(colors: &[usize], subs: &[(u32, u32)], partial: Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let Some((&(j, n), rest)) = subs.split_first() else {
        out.push(partial);
        return;
    };
    for chosen in colors.iter().copied().combinations(n as usize) {
        let mut p = partial.clone();
        for &c in &chosen {
            p[c] = j;
        }
        let left: Vec<usize> = colors.iter().copied().filter(|c| !chosen.contains(c)).collect();
        distribute(&left, rest, p, out);
    }
}

const TOP_HASH: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

/// Hash of an instance, with slot `nabla` replaced by the placeholder.
fn inst_hash(s: &SymInst, nabla: Option<usize>) -> u64 {
    let mut h = mix(s.trans as u64 + 1);
    for (k, &z) in s.args.iter().enumerate() {
        let z = if Some(k) == nabla { NABLA } else { z };
        h = mix(h ^ z as u64);
    }
    h
}

/// Hash of an entry, with tuple slot `nabla` replaced by the placeholder.
fn entry_hash(place: u32, tuple: &[u32], nabla: Option<usize>, dec: u64) -> u64 {
    let mut h = mix(place as u64 ^ 0x5555);
    for (k, &z) in tuple.iter().enumerate() {
        let z = if Some(k) == nabla { NABLA } else { z };
        h = mix(h ^ z as u64);
    }
    mix(h ^ dec)
}

fn zname(i: usize, j: u32) -> String {
    format!("Z{}^{}", i + 1, j + 1)
}

pub struct DisplayRep<'a> {
    r: &'a DynRep,
    net: &'a HLNet,
}

impl fmt::Display for DisplayRep<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let net = self.net;
        let subs: Vec<String> = self
            .r
            .subclasses
            .iter()
            .enumerate()
            .flat_map(|(i, cls)| cls.iter().enumerate().map(move |(j, z)| format!("|{}|={}", zname(i, j as u32), z.card)))
            .collect();
        let tuple = |classes: &mut dyn Iterator<Item = usize>, zs: &[u32]| -> String {
            let parts: Vec<String> = zs.iter().map(|&z| zname(classes.next().unwrap_or(0), z)).collect();
            if parts.len() == 1 {
                parts[0].clone()
            } else {
                format!("({})", parts.join(","))
            }
        };
        let entries: Vec<String> = self
            .r
            .entries
            .iter()
            .map(|e| {
                let p = &net.places[e.place as usize];
                let dec = match &e.dec {
                    DynDecision::Top => "T".to_string(),
                    DynDecision::Commit(c) => {
                        let parts: Vec<String> = c
                            .iter()
                            .map(|s| {
                                format!(
                                    "{}.{}",
                                    net.transitions[s.trans as usize].name,
                                    tuple(&mut slot_classes(net, s.trans), &s.args)
                                )
                            })
                            .collect();
                        format!("{{{}}}", parts.join(","))
                    }
                };
                format!("({}.{}, {})", p.name, tuple(&mut p.ty.iter().copied(), &e.tuple), dec)
            })
            .collect();
        write!(f, "[{}] {{{}}}", subs.join(" "), entries.join(", "))
    }
}

/// One singleton subclass per color; `realize` with the identity assignment gives `d` back.
pub fn lift(d: &DecisionSet, game: &PTGame) -> DynRep {
    let net = &game.hl.net;
    let subclasses = net
        .universe
        .classes
        .iter()
        .map(|cc| (0..cc.len()).map(|c| DynSubclass { stat: cc.subclass_of(c) as u32, card: 1 }).collect())
        .collect();
    let entries = d
        .entries
        .iter()
        .map(|&(p, dec)| {
            let pi = &game.pt.places[p as usize];
            let dec = match dec {
                Decision::Top => DynDecision::Top,
                Decision::Commit(mut m) => {
                    let mut c = Vec::new();
                    while m != 0 {
                        let b = m.trailing_zeros() as usize;
                        m &= m - 1;
                        let ti = &game.pt.transitions[game.post[p as usize][b] as usize];
                        c.push(SymInst { trans: ti.trans as u32, args: ti.mode.iter().map(|&c| c as u32).collect() });
                    }
                    DynDecision::Commit(c)
                }
            };
            DynEntry { place: pi.place as u32, tuple: pi.colors.iter().map(|&c| c as u32).collect(), dec }
        })
        .collect();
    let mut r = DynRep { subclasses, entries };
    r.normalize();
    r
}

/// The identity assignment of a lifted representation.
pub fn lift_assignment(universe: &ColorUniverse) -> Assignment {
    universe.classes.iter().map(|cc| (0..cc.len() as u32).collect()).collect()
}

/// Merges same-stat subclasses with equal context until none remain; cardinalities add.
pub fn merge_minimal(r: &DynRep, net: &HLNet) -> DynRep {
    let mut r = r.clone();
    loop {
        let mut changed = false;
        for i in 0..r.subclasses.len() {
            let groups = r.merge_groups(net, i);
            if groups.len() == r.subclasses[i].len() {
                continue;
            }
            changed = true;
            let mut perm: Vec<Vec<u32>> = r.subclasses.iter().map(|c| (0..c.len() as u32).collect()).collect();
            let mut merged = Vec::with_capacity(groups.len());
            for (g, members) in groups.iter().enumerate() {
                let stat = r.subclasses[i][members[0] as usize].stat;
                let card = members.iter().map(|&j| r.subclasses[i][j as usize].card).sum();
                merged.push(DynSubclass { stat, card });
                for &j in members {
                    perm[i][j as usize] = g as u32;
                }
            }
            let entries = r.rename(net, &perm);
            r.subclasses[i] = merged;
            r.entries = entries;
        }
        if !changed {
            return r;
        }
    }
}

/// Smallest encoding among stat-respecting reorderings; returns it with the number of orderings tried.
fn order_unchecked(r: &DynRep, net: &HLNet) -> (CanonRep, u64) {
    // Sorting by (stat, card) fixes the subclass vectors at their minimum; only
    // subclasses agreeing on both can still be exchanged.
    let sort: Vec<Vec<u32>> = r
        .subclasses
        .iter()
        .map(|cls| {
            let mut idx: Vec<usize> = (0..cls.len()).collect();
            idx.sort_by_key(|&j| cls[j]);
            let mut perm = vec![0u32; cls.len()];
            for (new, &old) in idx.iter().enumerate() {
                perm[old] = new as u32;
            }
            perm
        })
        .collect();
    let base = r.permute(net, &sort);
    let mut groups: Vec<(usize, usize, usize)> = Vec::new();
    for (i, cls) in base.subclasses.iter().enumerate() {
        let mut s = 0;
        while s < cls.len() {
            let mut e = s + 1;
            while e < cls.len() && cls[e] == cls[s] {
                e += 1;
            }
            if e - s > 1 {
                groups.push((i, s, e));
            }
            s = e;
        }
    }
    if groups.is_empty() {
        let key = base.encode();
        return (CanonRep { rep: base, key }, 1);
    }
    let identity: Vec<Vec<u32>> = base.subclasses.iter().map(|c| (0..c.len() as u32).collect()).collect();
    let mut best: Option<(Vec<u32>, DynRep)> = None;
    let mut count = 0u64;
    for choice in groups.iter().map(|&(_, s, e)| (s..e).permutations(e - s)).multi_cartesian_product() {
        let mut perm = identity.clone();
        for (&(i, s, _), p) in groups.iter().zip(&choice) {
            for (off, &old) in p.iter().enumerate() {
                perm[i][old] = (s + off) as u32;
            }
        }
        count += 1;
        let cand = base.permute(net, &perm);
        let key = cand.encode();
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, cand));
        }
    }
    let (key, rep) = best.expect("at least one ordering");
    (CanonRep { rep, key }, count)
}

/// Orders a minimal representation.
pub fn order_representation(r: &DynRep, net: &HLNet) -> Result<(CanonRep, u64)> {
    if !r.is_minimal(net) {
        return Err(Error::NotMinimal);
    }
    Ok(order_unchecked(r, net))
}

/// Merge then order.
pub fn canonicalize(r: &DynRep, net: &HLNet) -> (CanonRep, u64) {
    order_unchecked(&merge_minimal(r, net), net)
}

/// A piece of a split subclass: `(j, k)` with `k >= 1` a single instantiated color, `k = 0` the rest.
pub type Piece = (u32, u32);

/// A transition whose variables are bound to pieces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicInstance {
    pub trans: u32,
    pub mode: Vec<Piece>,
}

impl SymbolicInstance {
    pub fn name(&self, net: &HLNet) -> String {
        let parts: Vec<String> = self
            .mode
            .iter()
            .zip(slot_classes(net, self.trans))
            .map(|(&(j, k), i)| format!("Z{}^{{{},{}}}", i + 1, j + 1, k))
            .collect();
        let args = if parts.len() == 1 { parts[0].clone() } else { format!("({})", parts.join(",")) };
        if parts.is_empty() {
            net.transitions[self.trans as usize].name.clone()
        } else {
            format!("{}.{}", net.transitions[self.trans as usize].name, args)
        }
    }
}

/// A symbolic firing with the concrete representative transition that realizes it.
#[derive(Clone, Debug)]
pub struct SymSuccessor {
    pub inst: SymbolicInstance,
    pub transition: usize,
    pub target: CanonRep,
}

/// Normalized symbolic modes over `classes`: per subclass, instantiated indices appear in first-use order.
pub fn symbolic_modes(subclasses: &[Vec<DynSubclass>], classes: &[usize]) -> Vec<Vec<Piece>> {
    fn go(
        subclasses: &[Vec<DynSubclass>],
        classes: &[usize],
        used: &mut Vec<Vec<u32>>,
        cur: &mut Vec<Piece>,
        out: &mut Vec<Vec<Piece>>,
    ) {
        let Some(&i) = classes.get(cur.len()) else {
            out.push(cur.clone());
            return;
        };
        for j in 0..subclasses[i].len() {
            let n = used[i][j];
            let top = (n + 1).min(subclasses[i][j].card);
            for k in 1..=top {
                cur.push((j as u32, k));
                let fresh = k > n;
                if fresh {
                    used[i][j] += 1;
                }
                go(subclasses, classes, used, cur, out);
                if fresh {
                    used[i][j] -= 1;
                }
                cur.pop();
            }
        }
    }
    let mut used: Vec<Vec<u32>> = subclasses.iter().map(|c| vec![0; c.len()]).collect();
    let mut out = Vec::new();
    go(subclasses, classes, &mut used, &mut Vec::new(), &mut out);
    out
}

/// Symbolic mode of the concrete `mode` under `va`.
pub fn normalize_mode(va: &Assignment, classes: &[usize], mode: &[usize]) -> Vec<Piece> {
    let mut seen: Vec<(usize, usize, u32)> = Vec::new();
    mode.iter()
        .zip(classes)
        .map(|(&c, &i)| {
            let j = va[i][c];
            if let Some(&(_, _, k)) = seen.iter().find(|&&(ci, cc, _)| ci == i && cc == c) {
                return (j, k);
            }
            let k = seen.iter().filter(|&&(ci, cc, _)| ci == i && va[i][cc] == j).count() as u32 + 1;
            seen.push((i, c, k));
            (j, k)
        })
        .collect()
}

/// Canonicalization bound to a game, with instrumentation counters.
pub struct Canonicalizer<'g> {
    pub game: &'g PTGame,
    orderings: Cell<u64>,
    max_orderings: Cell<u64>,
    calls: Cell<u64>,
}

/// Context shared by the symbolic evaluation of one representation.
struct Pieces<'a> {
    rep: &'a DynRep,
    /// Colors of every subclass under the first assignment.
    colors: Vec<Vec<Vec<usize>>>,
}

impl Pieces<'_> {
    fn color(&self, i: usize, (j, k): Piece) -> usize {
        self.colors[i][j as usize][k as usize - 1]
    }

    /// Number of instantiated colors per subclass.
    fn instantiated(&self, net: &HLNet, insts: &[(u32, &[Piece])]) -> Vec<Vec<u32>> {
        let mut n: Vec<Vec<u32>> = self.rep.subclasses.iter().map(|c| vec![0; c.len()]).collect();
        for &(t, mode) in insts {
            for (&(j, k), i) in mode.iter().zip(slot_classes(net, t)) {
                n[i][j as usize] = n[i][j as usize].max(k);
            }
        }
        n
    }

    fn guard(&self, net: &HLNet, t: u32, mode: &[Piece]) -> bool {
        let concrete: Vec<usize> = mode.iter().zip(slot_classes(net, t)).map(|(&p, i)| self.color(i, p)).collect();
        net.guard_holds(t as usize, &concrete)
    }

    /// Preset as `(place, piece tuple)`, sorted; `None` if some place would need two tokens.
    fn preset(&self, net: &HLNet, t: u32, mode: &[Piece], inst: &[Vec<u32>]) -> Option<Vec<(u32, Vec<Piece>)>> {
        let mut out = Vec::new();
        for arc in net.arcs_of(t as usize, true) {
            let ty = &net.places[arc.place].ty;
            for tuple in &arc.expr.tuples {
                let options: Vec<Vec<Piece>> = tuple
                    .iter()
                    .zip(ty)
                    .map(|(term, &i)| match *term {
                        Term::Var(v) => vec![mode[v]],
                        Term::All(_) => self.rep.subclasses[i]
                            .iter()
                            .enumerate()
                            .flat_map(|(j, z)| {
                                let n = inst[i][j];
                                let rest = (z.card > n).then_some((j as u32, 0));
                                (1..=n).map(move |k| (j as u32, k)).chain(rest)
                            })
                            .collect(),
                    })
                    .collect();
                for pieces in options.into_iter().multi_cartesian_product() {
                    out.push((arc.place as u32, pieces));
                }
                if tuple.is_empty() {
                    out.push((arc.place as u32, Vec::new()));
                }
            }
        }
        out.sort_unstable();
        let n = out.len();
        out.dedup();
        (out.len() == n).then_some(out)
    }

    fn entry(&self, place: u32, pieces: &[Piece]) -> Option<&DynEntry> {
        let tuple: Vec<u32> = pieces.iter().map(|p| p.0).collect();
        self.rep
            .entries
            .binary_search_by(|e| (e.place, &e.tuple).cmp(&(place, &tuple)))
            .ok()
            .map(|x| &self.rep.entries[x])
    }

    fn marked(&self, pre: &[(u32, Vec<Piece>)]) -> bool {
        pre.iter().all(|(p, pc)| self.entry(*p, pc).is_some())
    }

    fn committed(&self, t: u32, mode: &[Piece], pre: &[(u32, Vec<Piece>)]) -> bool {
        let inst = SymInst { trans: t, args: mode.iter().map(|p| p.0).collect() };
        pre.iter().all(|(p, pc)| match self.entry(*p, pc).map(|e| &e.dec) {
            Some(DynDecision::Commit(c)) => c.binary_search(&inst).is_ok(),
            _ => false,
        })
    }
}

impl<'g> Canonicalizer<'g> {
    pub fn new(game: &'g PTGame) -> Self {
        Canonicalizer { game, orderings: Cell::new(0), max_orderings: Cell::new(0), calls: Cell::new(0) }
    }

    fn net(&self) -> &'g HLNet {
        &self.game.hl.net
    }

    /// Total orderings enumerated so far.
    pub fn orderings(&self) -> u64 {
        self.orderings.get()
    }

    /// Largest number of orderings enumerated by a single canonicalization.
    pub fn max_orderings(&self) -> u64 {
        self.max_orderings.get()
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    fn count(&self, n: u64) {
        self.orderings.set(self.orderings.get() + n);
        self.max_orderings.set(self.max_orderings.get().max(n));
        self.calls.set(self.calls.get() + 1);
    }

    pub fn canonicalize(&self, r: &DynRep) -> CanonRep {
        let (c, n) = canonicalize(r, self.net());
        self.count(n);
        c
    }

    /// Canonical representation of the orbit of `d`.
    pub fn canon(&self, d: &DecisionSet) -> CanonRep {
        self.canonicalize(&lift(d, self.game))
    }

    /// A member of the orbit, realized under the first assignment.
    pub fn representative(&self, r: &CanonRep) -> DecisionSet {
        let va = r.rep.first_assignment(&self.net().universe);
        r.rep.realize(self.game, &va).expect("first assignment is valid")
    }

    /// One entry per enabled normalized symbolic instance, in enumeration order.
    pub fn transition_successors(&self, r: &CanonRep) -> Result<Vec<SymSuccessor>> {
        let game = self.game;
        let net = self.net();
        if r.rep.has_top() {
            return Ok(Vec::new());
        }
        let d0 = self.representative(r);
        let pieces = self.pieces(&r.rep);
        let mut out = Vec::new();
        for t in 0..net.transitions.len() {
            let classes = net.transitions[t].var_classes();
            for mode in symbolic_modes(&r.rep.subclasses, &classes) {
                let concrete: Vec<usize> = mode.iter().zip(&classes).map(|(&p, &i)| pieces.color(i, p)).collect();
                let Some(pt) = game.pt.transition_index(net, t, &concrete) else { continue };
                if !d0.enables(game, pt) {
                    continue;
                }
                let next = d0.fire(game, pt)?;
                out.push(SymSuccessor {
                    inst: SymbolicInstance { trans: t as u32, mode },
                    transition: pt,
                    target: self.canon(&next),
                });
            }
        }
        Ok(out)
    }

    /// Distinct canonical top successors, in order of first appearance.
    pub fn top_successors(&self, r: &CanonRep) -> Result<Vec<CanonRep>> {
        let game = self.game;
        let d0 = self.representative(r);
        // Successors related by a symmetry fixing the representative share their canonical form.
        let stab: Vec<usize> = if game.tabulated() {
            (1..game.symmetries.len()).filter(|&si| d0.apply_symmetry(game, si) == d0).collect()
        } else {
            Vec::new()
        };
        let mut seen = FxHashSet::default();
        let mut out = Vec::new();
        d0.for_each_top_successor(game, |d| {
            if stab.iter().any(|&si| d.apply_symmetry(game, si) < d) {
                return true;
            }
            let c = self.canon(&d);
            if seen.insert(c.key.clone()) {
                out.push(c);
            }
            true
        })?;
        Ok(out)
    }

    fn pieces<'a>(&self, rep: &'a DynRep) -> Pieces<'a> {
        let va = rep.first_assignment(&self.net().universe);
        Pieces { rep, colors: rep.members(&va) }
    }

    /// The five state properties, evaluated on the representation.
    pub fn properties(&self, r: &CanonRep) -> Flags {
        let game = self.game;
        let net = self.net();
        let rep = &r.rep;
        let top = rep.has_top();
        let bad = rep.entries.iter().any(|e| game.hl.kinds[e.place as usize] == crate::game::PlaceKind::Bad);
        let pc = self.pieces(rep);
        let mut m_enabled = false;
        let mut enabled: Vec<SymbolicInstance> = Vec::new();
        for t in 0..net.transitions.len() as u32 {
            if net.arcs_of(t as usize, true).any(|a| !rep.entries.iter().any(|e| e.place as usize == a.place)) {
                continue;
            }
            let classes: Vec<usize> = slot_classes(net, t).collect();
            for mode in symbolic_modes(&rep.subclasses, &classes) {
                if !pc.guard(net, t, &mode) {
                    continue;
                }
                let inst = pc.instantiated(net, &[(t, &mode)]);
                let Some(pre) = pc.preset(net, t, &mode, &inst) else { continue };
                if !pc.marked(&pre) {
                    continue;
                }
                m_enabled = true;
                if !top && pc.committed(t, &mode, &pre) {
                    enabled.push(SymbolicInstance { trans: t, mode });
                }
            }
        }
        let env_dependent = !top && enabled.iter().all(|s| game.env_trans_hl[s.trans as usize]);
        let deadlock = !top && m_enabled && enabled.is_empty();
        let nondet = !top && self.nondet(&pc, &enabled);
        Flags { env_dependent, bad, deadlock, terminating: !m_enabled, nondet }
    }

    /// Two distinct enabled instances sharing a system place, checked over joint symbolic modes.
    fn nondet(&self, pc: &Pieces<'_>, enabled: &[SymbolicInstance]) -> bool {
        let net = self.net();
        let kinds = &self.game.hl.kinds;
        let mut ts: Vec<u32> = enabled.iter().map(|s| s.trans).collect();
        ts.dedup();
        for (a, &t1) in ts.iter().enumerate() {
            for &t2 in &ts[a..] {
                let sys_in = |t: u32| net.arcs_of(t as usize, true).filter(|a| !kinds[a.place].is_env()).map(|a| a.place);
                if !sys_in(t1).any(|p| sys_in(t2).any(|q| q == p)) {
                    continue;
                }
                let c1: Vec<usize> = slot_classes(net, t1).collect();
                let c2: Vec<usize> = slot_classes(net, t2).collect();
                let joint: Vec<usize> = c1.iter().chain(&c2).copied().collect();
                for mode in symbolic_modes(&pc.rep.subclasses, &joint) {
                    let (m1, m2) = mode.split_at(c1.len());
                    if t1 == t2 && m1 == m2 {
                        continue;
                    }
                    if !pc.guard(net, t1, m1) || !pc.guard(net, t2, m2) {
                        continue;
                    }
                    let inst = pc.instantiated(net, &[(t1, m1), (t2, m2)]);
                    let (Some(p1), Some(p2)) = (pc.preset(net, t1, m1, &inst), pc.preset(net, t2, m2, &inst)) else {
                        continue;
                    };
                    let shared = p1.iter().any(|x| !kinds[x.0 as usize].is_env() && p2.binary_search(x).is_ok());
                    if shared && pc.marked(&p1) && pc.marked(&p2) && pc.committed(t1, m1, &p1) && pc.committed(t2, m2, &p2)
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}
