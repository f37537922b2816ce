//! High-level symmetric nets, their firing rule and the expansion to P/T nets.

use std::collections::BTreeMap;
use std::fmt;

use crate::color::{ColorUniverse, Symmetry};
use crate::error::{Error, Result};

/// A component of an arc tuple: a transition variable or the broadcast `all(C)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    All(usize),
}

/// A multiset sum of tuples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArcExpr {
    pub tuples: Vec<Vec<Term>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Guard {
    True,
    Eq(usize, usize),
    Ne(usize, usize),
    /// Variable lies in the given static subclass of its class.
    In(usize, usize),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

impl Guard {
    pub fn eval(&self, mode: &[usize], subclass_of: &dyn Fn(usize, usize) -> usize) -> bool {
        match self {
            Guard::True => true,
            Guard::Eq(a, b) => mode[*a] == mode[*b],
            Guard::Ne(a, b) => mode[*a] != mode[*b],
            Guard::In(v, q) => subclass_of(*v, mode[*v]) == *q,
            Guard::And(a, b) => a.eval(mode, subclass_of) && b.eval(mode, subclass_of),
            Guard::Or(a, b) => a.eval(mode, subclass_of) || b.eval(mode, subclass_of),
            Guard::Not(a) => !a.eval(mode, subclass_of),
        }
    }

    fn vars(&self, out: &mut Vec<usize>) {
        match self {
            Guard::True => {}
            Guard::Eq(a, b) | Guard::Ne(a, b) => out.extend([*a, *b]),
            Guard::In(v, _) => out.push(*v),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Guard::Not(a) => a.vars(out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HLPlace {
    pub name: String,
    /// Class of every tuple component.
    pub ty: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HLTransition {
    pub name: String,
    pub vars: Vec<Var>,
    pub guard: Guard,
}

impl HLTransition {
    pub fn var_classes(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.class).collect()
    }
}

/// An arc between a place and a transition; `input` arcs run place to transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HLArc {
    pub place: usize,
    pub trans: usize,
    pub input: bool,
    pub expr: ArcExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HLNet {
    pub universe: ColorUniverse,
    pub places: Vec<HLPlace>,
    pub transitions: Vec<HLTransition>,
    pub arcs: Vec<HLArc>,
}

/// One color per variable slot of a transition.
pub type Mode = Vec<usize>;

/// Multiset of color tuples.
pub type Multiset = BTreeMap<Vec<usize>, u32>;

/// Per place, a multiset of tuples of the place type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HLMarking {
    pub tokens: Vec<Multiset>,
}

impl HLMarking {
    pub fn empty(num_places: usize) -> Self {
        HLMarking { tokens: vec![Multiset::new(); num_places] }
    }

    pub fn add(&mut self, place: usize, colors: Vec<usize>, n: u32) {
        *self.tokens[place].entry(colors).or_insert(0) += n;
    }

    pub fn apply(&self, net: &HLNet, s: &Symmetry) -> HLMarking {
        let mut out = HLMarking::empty(self.tokens.len());
        for (p, ms) in self.tokens.iter().enumerate() {
            for (c, &n) in ms {
                out.add(p, s.tuple(&net.places[p].ty, c), n);
            }
        }
        out
    }
}

fn add_into(ms: &mut Multiset, t: Vec<usize>, n: u32) {
    *ms.entry(t).or_insert(0) += n;
}

impl HLNet {
    pub fn place_index(&self, name: &str) -> Option<usize> {
        self.places.iter().position(|p| p.name == name)
    }

    pub fn transition_index(&self, name: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.name == name)
    }

    pub fn arcs_of(&self, t: usize, input: bool) -> impl Iterator<Item = &HLArc> {
        self.arcs.iter().filter(move |a| a.trans == t && a.input == input)
    }

    /// All modes of `t` in slot-major, color-index-minor lexicographic order, guard ignored.
    pub fn modes(&self, t: usize) -> Vec<Mode> {
        let sizes: Vec<usize> = self.transitions[t]
            .vars
            .iter()
            .map(|v| self.universe.class(v.class).len())
            .collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut cur = vec![0; sizes.len()];
        for _ in 0..total {
            out.push(cur.clone());
            for k in (0..sizes.len()).rev() {
                cur[k] += 1;
                if cur[k] < sizes[k] {
                    break;
                }
                cur[k] = 0;
            }
        }
        out
    }

    pub fn guard_holds(&self, t: usize, mode: &[usize]) -> bool {
        let tr = &self.transitions[t];
        tr.guard.eval(mode, &|v, c| self.universe.class(tr.vars[v].class).subclass_of(c))
    }

    /// Evaluates an arc expression under a mode.
    pub fn eval_expression(&self, expr: &ArcExpr, mode: &[usize]) -> Result<Multiset> {
        let mut out = Multiset::new();
        for tuple in &expr.tuples {
            let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
            for term in tuple {
                match *term {
                    Term::Var(v) => {
                        let c = *mode.get(v).ok_or_else(|| Error::UnboundVariable(format!("slot {v}")))?;
                        partial.iter_mut().for_each(|p| p.push(c));
                    }
                    Term::All(i) => {
                        let n = self.universe.class(i).len();
                        partial = partial
                            .into_iter()
                            .flat_map(|p| {
                                (0..n).map(move |c| {
                                    let mut q = p.clone();
                                    q.push(c);
                                    q
                                })
                            })
                            .collect();
                    }
                }
            }
            for p in partial {
                add_into(&mut out, p, 1);
            }
        }
        Ok(out)
    }

    /// Checks well-formedness of signatures, arcs and guards, and symmetry of `m0`.
    pub fn validate(&self, m0: &HLMarking) -> Result<()> {
        let nclasses = self.universe.classes.len();
        for p in &self.places {
            if p.ty.iter().any(|&i| i >= nclasses) {
                return Err(Error::invalid(format!("place {} has an unknown class", p.name)));
            }
        }
        for t in &self.transitions {
            if t.vars.iter().any(|v| v.class >= nclasses) {
                return Err(Error::invalid(format!("transition {} has an unknown class", t.name)));
            }
            let mut used = Vec::new();
            t.guard.vars(&mut used);
            for v in used {
                if v >= t.vars.len() {
                    return Err(Error::UnboundVariable(format!("slot {v} in guard of {}", t.name)));
                }
            }
            self.check_guard_types(t, &t.guard)?;
        }
        let mut seen = std::collections::HashSet::new();
        for a in &self.arcs {
            let place = self.places.get(a.place).ok_or_else(|| Error::invalid("arc to unknown place"))?;
            let tr = self.transitions.get(a.trans).ok_or_else(|| Error::invalid("arc to unknown transition"))?;
            if !seen.insert((a.place, a.trans, a.input)) {
                return Err(Error::invalid(format!("duplicate arc between {} and {}", place.name, tr.name)));
            }
            for tuple in &a.expr.tuples {
                if tuple.len() != place.ty.len() {
                    return Err(Error::IllTypedArc(format!(
                        "tuple of arity {} on place {} of arity {}",
                        tuple.len(),
                        place.name,
                        place.ty.len()
                    )));
                }
                for (term, &class) in tuple.iter().zip(&place.ty) {
                    let got = match *term {
                        Term::Var(v) => {
                            tr.vars
                                .get(v)
                                .ok_or_else(|| Error::UnboundVariable(format!("slot {v} of {}", tr.name)))?
                                .class
                        }
                        Term::All(i) => i,
                    };
                    if got != class {
                        return Err(Error::IllTypedArc(format!(
                            "component of class {} on place {} expects {}",
                            self.universe.class(got).name,
                            place.name,
                            self.universe.class(class).name
                        )));
                    }
                }
            }
        }
        if m0.tokens.len() != self.places.len() {
            return Err(Error::invalid("initial marking does not cover all places"));
        }
        for (p, ms) in m0.tokens.iter().enumerate() {
            for c in ms.keys() {
                let ty = &self.places[p].ty;
                if c.len() != ty.len() || c.iter().zip(ty).any(|(&x, &i)| x >= self.universe.class(i).len()) {
                    return Err(Error::invalid(format!("ill-typed initial token on {}", self.places[p].name)));
                }
            }
        }
        for s in self.symmetry_generators() {
            if m0.apply(self, &s) != *m0 {
                return Err(Error::NonSymmetricInitialMarking(format!("not invariant under {s}")));
            }
        }
        Ok(())
    }

    fn check_guard_types(&self, t: &HLTransition, g: &Guard) -> Result<()> {
        match g {
            Guard::True => Ok(()),
            Guard::Eq(a, b) | Guard::Ne(a, b) => {
                if t.vars[*a].class != t.vars[*b].class {
                    return Err(Error::invalid(format!("guard of {} compares different classes", t.name)));
                }
                Ok(())
            }
            Guard::In(v, q) => {
                if *q >= self.universe.class(t.vars[*v].class).num_subclasses() {
                    return Err(Error::invalid(format!("guard of {} names an unknown subclass", t.name)));
                }
                Ok(())
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                self.check_guard_types(t, a)?;
                self.check_guard_types(t, b)
            }
            Guard::Not(a) => self.check_guard_types(t, a),
        }
    }

    /// Adjacent transpositions inside every static subclass; they generate the symmetry group.
    pub fn symmetry_generators(&self) -> Vec<Symmetry> {
        let id = self.universe.identity();
        let mut out = Vec::new();
        for (i, class) in self.universe.classes.iter().enumerate() {
            for r in class.subclasses() {
                for c in r.start..r.end.saturating_sub(1) {
                    let mut s = id.clone();
                    s.perms[i].swap(c, c + 1);
                    out.push(s);
                }
            }
        }
        out
    }

    /// High-level firing of `t` in `mode`.
    pub fn fire_hl(&self, m: &HLMarking, t: usize, mode: &[usize]) -> Result<HLMarking> {
        if !self.guard_holds(t, mode) {
            return Err(Error::GuardFalse(self.transitions[t].name.clone()));
        }
        let mut out = m.clone();
        for a in self.arcs_of(t, true) {
            for (c, n) in self.eval_expression(&a.expr, mode)? {
                let have = out.tokens[a.place].get(&c).copied().unwrap_or(0);
                if have < n {
                    return Err(Error::NotEnabled(self.transitions[t].name.clone()));
                }
                if have == n {
                    out.tokens[a.place].remove(&c);
                } else {
                    out.tokens[a.place].insert(c, have - n);
                }
            }
        }
        for a in self.arcs_of(t, false) {
            for (c, n) in self.eval_expression(&a.expr, mode)? {
                out.add(a.place, c, n);
            }
        }
        Ok(out)
    }

    pub fn enabled_hl(&self, m: &HLMarking, t: usize, mode: &[usize]) -> bool {
        self.fire_hl(m, t, mode).is_ok()
    }

    pub fn place_instance_name(&self, p: usize, colors: &[usize]) -> String {
        let place = &self.places[p];
        format!("{}{}", place.name, self.tuple_suffix(&place.ty, colors))
    }

    pub fn transition_instance_name(&self, t: usize, mode: &[usize]) -> String {
        let tr = &self.transitions[t];
        format!("{}{}", tr.name, self.tuple_suffix(&tr.var_classes(), mode))
    }

    fn tuple_suffix(&self, classes: &[usize], colors: &[usize]) -> String {
        let names: Vec<&str> = classes
            .iter()
            .zip(colors)
            .map(|(&i, &c)| self.universe.class(i).colors[c].as_str())
            .collect();
        match names.len() {
            0 => String::new(),
            1 => format!(".{}", names[0]),
            _ => format!(".({})", names.join(",")),
        }
    }

    /// Expands the net and `m0` into a P/T net.
    pub fn expand(&self, m0: &HLMarking) -> Result<PTNet> {
        let mut place_offset = Vec::with_capacity(self.places.len());
        let mut places = Vec::new();
        for (p, place) in self.places.iter().enumerate() {
            place_offset.push(places.len());
            for colors in product(&self.sizes(&place.ty)) {
                places.push(PlaceInst { place: p, colors });
            }
        }
        let mut trans_offset = Vec::with_capacity(self.transitions.len());
        let mut dense = Vec::new();
        let mut transitions = Vec::new();
        let mut pre = Vec::new();
        let mut post = Vec::new();
        let pt = |net: &HLNet, offs: &[usize], p: usize, c: &[usize]| -> usize {
            offs[p] + net.mixed_radix(&net.places[p].ty, c)
        };
        for t in 0..self.transitions.len() {
            trans_offset.push(dense.len());
            for mode in self.modes(t) {
                if !self.guard_holds(t, &mode) {
                    dense.push(NONE);
                    continue;
                }
                dense.push(transitions.len() as u32);
                let mut pr: BTreeMap<usize, u32> = BTreeMap::new();
                for a in self.arcs_of(t, true) {
                    for (c, n) in self.eval_expression(&a.expr, &mode)? {
                        *pr.entry(pt(self, &place_offset, a.place, &c)).or_insert(0) += n;
                    }
                }
                let mut po: BTreeMap<usize, u32> = BTreeMap::new();
                for a in self.arcs_of(t, false) {
                    for (c, n) in self.eval_expression(&a.expr, &mode)? {
                        *po.entry(pt(self, &place_offset, a.place, &c)).or_insert(0) += n;
                    }
                }
                pre.push(pr.into_iter().collect());
                post.push(po.into_iter().collect());
                transitions.push(TransInst { trans: t, mode });
            }
        }
        let mut init = vec![0u32; places.len()];
        for (p, ms) in m0.tokens.iter().enumerate() {
            for (c, &n) in ms {
                init[pt(self, &place_offset, p, c)] += n;
            }
        }
        Ok(PTNet { places, transitions, pre, post, m0: init, place_offset, trans_offset, dense })
    }

    fn sizes(&self, classes: &[usize]) -> Vec<usize> {
        classes.iter().map(|&i| self.universe.class(i).len()).collect()
    }

    pub(crate) fn mixed_radix(&self, classes: &[usize], colors: &[usize]) -> usize {
        classes
            .iter()
            .zip(colors)
            .fold(0, |acc, (&i, &c)| acc * self.universe.class(i).len() + c)
    }
}

/// Lexicographic product of `0..sizes[k]`.
pub(crate) fn product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlaceInst {
    pub place: usize,
    pub colors: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TransInst {
    pub trans: usize,
    pub mode: Mode,
}

/// Expanded P/T net; places are `p.c`, transitions `t.v` with a true guard.
#[derive(Clone, Debug)]
pub struct PTNet {
    pub places: Vec<PlaceInst>,
    pub transitions: Vec<TransInst>,
    /// Per transition, `(place, multiplicity)` sorted by place.
    pub pre: Vec<Vec<(usize, u32)>>,
    pub post: Vec<Vec<(usize, u32)>>,
    pub m0: Vec<u32>,
    place_offset: Vec<usize>,
    trans_offset: Vec<usize>,
    dense: Vec<u32>,
}

impl PTNet {
    pub fn place_index(&self, net: &HLNet, p: usize, colors: &[usize]) -> usize {
        self.place_offset[p] + net.mixed_radix(&net.places[p].ty, colors)
    }

    /// Index of `t.mode`, or `None` if the guard is false.
    pub fn transition_index(&self, net: &HLNet, t: usize, mode: &[usize]) -> Option<usize> {
        let d = self.dense[self.trans_offset[t] + net.mixed_radix(&net.transitions[t].var_classes(), mode)];
        (d != NONE).then_some(d as usize)
    }

    pub fn enabled(&self, m: &[u32], t: usize) -> bool {
        self.pre[t].iter().all(|&(p, n)| m[p] >= n)
    }

    pub fn fire(&self, m: &[u32], t: usize) -> Option<Vec<u32>> {
        if !self.enabled(m, t) {
            return None;
        }
        let mut out = m.to_vec();
        for &(p, n) in &self.pre[t] {
            out[p] -= n;
        }
        for &(p, n) in &self.post[t] {
            out[p] += n;
        }
        Some(out)
    }
}

impl fmt::Display for PlaceInst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.place, self.colors)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::color::ColorClass;

    /// Small hand-built net used across unit tests: `move(x): P.x -> Q.x`, `sync: Q.all -> P.all`.
    pub(crate) fn toy(n: usize) -> (HLNet, HLMarking) {
        let colors = (1..=n).map(|i| format!("c{i}")).collect();
        let universe = ColorUniverse::new(vec![ColorClass::new("C", colors).unwrap()]).unwrap();
        let net = HLNet {
            universe,
            places: vec![HLPlace { name: "P".into(), ty: vec![0] }, HLPlace { name: "Q".into(), ty: vec![0] }],
            transitions: vec![
                HLTransition { name: "mv".into(), vars: vec![Var { name: "x".into(), class: 0 }], guard: Guard::True },
                HLTransition { name: "sync".into(), vars: vec![], guard: Guard::True },
            ],
            arcs: vec![
                HLArc { place: 0, trans: 0, input: true, expr: ArcExpr { tuples: vec![vec![Term::Var(0)]] } },
                HLArc { place: 1, trans: 0, input: false, expr: ArcExpr { tuples: vec![vec![Term::Var(0)]] } },
                HLArc { place: 1, trans: 1, input: true, expr: ArcExpr { tuples: vec![vec![Term::All(0)]] } },
                HLArc { place: 0, trans: 1, input: false, expr: ArcExpr { tuples: vec![vec![Term::All(0)]] } },
            ],
        };
        let mut m0 = HLMarking::empty(2);
        for c in 0..n {
            m0.add(0, vec![c], 1);
        }
        (net, m0)
    }

    #[test]
    fn mode_counts() {
        let (net, _) = toy(3);
        assert_eq!(net.modes(0).len(), 3);
        assert_eq!(net.modes(1), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn expression_semantics() {
        let (net, _) = toy(3);
        let all = ArcExpr { tuples: vec![vec![Term::All(0)]] };
        let ms = net.eval_expression(&all, &[]).unwrap();
        assert_eq!(ms.len(), 3);
        let twice = ArcExpr { tuples: vec![vec![Term::Var(0)], vec![Term::Var(0)]] };
        let ms = net.eval_expression(&twice, &[0]).unwrap();
        assert_eq!(ms.get(&vec![0]), Some(&2));
        assert!(matches!(net.eval_expression(&twice, &[]), Err(Error::UnboundVariable(_))));
    }

    #[test]
    fn firing_and_validation() {
        let (net, m0) = toy(2);
        net.validate(&m0).unwrap();
        let m1 = net.fire_hl(&m0, 0, &[1]).unwrap();
        assert_eq!(m1.tokens[1].get(&vec![1]), Some(&1));
        assert!(matches!(net.fire_hl(&m1, 0, &[1]), Err(Error::NotEnabled(_))));
        assert!(!net.enabled_hl(&m1, 1, &[]));
        let mut lop = HLMarking::empty(2);
        lop.add(0, vec![0], 1);
        assert!(matches!(net.validate(&lop), Err(Error::NonSymmetricInitialMarking(_))));
        let mut bad = net.clone();
        bad.arcs[0].expr.tuples[0].push(Term::Var(0));
        assert!(matches!(bad.validate(&m0), Err(Error::IllTypedArc(_))));
    }

    #[test]
    fn expansion_matches_high_level_firing() {
        let (net, m0) = toy(3);
        let pt = net.expand(&m0).unwrap();
        assert_eq!(pt.places.len(), 6);
        assert_eq!(pt.transitions.len(), 4);
        let mut hl = vec![m0.clone()];
        let mut ll = vec![pt.m0.clone()];
        // breadth-first co-simulation
        let mut i = 0;
        while i < hl.len() {
            for (k, ti) in pt.transitions.iter().enumerate() {
                let a = net.fire_hl(&hl[i], ti.trans, &ti.mode).ok();
                let b = pt.fire(&ll[i], k);
                assert_eq!(a.is_some(), b.is_some());
                if let (Some(a), Some(b)) = (a, b) {
                    let mut img = vec![0u32; pt.places.len()];
                    for (p, ms) in a.tokens.iter().enumerate() {
                        for (c, &n) in ms {
                            img[pt.place_index(&net, p, c)] += n;
                        }
                    }
                    assert_eq!(img, b);
                    if !ll.contains(&b) {
                        hl.push(a);
                        ll.push(b);
                    }
                }
            }
            i += 1;
        }
        assert_eq!(ll.len(), 8);
    }
}
