//! Text format for high-level Petri games.
//!
//! ```text
//! class C1 = c1 c2 | c3 ;          # '|' separates static subclasses
//! place Sys kind=sys type=C1 ;
//! place A kind=bad type=C1*C1 ;
//! trans a vars y:C1, x:C1 guard y != x and x in C1[2] ;
//! arc Sys -> a expr (y) ;
//! arc a -> A expr (y,x) + (x,y) ;
//! init Sys = (c1)(c2)(c3) ;
//! ```

use crate::color::{ColorClass, ColorUniverse};
use crate::error::{Error, Result};
use crate::game::{HLGame, PlaceKind};
use crate::net::{ArcExpr, Guard, HLArc, HLMarking, HLNet, HLPlace, HLTransition, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 17] = ["->", "==", "!=", "&&", "||", "=", "|", ";", ":", ",", "(", ")", "*", "+", "!", "[", "]"];

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (off, ch) = chars[i];
            let col = line[..off].chars().count() + 1;
            if ch.is_whitespace() {
                i += 1;
                continue;
            }
            if ch.is_alphanumeric() || ch == '_' || ch == '.' {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '.') {
                    j += 1;
                }
                let end = chars.get(j).map_or(line.len(), |c| c.0);
                out.push(Token { tok: Tok::Ident(line[off..end].to_string()), line: ln + 1, col });
                i = j;
                continue;
            }
            let rest = &line[off..];
            match PUNCT.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    out.push(Token { tok: Tok::Punct(p), line: ln + 1, col });
                    i += p.chars().count();
                }
                None => {
                    return Err(Error::Syntax { line: ln + 1, col, msg: format!("unexpected character '{ch}'") });
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    universe: ColorUniverse,
    places: Vec<HLPlace>,
    kinds: Vec<PlaceKind>,
    transitions: Vec<HLTransition>,
    arcs: Vec<HLArc>,
    init: Vec<(usize, Vec<usize>)>,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        Err(Error::Syntax { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == w)
    }

    fn punct(&mut self, p: &str) -> Result<()> {
        if self.is_punct(p) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{p}'"))
        }
    }

    fn word(&mut self, w: &str) -> Result<()> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{w}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn class_ref(&mut self) -> Result<usize> {
        let name = self.ident()?;
        match self.universe.class_index(&name) {
            Some(i) => Ok(i),
            None => {
                self.pos -= 1;
                self.err(format!("unknown class {name}"))
            }
        }
    }

    fn statement(&mut self) -> Result<()> {
        let kw = self.ident()?;
        match kw.as_str() {
            "class" => self.class_decl(),
            "place" => self.place_decl(),
            "trans" => self.trans_decl(),
            "arc" => self.arc_decl(),
            "init" => self.init_decl(),
            _ => {
                self.pos -= 1;
                self.err(format!("unknown statement '{kw}'"))
            }
        }
    }

    fn class_decl(&mut self) -> Result<()> {
        let start = self.pos;
        let name = self.ident()?;
        if self.universe.class_index(&name).is_some() {
            self.pos = start;
            return self.err(format!("class {name} declared twice"));
        }
        self.punct("=")?;
        let mut colors = Vec::new();
        let mut bounds = Vec::new();
        loop {
            if self.is_punct(";") {
                break;
            }
            if self.is_punct("|") {
                if colors.len() == bounds.last().copied().unwrap_or(0) {
                    return self.err("empty static subclass");
                }
                bounds.push(colors.len());
                self.pos += 1;
                continue;
            }
            if self.is_punct(",") {
                self.pos += 1;
                continue;
            }
            let c = self.ident()?;
            let known = self.universe.classes.iter().any(|k| k.color_index(&c).is_some());
            if colors.contains(&c) || known {
                self.pos -= 1;
                return self.err(format!("color {c} declared twice"));
            }
            colors.push(c);
        }
        if colors.len() == bounds.last().copied().unwrap_or(0) {
            return self.err("empty static subclass");
        }
        bounds.push(colors.len());
        self.punct(";")?;
        let class = ColorClass::with_subclasses(name, colors, bounds)?;
        self.universe.classes.push(class);
        Ok(())
    }

    fn place_decl(&mut self) -> Result<()> {
        let name = self.ident()?;
        if self.places.iter().any(|p| p.name == name) {
            self.pos -= 1;
            return self.err(format!("place {name} declared twice"));
        }
        self.word("kind")?;
        self.punct("=")?;
        let kind = match self.ident()?.as_str() {
            "env" => PlaceKind::Env,
            "sys" => PlaceKind::Sys,
            "bad" => PlaceKind::Bad,
            other => {
                self.pos -= 1;
                return self.err(format!("unknown place kind {other}"));
            }
        };
        self.word("type")?;
        self.punct("=")?;
        let mut ty = vec![self.class_ref()?];
        while self.is_punct("*") {
            self.pos += 1;
            ty.push(self.class_ref()?);
        }
        self.punct(";")?;
        self.places.push(HLPlace { name, ty });
        self.kinds.push(kind);
        Ok(())
    }

    fn trans_decl(&mut self) -> Result<()> {
        let name = self.ident()?;
        if self.transitions.iter().any(|t| t.name == name) {
            self.pos -= 1;
            return self.err(format!("transition {name} declared twice"));
        }
        let mut vars: Vec<Var> = Vec::new();
        if self.is_word("vars") {
            self.pos += 1;
            while !self.is_word("guard") && !self.is_punct(";") {
                let v = self.ident()?;
                if vars.iter().any(|x| x.name == v) {
                    self.pos -= 1;
                    return self.err(format!("variable {v} declared twice"));
                }
                self.punct(":")?;
                let class = self.class_ref()?;
                vars.push(Var { name: v, class });
                if self.is_punct(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let guard = if self.is_word("guard") {
            self.pos += 1;
            self.guard_or(&vars)?
        } else {
            Guard::True
        };
        self.punct(";")?;
        self.transitions.push(HLTransition { name, vars, guard });
        Ok(())
    }

    fn var_ref(&mut self, vars: &[Var]) -> Result<usize> {
        let v = self.ident()?;
        match vars.iter().position(|x| x.name == v) {
            Some(i) => Ok(i),
            None => {
                self.pos -= 1;
                self.err(format!("unbound variable {v}"))
            }
        }
    }

    fn guard_or(&mut self, vars: &[Var]) -> Result<Guard> {
        let mut g = self.guard_and(vars)?;
        while self.is_word("or") || self.is_punct("||") {
            self.pos += 1;
            g = Guard::Or(Box::new(g), Box::new(self.guard_and(vars)?));
        }
        Ok(g)
    }

    fn guard_and(&mut self, vars: &[Var]) -> Result<Guard> {
        let mut g = self.guard_unary(vars)?;
        while self.is_word("and") || self.is_punct("&&") {
            self.pos += 1;
            g = Guard::And(Box::new(g), Box::new(self.guard_unary(vars)?));
        }
        Ok(g)
    }

    fn guard_unary(&mut self, vars: &[Var]) -> Result<Guard> {
        if self.is_word("not") || self.is_punct("!") {
            self.pos += 1;
            return Ok(Guard::Not(Box::new(self.guard_unary(vars)?)));
        }
        if self.is_punct("(") {
            self.pos += 1;
            let g = self.guard_or(vars)?;
            self.punct(")")?;
            return Ok(g);
        }
        if self.is_word("true") {
            self.pos += 1;
            return Ok(Guard::True);
        }
        if self.is_word("false") {
            self.pos += 1;
            return Ok(Guard::Not(Box::new(Guard::True)));
        }
        let start = self.pos;
        let a = self.var_ref(vars)?;
        if self.is_punct("==") || self.is_punct("!=") {
            let eq = self.is_punct("==");
            self.pos += 1;
            let b = self.var_ref(vars)?;
            if vars[a].class != vars[b].class {
                self.pos = start;
                return self.err("guard compares variables of different classes");
            }
            return Ok(if eq { Guard::Eq(a, b) } else { Guard::Ne(a, b) });
        }
        if self.is_word("in") {
            self.pos += 1;
            let class = self.class_ref()?;
            if class != vars[a].class {
                self.pos -= 1;
                return self.err("static subclass of a different class");
            }
            self.punct("[")?;
            let q = self.ident()?;
            let n = self.universe.class(class).num_subclasses();
            let q = match q.parse::<usize>() {
                Ok(q) if (1..=n).contains(&q) => q - 1,
                _ => {
                    self.pos -= 1;
                    return self.err(format!("static subclass index must be in 1..={n}"));
                }
            };
            self.punct("]")?;
            return Ok(Guard::In(a, q));
        }
        self.err("expected '==', '!=' or 'in'")
    }

    fn node_ref(&mut self) -> Result<(bool, usize)> {
        let name = self.ident()?;
        if let Some(p) = self.places.iter().position(|p| p.name == name) {
            return Ok((true, p));
        }
        if let Some(t) = self.transitions.iter().position(|t| t.name == name) {
            return Ok((false, t));
        }
        self.pos -= 1;
        self.err(format!("unknown place or transition {name}"))
    }

    fn arc_decl(&mut self) -> Result<()> {
        let start = self.pos;
        let (from_place, from) = self.node_ref()?;
        self.punct("->")?;
        let (to_place, to) = self.node_ref()?;
        if from_place == to_place {
            self.pos = start;
            return self.err("arcs connect a place and a transition");
        }
        let (place, trans, input) = if from_place { (from, to, true) } else { (to, from, false) };
        if self.arcs.iter().any(|a| a.place == place && a.trans == trans && a.input == input) {
            self.pos = start;
            return self.err("duplicate arc; use '+' to add tuples");
        }
        self.word("expr")?;
        let vars = self.transitions[trans].vars.clone();
        let mut tuples = vec![self.expr_tuple(&vars)?];
        while self.is_punct("+") {
            self.pos += 1;
            tuples.push(self.expr_tuple(&vars)?);
        }
        let ty = self.places[place].ty.clone();
        for t in &tuples {
            if t.len() != ty.len() {
                self.pos = start;
                return self.err(format!("tuple arity {} does not match place type arity {}", t.len(), ty.len()));
            }
            for (term, &class) in t.iter().zip(&ty) {
                let got = match *term {
                    Term::Var(v) => vars[v].class,
                    Term::All(i) => i,
                };
                if got != class {
                    self.pos = start;
                    return self.err(format!(
                        "component of class {} where {} is expected",
                        self.universe.class(got).name,
                        self.universe.class(class).name
                    ));
                }
            }
        }
        self.punct(";")?;
        self.arcs.push(HLArc { place, trans, input, expr: ArcExpr { tuples } });
        Ok(())
    }

    fn expr_tuple(&mut self, vars: &[Var]) -> Result<Vec<Term>> {
        self.punct("(")?;
        let mut out = Vec::new();
        loop {
            if self.is_word("all") {
                self.pos += 1;
                self.punct("(")?;
                let c = self.class_ref()?;
                self.punct(")")?;
                out.push(Term::All(c));
            } else {
                out.push(Term::Var(self.var_ref(vars)?));
            }
            if self.is_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.punct(")")?;
        Ok(out)
    }

    fn init_decl(&mut self) -> Result<()> {
        let name = self.ident()?;
        let Some(p) = self.places.iter().position(|x| x.name == name) else {
            self.pos -= 1;
            return self.err(format!("unknown place {name}"));
        };
        self.punct("=")?;
        let ty = self.places[p].ty.clone();
        loop {
            if self.is_punct("+") {
                self.pos += 1;
            }
            if !self.is_punct("(") {
                break;
            }
            self.pos += 1;
            let mut colors = Vec::new();
            loop {
                let k = colors.len();
                let c = self.ident()?;
                let Some(&class) = ty.get(k) else {
                    self.pos -= 1;
                    return self.err("token has too many components");
                };
                match self.universe.class(class).color_index(&c) {
                    Some(ci) => colors.push(ci),
                    None => {
                        self.pos -= 1;
                        return self.err(format!("unknown color {c} of class {}", self.universe.class(class).name));
                    }
                }
                if self.is_punct(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if colors.len() != ty.len() {
                return self.err("token has too few components");
            }
            self.punct(")")?;
            self.init.push((p, colors));
        }
        self.punct(";")
    }
}

/// Parses a model; the result is validated.
pub fn parse_model(text: &str) -> Result<HLGame> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        universe: ColorUniverse::default(),
        places: Vec::new(),
        kinds: Vec::new(),
        transitions: Vec::new(),
        arcs: Vec::new(),
        init: Vec::new(),
    };
    while p.pos < p.toks.len() {
        p.statement()?;
    }
    let mut m0 = HLMarking::empty(p.places.len());
    for (place, colors) in p.init {
        m0.add(place, colors, 1);
    }
    let game = HLGame {
        name: String::new(),
        net: HLNet { universe: p.universe, places: p.places, transitions: p.transitions, arcs: p.arcs },
        m0,
        kinds: p.kinds,
    };
    game.validate()?;
    Ok(game)
}

fn guard_text(g: &Guard, t: &HLTransition, u: &ColorUniverse) -> String {
    let v = |i: usize| t.vars[i].name.clone();
    match g {
        Guard::True => "true".into(),
        Guard::Eq(a, b) => format!("{} == {}", v(*a), v(*b)),
        Guard::Ne(a, b) => format!("{} != {}", v(*a), v(*b)),
        Guard::In(x, q) => format!("{} in {}[{}]", v(*x), u.class(t.vars[*x].class).name, q + 1),
        Guard::And(a, b) => format!("({} and {})", guard_text(a, t, u), guard_text(b, t, u)),
        Guard::Or(a, b) => format!("({} or {})", guard_text(a, t, u), guard_text(b, t, u)),
        Guard::Not(a) => format!("not ({})", guard_text(a, t, u)),
    }
}

/// Renders a game in the model format; `parse_model` inverts it.
pub fn serialize_model(g: &HLGame) -> String {
    let net = &g.net;
    let u = &net.universe;
    let mut out = String::new();
    if !g.name.is_empty() {
        out.push_str(&format!("# {}\n", g.name));
    }
    for class in &u.classes {
        let parts: Vec<String> = class.subclasses().map(|r| class.colors[r].join(" ")).collect();
        out.push_str(&format!("class {} = {} ;\n", class.name, parts.join(" | ")));
    }
    for (p, kind) in net.places.iter().zip(&g.kinds) {
        let kind = match kind {
            PlaceKind::Env => "env",
            PlaceKind::Sys => "sys",
            PlaceKind::Bad => "bad",
        };
        let ty: Vec<&str> = p.ty.iter().map(|&i| u.class(i).name.as_str()).collect();
        out.push_str(&format!("place {} kind={} type={} ;\n", p.name, kind, ty.join("*")));
    }
    for t in &net.transitions {
        let vars: Vec<String> = t.vars.iter().map(|v| format!("{}:{}", v.name, u.class(v.class).name)).collect();
        let vars = if vars.is_empty() { String::new() } else { format!(" vars {}", vars.join(", ")) };
        out.push_str(&format!("trans {}{} guard {} ;\n", t.name, vars, guard_text(&t.guard, t, u)));
    }
    for a in &net.arcs {
        let t = &net.transitions[a.trans];
        let tuples: Vec<String> = a
            .expr
            .tuples
            .iter()
            .map(|tuple| {
                let parts: Vec<String> = tuple
                    .iter()
                    .map(|term| match *term {
                        Term::Var(v) => t.vars[v].name.clone(),
                        Term::All(i) => format!("all({})", u.class(i).name),
                    })
                    .collect();
                format!("({})", parts.join(","))
            })
            .collect();
        let (from, to) = if a.input {
            (&net.places[a.place].name, &t.name)
        } else {
            (&t.name, &net.places[a.place].name)
        };
        out.push_str(&format!("arc {} -> {} expr {} ;\n", from, to, tuples.join(" + ")));
    }
    for (p, ms) in g.m0.tokens.iter().enumerate() {
        if ms.is_empty() {
            continue;
        }
        let ty = &net.places[p].ty;
        let mut toks = String::new();
        for (c, &n) in ms {
            let names: Vec<&str> = ty.iter().zip(c).map(|(&i, &x)| u.class(i).colors[x].as_str()).collect();
            for _ in 0..n {
                toks.push_str(&format!("({})", names.join(",")));
            }
        }
        out.push_str(&format!("init {} = {} ;\n", net.places[p].name, toks));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::{cs_model_text, generate_cs};

    #[test]
    fn generated_family_round_trips() {
        for n in 1..=4 {
            let g = parse_model(&cs_model_text(n)).unwrap();
            let again = parse_model(&serialize_model(&g)).unwrap();
            assert_eq!(g.net, again.net);
            assert_eq!(g.m0, again.m0);
            assert_eq!(g.kinds, again.kinds);
        }
    }

    #[test]
    fn unknown_color_in_init_is_located() {
        let text = cs_model_text(2).replace("init Sys = (c1)(c2) ;", "init Sys = (c1)(c9) ;");
        match parse_model(&text) {
            Err(Error::Syntax { line, col, msg }) => {
                assert!(msg.contains("c9"), "{msg}");
                let bad_line = text.lines().position(|l| l.contains("(c9)")).unwrap() + 1;
                assert_eq!(line, bad_line);
                assert_eq!(col, text.lines().nth(line - 1).unwrap().find("c9").unwrap() + 1);
            }
            other => panic!("expected a syntax error, got {other:?}"),
        }
    }

    #[test]
    fn guards_and_subclasses_parse() {
        let text = "class C = a b | c ;\nplace P kind=sys type=C ;\nplace Q kind=env type=C*C ;\n\
                    trans t vars x:C, y:C guard x != y and (x in C[1] or not y == x) ;\n\
                    arc P -> t expr (x) ;\narc t -> Q expr (x,y) + (y,x) ;\ninit P = (a)(b)(c) ;\n";
        let g = parse_model(text).unwrap();
        assert_eq!(g.net.universe.class(0).num_subclasses(), 2);
        let again = parse_model(&serialize_model(&g)).unwrap();
        assert_eq!(g.net, again.net);
        assert!(g.net.guard_holds(0, &[0, 2]));
        assert!(g.net.guard_holds(0, &[2, 0]));
        assert!(!g.net.guard_holds(0, &[1, 1]));
    }

    #[test]
    fn structural_errors() {
        let base = "class C = a b ;\nplace P kind=sys type=C ;\ntrans t vars x:C ;\n";
        let arity = format!("{base}arc P -> t expr (x,x) ;\n");
        assert!(matches!(parse_model(&arity), Err(Error::Syntax { line: 4, .. })));
        let unbound = format!("{base}arc P -> t expr (z) ;\n");
        assert!(matches!(parse_model(&unbound), Err(Error::Syntax { line: 4, .. })));
        let asym = format!("{base}arc P -> t expr (x) ;\ninit P = (a) ;\n");
        assert!(matches!(parse_model(&asym), Err(Error::NonSymmetricInitialMarking(_))));
        assert!(matches!(parse_model("place ;"), Err(Error::Syntax { line: 1, .. })));
    }

    #[test]
    fn generator_names_members() {
        assert_eq!(generate_cs(2).name, "CS-2");
    }
}
