//! The Client/Server benchmark family.
//!
//! An environment decides on one of `n` computers (`d`), all computers are
//! informed at once (`inf`, a broadcast over `Sys`), every computer connects
//! to some host (`a`), a connection may break (`b`, into the bad place `B`),
//! and once every computer has connected to the chosen computer it hosts the
//! server (`h`).

use crate::game::HLGame;
use crate::model::parse_model;

/// Model text of the family member with `n` computers.
pub fn cs_model_text(n: usize) -> String {
    assert!(n >= 1, "at least one computer");
    let colors: Vec<String> = (1..=n).map(|i| format!("c{i}")).collect();
    let init: String = colors.iter().map(|c| format!("({c})")).collect();
    format!(
        "# Client/Server with {n} computer(s)
class C1 = {colors} ;
class C2 = dot ;

place Env kind=env type=C2 ;
place I kind=env type=C1 ;
place R kind=env type=C1 ;
place Sys kind=sys type=C1 ;
place A kind=sys type=C1*C1 ;
place B kind=bad type=C1*C1 ;
place H kind=sys type=C1 ;

trans d vars x:C1 guard true ;
trans inf vars x:C1 guard true ;
trans a vars y:C1, x:C1 guard true ;
trans b vars y:C1, x:C1 guard true ;
trans h vars x:C1 guard true ;

arc Env -> d expr (all(C2)) ;
arc d -> I expr (x) ;
arc I -> inf expr (x) ;
arc Sys -> inf expr (all(C1)) ;
arc inf -> R expr (x) ;
arc inf -> Sys expr (all(C1)) ;
arc Sys -> a expr (y) ;
arc a -> A expr (y,x) ;
arc A -> b expr (y,x) ;
arc b -> B expr (y,x) ;
arc R -> h expr (x) ;
arc A -> h expr (all(C1),x) ;
arc h -> H expr (x) ;

init Env = (dot) ;
init Sys = {init} ;
",
        colors = colors.join(" "),
    )
}

/// The family member with `n` computers as a game.
pub fn generate_cs(n: usize) -> HLGame {
    let mut g = parse_model(&cs_model_text(n)).expect("generated model parses");
    g.name = format!("CS-{n}");
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_validates_with_factorial_symmetries() {
        for n in 1..=6 {
            let g = generate_cs(n);
            g.validate().unwrap();
            assert_eq!(g.num_symmetries(), (1..=n as u128).product::<u128>());
        }
    }

    #[test]
    fn inform_broadcasts_over_all_computers() {
        let g = generate_cs(3).expand().unwrap();
        let inf = g.hl.net.transition_index("inf").unwrap();
        let t = g.pt.transitions.iter().position(|t| t.trans == inf).unwrap();
        let pre: Vec<String> = g.pt.pre[t].iter().map(|&(p, _)| g.place_name(p)).collect();
        assert_eq!(pre, vec!["I.c1", "Sys.c1", "Sys.c2", "Sys.c3"]);
    }
}
