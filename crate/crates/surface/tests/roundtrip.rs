//! Printing a desugared program and reading it back gives the same core terms.

use std::collections::HashMap;
use std::path::PathBuf;

use codata_core::decl::{Decl, Program};
use codata_core::pretty::print_decls;
use codata_core::syntax::*;
use codata_core::typecheck::{Checker, Options};
use codata_surface::{SourceMap, PRELUDE, PRELUDE_NAME};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn desugar(src: &str) -> Program {
    let mut m = SourceMap::new();
    m.add(PRELUDE_NAME, PRELUDE);
    m.add("gen.pol", src);
    m.load().unwrap_or_else(|e| panic!("{e}\n{src}")).program
}

fn lets(p: &Program) -> Vec<(Var, Term, Term)> {
    p.decls
        .iter()
        .filter_map(|d| match d {
            Decl::Let(l) => Some((l.var.clone(), l.ty.clone(), l.body.clone())),
            _ => None,
        })
        .collect()
}

/// Every let of `b` is alpha-equal to the let of `a` with the same name, with
/// local labels matched up by position.
fn same_lets(a: &Program, b: &Program) -> Result<(), String> {
    let (la, lb) = (lets(a), lets(b));
    if la.len() != lb.len() {
        return Err(format!("{} lets vs {}", la.len(), lb.len()));
    }
    let by_name: HashMap<String, Var> = la.iter().map(|(v, _, _)| (v.name.to_string(), v.clone())).collect();
    let pairs: Vec<(Var, Var)> = lb.iter().map(|(v, _, _)| (by_name[&*v.name].clone(), v.clone())).collect();
    for ((va, ta, ea), (_, tb, eb)) in la.iter().zip(&lb) {
        let same = |x: &Term, y: &Term| alpha_eq_under(x, y, LabelMode::Positional, &pairs);
        if !same(ta, tb) || !same(ea, eb) {
            return Err(format!("`{}` changed: `{ea}` vs `{eb}`", va.name));
        }
    }
    Ok(())
}

fn user_decls(p: &Program) -> String {
    print_decls(p, |d| d.span().file != 0)
}

// -- generated programs -------------------------------------------------------

struct Src {
    rng: StdRng,
    fresh: usize,
}

impl Src {
    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn pick<'a>(&mut self, xs: &'a [String]) -> Option<&'a String> {
        (!xs.is_empty()).then(|| &xs[self.rng.gen_range(0..xs.len())])
    }

    fn nat(&mut self, nats: &[String], bools: &[String], depth: u32) -> String {
        let choice = if depth == 0 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..7) };
        match choice {
            0 => self.rng.gen_range(0..4).to_string(),
            1 => self.pick(nats).cloned().unwrap_or_else(|| "Z".into()),
            2 => format!("S({})", self.nat(nats, bools, depth - 1)),
            3 => format!("{}.add({})", self.nat(nats, bools, depth - 1), self.nat(nats, bools, depth - 1)),
            4 => {
                let p = self.name("p");
                let zero = self.nat(nats, bools, depth - 1);
                let mut inner = nats.to_vec();
                inner.push(p.clone());
                let succ = self.nat(&inner, bools, depth - 1);
                format!("{}.match {{ Z => {zero}, S({p}) => {succ} }}", self.nat(nats, bools, depth - 1))
            }
            5 => {
                let x = self.name("x");
                let bound = self.nat(nats, bools, depth - 1);
                let mut inner = nats.to_vec();
                inner.push(x.clone());
                format!("let {x}: Nat := {bound}; {}", self.nat(&inner, bools, depth - 1))
            }
            _ => {
                let b = self.bool(nats, bools, depth - 1);
                format!("{b}.match {{ T => {}, F => {} }}", self.nat(nats, bools, depth - 1), self.nat(nats, bools, depth - 1))
            }
        }
    }

    fn bool(&mut self, nats: &[String], bools: &[String], depth: u32) -> String {
        let choice = if depth == 0 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..6) };
        match choice {
            0 => if self.rng.gen_bool(0.5) { "T" } else { "F" }.into(),
            1 => self.pick(bools).cloned().unwrap_or_else(|| "T".into()),
            2 => format!("{}.not", self.bool(nats, bools, depth - 1)),
            3 => format!("{}.and({})", self.bool(nats, bools, depth - 1), self.bool(nats, bools, depth - 1)),
            4 => format!("{}.even", self.nat(nats, bools, depth - 1)),
            _ => {
                let n = self.nat(nats, bools, depth - 1);
                format!("({n} : Nat).match as z return Bool {{ Z => {}, S(q) => F }}", self.bool(nats, bools, depth - 1))
            }
        }
    }

    fn program(&mut self) -> String {
        let mut out = String::new();
        let (mut nats, mut bools) = (Vec::new(), Vec::new());
        for i in 0..self.rng.gen_range(1..4) {
            match i % 3 {
                0 => {
                    let body = self.nat(&nats, &bools, 3);
                    out.push_str(&format!("let n{i}: Nat {{ {body} }}\n"));
                    nats.push(format!("n{i}"));
                }
                1 => {
                    let body = self.bool(&nats, &bools, 3);
                    out.push_str(&format!("let b{i}: Bool {{ {body} }}\n"));
                    bools.push(format!("b{i}"));
                }
                _ => {
                    let x = self.name("y");
                    let mut inner = nats.clone();
                    inner.push(x.clone());
                    let body = self.nat(&inner, &bools, 3);
                    out.push_str(&format!("let f{i}: Nat -> Nat {{ \\ap(_, _, {x}) => {body} }}\n"));
                }
            }
        }
        out
    }
}

fn program() -> impl Strategy<Value = String> {
    any::<u64>().prop_map(|seed| {
        Src { rng: StdRng::seed_from_u64(seed), fresh: 0 }.program()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_then_parse_is_alpha_equal(src in program()) {
        let first = desugar(&src);
        let printed = user_decls(&first);
        let second = desugar(&printed);
        if let Err(e) = same_lets(&first, &second) {
            prop_assert!(false, "{}\nsource:\n{}\nprinted:\n{}", e, src, printed);
        }
        // Printing is a fixpoint after one round.
        prop_assert_eq!(user_decls(&second), printed);
    }
}

// -- corpus -------------------------------------------------------------------

#[test]
fn elaborated_corpus_round_trips() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "cli", "examples"].iter().collect();
    for f in ["bool.pol", "bool_proofs.pol", "set_data.pol", "set_codata.pol", "set_indexed.pol", "fun_pi.pol", "streams.pol", "vec.pol"] {
        let text = std::fs::read_to_string(dir.join(f)).unwrap();
        let check = |src: &str| {
            let mut m = SourceMap::new();
            m.add(PRELUDE_NAME, PRELUDE);
            m.add(f, src);
            let d = m.load().unwrap_or_else(|e| panic!("{f}: {e}\n{src}"));
            let mut c = Checker::new(d.program, d.origins, Options::default());
            c.check_program();
            assert!(c.ok(), "{f}: {:?}\n{src}", c.diagnostics.iter().map(|d| &d.message).collect::<Vec<_>>());
            c
        };
        let first = check(&text);
        let printed = user_decls(&first.prog);
        let second = check(&printed);
        same_lets(&first.prog, &second.prog).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(user_decls(&second.prog), printed, "{f}: elaboration is not a fixpoint");
    }
}
