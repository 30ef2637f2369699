//! Typing properties over the example corpus and over generated programs.

use std::path::PathBuf;

use codata_cli::{load, Session};
use codata_core::decl::Decl;
use codata_core::eval::{normalize, Fuel};
use codata_core::syntax::*;
use codata_core::typecheck::Options;
use proptest::prelude::*;

const CORPUS: &[(&str, bool)] = &[
    ("bool.pol", true),
    ("bool_proofs.pol", true),
    ("set_data.pol", true),
    ("set_codata.pol", true),
    ("set_indexed.pol", true),
    ("fun_pi.pol", true),
    ("streams.pol", true),
    ("vec.pol", true),
    ("nat_fu_stump.pol", false),
    ("nat_fu_stump_data.pol", false),
];

fn corpus() -> Vec<(&'static str, Session)> {
    CORPUS
        .iter()
        .map(|(f, prelude)| {
            let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "examples", f].iter().collect();
            let text = std::fs::read_to_string(p).unwrap();
            let s = load(&[(f.to_string(), text)], *prelude, Options::default()).unwrap_or_else(|_| panic!("{f} loads"));
            assert!(s.ok(), "{f}: {:?}", s.reports().iter().map(|r| r.human()).collect::<Vec<_>>());
            (*f, s)
        })
        .collect()
}

fn lets(s: &Session) -> Vec<(String, Term, Term)> {
    s.checker
        .prog
        .decls
        .iter()
        .filter_map(|d| match d {
            Decl::Let(l) => Some((l.var.name.to_string(), l.body.clone(), l.ty.clone())),
            _ => None,
        })
        .collect()
}

/// Subterms reachable without going under a binder.
fn closed_subterms(t: &Term, out: &mut Vec<Term>) {
    out.push(t.clone());
    match t {
        Term::Ann(e, _) => closed_subterms(e, out),
        Term::Ctor(_, a) | Term::TyCtor(_, a) => a.iter().for_each(|a| closed_subterms(&a.term, out)),
        Term::Dtor(e, _, a) => {
            closed_subterms(e, out);
            a.iter().for_each(|a| closed_subterms(&a.term, out));
        }
        _ => {}
    }
}

#[test]
fn inferred_types_check() {
    let mut tried = 0;
    for (file, mut s) in corpus() {
        let globals = s.checker.globals.clone();
        for (name, body, _) in lets(&s) {
            let mut subterms = Vec::new();
            closed_subterms(&body, &mut subterms);
            for e in subterms {
                let Ok((_, ty)) = s.checker.reinfer(&globals, &e) else { continue };
                let ty = s.checker.finish(&ty);
                if let Err(d) = s.checker.recheck(&globals, &e, &ty) {
                    panic!("{file} `{name}`: `{}` infers `{}` but does not check against it: {}", s.show(&e), s.show(&ty), d.message);
                }
                tried += 1;
            }
        }
    }
    assert!(tried > 50, "only {tried} subterms inferred");
}

#[test]
fn elaborated_lets_recheck_to_themselves() {
    for (file, mut s) in corpus() {
        let globals = s.checker.globals.clone();
        for (name, body, ty) in lets(&s) {
            let again = s.checker.recheck(&globals, &body, &ty).unwrap_or_else(|d| panic!("{file} `{name}`: {}", d.message));
            let again = s.checker.finish(&again);
            assert!(alpha_eq(&again, &body), "{file} `{name}`: `{}` re-elaborates to `{}`", s.show(&body), s.show(&again));
        }
    }
}

#[test]
fn data_typed_lets_evaluate_to_constructors() {
    let mut evaluated = 0;
    for (file, s) in corpus() {
        for d in &s.checker.prog.decls {
            let Decl::Let(l) = d else { continue };
            let Term::TyCtor(ty, _) = l.ty.strip_ann() else { continue };
            if s.checker.prog.data(ty).is_none() {
                continue;
            }
            let w = normalize(&s.checker.globals, &Term::Var(l.var.clone()), &s.checker.metas, &mut Fuel::default())
                .unwrap_or_else(|e| panic!("{file} `{}`: {e}", l.var.name));
            assert!(matches!(w.strip_ann(), Term::Ctor(..)), "{file} `{}` stops at `{}`", l.var.name, s.show(&w));
            evaluated += 1;
        }
    }
    assert!(evaluated >= 20);
}

// -- case verdicts on generated index patterns --------------------------------

#[derive(Clone, Debug)]
enum Idx {
    Z,
    S(Box<Idx>),
    Var(usize),
}

impl Idx {
    fn render(&self, names: &[&str]) -> String {
        match self {
            Idx::Z => "Z".into(),
            Idx::S(i) => format!("S({})", i.render(names)),
            Idx::Var(v) => names[*v].into(),
        }
    }

    fn value(&self, env: &[u32]) -> u32 {
        match self {
            Idx::Z => 0,
            Idx::S(i) => 1 + i.value(env),
            Idx::Var(v) => env[*v],
        }
    }
}

fn idx() -> impl Strategy<Value = Idx> {
    let leaf = prop_oneof![Just(Idx::Z), (0..2usize).prop_map(Idx::Var)];
    leaf.prop_recursive(3, 4, 1, |inner| inner.prop_map(|i| Idx::S(Box::new(i))))
}

/// Some assignment of the ctor variables (0, 1) and def variables (2, 3)
/// makes both index pairs agree.
fn reachable(ctor: &[Idx; 2], def: &[Idx; 2]) -> bool {
    let shift = |i: &Idx| -> Idx {
        fn go(i: &Idx) -> Idx {
            match i {
                Idx::Z => Idx::Z,
                Idx::S(j) => Idx::S(Box::new(go(j))),
                Idx::Var(v) => Idx::Var(v + 2),
            }
        }
        go(i)
    };
    let def = [shift(&def[0]), shift(&def[1])];
    let range = 0..=8u32;
    for a in range.clone() {
        for b in range.clone() {
            for c in range.clone() {
                for d in range.clone() {
                    let env = [a, b, c, d];
                    if ctor[0].value(&env) == def[0].value(&env) && ctor[1].value(&env) == def[1].value(&env) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn absurd_verdicts_match_brute_force(c0 in idx(), c1 in idx(), d0 in idx(), d1 in idx()) {
        let (pc, pd) = (["p", "q"], ["u", "v"]);
        let src = format!(
            "data Nat {{ Z, S(n: Nat) }}\n\
             data Bool {{ T, F }}\n\
             data Ix(i j: Nat) {{ Mk(implicit p q: Nat): Ix({}, {}) }}\n\
             def Ix({}, {}).probe(implicit u v: Nat): Bool {{ Mk absurd }}\n",
            c0.render(&pc), c1.render(&pc), d0.render(&pd), d1.render(&pd)
        );
        let s = load(&[("gen.pol".into(), src.clone())], false, Options::default()).expect("generated program parses");
        let codes: Vec<&str> = s.reports().iter().map(|r| r.code).collect();
        let possible = reachable(&[c0, c1], &[d0, d1]);
        if codes.is_empty() {
            prop_assert!(!possible, "accepted absurd clause is reachable:\n{}", src);
        } else {
            prop_assert_eq!(codes.clone(), vec!["case.reachable"], "{}", src);
            prop_assert!(possible, "rejected absurd clause is unreachable:\n{}", src);
        }
    }
}
