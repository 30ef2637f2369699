//! Structural guarantees of desugared programs, checked on the example corpus.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use codata_core::decl::{Decl, Program, Telescope};
use codata_core::pretty::print_program;
use codata_core::syntax::*;
use codata_surface::{SourceMap, PRELUDE, PRELUDE_NAME};

const FILES: &[(&str, bool)] = &[
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

fn desugar(file: &str, prelude: bool) -> Program {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "cli", "examples", file].iter().collect();
    let mut m = SourceMap::new();
    if prelude {
        m.add(PRELUDE_NAME, PRELUDE);
    }
    m.add(file, std::fs::read_to_string(p).unwrap());
    m.load().unwrap_or_else(|e| panic!("{file}: {e}")).program
}

/// Every term node of the program, including local clause bodies and the
/// clauses of top-level definitions.
fn all_terms(p: &Program) -> Vec<Term> {
    fn walk(t: &Term, out: &mut Vec<Term>) {
        out.push(t.clone());
        let mut kids: Vec<Term> = Vec::new();
        match t {
            Term::Var(_) | Term::Type => {}
            Term::Ann(e, ty) => kids.extend([(**e).clone(), (**ty).clone()]),
            Term::Let(l) => kids.extend([l.ty.clone(), l.bound.clone(), l.body.clone()]),
            Term::TyCtor(_, a) | Term::Ctor(_, a) => kids.extend(a.iter().map(|a| a.term.clone())),
            Term::Dtor(e, _, a) => {
                kids.push((**e).clone());
                kids.extend(a.iter().map(|a| a.term.clone()));
            }
            Term::Match(m) => {
                kids.push(m.scrutinee.clone());
                kids.extend(m.closure.args.iter().map(|a| a.term.clone()));
                kids.extend(m.motive.clone());
                if m.label.kind == LabelKind::Local {
                    kids.extend(m.cases.get().iter().filter_map(|c| body(&c.body)));
                }
            }
            Term::Comatch(c) => {
                kids.extend(c.closure.args.iter().map(|a| a.term.clone()));
                if c.label.kind == LabelKind::Local {
                    kids.extend(c.cocases.get().iter().filter_map(|c| body(&c.body)));
                }
            }
            Term::Meta(_, s) => kids.extend(s.0.iter().map(|(_, e)| e.clone())),
        }
        for k in &kids {
            walk(k, out);
        }
    }
    fn body(b: &Body) -> Option<Term> {
        match b {
            Body::Expr(e) => Some(e.clone()),
            Body::Absurd => None,
        }
    }
    fn tele(t: &Telescope) -> Vec<Term> {
        t.0.iter().map(|p| p.ty.clone()).collect()
    }
    let mut roots: Vec<Term> = Vec::new();
    for d in &p.decls {
        match d {
            Decl::Data(d) => {
                roots.extend(tele(&d.indices));
                for c in &d.ctors {
                    roots.extend(tele(&c.params));
                    roots.extend(c.result_args.iter().map(|a| a.term.clone()));
                }
            }
            Decl::Codata(d) => {
                roots.extend(tele(&d.indices));
                for x in &d.dtors {
                    roots.extend(tele(&x.params));
                    roots.extend(x.self_args.iter().map(|a| a.term.clone()));
                    roots.push(x.ret.clone());
                }
            }
            Decl::Def(d) => {
                roots.extend(tele(&d.params));
                roots.extend(d.self_args.iter().map(|a| a.term.clone()));
                roots.push(d.ret.clone());
                roots.extend(d.cases.get().iter().filter_map(|c| body(&c.body)));
            }
            Decl::Codef(d) => {
                roots.extend(tele(&d.params));
                roots.extend(d.ty_args.iter().map(|a| a.term.clone()));
                roots.extend(d.cocases.get().iter().filter_map(|c| body(&c.body)));
            }
            Decl::Let(l) => roots.extend([l.ty.clone(), l.body.clone()]),
        }
    }
    let mut out = Vec::new();
    for r in &roots {
        walk(r, &mut out);
    }
    out
}

#[test]
fn every_hole_is_a_distinct_meta() {
    for (f, prelude) in FILES {
        let mut seen: HashMap<MetaVar, usize> = HashMap::new();
        for t in all_terms(&desugar(f, *prelude)) {
            if let Term::Meta(a, _) = t {
                *seen.entry(a).or_default() += 1;
            }
        }
        for (a, n) in seen {
            assert_eq!(n, 1, "{f}: {a} appears {n} times");
        }
    }
}

#[test]
fn local_closures_capture_exactly_the_free_variables() {
    let mut checked = 0;
    for (f, prelude) in FILES {
        let p = desugar(f, *prelude);
        let globals: BTreeSet<Var> = p
            .decls
            .iter()
            .filter_map(|d| match d {
                Decl::Let(l) => Some(l.var.clone()),
                _ => None,
            })
            .collect();
        for t in all_terms(&p) {
            let (closure, bodies, self_var): (&Closure, Vec<(Vec<Var>, Term)>, Option<Var>) = match &t {
                Term::Match(m) if m.label.kind == LabelKind::Local => (
                    &m.closure,
                    m.cases
                        .get()
                        .iter()
                        .filter_map(|c| match &c.body {
                            Body::Expr(e) => Some((c.binders.iter().map(|b| b.var.clone()).collect(), e.clone())),
                            Body::Absurd => None,
                        })
                        .collect(),
                    None,
                ),
                Term::Comatch(c) if c.label.kind == LabelKind::Local => (
                    &c.closure,
                    c.cocases
                        .get()
                        .iter()
                        .filter_map(|c| match &c.body {
                            Body::Expr(e) => Some((c.binders.iter().map(|b| b.var.clone()).collect(), e.clone())),
                            Body::Absurd => None,
                        })
                        .collect(),
                    Some(c.label.self_var.clone()),
                ),
                _ => continue,
            };
            let mut expected = BTreeSet::new();
            for (binders, e) in bodies {
                let mut fv = free_vars(&e);
                for b in &binders {
                    fv.remove(b);
                }
                expected.extend(fv);
            }
            if let Some(s) = self_var {
                expected.remove(&s);
            }
            let expected: BTreeSet<Var> = expected.difference(&globals).cloned().collect();
            let params: BTreeSet<Var> = closure.params.iter().cloned().collect();
            assert_eq!(params.len(), closure.params.len(), "{f}: repeated closure parameter");
            assert_eq!(params, expected, "{f}: closure of `{t}`");
            assert!(closure.is_identity(), "{f}: desugared closures are identities");
            checked += 1;
        }
    }
    assert!(checked > 10, "only {checked} local (co)matches");
}

#[test]
fn desugaring_is_deterministic() {
    for (f, prelude) in FILES {
        assert_eq!(print_program(&desugar(f, *prelude)), print_program(&desugar(f, *prelude)), "{f}");
    }
}
