//! Metavariable map.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::decl::{Ctx, Span};
use crate::syntax::*;

#[derive(Clone, Debug)]
pub struct MetaEntry {
    pub ctx: Ctx,
    pub ty: Term,
    pub solution: Option<Term>,
    pub span: Span,
    /// What the meta stands for, for diagnostics ("implicit argument a of Cons").
    pub origin: Arc<str>,
}

#[derive(Clone, Debug, Default)]
pub struct MetaMap {
    entries: BTreeMap<MetaVar, MetaEntry>,
    /// Registration order.
    order: Vec<MetaVar>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetaError {
    #[error("metavariable {0} is not registered")]
    Unregistered(MetaVar),
    #[error("metavariable {0} is already solved")]
    AlreadySolved(MetaVar),
}

impl MetaMap {
    pub fn new() -> MetaMap {
        MetaMap::default()
    }

    pub fn register(&mut self, alpha: MetaVar, ctx: Ctx, ty: Term, span: Span, origin: &str) {
        if self.entries.insert(alpha, MetaEntry { ctx, ty, solution: None, span, origin: Arc::from(origin) }).is_none() {
            self.order.push(alpha);
        }
    }

    /// Number of registrations so far; a mark for [`MetaMap::registered_since`].
    pub fn mark(&self) -> usize {
        self.order.len()
    }

    pub fn registered_since(&self, mark: usize) -> &[MetaVar] {
        &self.order[mark.min(self.order.len())..]
    }

    pub fn fresh(&mut self, ctx: Ctx, ty: Term, span: Span, origin: &str) -> MetaVar {
        let a = MetaVar::fresh();
        self.register(a, ctx, ty, span, origin);
        a
    }

    pub fn get(&self, alpha: MetaVar) -> Option<&MetaEntry> {
        self.entries.get(&alpha)
    }

    pub fn contains(&self, alpha: MetaVar) -> bool {
        self.entries.contains_key(&alpha)
    }

    pub fn solution(&self, alpha: MetaVar) -> Option<&Term> {
        self.entries.get(&alpha).and_then(|e| e.solution.as_ref())
    }

    pub fn is_solved(&self, alpha: MetaVar) -> bool {
        self.solution(alpha).is_some()
    }

    /// Record a solution. Solutions are written once.
    pub fn solve(&mut self, alpha: MetaVar, sol: Term) -> Result<(), MetaError> {
        let e = self.entries.get_mut(&alpha).ok_or(MetaError::Unregistered(alpha))?;
        if e.solution.is_some() {
            return Err(MetaError::AlreadySolved(alpha));
        }
        log::debug!("solved {alpha}");
        e.solution = Some(sol);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MetaVar, &MetaEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unsolved(&self) -> Vec<MetaVar> {
        self.entries.iter().filter(|(_, e)| e.solution.is_none()).map(|(a, _)| *a).collect()
    }

    /// Instantiate a solved meta at a delayed substitution.
    pub fn instantiate(&self, alpha: MetaVar, theta: &Subst) -> Option<Term> {
        self.solution(alpha).map(|s| subst_apply(s, theta))
    }
}

/// Inline every solved metavariable. Clause bodies of local (co)matches are
/// rewritten into fresh clause cells; top-level (co)definition cells are
/// shared and left to their owners.
pub fn zonk(t: &Term, metas: &MetaMap) -> Term {
    Zonk { metas }.term(t)
}

/// Zonk every type and body of a context.
pub fn zonk_ctx(ctx: &Ctx, metas: &MetaMap) -> Ctx {
    let mut out = ctx.clone();
    for e in &mut out.entries {
        e.ty = zonk(&e.ty, metas);
        e.body = e.body.as_ref().map(|b| zonk(b, metas));
    }
    out
}

pub fn zonk_args(args: &Args, metas: &MetaMap) -> Args {
    let z = Zonk { metas };
    z.args(args)
}

pub fn zonk_cases(cases: &[Case], metas: &MetaMap) -> Vec<Case> {
    let z = Zonk { metas };
    cases
        .iter()
        .map(|c| Case { ctor: c.ctor.clone(), binders: c.binders.clone(), body: z.body(&c.body) })
        .collect()
}

pub fn zonk_cocases(cocases: &[Cocase], metas: &MetaMap) -> Vec<Cocase> {
    let z = Zonk { metas };
    cocases
        .iter()
        .map(|c| Cocase { dtor: c.dtor.clone(), binders: c.binders.clone(), body: z.body(&c.body) })
        .collect()
}

struct Zonk<'a> {
    metas: &'a MetaMap,
}

impl Zonk<'_> {
    fn args(&self, args: &Args) -> Args {
        args.iter().map(|a| Arg { term: self.term(&a.term), implicit: a.implicit }).collect()
    }

    fn body(&self, b: &Body) -> Body {
        match b {
            Body::Expr(e) => Body::Expr(self.term(e)),
            Body::Absurd => Body::Absurd,
        }
    }

    fn closure(&self, c: &Closure) -> Closure {
        Closure { params: c.params.clone(), args: self.args(&c.args) }
    }

    fn term(&self, t: &Term) -> Term {
        match t {
            Term::Var(_) | Term::Type => t.clone(),
            Term::Ann(e, ty) => Term::ann(self.term(e), self.term(ty)),
            Term::Let(l) => Term::let_(l.var.clone(), self.term(&l.ty), self.term(&l.bound), self.term(&l.body)),
            Term::TyCtor(n, a) => Term::TyCtor(n.clone(), self.args(a)),
            Term::Ctor(n, a) => Term::Ctor(n.clone(), self.args(a)),
            Term::Dtor(e, n, a) => Term::Dtor(Arc::new(self.term(e)), n.clone(), self.args(a)),
            Term::Match(m) => {
                let cases = if m.label.kind == LabelKind::Local {
                    Clauses::new(zonk_cases(&m.cases.get(), self.metas))
                } else {
                    m.cases.clone()
                };
                Term::Match(Arc::new(MatchTerm {
                    scrutinee: self.term(&m.scrutinee),
                    label: m.label.clone(),
                    closure: self.closure(&m.closure),
                    motive_binder: m.motive_binder.clone(),
                    motive: m.motive.as_ref().map(|x| self.term(x)),
                    cases,
                }))
            }
            Term::Comatch(c) => {
                let cocases = if c.label.kind == LabelKind::Local {
                    Clauses::new(zonk_cocases(&c.cocases.get(), self.metas))
                } else {
                    c.cocases.clone()
                };
                Term::Comatch(Arc::new(ComatchTerm {
                    label: c.label.clone(),
                    closure: self.closure(&c.closure),
                    cocases,
                }))
            }
            Term::Meta(a, theta) => {
                let theta = Subst(theta.0.iter().map(|(v, e)| (v.clone(), self.term(e))).collect());
                match self.metas.instantiate(*a, &theta) {
                    Some(s) => self.term(&s),
                    None => Term::Meta(*a, theta),
                }
            }
        }
    }
}

/// Metas mentioned anywhere, including local clause bodies.
pub fn metas_deep(t: &Term) -> std::collections::BTreeSet<MetaVar> {
    let mut out = std::collections::BTreeSet::new();
    collect_deep(t, &mut out);
    out
}

fn collect_deep(t: &Term, out: &mut std::collections::BTreeSet<MetaVar>) {
    visit_shallow(t, &mut |s| match s {
        Term::Meta(a, _) => {
            out.insert(*a);
        }
        Term::Match(m) if m.label.kind == LabelKind::Local => {
            for c in m.cases.get().iter() {
                if let Body::Expr(e) = &c.body {
                    collect_deep(e, out);
                }
            }
        }
        Term::Comatch(c) if c.label.kind == LabelKind::Local => {
            for c in c.cocases.get().iter() {
                if let Body::Expr(e) = &c.body {
                    collect_deep(e, out);
                }
            }
        }
        _ => {}
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solutions_are_write_once() {
        let mut m = MetaMap::new();
        let a = m.fresh(Ctx::new(), Term::Type, Span::default(), "test");
        assert!(m.solve(a, Term::Type).is_ok());
        assert_eq!(m.solve(a, Term::Type), Err(MetaError::AlreadySolved(a)));
    }

    #[test]
    fn zonk_instantiates_delayed_substitution() {
        let x = Var::fresh("x");
        let mut ctx = Ctx::new();
        ctx.push(x.clone(), Term::tyctor("Nat", vec![]));
        let mut m = MetaMap::new();
        let a = m.fresh(ctx, Term::tyctor("Nat", vec![]), Span::default(), "test");
        m.solve(a, Term::ctor("S", args_of([Term::var(&x)]))).unwrap();
        let z = Term::ctor("Z", vec![]);
        let t = Term::Meta(a, Subst::single(x, z.clone()));
        assert!(alpha_eq(&zonk(&t, &m), &Term::ctor("S", args_of([z]))));
    }
}
