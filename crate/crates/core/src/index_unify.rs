//! First-order unification of type indices for dependent (co)pattern matching.
//!
//! Both sides are reduced to weak head normal form before a rule is chosen.
//! Context variables without a body are the unknowns; metavariables are never
//! solved here.

use std::collections::VecDeque;

use crate::decl::Ctx;
use crate::eval::{classify_whnf, normalize, EvalError, Fuel, WhnfClass};
use crate::meta::MetaMap;
use crate::syntax::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictKind {
    /// Distinct data constructors.
    Constructors,
    /// Distinct type constructors.
    TypeConstructors,
    /// A type constructor against a data constructor.
    TypeVsData,
    /// Comatches with distinct labels.
    Labels,
    /// A variable against a term that contains it.
    Cycle,
}

#[derive(Debug, Clone)]
pub enum IdxResult {
    /// Most general unifier, idempotent.
    Unifier(Subst),
    Conflict { kind: ConflictKind, lhs: Term, rhs: Term },
    /// Undecided: a metavariable in the way or no rule applies.
    Fail { lhs: Term, rhs: Term, reason: &'static str },
}

impl IdxResult {
    pub fn is_unifier(&self) -> bool {
        matches!(self, IdxResult::Unifier(_))
    }

    pub fn is_conflict(&self) -> bool {
        matches!(self, IdxResult::Conflict { .. })
    }
}

/// Index unification context: the unknowns are the variables of `ctx` without a body.
pub struct IdxUnify<'a> {
    pub ctx: &'a Ctx,
    pub metas: &'a MetaMap,
    pub fuel: &'a mut Fuel,
    /// Rule applications, one line each, when requested.
    pub trace: Option<&'a mut Vec<String>>,
}

impl IdxUnify<'_> {
    fn note(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.push(line());
        }
    }

    pub fn unify(&mut self, t1: &Term, t2: &Term) -> Result<IdxResult, EvalError> {
        self.run(VecDeque::from([(t1.clone(), t2.clone())]))
    }

    pub fn unify_args(&mut self, a1: &Args, a2: &Args) -> Result<IdxResult, EvalError> {
        assert_eq!(a1.len(), a2.len(), "index lists of different length");
        self.run(a1.iter().zip(a2).map(|(x, y)| (x.term.clone(), y.term.clone())).collect())
    }

    fn is_unknown(&self, v: &Var) -> bool {
        self.ctx.lookup(v).is_some_and(|e| e.body.is_none())
    }

    // Bodies in the context may mention solved unknowns; re-apply until stable.
    fn reduce(&mut self, t: &Term, theta: &Subst) -> Result<Term, EvalError> {
        let mut cur = normalize(self.ctx, &subst_apply(t, theta), self.metas, self.fuel)?;
        while free_vars(&cur).iter().any(|v| theta.get(v).is_some()) {
            cur = normalize(self.ctx, &subst_apply(&cur, theta), self.metas, self.fuel)?;
        }
        Ok(cur)
    }

    fn run(&mut self, mut work: VecDeque<(Term, Term)>) -> Result<IdxResult, EvalError> {
        let mut theta = Subst::empty();
        while let Some((l, r)) = work.pop_front() {
            let l = self.reduce(&l, &theta)?;
            let r = self.reduce(&r, &theta)?;
            let (l, r) = (l.strip_ann().clone(), r.strip_ann().clone());
            if alpha_eq(&l, &r) {
                self.note(|| format!("delete {l} = {r}"));
                continue;
            }
            let var_side = match (&l, &r) {
                (Term::Var(x), _) if self.is_unknown(x) => Some((x.clone(), r.clone())),
                (_, Term::Var(y)) if self.is_unknown(y) => Some((y.clone(), l.clone())),
                _ => None,
            };
            if let Some((x, t)) = var_side {
                if free_vars(&t).contains(&x) {
                    self.note(|| format!("cycle {x} in {t}"));
                    return Ok(IdxResult::Conflict { kind: ConflictKind::Cycle, lhs: l, rhs: r });
                }
                self.note(|| format!("solve {x} := {t}"));
                theta = theta.then(&Subst::single(x, t));
                continue;
            }
            if matches!(classify_whnf(&l), WhnfClass::Blocked(_)) || matches!(classify_whnf(&r), WhnfClass::Blocked(_)) {
                self.note(|| format!("give up on {l} = {r}: unsolved metavariable"));
                return Ok(IdxResult::Fail { lhs: l, rhs: r, reason: "an unsolved metavariable blocks the indices" });
            }
            match (&l, &r) {
                (Term::Ctor(k1, a1), Term::Ctor(k2, a2)) => {
                    if k1 != k2 || a1.len() != a2.len() {
                        self.note(|| format!("conflict {l} = {r}"));
                        return Ok(IdxResult::Conflict { kind: ConflictKind::Constructors, lhs: l, rhs: r });
                    }
                    self.note(|| format!("injectivity of {k1}"));
                    push_front(&mut work, a1, a2);
                }
                (Term::TyCtor(t1, a1), Term::TyCtor(t2, a2)) => {
                    if t1 != t2 || a1.len() != a2.len() {
                        self.note(|| format!("conflict {l} = {r}"));
                        return Ok(IdxResult::Conflict { kind: ConflictKind::TypeConstructors, lhs: l, rhs: r });
                    }
                    self.note(|| format!("injectivity of {t1}"));
                    push_front(&mut work, a1, a2);
                }
                (Term::TyCtor(..), Term::Ctor(..)) | (Term::Ctor(..), Term::TyCtor(..)) => {
                    self.note(|| format!("conflict {l} = {r}"));
                    return Ok(IdxResult::Conflict { kind: ConflictKind::TypeVsData, lhs: l, rhs: r });
                }
                (Term::Comatch(c1), Term::Comatch(c2)) => {
                    if c1.label != c2.label {
                        self.note(|| format!("conflict {l} = {r}: distinct labels"));
                        return Ok(IdxResult::Conflict { kind: ConflictKind::Labels, lhs: l, rhs: r });
                    }
                    self.note(|| format!("injectivity of comatch {}", c1.label.name));
                    push_front(&mut work, &c1.closure.args, &c2.closure.args);
                }
                _ => {
                    self.note(|| format!("give up on {l} = {r}"));
                    return Ok(IdxResult::Fail { lhs: l, rhs: r, reason: "no unification rule applies" });
                }
            }
        }
        Ok(IdxResult::Unifier(theta))
    }
}

fn push_front(work: &mut VecDeque<(Term, Term)>, a1: &Args, a2: &Args) {
    for (x, y) in a1.iter().zip(a2).rev() {
        work.push_front((x.term.clone(), y.term.clone()));
    }
}

pub fn unify_idx(ctx: &Ctx, t1: &Term, t2: &Term, metas: &MetaMap, fuel: &mut Fuel) -> Result<IdxResult, EvalError> {
    IdxUnify { ctx, metas, fuel, trace: None }.unify(t1, t2)
}

pub fn unify_idx_args(ctx: &Ctx, a1: &Args, a2: &Args, metas: &MetaMap, fuel: &mut Fuel) -> Result<IdxResult, EvalError> {
    IdxUnify { ctx, metas, fuel, trace: None }.unify_args(a1, a2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Term {
        Term::ctor("Z", vec![])
    }
    fn s(t: Term) -> Term {
        Term::ctor("S", args_of([t]))
    }
    fn nat() -> Term {
        Term::tyctor("Nat", vec![])
    }

    fn ctx_of(vars: &[&Var]) -> Ctx {
        let mut c = Ctx::new();
        for v in vars {
            c.push((*v).clone(), nat());
        }
        c
    }

    #[test]
    fn distinct_constructors_conflict() {
        let m = Var::fresh("m");
        let ctx = ctx_of(&[&m]);
        let r = unify_idx(&ctx, &s(Term::var(&m)), &z(), &MetaMap::new(), &mut Fuel::default()).unwrap();
        assert!(matches!(r, IdxResult::Conflict { kind: ConflictKind::Constructors, .. }));
    }

    #[test]
    fn identical_terms_delete() {
        let r = unify_idx(&Ctx::new(), &s(z()), &s(z()), &MetaMap::new(), &mut Fuel::default()).unwrap();
        assert!(matches!(r, IdxResult::Unifier(t) if t.is_empty()));
    }

    #[test]
    fn successor_injectivity() {
        let y = Var::fresh("y");
        let ctx = ctx_of(&[&y]);
        let r = unify_idx(&ctx, &s(Term::var(&y)), &s(z()), &MetaMap::new(), &mut Fuel::default()).unwrap();
        let IdxResult::Unifier(theta) = r else { panic!() };
        assert!(alpha_eq(theta.get(&y).unwrap(), &z()));
    }

    #[test]
    fn arguments_thread_the_unifier() {
        let x = Var::fresh("x");
        let y = Var::fresh("y");
        let ctx = ctx_of(&[&x, &y]);
        let t = Term::ctor("T", vec![]);
        let r = unify_idx_args(
            &ctx,
            &args_of([s(z()), Term::var(&x)]),
            &args_of([s(Term::var(&y)), t.clone()]),
            &MetaMap::new(),
            &mut Fuel::default(),
        )
        .unwrap();
        let IdxResult::Unifier(theta) = r else { panic!() };
        assert!(alpha_eq(theta.get(&y).unwrap(), &z()));
        assert!(alpha_eq(theta.get(&x).unwrap(), &t));
    }

    #[test]
    fn forced_head_clash() {
        let x = Var::fresh("x");
        let ctx = ctx_of(&[&x]);
        let r = unify_idx_args(&ctx, &args_of([z()]), &args_of([s(Term::var(&x))]), &MetaMap::new(), &mut Fuel::default())
            .unwrap();
        assert!(r.is_conflict());
    }

    #[test]
    fn cycle_is_a_conflict() {
        let x = Var::fresh("x");
        let ctx = ctx_of(&[&x]);
        let r = unify_idx(&ctx, &Term::var(&x), &s(Term::var(&x)), &MetaMap::new(), &mut Fuel::default()).unwrap();
        assert!(matches!(r, IdxResult::Conflict { kind: ConflictKind::Cycle, .. }));
    }

    #[test]
    fn metas_make_unification_give_up() {
        let mut metas = MetaMap::new();
        let a = metas.fresh(Ctx::new(), nat(), Default::default(), "test");
        let r = unify_idx(&Ctx::new(), &Term::Meta(a, Subst::empty()), &z(), &metas, &mut Fuel::default()).unwrap();
        assert!(matches!(r, IdxResult::Fail { .. }));
    }
}
