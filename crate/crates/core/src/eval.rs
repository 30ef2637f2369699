//! Call-by-name environment machine to weak head normal form, and quotation.
//!
//! Every binding step (match, comatch, let, meta instantiation) renames the
//! bound variables to fresh ones, so a single append-only store can serve all
//! forks of an environment: bindings never shadow each other.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::decl::Ctx;
use crate::meta::MetaMap;
use crate::syntax::*;

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("evaluation ran out of fuel after {0} steps")]
    FuelExhausted(u64),
    #[error("evaluation reached the absurd clause {clause} of {label}")]
    StuckAbsurd { label: String, clause: String },
    #[error("{label} has no clause for {clause}")]
    MissingCase { label: String, clause: String },
}

/// Step budget shared by every reduction in one operation.
#[derive(Debug, Clone, Copy)]
pub struct Fuel {
    pub budget: u64,
    pub left: u64,
}

impl Fuel {
    pub fn new(budget: u64) -> Fuel {
        Fuel { budget, left: budget }
    }

    pub fn spend(&mut self) -> Result<(), EvalError> {
        if self.left == 0 {
            return Err(EvalError::FuelExhausted(self.budget));
        }
        self.left -= 1;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.budget - self.left
    }
}

impl Default for Fuel {
    fn default() -> Self {
        Fuel::new(DEFAULT_FUEL)
    }
}

#[derive(Clone, Debug)]
pub enum Binding {
    Val(Term),
    Comatch(Term),
}

/// Reduction environment: a typing context prefix and local bindings.
#[derive(Clone, Debug)]
pub struct Env {
    pub ctx: Arc<Ctx>,
    store: Arc<Mutex<HashMap<u32, Binding>>>,
}

impl Env {
    pub fn new(ctx: Ctx) -> Env {
        Env::from_arc(Arc::new(ctx))
    }

    pub fn from_arc(ctx: Arc<Ctx>) -> Env {
        Env { ctx, store: Arc::new(Mutex::new(HashMap::new())) }
    }

    pub fn bind(&self, v: &Var, b: Binding) {
        self.store.lock().expect("env poisoned").insert(v.id, b);
    }

    pub fn lookup(&self, v: &Var) -> Option<Binding> {
        self.store.lock().expect("env poisoned").get(&v.id).cloned()
    }

    pub fn is_local(&self, v: &Var) -> bool {
        self.store.lock().expect("env poisoned").contains_key(&v.id)
    }

    pub fn local_count(&self) -> usize {
        self.store.lock().expect("env poisoned").len()
    }
}

/// Rename `vars` to fresh variables bound to `vals`; returns the renaming.
fn bind_fresh(env: &Env, vars: &[Var], vals: &Args, ren: &mut Subst) {
    for (x, a) in vars.iter().zip(vals) {
        let x2 = x.refresh();
        env.bind(&x2, Binding::Val(a.term.clone()));
        ren.0.push((x.clone(), Term::Var(x2)));
    }
}

fn binder_vars(bs: &[Binder]) -> Vec<Var> {
    bs.iter().map(|b| b.var.clone()).collect()
}

/// One reduction step, or `None` when `t` is in weak head normal form.
pub fn step(t: &Term, env: &Env, metas: &MetaMap) -> Result<Option<Term>, EvalError> {
    match t {
        Term::Var(x) => match env.lookup(x) {
            Some(Binding::Val(e)) | Some(Binding::Comatch(e)) => Ok(Some(e)),
            None => Ok(env.ctx.lookup(x).and_then(|e| e.body.clone())),
        },
        Term::Ann(e, ty) => Ok(step(e, env, metas)?.map(|e2| Term::Ann(Arc::new(e2), ty.clone()))),
        Term::Let(l) => {
            let x2 = l.var.refresh();
            env.bind(&x2, Binding::Val(l.bound.clone()));
            Ok(Some(subst_apply(&l.body, &Subst::single(l.var.clone(), Term::Var(x2)))))
        }
        Term::Match(m) => {
            if let Term::Ctor(k, sigma) = m.scrutinee.strip_ann() {
                let cases = m.cases.get();
                let Some(case) = cases.iter().find(|c| &c.ctor == k) else {
                    return Err(EvalError::MissingCase { label: m.label.name.to_string(), clause: k.to_string() });
                };
                let Body::Expr(body) = &case.body else {
                    return Err(EvalError::StuckAbsurd { label: m.label.name.to_string(), clause: k.to_string() });
                };
                let mut ren = Subst::empty();
                bind_fresh(env, &m.closure.params, &m.closure.args, &mut ren);
                bind_fresh(env, &binder_vars(&case.binders), sigma, &mut ren);
                return Ok(Some(subst_apply(body, &ren)));
            }
            Ok(step(&m.scrutinee, env, metas)?.map(|s| {
                Term::Match(Arc::new(MatchTerm { scrutinee: s, ..(**m).clone() }))
            }))
        }
        Term::Dtor(e, d, sigma) => {
            match e.strip_ann() {
                Term::Var(x) => {
                    if let Some(Binding::Comatch(c)) = env.lookup(x) {
                        return enter_cocase(&c, x, d, sigma, env).map(Some);
                    }
                }
                Term::Comatch(c) => {
                    let x2 = c.label.self_var.refresh();
                    env.bind(&x2, Binding::Comatch(e.strip_ann().clone()));
                    return Ok(Some(Term::Dtor(Arc::new(Term::Var(x2)), d.clone(), sigma.clone())));
                }
                _ => {}
            }
            Ok(step(e, env, metas)?.map(|e2| Term::Dtor(Arc::new(e2), d.clone(), sigma.clone())))
        }
        Term::Meta(a, theta) => match metas.solution(*a) {
            Some(sol) => {
                let mut ren = Subst::empty();
                for (x, e) in &theta.0 {
                    let x2 = x.refresh();
                    env.bind(&x2, Binding::Val(e.clone()));
                    ren.0.push((x.clone(), Term::Var(x2)));
                }
                Ok(Some(subst_apply(sol, &ren)))
            }
            None => Ok(None),
        },
        Term::Type | Term::TyCtor(..) | Term::Ctor(..) | Term::Comatch(_) => Ok(None),
    }
}

fn enter_cocase(c: &Term, self_var: &Var, d: &Name, sigma: &Args, env: &Env) -> Result<Term, EvalError> {
    let Term::Comatch(c) = c else { unreachable!("comatch binding holds a comatch") };
    let cocases = c.cocases.get();
    let Some(cc) = cocases.iter().find(|o| &o.dtor == d) else {
        return Err(EvalError::MissingCase { label: c.label.name.to_string(), clause: d.to_string() });
    };
    let Body::Expr(body) = &cc.body else {
        return Err(EvalError::StuckAbsurd { label: c.label.name.to_string(), clause: d.to_string() });
    };
    let mut ren = Subst::empty();
    bind_fresh(env, &c.closure.params, &c.closure.args, &mut ren);
    bind_fresh(env, &binder_vars(&cc.binders), sigma, &mut ren);
    ren.0.push((c.label.self_var.clone(), Term::Var(self_var.clone())));
    Ok(subst_apply(body, &ren))
}

/// Reduce to weak head normal form. The environment may gain bindings.
pub fn whnf(t: &Term, env: &Env, metas: &MetaMap, fuel: &mut Fuel) -> Result<Term, EvalError> {
    let mut cur = t.clone();
    while let Some(next) = step(&cur, env, metas)? {
        fuel.spend()?;
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhnfClass {
    /// Stuck on a variable of the context.
    Neutral,
    /// Stuck on an unsolved metavariable.
    Blocked(MetaVar),
    Value,
}

/// Classify a term already in weak head normal form.
pub fn classify_whnf(t: &Term) -> WhnfClass {
    match t.strip_ann() {
        Term::Var(_) => WhnfClass::Neutral,
        Term::Dtor(e, ..) => classify_whnf(e),
        Term::Match(m) => classify_whnf(&m.scrutinee),
        Term::Meta(a, _) => WhnfClass::Blocked(*a),
        _ => WhnfClass::Value,
    }
}

/// Replace environment-bound variables by their (quoted) values. Clause bodies
/// are not entered; closures, scrutinees and motives are.
pub fn quote(t: &Term, env: &Env) -> Term {
    let mut memo = HashMap::new();
    quote_memo(t, env, &mut memo)
}

fn quote_memo(t: &Term, env: &Env, memo: &mut HashMap<u32, Term>) -> Term {
    let mut s = Subst::empty();
    for v in free_vars(t) {
        if let Some(q) = memo.get(&v.id) {
            s.0.push((v, q.clone()));
            continue;
        }
        let Some(b) = env.lookup(&v) else { continue };
        let q = match b {
            Binding::Val(e) | Binding::Comatch(e) => quote_memo(&e, env, memo),
        };
        memo.insert(v.id, q.clone());
        s.0.push((v, q));
    }
    subst_apply(t, &s)
}

/// Weak head normal form scoped over `ctx` alone.
pub fn normalize(ctx: &Ctx, t: &Term, metas: &MetaMap, fuel: &mut Fuel) -> Result<Term, EvalError> {
    let env = Env::new(ctx.clone());
    let w = whnf(t, &env, metas, fuel)?;
    Ok(quote(&w, &env))
}

/// Normalize, then keep normalizing the arguments, closures, scrutinees,
/// motives and delayed substitutions of the result. Clause bodies stay as they are.
pub fn deep_normalize(ctx: &Ctx, t: &Term, metas: &MetaMap, fuel: &mut Fuel) -> Result<Term, EvalError> {
    let w = normalize(ctx, t, metas, fuel)?;
    deep_rest(ctx, &w, metas, fuel)
}

fn deep_args(ctx: &Ctx, args: &Args, metas: &MetaMap, fuel: &mut Fuel) -> Result<Args, EvalError> {
    args.iter()
        .map(|a| Ok(Arg { term: deep_normalize(ctx, &a.term, metas, fuel)?, implicit: a.implicit }))
        .collect()
}

// `w` is in weak head normal form; normalize its components.
fn deep_rest(ctx: &Ctx, w: &Term, metas: &MetaMap, fuel: &mut Fuel) -> Result<Term, EvalError> {
    Ok(match w {
        Term::Var(_) | Term::Type => w.clone(),
        Term::Ann(e, _) => deep_rest(ctx, e, metas, fuel)?,
        Term::TyCtor(n, a) => Term::TyCtor(n.clone(), deep_args(ctx, a, metas, fuel)?),
        Term::Ctor(n, a) => Term::Ctor(n.clone(), deep_args(ctx, a, metas, fuel)?),
        Term::Dtor(e, n, a) => {
            let head = deep_rest(ctx, e, metas, fuel)?;
            Term::Dtor(Arc::new(head), n.clone(), deep_args(ctx, a, metas, fuel)?)
        }
        Term::Match(m) => {
            let scrutinee = deep_rest(ctx, &m.scrutinee, metas, fuel)?;
            let args = deep_args(ctx, &m.closure.args, metas, fuel)?;
            let motive = match &m.motive {
                Some(mt) => {
                    let inner = ctx.extended(m.motive_binder.clone(), Term::Type);
                    Some(deep_normalize(&inner, mt, metas, fuel)?)
                }
                None => None,
            };
            Term::Match(Arc::new(MatchTerm {
                scrutinee,
                label: m.label.clone(),
                closure: Closure { params: m.closure.params.clone(), args },
                motive_binder: m.motive_binder.clone(),
                motive,
                cases: m.cases.clone(),
            }))
        }
        Term::Comatch(c) => Term::Comatch(Arc::new(ComatchTerm {
            label: c.label.clone(),
            closure: Closure { params: c.closure.params.clone(), args: deep_args(ctx, &c.closure.args, metas, fuel)? },
            cocases: c.cocases.clone(),
        })),
        Term::Meta(a, theta) => {
            let mut out = Subst::empty();
            for (x, e) in &theta.0 {
                out.0.push((x.clone(), deep_normalize(ctx, e, metas, fuel)?));
            }
            Term::Meta(*a, out)
        }
        Term::Let(_) => unreachable!("let is never in weak head normal form"),
    })
}
