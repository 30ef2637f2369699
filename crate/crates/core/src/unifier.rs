//! Conversion checking and metavariable solving.
//!
//! Constraints are processed front to back. For each one: α-equality, then a
//! direct solve if one side is a bare unsolved meta, then reduction of both
//! sides in a shared environment, then the structural rules. Constraints that
//! are stuck on unsolved metas are set aside and woken when one of those metas
//! gets a solution.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::decl::Ctx;
use crate::eval::{classify_whnf, deep_normalize, quote, whnf, Env, EvalError, Fuel, WhnfClass};
use crate::meta::{metas_deep, zonk, MetaMap};
use crate::syntax::*;

#[derive(Clone, Debug)]
pub enum Constraint {
    TermEq { env: Env, lhs: Term, rhs: Term },
    ArgsEq { env: Env, lhs: Args, rhs: Args },
}

impl Constraint {
    pub fn env(&self) -> &Env {
        match self {
            Constraint::TermEq { env, .. } | Constraint::ArgsEq { env, .. } => env,
        }
    }

    /// Both sides with environment bindings substituted away.
    pub fn quoted(&self) -> (Term, Term) {
        match self {
            Constraint::TermEq { env, lhs, rhs } => (quote(lhs, env), quote(rhs, env)),
            Constraint::ArgsEq { env, lhs, rhs } => (
                quote(&Term::Ctor(Arc::from("()"), lhs.clone()), env),
                quote(&Term::Ctor(Arc::from("()"), rhs.clone()), env),
            ),
        }
    }
}

/// Why two terms cannot be equal. `code` is the stable diagnostic code.
#[derive(Clone, Debug)]
pub struct Conflict {
    pub code: &'static str,
    pub message: String,
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Done,
    Conflict(Conflict),
    Stuck(Vec<Constraint>),
}

/// Verdict of type checking a candidate solution.
#[derive(Clone, Debug)]
pub enum SolutionCheck {
    Ok,
    Conflict(String),
    Stuck,
}

#[derive(Clone, Debug)]
pub struct TraceEvent {
    pub rule: &'static str,
    pub lhs: String,
    pub rhs: String,
}

/// Services the unifier needs from its caller.
pub trait Host {
    fn metas(&self) -> &MetaMap;
    fn metas_mut(&mut self) -> &mut MetaMap;
    fn fuel(&mut self) -> &mut Fuel;
    /// Type check a candidate solution against the meta's type in its context.
    fn check_solution(&mut self, ctx: &Ctx, sol: &Term, ty: &Term) -> SolutionCheck;
    fn tracing(&self) -> bool {
        false
    }
    fn trace(&mut self, _event: TraceEvent) {}
    fn solved(&mut self, _alpha: MetaVar, _sol: &Term) {}
}

/// Host that accepts every solution without type checking it.
pub struct PlainHost<'a> {
    pub metas: &'a mut MetaMap,
    pub fuel: Fuel,
    pub events: Option<Vec<TraceEvent>>,
}

impl<'a> PlainHost<'a> {
    pub fn new(metas: &'a mut MetaMap, fuel: Fuel) -> Self {
        PlainHost { metas, fuel, events: None }
    }
}

impl Host for PlainHost<'_> {
    fn metas(&self) -> &MetaMap {
        self.metas
    }
    fn metas_mut(&mut self) -> &mut MetaMap {
        self.metas
    }
    fn fuel(&mut self) -> &mut Fuel {
        &mut self.fuel
    }
    fn check_solution(&mut self, _ctx: &Ctx, _sol: &Term, _ty: &Term) -> SolutionCheck {
        SolutionCheck::Ok
    }
    fn tracing(&self) -> bool {
        self.events.is_some()
    }
    fn trace(&mut self, event: TraceEvent) {
        if let Some(e) = &mut self.events {
            e.push(event);
        }
    }
}

#[derive(Default, Debug)]
pub struct Unifier {
    queue: VecDeque<Constraint>,
    postponed: Vec<(Constraint, BTreeSet<MetaVar>)>,
}

enum Processed {
    Done,
    Postpone(BTreeSet<MetaVar>),
    Conflict(Conflict),
}

/// Result of trying to solve `α[θ] ∼ e`.
#[derive(Debug, Clone)]
pub enum SolveResult {
    Solved,
    Postponed(BTreeSet<MetaVar>),
    Failed(Conflict),
}

impl Unifier {
    pub fn new() -> Unifier {
        Unifier::default()
    }

    pub fn add(&mut self, c: Constraint) {
        self.queue.push_back(c);
    }

    pub fn add_eq(&mut self, ctx: &Ctx, lhs: &Term, rhs: &Term) {
        self.add(Constraint::TermEq { env: Env::new(ctx.clone()), lhs: lhs.clone(), rhs: rhs.clone() });
    }

    pub fn pending(&self) -> impl Iterator<Item = &Constraint> {
        self.queue.iter().chain(self.postponed.iter().map(|(c, _)| c))
    }

    pub fn has_pending(&self) -> bool {
        !self.queue.is_empty() || !self.postponed.is_empty()
    }

    /// Metas that pending constraints wait for.
    pub fn blockers(&self) -> BTreeSet<MetaVar> {
        self.postponed.iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    pub fn clear(&mut self) {
        self.queue.clear();
        self.postponed.clear();
    }

    /// Process constraints until none can make progress.
    pub fn run(&mut self, host: &mut dyn Host) -> Result<Outcome, EvalError> {
        loop {
            self.wake(host.metas());
            if self.queue.is_empty() {
                break;
            }
            while let Some(c) = self.queue.pop_front() {
                match self.process(c.clone(), host)? {
                    Processed::Done => {}
                    Processed::Postpone(blockers) => {
                        if host.tracing() {
                            let (l, r) = c.quoted();
                            host.trace(TraceEvent { rule: "postpone", lhs: l.to_string(), rhs: r.to_string() });
                        }
                        self.postponed.push((c, blockers));
                    }
                    Processed::Conflict(k) => return Ok(Outcome::Conflict(k)),
                }
                self.wake(host.metas());
            }
        }
        if self.postponed.is_empty() {
            Ok(Outcome::Done)
        } else {
            Ok(Outcome::Stuck(self.postponed.iter().map(|(c, _)| c.clone()).collect()))
        }
    }

    fn wake(&mut self, metas: &MetaMap) {
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.postponed)
            .into_iter()
            .partition(|(_, b)| b.iter().any(|a| metas.is_solved(*a)));
        self.postponed = waiting;
        for (c, _) in ready {
            self.queue.push_back(c);
        }
    }

    fn push_args_front(&mut self, env: &Env, lhs: &Args, rhs: &Args) {
        for (l, r) in lhs.iter().zip(rhs).rev() {
            self.queue.push_front(Constraint::TermEq { env: env.clone(), lhs: l.term.clone(), rhs: r.term.clone() });
        }
    }

    fn process(&mut self, c: Constraint, host: &mut dyn Host) -> Result<Processed, EvalError> {
        let (env, lhs, rhs) = match c {
            Constraint::ArgsEq { env, lhs, rhs } => {
                if lhs.len() != rhs.len() {
                    let (l, r) = (Term::Ctor(Arc::from("()"), lhs), Term::Ctor(Arc::from("()"), rhs));
                    return Ok(Processed::Conflict(conflict("conv.arity", "argument lists differ in length", &l, &r)));
                }
                note(host, "args", || (format!("{} args", lhs.len()), format!("{} args", rhs.len())));
                self.push_args_front(&env, &lhs, &rhs);
                return Ok(Processed::Done);
            }
            Constraint::TermEq { env, lhs, rhs } => (env, lhs, rhs),
        };
        if alpha_eq(&lhs, &rhs) {
            note(host, "alpha", || (lhs.to_string(), rhs.to_string()));
            return Ok(Processed::Done);
        }
        // Solve before reducing when a side is a bare unsolved meta.
        if bare_unsolved(&lhs, host.metas()).is_some() || bare_unsolved(&rhs, host.metas()).is_some() {
            return self.meta_eq(&env, &lhs, &rhs, host);
        }
        let fuel = host.fuel();
        let mut f = *fuel;
        let l = whnf(&lhs, &env, host.metas(), &mut f);
        let l = l.and_then(|l| whnf(&rhs, &env, host.metas(), &mut f).map(|r| (l, r)));
        *host.fuel() = f;
        let (l, r) = l?;
        let (l, r) = (l.strip_ann().clone(), r.strip_ann().clone());
        if alpha_eq(&l, &r) {
            note(host, "reduce-alpha", || (quote(&l, &env).to_string(), quote(&r, &env).to_string()));
            return Ok(Processed::Done);
        }
        if bare_unsolved(&l, host.metas()).is_some() || bare_unsolved(&r, host.metas()).is_some() {
            return self.meta_eq(&env, &l, &r, host);
        }
        let (cl, cr) = (classify_whnf(&l), classify_whnf(&r));
        let mut blockers = BTreeSet::new();
        if let WhnfClass::Blocked(a) = cl {
            blockers.insert(a);
        }
        if let WhnfClass::Blocked(a) = cr {
            blockers.insert(a);
        }
        if !blockers.is_empty() {
            if self.blocked_congruent(&env, &l, &r, host)? {
                note(host, "blocked-congruence", || (quote(&l, &env).to_string(), quote(&r, &env).to_string()));
                return Ok(Processed::Done);
            }
            return Ok(Processed::Postpone(blockers));
        }
        let quoted = |t: &Term| quote(t, &env);
        match (&l, &r) {
            (Term::TyCtor(n1, a1), Term::TyCtor(n2, a2)) => {
                if n1 != n2 || a1.len() != a2.len() {
                    return Ok(Processed::Conflict(conflict(
                        "conv.distinct-type-ctors",
                        "distinct type constructors",
                        &quoted(&l),
                        &quoted(&r),
                    )));
                }
                note(host, "type-ctor", || (quoted(&l).to_string(), quoted(&r).to_string()));
                self.push_args_front(&env, a1, a2);
            }
            (Term::Ctor(n1, a1), Term::Ctor(n2, a2)) => {
                if n1 != n2 || a1.len() != a2.len() {
                    return Ok(Processed::Conflict(conflict(
                        "conv.distinct-ctors",
                        "distinct constructors",
                        &quoted(&l),
                        &quoted(&r),
                    )));
                }
                note(host, "ctor", || (quoted(&l).to_string(), quoted(&r).to_string()));
                self.push_args_front(&env, a1, a2);
            }
            (Term::Comatch(c1), Term::Comatch(c2)) => {
                if c1.label != c2.label {
                    return Ok(Processed::Conflict(conflict(
                        "conv.distinct-labels",
                        "comatches with distinct labels",
                        &quoted(&l),
                        &quoted(&r),
                    )));
                }
                note(host, "comatch", || (quoted(&l).to_string(), quoted(&r).to_string()));
                self.push_args_front(&env, &c1.closure.args, &c2.closure.args);
            }
            (Term::Type, Term::Type) => {}
            (Term::Var(x), Term::Var(y)) if x != y => {
                return Ok(Processed::Conflict(conflict("conv.distinct-vars", "distinct variables", &l, &r)));
            }
            (Term::Dtor(h1, d1, a1), Term::Dtor(h2, d2, a2)) => {
                if d1 != d2 || a1.len() != a2.len() {
                    return Ok(Processed::Conflict(conflict(
                        "conv.distinct-dtors",
                        "distinct destructor calls on neutral terms",
                        &quoted(&l),
                        &quoted(&r),
                    )));
                }
                note(host, "dtor", || (quoted(&l).to_string(), quoted(&r).to_string()));
                self.push_args_front(&env, a1, a2);
                self.queue.push_front(Constraint::TermEq { env: env.clone(), lhs: (**h1).clone(), rhs: (**h2).clone() });
            }
            (Term::Match(m1), Term::Match(m2)) => {
                if m1.label != m2.label {
                    return Ok(Processed::Conflict(conflict(
                        "conv.distinct-labels",
                        "matches with distinct labels",
                        &quoted(&l),
                        &quoted(&r),
                    )));
                }
                note(host, "match", || (quoted(&l).to_string(), quoted(&r).to_string()));
                self.push_args_front(&env, &m1.closure.args, &m2.closure.args);
                self.queue.push_front(Constraint::TermEq {
                    env: env.clone(),
                    lhs: m1.scrutinee.clone(),
                    rhs: m2.scrutinee.clone(),
                });
            }
            _ => {
                return Ok(Processed::Conflict(conflict(
                    "conv.mismatch",
                    "terms of different shape",
                    &quoted(&l),
                    &quoted(&r),
                )));
            }
        }
        Ok(Processed::Done)
    }

    /// Two stuck terms with the same head are equal if their parts are,
    /// without solving anything. Checked on a scratch copy of the metas, so a
    /// failure only means the constraint has to wait.
    fn blocked_congruent(&self, env: &Env, l: &Term, r: &Term, host: &mut dyn Host) -> Result<bool, EvalError> {
        let mut parts = Unifier::new();
        let eq = |lhs: &Term, rhs: &Term| Constraint::TermEq { env: env.clone(), lhs: lhs.clone(), rhs: rhs.clone() };
        let args = |lhs: &Args, rhs: &Args| Constraint::ArgsEq { env: env.clone(), lhs: lhs.clone(), rhs: rhs.clone() };
        match (l, r) {
            (Term::Match(m1), Term::Match(m2)) if m1.label == m2.label => {
                parts.add(eq(&m1.scrutinee, &m2.scrutinee));
                parts.add(args(&m1.closure.args, &m2.closure.args));
            }
            (Term::Dtor(h1, d1, a1), Term::Dtor(h2, d2, a2)) if d1 == d2 => {
                parts.add(eq(h1, h2));
                parts.add(args(a1, a2));
            }
            _ => return Ok(false),
        }
        let mut scratch = host.metas().clone();
        let solved_before = scratch.len() - scratch.unsolved().len();
        let mut sub = PlainHost::new(&mut scratch, *host.fuel());
        let outcome = parts.run(&mut sub)?;
        *host.fuel() = sub.fuel;
        Ok(matches!(outcome, Outcome::Done) && scratch.len() - scratch.unsolved().len() == solved_before)
    }

    fn meta_eq(&mut self, env: &Env, lhs: &Term, rhs: &Term, host: &mut dyn Host) -> Result<Processed, EvalError> {
        let l = bare_unsolved(lhs, host.metas());
        let r = bare_unsolved(rhs, host.metas());
        if let (Some((a, t1)), Some((b, t2))) = (&l, &r) {
            if a == b {
                let t1 = quote_subst(t1, env);
                let t2 = quote_subst(t2, env);
                return Ok(match same(host, *a, &t1, &t2) {
                    SolveResult::Solved => Processed::Done,
                    SolveResult::Postponed(bs) => Processed::Postpone(bs),
                    SolveResult::Failed(c) => Processed::Conflict(c),
                });
            }
        }
        let mut blockers = BTreeSet::new();
        for (side, other) in [(&l, rhs), (&r, lhs)] {
            if let Some((a, theta)) = side {
                match solve_one(host, env, *a, theta, other)? {
                    SolveResult::Solved => return Ok(Processed::Done),
                    SolveResult::Postponed(bs) => blockers.extend(bs),
                    SolveResult::Failed(c) => return Ok(Processed::Conflict(c)),
                }
            }
        }
        Ok(Processed::Postpone(blockers))
    }
}

fn note(host: &mut dyn Host, rule: &'static str, sides: impl FnOnce() -> (String, String)) {
    if host.tracing() {
        let (lhs, rhs) = sides();
        host.trace(TraceEvent { rule, lhs, rhs });
    }
}

fn conflict(code: &'static str, what: &str, l: &Term, r: &Term) -> Conflict {
    Conflict { code, message: format!("{what}: `{l}` and `{r}`"), lhs: l.clone(), rhs: r.clone() }
}

fn bare_unsolved(t: &Term, metas: &MetaMap) -> Option<(MetaVar, Subst)> {
    match t.strip_ann() {
        Term::Meta(a, theta) if !metas.is_solved(*a) => Some((*a, theta.clone())),
        _ => None,
    }
}

fn quote_subst(theta: &Subst, env: &Env) -> Subst {
    Subst(theta.0.iter().map(|(x, e)| (x.clone(), quote(e, env))).collect())
}

/// Convenience: decide `lhs ≡ rhs` in `ctx`, solving metas in `metas`
/// without type checking the solutions.
pub fn conv(ctx: &Ctx, lhs: &Term, rhs: &Term, metas: &mut MetaMap, fuel: Fuel) -> Result<Outcome, EvalError> {
    let mut host = PlainHost::new(metas, fuel);
    let mut u = Unifier::new();
    u.add_eq(ctx, lhs, rhs);
    u.run(&mut host)
}

// ---------------------------------------------------------------------------
// Occurrences

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OccClass {
    StronglyRigid,
    WeaklyRigid,
    Flexible,
}

impl OccClass {
    pub fn is_rigid(self) -> bool {
        self != OccClass::Flexible
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OccTarget {
    Var(Var),
    Meta(MetaVar),
}

#[derive(Clone, Debug)]
pub struct Occurrence {
    /// Child indices from the root.
    pub path: Vec<u32>,
    pub target: OccTarget,
    pub class: OccClass,
    /// Metas whose delayed substitutions enclose this occurrence, innermost last.
    pub under: Vec<MetaVar>,
}

#[derive(Clone, Debug, Default)]
pub struct Classification {
    pub occurrences: Vec<Occurrence>,
}

impl Classification {
    fn vars_where(&self, pred: impl Fn(OccClass) -> bool) -> BTreeSet<Var> {
        self.occurrences
            .iter()
            .filter(|o| pred(o.class))
            .filter_map(|o| match &o.target {
                OccTarget::Var(v) => Some(v.clone()),
                OccTarget::Meta(_) => None,
            })
            .collect()
    }

    pub fn strongly_rigid_vars(&self) -> BTreeSet<Var> {
        self.vars_where(|c| c == OccClass::StronglyRigid)
    }

    pub fn rigid_vars(&self) -> BTreeSet<Var> {
        self.vars_where(OccClass::is_rigid)
    }

    pub fn all_vars(&self) -> BTreeSet<Var> {
        self.vars_where(|_| true)
    }

    pub fn class_of(&self, v: &Var) -> Vec<OccClass> {
        self.occurrences
            .iter()
            .filter(|o| matches!(&o.target, OccTarget::Var(x) if x == v))
            .map(|o| o.class)
            .collect()
    }
}

/// Classify every variable and meta occurrence of `e`. Spines headed by a
/// variable make their parts weakly rigid; delayed substitutions of metas,
/// spines headed by a meta and unreduced redexes make their parts flexible.
pub fn classify(e: &Term) -> Classification {
    let mut c = Classifier { out: Vec::new(), path: Vec::new(), under: Vec::new(), bound: Vec::new() };
    c.walk(e, OccClass::StronglyRigid);
    Classification { occurrences: c.out }
}

struct Classifier {
    out: Vec<Occurrence>,
    path: Vec<u32>,
    under: Vec<MetaVar>,
    bound: Vec<Var>,
}

enum SpineHead {
    Neutral,
    Blocked(MetaVar),
    Redex,
}

fn spine_head(t: &Term) -> SpineHead {
    match t.strip_ann() {
        Term::Var(_) => SpineHead::Neutral,
        Term::Dtor(h, ..) => spine_head(h),
        Term::Match(m) => spine_head(&m.scrutinee),
        Term::Meta(a, _) => SpineHead::Blocked(*a),
        _ => SpineHead::Redex,
    }
}

impl Classifier {
    fn child(&mut self, i: u32, t: &Term, mode: OccClass) {
        self.path.push(i);
        self.walk(t, mode);
        self.path.pop();
    }

    fn record(&mut self, target: OccTarget, class: OccClass) {
        self.out.push(Occurrence { path: self.path.clone(), target, class, under: self.under.clone() });
    }

    fn spine_mode(&mut self, head: &Term, mode: OccClass) -> (OccClass, Option<MetaVar>) {
        if mode == OccClass::Flexible {
            return (mode, None);
        }
        match spine_head(head) {
            SpineHead::Neutral => (OccClass::WeaklyRigid, None),
            SpineHead::Blocked(a) => (OccClass::Flexible, Some(a)),
            SpineHead::Redex => (OccClass::Flexible, None),
        }
    }

    fn walk(&mut self, t: &Term, mode: OccClass) {
        match t {
            Term::Var(v) => {
                if !self.bound.contains(v) {
                    self.record(OccTarget::Var(v.clone()), mode);
                }
            }
            Term::Type => {}
            Term::TyCtor(_, args) | Term::Ctor(_, args) => {
                for (i, a) in args.iter().enumerate() {
                    self.child(i as u32, &a.term, mode);
                }
            }
            Term::Comatch(c) => {
                for (i, a) in c.closure.args.iter().enumerate() {
                    self.child(i as u32, &a.term, mode);
                }
            }
            Term::Ann(e, ty) => {
                self.child(0, e, mode);
                self.child(1, ty, OccClass::Flexible);
            }
            Term::Let(l) => {
                self.child(0, &l.ty, OccClass::Flexible);
                self.child(1, &l.bound, OccClass::Flexible);
                self.bound.push(l.var.clone());
                self.child(2, &l.body, OccClass::Flexible);
                self.bound.pop();
            }
            Term::Dtor(h, _, args) => {
                let (m, blocker) = self.spine_mode(h, mode);
                if let Some(b) = blocker {
                    self.under.push(b);
                }
                self.child(0, h, m);
                for (i, a) in args.iter().enumerate() {
                    self.child(i as u32 + 1, &a.term, m);
                }
                if blocker.is_some() {
                    self.under.pop();
                }
            }
            Term::Match(mt) => {
                let (m, blocker) = self.spine_mode(&mt.scrutinee, mode);
                if let Some(b) = blocker {
                    self.under.push(b);
                }
                self.child(0, &mt.scrutinee, m);
                for (i, a) in mt.closure.args.iter().enumerate() {
                    self.child(i as u32 + 2, &a.term, m);
                }
                if let Some(motive) = &mt.motive {
                    self.bound.push(mt.motive_binder.clone());
                    self.child(1, motive, m);
                    self.bound.pop();
                }
                if blocker.is_some() {
                    self.under.pop();
                }
            }
            Term::Meta(a, theta) => {
                self.record(OccTarget::Meta(*a), mode);
                self.under.push(*a);
                for (i, (_, e)) in theta.0.iter().enumerate() {
                    self.child(i as u32, e, OccClass::Flexible);
                }
                self.under.pop();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Solving

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OccursResult {
    Ok,
    No(BTreeSet<MetaVar>),
    Fail(&'static str, String),
}

/// May `v` appear in a solution for a meta whose context is `meta_ctx`,
/// given the occurrence's substitution `theta`?
fn allowed_var(v: &Var, img: &BTreeSet<Var>, meta_ctx: &Ctx, theta: &Subst) -> bool {
    img.contains(v) || (theta.get(v).is_none() && meta_ctx.lookup(v).is_some_and(|e| e.body.is_some()))
}

fn image_vars(theta: &Subst) -> BTreeSet<Var> {
    theta.0.iter().filter_map(|(_, t)| t.as_var().cloned()).collect()
}

/// Decide whether `α[θ] := e` can possibly have a solution.
pub fn occurs(alpha: MetaVar, theta: &Subst, e: &Term, meta_ctx: &Ctx) -> OccursResult {
    if !theta.is_renaming() {
        return OccursResult::No([alpha].into());
    }
    let img = image_vars(theta);
    let mut blockers = BTreeSet::new();
    for o in classify(e).occurrences {
        match &o.target {
            OccTarget::Meta(b) if *b == alpha => {
                if o.class == OccClass::StronglyRigid {
                    return OccursResult::Fail("unify.occurs", format!("{alpha} occurs in its own solution"));
                }
                blockers.insert(alpha);
            }
            OccTarget::Meta(_) => {}
            OccTarget::Var(v) => {
                if allowed_var(v, &img, meta_ctx, theta) {
                    continue;
                }
                if o.class.is_rigid() {
                    return OccursResult::Fail(
                        "unify.scope",
                        format!("the solution for {alpha} would mention `{}`, which is not in its scope", v.name),
                    );
                }
                if o.under.is_empty() {
                    blockers.insert(alpha);
                }
                blockers.extend(o.under.iter().copied());
            }
        }
    }
    if blockers.is_empty() {
        OccursResult::Ok
    } else {
        OccursResult::No(blockers)
    }
}

/// Apply θ⁻¹ to `e`. `None` when θ is not a renaming or not injective on FV(e).
pub fn invert(theta: &Subst, e: &Term) -> Option<Term> {
    if !theta.is_renaming() {
        return None;
    }
    let fv = free_vars(e);
    let mut inverse: HashMap<Var, Var> = HashMap::new();
    let mut clash = BTreeSet::new();
    for (x, t) in &theta.0 {
        let y = t.as_var()?.clone();
        if !fv.contains(&y) {
            continue;
        }
        if inverse.insert(y.clone(), x.clone()).is_some() {
            clash.insert(y);
        }
    }
    if !clash.is_empty() {
        return None;
    }
    Some(subst_apply(e, &Subst(inverse.into_iter().map(|(y, x)| (y, Term::Var(x))).collect())))
}

/// Can `drop` be removed from `ctx` without leaving a later entry or `ty` ill-scoped?
fn removable(ctx: &Ctx, drop: &BTreeSet<Var>, ty: &Term) -> bool {
    let mentions = |t: &Term| free_vars(t).iter().any(|v| drop.contains(v));
    if mentions(ty) {
        return false;
    }
    ctx.entries
        .iter()
        .filter(|e| !drop.contains(&e.var))
        .all(|e| !mentions(&e.ty) && !e.body.as_ref().is_some_and(mentions))
}

/// Replace `alpha` by a meta over a smaller context: `alpha := beta[id]`.
fn restrict(host: &mut dyn Host, alpha: MetaVar, drop: &BTreeSet<Var>) -> Option<MetaVar> {
    let entry = host.metas().get(alpha)?.clone();
    if !removable(&entry.ctx, drop, &entry.ty) {
        return None;
    }
    let mut ctx = entry.ctx.clone();
    ctx.entries.retain(|e| !drop.contains(&e.var));
    let id = ctx.identity_subst();
    let beta = host.metas_mut().fresh(ctx, entry.ty.clone(), entry.span, &entry.origin);
    let sol = Term::Meta(beta, id);
    host.metas_mut().solve(alpha, sol.clone()).ok()?;
    host.solved(alpha, &sol);
    Some(beta)
}

/// Keep only the entries on which the two substitutions agree.
pub fn same(host: &mut dyn Host, alpha: MetaVar, t1: &Subst, t2: &Subst) -> SolveResult {
    if !t1.is_renaming() || !t2.is_renaming() {
        return SolveResult::Postponed([alpha].into());
    }
    let drop: BTreeSet<Var> = t1
        .0
        .iter()
        .filter(|(x, e)| t2.get(x).and_then(Term::as_var) != e.as_var())
        .map(|(x, _)| x.clone())
        .collect();
    if drop.is_empty() {
        return SolveResult::Solved;
    }
    note(host, "same", || (format!("{alpha}"), format!("drop {} entries", drop.len())));
    match restrict(host, alpha, &drop) {
        Some(_) => SolveResult::Solved,
        None => SolveResult::Postponed([alpha].into()),
    }
}

/// Remove from metas in rigid positions of `e` the dependencies that cannot
/// be expressed in a solution for `α[θ]`. Returns `e` with the new solutions inlined.
pub fn prune(host: &mut dyn Host, theta: &Subst, e: &Term, meta_ctx: &Ctx) -> Term {
    if !theta.is_renaming() {
        return e.clone();
    }
    let img = image_vars(theta);
    let mut changed = false;
    let mut candidates = Vec::new();
    for o in classify(e).occurrences {
        if let (OccTarget::Meta(b), true) = (&o.target, o.class.is_rigid()) {
            candidates.push(*b);
        }
    }
    let mut seen = BTreeSet::new();
    for beta in candidates {
        if !seen.insert(beta) || host.metas().is_solved(beta) {
            continue;
        }
        // Each occurrence of beta in e: find its substitution.
        let mut subst_of = None;
        visit_shallow(e, &mut |t| {
            if let Term::Meta(b, tau) = t {
                if *b == beta && subst_of.is_none() {
                    subst_of = Some(tau.clone());
                }
            }
        });
        let Some(tau) = subst_of else { continue };
        let mut drop = BTreeSet::new();
        for (x, t) in &tau.0 {
            let cls = classify(t);
            let bad = |o: &Occurrence| matches!(&o.target, OccTarget::Var(v) if !allowed_var(v, &img, meta_ctx, theta));
            let rigid_bad = cls.occurrences.iter().any(|o| bad(o) && o.class.is_rigid());
            let flex_bad = cls.occurrences.iter().any(|o| bad(o) && !o.class.is_rigid());
            if rigid_bad && !flex_bad {
                drop.insert(x.clone());
            }
        }
        if drop.is_empty() {
            continue;
        }
        note(host, "prune", || (format!("{beta}"), format!("drop {} entries", drop.len())));
        if restrict(host, beta, &drop).is_some() {
            changed = true;
        }
    }
    if changed {
        zonk(e, host.metas())
    } else {
        e.clone()
    }
}

/// Try to solve `α[θ] ∼ rhs`. The unreduced right-hand side is tried first;
/// if that does not succeed the fully normalized one is, with pruning.
pub fn solve_one(host: &mut dyn Host, env: &Env, alpha: MetaVar, theta: &Subst, rhs: &Term) -> Result<SolveResult, EvalError> {
    let theta_q = quote_subst(theta, env);
    let rhs_q = quote(rhs, env);
    let first = attempt(host, alpha, &theta_q, &rhs_q, false);
    if matches!(first, SolveResult::Solved) {
        return Ok(first);
    }
    let ctx = env.ctx.as_ref();
    let mut fuel = *host.fuel();
    let theta_n = Subst(
        theta_q
            .0
            .iter()
            .map(|(x, t)| Ok((x.clone(), deep_normalize(ctx, t, host.metas(), &mut fuel)?)))
            .collect::<Result<_, EvalError>>()?,
    );
    let rhs_n = deep_normalize(ctx, &rhs_q, host.metas(), &mut fuel)?;
    *host.fuel() = fuel;
    if host.metas().is_solved(alpha) {
        // Pruning in a nested check may have solved it; let the caller retry.
        return Ok(SolveResult::Postponed([alpha].into()));
    }
    // The other side may only become α itself after reduction.
    if let Term::Meta(b, theta2) = rhs_n.strip_ann() {
        if *b == alpha {
            return Ok(same(host, alpha, &theta_n, theta2));
        }
    }
    Ok(attempt(host, alpha, &theta_n, &rhs_n, true))
}

fn attempt(host: &mut dyn Host, alpha: MetaVar, theta: &Subst, rhs: &Term, pruning: bool) -> SolveResult {
    let Some(entry) = host.metas().get(alpha).cloned() else {
        return SolveResult::Failed(Conflict {
            code: "meta.unregistered",
            message: format!("metavariable {alpha} is not registered"),
            lhs: Term::Meta(alpha, theta.clone()),
            rhs: rhs.clone(),
        });
    };
    if !theta.is_renaming() {
        return SolveResult::Postponed([alpha].into());
    }
    let rhs = if pruning { prune(host, theta, rhs, &entry.ctx) } else { rhs.clone() };
    match occurs(alpha, theta, &rhs, &entry.ctx) {
        OccursResult::Ok => {}
        OccursResult::No(bs) => return SolveResult::Postponed(bs),
        OccursResult::Fail(code, message) => {
            return SolveResult::Failed(Conflict { code, message, lhs: Term::Meta(alpha, theta.clone()), rhs })
        }
    }
    // Clause bodies are invisible to the occurs check, but a solution that
    // mentions α inside one would be cyclic.
    if metas_deep(&rhs).contains(&alpha) {
        return SolveResult::Postponed([alpha].into());
    }
    let Some(sol) = invert(theta, &rhs) else {
        return SolveResult::Postponed([alpha].into());
    };
    match host.check_solution(&entry.ctx, &sol, &entry.ty) {
        SolutionCheck::Ok => {}
        SolutionCheck::Stuck => {
            let mut bs = metas_of(&sol);
            bs.extend(metas_of(&entry.ty));
            bs.insert(alpha);
            return SolveResult::Postponed(bs);
        }
        SolutionCheck::Conflict(msg) => {
            return SolveResult::Failed(Conflict {
                code: "unify.ill-typed-solution",
                message: format!("candidate solution `{sol}` for {alpha} is ill-typed: {msg}"),
                lhs: Term::Meta(alpha, theta.clone()),
                rhs,
            })
        }
    }
    if host.metas().is_solved(alpha) {
        return SolveResult::Postponed([alpha].into());
    }
    note(host, "solve", || (format!("{alpha}"), sol.to_string()));
    host.metas_mut().solve(alpha, sol.clone()).expect("meta checked unsolved");
    host.solved(alpha, &sol);
    SolveResult::Solved
}
