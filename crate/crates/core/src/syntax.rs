//! Core terms.
//!
//! Variables are named and carry a globally unique id; two variables are the
//! same iff their ids agree. The bodies of matches and comatches are scoped
//! only over the closure parameters, the case binders and (for comatches) the
//! self variable. Substitution therefore never enters a clause body: it is
//! applied to the closure arguments instead.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, RwLock};

static NEXT_ID: AtomicU32 = AtomicU32::new(1);

pub fn fresh_id() -> u32 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Global names: types, constructors, destructors, definitions.
pub type Name = Arc<str>;

#[derive(Clone)]
pub struct Var {
    pub name: Arc<str>,
    pub id: u32,
}

impl Var {
    pub fn fresh(name: &str) -> Var {
        Var { name: Arc::from(name), id: fresh_id() }
    }

    /// Same display name, new identity.
    pub fn refresh(&self) -> Var {
        Var { name: self.name.clone(), id: fresh_id() }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Var {}
impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}
impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}
impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name, self.id)
    }
}
impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaVar(pub u32);

impl MetaVar {
    pub fn fresh() -> MetaVar {
        MetaVar(fresh_id())
    }
}
impl fmt::Debug for MetaVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}
impl fmt::Display for MetaVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    /// A match or comatch written inline.
    Local,
    /// Every call site of a top-level `def` shares the definition's label.
    Def,
    /// Every call site of a top-level `codef` shares the codefinition's label.
    Codef,
}

/// Identity of a (co)match. Unique per source position; all expansions of one
/// top-level (co)definition share it.
#[derive(Clone)]
pub struct Label {
    pub id: u32,
    pub name: Arc<str>,
    pub origin: Arc<str>,
    pub kind: LabelKind,
    /// The name a comatch uses to refer to itself inside its cocases.
    pub self_var: Var,
}

impl Label {
    pub fn new(name: &str, origin: &str, kind: LabelKind) -> Label {
        Label {
            id: fresh_id(),
            name: Arc::from(name),
            origin: Arc::from(origin),
            kind,
            self_var: Var::fresh(name),
        }
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Label {}
impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.id)
    }
}

#[derive(Clone, Debug)]
pub struct Arg {
    pub term: Term,
    pub implicit: bool,
}

impl Arg {
    pub fn explicit(term: Term) -> Arg {
        Arg { term, implicit: false }
    }
}

pub type Args = Vec<Arg>;

pub fn args_of(terms: impl IntoIterator<Item = Term>) -> Args {
    terms.into_iter().map(Arg::explicit).collect()
}

/// Closure of a (co)match: clause bodies refer to `params`, which are bound to
/// `args` (terms of the enclosing scope) when a clause fires.
#[derive(Clone, Debug, Default)]
pub struct Closure {
    pub params: Vec<Var>,
    pub args: Args,
}

impl Closure {
    pub fn identity(vars: &[Var]) -> Closure {
        Closure {
            params: vars.to_vec(),
            args: vars.iter().map(|v| Arg::explicit(Term::Var(v.clone()))).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.params
            .iter()
            .zip(&self.args)
            .all(|(p, a)| matches!(&a.term, Term::Var(v) if v == p))
    }

    pub fn as_subst(&self) -> Subst {
        Subst(
            self.params
                .iter()
                .cloned()
                .zip(self.args.iter().map(|a| a.term.clone()))
                .collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct Binder {
    pub var: Var,
    pub implicit: bool,
}

#[derive(Clone, Debug)]
pub enum Body {
    Expr(Term),
    Absurd,
}

#[derive(Clone, Debug)]
pub struct Case {
    pub ctor: Name,
    pub binders: Vec<Binder>,
    pub body: Body,
}

#[derive(Clone, Debug)]
pub struct Cocase {
    pub dtor: Name,
    pub binders: Vec<Binder>,
    pub body: Body,
}

/// Shared, replaceable clause list. Top-level (co)definitions hand the same
/// cell to every call site so recursive calls need no unfolding at desugar time;
/// the type checker swaps in the elaborated clauses once the definition is checked.
pub struct Clauses<C>(Arc<RwLock<Arc<Vec<C>>>>);

impl<C> Clone for Clauses<C> {
    fn clone(&self) -> Self {
        Clauses(self.0.clone())
    }
}

impl<C> Clauses<C> {
    pub fn new(items: Vec<C>) -> Self {
        Clauses(Arc::new(RwLock::new(Arc::new(items))))
    }

    pub fn get(&self) -> Arc<Vec<C>> {
        self.0.read().expect("clause cell poisoned").clone()
    }

    pub fn set(&self, items: Vec<C>) {
        *self.0.write().expect("clause cell poisoned") = Arc::new(items);
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl<C> fmt::Debug for Clauses<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} clauses>", self.get().len())
    }
}

#[derive(Clone, Debug)]
pub struct MatchTerm {
    pub scrutinee: Term,
    pub label: Label,
    pub closure: Closure,
    pub motive_binder: Var,
    pub motive: Option<Term>,
    pub cases: Clauses<Case>,
}

#[derive(Clone, Debug)]
pub struct ComatchTerm {
    pub label: Label,
    pub closure: Closure,
    pub cocases: Clauses<Cocase>,
}

#[derive(Clone, Debug)]
pub struct LetTerm {
    pub var: Var,
    pub ty: Term,
    pub bound: Term,
    pub body: Term,
}

#[derive(Clone, Debug)]
pub enum Term {
    Var(Var),
    Ann(Arc<Term>, Arc<Term>),
    Let(Arc<LetTerm>),
    Type,
    TyCtor(Name, Args),
    Ctor(Name, Args),
    Match(Arc<MatchTerm>),
    Dtor(Arc<Term>, Name, Args),
    Comatch(Arc<ComatchTerm>),
    Meta(MetaVar, Subst),
}

/// Context substitution: an ordered map from variables to terms.
#[derive(Clone, Debug, Default)]
pub struct Subst(pub Vec<(Var, Term)>);

impl Subst {
    pub fn empty() -> Subst {
        Subst(Vec::new())
    }

    pub fn single(v: Var, t: Term) -> Subst {
        Subst(vec![(v, t)])
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.0.iter().rev().find(|(x, _)| x == v).map(|(_, t)| t)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.0.iter().map(|(v, _)| v)
    }

    /// Every image is a plain variable.
    pub fn is_renaming(&self) -> bool {
        self.0.iter().all(|(_, t)| matches!(t, Term::Var(_)))
    }

    /// `self` followed by `other`: applying the result equals applying `self`
    /// and then `other`.
    pub fn then(&self, other: &Subst) -> Subst {
        let mut out: Vec<(Var, Term)> =
            self.0.iter().map(|(v, t)| (v.clone(), subst_apply(t, other))).collect();
        for (v, t) in &other.0 {
            if self.get(v).is_none() {
                out.push((v.clone(), t.clone()));
            }
        }
        Subst(out)
    }

    pub fn without(&self, v: &Var) -> Subst {
        Subst(self.0.iter().filter(|(x, _)| x != v).cloned().collect())
    }
}

impl Term {
    pub fn var(v: &Var) -> Term {
        Term::Var(v.clone())
    }

    pub fn ann(e: Term, t: Term) -> Term {
        Term::Ann(Arc::new(e), Arc::new(t))
    }

    pub fn dtor(e: Term, name: &str, args: Args) -> Term {
        Term::Dtor(Arc::new(e), Arc::from(name), args)
    }

    pub fn ctor(name: &str, args: Args) -> Term {
        Term::Ctor(Arc::from(name), args)
    }

    pub fn tyctor(name: &str, args: Args) -> Term {
        Term::TyCtor(Arc::from(name), args)
    }

    pub fn let_(var: Var, ty: Term, bound: Term, body: Term) -> Term {
        Term::Let(Arc::new(LetTerm { var, ty, bound, body }))
    }

    /// Look through type annotations.
    pub fn strip_ann(&self) -> &Term {
        let mut t = self;
        while let Term::Ann(e, _) = t {
            t = e;
        }
        t
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self.strip_ann() {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

/// Apply a substitution. Clause bodies are never entered; closures, motives,
/// scrutinees and delayed substitutions of metas are.
pub fn subst_apply(t: &Term, s: &Subst) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Ann(e, ty) => Term::ann(subst_apply(e, s), subst_apply(ty, s)),
        Term::Let(l) => {
            let ty = subst_apply(&l.ty, s);
            let bound = subst_apply(&l.bound, s);
            let (var, body) = under_binder(&l.var, &l.body, s);
            Term::let_(var, ty, bound, body)
        }
        Term::Type => Term::Type,
        Term::TyCtor(n, args) => Term::TyCtor(n.clone(), subst_args(args, s)),
        Term::Ctor(n, args) => Term::Ctor(n.clone(), subst_args(args, s)),
        Term::Dtor(e, n, args) => Term::Dtor(Arc::new(subst_apply(e, s)), n.clone(), subst_args(args, s)),
        Term::Match(m) => {
            let (motive_binder, motive) = match &m.motive {
                Some(mt) => {
                    let (b, body) = under_binder(&m.motive_binder, mt, s);
                    (b, Some(body))
                }
                None => (m.motive_binder.clone(), None),
            };
            Term::Match(Arc::new(MatchTerm {
                scrutinee: subst_apply(&m.scrutinee, s),
                label: m.label.clone(),
                closure: subst_closure(&m.closure, s),
                motive_binder,
                motive,
                cases: m.cases.clone(),
            }))
        }
        Term::Comatch(c) => Term::Comatch(Arc::new(ComatchTerm {
            label: c.label.clone(),
            closure: subst_closure(&c.closure, s),
            cocases: c.cocases.clone(),
        })),
        Term::Meta(a, d) => Term::Meta(
            *a,
            Subst(d.0.iter().map(|(v, e)| (v.clone(), subst_apply(e, s))).collect()),
        ),
    }
}

pub fn subst_args(args: &Args, s: &Subst) -> Args {
    args.iter()
        .map(|a| Arg { term: subst_apply(&a.term, s), implicit: a.implicit })
        .collect()
}

pub fn subst_closure(c: &Closure, s: &Subst) -> Closure {
    Closure { params: c.params.clone(), args: subst_args(&c.args, s) }
}

fn under_binder(x: &Var, body: &Term, s: &Subst) -> (Var, Term) {
    let inner = s.without(x);
    let captures = inner.0.iter().any(|(_, t)| free_vars(t).contains(x));
    if captures {
        let x2 = x.refresh();
        let renamed = subst_apply(body, &Subst::single(x.clone(), Term::Var(x2.clone())));
        (x2, subst_apply(&renamed, &inner))
    } else {
        (x.clone(), subst_apply(body, &inner))
    }
}

/// Free variables. Clause bodies contribute only through their closures.
pub fn free_vars(t: &Term) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    fv_into(t, &mut out);
    out
}

pub fn free_vars_args(args: &Args) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    for a in args {
        fv_into(&a.term, &mut out);
    }
    out
}

fn fv_into(t: &Term, out: &mut BTreeSet<Var>) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::Ann(e, ty) => {
            fv_into(e, out);
            fv_into(ty, out);
        }
        Term::Let(l) => {
            fv_into(&l.ty, out);
            fv_into(&l.bound, out);
            let mut inner = BTreeSet::new();
            fv_into(&l.body, &mut inner);
            inner.remove(&l.var);
            out.extend(inner);
        }
        Term::Type => {}
        Term::TyCtor(_, args) | Term::Ctor(_, args) => {
            for a in args {
                fv_into(&a.term, out);
            }
        }
        Term::Dtor(e, _, args) => {
            fv_into(e, out);
            for a in args {
                fv_into(&a.term, out);
            }
        }
        Term::Match(m) => {
            fv_into(&m.scrutinee, out);
            for a in &m.closure.args {
                fv_into(&a.term, out);
            }
            if let Some(mt) = &m.motive {
                let mut inner = BTreeSet::new();
                fv_into(mt, &mut inner);
                inner.remove(&m.motive_binder);
                out.extend(inner);
            }
        }
        Term::Comatch(c) => {
            for a in &c.closure.args {
                fv_into(&a.term, out);
            }
        }
        Term::Meta(_, d) => {
            for (_, e) in &d.0 {
                fv_into(e, out);
            }
        }
    }
}

/// Metavariables mentioned outside clause bodies.
pub fn metas_of(t: &Term) -> BTreeSet<MetaVar> {
    let mut out = BTreeSet::new();
    visit_shallow(t, &mut |t| {
        if let Term::Meta(a, _) = t {
            out.insert(*a);
        }
    });
    out
}

/// Pre-order traversal that does not enter clause bodies.
pub fn visit_shallow(t: &Term, f: &mut dyn FnMut(&Term)) {
    f(t);
    match t {
        Term::Var(_) | Term::Type => {}
        Term::Ann(e, ty) => {
            visit_shallow(e, f);
            visit_shallow(ty, f);
        }
        Term::Let(l) => {
            visit_shallow(&l.ty, f);
            visit_shallow(&l.bound, f);
            visit_shallow(&l.body, f);
        }
        Term::TyCtor(_, args) | Term::Ctor(_, args) => args.iter().for_each(|a| visit_shallow(&a.term, f)),
        Term::Dtor(e, _, args) => {
            visit_shallow(e, f);
            args.iter().for_each(|a| visit_shallow(&a.term, f));
        }
        Term::Match(m) => {
            visit_shallow(&m.scrutinee, f);
            m.closure.args.iter().for_each(|a| visit_shallow(&a.term, f));
            if let Some(mt) = &m.motive {
                visit_shallow(mt, f);
            }
        }
        Term::Comatch(c) => c.closure.args.iter().for_each(|a| visit_shallow(&a.term, f)),
        Term::Meta(_, d) => d.0.iter().for_each(|(_, e)| visit_shallow(e, f)),
    }
}

/// How labels are compared by [`alpha_eq_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Labels are equal iff they are the same label.
    Identity,
    /// Local labels are identified by a bijection built during the comparison;
    /// top-level labels compare by name. Used to compare two independent
    /// desugarings of the same source.
    Positional,
}

pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha_eq_with(a, b, LabelMode::Identity)
}

pub fn alpha_eq_with(a: &Term, b: &Term, mode: LabelMode) -> bool {
    Alpha { vars: HashMap::new(), labels: HashMap::new(), rev_labels: HashMap::new(), mode, seen: HashSet::new() }
        .term(a, b)
}

/// Like [`alpha_eq_with`], with the free variables in `pairs` (left, right)
/// identified. Clause bodies see the correspondence too.
pub fn alpha_eq_under(a: &Term, b: &Term, mode: LabelMode, pairs: &[(Var, Var)]) -> bool {
    let vars = pairs.iter().map(|(x, y)| (x.id, y.id)).collect();
    Alpha { vars, labels: HashMap::new(), rev_labels: HashMap::new(), mode, seen: HashSet::new() }.term(a, b)
}

pub fn alpha_eq_args(a: &Args, b: &Args) -> bool {
    let mut al = Alpha {
        vars: HashMap::new(),
        labels: HashMap::new(),
        rev_labels: HashMap::new(),
        mode: LabelMode::Identity,
        seen: HashSet::new(),
    };
    al.args(a, b)
}

struct Alpha {
    /// Bound variables: left id -> right id.
    vars: HashMap<u32, u32>,
    labels: HashMap<u32, u32>,
    rev_labels: HashMap<u32, u32>,
    mode: LabelMode,
    /// Label pairs whose clause bodies were already compared (positional mode).
    seen: HashSet<(u32, u32)>,
}

impl Alpha {
    fn var(&self, x: &Var, y: &Var) -> bool {
        match self.vars.get(&x.id) {
            Some(id) => *id == y.id,
            None => x == y && !self.vars.values().any(|id| *id == y.id),
        }
    }

    fn bind<R>(&mut self, x: &Var, y: &Var, f: impl FnOnce(&mut Self) -> R) -> R {
        let old = self.vars.insert(x.id, y.id);
        let r = f(self);
        match old {
            Some(o) => self.vars.insert(x.id, o),
            None => self.vars.remove(&x.id),
        };
        r
    }

    fn label(&mut self, l: &Label, r: &Label) -> bool {
        match self.mode {
            LabelMode::Identity => l == r,
            LabelMode::Positional => {
                if l.kind != r.kind {
                    return false;
                }
                if l.kind != LabelKind::Local {
                    return l.name == r.name;
                }
                match (self.labels.get(&l.id), self.rev_labels.get(&r.id)) {
                    (Some(x), Some(y)) => *x == r.id && *y == l.id,
                    (None, None) => {
                        self.labels.insert(l.id, r.id);
                        self.rev_labels.insert(r.id, l.id);
                        true
                    }
                    _ => false,
                }
            }
        }
    }

    fn args(&mut self, a: &Args, b: &Args) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.term(&x.term, &y.term))
    }

    fn term(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => self.var(x, y),
            (Term::Ann(e1, t1), Term::Ann(e2, t2)) => self.term(e1, e2) && self.term(t1, t2),
            (Term::Let(l1), Term::Let(l2)) => {
                self.term(&l1.ty, &l2.ty)
                    && self.term(&l1.bound, &l2.bound)
                    && self.bind(&l1.var, &l2.var, |s| s.term(&l1.body, &l2.body))
            }
            (Term::Type, Term::Type) => true,
            (Term::TyCtor(n1, a1), Term::TyCtor(n2, a2)) | (Term::Ctor(n1, a1), Term::Ctor(n2, a2)) => {
                n1 == n2 && self.args(a1, a2)
            }
            (Term::Dtor(e1, n1, a1), Term::Dtor(e2, n2, a2)) => n1 == n2 && self.term(e1, e2) && self.args(a1, a2),
            (Term::Match(m1), Term::Match(m2)) => {
                if !(self.label(&m1.label, &m2.label)
                    && self.term(&m1.scrutinee, &m2.scrutinee)
                    && self.args(&m1.closure.args, &m2.closure.args))
                {
                    return false;
                }
                let motives = match (&m1.motive, &m2.motive) {
                    (None, None) => true,
                    (Some(t1), Some(t2)) => self.bind(&m1.motive_binder, &m2.motive_binder, |s| s.term(t1, t2)),
                    _ => false,
                };
                motives && self.cases_positional(m1, m2)
            }
            (Term::Comatch(c1), Term::Comatch(c2)) => {
                self.label(&c1.label, &c2.label)
                    && self.args(&c1.closure.args, &c2.closure.args)
                    && self.cocases_positional(c1, c2)
            }
            (Term::Meta(a1, d1), Term::Meta(a2, d2)) => {
                a1 == a2
                    && d1.len() == d2.len()
                    && d1.0.iter().zip(&d2.0).all(|((x1, e1), (x2, e2))| x1 == x2 && self.term(e1, e2))
            }
            _ => false,
        }
    }

    // With identical labels the clauses are the same by construction. In
    // positional mode two distinct desugarings are compared, so local bodies
    // are compared structurally, with closure parameters identified.
    fn cases_positional(&mut self, m1: &MatchTerm, m2: &MatchTerm) -> bool {
        if self.mode == LabelMode::Identity || m1.label.kind != LabelKind::Local {
            return true;
        }
        if !self.seen.insert((m1.label.id, m2.label.id)) {
            return true;
        }
        let (c1, c2) = (m1.cases.get(), m2.cases.get());
        if c1.len() != c2.len() || m1.closure.params.len() != m2.closure.params.len() {
            return false;
        }
        let saved = self.vars.clone();
        for (p, q) in m1.closure.params.iter().zip(&m2.closure.params) {
            self.vars.insert(p.id, q.id);
        }
        let ok = c1.iter().zip(c2.iter()).all(|(a, b)| {
            a.ctor == b.ctor && self.clause(&a.binders, &a.body, &b.binders, &b.body)
        });
        self.vars = saved;
        ok
    }

    fn cocases_positional(&mut self, c1: &ComatchTerm, c2: &ComatchTerm) -> bool {
        if self.mode == LabelMode::Identity || c1.label.kind != LabelKind::Local {
            return true;
        }
        if !self.seen.insert((c1.label.id, c2.label.id)) {
            return true;
        }
        let (k1, k2) = (c1.cocases.get(), c2.cocases.get());
        if k1.len() != k2.len() || c1.closure.params.len() != c2.closure.params.len() {
            return false;
        }
        let saved = self.vars.clone();
        for (p, q) in c1.closure.params.iter().zip(&c2.closure.params) {
            self.vars.insert(p.id, q.id);
        }
        self.vars.insert(c1.label.self_var.id, c2.label.self_var.id);
        let ok = k1.iter().zip(k2.iter()).all(|(a, b)| {
            a.dtor == b.dtor && self.clause(&a.binders, &a.body, &b.binders, &b.body)
        });
        self.vars = saved;
        ok
    }

    fn clause(&mut self, b1: &[Binder], e1: &Body, b2: &[Binder], e2: &Body) -> bool {
        if b1.len() != b2.len() {
            return false;
        }
        let saved = self.vars.clone();
        for (x, y) in b1.iter().zip(b2) {
            self.vars.insert(x.var.id, y.var.id);
        }
        let ok = match (e1, e2) {
            (Body::Absurd, Body::Absurd) => true,
            (Body::Expr(a), Body::Expr(b)) => self.term(a, b),
            _ => false,
        };
        self.vars = saved;
        ok
    }
}
