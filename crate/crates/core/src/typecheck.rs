//! Bidirectional type checking and elaboration of whole programs.
//!
//! Signatures (type indices, constructor and destructor telescopes, headers of
//! definitions and let types) are checked on demand, so a declaration may
//! refer to one that appears later in the file. Bodies are then checked in
//! source order. Each signature item and each body is a metavariable scope:
//! when it ends, every metavariable created inside must be solved and every
//! postponed constraint discharged.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::decl::*;
use crate::eval::{normalize, EvalError, Fuel, DEFAULT_FUEL};
use crate::index_unify::{IdxResult, IdxUnify};
use crate::meta::{zonk, zonk_args, zonk_cases, zonk_cocases, MetaMap};
use crate::pretty::Printer;
use crate::syntax::*;
use crate::unifier::{Constraint, Host, Outcome, SolutionCheck, TraceEvent, Unifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub code: &'static str,
    pub message: String,
    pub notes: Vec<String>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Error, span: Span::default(), code, message: message.into(), notes: Vec::new() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Diagnostic {
        self.notes.push(note.into());
        self
    }

    fn at(mut self, span: Span) -> Diagnostic {
        if self.span == Span::default() {
            self.span = span;
        }
        self
    }
}

impl From<EvalError> for Diagnostic {
    fn from(e: EvalError) -> Diagnostic {
        let code = match e {
            EvalError::FuelExhausted(_) => "eval.fuel",
            EvalError::StuckAbsurd { .. } => "eval.absurd",
            EvalError::MissingCase { .. } => "eval.missing-case",
        };
        Diagnostic::error(code, e.to_string())
    }
}

pub type TcResult<T> = Result<T, Diagnostic>;

#[derive(Debug, Clone)]
pub struct Options {
    pub fuel: u64,
    /// Record the rule trace of conversion checking.
    pub trace_conv: bool,
    /// Record the rule trace of index unification.
    pub trace_unify: bool,
    /// Record every conversion problem and every solution.
    pub log_constraints: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { fuel: DEFAULT_FUEL, trace_conv: false, trace_unify: false, log_constraints: false }
    }
}

/// Where a desugared hole came from.
pub type MetaOrigins = HashMap<MetaVar, (Span, String)>;

/// Conversion problems and solutions seen while checking.
#[derive(Debug, Clone, Default)]
pub struct ConstraintLog {
    pub problems: Vec<(Ctx, Term, Term)>,
    pub solved: Vec<MetaVar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Item {
    Type(usize),
    Ctor(usize, usize),
    Dtor(usize, usize),
    Def(usize),
    Codef(usize),
    LetType(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    InProgress,
    Checked,
    Failed,
}

struct Scope {
    unifier: Unifier,
    first_meta: usize,
}

pub struct Checker {
    pub prog: Program,
    pub metas: MetaMap,
    /// Top-level lets checked so far, as definitions.
    pub globals: Ctx,
    global_ids: HashSet<u32>,
    pub diagnostics: Vec<Diagnostic>,
    pub unify_trace: Vec<String>,
    pub conv_trace: Vec<TraceEvent>,
    pub log: ConstraintLog,
    opts: Options,
    origins: MetaOrigins,
    status: HashMap<Item, Status>,
    scopes: Vec<Scope>,
    fuel: Fuel,
    span: Span,
}

/// How the expected type of a case body is obtained from the constructor term.
enum Target {
    Fixed(Term),
    Motive { binder: Var, ty: Term },
}

impl Target {
    fn at(&self, ctor_term: &Term) -> Term {
        match self {
            Target::Fixed(t) => t.clone(),
            Target::Motive { binder, ty } => subst_apply(ty, &Subst::single(binder.clone(), ctor_term.clone())),
        }
    }
}

impl Checker {
    pub fn new(prog: Program, origins: MetaOrigins, opts: Options) -> Checker {
        let fuel = Fuel::new(opts.fuel);
        Checker {
            prog,
            metas: MetaMap::new(),
            globals: Ctx::new(),
            global_ids: HashSet::new(),
            diagnostics: Vec::new(),
            unify_trace: Vec::new(),
            conv_trace: Vec::new(),
            log: ConstraintLog::default(),
            opts,
            origins,
            status: HashMap::new(),
            scopes: Vec::new(),
            fuel,
            span: Span::default(),
        }
    }

    pub fn options(&self) -> &Options {
        &self.opts
    }

    pub fn fresh_fuel(&self) -> Fuel {
        Fuel::new(self.opts.fuel)
    }

    /// Check every declaration in order. Diagnostics accumulate; a failing
    /// declaration does not stop the others.
    pub fn check_program(&mut self) {
        for idx in 0..self.prog.decls.len() {
            self.span = self.prog.decls[idx].span();
            if let Err(d) = self.check_decl(idx) {
                let d = d.at(self.prog.decls[idx].span());
                self.diagnostics.push(d);
                self.scopes.clear();
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.diagnostics.iter().all(|d| d.severity != Severity::Error)
    }

    fn items_of(&self, idx: usize) -> Vec<Item> {
        match &self.prog.decls[idx] {
            Decl::Data(d) => std::iter::once(Item::Type(idx)).chain((0..d.ctors.len()).map(|i| Item::Ctor(idx, i))).collect(),
            Decl::Codata(d) => std::iter::once(Item::Type(idx)).chain((0..d.dtors.len()).map(|i| Item::Dtor(idx, i))).collect(),
            Decl::Def(_) => vec![Item::Def(idx)],
            Decl::Codef(_) => vec![Item::Codef(idx)],
            Decl::Let(_) => vec![Item::LetType(idx)],
        }
    }

    fn check_decl(&mut self, idx: usize) -> TcResult<()> {
        for item in self.items_of(idx) {
            self.ensure(item)?;
        }
        match self.prog.decls[idx].clone() {
            Decl::Data(_) | Decl::Codata(_) => Ok(()),
            Decl::Def(df) => self.check_def_body(&df),
            Decl::Codef(cf) => self.check_codef_body(&cf),
            Decl::Let(l) => {
                self.begin_scope();
                let body = self.check(&self.globals.clone(), &l.body, &l.ty)?;
                self.end_scope()?;
                let body = self.finish(&body);
                let new = LetDecl { var: l.var.clone(), ty: l.ty.clone(), body: body.clone(), span: l.span };
                self.prog.replace(idx, Decl::Let(Arc::new(new)));
                self.globals.push_def(l.var.clone(), l.ty.clone(), body);
                self.global_ids.insert(l.var.id);
                Ok(())
            }
        }
    }

    // -----------------------------------------------------------------------
    // Scopes

    fn begin_scope(&mut self) {
        self.scopes.push(Scope { unifier: Unifier::new(), first_meta: self.metas.mark() });
    }

    fn run_scope(&mut self) -> TcResult<Outcome> {
        let mut u = std::mem::take(&mut self.scopes.last_mut().expect("no scope").unifier);
        let out = u.run(self);
        self.scopes.last_mut().expect("no scope").unifier = u;
        Ok(out?)
    }

    /// Close the innermost scope: discharge constraints, then require every
    /// meta created in it to be solved.
    fn end_scope(&mut self) -> TcResult<()> {
        let out = self.run_scope();
        let scope = self.scopes.pop().expect("no scope");
        let out = out?;
        let unsolved: Vec<MetaVar> = self
            .metas
            .registered_since(scope.first_meta)
            .iter()
            .copied()
            .filter(|a| !self.metas.is_solved(*a))
            .collect();
        let pending: Vec<String> = match &out {
            Outcome::Stuck(cs) => cs.iter().map(|c| self.show_constraint(c)).collect(),
            _ => Vec::new(),
        };
        if let Outcome::Conflict(c) = out {
            return Err(Diagnostic::error(c.code, c.message));
        }
        if let Some(first) = unsolved.first() {
            let entry = self.metas.get(*first).expect("registered");
            let mut d = Diagnostic::error(
                "meta.unsolved",
                format!("could not infer {} (of type `{}`)", entry.origin, zonk(&entry.ty, &self.metas)),
            )
            .at(entry.span);
            for a in &unsolved[1..] {
                let e = self.metas.get(*a).expect("registered");
                d = d.with_note(format!("also unsolved: {}", e.origin));
            }
            for p in pending {
                d = d.with_note(format!("pending constraint: {p}"));
            }
            return Err(d);
        }
        if !pending.is_empty() {
            let mut d = Diagnostic::error("constraints.unsolved", "could not solve all constraints");
            for p in pending {
                d = d.with_note(format!("pending constraint: {p}"));
            }
            return Err(d);
        }
        Ok(())
    }

    fn show_constraint(&self, c: &Constraint) -> String {
        let (l, r) = c.quoted();
        let mut p = Printer::new();
        let l = p.term(&zonk(&l, &self.metas));
        let r = p.term(&zonk(&r, &self.metas));
        format!("{l} = {r}")
    }

    /// Inline solutions and trim closures to the variables their clauses use.
    pub fn finish(&self, t: &Term) -> Term {
        narrow_closures(&zonk(t, &self.metas))
    }

    fn finish_args(&self, a: &Args) -> Args {
        zonk_args(a, &self.metas).iter().map(|x| Arg { term: narrow_closures(&x.term), implicit: x.implicit }).collect()
    }

    fn finish_tele(&self, t: &Telescope) -> Telescope {
        Telescope(
            t.0.iter()
                .map(|p| Param { var: p.var.clone(), ty: self.finish(&p.ty), implicit: p.implicit })
                .collect(),
        )
    }

    // -----------------------------------------------------------------------
    // Signatures

    fn ensure(&mut self, item: Item) -> TcResult<()> {
        match self.status.get(&item) {
            Some(Status::Checked) => return Ok(()),
            Some(Status::Failed) => {
                return Err(Diagnostic::error(
                    "decl.dependency",
                    format!("depends on the ill-formed declaration `{}`", self.item_name(item)),
                ))
            }
            Some(Status::InProgress) => {
                return Err(Diagnostic::error(
                    "sig.cycle",
                    format!("the signature of `{}` depends on itself", self.item_name(item)),
                ))
            }
            None => {}
        }
        self.status.insert(item, Status::InProgress);
        let saved_span = self.span;
        let saved_scopes = std::mem::take(&mut self.scopes);
        self.begin_scope();
        let r = self.check_item(item);
        let r = r.and_then(|()| self.end_scope());
        self.scopes = saved_scopes;
        self.span = saved_span;
        match r {
            Ok(()) => {
                self.finish_item(item);
                self.status.insert(item, Status::Checked);
                Ok(())
            }
            Err(d) => {
                self.status.insert(item, Status::Failed);
                let span = self.prog.decls[item_decl(item)].span();
                Err(d.at(span).with_note(format!("while checking the signature of `{}`", self.item_name(item))))
            }
        }
    }

    fn item_name(&self, item: Item) -> String {
        match (item, &self.prog.decls[item_decl(item)]) {
            (Item::Ctor(_, i), Decl::Data(d)) => d.ctors[i].name.to_string(),
            (Item::Dtor(_, i), Decl::Codata(d)) => d.dtors[i].name.to_string(),
            (_, d) => d.name().to_string(),
        }
    }

    fn ensure_type(&mut self, name: &str) -> TcResult<usize> {
        let idx = self
            .prog
            .type_index(name)
            .ok_or_else(|| Diagnostic::error("name.unknown", format!("unknown type `{name}`")))?;
        self.ensure(Item::Type(idx))?;
        Ok(idx)
    }

    fn ctor_sig(&mut self, name: &str) -> TcResult<(Arc<DataDecl>, Ctor)> {
        let (d, i) = self
            .prog
            .ctor_location(name)
            .ok_or_else(|| Diagnostic::error("name.unknown", format!("unknown constructor `{name}`")))?;
        self.ensure(Item::Type(d))?;
        self.ensure(Item::Ctor(d, i))?;
        let (dd, c) = self.prog.ctor(name).expect("located");
        Ok((dd.clone(), c.clone()))
    }

    fn dtor_sig(&mut self, name: &str) -> TcResult<(Arc<CodataDecl>, Dtor)> {
        let (d, i) = self
            .prog
            .dtor_location(name)
            .ok_or_else(|| Diagnostic::error("name.unknown", format!("unknown destructor `{name}`")))?;
        self.ensure(Item::Type(d))?;
        self.ensure(Item::Dtor(d, i))?;
        let (cd, x) = self.prog.dtor(name).expect("located");
        Ok((cd.clone(), x.clone()))
    }

    fn check_item(&mut self, item: Item) -> TcResult<()> {
        let ctx = self.globals.clone();
        match item {
            Item::Type(idx) => {
                let tele = self.prog.type_indices_at(idx).clone();
                let (tele, _) = self.check_tele(&ctx, &tele)?;
                self.store_indices(idx, tele);
            }
            Item::Ctor(idx, i) => {
                let Decl::Data(dd) = self.prog.decls[idx].clone() else { unreachable!() };
                let c = &dd.ctors[i];
                self.span = c.span;
                let (params, inner) = self.check_tele(&ctx, &c.params)?;
                let result_args = self.check_args(&inner, &c.result_args, &dd.indices)?;
                let mut new = (*dd).clone();
                new.ctors[i] = Ctor { params, result_args, ..c.clone() };
                self.prog.replace(idx, Decl::Data(Arc::new(new)));
            }
            Item::Dtor(idx, i) => {
                let Decl::Codata(cd) = self.prog.decls[idx].clone() else { unreachable!() };
                let x = &cd.dtors[i];
                self.span = x.span;
                let (params, inner) = self.check_tele(&ctx, &x.params)?;
                let self_args = self.check_args(&inner, &x.self_args, &cd.indices)?;
                let self_ty = Term::TyCtor(cd.name.clone(), self_args.clone());
                let ret = self.check(&inner.extended(x.self_var.clone(), self_ty), &x.ret, &Term::Type)?;
                let mut new = (*cd).clone();
                new.dtors[i] = Dtor { params, self_args, ret, ..x.clone() };
                self.prog.replace(idx, Decl::Codata(Arc::new(new)));
            }
            Item::Def(idx) => {
                let Decl::Def(df) = self.prog.decls[idx].clone() else { unreachable!() };
                let t = self.ensure_type(&df.self_type)?;
                if self.prog.type_kind(&df.self_type) != Some(TypeKind::Data) {
                    return Err(Diagnostic::error(
                        "type.not-data",
                        format!("`{}` is defined on `{}`, which is not a data type", df.name, df.self_type),
                    ));
                }
                let indices = self.prog.type_indices_at(t).clone();
                let (params, inner) = self.check_tele(&ctx, &df.params)?;
                let self_args = self.check_args(&inner, &df.self_args, &indices)?;
                let self_ty = Term::TyCtor(df.self_type.clone(), self_args.clone());
                let ret = self.check(&inner.extended(df.self_var.clone(), self_ty), &df.ret, &Term::Type)?;
                let new = DefDecl { params, self_args, ret, ..(*df).clone() };
                self.prog.replace(idx, Decl::Def(Arc::new(new)));
            }
            Item::Codef(idx) => {
                let Decl::Codef(cf) = self.prog.decls[idx].clone() else { unreachable!() };
                let t = self.ensure_type(&cf.ty_name)?;
                if self.prog.type_kind(&cf.ty_name) != Some(TypeKind::Codata) {
                    return Err(Diagnostic::error(
                        "type.not-codata",
                        format!("`{}` builds a `{}`, which is not a codata type", cf.name, cf.ty_name),
                    ));
                }
                let indices = self.prog.type_indices_at(t).clone();
                let (params, inner) = self.check_tele(&ctx, &cf.params)?;
                let ty_args = self.check_args(&inner, &cf.ty_args, &indices)?;
                let new = CodefDecl { params, ty_args, ..(*cf).clone() };
                self.prog.replace(idx, Decl::Codef(Arc::new(new)));
            }
            Item::LetType(idx) => {
                let Decl::Let(l) = self.prog.decls[idx].clone() else { unreachable!() };
                let ty = self.check(&ctx, &l.ty, &Term::Type)?;
                let new = LetDecl { ty, ..(*l).clone() };
                self.prog.replace(idx, Decl::Let(Arc::new(new)));
            }
        }
        Ok(())
    }

    fn store_indices(&mut self, idx: usize, tele: Telescope) {
        match self.prog.decls[idx].clone() {
            Decl::Data(d) => {
                let new = DataDecl { indices: tele, ..(*d).clone() };
                self.prog.replace(idx, Decl::Data(Arc::new(new)));
            }
            Decl::Codata(d) => {
                let new = CodataDecl { indices: tele, ..(*d).clone() };
                self.prog.replace(idx, Decl::Codata(Arc::new(new)));
            }
            _ => unreachable!("type item on a non-type declaration"),
        }
    }

    /// Inline the solutions found while checking a signature item.
    fn finish_item(&mut self, item: Item) {
        let idx = item_decl(item);
        let d = match self.prog.decls[idx].clone() {
            Decl::Data(d) => {
                let mut new = (*d).clone();
                match item {
                    Item::Type(_) => new.indices = self.finish_tele(&d.indices),
                    Item::Ctor(_, i) => {
                        let c = &d.ctors[i];
                        new.ctors[i] = Ctor {
                            params: self.finish_tele(&c.params),
                            result_args: self.finish_args(&c.result_args),
                            ..c.clone()
                        };
                    }
                    _ => unreachable!(),
                }
                Decl::Data(Arc::new(new))
            }
            Decl::Codata(d) => {
                let mut new = (*d).clone();
                match item {
                    Item::Type(_) => new.indices = self.finish_tele(&d.indices),
                    Item::Dtor(_, i) => {
                        let x = &d.dtors[i];
                        new.dtors[i] = Dtor {
                            params: self.finish_tele(&x.params),
                            self_args: self.finish_args(&x.self_args),
                            ret: self.finish(&x.ret),
                            ..x.clone()
                        };
                    }
                    _ => unreachable!(),
                }
                Decl::Codata(Arc::new(new))
            }
            Decl::Def(d) => Decl::Def(Arc::new(DefDecl {
                params: self.finish_tele(&d.params),
                self_args: self.finish_args(&d.self_args),
                ret: self.finish(&d.ret),
                ..(*d).clone()
            })),
            Decl::Codef(d) => Decl::Codef(Arc::new(CodefDecl {
                params: self.finish_tele(&d.params),
                ty_args: self.finish_args(&d.ty_args),
                ..(*d).clone()
            })),
            Decl::Let(d) => Decl::Let(Arc::new(LetDecl { ty: self.finish(&d.ty), ..(*d).clone() })),
        };
        self.prog.replace(idx, d);
    }

    // -----------------------------------------------------------------------
    // Bodies of top-level definitions

    fn check_def_body(&mut self, df: &Arc<DefDecl>) -> TcResult<()> {
        let df = self.prog.def(&df.name).expect("declared").clone();
        self.span = df.span;
        let mut ctx = self.globals.clone();
        ctx.push_tele(&df.params);
        let data = self.prog.data(&df.self_type).expect("checked in the header").clone();
        self.begin_scope();
        let target = Target::Motive { binder: df.self_var.clone(), ty: df.ret.clone() };
        let cases = self.check_cases(&ctx, &data, &df.self_args, &df.cases.get(), &target, &df.label)?;
        self.end_scope()?;
        let cases = zonk_cases(&cases, &self.metas);
        df.cases.set(cases.into_iter().map(|c| Case { body: narrow_body(&c.body), ..c }).collect());
        Ok(())
    }

    fn check_codef_body(&mut self, cf: &Arc<CodefDecl>) -> TcResult<()> {
        let cf = self.prog.codef(&cf.name).expect("declared").clone();
        self.span = cf.span;
        let mut ctx = self.globals.clone();
        ctx.push_tele(&cf.params);
        let codata = self.prog.codata(&cf.ty_name).expect("checked in the header").clone();
        let node = Term::Comatch(Arc::new(ComatchTerm {
            label: cf.label.clone(),
            closure: Closure::identity(&cf.params.vars()),
            cocases: cf.cocases.clone(),
        }));
        let self_ty = Term::TyCtor(cf.ty_name.clone(), cf.ty_args.clone());
        ctx.push_def(cf.label.self_var.clone(), self_ty, node);
        self.begin_scope();
        let cocases = self.check_cocases(&ctx, &codata, &cf.ty_args, &cf.cocases.get(), &cf.label)?;
        self.end_scope()?;
        let cocases = zonk_cocases(&cocases, &self.metas);
        cf.cocases.set(cocases.into_iter().map(|c| Cocase { body: narrow_body(&c.body), ..c }).collect());
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Judgements

    /// Infer a type: returns the elaborated term and its type.
    pub fn infer(&mut self, ctx: &Ctx, e: &Term) -> TcResult<(Term, Term)> {
        match e {
            Term::Var(x) => match ctx.lookup(x) {
                Some(entry) => Ok((e.clone(), entry.ty.clone())),
                None => Err(Diagnostic::error("name.unknown", format!("variable `{}` is not in scope", x.name))),
            },
            Term::Type => Ok((Term::Type, Term::Type)),
            Term::Ann(body, ty) => {
                let ty = self.check(ctx, ty, &Term::Type)?;
                let body = self.check(ctx, body, &ty)?;
                Ok((Term::ann(body, ty.clone()), ty))
            }
            Term::Let(l) => {
                let ty = self.check(ctx, &l.ty, &Term::Type)?;
                let bound = self.check(ctx, &l.bound, &ty)?;
                let mut inner = ctx.clone();
                inner.push_def(l.var.clone(), ty.clone(), bound.clone());
                let (body, body_ty) = self.infer(&inner, &l.body)?;
                let body_ty = self.strengthen(ctx, &l.var, &bound, &body_ty)?;
                Ok((Term::let_(l.var.clone(), ty, bound, body), body_ty))
            }
            Term::TyCtor(name, args) => {
                let t = self.ensure_type(name)?;
                let indices = self.prog.type_indices_at(t).clone();
                let args = self.check_args(ctx, args, &indices)?;
                Ok((Term::TyCtor(name.clone(), args), Term::Type))
            }
            Term::Ctor(name, args) => {
                let (data, c) = self.ctor_sig(name)?;
                let args = self.check_args(ctx, args, &c.params)?;
                let ty = Term::TyCtor(data.name.clone(), subst_args(&c.result_args, &c.params.bind_args(&args)));
                Ok((Term::Ctor(name.clone(), args), ty))
            }
            Term::Dtor(scrutinee, name, args) => {
                let (codata, x) = self.dtor_sig(name)?;
                let args = self.check_args(ctx, args, &x.params)?;
                let bind = x.params.bind_args(&args);
                let self_ty = Term::TyCtor(codata.name.clone(), subst_args(&x.self_args, &bind));
                let scrutinee = self.check(ctx, scrutinee, &self_ty)?;
                let ty = subst_apply(&x.ret, &bind.then(&Subst::single(x.self_var.clone(), scrutinee.clone())));
                // `then` substitutes the dtor parameters into the scrutinee too; they are fresh, so harmless.
                Ok((Term::Dtor(Arc::new(scrutinee), name.clone(), args), ty))
            }
            Term::Match(m) => match m.label.kind {
                LabelKind::Def => self.infer_def_call(ctx, m),
                _ => self.check_match(ctx, m, None),
            },
            Term::Comatch(c) => match c.label.kind {
                LabelKind::Codef => self.infer_codef_call(ctx, c),
                _ => Err(Diagnostic::error(
                    "infer.cannot",
                    "cannot infer the type of a comatch; add a type annotation",
                )),
            },
            Term::Meta(a, theta) => match self.metas.get(*a) {
                Some(entry) => Ok((e.clone(), subst_apply(&entry.ty, theta))),
                None => {
                    let (span, what) = self.origins.get(a).cloned().unwrap_or_default();
                    Err(Diagnostic::error("infer.cannot", format!("cannot infer the type of {}", hole_name(&what)))
                        .at(span))
                }
            },
        }
    }

    fn strengthen(&mut self, _ctx: &Ctx, x: &Var, bound: &Term, ty: &Term) -> TcResult<Term> {
        if !free_vars(ty).contains(x) {
            return Ok(ty.clone());
        }
        let out = subst_apply(ty, &Subst::single(x.clone(), bound.clone()));
        if free_vars(&out).contains(x) {
            return Err(Diagnostic::error("scope.escape", format!("the type `{ty}` mentions the local `{}`", x.name)));
        }
        Ok(out)
    }

    fn infer_def_call(&mut self, ctx: &Ctx, m: &MatchTerm) -> TcResult<(Term, Term)> {
        let idx = self
            .prog
            .decl_of_label(m.label.id)
            .ok_or_else(|| Diagnostic::error("name.unknown", format!("unknown definition `{}`", m.label.name)))?;
        self.ensure(Item::Def(idx))?;
        let df = self.prog.def_by_label(m.label.id).expect("def label").clone();
        let args = self.check_args(ctx, &m.closure.args, &df.params)?;
        let bind = df.params.bind_args(&args);
        let self_ty = Term::TyCtor(df.self_type.clone(), subst_args(&df.self_args, &bind));
        let scrutinee = self.check(ctx, &m.scrutinee, &self_ty)?;
        let motive = subst_apply(&df.ret, &bind);
        let ty = subst_apply(&motive, &Subst::single(df.self_var.clone(), scrutinee.clone()));
        let node = Term::Match(Arc::new(MatchTerm {
            scrutinee,
            label: df.label.clone(),
            closure: Closure { params: df.params.vars(), args },
            motive_binder: df.self_var.clone(),
            motive: Some(motive),
            cases: df.cases.clone(),
        }));
        Ok((node, ty))
    }

    fn infer_codef_call(&mut self, ctx: &Ctx, c: &ComatchTerm) -> TcResult<(Term, Term)> {
        let idx = self
            .prog
            .decl_of_label(c.label.id)
            .ok_or_else(|| Diagnostic::error("name.unknown", format!("unknown codefinition `{}`", c.label.name)))?;
        self.ensure(Item::Codef(idx))?;
        let cf = self.prog.codef_by_label(c.label.id).expect("codef label").clone();
        let args = self.check_args(ctx, &c.closure.args, &cf.params)?;
        let ty = Term::TyCtor(cf.ty_name.clone(), subst_args(&cf.ty_args, &cf.params.bind_args(&args)));
        let node = Term::Comatch(Arc::new(ComatchTerm {
            label: cf.label.clone(),
            closure: Closure { params: cf.params.vars(), args },
            cocases: cf.cocases.clone(),
        }));
        Ok((node, ty))
    }

    /// Check against a type: returns the elaborated term.
    pub fn check(&mut self, ctx: &Ctx, e: &Term, ty: &Term) -> TcResult<Term> {
        match e {
            Term::Meta(a, _) if !self.metas.contains(*a) => {
                let (span, what) = self.origins.get(a).cloned().unwrap_or_else(|| (self.span, String::new()));
                self.metas.register(*a, ctx.clone(), ty.clone(), span, &hole_name(&what));
                Ok(Term::Meta(*a, ctx.identity_subst()))
            }
            Term::Comatch(c) if c.label.kind == LabelKind::Local => self.check_comatch(ctx, c, ty),
            Term::Match(m) if m.label.kind == LabelKind::Local && m.motive.is_none() => {
                Ok(self.check_match(ctx, m, Some(ty))?.0)
            }
            Term::Let(l) => {
                let lty = self.check(ctx, &l.ty, &Term::Type)?;
                let bound = self.check(ctx, &l.bound, &lty)?;
                let mut inner = ctx.clone();
                inner.push_def(l.var.clone(), lty.clone(), bound.clone());
                let body = self.check(&inner, &l.body, ty)?;
                Ok(Term::let_(l.var.clone(), lty, bound, body))
            }
            _ => {
                let (e, inferred) = self.infer(ctx, e)?;
                self.embed(ctx, &inferred, ty)?;
                Ok(e)
            }
        }
    }

    /// `inferred` must be convertible with `expected`. Constraints that get
    /// stuck stay pending in the current scope.
    fn embed(&mut self, ctx: &Ctx, inferred: &Term, expected: &Term) -> TcResult<()> {
        if self.opts.log_constraints {
            self.log.problems.push((ctx.clone(), inferred.clone(), expected.clone()));
        }
        self.fuel = self.fresh_fuel();
        self.scopes.last_mut().expect("no scope").unifier.add_eq(ctx, inferred, expected);
        match self.run_scope()? {
            Outcome::Done | Outcome::Stuck(_) => Ok(()),
            Outcome::Conflict(c) => {
                let mut p = Printer::new();
                let exp = p.term(&zonk(expected, &self.metas));
                let inf = p.term(&zonk(inferred, &self.metas));
                Err(Diagnostic::error(c.code, format!("type mismatch: expected `{exp}`, found `{inf}`"))
                    .with_note(c.message))
            }
        }
    }

    /// Check arguments against a telescope, substituting each argument into
    /// the later parameter types.
    pub fn check_args(&mut self, ctx: &Ctx, args: &Args, tele: &Telescope) -> TcResult<Args> {
        if args.len() != tele.len() {
            return Err(Diagnostic::error(
                "arity",
                format!("expected {} arguments, got {}", tele.len(), args.len()),
            ));
        }
        let mut s = Subst::empty();
        let mut out = Vec::with_capacity(args.len());
        for (a, p) in args.iter().zip(&tele.0) {
            let ty = subst_apply(&p.ty, &s);
            let t = self.check(ctx, &a.term, &ty)?;
            s.0.push((p.var.clone(), t.clone()));
            out.push(Arg { term: t, implicit: p.implicit });
        }
        Ok(out)
    }

    /// Check a telescope; returns it elaborated and the extended context.
    pub fn check_tele(&mut self, ctx: &Ctx, tele: &Telescope) -> TcResult<(Telescope, Ctx)> {
        let mut inner = ctx.clone();
        let mut out = Vec::with_capacity(tele.len());
        for p in &tele.0 {
            let ty = self.check(&inner, &p.ty, &Term::Type)?;
            inner.push(p.var.clone(), ty.clone());
            out.push(Param { var: p.var.clone(), ty, implicit: p.implicit });
        }
        Ok((Telescope(out), inner))
    }

    fn whnf_type(&mut self, ctx: &Ctx, ty: &Term) -> TcResult<Term> {
        let mut fuel = self.fresh_fuel();
        Ok(normalize(ctx, ty, &self.metas, &mut fuel)?.strip_ann().clone())
    }

    /// Closure over the local (non-global) part of the context.
    fn local_closure(&self, ctx: &Ctx) -> Closure {
        let vars: Vec<Var> =
            ctx.entries.iter().filter(|e| !self.global_ids.contains(&e.var.id)).map(|e| e.var.clone()).collect();
        Closure::identity(&vars)
    }

    fn check_match(&mut self, ctx: &Ctx, m: &MatchTerm, expected: Option<&Term>) -> TcResult<(Term, Term)> {
        let (scrutinee, sty) = self.infer(ctx, &m.scrutinee)?;
        let sty_n = self.whnf_type(ctx, &sty)?;
        let Term::TyCtor(tname, rho2) = &sty_n else {
            return Err(Diagnostic::error(
                "type.not-data",
                format!("cannot match on `{scrutinee}` of type `{}`", zonk(&sty, &self.metas)),
            ));
        };
        let data = match self.prog.data(tname) {
            Some(d) => d.clone(),
            None => {
                return Err(Diagnostic::error(
                    "type.not-data",
                    format!("cannot match on `{scrutinee}`: `{tname}` is not a data type"),
                ))
            }
        };
        let (motive, target, result) = match (&m.motive, expected) {
            (Some(mt), _) => {
                let mctx = ctx.extended(m.motive_binder.clone(), sty.clone());
                let mt = self.check(&mctx, mt, &Term::Type)?;
                let result = subst_apply(&mt, &Subst::single(m.motive_binder.clone(), scrutinee.clone()));
                let target = Target::Motive { binder: m.motive_binder.clone(), ty: mt.clone() };
                (Some(mt), target, result)
            }
            (None, Some(t)) => (None, Target::Fixed(t.clone()), t.clone()),
            (None, None) => {
                return Err(Diagnostic::error(
                    "infer.cannot",
                    "cannot infer the type of a match without a motive; add `as z return ...` or an annotation",
                ))
            }
        };
        let cases = self.check_cases(ctx, &data, rho2, &m.cases.get(), &target, &m.label)?;
        let node = Term::Match(Arc::new(MatchTerm {
            scrutinee,
            label: m.label.clone(),
            closure: self.local_closure(ctx),
            motive_binder: m.motive_binder.clone(),
            motive,
            cases: Clauses::new(cases),
        }));
        if let (Some(_), Some(t)) = (&m.motive, expected) {
            self.embed(ctx, &result, t)?;
        }
        Ok((node, result))
    }

    fn check_comatch(&mut self, ctx: &Ctx, c: &ComatchTerm, expected: &Term) -> TcResult<Term> {
        let ty = self.whnf_type(ctx, expected)?;
        let Term::TyCtor(tname, rho2) = &ty else {
            return Err(Diagnostic::error(
                "type.not-codata",
                format!("a comatch cannot have type `{}`", zonk(expected, &self.metas)),
            ));
        };
        let codata = match self.prog.codata(tname) {
            Some(d) => d.clone(),
            None => {
                return Err(Diagnostic::error(
                    "type.not-codata",
                    format!("a comatch cannot have type `{}`: `{tname}` is not a codata type", zonk(expected, &self.metas)),
                ))
            }
        };
        let closure = self.local_closure(ctx);
        let cell = Clauses::new(c.cocases.get().as_ref().clone());
        let node = Term::Comatch(Arc::new(ComatchTerm { label: c.label.clone(), closure, cocases: cell.clone() }));
        let mut inner = ctx.clone();
        inner.push_def(c.label.self_var.clone(), ty.clone(), node.clone());
        let cocases = self.check_cocases(&inner, &codata, rho2, &c.cocases.get(), &c.label)?;
        cell.set(cocases);
        Ok(node)
    }

    fn coverage<'a>(
        &self,
        declared: impl Iterator<Item = &'a Name>,
        given: impl Iterator<Item = &'a Name>,
        label: &Label,
        what: &str,
    ) -> TcResult<()> {
        let declared: Vec<&Name> = declared.collect();
        let mut seen = BTreeSet::new();
        for g in given {
            if !declared.contains(&g) {
                return Err(Diagnostic::error("case.unknown", format!("`{g}` is not a {what} of this type")));
            }
            if !seen.insert(g.clone()) {
                return Err(Diagnostic::error("case.duplicate", format!("{what} `{g}` is handled twice")));
            }
        }
        let missing: Vec<String> = declared.iter().filter(|d| !seen.contains(**d)).map(|d| d.to_string()).collect();
        if !missing.is_empty() {
            let place = if label.kind == LabelKind::Local { String::new() } else { format!(" in `{}`", label.name) };
            return Err(Diagnostic::error(
                "case.missing",
                format!("missing {what}{place}: {}", missing.join(", ")),
            ));
        }
        Ok(())
    }

    fn idx_unify(&mut self, ctx: &Ctx, a1: &Args, a2: &Args, what: &str) -> TcResult<IdxResult> {
        let mut fuel = self.fresh_fuel();
        let mut lines = Vec::new();
        let trace = if self.opts.trace_unify { Some(&mut lines) } else { None };
        let r = IdxUnify { ctx, metas: &self.metas, fuel: &mut fuel, trace }.unify_args(a1, a2)?;
        if self.opts.trace_unify {
            self.unify_trace.push(format!("{what}:"));
            self.unify_trace.extend(lines.into_iter().map(|l| format!("  {l}")));
            self.unify_trace.push(format!("  => {}", verdict_name(&r)));
        }
        Ok(r)
    }

    fn check_cases(
        &mut self,
        ctx: &Ctx,
        data: &DataDecl,
        rho2: &Args,
        cases: &[Case],
        target: &Target,
        label: &Label,
    ) -> TcResult<Vec<Case>> {
        self.coverage(data.ctors.iter().map(|c| &c.name), cases.iter().map(|c| &c.ctor), label, "constructor")?;
        let mut out = Vec::with_capacity(cases.len());
        for case in cases {
            let (_, ctor) = self.ctor_sig(&case.ctor)?;
            if case.binders.len() != ctor.params.len() {
                return Err(Diagnostic::error(
                    "arity",
                    format!("`{}` has {} parameters, the case binds {}", ctor.name, ctor.params.len(), case.binders.len()),
                ));
            }
            let vars: Vec<Var> = case.binders.iter().map(|b| b.var.clone()).collect();
            let (tele, ren) = ctor.params.rename(&vars);
            let rho1 = subst_args(&ctor.result_args, &ren);
            let mut inner = ctx.clone();
            inner.push_tele(&tele);
            let what = format!("case {} of {}", ctor.name, label.name);
            let verdict = self.idx_unify(&inner, &rho1, rho2, &what)?;
            let body = self.case_verdict(&inner, verdict, &case.body, &case.ctor, |theta| {
                let ctor_term = Term::Ctor(ctor.name.clone(), tele.identity_args());
                subst_apply(&target.at(&ctor_term), theta)
            })?;
            out.push(Case { ctor: case.ctor.clone(), binders: case.binders.clone(), body });
        }
        Ok(out)
    }

    fn check_cocases(
        &mut self,
        ctx: &Ctx,
        codata: &CodataDecl,
        rho2: &Args,
        cocases: &[Cocase],
        label: &Label,
    ) -> TcResult<Vec<Cocase>> {
        self.coverage(codata.dtors.iter().map(|d| &d.name), cocases.iter().map(|c| &c.dtor), label, "destructor")?;
        let mut out = Vec::with_capacity(cocases.len());
        for cc in cocases {
            let (_, dtor) = self.dtor_sig(&cc.dtor)?;
            if cc.binders.len() != dtor.params.len() {
                return Err(Diagnostic::error(
                    "arity",
                    format!("`{}` has {} parameters, the cocase binds {}", dtor.name, dtor.params.len(), cc.binders.len()),
                ));
            }
            let vars: Vec<Var> = cc.binders.iter().map(|b| b.var.clone()).collect();
            let (tele, ren) = dtor.params.rename(&vars);
            let rho1 = subst_args(&dtor.self_args, &ren);
            let mut inner = ctx.clone();
            inner.push_tele(&tele);
            let what = format!("cocase {} of {}", dtor.name, label.name);
            let verdict = self.idx_unify(&inner, &rho1, rho2, &what)?;
            let self_ref = Term::Var(label.self_var.clone());
            let body = self.case_verdict(&inner, verdict, &cc.body, &cc.dtor, |theta| {
                let ret = subst_apply(&dtor.ret, &ren.then(&Subst::single(dtor.self_var.clone(), self_ref.clone())));
                subst_apply(&ret, theta)
            })?;
            out.push(Cocase { dtor: cc.dtor.clone(), binders: cc.binders.clone(), body });
        }
        Ok(out)
    }

    fn case_verdict(
        &mut self,
        ctx: &Ctx,
        verdict: IdxResult,
        body: &Body,
        name: &str,
        target: impl FnOnce(&Subst) -> Term,
    ) -> TcResult<Body> {
        match (verdict, body) {
            (IdxResult::Unifier(theta), Body::Expr(e)) => {
                let refined = ctx.subst(&theta);
                let t = target(&theta);
                Ok(Body::Expr(self.check(&refined, e, &t)?))
            }
            (IdxResult::Unifier(theta), Body::Absurd) => {
                let mut d = Diagnostic::error(
                    "case.reachable",
                    format!("`{name}` is marked absurd, but its indices unify with the scrutinee's"),
                );
                if !theta.is_empty() {
                    let mut p = Printer::new();
                    let shown: Vec<String> =
                        theta.0.iter().map(|(x, t)| format!("{} := {}", p.var(x), p.term(t))).collect();
                    d = d.with_note(format!("unifier: {}", shown.join(", ")));
                }
                Err(d)
            }
            (IdxResult::Conflict { .. }, Body::Absurd) => Ok(Body::Absurd),
            (IdxResult::Conflict { lhs, rhs, .. }, Body::Expr(_)) => Err(Diagnostic::error(
                "case.impossible",
                format!("`{name}` cannot occur here; mark it absurd"),
            )
            .with_note(format!("the indices clash: `{lhs}` and `{rhs}`"))),
            (IdxResult::Fail { lhs, rhs, reason }, _) => Err(Diagnostic::error(
                "case.undecided",
                format!("cannot decide whether `{name}` is possible"),
            )
            .with_note(format!("{reason}: `{}` and `{}`", zonk(&lhs, &self.metas), zonk(&rhs, &self.metas)))),
        }
    }

    /// Check an elaborated term again in a throwaway scope.
    pub fn recheck(&mut self, ctx: &Ctx, e: &Term, ty: &Term) -> TcResult<Term> {
        let saved = std::mem::take(&mut self.scopes);
        self.begin_scope();
        let r = self.check(ctx, e, ty);
        let r = r.and_then(|t| self.end_scope().map(|()| t));
        self.scopes = saved;
        r
    }

    /// Infer the type of `e` in a throwaway scope, like [`Checker::recheck`].
    pub fn reinfer(&mut self, ctx: &Ctx, e: &Term) -> TcResult<(Term, Term)> {
        let saved = std::mem::take(&mut self.scopes);
        self.begin_scope();
        let r = self.infer(ctx, e);
        let r = r.and_then(|t| self.end_scope().map(|()| t));
        self.scopes = saved;
        r
    }
}

impl Host for Checker {
    fn metas(&self) -> &MetaMap {
        &self.metas
    }

    fn metas_mut(&mut self) -> &mut MetaMap {
        &mut self.metas
    }

    fn fuel(&mut self) -> &mut Fuel {
        &mut self.fuel
    }

    fn check_solution(&mut self, ctx: &Ctx, sol: &Term, ty: &Term) -> SolutionCheck {
        let saved_fuel = self.fuel;
        self.scopes.push(Scope { unifier: Unifier::new(), first_meta: self.metas.mark() });
        let r = self.check(ctx, sol, ty).and_then(|_| self.run_scope());
        let scope = self.scopes.pop().expect("scope");
        self.fuel = saved_fuel;
        match r {
            Ok(Outcome::Done) if !scope.unifier.has_pending() => SolutionCheck::Ok,
            Ok(Outcome::Conflict(c)) => SolutionCheck::Conflict(c.message),
            Ok(_) => SolutionCheck::Stuck,
            Err(d) if d.code.starts_with("conv.") => SolutionCheck::Conflict(d.message),
            Err(_) => SolutionCheck::Stuck,
        }
    }

    fn tracing(&self) -> bool {
        self.opts.trace_conv
    }

    fn trace(&mut self, event: TraceEvent) {
        self.conv_trace.push(event);
    }

    fn solved(&mut self, alpha: MetaVar, _sol: &Term) {
        if self.opts.log_constraints {
            self.log.solved.push(alpha);
        }
    }
}

fn item_decl(item: Item) -> usize {
    match item {
        Item::Type(i) | Item::Ctor(i, _) | Item::Dtor(i, _) | Item::Def(i) | Item::Codef(i) | Item::LetType(i) => i,
    }
}

fn hole_name(what: &str) -> String {
    if what.is_empty() {
        "a hole".to_string()
    } else {
        what.to_string()
    }
}

fn verdict_name(r: &IdxResult) -> String {
    match r {
        IdxResult::Unifier(t) => {
            let mut p = Printer::new();
            let parts: Vec<String> = t.0.iter().map(|(x, e)| format!("{} := {}", p.var(x), p.term(e))).collect();
            format!("unifier [{}]", parts.join(", "))
        }
        IdxResult::Conflict { kind, .. } => format!("conflict ({kind:?})"),
        IdxResult::Fail { reason, .. } => format!("fail ({reason})"),
    }
}

impl Program {
    fn type_indices_at(&self, idx: usize) -> &Telescope {
        match &self.decls[idx] {
            Decl::Data(d) => &d.indices,
            Decl::Codata(d) => &d.indices,
            _ => unreachable!("not a type declaration"),
        }
    }
}

/// Restrict the closures of local (co)matches to the variables their clauses
/// actually use. Clause bodies are processed first.
pub fn narrow_closures(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Type => t.clone(),
        Term::Ann(e, ty) => Term::ann(narrow_closures(e), narrow_closures(ty)),
        Term::Let(l) => Term::let_(l.var.clone(), narrow_closures(&l.ty), narrow_closures(&l.bound), narrow_closures(&l.body)),
        Term::TyCtor(n, a) => Term::TyCtor(n.clone(), narrow_args(a)),
        Term::Ctor(n, a) => Term::Ctor(n.clone(), narrow_args(a)),
        Term::Dtor(e, n, a) => Term::Dtor(Arc::new(narrow_closures(e)), n.clone(), narrow_args(a)),
        Term::Match(m) => {
            let scrutinee = narrow_closures(&m.scrutinee);
            let motive = m.motive.as_ref().map(narrow_closures);
            if m.label.kind != LabelKind::Local {
                return Term::Match(Arc::new(MatchTerm {
                    scrutinee,
                    motive,
                    closure: Closure { params: m.closure.params.clone(), args: narrow_args(&m.closure.args) },
                    ..(**m).clone()
                }));
            }
            let cases: Vec<Case> =
                m.cases.get().iter().map(|c| Case { body: narrow_body(&c.body), ..c.clone() }).collect();
            let mut used = BTreeSet::new();
            for c in &cases {
                if let Body::Expr(e) = &c.body {
                    used.extend(free_vars(e));
                }
            }
            Term::Match(Arc::new(MatchTerm {
                scrutinee,
                label: m.label.clone(),
                closure: keep_used(&m.closure, &used),
                motive_binder: m.motive_binder.clone(),
                motive,
                cases: Clauses::new(cases),
            }))
        }
        Term::Comatch(c) => {
            if c.label.kind != LabelKind::Local {
                return Term::Comatch(Arc::new(ComatchTerm {
                    label: c.label.clone(),
                    closure: Closure { params: c.closure.params.clone(), args: narrow_args(&c.closure.args) },
                    cocases: c.cocases.clone(),
                }));
            }
            let cocases: Vec<Cocase> =
                c.cocases.get().iter().map(|o| Cocase { body: narrow_body(&o.body), ..o.clone() }).collect();
            let mut used = BTreeSet::new();
            for o in &cocases {
                if let Body::Expr(e) = &o.body {
                    used.extend(free_vars(e));
                }
            }
            Term::Comatch(Arc::new(ComatchTerm {
                label: c.label.clone(),
                closure: keep_used(&c.closure, &used),
                cocases: Clauses::new(cocases),
            }))
        }
        Term::Meta(a, theta) => {
            Term::Meta(*a, Subst(theta.0.iter().map(|(x, e)| (x.clone(), narrow_closures(e))).collect()))
        }
    }
}

fn narrow_args(a: &Args) -> Args {
    a.iter().map(|x| Arg { term: narrow_closures(&x.term), implicit: x.implicit }).collect()
}

pub fn narrow_body(b: &Body) -> Body {
    match b {
        Body::Expr(e) => Body::Expr(narrow_closures(e)),
        Body::Absurd => Body::Absurd,
    }
}

fn keep_used(c: &Closure, used: &BTreeSet<Var>) -> Closure {
    let mut params = Vec::new();
    let mut args = Vec::new();
    for (p, a) in c.params.iter().zip(&c.args) {
        if used.contains(p) {
            params.push(p.clone());
            args.push(Arg { term: narrow_closures(&a.term), implicit: a.implicit });
        }
    }
    Closure { params, args }
}
