//! Translation from the surface tree to core declarations.
//!
//! A first pass records the shape of every global signature (parameter names
//! and implicitness) so that names may be used before their declaration. The
//! second pass resolves names, expands definition calls into labeled
//! (co)matches sharing the definition's clauses, inserts a fresh metavariable
//! for every omitted implicit argument, and reorders named arguments.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use codata_core::decl::{self as core, Span};
use codata_core::syntax::{self as cs, Arg, Args, Binder, Body, Clauses, Closure, Label, LabelKind, MetaVar, Subst, Term, Var};
use codata_core::typecheck::MetaOrigins;

use crate::ast::{self, Expr};
use crate::SurfaceError;

pub struct Desugared {
    pub program: core::Program,
    pub origins: MetaOrigins,
}

#[derive(Clone)]
struct Shape {
    /// Parameter names (`None` for `_`) and implicitness.
    params: Vec<(Option<String>, bool)>,
}

impl Shape {
    fn of(params: &[ast::Param]) -> Shape {
        Shape { params: params.iter().map(|p| (p.binder.name.clone(), p.implicit)).collect() }
    }

    fn explicit_count(&self) -> usize {
        self.params.iter().filter(|p| !p.1).count()
    }
}

struct DefInfo {
    shape: Shape,
    label: Label,
    params: Vec<Var>,
    self_var: Var,
    cases: Clauses<cs::Case>,
}

struct CodefInfo {
    shape: Shape,
    label: Label,
    params: Vec<Var>,
    cocases: Clauses<cs::Cocase>,
}

#[derive(Default)]
struct Globals {
    types: HashMap<String, Shape>,
    ctors: HashMap<String, Shape>,
    dtors: HashMap<String, Shape>,
    defs: HashMap<String, DefInfo>,
    codefs: HashMap<String, CodefInfo>,
    lets: HashMap<String, Var>,
}

pub fn desugar(decls: &[ast::Decl]) -> Result<Desugared, SurfaceError> {
    let mut d = Desugarer { g: Globals::default(), origins: MetaOrigins::new(), scope: Vec::new() };
    d.collect(decls)?;
    let mut program = core::Program::new();
    for decl in decls {
        let c = d.decl(decl)?;
        program
            .push(c)
            .map_err(|dup| SurfaceError::new("name.duplicate", decl.span(), format!("`{}` is declared twice", dup.0)))?;
        if let ast::Decl::Let { name, .. } = decl {
            let core::Decl::Let(l) = &program.decls[program.decls.len() - 1] else { unreachable!() };
            d.g.lets.insert(name.name.clone(), l.var.clone());
        }
    }
    Ok(Desugared { program, origins: d.origins })
}

struct Desugarer {
    g: Globals,
    origins: MetaOrigins,
    /// Local variables, innermost last.
    scope: Vec<(String, Var)>,
}

fn dup(name: &ast::Ident) -> SurfaceError {
    SurfaceError::new("name.duplicate", name.span, format!("`{}` is declared twice", name.name))
}

fn origin(span: Span) -> String {
    format!("{}:{}", span.file, span.start)
}

impl Desugarer {
    fn collect(&mut self, decls: &[ast::Decl]) -> Result<(), SurfaceError> {
        let g = &mut self.g;
        for decl in decls {
            match decl {
                ast::Decl::Data { name, indices, ctors, .. } => {
                    if g.types.insert(name.name.clone(), Shape::of(indices)).is_some() {
                        return Err(dup(name));
                    }
                    for c in ctors {
                        if g.ctors.insert(c.name.name.clone(), Shape::of(&c.params)).is_some()
                            || g.codefs.contains_key(&c.name.name)
                        {
                            return Err(dup(&c.name));
                        }
                    }
                }
                ast::Decl::Codata { name, indices, dtors, .. } => {
                    if g.types.insert(name.name.clone(), Shape::of(indices)).is_some() {
                        return Err(dup(name));
                    }
                    for x in dtors {
                        if g.dtors.insert(x.name.name.clone(), Shape::of(&x.params)).is_some()
                            || g.defs.contains_key(&x.name.name)
                        {
                            return Err(dup(&x.name));
                        }
                    }
                }
                ast::Decl::Def { self_binder, name, params, span, .. } => {
                    if g.defs.contains_key(&name.name) || g.dtors.contains_key(&name.name) {
                        return Err(dup(name));
                    }
                    let self_name = self_binder.as_ref().and_then(|b| b.name.as_deref()).unwrap_or("self");
                    let info = DefInfo {
                        shape: Shape::of(params),
                        label: Label::new(&name.name, &origin(*span), LabelKind::Def),
                        params: params.iter().map(|p| binder_var(&p.binder)).collect(),
                        self_var: Var::fresh(self_name),
                        cases: Clauses::new(Vec::new()),
                    };
                    g.defs.insert(name.name.clone(), info);
                }
                ast::Decl::Codef { name, params, span, .. } => {
                    if g.codefs.contains_key(&name.name) || g.ctors.contains_key(&name.name) {
                        return Err(dup(name));
                    }
                    let info = CodefInfo {
                        shape: Shape::of(params),
                        label: Label::new(&name.name, &origin(*span), LabelKind::Codef),
                        params: params.iter().map(|p| binder_var(&p.binder)).collect(),
                        cocases: Clauses::new(Vec::new()),
                    };
                    g.codefs.insert(name.name.clone(), info);
                }
                ast::Decl::Let { .. } => {}
            }
        }
        Ok(())
    }

    // -- declarations -------------------------------------------------------

    fn decl(&mut self, decl: &ast::Decl) -> Result<core::Decl, SurfaceError> {
        self.scope.clear();
        Ok(match decl {
            ast::Decl::Data { name, indices, ctors, span } => {
                let indices_t = self.tele(indices, None)?;
                self.scope.clear();
                let mut out = Vec::new();
                for c in ctors {
                    let params = self.tele(&c.params, None)?;
                    let result_args = match &c.result {
                        Some(e) => self.result_type(e, &name.name)?,
                        None => self.bare_type(&name.name, c.name.span)?,
                    };
                    self.scope.clear();
                    out.push(core::Ctor { name: c.name.name.as_str().into(), params, result_args, span: c.span });
                }
                core::Decl::Data(Arc::new(core::DataDecl {
                    name: name.name.as_str().into(),
                    indices: indices_t,
                    ctors: out,
                    span: *span,
                }))
            }
            ast::Decl::Codata { name, indices, dtors, span } => {
                let indices_t = self.tele(indices, None)?;
                self.scope.clear();
                let mut out = Vec::new();
                for x in dtors {
                    let params = self.tele(&x.params, None)?;
                    let self_args = match &x.self_ty {
                        Some(h) => {
                            if h.name.name != name.name {
                                return Err(SurfaceError::new(
                                    "decl.self-type",
                                    h.name.span,
                                    format!("destructor `{}` must observe `{}`", x.name.name, name.name),
                                ));
                            }
                            self.type_args(h)?
                        }
                        None => self.bare_type(&name.name, x.name.span)?,
                    };
                    let self_var = Var::fresh(x.self_binder.as_ref().and_then(|b| b.name.as_deref()).unwrap_or("self"));
                    if x.self_binder.as_ref().is_some_and(|b| b.name.is_some()) {
                        self.scope.push((self_var.name.to_string(), self_var.clone()));
                    }
                    let ret = self.expr(&x.ret)?;
                    self.scope.clear();
                    out.push(core::Dtor { name: x.name.name.as_str().into(), self_args, self_var, params, ret, span: x.span });
                }
                core::Decl::Codata(Arc::new(core::CodataDecl {
                    name: name.name.as_str().into(),
                    indices: indices_t,
                    dtors: out,
                    span: *span,
                }))
            }
            ast::Decl::Def { self_binder, self_ty, name, params, ret, cases, span } => {
                let (label, vars, self_var, cell) = {
                    let info = &self.g.defs[&name.name];
                    (info.label.clone(), info.params.clone(), info.self_var.clone(), info.cases.clone())
                };
                let params_t = self.tele(params, Some(&vars))?;
                if !self.g.types.contains_key(&self_ty.name.name) {
                    return Err(unknown(&self_ty.name, "type"));
                }
                let self_args = self.type_args(self_ty)?;
                let outer = self.scope.len();
                if self_binder.as_ref().is_some_and(|b| b.name.is_some()) {
                    self.scope.push((self_var.name.to_string(), self_var.clone()));
                }
                let ret_t = self.expr(ret)?;
                self.scope.truncate(outer);
                let cases_t = self.cases(cases)?;
                cell.set(cases_t);
                core::Decl::Def(Arc::new(core::DefDecl {
                    name: name.name.as_str().into(),
                    label,
                    params: params_t,
                    self_var,
                    self_type: self_ty.name.name.as_str().into(),
                    self_args,
                    ret: ret_t,
                    cases: cell,
                    span: *span,
                }))
            }
            ast::Decl::Codef { name, params, ty, cocases, span } => {
                let (label, vars, cell) = {
                    let info = &self.g.codefs[&name.name];
                    (info.label.clone(), info.params.clone(), info.cocases.clone())
                };
                let params_t = self.tele(params, Some(&vars))?;
                if !self.g.types.contains_key(&ty.name.name) {
                    return Err(unknown(&ty.name, "type"));
                }
                let ty_args = self.type_args(ty)?;
                let cocases_t = self.cocases(cocases)?;
                cell.set(cocases_t);
                core::Decl::Codef(Arc::new(core::CodefDecl {
                    name: name.name.as_str().into(),
                    label,
                    params: params_t,
                    ty_name: ty.name.name.as_str().into(),
                    ty_args,
                    cocases: cell,
                    span: *span,
                }))
            }
            ast::Decl::Let { name, ty, body, span } => {
                let ty = self.expr(ty)?;
                let body = self.expr(body)?;
                core::Decl::Let(Arc::new(core::LetDecl { var: Var::fresh(&name.name), ty, body, span: *span }))
            }
        })
    }

    /// Desugar a telescope, bringing its binders into scope.
    fn tele(&mut self, params: &[ast::Param], vars: Option<&[Var]>) -> Result<core::Telescope, SurfaceError> {
        let mut out = Vec::new();
        for (i, p) in params.iter().enumerate() {
            let ty = self.expr(&p.ty)?;
            let var = match vars {
                Some(v) => v[i].clone(),
                None => binder_var(&p.binder),
            };
            if let Some(n) = &p.binder.name {
                self.scope.push((n.clone(), var.clone()));
            }
            out.push(core::Param { var, ty, implicit: p.implicit });
        }
        Ok(core::Telescope(out))
    }

    /// The index arguments of a constructor's declared result type.
    fn result_type(&mut self, e: &Expr, ty: &str) -> Result<Args, SurfaceError> {
        match e {
            Expr::Name { name, args } if name.name == ty => {
                self.type_args(&ast::TypeHead { name: name.clone(), args: args.clone() })
            }
            _ => Err(SurfaceError::new(
                "decl.result-type",
                e.span(),
                format!("a constructor of `{ty}` must return `{ty}`"),
            )),
        }
    }

    fn bare_type(&mut self, ty: &str, span: Span) -> Result<Args, SurfaceError> {
        let name = ast::Ident { name: ty.to_string(), span };
        self.type_args(&ast::TypeHead { name, args: None })
    }

    fn type_args(&mut self, h: &ast::TypeHead) -> Result<Args, SurfaceError> {
        let shape = self.g.types.get(&h.name.name).cloned().ok_or_else(|| unknown(&h.name, "type"))?;
        self.args(h.args.as_deref().unwrap_or(&[]), &shape, &h.name)
    }

    // -- arguments ----------------------------------------------------------

    fn hole(&mut self, span: Span, what: String) -> Term {
        let a = MetaVar::fresh();
        self.origins.insert(a, (span, what));
        Term::Meta(a, Subst::empty())
    }

    /// Match supplied arguments against a signature: all positions given
    /// positionally, or explicit positions positionally plus any by name,
    /// with a fresh hole for every implicit position left open.
    fn args(&mut self, given: &[ast::Arg], shape: &Shape, callee: &ast::Ident) -> Result<Args, SurfaceError> {
        let total = shape.params.len();
        let named = given.iter().filter(|a| a.name.is_some()).count();
        let positional: Vec<&ast::Arg> = given.iter().filter(|a| a.name.is_none()).collect();
        let mut slots: Vec<Option<&Expr>> = vec![None; total];
        if named == 0 && positional.len() == total {
            for (i, a) in positional.iter().enumerate() {
                slots[i] = Some(&a.value);
            }
        } else {
            for a in given.iter().filter(|a| a.name.is_some()) {
                let n = a.name.as_ref().expect("named");
                let i = shape.params.iter().position(|p| p.0.as_deref() == Some(n.name.as_str())).ok_or_else(|| {
                    SurfaceError::new(
                        "args.unknown-name",
                        n.span,
                        format!("`{}` has no parameter named `{}`", callee.name, n.name),
                    )
                })?;
                if slots[i].is_some() {
                    return Err(SurfaceError::new("args.duplicate", n.span, format!("`{}` is given twice", n.name)));
                }
                slots[i] = Some(&a.value);
            }
            let open: Vec<usize> = (0..total).filter(|&i| !shape.params[i].1 && slots[i].is_none()).collect();
            if open.len() != positional.len() {
                return Err(SurfaceError::new(
                    "arity",
                    callee.span,
                    format!(
                        "`{}` expects {} explicit argument{} ({} in total), got {}",
                        callee.name,
                        shape.explicit_count(),
                        if shape.explicit_count() == 1 { "" } else { "s" },
                        total,
                        positional.len()
                    ),
                ));
            }
            for (i, a) in open.into_iter().zip(positional) {
                slots[i] = Some(&a.value);
            }
        }
        let mut out = Vec::with_capacity(total);
        for (i, slot) in slots.into_iter().enumerate() {
            let implicit = shape.params[i].1;
            let term = match slot {
                Some(e) => self.expr(e)?,
                None => {
                    let pname = shape.params[i].0.clone().unwrap_or_else(|| format!("#{}", i + 1));
                    self.hole(callee.span, format!("implicit argument `{pname}` of `{}`", callee.name))
                }
            };
            out.push(Arg { term, implicit });
        }
        Ok(out)
    }

    /// Binders of a (co)case: every position, or only the explicit ones.
    fn binders(&mut self, given: Option<&[ast::Binder]>, shape: &Shape, head: &ast::Ident) -> Result<Vec<Binder>, SurfaceError> {
        let given = given.unwrap_or(&[]);
        let total = shape.params.len();
        let all = given.len() == total;
        if !all && given.len() != shape.explicit_count() {
            return Err(SurfaceError::new(
                "arity",
                head.span,
                format!(
                    "`{}` binds {} of {} parameters ({} explicit)",
                    head.name,
                    given.len(),
                    total,
                    shape.explicit_count()
                ),
            ));
        }
        let mut it = given.iter();
        let mut out = Vec::with_capacity(total);
        for (_, implicit) in &shape.params {
            let var = if all || !implicit {
                binder_var(it.next().expect("counted"))
            } else {
                Var::fresh("_")
            };
            out.push(Binder { var, implicit: *implicit });
        }
        Ok(out)
    }

    fn bind(&mut self, given: Option<&[ast::Binder]>, binders: &[Binder], shape: &Shape) {
        let given = given.unwrap_or(&[]);
        let all = given.len() == shape.params.len();
        let mut it = given.iter();
        for (b, (_, implicit)) in binders.iter().zip(&shape.params) {
            if all || !implicit {
                if let Some(Some(n)) = it.next().map(|g| &g.name) {
                    self.scope.push((n.clone(), b.var.clone()));
                }
            }
        }
    }

    fn cases(&mut self, cases: &[ast::Case]) -> Result<Vec<cs::Case>, SurfaceError> {
        let mut out = Vec::new();
        for c in cases {
            let shape = self.g.ctors.get(&c.ctor.name).cloned().ok_or_else(|| unknown(&c.ctor, "constructor"))?;
            let binders = self.binders(c.binders.as_deref(), &shape, &c.ctor)?;
            let outer = self.scope.len();
            self.bind(c.binders.as_deref(), &binders, &shape);
            let body = match &c.body {
                Some(e) => Body::Expr(self.expr(e)?),
                None => Body::Absurd,
            };
            self.scope.truncate(outer);
            out.push(cs::Case { ctor: c.ctor.name.as_str().into(), binders, body });
        }
        Ok(out)
    }

    fn cocases(&mut self, cocases: &[ast::Cocase]) -> Result<Vec<cs::Cocase>, SurfaceError> {
        let mut out = Vec::new();
        for c in cocases {
            let shape = self.g.dtors.get(&c.dtor.name).cloned().ok_or_else(|| unknown(&c.dtor, "destructor"))?;
            let binders = self.binders(c.binders.as_deref(), &shape, &c.dtor)?;
            let outer = self.scope.len();
            self.bind(c.binders.as_deref(), &binders, &shape);
            let body = match &c.body {
                Some(e) => Body::Expr(self.expr(e)?),
                None => Body::Absurd,
            };
            self.scope.truncate(outer);
            out.push(cs::Cocase { dtor: c.dtor.name.as_str().into(), binders, body });
        }
        Ok(out)
    }

    /// Identity closure over the local variables the clauses mention, in scope order.
    fn closure(&self, bodies: impl Iterator<Item = (Vec<Var>, Option<Term>)>, also_bound: &[Var]) -> Closure {
        let mut used = BTreeSet::new();
        for (binders, body) in bodies {
            if let Some(b) = body {
                let mut fv = cs::free_vars(&b);
                for v in binders.iter().chain(also_bound) {
                    fv.remove(v);
                }
                used.extend(fv);
            }
        }
        let mut vars: Vec<Var> = Vec::new();
        for (_, v) in &self.scope {
            if used.contains(v) && !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        Closure::identity(&vars)
    }

    fn lookup(&self, name: &str) -> Option<&Var> {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    // -- expressions --------------------------------------------------------

    pub fn expr(&mut self, e: &Expr) -> Result<Term, SurfaceError> {
        match e {
            Expr::Name { name, args } => self.name(name, args.as_deref()),
            Expr::Hole(span) => Ok(self.hole(*span, "hole `_`".to_string())),
            Expr::Type(_) => Ok(Term::Type),
            Expr::Int(n, span) => self.numeral(*n, *span),
            Expr::Dot { recv, name, args, .. } => {
                let recv = self.expr(recv)?;
                let given = args.as_deref().unwrap_or(&[]);
                if let Some(shape) = self.g.dtors.get(&name.name).cloned() {
                    let args = self.args(given, &shape, name)?;
                    return Ok(Term::Dtor(Arc::new(recv), name.name.as_str().into(), args));
                }
                if let Some(info) = self.g.defs.get(&name.name) {
                    let (shape, label, params, self_var, cases) =
                        (info.shape.clone(), info.label.clone(), info.params.clone(), info.self_var.clone(), info.cases.clone());
                    let args = self.args(given, &shape, name)?;
                    return Ok(Term::Match(Arc::new(cs::MatchTerm {
                        scrutinee: recv,
                        label,
                        closure: Closure { params, args },
                        motive_binder: self_var,
                        motive: None,
                        cases,
                    })));
                }
                Err(unknown(name, "destructor or definition"))
            }
            Expr::Match { scrutinee, motive, cases, span } => {
                let scrutinee = self.expr(scrutinee)?;
                let (motive_binder, motive) = match motive {
                    Some((b, t)) => {
                        let z = binder_var(b);
                        let outer = self.scope.len();
                        if let Some(n) = &b.name {
                            self.scope.push((n.clone(), z.clone()));
                        }
                        let t = self.expr(t)?;
                        self.scope.truncate(outer);
                        (z, Some(t))
                    }
                    None => (Var::fresh("z"), None),
                };
                let cases = self.cases(cases)?;
                let closure = self.closure(
                    cases.iter().map(|c| (c.binders.iter().map(|b| b.var.clone()).collect(), body_term(&c.body))),
                    &[],
                );
                Ok(Term::Match(Arc::new(cs::MatchTerm {
                    scrutinee,
                    label: Label::new("match", &origin(*span), LabelKind::Local),
                    closure,
                    motive_binder,
                    motive,
                    cases: Clauses::new(cases),
                })))
            }
            Expr::Comatch { name, cocases, span } => {
                let label_name = name.as_ref().map(|n| n.name.as_str()).unwrap_or("self");
                let label = Label::new(label_name, &origin(*span), LabelKind::Local);
                let outer = self.scope.len();
                if let Some(n) = name {
                    self.scope.push((n.name.clone(), label.self_var.clone()));
                }
                let cocases = self.cocases(cocases);
                self.scope.truncate(outer);
                let cocases = cocases?;
                Ok(self.comatch(label, cocases))
            }
            Expr::Lambda { dtor, binders, body, span } => {
                let shape = self.g.dtors.get(&dtor.name).cloned().ok_or_else(|| unknown(dtor, "destructor"))?;
                let bs = self.binders(binders.as_deref(), &shape, dtor)?;
                let outer = self.scope.len();
                self.bind(binders.as_deref(), &bs, &shape);
                let body = self.expr(body);
                self.scope.truncate(outer);
                let cocase = cs::Cocase { dtor: dtor.name.as_str().into(), binders: bs, body: Body::Expr(body?) };
                let label = Label::new("self", &origin(*span), LabelKind::Local);
                Ok(self.comatch(label, vec![cocase]))
            }
            Expr::Arrow(a, b, span) => {
                let Some(shape) = self.g.types.get("Fun").cloned() else {
                    return Err(SurfaceError::new(
                        "sugar.no-fun",
                        *span,
                        "`->` needs a declaration of the type `Fun`",
                    ));
                };
                if shape.params.len() != 2 {
                    return Err(SurfaceError::new("sugar.no-fun", *span, "`->` needs `Fun` to have two indices"));
                }
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                Ok(Term::TyCtor("Fun".into(), vec![Arg::explicit(a), Arg::explicit(b)]))
            }
            Expr::Ann(e, t, _) => {
                let e = self.expr(e)?;
                let t = self.expr(t)?;
                Ok(Term::ann(e, t))
            }
            Expr::Let { binder, ty, bound, body, span } => {
                let ty = match ty {
                    Some(t) => self.expr(t)?,
                    None => self.hole(*span, format!("the type of `{}`", binder.name.as_deref().unwrap_or("_"))),
                };
                let bound = self.expr(bound)?;
                let var = binder_var(binder);
                let outer = self.scope.len();
                if let Some(n) = &binder.name {
                    self.scope.push((n.clone(), var.clone()));
                }
                let body = self.expr(body);
                self.scope.truncate(outer);
                Ok(Term::let_(var, ty, bound, body?))
            }
        }
    }

    fn comatch(&self, label: Label, cocases: Vec<cs::Cocase>) -> Term {
        let closure = self.closure(
            cocases.iter().map(|c| (c.binders.iter().map(|b| b.var.clone()).collect(), body_term(&c.body))),
            std::slice::from_ref(&label.self_var),
        );
        Term::Comatch(Arc::new(cs::ComatchTerm { label, closure, cocases: Clauses::new(cocases) }))
    }

    fn name(&mut self, name: &ast::Ident, args: Option<&[ast::Arg]>) -> Result<Term, SurfaceError> {
        if args.is_none() {
            if let Some(v) = self.lookup(&name.name) {
                return Ok(Term::Var(v.clone()));
            }
            if let Some(v) = self.g.lets.get(&name.name) {
                return Ok(Term::Var(v.clone()));
            }
        } else if self.lookup(&name.name).is_some() || self.g.lets.contains_key(&name.name) {
            return Err(SurfaceError::new(
                "name.not-callable",
                name.span,
                format!("`{}` is a variable and takes no arguments", name.name),
            ));
        }
        let given = args.unwrap_or(&[]);
        if let Some(shape) = self.g.ctors.get(&name.name).cloned() {
            let args = self.args(given, &shape, name)?;
            return Ok(Term::Ctor(name.name.as_str().into(), args));
        }
        if let Some(info) = self.g.codefs.get(&name.name) {
            let (shape, label, params, cocases) =
                (info.shape.clone(), info.label.clone(), info.params.clone(), info.cocases.clone());
            let args = self.args(given, &shape, name)?;
            return Ok(Term::Comatch(Arc::new(cs::ComatchTerm { label, closure: Closure { params, args }, cocases })));
        }
        if let Some(shape) = self.g.types.get(&name.name).cloned() {
            let args = self.args(given, &shape, name)?;
            return Ok(Term::TyCtor(name.name.as_str().into(), args));
        }
        Err(unknown(name, "identifier"))
    }

    /// `n` is `S(...S(Z))` with whatever `S` and `Z` are in scope.
    fn numeral(&mut self, n: u64, span: Span) -> Result<Term, SurfaceError> {
        let z = ast::Ident { name: "Z".into(), span };
        let s = ast::Ident { name: "S".into(), span };
        if !(self.g.ctors.contains_key("Z") || self.g.codefs.contains_key("Z"))
            || !(self.g.ctors.contains_key("S") || self.g.codefs.contains_key("S"))
        {
            return Err(SurfaceError::new("sugar.no-nat", span, "number literals need `Z` and `S` in scope"));
        }
        let mut t = self.name(&z, None)?;
        for _ in 0..n {
            t = self.apply_s(&s, t)?;
        }
        Ok(t)
    }

    fn apply_s(&mut self, s: &ast::Ident, arg: Term) -> Result<Term, SurfaceError> {
        let shape = self
            .g
            .ctors
            .get("S")
            .cloned()
            .or_else(|| self.g.codefs.get("S").map(|i| i.shape.clone()))
            .expect("checked");
        if shape.explicit_count() != 1 || shape.params.len() != 1 {
            return Err(SurfaceError::new("sugar.no-nat", s.span, "number literals need `S` with one parameter"));
        }
        let args = vec![Arg::explicit(arg)];
        if self.g.ctors.contains_key("S") {
            return Ok(Term::Ctor("S".into(), args));
        }
        let info = &self.g.codefs["S"];
        Ok(Term::Comatch(Arc::new(cs::ComatchTerm {
            label: info.label.clone(),
            closure: Closure { params: info.params.clone(), args },
            cocases: info.cocases.clone(),
        })))
    }
}

fn binder_var(b: &ast::Binder) -> Var {
    Var::fresh(b.name.as_deref().unwrap_or("_"))
}

fn body_term(b: &Body) -> Option<Term> {
    match b {
        Body::Expr(e) => Some(e.clone()),
        Body::Absurd => None,
    }
}

fn unknown(name: &ast::Ident, what: &str) -> SurfaceError {
    SurfaceError::new("name.unknown", name.span, format!("unknown {what} `{}`", name.name))
}
