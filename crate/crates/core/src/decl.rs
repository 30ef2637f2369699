//! Telescopes, typing contexts, declarations and the global program.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::syntax::*;

/// Byte range in a source file. `file` indexes the driver's source table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub file: u32,
    pub start: u32,
    pub end: u32,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub var: Var,
    pub ty: Term,
    pub implicit: bool,
}

/// Dependent parameter list: each type may mention earlier parameters.
#[derive(Clone, Debug, Default)]
pub struct Telescope(pub Vec<Param>);

impl Telescope {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.0.iter().map(|p| p.var.clone()).collect()
    }

    /// Substitution sending each parameter to the matching argument.
    pub fn bind_args(&self, args: &Args) -> Subst {
        Subst(self.0.iter().zip(args).map(|(p, a)| (p.var.clone(), a.term.clone())).collect())
    }

    /// Rename the parameters to `vars`, rewriting later types accordingly.
    /// Returns the renamed telescope and the renaming.
    pub fn rename(&self, vars: &[Var]) -> (Telescope, Subst) {
        let mut ren = Subst::empty();
        let mut out = Vec::with_capacity(self.0.len());
        for (p, v) in self.0.iter().zip(vars) {
            out.push(Param { var: v.clone(), ty: subst_apply(&p.ty, &ren), implicit: p.implicit });
            ren.0.push((p.var.clone(), Term::Var(v.clone())));
        }
        (Telescope(out), ren)
    }

    /// Rename every parameter to a fresh variable.
    pub fn freshen(&self) -> (Telescope, Subst) {
        let vars: Vec<Var> = self.0.iter().map(|p| p.var.refresh()).collect();
        self.rename(&vars)
    }

    pub fn identity_args(&self) -> Args {
        self.0
            .iter()
            .map(|p| Arg { term: Term::Var(p.var.clone()), implicit: p.implicit })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CtxEntry {
    pub var: Var,
    pub ty: Term,
    pub body: Option<Term>,
    /// Set when index unification turned the entry into a definition.
    pub marked: bool,
}

/// Typing context, innermost binding last.
#[derive(Clone, Debug, Default)]
pub struct Ctx {
    pub entries: Vec<CtxEntry>,
}

impl Ctx {
    pub fn new() -> Ctx {
        Ctx::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, var: Var, ty: Term) {
        self.entries.push(CtxEntry { var, ty, body: None, marked: false });
    }

    pub fn push_def(&mut self, var: Var, ty: Term, body: Term) {
        self.entries.push(CtxEntry { var, ty, body: Some(body), marked: false });
    }

    pub fn extended(&self, var: Var, ty: Term) -> Ctx {
        let mut c = self.clone();
        c.push(var, ty);
        c
    }

    pub fn push_tele(&mut self, tele: &Telescope) {
        for p in &tele.0 {
            self.push(p.var.clone(), p.ty.clone());
        }
    }

    pub fn lookup(&self, v: &Var) -> Option<&CtxEntry> {
        self.entries.iter().rev().find(|e| &e.var == v)
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.lookup(v).is_some()
    }

    pub fn position(&self, v: &Var) -> Option<usize> {
        self.entries.iter().rposition(|e| &e.var == v)
    }

    /// Identity substitution over the entries without a body. Metas created
    /// in this context depend on exactly these variables.
    pub fn identity_subst(&self) -> Subst {
        Subst(
            self.entries
                .iter()
                .filter(|e| e.body.is_none())
                .map(|e| (e.var.clone(), Term::Var(e.var.clone())))
                .collect(),
        )
    }

    /// Apply `theta` to every type and body, turning the variables of its
    /// domain into definitions.
    pub fn subst(&self, theta: &Subst) -> Ctx {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let ty = subst_apply(&e.ty, theta);
                match theta.get(&e.var) {
                    Some(t) => CtxEntry { var: e.var.clone(), ty, body: Some(t.clone()), marked: true },
                    None => CtxEntry {
                        var: e.var.clone(),
                        ty,
                        body: e.body.as_ref().map(|b| subst_apply(b, theta)),
                        marked: e.marked,
                    },
                }
            })
            .collect();
        Ctx { entries }
    }
}

#[derive(Clone, Debug)]
pub struct Ctor {
    pub name: Name,
    pub params: Telescope,
    pub result_args: Args,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct DataDecl {
    pub name: Name,
    pub indices: Telescope,
    pub ctors: Vec<Ctor>,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct Dtor {
    pub name: Name,
    /// Scoped over `params`.
    pub self_args: Args,
    pub self_var: Var,
    pub params: Telescope,
    /// Scoped over `params` and `self_var`.
    pub ret: Term,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct CodataDecl {
    pub name: Name,
    pub indices: Telescope,
    pub dtors: Vec<Dtor>,
    pub span: Span,
}

/// Top-level pattern match: `def (self: T(self_args)).name(params): ret { cases }`.
#[derive(Clone, Debug)]
pub struct DefDecl {
    pub name: Name,
    pub label: Label,
    pub params: Telescope,
    pub self_var: Var,
    pub self_type: Name,
    pub self_args: Args,
    pub ret: Term,
    pub cases: Clauses<Case>,
    pub span: Span,
}

/// Top-level copattern match: `codef name(params): T(ty_args) { cocases }`.
#[derive(Clone, Debug)]
pub struct CodefDecl {
    pub name: Name,
    pub label: Label,
    pub params: Telescope,
    pub ty_name: Name,
    pub ty_args: Args,
    pub cocases: Clauses<Cocase>,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct LetDecl {
    pub var: Var,
    pub ty: Term,
    pub body: Term,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum Decl {
    Data(Arc<DataDecl>),
    Codata(Arc<CodataDecl>),
    Def(Arc<DefDecl>),
    Codef(Arc<CodefDecl>),
    Let(Arc<LetDecl>),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Data(d) => &d.name,
            Decl::Codata(d) => &d.name,
            Decl::Def(d) => &d.name,
            Decl::Codef(d) => &d.name,
            Decl::Let(d) => &d.var.name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Decl::Data(d) => d.span,
            Decl::Codata(d) => d.span,
            Decl::Def(d) => d.span,
            Decl::Codef(d) => d.span,
            Decl::Let(d) => d.span,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeKind {
    Data,
    Codata,
}

/// The global environment: declarations in source order with lookup tables.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
    types: BTreeMap<Name, usize>,
    ctors: BTreeMap<Name, (usize, usize)>,
    dtors: BTreeMap<Name, (usize, usize)>,
    defs: BTreeMap<Name, usize>,
    codefs: BTreeMap<Name, usize>,
    labels: HashMap<u32, usize>,
    lets: BTreeMap<Name, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateName(pub String);

impl Program {
    pub fn new() -> Program {
        Program::default()
    }

    pub fn push(&mut self, d: Decl) -> Result<usize, DuplicateName> {
        let idx = self.decls.len();
        let dup = |n: &Name| DuplicateName(n.to_string());
        match &d {
            Decl::Data(dd) => {
                if self.types.contains_key(&dd.name) {
                    return Err(dup(&dd.name));
                }
                for c in &dd.ctors {
                    if self.ctors.contains_key(&c.name) || self.codefs.contains_key(&c.name) {
                        return Err(dup(&c.name));
                    }
                }
                self.types.insert(dd.name.clone(), idx);
                for (i, c) in dd.ctors.iter().enumerate() {
                    self.ctors.insert(c.name.clone(), (idx, i));
                }
            }
            Decl::Codata(cd) => {
                if self.types.contains_key(&cd.name) {
                    return Err(dup(&cd.name));
                }
                for x in &cd.dtors {
                    if self.dtors.contains_key(&x.name) || self.defs.contains_key(&x.name) {
                        return Err(dup(&x.name));
                    }
                }
                self.types.insert(cd.name.clone(), idx);
                for (i, x) in cd.dtors.iter().enumerate() {
                    self.dtors.insert(x.name.clone(), (idx, i));
                }
            }
            Decl::Def(df) => {
                if self.defs.contains_key(&df.name) || self.dtors.contains_key(&df.name) {
                    return Err(dup(&df.name));
                }
                self.defs.insert(df.name.clone(), idx);
                self.labels.insert(df.label.id, idx);
            }
            Decl::Codef(cf) => {
                if self.codefs.contains_key(&cf.name) || self.ctors.contains_key(&cf.name) {
                    return Err(dup(&cf.name));
                }
                self.codefs.insert(cf.name.clone(), idx);
                self.labels.insert(cf.label.id, idx);
            }
            Decl::Let(l) => {
                if self.lets.contains_key(&l.var.name) {
                    return Err(dup(&l.var.name));
                }
                self.lets.insert(l.var.name.clone(), idx);
            }
        }
        self.decls.push(d);
        Ok(idx)
    }

    /// Swap in an elaborated version of a declaration. Names must not change.
    pub fn replace(&mut self, idx: usize, d: Decl) {
        debug_assert_eq!(self.decls[idx].name(), d.name());
        self.decls[idx] = d;
    }

    pub fn type_kind(&self, name: &str) -> Option<TypeKind> {
        match &self.decls[*self.types.get(name)?] {
            Decl::Data(_) => Some(TypeKind::Data),
            Decl::Codata(_) => Some(TypeKind::Codata),
            _ => None,
        }
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.get(name).copied()
    }

    pub fn type_indices(&self, name: &str) -> Option<&Telescope> {
        match &self.decls[*self.types.get(name)?] {
            Decl::Data(d) => Some(&d.indices),
            Decl::Codata(d) => Some(&d.indices),
            _ => None,
        }
    }

    pub fn data(&self, name: &str) -> Option<&Arc<DataDecl>> {
        match &self.decls[*self.types.get(name)?] {
            Decl::Data(d) => Some(d),
            _ => None,
        }
    }

    pub fn codata(&self, name: &str) -> Option<&Arc<CodataDecl>> {
        match &self.decls[*self.types.get(name)?] {
            Decl::Codata(d) => Some(d),
            _ => None,
        }
    }

    pub fn ctor(&self, name: &str) -> Option<(&Arc<DataDecl>, &Ctor)> {
        let (d, i) = *self.ctors.get(name)?;
        match &self.decls[d] {
            Decl::Data(dd) => Some((dd, &dd.ctors[i])),
            _ => None,
        }
    }

    pub fn ctor_location(&self, name: &str) -> Option<(usize, usize)> {
        self.ctors.get(name).copied()
    }

    pub fn dtor(&self, name: &str) -> Option<(&Arc<CodataDecl>, &Dtor)> {
        let (d, i) = *self.dtors.get(name)?;
        match &self.decls[d] {
            Decl::Codata(cd) => Some((cd, &cd.dtors[i])),
            _ => None,
        }
    }

    pub fn dtor_location(&self, name: &str) -> Option<(usize, usize)> {
        self.dtors.get(name).copied()
    }

    pub fn def(&self, name: &str) -> Option<&Arc<DefDecl>> {
        match &self.decls[*self.defs.get(name)?] {
            Decl::Def(d) => Some(d),
            _ => None,
        }
    }

    pub fn codef(&self, name: &str) -> Option<&Arc<CodefDecl>> {
        match &self.decls[*self.codefs.get(name)?] {
            Decl::Codef(d) => Some(d),
            _ => None,
        }
    }

    pub fn decl_of_label(&self, label_id: u32) -> Option<usize> {
        self.labels.get(&label_id).copied()
    }

    pub fn def_by_label(&self, label_id: u32) -> Option<&Arc<DefDecl>> {
        match &self.decls[*self.labels.get(&label_id)?] {
            Decl::Def(d) => Some(d),
            _ => None,
        }
    }

    pub fn codef_by_label(&self, label_id: u32) -> Option<&Arc<CodefDecl>> {
        match &self.decls[*self.labels.get(&label_id)?] {
            Decl::Codef(d) => Some(d),
            _ => None,
        }
    }

    pub fn let_decl(&self, name: &str) -> Option<&Arc<LetDecl>> {
        match &self.decls[*self.lets.get(name)?] {
            Decl::Let(d) => Some(d),
            _ => None,
        }
    }

    pub fn def_index(&self, name: &str) -> Option<usize> {
        self.defs.get(name).copied()
    }

    pub fn codef_index(&self, name: &str) -> Option<usize> {
        self.codefs.get(name).copied()
    }

    pub fn let_index(&self, name: &str) -> Option<usize> {
        self.lets.get(name).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ctx_subst_marks_domain() {
        // (a: Type, y: a, z: Type := a)[a := Nat]
        let a = Var::fresh("a");
        let y = Var::fresh("y");
        let z = Var::fresh("z");
        let mut ctx = Ctx::new();
        ctx.push(a.clone(), Term::Type);
        ctx.push(y.clone(), Term::var(&a));
        ctx.push_def(z.clone(), Term::Type, Term::var(&a));
        let nat = Term::tyctor("Nat", vec![]);
        let out = ctx.subst(&Subst::single(a.clone(), nat.clone()));
        let e = &out.entries;
        assert!(e[0].marked && alpha_eq(e[0].body.as_ref().unwrap(), &nat));
        assert!(e[1].body.is_none() && alpha_eq(&e[1].ty, &nat));
        assert!(alpha_eq(e[2].body.as_ref().unwrap(), &nat));
        assert!(!e[2].marked);
    }

    #[test]
    fn ctx_subst_empty_is_identity() {
        let a = Var::fresh("a");
        let mut ctx = Ctx::new();
        ctx.push(a.clone(), Term::Type);
        let out = ctx.subst(&Subst::empty());
        assert_eq!(out.len(), 1);
        assert!(out.entries[0].body.is_none());
    }

    #[test]
    fn identity_subst_skips_bodied_entries() {
        let a = Var::fresh("a");
        let b = Var::fresh("b");
        let mut ctx = Ctx::new();
        ctx.push(a.clone(), Term::Type);
        ctx.push_def(b.clone(), Term::Type, Term::var(&a));
        let id = ctx.identity_subst();
        assert_eq!(id.len(), 1);
        assert!(id.get(&a).is_some() && id.get(&b).is_none());
    }

    #[test]
    fn telescope_rename_rewrites_later_types() {
        let a = Var::fresh("a");
        let x = Var::fresh("x");
        let tele = Telescope(vec![
            Param { var: a.clone(), ty: Term::Type, implicit: true },
            Param { var: x.clone(), ty: Term::var(&a), implicit: false },
        ]);
        let (t2, _) = tele.freshen();
        assert!(alpha_eq(&t2.0[1].ty, &Term::var(&t2.0[0].var)));
        assert!(t2.0[0].implicit);
    }
}
