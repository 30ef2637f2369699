//! Printing terms and declarations in surface syntax.
//!
//! Output re-parses to the same core term up to α-equality and label
//! identity. Every argument is printed, implicit or not. Local variables that
//! share a display name are disambiguated with a numeric suffix.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write};

use crate::decl::*;
use crate::syntax::*;

#[derive(Default)]
pub struct Printer {
    names: HashMap<u32, String>,
    used: HashMap<String, u32>,
    reserved: HashSet<String>,
    /// Print unsolved metas as `_` so the output parses; otherwise `?n`.
    pub holes: bool,
}

const KEYWORDS: &[&str] = &[
    "data", "codata", "def", "codef", "let", "match", "comatch", "as", "return", "absurd", "implicit", "Type",
];

impl Printer {
    pub fn new() -> Printer {
        Printer::default()
    }

    /// Printer that avoids the given global names for local variables.
    pub fn with_reserved(names: impl IntoIterator<Item = String>) -> Printer {
        Printer { reserved: names.into_iter().collect(), ..Printer::default() }
    }

    pub fn reserved_for(prog: &Program) -> Printer {
        let mut names = Vec::new();
        for d in &prog.decls {
            names.push(d.name().to_string());
            match d {
                Decl::Data(dd) => names.extend(dd.ctors.iter().map(|c| c.name.to_string())),
                Decl::Codata(cd) => names.extend(cd.dtors.iter().map(|x| x.name.to_string())),
                _ => {}
            }
        }
        Printer::with_reserved(names)
    }

    pub fn var(&mut self, v: &Var) -> String {
        if let Some(n) = self.names.get(&v.id) {
            return n.clone();
        }
        let base: &str = if v.name.is_empty() || &*v.name == "_" { "x" } else { &v.name };
        let mut cand = base.to_string();
        let mut i = 1;
        while self.used.get(&cand).is_some_and(|id| *id != v.id)
            || self.reserved.contains(&cand)
            || KEYWORDS.contains(&cand.as_str())
        {
            cand = format!("{base}{i}");
            i += 1;
        }
        self.used.insert(cand.clone(), v.id);
        self.names.insert(v.id, cand.clone());
        cand
    }

    fn binder(&mut self, b: &Var, used_in: &BodyFv) -> String {
        if &*b.name == "_" && !used_in.contains(b) {
            "_".to_string()
        } else {
            self.var(b)
        }
    }

    pub fn term(&mut self, t: &Term) -> String {
        let mut s = String::new();
        self.write_term(&mut s, t);
        s
    }

    fn args(&mut self, out: &mut String, args: &Args) {
        out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.write_term(out, &a.term);
        }
        out.push(')');
    }

    fn opt_args(&mut self, out: &mut String, args: &Args) {
        if !args.is_empty() {
            self.args(out, args);
        }
    }

    /// Heads of postfix operations must not swallow the `.name` that follows.
    fn head(&mut self, out: &mut String, t: &Term) {
        match t {
            Term::Let(_) => {
                out.push('(');
                self.write_term(out, t);
                out.push(')');
            }
            _ => self.write_term(out, t),
        }
    }

    pub fn write_term(&mut self, out: &mut String, t: &Term) {
        match t {
            Term::Var(v) => {
                let n = self.var(v);
                out.push_str(&n);
            }
            Term::Ann(e, ty) => {
                out.push('(');
                self.write_term(out, e);
                out.push_str(" : ");
                self.write_term(out, ty);
                out.push(')');
            }
            Term::Let(l) => {
                let x = self.var(&l.var);
                let _ = write!(out, "let {x}: ");
                self.write_term(out, &l.ty);
                out.push_str(" := ");
                self.write_term(out, &l.bound);
                out.push_str("; ");
                self.write_term(out, &l.body);
            }
            Term::Type => out.push_str("Type"),
            Term::TyCtor(n, a) | Term::Ctor(n, a) => {
                out.push_str(n);
                self.opt_args(out, a);
            }
            Term::Dtor(e, n, a) => {
                self.head(out, e);
                let _ = write!(out, ".{n}");
                self.opt_args(out, a);
            }
            Term::Match(m) => self.write_match(out, m),
            Term::Comatch(c) => self.write_comatch(out, c),
            Term::Meta(a, theta) => {
                if self.holes {
                    out.push('_');
                } else {
                    let _ = write!(out, "?{}", a.0);
                    if !theta.is_empty() {
                        out.push('[');
                        for (i, (x, e)) in theta.0.iter().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            let n = self.var(x);
                            let _ = write!(out, "{n} := ");
                            self.write_term(out, e);
                        }
                        out.push(']');
                    }
                }
            }
        }
    }

    fn write_match(&mut self, out: &mut String, m: &MatchTerm) {
        self.head(out, &m.scrutinee);
        if m.label.kind == LabelKind::Def {
            let _ = write!(out, ".{}", m.label.name);
            self.opt_args(out, &m.closure.args);
            return;
        }
        out.push_str(".match");
        if let Some(mt) = &m.motive {
            let z = self.var(&m.motive_binder);
            let _ = write!(out, " as {z} return ");
            self.write_term(out, mt);
        }
        out.push_str(" {");
        let closure = closure_subst(&m.closure);
        let cases = m.cases.get();
        for (i, c) in cases.iter().enumerate() {
            out.push_str(if i > 0 { ", " } else { " " });
            out.push_str(&c.ctor);
            self.clause(out, &c.binders, &c.body, &closure, false);
        }
        out.push_str(if cases.is_empty() { "}" } else { " }" });
    }

    fn write_comatch(&mut self, out: &mut String, c: &ComatchTerm) {
        if c.label.kind == LabelKind::Codef {
            out.push_str(&c.label.name);
            self.opt_args(out, &c.closure.args);
            return;
        }
        let name = self.var(&c.label.self_var);
        let _ = write!(out, "comatch {name} {{");
        let closure = closure_subst(&c.closure);
        let cocases = c.cocases.get();
        for (i, o) in cocases.iter().enumerate() {
            out.push_str(if i > 0 { ", " } else { " " });
            let _ = write!(out, ".{}", o.dtor);
            self.clause(out, &o.binders, &o.body, &closure, true);
        }
        out.push_str(if cocases.is_empty() { "}" } else { " }" });
    }

    fn clause(&mut self, out: &mut String, binders: &[Binder], body: &Body, closure: &Subst, parens_if_empty: bool) {
        let body_t = match body {
            Body::Expr(e) => Some(subst_apply(e, closure)),
            Body::Absurd => None,
        };
        let fv = BodyFv(body_t.as_ref().map(free_vars).unwrap_or_default());
        if !binders.is_empty() {
            out.push('(');
            for (i, b) in binders.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let n = self.binder(&b.var, &fv);
                out.push_str(&n);
            }
            out.push(')');
        } else if parens_if_empty {
            // `.d` alone is fine; keep the clause compact.
        }
        match body_t {
            Some(e) => {
                out.push_str(" => ");
                self.write_term(out, &e);
            }
            None => out.push_str(" absurd"),
        }
    }

    fn tele(&mut self, out: &mut String, tele: &Telescope) {
        out.push('(');
        for (i, p) in tele.0.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if p.implicit {
                out.push_str("implicit ");
            }
            let n = self.var(&p.var);
            let _ = write!(out, "{n}: ");
            self.write_term(out, &p.ty);
        }
        out.push(')');
    }

    fn opt_tele(&mut self, out: &mut String, tele: &Telescope) {
        if !tele.is_empty() {
            self.tele(out, tele);
        }
    }

    pub fn decl(&mut self, d: &Decl) -> String {
        let mut out = String::new();
        match d {
            Decl::Data(dd) => {
                let _ = write!(out, "data {}", dd.name);
                self.opt_tele(&mut out, &dd.indices);
                out.push_str(" {\n");
                for c in &dd.ctors {
                    let _ = write!(out, "    {}", c.name);
                    self.opt_tele(&mut out, &c.params);
                    let _ = write!(out, ": {}", dd.name);
                    self.opt_args(&mut out, &c.result_args);
                    out.push_str(",\n");
                }
                out.push('}');
            }
            Decl::Codata(cd) => {
                let _ = write!(out, "codata {}", cd.name);
                self.opt_tele(&mut out, &cd.indices);
                out.push_str(" {\n");
                for x in &cd.dtors {
                    let s = self.var(&x.self_var);
                    let _ = write!(out, "    ({s}: {}", cd.name);
                    self.opt_args(&mut out, &x.self_args);
                    let _ = write!(out, ").{}", x.name);
                    self.opt_tele(&mut out, &x.params);
                    out.push_str(": ");
                    self.write_term(&mut out, &x.ret);
                    out.push_str(",\n");
                }
                out.push('}');
            }
            Decl::Def(df) => {
                let s = self.var(&df.self_var);
                let _ = write!(out, "def ({s}: {}", df.self_type);
                self.opt_args(&mut out, &df.self_args);
                let _ = write!(out, ").{}", df.name);
                self.opt_tele(&mut out, &df.params);
                out.push_str(": ");
                self.write_term(&mut out, &df.ret);
                out.push_str(" {\n");
                for c in df.cases.get().iter() {
                    let _ = write!(out, "    {}", c.ctor);
                    self.clause(&mut out, &c.binders, &c.body, &Subst::empty(), false);
                    out.push_str(",\n");
                }
                out.push('}');
            }
            Decl::Codef(cf) => {
                let _ = write!(out, "codef {}", cf.name);
                self.opt_tele(&mut out, &cf.params);
                let _ = write!(out, ": {}", cf.ty_name);
                self.opt_args(&mut out, &cf.ty_args);
                out.push_str(" {\n");
                for o in cf.cocases.get().iter() {
                    let _ = write!(out, "    .{}", o.dtor);
                    self.clause(&mut out, &o.binders, &o.body, &Subst::empty(), true);
                    out.push_str(",\n");
                }
                out.push('}');
            }
            Decl::Let(l) => {
                let n = self.var(&l.var);
                let _ = write!(out, "let {n}: ");
                self.write_term(&mut out, &l.ty);
                out.push_str(" {\n    ");
                self.write_term(&mut out, &l.body);
                out.push_str("\n}");
            }
        }
        out
    }
}

struct BodyFv(std::collections::BTreeSet<Var>);

impl BodyFv {
    fn contains(&self, v: &Var) -> bool {
        self.0.contains(v)
    }
}

fn closure_subst(c: &Closure) -> Subst {
    if c.is_identity() {
        Subst::empty()
    } else {
        c.as_subst()
    }
}

/// Print a whole program, one declaration per paragraph.
pub fn print_program(prog: &Program) -> String {
    print_decls(prog, |_| true)
}

/// Print the declarations selected by `keep`, naming variables consistently
/// with the whole program.
pub fn print_decls(prog: &Program, keep: impl Fn(&Decl) -> bool) -> String {
    let mut p = Printer::reserved_for(prog);
    p.holes = true;
    let mut out = String::new();
    for d in &prog.decls {
        // Top-level let names are globals; pin them before printing bodies.
        if let Decl::Let(l) = d {
            p.names.insert(l.var.id, l.var.name.to_string());
            p.used.insert(l.var.name.to_string(), l.var.id);
        }
    }
    for d in prog.decls.iter().filter(|d| keep(d)) {
        out.push_str(&p.decl(d));
        out.push_str("\n\n");
    }
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().term(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_constructors_and_destructors() {
        let t = Term::dtor(Term::ctor("S", args_of([Term::ctor("Z", vec![])])), "add", args_of([Term::ctor("Z", vec![])]));
        assert_eq!(t.to_string(), "S(Z).add(Z)");
    }

    #[test]
    fn distinct_vars_get_distinct_names() {
        let a = Var::fresh("x");
        let b = Var::fresh("x");
        let t = Term::ctor("P", args_of([Term::var(&a), Term::var(&b)]));
        assert_eq!(t.to_string(), "P(x, x1)");
    }

    #[test]
    fn closure_is_substituted_into_bodies() {
        let y = Var::fresh("y");
        let z = Var::fresh("z");
        let label = Label::new("x", "t", LabelKind::Local);
        let c = Term::Comatch(std::sync::Arc::new(ComatchTerm {
            label,
            closure: Closure { params: vec![y.clone()], args: args_of([Term::ctor("N42", vec![])]) },
            cocases: Clauses::new(vec![Cocase {
                dtor: "ap".into(),
                binders: vec![Binder { var: z, implicit: false }],
                body: Body::Expr(Term::var(&y)),
            }]),
        }));
        assert_eq!(c.to_string(), "comatch x { .ap(z) => N42 }");
    }
}
