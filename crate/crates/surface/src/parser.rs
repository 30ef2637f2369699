//! Recursive descent parser. On failure it reports the set of tokens it would
//! have accepted at the furthest position reached.

use codata_core::decl::Span;

use crate::ast::*;
use crate::lexer::{lex, Tok, Token};
use crate::SurfaceError;

pub fn parse(file: u32, src: &str) -> Result<Vec<Decl>, SurfaceError> {
    let tokens = lex(file, src)?;
    let mut p = Parser { tokens, pos: 0, expected: Vec::new() };
    let mut decls = Vec::new();
    while !p.at(&Tok::Eof) {
        decls.push(p.decl()?);
    }
    Ok(decls)
}

/// Parse a single expression, e.g. for tests and the command line.
pub fn parse_expr(file: u32, src: &str) -> Result<Expr, SurfaceError> {
    let tokens = lex(file, src)?;
    let mut p = Parser { tokens, pos: 0, expected: Vec::new() };
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    expected: Vec<String>,
}

fn join(a: Span, b: Span) -> Span {
    Span { file: a.file, start: a.start.min(b.start), end: a.end.max(b.end) }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        self.expected.clear();
        t
    }

    /// Test for a token without consuming it; remembers it as expected.
    fn at(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            true
        } else {
            self.expected.push(t.describe());
            false
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<Span, SurfaceError> {
        if self.at(t) {
            Ok(self.bump().span)
        } else {
            Err(self.error())
        }
    }

    fn error(&mut self) -> SurfaceError {
        let mut exp = std::mem::take(&mut self.expected);
        exp.sort();
        exp.dedup();
        let found = self.peek().describe();
        SurfaceError::new(
            "parse.syntax",
            self.span(),
            format!("unexpected {found}; expected {}", exp.join(", ")),
        )
        .with_expected(exp)
    }

    fn ident(&mut self) -> Result<Ident, SurfaceError> {
        if let Tok::Ident(name) = self.peek().clone() {
            let span = self.bump().span;
            Ok(Ident { name, span })
        } else {
            self.expected.push("identifier".into());
            Err(self.error())
        }
    }

    fn binder(&mut self) -> Result<Binder, SurfaceError> {
        if self.at(&Tok::Underscore) {
            let span = self.bump().span;
            return Ok(Binder { name: None, span });
        }
        let id = self.ident()?;
        Ok(Binder { name: Some(id.name), span: id.span })
    }

    /// Comma separated list up to `close`, trailing comma allowed.
    fn list<T>(&mut self, close: &Tok, mut item: impl FnMut(&mut Self) -> Result<T, SurfaceError>) -> Result<Vec<T>, SurfaceError> {
        let mut out = Vec::new();
        loop {
            if self.eat(close) {
                return Ok(out);
            }
            out.push(item(self)?);
            if !self.eat(&Tok::Comma) {
                self.expect(close)?;
                return Ok(out);
            }
        }
    }

    // -- declarations -------------------------------------------------------

    fn decl(&mut self) -> Result<Decl, SurfaceError> {
        let start = self.span();
        if self.eat(&Tok::Data) {
            let name = self.ident()?;
            let indices = self.opt_params()?;
            self.expect(&Tok::LBrace)?;
            let ctors = self.list(&Tok::RBrace, Self::ctor_decl)?;
            return Ok(Decl::Data { name, indices, ctors, span: join(start, self.prev_span()) });
        }
        if self.eat(&Tok::Codata) {
            let name = self.ident()?;
            let indices = self.opt_params()?;
            self.expect(&Tok::LBrace)?;
            let dtors = self.list(&Tok::RBrace, Self::dtor_decl)?;
            return Ok(Decl::Codata { name, indices, dtors, span: join(start, self.prev_span()) });
        }
        if self.eat(&Tok::Def) {
            let (self_binder, self_ty) = self.def_self()?;
            self.expect(&Tok::Dot)?;
            let name = self.ident()?;
            let params = self.opt_params()?;
            self.expect(&Tok::Colon)?;
            let ret = self.expr()?;
            self.expect(&Tok::LBrace)?;
            let cases = self.list(&Tok::RBrace, Self::case)?;
            return Ok(Decl::Def { self_binder, self_ty, name, params, ret, cases, span: join(start, self.prev_span()) });
        }
        if self.eat(&Tok::Codef) {
            let name = self.ident()?;
            let params = self.opt_params()?;
            self.expect(&Tok::Colon)?;
            let ty = self.type_head()?;
            self.expect(&Tok::LBrace)?;
            let cocases = self.list(&Tok::RBrace, Self::cocase)?;
            return Ok(Decl::Codef { name, params, ty, cocases, span: join(start, self.prev_span()) });
        }
        if self.eat(&Tok::Let) {
            let name = self.ident()?;
            self.expect(&Tok::Colon)?;
            let ty = self.expr()?;
            self.expect(&Tok::LBrace)?;
            let body = self.expr()?;
            self.expect(&Tok::RBrace)?;
            return Ok(Decl::Let { name, ty, body, span: join(start, self.prev_span()) });
        }
        Err(self.error())
    }

    fn opt_params(&mut self) -> Result<Vec<Param>, SurfaceError> {
        if !self.eat(&Tok::LParen) {
            return Ok(Vec::new());
        }
        let groups = self.list(&Tok::RParen, Self::param_group)?;
        Ok(groups.into_iter().flatten().collect())
    }

    /// `[implicit] x y z: T`
    fn param_group(&mut self) -> Result<Vec<Param>, SurfaceError> {
        let implicit = self.eat(&Tok::Implicit);
        let mut binders = vec![self.binder()?];
        while !self.at(&Tok::Colon) {
            binders.push(self.binder()?);
        }
        self.expect(&Tok::Colon)?;
        let ty = self.expr()?;
        Ok(binders.into_iter().map(|binder| Param { binder, ty: ty.clone(), implicit }).collect())
    }

    fn type_head(&mut self) -> Result<TypeHead, SurfaceError> {
        let name = self.ident()?;
        let args = self.opt_args()?;
        Ok(TypeHead { name, args })
    }

    /// `(x: T(args))` or `T(args)` before the `.name` of a definition.
    fn def_self(&mut self) -> Result<(Option<Binder>, TypeHead), SurfaceError> {
        if self.eat(&Tok::LParen) {
            let b = self.binder()?;
            self.expect(&Tok::Colon)?;
            let ty = self.type_head()?;
            self.expect(&Tok::RParen)?;
            return Ok((Some(b), ty));
        }
        Ok((None, self.type_head()?))
    }

    fn ctor_decl(&mut self) -> Result<CtorDecl, SurfaceError> {
        let name = self.ident()?;
        let params = self.opt_params()?;
        let result = if self.eat(&Tok::Colon) { Some(self.expr()?) } else { None };
        Ok(CtorDecl { span: join(name.span, self.prev_span()), name, params, result })
    }

    fn dtor_decl(&mut self) -> Result<DtorDecl, SurfaceError> {
        let start = self.span();
        let (self_binder, self_ty) = if self.at(&Tok::Dot) {
            (None, None)
        } else {
            let (b, t) = self.def_self()?;
            (b, Some(t))
        };
        self.expect(&Tok::Dot)?;
        let name = self.ident()?;
        let params = self.opt_params()?;
        self.expect(&Tok::Colon)?;
        let ret = self.expr()?;
        Ok(DtorDecl { self_binder, self_ty, name, params, ret, span: join(start, self.prev_span()) })
    }

    fn opt_binders(&mut self) -> Result<Option<Vec<Binder>>, SurfaceError> {
        if self.eat(&Tok::LParen) {
            Ok(Some(self.list(&Tok::RParen, Self::binder)?))
        } else {
            Ok(None)
        }
    }

    fn clause_body(&mut self) -> Result<Option<Expr>, SurfaceError> {
        if self.eat(&Tok::Absurd) {
            return Ok(None);
        }
        self.expect(&Tok::FatArrow)?;
        Ok(Some(self.expr()?))
    }

    fn case(&mut self) -> Result<Case, SurfaceError> {
        let ctor = self.ident()?;
        let binders = self.opt_binders()?;
        let body = self.clause_body()?;
        Ok(Case { span: join(ctor.span, self.prev_span()), ctor, binders, body })
    }

    fn cocase(&mut self) -> Result<Cocase, SurfaceError> {
        let start = self.expect(&Tok::Dot)?;
        let dtor = self.ident()?;
        let binders = self.opt_binders()?;
        let body = self.clause_body()?;
        Ok(Cocase { dtor, binders, body, span: join(start, self.prev_span()) })
    }

    // -- expressions --------------------------------------------------------

    pub fn expr(&mut self) -> Result<Expr, SurfaceError> {
        let start = self.span();
        if self.eat(&Tok::Let) {
            let binder = self.binder()?;
            let ty = if self.eat(&Tok::Colon) { Some(Box::new(self.expr()?)) } else { None };
            self.expect(&Tok::ColonEq)?;
            let bound = Box::new(self.expr()?);
            self.expect(&Tok::Semi)?;
            let body = Box::new(self.expr()?);
            return Ok(Expr::Let { binder, ty, bound, body, span: join(start, self.prev_span()) });
        }
        if self.eat(&Tok::Backslash) {
            let dtor = self.ident()?;
            let binders = self.opt_binders()?;
            self.expect(&Tok::FatArrow)?;
            let body = Box::new(self.expr()?);
            return Ok(Expr::Lambda { dtor, binders, body, span: join(start, self.prev_span()) });
        }
        let lhs = self.postfix()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.expr()?;
            let span = join(lhs.span(), rhs.span());
            return Ok(Expr::Arrow(Box::new(lhs), Box::new(rhs), span));
        }
        Ok(lhs)
    }

    fn opt_args(&mut self) -> Result<Option<Vec<Arg>>, SurfaceError> {
        if self.eat(&Tok::LParen) {
            Ok(Some(self.list(&Tok::RParen, Self::arg)?))
        } else {
            Ok(None)
        }
    }

    fn arg(&mut self) -> Result<Arg, SurfaceError> {
        if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::ColonEq {
            let name = self.ident()?;
            self.bump();
            let value = self.expr()?;
            return Ok(Arg { name: Some(name), value });
        }
        Ok(Arg { name: None, value: self.expr()? })
    }

    fn postfix(&mut self) -> Result<Expr, SurfaceError> {
        let mut e = self.atom()?;
        while self.eat(&Tok::Dot) {
            if self.eat(&Tok::Match) {
                let motive = if self.eat(&Tok::As) {
                    let b = self.binder()?;
                    if !self.eat(&Tok::Return) {
                        self.expect(&Tok::FatArrow)?;
                    }
                    Some((b, Box::new(self.expr()?)))
                } else {
                    None
                };
                self.expect(&Tok::LBrace)?;
                let cases = self.list(&Tok::RBrace, Self::case)?;
                let span = join(e.span(), self.prev_span());
                e = Expr::Match { scrutinee: Box::new(e), motive, cases, span };
                continue;
            }
            let name = self.ident()?;
            let args = self.opt_args()?;
            let span = join(e.span(), self.prev_span());
            e = Expr::Dot { recv: Box::new(e), name, args, span };
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, SurfaceError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Ident(_) => {
                let name = self.ident()?;
                let args = self.opt_args()?;
                Ok(Expr::Name { name, args })
            }
            Tok::Underscore => Ok(Expr::Hole(self.bump().span)),
            Tok::Type => Ok(Expr::Type(self.bump().span)),
            Tok::Int(n) => Ok(Expr::Int(n, self.bump().span)),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if self.eat(&Tok::Colon) {
                    let ty = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Expr::Ann(Box::new(e), Box::new(ty), join(start, self.prev_span())));
                }
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Comatch => {
                self.bump();
                let name = if matches!(self.peek(), Tok::Ident(_)) { Some(self.ident()?) } else { None };
                self.expect(&Tok::LBrace)?;
                let cocases = self.list(&Tok::RBrace, Self::cocase)?;
                Ok(Expr::Comatch { name, cocases, span: join(start, self.prev_span()) })
            }
            _ => {
                for t in ["identifier", "`_`", "`Type`", "number", "`(`", "`comatch`", "`let`", "`\\`"] {
                    self.expected.push(t.to_string());
                }
                Err(self.error())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_with_two_nullary_constructors() {
        let d = parse(0, "data Bool { T, F }").unwrap();
        let Decl::Data { name, ctors, .. } = &d[0] else { panic!() };
        assert_eq!(name.name, "Bool");
        assert_eq!(ctors.len(), 2);
        assert!(ctors.iter().all(|c| c.params.is_empty() && c.result.is_none()));
    }

    #[test]
    fn let_with_nested_constructor_calls() {
        let d = parse(0, "let ex: Set(Nat) { Cons(1, Cons(2, Cons(3, Nil))) }").unwrap();
        let Decl::Let { name, body, .. } = &d[0] else { panic!() };
        assert_eq!(name.name, "ex");
        let Expr::Name { name, args: Some(args) } = body else { panic!() };
        assert_eq!(name.name, "Cons");
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn codata_with_one_destructor() {
        let d = parse(0, "codata Set { .insert(x: Nat): Set }").unwrap();
        let Decl::Codata { dtors, .. } = &d[0] else { panic!() };
        assert_eq!(dtors.len(), 1);
        assert_eq!(dtors[0].name.name, "insert");
        assert!(dtors[0].self_ty.is_none());
    }

    #[test]
    fn grouped_and_implicit_parameters() {
        let d = parse(0, "codata Fun(a b: Type) { Fun(a, b).ap(implicit a b: Type, x: a): b }").unwrap();
        let Decl::Codata { indices, dtors, .. } = &d[0] else { panic!() };
        assert_eq!(indices.len(), 2);
        assert_eq!(dtors[0].params.iter().filter(|p| p.implicit).count(), 2);
        assert_eq!(dtors[0].self_ty.as_ref().unwrap().args.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn match_with_motive_and_named_args() {
        let e = parse_expr(0, "b.match as z return Eq(Bool, z.not.not, z) { T => Refl(Bool, T), F absurd }").unwrap();
        let Expr::Match { motive: Some(_), cases, .. } = e else { panic!() };
        assert!(cases[1].body.is_none());
        let e = parse_expr(0, "P.ap(a:=Nat, b:=Type, Z)").unwrap();
        let Expr::Dot { args: Some(args), .. } = e else { panic!() };
        assert_eq!(args[0].name.as_ref().unwrap().name, "a");
    }

    #[test]
    fn arrow_is_right_associative_and_binds_loosest() {
        let e = parse_expr(0, "a.f -> b -> c").unwrap();
        let Expr::Arrow(l, r, _) = e else { panic!() };
        assert!(matches!(*l, Expr::Dot { .. }));
        assert!(matches!(*r, Expr::Arrow(..)));
    }

    #[test]
    fn lambda_and_local_let() {
        let e = parse_expr(0, r"let y := 42; \ap(_, _, z) => y").unwrap();
        let Expr::Let { body, ty: None, .. } = e else { panic!() };
        assert!(matches!(*body, Expr::Lambda { .. }));
    }

    #[test]
    fn syntax_error_lists_expected_tokens() {
        let err = parse(0, "data Bool { T F }").unwrap_err();
        assert_eq!(err.code, "parse.syntax");
        assert!(err.expected.contains(&"`,`".to_string()), "{:?}", err.expected);
        assert!(err.expected.contains(&"`}`".to_string()));
    }

    #[test]
    fn def_heads() {
        let d = parse(0, "def Set.is_empty: Bool { Nil => T, Cons(x, s) => F }").unwrap();
        assert!(matches!(&d[0], Decl::Def { self_binder: None, params, .. } if params.is_empty()));
        let d = parse(0, "def (n: Nat).ind(P: Nat -> Type): P.ap(n) { Z => _ }").unwrap();
        assert!(matches!(&d[0], Decl::Def { self_binder: Some(_), .. }));
    }
}
