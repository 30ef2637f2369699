//! Surface syntax tree. Every node carries its source span.

use codata_core::decl::Span;

#[derive(Debug, Clone)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

/// A binding occurrence; `None` for `_`.
#[derive(Debug, Clone)]
pub struct Binder {
    pub name: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Arg {
    /// `name := value`
    pub name: Option<Ident>,
    pub value: Expr,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub binder: Binder,
    pub ty: Expr,
    pub implicit: bool,
}

#[derive(Debug, Clone)]
pub enum Expr {
    /// A name, possibly applied: variable, constructor, codefinition or type.
    Name { name: Ident, args: Option<Vec<Arg>> },
    Hole(Span),
    Type(Span),
    Int(u64, Span),
    /// `e.name(args)`: destructor or definition call.
    Dot { recv: Box<Expr>, name: Ident, args: Option<Vec<Arg>>, span: Span },
    Match { scrutinee: Box<Expr>, motive: Option<(Binder, Box<Expr>)>, cases: Vec<Case>, span: Span },
    Comatch { name: Option<Ident>, cocases: Vec<Cocase>, span: Span },
    /// `\d(binders) => body`
    Lambda { dtor: Ident, binders: Option<Vec<Binder>>, body: Box<Expr>, span: Span },
    Arrow(Box<Expr>, Box<Expr>, Span),
    Ann(Box<Expr>, Box<Expr>, Span),
    Let { binder: Binder, ty: Option<Box<Expr>>, bound: Box<Expr>, body: Box<Expr>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Name { name, .. } => name.span,
            Expr::Hole(s) | Expr::Type(s) | Expr::Int(_, s) => *s,
            Expr::Dot { span, .. }
            | Expr::Match { span, .. }
            | Expr::Comatch { span, .. }
            | Expr::Lambda { span, .. }
            | Expr::Arrow(_, _, span)
            | Expr::Ann(_, _, span)
            | Expr::Let { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub ctor: Ident,
    pub binders: Option<Vec<Binder>>,
    /// `None` for an absurd clause.
    pub body: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Cocase {
    pub dtor: Ident,
    pub binders: Option<Vec<Binder>>,
    pub body: Option<Expr>,
    pub span: Span,
}

/// `T(args)` in a position that must name a type.
#[derive(Debug, Clone)]
pub struct TypeHead {
    pub name: Ident,
    pub args: Option<Vec<Arg>>,
}

#[derive(Debug, Clone)]
pub struct CtorDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub result: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct DtorDecl {
    pub self_binder: Option<Binder>,
    pub self_ty: Option<TypeHead>,
    pub name: Ident,
    pub params: Vec<Param>,
    pub ret: Expr,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Decl {
    Data { name: Ident, indices: Vec<Param>, ctors: Vec<CtorDecl>, span: Span },
    Codata { name: Ident, indices: Vec<Param>, dtors: Vec<DtorDecl>, span: Span },
    Def { self_binder: Option<Binder>, self_ty: TypeHead, name: Ident, params: Vec<Param>, ret: Expr, cases: Vec<Case>, span: Span },
    Codef { name: Ident, params: Vec<Param>, ty: TypeHead, cocases: Vec<Cocase>, span: Span },
    Let { name: Ident, ty: Expr, body: Expr, span: Span },
}

impl Decl {
    pub fn span(&self) -> Span {
        match self {
            Decl::Data { span, .. }
            | Decl::Codata { span, .. }
            | Decl::Def { span, .. }
            | Decl::Codef { span, .. }
            | Decl::Let { span, .. } => *span,
        }
    }
}
