//! Surface language: lexing, parsing and desugaring `.pol` files into core
//! declarations.

pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;

use codata_core::decl::Span;

pub use desugar::{desugar, Desugared};
pub use parser::{parse, parse_expr};

/// The standard prelude, prepended unless disabled.
pub const PRELUDE: &str = include_str!("../std/prelude.pol");
pub const PRELUDE_NAME: &str = "std/prelude.pol";

#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct SurfaceError {
    pub code: &'static str,
    pub span: Span,
    pub message: String,
    /// For syntax errors: the tokens that would have been accepted.
    pub expected: Vec<String>,
}

impl SurfaceError {
    pub fn new(code: &'static str, span: Span, message: impl Into<String>) -> SurfaceError {
        SurfaceError { code, span, message: message.into(), expected: Vec::new() }
    }

    pub fn with_expected(mut self, expected: Vec<String>) -> SurfaceError {
        self.expected = expected;
        self
    }
}

/// Loaded source files, indexed by `Span::file`.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub files: Vec<(String, String)>,
}

impl SourceMap {
    pub fn new() -> SourceMap {
        SourceMap::default()
    }

    pub fn add(&mut self, name: impl Into<String>, text: impl Into<String>) -> u32 {
        self.files.push((name.into(), text.into()));
        (self.files.len() - 1) as u32
    }

    pub fn name(&self, file: u32) -> &str {
        self.files.get(file as usize).map(|f| f.0.as_str()).unwrap_or("<unknown>")
    }

    /// 1-based line and column of a byte offset.
    pub fn line_col(&self, file: u32, offset: u32) -> (usize, usize) {
        let Some((_, text)) = self.files.get(file as usize) else { return (0, 0) };
        let offset = (offset as usize).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
        (line, col)
    }

    /// Parse every file in order and desugar them as one program.
    pub fn load(&self) -> Result<Desugared, SurfaceError> {
        let mut decls = Vec::new();
        for (i, (_, text)) in self.files.iter().enumerate() {
            decls.extend(parse(i as u32, text)?);
        }
        desugar(&decls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_column() {
        let mut m = SourceMap::new();
        let f = m.add("a.pol", "ab\ncd\nef");
        assert_eq!(m.line_col(f, 0), (1, 1));
        assert_eq!(m.line_col(f, 4), (2, 2));
        assert_eq!(m.line_col(f, 6), (3, 1));
    }

    #[test]
    fn prelude_parses_and_desugars() {
        let mut m = SourceMap::new();
        m.add(PRELUDE_NAME, PRELUDE);
        let d = m.load().unwrap();
        assert!(d.program.data("Bool").is_some());
        assert!(d.program.codata("Fun").is_some());
    }
}
