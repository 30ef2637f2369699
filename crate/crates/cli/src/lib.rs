//! Driver shared by the `codata` binary and the integration tests: load files,
//! check them, evaluate top-level lets and render diagnostics.

use codata_core::decl::{Decl, Span};
use codata_core::eval::{deep_normalize, Fuel};
use codata_core::pretty::{print_decls, Printer};
use codata_core::syntax::Term;
use codata_core::typecheck::{Checker, Diagnostic, Options};
use codata_surface::{SourceMap, SurfaceError, PRELUDE, PRELUDE_NAME};
use serde::Serialize;

/// A diagnostic with its position resolved against the source files.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub severity: &'static str,
    pub code: &'static str,
    pub message: String,
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub end_line: usize,
    pub end_column: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<String>,
}

impl Report {
    fn at(sources: &SourceMap, span: Span) -> Report {
        let (line, column) = sources.line_col(span.file, span.start);
        let (end_line, end_column) = sources.line_col(span.file, span.end);
        Report {
            severity: "error",
            code: "",
            message: String::new(),
            file: sources.name(span.file).to_string(),
            line,
            column,
            end_line,
            end_column,
            notes: Vec::new(),
            expected: Vec::new(),
        }
    }

    pub fn from_surface(sources: &SourceMap, e: &SurfaceError) -> Report {
        Report { code: e.code, message: e.message.clone(), expected: e.expected.clone(), ..Report::at(sources, e.span) }
    }

    pub fn from_check(sources: &SourceMap, d: &Diagnostic) -> Report {
        Report {
            code: d.code,
            message: d.message.clone(),
            notes: d.notes.clone(),
            severity: match d.severity {
                codata_core::typecheck::Severity::Error => "error",
                codata_core::typecheck::Severity::Warning => "warning",
            },
            ..Report::at(sources, d.span)
        }
    }

    /// `file:line:col: error[code]: message`, then one line per note.
    pub fn human(&self) -> String {
        let mut s = format!("{}:{}:{}: {}[{}]: {}", self.file, self.line, self.column, self.severity, self.code, self.message);
        for n in &self.notes {
            s.push_str("\n  note: ");
            s.push_str(n);
        }
        s
    }
}

/// A checked program together with its sources.
pub struct Session {
    pub sources: SourceMap,
    pub checker: Checker,
    /// Index of the prelude in `sources`, if it was loaded.
    pub prelude: Option<u32>,
}

impl Session {
    pub fn reports(&self) -> Vec<Report> {
        self.checker.diagnostics.iter().map(|d| Report::from_check(&self.sources, d)).collect()
    }

    pub fn ok(&self) -> bool {
        self.checker.ok()
    }

    /// Fully normalize the top-level let `name`.
    pub fn run(&self, name: &str, fuel: u64) -> Result<Term, Report> {
        let missing = || Report {
            code: "name.unknown",
            message: format!("no top-level let named `{name}`"),
            ..Report::at(&self.sources, Span::default())
        };
        let idx = self.checker.prog.let_index(name).ok_or_else(missing)?;
        let Decl::Let(l) = &self.checker.prog.decls[idx] else { return Err(missing()) };
        let mut fuel = Fuel::new(fuel);
        deep_normalize(&self.checker.globals, &Term::Var(l.var.clone()), &self.checker.metas, &mut fuel).map_err(|e| {
            let d = Diagnostic::from(e);
            Report::from_check(&self.sources, &Diagnostic { span: l.span, ..d })
        })
    }

    /// Print a term with names that do not clash with the program's globals.
    pub fn show(&self, t: &Term) -> String {
        Printer::reserved_for(&self.checker.prog).term(t)
    }

    /// The checked program with every solution inlined, without the prelude.
    pub fn elaborate(&self) -> String {
        print_decls(&self.checker.prog, |d| Some(d.span().file) != self.prelude)
    }
}

/// Parse, desugar and check `files` (name, text) in order, after the prelude
/// unless `prelude` is false. Syntax and scoping errors stop before checking.
pub fn load(files: &[(String, String)], prelude: bool, opts: Options) -> Result<Session, (SourceMap, Vec<Report>)> {
    let mut sources = SourceMap::new();
    let prelude_idx = prelude.then(|| sources.add(PRELUDE_NAME, PRELUDE));
    for (name, text) in files {
        sources.add(name.clone(), text.clone());
    }
    let d = match sources.load() {
        Ok(d) => d,
        Err(e) => {
            let r = Report::from_surface(&sources, &e);
            return Err((sources, vec![r]));
        }
    };
    let mut checker = Checker::new(d.program, d.origins, opts);
    checker.check_program();
    Ok(Session { sources, checker, prelude: prelude_idx })
}
