//! Diagnostics shared by the frontend and the type checker.
//!
//! Rendering format is one line per diagnostic:
//! `ERROR <rule> at <xmi:id> (<byte-range>): <message>`
//! Diagnostics are sorted by document position first, then rule name, so the
//! output is stable across runs.

use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Severity::Warning => write!(f, "WARNING"),
            Severity::Error => write!(f, "ERROR"),
        }
    }
}

/// A single finding, tagged with the name of the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rule: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(rule: &'static str, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            rule,
            message: message.into(),
            span,
        }
    }

    pub fn warning(rule: &'static str, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            rule,
            message: message.into(),
            span,
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let id = self.span.xmi_id.as_deref().unwrap_or("<document>");
        write!(
            f,
            "{} {} at {} ({}): {}",
            self.severity, self.rule, id, self.span, self.message
        )
    }
}

/// Sorts into the stable reporting order: document position, then rule name.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.span.start, a.span.end, a.rule, &a.message).cmp(&(
            b.span.start,
            b.span.end,
            b.rule,
            &b.message,
        ))
    });
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_line_format() {
        let d = Diagnostic::error(
            "enumeration",
            SourceSpan::with_id(10, 42, "EAID_7"),
            "duplicate literal",
        );
        assert_eq!(
            d.to_string(),
            "ERROR enumeration at EAID_7 (10..42): duplicate literal"
        );
    }

    #[test]
    fn stable_sort_by_position_then_rule() {
        let mut ds = vec![
            Diagnostic::error("zeta", SourceSpan::new(5, 6), "b"),
            Diagnostic::error("alpha", SourceSpan::new(5, 6), "a"),
            Diagnostic::error("alpha", SourceSpan::new(1, 2), "c"),
        ];
        sort_diagnostics(&mut ds);
        assert_eq!(ds[0].message, "c");
        assert_eq!(ds[1].rule, "alpha");
        assert_eq!(ds[2].rule, "zeta");
    }
}
