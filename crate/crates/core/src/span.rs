//! Byte-offset spans used to anchor diagnostics to the input document.

/// A half-open byte range into the source text, optionally tagged with the
/// `xmi:id` of the element it covers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub xmi_id: Option<String>,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start must not exceed end");
        SourceSpan {
            start,
            end,
            xmi_id: None,
        }
    }

    pub fn with_id(start: usize, end: usize, id: impl Into<String>) -> Self {
        SourceSpan {
            start,
            end,
            xmi_id: Some(id.into()),
        }
    }

    /// Smallest span covering both operands.
    pub fn merge(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            xmi_id: self.xmi_id.clone().or_else(|| other.xmi_id.clone()),
        }
    }
}

impl std::fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}
