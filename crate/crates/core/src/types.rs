//! Semantic types assigned to model elements during checking.

use crate::scope::ScopeId;

/// The semantic type of a declaration. Enumerations and blocks carry the
/// scope holding their literals respectively properties; activities carry
/// their body scope; parameters wrap the resolved value type together with
/// the parameter's own scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SemanticType {
    Enum {
        id: String,
        name: String,
        scope: ScopeId,
    },
    Block {
        id: String,
        name: String,
        scope: ScopeId,
    },
    Activity {
        id: String,
        scope: ScopeId,
    },
    Param {
        id: String,
        name: String,
        inner: Box<SemanticType>,
        scope: ScopeId,
    },
    Bool,
}

impl SemanticType {
    /// The scope referenced by the type constructor, if any.
    pub fn scope(&self) -> Option<ScopeId> {
        match self {
            SemanticType::Enum { scope, .. }
            | SemanticType::Block { scope, .. }
            | SemanticType::Activity { scope, .. }
            | SemanticType::Param { scope, .. } => Some(*scope),
            SemanticType::Bool => None,
        }
    }

    pub fn is_value_type(&self) -> bool {
        matches!(self, SemanticType::Enum { .. } | SemanticType::Block { .. })
    }

    /// Identity of the declared sort (enum or block), used for type equality
    /// in diagnostics and for sort lookup in the backend.
    pub fn sort_id(&self) -> Option<&str> {
        match self {
            SemanticType::Enum { id, .. } | SemanticType::Block { id, .. } => Some(id),
            _ => None,
        }
    }
}

impl std::fmt::Display for SemanticType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SemanticType::Enum { name, .. } => write!(f, "ENUM({name})"),
            SemanticType::Block { name, .. } => write!(f, "BLOCK({name})"),
            SemanticType::Activity { id, .. } => write!(f, "ACT({id})"),
            SemanticType::Param { name, inner, .. } => write!(f, "PARAM({name}, {inner})"),
            SemanticType::Bool => write!(f, "BOOL"),
        }
    }
}
