//! Frontend for the Enterprise-Architect XMI 2.1 export subset.
//!
//! The parser recognizes exactly the model elements of the restricted
//! SysML activity-diagram language: packages, enumerations with literals,
//! blocks with typed properties, and activities containing parameters,
//! state attributes, initial/final/decision nodes, behaviour calls with
//! pins, write-variable actions and control/object flows. Enterprise
//! Architect extension sections and diagram geometry are skipped.
//!
//! XML properties of each recognized element must appear in the fixed
//! order the exporter writes them; reordered properties are a hard error.

mod lexer;
mod parser;

pub use lexer::{tokenize, Token, TokenKind};

use std::collections::BTreeMap;

use crate::diag::Diagnostic;
use crate::expr::{self, Assignment, GuardExpr};
use crate::span::SourceSpan;

/// Synthetic id of the document root (the `uml:Model` element carries no
/// `xmi:id` in the export).
pub const MODEL_ROOT_ID: &str = "#model";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmiDocument {
    pub root: Package,
    /// Byte span of every parsed element keyed by its id.
    pub spans: BTreeMap<String, SourceSpan>,
}

impl XmiDocument {
    pub fn span_of(&self, id: &str) -> SourceSpan {
        self.spans
            .get(id)
            .cloned()
            .unwrap_or_default()
            .clone()
    }

    /// All activities in document order.
    pub fn activities(&self) -> Vec<&Activity> {
        fn walk<'a>(p: &'a Package, out: &mut Vec<&'a Activity>) {
            for child in &p.children {
                match child {
                    PackageItem::Package(sub) => walk(sub, out),
                    PackageItem::Element(ModelElement::Activity(a)) => out.push(a),
                    PackageItem::Element(_) => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Package {
    pub id: String,
    pub name: String,
    pub children: Vec<PackageItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PackageItem {
    Package(Package),
    Element(ModelElement),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelElement {
    Enumeration(Enumeration),
    Block(Block),
    Activity(Activity),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub id: String,
    pub name: String,
    pub literals: Vec<EnumerationLiteral>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationLiteral {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: String,
    pub name: String,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub id: String,
    pub name: String,
    pub type_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activity {
    pub id: String,
    pub name: String,
    pub elements: Vec<ActivityElement>,
}

impl Activity {
    pub fn parameters(&self) -> impl Iterator<Item = &ParameterNode> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::Parameter(p) => Some(p),
            _ => None,
        })
    }

    pub fn attributes(&self) -> impl Iterator<Item = &Attribute> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::Attribute(a) => Some(a),
            _ => None,
        })
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::Flow(f) => Some(f),
            _ => None,
        })
    }

    pub fn calls(&self) -> impl Iterator<Item = &CallBehaviour> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::CallBehaviour(c) => Some(c),
            _ => None,
        })
    }

    pub fn writes(&self) -> impl Iterator<Item = &WriteVariable> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::WriteVariable(w) => Some(w),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionNode> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn initials(&self) -> impl Iterator<Item = &InitialNode> {
        self.elements.iter().filter_map(|e| match e {
            ActivityElement::Initial(n) => Some(n),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActivityElement {
    Attribute(Attribute),
    Parameter(ParameterNode),
    Initial(InitialNode),
    Final(FinalNode),
    Decision(DecisionNode),
    CallBehaviour(CallBehaviour),
    WriteVariable(WriteVariable),
    Flow(Flow),
}

/// A state variable of a glue activity, with the name of the enumeration
/// literal that serves as its initial value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub id: String,
    pub name: String,
    pub type_ref: String,
    pub default: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterNode {
    pub id: String,
    pub name: String,
    pub type_ref: String,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialNode {
    pub id: String,
    pub name: String,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalNode {
    pub id: String,
    pub name: String,
    pub incoming: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionNode {
    pub id: String,
    pub name: String,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallBehaviour {
    pub id: String,
    pub name: String,
    pub behavior_ref: String,
    pub pins: Vec<Pin>,
}

impl CallBehaviour {
    pub fn input_pins(&self) -> impl Iterator<Item = &Pin> {
        self.pins
            .iter()
            .filter(|p| p.direction == PinDirection::Input)
    }

    pub fn output_pins(&self) -> impl Iterator<Item = &Pin> {
        self.pins
            .iter()
            .filter(|p| p.direction == PinDirection::Output)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pin {
    pub id: String,
    pub name: String,
    pub type_ref: String,
    pub direction: PinDirection,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

/// Writes the value arriving on its input pin to the activity attribute
/// named by `name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteVariable {
    pub id: String,
    pub name: String,
    pub pin: Pin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Control,
    Object,
}

/// Flow name: absent, still-raw annotation text, or the parsed assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowName {
    Empty,
    Raw(String),
    Assignment(Assignment),
}

/// Flow guard: absent, still-raw annotation text, or the parsed expression
/// (`GuardExpr::Else` is the default-branch marker).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowGuard {
    Empty,
    Raw(String),
    Expr(GuardExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: String,
    pub kind: FlowKind,
    pub name: FlowName,
    pub guard: FlowGuard,
    pub source_ref: String,
    pub target_ref: String,
}

/// Parses an XMI document from source text. The first lexical, structural
/// or reference error aborts the parse.
pub fn parse_document(text: &str) -> Result<XmiDocument, Diagnostic> {
    let tokens = tokenize(text)?;
    parse_tokens(&tokens, text.len())
}

/// Parses a document from an already tokenized stream.
pub fn parse_tokens(tokens: &[Token], source_len: usize) -> Result<XmiDocument, Diagnostic> {
    parser::parse(tokens, source_len)
}

/// Replaces every raw flow-name string by an `Assignment` and every raw
/// guard string by a `GuardExpr`. Errors are aggregated per flow.
pub fn parse_flow_annotations(mut doc: XmiDocument) -> Result<XmiDocument, Vec<Diagnostic>> {
    let mut diags = Vec::new();

    fn visit_package(
        p: &mut Package,
        spans: &BTreeMap<String, SourceSpan>,
        diags: &mut Vec<Diagnostic>,
    ) {
        for child in &mut p.children {
            match child {
                PackageItem::Package(sub) => visit_package(sub, spans, diags),
                PackageItem::Element(ModelElement::Activity(a)) => {
                    for elem in &mut a.elements {
                        if let ActivityElement::Flow(flow) = elem {
                            visit_flow(flow, spans, diags);
                        }
                    }
                }
                PackageItem::Element(_) => {}
            }
        }
    }

    fn visit_flow(
        flow: &mut Flow,
        spans: &BTreeMap<String, SourceSpan>,
        diags: &mut Vec<Diagnostic>,
    ) {
        let span = spans.get(&flow.id).cloned().unwrap_or_default();
        if let FlowName::Raw(text) = &flow.name {
            match expr::parse_assignment(text) {
                Ok(assignment) => flow.name = FlowName::Assignment(assignment),
                Err(e) => diags.push(Diagnostic::error(
                    "annotation",
                    span.clone(),
                    format!("flow {}: invalid assignment `{}`: {}", flow.id, text, e),
                )),
            }
        }
        if let FlowGuard::Raw(text) = &flow.guard {
            match expr::parse_guard(text) {
                Ok(GuardExpr::Empty) => flow.guard = FlowGuard::Empty,
                Ok(guard) => flow.guard = FlowGuard::Expr(guard),
                Err(e) => diags.push(Diagnostic::error(
                    "annotation",
                    span,
                    format!("flow {}: invalid guard `{}`: {}", flow.id, text, e),
                )),
            }
        }
    }

    let spans = doc.spans.clone();
    visit_package(&mut doc.root, &spans, &mut diags);
    if diags.is_empty() {
        Ok(doc)
    } else {
        Err(diags)
    }
}

/// Full frontend: tokenize, parse and resolve flow annotations.
pub fn load(text: &str) -> Result<XmiDocument, Vec<Diagnostic>> {
    let doc = parse_document(text).map_err(|d| vec![d])?;
    parse_flow_annotations(doc)
}
