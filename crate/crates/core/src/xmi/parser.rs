//! Recursive-descent parser over the token stream.
//!
//! Every recognized element form carries a fixed, ordered property list;
//! a missing, reordered or unknown property is a hard error. Unrecognized
//! constructs inside a recognized container are reported with their tag
//! and span. `xmi:Extension` and `xmi:Documentation` sections are skipped.

use std::collections::BTreeMap;

use super::lexer::{Token, TokenKind};
use super::*;
use crate::diag::Diagnostic;
use crate::span::SourceSpan;

const RULE: &str = "xmi-parse";

fn err(span: SourceSpan, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(RULE, span, msg.into())
}

#[derive(Debug, Clone)]
struct RawProp {
    name: String,
    value: String,
    span: SourceSpan,
}

#[derive(Debug, Clone)]
struct RawElement {
    tag: String,
    props: Vec<RawProp>,
    self_closed: bool,
    start: usize,
    head_end: usize,
}

impl RawElement {
    fn head_span(&self) -> SourceSpan {
        SourceSpan::new(self.start, self.head_end)
    }
}

struct PropSpec {
    name: &'static str,
    required: bool,
}

const fn req(name: &'static str) -> PropSpec {
    PropSpec {
        name,
        required: true,
    }
}

const fn opt(name: &'static str) -> PropSpec {
    PropSpec {
        name,
        required: false,
    }
}

/// Matches the element's properties against the fixed ordered template.
fn take_props(elem: &RawElement, specs: &[PropSpec]) -> Result<Vec<Option<String>>, Diagnostic> {
    let mut out = Vec::with_capacity(specs.len());
    let mut pi = 0;
    for spec in specs {
        if pi < elem.props.len() && elem.props[pi].name == spec.name {
            out.push(Some(elem.props[pi].value.clone()));
            pi += 1;
        } else if elem.props.iter().skip(pi).any(|p| p.name == spec.name) {
            return Err(err(
                elem.head_span(),
                format!(
                    "property `{}` of `{}` out of order: expected it before `{}`",
                    spec.name, elem.tag, elem.props[pi].name
                ),
            ));
        } else if spec.required {
            return Err(err(
                elem.head_span(),
                format!("missing required property `{}` on `{}`", spec.name, elem.tag),
            ));
        } else {
            out.push(None);
        }
    }
    if pi < elem.props.len() {
        return Err(err(
            elem.props[pi].span.clone(),
            format!(
                "unexpected property `{}` on `{}`",
                elem.props[pi].name, elem.tag
            ),
        ));
    }
    Ok(out)
}

struct P<'a> {
    toks: &'a [Token],
    pos: usize,
    source_len: usize,
    spans: BTreeMap<String, SourceSpan>,
}

impl<'a> P<'a> {
    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> SourceSpan {
        self.toks
            .get(self.pos)
            .map(|t| t.span())
            .unwrap_or_else(|| SourceSpan::new(self.source_len, self.source_len))
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_open(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Open))
    }

    fn at_close_tag(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::OpenSlash))
    }

    /// Records an element span; a second occurrence of the id is an error.
    fn record_span(&mut self, id: &str, span: SourceSpan) -> Result<(), Diagnostic> {
        if self.spans.contains_key(id) {
            return Err(err(span, format!("duplicate xmi:id `{id}`")));
        }
        self.spans.insert(id.to_string(), span);
        Ok(())
    }

    /// Skips `<?xml ... ?>`.
    fn skip_decl(&mut self) -> Result<(), Diagnostic> {
        if !matches!(self.peek(), Some(TokenKind::DeclOpen)) {
            return Ok(());
        }
        self.bump();
        loop {
            match self.bump() {
                None => {
                    return Err(err(
                        SourceSpan::new(self.source_len, self.source_len),
                        "unterminated XML declaration",
                    ))
                }
                Some(t) if t.kind == TokenKind::DeclClose => return Ok(()),
                Some(_) => {}
            }
        }
    }

    /// Parses `<tag prop="v" ...` up to and including `>` or `/>`.
    fn element_open(&mut self) -> Result<RawElement, Diagnostic> {
        let open = match self.bump() {
            Some(t) if t.kind == TokenKind::Open => t,
            Some(t) => return Err(err(t.span(), "expected `<`")),
            None => {
                return Err(err(
                    SourceSpan::new(self.source_len, self.source_len),
                    "unexpected end of input, expected element",
                ))
            }
        };
        let start = open.start;
        let tag = match self.bump() {
            Some(t) => match &t.kind {
                TokenKind::TagName(n) => n.clone(),
                _ => return Err(err(t.span(), "expected tag name after `<`")),
            },
            None => {
                return Err(err(
                    SourceSpan::new(self.source_len, self.source_len),
                    "unexpected end of input in tag",
                ))
            }
        };
        let mut props = Vec::new();
        loop {
            let t = match self.bump() {
                Some(t) => t,
                None => {
                    return Err(err(
                        SourceSpan::new(self.source_len, self.source_len),
                        format!("unterminated element `{tag}`"),
                    ))
                }
            };
            match &t.kind {
                TokenKind::Close => {
                    return Ok(RawElement {
                        tag,
                        props,
                        self_closed: false,
                        start,
                        head_end: t.end,
                    })
                }
                TokenKind::SelfClose => {
                    return Ok(RawElement {
                        tag,
                        props,
                        self_closed: true,
                        start,
                        head_end: t.end,
                    })
                }
                TokenKind::PropertyName(name) => {
                    let name = name.clone();
                    let prop_start = t.start;
                    match self.bump() {
                        Some(t) if t.kind == TokenKind::Eq => {}
                        other => {
                            let span = other
                                .map(|t| t.span())
                                .unwrap_or_else(|| SourceSpan::new(self.source_len, self.source_len));
                            return Err(err(span, format!("expected `=` after property `{name}`")));
                        }
                    }
                    let (value, end) = match self.bump() {
                        Some(t) => match &t.kind {
                            TokenKind::Str(v) | TokenKind::Num(v) => (v.clone(), t.end),
                            _ => {
                                return Err(err(
                                    t.span(),
                                    format!("expected quoted value for property `{name}`"),
                                ))
                            }
                        },
                        None => {
                            return Err(err(
                                SourceSpan::new(self.source_len, self.source_len),
                                format!("missing value for property `{name}`"),
                            ))
                        }
                    };
                    props.push(RawProp {
                        name,
                        value,
                        span: SourceSpan::new(prop_start, end),
                    });
                }
                _ => return Err(err(t.span(), format!("unexpected token in `{tag}` tag"))),
            }
        }
    }

    /// Consumes `</tag>` and returns the byte offset one past `>`.
    fn element_close(&mut self, tag: &str) -> Result<usize, Diagnostic> {
        let t = match self.bump() {
            Some(t) if t.kind == TokenKind::OpenSlash => t,
            Some(t) => return Err(err(t.span(), format!("expected `</{tag}>`"))),
            None => {
                return Err(err(
                    SourceSpan::new(self.source_len, self.source_len),
                    format!("missing closing tag `</{tag}>`"),
                ))
            }
        };
        let _ = t;
        match self.bump() {
            Some(t) => match &t.kind {
                TokenKind::TagName(n) if n == tag => {}
                TokenKind::TagName(n) => {
                    return Err(err(
                        t.span(),
                        format!("mismatched closing tag `</{n}>`, expected `</{tag}>`"),
                    ))
                }
                _ => return Err(err(t.span(), "expected tag name in closing tag")),
            },
            None => {
                return Err(err(
                    SourceSpan::new(self.source_len, self.source_len),
                    "unexpected end of input in closing tag",
                ))
            }
        }
        match self.bump() {
            Some(t) if t.kind == TokenKind::Close => Ok(t.end),
            other => {
                let span = other
                    .map(|t| t.span())
                    .unwrap_or_else(|| SourceSpan::new(self.source_len, self.source_len));
                Err(err(span, format!("expected `>` to close `</{tag}`")))
            }
        }
    }

    /// Skips the remainder of an already-opened element, including nested
    /// children, without interpreting it.
    fn skip_rest_of_element(&mut self, elem: &RawElement) -> Result<(), Diagnostic> {
        if elem.self_closed {
            return Ok(());
        }
        loop {
            if self.at_close_tag() {
                self.element_close(&elem.tag)?;
                return Ok(());
            }
            if self.at_open() {
                let child = self.element_open()?;
                self.skip_rest_of_element(&child)?;
            } else if matches!(self.peek(), Some(TokenKind::DeclOpen)) {
                self.skip_decl()?;
            } else {
                return Err(err(self.here(), format!("malformed content in `{}`", elem.tag)));
            }
        }
    }
}

fn prop_value(values: &[Option<String>], idx: usize) -> String {
    values[idx].clone().unwrap_or_default()
}

fn expect_type(elem: &RawElement, values: &[Option<String>], want: &str) -> Result<(), Diagnostic> {
    let got = prop_value(values, 0);
    if got != want {
        return Err(err(
            elem.head_span(),
            format!("unexpected xmi:type `{got}` on `{}`, expected `{want}`", elem.tag),
        ));
    }
    Ok(())
}

pub(super) fn parse(tokens: &[Token], source_len: usize) -> Result<XmiDocument, Diagnostic> {
    let mut p = P {
        toks: tokens,
        pos: 0,
        source_len,
        spans: BTreeMap::new(),
    };

    p.skip_decl()?;

    if p.peek().is_none() {
        return Err(err(
            SourceSpan::new(0, 0),
            "empty document: expected `<xmi:XMI>` root element",
        ));
    }

    let root_elem = p.element_open()?;
    if root_elem.tag != "xmi:XMI" {
        return Err(err(
            root_elem.head_span(),
            format!("expected `xmi:XMI` document root, found `{}`", root_elem.tag),
        ));
    }
    take_props(
        &root_elem,
        &[req("xmi:version"), req("xmlns:uml"), req("xmlns:xmi")],
    )?;
    if root_elem.self_closed {
        return Err(err(root_elem.head_span(), "document root has no content"));
    }

    let mut model: Option<Package> = None;
    loop {
        if p.at_close_tag() {
            p.element_close("xmi:XMI")?;
            break;
        }
        let child = p.element_open()?;
        match child.tag.as_str() {
            "xmi:Documentation" | "xmi:Extension" => {
                p.skip_rest_of_element(&child)?;
            }
            "uml:Model" => {
                if model.is_some() {
                    return Err(err(child.head_span(), "multiple `uml:Model` elements"));
                }
                model = Some(parse_model(&mut p, child)?);
            }
            other => {
                return Err(err(
                    child.head_span(),
                    format!("unsupported construct `{other}` at document level"),
                ))
            }
        }
    }

    let root = model.ok_or_else(|| {
        err(
            SourceSpan::new(0, source_len),
            "document contains no `uml:Model` element",
        )
    })?;

    let doc = XmiDocument {
        root,
        spans: p.spans,
    };
    check_references(&doc)?;
    Ok(doc)
}

fn parse_model(p: &mut P, elem: RawElement) -> Result<Package, Diagnostic> {
    let values = take_props(&elem, &[req("xmi:type"), req("name"), req("visibility")])?;
    expect_type(&elem, &values, "uml:Model")?;
    let name = prop_value(&values, 1);
    let children = if elem.self_closed {
        Vec::new()
    } else {
        parse_package_items(p, &elem)?
    };
    p.record_span(
        MODEL_ROOT_ID,
        SourceSpan::with_id(elem.start, elem.head_end, MODEL_ROOT_ID),
    )?;
    Ok(Package {
        id: MODEL_ROOT_ID.to_string(),
        name,
        children,
    })
}

fn parse_package_items(p: &mut P, parent: &RawElement) -> Result<Vec<PackageItem>, Diagnostic> {
    let mut items = Vec::new();
    loop {
        if p.at_close_tag() {
            p.element_close(&parent.tag)?;
            return Ok(items);
        }
        let child = p.element_open()?;
        if child.tag != "packagedElement" {
            return Err(err(
                child.head_span(),
                format!("unsupported construct `{}` inside a package", child.tag),
            ));
        }
        let kind = child
            .props
            .first()
            .filter(|prop| prop.name == "xmi:type")
            .map(|prop| prop.value.clone())
            .unwrap_or_default();
        match kind.as_str() {
            "uml:Package" => {
                let values =
                    take_props(&child, &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")])?;
                let id = prop_value(&values, 1);
                let name = prop_value(&values, 2);
                let children = if child.self_closed {
                    Vec::new()
                } else {
                    parse_package_items(p, &child)?
                };
                let end = child.head_end;
                p.record_span(&id, SourceSpan::with_id(child.start, end, id.clone()))?;
                items.push(PackageItem::Package(Package { id, name, children }));
            }
            "uml:Enumeration" => {
                items.push(PackageItem::Element(ModelElement::Enumeration(
                    parse_enumeration(p, child)?,
                )));
            }
            "uml:Class" => {
                items.push(PackageItem::Element(ModelElement::Block(parse_block(
                    p, child,
                )?)));
            }
            "uml:Activity" => {
                items.push(PackageItem::Element(ModelElement::Activity(
                    parse_activity(p, child)?,
                )));
            }
            other => {
                return Err(err(
                    child.head_span(),
                    format!("unsupported construct `packagedElement` of type `{other}`"),
                ))
            }
        }
    }
}

fn parse_enumeration(p: &mut P, elem: RawElement) -> Result<Enumeration, Diagnostic> {
    let values = take_props(&elem, &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")])?;
    let id = prop_value(&values, 1);
    let name = prop_value(&values, 2);
    let mut literals = Vec::new();
    if !elem.self_closed {
        loop {
            if p.at_close_tag() {
                p.element_close(&elem.tag)?;
                break;
            }
            let child = p.element_open()?;
            if child.tag != "ownedLiteral" {
                return Err(err(
                    child.head_span(),
                    format!("unsupported construct `{}` inside an enumeration", child.tag),
                ));
            }
            let v = take_props(
                &child,
                &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")],
            )?;
            expect_type(&child, &v, "uml:EnumerationLiteral")?;
            if !child.self_closed {
                p.skip_rest_of_element(&child)?;
            }
            let lit_id = prop_value(&v, 1);
            p.record_span(
                &lit_id,
                SourceSpan::with_id(child.start, child.head_end, lit_id.clone()),
            )?;
            literals.push(EnumerationLiteral {
                id: lit_id,
                name: prop_value(&v, 2),
            });
        }
    }
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    Ok(Enumeration { id, name, literals })
}

fn parse_block(p: &mut P, elem: RawElement) -> Result<Block, Diagnostic> {
    let values = take_props(&elem, &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")])?;
    let id = prop_value(&values, 1);
    let name = prop_value(&values, 2);
    let mut properties = Vec::new();
    if !elem.self_closed {
        loop {
            if p.at_close_tag() {
                p.element_close(&elem.tag)?;
                break;
            }
            let child = p.element_open()?;
            if child.tag != "ownedAttribute" {
                return Err(err(
                    child.head_span(),
                    format!("unsupported construct `{}` inside a block", child.tag),
                ));
            }
            let v = take_props(
                &child,
                &[
                    req("xmi:type"),
                    req("xmi:id"),
                    req("name"),
                    req("visibility"),
                    req("type"),
                ],
            )?;
            expect_type(&child, &v, "uml:Property")?;
            if !child.self_closed {
                return Err(err(
                    child.head_span(),
                    "unsupported construct: block properties cannot have content",
                ));
            }
            let prop_id = prop_value(&v, 1);
            p.record_span(
                &prop_id,
                SourceSpan::with_id(child.start, child.head_end, prop_id.clone()),
            )?;
            properties.push(Property {
                id: prop_id,
                name: prop_value(&v, 2),
                type_ref: prop_value(&v, 4),
            });
        }
    }
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    Ok(Block {
        id,
        name,
        properties,
    })
}

fn parse_activity(p: &mut P, elem: RawElement) -> Result<Activity, Diagnostic> {
    let values = take_props(&elem, &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")])?;
    let id = prop_value(&values, 1);
    let name = prop_value(&values, 2);
    let mut elements = Vec::new();
    if !elem.self_closed {
        loop {
            if p.at_close_tag() {
                p.element_close(&elem.tag)?;
                break;
            }
            let child = p.element_open()?;
            match child.tag.as_str() {
                "ownedAttribute" => elements.push(ActivityElement::Attribute(
                    parse_activity_attribute(p, child)?,
                )),
                "node" => elements.push(parse_node(p, child)?),
                "edge" => elements.push(ActivityElement::Flow(parse_edge(p, child)?)),
                other => {
                    return Err(err(
                        child.head_span(),
                        format!("unsupported construct `{other}` inside an activity"),
                    ))
                }
            }
        }
    }
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    Ok(Activity { id, name, elements })
}

fn parse_activity_attribute(p: &mut P, elem: RawElement) -> Result<Attribute, Diagnostic> {
    let v = take_props(
        &elem,
        &[
            req("xmi:type"),
            req("xmi:id"),
            req("name"),
            req("visibility"),
            req("type"),
        ],
    )?;
    expect_type(&elem, &v, "uml:Property")?;
    if elem.self_closed {
        return Err(err(
            elem.head_span(),
            "missing default value on activity attribute",
        ));
    }
    let mut default: Option<String> = None;
    loop {
        if p.at_close_tag() {
            p.element_close(&elem.tag)?;
            break;
        }
        let child = p.element_open()?;
        if child.tag != "defaultValue" {
            return Err(err(
                child.head_span(),
                format!("unsupported construct `{}` inside an attribute", child.tag),
            ));
        }
        let dv = take_props(&child, &[req("xmi:type"), req("xmi:id"), req("value")])?;
        expect_type(&child, &dv, "uml:LiteralString")?;
        if !child.self_closed {
            p.skip_rest_of_element(&child)?;
        }
        let dv_id = prop_value(&dv, 1);
        p.record_span(
            &dv_id,
            SourceSpan::with_id(child.start, child.head_end, dv_id.clone()),
        )?;
        if default.is_some() {
            return Err(err(child.head_span(), "attribute has multiple default values"));
        }
        default = Some(prop_value(&dv, 2));
    }
    let default = default.ok_or_else(|| {
        err(
            elem.head_span(),
            "missing default value on activity attribute",
        )
    })?;
    let id = prop_value(&v, 1);
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    Ok(Attribute {
        id,
        name: prop_value(&v, 2),
        type_ref: prop_value(&v, 4),
        default,
    })
}

/// Reads `<incoming xmi:idref=".."/>` / `<outgoing xmi:idref=".."/>` children
/// until the enclosing element closes. `allowed` restricts which of the two
/// are legal for the node kind.
fn parse_flow_refs(
    p: &mut P,
    parent: &RawElement,
    allowed: (bool, bool),
) -> Result<(Vec<String>, Vec<String>), Diagnostic> {
    let mut incoming = Vec::new();
    let mut outgoing = Vec::new();
    if parent.self_closed {
        return Ok((incoming, outgoing));
    }
    loop {
        if p.at_close_tag() {
            p.element_close(&parent.tag)?;
            return Ok((incoming, outgoing));
        }
        let child = p.element_open()?;
        match child.tag.as_str() {
            "incoming" if allowed.0 => {
                let v = take_props(&child, &[req("xmi:idref")])?;
                if !child.self_closed {
                    p.skip_rest_of_element(&child)?;
                }
                incoming.push(prop_value(&v, 0));
            }
            "outgoing" if allowed.1 => {
                let v = take_props(&child, &[req("xmi:idref")])?;
                if !child.self_closed {
                    p.skip_rest_of_element(&child)?;
                }
                outgoing.push(prop_value(&v, 0));
            }
            other => {
                return Err(err(
                    child.head_span(),
                    format!(
                        "unsupported construct `{other}` inside `{}`",
                        parent.tag
                    ),
                ))
            }
        }
    }
}

fn parse_node(p: &mut P, elem: RawElement) -> Result<ActivityElement, Diagnostic> {
    let kind = elem
        .props
        .first()
        .filter(|prop| prop.name == "xmi:type")
        .map(|prop| prop.value.clone())
        .unwrap_or_default();
    match kind.as_str() {
        "uml:ActivityParameterNode" => {
            let v = take_props(
                &elem,
                &[
                    req("xmi:type"),
                    req("xmi:id"),
                    req("name"),
                    req("visibility"),
                    req("type"),
                ],
            )?;
            let (incoming, outgoing) = parse_flow_refs(p, &elem, (true, true))?;
            let id = prop_value(&v, 1);
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::Parameter(ParameterNode {
                id,
                name: prop_value(&v, 2),
                type_ref: prop_value(&v, 4),
                incoming,
                outgoing,
            }))
        }
        "uml:InitialNode" => {
            let v = take_props(
                &elem,
                &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")],
            )?;
            let (_, outgoing) = parse_flow_refs(p, &elem, (false, true))?;
            let id = prop_value(&v, 1);
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::Initial(InitialNode {
                id,
                name: prop_value(&v, 2),
                outgoing,
            }))
        }
        "uml:ActivityFinalNode" => {
            let v = take_props(
                &elem,
                &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")],
            )?;
            let (incoming, _) = parse_flow_refs(p, &elem, (true, false))?;
            let id = prop_value(&v, 1);
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::Final(FinalNode {
                id,
                name: prop_value(&v, 2),
                incoming,
            }))
        }
        "uml:DecisionNode" => {
            let v = take_props(
                &elem,
                &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")],
            )?;
            let (incoming, outgoing) = parse_flow_refs(p, &elem, (true, true))?;
            let id = prop_value(&v, 1);
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::Decision(DecisionNode {
                id,
                name: prop_value(&v, 2),
                incoming,
                outgoing,
            }))
        }
        "uml:CallBehaviorAction" => {
            let v = take_props(
                &elem,
                &[
                    req("xmi:type"),
                    req("xmi:id"),
                    req("name"),
                    req("visibility"),
                    req("behavior"),
                ],
            )?;
            let id = prop_value(&v, 1);
            let mut pins = Vec::new();
            if !elem.self_closed {
                loop {
                    if p.at_close_tag() {
                        p.element_close(&elem.tag)?;
                        break;
                    }
                    let child = p.element_open()?;
                    match child.tag.as_str() {
                        "argument" => pins.push(parse_pin(p, child, PinDirection::Input)?),
                        "result" => pins.push(parse_pin(p, child, PinDirection::Output)?),
                        other => {
                            return Err(err(
                                child.head_span(),
                                format!("unsupported construct `{other}` inside a behaviour call"),
                            ))
                        }
                    }
                }
            }
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::CallBehaviour(CallBehaviour {
                id,
                name: prop_value(&v, 2),
                behavior_ref: prop_value(&v, 4),
                pins,
            }))
        }
        "uml:AddVariableValueAction" => {
            let v = take_props(
                &elem,
                &[req("xmi:type"), req("xmi:id"), req("name"), req("visibility")],
            )?;
            let id = prop_value(&v, 1);
            if elem.self_closed {
                return Err(err(elem.head_span(), "write-variable action has no input pin"));
            }
            let mut pin: Option<Pin> = None;
            loop {
                if p.at_close_tag() {
                    p.element_close(&elem.tag)?;
                    break;
                }
                let child = p.element_open()?;
                if child.tag != "value" {
                    return Err(err(
                        child.head_span(),
                        format!(
                            "unsupported construct `{}` inside a write-variable action",
                            child.tag
                        ),
                    ));
                }
                if pin.is_some() {
                    return Err(err(child.head_span(), "write-variable action has multiple pins"));
                }
                pin = Some(parse_pin(p, child, PinDirection::Input)?);
            }
            let pin = pin.ok_or_else(|| {
                err(elem.head_span(), "write-variable action has no input pin")
            })?;
            p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
            Ok(ActivityElement::WriteVariable(WriteVariable {
                id,
                name: prop_value(&v, 2),
                pin,
            }))
        }
        other => Err(err(
            elem.head_span(),
            format!("unsupported construct `node` of type `{other}`"),
        )),
    }
}

fn parse_pin(p: &mut P, elem: RawElement, direction: PinDirection) -> Result<Pin, Diagnostic> {
    let v = take_props(
        &elem,
        &[
            req("xmi:type"),
            req("xmi:id"),
            req("name"),
            req("visibility"),
            req("type"),
        ],
    )?;
    let want = match direction {
        PinDirection::Input => "uml:InputPin",
        PinDirection::Output => "uml:OutputPin",
    };
    expect_type(&elem, &v, want)?;
    let allowed = match direction {
        PinDirection::Input => (true, false),
        PinDirection::Output => (false, true),
    };
    let (incoming, outgoing) = parse_flow_refs(p, &elem, allowed)?;
    let id = prop_value(&v, 1);
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    Ok(Pin {
        id,
        name: prop_value(&v, 2),
        type_ref: prop_value(&v, 4),
        direction,
        incoming,
        outgoing,
    })
}

fn parse_edge(p: &mut P, elem: RawElement) -> Result<Flow, Diagnostic> {
    let v = take_props(
        &elem,
        &[
            req("xmi:type"),
            req("xmi:id"),
            req("name"),
            req("visibility"),
            req("source"),
            req("target"),
        ],
    )?;
    let kind = match prop_value(&v, 0).as_str() {
        "uml:ControlFlow" => FlowKind::Control,
        "uml:ObjectFlow" => FlowKind::Object,
        other => {
            return Err(err(
                elem.head_span(),
                format!("unsupported construct `edge` of type `{other}`"),
            ))
        }
    };
    let mut guard = FlowGuard::Empty;
    if !elem.self_closed {
        loop {
            if p.at_close_tag() {
                p.element_close(&elem.tag)?;
                break;
            }
            let child = p.element_open()?;
            if child.tag != "guard" {
                return Err(err(
                    child.head_span(),
                    format!("unsupported construct `{}` inside an edge", child.tag),
                ));
            }
            let gv = take_props(&child, &[req("xmi:type"), req("xmi:id"), req("body")])?;
            expect_type(&child, &gv, "uml:OpaqueExpression")?;
            if !child.self_closed {
                p.skip_rest_of_element(&child)?;
            }
            let g_id = prop_value(&gv, 1);
            p.record_span(
                &g_id,
                SourceSpan::with_id(child.start, child.head_end, g_id.clone()),
            )?;
            if !matches!(guard, FlowGuard::Empty) {
                return Err(err(child.head_span(), "edge has multiple guards"));
            }
            let body = prop_value(&gv, 2);
            if !body.trim().is_empty() {
                guard = FlowGuard::Raw(body);
            }
        }
    }
    let id = prop_value(&v, 1);
    p.record_span(&id, SourceSpan::with_id(elem.start, elem.head_end, id.clone()))?;
    let raw_name = prop_value(&v, 2);
    let name = if raw_name.trim().is_empty() {
        FlowName::Empty
    } else {
        FlowName::Raw(raw_name)
    };
    Ok(Flow {
        id,
        kind,
        name,
        guard,
        source_ref: prop_value(&v, 4),
        target_ref: prop_value(&v, 5),
    })
}

/// Id-reference closure: every id reference resolves to a parsed element and
/// node-level flow references agree with the flow's own endpoints.
fn check_references(doc: &XmiDocument) -> Result<(), Diagnostic> {
    let mut refs: Vec<(String, String)> = Vec::new(); // (referenced id, referencing id)
    let mut flows: BTreeMap<&str, &Flow> = BTreeMap::new();
    let mut flow_ref_pairs: Vec<(String, String, bool)> = Vec::new(); // (flow id, node id, is_outgoing)

    fn walk<'a>(
        p: &'a Package,
        refs: &mut Vec<(String, String)>,
        flows: &mut BTreeMap<&'a str, &'a Flow>,
        pairs: &mut Vec<(String, String, bool)>,
    ) {
        for child in &p.children {
            match child {
                PackageItem::Package(sub) => walk(sub, refs, flows, pairs),
                PackageItem::Element(ModelElement::Enumeration(_)) => {}
                PackageItem::Element(ModelElement::Block(b)) => {
                    for prop in &b.properties {
                        refs.push((prop.type_ref.clone(), prop.id.clone()));
                    }
                }
                PackageItem::Element(ModelElement::Activity(a)) => {
                    for elem in &a.elements {
                        match elem {
                            ActivityElement::Attribute(attr) => {
                                refs.push((attr.type_ref.clone(), attr.id.clone()));
                            }
                            ActivityElement::Parameter(node) => {
                                refs.push((node.type_ref.clone(), node.id.clone()));
                                for f in &node.incoming {
                                    pairs.push((f.clone(), node.id.clone(), false));
                                }
                                for f in &node.outgoing {
                                    pairs.push((f.clone(), node.id.clone(), true));
                                }
                            }
                            ActivityElement::Initial(node) => {
                                for f in &node.outgoing {
                                    pairs.push((f.clone(), node.id.clone(), true));
                                }
                            }
                            ActivityElement::Final(node) => {
                                for f in &node.incoming {
                                    pairs.push((f.clone(), node.id.clone(), false));
                                }
                            }
                            ActivityElement::Decision(node) => {
                                for f in &node.incoming {
                                    pairs.push((f.clone(), node.id.clone(), false));
                                }
                                for f in &node.outgoing {
                                    pairs.push((f.clone(), node.id.clone(), true));
                                }
                            }
                            ActivityElement::CallBehaviour(call) => {
                                refs.push((call.behavior_ref.clone(), call.id.clone()));
                                for pin in &call.pins {
                                    refs.push((pin.type_ref.clone(), pin.id.clone()));
                                    for f in &pin.incoming {
                                        pairs.push((f.clone(), pin.id.clone(), false));
                                    }
                                    for f in &pin.outgoing {
                                        pairs.push((f.clone(), pin.id.clone(), true));
                                    }
                                }
                            }
                            ActivityElement::WriteVariable(w) => {
                                refs.push((w.pin.type_ref.clone(), w.pin.id.clone()));
                                for f in &w.pin.incoming {
                                    pairs.push((f.clone(), w.pin.id.clone(), false));
                                }
                            }
                            ActivityElement::Flow(flow) => {
                                flows.insert(flow.id.as_str(), flow);
                                refs.push((flow.source_ref.clone(), flow.id.clone()));
                                refs.push((flow.target_ref.clone(), flow.id.clone()));
                            }
                        }
                    }
                }
            }
        }
    }

    walk(&doc.root, &mut refs, &mut flows, &mut flow_ref_pairs);

    for (target, from) in &refs {
        if !doc.spans.contains_key(target) {
            return Err(err(
                doc.span_of(from),
                format!("unresolved id reference `{target}`"),
            ));
        }
    }
    for (flow_id, node_id, is_outgoing) in &flow_ref_pairs {
        match flows.get(flow_id.as_str()) {
            None => {
                return Err(err(
                    doc.span_of(node_id),
                    format!("flow reference `{flow_id}` does not name a flow"),
                ))
            }
            Some(flow) => {
                let endpoint = if *is_outgoing {
                    &flow.source_ref
                } else {
                    &flow.target_ref
                };
                if endpoint != node_id {
                    return Err(err(
                        doc.span_of(node_id),
                        format!(
                            "flow reference mismatch: `{flow_id}` does not {} `{node_id}`",
                            if *is_outgoing { "leave" } else { "enter" }
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}
