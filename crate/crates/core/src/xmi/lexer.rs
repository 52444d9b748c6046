//! Tokenizer for the Enterprise-Architect XMI 2.1 export subset.
//!
//! Tokens follow the lexical classes of the export format: tag names,
//! property names, quoted string/number values and the tag punctuation.
//! Whitespace between tags is insignificant and the subset has no text
//! content; any non-whitespace character outside a tag is a lexical error.
//! Inside quoted values the entities `&amp;`, `&lt;`, `&gt;` and `&quot;`
//! are decoded; any other `&` is kept literally.

use crate::diag::Diagnostic;
use crate::span::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// `<`
    Open,
    /// `</`
    OpenSlash,
    /// `/>`
    SelfClose,
    /// `>`
    Close,
    /// `<?`
    DeclOpen,
    /// `?>`
    DeclClose,
    /// `=`
    Eq,
    /// Tag name directly after `<`, `</` or `<?`
    TagName(String),
    /// Property name inside a tag
    PropertyName(String),
    /// Quoted value that is not purely numeric
    Str(String),
    /// Quoted value consisting of digits and dots only, e.g. `2.1`
    Num(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn span(&self) -> SourceSpan {
        SourceSpan::new(self.start, self.end)
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '-' | '.')
}

fn lex_error(at: usize, len: usize, msg: String) -> Diagnostic {
    Diagnostic::error("xmi-lex", SourceSpan::new(at, (at + len).max(at)), msg)
}

/// Tokenizes a whole document. Empty input yields an empty stream.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    // true while between `<`/`<?` and the matching `>`/`/>`/`?>`
    let mut in_tag = false;
    // true when the next name token is the tag name itself
    let mut expect_tag_name = false;

    while i < bytes.len() {
        let c = bytes[i] as char;
        if !in_tag {
            match c {
                c if c.is_ascii_whitespace() => i += 1,
                '<' => {
                    if bytes.get(i + 1) == Some(&b'/') {
                        toks.push(Token {
                            kind: TokenKind::OpenSlash,
                            start: i,
                            end: i + 2,
                        });
                        i += 2;
                    } else if bytes.get(i + 1) == Some(&b'?') {
                        toks.push(Token {
                            kind: TokenKind::DeclOpen,
                            start: i,
                            end: i + 2,
                        });
                        i += 2;
                    } else {
                        toks.push(Token {
                            kind: TokenKind::Open,
                            start: i,
                            end: i + 1,
                        });
                        i += 1;
                    }
                    in_tag = true;
                    expect_tag_name = true;
                }
                other => {
                    return Err(lex_error(
                        i,
                        other.len_utf8(),
                        format!("unexpected text content starting with `{other}`"),
                    ))
                }
            }
            continue;
        }

        match c {
            c if c.is_ascii_whitespace() => i += 1,
            '>' => {
                toks.push(Token {
                    kind: TokenKind::Close,
                    start: i,
                    end: i + 1,
                });
                i += 1;
                in_tag = false;
            }
            '/' if bytes.get(i + 1) == Some(&b'>') => {
                toks.push(Token {
                    kind: TokenKind::SelfClose,
                    start: i,
                    end: i + 2,
                });
                i += 2;
                in_tag = false;
            }
            '?' if bytes.get(i + 1) == Some(&b'>') => {
                toks.push(Token {
                    kind: TokenKind::DeclClose,
                    start: i,
                    end: i + 2,
                });
                i += 2;
                in_tag = false;
            }
            '=' => {
                toks.push(Token {
                    kind: TokenKind::Eq,
                    start: i,
                    end: i + 1,
                });
                i += 1;
            }
            '"' => {
                let start = i;
                i += 1;
                let mut value = String::new();
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(lex_error(
                                start,
                                text.len() - start,
                                "unterminated string literal".to_string(),
                            ))
                        }
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(b'&') => {
                            let rest = &text[i..];
                            let (decoded, used) = if rest.starts_with("&amp;") {
                                ('&', 5)
                            } else if rest.starts_with("&lt;") {
                                ('<', 4)
                            } else if rest.starts_with("&gt;") {
                                ('>', 4)
                            } else if rest.starts_with("&quot;") {
                                ('"', 6)
                            } else {
                                ('&', 1)
                            };
                            value.push(decoded);
                            i += used;
                        }
                        Some(_) => {
                            let ch = text[i..].chars().next().unwrap();
                            value.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                let numeric = !value.is_empty()
                    && value.chars().all(|c| c.is_ascii_digit() || c == '.');
                let kind = if numeric {
                    TokenKind::Num(value)
                } else {
                    TokenKind::Str(value)
                };
                toks.push(Token {
                    kind,
                    start,
                    end: i,
                });
            }
            c if is_name_start(c) => {
                let start = i;
                while i < bytes.len() && is_name_char(bytes[i] as char) {
                    i += 1;
                }
                let name = text[start..i].to_string();
                let kind = if expect_tag_name {
                    expect_tag_name = false;
                    TokenKind::TagName(name)
                } else {
                    TokenKind::PropertyName(name)
                };
                toks.push(Token {
                    kind,
                    start,
                    end: i,
                });
            }
            other => {
                return Err(lex_error(
                    i,
                    other.len_utf8(),
                    format!("illegal character `{other}` inside tag"),
                ))
            }
        }
    }

    if in_tag {
        return Err(lex_error(
            text.len(),
            0,
            "unterminated tag at end of input".to_string(),
        ));
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn empty_input_empty_stream() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  \n\t ").unwrap().is_empty());
    }

    #[test]
    fn property_assignment_tokens() {
        // a property only occurs inside a tag
        let toks = kinds("<node name=\"ActivityInitial\"/>");
        assert_eq!(
            toks,
            vec![
                TokenKind::Open,
                TokenKind::TagName("node".into()),
                TokenKind::PropertyName("name".into()),
                TokenKind::Eq,
                TokenKind::Str("ActivityInitial".into()),
                TokenKind::SelfClose,
            ]
        );
    }

    #[test]
    fn namespaced_property_and_id_value() {
        let toks = kinds("<node xmi:id=\"EAID_1\"/>");
        assert_eq!(
            toks,
            vec![
                TokenKind::Open,
                TokenKind::TagName("node".into()),
                TokenKind::PropertyName("xmi:id".into()),
                TokenKind::Eq,
                TokenKind::Str("EAID_1".into()),
                TokenKind::SelfClose,
            ]
        );
    }

    #[test]
    fn numeric_values_are_classified() {
        let toks = kinds("<xmi:XMI xmi:version=\"2.1\"/>");
        assert!(toks.contains(&TokenKind::Num("2.1".into())));
    }

    #[test]
    fn closing_tag_and_decl() {
        let toks = kinds("<?xml version=\"1.0\"?><a></a>");
        assert_eq!(toks[0], TokenKind::DeclOpen);
        assert_eq!(toks[1], TokenKind::TagName("xml".into()));
        assert!(toks.contains(&TokenKind::DeclClose));
        assert!(toks.contains(&TokenKind::OpenSlash));
    }

    #[test]
    fn entities_are_decoded() {
        let toks = kinds("<e g=\"a &amp;&amp; b &lt; &gt; &quot;q&quot;\"/>");
        assert!(toks.contains(&TokenKind::Str("a && b < > \"q\"".into())));
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = tokenize("<a name=\"oops>").unwrap_err();
        assert!(err.message.contains("unterminated string"));
        assert_eq!(err.span.start, 8);
    }

    #[test]
    fn stray_text_is_an_error() {
        let err = tokenize("<a/> stray").unwrap_err();
        assert!(err.message.contains("text content"));
    }

    #[test]
    fn illegal_char_in_tag_is_an_error() {
        let err = tokenize("<a %>").unwrap_err();
        assert!(err.message.contains("illegal character"));
    }
}
