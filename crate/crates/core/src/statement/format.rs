//! Canonical one-line rendering of a [`RelationProgram`] and its inverse.
//!
//! ```text
//! lamp | left_of(desk) ! between(bed, bed)
//! box{color=blue,size=larger} | on_top_of(table{material=wooden})
//! recycling bin{extra=tall} | left_of()@(door)
//! chair | near(table) + near(bed)
//! ```

use std::fmt::Write as _;

use super::lexicon::normalize_class;
use super::parser::ParseError;
use super::program::{Combinator, ObjectDescriptor, Relation, RelationProgram, RelationTerm, SizeComparative};

pub fn format_descriptor(d: &ObjectDescriptor) -> String {
    let mut parts = Vec::new();
    let a = &d.attributes;
    if let Some(c) = &a.color {
        parts.push(format!("color={c}"));
    }
    if let Some(m) = &a.material {
        parts.push(format!("material={m}"));
    }
    if let Some(s) = &a.shape {
        parts.push(format!("shape={s}"));
    }
    if !a.extra.is_empty() {
        parts.push(format!("extra={}", a.extra.join("+")));
    }
    if let Some(s) = d.size_comparative {
        parts.push(format!("size={}", s.as_str()));
    }
    if parts.is_empty() {
        d.class_name.clone()
    } else {
        format!("{}{{{}}}", d.class_name, parts.join(","))
    }
}

pub fn format_term(t: &RelationTerm) -> String {
    let anchors: Vec<String> = t.anchors.iter().map(format_descriptor).collect();
    let mut out = format!("{}({})", t.relation.name(), anchors.join(", "));
    if let Some(v) = &t.view_anchor {
        let _ = write!(out, "@({})", format_descriptor(v));
    }
    out
}

/// Deterministic canonical rendering; [`parse_canonical`] inverts it.
pub fn format_program(p: &RelationProgram) -> String {
    let mut out = format!("{} |", format_descriptor(&p.target));
    let sep = match p.combinator {
        Combinator::Intersect => " & ",
        Combinator::Union => " + ",
    };
    let terms: Vec<String> = p.terms.iter().map(format_term).collect();
    if !terms.is_empty() {
        out.push(' ');
        out.push_str(&terms.join(sep));
    }
    for t in &p.negated_terms {
        out.push_str(" ! ");
        out.push_str(&format_term(t));
    }
    out
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.pos,
            reason: reason.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected {c:?}"))
        }
    }

    /// Text up to the next delimiter, trimmed; spaces are allowed inside.
    fn word(&mut self, delimiters: &[char]) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        let end = self.text[start..].find(|c: char| delimiters.contains(&c)).map_or(self.text.len(), |i| start + i);
        self.pos = end;
        self.text[start..end].trim_end()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn descriptor(&mut self) -> Result<ObjectDescriptor, ParseError> {
        let start = self.pos;
        let name = self.word(&['{', '(', ')', ',', '|', '&', '+', '!', '@', '}', '=']);
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == ' ' || c == '-' || c == '\'') {
            self.pos = start;
            return self.err("expected a class name");
        }
        let mut d = ObjectDescriptor::new(normalize_class(name));
        if self.eat('{') {
            loop {
                let key_pos = self.pos;
                let key = self.word(&['=', '}', ',']);
                self.expect('=')?;
                let value = self.word(&[',', '}']);
                if value.is_empty() {
                    return self.err("empty attribute value");
                }
                let slot = match key {
                    "color" => &mut d.attributes.color,
                    "material" => &mut d.attributes.material,
                    "shape" => &mut d.attributes.shape,
                    "extra" => {
                        for e in value.split('+') {
                            d.attributes.push_extra(e.trim());
                        }
                        if !self.eat(',') {
                            break;
                        }
                        continue;
                    }
                    "size" => {
                        let Some(s) = SizeComparative::from_word(value) else {
                            return self.err(format!("unknown size {value:?}"));
                        };
                        d.size_comparative = Some(s);
                        if !self.eat(',') {
                            break;
                        }
                        continue;
                    }
                    _ => {
                        self.pos = key_pos;
                        return self.err(format!("unknown attribute {key:?}"));
                    }
                };
                *slot = Some(value.to_string());
                if !self.eat(',') {
                    break;
                }
            }
            self.expect('}')?;
        }
        Ok(d)
    }

    fn term(&mut self) -> Result<RelationTerm, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let name = self.word(&['(']);
        let Some(relation) = Relation::from_name(name) else {
            self.pos = start;
            return self.err(format!("unknown relation {name:?}"));
        };
        self.expect('(')?;
        let mut anchors = Vec::new();
        if !self.eat(')') {
            loop {
                anchors.push(self.descriptor()?);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        let mut term = RelationTerm::new(relation, anchors);
        if self.eat('@') {
            self.expect('(')?;
            term.view_anchor = Some(self.descriptor()?);
            self.expect(')')?;
        }
        if !term.is_well_formed() {
            self.pos = start;
            return self.err("relation has the wrong number of objects");
        }
        Ok(term)
    }
}

/// Parses the output of [`format_program`].
pub fn parse_canonical(text: &str) -> Result<RelationProgram, ParseError> {
    let mut s = Scanner { text, pos: 0 };
    let target = s.descriptor()?;
    s.expect('|')?;
    let mut terms = Vec::new();
    let mut combinator: Option<Combinator> = None;
    let mut negated = Vec::new();
    s.skip_ws();
    if !s.at_end() && s.peek() != Some('!') {
        terms.push(s.term()?);
        loop {
            let next = if s.eat('&') {
                Combinator::Intersect
            } else if s.eat('+') {
                Combinator::Union
            } else {
                break;
            };
            if combinator.is_some_and(|c| c != next) {
                return s.err("mixed combinators");
            }
            combinator = Some(next);
            terms.push(s.term()?);
        }
    }
    while s.eat('!') {
        negated.push(s.term()?);
    }
    if !s.at_end() {
        return s.err("trailing input");
    }
    let mut p = RelationProgram::new(target, terms).with_combinator(combinator.unwrap_or_default());
    p.negated_terms = negated;
    Ok(p)
}
