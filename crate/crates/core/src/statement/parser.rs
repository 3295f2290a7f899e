//! Recursive-descent parser for template referring expressions.
//!
//! ```text
//! utterance  := main { negation } [ "." ]
//! main       := np [ clause { [","] ("and" | "or") clause } ]
//! clause     := { filler } relation [ anchors ] [ [","] view ]
//! anchors    := np | np "and" np            (two only for "between")
//! view       := view-opener np              ("if you are facing the door")
//! negation   := ("." | ",") "not" np clause { ... }
//! np         := article { ordinal | size | attribute } class-words
//! ```
//!
//! Input containing `|` is read as the canonical rendering produced by
//! [`super::format_program`] instead.

use thiserror::Error;

use super::lexicon::{
    ordinal_value, singularize, AnchorUse, PhraseKind, RelationPhrase, ARTICLES, FILLERS,
    RELATION_PHRASES, VIEW_PHRASES,
};
use super::program::{
    Combinator, ObjectDescriptor, Relation, RelationProgram, RelationTerm, SizeComparative,
};
use crate::scene::Vocabulary;

/// The statement is outside the template grammar. `position` is the byte
/// offset where the longest parsable prefix ends.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("out of grammar at byte {position}: {reason}")]
pub struct ParseError {
    pub position: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum TokenKind {
    Word,
    Period,
    Comma,
}

#[derive(Clone, Debug)]
struct Token {
    text: String,
    start: usize,
    kind: TokenKind,
}

fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    let flush = |tokens: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            tokens.push(Token {
                text: input[s..end].to_lowercase(),
                start: s,
                kind: TokenKind::Word,
            });
        }
    };
    for (i, c) in input.char_indices() {
        if c.is_alphanumeric() || c == '\'' || c == '-' {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        flush(&mut tokens, &mut word_start, i);
        match c {
            c if c.is_whitespace() => {}
            '.' => tokens.push(Token {
                text: ".".into(),
                start: i,
                kind: TokenKind::Period,
            }),
            ',' | ';' => tokens.push(Token {
                text: ",".into(),
                start: i,
                kind: TokenKind::Comma,
            }),
            other => {
                return Err(ParseError {
                    position: i,
                    reason: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    flush(&mut tokens, &mut word_start, input.len());
    Ok(tokens)
}

/// Parser bound to an attribute vocabulary.
pub struct Parser<'v> {
    vocab: &'v Vocabulary,
}

struct NounPhrase {
    descriptor: ObjectDescriptor,
    plural: bool,
    ordinal: Option<u32>,
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    len: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_word(&self, offset: usize) -> Option<&'a str> {
        self.tokens
            .get(self.pos + offset)
            .filter(|t| t.kind == TokenKind::Word)
            .map(|t| t.text.as_str())
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |t| t.start)
    }

    fn error<T>(&self, reason: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            reason: reason.into(),
        })
    }

    fn matches_words(&self, pattern: &[&str]) -> bool {
        pattern.iter().enumerate().all(|(i, w)| self.peek_word(i) == Some(*w))
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.peek_word(0) == Some(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kind(&mut self, kind: TokenKind) -> bool {
        if self.peek().is_some_and(|t| t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Longest relation phrase starting here, with its ordinal value if any.
    fn relation_phrase(&self) -> Option<(RelationPhrase, u32)> {
        let mut best: Option<(RelationPhrase, u32)> = None;
        for phrase in RELATION_PHRASES {
            let mut k = 0;
            let ok = phrase.words.iter().enumerate().all(|(i, w)| match (*w, self.peek_word(i)) {
                ("#", Some(word)) => ordinal_value(word).map(|v| k = v).is_some(),
                (w, Some(word)) => w == word,
                _ => false,
            });
            if ok && best.as_ref().is_none_or(|(b, _)| phrase.words.len() > b.words.len()) {
                best = Some((*phrase, k));
            }
        }
        best
    }

    fn filler(&self) -> Option<usize> {
        FILLERS.iter().filter(|f| self.matches_words(f)).map(|f| f.len()).max()
    }

    fn view_opener(&self) -> Option<usize> {
        VIEW_PHRASES.iter().filter(|f| self.matches_words(f)).map(|f| f.len()).max()
    }

    fn at_np_boundary(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) if t.kind != TokenKind::Word => true,
            Some(t) => {
                matches!(t.text.as_str(), "and" | "or" | "not")
                    || ARTICLES.contains(&t.text.as_str())
                    || self.relation_phrase().is_some()
                    || self.filler().is_some()
                    || self.view_opener().is_some()
            }
        }
    }

    fn at_article(&self) -> bool {
        self.peek_word(0).is_some_and(|w| ARTICLES.contains(&w))
    }
}

impl Default for Parser<'static> {
    fn default() -> Self {
        Parser::new(Vocabulary::builtin())
    }
}

impl<'v> Parser<'v> {
    pub fn new(vocab: &'v Vocabulary) -> Self {
        Self { vocab }
    }

    pub fn parse(&self, utterance: &str) -> Result<RelationProgram, ParseError> {
        if utterance.contains('|') {
            return super::format::parse_canonical(utterance);
        }
        let tokens = tokenize(utterance)?;
        let mut cur = Cursor {
            tokens: &tokens,
            pos: 0,
            len: utterance.len(),
        };
        if cur.at_end() {
            return cur.error("empty statement");
        }
        let target = self.noun_phrase(&mut cur, true)?;
        let (terms, combinator) = self.clauses(&mut cur, target.ordinal)?;
        if target.ordinal.is_some() && terms.is_empty() {
            return cur.error("ordinal needs a \"from\" or \"closest to\" clause");
        }
        let mut program = RelationProgram::new(target.descriptor, terms).with_combinator(combinator);

        loop {
            let save = cur.pos;
            let had_punct = cur.eat_kind(TokenKind::Period) || cur.eat_kind(TokenKind::Comma);
            if cur.eat_word("not") {
                let negated = self.noun_phrase(&mut cur, false)?;
                let (terms, _) = self.clauses(&mut cur, None)?;
                if terms.is_empty() {
                    return cur.error("negated clause needs a relation");
                }
                drop(negated);
                program.negated_terms.extend(terms);
                continue;
            }
            if had_punct && cur.at_end() {
                break;
            }
            cur.pos = save;
            break;
        }
        if !cur.at_end() {
            return cur.error(format!("unexpected {:?}", cur.peek().map(|t| t.text.as_str()).unwrap_or("")));
        }
        Ok(program)
    }

    fn clauses(&self, cur: &mut Cursor<'_>, ordinal: Option<u32>) -> Result<(Vec<RelationTerm>, Combinator), ParseError> {
        let mut terms = Vec::new();
        let mut combinator: Option<Combinator> = None;
        if !self.clause_starts(cur) {
            return Ok((terms, Combinator::Intersect));
        }
        terms.push(self.clause(cur, ordinal)?);
        loop {
            let save = cur.pos;
            cur.eat_kind(TokenKind::Comma);
            let next = if cur.eat_word("and") {
                Combinator::Intersect
            } else if cur.eat_word("or") {
                Combinator::Union
            } else {
                cur.pos = save;
                break;
            };
            if !self.clause_starts(cur) {
                cur.pos = save;
                break;
            }
            if combinator.is_some_and(|c| c != next) {
                return cur.error("mixing \"and\" with \"or\" is not supported");
            }
            combinator = Some(next);
            terms.push(self.clause(cur, None)?);
        }
        Ok((terms, combinator.unwrap_or_default()))
    }

    fn clause_starts(&self, cur: &Cursor<'_>) -> bool {
        cur.relation_phrase().is_some() || cur.filler().is_some()
    }

    fn clause(&self, cur: &mut Cursor<'_>, ordinal: Option<u32>) -> Result<RelationTerm, ParseError> {
        while let Some(n) = cur.filler() {
            cur.pos += n;
        }
        let Some((phrase, k)) = cur.relation_phrase() else {
            return cur.error("expected a relation phrase");
        };
        let relation = match phrase.kind {
            PhraseKind::Fixed(r) => {
                if ordinal.is_some() {
                    return cur.error("an ordinal target must be followed by \"from\"");
                }
                r
            }
            PhraseKind::Ordinal => {
                if ordinal.is_some() {
                    return cur.error("ordinal given twice");
                }
                ordinal_relation(k)
            }
            PhraseKind::OrdinalFrom => match ordinal {
                Some(k) => ordinal_relation(k),
                None => return cur.error("\"from\" needs an ordinal target such as \"the second chair\""),
            },
        };
        cur.pos += phrase.words.len();

        let wants_anchor = match phrase.anchor {
            AnchorUse::Required => true,
            AnchorUse::Forbidden => false,
            AnchorUse::Optional => cur.at_article(),
        };
        let mut anchors = Vec::new();
        if wants_anchor {
            let first = self.noun_phrase(cur, false)?;
            if relation == Relation::Between {
                let save = cur.pos;
                if cur.eat_word("and") && cur.at_article() {
                    anchors.push(first.descriptor);
                    anchors.push(self.noun_phrase(cur, false)?.descriptor);
                } else if first.plural {
                    cur.pos = save;
                    anchors.push(first.descriptor.clone());
                    anchors.push(first.descriptor);
                } else {
                    cur.pos = save;
                    return cur.error("\"between\" needs two objects");
                }
            } else {
                anchors.push(first.descriptor);
            }
        }

        let mut term = RelationTerm::new(relation, anchors);
        let save = cur.pos;
        cur.eat_kind(TokenKind::Comma);
        if let Some(n) = cur.view_opener() {
            if !relation.is_view_dependent() {
                return cur.error("a viewpoint only applies to left/right/front/behind");
            }
            cur.pos += n;
            term.view_anchor = Some(self.noun_phrase(cur, false)?.descriptor);
        } else {
            cur.pos = save;
        }
        if !term.is_well_formed() {
            return cur.error("relation has the wrong number of objects");
        }
        Ok(term)
    }

    fn noun_phrase(&self, cur: &mut Cursor<'_>, allow_ordinal: bool) -> Result<NounPhrase, ParseError> {
        if !cur.eat_word("the") && !cur.eat_word("a") && !cur.eat_word("an") {
            return cur.error("expected a noun phrase starting with an article");
        }
        let start = cur.pos;
        let mut words: Vec<&str> = Vec::new();
        // The first word is always part of the phrase ("the second chair"),
        // later words stop at relation phrases and clause keywords.
        while let Some(t) = cur.peek() {
            if t.kind != TokenKind::Word || (!words.is_empty() && cur.at_np_boundary()) {
                break;
            }
            if words.is_empty() && (ARTICLES.contains(&t.text.as_str()) || matches!(t.text.as_str(), "and" | "or" | "not")) {
                break;
            }
            words.push(t.text.as_str());
            cur.pos += 1;
        }
        if words.is_empty() {
            return cur.error("expected an object name");
        }
        if let Some(bad) = words.iter().position(|w| !w.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '\'')) {
            cur.pos = start + bad;
            return cur.error("invalid word in object name");
        }

        let mut idx = 0;
        let mut ordinal = None;
        if words.len() > 1 {
            if let Some(k) = ordinal_value(words[0]) {
                if !allow_ordinal {
                    cur.pos = start;
                    return cur.error("ordinals are only supported on the target object");
                }
                ordinal = Some(k);
                idx = 1;
            }
        }
        let mut descriptor = ObjectDescriptor::new(String::new());
        while idx + 1 < words.len() {
            let w = words[idx];
            if let Some(size) = SizeComparative::from_word(w) {
                if descriptor.size_comparative.replace(size).is_some() {
                    cur.pos = start + idx;
                    return cur.error("two size comparatives");
                }
            } else if let Some(kind) = self.vocab.classify(w) {
                descriptor.attributes.assign(kind, &self.vocab.normalize(w));
            } else {
                break;
            }
            idx += 1;
        }
        let class_words = &words[idx..];
        if class_words.iter().any(|w| ordinal_value(w).is_some() && class_words.len() > 1) {
            cur.pos = start + idx;
            return cur.error("misplaced ordinal");
        }
        let (last, plural) = singularize(class_words[class_words.len() - 1]);
        let mut name: Vec<&str> = class_words[..class_words.len() - 1].to_vec();
        name.push(&last);
        descriptor.class_name = name.join(" ");
        Ok(NounPhrase {
            descriptor,
            plural,
            ordinal,
        })
    }
}

fn ordinal_relation(k: u32) -> Relation {
    if k <= 1 {
        Relation::Closest
    } else {
        Relation::OrdinalClosest(k)
    }
}

/// Parses with the bundled vocabulary.
pub fn parse(utterance: &str) -> Result<RelationProgram, ParseError> {
    Parser::default().parse(utterance)
}
