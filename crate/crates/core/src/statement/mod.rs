//! Referring statements: the relation-program representation, the template
//! grammar that produces it, and a generator for synthetic benchmarks.

mod format;
mod generate;
mod lexicon;
mod parser;
mod program;

pub use format::{format_descriptor, format_program, format_term, parse_canonical};
pub use generate::{generate_statement, split_tags, AttributeMode, GeneratedStatement, StatementConfig, StatementError};
pub use lexicon::{normalize_class, ordinal_word, pluralize, singularize};
pub use parser::{parse, ParseError, Parser};
pub use program::{
    Combinator, ObjectDescriptor, Relation, RelationKind, RelationProgram, RelationTerm, SizeComparative,
};
