//! SCL: the SystemC-subset component language. Lexing, parsing, pretty
//! printing and elaboration into a flat [`Design`].

pub mod ast;
pub mod design;
pub mod elab;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod types;

pub use ast::{DesignAst, Pos};
pub use design::*;
pub use elab::{elaborate, elaborate_with, ElabConfig, ElabError, ElabOptions};
pub use parser::{parse, parse_expr_text, parse_ltl_text};
pub use pretty::pretty_print;
pub use types::{ScalarType, Value};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{pos}: illegal character {ch:?}")]
    IllegalChar { pos: Pos, ch: char },
    #[error("{pos}: integer literal {text} does not fit in 64 bits")]
    IntegerOverflow { pos: Pos, text: String },
    #[error("{pos}: unexpected {found}, expected {}", expected.join(" or "))]
    Unexpected { pos: Pos, found: String, expected: Vec<String> },
}

impl SyntaxError {
    pub fn pos(&self) -> Pos {
        match self {
            SyntaxError::IllegalChar { pos, .. }
            | SyntaxError::IntegerOverflow { pos, .. }
            | SyntaxError::Unexpected { pos, .. } => *pos,
        }
    }
}
