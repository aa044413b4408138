//! Lexer, parser, and canonical printer for the GraphQL subset the generated API speaks:
//! queries and mutations with variables, arguments, aliases, and nested selections.
//! Fragments, directives, subscriptions, and block strings are not part of the subset.

mod ast;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::{
    Argument, Operation, OperationType, Pos, QueryDocument, Selection, Value, VariableDefinition,
};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use printer::print;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QueryError {
    #[error("syntax error at {pos}: {message}")]
    Lex { message: String, pos: Pos },
    #[error("parse error at {pos}: {message}")]
    Parse { message: String, pos: Pos },
}

impl QueryError {
    pub fn pos(&self) -> Pos {
        match self {
            QueryError::Lex { pos, .. } | QueryError::Parse { pos, .. } => *pos,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            QueryError::Lex { message, .. } | QueryError::Parse { message, .. } => message,
        }
    }
}
