use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::QueryError;

const MAX_DEPTH: usize = 64;

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
}

/// Parses a request document in the supported GraphQL subset.
pub fn parse(source: &str) -> Result<QueryDocument, QueryError> {
    let mut parser = Parser {
        tokens: tokenize(source)?,
        at: 0,
        depth: 0,
    };
    parser.document()
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.at].clone();
        if token.kind != TokenKind::Eof {
            self.at += 1;
        }
        token
    }

    fn unexpected(&self, expected: &str) -> QueryError {
        let found = self.peek();
        QueryError::Parse {
            message: format!("expected {expected}, found {found}"),
            pos: found.pos(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Token, QueryError> {
        if self.peek().is_punct(p) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&format!("{p:?}")))
        }
    }

    fn expect_name(&mut self) -> Result<Token, QueryError> {
        if self.peek().kind == TokenKind::Name {
            Ok(self.advance())
        } else {
            Err(self.unexpected("a name"))
        }
    }

    fn document(&mut self) -> Result<QueryDocument, QueryError> {
        let mut operations = Vec::new();
        loop {
            operations.push(self.operation()?);
            if self.peek().kind == TokenKind::Eof {
                break;
            }
        }
        Ok(QueryDocument { operations })
    }

    fn operation(&mut self) -> Result<Operation, QueryError> {
        let start = self.peek().clone();
        if start.is_punct("{") {
            let selection_set = self.selection_set(&HashSet::new())?;
            return Ok(Operation {
                op_type: OperationType::Query,
                name: None,
                variable_defs: Vec::new(),
                selection_set,
                pos: start.pos(),
            });
        }
        let op_type = if start.is_name("query") {
            OperationType::Query
        } else if start.is_name("mutation") {
            OperationType::Mutation
        } else {
            return Err(self.unexpected("\"query\", \"mutation\" or \"{\""));
        };
        self.advance();
        let name = if self.peek().kind == TokenKind::Name {
            Some(self.advance().text)
        } else {
            None
        };
        let variable_defs = if self.peek().is_punct("(") {
            self.variable_defs()?
        } else {
            Vec::new()
        };
        let declared: HashSet<String> = variable_defs.iter().map(|v| v.name.clone()).collect();
        let selection_set = self.selection_set(&declared)?;
        Ok(Operation {
            op_type,
            name,
            variable_defs,
            selection_set,
            pos: start.pos(),
        })
    }

    fn variable_defs(&mut self) -> Result<Vec<VariableDefinition>, QueryError> {
        self.expect_punct("(")?;
        let mut defs: Vec<VariableDefinition> = Vec::new();
        loop {
            let dollar = self.peek().clone();
            if dollar.kind != TokenKind::Dollar {
                return Err(self.unexpected("\"$\""));
            }
            self.advance();
            let name = self.expect_name()?.text;
            if defs.iter().any(|d| d.name == name) {
                return Err(QueryError::Parse {
                    message: format!("variable ${name} declared twice"),
                    pos: dollar.pos(),
                });
            }
            self.expect_punct(":")?;
            let type_ref = self.expect_name()?.text;
            let non_null = if self.peek().kind == TokenKind::Bang {
                self.advance();
                true
            } else {
                false
            };
            defs.push(VariableDefinition {
                name,
                type_ref,
                non_null,
            });
            if self.peek().is_punct(")") {
                self.advance();
                return Ok(defs);
            }
        }
    }

    fn enter(&mut self) -> Result<(), QueryError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(QueryError::Parse {
                message: format!("nesting deeper than {MAX_DEPTH} levels"),
                pos: self.peek().pos(),
            });
        }
        Ok(())
    }

    fn selection_set(&mut self, declared: &HashSet<String>) -> Result<Vec<Selection>, QueryError> {
        self.enter()?;
        self.expect_punct("{")?;
        if self.peek().is_punct("}") {
            return Err(self.unexpected("a field selection"));
        }
        let mut selections = Vec::new();
        while !self.peek().is_punct("}") {
            selections.push(self.selection(declared)?);
        }
        self.advance();
        self.depth -= 1;
        Ok(selections)
    }

    fn selection(&mut self, declared: &HashSet<String>) -> Result<Selection, QueryError> {
        let first = self.expect_name()?;
        let (alias, field_name) = if self.peek().is_punct(":") {
            self.advance();
            (Some(first.text.clone()), self.expect_name()?.text)
        } else {
            (None, first.text.clone())
        };
        let arguments = if self.peek().is_punct("(") {
            self.arguments(declared)?
        } else {
            Vec::new()
        };
        let selection_set = if self.peek().is_punct("{") {
            Some(self.selection_set(declared)?)
        } else {
            None
        };
        Ok(Selection {
            alias,
            field_name,
            arguments,
            selection_set,
            pos: first.pos(),
        })
    }

    fn arguments(&mut self, declared: &HashSet<String>) -> Result<Vec<Argument>, QueryError> {
        self.expect_punct("(")?;
        let mut args: Vec<Argument> = Vec::new();
        loop {
            let name_tok = self.expect_name()?;
            if args.iter().any(|a| a.name == name_tok.text) {
                return Err(QueryError::Parse {
                    message: format!("argument {:?} given twice", name_tok.text),
                    pos: name_tok.pos(),
                });
            }
            self.expect_punct(":")?;
            let value = self.value(declared)?;
            args.push(Argument {
                name: name_tok.text,
                value,
            });
            if self.peek().is_punct(")") {
                self.advance();
                return Ok(args);
            }
        }
    }

    fn value(&mut self, declared: &HashSet<String>) -> Result<Value, QueryError> {
        let token = self.peek().clone();
        match token.kind {
            TokenKind::Dollar => {
                self.advance();
                let name = self.expect_name()?.text;
                if !declared.contains(&name) {
                    return Err(QueryError::Parse {
                        message: format!("variable ${name} is not declared by the operation"),
                        pos: token.pos(),
                    });
                }
                Ok(Value::Variable(name))
            }
            TokenKind::Int => {
                self.advance();
                token
                    .text
                    .parse::<i64>()
                    .map(Value::Int)
                    .map_err(|_| QueryError::Parse {
                        message: format!("integer {} does not fit in 64 bits", token.text),
                        pos: token.pos(),
                    })
            }
            TokenKind::Float => {
                self.advance();
                match token.text.parse::<f64>() {
                    Ok(f) if f.is_finite() => Ok(Value::Float(f)),
                    _ => Err(QueryError::Parse {
                        message: format!("float {} is out of range", token.text),
                        pos: token.pos(),
                    }),
                }
            }
            TokenKind::String => {
                self.advance();
                Ok(Value::String(token.text))
            }
            TokenKind::Name => {
                self.advance();
                Ok(match token.text.as_str() {
                    "true" => Value::Boolean(true),
                    "false" => Value::Boolean(false),
                    "null" => Value::Null,
                    _ => Value::Enum(token.text),
                })
            }
            TokenKind::Punct if token.text == "[" => {
                self.enter()?;
                self.advance();
                let mut items = Vec::new();
                while !self.peek().is_punct("]") {
                    items.push(self.value(declared)?);
                }
                self.advance();
                self.depth -= 1;
                Ok(Value::List(items))
            }
            TokenKind::Punct if token.text == "{" => {
                self.enter()?;
                self.advance();
                let mut fields: Vec<(String, Value)> = Vec::new();
                while !self.peek().is_punct("}") {
                    let key = self.expect_name()?;
                    if fields.iter().any(|(k, _)| *k == key.text) {
                        return Err(QueryError::Parse {
                            message: format!("object field {:?} given twice", key.text),
                            pos: key.pos(),
                        });
                    }
                    self.expect_punct(":")?;
                    let value = self.value(declared)?;
                    fields.push((key.text, value));
                }
                self.advance();
                self.depth -= 1;
                Ok(Value::Object(fields))
            }
            _ => Err(self.unexpected("a value")),
        }
    }
}
