use std::fmt;

use super::{Pos, QueryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Int,
    Float,
    String,
    Punct,
    Dollar,
    Bang,
    Eof,
}

/// One lexical token. For `String` tokens `text` holds the decoded value; for every other
/// kind it is the exact source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn pos(&self) -> Pos {
        Pos::new(self.line, self.column)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_name(&self, n: &str) -> bool {
        self.kind == TokenKind::Name && self.text == n
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Eof => f.write_str("end of input"),
            TokenKind::String => write!(f, "string {:?}", self.text),
            TokenKind::Name => write!(f, "name {:?}", self.text),
            TokenKind::Int | TokenKind::Float => write!(f, "number {}", self.text),
            _ => write!(f, "{:?}", self.text),
        }
    }
}

const PUNCTUATORS: [char; 7] = ['(', ')', '{', '}', '[', ']', ':'];

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(source: &'a str) -> Self {
        Self {
            chars: source.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        match c {
            '\n' => {
                self.line += 1;
                self.column = 1;
            }
            '\r' => {
                if self.peek() != Some('\n') {
                    self.line += 1;
                    self.column = 1;
                }
            }
            _ => self.column += 1,
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> QueryError {
        QueryError::Lex {
            message: message.into(),
            pos: Pos::new(line, column),
        }
    }

    fn skip_ignored(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' | '\n' | '\r' | ',' | '\u{feff}' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' || c == '\r' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, QueryError> {
        self.skip_ignored();
        let (line, column) = (self.line, self.column);
        let token = |kind, text: String| Token {
            kind,
            text,
            line,
            column,
        };
        let Some(c) = self.peek() else {
            return Ok(token(TokenKind::Eof, String::new()));
        };
        match c {
            '$' => {
                self.bump();
                Ok(token(TokenKind::Dollar, "$".into()))
            }
            '!' => {
                self.bump();
                Ok(token(TokenKind::Bang, "!".into()))
            }
            c if PUNCTUATORS.contains(&c) => {
                self.bump();
                Ok(token(TokenKind::Punct, c.to_string()))
            }
            c if c == '_' || c.is_ascii_alphabetic() => {
                let mut text = String::new();
                while let Some(c) = self
                    .peek()
                    .filter(|c| *c == '_' || c.is_ascii_alphanumeric())
                {
                    text.push(c);
                    self.bump();
                }
                Ok(token(TokenKind::Name, text))
            }
            c if c == '-' || c.is_ascii_digit() => self.number(line, column),
            '"' => self.string(line, column),
            other => Err(self.error(line, column, format!("illegal character {other:?}"))),
        }
    }

    fn digits(&mut self, text: &mut String) -> usize {
        let mut n = 0;
        while let Some(d) = self.peek().filter(char::is_ascii_digit) {
            text.push(d);
            self.bump();
            n += 1;
        }
        n
    }

    fn number(&mut self, line: usize, column: usize) -> Result<Token, QueryError> {
        let mut text = String::new();
        if self.peek() == Some('-') {
            text.push('-');
            self.bump();
        }
        let int_start = text.len();
        if self.digits(&mut text) == 0 {
            return Err(self.error(self.line, self.column, "expected digit"));
        }
        if text[int_start..].starts_with('0') && text.len() - int_start > 1 {
            return Err(self.error(line, column, "leading zeros are not allowed"));
        }
        let mut kind = TokenKind::Int;
        if self.peek() == Some('.') {
            kind = TokenKind::Float;
            text.push('.');
            self.bump();
            if self.digits(&mut text) == 0 {
                return Err(self.error(self.line, self.column, "expected digit after '.'"));
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            kind = TokenKind::Float;
            text.push('e');
            self.bump();
            if let Some(sign) = self.peek().filter(|c| *c == '+' || *c == '-') {
                text.push(sign);
                self.bump();
            }
            if self.digits(&mut text) == 0 {
                return Err(self.error(self.line, self.column, "expected exponent digits"));
            }
        }
        if let Some(c) = self
            .peek()
            .filter(|c| *c == '.' || *c == '_' || c.is_ascii_alphabetic())
        {
            return Err(self.error(
                self.line,
                self.column,
                format!("illegal character {c:?} after number"),
            ));
        }
        Ok(Token {
            kind,
            text,
            line,
            column,
        })
    }

    fn string(&mut self, line: usize, column: usize) -> Result<Token, QueryError> {
        self.bump();
        if self.peek() == Some('"') {
            self.bump();
            if self.peek() == Some('"') {
                return Err(self.error(line, column, "block strings are not supported"));
            }
            return Ok(Token {
                kind: TokenKind::String,
                text: String::new(),
                line,
                column,
            });
        }
        let mut value = String::new();
        loop {
            let (l, c) = (self.line, self.column);
            match self.bump() {
                None | Some('\n' | '\r') => {
                    return Err(self.error(line, column, "unterminated string"))
                }
                Some('"') => break,
                Some('\\') => value.push(self.escape(l, c)?),
                Some(ch) if ch < ' ' && ch != '\t' => {
                    return Err(self.error(l, c, format!("control character {ch:?} in string")))
                }
                Some(ch) => value.push(ch),
            }
        }
        Ok(Token {
            kind: TokenKind::String,
            text: value,
            line,
            column,
        })
    }

    fn escape(&mut self, line: usize, column: usize) -> Result<char, QueryError> {
        let bad = |me: &Self| me.error(line, column, "invalid escape sequence");
        match self.bump() {
            Some('"') => Ok('"'),
            Some('\\') => Ok('\\'),
            Some('/') => Ok('/'),
            Some('b') => Ok('\u{8}'),
            Some('f') => Ok('\u{c}'),
            Some('n') => Ok('\n'),
            Some('r') => Ok('\r'),
            Some('t') => Ok('\t'),
            Some('u') => {
                let high = self.hex4().ok_or_else(|| bad(self))?;
                if (0xD800..0xDC00).contains(&high) {
                    if self.bump() != Some('\\') || self.bump() != Some('u') {
                        return Err(bad(self));
                    }
                    let low = self.hex4().ok_or_else(|| bad(self))?;
                    if !(0xDC00..0xE000).contains(&low) {
                        return Err(bad(self));
                    }
                    let code = 0x10000 + ((high - 0xD800) << 10) + (low - 0xDC00);
                    char::from_u32(code).ok_or_else(|| bad(self))
                } else {
                    char::from_u32(high).ok_or_else(|| bad(self))
                }
            }
            _ => Err(bad(self)),
        }
    }

    fn hex4(&mut self) -> Option<u32> {
        let mut code = 0;
        for _ in 0..4 {
            let d = self.peek()?.to_digit(16)?;
            self.bump();
            code = code * 16 + d;
        }
        Some(code)
    }
}

/// Splits `source` into tokens, dropping whitespace, commas, and `#` comments.
/// The returned list always ends with an `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, QueryError> {
    let mut lexer = Lexer::new(source);
    let mut tokens = Vec::new();
    loop {
        let token = lexer.next_token()?;
        let done = token.kind == TokenKind::Eof;
        tokens.push(token);
        if done {
            return Ok(tokens);
        }
    }
}
