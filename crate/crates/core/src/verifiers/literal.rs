//! Parser for parameter literals as they appear in constraint tables,
//! e.g. `[[(3, 3), (1, 2)]]` or `[['apple'], 3, 10000]`. Accepts JSON plus
//! Python-style tuples and single-quoted strings; tuples become JSON arrays.

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid parameter literal at offset {offset}: {message}")]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, LiteralError> {
        Err(LiteralError { offset: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn value(&mut self) -> Result<Value, LiteralError> {
        self.skip_ws();
        match self.peek() {
            Some('[') => self.sequence(']'),
            Some('(') => self.sequence(')'),
            Some(q @ ('"' | '\'')) => self.string(q).map(Value::String),
            Some(c) if c == '-' || c == '+' || c.is_ascii_digit() => self.integer(),
            Some(c) => self.err(format!("unexpected character {c:?}")),
            None => self.err("unexpected end of input"),
        }
    }

    fn sequence(&mut self, close: char) -> Result<Value, LiteralError> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(close) {
                self.pos += 1;
                return Ok(Value::Array(items));
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(c) if c == close => {}
                Some(c) => return self.err(format!("expected ',' or {close:?}, found {c:?}")),
                None => return self.err(format!("missing closing {close:?}")),
            }
        }
    }

    fn string(&mut self, quote: char) -> Result<String, LiteralError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return self.err("unterminated string"),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    let esc = match self.peek() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some(c @ ('\\' | '\'' | '"' | '/')) => c,
                        Some(c) => return self.err(format!("unsupported escape \\{c}")),
                        None => return self.err("unterminated escape"),
                    };
                    out.push(esc);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn integer(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.pos += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.trim_start_matches('+').parse::<i64>() {
            Ok(n) => Ok(Value::from(n)),
            Err(_) => {
                self.pos = start;
                self.err(format!("invalid integer {text:?}"))
            }
        }
    }
}

/// Parse a parameter-vector literal. The top level must be a list.
pub fn parse_param_literal(src: &str) -> Result<Vec<Value>, LiteralError> {
    let mut p = Parser { chars: src.chars().collect(), pos: 0 };
    p.skip_ws();
    if p.peek() != Some('[') {
        return p.err("parameter list must start with '['");
    }
    let value = p.value()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return p.err("trailing characters");
    }
    match value {
        Value::Array(items) => Ok(items),
        _ => unreachable!("top level checked to be a list"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn table_style_literals() {
        assert_eq!(parse_param_literal("[3, 10000]").unwrap(), vec![json!(3), json!(10000)]);
        assert_eq!(
            parse_param_literal("[[(3, 3), (1, 2)]]").unwrap(),
            vec![json!([[3, 3], [1, 2]])]
        );
        assert_eq!(
            parse_param_literal("[['apple'], 3, 10000]").unwrap(),
            vec![json!(["apple"]), json!(3), json!(10000)]
        );
        assert_eq!(parse_param_literal(r#"["it's"]"#).unwrap(), vec![json!("it's")]);
        assert_eq!(parse_param_literal("[]").unwrap(), Vec::<Value>::new());
        assert_eq!(parse_param_literal("[1, 2,]").unwrap(), vec![json!(1), json!(2)]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_param_literal("3, 4").is_err());
        assert!(parse_param_literal("[3, 4").is_err());
        assert!(parse_param_literal("[3] x").is_err());
        assert!(parse_param_literal("['open]").is_err());
        assert!(parse_param_literal("[1.5]").is_err());
    }
}
