use super::{Expression, Func};
use crate::{Error, Result};

/// Parses `source` as an expression in the coordinates `x1 … x{dim}`.
pub fn parse(source: &str, dim: usize) -> Result<Expression> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let mut p = Parser {
        src: source.as_bytes(),
        text: source,
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.syntax("expression", "end of input"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        let found = p.describe_here();
        return Err(p.syntax("operator or end of input", &found));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, expected: &str, found: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn describe_here(&self) -> String {
        match self.text[self.pos..].chars().next() {
            Some(c) => format!("'{c}'"),
            None => "end of input".to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self.describe_here();
            Err(self.syntax(&format!("'{}'", c as char), &found))
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expression::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expression::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expression> {
        if self.eat(b'-') {
            // Unary minus binds looser than '^': -x1^2 is -(x1^2).
            return Ok(match self.factor()? {
                Expression::Const(c) => Expression::Const(-c),
                e => Expression::Neg(Box::new(e)),
            });
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let p = self.exponent()?;
            return Ok(Expression::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<f64> {
        let start = self.pos;
        let negative = self.eat(b'-');
        let value = match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number()?,
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                if e.arity() > 0 {
                    self.pos = start;
                    return Err(self.syntax("constant exponent", "expression with variables"));
                }
                e.eval::<f64>(&[]).map_err(|_| Error::Syntax {
                    pos: start,
                    expected: "finite constant exponent".into(),
                    found: "undefined constant".into(),
                })?
            }
            _ => {
                let found = self.describe_here();
                return Err(self.syntax("number after '^'", &found));
            }
        };
        Ok(if negative { -value } else { value })
    }

    fn base(&mut self) -> Result<Expression> {
        let Some(c) = self.peek() else {
            return Err(self.syntax("number, variable, function or '('", "end of input"));
        };
        if c.is_ascii_digit() || c == b'.' {
            return Ok(Expression::Const(self.number()?));
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_alphabetic() {
            return self.identifier();
        }
        let found = self.describe_here();
        Err(self.syntax("number, variable, function or '('", &found))
    }

    fn identifier(&mut self) -> Result<Expression> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(Error::UnknownVariable {
                        pos: start,
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Expression::Var(index - 1));
            }
        }
        let Some(func) = Func::from_name(name) else {
            return Err(Error::UnknownFunction {
                pos: start,
                name: name.to_string(),
            });
        };
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(Expression::Func(func, Box::new(arg)))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.syntax("digit", "'.'"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save + 1;
                let found = self.describe_here();
                return Err(self.syntax("exponent digits", &found));
            }
        }
        let text = &self.text[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                Err(self.syntax("finite number", text))
            }
        }
    }
}
