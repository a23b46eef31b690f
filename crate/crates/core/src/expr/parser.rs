//! Recursive-descent parser for the expression grammar.

use super::{BinOp, Constants, ExprError, Func, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| syntax(start, format!("malformed number `{lit}`")))?;
            if !v.is_finite() {
                return Err(syntax(start, format!("number `{lit}` out of range")));
            }
            out.push(Token {
                tok: Tok::Num(v),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        };
        out.push(Token { tok, offset: i });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    vars: &'a [String],
    consts: &'a Constants,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Tok::Op(c)) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            let rhs = self.unary()?;
            lhs = Node::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(syntax(self.offset(), "expected `)`")),
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let offset = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(syntax(offset, "unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ExprError::UnknownIdentifier { name, offset });
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call {
                        func,
                        arg: Box::new(arg),
                    });
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else if let Some(&value) = self.consts.get(&name) {
                    Ok(Node::Const { name, value })
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset })
                }
            }
            Tok::Op(c) => Err(syntax(offset, format!("unexpected operator `{c}`"))),
            Tok::RParen => Err(syntax(offset, "unexpected `)`")),
        }
    }
}

pub(super) fn parse(text: &str, vars: &[String], consts: &Constants) -> Result<Node, ExprError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        vars,
        consts,
    };
    let root = p.expr()?;
    if p.pos < p.tokens.len() {
        return Err(syntax(p.offset(), "expected an operator or end of input"));
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<Node, ExprError> {
        parse(text, &["x".into(), "y".into()], &Constants::new())
    }

    #[test]
    fn precedence_and_associativity() {
        // -x^2 is -(x^2)
        assert_eq!(
            p("-x^2").unwrap(),
            Node::Neg(Box::new(Node::binary(BinOp::Pow, Node::Var(0), Node::Num(2.0))))
        );
        // ^ is right-associative
        assert_eq!(
            p("x^y^2").unwrap(),
            Node::binary(
                BinOp::Pow,
                Node::Var(0),
                Node::binary(BinOp::Pow, Node::Var(1), Node::Num(2.0))
            )
        );
        // - is left-associative
        assert_eq!(
            p("x-y-1").unwrap(),
            Node::binary(
                BinOp::Sub,
                Node::binary(BinOp::Sub, Node::Var(0), Node::Var(1)),
                Node::Num(1.0)
            )
        );
        // unary minus binds tighter than *
        assert_eq!(
            p("-x*y").unwrap(),
            Node::binary(BinOp::Mul, Node::Neg(Box::new(Node::Var(0))), Node::Var(1))
        );
        assert_eq!(
            p("x^-2").unwrap(),
            Node::binary(BinOp::Pow, Node::Var(0), Node::Neg(Box::new(Node::Num(2.0))))
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(p("1.5e-3").unwrap(), Node::Num(1.5e-3));
        assert_eq!(p(".25").unwrap(), Node::Num(0.25));
        assert!(p("1e").is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(p(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(p("(x"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(p("x)"), Err(ExprError::Syntax { offset: 1, .. })));
        assert!(matches!(p("x # y"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(p("*x"), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(
            p("foo(x)"),
            Err(ExprError::UnknownIdentifier { offset: 0, .. })
        ));
    }
}
