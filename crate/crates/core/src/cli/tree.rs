use thiserror::Error;

use crate::abe::{AccessTree, Node};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("policy syntax error at position {pos}: {msg}")]
pub struct TreeParseError {
    /// Byte offset into the input.
    pub pos: usize,
    pub msg: String,
}

/// Parses an access policy:
///
/// ```text
/// expr := attribute | and(expr, ...) | or(expr, ...) | atleast(k, expr, ...)
/// ```
///
/// Attributes are runs of letters, digits and `_ - . : @`.
pub fn parse_tree(input: &str) -> Result<AccessTree, TreeParseError> {
    let mut p = Parser { s: input, pos: 0 };
    let node = p.expr(0)?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.err("unexpected trailing input"));
    }
    AccessTree::new(node).map_err(|e| TreeParseError {
        pos: 0,
        msg: e.to_string(),
    })
}

const MAX_NESTING: usize = 32;

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_-.:@".contains(c)
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> TreeParseError {
        TreeParseError {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.s[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> Result<(), TreeParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> Result<&str, TreeParseError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.s[start..].find(|c| !is_ident(c)).unwrap_or(self.s.len() - start);
        if len == 0 {
            return Err(self.err(match self.peek() {
                Some(c) => format!("unexpected '{c}'"),
                None => "unexpected end of input".into(),
            }));
        }
        self.pos += len;
        Ok(&self.s[start..start + len])
    }

    fn expr(&mut self, depth: usize) -> Result<Node, TreeParseError> {
        if depth > MAX_NESTING {
            return Err(self.err("policy nested too deeply"));
        }
        let start = self.pos;
        let word = self.ident()?.to_string();
        self.skip_ws();
        if self.peek() != Some('(') {
            return Ok(Node::leaf(word));
        }
        let threshold = match word.as_str() {
            "and" | "or" => None,
            "atleast" => {
                self.eat('(')?;
                self.skip_ws();
                let at = self.pos;
                let k: usize = self
                    .ident()?
                    .parse()
                    .map_err(|_| TreeParseError {
                        pos: at,
                        msg: "threshold must be a positive integer".into(),
                    })?;
                self.eat(',')?;
                Some((k, at))
            }
            other => {
                return Err(TreeParseError {
                    pos: start,
                    msg: format!("unknown gate {other:?} (use and, or, atleast)"),
                })
            }
        };
        if threshold.is_none() {
            self.eat('(')?;
        }
        let mut children = vec![self.expr(depth + 1)?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    children.push(self.expr(depth + 1)?);
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
        Ok(match (word.as_str(), threshold) {
            ("and", _) => Node::and(children),
            ("or", _) => Node::or(children),
            (_, Some((k, at))) => {
                if k == 0 || k > children.len() {
                    return Err(TreeParseError {
                        pos: at,
                        msg: format!("threshold {k} is not in 1..={}", children.len()),
                    });
                }
                Node::gate(k, children)
            }
            _ => unreachable!(),
        })
    }
}
