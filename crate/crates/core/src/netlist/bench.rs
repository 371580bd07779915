// SPDX-License-Identifier: Apache-2.0

//! ISCAS89 `.bench` reader and canonical writer.

use std::fmt::Write as _;

use super::{Circuit, CircuitBuilder, Driver, GateKind, NetlistError};

#[derive(Copy, Clone, Debug, Default)]
pub struct ParseOptions {
    /// Accept combinational loops (latch models), breaking them at cut nets.
    pub allow_latch_loops: bool,
}

pub fn parse_bench(name: &str, text: &str) -> Result<Circuit, NetlistError> {
    parse_bench_with(name, text, ParseOptions::default())
}

pub fn parse_bench_with(
    name: &str,
    text: &str,
    opts: ParseOptions,
) -> Result<Circuit, NetlistError> {
    let mut b = CircuitBuilder::new(name);
    b.allow_latch_loops = opts.allow_latch_loops;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let mut lx = Lexer::new(body, line);
        let first = lx.ident()?;
        if lx.peek() == Some('=') {
            lx.bump();
            lx.peek();
            let kind_col = lx.column();
            let kind_name = lx.ident()?;
            let kind = GateKind::from_name(&kind_name.text).ok_or_else(|| NetlistError::Syntax {
                line,
                column: kind_col,
                message: format!("unknown gate type `{}`", kind_name.text),
            })?;
            let args = lx.arg_list()?;
            lx.end()?;
            let inputs: Vec<_> = args.iter().map(|a| b.net(&a.text)).collect();
            let out = b.net(&first.text);
            b.gate(kind, &inputs, out).map_err(|e| match e {
                NetlistError::Arity { .. } => NetlistError::Syntax {
                    line,
                    column: kind_col,
                    message: e.to_string(),
                },
                other => other,
            })?;
        } else {
            let args = lx.arg_list()?;
            lx.end()?;
            if args.len() != 1 {
                return Err(NetlistError::Syntax {
                    line,
                    column: first.column,
                    message: format!("{} takes exactly one name", first.text),
                });
            }
            match first.text.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    b.input(&args[0].text)?;
                }
                "OUTPUT" => {
                    b.output(&args[0].text);
                }
                _ => {
                    return Err(NetlistError::Syntax {
                        line,
                        column: first.column,
                        message: format!("expected INPUT, OUTPUT or assignment, found `{}`", first.text),
                    })
                }
            }
        }
    }
    b.build()
}

struct Token {
    text: String,
    column: usize,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn error(&self, message: String) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.column(),
            message,
        }
    }

    fn ident(&mut self) -> Result<Token, NetlistError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '$' | '\\' | '/' | '-') {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            let found = self
                .chars
                .get(self.pos)
                .map_or("end of line".to_string(), |c| format!("`{c}`"));
            return Err(self.error(format!("expected a name, found {found}")));
        }
        Ok(Token {
            text: self.chars[start..self.pos].iter().collect(),
            column: start + 1,
        })
    }

    fn expect(&mut self, want: char) -> Result<(), NetlistError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.error(format!("expected `{want}`, found end of line"))),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<Token>, NetlistError> {
        self.expect('(')?;
        let mut args = vec![self.ident()?];
        loop {
            match self.peek() {
                Some(',') => {
                    self.bump();
                    args.push(self.ident()?);
                }
                Some(')') => {
                    self.bump();
                    return Ok(args);
                }
                Some(c) => return Err(self.error(format!("expected `,` or `)`, found `{c}`"))),
                None => return Err(self.error("unterminated argument list".into())),
            }
        }
    }

    fn end(&mut self) -> Result<(), NetlistError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.error(format!("unexpected `{c}` after declaration"))),
        }
    }
}

/// Canonical text: inputs, outputs, flip-flops, then combinational gates in
/// evaluation order.
pub fn write_bench(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", c.name());
    for &pi in c.primary_inputs() {
        let _ = writeln!(s, "INPUT({})", c.net(pi).name);
    }
    for &po in c.primary_outputs() {
        let _ = writeln!(s, "OUTPUT({})", c.net(po).name);
    }
    let line = |s: &mut String, g: &super::Gate| {
        let args: Vec<&str> = g.inputs.iter().map(|&n| c.net(n).name.as_str()).collect();
        let _ = writeln!(
            s,
            "{} = {}({})",
            c.net(g.output).name,
            g.kind.name(),
            args.join(", ")
        );
    };
    for &ff in c.flipflops() {
        line(&mut s, c.gate(ff));
    }
    for &g in c.comb_order() {
        line(&mut s, c.gate(g));
    }
    debug_assert!(c
        .nets()
        .iter()
        .all(|n| matches!(n.driver, Driver::Input | Driver::Gate(_))));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_circuit() {
        let c = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n").unwrap();
        assert_eq!(c.gates().len(), 1);
        assert_eq!(c.nets().len(), 2);
        assert!(c.flipflops().is_empty());
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_bench("t", "").unwrap_err().to_string(), "no gates defined");
        assert_eq!(
            parse_bench("t", "# only a comment\n\n").unwrap_err(),
            NetlistError::NoGates
        );
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_bench("t", "INPUT(a)\ny = NOT(a\n").unwrap_err();
        match err {
            NetlistError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 10);
            }
            e => panic!("unexpected {e:?}"),
        }
        let err = parse_bench("t", "INPUT(a)\ny = FOO(a)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 2, column: 5, .. }));
    }

    #[test]
    fn case_insensitive_kinds_and_comments() {
        let text = "input(a) # pad\nINPUT(b)\nOUTPUT(y)\nt = nand(a, b)\ny = buf(t)\n";
        let c = parse_bench("t", text).unwrap();
        let h = c.histogram();
        assert_eq!(h[&GateKind::Nand], 1);
        assert_eq!(h[&GateKind::Buf], 1);
    }

    #[test]
    fn cycle_rejected() {
        let text = "INPUT(a)\nOUTPUT(y)\ny = NAND(a, z)\nz = NOT(y)\n";
        assert!(matches!(
            parse_bench("t", text),
            Err(NetlistError::CombinationalCycle(_))
        ));
    }

    #[test]
    fn dff_breaks_cycle() {
        let text = "OUTPUT(q)\nq = DFF(d)\nd = NOT(q)\n";
        let c = parse_bench("t", text).unwrap();
        assert_eq!(c.flipflops().len(), 1);
    }

    #[test]
    fn arity_checked() {
        let err = parse_bench("t", "INPUT(a)\nINPUT(b)\ny = NOT(a, b)\n").unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 3, .. }));
    }

    #[test]
    fn writer_round_trip_is_stable() {
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ns = DFF(y)\nt = AND(a, s, b)\ny = XOR(t, a)\n";
        let c = parse_bench("t", text).unwrap();
        let once = write_bench(&c);
        let again = write_bench(&parse_bench("t", &once).unwrap());
        assert_eq!(once, again);
    }
}
