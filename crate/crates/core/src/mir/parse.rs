//! Line-oriented text parser.
//!
//! Grammar (one construct per line, `#` starts a comment):
//!
//! ```text
//! func @NAME [protect] {
//! block %LABEL:
//!     rD = const 12345
//!     rD = add rA, rB            # add sub mul udiv umod and or xor
//!     rD = load [rA]
//!     store [rA], rB
//!     rD = select lt rA, rB, rV1, rV2
//!     cbr lt rA, rB, %T, %F
//!     switch rA, 1:%L1, 2:%L2, default:%D
//!     jmp %L
//!     ret rA
//!     trap 1
//!     cfi_update 0x1234
//!     cfi_merge rC, 0x5678
//!     cfi_check 0x9ABC
//! }
//! ```
//!
//! Integers are decimal or `0x` hex; predicates are `eq ne lt le gt ge`.

use std::fmt;

use crate::enccmp::Predicate;
use crate::mir::{BinOp, Block, Function, Instr, Program, Reg};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

struct Cursor<'a> {
    text: &'a str,
    line: usize,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self { text, line, pos: 0 }
    }

    fn error(&self, message: impl fmt::Display) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest().is_empty()
    }

    fn expect_end(&mut self) -> Result<(), SyntaxError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected trailing input `{}`", self.rest())))
        }
    }

    /// Consumes a literal token if present.
    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), SyntaxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    /// A bare word: letters, digits, `_`, `.`.
    fn word(&mut self) -> Result<&'a str, SyntaxError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '.'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn reg(&mut self) -> Result<Reg, SyntaxError> {
        self.skip_ws();
        let col = self.pos;
        let w = self.word()?;
        let idx = w
            .strip_prefix('r')
            .and_then(|n| n.parse::<u32>().ok())
            .ok_or_else(|| SyntaxError {
                line: self.line,
                col: col + 1,
                message: format!("expected register, found `{w}`"),
            })?;
        Ok(Reg(idx))
    }

    fn label(&mut self) -> Result<String, SyntaxError> {
        self.expect("%")?;
        Ok(self.word()?.to_string())
    }

    fn int(&mut self) -> Result<u32, SyntaxError> {
        self.skip_ws();
        let col = self.pos;
        let w = self.word()?;
        let parsed = if let Some(hex) = w.strip_prefix("0x").or_else(|| w.strip_prefix("0X")) {
            u32::from_str_radix(hex, 16)
        } else {
            w.parse::<u32>()
        };
        parsed.map_err(|_| SyntaxError {
            line: self.line,
            col: col + 1,
            message: format!("expected 32-bit integer, found `{w}`"),
        })
    }

    fn predicate(&mut self) -> Result<Predicate, SyntaxError> {
        self.skip_ws();
        let col = self.pos;
        let w = self.word()?;
        w.parse::<Predicate>().map_err(|e| SyntaxError {
            line: self.line,
            col: col + 1,
            message: e,
        })
    }
}

pub fn parse(text: &str) -> Result<Program, SyntaxError> {
    let mut functions: Vec<Function> = Vec::new();
    let mut current_fn: Option<Function> = None;
    let mut current_block: Option<Block> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut c = Cursor::new(line, line_no);

        if c.eat("func") {
            if current_fn.is_some() {
                return Err(c.error("nested `func` (missing `}`?)"));
            }
            c.expect("@")?;
            let name = c.word()?.to_string();
            let protect = c.eat("protect");
            c.expect("{")?;
            c.expect_end()?;
            current_fn = Some(Function {
                name,
                protect,
                blocks: Vec::new(),
            });
            continue;
        }

        if c.eat("}") {
            c.expect_end()?;
            let mut f = current_fn
                .take()
                .ok_or_else(|| c.error("`}` outside of a function"))?;
            if let Some(b) = current_block.take() {
                f.blocks.push(b);
            }
            functions.push(f);
            continue;
        }

        if c.eat("block") {
            let f = current_fn
                .as_mut()
                .ok_or_else(|| c.error("`block` outside of a function"))?;
            let label = c.label()?;
            c.expect(":")?;
            c.expect_end()?;
            if let Some(b) = current_block.take() {
                f.blocks.push(b);
            }
            current_block = Some(Block {
                label,
                instrs: Vec::new(),
            });
            continue;
        }

        let block = current_block
            .as_mut()
            .ok_or_else(|| c.error("instruction outside of a block"))?;
        block.instrs.push(parse_instr(&mut c)?);
    }

    if current_fn.is_some() {
        return Err(SyntaxError {
            line: text.lines().count(),
            col: 1,
            message: "unterminated function (missing `}`)".into(),
        });
    }
    Ok(Program { functions })
}

fn parse_instr(c: &mut Cursor) -> Result<Instr, SyntaxError> {
    c.skip_ws();

    // Destination form: `rD = ...`
    if c.rest().starts_with('r') && c.rest()[1..].starts_with(|ch: char| ch.is_ascii_digit()) {
        let dst = c.reg()?;
        c.expect("=")?;
        let op = c.word()?.to_string();
        let instr = match op.as_str() {
            "const" => Instr::Const { dst, imm: c.int()? },
            "load" => {
                c.expect("[")?;
                let addr = c.reg()?;
                c.expect("]")?;
                Instr::Load { dst, addr }
            }
            "select" => {
                let pred = c.predicate()?;
                let a = c.reg()?;
                c.expect(",")?;
                let b = c.reg()?;
                c.expect(",")?;
                let if_true = c.reg()?;
                c.expect(",")?;
                let if_false = c.reg()?;
                Instr::Select {
                    dst,
                    pred,
                    a,
                    b,
                    if_true,
                    if_false,
                }
            }
            "add" | "sub" | "mul" | "udiv" | "umod" | "and" | "or" | "xor" => {
                let bin = match op.as_str() {
                    "add" => BinOp::Add,
                    "sub" => BinOp::Sub,
                    "mul" => BinOp::Mul,
                    "udiv" => BinOp::Udiv,
                    "umod" => BinOp::Umod,
                    "and" => BinOp::And,
                    "or" => BinOp::Or,
                    _ => BinOp::Xor,
                };
                let a = c.reg()?;
                c.expect(",")?;
                let b = c.reg()?;
                Instr::Bin { op: bin, dst, a, b }
            }
            other => return Err(c.error(format!("unknown operation `{other}`"))),
        };
        c.expect_end()?;
        return Ok(instr);
    }

    let op = c.word()?.to_string();
    let instr = match op.as_str() {
        "store" => {
            c.expect("[")?;
            let addr = c.reg()?;
            c.expect("]")?;
            c.expect(",")?;
            let src = c.reg()?;
            Instr::Store { addr, src }
        }
        "cbr" => {
            let pred = c.predicate()?;
            let a = c.reg()?;
            c.expect(",")?;
            let b = c.reg()?;
            c.expect(",")?;
            let if_true = c.label()?;
            c.expect(",")?;
            let if_false = c.label()?;
            Instr::Cbr {
                pred,
                a,
                b,
                if_true,
                if_false,
            }
        }
        "switch" => {
            let a = c.reg()?;
            let mut cases = Vec::new();
            let default = loop {
                c.expect(",")?;
                if c.eat("default") {
                    c.expect(":")?;
                    break c.label()?;
                }
                let value = c.int()?;
                c.expect(":")?;
                let target = c.label()?;
                cases.push((value, target));
            };
            Instr::Switch { a, cases, default }
        }
        "jmp" => Instr::Jmp { target: c.label()? },
        "ret" => Instr::Ret { src: c.reg()? },
        "trap" => Instr::Trap { code: c.int()? },
        "cfi_update" => Instr::CfiUpdate { id: c.int()? },
        "cfi_merge" => {
            let cond = c.reg()?;
            c.expect(",")?;
            Instr::CfiMerge {
                cond,
                corr: c.int()?,
            }
        }
        "cfi_check" => Instr::CfiCheck { expected: c.int()? },
        other => return Err(c.error(format!("unknown instruction `{other}`"))),
    };
    c.expect_end()?;
    Ok(instr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_function() {
        let p = parse("func @f {\nblock %e:\nret r0\n}\n").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].name, "f");
        assert!(!p.functions[0].protect);
        assert_eq!(p.functions[0].blocks[0].label, "e");
        assert_eq!(
            p.functions[0].blocks[0].instrs,
            vec![Instr::Ret { src: Reg(0) }]
        );
    }

    #[test]
    fn protect_attribute_and_comments() {
        let src = "\
# demo
func @g protect {   # header
block %entry:
    r1 = const 0x10   # sixteen
    cbr lt r0, r1, %a, %b
block %a:
    ret r0
block %b:
    ret r1
}
";
        let p = parse(src).unwrap();
        assert!(p.functions[0].protect);
        assert_eq!(p.functions[0].blocks.len(), 3);
        assert_eq!(
            p.functions[0].blocks[0].instrs[0],
            Instr::Const {
                dst: Reg(1),
                imm: 16
            }
        );
    }

    #[test]
    fn switch_and_select() {
        let src = "\
func @s {
block %e:
    r2 = select ge r0, r1, r0, r1
    switch r2, 1:%one, 2:%two, default:%d
block %one:
    ret r0
block %two:
    ret r1
block %d:
    ret r2
}
";
        let p = parse(src).unwrap();
        match &p.functions[0].blocks[0].instrs[1] {
            Instr::Switch { cases, default, .. } => {
                assert_eq!(cases.len(), 2);
                assert_eq!(default, "d");
            }
            other => panic!("expected switch, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("func @f {\nblock %e:\n    r0 = bogus r1, r2\n}\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("bogus"));

        let err = parse("func @f {\nblock %e:\n    cbr lt r0, 5, %a, %b\n}\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("register"));

        let err = parse("func @f {\nblock %e:\n    ret r0\n").unwrap_err();
        assert!(err.message.contains("unterminated"));
    }
}
