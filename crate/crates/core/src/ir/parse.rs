//! Line-oriented parser for `.dfir` text.
//!
//! ```text
//! extern @sink(ptr) -> int
//! func @f(%p: ptr, %a: int) -> int {
//! ^entry:
//!   store %a, %p
//!   %v = load %p : int
//!   %r = mul 3, %v          # inline literal, becomes a `const` op
//!   return %r
//! }
//! ```
//!
//! Every statement sits on its own line. Integer literals in operand position
//! are desugared into `const` operations inserted right before their user.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{
    Attr, Block, BlockId, ExternDecl, Function, Module, OpId, Opcode, Operation, Signature,
    Terminator, Type, ValueDef, ValueId,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Value(String),
    Func(String),
    Label(String),
    Int(i64),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Value(v) => format!("`%{v}`"),
            Tok::Func(v) => format!("`@{v}`"),
            Tok::Label(v) => format!("`^{v}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

struct Line {
    no: usize,
    toks: Vec<Token>,
    end_col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn lex_line(no: usize, text: &str) -> Result<Line, ParseError> {
    let text = match text.find('#') {
        Some(i) => &text[..i],
        None => text,
    };
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let col_of = |i: usize| chars[..i].len() + 1;
    while i < chars.len() {
        let (_, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let read_name = |mut j: usize| {
            let begin = j;
            while j < chars.len() && is_name_char(chars[j].1) {
                j += 1;
            }
            (chars[begin..j].iter().map(|(_, c)| *c).collect::<String>(), j)
        };
        let tok = match c {
            '%' | '@' | '^' => {
                let (name, j) = read_name(i + 1);
                if name.is_empty() {
                    return Err(ParseError {
                        line: no,
                        col: col_of(start),
                        message: format!("expected a name after `{c}`"),
                    });
                }
                i = j;
                match c {
                    '%' => Tok::Value(name),
                    '@' => Tok::Func(name),
                    _ => Tok::Label(name),
                }
            }
            '-' if chars.get(i + 1).map(|x| x.1) == Some('>') => {
                i += 2;
                Tok::Punct("->")
            }
            '-' | '0'..='9' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                let s: String = chars[i..j].iter().map(|(_, c)| *c).collect();
                let v = s.parse::<i64>().map_err(|_| ParseError {
                    line: no,
                    col: col_of(start),
                    message: format!("invalid integer literal `{s}`"),
                })?;
                i = j;
                Tok::Int(v)
            }
            '(' | ')' | '{' | '}' | ',' | ':' | '=' => {
                i += 1;
                Tok::Punct(match c {
                    '(' => "(",
                    ')' => ")",
                    '{' => "{",
                    '}' => "}",
                    ',' => ",",
                    ':' => ":",
                    _ => "=",
                })
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let (name, j) = read_name(i);
                i = j;
                Tok::Word(name)
            }
            other => {
                return Err(ParseError {
                    line: no,
                    col: col_of(start),
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        toks.push(Token {
            tok,
            col: col_of(start),
        });
    }
    Ok(Line {
        no,
        toks,
        end_col: chars.len() + 1,
    })
}

struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Cursor { line, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.line.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.line
            .toks
            .get(self.pos)
            .map_or(self.line.end_col, |t| t.col)
    }

    fn err(&self, expected: &str) -> ParseError {
        let found = self
            .peek()
            .map_or_else(|| "end of line".to_string(), Tok::describe);
        ParseError {
            line: self.line.no,
            col: self.col(),
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.line.toks.get(self.pos).map(|t| &t.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(&format!("`{p}`")))
        }
    }

    fn value(&mut self) -> Result<(String, usize), ParseError> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Value(v)) => {
                self.pos += 1;
                Ok((v.clone(), col))
            }
            _ => Err(self.err("a value name (`%name`)")),
        }
    }

    fn func_name(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Func(v)) => {
                self.pos += 1;
                Ok(v.clone())
            }
            _ => Err(self.err("a function name (`@name`)")),
        }
    }

    fn label(&mut self) -> Result<(String, usize), ParseError> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Label(v)) => {
                self.pos += 1;
                Ok((v.clone(), col))
            }
            _ => Err(self.err("a block label (`^name`)")),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == "int" => {
                self.pos += 1;
                Ok(Type::Int)
            }
            Some(Tok::Word(w)) if w == "ptr" => {
                self.pos += 1;
                Ok(Type::Ptr)
            }
            _ => Err(self.err("a type (`int` or `ptr`)")),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Tok::Int(i)) => {
                self.pos += 1;
                Ok(*i)
            }
            _ => Err(self.err("an integer literal")),
        }
    }

    fn operand(&mut self) -> Result<RawOperand, ParseError> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Value(v)) => {
                self.pos += 1;
                Ok(RawOperand::Name(v.clone(), col))
            }
            Some(Tok::Int(i)) => {
                self.pos += 1;
                Ok(RawOperand::Lit(*i))
            }
            _ => Err(self.err("an operand (`%name` or integer)")),
        }
    }

    /// `( operand, ... )`; the parentheses are optional when empty.
    fn paren_operands(&mut self, optional: bool) -> Result<Vec<RawOperand>, ParseError> {
        if !self.eat("(") {
            if optional {
                return Ok(Vec::new());
            }
            return Err(self.err("`(`"));
        }
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(self.operand()?);
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn typed_params(&mut self) -> Result<Vec<(String, Type, usize)>, ParseError> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            let (name, col) = self.value()?;
            self.expect(":")?;
            let ty = self.ty()?;
            out.push((name, ty, col));
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.pos == self.line.toks.len() {
            Ok(())
        } else {
            Err(self.err("end of line"))
        }
    }
}

#[derive(Clone, Debug)]
enum RawOperand {
    Name(String, usize),
    Lit(i64),
}

#[derive(Debug)]
enum RawStmt {
    Op {
        line: usize,
        results: Vec<(String, usize)>,
        opcode: Opcode,
        operands: Vec<RawOperand>,
        attr: Attr,
        ty: Option<Type>,
    },
    Return {
        line: usize,
        value: Option<RawOperand>,
    },
    Br {
        line: usize,
        target: (String, usize),
        args: Vec<RawOperand>,
    },
    CondBr {
        line: usize,
        cond: RawOperand,
        then_target: (String, usize),
        then_args: Vec<RawOperand>,
        else_target: (String, usize),
        else_args: Vec<RawOperand>,
    },
}

struct RawBlock {
    label: String,
    line: usize,
    args: Vec<(String, Type, usize)>,
    stmts: Vec<RawStmt>,
}

struct RawFunction {
    name: String,
    line: usize,
    params: Vec<(String, Type, usize)>,
    ret: Option<Type>,
    blocks: Vec<RawBlock>,
}

/// Parses `.dfir` text into a [`Module`].
pub fn parse_module(text: &str) -> Result<Module, ParseError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = lex_line(i + 1, raw)?;
        if !line.toks.is_empty() {
            lines.push(line);
        }
    }

    let mut funcs: Vec<RawFunction> = Vec::new();
    let mut externs: Vec<ExternDecl> = Vec::new();
    let mut sigs: HashMap<String, Signature> = HashMap::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        let mut c = Cursor::new(line);
        match c.next() {
            Some(Tok::Word(w)) if w == "extern" => {
                let name = c.func_name()?;
                c.expect("(")?;
                let mut params = Vec::new();
                if !c.eat(")") {
                    loop {
                        // Parameter names are optional in declarations.
                        if matches!(c.peek(), Some(Tok::Value(_))) {
                            c.value()?;
                            c.expect(":")?;
                        }
                        params.push(c.ty()?);
                        if c.eat(")") {
                            break;
                        }
                        c.expect(",")?;
                    }
                }
                let ret = if c.eat("->") { Some(c.ty()?) } else { None };
                c.end()?;
                let sig = Signature { params, ret };
                if sigs.insert(name.clone(), sig.clone()).is_some() {
                    return Err(ParseError {
                        line: line.no,
                        col: 1,
                        message: format!("duplicate function `@{name}`"),
                    });
                }
                externs.push(ExternDecl { name, sig });
                i += 1;
            }
            Some(Tok::Word(w)) if w == "func" => {
                let name = c.func_name()?;
                let params = c.typed_params()?;
                let ret = if c.eat("->") { Some(c.ty()?) } else { None };
                c.expect("{")?;
                c.end()?;
                let sig = Signature {
                    params: params.iter().map(|p| p.1).collect(),
                    ret,
                };
                if sigs.insert(name.clone(), sig).is_some() {
                    return Err(ParseError {
                        line: line.no,
                        col: 1,
                        message: format!("duplicate function `@{name}`"),
                    });
                }
                let header_line = line.no;
                i += 1;
                let mut blocks: Vec<RawBlock> = Vec::new();
                loop {
                    let Some(line) = lines.get(i) else {
                        return Err(ParseError {
                            line: header_line,
                            col: 1,
                            message: format!("function `@{name}` is missing its closing `}}`"),
                        });
                    };
                    i += 1;
                    let mut c = Cursor::new(line);
                    if c.eat("}") {
                        c.end()?;
                        break;
                    }
                    if let Some(Tok::Label(_)) = c.peek() {
                        let (label, _) = c.label()?;
                        let args = if matches!(c.peek(), Some(Tok::Punct("("))) {
                            c.typed_params()?
                        } else {
                            Vec::new()
                        };
                        c.expect(":")?;
                        c.end()?;
                        blocks.push(RawBlock {
                            label,
                            line: line.no,
                            args,
                            stmts: Vec::new(),
                        });
                        continue;
                    }
                    let stmt = parse_stmt(&mut c)?;
                    if blocks.is_empty() {
                        blocks.push(RawBlock {
                            label: "entry".into(),
                            line: line.no,
                            args: Vec::new(),
                            stmts: Vec::new(),
                        });
                    }
                    blocks.last_mut().unwrap().stmts.push(stmt);
                }
                funcs.push(RawFunction {
                    name,
                    line: header_line,
                    params,
                    ret,
                    blocks,
                });
            }
            _ => {
                let c = Cursor::new(line);
                return Err(c.err("`func` or `extern`"));
            }
        }
    }

    let mut module = Module::new();
    for e in externs {
        module.add_extern(e);
    }
    for raw in funcs {
        let f = lower_function(raw, &sigs)?;
        module.add_function(f);
    }
    module.reindex();
    Ok(module)
}

fn parse_stmt(c: &mut Cursor<'_>) -> Result<RawStmt, ParseError> {
    let line = c.line.no;
    let mut results = Vec::new();
    if matches!(c.peek(), Some(Tok::Value(_))) {
        loop {
            results.push(c.value()?);
            if c.eat("=") {
                break;
            }
            c.expect(",")?;
        }
    }
    let word_col = c.col();
    let word = match c.next() {
        Some(Tok::Word(w)) => w.clone(),
        _ => {
            c.pos = c.pos.saturating_sub(1);
            return Err(c.err("an opcode"));
        }
    };
    let no_results = |what: &str| -> Result<(), ParseError> {
        if results.is_empty() {
            Ok(())
        } else {
            Err(ParseError {
                line,
                col: word_col,
                message: format!("`{what}` produces no results"),
            })
        }
    };
    let stmt = match word.as_str() {
        "return" => {
            no_results("return")?;
            let value = if c.peek().is_some() {
                Some(c.operand()?)
            } else {
                None
            };
            RawStmt::Return { line, value }
        }
        "br" => {
            no_results("br")?;
            let target = c.label()?;
            let args = c.paren_operands(true)?;
            RawStmt::Br { line, target, args }
        }
        "cond_br" => {
            no_results("cond_br")?;
            let cond = c.operand()?;
            c.expect(",")?;
            let then_target = c.label()?;
            let then_args = c.paren_operands(true)?;
            c.expect(",")?;
            let else_target = c.label()?;
            let else_args = c.paren_operands(true)?;
            RawStmt::CondBr {
                line,
                cond,
                then_target,
                then_args,
                else_target,
                else_args,
            }
        }
        other => {
            let opcode = Opcode::from_mnemonic(other).ok_or_else(|| ParseError {
                line,
                col: word_col,
                message: format!("unknown opcode `{other}`"),
            })?;
            let mut operands = Vec::new();
            let mut attr = Attr::None;
            match opcode {
                Opcode::Const => attr = Attr::Const(c.int()?),
                Opcode::Alloca => {}
                Opcode::Load => operands.push(c.operand()?),
                Opcode::Add | Opcode::Mul | Opcode::Store | Opcode::DfiStore => {
                    operands.push(c.operand()?);
                    c.expect(",")?;
                    operands.push(c.operand()?);
                }
                Opcode::Gep => {
                    operands.push(c.operand()?);
                    c.expect(",")?;
                    attr = Attr::Offset(c.int()?);
                }
                Opcode::Call | Opcode::DfiCall => {
                    attr = Attr::Callee(c.func_name()?);
                    operands = c.paren_operands(false)?;
                }
            }
            let ty = if c.eat(":") { Some(c.ty()?) } else { None };
            RawStmt::Op {
                line,
                results,
                opcode,
                operands,
                attr,
                ty,
            }
        }
    };
    c.end()?;
    Ok(stmt)
}

/// Position of a definition: block index and statement index, with
/// parameters and block arguments at position -1 of their block.
#[derive(Clone, Copy)]
struct DefPos {
    block: usize,
    stmt: isize,
    id: ValueId,
}

fn lower_function(
    raw: RawFunction,
    sigs: &HashMap<String, Signature>,
) -> Result<Function, ParseError> {
    let mut f = Function::new(raw.name.clone(), raw.ret);
    let mut defs: HashMap<String, DefPos> = HashMap::new();
    let mut all_names: HashSet<String> = HashSet::new();

    let define = |f: &mut Function,
                      defs: &mut HashMap<String, DefPos>,
                      name: &str,
                      ty: Type,
                      def: ValueDef,
                      pos: (usize, isize),
                      line: usize,
                      col: usize|
     -> Result<ValueId, ParseError> {
        if defs.contains_key(name) {
            return Err(ParseError {
                line,
                col,
                message: format!("duplicate value id `%{name}`"),
            });
        }
        let id = f.add_value(name, ty, def);
        defs.insert(
            name.to_string(),
            DefPos {
                block: pos.0,
                stmt: pos.1,
                id,
            },
        );
        Ok(id)
    };

    if raw.blocks.is_empty() {
        return Err(ParseError {
            line: raw.line,
            col: 1,
            message: format!("function `@{}` has no body", raw.name),
        });
    }

    for (i, (name, ty, col)) in raw.params.iter().enumerate() {
        let id = define(
            &mut f,
            &mut defs,
            name,
            *ty,
            ValueDef::Param(i as u32),
            (0, -1),
            raw.line,
            *col,
        )?;
        f.params.push(id);
        all_names.insert(name.clone());
    }

    let mut labels: HashMap<String, BlockId> = HashMap::new();
    for (bi, b) in raw.blocks.iter().enumerate() {
        if labels.insert(b.label.clone(), BlockId(bi as u32)).is_some() {
            return Err(ParseError {
                line: b.line,
                col: 1,
                message: format!("duplicate block label `^{}`", b.label),
            });
        }
    }

    // Pass 1: define every block argument and op result.
    let mut op_result_ids: Vec<Vec<Vec<ValueId>>> = Vec::new();
    for (bi, b) in raw.blocks.iter().enumerate() {
        let mut args = Vec::new();
        for (ai, (name, ty, col)) in b.args.iter().enumerate() {
            args.push(define(
                &mut f,
                &mut defs,
                name,
                *ty,
                ValueDef::BlockArg(BlockId(bi as u32), ai as u32),
                (bi, -1),
                b.line,
                *col,
            )?);
            all_names.insert(name.clone());
        }
        f.blocks.push(Block {
            label: b.label.clone(),
            args,
            ops: Vec::new(),
            term: Terminator::Return(None),
        });
        let mut per_stmt = Vec::new();
        for (si, s) in b.stmts.iter().enumerate() {
            let mut ids = Vec::new();
            if let RawStmt::Op {
                line,
                results,
                opcode,
                operands,
                attr,
                ty,
            } = s
            {
                let types = result_types(*line, *opcode, operands, attr, *ty, results.len(), sigs, &defs, &f)?;
                for (ri, ((name, col), t)) in results.iter().zip(types).enumerate() {
                    // Result ops are created in pass 2; the def is patched then.
                    let id = define(
                        &mut f,
                        &mut defs,
                        name,
                        t,
                        ValueDef::Result(OpId(u32::MAX), ri as u32),
                        (bi, si as isize),
                        *line,
                        *col,
                    )?;
                    all_names.insert(name.clone());
                    ids.push(id);
                }
            }
            per_stmt.push(ids);
        }
        op_result_ids.push(per_stmt);
    }

    // Pass 2: resolve operands, desugar literals, build ops and terminators.
    let mut const_counter = 0usize;
    let mut fresh_const = |all_names: &mut HashSet<String>| loop {
        let name = format!("cst{const_counter}");
        const_counter += 1;
        if all_names.insert(name.clone()) {
            return name;
        }
    };

    let mut has_term = vec![false; raw.blocks.len()];
    for (bi, b) in raw.blocks.into_iter().enumerate() {
        let stmt_count = b.stmts.len();
        for (si, s) in b.stmts.into_iter().enumerate() {
            let line = match &s {
                RawStmt::Op { line, .. }
                | RawStmt::Return { line, .. }
                | RawStmt::Br { line, .. }
                | RawStmt::CondBr { line, .. } => *line,
            };
            if has_term[bi] {
                return Err(ParseError {
                    line,
                    col: 1,
                    message: format!("statement after the terminator of block `^{}`", b.label),
                });
            }
            let mut resolve = |f: &mut Function, op: &RawOperand| -> Result<ValueId, ParseError> {
                match op {
                    RawOperand::Name(name, col) => match defs.get(name) {
                        Some(d) if d.block == bi && d.stmt >= si as isize => Err(ParseError {
                            line,
                            col: *col,
                            message: format!("use of `%{name}` before its definition"),
                        }),
                        Some(d) => Ok(d.id),
                        None => Err(ParseError {
                            line,
                            col: *col,
                            message: format!("use of undefined value `%{name}`"),
                        }),
                    },
                    RawOperand::Lit(v) => {
                        let name = fresh_const(&mut all_names);
                        let op_id = OpId(f.ops.len() as u32);
                        let id = f.add_value(name, Type::Int, ValueDef::Result(op_id, 0));
                        f.ops.push(Operation {
                            opcode: Opcode::Const,
                            operands: Vec::new(),
                            results: vec![id],
                            attr: Attr::Const(*v),
                        });
                        f.blocks[bi].ops.push(op_id);
                        Ok(id)
                    }
                }
            };
            let resolve_label = |(name, col): &(String, usize)| {
                labels.get(name).copied().ok_or_else(|| ParseError {
                    line,
                    col: *col,
                    message: format!("unknown block label `^{name}`"),
                })
            };
            match s {
                RawStmt::Op {
                    opcode,
                    operands,
                    attr,
                    ..
                } => {
                    let mut ids = Vec::with_capacity(operands.len());
                    for o in &operands {
                        ids.push(resolve(&mut f, o)?);
                    }
                    let op_id = OpId(f.ops.len() as u32);
                    let results = std::mem::take(&mut op_result_ids[bi][si]);
                    for (ri, r) in results.iter().enumerate() {
                        f.values[r.index()].def = ValueDef::Result(op_id, ri as u32);
                    }
                    f.ops.push(Operation {
                        opcode,
                        operands: ids,
                        results,
                        attr,
                    });
                    f.blocks[bi].ops.push(op_id);
                }
                RawStmt::Return { value, .. } => {
                    let v = value.as_ref().map(|v| resolve(&mut f, v)).transpose()?;
                    f.blocks[bi].term = Terminator::Return(v);
                    has_term[bi] = true;
                }
                RawStmt::Br { target, args, .. } => {
                    let target = resolve_label(&target)?;
                    let mut ids = Vec::new();
                    for a in &args {
                        ids.push(resolve(&mut f, a)?);
                    }
                    f.blocks[bi].term = Terminator::Br { target, args: ids };
                    has_term[bi] = true;
                }
                RawStmt::CondBr {
                    cond,
                    then_target,
                    then_args,
                    else_target,
                    else_args,
                    ..
                } => {
                    let cond = resolve(&mut f, &cond)?;
                    let then_target = resolve_label(&then_target)?;
                    let else_target = resolve_label(&else_target)?;
                    let mut ta = Vec::new();
                    for a in &then_args {
                        ta.push(resolve(&mut f, a)?);
                    }
                    let mut ea = Vec::new();
                    for a in &else_args {
                        ea.push(resolve(&mut f, a)?);
                    }
                    f.blocks[bi].term = Terminator::CondBr {
                        cond,
                        then_target,
                        then_args: ta,
                        else_target,
                        else_args: ea,
                    };
                    has_term[bi] = true;
                }
            }
        }
        if !has_term[bi] {
            return Err(ParseError {
                line: b.line,
                col: 1,
                message: format!(
                    "block `^{}` has no terminator ({} statements)",
                    b.label, stmt_count
                ),
            });
        }
    }
    f.rebuild_uses();
    Ok(f)
}

#[allow(clippy::too_many_arguments)]
fn result_types(
    line: usize,
    opcode: Opcode,
    operands: &[RawOperand],
    attr: &Attr,
    annotated: Option<Type>,
    given: usize,
    sigs: &HashMap<String, Signature>,
    defs: &HashMap<String, DefPos>,
    f: &Function,
) -> Result<Vec<Type>, ParseError> {
    let err = |message: String| ParseError {
        line,
        col: 1,
        message,
    };
    let expected: Vec<Type> = match opcode {
        Opcode::Const | Opcode::Add | Opcode::Mul => vec![Type::Int],
        Opcode::Alloca | Opcode::Gep | Opcode::DfiStore => vec![Type::Ptr],
        Opcode::Load => vec![annotated.unwrap_or(Type::Int)],
        Opcode::Store => Vec::new(),
        Opcode::Call | Opcode::DfiCall => {
            let Attr::Callee(name) = attr else {
                unreachable!("call without callee")
            };
            let sig = sigs
                .get(name)
                .ok_or_else(|| err(format!("call to unknown function `@{name}`")))?;
            let mut tys: Vec<Type> = sig.ret.into_iter().collect();
            if opcode == Opcode::DfiCall {
                // One pointer result per pointer argument, in argument order.
                for (i, p) in sig.params.iter().enumerate() {
                    let actual_ptr = match operands.get(i) {
                        Some(RawOperand::Name(n, _)) => defs
                            .get(n)
                            .map(|d| f.ty(d.id) == Type::Ptr)
                            .unwrap_or(*p == Type::Ptr),
                        _ => *p == Type::Ptr,
                    };
                    if actual_ptr {
                        tys.push(Type::Ptr);
                    }
                }
            }
            tys
        }
    };
    if given != expected.len() {
        return Err(err(format!(
            "`{}` produces {} result(s), found {}",
            opcode.mnemonic(),
            expected.len(),
            given
        )));
    }
    if let (Some(t), [single]) = (annotated, expected.as_slice()) {
        if t != *single {
            return Err(err(format!(
                "`{}` result annotated `{t}` but has type `{single}`",
                opcode.mnemonic()
            )));
        }
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_empty_module() {
        let m = parse_module("").unwrap();
        assert!(m.functions.is_empty());
        let m = parse_module("# just a comment\n\n").unwrap();
        assert!(m.functions.is_empty());
    }

    #[test]
    fn self_use_is_use_before_def() {
        let e = parse_module("func @f() {\n  %a = add %a, %a\n  return\n}\n").unwrap_err();
        assert!(e.message.contains("before its definition"), "{e}");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn duplicate_value() {
        let e = parse_module("func @f(%a: int) {\n  %a = const 1\n  return\n}\n").unwrap_err();
        assert!(e.message.contains("duplicate value id"), "{e}");
    }

    #[test]
    fn syntax_error_reports_position_and_expectation() {
        let e = parse_module("func @f(%a: int) {\n  %b = add %a %a\n  return\n}\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 15));
        assert!(e.message.contains("expected `,`"), "{e}");
    }

    #[test]
    fn literals_become_const_ops() {
        let m = parse_module("func @f(%t: int) -> int {\n  %r = mul 3, %t\n  return %r\n}\n").unwrap();
        let f = &m.functions[0];
        let ops: Vec<_> = f.ops_in_order().map(|(_, o)| f.op(o).opcode).collect();
        assert_eq!(ops, vec![Opcode::Const, Opcode::Mul]);
        let first = f.op(f.blocks[0].ops[0]);
        assert_eq!(first.attr, Attr::Const(3));
    }

    #[test]
    fn forward_reference_across_blocks() {
        let src = "func @f() -> int {\n^entry:\n  br ^b2()\n^b1:\n  return %x\n^b2:\n  %x = const 1\n  br ^b1()\n}\n";
        let m = parse_module(src).unwrap();
        assert_eq!(m.functions[0].blocks.len(), 3);
    }

    #[test]
    fn dfi_call_result_types() {
        let src = "extern @g(int, ptr, ptr) -> int\nfunc @f(%a: int, %p: ptr) {\n  %r, %p0, %p1 = dfi_call @g(%a, %p, %p)\n  return\n}\n";
        let m = parse_module(src).unwrap();
        let f = &m.functions[0];
        let tys: Vec<Type> = f.op(OpId(0)).results.iter().map(|r| f.ty(*r)).collect();
        assert_eq!(tys, vec![Type::Int, Type::Ptr, Type::Ptr]);
    }

    #[test]
    fn unknown_callee() {
        let e = parse_module("func @f() {\n  call @nope()\n  return\n}\n").unwrap_err();
        assert!(e.message.contains("unknown function"), "{e}");
    }
}
