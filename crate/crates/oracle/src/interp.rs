//! Concrete evaluation of call-free functions. Memory is a map from
//! `(allocation, offset)` cells to values.

use std::collections::BTreeMap;
use std::fmt;

use dfi_core::ir::{Attr, Function, Opcode, Terminator, Type, ValueId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Val {
    Int(i64),
    Ptr { alloc: usize, offset: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trap {
    Uninitialized(String),
    NotAPointer(String),
    Unsupported(String),
    Arity { expected: usize, found: usize },
    StepLimit,
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trap::Uninitialized(v) => write!(f, "load of uninitialized cell through %{v}"),
            Trap::NotAPointer(v) => write!(f, "%{v} is not a pointer"),
            Trap::Unsupported(op) => write!(f, "cannot interpret {op}"),
            Trap::Arity { expected, found } => write!(f, "expected {expected} arguments, found {found}"),
            Trap::StepLimit => f.write_str("step limit exceeded"),
        }
    }
}

impl std::error::Error for Trap {}

/// Return value and final memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub ret: Option<Val>,
    pub memory: BTreeMap<(usize, i64), Val>,
}

const STEP_LIMIT: usize = 1_000_000;

/// Runs `f` on integer arguments. Pointer parameters and calls are not
/// supported.
pub fn interpret(f: &Function, args: &[i64]) -> Result<Outcome, Trap> {
    if args.len() != f.params.len() {
        return Err(Trap::Arity {
            expected: f.params.len(),
            found: args.len(),
        });
    }
    let mut env: Vec<Option<Val>> = vec![None; f.value_count()];
    for (p, a) in f.params.iter().zip(args) {
        if f.ty(*p) == Type::Ptr {
            return Err(Trap::Unsupported(format!("pointer parameter %{}", f.name_of(*p))));
        }
        env[p.index()] = Some(Val::Int(*a));
    }
    let mut memory = BTreeMap::new();
    let mut allocs = 0usize;
    let mut block = 0usize;
    let mut steps = 0usize;
    let get = |env: &[Option<Val>], v: ValueId| env[v.index()].expect("validated SSA reads defined values");
    let int = |x: Val| match x {
        Val::Int(i) => i,
        Val::Ptr { .. } => 0,
    };
    loop {
        let b = &f.blocks[block];
        for &op in &b.ops {
            steps += 1;
            if steps > STEP_LIMIT {
                return Err(Trap::StepLimit);
            }
            let o = f.op(op);
            let arg = |i: usize| get(&env, o.operands[i]);
            let ptr = |i: usize| match arg(i) {
                Val::Ptr { alloc, offset } => Ok((alloc, offset)),
                Val::Int(_) => Err(Trap::NotAPointer(f.name_of(o.operands[i]).to_string())),
            };
            let result = match o.opcode {
                Opcode::Const => match o.attr {
                    Attr::Const(c) => Some(Val::Int(c)),
                    _ => Some(Val::Int(0)),
                },
                Opcode::Add => Some(Val::Int(int(arg(0)).wrapping_add(int(arg(1))))),
                Opcode::Mul => Some(Val::Int(int(arg(0)).wrapping_mul(int(arg(1))))),
                Opcode::Alloca => {
                    allocs += 1;
                    Some(Val::Ptr {
                        alloc: allocs - 1,
                        offset: 0,
                    })
                }
                Opcode::Gep => {
                    let (alloc, offset) = ptr(0)?;
                    let k = match o.attr {
                        Attr::Offset(k) => k,
                        _ => 0,
                    };
                    Some(Val::Ptr {
                        alloc,
                        offset: offset.wrapping_add(k),
                    })
                }
                Opcode::Load => {
                    let cell = ptr(0)?;
                    match memory.get(&cell) {
                        Some(v) => Some(*v),
                        None => return Err(Trap::Uninitialized(f.name_of(o.operands[0]).to_string())),
                    }
                }
                Opcode::Store | Opcode::DfiStore => {
                    let cell = ptr(1)?;
                    memory.insert(cell, arg(0));
                    (o.opcode == Opcode::DfiStore).then(|| arg(1))
                }
                Opcode::Call | Opcode::DfiCall => {
                    return Err(Trap::Unsupported(format!("call to @{}", o.callee().unwrap_or("?"))))
                }
            };
            if let (Some(v), Some(r)) = (result, o.results.first()) {
                env[r.index()] = Some(v);
            }
        }
        let (target, args) = match &b.term {
            Terminator::Return(v) => {
                return Ok(Outcome {
                    ret: v.map(|v| get(&env, v)),
                    memory,
                })
            }
            Terminator::Br { target, args } => (*target, args),
            Terminator::CondBr {
                cond,
                then_target,
                then_args,
                else_target,
                else_args,
            } => {
                if int(get(&env, *cond)) != 0 {
                    (*then_target, then_args)
                } else {
                    (*else_target, else_args)
                }
            }
        };
        let vals: Vec<Val> = args.iter().map(|a| get(&env, *a)).collect();
        for (p, v) in f.block(target).args.iter().zip(vals) {
            env[p.index()] = Some(v);
        }
        block = target.index();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dfi_core::ir::parse_module;

    fn run(src: &str, args: &[i64]) -> Result<Outcome, Trap> {
        interpret(&parse_module(src).unwrap().functions[0], args)
    }

    #[test]
    fn arithmetic() {
        let src = "func @f(%x: int, %c: int) -> int {\n  %s = add %x, %c\n  %r = mul 3, %s\n  return %r\n}\n";
        assert_eq!(run(src, &[2, 1]).unwrap().ret, Some(Val::Int(9)));
    }

    #[test]
    fn store_then_load() {
        let src = "func @f(%x: int) -> int {\n  %p = alloca\n  store %x, %p\n  %v = load %p : int\n  return %v\n}\n";
        assert_eq!(run(src, &[42]).unwrap().ret, Some(Val::Int(42)));
    }

    #[test]
    fn uninitialized_load_traps() {
        let src = "func @f() -> int {\n  %p = alloca\n  %q = gep %p, 1\n  store 1, %q\n  %v = load %p : int\n  return %v\n}\n";
        assert_eq!(run(src, &[]), Err(Trap::Uninitialized("p".into())));
    }

    #[test]
    fn loops_follow_block_arguments() {
        let src = "func @f(%n: int) -> int {\n  br ^h(%n, 0)\n^h(%i: int, %acc: int):\n  %a = add %acc, 2\n  %j = add %i, -1\n  cond_br %j, ^h(%j, %a), ^x()\n^x:\n  return %a\n}\n";
        assert_eq!(run(src, &[3]).unwrap().ret, Some(Val::Int(6)));
    }
}
