// SPDX-License-Identifier: Apache-2.0

//! Lowering of AST expressions to arena nodes with Verilog sizing rules.
//!
//! Operands of context-determined operators are widened to the width of the
//! enclosing context before the operation is performed; self-determined
//! operands (shift amounts, reduction and logical operands, concatenation
//! parts, select indices) keep their own width.

use crate::diag::{Diagnostic, Loc};
use crate::sv::ast::{BinaryOp, Expr, Literal, UnaryOp};
use crate::ts::{mask, ExprArena, ExprRef, MAX_WIDTH};

type LResult<T> = Result<T, Diagnostic>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    /// Parameter or loop variable.
    Const { value: u64, width: u32 },
    Vector { width: u32, msb: i64, lsb: i64 },
    Array { elem_width: u32, msb: i64, lsb: i64, lo: i64, hi: i64 },
}

pub(crate) fn element_key(name: &str, index: i64) -> String {
    format!("{name}[{index}]")
}

pub(crate) trait LowerCtx {
    fn arena(&mut self) -> &mut ExprArena;
    fn shape(&mut self, name: &str, loc: Loc) -> LResult<Shape>;
    /// Reads a scalar signal or an array element keyed by [`element_key`].
    fn read(&mut self, key: &str, loc: Loc) -> LResult<ExprRef>;
    fn hier(&mut self, path: &[String], loc: Loc) -> LResult<(ExprRef, u32)> {
        let _ = path;
        Err(Diagnostic::unsupported(loc, "hierarchical references are not supported in designs"))
    }
    /// Self width of a context-specific system function, if known.
    fn syscall_width(&mut self, name: &str, args: &[Expr], loc: Loc) -> LResult<Option<u32>> {
        let _ = (name, args, loc);
        Ok(None)
    }
    /// Lowers a context-specific system function at its self width.
    fn syscall(&mut self, name: &str, args: &[Expr], loc: Loc) -> LResult<Option<ExprRef>> {
        let _ = (name, args, loc);
        Ok(None)
    }
}

fn too_wide(loc: Loc, w: u64) -> Diagnostic {
    Diagnostic::unsupported(loc, format!("{w}-bit value exceeds the {MAX_WIDTH}-bit limit"))
}

fn check_width(loc: Loc, w: u64) -> LResult<u32> {
    if w > MAX_WIDTH as u64 {
        Err(too_wide(loc, w))
    } else {
        Ok(w as u32)
    }
}

fn literal_width(lit: &Literal) -> u32 {
    match lit {
        Literal::Number { size: Some(n), .. } => *n,
        Literal::Number { value, .. } => (64 - value.leading_zeros()).max(32),
        Literal::Fill(_) => 1,
        Literal::Str(s) => (s.len() as u32 * 8).max(8),
    }
}

pub(crate) fn self_width<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr) -> LResult<u32> {
    let loc = e.loc();
    Ok(match e {
        Expr::Ident { name, loc } => match c.shape(name, *loc)? {
            Shape::Const { width, .. } => width,
            Shape::Vector { width, .. } => width,
            Shape::Array { .. } => {
                return Err(Diagnostic::unsupported(*loc, format!("whole-array reference to `{name}`")))
            }
        },
        Expr::Hier { path, loc } => c.hier(path, *loc)?.1,
        Expr::Literal { lit, loc } => check_width(*loc, literal_width(lit) as u64)?,
        Expr::Unary { op, arg, .. } => match op {
            UnaryOp::Plus | UnaryOp::Neg | UnaryOp::BitNot => self_width(c, arg)?,
            _ => 1,
        },
        Expr::Binary { op, lhs, rhs, .. } => match op {
            BinaryOp::Shl | BinaryOp::Shr | BinaryOp::AShl | BinaryOp::AShr | BinaryOp::Pow => {
                self_width(c, lhs)?
            }
            BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::CaseEq
            | BinaryOp::CaseNe
            | BinaryOp::LogAnd
            | BinaryOp::LogOr => 1,
            _ => self_width(c, lhs)?.max(self_width(c, rhs)?),
        },
        Expr::Ternary { then_expr, else_expr, .. } => {
            self_width(c, then_expr)?.max(self_width(c, else_expr)?)
        }
        Expr::Concat { parts, .. } => {
            let mut total = 0u64;
            for p in parts {
                total += self_width(c, p)? as u64;
            }
            check_width(loc, total)?
        }
        Expr::Replicate { count, parts, .. } => {
            let n = const_eval(c, count)?;
            let mut total = 0u64;
            for p in parts {
                total += self_width(c, p)? as u64;
            }
            check_width(loc, total.saturating_mul(n))?
        }
        Expr::Index { base, .. } => match array_base(c, base)? {
            Some((_, shape)) => match shape {
                Shape::Array { elem_width, .. } => elem_width,
                _ => unreachable!(),
            },
            None => 1,
        },
        Expr::Range { msb, lsb, .. } => {
            let m = const_eval(c, msb)? as i64;
            let l = const_eval(c, lsb)? as i64;
            check_width(loc, m.abs_diff(l) + 1)?
        }
        Expr::IndexedRange { width, .. } => check_width(loc, const_eval(c, width)?)?,
        Expr::SysCall { name, args, loc } => match name.as_str() {
            "$clog2" | "$bits" => 32,
            "$unsigned" => {
                let [a] = args.as_slice() else {
                    return Err(Diagnostic::error(*loc, "$unsigned takes one argument"));
                };
                self_width(c, a)?
            }
            "$signed" => return Err(Diagnostic::unsupported(*loc, "signed arithmetic is not supported")),
            _ => match c.syscall_width(name, args, *loc)? {
                Some(w) => w,
                None => {
                    return Err(Diagnostic::unsupported(
                        *loc,
                        format!("system function `{name}` is not supported here"),
                    ))
                }
            },
        },
    })
}

/// If `base` names an unpacked array, returns its name and shape.
fn array_base<C: LowerCtx + ?Sized>(c: &mut C, base: &Expr) -> LResult<Option<(String, Shape)>> {
    if let Expr::Ident { name, loc } = base {
        let s = c.shape(name, *loc)?;
        if matches!(s, Shape::Array { .. }) {
            return Ok(Some((name.clone(), s)));
        }
    }
    Ok(None)
}

/// True when `e` is a constant expression by construction (literals,
/// parameters and loop variables only), as opposed to one that merely folds.
pub(crate) fn is_static<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr) -> LResult<bool> {
    let mut names = Vec::new();
    let mut other = false;
    e.walk(&mut |x| match x {
        Expr::Ident { name, loc } => names.push((name.clone(), *loc)),
        Expr::Hier { .. } => other = true,
        Expr::SysCall { name, .. } if name != "$clog2" && name != "$bits" && name != "$unsigned" => other = true,
        _ => {}
    });
    if other {
        return Ok(false);
    }
    for (n, loc) in names {
        if !matches!(c.shape(&n, loc)?, Shape::Const { .. }) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evaluates a constant expression.
pub(crate) fn const_eval<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr) -> LResult<u64> {
    let w = self_width(c, e)?;
    let r = lower(c, e, w)?;
    c.arena()
        .const_value(r)
        .ok_or_else(|| Diagnostic::error(e.loc(), "expression is not a compile-time constant"))
}

/// Lowers at the expression's own width.
pub(crate) fn lower_self<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr) -> LResult<ExprRef> {
    let w = self_width(c, e)?;
    lower(c, e, w)
}

/// Lowers to a 1-bit truth value.
pub(crate) fn lower_bool<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr) -> LResult<ExprRef> {
    let r = lower_self(c, e)?;
    Ok(c.arena().to_bool(r))
}

/// Lowers `e` in a context of width `w`; the result is exactly `w` bits.
pub(crate) fn lower<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr, w: u32) -> LResult<ExprRef> {
    let sw = self_width(c, e)?;
    if w < sw {
        let r = lower_at(c, e, sw)?;
        return Ok(c.arena().slice(r, 0, w));
    }
    lower_at(c, e, w)
}

/// Packed range of a selectable base: `(value, msb, lsb)`.
fn lower_base<C: LowerCtx + ?Sized>(c: &mut C, base: &Expr) -> LResult<(ExprRef, i64, i64)> {
    match base {
        Expr::Ident { name, loc } => match c.shape(name, *loc)? {
            Shape::Vector { msb, lsb, .. } => Ok((c.read(name, *loc)?, msb, lsb)),
            Shape::Const { value, width } => Ok((c.arena().konst(value, width), width as i64 - 1, 0)),
            Shape::Array { .. } => {
                Err(Diagnostic::unsupported(*loc, format!("whole-array reference to `{name}`")))
            }
        },
        Expr::Index { base: inner, index, loc } => {
            if let Some((name, Shape::Array { msb, lsb, .. })) = array_base(c, inner)? {
                let v = array_read(c, &name, index, *loc)?;
                return Ok((v, msb, lsb));
            }
            let v = lower_self(c, base)?;
            Ok((v, 0, 0))
        }
        _ => {
            let v = lower_self(c, base)?;
            let w = c.arena().width(v) as i64;
            Ok((v, w - 1, 0))
        }
    }
}

fn array_read<C: LowerCtx + ?Sized>(c: &mut C, name: &str, index: &Expr, loc: Loc) -> LResult<ExprRef> {
    let Shape::Array { elem_width, lo, hi, .. } = c.shape(name, loc)? else { unreachable!() };
    let idx = lower_self(c, index)?;
    if let Some(i) = c.arena().const_value(idx) {
        let i = i as i64;
        if i < lo || i > hi {
            if !is_static(c, index)? {
                return Ok(c.arena().zero(elem_width));
            }
            return Err(Diagnostic::error(
                index.loc(),
                format!("index {i} is out of range for `{name}[{lo}:{hi}]`"),
            ));
        }
        return c.read(&element_key(name, i), loc);
    }
    let iw = c.arena().width(idx);
    // Out-of-range dynamic reads yield zero.
    let mut acc = c.arena().zero(elem_width);
    for i in (lo..=hi).rev() {
        if i < 0 || (iw < 64 && i as u64 > mask(iw)) {
            continue;
        }
        let elem = c.read(&element_key(name, i), loc)?;
        let k = c.arena().konst(i as u64, iw);
        let hit = c.arena().eq(idx, k);
        acc = c.arena().mux(hit, elem, acc);
    }
    Ok(acc)
}

/// Offset (from bit 0) of declared bit index `i` in a `[msb:lsb]` vector.
fn bit_offset(i: i64, msb: i64, lsb: i64) -> i64 {
    if msb >= lsb {
        i - lsb
    } else {
        lsb - i
    }
}

/// Extracts `width` bits starting at a dynamic offset `start - lsb`.
fn dynamic_slice<C: LowerCtx + ?Sized>(
    c: &mut C,
    v: ExprRef,
    start: ExprRef,
    bias: i64,
    width: u32,
) -> ExprRef {
    let a = c.arena();
    let vw = a.width(v);
    let sw = a.width(start);
    let amount = if bias == 0 {
        start
    } else {
        // Widen enough that subtracting the bias cannot wrap into a small shift.
        let ww = (sw + 2).clamp(8, 64);
        let s = a.zext(start, ww);
        if bias > 0 {
            let b = a.konst(bias as u64, ww);
            // Offsets below zero select nothing.
            let under = a.ult(s, b);
            let diff = a.sub(s, b);
            let big = a.konst(vw as u64, ww);
            a.mux(under, big, diff)
        } else {
            let b = a.konst((-bias) as u64, ww);
            a.add(s, b)
        }
    };
    let shifted = a.binary(crate::ts::BinOp::Lshr, v, amount);
    a.slice(shifted, 0, width)
}

fn lower_at<C: LowerCtx + ?Sized>(c: &mut C, e: &Expr, w: u32) -> LResult<ExprRef> {
    let loc = e.loc();
    let r = match e {
        Expr::Ident { name, loc } => match c.shape(name, *loc)? {
            Shape::Const { value, width } => {
                let k = c.arena().konst(value, width);
                c.arena().zext(k, w)
            }
            Shape::Vector { .. } => {
                let v = c.read(name, *loc)?;
                c.arena().zext(v, w)
            }
            Shape::Array { .. } => {
                return Err(Diagnostic::unsupported(*loc, format!("whole-array reference to `{name}`")))
            }
        },
        Expr::Hier { path, loc } => {
            let (v, _) = c.hier(path, *loc)?;
            c.arena().zext(v, w)
        }
        Expr::Literal { lit, .. } => match lit {
            Literal::Number { value, .. } => c.arena().konst(*value, w),
            Literal::Fill(true) => c.arena().ones(w),
            Literal::Fill(false) => c.arena().zero(w),
            Literal::Str(s) => {
                let v = s.bytes().fold(0u64, |acc, b| (acc << 8) | b as u64);
                c.arena().konst(v, w)
            }
        },
        Expr::Unary { op, arg, .. } => match op {
            UnaryOp::Plus => lower(c, arg, w)?,
            UnaryOp::Neg => {
                let a = lower(c, arg, w)?;
                let z = c.arena().zero(w);
                c.arena().sub(z, a)
            }
            UnaryOp::BitNot => {
                let a = lower(c, arg, w)?;
                c.arena().not(a)
            }
            _ => {
                let a = lower_self(c, arg)?;
                let ar = c.arena();
                let bit = match op {
                    UnaryOp::LogNot => {
                        let b = ar.to_bool(a);
                        ar.not(b)
                    }
                    UnaryOp::RedAnd => ar.red_and(a),
                    UnaryOp::RedNand => {
                        let b = ar.red_and(a);
                        ar.not(b)
                    }
                    UnaryOp::RedOr => ar.red_or(a),
                    UnaryOp::RedNor => {
                        let b = ar.red_or(a);
                        ar.not(b)
                    }
                    UnaryOp::RedXor => ar.red_xor(a),
                    UnaryOp::RedXnor => {
                        let b = ar.red_xor(a);
                        ar.not(b)
                    }
                    _ => unreachable!(),
                };
                ar.zext(bit, w)
            }
        },
        Expr::Binary { op, lhs, rhs, .. } => lower_binary(c, *op, lhs, rhs, w, loc)?,
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            let cnd = lower_bool(c, cond)?;
            let t = lower(c, then_expr, w)?;
            let f = lower(c, else_expr, w)?;
            c.arena().mux(cnd, t, f)
        }
        Expr::Concat { parts, .. } => {
            let v = concat_parts(c, parts)?;
            c.arena().zext(v, w)
        }
        Expr::Replicate { count, parts, loc } => {
            let n = const_eval(c, count)?;
            if n == 0 {
                return Err(Diagnostic::error(*loc, "replication count must be positive"));
            }
            let one = concat_parts(c, parts)?;
            let mut v = one;
            for _ in 1..n {
                v = c.arena().concat(v, one);
            }
            c.arena().zext(v, w)
        }
        Expr::Index { base, index, loc } => {
            if let Some((name, _)) = array_base(c, base)? {
                let v = array_read(c, &name, index, *loc)?;
                return Ok(c.arena().zext(v, w));
            }
            let (v, msb, lsb) = lower_base(c, base)?;
            let vw = c.arena().width(v) as i64;
            let idx = lower_self(c, index)?;
            let bit = if let Some(i) = c.arena().const_value(idx) {
                let off = bit_offset(i as i64, msb, lsb);
                if off < 0 || off >= vw {
                    if !is_static(c, index)? {
                        return Ok(c.arena().zero(w));
                    }
                    return Err(Diagnostic::error(
                        index.loc(),
                        format!("bit select {i} is out of range [{msb}:{lsb}]"),
                    ));
                }
                c.arena().slice(v, off as u32, 1)
            } else if msb >= lsb {
                dynamic_slice(c, v, idx, lsb, 1)
            } else {
                return Err(Diagnostic::unsupported(
                    *loc,
                    "variable bit select on an ascending range is not supported",
                ));
            };
            c.arena().zext(bit, w)
        }
        Expr::Range { base, msb: m, lsb: l, loc } => {
            let (v, msb, lsb) = lower_base(c, base)?;
            let vw = c.arena().width(v) as i64;
            let mi = const_eval(c, m)? as i64;
            let li = const_eval(c, l)? as i64;
            let (o1, o2) = (bit_offset(mi, msb, lsb), bit_offset(li, msb, lsb));
            let (lo, hi) = (o1.min(o2), o1.max(o2));
            if lo < 0 || hi >= vw {
                return Err(Diagnostic::error(
                    *loc,
                    format!("part select [{mi}:{li}] is out of range [{msb}:{lsb}]"),
                ));
            }
            let s = c.arena().slice(v, lo as u32, (hi - lo + 1) as u32);
            c.arena().zext(s, w)
        }
        Expr::IndexedRange { base, start, width, up, loc } => {
            let (v, msb, lsb) = lower_base(c, base)?;
            let vw = c.arena().width(v) as i64;
            let wd = const_eval(c, width)? as i64;
            if wd <= 0 {
                return Err(Diagnostic::error(*loc, "indexed part-select width must be positive"));
            }
            if msb < lsb {
                return Err(Diagnostic::unsupported(*loc, "indexed part select on an ascending range"));
            }
            let s = lower_self(c, start)?;
            let low_bias = if *up { 0 } else { wd - 1 };
            let in_range = |sv: u64| {
                let lo = sv as i64 - low_bias - lsb;
                lo >= 0 && lo + wd <= vw
            };
            let r = match c.arena().const_value(s) {
                Some(sv) if in_range(sv) => {
                    let lo = sv as i64 - low_bias - lsb;
                    c.arena().slice(v, lo as u32, wd as u32)
                }
                Some(_) if is_static(c, start)? => {
                    return Err(Diagnostic::error(*loc, "indexed part select is out of range"));
                }
                _ => {
                if wd > vw {
                    return Err(Diagnostic::error(*loc, "indexed part select is wider than its base"));
                }
                // Pad so that selects running off the top read zeros.
                let padded_w = ((vw + wd) as u32).min(MAX_WIDTH);
                let pv = c.arena().zext(v, padded_w);
                dynamic_slice(c, pv, s, lsb + low_bias, wd as u32)
                }
            };
            c.arena().zext(r, w)
        }
        Expr::SysCall { name, args, loc } => {
            let v = match name.as_str() {
                "$clog2" => {
                    let [a] = args.as_slice() else {
                        return Err(Diagnostic::error(*loc, "$clog2 takes one argument"));
                    };
                    let x = const_eval(c, a)?;
                    let r = if x <= 1 { 0 } else { 64 - (x - 1).leading_zeros() as u64 };
                    c.arena().konst(r, 32)
                }
                "$bits" => {
                    let [a] = args.as_slice() else {
                        return Err(Diagnostic::error(*loc, "$bits takes one argument"));
                    };
                    let bw = self_width(c, a)?;
                    c.arena().konst(bw as u64, 32)
                }
                "$unsigned" => lower_self(c, &args[0])?,
                _ => match c.syscall(name, args, *loc)? {
                    Some(v) => v,
                    None => {
                        return Err(Diagnostic::unsupported(
                            *loc,
                            format!("system function `{name}` is not supported here"),
                        ))
                    }
                },
            };
            c.arena().resize(v, w)
        }
    };
    debug_assert_eq!(c.arena().width(r), w, "{e:?}");
    Ok(r)
}

fn concat_parts<C: LowerCtx + ?Sized>(c: &mut C, parts: &[Expr]) -> LResult<ExprRef> {
    let mut acc: Option<ExprRef> = None;
    for p in parts {
        let v = lower_self(c, p)?;
        acc = Some(match acc {
            None => v,
            Some(hi) => {
                let total = c.arena().width(hi) + c.arena().width(v);
                check_width(p.loc(), total as u64)?;
                c.arena().concat(hi, v)
            }
        });
    }
    acc.ok_or_else(|| Diagnostic::error(Loc::default(), "empty concatenation"))
}

fn lower_binary<C: LowerCtx + ?Sized>(
    c: &mut C,
    op: BinaryOp,
    lhs: &Expr,
    rhs: &Expr,
    w: u32,
    loc: Loc,
) -> LResult<ExprRef> {
    use crate::ts::BinOp as B;
    let arith = |c: &mut C, bop: B| -> LResult<ExprRef> {
        let a = lower(c, lhs, w)?;
        let b = lower(c, rhs, w)?;
        Ok(c.arena().binary(bop, a, b))
    };
    Ok(match op {
        BinaryOp::Add => arith(c, B::Add)?,
        BinaryOp::Sub => arith(c, B::Sub)?,
        BinaryOp::Mul => arith(c, B::Mul)?,
        BinaryOp::Div => arith(c, B::Udiv)?,
        BinaryOp::Mod => arith(c, B::Urem)?,
        BinaryOp::BitAnd => arith(c, B::And)?,
        BinaryOp::BitOr => arith(c, B::Or)?,
        BinaryOp::BitXor => arith(c, B::Xor)?,
        BinaryOp::BitXnor => {
            let x = arith(c, B::Xor)?;
            c.arena().not(x)
        }
        BinaryOp::Shl | BinaryOp::AShl | BinaryOp::Shr | BinaryOp::AShr => {
            let a = lower(c, lhs, w)?;
            let s = lower_self(c, rhs)?;
            let bop = if matches!(op, BinaryOp::Shl | BinaryOp::AShl) { B::Shl } else { B::Lshr };
            c.arena().binary(bop, a, s)
        }
        BinaryOp::Pow => {
            let a = lower(c, lhs, w)?;
            let b = lower_self(c, rhs)?;
            let (ca, cb) = (c.arena().const_value(a), c.arena().const_value(b));
            match (ca, cb) {
                (Some(x), Some(y)) => {
                    let v = x.wrapping_pow(y.min(u32::MAX as u64) as u32);
                    c.arena().konst(v, w)
                }
                (Some(2), None) => {
                    let one = c.arena().konst(1, w);
                    c.arena().binary(B::Shl, one, b)
                }
                _ => return Err(Diagnostic::unsupported(loc, "non-constant `**` is not supported")),
            }
        }
        BinaryOp::Lt
        | BinaryOp::Le
        | BinaryOp::Gt
        | BinaryOp::Ge
        | BinaryOp::Eq
        | BinaryOp::Ne
        | BinaryOp::CaseEq
        | BinaryOp::CaseNe => {
            let ow = self_width(c, lhs)?.max(self_width(c, rhs)?);
            let a = lower(c, lhs, ow)?;
            let b = lower(c, rhs, ow)?;
            let ar = c.arena();
            let bit = match op {
                BinaryOp::Lt => ar.ult(a, b),
                BinaryOp::Le => ar.ule(a, b),
                BinaryOp::Gt => ar.ult(b, a),
                BinaryOp::Ge => ar.ule(b, a),
                BinaryOp::Eq | BinaryOp::CaseEq => ar.eq(a, b),
                _ => ar.ne(a, b),
            };
            ar.zext(bit, w)
        }
        BinaryOp::LogAnd | BinaryOp::LogOr => {
            let a = lower_bool(c, lhs)?;
            let b = lower_bool(c, rhs)?;
            let ar = c.arena();
            let bit = if op == BinaryOp::LogAnd { ar.and(a, b) } else { ar.or(a, b) };
            ar.zext(bit, w)
        }
    })
}
