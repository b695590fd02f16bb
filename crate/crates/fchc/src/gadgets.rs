//! Small reversible circuit building blocks shared by the encoding and
//! pipeline builders: a ripple-carry adder, equality ladders, constant
//! writes, register copies, and rotate chains.
//!
//! Everything here bottoms out in the machine's primitive gate set
//! (single-cell permutations and swaps with at most two equality controls).

use std::sync::Arc;

use crate::revcore::{ArgSlice, Cell, Control, Perm, Program, ProgramBuilder, Reg, Shape};

pub fn ctl(cell: Cell, value: u8) -> Control {
    Control { cell, value }
}

pub fn cells(reg: Reg, width: u32) -> Vec<Cell> {
    (0..width).map(|i| Cell::new(reg, i)).collect()
}

/// In-place ripple-carry adder `b += a (mod 2^w)`, little-endian bit
/// registers. Carries live in a scratch local and are uncomputed on the way
/// back down, so the program is junk-free.
pub fn adder(w: u32) -> Arc<Program> {
    assert!(w >= 1);
    let mut b = ProgramBuilder::new(format!("add{w}"));
    let a = b.param(Shape::bits(w));
    let t = b.param(Shape::bits(w));
    if w == 1 {
        b.cx(Cell::new(a, 0), Cell::new(t, 0));
        return b.finish();
    }
    let c = b.local(Shape::bits(w));
    let ai = |i: u32| Cell::new(a, i);
    let bi = |i: u32| Cell::new(t, i);
    let ci = |i: u32| Cell::new(c, i);

    // carry chain: c[i+1] = MAJ(a[i], b[i], c[i]); leaves b[i] = a[i] xor b[i]
    let carry = |b: &mut ProgramBuilder, i: u32| {
        b.ccx(ai(i), bi(i), ci(i + 1));
        b.cx(ai(i), bi(i));
        b.ccx(ci(i), bi(i), ci(i + 1));
    };
    let uncarry = |b: &mut ProgramBuilder, i: u32| {
        b.ccx(ci(i), bi(i), ci(i + 1));
        b.cx(ai(i), bi(i));
        b.ccx(ai(i), bi(i), ci(i + 1));
    };

    for i in 0..w - 1 {
        carry(&mut b, i);
    }
    // top bit: sum only, no carry out (mod 2^w)
    b.cx(ai(w - 1), bi(w - 1));
    b.cx(ci(w - 1), bi(w - 1));
    for i in (0..w - 1).rev() {
        uncarry(&mut b, i);
        b.cx(ai(i), bi(i));
        b.cx(ci(i), bi(i));
    }
    b.finish()
}

/// XOR a constant into a little-endian bit register (optionally controlled).
pub fn write_const_bits(b: &mut ProgramBuilder, reg: Reg, offset: u32, w: u32, value: u64, controls: &[Control]) {
    for i in 0..w {
        if (value >> i) & 1 == 1 {
            b.x(Cell::new(reg, offset + i), controls);
        }
    }
}

/// `flag ^= AND(conditions)` using a chain of scratch bits from `ladder`.
/// `conditions` are (cell, required value) pairs; `ladder` must provide at
/// least `len-1` zeroed bits for `len >= 2`. The chain is uncomputed before
/// returning.
pub fn flip_if_all(b: &mut ProgramBuilder, conditions: &[(Cell, u8)], flag: Cell, ladder: Reg) {
    match conditions.len() {
        0 => b.x(flag, &[]),
        1 => b.x(flag, &[ctl(conditions[0].0, conditions[0].1)]),
        2 => b.x(
            flag,
            &[
                ctl(conditions[0].0, conditions[0].1),
                ctl(conditions[1].0, conditions[1].1),
            ],
        ),
        n => {
            // t[0] = c0 & c1; t[i] = t[i-1] & c[i+1]
            let t = |i: usize| Cell::new(ladder, i as u32);
            let compute = |b: &mut ProgramBuilder| {
                b.x(
                    t(0),
                    &[
                        ctl(conditions[0].0, conditions[0].1),
                        ctl(conditions[1].0, conditions[1].1),
                    ],
                );
                for i in 2..n {
                    b.x(
                        t(i - 1),
                        &[
                            ctl(t(i - 2), 1),
                            ctl(conditions[i].0, conditions[i].1),
                        ],
                    );
                }
            };
            compute(b);
            b.cx(t(n - 2), flag);
            // uncompute in reverse
            for i in (2..n).rev() {
                b.x(
                    t(i - 1),
                    &[ctl(t(i - 2), 1), ctl(conditions[i].0, conditions[i].1)],
                );
            }
            b.x(
                t(0),
                &[
                    ctl(conditions[0].0, conditions[0].1),
                    ctl(conditions[1].0, conditions[1].1),
                ],
            );
        }
    }
}

/// `flag ^= [window == konst]` for a little-endian bit window.
pub fn flip_if_eq_const(b: &mut ProgramBuilder, reg: Reg, offset: u32, w: u32, konst: u64, flag: Cell, ladder: Reg) {
    let conds: Vec<(Cell, u8)> = (0..w)
        .map(|i| (Cell::new(reg, offset + i), ((konst >> i) & 1) as u8))
        .collect();
    flip_if_all(b, &conds, flag, ladder);
}

/// `flag ^= [a == b]` for two equal-width bit registers. Uses `matches`
/// (w zeroed bits) for the XNOR pattern and `ladder` for the AND chain; both
/// are restored.
pub fn flip_if_eq_regs(
    b: &mut ProgramBuilder,
    a: Reg,
    a_off: u32,
    bb: Reg,
    b_off: u32,
    w: u32,
    flag: Cell,
    matches: Reg,
    ladder: Reg,
) {
    let m = |i: u32| Cell::new(matches, i);
    let compute = |bi: &mut ProgramBuilder| {
        for i in 0..w {
            bi.cx(Cell::new(a, a_off + i), m(i));
            bi.cx(Cell::new(bb, b_off + i), m(i));
            bi.x(m(i), &[]);
        }
    };
    compute(b);
    let conds: Vec<(Cell, u8)> = (0..w).map(|i| (m(i), 1)).collect();
    flip_if_all(b, &conds, flag, ladder);
    // uncompute matches
    for i in 0..w {
        b.x(m(i), &[]);
        b.cx(Cell::new(bb, b_off + i), m(i));
        b.cx(Cell::new(a, a_off + i), m(i));
    }
}

/// Rotate a bit window up by one (value doubles when the top bit is clear):
/// bit i moves to i+1, top wraps to 0. Each adjacent swap carries `controls`.
pub fn rotate_up(b: &mut ProgramBuilder, reg: Reg, offset: u32, w: u32, controls: &[Control]) {
    for i in (0..w - 1).rev() {
        b.swap(Cell::new(reg, offset + i + 1), Cell::new(reg, offset + i), controls);
    }
}

/// Inverse of [`rotate_up`].
pub fn rotate_down(b: &mut ProgramBuilder, reg: Reg, offset: u32, w: u32, controls: &[Control]) {
    for i in 0..w - 1 {
        b.swap(Cell::new(reg, offset + i + 1), Cell::new(reg, offset + i), controls);
    }
}

/// Copy a zeroed trit cell from `src` (same-radix): dst += src.
pub fn copy_trit(b: &mut ProgramBuilder, src: Cell, dst: Cell, extra: Option<Control>) {
    for v in 1..=2u8 {
        let mut c = vec![ctl(src, v)];
        if let Some(e) = extra {
            c.push(e);
        }
        b.permute(dst, Perm::add_mod(3, v), &c);
    }
}

/// `dst ^= src` bitwise for equal-width windows, each CX optionally carrying
/// one extra control.
pub fn xor_regs(b: &mut ProgramBuilder, src: Reg, s_off: u32, dst: Reg, d_off: u32, w: u32, extra: Option<Control>) {
    for i in 0..w {
        let mut c = vec![ctl(Cell::new(src, s_off + i), 1)];
        if let Some(e) = extra {
            c.push(e);
        }
        b.x(Cell::new(dst, d_off + i), &c);
    }
}

/// Call the shared adder on two windows.
pub fn call_add(b: &mut ProgramBuilder, add: &Arc<Program>, a: Reg, a_off: u32, t: Reg, t_off: u32) {
    b.call(add, &[ArgSlice::at(a, a_off), ArgSlice::at(t, t_off)]);
}

/// Uncall the shared adder (subtraction).
pub fn call_sub(b: &mut ProgramBuilder, add: &Arc<Program>, a: Reg, a_off: u32, t: Reg, t_off: u32) {
    b.uncall(add, &[ArgSlice::at(a, a_off), ArgSlice::at(t, t_off)]);
}

/// Bit width needed to hold values `0..=max`.
pub fn bitlen(max: u64) -> u32 {
    64 - max.leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revcore::{Bind, Machine, RegKind};

    #[test]
    fn adder_exhaustive_small_widths() {
        for w in 1..=6u32 {
            let add = adder(w);
            let mut m = Machine::new();
            let a = m.alloc_register(RegKind::Input, w, 2);
            let t = m.alloc_register(RegKind::Input, w, 2);
            let modulus = 1u64 << w;
            for av in 0..modulus {
                for bv in 0..modulus {
                    m.write_uint(a, 0, w, av).unwrap();
                    m.write_uint(t, 0, w, bv).unwrap();
                    m.run(&add, &[Bind::whole(a), Bind::whole(t)]).unwrap();
                    assert_eq!(m.read_uint(t, 0, w).unwrap(), (av + bv) % modulus, "w={w} a={av} b={bv}");
                    assert_eq!(m.read_uint(a, 0, w).unwrap(), av);
                    // inverse subtracts
                    m.run_inverse(&add, &[Bind::whole(a), Bind::whole(t)]).unwrap();
                    assert_eq!(m.read_uint(t, 0, w).unwrap(), bv);
                }
            }
        }
    }

    #[test]
    fn eq_const_ladder_exhaustive() {
        for w in 1..=5u32 {
            for konst in 0..(1u64 << w) {
                let mut b = ProgramBuilder::new("eqc");
                let r = b.param(Shape::bits(w));
                let f = b.param(Shape::bits(1));
                let lad = b.local(Shape::bits(w.max(2)));
                flip_if_eq_const(&mut b, r, 0, w, konst, Cell::new(f, 0), lad);
                let p = b.finish();
                let mut m = Machine::new();
                let r = m.alloc_register(RegKind::Input, w, 2);
                let f = m.alloc_register(RegKind::Output, 1, 2);
                for v in 0..(1u64 << w) {
                    m.write_uint(r, 0, w, v).unwrap();
                    m.write_cells(f, &[0]).unwrap();
                    m.run(&p, &[Bind::whole(r), Bind::whole(f)]).unwrap();
                    assert_eq!(m.read_cells(f).unwrap()[0] == 1, v == konst);
                }
            }
        }
    }

    #[test]
    fn eq_regs_exhaustive() {
        let w = 4u32;
        let mut b = ProgramBuilder::new("eqr");
        let x = b.param(Shape::bits(w));
        let y = b.param(Shape::bits(w));
        let f = b.param(Shape::bits(1));
        let mat = b.local(Shape::bits(w));
        let lad = b.local(Shape::bits(w));
        flip_if_eq_regs(&mut b, x, 0, y, 0, w, Cell::new(f, 0), mat, lad);
        let p = b.finish();
        let mut m = Machine::new();
        let x = m.alloc_register(RegKind::Input, w, 2);
        let y = m.alloc_register(RegKind::Input, w, 2);
        let f = m.alloc_register(RegKind::Output, 1, 2);
        for a in 0..16u64 {
            for c in 0..16u64 {
                m.write_uint(x, 0, w, a).unwrap();
                m.write_uint(y, 0, w, c).unwrap();
                m.write_cells(f, &[0]).unwrap();
                m.run(&p, &[Bind::whole(x), Bind::whole(y), Bind::whole(f)]).unwrap();
                assert_eq!(m.read_cells(f).unwrap()[0] == 1, a == c);
                assert_eq!(m.read_uint(x, 0, w).unwrap(), a);
                assert_eq!(m.read_uint(y, 0, w).unwrap(), c);
            }
        }
    }

    #[test]
    fn rotate_doubles_when_top_clear() {
        let w = 5u32;
        let mut b = ProgramBuilder::new("rot");
        let r = b.param(Shape::bits(w));
        rotate_up(&mut b, r, 0, w, &[]);
        let p = b.finish();
        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, w, 2);
        for v in 0..(1u64 << (w - 1)) {
            m.write_uint(r, 0, w, v).unwrap();
            m.run(&p, &[Bind::whole(r)]).unwrap();
            assert_eq!(m.read_uint(r, 0, w).unwrap(), 2 * v);
            m.run_inverse(&p, &[Bind::whole(r)]).unwrap();
            assert_eq!(m.read_uint(r, 0, w).unwrap(), v);
        }
    }
}
