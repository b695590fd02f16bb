//! Reversible-circuit implementations of the set operations on gap
//! encodings: membership, singleton conversion, disjoint union, and
//! membership on block encodings.
//!
//! Membership is a single forward scan holding a partial-gap register `d`
//! and a prefix-sum register `y`. At each separator the gap is added into
//! `y`, compared against the query, and then cleared by reading the block's
//! digits back out of the string itself (the digits adjacent to the
//! separator are exactly the bits of `d`). A second, compare-free scan is
//! then uncalled to return `y` to zero, so the whole operation needs only
//! O(log N) scratch cells regardless of the set size.
//!
//! Union sweeps candidate values 1..N in order, querying both inputs and
//! appending a gap block to a scratch string whenever the value is a member.
//! The write cursor is a one-hot marker pair (ping-ponged between sweep
//! steps) so every cursor move is a plain swap or flip; per-value scratch is
//! uncomputed in place, and the scratch string itself is copied out and the
//! sweep uncalled.

use std::collections::HashMap;
use std::sync::Arc;

use crate::encoding::{binary_expansion, capacity};
use crate::gadgets::{
    adder, bitlen, call_add, call_sub, copy_trit, ctl, flip_if_all, flip_if_eq_regs, rotate_down,
    rotate_up, write_const_bits, xor_regs,
};
use crate::revcore::{ArgSlice, Cell, Control, Perm, Program, ProgramBuilder, Reg, Shape};

/// Ancilla budget constants asserted by the tests: measured scratch peaks
/// must stay below `alpha * log2(N) + beta` (membership operations) or
/// `alpha * (K log2(N/K) + K + log2 N) + beta` (union).
#[derive(Debug, Clone, Copy)]
pub struct AncillaBudget {
    pub contains_alpha: u64,
    pub contains_beta: u64,
    pub eff_contains_alpha: u64,
    pub eff_contains_beta: u64,
    pub union_alpha: u64,
    pub union_beta: u64,
    pub calculate_alpha: u64,
    pub calculate_beta: u64,
}

pub fn budget() -> AncillaBudget {
    AncillaBudget {
        contains_alpha: 8,
        contains_beta: 8,
        eff_contains_alpha: 8,
        eff_contains_beta: 8,
        union_alpha: 12,
        union_beta: 80,
        calculate_alpha: 16,
        calculate_beta: 24,
    }
}

/// Register layout holding one gap-encoding slot per power-of-two block
/// size, largest first. A sequence of `k` elements occupies the slots named
/// by the binary expansion of `k`; the other slots stay zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotLayout {
    n: u64,
    max_k: u64,
    slots: Vec<SlotInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotInfo {
    pub exp: u32,
    pub offset: u32,
    pub cap: u32,
}

impl SlotLayout {
    pub fn new(n: u64, max_k: u64) -> Self {
        assert!(max_k >= 1 && max_k <= n);
        let top = 63 - max_k.leading_zeros();
        let mut slots = Vec::new();
        let mut offset = 0u32;
        for exp in (0..=top).rev() {
            let cap = capacity(n, 1 << exp) as u32;
            slots.push(SlotInfo { exp, offset, cap });
            offset += cap;
        }
        SlotLayout { n, max_k, slots }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn max_k(&self) -> u64 {
        self.max_k
    }

    pub fn total_trits(&self) -> u32 {
        self.slots.iter().map(|s| s.cap).sum()
    }

    pub fn slot(&self, exp: u32) -> SlotInfo {
        *self
            .slots
            .iter()
            .find(|s| s.exp == exp)
            .expect("slot exponent out of layout range")
    }

    /// Slots used by a sequence of `k` elements, in expansion order.
    pub fn live_slots(&self, k: u64) -> Vec<SlotInfo> {
        assert!(k >= 1 && k <= self.max_k);
        binary_expansion(k).into_iter().map(|a| self.slot(a)).collect()
    }
}

/// Shared builder cache: one instance per element-domain size `n` keeps the
/// scan programs deduplicated across everything composed on top of them.
pub struct ProgCache {
    n: u64,
    w: u32,
    add: HashMap<u32, Arc<Program>>,
    contains: HashMap<u64, Arc<Program>>,
    scan_nc: HashMap<u64, Arc<Program>>,
    convert: Option<Arc<Program>>,
    unions: HashMap<(u64, u64), Arc<Program>>,
}

impl ProgCache {
    pub fn new(n: u64) -> Self {
        assert!(n >= 1);
        ProgCache {
            n,
            w: bitlen(n),
            add: HashMap::new(),
            contains: HashMap::new(),
            scan_nc: HashMap::new(),
            convert: None,
            unions: HashMap::new(),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Element register width (bits) for this domain.
    pub fn elem_width(&self) -> u32 {
        self.w
    }

    pub fn adder(&mut self, w: u32) -> Arc<Program> {
        self.add.entry(w).or_insert_with(|| adder(w)).clone()
    }

    /// Membership program: `(enc, x, out)` with `out ^= [x in S]`, `|S| = k`.
    pub fn contains(&mut self, k: u64) -> Arc<Program> {
        if let Some(p) = self.contains.get(&k) {
            return p.clone();
        }
        let add = self.adder(self.w);
        let scan_c = build_scan(self.n, k, true, &add);
        let scan_nc = self.scan_no_compare(k);
        let cap = capacity(self.n, k) as u32;
        let w = self.w;
        let mut b = ProgramBuilder::new(format!("contains_n{}_k{}", self.n, k));
        let enc = b.param(Shape::trits(cap));
        let x = b.param(Shape::bits(w));
        let out = b.param(Shape::bits(1));
        let y = b.local(Shape::bits(w));
        b.call(
            &scan_c,
            &[ArgSlice::whole(enc), ArgSlice::whole(x), ArgSlice::whole(out), ArgSlice::whole(y)],
        );
        b.uncall(&scan_nc, &[ArgSlice::whole(enc), ArgSlice::whole(y)]);
        let p = b.finish();
        self.contains.insert(k, p.clone());
        p
    }

    fn scan_no_compare(&mut self, k: u64) -> Arc<Program> {
        if let Some(p) = self.scan_nc.get(&k) {
            return p.clone();
        }
        let add = self.adder(self.w);
        let p = build_scan(self.n, k, false, &add);
        self.scan_nc.insert(k, p.clone());
        p
    }

    /// Singleton conversion: `(x, out_enc)` with `out_enc := enc({x})`.
    pub fn convert(&mut self) -> Arc<Program> {
        if let Some(p) = &self.convert {
            return p.clone();
        }
        let p = build_convert(self.n);
        self.convert = Some(p.clone());
        p
    }

    /// Disjoint union: `(enc1, enc2, out)` with `out := enc(S1 ∪ S2)`.
    pub fn union(&mut self, k1: u64, k2: u64) -> Arc<Program> {
        if let Some(p) = self.unions.get(&(k1, k2)) {
            return p.clone();
        }
        let p = build_union(self, k1, k2);
        self.unions.insert((k1, k2), p.clone());
        p
    }

    /// Block-encoding membership: `(effenc, x, out)` for a sequence of `k`
    /// elements stored in `layout`. One membership call per live slot; the
    /// elements are distinct, so at most one call flips the target.
    pub fn eff_contains(&mut self, layout: &SlotLayout, k: u64) -> Arc<Program> {
        assert_eq!(layout.n, self.n);
        let w = self.w;
        let mut b = ProgramBuilder::new(format!("effcontains_n{}_m{}_k{}", self.n, layout.max_k, k));
        let eff = b.param(Shape::trits(layout.total_trits()));
        let x = b.param(Shape::bits(w));
        let out = b.param(Shape::bits(1));
        for slot in layout.live_slots(k) {
            let c = self.contains(1u64 << slot.exp);
            b.call(
                &c,
                &[ArgSlice::at(eff, slot.offset), ArgSlice::whole(x), ArgSlice::whole(out)],
            );
        }
        b.finish()
    }
}

/// One forward scan over a gap encoding of `k` elements.
///
/// The prefix-sum register `y` is a parameter so that a compare-free scan
/// can be uncalled afterwards to return it to zero. `d` (partial gap), the
/// block-digit chain and the adder copy buffer are locals and end every scan
/// at zero.
fn build_scan(n: u64, k: u64, with_compare: bool, add: &Arc<Program>) -> Arc<Program> {
    let w = bitlen(n);
    let cap = capacity(n, k) as u32;
    let name = if with_compare {
        format!("scanc_n{n}_k{k}")
    } else {
        format!("scannc_n{n}_k{k}")
    };
    let mut b = ProgramBuilder::new(name);
    let enc = b.param(Shape::trits(cap));
    let (x, out) = if with_compare {
        (Some(b.param(Shape::bits(w))), Some(b.param(Shape::bits(1))))
    } else {
        (None, None)
    };
    let y = b.param(Shape::bits(w));
    let d = b.local(Shape::bits(w));
    let tmp = b.local(Shape::bits(w));
    let chain = b.local(Shape::bits(w.max(2)));
    let (eqt, mat, lad) = if with_compare {
        (
            Some(b.local(Shape::bits(1))),
            Some(b.local(Shape::bits(w))),
            Some(b.local(Shape::bits(w.max(2)))),
        )
    } else {
        (None, None, None)
    };

    let e = |p: u32| Cell::new(enc, p);
    for p in 0..cap {
        let sep = ctl(e(p), 2);
        // gap digit accumulation: d doubles, +1 on digit 1; both are undone
        // at separator cells so the full gap survives there.
        rotate_up(&mut b, d, 0, w, &[]);
        b.x(Cell::new(d, 0), &[ctl(e(p), 1)]);
        rotate_down(&mut b, d, 0, w, &[sep]);
        // y += d at separators (copy under control, then plain add)
        xor_regs(&mut b, d, 0, tmp, 0, w, Some(sep));
        call_add(&mut b, add, tmp, 0, y, 0);
        xor_regs(&mut b, d, 0, tmp, 0, w, Some(sep));
        if with_compare {
            let (x, out, eqt, mat, lad) =
                (x.unwrap(), out.unwrap(), eqt.unwrap(), mat.unwrap(), lad.unwrap());
            let eq_cell = Cell::new(eqt, 0);
            flip_if_eq_regs(&mut b, y, 0, x, 0, w, eq_cell, mat, lad);
            b.x(Cell::new(out, 0), &[ctl(eq_cell, 1), sep]);
            flip_if_eq_regs(&mut b, y, 0, x, 0, w, eq_cell, mat, lad);
        }
        // clear d by reading the block's digits back off the string: gap bit
        // j sits at position p-1-j, valid while no separator intervenes
        let jmax = w.min(p);
        if jmax > 0 {
            b.x(Cell::new(d, 0), &[sep, ctl(e(p - 1), 1)]);
            let chain_len = jmax - 1;
            for j in 0..chain_len {
                let prev = if j == 0 { sep } else { ctl(Cell::new(chain, j - 1), 1) };
                // chain[j] = prev AND enc[p-1-j] is a digit
                b.x(Cell::new(chain, j), &[prev, ctl(e(p - 1 - j), 0)]);
                b.x(Cell::new(chain, j), &[prev, ctl(e(p - 1 - j), 1)]);
                b.x(
                    Cell::new(d, j + 1),
                    &[ctl(Cell::new(chain, j), 1), ctl(e(p - 2 - j), 1)],
                );
            }
            for j in (0..chain_len).rev() {
                let prev = if j == 0 { sep } else { ctl(Cell::new(chain, j - 1), 1) };
                b.x(Cell::new(chain, j), &[prev, ctl(e(p - 1 - j), 0)]);
                b.x(Cell::new(chain, j), &[prev, ctl(e(p - 1 - j), 1)]);
            }
        }
    }
    b.finish()
}

/// Write `enc({x})` into a zeroed output: for each possible digit count, a
/// flag ladder recognises the bit length of `x` and gates the digit and
/// separator writes.
fn build_convert(n: u64) -> Arc<Program> {
    let w = bitlen(n);
    let cap = capacity(n, 1) as u32;
    let mut b = ProgramBuilder::new(format!("convert_n{n}"));
    let x = b.param(Shape::bits(w));
    let out = b.param(Shape::trits(cap));
    let lf = b.local(Shape::bits(1));
    let lad = b.local(Shape::bits(w.max(2)));
    for len in 1..=w {
        let mut conds = vec![(Cell::new(x, len - 1), 1u8)];
        for j in len..w {
            conds.push((Cell::new(x, j), 0));
        }
        let lf0 = Cell::new(lf, 0);
        flip_if_all(&mut b, &conds, lf0, lad);
        for q in 0..len {
            b.permute(
                Cell::new(out, q),
                Perm::add_mod(3, 1),
                &[ctl(lf0, 1), ctl(Cell::new(x, len - 1 - q), 1)],
            );
        }
        b.permute(Cell::new(out, len), Perm::add_mod(3, 2), &[ctl(lf0, 1)]);
        flip_if_all(&mut b, &conds, lf0, lad);
    }
    b.finish()
}

fn build_union(cache: &mut ProgCache, k1: u64, k2: u64) -> Arc<Program> {
    let n = cache.n;
    let kk = k1 + k2;
    assert!(kk <= n, "union size exceeds domain");
    let cap_out = capacity(n, kk) as u32;
    let sweep = build_union_sweep(cache, k1, k2);
    let mut b = ProgramBuilder::new(format!("union_n{n}_{k1}_{k2}"));
    let enc1 = b.param(Shape::trits(capacity(n, k1) as u32));
    let enc2 = b.param(Shape::trits(capacity(n, k2) as u32));
    let out = b.param(Shape::trits(cap_out));
    let scratch = b.local(Shape::trits(cap_out));
    let mark_a = b.local(Shape::bits(cap_out + 1));
    let mark_b = b.local(Shape::bits(cap_out + 1));
    let yprev = b.local(Shape::bits(cache.w));
    let sweep_args = [
        ArgSlice::whole(enc1),
        ArgSlice::whole(enc2),
        ArgSlice::whole(scratch),
        ArgSlice::whole(mark_a),
        ArgSlice::whole(mark_b),
        ArgSlice::whole(yprev),
    ];
    b.call(&sweep, &sweep_args);
    for t in 0..cap_out {
        copy_trit(&mut b, Cell::new(scratch, t), Cell::new(out, t), None);
    }
    b.uncall(&sweep, &sweep_args);
    b.finish()
}

/// The union candidate sweep. Leaves the merged encoding in `scratch`, the
/// final cursor in one of the marker registers and the maximum element in
/// `yprev`; the caller copies the result out and uncalls the sweep.
fn build_union_sweep(cache: &mut ProgCache, k1: u64, k2: u64) -> Arc<Program> {
    let n = cache.n;
    let w = cache.w;
    let cap_out = capacity(n, k1 + k2) as u32;
    let add = cache.adder(w);
    let c1 = cache.contains(k1);
    let c2 = cache.contains(k2);

    let mut b = ProgramBuilder::new(format!("usweep_n{n}_{k1}_{k2}"));
    let enc1 = b.param(Shape::trits(capacity(n, k1) as u32));
    let enc2 = b.param(Shape::trits(capacity(n, k2) as u32));
    let scratch = b.param(Shape::trits(cap_out));
    let mark_a = b.param(Shape::bits(cap_out + 1));
    let mark_b = b.param(Shape::bits(cap_out + 1));
    let yprev = b.param(Shape::bits(w));

    let x = b.local(Shape::bits(w));
    let m1 = b.local(Shape::bits(1));
    let m2 = b.local(Shape::bits(1));
    let m = b.local(Shape::bits(1));
    let delta = b.local(Shape::bits(w));
    let lf = b.local(Shape::bits(w));
    let tmp = b.local(Shape::bits(w));
    let mm = b.local(Shape::bits(1));
    let mmlf = b.local(Shape::bits(1));
    let mmb = b.local(Shape::bits(1));
    let u = b.local(Shape::bits(1));
    let chain = b.local(Shape::bits(w + 2));
    let lad = b.local(Shape::bits(w.max(2) + 1));

    let m_cell = Cell::new(m, 0);
    let mm_cell = Cell::new(mm, 0);
    let mmlf_cell = Cell::new(mmlf, 0);
    let mmb_cell = Cell::new(mmb, 0);
    let u_cell = Cell::new(u, 0);
    let s = |t: u32| Cell::new(scratch, t);

    // cursor starts at position 0
    b.x(Cell::new(mark_a, 0), &[]);

    for v in 1..=n {
        let (cur, nxt) = if v % 2 == 1 { (mark_a, mark_b) } else { (mark_b, mark_a) };
        // membership of v in S1 and S2 (disjoint, so xor gives the union)
        write_const_bits(&mut b, x, 0, w, v, &[]);
        b.call(&c1, &[ArgSlice::whole(enc1), ArgSlice::whole(x), ArgSlice::whole(m1)]);
        b.call(&c2, &[ArgSlice::whole(enc2), ArgSlice::whole(x), ArgSlice::whole(m2)]);
        b.cx(Cell::new(m1, 0), m_cell);
        b.cx(Cell::new(m2, 0), m_cell);

        // delta = v - yprev (mod 2^w); meaningful only when m = 1
        write_const_bits(&mut b, delta, 0, w, v, &[]);
        call_sub(&mut b, &add, yprev, 0, delta, 0);

        // one-hot gap length flags
        for len in 1..=w {
            let mut conds = vec![(Cell::new(delta, len - 1), 1u8)];
            for j in len..w {
                conds.push((Cell::new(delta, j), 0));
            }
            flip_if_all(&mut b, &conds, Cell::new(lf, len - 1), lad);
        }

        // append a gap block at the cursor; the new cursor position lands in
        // the other marker register
        for p in 0..cap_out {
            b.ccx(Cell::new(cur, p), m_cell, mm_cell);
            for len in 1..=w.min(cap_out - p - 1) {
                b.ccx(mm_cell, Cell::new(lf, len - 1), mmlf_cell);
                for j in 0..len {
                    b.permute(
                        s(p + j),
                        Perm::add_mod(3, 1),
                        &[ctl(mmlf_cell, 1), ctl(Cell::new(delta, len - 1 - j), 1)],
                    );
                }
                b.permute(s(p + len), Perm::add_mod(3, 2), &[ctl(mmlf_cell, 1)]);
                b.x(Cell::new(nxt, p + len + 1), &[ctl(mmlf_cell, 1)]);
                b.ccx(mm_cell, Cell::new(lf, len - 1), mmlf_cell);
            }
            b.ccx(Cell::new(cur, p), m_cell, mm_cell);
        }

        // yprev += delta when m = 1
        xor_regs(&mut b, delta, 0, tmp, 0, w, Some(ctl(m_cell, 1)));
        call_add(&mut b, &add, tmp, 0, yprev, 0);
        xor_regs(&mut b, delta, 0, tmp, 0, w, Some(ctl(m_cell, 1)));

        // end-of-append cleanup, keyed on the new cursor: identify the block
        // just written (the unique digit run ending at the separator before
        // the cursor), then clear the length flag, the old cursor bit and
        // the gap register from the written digits
        for pos in 2..=cap_out {
            b.ccx(Cell::new(nxt, pos), m_cell, mmb_cell);
            for len in 1..=w.min(pos - 1) {
                let start = pos - 1 - len; // block occupies start..start+len
                let digit_at = |j: u32| pos - 2 - j; // position of gap bit j
                let tb = emit_block_chain(&mut b, scratch, chain, pos, len, start, true);
                b.x(u_cell, &[tb, ctl(mmb_cell, 1)]);
                b.cx(u_cell, Cell::new(lf, len - 1));
                b.x(Cell::new(cur, start), &[ctl(u_cell, 1)]);
                for q in 0..len {
                    b.x(Cell::new(delta, q), &[ctl(u_cell, 1), ctl(s(digit_at(q)), 1)]);
                }
                b.x(u_cell, &[tb, ctl(mmb_cell, 1)]);
                emit_block_chain(&mut b, scratch, chain, pos, len, start, false);
            }
            b.ccx(Cell::new(nxt, pos), m_cell, mmb_cell);
        }

        // non-member cleanup: recompute the length flags and unwind delta
        for len in 1..=w {
            let mut conds = vec![(m_cell, 0u8), (Cell::new(delta, len - 1), 1)];
            for j in len..w {
                conds.push((Cell::new(delta, j), 0));
            }
            flip_if_all(&mut b, &conds, Cell::new(lf, len - 1), lad);
        }
        for i in 0..w {
            b.x(Cell::new(tmp, i), &[ctl(Cell::new(yprev, i), 1), ctl(m_cell, 0)]);
        }
        call_add(&mut b, &add, tmp, 0, delta, 0);
        for i in 0..w {
            b.x(Cell::new(tmp, i), &[ctl(Cell::new(yprev, i), 1), ctl(m_cell, 0)]);
        }
        for i in 0..w {
            if (v >> i) & 1 == 1 {
                b.x(Cell::new(delta, i), &[ctl(m_cell, 0)]);
            }
        }

        // cursor hand-over when nothing was written
        for p in 0..=cap_out {
            b.swap(Cell::new(cur, p), Cell::new(nxt, p), &[ctl(m_cell, 0)]);
        }

        // clear membership bits and the candidate register
        b.cx(Cell::new(m2, 0), m_cell);
        b.cx(Cell::new(m1, 0), m_cell);
        b.uncall(&c2, &[ArgSlice::whole(enc2), ArgSlice::whole(x), ArgSlice::whole(m2)]);
        b.uncall(&c1, &[ArgSlice::whole(enc1), ArgSlice::whole(x), ArgSlice::whole(m1)]);
        write_const_bits(&mut b, x, 0, w, v, &[]);
    }
    b.finish()
}

/// Chain ladder recognising "a gap block of `len` digits ends at the
/// separator `pos-1`": the `len` cells before the separator are digits and
/// the cell before the block (when it exists) is a separator. Returns the
/// control holding the conjunction. `compute=false` replays the ladder to
/// uncompute it (caller must not have changed the string in between).
fn emit_block_chain(
    b: &mut ProgramBuilder,
    scratch: Reg,
    chain: Reg,
    pos: u32,
    len: u32,
    start: u32,
    compute: bool,
) -> Control {
    let s = |t: u32| Cell::new(scratch, t);
    let mut steps: Vec<(u32, Control, Cell, bool)> = Vec::new(); // (chain idx, prev, cell, is_digit_cond)
    let mut prev = ctl(s(pos - 1), 2);
    let mut idx = 0u32;
    for j in 0..len {
        let q = pos - 2 - j;
        steps.push((idx, prev, s(q), true));
        prev = ctl(Cell::new(chain, idx), 1);
        idx += 1;
    }
    if start > 0 {
        steps.push((idx, prev, s(start - 1), false));
        prev = ctl(Cell::new(chain, idx), 1);
    }
    let emit = |b: &mut ProgramBuilder, (i, p, c, digit): (u32, Control, Cell, bool)| {
        if digit {
            b.x(Cell::new(chain, i), &[p, ctl(c, 0)]);
            b.x(Cell::new(chain, i), &[p, ctl(c, 1)]);
        } else {
            b.x(Cell::new(chain, i), &[p, ctl(c, 2)]);
        }
    };
    if compute {
        for st in steps {
            emit(b, st);
        }
    } else {
        for st in steps.into_iter().rev() {
            emit(b, st);
        }
    }
    prev
}
