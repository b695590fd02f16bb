//! Deterministic reversible register machine over mixed-radix cells.
//!
//! Registers hold cells of a single radix (2 or 3). Programs are sequences of
//! primitive reversible gates (single-cell permutations and cell swaps, with up
//! to two equality controls) plus calls to sub-programs, which receive register
//! slices as arguments and allocate their own scratch ancillas on entry.
//!
//! The machine tracks three observational counters: executed primitive gates,
//! the peak number of live ancilla cells, and the number of oracle-tagged
//! sub-program invocations. Counters never participate in reversibility:
//! running a program followed by its inverse restores every register exactly.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RevError {
    #[error("ancilla register not clean on release (program `{program}`)")]
    AncillaNotClean { program: String },
    #[error("radix mismatch: gate expects radix {expected}, register has {found}")]
    RadixMismatch { expected: u8, found: u8 },
    #[error("dead or unknown register")]
    DeadRegister,
    #[error("argument shape mismatch in call to `{program}`")]
    ShapeMismatch { program: String },
    #[error("cell index out of range")]
    OutOfRange,
    #[error("value {value} invalid for radix {radix}")]
    BadValue { value: u8, radix: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegKind {
    Input,
    Output,
    Ancilla,
}

/// Machine-level handle to a live register. Generation-tagged so stale
/// handles are caught instead of aliasing a reused slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegisterRef {
    slot: u32,
    gen: u32,
}

/// Program-level register name: a formal parameter or a scratch local.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reg {
    Param(u16),
    Local(u16),
}

/// One cell of a program-level register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub reg: Reg,
    pub index: u32,
}

impl Cell {
    pub fn new(reg: Reg, index: u32) -> Self {
        Cell { reg, index }
    }
}

/// Argument binding for a sub-program call: a window into one of the caller's
/// registers, starting at `offset`. The window length is the callee's declared
/// parameter width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgSlice {
    pub reg: Reg,
    pub offset: u32,
}

impl ArgSlice {
    pub fn whole(reg: Reg) -> Self {
        ArgSlice { reg, offset: 0 }
    }
    pub fn at(reg: Reg, offset: u32) -> Self {
        ArgSlice { reg, offset }
    }
}

/// Width and radix of a program-level register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub width: u32,
    pub radix: u8,
}

impl Shape {
    pub fn bits(width: u32) -> Self {
        Shape { width, radix: 2 }
    }
    pub fn trits(width: u32) -> Self {
        Shape { width, radix: 3 }
    }
}

/// Permutation of the value set {0, .., radix-1} of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Perm {
    radix: u8,
    map: [u8; 3],
}

impl Perm {
    pub fn from_map(radix: u8, map: [u8; 3]) -> Self {
        assert!(radix == 2 || radix == 3, "radix must be 2 or 3");
        let mut seen = [false; 3];
        for &v in map.iter().take(radix as usize) {
            assert!(v < radix, "permutation image out of range");
            assert!(!seen[v as usize], "not a permutation");
            seen[v as usize] = true;
        }
        Perm { radix, map }
    }

    pub fn identity(radix: u8) -> Self {
        Perm::from_map(radix, [0, 1, 2])
    }

    /// Bit flip on a radix-2 cell.
    pub fn not() -> Self {
        Perm::from_map(2, [1, 0, 2])
    }

    /// `v -> v + k (mod radix)`.
    pub fn add_mod(radix: u8, k: u8) -> Self {
        let mut map = [0u8; 3];
        for v in 0..radix {
            map[v as usize] = (v + k) % radix;
        }
        if radix == 2 {
            map[2] = 2;
        }
        Perm::from_map(radix, map)
    }

    pub fn inverse(&self) -> Self {
        let mut map = [0u8; 3];
        for v in 0..self.radix {
            map[self.map[v as usize] as usize] = v;
        }
        if self.radix == 2 {
            map[2] = 2;
        }
        Perm {
            radix: self.radix,
            map,
        }
    }

    pub fn radix(&self) -> u8 {
        self.radix
    }

    #[inline]
    fn apply(&self, v: u8) -> u8 {
        self.map[v as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOp {
    /// Permute one cell's value.
    Permute { cell: Cell, perm: Perm },
    /// Exchange the values of two same-radix cells.
    Swap { a: Cell, b: Cell },
}

/// Equality control: the gate fires only when the cell holds `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub cell: Cell,
    pub value: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub op: GateOp,
    pub controls: [Option<Control>; 2],
}

impl Gate {
    fn inverse(&self) -> Gate {
        match self.op {
            GateOp::Permute { cell, perm } => Gate {
                op: GateOp::Permute {
                    cell,
                    perm: perm.inverse(),
                },
                controls: self.controls,
            },
            GateOp::Swap { .. } => *self,
        }
    }
}

/// Pure classical predicate evaluated on register windows; flips a target bit
/// iff the predicate holds. Self-inverse by construction (the target must not
/// be among the inputs). Used to stand in for machinery whose reversible
/// implementation is out of scope (the connectivity traversal); its space cost
/// is charged symbolically by the accounting layer, not here.
pub struct NativeCx {
    pub name: &'static str,
    /// (window, length) pairs passed to the predicate in order.
    pub reads: Vec<(ArgSlice, u32)>,
    pub target: Cell,
    pub func: Arc<dyn Fn(&[Vec<u8>]) -> bool + Send + Sync>,
}

impl fmt::Debug for NativeCx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NativeCx")
            .field("name", &self.name)
            .field("reads", &self.reads)
            .field("target", &self.target)
            .finish()
    }
}

impl PartialEq for NativeCx {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.reads == other.reads && self.target == other.target
    }
}

#[derive(Debug, PartialEq)]
pub enum Step {
    Gate(Gate),
    Call { prog: Arc<Program>, args: Vec<ArgSlice> },
    Uncall { prog: Arc<Program>, args: Vec<ArgSlice> },
    Native(NativeCx),
}

/// A composed reversible program. Immutable once built; share via `Arc`.
#[derive(Debug)]
pub struct Program {
    pub name: String,
    pub params: Vec<Shape>,
    pub locals: Vec<Shape>,
    pub steps: Vec<Step>,
    /// Tagged programs bump the machine's `calculate_calls` counter on every
    /// invocation, forward or inverse.
    pub oracle: bool,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.locals == other.locals
            && self.oracle == other.oracle
            && self.steps.len() == other.steps.len()
            && self
                .steps
                .iter()
                .zip(other.steps.iter())
                .all(|(a, b)| steps_eq(a, b))
    }
}

fn steps_eq(a: &Step, b: &Step) -> bool {
    match (a, b) {
        (Step::Gate(x), Step::Gate(y)) => x == y,
        (Step::Native(x), Step::Native(y)) => x == y,
        (Step::Call { prog: p, args: x }, Step::Call { prog: q, args: y })
        | (Step::Uncall { prog: p, args: x }, Step::Uncall { prog: q, args: y }) => {
            x == y && (Arc::ptr_eq(p, q) || p == q)
        }
        _ => false,
    }
}

impl Program {
    /// Structural inverse: steps reversed, gates inverted, calls and uncalls
    /// exchanged. Sub-programs are shared, not recursively rebuilt, so
    /// `inverse(inverse(p))` is structurally equal to `p`.
    pub fn inverse(&self) -> Program {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| match s {
                Step::Gate(g) => Step::Gate(g.inverse()),
                Step::Call { prog, args } => Step::Uncall {
                    prog: Arc::clone(prog),
                    args: args.clone(),
                },
                Step::Uncall { prog, args } => Step::Call {
                    prog: Arc::clone(prog),
                    args: args.clone(),
                },
                Step::Native(n) => Step::Native(NativeCx {
                    name: n.name,
                    reads: n.reads.clone(),
                    target: n.target,
                    func: Arc::clone(&n.func),
                }),
            })
            .collect();
        Program {
            name: format!("inv({})", self.name),
            params: self.params.clone(),
            locals: self.locals.clone(),
            steps,
            oracle: self.oracle,
        }
    }

    /// Cells occupied by scratch locals of this program alone.
    pub fn local_cells(&self) -> u64 {
        self.locals.iter().map(|s| s.width as u64).sum()
    }
}

/// Static analyses over the program DAG. Results are exact for this machine
/// model: locals are allocated for the whole body of their program, so the
/// dynamic ancilla peak equals the static one, and control conditions never
/// change which gates are counted.
pub struct ProgramStats;

impl ProgramStats {
    pub fn gate_count(prog: &Arc<Program>) -> u128 {
        let mut memo = HashMap::new();
        Self::gates_rec(prog, &mut memo)
    }

    fn gates_rec(prog: &Arc<Program>, memo: &mut HashMap<*const Program, u128>) -> u128 {
        let key = Arc::as_ptr(prog);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut total: u128 = 0;
        for s in &prog.steps {
            total += match s {
                Step::Gate(_) | Step::Native(_) => 1,
                Step::Call { prog, .. } | Step::Uncall { prog, .. } => Self::gates_rec(prog, memo),
            };
        }
        memo.insert(key, total);
        total
    }

    /// Number of oracle-tagged invocations one run of `prog` performs.
    pub fn oracle_calls(prog: &Arc<Program>) -> u128 {
        let mut memo = HashMap::new();
        Self::oracle_rec(prog, &mut memo)
    }

    fn oracle_rec(prog: &Arc<Program>, memo: &mut HashMap<*const Program, u128>) -> u128 {
        let key = Arc::as_ptr(prog);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut total: u128 = if prog.oracle { 1 } else { 0 };
        for s in &prog.steps {
            if let Step::Call { prog, .. } | Step::Uncall { prog, .. } = s {
                total += Self::oracle_rec(prog, memo);
            }
        }
        memo.insert(key, total);
        total
    }

    /// Peak live ancilla cells over one run of `prog` (its locals plus the
    /// deepest chain of callee locals).
    pub fn peak_ancilla(prog: &Arc<Program>) -> u64 {
        let mut memo = HashMap::new();
        Self::peak_rec(prog, &mut memo)
    }

    fn peak_rec(prog: &Arc<Program>, memo: &mut HashMap<*const Program, u64>) -> u64 {
        let key = Arc::as_ptr(prog);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut deepest: u64 = 0;
        for s in &prog.steps {
            if let Step::Call { prog, .. } | Step::Uncall { prog, .. } = s {
                deepest = deepest.max(Self::peak_rec(prog, memo));
            }
        }
        let total = prog.local_cells() + deepest;
        memo.insert(key, total);
        total
    }
}

/// Incremental builder with shape checking. Construction errors are programmer
/// errors and panic with context.
pub struct ProgramBuilder {
    name: String,
    params: Vec<Shape>,
    locals: Vec<Shape>,
    steps: Vec<Step>,
    oracle: bool,
}

impl ProgramBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ProgramBuilder {
            name: name.into(),
            params: Vec::new(),
            locals: Vec::new(),
            steps: Vec::new(),
            oracle: false,
        }
    }

    pub fn oracle(mut self, yes: bool) -> Self {
        self.oracle = yes;
        self
    }

    pub fn param(&mut self, shape: Shape) -> Reg {
        assert!(shape.width >= 1);
        self.params.push(shape);
        Reg::Param((self.params.len() - 1) as u16)
    }

    pub fn local(&mut self, shape: Shape) -> Reg {
        assert!(shape.width >= 1);
        self.locals.push(shape);
        Reg::Local((self.locals.len() - 1) as u16)
    }

    pub fn shape_of(&self, reg: Reg) -> Shape {
        match reg {
            Reg::Param(i) => self.params[i as usize],
            Reg::Local(i) => self.locals[i as usize],
        }
    }

    fn check_cell(&self, c: Cell) -> Shape {
        let shape = self.shape_of(c.reg);
        assert!(
            c.index < shape.width,
            "cell index {} out of range (width {}) in `{}`",
            c.index,
            shape.width,
            self.name
        );
        shape
    }

    fn push_gate(&mut self, op: GateOp, controls: &[Control]) {
        assert!(controls.len() <= 2, "at most two controls per gate");
        let mut operands: Vec<Cell> = Vec::new();
        match op {
            GateOp::Permute { cell, perm } => {
                let shape = self.check_cell(cell);
                assert_eq!(
                    perm.radix(),
                    shape.radix,
                    "perm radix mismatch in `{}`",
                    self.name
                );
                operands.push(cell);
            }
            GateOp::Swap { a, b } => {
                let sa = self.check_cell(a);
                let sb = self.check_cell(b);
                assert_eq!(sa.radix, sb.radix, "swap radix mismatch in `{}`", self.name);
                assert_ne!(a, b, "swap needs distinct cells");
                operands.push(a);
                operands.push(b);
            }
        }
        let mut ctl: [Option<Control>; 2] = [None, None];
        for (i, c) in controls.iter().enumerate() {
            let shape = self.check_cell(c.cell);
            assert!(
                c.value < shape.radix,
                "control value {} out of radix {} in `{}`",
                c.value,
                shape.radix,
                self.name
            );
            assert!(
                !operands.contains(&c.cell),
                "control overlaps gate operand in `{}`",
                self.name
            );
            ctl[i] = Some(*c);
        }
        self.steps.push(Step::Gate(Gate { op, controls: ctl }));
    }

    /// Apply `perm` to `cell`, optionally under equality controls.
    pub fn permute(&mut self, cell: Cell, perm: Perm, controls: &[Control]) {
        self.push_gate(GateOp::Permute { cell, perm }, controls);
    }

    /// Flip a bit cell (optionally controlled).
    pub fn x(&mut self, cell: Cell, controls: &[Control]) {
        self.push_gate(
            GateOp::Permute {
                cell,
                perm: Perm::not(),
            },
            controls,
        );
    }

    /// `target ^= source` for bit cells.
    pub fn cx(&mut self, source: Cell, target: Cell) {
        self.x(
            target,
            &[Control {
                cell: source,
                value: 1,
            }],
        );
    }

    /// Toffoli: `target ^= a AND b`.
    pub fn ccx(&mut self, a: Cell, b: Cell, target: Cell) {
        self.x(
            target,
            &[
                Control { cell: a, value: 1 },
                Control { cell: b, value: 1 },
            ],
        );
    }

    pub fn swap(&mut self, a: Cell, b: Cell, controls: &[Control]) {
        self.push_gate(GateOp::Swap { a, b }, controls);
    }

    fn check_args(&self, prog: &Program, args: &[ArgSlice]) {
        assert_eq!(
            args.len(),
            prog.params.len(),
            "arg count mismatch calling `{}` from `{}`",
            prog.name,
            self.name
        );
        for (arg, shape) in args.iter().zip(prog.params.iter()) {
            let parent = self.shape_of(arg.reg);
            assert_eq!(
                parent.radix, shape.radix,
                "arg radix mismatch calling `{}` from `{}`",
                prog.name, self.name
            );
            assert!(
                arg.offset + shape.width <= parent.width,
                "arg window out of range calling `{}` from `{}`",
                prog.name,
                self.name
            );
        }
    }

    pub fn call(&mut self, prog: &Arc<Program>, args: &[ArgSlice]) {
        self.check_args(prog, args);
        self.steps.push(Step::Call {
            prog: Arc::clone(prog),
            args: args.to_vec(),
        });
    }

    pub fn uncall(&mut self, prog: &Arc<Program>, args: &[ArgSlice]) {
        self.check_args(prog, args);
        self.steps.push(Step::Uncall {
            prog: Arc::clone(prog),
            args: args.to_vec(),
        });
    }

    pub fn native_cx(
        &mut self,
        name: &'static str,
        reads: Vec<(ArgSlice, u32)>,
        target: Cell,
        func: Arc<dyn Fn(&[Vec<u8>]) -> bool + Send + Sync>,
    ) {
        let tshape = self.check_cell(target);
        assert_eq!(tshape.radix, 2, "native predicate target must be a bit");
        for (slice, len) in &reads {
            let parent = self.shape_of(slice.reg);
            assert!(slice.offset + len <= parent.width, "native read out of range");
            assert!(
                slice.reg != target.reg
                    || target.index < slice.offset
                    || target.index >= slice.offset + len,
                "native predicate must not read its own target"
            );
        }
        self.steps.push(Step::Native(NativeCx {
            name,
            reads,
            target,
            func,
        }));
    }

    pub fn finish(self) -> Arc<Program> {
        Arc::new(Program {
            name: self.name,
            params: self.params,
            locals: self.locals,
            steps: self.steps,
            oracle: self.oracle,
        })
    }
}

/// Binding of a top-level program parameter to a window of a machine register.
#[derive(Debug, Clone, Copy)]
pub struct Bind {
    pub reg: RegisterRef,
    pub offset: u32,
}

impl Bind {
    pub fn whole(reg: RegisterRef) -> Self {
        Bind { reg, offset: 0 }
    }
    pub fn at(reg: RegisterRef, offset: u32) -> Self {
        Bind { reg, offset }
    }
}

struct Slot {
    gen: u32,
    alive: bool,
    kind: RegKind,
    radix: u8,
    values: Vec<u8>,
}

/// Snapshot of all live register contents; counters are excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot(Vec<(u32, u32, Vec<u8>)>);

#[derive(Clone, Copy)]
struct Resolved {
    slot: u32,
    offset: u32,
}

pub struct Machine {
    slots: Vec<Slot>,
    free_list: Vec<u32>,
    live_ancilla_cells: u64,
    peak_live_width: u64,
    gate_count: u64,
    calculate_calls: u64,
}

impl Default for Machine {
    fn default() -> Self {
        Self::new()
    }
}

impl Machine {
    pub fn new() -> Self {
        Machine {
            slots: Vec::new(),
            free_list: Vec::new(),
            live_ancilla_cells: 0,
            peak_live_width: 0,
            gate_count: 0,
            calculate_calls: 0,
        }
    }

    pub fn gate_count(&self) -> u64 {
        self.gate_count
    }

    pub fn peak_live_width(&self) -> u64 {
        self.peak_live_width
    }

    pub fn calculate_calls(&self) -> u64 {
        self.calculate_calls
    }

    pub fn live_ancilla_cells(&self) -> u64 {
        self.live_ancilla_cells
    }

    pub fn reset_counters(&mut self) {
        self.gate_count = 0;
        self.peak_live_width = self.live_ancilla_cells;
        self.calculate_calls = 0;
    }

    pub fn alloc_register(&mut self, kind: RegKind, width: u32, radix: u8) -> RegisterRef {
        assert!(width >= 1, "register width must be at least 1");
        assert!(radix == 2 || radix == 3, "radix must be 2 or 3");
        let slot = if let Some(idx) = self.free_list.pop() {
            let s = &mut self.slots[idx as usize];
            s.alive = true;
            s.kind = kind;
            s.radix = radix;
            s.values.clear();
            s.values.resize(width as usize, 0);
            idx
        } else {
            self.slots.push(Slot {
                gen: 0,
                alive: true,
                kind,
                radix,
                values: vec![0; width as usize],
            });
            (self.slots.len() - 1) as u32
        };
        if kind == RegKind::Ancilla {
            self.live_ancilla_cells += width as u64;
            self.peak_live_width = self.peak_live_width.max(self.live_ancilla_cells);
        }
        RegisterRef {
            slot,
            gen: self.slots[slot as usize].gen,
        }
    }

    /// Zero-initialized scratch register, counted in `peak_live_width`.
    pub fn alloc_ancilla(&mut self, width: u32, radix: u8) -> RegisterRef {
        self.alloc_register(RegKind::Ancilla, width, radix)
    }

    fn slot_checked(&self, r: RegisterRef) -> Result<&Slot, RevError> {
        let s = self.slots.get(r.slot as usize).ok_or(RevError::DeadRegister)?;
        if !s.alive || s.gen != r.gen {
            return Err(RevError::DeadRegister);
        }
        Ok(s)
    }

    /// Release an ancilla. Fails if any cell is nonzero: junk left behind
    /// means some computation was not properly uncomputed.
    pub fn free_ancilla(&mut self, r: RegisterRef) -> Result<(), RevError> {
        let s = self.slot_checked(r)?;
        assert_eq!(s.kind, RegKind::Ancilla, "free_ancilla on non-ancilla register");
        if s.values.iter().any(|&v| v != 0) {
            return Err(RevError::AncillaNotClean {
                program: "<machine>".into(),
            });
        }
        let width = s.values.len() as u64;
        let slot = &mut self.slots[r.slot as usize];
        slot.alive = false;
        slot.gen = slot.gen.wrapping_add(1);
        self.live_ancilla_cells -= width;
        self.free_list.push(r.slot);
        Ok(())
    }

    pub fn read_cells(&self, r: RegisterRef) -> Result<Vec<u8>, RevError> {
        Ok(self.slot_checked(r)?.values.clone())
    }

    pub fn write_cells(&mut self, r: RegisterRef, values: &[u8]) -> Result<(), RevError> {
        let radix = {
            let s = self.slot_checked(r)?;
            if s.values.len() != values.len() {
                return Err(RevError::OutOfRange);
            }
            s.radix
        };
        for &v in values {
            if v >= radix {
                return Err(RevError::BadValue { value: v, radix });
            }
        }
        self.slots[r.slot as usize].values.copy_from_slice(values);
        Ok(())
    }

    /// Little-endian unsigned read of a bit-register window.
    pub fn read_uint(&self, r: RegisterRef, offset: u32, len: u32) -> Result<u64, RevError> {
        let s = self.slot_checked(r)?;
        if (offset + len) as usize > s.values.len() {
            return Err(RevError::OutOfRange);
        }
        let mut v: u64 = 0;
        for i in (0..len).rev() {
            v = (v << 1) | s.values[(offset + i) as usize] as u64;
        }
        Ok(v)
    }

    pub fn write_uint(&mut self, r: RegisterRef, offset: u32, len: u32, value: u64) -> Result<(), RevError> {
        {
            let s = self.slot_checked(r)?;
            if (offset + len) as usize > s.values.len() {
                return Err(RevError::OutOfRange);
            }
            if s.radix != 2 {
                return Err(RevError::RadixMismatch {
                    expected: 2,
                    found: s.radix,
                });
            }
        }
        let s = &mut self.slots[r.slot as usize];
        for i in 0..len {
            s.values[(offset + i) as usize] = ((value >> i) & 1) as u8;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut out = Vec::new();
        for (i, s) in self.slots.iter().enumerate() {
            if s.alive {
                out.push((i as u32, s.gen, s.values.clone()));
            }
        }
        Snapshot(out)
    }

    /// Execute `prog` with its parameters bound to machine register windows.
    pub fn run(&mut self, prog: &Arc<Program>, args: &[Bind]) -> Result<(), RevError> {
        let params = self.bind_args(prog, args)?;
        self.exec(prog, &params, true)
    }

    /// Execute the inverse of `prog` (without materializing it).
    pub fn run_inverse(&mut self, prog: &Arc<Program>, args: &[Bind]) -> Result<(), RevError> {
        let params = self.bind_args(prog, args)?;
        self.exec(prog, &params, false)
    }

    fn bind_args(&self, prog: &Program, args: &[Bind]) -> Result<Vec<Resolved>, RevError> {
        if args.len() != prog.params.len() {
            return Err(RevError::ShapeMismatch {
                program: prog.name.clone(),
            });
        }
        let mut out = Vec::with_capacity(args.len());
        for (bind, shape) in args.iter().zip(prog.params.iter()) {
            let s = self.slot_checked(bind.reg)?;
            if s.radix != shape.radix {
                return Err(RevError::RadixMismatch {
                    expected: shape.radix,
                    found: s.radix,
                });
            }
            if (bind.offset + shape.width) as usize > s.values.len() {
                return Err(RevError::OutOfRange);
            }
            out.push(Resolved {
                slot: bind.reg.slot,
                offset: bind.offset,
            });
        }
        Ok(out)
    }

    fn exec(&mut self, prog: &Program, params: &[Resolved], forward: bool) -> Result<(), RevError> {
        if prog.oracle {
            self.calculate_calls += 1;
        }
        // Locals are live for the whole body; this makes the dynamic ancilla
        // peak equal to the static analysis.
        let mut locals = Vec::with_capacity(prog.locals.len());
        for shape in &prog.locals {
            let r = self.alloc_ancilla(shape.width, shape.radix);
            locals.push(r);
        }
        let local_res: Vec<Resolved> = locals
            .iter()
            .map(|r| Resolved {
                slot: r.slot,
                offset: 0,
            })
            .collect();

        let result = if forward {
            let mut res = Ok(());
            for step in &prog.steps {
                res = self.exec_step(step, params, &local_res, true);
                if res.is_err() {
                    break;
                }
            }
            res
        } else {
            let mut res = Ok(());
            for step in prog.steps.iter().rev() {
                res = self.exec_step(step, params, &local_res, false);
                if res.is_err() {
                    break;
                }
            }
            res
        };
        result?;

        for r in locals {
            self.free_ancilla(r).map_err(|e| match e {
                RevError::AncillaNotClean { .. } => RevError::AncillaNotClean {
                    program: prog.name.clone(),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    #[inline]
    fn resolve(&self, cell: Cell, params: &[Resolved], locals: &[Resolved]) -> (u32, usize) {
        let base = match cell.reg {
            Reg::Param(i) => params[i as usize],
            Reg::Local(i) => locals[i as usize],
        };
        (base.slot, (base.offset + cell.index) as usize)
    }

    fn exec_step(
        &mut self,
        step: &Step,
        params: &[Resolved],
        locals: &[Resolved],
        forward: bool,
    ) -> Result<(), RevError> {
        match step {
            Step::Gate(g) => {
                let gate = if forward { *g } else { g.inverse() };
                self.exec_gate(&gate, params, locals)
            }
            Step::Call { prog, args } => {
                let child = self.resolve_call(prog, args, params, locals)?;
                self.exec(prog, &child, forward)
            }
            Step::Uncall { prog, args } => {
                let child = self.resolve_call(prog, args, params, locals)?;
                self.exec(prog, &child, !forward)
            }
            Step::Native(n) => {
                // Self-inverse; direction is irrelevant.
                let mut inputs = Vec::with_capacity(n.reads.len());
                for (slice, len) in &n.reads {
                    let base = match slice.reg {
                        Reg::Param(i) => params[i as usize],
                        Reg::Local(i) => locals[i as usize],
                    };
                    let s = &self.slots[base.slot as usize];
                    let start = (base.offset + slice.offset) as usize;
                    inputs.push(s.values[start..start + *len as usize].to_vec());
                }
                let fire = (n.func)(&inputs);
                self.gate_count += 1;
                if fire {
                    let (slot, idx) = self.resolve(n.target, params, locals);
                    let s = &mut self.slots[slot as usize];
                    s.values[idx] ^= 1;
                }
                Ok(())
            }
        }
    }

    fn resolve_call(
        &self,
        prog: &Arc<Program>,
        args: &[ArgSlice],
        params: &[Resolved],
        locals: &[Resolved],
    ) -> Result<Vec<Resolved>, RevError> {
        let mut out = Vec::with_capacity(args.len());
        for arg in args {
            let base = match arg.reg {
                Reg::Param(i) => params[i as usize],
                Reg::Local(i) => locals[i as usize],
            };
            out.push(Resolved {
                slot: base.slot,
                offset: base.offset + arg.offset,
            });
        }
        debug_assert_eq!(out.len(), prog.params.len());
        Ok(out)
    }

    fn exec_gate(&mut self, g: &Gate, params: &[Resolved], locals: &[Resolved]) -> Result<(), RevError> {
        self.gate_count += 1;
        for ctl in g.controls.iter().flatten() {
            let (slot, idx) = self.resolve(ctl.cell, params, locals);
            if self.slots[slot as usize].values[idx] != ctl.value {
                return Ok(());
            }
        }
        match g.op {
            GateOp::Permute { cell, perm } => {
                let (slot, idx) = self.resolve(cell, params, locals);
                let s = &mut self.slots[slot as usize];
                if s.radix != perm.radix() {
                    return Err(RevError::RadixMismatch {
                        expected: perm.radix(),
                        found: s.radix,
                    });
                }
                s.values[idx] = perm.apply(s.values[idx]);
            }
            GateOp::Swap { a, b } => {
                let (sa, ia) = self.resolve(a, params, locals);
                let (sb, ib) = self.resolve(b, params, locals);
                if sa == sb {
                    self.slots[sa as usize].values.swap(ia, ib);
                } else {
                    let va = self.slots[sa as usize].values[ia];
                    let vb = self.slots[sb as usize].values[ib];
                    self.slots[sa as usize].values[ia] = vb;
                    self.slots[sb as usize].values[ib] = va;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial_prog() -> Arc<Program> {
        let mut b = ProgramBuilder::new("incr-trit");
        let t = b.param(Shape::trits(1));
        b.permute(Cell::new(t, 0), Perm::add_mod(3, 1), &[]);
        b.finish()
    }

    #[test]
    fn alloc_is_zero_initialized() {
        let mut m = Machine::new();
        let r = m.alloc_ancilla(1, 2);
        assert_eq!(m.read_cells(r).unwrap(), vec![0]);
        let r3 = m.alloc_ancilla(5, 3);
        assert_eq!(m.read_cells(r3).unwrap(), vec![0; 5]);
    }

    #[test]
    fn peak_width_accounts_interleaved_frees() {
        let mut m = Machine::new();
        let a = m.alloc_ancilla(3, 2);
        assert_eq!(m.peak_live_width(), 3);
        m.free_ancilla(a).unwrap();
        let _b = m.alloc_ancilla(4, 2);
        assert_eq!(m.peak_live_width(), 4, "first freed before second: peak is 4, not 7");
        let mut m2 = Machine::new();
        let _a = m2.alloc_ancilla(3, 2);
        let _b = m2.alloc_ancilla(4, 2);
        assert_eq!(m2.peak_live_width(), 7);
    }

    #[test]
    fn free_nonzero_ancilla_rejected() {
        let mut m = Machine::new();
        let r = m.alloc_ancilla(2, 2);
        m.write_cells(r, &[0, 1]).unwrap();
        assert!(matches!(
            m.free_ancilla(r),
            Err(RevError::AncillaNotClean { .. })
        ));
    }

    #[test]
    fn empty_program_is_identity() {
        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, 2, 3);
        m.write_cells(r, &[2, 1]).unwrap();
        let p = ProgramBuilder::new("empty").finish();
        let before = m.snapshot();
        let g0 = m.gate_count();
        m.run(&p, &[]).unwrap();
        assert_eq!(m.snapshot(), before);
        assert_eq!(m.gate_count(), g0);
        let _ = r;
    }

    #[test]
    fn control_zero_blocks_gate() {
        let mut m = Machine::new();
        let c = m.alloc_register(RegKind::Input, 1, 2);
        let t = m.alloc_register(RegKind::Input, 1, 3);
        let mut b = ProgramBuilder::new("ctl-incr");
        let pc = b.param(Shape::bits(1));
        let pt = b.param(Shape::trits(1));
        b.permute(
            Cell::new(pt, 0),
            Perm::add_mod(3, 1),
            &[Control {
                cell: Cell::new(pc, 0),
                value: 1,
            }],
        );
        let p = b.finish();
        m.run(&p, &[Bind::whole(c), Bind::whole(t)]).unwrap();
        assert_eq!(m.read_cells(t).unwrap(), vec![0], "control 0 leaves target unchanged");
        m.write_cells(c, &[1]).unwrap();
        m.run(&p, &[Bind::whole(c), Bind::whole(t)]).unwrap();
        assert_eq!(m.read_cells(t).unwrap(), vec![1]);
    }

    #[test]
    fn run_then_inverse_restores_snapshot() {
        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, 4, 3);
        m.write_cells(r, &[1, 2, 0, 1]).unwrap();
        let mut b = ProgramBuilder::new("scramble");
        let pr = b.param(Shape::trits(4));
        let scratch = b.local(Shape::trits(2));
        b.permute(Cell::new(pr, 0), Perm::add_mod(3, 2), &[]);
        b.swap(Cell::new(pr, 1), Cell::new(pr, 3), &[]);
        b.permute(
            Cell::new(scratch, 0),
            Perm::add_mod(3, 1),
            &[Control {
                cell: Cell::new(pr, 0),
                value: 0,
            }],
        );
        // scratch must be restored before the frame exits
        b.permute(
            Cell::new(scratch, 0),
            Perm::add_mod(3, 2),
            &[Control {
                cell: Cell::new(pr, 0),
                value: 0,
            }],
        );
        let p = b.finish();
        let before = m.snapshot();
        m.run(&p, &[Bind::whole(r)]).unwrap();
        assert_ne!(m.snapshot(), before);
        m.run_inverse(&p, &[Bind::whole(r)]).unwrap();
        assert_eq!(m.snapshot(), before);
    }

    #[test]
    fn unclean_local_is_an_error() {
        let mut m = Machine::new();
        let mut b = ProgramBuilder::new("leaky");
        let scratch = b.local(Shape::bits(1));
        b.x(Cell::new(scratch, 0), &[]);
        let p = b.finish();
        assert!(matches!(
            m.run(&p, &[]),
            Err(RevError::AncillaNotClean { .. })
        ));
    }

    #[test]
    fn inverse_of_inverse_is_structurally_equal() {
        let sub = trivial_prog();
        let mut b = ProgramBuilder::new("outer");
        let t = b.param(Shape::trits(2));
        b.permute(Cell::new(t, 0), Perm::add_mod(3, 2), &[]);
        b.call(&sub, &[ArgSlice::whole(t)]);
        b.uncall(&sub, &[ArgSlice::at(t, 1)]);
        b.swap(Cell::new(t, 0), Cell::new(t, 1), &[]);
        let p = b.finish();
        let inv = Arc::new(p.inverse());
        let inv_inv = inv.inverse();
        assert_eq!(&inv_inv, &*p);
        // a 3-step sequence inverts to reversed, each self-inverted
        assert!(matches!(inv.steps[0], Step::Gate(_)));
        assert!(matches!(inv.steps[1], Step::Call { .. }));
        assert!(matches!(inv.steps[2], Step::Uncall { .. }));
    }

    #[test]
    fn gate_count_of_inverse_matches() {
        let sub = trivial_prog();
        let mut b = ProgramBuilder::new("outer");
        let t = b.param(Shape::trits(1));
        b.call(&sub, &[ArgSlice::whole(t)]);
        b.call(&sub, &[ArgSlice::whole(t)]);
        b.permute(Cell::new(t, 0), Perm::add_mod(3, 1), &[]);
        let p = b.finish();

        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, 1, 3);
        m.run(&p, &[Bind::whole(r)]).unwrap();
        let fwd = m.gate_count();
        m.run_inverse(&p, &[Bind::whole(r)]).unwrap();
        assert_eq!(m.gate_count(), 2 * fwd);
        assert_eq!(ProgramStats::gate_count(&p) as u64, fwd);
    }

    #[test]
    fn oracle_calls_counted_both_directions() {
        let mut ob = ProgramBuilder::new("oracle");
        let t = ob.param(Shape::bits(1));
        ob.x(Cell::new(t, 0), &[]);
        let oracle = ob.oracle(true).finish();

        let mut b = ProgramBuilder::new("wrap");
        let t = b.param(Shape::bits(1));
        b.call(&oracle, &[ArgSlice::whole(t)]);
        b.uncall(&oracle, &[ArgSlice::whole(t)]);
        let p = b.finish();

        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, 1, 2);
        m.run(&p, &[Bind::whole(r)]).unwrap();
        assert_eq!(m.calculate_calls(), 2);
        assert_eq!(ProgramStats::oracle_calls(&p), 2);
    }

    #[test]
    fn static_peak_matches_dynamic() {
        let mut inner = ProgramBuilder::new("inner");
        let t = inner.param(Shape::bits(1));
        let s = inner.local(Shape::bits(4));
        inner.cx(Cell::new(t, 0), Cell::new(s, 0));
        inner.cx(Cell::new(t, 0), Cell::new(s, 0));
        let inner = inner.finish();

        let mut outer = ProgramBuilder::new("outer");
        let t = outer.param(Shape::bits(1));
        let s2 = outer.local(Shape::trits(3));
        outer.call(&inner, &[ArgSlice::whole(t)]);
        outer.permute(Cell::new(s2, 0), Perm::add_mod(3, 1), &[]);
        outer.permute(Cell::new(s2, 0), Perm::add_mod(3, 2), &[]);
        let outer = outer.finish();

        assert_eq!(ProgramStats::peak_ancilla(&outer), 7);
        let mut m = Machine::new();
        let r = m.alloc_register(RegKind::Input, 1, 2);
        m.run(&outer, &[Bind::whole(r)]).unwrap();
        assert_eq!(m.peak_live_width(), 7);
        // deterministic under re-run
        m.run(&outer, &[Bind::whole(r)]).unwrap();
        assert_eq!(m.peak_live_width(), 7);
    }
}
