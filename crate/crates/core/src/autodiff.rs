//! Reverse-mode differentiation on a thread-local tape.
//!
//! [`Var`] is a `Copy` handle (primal value + node index). Arithmetic on
//! variables appends nodes to the tape of the current thread; constants carry
//! no node and cost nothing. A recording session is opened by
//! [`value_and_grad`], which registers the parameters as leaves, evaluates the
//! closure, sweeps adjoints backwards and clears the tape again.
//!
//! Each node stores its incoming edges as `(parent, local partial)` pairs, so a
//! fused dot product with `n` terms is a single node with `2n` edges.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Num, One, Zero};
use thiserror::Error;

use crate::scalar::Scalar;

const CONSTANT: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TapeError {
    #[error("a recording session is already active on this thread")]
    NestedSession,
    #[error("tape exceeded {0} nodes")]
    Overflow(usize),
}

#[derive(Clone, Copy)]
struct Edge {
    parent: u32,
    partial: f64,
}

#[derive(Default)]
struct TapeInner {
    active: bool,
    // node i owns edges[ends[i-1]..ends[i]]
    ends: Vec<u32>,
    edges: Vec<Edge>,
}

impl TapeInner {
    fn push(&mut self, edges: &[Edge]) -> u32 {
        let index = self.ends.len();
        assert!(index < CONSTANT as usize, "tape node index overflow");
        self.edges.extend_from_slice(edges);
        self.ends.push(self.edges.len() as u32);
        index as u32
    }

    fn clear(&mut self) {
        self.ends.clear();
        self.edges.clear();
    }

    fn backward(&self, output: u32, leaves: usize) -> Vec<f64> {
        let mut adjoint = vec![0.0; output as usize + 1];
        adjoint[output as usize] = 1.0;
        for node in (0..=output as usize).rev() {
            let g = adjoint[node];
            if g == 0.0 {
                continue;
            }
            let start = if node == 0 { 0 } else { self.ends[node - 1] as usize };
            let end = self.ends[node] as usize;
            for e in &self.edges[start..end] {
                adjoint[e.parent as usize] += g * e.partial;
            }
        }
        adjoint.truncate(leaves);
        adjoint.resize(leaves, 0.0);
        adjoint
    }
}

thread_local! {
    static TAPE: RefCell<TapeInner> = RefCell::new(TapeInner::default());
}

/// Tape variable. Outside a recording session only constants exist.
#[derive(Clone, Copy)]
pub struct Var {
    value: f64,
    index: u32,
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            write!(f, "Var({})", self.value)
        } else {
            write!(f, "Var({} @{})", self.value, self.index)
        }
    }
}

impl Var {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            index: CONSTANT,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.index == CONSTANT
    }

    fn record(value: f64, edges: &[Edge]) -> Self {
        let index = TAPE.with(|t| t.borrow_mut().push(edges));
        Self { value, index }
    }

    #[inline]
    fn unary(self, value: f64, partial: f64) -> Self {
        if self.is_constant() {
            return Self::constant(value);
        }
        Self::record(
            value,
            &[Edge {
                parent: self.index,
                partial,
            }],
        )
    }

    #[inline]
    fn binary(a: Self, b: Self, value: f64, da: f64, db: f64) -> Self {
        match (a.is_constant(), b.is_constant()) {
            (true, true) => Self::constant(value),
            (false, true) => a.unary(value, da),
            (true, false) => b.unary(value, db),
            (false, false) => Self::record(
                value,
                &[
                    Edge {
                        parent: a.index,
                        partial: da,
                    },
                    Edge {
                        parent: b.index,
                        partial: db,
                    },
                ],
            ),
        }
    }
}

/// Loss value together with its gradient with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

struct Session;

impl Session {
    fn open() -> Result<Self, TapeError> {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            if t.active {
                return Err(TapeError::NestedSession);
            }
            t.clear();
            t.active = true;
            Ok(Session)
        })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            t.clear();
            t.active = false;
        });
    }
}

/// Evaluates `f` on tape leaves holding `params` and returns the value and
/// exact gradient of its output.
pub fn value_and_grad<E, F>(params: &[f64], f: F) -> Result<ValueGrad, E>
where
    F: FnOnce(&[Var]) -> Result<Var, E>,
    E: From<TapeError>,
{
    if params.len() >= CONSTANT as usize {
        return Err(TapeError::Overflow(params.len()).into());
    }
    let _session = Session::open()?;
    let leaves: Vec<Var> = TAPE.with(|t| {
        let mut t = t.borrow_mut();
        params
            .iter()
            .map(|&value| Var {
                value,
                index: t.push(&[]),
            })
            .collect()
    });
    let output = f(&leaves)?;
    let grad = if output.is_constant() {
        vec![0.0; params.len()]
    } else {
        TAPE.with(|t| t.borrow().backward(output.index, params.len()))
    };
    Ok(ValueGrad {
        value: output.value,
        grad,
    })
}

/// Number of nodes currently recorded on this thread's tape.
pub fn tape_len() -> usize {
    TAPE.with(|t| t.borrow().ends.len())
}

impl Scalar for Var {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }

    #[inline]
    fn value(self) -> f64 {
        self.value
    }

    #[inline]
    fn square_root(self) -> Self {
        let r = self.value.sqrt();
        // subgradient 0 at the origin keeps exact minima stationary
        let d = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.unary(r, d)
    }

    fn dot(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut value = bias.value;
        let mut edges = Vec::with_capacity(2 * weights.len() + 1);
        if !bias.is_constant() {
            edges.push(Edge {
                parent: bias.index,
                partial: 1.0,
            });
        }
        for (w, x) in weights.iter().zip(inputs) {
            value += w.value * x.value;
            if !w.is_constant() {
                edges.push(Edge {
                    parent: w.index,
                    partial: x.value,
                });
            }
            if !x.is_constant() {
                edges.push(Edge {
                    parent: x.index,
                    partial: w.value,
                });
            }
        }
        if edges.is_empty() {
            Var::constant(value)
        } else {
            Var::record(value, &edges)
        }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: Var) -> Var {
        Var::binary(self, rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: Var) -> Var {
        Var::binary(self, rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: Var) -> Var {
        Var::binary(self, rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: Var) -> Var {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        Var::binary(self, rhs, self.value / rhs.value, inv, -q * inv)
    }
}

impl Rem for Var {
    type Output = Var;
    fn rem(self, rhs: Var) -> Var {
        let k = (self.value / rhs.value).trunc();
        Var::binary(self, rhs, self.value % rhs.value, 1.0, -k)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        self.unary(-self.value, -1.0)
    }
}

macro_rules! assign_op {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr for Var {
            #[inline]
            fn $method(&mut self, rhs: Var) {
                *self = *self $op rhs;
            }
        }
    };
}

assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl Zero for Var {
    fn zero() -> Self {
        Var::constant(0.0)
    }

    fn is_zero(&self) -> bool {
        self.value == 0.0
    }
}

impl One for Var {
    fn one() -> Self {
        Var::constant(1.0)
    }
}

impl Num for Var {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Var::constant)
    }
}
