//! Fermionic operators on the occupation basis of at most 20 modes.
//!
//! Basis state `s` is a bitmask; mode `i` is bit `i`. Creation and
//! annihilation pick up the Jordan–Wigner sign `(−1)^{#occupied modes
//! below i}`.

use crate::error::{Error, Result};

/// Default mode budget (`2^16` basis states).
pub const MODE_BUDGET: usize = 16;
/// Opt-in ceiling.
pub const MODE_BUDGET_MAX: usize = 20;

/// One ladder operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub mode: u8,
    pub dagger: bool,
}

pub fn create(mode: usize) -> Ladder {
    Ladder { mode: mode as u8, dagger: true }
}

pub fn annihilate(mode: usize) -> Ladder {
    Ladder { mode: mode as u8, dagger: false }
}

/// Apply one ladder operator to a basis state.
pub fn apply_ladder(op: Ladder, s: u32) -> Option<(u32, i32)> {
    let bit = 1u32 << op.mode;
    let occupied = s & bit != 0;
    if occupied == op.dagger {
        return None;
    }
    let sign = if (s & (bit - 1)).count_ones() % 2 == 0 { 1 } else { -1 };
    Some((s ^ bit, sign))
}

/// Apply a product of ladder operators; the rightmost acts first.
pub fn apply_word(word: &[Ladder], s: u32) -> Option<(u32, i32)> {
    let mut state = s;
    let mut sign = 1;
    for &op in word.iter().rev() {
        let (t, sg) = apply_ladder(op, state)?;
        state = t;
        sign *= sg;
    }
    Some((state, sign))
}

/// Linear combination of ladder words.
#[derive(Clone, Debug, Default)]
pub struct OpSum {
    pub terms: Vec<(f64, Vec<Ladder>)>,
}

impl OpSum {
    pub fn zero() -> Self {
        OpSum { terms: Vec::new() }
    }

    pub fn word(coeff: f64, word: Vec<Ladder>) -> Self {
        OpSum { terms: vec![(coeff, word)] }
    }

    pub fn identity() -> Self {
        Self::word(1.0, Vec::new())
    }

    pub fn number(mode: usize) -> Self {
        Self::word(1.0, vec![create(mode), annihilate(mode)])
    }

    pub fn scale(mut self, c: f64) -> Self {
        for t in &mut self.terms {
            t.0 *= c;
        }
        self
    }

    pub fn add(mut self, other: &OpSum) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn sub(self, other: &OpSum) -> Self {
        self.add(&other.clone().scale(-1.0))
    }

    pub fn mul(&self, other: &OpSum) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, wa) in &self.terms {
            for (b, wb) in &other.terms {
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                terms.push((a * b, w));
            }
        }
        OpSum { terms }
    }

    /// Hermitian adjoint (coefficients are real).
    pub fn adjoint(&self) -> Self {
        OpSum {
            terms: self
                .terms
                .iter()
                .map(|(c, w)| (*c, w.iter().rev().map(|l| Ladder { mode: l.mode, dagger: !l.dagger }).collect()))
                .collect(),
        }
    }

    pub fn commutator(&self, other: &OpSum) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn anticommutator(&self, other: &OpSum) -> Self {
        self.mul(other).add(&other.mul(self))
    }
}

/// Sparse matrix stored by columns.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub dim: usize,
    pub cols: Vec<Vec<(u32, f64)>>,
}

impl SparseMatrix {
    /// Matrix of `op` on `n_modes` modes. Coefficients are summed in the
    /// order given, so integer-valued sums stay exact.
    pub fn from_ops(op: &OpSum, n_modes: usize) -> Self {
        let dim = 1usize << n_modes;
        let mut cols = Vec::with_capacity(dim);
        let mut buf: Vec<(u32, f64)> = Vec::new();
        for s in 0..dim as u32 {
            buf.clear();
            for (c, w) in &op.terms {
                if let Some((t, sign)) = apply_word(w, s) {
                    buf.push((t, c * sign as f64));
                }
            }
            buf.sort_by_key(|e| e.0);
            let mut col: Vec<(u32, f64)> = Vec::new();
            for &(t, v) in &buf {
                match col.last_mut() {
                    Some(last) if last.0 == t => last.1 += v,
                    _ => col.push((t, v)),
                }
            }
            col.retain(|e| e.1 != 0.0);
            cols.push(col);
        }
        SparseMatrix { dim, cols }
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.cols.iter().enumerate().flat_map(|(c, col)| col.iter().map(move |&(r, v)| (r, c as u32, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (c, col) in self.cols.iter().enumerate() {
            let xc = x[c];
            if xc != 0.0 {
                for &(r, v) in col {
                    y[r as usize] += v * xc;
                }
            }
        }
        y
    }

    pub fn column_norm(&self, c: usize) -> f64 {
        self.cols[c].iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries().map(|e| e.2 * e.2).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().map(|e| e.2.abs()).fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_1(&self) -> f64 {
        self.cols.iter().map(|c| c.iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `⟨x, A x⟩`.
    pub fn expectation(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, col) in self.cols.iter().enumerate() {
            if x[c] != 0.0 {
                for &(r, v) in col {
                    s += x[r as usize] * v * x[c];
                }
            }
        }
        s
    }

    /// `e^{A} x` by a Taylor series after splitting `A` into small steps.
    pub fn expm_apply(&self, x: &[f64]) -> Vec<f64> {
        let steps = self.norm_1().ceil().max(1.0) as usize;
        let h = 1.0 / steps as f64;
        let mut v = x.to_vec();
        for _ in 0..steps {
            let mut term = v.clone();
            let mut acc = v.clone();
            for j in 1..60 {
                term = self.matvec(&term);
                let f = h / j as f64;
                let mut size = 0.0f64;
                for (a, t) in acc.iter_mut().zip(term.iter_mut()) {
                    *t *= f;
                    *a += *t;
                    size = size.max(t.abs());
                }
                if size < 1e-18 {
                    break;
                }
            }
            v = acc;
        }
        v
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn check_modes(n: usize, allow_large: bool) -> Result<()> {
    let cap = if allow_large { MODE_BUDGET_MAX } else { MODE_BUDGET };
    if n > cap {
        return Err(Error::Resource(format!("{n} modes exceed the sandbox budget of {cap}")));
    }
    Ok(())
}
