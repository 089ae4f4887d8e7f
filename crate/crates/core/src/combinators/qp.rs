//! Small convex quadratic programs over the probability simplex or the
//! nonnegative orthant, solved exactly by enumerating supports.
//!
//! For every candidate support `S` the equality-constrained problem on the
//! face spanned by `S` is solved through its KKT system; primal-feasible
//! solutions are scored and the best one wins. A convex QP always attains
//! its minimum on some face whose reduced KKT system is nonsingular, so the
//! enumeration is exact up to round-off.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Largest problem dimension accepted (2^16 supports).
pub const MAX_DIM: usize = 16;

const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpConstraint {
    /// `x ≥ 0`, `Σx = 1`.
    Simplex,
    /// `x ≥ 0` only.
    Nonnegative,
}

/// `½xᵀHx + fᵀx`.
pub fn qp_objective(h: &DMatrix<f64>, linear: &[f64], x: &[f64]) -> f64 {
    let k = x.len();
    let mut quad = 0.0;
    for i in 0..k {
        for j in 0..k {
            quad += x[i] * h[(i, j)] * x[j];
        }
    }
    0.5 * quad + linear.iter().zip(x).map(|(f, v)| f * v).sum::<f64>()
}

/// Global minimizer of `½xᵀHx + fᵀx` under `constraint`. `h` must be
/// symmetric positive semidefinite.
pub fn simplex_qp(h: &DMatrix<f64>, linear: &[f64], constraint: QpConstraint) -> Result<Vec<f64>> {
    let k = linear.len();
    if k == 0 {
        return Err(Error::EmptyInput);
    }
    if k > MAX_DIM {
        return Err(Error::ProblemTooLarge(k));
    }
    if h.nrows() != k || h.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: h.nrows() });
    }
    if h.iter().chain(linear).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quadratic program data"));
    }

    let first = match constraint {
        QpConstraint::Simplex => 1u32,
        QpConstraint::Nonnegative => 0u32,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in first..(1u32 << k) {
        let support: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let Some(x) = solve_face(h, linear, &support, constraint) else { continue };
        let value = qp_objective(h, linear, &x);
        if value.is_finite() && best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    best.map(|(_, x)| x).ok_or_else(|| Error::Solver("no feasible support found".into()))
}

fn solve_face(h: &DMatrix<f64>, linear: &[f64], support: &[usize], constraint: QpConstraint) -> Option<Vec<f64>> {
    let k = linear.len();
    let s = support.len();
    let mut x = vec![0.0; k];
    if s == 0 {
        return Some(x);
    }
    let with_sum = constraint == QpConstraint::Simplex;
    let n = if with_sum { s + 1 } else { s };
    let mut kkt = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = h[(i, j)];
        }
        rhs[a] = -linear[i];
        if with_sum {
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
        }
    }
    if with_sum {
        rhs[s] = 1.0;
    }
    let sol = kkt.lu().solve(&rhs)?;
    for (a, &i) in support.iter().enumerate() {
        let v = sol[a];
        if !v.is_finite() || v < -FEASIBILITY_TOL {
            return None;
        }
        x[i] = v.max(0.0);
    }
    if with_sum {
        let total: f64 = x.iter().sum();
        if total <= 0.0 {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= total);
    }
    Some(x)
}
