//! Exact mean return time for the BF chain restricted to a finite support,
//! by solving the 2^m-state first-passage linear system. Serves as an
//! independent oracle for the Monte Carlo runs.

use crate::error::{Error, Result};

/// Expected number of steps for the BF chain on `m = pmf.len()` bits,
/// started from the all-idle state, to first return to it. `pmf` must be a
/// strictly positive probability vector (it is normalized internally).
///
/// The chain is time-reversible with uniform stationary law on `{0,1}^m`,
/// so the answer is `2^m` for every pmf; this routine computes it without
/// using that fact, by Gaussian elimination on the hitting-time system.
pub fn mean_return_time_bf(pmf: &[f64]) -> Result<f64> {
    let m = pmf.len();
    if m == 0 || m > 10 {
        return Err(Error::domain(
            "finite-support oracle handles 1..=10 bits (the system has 2^m states)",
        ));
    }
    if pmf.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::domain(
            "finite-support oracle needs strictly positive probabilities",
        ));
    }
    let total: f64 = pmf.iter().sum();
    let probs: Vec<f64> = pmf.iter().map(|p| p / total).collect();

    let states = 1usize << m;
    let n = states - 1; // all states except ground
                        // h_x = 1 + sum_k p_k h_{x xor e_k}, h_0 = 0  =>  (I - P') h = 1
    let mut a = vec![vec![0.0f64; n]; n];
    let mut b = vec![1.0f64; n];
    for x in 1..states {
        let row = x - 1;
        a[row][row] += 1.0;
        for (k, &p) in probs.iter().enumerate() {
            let y = x ^ (1 << k);
            if y != 0 {
                a[row][y - 1] -= p;
            }
        }
    }
    solve_in_place(&mut a, &mut b)?;
    // Mean return = 1 + sum_k p_k h_{e_k}.
    let mut mean = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        mean += p * b[(1usize << k) - 1];
    }
    Ok(mean)
}

/// Gaussian elimination with partial pivoting; overwrites `a` and `b`,
/// leaving the solution in `b`.
fn solve_in_place(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < 1e-300 {
            return Err(Error::Internal("singular hitting-time system".into()));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let (pivot, rest) = a.split_at_mut(col + 1);
        let pivot_vals = &pivot[col];
        for (off, row_vals) in rest.iter_mut().enumerate() {
            let row = col + 1 + off;
            let factor = row_vals[col] / pivot_vals[col];
            if factor == 0.0 {
                continue;
            }
            for (rv, pv) in row_vals[col..n].iter_mut().zip(&pivot_vals[col..n]) {
                *rv -= factor * pv;
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut sum = b[col];
        for c in col + 1..n {
            sum -= a[col][c] * b[c];
        }
        b[col] = sum / a[col][col];
    }
    Ok(())
}
