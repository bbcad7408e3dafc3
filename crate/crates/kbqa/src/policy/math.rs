//! Dense kernels for the recurrent nets. Row-major matrices over flat `f64`
//! slices. The dot product uses four fixed accumulator lanes so the compiler
//! can vectorize it without changing the summation order.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..a.len() {
        sum += a[j] * b[j];
    }
    sum
}

/// y += a * x
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// out = mat * x, mat is rows x cols row-major.
pub fn matvec(mat: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(mat.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(&mat[r * cols..(r + 1) * cols], x);
    }
}

/// out += mat * x
pub fn matvec_acc(mat: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&mat[r * cols..(r + 1) * cols], x);
    }
    debug_assert_eq!(mat.len(), rows * cols);
}

/// out += mat^T * y (out has cols elements, y has rows elements).
pub fn matvec_t_acc(mat: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(mat.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    debug_assert_eq!(out.len(), cols);
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            axpy(out, yr, &mat[r * cols..(r + 1) * cols]);
        }
    }
}

/// grad += y ⊗ x (rank-one update of a rows x cols matrix, y: rows, x: cols).
pub fn outer_acc(grad: &mut [f64], y: &[f64], x: &[f64]) {
    debug_assert_eq!(grad.len(), y.len() * x.len());
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            axpy(&mut grad[r * cols..(r + 1) * cols], yr, x);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Worst element-wise relative error between two gradient vectors, as used
/// by the finite-difference checks. The denominator is floored at 1e-5:
/// central differences at step 1e-5 carry cancellation noise around
/// `ε·|L|/2h ≈ 1e-11`, so entries smaller than the floor are compared
/// absolutely (against 1e-4 · 1e-5 = 1e-9, still ~100x above the noise).
pub fn worst_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(1e-5);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

/// In-place masked log-softmax. Entries where `mask` is false become
/// `f64::NEG_INFINITY`. At least one entry must be unmasked.
pub fn log_softmax_masked(logits: &mut [f64], mask: &[bool]) {
    debug_assert_eq!(logits.len(), mask.len());
    let mut max = f64::NEG_INFINITY;
    for (l, &m) in logits.iter().zip(mask) {
        if m && *l > max {
            max = *l;
        }
    }
    debug_assert!(max.is_finite(), "all output tokens masked");
    let mut sum = 0.0;
    for (l, &m) in logits.iter().zip(mask) {
        if m {
            sum += (*l - max).exp();
        }
    }
    let lse = max + sum.ln();
    for (l, &m) in logits.iter_mut().zip(mask) {
        *l = if m { *l - lse } else { f64::NEG_INFINITY };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.5 - 3.0).collect();
        let b: Vec<f64> = (0..13).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn matvec_and_transpose_agree() {
        let mat: Vec<f64> = (0..6).map(|i| i as f64 + 1.0).collect(); // 2x3
        let x = [1.0, 2.0, 3.0];
        let mut out = [0.0; 2];
        matvec(&mat, 2, 3, &x, &mut out);
        assert_eq!(out, [14.0, 32.0]);
        let y = [1.0, 1.0];
        let mut tout = [0.0; 3];
        matvec_t_acc(&mat, 2, 3, &y, &mut tout);
        assert_eq!(tout, [5.0, 7.0, 9.0]);
    }

    #[test]
    fn masked_log_softmax_sums_to_one() {
        let mut logits = vec![0.3, -1.0, 2.0, 0.0];
        let mask = vec![true, true, false, true];
        log_softmax_masked(&mut logits, &mask);
        let total: f64 = logits
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(l, _)| l.exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(logits[2], f64::NEG_INFINITY);
    }
}
