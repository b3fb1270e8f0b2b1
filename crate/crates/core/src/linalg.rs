//! Small dense-vector helpers. Dimensions here are tiny, so plain slices
//! are enough.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `M x` for a row-major square matrix.
pub fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// Orthonormalizes the rows of `m` in place (modified Gram-Schmidt).
/// Returns `false` if the rows are numerically dependent.
pub fn orthonormalize_rows(m: &mut [Vec<f64>]) -> bool {
    for i in 0..m.len() {
        for j in 0..i {
            let (done, rest) = m.split_at_mut(i);
            let p = dot(&rest[0], &done[j]);
            axpy(-p, &done[j], &mut rest[0]);
        }
        let n = norm(&m[i]);
        if !(n > 1e-12) {
            return false;
        }
        scale(1.0 / n, &mut m[i]);
    }
    true
}

pub fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n).map(|j| (0..n).map(|i| m[i][j]).collect()).collect()
}
