use crate::error::{Error, Result};

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` by the
/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularTridiagonal { row: 0 });
    }
    cp[0] = if n > 1 { upper[0] / denom } else { 0.0 };
    dp[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * cp[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularTridiagonal { row: i });
        }
        cp[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}
