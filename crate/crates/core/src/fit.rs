//! Least-squares helpers shared by the dynamics and field-analysis code.

use crate::error::{Error, Result};

/// y = amplitude * exp(-rate * x), fitted in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Relative RMS of (y - fit) / fit over the fitted points.
    pub rel_rms: f64,
}

impl ExpFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-self.rate * x).exp()
    }
}

/// Ordinary least squares line y = a + b x; returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument("linear fit needs >= 2 paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Argument("linear fit with degenerate abscissa".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExpFit> {
    if ys.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::Argument("exponential fit needs positive samples".into()));
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (a, b) = linear_fit(xs, &logs)?;
    let fit = ExpFit {
        amplitude: a.exp(),
        rate: -b,
        rel_rms: 0.0,
    };
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = fit.eval(x);
            ((y - f) / f).powi(2)
        })
        .sum();
    Ok(ExpFit {
        rel_rms: (ss / xs.len() as f64).sqrt(),
        ..fit
    })
}

/// Solves the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting. `a` is row-major n x n.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Argument("singular least-squares system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Ok(x)
}

/// Least-squares fit of y ~ sum_k c_k f_k(x) for the given basis columns.
pub fn basis_fit(columns: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    let p = columns.len();
    let mut ata = vec![0.0; p * p];
    let mut atb = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            ata[i * p + j] = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
        }
        atb[i] = columns[i].iter().zip(ys).map(|(a, b)| a * b).sum();
    }
    solve_dense(ata, atb)
}
