use anyhow::{anyhow, bail, Result};
use nalgebra::DMatrix;
use serde::Serialize;

use ctrlforge::suite::lqr::{self, LqrSpec};

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub n: usize,
    pub m: usize,
    /// Rows of the value matrix.
    pub p: Vec<Vec<f64>>,
    /// Rows of the gain, `u = -Kx`.
    pub k: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Largest entry of the final Riccati update.
    pub residual: f64,
    /// Largest entry of `Q + A'PA - A'PB(R + B'PB)^-1 B'PA - P`.
    pub dare_residual: f64,
    pub tol: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub const MAX_ITERATIONS: usize = 1_000_000;

fn finish(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, n: usize, m: usize, tol: f64) -> Result<SolveReport> {
    let sol = lqr::solve(a, b, q, r, tol, MAX_ITERATIONS)?;
    Ok(SolveReport {
        n,
        m,
        dare_residual: lqr::dare_residual(a, b, q, r, &sol.p),
        p: rows(&sol.p),
        k: rows(&sol.k),
        iterations: sol.iterations,
        residual: sol.residual,
        tol,
    })
}

/// Riccati solution for the LQR chain with `n` masses and `m` actuators.
pub fn chain(n: usize, m: usize, tol: f64) -> Result<SolveReport> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    if m > n {
        bail!("--m ({m}) cannot exceed --n ({n})");
    }
    check_tol(tol)?;
    let s = LqrSpec::chain(n, m, lqr::TIMESTEP);
    finish(&s.a, &s.b, &s.q, &s.r, n, m, tol)
}

/// One-dimensional problem from `A,B,Q,R`.
pub fn scalar(text: &str, tol: f64) -> Result<SolveReport> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("--scalar expects A,B,Q,R: {e}"))?;
    let [a, b, q, r] = v[..] else {
        bail!("--scalar expects four numbers A,B,Q,R, got {}", v.len());
    };
    check_tol(tol)?;
    let one = |x| DMatrix::from_element(1, 1, x);
    finish(&one(a), &one(b), &one(q), &one(r), 1, 1, tol)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        bail!("--tol must be a positive number");
    }
    Ok(())
}

impl SolveReport {
    pub fn to_text(&self) -> String {
        let fmt = |name: &str, m: &[Vec<f64>]| {
            let mut s = format!("{name} =\n");
            for r in m {
                let cells: Vec<String> = r.iter().map(|x| format!("{x:>12.6}")).collect();
                s += &format!("  [{}]\n", cells.join(" "));
            }
            s
        };
        format!(
            "{}{}iterations {}, residual {:.3e} (tol {:.1e}), dare residual {:.3e}",
            fmt("P", &self.p),
            fmt("K", &self.k),
            self.iterations,
            self.residual,
            self.tol,
            self.dare_residual
        )
    }
}
