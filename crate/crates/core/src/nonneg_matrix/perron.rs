use crate::config::AnalysisConfig;
use crate::error::{Error, Result};

pub(crate) struct Perron {
    pub radius: f64,
    /// Positive, max entry 1.
    pub vector: Vec<f64>,
}

/// Perron root and vector of an irreducible `m x m` block stored row-major.
///
/// Shifted power iteration on `A + sI` with `s` the largest row sum, stopped
/// when the Collatz-Wielandt bracket `[min (Ax)_i/x_i, max (Ax)_i/x_i]` is
/// narrower than `eps_rho / 10`. With `transpose` the left vector is computed.
pub(crate) fn perron(block: &[f64], m: usize, transpose: bool, cfg: &AnalysisConfig) -> Result<Perron> {
    debug_assert_eq!(block.len(), m * m);
    if m == 1 {
        return Ok(Perron { radius: block[0], vector: vec![1.0] });
    }
    let at = |i: usize, j: usize| if transpose { block[j * m + i] } else { block[i * m + j] };
    let shift = (0..m)
        .map(|i| (0..m).map(|j| at(i, j)).sum::<f64>())
        .fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(Perron { radius: 0.0, vector: vec![1.0; m] });
    }
    let target = cfg.tol.eps_rho / 10.0;
    let mut x = vec![1.0; m];
    let mut y = vec![0.0; m];
    for _ in 0..cfg.caps.iterations {
        for i in 0..m {
            y[i] = (0..m).map(|j| at(i, j) * x[j]).sum();
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..m {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= target * hi.max(1.0) {
            let top = x.iter().cloned().fold(0.0, f64::max);
            return Ok(Perron {
                radius: 0.5 * (lo + hi),
                vector: x.iter().map(|v| v / top).collect(),
            });
        }
        let mut top = 0.0f64;
        for i in 0..m {
            x[i] = y[i] + shift * x[i];
            top = top.max(x[i]);
        }
        for v in x.iter_mut() {
            *v /= top;
        }
    }
    Err(Error::NotConverged { what: "perron power iteration", iterations: cfg.caps.iterations })
}
