//! Euclidean projection onto the probability simplex and a projected-gradient
//! minimizer for convex objectives on it.

use crate::error::{Error, Result};

/// Projects `x` onto `{θ : θ ≥ 0, Σθ = 1}` by the sort-and-threshold rule.
pub fn project(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            threshold = t;
        }
    }
    x.iter().map(|&v| (v - threshold).max(0.0)).collect()
}

/// Frank–Wolfe gap `g·θ − min_j g_j`. For a convex objective with gradient
/// `g` this bounds the distance of the objective value to the minimum.
pub fn frank_wolfe_gap(point: &[f64], gradient: &[f64]) -> f64 {
    let inner: f64 = point.iter().zip(gradient).map(|(p, g)| p * g).sum();
    let min = gradient.iter().copied().fold(f64::INFINITY, f64::min);
    (inner - min).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Accept the final iterate only if the Frank–Wolfe gap is below
    /// `gap_tolerance · max(1, |g|∞)`.
    pub gap_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 20_000,
            gap_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMinimum {
    pub point: Vec<f64>,
    pub gradient: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes a convex function over the simplex given only its gradient.
///
/// Each iteration projects a Barzilai–Borwein gradient step, then searches
/// the segment towards the projection for the zero of the directional
/// derivative. Iterates stay feasible throughout, and the objective value
/// itself is never needed.
pub fn minimize<G>(mut gradient: G, start: &[f64], options: SolverOptions) -> Result<SimplexMinimum>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = start.len();
    if n == 0 {
        return Err(Error::validation("empty simplex"));
    }
    let mut x = project(start);
    let mut g = gradient(&x)?;
    let scale = |g: &[f64]| g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut step = 1.0 / scale(&g);
    let mut stalled = 0;

    for iteration in 0..options.max_iterations {
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        let target = project(&trial);
        let direction: Vec<f64> = target.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let slope0 = dot(&g, &direction);

        if !(slope0 < 0.0) || direction.iter().all(|d| d.abs() <= f64::EPSILON * 0.5) {
            return finish(x, g, iteration, options);
        }

        // Convexity makes the directional derivative increasing in t.
        let along = |t: f64, gradient: &mut G| -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let p: Vec<f64> = x.iter().zip(&direction).map(|(xi, d)| xi + t * d).collect();
            let gp = gradient(&p)?;
            let s = dot(&gp, &direction);
            Ok((p, gp, s))
        };
        let (mut p, mut gp, s1) = along(1.0, &mut gradient)?;
        if s1 > 0.0 {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let (pm, gm, sm) = along(mid, &mut gradient)?;
                if sm > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    p = pm;
                    gp = gm;
                }
                if hi - lo <= 1e-15 {
                    break;
                }
            }
            if lo == 0.0 {
                // Only reachable when the minimum along the segment is within
                // rounding of the current point.
                let (pl, gl, _) = along(hi, &mut gradient)?;
                p = pl;
                gp = gl;
            }
        }

        for v in p.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let dx: Vec<f64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = gp.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&dx, &dg);
        let ss = dot(&dx, &dx);
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (step * 10.0).min(1e12)
        };

        let moved = dx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        x = p;
        g = gp;
        if moved <= 1e-15 {
            stalled += 1;
            if stalled >= 3 {
                return finish(x, g, iteration + 1, options);
            }
        } else {
            stalled = 0;
        }
    }

    let gap = frank_wolfe_gap(&x, &g);
    Err(Error::NonConvergence {
        method: "projected gradient",
        iterations: options.max_iterations,
        residual: gap,
    })
}

fn finish(x: Vec<f64>, g: Vec<f64>, iterations: usize, options: SolverOptions) -> Result<SimplexMinimum> {
    let gap = frank_wolfe_gap(&x, &g);
    let scale = g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if gap > options.gap_tolerance * scale {
        return Err(Error::NonConvergence {
            method: "projected gradient",
            iterations,
            residual: gap,
        });
    }
    Ok(SimplexMinimum {
        point: x,
        gradient: g,
        gap,
        iterations,
    })
}
