//! Fundamental diagrams on the free-phase branch.
//!
//! Densities are normalized so that the flow-maximizing density is 1; only
//! the increasing branch `[0, 1]` of each diagram is ever evaluated. Every
//! family here satisfies `q(0) = 0`, `q' > 0` and `q'' <= 0` on that branch,
//! which is what makes stationary travel times increasing and convex in the
//! carried flow.

use crate::error::{Error, Result};

/// Grid used by [`FluxModel::validate`] when the caller has no preference.
pub const DEFAULT_VALIDATION_GRID: usize = 1001;

/// Absolute density tolerance of the bracketed inversion.
pub const INVERSION_TOLERANCE: f64 = 1e-12;

/// Relative slack accepted when a flow sits exactly at capacity and rounding
/// pushes it a few ulps over.
const CAPACITY_SLACK: f64 = 1e-12;

/// A flux law `q(ρ)` on normalized densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxModel {
    /// `q(ρ) = a·ln(1 + ρ)`
    Log { a: f64 },
    /// `q(ρ) = (√(1 + c·ρ) − 1) / b`
    Sqrt { b: f64, c: f64 },
    /// `q(ρ) = v·ρ`, i.e. constant speed `v`.
    Linear { v: f64 },
}

/// Values of `q` and its first three derivatives at one density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxDerivatives {
    pub q: f64,
    pub dq: f64,
    pub d2q: f64,
    pub d3q: f64,
}

/// One failed (or warned) condition found by [`FluxModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub density: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxValidationReport {
    /// `true` iff `violations` is empty.
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Samples where `q''' > 0`. The third-derivative sign is only a
    /// sufficient condition for convex travel times, so it never fails the
    /// report.
    pub warnings: Vec<Violation>,
    pub grid_points: usize,
}

fn check_density(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "density",
            value: rho,
            range: "[0, 1]".into(),
        })
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            range: "(0, inf)".into(),
        })
    }
}

impl FluxModel {
    pub fn log(a: f64) -> Result<Self> {
        Ok(FluxModel::Log {
            a: positive("log flux scale", a)?,
        })
    }

    pub fn sqrt(b: f64, c: f64) -> Result<Self> {
        Ok(FluxModel::Sqrt {
            b: positive("sqrt flux divisor", b)?,
            c: positive("sqrt flux slope", c)?,
        })
    }

    pub fn linear(v: f64) -> Result<Self> {
        Ok(FluxModel::Linear {
            v: positive("linear flux speed", v)?,
        })
    }

    /// Re-checks the parameter constraints, for values built directly from
    /// the enum variants.
    pub fn check_parameters(&self) -> Result<()> {
        match *self {
            FluxModel::Log { a } => Self::log(a).map(drop),
            FluxModel::Sqrt { b, c } => Self::sqrt(b, c).map(drop),
            FluxModel::Linear { v } => Self::linear(v).map(drop),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            FluxModel::Log { .. } => "log",
            FluxModel::Sqrt { .. } => "sqrt",
            FluxModel::Linear { .. } => "linear",
        }
    }

    /// `q(ρ)` for `ρ ∈ [0, 1]`.
    pub fn evaluate(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.q(rho))
    }

    fn q(&self, rho: f64) -> f64 {
        match *self {
            FluxModel::Log { a } => a * rho.ln_1p(),
            // (√(1+cρ) − 1)/b written without the cancellation near 0.
            FluxModel::Sqrt { b, c } => c * rho / (b * (1.0 + (1.0 + c * rho).sqrt())),
            FluxModel::Linear { v } => v * rho,
        }
    }

    /// Exact derivatives of the family at `ρ`.
    pub fn derivatives(&self, rho: f64) -> Result<FluxDerivatives> {
        check_density(rho)?;
        let q = self.q(rho);
        Ok(match *self {
            FluxModel::Log { a } => {
                let s = 1.0 + rho;
                FluxDerivatives {
                    q,
                    dq: a / s,
                    d2q: -a / (s * s),
                    d3q: 2.0 * a / (s * s * s),
                }
            }
            FluxModel::Sqrt { b, c } => {
                let s = (1.0 + c * rho).sqrt();
                FluxDerivatives {
                    q,
                    dq: c / (2.0 * b * s),
                    d2q: -c * c / (4.0 * b * s.powi(3)),
                    d3q: 3.0 * c.powi(3) / (8.0 * b * s.powi(5)),
                }
            }
            FluxModel::Linear { v } => FluxDerivatives {
                q,
                dq: v,
                d2q: 0.0,
                d3q: 0.0,
            },
        })
    }

    /// Free-phase capacity `q(1)`.
    pub fn capacity(&self) -> f64 {
        self.q(1.0)
    }

    /// Speed `v(ρ) = q(ρ)/ρ`, extended by `q'(0)` at the origin.
    pub fn velocity(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(match *self {
            FluxModel::Log { a } => {
                if rho == 0.0 {
                    a
                } else {
                    a * rho.ln_1p() / rho
                }
            }
            FluxModel::Sqrt { b, c } => c / (b * (1.0 + (1.0 + c * rho).sqrt())),
            FluxModel::Linear { v } => v,
        })
    }

    fn check_flow(&self, flow: f64) -> Result<f64> {
        let capacity = self.capacity();
        if !flow.is_finite() || flow < 0.0 || flow > capacity * (1.0 + CAPACITY_SLACK) {
            return Err(Error::CapacityExceeded {
                road: None,
                flow,
                capacity,
            });
        }
        Ok(flow.min(capacity))
    }

    /// The density carrying `flow`, from the closed-form inverse of the
    /// family. `flow` must lie in `[0, q(1)]`.
    pub fn invert_flow(&self, flow: f64) -> Result<f64> {
        let flow = self.check_flow(flow)?;
        if flow == 0.0 {
            return Ok(0.0);
        }
        let rho = match *self {
            FluxModel::Log { a } => (flow / a).exp_m1(),
            FluxModel::Sqrt { b, c } => b * flow * (2.0 + b * flow) / c,
            FluxModel::Linear { v } => flow / v,
        };
        Ok(rho.clamp(0.0, 1.0))
    }

    /// Inverts `q` by safeguarded Newton iteration inside a shrinking
    /// bisection bracket on `[0, 1]`. Only uses `q` and `q'`, so it works
    /// for any family and serves as the reference for [`invert_flow`].
    ///
    /// [`invert_flow`]: FluxModel::invert_flow
    pub fn invert_flow_bracketed(&self, flow: f64) -> Result<f64> {
        let flow = self.check_flow(flow)?;
        if flow == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut rho = 0.5;
        for _ in 0..200 {
            let d = self.derivatives(rho)?;
            let residual = d.q - flow;
            if residual > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let newton = rho - residual / d.dq;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - rho).abs() <= INVERSION_TOLERANCE || hi - lo <= INVERSION_TOLERANCE {
                return Ok(next);
            }
            rho = next;
        }
        Err(Error::NonConvergence {
            method: "flux inversion",
            iterations: 200,
            residual: hi - lo,
        })
    }

    /// `1 / v(ρ(flow))`: time per unit length at the given carried flow.
    pub fn inverse_speed(&self, flow: f64) -> Result<f64> {
        let rho = self.invert_flow(flow)?;
        Ok(1.0 / self.velocity(rho)?)
    }

    /// Derivative of [`inverse_speed`] with respect to the carried flow.
    ///
    /// [`inverse_speed`]: FluxModel::inverse_speed
    pub fn inverse_speed_slope(&self, flow: f64) -> Result<f64> {
        let flow = self.check_flow(flow)?;
        Ok(match *self {
            FluxModel::Linear { .. } => 0.0,
            // 1/v = b(2 + b·f)/c is affine in the flow.
            FluxModel::Sqrt { b, c } => b * b / c,
            // 1/v = (eˣ − 1)/(a·x) with x = f/a.
            FluxModel::Log { a } => {
                let x = flow / a;
                let g = if x.abs() < 1e-3 {
                    0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x * (1.0 / 30.0 + x / 144.0)))
                } else {
                    (x * x.exp() - x.exp_m1()) / (x * x)
                };
                g / (a * a)
            }
        })
    }

    /// Samples assumption (q) on a uniform grid with exact derivatives.
    pub fn validate(&self, grid_points: usize) -> FluxValidationReport {
        let grid_points = grid_points.max(2);
        let mut violations = Vec::new();
        let mut warnings = Vec::new();

        if let Err(e) = self.check_parameters() {
            let value = match e {
                Error::Domain { value, .. } => value,
                _ => f64::NAN,
            };
            violations.push(Violation {
                condition: "parameters finite and > 0",
                density: 0.0,
                value,
            });
            return FluxValidationReport {
                passed: false,
                violations,
                warnings,
                grid_points,
            };
        }

        let q0 = self.q(0.0);
        if q0 != 0.0 {
            violations.push(Violation {
                condition: "q(0) = 0",
                density: 0.0,
                value: q0,
            });
        }
        let step = 1.0 / (grid_points - 1) as f64;
        for k in 0..grid_points {
            let rho = (k as f64 * step).min(1.0);
            let d = match self.derivatives(rho) {
                Ok(d) => d,
                Err(_) => continue,
            };
            if !(d.dq > 0.0) {
                violations.push(Violation {
                    condition: "q' > 0",
                    density: rho,
                    value: d.dq,
                });
            }
            if !(d.d2q <= 0.0) {
                violations.push(Violation {
                    condition: "q'' <= 0",
                    density: rho,
                    value: d.d2q,
                });
            }
            if !(d.d3q <= 0.0) {
                warnings.push(Violation {
                    condition: "q''' <= 0",
                    density: rho,
                    value: d.d3q,
                });
            }
        }
        if !(self.capacity() > 0.0) {
            violations.push(Violation {
                condition: "q(1) > 0",
                density: 1.0,
                value: self.capacity(),
            });
        }

        FluxValidationReport {
            passed: violations.is_empty(),
            violations,
            warnings,
            grid_points,
        }
    }
}

/// Stationary travel time over a road of `length` carrying `flow`.
pub fn road_travel_time(length: f64, model: &FluxModel, flow: f64) -> Result<f64> {
    positive("road length", length)?;
    let rho = model.invert_flow(flow)?;
    Ok(length / model.velocity(rho)?)
}
