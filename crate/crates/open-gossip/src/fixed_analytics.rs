//! Exact moment dynamics for the fixed-size system (gossip + replacement).
//!
//! With X(t) = (E squared mean, E mean of squares), size n ≥ 2, per-agent
//! rates λ_g (gossip) and λ_r (replacement), the first two moments obey the
//! linear ODE dX/dt = M·X + c with
//!
//! ```text
//!   M = [ −2λ_r        λ_r/n       ]       c = ( λ_r σ²/n )
//!       [  λ_g       −(λ_g + λ_r)  ]           ( λ_r σ²   )
//! ```
//!
//! which is the generator assembled from the one-step maps:
//! M = n λ_g (A_gossip − I) + n λ_r (A_repl − I), c = n λ_r b_repl.
//!
//! For λ_r > 0 the unique fixed point is
//!
//! ```text
//!   squared mean*    = (2 + ρ)σ² / (2n(1 + ρ) − ρ)        ρ = λ_g/λ_r
//!   mean of squares* = (2n + ρ)σ² / (2n(1 + ρ) − ρ)
//!   variance*        = (1 − 1/n)σ² / (1 + ρ(1 − 1/(2n)))
//! ```
//!
//! The eigenvalues of M are real for all admissible rates:
//! r = (−(λ_g + 3λ_r) ± √Δ)/2 with Δ = (λ_g − λ_r)² + 4λ_gλ_r/n ≥ 0. As
//! n → ∞ one eigenvalue tends to −(λ_g + λ_r) (mixing) and the other to
//! −2λ_r (mean renewal); the branches swap roles at λ_g = λ_r.
//!
//! Two scalar envelopes bound the expected variance V(t):
//!
//! ```text
//!   random replacement:  dV/dt ≤ −(λ_g + λ_r + λ_r/n)·V + (n² − 1)/n²·λ_r σ²
//!   any policy:          dV/dt ≤ −λ_g·V + λ_r σ²
//! ```
//!
//! both solved in closed form here. The second one is policy-free: it holds
//! even when departures are chosen adversarially, at the cost of a weaker
//! stationary level σ²/ρ.

use crate::error::GossipError;
use crate::events::{moment_map, DeparturePolicy, EventKind};
use crate::model::RatesConfig;
use crate::numerics::Rk4;

/// The affine system dX/dt = M·X + c on descriptor pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineSystem2 {
    pub m: [[f64; 2]; 2],
    pub c: [f64; 2],
}

impl AffineSystem2 {
    /// M·x + c.
    pub fn deriv(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1] + self.c[0],
            self.m[1][0] * x[0] + self.m[1][1] * x[1] + self.c[1],
        ]
    }

    fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Magnitude scale of the entries, for relative tolerances.
    fn scale(&self) -> f64 {
        let mut s = 0.0f64;
        for row in self.m {
            for v in row {
                s = s.max(v.abs());
            }
        }
        s
    }
}

fn validate_fixed(n: u32, rates: &RatesConfig) -> Result<(), GossipError> {
    rates.validate()?;
    if n < 2 {
        return Err(GossipError::DomainTooSmall {
            what: "fixed-size moment dynamics",
            min: 2,
            n,
        });
    }
    Ok(())
}

/// Builds the fixed-size moment ODE directly from the closed form above.
pub fn build_fixed_size_ode(n: u32, rates: &RatesConfig) -> Result<AffineSystem2, GossipError> {
    validate_fixed(n, rates)?;
    let nf = n as f64;
    let (lg, lr, s2) = (rates.lambda_g, rates.lambda_r, rates.sigma2);
    Ok(AffineSystem2 {
        m: [[-2.0 * lr, lr / nf], [lg, -(lg + lr)]],
        c: [lr * s2 / nf, lr * s2],
    })
}

/// Assembles the same generator from the one-step moment maps,
/// M = n λ_g (A_gossip − I) + n λ_r (A_repl − I), c = n λ_r b_repl.
/// Exists as an independent construction to cross-check
/// [`build_fixed_size_ode`]; the two agree to rounding.
pub fn assemble_fixed_size_ode(
    n: u32,
    rates: &RatesConfig,
) -> Result<AffineSystem2, GossipError> {
    validate_fixed(n, rates)?;
    let nf = n as f64;
    let g = moment_map(EventKind::Gossip, n, rates.sigma2)?;
    let r = moment_map(
        EventKind::Replacement(DeparturePolicy::Random),
        n,
        rates.sigma2,
    )?;
    let mut m = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let eye = if i == j { 1.0 } else { 0.0 };
            m[i][j] = nf * rates.lambda_g * (g.a[i][j] - eye)
                + nf * rates.lambda_r * (r.a[i][j] - eye);
        }
    }
    let c = [nf * rates.lambda_r * r.b[0], nf * rates.lambda_r * r.b[1]];
    Ok(AffineSystem2 { m, c })
}

/// Eigenvector of the 2×2 matrix `m` for eigenvalue `r`, scaled so the
/// larger-magnitude orientation is kept; second component normalized to 1
/// when possible.
fn eigenvector(m: [[f64; 2]; 2], r: f64) -> [f64; 2] {
    // Both rows of (M − rI) are parallel to the left null space; take the
    // candidate with the larger norm for stability.
    let a = [m[0][1], r - m[0][0]];
    let b = [r - m[1][1], m[1][0]];
    let pick = if a[0] * a[0] + a[1] * a[1] >= b[0] * b[0] + b[1] * b[1] {
        a
    } else {
        b
    };
    let norm = (pick[0] * pick[0] + pick[1] * pick[1]).sqrt();
    if norm == 0.0 {
        return [1.0, 0.0];
    }
    if pick[1].abs() > 1e-12 * norm {
        [pick[0] / pick[1], 1.0]
    } else {
        [pick[0] / pick[0].abs(), 0.0]
    }
}

/// Closed-form solution path; `None` when the spectrum is unusable
/// (complex, nearly repeated, or singular M with inconsistent offset).
fn solve_closed_form(
    sys: &AffineSystem2,
    x0: [f64; 2],
    grid: &[f64],
) -> Option<Vec<[f64; 2]>> {
    let scale = sys.scale();
    if scale == 0.0 {
        // M = 0: X(t) = x0 + c·t.
        return Some(
            grid.iter()
                .map(|&t| [x0[0] + sys.c[0] * t, x0[1] + sys.c[1] * t])
                .collect(),
        );
    }
    let tr = sys.trace();
    let det = sys.det();
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let r1 = 0.5 * (tr + sq);
    let r2 = 0.5 * (tr - sq);
    if (r1 - r2).abs() <= 1e-9 * scale {
        return None;
    }
    // Particular solution M·x* = −c; for singular M that requires c = 0,
    // in which case x* = 0 works.
    let xstar = if det.abs() > 1e-14 * scale * scale {
        [
            (-sys.c[0] * sys.m[1][1] + sys.c[1] * sys.m[0][1]) / det,
            (-sys.c[1] * sys.m[0][0] + sys.c[0] * sys.m[1][0]) / det,
        ]
    } else if sys.c[0].abs().max(sys.c[1].abs()) <= 1e-14 * scale {
        [0.0, 0.0]
    } else {
        return None;
    };
    let v1 = eigenvector(sys.m, r1);
    let v2 = eigenvector(sys.m, r2);
    let detv = v1[0] * v2[1] - v2[0] * v1[1];
    if detv.abs() < 1e-12 {
        return None;
    }
    let y0 = [x0[0] - xstar[0], x0[1] - xstar[1]];
    let alpha = (y0[0] * v2[1] - v2[0] * y0[1]) / detv;
    let beta = (v1[0] * y0[1] - y0[0] * v1[1]) / detv;
    Some(
        grid.iter()
            .map(|&t| {
                let e1 = (r1 * t).exp();
                let e2 = (r2 * t).exp();
                [
                    xstar[0] + alpha * e1 * v1[0] + beta * e2 * v2[0],
                    xstar[1] + alpha * e1 * v1[1] + beta * e2 * v2[1],
                ]
            })
            .collect(),
    )
}

/// Fixed-step RK4 fallback; step chosen so the local dimensionless step
/// `h·‖M‖` is 0.01, giving relative errors around 1e-10.
pub(crate) fn solve_affine_rk4(sys: &AffineSystem2, x0: [f64; 2], grid: &[f64]) -> Vec<[f64; 2]> {
    let h_max = 0.01 / sys.scale().max(1e-12);
    let f = |y: &[f64], dy: &mut [f64]| {
        let d = sys.deriv([y[0], y[1]]);
        dy[0] = d[0];
        dy[1] = d[1];
    };
    let mut ws = Rk4::new(2);
    let mut y = vec![x0[0], x0[1]];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &tg in grid {
        ws.integrate(&f, &mut y, t, tg, h_max);
        t = tg;
        out.push([y[0], y[1]]);
    }
    out
}

/// Solves dX/dt = M·X + c from X(0) = `x0` at the given times (increasing,
/// starting at or after 0). Uses the closed-form eigendecomposition; falls
/// back to fixed-step RK4 when the spectrum is repeated or unusable (e.g.
/// λ_r = 0, where M is singular).
pub fn solve_ode(sys: &AffineSystem2, x0: [f64; 2], grid: &[f64]) -> Vec<[f64; 2]> {
    solve_closed_form(sys, x0, grid).unwrap_or_else(|| solve_affine_rk4(sys, x0, grid))
}

/// Stationary descriptors (squared mean*, mean of squares*, variance*) of
/// the fixed-size system. Requires λ_r > 0; with λ_r = 0 the squared mean
/// is conserved and no isolated fixed point exists.
pub fn fixed_point(n: u32, rates: &RatesConfig) -> Result<(f64, f64, f64), GossipError> {
    validate_fixed(n, rates)?;
    if rates.lambda_r <= 0.0 {
        return Err(GossipError::ClosedSystem(
            "λ_r = 0: the squared mean is conserved, so no isolated fixed point exists".into(),
        ));
    }
    let nf = n as f64;
    let rho = rates.lambda_g / rates.lambda_r;
    let s2 = rates.sigma2;
    let denom = 2.0 * nf * (1.0 + rho) - rho;
    let sq = (2.0 + rho) * s2 / denom;
    let mos = (2.0 * nf + rho) * s2 / denom;
    let var = mos - sq;
    // Consistency guard: the fixed point must satisfy M·X* + c = 0.
    let sys = build_fixed_size_ode(n, rates)?;
    let resid = sys.deriv([sq, mos]);
    let tol = 1e-10 * sys.scale().max(1.0) * s2.max(1.0);
    if resid[0].abs() > tol || resid[1].abs() > tol {
        return Err(GossipError::Numerical(format!(
            "fixed-point residual {resid:?} exceeds tolerance {tol}"
        )));
    }
    Ok((sq, mos, var))
}

/// Spectral data of the moment generator M.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralReport {
    /// Mixing eigenvalue; tends to −(λ_g + λ_r) as n → ∞.
    pub r1: f64,
    /// Mean-renewal eigenvalue; tends to −2λ_r as n → ∞, and equals 0
    /// exactly when λ_r = 0 (conserved mean).
    pub r2: f64,
    pub v1: [f64; 2],
    pub v2: [f64; 2],
    pub r1_asymptote: f64,
    pub r2_asymptote: f64,
    /// True only in the fully degenerate case λ_g = λ_r = 0 (repeated
    /// eigenvalue 0; M = 0 is trivially diagonalizable but has no
    /// distinguished eigenbasis).
    pub defective: bool,
}

/// Eigenvalues and eigenvectors of M in closed form:
/// r = (−(λ_g + 3λ_r) ± √Δ)/2, Δ = (λ_g − λ_r)² + 4λ_gλ_r/n ≥ 0, with the
/// branch carrying r1 → −(λ_g + λ_r) selected by the sign of λ_g − λ_r.
/// For λ_g > 0 the eigenvector of r is ((λ_g + λ_r + r)/λ_g, 1).
pub fn spectrum(n: u32, rates: &RatesConfig) -> Result<SpectralReport, GossipError> {
    validate_fixed(n, rates)?;
    let nf = n as f64;
    let (lg, lr) = (rates.lambda_g, rates.lambda_r);
    let r1_asymptote = -(lg + lr);
    let r2_asymptote = -2.0 * lr;
    if lr == 0.0 {
        // Singular M: the conserved squared mean contributes r2 = 0 exactly.
        if lg == 0.0 {
            return Ok(SpectralReport {
                r1: 0.0,
                r2: 0.0,
                v1: [1.0, 0.0],
                v2: [1.0, 0.0],
                r1_asymptote,
                r2_asymptote,
                defective: true,
            });
        }
        return Ok(SpectralReport {
            r1: -lg,
            r2: 0.0,
            v1: [0.0, 1.0],
            v2: [1.0, 1.0],
            r1_asymptote,
            r2_asymptote,
            defective: false,
        });
    }
    let delta = (lg - lr) * (lg - lr) + 4.0 * lg * lr / nf;
    let sq = delta.sqrt();
    let base = -(lg + 3.0 * lr);
    // The √Δ branch that converges to −(λ_g + λ_r) flips at λ_g = λ_r.
    let (r1, r2) = if lg >= lr {
        (0.5 * (base - sq), 0.5 * (base + sq))
    } else {
        (0.5 * (base + sq), 0.5 * (base - sq))
    };
    let vec_of = |r: f64| -> [f64; 2] {
        if lg > 0.0 {
            [(lg + lr + r) / lg, 1.0]
        } else {
            let m = [[-2.0 * lr, lr / nf], [0.0, -(lg + lr)]];
            eigenvector(m, r)
        }
    };
    Ok(SpectralReport {
        r1,
        r2,
        v1: vec_of(r1),
        v2: vec_of(r2),
        r1_asymptote,
        r2_asymptote,
        defective: false,
    })
}

/// A scalar variance envelope V(t) on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceEnvelope {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Stationary level, when one exists.
    pub stationary: Option<f64>,
    /// True when the bound grows without limit (adversarial bound with
    /// λ_g = 0 and λ_r > 0).
    pub unbounded: bool,
}

fn validate_envelope_inputs(v0: f64, grid: &[f64]) -> Result<(), GossipError> {
    if !(v0.is_finite() && v0 >= 0.0) {
        return Err(GossipError::Config(format!(
            "initial variance must be finite and >= 0, got {v0}"
        )));
    }
    for (i, &t) in grid.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) {
            return Err(GossipError::Config(format!("grid[{i}] = {t} invalid")));
        }
        if i > 0 && t <= grid[i - 1] {
            return Err(GossipError::Config(
                "grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Variance envelope under *random* replacement:
/// dV/dt = −(λ_g + λ_r + λ_r/n)·V + (n² − 1)/n²·λ_r σ², solved exactly.
/// An upper bound on the true expected variance, tight up to the
/// concavity gap of the variance in the descriptors.
pub fn variance_bound_ode_random(
    n: u32,
    rates: &RatesConfig,
    v0: f64,
    grid: &[f64],
) -> Result<VarianceEnvelope, GossipError> {
    validate_fixed(n, rates)?;
    validate_envelope_inputs(v0, grid)?;
    let nf = n as f64;
    let a = rates.lambda_g + rates.lambda_r + rates.lambda_r / nf;
    let s = (nf * nf - 1.0) / (nf * nf) * rates.lambda_r * rates.sigma2;
    let (values, stationary) = if a > 0.0 {
        let vinf = s / a;
        (
            grid.iter()
                .map(|&t| vinf + (v0 - vinf) * (-a * t).exp())
                .collect(),
            Some(vinf),
        )
    } else {
        // λ_g = λ_r = 0: nothing happens.
        (grid.iter().map(|_| v0).collect(), Some(v0))
    };
    Ok(VarianceEnvelope {
        times: grid.to_vec(),
        values,
        stationary,
        unbounded: false,
    })
}

/// Variance envelope under *any* departure policy (worst case):
/// dV/dt = −λ_g·V + λ_r σ², solved exactly. Stationary level σ²/ρ for
/// λ_g > 0; for λ_g = 0 and λ_r > 0 the bound grows linearly and is
/// flagged `unbounded`.
pub fn variance_bound_adversarial(
    rates: &RatesConfig,
    v0: f64,
    grid: &[f64],
) -> Result<VarianceEnvelope, GossipError> {
    rates.validate()?;
    validate_envelope_inputs(v0, grid)?;
    let (lg, lr, s2) = (rates.lambda_g, rates.lambda_r, rates.sigma2);
    if lg > 0.0 {
        let vinf = lr * s2 / lg;
        Ok(VarianceEnvelope {
            times: grid.to_vec(),
            values: grid
                .iter()
                .map(|&t| vinf + (v0 - vinf) * (-lg * t).exp())
                .collect(),
            stationary: Some(vinf),
            unbounded: false,
        })
    } else {
        let growing = lr > 0.0;
        Ok(VarianceEnvelope {
            times: grid.to_vec(),
            values: grid.iter().map(|&t| v0 + lr * s2 * t).collect(),
            stationary: if growing { None } else { Some(v0) },
            unbounded: growing,
        })
    }
}
