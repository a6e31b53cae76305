//! Reference solutions: geodesic spheres under the flow, and finite-difference
//! checks of curvature-function derivatives.
//!
//! A geodesic sphere of radius `rho` is umbilic with curvature `kappa` equal to
//! `1/r`, `coth rho` or `cot rho`, so `F = n kappa` and the radius obeys
//! `rho' = (n kappa)^{-alpha}`:
//!
//! - Euclidean: `r' = (r/n)^alpha`, giving `r = r0 e^{t/n}` for `alpha = 1` and
//!   `r = (r0^{1-alpha} + (1-alpha) n^{-alpha} t)^{1/(1-alpha)}` otherwise.
//! - Hyperbolic, `alpha = 1`: `cosh(rho) rho' / sinh(rho) = 1/n`, so
//!   `sinh rho = sinh rho0 e^{t/n}`.
//! - Spherical, `alpha = 1`: `sin rho = sin rho0 e^{t/n}`, reaching the
//!   equator at `T* = -n ln sin rho0`.
//!
//! Other exponents in the curved spaces are integrated with classical RK4.

use serde::Serialize;

use crate::curvfn::CurvatureFunction;
use crate::error::{IcfError, Result};
use crate::hypersurface::Ambient;

/// RK4 step for the radius ODE when no closed form is available.
pub const RK4_DT: f64 = 1e-5;

fn check_common(alpha: f64, r0: f64, t: f64, n: usize) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(IcfError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(IcfError::Domain(format!("initial radius must be positive, got {r0}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(IcfError::Domain(format!("time must be non-negative, got {t}")));
    }
    if n < 1 {
        return Err(IcfError::Domain("dimension must be >= 1".into()));
    }
    Ok(())
}

/// Radius at time `t` of a geodesic sphere in an `(n+1)`-dimensional space form.
///
/// `r0` is the Euclidean radius or the geodesic radius `rho0`.
pub fn sphere_radius(ambient: Ambient, alpha: f64, r0: f64, t: f64, n: usize) -> Result<f64> {
    check_common(alpha, r0, t, n)?;
    let nf = n as f64;
    match ambient {
        Ambient::Euclidean => {
            if alpha == 1.0 {
                Ok(r0 * (t / nf).exp())
            } else {
                let base = r0.powf(1.0 - alpha) + (1.0 - alpha) * nf.powf(-alpha) * t;
                if !(base > 0.0) {
                    return Err(IcfError::Domain(format!("sphere degenerates before t = {t}")));
                }
                Ok(base.powf(1.0 / (1.0 - alpha)))
            }
        }
        Ambient::Hyperbolic => {
            if alpha == 1.0 {
                Ok((r0.sinh() * (t / nf).exp()).asinh())
            } else {
                Ok(rk4_radius(ambient, alpha, r0, t, n, RK4_DT))
            }
        }
        Ambient::Spherical => {
            if r0 >= std::f64::consts::FRAC_PI_2 {
                return Err(IcfError::Domain("spherical radius must be below pi/2".into()));
            }
            if alpha == 1.0 {
                let t_star = blowup_time(r0, n)?;
                if t >= t_star {
                    return Err(IcfError::Domain(format!(
                        "t = {t} is past the blow-up time {t_star}"
                    )));
                }
                Ok((r0.sin() * (t / nf).exp()).asin())
            } else {
                let rho = rk4_radius(ambient, alpha, r0, t, n, RK4_DT);
                if !(rho < std::f64::consts::FRAC_PI_2) {
                    return Err(IcfError::Domain(format!("sphere reaches the equator before t = {t}")));
                }
                Ok(rho)
            }
        }
    }
}

/// Time at which a spherical geodesic sphere (`alpha = 1`) reaches the equator.
pub fn blowup_time(rho0: f64, n: usize) -> Result<f64> {
    if !(rho0 > 0.0 && rho0 < std::f64::consts::FRAC_PI_2) {
        return Err(IcfError::Domain(format!("rho0 = {rho0} is outside (0, pi/2)")));
    }
    Ok(-(n as f64) * rho0.sin().ln())
}

/// Support-function value of a centred geodesic sphere in the ambient chart.
pub fn chart_support(ambient: Ambient, radius: f64) -> f64 {
    match ambient {
        Ambient::Euclidean => radius,
        Ambient::Hyperbolic => radius.tanh(),
        Ambient::Spherical => radius.tan(),
    }
}

/// Inverse of [`chart_support`].
pub fn radius_from_support(ambient: Ambient, s: f64) -> f64 {
    match ambient {
        Ambient::Euclidean => s,
        Ambient::Hyperbolic => s.atanh(),
        Ambient::Spherical => s.atan(),
    }
}

fn radius_rate(ambient: Ambient, alpha: f64, rho: f64, n: usize) -> f64 {
    let kappa = match ambient {
        Ambient::Euclidean => 1.0 / rho,
        Ambient::Hyperbolic => 1.0 / rho.tanh(),
        Ambient::Spherical => 1.0 / rho.tan(),
    };
    (n as f64 * kappa).powf(-alpha)
}

/// Classical RK4 for `rho' = (n kappa(rho))^{-alpha}` with step `dt`; the last step is shortened.
pub fn rk4_radius(ambient: Ambient, alpha: f64, rho0: f64, t: f64, n: usize, dt: f64) -> f64 {
    let rate = |r: f64| radius_rate(ambient, alpha, r, n);
    let mut rho = rho0;
    let mut now = 0.0;
    while now < t {
        let h = dt.min(t - now);
        let k1 = rate(rho);
        let k2 = rate(rho + 0.5 * h * k1);
        let k3 = rate(rho + 0.5 * h * k2);
        let k4 = rate(rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        now += h;
    }
    rho
}

/// Largest relative deviations between analytic and central-difference derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct FdReport {
    pub grad_deviation: f64,
    pub hess_deviation: f64,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.grad_deviation.max(self.hess_deviation)
    }
}

/// Compares `f`'s analytic gradient and Hessian with central differences of
/// its value (gradient) and of its analytic gradient (Hessian).
///
/// Deviations are relative to the largest entry of the analytic quantity.
pub fn fd_check(f: &CurvatureFunction, p: &[f64], step: f64) -> Result<FdReport> {
    let d = f.evaluate(p)?;
    let n = p.len();
    if p.iter().any(|x| *x <= step * x.abs().max(1.0)) {
        return Err(IcfError::Domain("point too close to the cone boundary for this step".into()));
    }
    let mut grad_dev = 0.0f64;
    let mut hess_dev = 0.0f64;
    // a degree-one function has gradient ~ f/x and Hessian ~ f/x^2; these floor
    // the scales so vanishing Hessians (linear functions) are still measured
    let pmax = p.iter().copied().fold(0.0, f64::max);
    let gscale = d.grad.amax().max(d.value.abs() / pmax);
    let hscale = d.hess.amax().max(d.value.abs() / (pmax * pmax));
    for i in 0..n {
        let hi = step * p[i].abs().max(1.0);
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[i] += hi;
        minus[i] -= hi;
        let fd = (f.value(&plus)? - f.value(&minus)?) / (2.0 * hi);
        grad_dev = grad_dev.max((fd - d.grad[i]).abs() / gscale);
        let (gp, gm) = (f.evaluate(&plus)?.grad, f.evaluate(&minus)?.grad);
        for j in 0..n {
            let fd = (gp[j] - gm[j]) / (2.0 * hi);
            hess_dev = hess_dev.max((fd - d.hess[(i, j)]).abs() / hscale);
        }
    }
    Ok(FdReport {
        grad_deviation: grad_dev,
        hess_deviation: hess_dev,
    })
}
