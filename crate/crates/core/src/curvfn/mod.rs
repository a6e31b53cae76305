//! Symmetric, degree-one homogeneous curvature functions on the positive cone.
//!
//! The zoo is built from four constructors: power means, normalized
//! elementary symmetric means, geometric interpolation of two members, and
//! the dual `f_*(x) = 1 / f(1/x)`. Every member is normalized so that
//! `f(1, ..., 1) = n`; a dual consequently has `f_*(1, ..., 1) = 1/n`.
//!
//! Values, gradients and Hessians are analytic. The dual's derivatives come
//! from the chain rule applied to `x -> 1/x`, so they stay at machine
//! precision inside the flow right-hand side.

mod spec;
mod verify;

pub use spec::FunctionSpec;
pub use verify::{
    boundary_decay_scan, ddf_quadratic_form, inverse_concavity_matrix, verify_properties,
    DecayReport, DecayVerdict, PropertyReport, EPS_EIG, MARGIN_TOL,
};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{IcfError, Result};

type Scratch = SmallVec<[f64; 8]>;

/// Structural properties a function is known to have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub inverse_concave: bool,
    pub concave: bool,
    pub convex: bool,
}

/// A point of the positive cone: every component strictly positive, `n >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvaturePoint(Vec<f64>);

impl CurvaturePoint {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        check_point(&kappa)?;
        Ok(Self(kappa))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

fn check_point(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(IcfError::Domain(format!(
            "curvature point needs n >= 2 components, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(IcfError::Domain(format!(
            "curvature point component {v} is not in the positive cone"
        )));
    }
    Ok(())
}

/// Value, gradient `f^i` and Hessian `f^{ij}` at one point.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Clone, Debug)]
enum Kind {
    PowerMean {
        r: f64,
        scale: f64,
    },
    ElemSym {
        k: usize,
        binom: f64,
    },
    Interpolate {
        left: Box<CurvatureFunction>,
        right: Box<CurvatureFunction>,
        sigma: f64,
        left_scale: f64,
        right_scale: f64,
    },
    Dual(Box<CurvatureFunction>),
}

/// An immutable curvature function of `n` variables.
#[derive(Clone, Debug)]
pub struct CurvatureFunction {
    spec: FunctionSpec,
    n: usize,
    flags: Flags,
    kind: Kind,
}

impl CurvatureFunction {
    /// Builds the function described by `spec` in dimension `n`.
    pub fn construct(spec: &FunctionSpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(IcfError::Config(format!("dimension n = {n} must be >= 2")));
        }
        let (kind, flags) = match spec {
            FunctionSpec::PowerMean(r) => {
                let r = *r;
                if r == 0.0 || !r.is_finite() {
                    return Err(IcfError::Config(format!(
                        "power mean exponent must be finite and nonzero, got {r}"
                    )));
                }
                let flags = Flags {
                    inverse_concave: r >= -1.0,
                    concave: r <= 1.0,
                    convex: r >= 1.0,
                };
                let scale = (n as f64).powf(1.0 - 1.0 / r);
                (Kind::PowerMean { r, scale }, flags)
            }
            FunctionSpec::ElemSym(k) => {
                let k = *k;
                if k == 0 || k > n {
                    return Err(IcfError::Config(format!(
                        "elementary symmetric order k = {k} must lie in 1..={n}"
                    )));
                }
                let flags = Flags {
                    inverse_concave: true,
                    concave: true,
                    convex: k == 1,
                };
                (
                    Kind::ElemSym {
                        k,
                        binom: binomial(n, k),
                    },
                    flags,
                )
            }
            FunctionSpec::Interpolate { left, right, sigma } => {
                let sigma = *sigma;
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(IcfError::Config(format!(
                        "interpolation weight must lie in (0, 1), got {sigma}"
                    )));
                }
                let left = Self::construct(left, n)?;
                let right = Self::construct(right, n)?;
                let ones = vec![1.0; n];
                // factors are rescaled so each one is normalized to n at (1, ..., 1)
                let left_scale = n as f64 / left.value_unchecked(&ones);
                let right_scale = n as f64 / right.value_unchecked(&ones);
                let flags = Flags {
                    inverse_concave: left.flags.inverse_concave && right.flags.inverse_concave,
                    concave: left.flags.concave && right.flags.concave,
                    convex: false,
                };
                (
                    Kind::Interpolate {
                        left: Box::new(left),
                        right: Box::new(right),
                        sigma,
                        left_scale,
                        right_scale,
                    },
                    flags,
                )
            }
            FunctionSpec::Dual(inner) => {
                let inner = Self::construct(inner, n)?;
                let convex = match &inner.kind {
                    // f_* of a power mean is a multiple of the power mean with exponent -r
                    Kind::PowerMean { r, .. } => -*r >= 1.0,
                    Kind::ElemSym { k: 1, .. } => false,
                    Kind::Dual(g) => g.flags.convex,
                    _ => false,
                };
                let flags = Flags {
                    inverse_concave: inner.flags.concave,
                    concave: inner.flags.inverse_concave,
                    convex,
                };
                (Kind::Dual(Box::new(inner)), flags)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            n,
            flags,
            kind,
        })
    }

    /// Parses a spec string such as `interp:power-mean:1,elem-sym:2,0.5`.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        Self::construct(&spec.parse()?, n)
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    /// `true` when the function is a dual at its top level.
    pub fn is_dual(&self) -> bool {
        matches!(self.kind, Kind::Dual(_))
    }

    /// The dual function `f_*(x) = f(1/x)^{-1}`.
    ///
    /// The dual of a dual unwraps, so `f.dual().dual()` evaluates exactly as `f`.
    pub fn dual(&self) -> Self {
        if let Kind::Dual(inner) = &self.kind {
            return (**inner).clone();
        }
        let flags = Flags {
            inverse_concave: self.flags.concave,
            concave: self.flags.inverse_concave,
            convex: match &self.kind {
                Kind::PowerMean { r, .. } => -*r >= 1.0,
                _ => false,
            },
        };
        Self {
            spec: FunctionSpec::Dual(Box::new(self.spec.clone())),
            n: self.n,
            flags,
            kind: Kind::Dual(Box::new(self.clone())),
        }
    }

    /// Value at `x`, rejecting points outside the positive cone.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        check_point(x)?;
        Ok(self.value_unchecked(x))
    }

    /// Value without domain checks; `x` must have `n` positive components.
    pub fn value_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::PowerMean { r, scale } => {
                let m = max_component(x);
                let t: f64 = x.iter().map(|v| (v / m).powf(*r)).sum();
                scale * m * t.powf(1.0 / r)
            }
            Kind::ElemSym { k, binom } => {
                let m = max_component(x);
                let y: Scratch = x.iter().map(|v| v / m).collect();
                let e = elem_sym(&y, *k, &[])[*k] / binom;
                self.n as f64 * m * e.powf(1.0 / *k as f64)
            }
            Kind::Interpolate {
                left,
                right,
                sigma,
                left_scale,
                right_scale,
            } => {
                let a = left_scale * left.value_unchecked(x);
                let b = right_scale * right.value_unchecked(x);
                a.powf(*sigma) * b.powf(1.0 - sigma)
            }
            Kind::Dual(inner) => {
                let inv: Scratch = x.iter().map(|v| 1.0 / v).collect();
                1.0 / inner.value_unchecked(&inv)
            }
        }
    }

    /// Analytic value, gradient and Hessian at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DerivativeBundle> {
        self.check_dim(x)?;
        check_point(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    pub fn evaluate_point(&self, p: &CurvaturePoint) -> Result<DerivativeBundle> {
        self.evaluate(p.as_slice())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(IcfError::Domain(format!(
                "expected {} components, got {}",
                self.n,
                x.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> DerivativeBundle {
        let n = self.n;
        match &self.kind {
            Kind::PowerMean { r, scale } => {
                let r = *r;
                let m = max_component(x);
                let y: Vec<f64> = x.iter().map(|v| v / m).collect();
                let yr: Vec<f64> = y.iter().map(|v| v.powf(r)).collect();
                let t: f64 = yr.iter().sum();
                let value = scale * m * t.powf(1.0 / r);
                let grad = DVector::from_fn(n, |i, _| value / m * yr[i] / y[i] / t);
                let c = value / (m * m) * (r - 1.0) / t;
                let hess = DMatrix::from_fn(n, n, |i, j| {
                    let diag = if i == j { yr[i] / (y[i] * y[i]) } else { 0.0 };
                    c * (diag - yr[i] / y[i] * yr[j] / y[j] / t)
                });
                DerivativeBundle { value, grad, hess }
            }
            Kind::ElemSym { k, binom } => {
                let k = *k;
                let kf = k as f64;
                let m = max_component(x);
                let y: Vec<f64> = x.iter().map(|v| v / m).collect();
                let e = elem_sym(&y, k, &[])[k] / binom;
                let value = n as f64 * m * e.powf(1.0 / kf);
                let de: Vec<f64> = (0..n)
                    .map(|i| elem_sym(&y, k - 1, &[i])[k - 1] / binom)
                    .collect();
                let nk = n as f64 / kf;
                let grad = DVector::from_fn(n, |i, _| nk * e.powf(1.0 / kf - 1.0) * de[i]);
                let hess = DMatrix::from_fn(n, n, |i, j| {
                    let dde = if i == j || k < 2 {
                        0.0
                    } else {
                        elem_sym(&y, k - 2, &[i, j])[k - 2] / binom
                    };
                    nk / m
                        * ((1.0 / kf - 1.0) * e.powf(1.0 / kf - 2.0) * de[i] * de[j]
                            + e.powf(1.0 / kf - 1.0) * dde)
                });
                DerivativeBundle { value, grad, hess }
            }
            Kind::Interpolate {
                left,
                right,
                sigma,
                left_scale,
                right_scale,
            } => {
                let sigma = *sigma;
                let l = left.evaluate_unchecked(x);
                let r = right.evaluate_unchecked(x);
                let a = left_scale * l.value;
                let b = right_scale * r.value;
                let value = a.powf(sigma) * b.powf(1.0 - sigma);
                // log f = sigma log G1 + (1 - sigma) log G2, scale constants drop out
                let lg = &l.grad / l.value;
                let rg = &r.grad / r.value;
                let w = &lg * sigma + &rg * (1.0 - sigma);
                let grad = &w * value;
                let hess = (&w * w.transpose()
                    + (&l.hess / l.value - &lg * lg.transpose()) * sigma
                    + (&r.hess / r.value - &rg * rg.transpose()) * (1.0 - sigma))
                    * value;
                DerivativeBundle { value, grad, hess }
            }
            Kind::Dual(inner) => {
                let inv: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
                let g = inner.evaluate_unchecked(&inv);
                let value = 1.0 / g.value;
                let v2 = value * value;
                let grad = DVector::from_fn(n, |i, _| v2 * g.grad[i] * inv[i] * inv[i]);
                let hess = DMatrix::from_fn(n, n, |i, j| {
                    let mut h = 2.0 * grad[i] * grad[j] / value
                        - v2 * g.hess[(i, j)] * inv[i] * inv[i] * inv[j] * inv[j];
                    if i == j {
                        h -= 2.0 * grad[i] * inv[i];
                    }
                    h
                });
                DerivativeBundle { value, grad, hess }
            }
        }
    }
}

fn max_component(x: &[f64]) -> f64 {
    x.iter().copied().fold(0.0, f64::max)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomials `e_0..=e_k` of `y` with the indices in
/// `skip` removed.
pub(crate) fn elem_sym(y: &[f64], k: usize, skip: &[usize]) -> Scratch {
    let mut e: Scratch = SmallVec::from_elem(0.0, k + 1);
    e[0] = 1.0;
    for (idx, &v) in y.iter().enumerate() {
        if skip.contains(&idx) {
            continue;
        }
        for m in (1..=k).rev() {
            e[m] += v * e[m - 1];
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(spec: &str, n: usize) -> CurvatureFunction {
        CurvatureFunction::parse(spec, n).unwrap()
    }

    #[test]
    fn construct_normalization_examples() {
        assert!((f("power-mean:1", 2).value(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        let es3 = f("elem-sym:3", 3).value(&[1.0, 2.0, 4.0]).unwrap();
        assert!((es3 - 6.0).abs() < 1e-13, "{es3}");
        let interp = f("interp:power-mean:1,elem-sym:2,0.5", 2);
        assert!((interp.value(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn elem_sym_matches_brute_force_expansion() {
        // sigma_k by explicit subset enumeration
        let y = [0.3, 1.7, 2.2, 0.9];
        for k in 0..=4 {
            let mut brute = 0.0;
            for mask in 0u32..16 {
                if mask.count_ones() as usize == k {
                    brute += (0..4)
                        .filter(|b| mask & (1 << b) != 0)
                        .map(|b| y[b])
                        .product::<f64>();
                }
            }
            assert!((elem_sym(&y, k, &[])[k] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        for (s, n) in [
            ("power-mean:0", 2),
            ("elem-sym:0", 2),
            ("elem-sym:3", 2),
            ("interp:power-mean:1,power-mean:2,1.0", 2),
        ] {
            assert!(matches!(
                CurvatureFunction::parse(s, n),
                Err(IcfError::Config(_))
            ));
        }
        assert!(matches!(
            CurvatureFunction::construct(&FunctionSpec::PowerMean(1.0), 1),
            Err(IcfError::Config(_))
        ));
    }

    #[test]
    fn nonpositive_component_is_domain_error() {
        let g = f("power-mean:2", 2);
        assert!(matches!(g.value(&[1.0, 0.0]), Err(IcfError::Domain(_))));
        assert!(matches!(g.evaluate(&[-1.0, 2.0]), Err(IcfError::Domain(_))));
        assert!(matches!(g.evaluate(&[1.0, 2.0, 3.0]), Err(IcfError::Domain(_))));
        assert!(CurvaturePoint::new(vec![1.0]).is_err());
    }

    #[test]
    fn linear_function_has_unit_gradient_and_zero_hessian() {
        let g = f("power-mean:1", 3);
        let b = g.evaluate(&[0.2, 3.0, 7.5]).unwrap();
        for i in 0..3 {
            assert!((b.grad[i] - 1.0).abs() < 1e-14);
            for j in 0..3 {
                assert!(b.hess[(i, j)].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn evaluate_examples() {
        let b = f("elem-sym:2", 2).evaluate(&[1.0, 4.0]).unwrap();
        assert!((b.value - 4.0).abs() < 1e-14);
        assert!((b.grad[0] - 2.0).abs() < 1e-14);
        assert!((b.grad[1] - 0.5).abs() < 1e-14);

        let b = f("power-mean:2", 2).evaluate(&[3.0, 4.0]).unwrap();
        assert!((b.value - 5.0 * 2f64.sqrt()).abs() < 1e-13);
        assert!((b.grad[0] - 0.848_528_137_423_857).abs() < 1e-12);
        assert!((b.grad[1] - 1.131_370_849_898_476).abs() < 1e-12);
    }

    #[test]
    fn dual_examples() {
        for spec in ["power-mean:2", "elem-sym:2", "interp:power-mean:1,elem-sym:3,0.3"] {
            let g = f(spec, 3).dual();
            assert!((g.value(&[1.0; 3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        let es = f("elem-sym:3", 3);
        let dd = es.dual().dual();
        assert!((dd.value(&[1.0, 2.0, 4.0]).unwrap() - 6.0).abs() < 1e-13);
        let parsed = f("dual:dual:elem-sym:3", 3);
        assert!((parsed.value(&[1.0, 2.0, 4.0]).unwrap() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn dual_flags_swap_concavity() {
        let pm = f("power-mean:2", 2);
        assert!(pm.flags().inverse_concave && !pm.flags().concave && pm.flags().convex);
        let d = pm.dual();
        assert!(d.flags().concave && !d.flags().inverse_concave && !d.flags().convex);
        let pm_neg = f("power-mean:-2", 2);
        assert!(!pm_neg.flags().inverse_concave);
        assert!(pm_neg.dual().flags().convex);
        assert!(f("dual:power-mean:-2", 2).flags().convex);
    }
}
