//! Sampled verification of the structural inequalities satisfied by
//! inverse-concave functions, plus the boundary-decay scan of the dual.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_point, CurvatureFunction, DerivativeBundle};
use crate::error::{IcfError, Result};

/// Relative eigenvalue gap below which divided differences switch to their limit.
pub const EPS_EIG: f64 = 1e-8;

/// Margins below `-MARGIN_TOL` count as violations; smaller negatives are roundoff.
pub const MARGIN_TOL: f64 = 1e-10;

const HOMOGENEITY_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;
const EULER_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-12;
const SAMPLE_LOG10_RANGE: f64 = 3.0;

/// Second derivative of `F(A) = f(eig A)` at `A = diag(p)` in direction `B`.
pub fn ddf_quadratic_form(f: &CurvatureFunction, p: &[f64], b: &DMatrix<f64>) -> Result<f64> {
    let n = f.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(IcfError::Domain(format!(
            "direction must be {n}x{n}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let bundle = f.evaluate(p)?;
    Ok(quadratic_form_from_bundle(&bundle, p, b))
}

pub(crate) fn quadratic_form_from_bundle(d: &DerivativeBundle, p: &[f64], b: &DMatrix<f64>) -> f64 {
    let n = p.len();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            total += d.hess[(i, k)] * b[(i, i)] * b[(k, k)];
        }
    }
    for i in 0..n {
        for k in 0..i {
            let gap = p[i] - p[k];
            let ratio = if gap.abs() < EPS_EIG * (p[i] + p[k]) {
                d.hess[(i, i)] - d.hess[(i, k)]
            } else {
                (d.grad[i] - d.grad[k]) / gap
            };
            total += 2.0 * ratio * b[(i, k)] * b[(i, k)];
        }
    }
    total
}

/// The matrix `f^{ij} + 2 f^i / x_i delta_ij`, positive semidefinite exactly
/// when `f` is inverse concave.
pub fn inverse_concavity_matrix(f: &CurvatureFunction, x: &[f64]) -> Result<DMatrix<f64>> {
    let d = f.evaluate(x)?;
    Ok(raw_matrix(&d, x))
}

fn raw_matrix(d: &DerivativeBundle, x: &[f64]) -> DMatrix<f64> {
    let mut m = d.hess.clone();
    for i in 0..x.len() {
        m[(i, i)] += 2.0 * d.grad[i] / x[i];
    }
    m
}

/// Congruence by `diag(x)` and division by `f` make the matrix dimensionless
/// without changing its inertia.
fn scaled_min_eig(m: &DMatrix<f64>, x: &[f64], value: f64) -> f64 {
    let n = x.len();
    let s = DMatrix::from_fn(n, n, |i, j| x[i] * x[j] * m[(i, j)] / value);
    let sym = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of [`verify_properties`]. Margins are signed and dimensionless;
/// residuals are relative.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub spec: String,
    pub n: usize,
    pub samples: usize,
    pub declared_inverse_concave: bool,
    pub declared_concave: bool,
    pub declared_convex: bool,
    /// Smallest eigenvalue of the inverse-concavity matrix over the samples.
    pub matrix_min_eig: f64,
    /// Sample at which `matrix_min_eig` was attained.
    pub matrix_worst_point: Vec<f64>,
    pub quadratic_margin: f64,
    pub pairwise_margin: f64,
    pub weighted_square_margin: f64,
    pub homogeneity_residual: f64,
    pub symmetry_residual: f64,
    pub euler_residual: f64,
    pub normalization_residual: f64,
    /// Smallest `f^i * max(x) / f`; must stay positive.
    pub monotonicity_min: f64,
    /// `(f - sum x) / f` for convex functions.
    pub convex_lower_margin: Option<f64>,
    /// `(harmonic bound - f_*) / f_*` for convex functions.
    pub convex_dual_margin: Option<f64>,
}

impl PropertyReport {
    pub fn matrix_psd(&self) -> bool {
        self.matrix_min_eig >= -MARGIN_TOL
    }

    /// Names of every failed check.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.matrix_psd() {
            out.push("inverse-concavity matrix");
        }
        if self.quadratic_margin < -MARGIN_TOL {
            out.push("quadratic inequality");
        }
        if self.pairwise_margin < -MARGIN_TOL {
            out.push("pairwise inequality");
        }
        if self.weighted_square_margin < -MARGIN_TOL {
            out.push("weighted square inequality");
        }
        if self.homogeneity_residual > HOMOGENEITY_TOL {
            out.push("homogeneity");
        }
        if self.symmetry_residual > SYMMETRY_TOL {
            out.push("symmetry");
        }
        if self.euler_residual > EULER_TOL {
            out.push("euler identity");
        }
        if self.normalization_residual > NORMALIZATION_TOL {
            out.push("normalization");
        }
        if !(self.monotonicity_min > 0.0) {
            out.push("monotonicity");
        }
        if self.convex_lower_margin.is_some_and(|m| m < -MARGIN_TOL) {
            out.push("convex lower bound");
        }
        if self.convex_dual_margin.is_some_and(|m| m < -MARGIN_TOL) {
            out.push("convex dual bound");
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "function {} (n = {}, {} samples)", self.spec, self.n, self.samples)?;
        writeln!(
            f,
            "  declared: inverse_concave={} concave={} convex={}",
            self.declared_inverse_concave, self.declared_concave, self.declared_convex
        )?;
        let rows: [(&str, f64, bool); 9] = [
            ("inverse-concavity matrix min eig", self.matrix_min_eig, self.matrix_psd()),
            ("quadratic inequality margin", self.quadratic_margin, self.quadratic_margin >= -MARGIN_TOL),
            ("pairwise inequality margin", self.pairwise_margin, self.pairwise_margin >= -MARGIN_TOL),
            (
                "weighted square margin",
                self.weighted_square_margin,
                self.weighted_square_margin >= -MARGIN_TOL,
            ),
            ("homogeneity residual", self.homogeneity_residual, self.homogeneity_residual <= HOMOGENEITY_TOL),
            ("symmetry residual", self.symmetry_residual, self.symmetry_residual <= SYMMETRY_TOL),
            ("euler residual", self.euler_residual, self.euler_residual <= EULER_TOL),
            (
                "normalization residual",
                self.normalization_residual,
                self.normalization_residual <= NORMALIZATION_TOL,
            ),
            ("monotonicity min", self.monotonicity_min, self.monotonicity_min > 0.0),
        ];
        for (name, v, ok) in rows {
            writeln!(f, "  {name:<34} {v:>14.6e}  {}", mark(ok))?;
        }
        if let Some(m) = self.convex_lower_margin {
            writeln!(f, "  {:<34} {m:>14.6e}  {}", "convex lower bound margin", mark(m >= -MARGIN_TOL))?;
        }
        if let Some(m) = self.convex_dual_margin {
            writeln!(f, "  {:<34} {m:>14.6e}  {}", "convex dual bound margin", mark(m >= -MARGIN_TOL))?;
        }
        if !self.matrix_psd() {
            writeln!(f, "  counterexample point: {:?}", self.matrix_worst_point)?;
        }
        write!(f, "  overall: {}", mark(self.passed()))
    }
}

struct SampleOutcome {
    matrix_min_eig: f64,
    point: Vec<f64>,
    quadratic: f64,
    pairwise: f64,
    weighted_square: f64,
    homogeneity: f64,
    symmetry: f64,
    euler: f64,
    monotonicity: f64,
    convex_lower: f64,
    convex_dual: f64,
}

fn log_uniform(rng: &mut impl Rng, log10_range: f64) -> f64 {
    10f64.powf(rng.gen_range(-log10_range..=log10_range))
}

/// Samples the positive cone log-uniformly over `[1e-3, 1e3]^n` and checks
/// every structural property at each sample.
pub fn verify_properties(f: &CurvatureFunction, samples: usize, seed: u64) -> Result<PropertyReport> {
    if samples == 0 {
        return Err(IcfError::Config("samples must be >= 1".into()));
    }
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(Vec<f64>, f64, Vec<usize>)> = (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, SAMPLE_LOG10_RANGE)).collect();
            let k = log_uniform(&mut rng, 1.0);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            (x, k, perm)
        })
        .collect();

    let outcomes: Vec<SampleOutcome> = inputs
        .par_iter()
        .map(|(x, k, perm)| sample_checks(f, x, *k, perm))
        .collect();

    let target = if f.is_dual() { 1.0 / n as f64 } else { n as f64 };
    let normalization_residual = ((f.value_unchecked(&vec![1.0; n]) - target) / target).abs();

    let worst = outcomes
        .iter()
        .min_by(|a, b| a.matrix_min_eig.total_cmp(&b.matrix_min_eig))
        .expect("samples >= 1");
    let min_of = |g: fn(&SampleOutcome) -> f64| outcomes.iter().map(g).fold(f64::INFINITY, f64::min);
    let max_of = |g: fn(&SampleOutcome) -> f64| outcomes.iter().map(g).fold(0.0, f64::max);
    let convex = f.flags().convex;

    Ok(PropertyReport {
        spec: f.spec().to_string(),
        n,
        samples,
        declared_inverse_concave: f.flags().inverse_concave,
        declared_concave: f.flags().concave,
        declared_convex: convex,
        matrix_min_eig: worst.matrix_min_eig,
        matrix_worst_point: worst.point.clone(),
        quadratic_margin: min_of(|o| o.quadratic),
        pairwise_margin: min_of(|o| o.pairwise),
        weighted_square_margin: min_of(|o| o.weighted_square),
        homogeneity_residual: max_of(|o| o.homogeneity),
        symmetry_residual: max_of(|o| o.symmetry),
        euler_residual: max_of(|o| o.euler),
        normalization_residual,
        monotonicity_min: min_of(|o| o.monotonicity),
        convex_lower_margin: convex.then(|| min_of(|o| o.convex_lower)),
        convex_dual_margin: convex.then(|| min_of(|o| o.convex_dual)),
    })
}

fn sample_checks(f: &CurvatureFunction, x: &[f64], k: f64, perm: &[usize]) -> SampleOutcome {
    let n = x.len();
    let d = f.evaluate_unchecked(x);
    let value = d.value;

    let m = raw_matrix(&d, x);
    let matrix_min_eig = scaled_min_eig(&m, x, value);

    let quad = &m - (&d.grad * d.grad.transpose()) * (2.0 / value);
    let quadratic = scaled_min_eig(&quad, x, value);

    let mut pairwise = f64::INFINITY;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let gap = x[a] - x[b];
            let ratio = if gap.abs() < EPS_EIG * (x[a] + x[b]) {
                d.hess[(a, a)] - d.hess[(a, b)]
            } else {
                (d.grad[a] - d.grad[b]) / gap
            };
            let term = ratio + d.grad[a] / x[b] + d.grad[b] / x[a];
            pairwise = pairwise.min(term * x[a].min(x[b]));
        }
    }

    let weighted: f64 = (0..n).map(|i| d.grad[i] * x[i] * x[i]).sum();
    let weighted_square = (weighted - value * value / n as f64) / (value * value);

    let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
    let homogeneity = ((f.value_unchecked(&scaled) - k * value) / (k * value)).abs();

    let permuted: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
    let symmetry = ((f.value_unchecked(&permuted) - value) / value).abs();

    let euler_sum: f64 = (0..n).map(|i| d.grad[i] * x[i]).sum();
    let euler = ((euler_sum - value) / value).abs();

    let xmax = x.iter().copied().fold(0.0, f64::max);
    let monotonicity = d.grad.iter().map(|g| g * xmax / value).fold(f64::INFINITY, f64::min);

    let sum: f64 = x.iter().sum();
    let convex_lower = (value - sum) / value;
    let inv: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    let dual_value = 1.0 / f.value_unchecked(&inv);
    let harmonic = 1.0 / inv.iter().sum::<f64>();
    let convex_dual = (harmonic - dual_value) / dual_value;

    SampleOutcome {
        matrix_min_eig,
        point: x.to_vec(),
        quadratic,
        pairwise,
        weighted_square,
        homogeneity,
        symmetry,
        euler,
        monotonicity,
        convex_lower,
        convex_dual,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Decays,
    DoesNotDecay,
}

impl fmt::Display for DecayVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayVerdict::Decays => "decays",
            DecayVerdict::DoesNotDecay => "does not decay",
        })
    }
}

/// Behaviour of `f_*` along rays running into the boundary of the cone.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub paths: usize,
    /// Ray parameters at which the dual was sampled.
    pub t_values: [f64; 3],
    /// Supremum of `f_*` over all paths at each `t`.
    pub sup: [f64; 3],
    /// Worst extrapolated limit, relative to the value at the largest `t`.
    pub worst_relative_limit: f64,
    pub verdict: DecayVerdict,
}

const DECAY_T: [f64; 3] = [1e-2, 1e-4, 1e-6];
const DECAY_SEED: u64 = 0x5eed_dec4;
const DECAY_LIMIT_TOL: f64 = 2e-2;

/// Evaluates `f_*(t, c_2, ..., c_n)` as `t -> 0` for random positive `c` and
/// extrapolates the limit from the geometric decay of successive differences.
pub fn boundary_decay_scan(f: &CurvatureFunction, path_count: usize) -> Result<DecayReport> {
    if path_count == 0 {
        return Err(IcfError::Config("path_count must be >= 1".into()));
    }
    let n = f.dim();
    let dual = f.dual();
    let mut rng = ChaCha8Rng::seed_from_u64(DECAY_SEED);
    let mut sup = [0.0f64; 3];
    let mut worst = 0.0f64;
    for _ in 0..path_count {
        let c: Vec<f64> = (1..n).map(|_| log_uniform(&mut rng, 1.0)).collect();
        let mut v = [0.0; 3];
        for (slot, &t) in v.iter_mut().zip(DECAY_T.iter()) {
            let mut x = Vec::with_capacity(n);
            x.push(t);
            x.extend_from_slice(&c);
            check_point(&x)?;
            *slot = dual.value_unchecked(&x);
        }
        for a in 0..3 {
            sup[a] = sup[a].max(v[a]);
        }
        let d1 = v[0] - v[1];
        let d2 = v[1] - v[2];
        let limit = if d1 > 0.0 && d2 >= 0.0 && d2 < d1 {
            let q = d2 / d1;
            v[2] - d2 * q / (1.0 - q)
        } else {
            // not monotonically contracting towards a limit
            v[2]
        };
        worst = worst.max(limit.max(0.0) / v[0]);
    }
    let verdict = if worst < DECAY_LIMIT_TOL {
        DecayVerdict::Decays
    } else {
        DecayVerdict::DoesNotDecay
    };
    Ok(DecayReport {
        paths: path_count,
        t_values: DECAY_T,
        sup,
        worst_relative_limit: worst,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(spec: &str, n: usize) -> CurvatureFunction {
        CurvatureFunction::parse(spec, n).unwrap()
    }

    #[test]
    fn matrix_for_linear_function() {
        let m = inverse_concavity_matrix(&f("power-mean:1", 2), &[1.0, 2.0]).unwrap();
        assert!((m[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-14);
        assert!(m[(0, 1)].abs() < 1e-14);
        let min = SymmetricEigen::new(m).eigenvalues.min();
        assert!((min - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_form_examples() {
        let es = f("elem-sym:2", 2);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let q = ddf_quadratic_form(&es, &[1.0, 2.0], &b).unwrap();
        assert!((q - 2.0 * (1.0 / 2f64.sqrt() - 2f64.sqrt())).abs() < 1e-13, "{q}");

        let diag = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, -1.2]);
        let d = es.evaluate(&[1.0, 2.0]).unwrap();
        let direct = d.hess[(0, 0)] * 0.09 + 2.0 * d.hess[(0, 1)] * 0.3 * -1.2 + d.hess[(1, 1)] * 1.44;
        let q = ddf_quadratic_form(&es, &[1.0, 2.0], &diag).unwrap();
        assert!((q - direct).abs() < 1e-14);

        let lin = f("power-mean:1", 3);
        let any = DMatrix::from_fn(3, 3, |i, j| 0.5 + (i + j) as f64);
        assert!(ddf_quadratic_form(&lin, &[0.5, 1.5, 4.0], &any).unwrap().abs() < 1e-13);
    }

    #[test]
    fn quadratic_form_rejects_wrong_shape() {
        let b = DMatrix::zeros(3, 3);
        assert!(ddf_quadratic_form(&f("power-mean:2", 2), &[1.0, 2.0], &b).is_err());
    }

    #[test]
    fn power_mean_two_passes_everything() {
        let r = verify_properties(&f("power-mean:2", 2), 10_000, 1).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.convex_lower_margin.is_some());
    }

    #[test]
    fn power_mean_minus_two_has_counterexample() {
        let r = verify_properties(&f("power-mean:-2", 2), 2_000, 3).unwrap();
        assert!(!r.matrix_psd());
        assert!(!r.passed());
        assert!(r.failures().contains(&"inverse-concavity matrix"));
    }

    #[test]
    fn decay_scan_examples() {
        for n in [2, 3] {
            let es = boundary_decay_scan(&f(&format!("elem-sym:{n}"), n), 20).unwrap();
            assert_eq!(es.verdict, DecayVerdict::Decays, "{es:?}");
            let lin = boundary_decay_scan(&f("power-mean:1", n), 20).unwrap();
            assert_eq!(lin.verdict, DecayVerdict::Decays, "{lin:?}");
            let harm = boundary_decay_scan(&f("power-mean:-1", n), 20).unwrap();
            assert_eq!(harm.verdict, DecayVerdict::DoesNotDecay, "{harm:?}");
        }
    }

    #[test]
    fn decay_closed_forms_along_unit_rays() {
        // f_*(t, 1, ..., 1) for elem-sym:n is t^{1/n} / n, for power-mean:1 it is (1/t + n - 1)^{-1}
        let n = 3;
        let t = 1e-4;
        let x = [t, 1.0, 1.0];
        let es = f("elem-sym:3", n).dual();
        assert!((es.value(&x).unwrap() - t.powf(1.0 / 3.0) / 3.0).abs() < 1e-15);
        let pm = f("power-mean:1", n).dual();
        assert!((pm.value(&x).unwrap() - 1.0 / (1.0 / t + 2.0)).abs() < 1e-18);
        let harm = f("power-mean:-1", n).dual();
        assert!((harm.value(&x).unwrap() - (t + 2.0) / 9.0).abs() < 1e-15);
    }
}
