pub(crate) const STENCIL: usize = 6;

/// Interpolated value and coordinate derivatives at an arbitrary `(theta, phi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InterpDerivs {
    pub value: f64,
    pub d_theta: f64,
    pub d_phi: f64,
    pub d_theta2: f64,
    pub d_theta_phi: f64,
    pub d_phi2: f64,
}

/// Lagrange basis on the nodes `0..6` at position `u`, with first and second
/// derivatives with respect to `u`.
pub(crate) fn lagrange6(u: f64) -> ([f64; 6], [f64; 6], [f64; 6]) {
    let d: [f64; 6] = std::array::from_fn(|m| u - m as f64);
    let mut w = [0.0; 6];
    let mut w1 = [0.0; 6];
    let mut w2 = [0.0; 6];
    for k in 0..STENCIL {
        let mut denom = 1.0;
        for m in (0..STENCIL).filter(|&m| m != k) {
            denom *= (k as f64) - (m as f64);
        }
        let prod_except = |skip: &[usize]| -> f64 {
            (0..STENCIL)
                .filter(|m| *m != k && !skip.contains(m))
                .map(|m| d[m])
                .product()
        };
        w[k] = prod_except(&[]) / denom;
        let mut first = 0.0;
        let mut second = 0.0;
        for p in (0..STENCIL).filter(|&p| p != k) {
            first += prod_except(&[p]);
            for q in (0..STENCIL).filter(|&q| q != k && q != p) {
                second += prod_except(&[p, q]);
            }
        }
        w1[k] = first / denom;
        w2[k] = second / denom;
    }
    (w, w1, w2)
}
