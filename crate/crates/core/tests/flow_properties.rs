use std::sync::Arc;

use icf::cli::InitialData;
use icf::curvfn::CurvatureFunction;
use icf::flow::{run, FlowConfig, Termination};
use icf::hypersurface::{polar_dual, Ambient, SupportState};
use icf::sphgrid::{ScalarField, SphereGrid};

fn pm1() -> CurvatureFunction {
    CurvatureFunction::parse("power-mean:1", 2).unwrap()
}

/// Ambient, initial radius, radius to chart support, its inverse, exact radius at t = 1.
type SphereCase = (Ambient, f64, fn(f64) -> f64, fn(f64) -> f64, f64);

fn grid(ni: usize, nj: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(ni, nj).unwrap())
}

#[test]
fn sphere_radii_in_all_ambients() {
    let g = grid(128, 64);
    // rho' = r/2, tanh(rho)/2 and tan(rho)/2 respectively
    let e = 0.5f64.exp();
    let cases: [SphereCase; 3] = [
        (Ambient::Euclidean, 1.0, |r| r, |s| s, e),
        (Ambient::Hyperbolic, 0.5, f64::tanh, f64::atanh, (0.5f64.sinh() * e).asinh()),
        (Ambient::Spherical, 0.3, f64::tan, f64::atan, (0.3f64.sin() * e).asin()),
    ];
    for (amb, rho0, to_s, to_rho, exact) in cases {
        let st = SupportState::new(amb, g.clone(), ScalarField::constant(&g, to_s(rho0)), 0.0).unwrap();
        let r = run(&FlowConfig::new(amb, pm1(), 1.0, 1.0), &st).unwrap();
        assert_eq!(r.termination, Termination::TEnd);
        for s in r.final_state.s.values() {
            let err = ((to_rho(*s) - exact) / exact).abs();
            assert!(err <= 1e-3, "{amb}: {err}");
        }
    }
}

#[test]
fn normalized_flow_is_a_rescaling() {
    let g = grid(32, 16);
    let init = InitialData::Spheroid { a: 1.0, b: 1.2, c: 1.5 }.build(Ambient::Euclidean, g).unwrap();
    let mut plain = FlowConfig::new(Ambient::Euclidean, pm1(), 1.0, 1.0);
    plain.fixed_dt = Some(1e-3);
    let mut scaled = plain.clone();
    scaled.normalized = true;
    let a = run(&plain, &init).unwrap();
    let b = run(&scaled, &init).unwrap();
    assert_eq!(a.steps, b.steps);
    // s(t) = e^{t/n} s~(t)
    let factor = 0.5f64.exp();
    let worst = a
        .final_state
        .s
        .values()
        .iter()
        .zip(b.final_state.s.values())
        .map(|(s, st)| (s - factor * st).abs() / s)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn normalized_flow_rounds_off() {
    let g = grid(32, 16);
    let s = ScalarField::from_angles(&g, |theta, _| 1.0 + 0.1 * theta.cos());
    let init = SupportState::new(Ambient::Euclidean, g, s, 0.0).unwrap();
    let mut cfg = FlowConfig::new(Ambient::Euclidean, pm1(), 1.0, 2.0);
    cfg.normalized = true;
    cfg.snap_every = Some(0.1);
    let r = run(&cfg, &init).unwrap();
    let spread: Vec<f64> = r
        .snapshots
        .iter()
        .map(|st| {
            let v = st.s.values();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(spread.windows(2).all(|w| w[1] < w[0]), "{spread:?}");
    assert!(spread.last().unwrap() < &(0.5 * spread[0]));
}

#[test]
fn dual_of_an_expanding_sphere_shrinks() {
    let g = grid(16, 8);
    let st = SupportState::new(Ambient::Spherical, g.clone(), ScalarField::constant(&g, 0.4), 0.0).unwrap();
    let mut cfg = FlowConfig::new(Ambient::Spherical, pm1(), 1.0, 0.5);
    cfg.snap_every = Some(0.1);
    let r = run(&cfg, &st).unwrap();
    let maxima: Vec<f64> = r
        .snapshots
        .iter()
        .map(|s| polar_dual(s).unwrap().s.values().iter().copied().fold(f64::MIN, f64::max))
        .collect();
    assert!(maxima.windows(2).all(|w| w[1] < w[0]), "{maxima:?}");
    // complementary radius pi/2 - rho
    let rho = r.final_state.s.values()[0].atan();
    assert!((maxima.last().unwrap() - (std::f64::consts::FRAC_PI_2 - rho).tan()).abs() < 1e-9);
}

#[test]
fn convexity_persists_in_curved_ambients() {
    let g = grid(32, 16);
    for amb in [Ambient::Hyperbolic, Ambient::Spherical] {
        let init = InitialData::Spheroid { a: 0.3, b: 0.4, c: 0.5 }.build(amb, g.clone()).unwrap();
        let mut cfg = FlowConfig::new(amb, CurvatureFunction::parse("power-mean:2", 2).unwrap(), 1.0, 0.5);
        cfg.snap_every = Some(0.05);
        let r = run(&cfg, &init).unwrap();
        assert_eq!(r.termination, Termination::TEnd, "{amb}: {:?}", r.failure);
        assert!(r.records.iter().all(|x| x.convexity_margin > 0.0), "{amb}");
        assert!(r.snapshots.windows(2).all(|w| w[1].t > w[0].t));
    }
}
