#![allow(dead_code)]

use mcdm_core::data;
use mcdm_core::io::{load_scenario, LoadedScenario};
use mcdm_core::PairwiseMatrix;

pub fn logistics() -> LoadedScenario {
    load_scenario(data::path(data::LOGISTICS_SCENARIO_FILE)).expect("bundled scenario loads")
}

pub fn alt_scales() -> LoadedScenario {
    load_scenario(data::path(data::ALT_SCALES_SCENARIO_FILE)).expect("bundled scenario loads")
}

pub fn fpg(upper: [f64; 3]) -> PairwiseMatrix {
    PairwiseMatrix::from_upper(["fitness", "precision", "generalization"], &upper)
}

pub const S1: [f64; 3] = [6.0, 7.0, 1.0];
pub const S2: [f64; 3] = [5.0, 5.0, 1.0];
pub const S3: [f64; 3] = [1.0, 0.33, 2.0];

/// Largest real eigenvalue of a 3x3 matrix from its characteristic
/// polynomial `l^3 - tr l^2 + c l - det`, located by bisection.
pub fn lambda_max_3x3(a: &[Vec<f64>]) -> f64 {
    let tr = a[0][0] + a[1][1] + a[2][2];
    let minor = |i: usize, j: usize, k: usize, l: usize| a[i][k] * a[j][l] - a[i][l] * a[j][k];
    let c = minor(0, 1, 0, 1) + minor(0, 2, 0, 2) + minor(1, 2, 1, 2);
    let det = a[0][0] * minor(1, 2, 1, 2) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let p = |l: f64| l * l * l - tr * l * l + c * l - det;
    // every real root lies below 1 + max |coefficient|
    let mut hi = 1.0 + tr.abs().max(c.abs()).max(det.abs());
    let mut lo = 0.0;
    // scan downward for the last sign change
    let steps = 100_000;
    let dx = hi / steps as f64;
    for k in (0..steps).rev() {
        let x = k as f64 * dx;
        if p(x).signum() != p(x + dx).signum() || p(x) == 0.0 {
            lo = x;
            hi = x + dx;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(lo).signum() == p(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Raw inputs of the retained alternatives, independent of the scenario file:
/// (id, F, P, G, C_2 score, C_3 score).
pub const RETAINED_ROWS: [(&str, f64, f64, f64, f64, f64); 5] = [
    ("411", 0.999546682, 0.79968, 0.98135, 0.70, 0.75),
    ("412", 0.999950642, 0.79861, 0.89924, 0.50, 0.75),
    ("413", 0.999741972, 0.79906, 0.97027, 0.70, 0.75),
    ("422", 0.999754702, 0.8, 0.96416, 0.50, 0.75),
    ("532", 0.999671544, 0.8379, 1.0, 1.0, 0.50),
];

/// Total of a retained row when w_2 is moved to `x` and the other two
/// weights keep their 0.40 : 0.35 ratio.
pub fn oracle_total(row: &(&str, f64, f64, f64, f64, f64), x: f64) -> f64 {
    let c1 = 0.57 * row.1 + 0.22 * row.2 + 0.21 * row.3;
    let scale = (1.0 - x) / 0.75;
    0.40 * scale * c1 + x * row.4 + 0.35 * scale * row.5
}

pub fn oracle_top(x: f64) -> &'static str {
    let mut best = &RETAINED_ROWS[0];
    for r in &RETAINED_ROWS[1..] {
        if oracle_total(r, x) > oracle_total(best, x) {
            best = r;
        }
    }
    best.0
}

/// First w_2 on a uniform `n`-point scan of [0, 1) where the top changes.
pub fn oracle_flip_scan(n: usize) -> (f64, &'static str, &'static str) {
    let mut prev = oracle_top(0.0);
    for k in 1..n {
        let x = k as f64 / n as f64;
        let t = oracle_top(x);
        if t != prev {
            return (x, prev, t);
        }
        prev = t;
    }
    panic!("no flip");
}

/// Closed-form crossing of two affine totals in w_2.
pub fn oracle_flip_analytic(a: usize, b: usize) -> f64 {
    let (ra, rb) = (&RETAINED_ROWS[a], &RETAINED_ROWS[b]);
    let (a0, a1) = (oracle_total(ra, 0.0), oracle_total(ra, 1.0));
    let (b0, b1) = (oracle_total(rb, 0.0), oracle_total(rb, 1.0));
    (a0 - b0) / ((a0 - b0) - (a1 - b1))
}
