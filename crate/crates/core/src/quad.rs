//! Numerical integration.
//!
//! [`integrate`] is a globally adaptive 21-point Gauss–Kronrod scheme in the
//! style of QUADPACK's `qags` without the epsilon extrapolation. Infinite
//! endpoints are mapped onto finite ones by `x = a + (1 - s)/s`, so tails are
//! integrated exactly rather than truncated. [`integrate_pieces`] splits at
//! caller-supplied breakpoints (kinks, atoms) before integrating.
//!
//! [`gauss_legendre`] provides fixed Gauss–Legendre rules for the quantile
//! integrals in the optimal-transport code.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, WimError};

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

// Kronrod abscissae and weights for the 21-point rule; every second abscissa
// (odd index) is also a 10-point Gauss node.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    at_roundoff: bool,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Segments already at the roundoff floor sort last so that bisection
        // effort goes where it can still help.
        let key = |s: &Segment| if s.at_roundoff { -1.0 } else { s.error };
        key(self).total_cmp(&key(other))
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resabs = resk.abs();
    let mut resg = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    if !resk.is_finite() {
        return Err(WimError::QuadratureFailure(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (1.0_f64).min((200.0 * error / resasc).powf(1.5));
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    let at_roundoff = error <= floor || (b - a).abs() <= 1e3 * f64::MIN_POSITIVE;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        at_roundoff,
    })
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    let first = kronrod21(f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let tol = |v: f64| opts.abs_tol.max(opts.rel_tol * v.abs());
    while err > tol(total) {
        if heap.len() >= opts.max_intervals {
            break;
        }
        let worst = match heap.peek() {
            Some(s) if !s.at_roundoff => heap.pop().expect("peeked"),
            _ => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            let mut s = worst;
            s.at_roundoff = true;
            heap.push(s);
            continue;
        }
        let left = kronrod21(f, worst.a, mid)?;
        let right = kronrod21(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let total: f64 = heap.iter().map(|s| s.value).sum();
    let err: f64 = heap.iter().map(|s| s.error).sum();
    let limited_by_roundoff = heap.iter().all(|s| s.at_roundoff || s.error <= tol(total));
    if err > tol(total) && !limited_by_roundoff && err > 1e3 * tol(total) {
        return Err(WimError::QuadratureFailure(format!(
            "no convergence on [{a}, {b}]: estimate {total:.6e}, error {err:.3e}"
        )));
    }
    Ok((total, err))
}

/// Integrates `f` over `[a, b]`; either endpoint may be infinite.
///
/// Returns the value; errors when the adaptive scheme cannot reach the
/// tolerance within `max_intervals` bisections by a wide margin, or when the
/// integrand produces a non-finite value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    integrate_with_error(f, a, b, opts).map(|(v, _)| v)
}

/// As [`integrate`] but also returns the error estimate.
pub fn integrate_with_error<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    if a.is_nan() || b.is_nan() {
        return Err(WimError::QuadratureFailure("NaN integration bound".into()));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    if a > b {
        return integrate_dyn(f, b, a, opts).map(|(v, e)| (-v, e));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, a, b, opts),
        (true, false) => {
            let g = |s: f64| {
                let x = a + (1.0 - s) / s;
                guarded(f(x)) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, opts)
        }
        (false, true) => {
            let g = |s: f64| {
                let x = b - (1.0 - s) / s;
                guarded(f(x)) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, opts)
        }
        (false, false) => {
            let (l, el) = integrate_dyn(f, f64::NEG_INFINITY, 0.0, opts)?;
            let (r, er) = integrate_dyn(f, 0.0, f64::INFINITY, opts)?;
            Ok((l + r, el + er))
        }
    }
}

// Far out in a mapped tail the integrand is often 0 * huge; treat an exact
// zero as zero rather than letting the Jacobian turn it into NaN.
fn guarded(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Integrates over `[a, b]` after splitting at every breakpoint that lies
/// strictly inside the interval. Breakpoints need not be sorted.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b && c.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += integrate(&f, w[0], w[1], opts)?;
    }
    Ok(total)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x + 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_tails_via_mapping() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let opts = QuadOptions::default();
        let mass = integrate(phi, f64::NEG_INFINITY, f64::INFINITY, opts).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
        let m4 = integrate(|x| x.powi(4) * phi(x), f64::NEG_INFINITY, f64::INFINITY, opts).unwrap();
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn exponential_moment_on_half_line() {
        // ∫_0^∞ x^8 e^{-x} dx = 8!
        let v = integrate(|x| x.powi(8) * (-x).exp(), 0.0, f64::INFINITY, QuadOptions::default()).unwrap();
        assert!((v / 40320.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kink_split() {
        let v = integrate_pieces(|x: f64| x.abs(), -1.0, 2.0, &[0.0], QuadOptions::default()).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate(|x| x, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((v + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_fails() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, QuadOptions::default());
        assert!(matches!(r, Err(WimError::QuadratureFailure(_))));
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-15);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
