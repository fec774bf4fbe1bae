//! Adaptive Gauss–Kronrod quadrature and Gauss–Legendre rules.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: `(value, error estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss–Kronrod on `[a, b]` until the summed error
/// estimate falls below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<Integral> {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let (mut value, mut err) = (v, e);
    let mut panels = 1;
    while err > abs_tol.max(rel_tol * value.abs()) {
        if panels >= max_panels {
            return Err(Error::Quadrature { estimate: err, tolerance: abs_tol.max(rel_tol * value.abs()) });
        }
        let p = heap.pop().expect("non-empty heap");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        value += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, err: e2 });
        panels += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.err).sum();
    Ok(Integral { value, error, panels })
}

/// `∫_a^∞ f` through `λ = a / t`, `t ∈ (0, 1]`.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<Integral> {
    assert!(a > 0.0);
    integrate(|t: f64| if t <= 0.0 { 0.0 } else { f(a / t) * a / (t * t) }, 0.0, 1.0, abs_tol, rel_tol, max_panels)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_exact_on_one_panel() {
        let (v, _) = gk15(&|x: f64| x.powi(6) - 2.0 * x, 0.0, 2.0);
        assert!((v - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn lorentzian_tail() {
        let head = integrate(|x: f64| 1.0 / (1.0 + x * x), 0.0, 10.0, 1e-13, 0.0, 10_000).unwrap();
        let tail = integrate_tail(|x: f64| 1.0 / (1.0 + x * x), 10.0, 1e-13, 0.0, 10_000).unwrap();
        assert!((head.value + tail.value - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-9, 1.0, 1e-14, 0.0, 5);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn legendre_rules() {
        for n in 1..30 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((s - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }
}
