//! The quadratic bosonic problem at one momentum `k`.
//!
//! With `I = |I_k^+|` the blocks are `2I × 2I`: `D = diag(u²)`,
//! `W = diag(b, b)` and `W̃ = [[0, b], [b, 0]]` where `b = g|v⟩⟨v|`.
//! The ground state energy `e(k) = ½ tr E − ½ tr(D + W)` is available by
//! three independent routes: dense matrix functions ([`energy_trace`]),
//! the rank-one resolvent integral ([`energy_integral`]) and Williamson's
//! symplectic spectrum ([`symplectic_oracle`]).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Momentum;
use crate::paircount::PairTable;
use crate::quadrature::{integrate, integrate_tail};

/// Relative tolerance for clamping tiny negative eigenvalues.
pub const CLAMP_TOL: f64 = 1e-10;

/// Absolute tolerance of the resolvent integral.
pub const INTEGRAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Blocks {
    pub k: Option<Momentum>,
    /// Patch ids behind rows `0..2I`: `I_k^+` first, then the mirrors.
    pub order: Vec<usize>,
    /// `u_α²` for all `2I` rows.
    pub u_sq: Vec<f64>,
    /// `v_α` for all `2I` rows.
    pub v: Vec<f64>,
    pub g: f64,
}

impl Blocks {
    /// Blocks whose lower half mirrors the upper half.
    pub fn symmetric(u_sq: &[f64], v: &[f64], g: f64) -> Result<Self> {
        if u_sq.len() != v.len() {
            return Err(Error::Domain("u and v must have the same length".into()));
        }
        let i = u_sq.len();
        let b = Blocks {
            k: None,
            order: (0..2 * i).collect(),
            u_sq: u_sq.iter().chain(u_sq).copied().collect(),
            v: v.iter().chain(v).copied().collect(),
            g,
        };
        b.validate()?;
        Ok(b)
    }

    /// Blocks for `k` from its pair table with `g = κ V̂(k)`.
    pub fn from_pair_table(table: &PairTable, g: f64) -> Result<Self> {
        let b = Blocks {
            k: Some(table.k),
            order: table.entries.iter().map(|e| e.alpha).collect(),
            u_sq: table.entries.iter().map(|e| e.u * e.u).collect(),
            v: table.entries.iter().map(|e| e.v).collect(),
            g,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.u_sq.len() % 2 != 0 || self.v.len() != self.u_sq.len() {
            return Err(Error::Domain("blocks need 2I rows for u and v".into()));
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(Error::Domain(format!("coupling must be finite and non-negative, got {}", self.g)));
        }
        if self.u_sq.iter().any(|&x| !(x > 0.0 && x <= 1.0 + 1e-12)) {
            return Err(Error::Domain("u² must lie in (0, 1]".into()));
        }
        if self.v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("v must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// `I = |I_k^+|`.
    pub fn size(&self) -> usize {
        self.u_sq.len() / 2
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        let i = self.size();
        (0..i).all(|a| self.u_sq[a] == self.u_sq[a + i] && self.v[a] == self.v[a + i])
    }

    pub fn d(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.u_sq.clone()))
    }

    fn b_block(&self, rows: usize, cols: usize) -> DMatrix<f64> {
        let i = self.size();
        DMatrix::from_fn(i, i, |a, b| self.g * self.v[rows + a] * self.v[cols + b])
    }

    pub fn w(&self) -> DMatrix<f64> {
        let i = self.size();
        let mut m = DMatrix::zeros(2 * i, 2 * i);
        m.view_mut((0, 0), (i, i)).copy_from(&self.b_block(0, 0));
        m.view_mut((i, i), (i, i)).copy_from(&self.b_block(i, i));
        m
    }

    pub fn w_tilde(&self) -> DMatrix<f64> {
        let i = self.size();
        let mut m = DMatrix::zeros(2 * i, 2 * i);
        m.view_mut((0, i), (i, i)).copy_from(&self.b_block(0, i));
        m.view_mut((i, 0), (i, i)).copy_from(&self.b_block(i, 0));
        m
    }

    /// `(D + W − W̃, D + W + W̃)`.
    pub fn minus_plus(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let dw = self.d() + self.w();
        let wt = self.w_tilde();
        (&dw - &wt, dw + wt)
    }
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(a))
}

/// `f(A)` for symmetric `A` through its spectral decomposition.
pub fn spectral_map<F: Fn(f64) -> f64>(a: &DMatrix<f64>, f: F) -> DMatrix<f64> {
    let e = eigen(a);
    let fv = e.eigenvalues.map(f);
    let q = &e.eigenvectors;
    q * DMatrix::from_diagonal(&fv) * q.transpose()
}

fn spectral_checked<F: Fn(f64) -> f64>(a: &DMatrix<f64>, what: &str, strict: bool, f: F) -> Result<DMatrix<f64>> {
    let e = eigen(a);
    let scale = e.eigenvalues.amax();
    let tol = CLAMP_TOL * scale;
    let min = e.eigenvalues.min();
    if min < -tol || (strict && min <= tol) {
        return Err(Error::Numerical(format!("{what}: smallest eigenvalue {min:.3e} (norm {scale:.3e})")));
    }
    let fv = e.eigenvalues.map(|x| f(x.max(0.0)));
    let q = &e.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&fv) * q.transpose())
}

/// Square root of a symmetric positive semidefinite matrix; eigenvalues
/// down to `−1e-10‖A‖` are clamped to zero.
pub fn sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_checked(a, "sqrt_psd", false, f64::sqrt)
}

/// `(A + |x⟩⟨x|)^{-1}` for diagonal `A ≻ 0`.
pub fn rank_one_inverse(diag: &[f64], x: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let y: Vec<f64> = (0..n).map(|i| x[i] / diag[i]).collect();
    let denom = 1.0 + x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / diag[i] } else { 0.0 } - y[i] * y[j] / denom)
}

/// Matrix functions of one momentum.
#[derive(Clone, Debug)]
pub struct Bogoliubov {
    pub e: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
}

impl Bogoliubov {
    pub fn new(blocks: &Blocks) -> Result<Self> {
        let (a, b) = blocks.minus_plus();
        let a_half = spectral_checked(&a, "D+W-W̃", true, f64::sqrt)?;
        let a_inv_half = spectral_checked(&a, "D+W-W̃", true, |x| 1.0 / x.sqrt())?;
        spectral_checked(&b, "D+W+W̃", true, |x| x)?;
        let e = sqrt_psd(&symmetrize(&(&a_half * &b * &a_half)))?;
        let e = symmetrize(&e);
        let e_half = spectral_checked(&e, "E", true, f64::sqrt)?;
        let e_inv_half = spectral_checked(&e, "E", true, |x| 1.0 / x.sqrt())?;
        let s1 = &a_half * &e_inv_half;
        let s2 = &a_inv_half * &e_half;
        let kernel = spectral_checked(&(&s1 * s1.transpose()), "S₁S₁ᵀ", true, |x| 0.5 * x.ln())?;
        Ok(Bogoliubov { e, s1, s2, kernel })
    }

    pub fn sinh_k(&self) -> DMatrix<f64> {
        spectral_map(&self.kernel, f64::sinh)
    }

    pub fn cosh_k(&self) -> DMatrix<f64> {
        spectral_map(&self.kernel, f64::cosh)
    }
}

/// Trace and Hilbert–Schmidt norms of the kernel.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelNorms {
    pub tr: f64,
    pub hs: f64,
}

pub fn kernel_norms(kernel: &DMatrix<f64>) -> KernelNorms {
    let ev = eigen(kernel).eigenvalues;
    KernelNorms { tr: ev.iter().map(|x| x.abs()).sum(), hs: ev.iter().map(|x| x * x).sum::<f64>().sqrt() }
}

/// `½ tr E − ½ tr(D + W)` from dense matrix functions.
pub fn energy_trace(blocks: &Blocks) -> Result<f64> {
    if blocks.size() == 0 {
        return Ok(0.0);
    }
    let bog = Bogoliubov::new(blocks)?;
    Ok(0.5 * bog.e.trace() - 0.5 * (blocks.d() + blocks.w()).trace())
}

fn require_mirror(blocks: &Blocks, what: &str) -> Result<()> {
    if !blocks.is_mirror_symmetric() {
        return Err(Error::Domain(format!("{what} needs v_α(k) = v_(α+I)(−k) and equal u on both halves")));
    }
    Ok(())
}

/// Same energy from the secular equation of `diag(u⁴) + 2g|uv⟩⟨uv|`,
/// whose eigenvalues are the squares of the spectrum of `E`.
pub fn energy_trace_secular(blocks: &Blocks) -> Result<f64> {
    require_mirror(blocks, "the secular route")?;
    let i = blocks.size();
    let g = blocks.g;
    let u_sq = &blocks.u_sq[..i];
    let v = &blocks.v[..i];
    let mut rows: Vec<(f64, f64)> = (0..i).map(|a| (u_sq[a] * u_sq[a], u_sq[a] * v[a] * v[a])).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut poles: Vec<(f64, f64)> = Vec::new();
    let mut sqrt_sum = 0.0;
    for (d, w) in rows {
        match poles.last_mut() {
            Some(last) if (d - last.0).abs() <= 1e-14 * d.max(last.0) => {
                // repeated diagonal entry keeps one copy of its value
                sqrt_sum += d.sqrt();
                last.1 += w;
            }
            _ => poles.push((d, w)),
        }
    }
    let (free, active): (Vec<_>, Vec<_>) = poles.into_iter().partition(|p| g * p.1 == 0.0);
    sqrt_sum += free.iter().map(|p| p.0.sqrt()).sum::<f64>();
    let total_w: f64 = active.iter().map(|p| p.1).sum();
    let secular = |mu: f64| 1.0 + 2.0 * g * active.iter().map(|p| p.1 / (p.0 - mu)).sum::<f64>();
    for j in 0..active.len() {
        let lo = active[j].0;
        let hi = if j + 1 < active.len() { active[j + 1].0 } else { lo + 2.0 * g * total_w };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if secular(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        sqrt_sum += (0.5 * (a + b)).sqrt();
    }
    let tr_dw: f64 = u_sq.iter().sum::<f64>() + g * v.iter().map(|x| x * x).sum::<f64>();
    Ok(sqrt_sum - tr_dw)
}

/// Energy with the quadrature error estimate attached.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegralEnergy {
    pub value: f64,
    pub error: f64,
}

/// `(1/π)∫₀^∞ log f(λ) dλ − g Σ v²` with
/// `f(λ) = 1 + 2g Σ u²v²/(u⁴ + λ²)`.
pub fn energy_integral(blocks: &Blocks) -> Result<IntegralEnergy> {
    energy_integral_tol(blocks, INTEGRAL_TOL)
}

pub fn energy_integral_tol(blocks: &Blocks, tol: f64) -> Result<IntegralEnergy> {
    if blocks.size() == 0 || blocks.g == 0.0 {
        return Ok(IntegralEnergy { value: 0.0, error: 0.0 });
    }
    require_mirror(blocks, "the resolvent integral")?;
    let i = blocks.size();
    let g = blocks.g;
    let terms: Vec<(f64, f64)> = (0..i)
        .map(|a| {
            let u2 = blocks.u_sq[a];
            (u2 * u2, 2.0 * g * u2 * blocks.v[a] * blocks.v[a])
        })
        .collect();
    let log_f = |lam: f64| {
        let l2 = lam * lam;
        terms.iter().map(|(u4, c)| c / (u4 + l2)).sum::<f64>().ln_1p()
    };
    let split = (100.0 * g).max(10.0);
    let head = integrate(log_f, 0.0, split, 0.5 * tol, 0.0, 200_000)?;
    let tail = integrate_tail(log_f, split, 0.5 * tol, 0.0, 200_000)?;
    let sum_v2: f64 = blocks.v[..i].iter().map(|x| x * x).sum();
    Ok(IntegralEnergy {
        value: (head.value + tail.value) / std::f64::consts::PI - g * sum_v2,
        error: (head.error + tail.error) / std::f64::consts::PI,
    })
}

/// Outcome of the symplectic diagonalization.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymplecticReport {
    /// `½ Σ ε_γ − ½ tr(D + W)` from the symplectic spectrum.
    pub energy: f64,
    /// `‖SᵀJS − J‖_max`.
    pub symplectic_residual: f64,
    /// `‖Sᵀ𝔐S − ½ diag(E, E)‖_max`.
    pub diagonal_residual: f64,
}

/// Tolerance for the structural checks of the oracle.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// Williamson route: `𝔐 = ½ diag(D+W+W̃, D+W−W̃)` is brought to
/// `½ diag(E, E)` by `S = diag(S₁, S₂)`; the symplectic eigenvalues of
/// `2𝔐` are the square roots of the spectrum of `Lᵀ(D+W+W̃)L` with
/// `LLᵀ = D+W−W̃`, which never forms `E` itself.
pub fn symplectic_oracle(blocks: &Blocks) -> Result<SymplecticReport> {
    let i = blocks.size();
    if i == 0 {
        return Ok(SymplecticReport { energy: 0.0, symplectic_residual: 0.0, diagonal_residual: 0.0 });
    }
    let n = 2 * i;
    let (a, b) = blocks.minus_plus();
    let bog = Bogoliubov::new(blocks)?;

    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(&bog.s1);
    s.view_mut((n, n), (n, n)).copy_from(&bog.s2);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).fill_with_identity();
    j.view_mut((n, 0), (n, n)).copy_from(&(-DMatrix::<f64>::identity(n, n)));
    let mut frak_m = DMatrix::zeros(2 * n, 2 * n);
    frak_m.view_mut((0, 0), (n, n)).copy_from(&(&b * 0.5));
    frak_m.view_mut((n, n), (n, n)).copy_from(&(&a * 0.5));
    let mut target = DMatrix::zeros(2 * n, 2 * n);
    target.view_mut((0, 0), (n, n)).copy_from(&(&bog.e * 0.5));
    target.view_mut((n, n), (n, n)).copy_from(&(&bog.e * 0.5));

    let symplectic_residual = (s.transpose() * &j * &s - &j).amax();
    let scale = 1.0 + bog.e.amax();
    let diagonal_residual = (s.transpose() * &frak_m * &s - target).amax() / scale;
    if symplectic_residual > SYMPLECTIC_TOL || diagonal_residual > SYMPLECTIC_TOL {
        return Err(Error::Numerical(format!(
            "symplectic check failed: SᵀJS residual {symplectic_residual:.3e}, diagonalization residual {diagonal_residual:.3e}"
        )));
    }

    let l = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("D+W-W̃ is not positive definite".into()))?
        .l();
    let sym_spec = eigen(&(l.transpose() * &b * &l)).eigenvalues;
    if sym_spec.min() <= 0.0 {
        return Err(Error::Numerical("non-positive symplectic eigenvalue".into()));
    }
    let tr_e: f64 = sym_spec.iter().map(|x| x.sqrt()).sum();
    let energy = 0.5 * tr_e - 0.5 * (blocks.d() + blocks.w()).trace();
    Ok(SymplecticReport { energy, symplectic_residual, diagonal_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar() -> Blocks {
        Blocks::symmetric(&[1.0], &[1.0], 1.0).unwrap()
    }

    #[test]
    fn scalar_blocks_layout() {
        let b = scalar();
        assert_eq!(b.d(), DMatrix::identity(2, 2));
        assert_eq!(b.w(), DMatrix::identity(2, 2));
        assert_eq!(b.w_tilde(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn scalar_energy_and_kernel() {
        let b = scalar();
        let e = 3f64.sqrt() - 2.0;
        assert!((energy_trace(&b).unwrap() - e).abs() < 1e-12);
        assert!((energy_trace_secular(&b).unwrap() - e).abs() < 1e-12);
        assert!((energy_integral(&b).unwrap().value - e).abs() < 1e-10);
        assert!((symplectic_oracle(&b).unwrap().energy - e).abs() < 1e-12);
        let bog = Bogoliubov::new(&b).unwrap();
        assert_relative_eq!(bog.e.trace(), 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        let mut ev: Vec<f64> = eigen(&bog.kernel).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 0.25 * 3f64.ln()).abs() < 1e-12);
        assert!((ev[1] - 0.25 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn free_blocks() {
        let b = Blocks::symmetric(&[0.3, 0.7], &[0.5, 0.2], 0.0).unwrap();
        let bog = Bogoliubov::new(&b).unwrap();
        assert!((bog.e.clone() - b.d()).amax() < 1e-14);
        assert!(bog.kernel.amax() < 1e-14);
        assert_eq!(energy_integral(&b).unwrap().value, 0.0);
        assert!(energy_trace(&b).unwrap().abs() < 1e-14);
        assert!(b.w().amax() == 0.0 && b.w_tilde().amax() == 0.0);
    }

    #[test]
    fn sqrt_small_cases() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((sqrt_psd(&i3).unwrap() - &i3).amax() < 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = sqrt_psd(&d).unwrap();
        assert!((r - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-14);
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-3]));
        assert!(sqrt_psd(&bad).is_err());
        let tiny = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-13]));
        assert!(sqrt_psd(&tiny).is_ok());
    }

    #[test]
    fn rejects_invalid_blocks() {
        assert!(Blocks::symmetric(&[0.0], &[1.0], 1.0).is_err());
        assert!(Blocks::symmetric(&[0.5], &[1.0], -1.0).is_err());
        assert!(Blocks::symmetric(&[0.5, 0.2], &[1.0], 1.0).is_err());
    }

    fn blocks_strategy(max_i: usize) -> impl Strategy<Value = Blocks> {
        (1..=max_i)
            .prop_flat_map(|i| {
                (
                    proptest::collection::vec(0.05f64..1.0, i),
                    proptest::collection::vec(0.0f64..1.0, i),
                    0.0f64..3.0,
                )
            })
            .prop_map(|(u, v, g)| Blocks::symmetric(&u, &v, g).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sqrt_squares_back(entries in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let x = DMatrix::from_vec(4, 4, entries);
            let a = &x * x.transpose() + DMatrix::identity(4, 4) * 0.1;
            let r = sqrt_psd(&a).unwrap();
            prop_assert!((&r * &r - &a).amax() <= 1e-10 * a.amax());
            prop_assert!((&r - r.transpose()).amax() < 1e-14);
        }

        #[test]
        fn energy_is_non_positive(b in blocks_strategy(6)) {
            prop_assert!(energy_trace(&b).unwrap() <= 1e-13);
        }

        #[test]
        fn routes_agree(b in blocks_strategy(6)) {
            let t = energy_trace(&b).unwrap();
            let s = energy_trace_secular(&b).unwrap();
            let q = energy_integral(&b).unwrap().value;
            let w = symplectic_oracle(&b).unwrap().energy;
            prop_assert!((t - s).abs() < 1e-11, "trace {t} secular {s}");
            prop_assert!((t - q).abs() < 1e-8 * (1.0 + t.abs()), "trace {t} integral {q}");
            prop_assert!((t - w).abs() < 1e-10, "trace {t} oracle {w}");
        }

        #[test]
        fn e_is_symmetric_psd(b in blocks_strategy(5)) {
            let e = Bogoliubov::new(&b).unwrap().e;
            prop_assert!((&e - e.transpose()).amax() < 1e-12);
            prop_assert!(eigen(&e).eigenvalues.min() > 0.0);
        }

        #[test]
        fn kernel_symmetric_with_paired_spectrum(b in blocks_strategy(5)) {
            let k = Bogoliubov::new(&b).unwrap().kernel;
            prop_assert!((&k - k.transpose()).amax() < 1e-12);
            let mut ev: Vec<f64> = eigen(&k).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let n = ev.len();
            for j in 0..n {
                prop_assert!((ev[j] + ev[n - 1 - j]).abs() < 1e-10);
            }
        }

        #[test]
        fn hyperbolic_identities(b in blocks_strategy(5)) {
            let bog = Bogoliubov::new(&b).unwrap();
            let n = 2 * b.size();
            let (sh, ch) = (bog.sinh_k(), bog.cosh_k());
            let p1 = &bog.s1 * bog.s1.transpose();
            let p2 = &bog.s2 * bog.s2.transpose();
            prop_assert!((&sh * &ch - (&p1 - &p2) * 0.25).amax() < 1e-9);
            prop_assert!((&sh * &sh - (&p1 + &p2 - DMatrix::identity(n, n) * 2.0) * 0.25).amax() < 1e-9);
            let kin = (b.d() * &sh * &sh).trace();
            let int = (b.w() * &sh * &sh + b.w_tilde() * &sh * &ch).trace();
            let e = energy_trace(&b).unwrap();
            prop_assert!((kin + int - e).abs() < 1e-9, "kin {kin} int {int} e {e}");
        }

        #[test]
        fn orthogonal_block_structure(b in blocks_strategy(5)) {
            let i = b.size();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut u = DMatrix::zeros(2 * i, 2 * i);
            for a in 0..i {
                u[(a, a)] = h;
                u[(a, a + i)] = h;
                u[(a + i, a)] = h;
                u[(a + i, a + i)] = -h;
            }
            let (m, p) = b.minus_plus();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b.u_sq[..i].to_vec()));
            let bb = b.b_block(0, 0);
            let dp = &d + &bb * 2.0;
            let mut want_p = DMatrix::zeros(2 * i, 2 * i);
            want_p.view_mut((0, 0), (i, i)).copy_from(&dp);
            want_p.view_mut((i, i), (i, i)).copy_from(&d);
            let mut want_m = DMatrix::zeros(2 * i, 2 * i);
            want_m.view_mut((0, 0), (i, i)).copy_from(&d);
            want_m.view_mut((i, i), (i, i)).copy_from(&dp);
            prop_assert!((u.transpose() * &p * &u - want_p).amax() < 1e-12);
            prop_assert!((u.transpose() * &m * &u - want_m).amax() < 1e-12);

            let dh = spectral_map(&d, f64::sqrt);
            let dph = spectral_map(&dp, f64::sqrt);
            let top = spectral_map(&(&dh * &dp * &dh), f64::sqrt);
            let bottom = spectral_map(&(&dph * &d * &dph), f64::sqrt);
            let e = Bogoliubov::new(&b).unwrap().e;
            let ue = u.transpose() * e * &u;
            prop_assert!((ue.view((0, 0), (i, i)) - top).amax() < 1e-9);
            prop_assert!((ue.view((i, i), (i, i)) - bottom).amax() < 1e-9);
        }

        #[test]
        fn sherman_morrison(diag in proptest::collection::vec(0.1f64..2.0, 1..8), seed in 0u64..1000) {
            let n = diag.len();
            let x: Vec<f64> = (0..n).map(|i| ((seed + 7 * i as u64) % 13) as f64 / 13.0 - 0.4).collect();
            let xv = nalgebra::DVector::from_vec(x.clone());
            let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone())) + &xv * xv.transpose();
            let direct = a.try_inverse().unwrap();
            prop_assert!((rank_one_inverse(&diag, &x) - direct).amax() < 1e-10);
        }
    }

    #[test]
    fn kernel_trace_norm_linear_at_small_coupling() {
        // ‖K‖_tr / V̂ stays bounded as the coupling shrinks
        let u = [0.9, 0.6, 0.4];
        let v = [0.3, 0.5, 0.2];
        let mut ratios = Vec::new();
        for vhat in [0.1, 1.0, 10.0] {
            let b = Blocks::symmetric(&u, &v, vhat * KAPPA_TEST).unwrap();
            let norms = kernel_norms(&Bogoliubov::new(&b).unwrap().kernel);
            ratios.push(norms.tr / vhat);
            assert!(norms.hs <= norms.tr + 1e-15);
        }
        assert!(ratios.iter().all(|r| *r < 1.0), "{ratios:?}");
    }

    const KAPPA_TEST: f64 = crate::lattice::KAPPA0;
}
