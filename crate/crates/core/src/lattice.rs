//! Integer momentum lattice, Fermi ball, fattened shell and the
//! half-space representatives of the interaction support.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(3/(4π))^{1/3}`, the large-N limit of `k_F N^{-1/3}`.
pub const KAPPA0: f64 = 0.620_350_490_899_400_1;

/// Default ceiling on the number of enumerated modes.
pub const DEFAULT_MODE_BUDGET: usize = 60_000_000;

/// A momentum in `ℤ³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Momentum(pub [i32; 3]);

impl Momentum {
    pub const fn new(k1: i32, k2: i32, k3: i32) -> Self {
        Momentum([k1, k2, k3])
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn to_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    /// Unit vector; the zero momentum maps to zero.
    pub fn unit(&self) -> [f64; 3] {
        let n = self.norm();
        if n == 0.0 {
            return [0.0; 3];
        }
        let v = self.to_f64();
        [v[0] / n, v[1] / n, v[2] / n]
    }

    pub fn dot_f64(&self, w: &[f64; 3]) -> f64 {
        let v = self.to_f64();
        v[0] * w[0] + v[1] * w[1] + v[2] * w[2]
    }

    /// Membership in the half space used to pick one of `±k`.
    pub fn is_normal(&self) -> bool {
        let [k1, k2, k3] = self.0;
        k3 > 0 || (k3 == 0 && (k2 > 0 || (k2 == 0 && k1 > 0)))
    }
}

impl std::ops::Add for Momentum {
    type Output = Momentum;
    fn add(self, o: Momentum) -> Momentum {
        Momentum([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for Momentum {
    type Output = Momentum;
    fn sub(self, o: Momentum) -> Momentum {
        Momentum([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl std::ops::Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// Sorted, duplicate-free set of momenta.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    modes: Vec<Momentum>,
}

impl ModeSet {
    pub fn from_vec(mut modes: Vec<Momentum>) -> Self {
        modes.sort_unstable();
        modes.dedup();
        ModeSet { modes }
    }

    /// Caller guarantees lexicographic order without duplicates.
    pub(crate) fn from_sorted(modes: Vec<Momentum>) -> Self {
        debug_assert!(modes.windows(2).all(|w| w[0] < w[1]));
        ModeSet { modes }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, k: &Momentum) -> bool {
        self.modes.binary_search(k).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Momentum> {
        self.modes.iter()
    }

    pub fn as_slice(&self) -> &[Momentum] {
        &self.modes
    }
}

impl<'a> IntoIterator for &'a ModeSet {
    type Item = &'a Momentum;
    type IntoIter = std::slice::Iter<'a, Momentum>;
    fn into_iter(self) -> Self::IntoIter {
        self.modes.iter()
    }
}

/// Fermi radius. Lattice norms are integers, so `|k| ≤ k_F` reduces to
/// `|k|² ≤ ⌊k_F²⌋` once `k_F²` is known; a relative slack of `1e-12`
/// keeps `k_F = √m` computed in floating point on the closed side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiRadius {
    pub kf: f64,
    pub kf_sq: f64,
    /// Largest admissible `|k|²`.
    pub max_norm_sq: i64,
}

impl FermiRadius {
    pub fn from_kf(kf: f64) -> Result<Self> {
        if !kf.is_finite() || kf < 0.0 {
            return Err(Error::Domain(format!("Fermi radius must be finite and non-negative, got {kf}")));
        }
        let kf_sq = kf * kf;
        Ok(FermiRadius { kf, kf_sq, max_norm_sq: floor_with_slack(kf_sq) })
    }

    /// Exact radius `√m`.
    pub fn from_kf_sq(m: u64) -> Self {
        let kf_sq = m as f64;
        FermiRadius { kf: kf_sq.sqrt(), kf_sq, max_norm_sq: m as i64 }
    }

    pub fn contains(&self, k: &Momentum) -> bool {
        k.norm_sq() <= self.max_norm_sq
    }
}

fn floor_with_slack(x: f64) -> i64 {
    (x * (1.0 + 1e-12) + 1e-12).floor() as i64
}

fn ceil_with_slack(x: f64) -> i64 {
    (x * (1.0 - 1e-12) - 1e-12).ceil() as i64
}

/// Integer square root.
pub fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Number of lattice points with `|k|² ≤ m`, without enumerating them.
pub fn ball_count(m: i64) -> u64 {
    if m < 0 {
        return 0;
    }
    let r = isqrt(m);
    let mut total: u64 = 0;
    for k1 in -r..=r {
        let rem1 = m - k1 * k1;
        let r2 = isqrt(rem1);
        for k2 in -r2..=r2 {
            total += (2 * isqrt(rem1 - k2 * k2) + 1) as u64;
        }
    }
    total
}

/// Whether `m` is a sum of three squares (Legendre).
pub fn is_sum_of_three_squares(mut m: u64) -> bool {
    if m == 0 {
        return true;
    }
    while m % 4 == 0 {
        m /= 4;
    }
    m % 8 != 7
}

/// Integer `k_F²` whose ball count is closest to `target` (ties go to the
/// smaller ball).
pub fn kf_sq_for_target(target: u64) -> u64 {
    if target <= 1 {
        return 0;
    }
    let (mut lo, mut hi) = (0i64, 1i64);
    while ball_count(hi) < target {
        hi *= 2;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ball_count(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let above = lo as u64;
    let mut below = above.saturating_sub(1);
    while below > 0 && !is_sum_of_three_squares(below) {
        below -= 1;
    }
    let n_above = ball_count(above as i64);
    let n_below = ball_count(below as i64);
    if target - n_below <= n_above - target {
        below
    } else {
        above
    }
}

/// Fermi ball together with the semiclassical scales.
#[derive(Clone, Debug, Serialize)]
pub struct FermiGeometry {
    pub radius: FermiRadius,
    pub n: u64,
    pub hbar: f64,
    pub kappa: f64,
}

impl FermiGeometry {
    pub fn new(radius: FermiRadius) -> Result<Self> {
        let n = ball_count(radius.max_norm_sq);
        if n == 0 {
            return Err(Error::Domain("empty Fermi ball".into()));
        }
        let hbar = (n as f64).powf(-1.0 / 3.0);
        Ok(FermiGeometry { radius, n, hbar, kappa: radius.kf * hbar })
    }

    pub fn from_kf(kf: f64) -> Result<Self> {
        Self::new(FermiRadius::from_kf(kf)?)
    }

    /// Geometry whose particle number is closest to `target`.
    pub fn for_target_n(target: u64) -> Result<Self> {
        Self::new(FermiRadius::from_kf_sq(kf_sq_for_target(target)))
    }

    pub fn kf(&self) -> f64 {
        self.radius.kf
    }
}

fn check_budget(estimate: f64, budget: usize) -> Result<()> {
    if estimate > budget as f64 {
        return Err(Error::Resource(format!(
            "enumeration would produce about {estimate:.3e} modes, budget is {budget}"
        )));
    }
    Ok(())
}

/// Lattice points with `lo_sq ≤ |k|² ≤ hi_sq` in lexicographic order.
fn enumerate_annulus(lo_sq: i64, hi_sq: i64) -> Vec<Momentum> {
    let mut out = Vec::new();
    if hi_sq < 0 {
        return out;
    }
    let r = isqrt(hi_sq);
    for k1 in -r..=r {
        let rem1 = hi_sq - k1 * k1;
        let r2 = isqrt(rem1);
        for k2 in -r2..=r2 {
            let base = k1 * k1 + k2 * k2;
            let r3 = isqrt(hi_sq - base);
            for k3 in -r3..=r3 {
                if base + k3 * k3 >= lo_sq {
                    out.push(Momentum::new(k1 as i32, k2 as i32, k3 as i32));
                }
            }
        }
    }
    out
}

/// `B_F = {k ∈ ℤ³ : |k| ≤ k_F}`.
pub fn fermi_ball(radius: &FermiRadius, budget: usize) -> Result<ModeSet> {
    let r = radius.kf + 1.0;
    check_budget(4.0 / 3.0 * std::f64::consts::PI * r * r * r, budget)?;
    Ok(ModeSet::from_sorted(enumerate_annulus(0, radius.max_norm_sq)))
}

/// Squared-norm window of the shell `k_F − R ≤ |q| ≤ k_F + R`.
pub fn shell_bounds(radius: &FermiRadius, r: f64) -> (i64, i64) {
    let inner = radius.kf - r;
    let lo = if inner <= 0.0 { 0 } else { ceil_with_slack(inner * inner).max(0) };
    let outer = radius.kf + r;
    (lo, floor_with_slack(outer * outer))
}

/// Fattened shell around the Fermi sphere.
pub fn fattened_shell(radius: &FermiRadius, r: f64, budget: usize) -> Result<ModeSet> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("shell thickness must be positive, got {r}")));
    }
    let outer = radius.kf + r + 1.0;
    let inner = (radius.kf - r - 1.0).max(0.0);
    check_budget(4.0 / 3.0 * std::f64::consts::PI * (outer.powi(3) - inner.powi(3)), budget)?;
    let (lo, hi) = shell_bounds(radius, r);
    Ok(ModeSet::from_sorted(enumerate_annulus(lo, hi)))
}

/// `Γ^nor = {k ∈ ℤ³ ∩ B_R(0) : k ≠ 0, k in the positive half space}`.
pub fn gamma_nor(r: f64) -> Result<Vec<Momentum>> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("support radius must be finite and non-negative, got {r}")));
    }
    Ok(enumerate_annulus(1, floor_with_slack(r * r))
        .into_iter()
        .filter(Momentum::is_normal)
        .collect())
}

/// Total order used for deterministic tie breaking in reports.
pub fn cmp_by_norm(a: &Momentum, b: &Momentum) -> Ordering {
    a.norm_sq().cmp(&b.norm_sq()).then(a.cmp(b))
}
