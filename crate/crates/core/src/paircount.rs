//! Particle-hole pair counts per patch and momentum, with the lattice-line
//! estimate of their leading order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, Momentum};
use crate::patches::{Lift, PatchKind, Partition};
use crate::quadrature::gauss_legendre;

/// `#{h ∈ holes : h + k ∈ particles}`.
pub fn count_exact(holes: &ModeSet, particles: &ModeSet, k: &Momentum) -> u64 {
    holes.iter().filter(|&&h| particles.contains(&(h + *k))).count() as u64
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice points per period on the line `n + ℝk`.
pub fn pairs_per_line(k: &Momentum) -> i64 {
    let [a, b, c] = k.0;
    gcd(gcd(a as i64, b as i64), c as i64)
}

/// Axis used for the projection: the last coordinate that is non-zero.
pub fn projection_axis(k: &Momentum) -> Option<usize> {
    (0..3).rev().find(|&i| k.0[i] != 0)
}

/// Reflect to non-negative entries and permute the projection axis last.
pub fn canonicalize(k: &Momentum) -> Result<Momentum> {
    let c = projection_axis(k).ok_or_else(|| Error::Domain("k = 0 has no lattice lines".into()))?;
    let a: Vec<i32> = (0..3).filter(|&i| i != c).map(|i| k.0[i].abs()).collect();
    Ok(Momentum::new(a[0], a[1], k.0[c].abs()))
}

/// Distinct lines `n + ℝk` crossing a unit square of the projection plane.
pub fn lines_per_unit_square(k: &Momentum) -> Result<i64> {
    let kc = canonicalize(k)?;
    Ok(kc.0[2] as i64 / pairs_per_line(&kc))
}

/// Smooth `∫_{p_α} f dσ` by tensor Gauss–Legendre over the shaved patch.
pub fn patch_integral<F: Fn(&[f64; 3]) -> f64>(partition: &Partition, alpha: usize, nodes: usize, f: F) -> f64 {
    let p = &partition.patches[alpha];
    let (a, b) = p.theta_shaved;
    let (c, d) = if p.kind == PatchKind::Cap { (0.0, std::f64::consts::TAU) } else { p.phi_shaved };
    let sign = if p.north { 1.0 } else { -1.0 };
    let (x, w) = gauss_legendre(nodes);
    let (ht, hp) = (0.5 * (b - a), 0.5 * (d - c));
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let t = a + ht * (xi + 1.0);
        let (st, ct) = t.sin_cos();
        for (xj, wj) in x.iter().zip(&w) {
            let ph = c + hp * (xj + 1.0);
            let (sp, cp) = ph.sin_cos();
            let omega = [sign * st * cp, sign * st * sp, sign * ct];
            total += wi * wj * st * f(&omega);
        }
    }
    total * ht * hp
}

fn check_plus(partition: &Partition, alpha: usize, k: &Momentum, threshold: f64) -> Result<f64> {
    let p = partition
        .patches
        .get(alpha)
        .ok_or_else(|| Error::Domain(format!("no patch {alpha}")))?;
    let kh = k.unit();
    let dot: f64 = (0..3).map(|i| kh[i] * p.center[i]).sum();
    if k.is_zero() || dot < threshold {
        return Err(Error::Domain(format!("patch {alpha} is not in I_k^+ for k = {k}")));
    }
    Ok(dot)
}

/// `μ(P_α^k)`: area of the projection of `k_F·p_α` along `k`.
pub fn projected_measure(partition: &Partition, alpha: usize, k: &Momentum, kf: f64, threshold: f64) -> Result<f64> {
    check_plus(partition, alpha, k, threshold)?;
    let kc = canonicalize(k)?;
    let integral = patch_integral(partition, alpha, 24, |w| k.dot_f64(w).abs());
    Ok(kf * kf * integral / kc.0[2] as f64)
}

/// Lattice-line estimate `μ(P_α^k) · k₃` of `n²_{α,k}`.
pub fn count_lines(partition: &Partition, alpha: usize, k: &Momentum, kf: f64, threshold: f64) -> Result<f64> {
    let mu = projected_measure(partition, alpha, k, kf, threshold)?;
    Ok(mu * (lines_per_unit_square(k)? * pairs_per_line(k)) as f64)
}

/// `σ(p_α)|k̂·ω̂_α|`.
pub fn leading_order_v_sq(partition: &Partition, alpha: usize, k: &Momentum, threshold: f64) -> Result<f64> {
    let dot = check_plus(partition, alpha, k, threshold)?;
    Ok(partition.patches[alpha].area * dot)
}

/// Patch labels of shell modes, sorted by momentum.
pub struct ShellIndex {
    modes: Vec<Momentum>,
    /// `2α + 1` for a particle of patch `α`, `2α` for a hole.
    labels: Vec<u32>,
}

impl ShellIndex {
    pub fn new(lift: &Lift) -> Self {
        let mut all: Vec<(Momentum, u32)> = Vec::new();
        for (alpha, (h, p)) in lift.holes.iter().zip(&lift.particles).enumerate() {
            all.extend(h.iter().map(|&q| (q, 2 * alpha as u32)));
            all.extend(p.iter().map(|&q| (q, 2 * alpha as u32 + 1)));
        }
        all.sort_unstable_by_key(|e| e.0);
        let (modes, labels) = all.into_iter().unzip();
        ShellIndex { modes, labels }
    }

    fn label(&self, q: &Momentum) -> Option<u32> {
        self.modes.binary_search(q).ok().map(|i| self.labels[i])
    }

    /// `n²_{α,k}` for holes of `lift.holes[α]`.
    pub fn count(&self, holes: &ModeSet, alpha: usize, k: &Momentum) -> u64 {
        let want = Some(2 * alpha as u32 + 1);
        holes.iter().filter(|&&h| self.label(&(h + *k)) == want).count() as u64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairEntry {
    pub k: Momentum,
    pub alpha: usize,
    pub plus: bool,
    pub n_sq: u64,
    pub u: f64,
    pub v: f64,
    pub v_sq_leading: f64,
    pub rel_err: f64,
}

/// Pair data for one momentum: `I_k^+` entries first, then their mirrors.
#[derive(Clone, Debug, Serialize)]
pub struct PairTable {
    pub k: Momentum,
    pub entries: Vec<PairEntry>,
    /// Patches removed because they carry no pairs.
    pub dropped: Vec<usize>,
}

impl PairTable {
    pub fn size(&self) -> usize {
        self.entries.len() / 2
    }
}

/// Count `n²_{α,k}` over `I_k^+` and `n²_{α,-k}` over `I_k^-`; a patch pair
/// with a zero count on either side is dropped.
pub fn pair_table(
    partition: &Partition,
    lift: &Lift,
    index: &ShellIndex,
    k: &Momentum,
    kf: f64,
    threshold: f64,
) -> Result<PairTable> {
    let sets = crate::patches::index_sets(partition, k, threshold)?;
    let knorm = k.norm();
    let kh = k.unit();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut dropped = Vec::new();
    for (&a, &b) in sets.plus.iter().zip(&sets.minus) {
        let na = index.count(&lift.holes[a], a, k);
        let nb = index.count(&lift.holes[b], b, &-*k);
        if na == 0 || nb == 0 {
            log::warn!("k = {k}: dropping patches {a} and {b} with pair counts {na} and {nb}");
            dropped.extend([a, b]);
            continue;
        }
        let dot: f64 = (0..3).map(|i| kh[i] * partition.patches[a].center[i]).sum();
        let lead = partition.patches[a].area * dot;
        let make = |alpha: usize, n_sq: u64, is_plus: bool| {
            let v_sq = n_sq as f64 / (kf * kf * knorm);
            PairEntry {
                k: *k,
                alpha,
                plus: is_plus,
                n_sq,
                u: dot.sqrt(),
                v: v_sq.sqrt(),
                v_sq_leading: lead,
                rel_err: v_sq / lead - 1.0,
            }
        };
        plus.push(make(a, na, true));
        minus.push(make(b, nb, false));
    }
    plus.extend(minus);
    Ok(PairTable { k: *k, entries: plus, dropped })
}
