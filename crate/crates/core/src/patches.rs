//! Equal-area partition of the unit sphere into a polar cap and latitude
//! collars, shaved by corridors, mirrored through the origin and lifted to
//! the fattened shell.
//!
//! Northern patches are numbered `0..M/2` (cap first, then collar cells
//! from the pole towards the equator, each collar by increasing azimuth);
//! patch `α + M/2` is the point reflection of patch `α`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{FermiRadius, ModeSet, Momentum, KAPPA0};

/// Default corridor constant, slightly above `1/κ₀`.
pub fn default_d_tilde() -> f64 {
    1.05 / KAPPA0
}

/// Nearest even integer to `N^{1/3+ε}`, at least 2.
pub fn patch_count(n: u64, epsilon: f64) -> usize {
    let x = (n as f64).powf(1.0 / 3.0 + epsilon);
    (2.0 * (x / 2.0).round()).max(2.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Cap,
    Collar,
}

/// One latitude collar of the northern hemisphere.
#[derive(Clone, Debug, Serialize)]
pub struct Collar {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub cells: usize,
    /// Azimuthal shave on each side of a cell.
    pub phi_shave: f64,
    pub first_id: usize,
}

impl Collar {
    fn width(&self) -> f64 {
        TAU / self.cells as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Patch {
    pub id: usize,
    pub kind: PatchKind,
    pub north: bool,
    /// Angular ranges of the northern representative before shaving.
    pub theta: (f64, f64),
    pub phi: (f64, f64),
    /// Same after shaving.
    pub theta_shaved: (f64, f64),
    pub phi_shaved: (f64, f64),
    pub center: [f64; 3],
    pub pre_area: f64,
    /// Area after shaving, the weight `σ(p_α)`.
    pub area: f64,
    /// Euclidean diameter of the unshaved cell.
    pub diameter: f64,
    pub mirror: usize,
}

impl Patch {
    /// Angular ranges in the patch's own hemisphere.
    pub fn display_ranges(&self) -> ((f64, f64), (f64, f64)) {
        if self.north {
            (self.theta_shaved, self.phi_shaved)
        } else {
            let (a, b) = self.theta_shaved;
            let (p, q) = self.phi_shaved;
            ((PI - b, PI - a), ((p + PI) % TAU, (q + PI) % TAU))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub m: usize,
    pub n: u64,
    pub r: f64,
    pub d_tilde: f64,
    /// Angular half-width of every corridor.
    pub shave: f64,
    pub cap_theta: f64,
    pub collars: Vec<Collar>,
    pub patches: Vec<Patch>,
}

fn unit_from_angles(theta: f64, phi: f64) -> [f64; 3] {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

fn angles(x: &[f64; 3]) -> (f64, f64) {
    let rho = x[0].hypot(x[1]);
    let theta = rho.atan2(x[2]);
    let mut phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    (theta, phi)
}

/// Chord diameter of `θ ∈ [lo, hi], φ ∈ [0, w]` on the unit sphere.
fn box_diameter(lo: f64, hi: f64, w: f64) -> f64 {
    let c = w.min(PI).cos();
    let steps = 64;
    let mut best: f64 = 0.0;
    for i in 0..=steps {
        let t1 = lo + (hi - lo) * i as f64 / steps as f64;
        for j in i..=steps {
            let t2 = lo + (hi - lo) * j as f64 / steps as f64;
            let cg = t1.cos() * t2.cos() + t1.sin() * t2.sin() * c;
            best = best.max(2.0 - 2.0 * cg);
        }
    }
    best.max(0.0).sqrt()
}

/// Split `M/2 − 1` cells over collars: rounding with carried remainder
/// keeps the total exact.
fn collar_cells(m: usize, cap_theta: f64, n_collars: usize) -> Vec<usize> {
    let rest = m / 2 - 1;
    let step = (FRAC_PI_2 - cap_theta) / n_collars as f64;
    let mut cells = Vec::with_capacity(n_collars);
    let mut carry = 0.0;
    let mut used = 0usize;
    for i in 0..n_collars {
        let a = cap_theta + step * i as f64;
        let b = if i + 1 == n_collars { FRAC_PI_2 } else { a + step };
        let ideal = m as f64 / 2.0 * (a.cos() - b.cos());
        let left = n_collars - i - 1;
        let mut c = if i + 1 == n_collars {
            rest - used
        } else {
            ((ideal + carry).round().max(1.0) as usize).min(rest - used - left)
        };
        c = c.max(1);
        carry += ideal - c as f64;
        used += c;
        cells.push(c);
    }
    cells
}

impl Partition {
    /// Build the partition for `M` patches, particle number `N`, interaction
    /// radius `R` and corridor constant `D̃`.
    pub fn build(m: usize, n: u64, r: f64, d_tilde: f64) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::Domain(format!("patch count must be even and at least 2, got {m}")));
        }
        if n == 0 {
            return Err(Error::Domain("particle number must be positive".into()));
        }
        if !(r >= 0.0) || !(d_tilde >= 0.0) {
            return Err(Error::Domain("R and D̃ must be non-negative".into()));
        }
        let half = m / 2;
        let shave = d_tilde * r * (n as f64).powf(-1.0 / 3.0);
        let cap_theta = (1.0 - 2.0 / m as f64).acos();
        let rest = half - 1;
        let n_collars = if rest == 0 {
            0
        } else {
            (((m as f64).sqrt() / 2.0).round() as usize).clamp(1, rest)
        };
        let counts = if n_collars == 0 { Vec::new() } else { collar_cells(m, cap_theta, n_collars) };

        let cap_hi = cap_theta - shave;
        if !(cap_hi > 0.0) {
            return Err(Error::Domain(format!(
                "corridor width {shave:.4e} swallows the polar cap (patch 0, opening {cap_theta:.4e})"
            )));
        }
        let mut patches = Vec::with_capacity(m);
        patches.push(Patch {
            id: 0,
            kind: PatchKind::Cap,
            north: true,
            theta: (0.0, cap_theta),
            phi: (0.0, TAU),
            theta_shaved: (0.0, cap_hi),
            phi_shaved: (0.0, TAU),
            center: [0.0, 0.0, 1.0],
            pre_area: TAU * (1.0 - cap_theta.cos()),
            area: TAU * (1.0 - cap_hi.cos()),
            diameter: 2.0 * cap_theta.min(FRAC_PI_2).sin(),
            mirror: half,
        });

        let mut collars = Vec::with_capacity(n_collars);
        let mut cumulative = 1usize;
        for (ci, &cells) in counts.iter().enumerate() {
            let lo = (1.0 - 2.0 * cumulative as f64 / m as f64).acos();
            cumulative += cells;
            let hi = (1.0 - 2.0 * cumulative as f64 / m as f64).acos();
            let first_id = patches.len();
            let (a, b) = (lo + shave, hi - shave);
            if !(b > a) {
                return Err(Error::Domain(format!(
                    "corridor width {shave:.4e} swallows collar {ci} (patches {first_id}..{}), height {:.4e}",
                    first_id + cells,
                    hi - lo
                )));
            }
            // the narrowest latitude of a northern cell sits at its pole side
            let ratio = shave.sin() / a.sin();
            let w = TAU / cells as f64;
            let phi_shave = if ratio < 1.0 { ratio.asin() } else { f64::INFINITY };
            if !(w > 2.0 * phi_shave) {
                return Err(Error::Domain(format!(
                    "corridor width {shave:.4e} swallows the cells of collar {ci} (patches {first_id}..{})",
                    first_id + cells
                )));
            }
            let pre_area = TAU * (lo.cos() - hi.cos()) / cells as f64;
            let area = (a.cos() - b.cos()) * (w - 2.0 * phi_shave);
            let diameter = box_diameter(lo, hi, w);
            let theta_c = 0.5 * (lo + hi);
            for j in 0..cells {
                let p0 = w * j as f64;
                let p1 = w * (j + 1) as f64;
                let id = patches.len();
                patches.push(Patch {
                    id,
                    kind: PatchKind::Collar,
                    north: true,
                    theta: (lo, hi),
                    phi: (p0, p1),
                    theta_shaved: (a, b),
                    phi_shaved: (p0 + phi_shave, p1 - phi_shave),
                    center: unit_from_angles(theta_c, 0.5 * (p0 + p1)),
                    pre_area,
                    area,
                    diameter,
                    mirror: id + half,
                });
            }
            collars.push(Collar { theta_lo: lo, theta_hi: hi, cells, phi_shave, first_id });
        }
        debug_assert_eq!(patches.len(), half);
        for a in 0..half {
            let p = &patches[a];
            let c = p.center;
            let south = Patch {
                id: a + half,
                north: false,
                center: [-c[0], -c[1], -c[2]],
                mirror: a,
                ..p.clone()
            };
            patches.push(south);
        }
        Ok(Partition { m, n, r, d_tilde, shave, cap_theta, collars, patches })
    }

    pub fn half(&self) -> usize {
        self.m / 2
    }

    pub fn mirror(&self, alpha: usize) -> usize {
        (alpha + self.half()) % self.m
    }

    /// Patch containing the direction `x`, or `None` inside a corridor.
    pub fn locate(&self, x: &[f64; 3]) -> Option<usize> {
        let (p, offset) = if x[2] < 0.0 { ([-x[0], -x[1], -x[2]], self.half()) } else { (*x, 0) };
        if p == [0.0; 3] {
            return None;
        }
        let (theta, phi) = angles(&p);
        if theta < self.cap_theta - self.shave {
            return Some(offset);
        }
        let ci = self.collars.partition_point(|c| c.theta_hi <= theta);
        let c = self.collars.get(ci)?;
        if !(theta >= c.theta_lo + self.shave && theta < c.theta_hi - self.shave) {
            return None;
        }
        let w = c.width();
        let j = ((phi / w).floor() as usize).min(c.cells - 1);
        let p0 = w * j as f64 + c.phi_shave;
        let p1 = w * (j + 1) as f64 - c.phi_shave;
        (phi >= p0 && phi < p1).then_some(offset + c.first_id + j)
    }

    pub fn locate_momentum(&self, q: &Momentum) -> Option<usize> {
        self.locate(&q.to_f64())
    }

    /// Geodesic distance from the unit vector `x` to the shaved patch `beta`.
    pub fn distance_to_patch(&self, x: &[f64; 3], beta: usize) -> f64 {
        let pb = &self.patches[beta];
        let y = if pb.north { *x } else { [-x[0], -x[1], -x[2]] };
        let (theta, phi) = angles(&y);
        let (a, b) = pb.theta_shaved;
        if pb.kind == PatchKind::Cap {
            return (theta - b).max(0.0);
        }
        let (p0, p1) = pb.phi_shaved;
        if phi >= p0 && phi <= p1 {
            return if theta < a { a - theta } else { (theta - b).max(0.0) };
        }
        let mut best = f64::INFINITY;
        for edge in [p0, p1] {
            let c = (phi - edge).cos();
            let t = (theta.sin() * c).atan2(theta.cos()).clamp(a, b);
            let cg = theta.cos() * t.cos() + theta.sin() * t.sin() * c;
            best = best.min(cg.clamp(-1.0, 1.0).acos());
        }
        best
    }

    /// Points on the boundary of the shaved patch.
    pub fn boundary_samples(&self, alpha: usize, per_edge: usize) -> Vec<[f64; 3]> {
        let p = &self.patches[alpha];
        let (a, b) = p.theta_shaved;
        let (p0, p1) = p.phi_shaved;
        let mut out = Vec::new();
        let lerp = |x: f64, y: f64, i: usize, n: usize| x + (y - x) * i as f64 / n.max(1) as f64;
        if p.kind == PatchKind::Cap {
            for i in 0..4 * per_edge {
                out.push(unit_from_angles(b, TAU * i as f64 / (4 * per_edge) as f64));
            }
        } else {
            for i in 0..per_edge {
                out.push(unit_from_angles(a, lerp(p0, p1, i, per_edge)));
                out.push(unit_from_angles(b, lerp(p0, p1, i, per_edge)));
                out.push(unit_from_angles(lerp(a, b, i, per_edge), p0));
                out.push(unit_from_angles(lerp(a, b, i, per_edge), p1));
            }
        }
        if !p.north {
            for x in &mut out {
                *x = [-x[0], -x[1], -x[2]];
            }
        }
        out
    }

    /// Smallest sampled geodesic gap between distinct nearby patches.
    pub fn min_corridor_angle(&self, per_edge: usize) -> f64 {
        let mut best = f64::INFINITY;
        for alpha in 0..self.m {
            let pa = &self.patches[alpha];
            let samples = self.boundary_samples(alpha, per_edge);
            for beta in 0..self.m {
                if beta == alpha {
                    continue;
                }
                let pb = &self.patches[beta];
                let dot: f64 = (0..3).map(|i| pa.center[i] * pb.center[i]).sum();
                if dot.clamp(-1.0, 1.0).acos() > 1.5 * (pa.diameter + pb.diameter) {
                    continue;
                }
                for x in &samples {
                    best = best.min(self.distance_to_patch(x, beta));
                }
            }
        }
        best
    }

    pub fn max_diameter(&self) -> f64 {
        self.patches.iter().map(|p| p.diameter).fold(0.0, f64::max)
    }

    /// Text table with one row per patch.
    pub fn table(&self) -> String {
        let mut s = String::from("alpha\tkind\ttheta_lo\ttheta_hi\tphi_lo\tphi_hi\tcx\tcy\tcz\tarea\tdiameter\n");
        for p in &self.patches {
            let ((t0, t1), (f0, f1)) = p.display_ranges();
            let kind = match p.kind {
                PatchKind::Cap => "cap",
                PatchKind::Collar => "collar",
            };
            s.push_str(&format!(
                "{}\t{}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\t{:.12e}\t{:.12e}\n",
                p.id, kind, t0, t1, f0, f1, p.center[0], p.center[1], p.center[2], p.area, p.diameter
            ));
        }
        s
    }
}

/// Shell modes split by patch and by side of the Fermi surface.
#[derive(Clone, Debug)]
pub struct Lift {
    pub holes: Vec<ModeSet>,
    pub particles: Vec<ModeSet>,
    pub corridor: ModeSet,
}

/// `B_α = shell ∩ cone(p_α)`, split into holes (inside `B_F`) and particles.
pub fn lift_to_shell(partition: &Partition, shell: &ModeSet, radius: &FermiRadius) -> Lift {
    let mut holes = vec![Vec::new(); partition.m];
    let mut particles = vec![Vec::new(); partition.m];
    let mut corridor = Vec::new();
    for q in shell {
        match partition.locate_momentum(q) {
            Some(a) if radius.contains(q) => holes[a].push(*q),
            Some(a) => particles[a].push(*q),
            None => corridor.push(*q),
        }
    }
    Lift {
        holes: holes.into_iter().map(ModeSet::from_sorted).collect(),
        particles: particles.into_iter().map(ModeSet::from_sorted).collect(),
        corridor: ModeSet::from_sorted(corridor),
    }
}

/// `I_k^+` and `I_k^- = I_{-k}^+`, the latter listed as mirrors of the former.
#[derive(Clone, Debug, Serialize)]
pub struct IndexSets {
    pub k: Momentum,
    pub threshold: f64,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

pub fn index_threshold(n: u64, delta: f64) -> f64 {
    (n as f64).powf(-delta)
}

pub fn index_sets(partition: &Partition, k: &Momentum, threshold: f64) -> Result<IndexSets> {
    if k.is_zero() {
        return Err(Error::Domain("index sets are undefined for k = 0".into()));
    }
    let kh = k.unit();
    let plus: Vec<usize> = partition
        .patches
        .iter()
        .filter(|p| p.center.iter().zip(&kh).map(|(a, b)| a * b).sum::<f64>() >= threshold)
        .map(|p| p.id)
        .collect();
    let minus = plus.iter().map(|&a| partition.mirror(a)).collect();
    Ok(IndexSets { k: *k, threshold, plus, minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{fattened_shell, DEFAULT_MODE_BUDGET};

    #[test]
    fn eight_patches() {
        let p = Partition::build(8, 1_000_000, 1.0, default_d_tilde()).unwrap();
        assert_eq!(p.patches.len(), 8);
        for patch in &p.patches {
            assert!((patch.pre_area - PI / 2.0).abs() < 1e-12);
        }
        assert_eq!(p.patches[0].kind, PatchKind::Cap);
        assert_eq!(p.collars.len(), 1);
        assert_eq!(p.collars[0].cells, 3);
    }

    #[test]
    fn two_hemispheres() {
        let p = Partition::build(2, 1000, 1.0, 0.0).unwrap();
        assert!((p.cap_theta - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(p.locate(&[0.1, 0.2, 0.9]), Some(0));
        assert_eq!(p.locate(&[0.1, 0.2, -0.9]), Some(1));
        assert_eq!(p.locate(&[1.0, 0.0, 0.0]), None);
    }

    #[test]
    fn cell_totals_exact() {
        for m in (2..300).step_by(2) {
            let p = Partition::build(m, 1 << 40, 1.0, 0.0).unwrap();
            assert_eq!(p.patches.len(), m);
            let total: usize = p.collars.iter().map(|c| c.cells).sum();
            assert_eq!(total + 1, m / 2);
            for patch in &p.patches {
                assert!((patch.pre_area - 4.0 * PI / m as f64).abs() < 1e-12, "M={m}");
            }
        }
    }

    #[test]
    fn rejects_odd_and_too_wide_corridor() {
        assert!(Partition::build(7, 1000, 1.0, 1.0).is_err());
        let e = Partition::build(64, 8, 1.0, 5.0).unwrap_err();
        assert!(e.to_string().contains("swallows"));
    }

    #[test]
    fn locate_agrees_with_ranges() {
        let p = Partition::build(32, 1_000_000, 1.0, default_d_tilde()).unwrap();
        let mut hits = 0;
        for i in 0..400 {
            let t = PI * (i as f64 + 0.5) / 400.0;
            for j in 0..50 {
                let f = TAU * (j as f64 + 0.3) / 50.0;
                let x = unit_from_angles(t, f);
                match p.locate(&x) {
                    Some(a) => {
                        hits += 1;
                        assert!(p.distance_to_patch(&x, a) == 0.0);
                        let ((t0, t1), _) = p.patches[a].display_ranges();
                        assert!(t >= t0 - 1e-12 && t <= t1 + 1e-12);
                    }
                    None => {
                        for b in 0..p.m {
                            assert!(p.distance_to_patch(&x, b) > 0.0);
                        }
                    }
                }
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn corridor_width_matches_shave() {
        let p = Partition::build(32, 1_000_000, 1.0, default_d_tilde()).unwrap();
        let gap = p.min_corridor_angle(40);
        assert!(gap >= 2.0 * p.shave * (1.0 - 1e-9), "gap {gap} shave {}", p.shave);
        assert!(gap <= 2.0 * p.shave * 1.05);
    }

    #[test]
    fn lift_is_a_partition_of_the_shell() {
        let radius = FermiRadius::from_kf(8.0).unwrap();
        let shell = fattened_shell(&radius, 1.0, DEFAULT_MODE_BUDGET).unwrap();
        let p = Partition::build(16, 2000, 1.0, default_d_tilde()).unwrap();
        let lift = lift_to_shell(&p, &shell, &radius);
        let total: usize =
            lift.holes.iter().chain(&lift.particles).map(ModeSet::len).sum::<usize>() + lift.corridor.len();
        assert_eq!(total, shell.len());
        for a in 0..p.m {
            let b = p.mirror(a);
            for q in &lift.holes[a] {
                assert!(lift.holes[b].contains(&-*q));
            }
            assert_eq!(lift.particles[a].len(), lift.particles[b].len());
        }
    }

    #[test]
    fn index_sets_for_polar_momentum() {
        let p = Partition::build(32, 1_000_000, 1.0, default_d_tilde()).unwrap();
        let k = Momentum::new(0, 0, 1);
        let s = index_sets(&p, &k, 0.3).unwrap();
        assert!(s.plus.contains(&0));
        assert!(s.plus.iter().all(|&a| a < 16));
        assert_eq!(s.minus[0], 16);
        let tight = index_sets(&p, &k, index_threshold(1_000_000, 1e-9)).unwrap();
        assert_eq!(tight.plus, vec![0]);
        assert!(index_sets(&p, &Momentum::new(0, 0, 0), 0.1).is_err());
    }

    #[test]
    fn patch_count_rounds_to_even() {
        assert_eq!(patch_count(1_000_000, 1.0 / 27.0) % 2, 0);
        assert_eq!(patch_count(1, 0.0), 2);
        assert_eq!(patch_count(1000, 0.0), 10);
    }
}
