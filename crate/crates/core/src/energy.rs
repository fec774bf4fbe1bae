//! Hartree–Fock energy, the bosonized correlation energy, its
//! Gell-Mann–Brueckner limit and convergence sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{fattened_shell, gamma_nor, isqrt, FermiGeometry, Momentum, DEFAULT_MODE_BUDGET, KAPPA0};
use crate::paircount::{pair_table, ShellIndex};
use crate::patches::{default_d_tilde, index_threshold, lift_to_shell, patch_count, Partition};
use crate::quadratic::{energy_integral, energy_trace, energy_trace_secular, kernel_norms, symplectic_oracle, Blocks, Bogoliubov};
use crate::quadrature::{integrate, integrate_tail};

pub const SCHEMA: &str = "fermi-rpa/1";

/// Fourier coefficients `V̂(k)` of a compactly supported, even, non-negative
/// pair potential together with the particle mass.
#[derive(Clone, Debug, Serialize)]
pub struct Potential {
    values: BTreeMap<Momentum, f64>,
    pub mass: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential { values: BTreeMap::new(), mass: 1.0 }
    }

    /// Radial potential from `(|k|², V̂)` shells.
    pub fn radial<I: IntoIterator<Item = (i64, f64)>>(shells: I, mass: f64) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (m, v) in shells {
            if m < 0 {
                return Err(Error::Config(format!("shell |k|² = {m} is negative")));
            }
            let r = crate::lattice::isqrt(m) as i32;
            for a in -r..=r {
                for b in -r..=r {
                    for c in -r..=r {
                        let k = Momentum::new(a, b, c);
                        if k.norm_sq() == m {
                            values.insert(k, v);
                        }
                    }
                }
            }
        }
        Self::explicit(values, mass)
    }

    /// Potential from an explicit momentum map.
    pub fn explicit(values: BTreeMap<Momentum, f64>, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Config(format!("mass must be positive, got {mass}")));
        }
        for (k, &v) in &values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("V̂{k} = {v} must be finite and non-negative")));
            }
            if values.get(&-*k) != Some(&v) {
                return Err(Error::Config(format!("potential is not even at k = {k}")));
            }
        }
        let values = values.into_iter().filter(|(_, v)| *v > 0.0).collect();
        Ok(Potential { values, mass })
    }

    /// Parse `radial:0=0.5,1=0.5`, `explicit:0,0,1=0.3;0,0,-1=0.3` or `zero`.
    pub fn parse(spec: &str, mass: f64) -> Result<Self> {
        let spec = spec.trim();
        let bad = |what: &str| Error::Config(format!("cannot parse potential entry '{what}'"));
        if spec == "zero" || spec.is_empty() {
            return Ok(Potential { mass, ..Self::zero() });
        }
        if let Some(rest) = spec.strip_prefix("radial:") {
            let mut shells = Vec::new();
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (m, v) = item.split_once('=').ok_or_else(|| bad(item))?;
                shells.push((m.trim().parse().map_err(|_| bad(item))?, v.trim().parse().map_err(|_| bad(item))?));
            }
            return Self::radial(shells, mass);
        }
        if let Some(rest) = spec.strip_prefix("explicit:") {
            let mut values = BTreeMap::new();
            for item in rest.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| bad(item))?;
                let c: Vec<i32> = k.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(item))?;
                if c.len() != 3 {
                    return Err(bad(item));
                }
                values.insert(Momentum::new(c[0], c[1], c[2]), v.trim().parse().map_err(|_| bad(item))?);
            }
            return Self::explicit(values, mass);
        }
        Err(Error::Config(format!("unknown potential format '{spec}'")))
    }

    pub fn value(&self, k: &Momentum) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Non-zero coefficients, including `k = 0` when present.
    pub fn support(&self) -> impl Iterator<Item = (&Momentum, &f64)> {
        self.values.iter()
    }

    /// `max |k|` over the non-zero coefficients with `k ≠ 0`.
    pub fn support_radius(&self) -> f64 {
        self.values.keys().filter(|k| !k.is_zero()).map(Momentum::norm).fold(0.0, f64::max)
    }

    /// Integer shell thickness `R ≥ 1` covering the support.
    pub fn shell_radius(&self) -> f64 {
        self.support_radius().ceil().max(1.0)
    }

    /// `Γ^nor ∩ supp V̂`.
    pub fn normal_support(&self) -> Vec<(Momentum, f64)> {
        self.values.iter().filter(|(k, _)| k.is_normal()).map(|(k, v)| (*k, *v)).collect()
    }

    /// Canonical text form accepted by [`Potential::parse`].
    pub fn describe(&self) -> String {
        if self.is_zero() {
            return "zero".into();
        }
        let items: Vec<String> =
            self.values.iter().map(|(k, v)| format!("{},{},{}={}", k.0[0], k.0[1], k.0[2], v)).collect();
        format!("explicit:{}", items.join(";"))
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct HfEnergy {
    pub kinetic: f64,
    pub direct: f64,
    pub exchange: f64,
    pub total: f64,
}

/// Energy of the filled Fermi ball. The direct term is `(N/2) V̂(0)`:
/// with `ω(x,x) = N/(2π)³` and `∫∫V(x−y) = (2π)⁶ V̂(0)` on the torus the
/// factors of `2π` cancel.
pub fn hf_energy(geom: &FermiGeometry, potential: &Potential) -> Result<HfEnergy> {
    let m = geom.radius.max_norm_sq;
    let reach = isqrt(m);
    // column (x, y) of the ball holds |z| ≤ half(x, y)
    let half = |x: i64, y: i64| -> Option<i64> {
        let rest = m - x * x - y * y;
        (rest >= 0).then(|| isqrt(rest))
    };
    let support: Vec<(Momentum, f64)> = potential.support().map(|(q, v)| (*q, *v)).collect();
    let mut sum_sq: i128 = 0;
    let mut overlap = vec![0i64; support.len()];
    for x in -reach..=reach {
        for y in -reach..=reach {
            let Some(a) = half(x, y) else { continue };
            let (r2, a128) = ((x * x + y * y) as i128, a as i128);
            sum_sq += (2 * a128 + 1) * r2 + a128 * (a128 + 1) * (2 * a128 + 1) / 3;
            for (j, (q, _)) in support.iter().enumerate() {
                let [q1, q2, q3] = q.0.map(i64::from);
                if let Some(b) = half(x - q1, y - q2) {
                    let lo = (-a).max(q3 - b);
                    let hi = a.min(q3 + b);
                    overlap[j] += (hi - lo + 1).max(0);
                }
            }
        }
    }
    let n = geom.n as f64;
    let kinetic = geom.hbar * geom.hbar / (2.0 * potential.mass) * sum_sq as f64;
    let pair_sum: f64 = support.iter().zip(&overlap).map(|((_, v), &c)| v * c as f64).sum();
    let exchange = -pair_sum / (2.0 * n);
    let direct = 0.5 * n * potential.value(&Momentum::new(0, 0, 0));
    Ok(HfEnergy { kinetic, direct, exchange, total: kinetic + direct + exchange })
}

/// Which per-momentum routes to evaluate.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub struct Methods {
    pub trace: bool,
    pub integral: bool,
    pub symplectic: bool,
}

impl Methods {
    pub const ALL: Methods = Methods { trace: true, integral: true, symplectic: true };
    pub const TRACE: Methods = Methods { trace: true, integral: false, symplectic: false };

    /// `all`, one route name, or a comma-separated list of names.
    pub fn parse(s: &str) -> Result<Self> {
        let mut m = Methods { trace: false, integral: false, symplectic: false };
        for name in s.split(',').map(str::trim) {
            match name {
                "all" => m = Self::ALL,
                "trace" => m.trace = true,
                "integral" => m.integral = true,
                "symplectic" => m.symplectic = true,
                _ => return Err(Error::Config(format!("unknown method '{name}' (trace | integral | symplectic | all)"))),
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub d_tilde: f64,
    pub patches: Option<usize>,
    pub methods: Methods,
    pub mode_budget: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            epsilon: 1.0 / 27.0,
            delta: 2.0 / 27.0,
            d_tilde: default_d_tilde(),
            patches: None,
            methods: Methods::ALL,
            mode_budget: DEFAULT_MODE_BUDGET,
        }
    }
}

/// Contribution of one `k ∈ Γ^nor`.
#[derive(Clone, Debug, Serialize)]
pub struct KRecord {
    pub k: Momentum,
    #[serde(rename = "I")]
    pub i: usize,
    pub g: f64,
    pub e_trace: Option<f64>,
    pub e_integral: Option<f64>,
    pub e_symplectic: Option<f64>,
    #[serde(rename = "K_tr_norm")]
    pub k_tr_norm: f64,
    #[serde(rename = "K_hs_norm")]
    pub k_hs_norm: f64,
    pub quadrature_err: Option<f64>,
    /// `e(k)` with `κ` replaced by `κ₀` in the coupling.
    pub e_kappa0: f64,
    pub dropped: Vec<usize>,
}

impl KRecord {
    pub fn primary(&self) -> f64 {
        self.e_trace.or(self.e_integral).or(self.e_symplectic).unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct MethodTotals {
    pub trace: Option<f64>,
    pub integral: Option<f64>,
    pub symplectic: Option<f64>,
}

impl MethodTotals {
    pub fn primary(&self) -> f64 {
        self.trace.or(self.integral).or(self.symplectic).unwrap_or(0.0)
    }

    fn scaled(&self, s: f64) -> Self {
        MethodTotals {
            trace: self.trace.map(|x| x * s),
            integral: self.integral.map(|x| x * s),
            symplectic: self.symplectic.map(|x| x * s),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub schema: &'static str,
    #[serde(rename = "N")]
    pub n: u64,
    pub k_f: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub d_tilde: f64,
    pub hbar: f64,
    pub kappa: f64,
    pub kappa0: f64,
    pub mass: f64,
    pub hf: HfEnergy,
    pub per_k: Vec<KRecord>,
    pub e_corr: MethodTotals,
    pub e_corr_per_hbar: MethodTotals,
    /// Per-ħ correlation energy with `κ₀` in place of `κ`.
    pub e_corr_kappa0_per_hbar: f64,
    pub gmb_per_hbar: f64,
    pub small_v_per_hbar: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Fraction of shell modes that fall into corridors.
    pub corridor_fraction: f64,
}

fn per_k(
    k: Momentum,
    vhat: f64,
    geom: &FermiGeometry,
    partition: &Partition,
    lift: &crate::patches::Lift,
    index: &ShellIndex,
    threshold: f64,
    methods: Methods,
) -> Result<KRecord> {
    let table = pair_table(partition, lift, index, &k, geom.kf(), threshold)?;
    let blocks = Blocks::from_pair_table(&table, geom.kappa * vhat)?;
    let mut rec = KRecord {
        k,
        i: blocks.size(),
        g: blocks.g,
        e_trace: None,
        e_integral: None,
        e_symplectic: None,
        k_tr_norm: 0.0,
        k_hs_norm: 0.0,
        quadrature_err: None,
        e_kappa0: 0.0,
        dropped: table.dropped.clone(),
    };
    if blocks.size() == 0 {
        rec.e_trace = methods.trace.then_some(0.0);
        rec.e_integral = methods.integral.then_some(0.0);
        rec.e_symplectic = methods.symplectic.then_some(0.0);
        return Ok(rec);
    }
    if methods.trace {
        rec.e_trace = Some(energy_trace(&blocks)?);
    }
    if methods.integral {
        let e = energy_integral(&blocks)?;
        rec.e_integral = Some(e.value);
        rec.quadrature_err = Some(e.error);
    }
    if methods.symplectic {
        rec.e_symplectic = Some(symplectic_oracle(&blocks)?.energy);
    }
    let norms = kernel_norms(&Bogoliubov::new(&blocks)?.kernel);
    rec.k_tr_norm = norms.tr;
    rec.k_hs_norm = norms.hs;
    let b0 = Blocks { g: KAPPA0 * vhat, ..blocks };
    rec.e_kappa0 = energy_trace_secular(&b0)?;
    Ok(rec)
}

/// Correlation energy `E_corr = ħκ Σ_{k∈Γ^nor} |k| e(k)` with every route
/// selected in `cfg`, plus the reference values.
pub fn correlation_energy(geom: &FermiGeometry, potential: &Potential, cfg: &CorrelationConfig) -> Result<EnergyReport> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0 / 3.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1/3), got {}", cfg.epsilon)));
    }
    if !(cfg.delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {}", cfg.delta)));
    }
    if cfg.delta >= 1.0 / 6.0 - cfg.epsilon / 2.0 {
        log::warn!("delta = {} is outside (0, 1/6 - epsilon/2); counting estimates may fail", cfg.delta);
    }
    let mass = potential.mass;
    let r = potential.shell_radius();
    let m = cfg.patches.unwrap_or_else(|| patch_count(geom.n, cfg.epsilon));
    let partition = Partition::build(m, geom.n, r, cfg.d_tilde)?;
    let shell = fattened_shell(&geom.radius, r, cfg.mode_budget)?;
    let lift = lift_to_shell(&partition, &shell, &geom.radius);
    let index = ShellIndex::new(&lift);
    let threshold = index_threshold(geom.n, cfg.delta);

    let support = potential.normal_support();
    let per_k: Vec<KRecord> = support
        .par_iter()
        .map(|&(k, v)| {
            per_k(k, mass * v, geom, &partition, &lift, &index, threshold, cfg.methods)
                .map_err(|e| Error::Numerical(format!("k = {k}: {e}")))
        })
        .collect::<Result<_>>()?;

    let weigh = |f: &dyn Fn(&KRecord) -> Option<f64>| -> Option<f64> {
        per_k.iter().map(|r| f(r).map(|e| r.k.norm() * e)).sum::<Option<f64>>()
    };
    let sums = MethodTotals {
        trace: weigh(&|r| r.e_trace),
        integral: weigh(&|r| r.e_integral),
        symplectic: weigh(&|r| r.e_symplectic),
    };
    let per_hbar = sums.scaled(geom.kappa / mass);
    let e_corr = per_hbar.scaled(geom.hbar);
    let kappa0_sum: f64 = per_k.iter().map(|r| r.k.norm() * r.e_kappa0).sum();
    let gmb = gmb_closed_form(potential)?;
    let abs_error = (per_hbar.primary() - gmb).abs();
    Ok(EnergyReport {
        schema: SCHEMA,
        n: geom.n,
        k_f: geom.kf(),
        m,
        r,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        d_tilde: cfg.d_tilde,
        hbar: geom.hbar,
        kappa: geom.kappa,
        kappa0: KAPPA0,
        mass,
        hf: hf_energy(geom, potential)?,
        per_k,
        e_corr,
        e_corr_per_hbar: per_hbar,
        e_corr_kappa0_per_hbar: KAPPA0 / mass * kappa0_sum,
        gmb_per_hbar: gmb,
        small_v_per_hbar: small_v_expansion(potential),
        abs_error,
        rel_error: if gmb != 0.0 { abs_error / gmb.abs() } else { abs_error },
        corridor_fraction: lift.corridor.len() as f64 / shell.len() as f64,
    })
}

/// `1 − λ arctan(1/λ)`, by its alternating series for large `λ`.
pub fn lindhard(lambda: f64) -> f64 {
    if lambda < 8.0 {
        return 1.0 - lambda * (1.0 / lambda).atan();
    }
    let x2 = 1.0 / (lambda * lambda);
    let mut term = x2;
    let mut sum = 0.0;
    let mut j = 0;
    while term > 1e-20 * x2 {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += s * term / (2 * j + 3) as f64;
        term *= x2;
        j += 1;
    }
    sum
}

const GMB_TOL: f64 = 1e-13;

fn half_line<F: Fn(f64) -> f64 + Copy>(f: F, split: f64) -> Result<f64> {
    let head = integrate(f, 0.0, split, GMB_TOL, 1e-14, 200_000)?;
    let tail = integrate_tail(f, split, GMB_TOL, 1e-14, 200_000)?;
    Ok(head.value + tail.value)
}

/// `∫₀^∞ (1 − λ arctan(1/λ))^p dλ`.
pub fn lindhard_moment(p: i32) -> Result<f64> {
    half_line(|l| lindhard(l).powi(p), 10.0)
}

/// `(1/π)∫₀^∞ log(1 + 4πg(1 − λ arctan(1/λ))) dλ − πg` with `g = V̂ m κ₀`.
pub fn gmb_bracket(g: f64) -> Result<f64> {
    if g == 0.0 {
        return Ok(0.0);
    }
    let c = 4.0 * PI * g;
    let split = (100.0 * g).max(10.0);
    Ok(half_line(|l| (c * lindhard(l)).ln_1p(), split)? / PI - PI * g)
}

/// `−(8π²/3)(1 − log 2)`, the small-coupling limit of `bracket(g)/g²`.
pub fn small_v_coefficient() -> f64 {
    -8.0 * PI * PI / 3.0 * (1.0 - 2f64.ln())
}

/// `(κ₀/2m) Σ_{k∈ℤ³} |k| bracket(V̂(k) m κ₀)` per unit ħ.
pub fn gmb_closed_form(potential: &Potential) -> Result<f64> {
    let m = potential.mass;
    let mut total = 0.0;
    for (k, v) in potential.normal_support() {
        total += k.norm() * gmb_bracket(v * m * KAPPA0)?;
    }
    Ok(KAPPA0 / m * total)
}

/// `−mπ(1 − log 2) Σ_{k∈ℤ³} |k| V̂(k)²` per unit ħ.
pub fn small_v_expansion(potential: &Potential) -> f64 {
    let s: f64 = potential.support().map(|(k, v)| k.norm() * v * v).sum();
    -potential.mass * PI * (1.0 - 2f64.ln()) * s
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n_target: u64,
    pub report: EnergyReport,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of `|E_corr/ħ − E_GMB|` against `N`.
    pub fitted_exponent: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`; `None` unless all
/// `y > 0` and the `x` are not all equal.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Reports at the particle numbers closest to each target.
pub fn convergence_sweep(targets: &[u64], potential: &Potential, cfg: &CorrelationConfig) -> Result<Sweep> {
    if targets.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least 3 particle numbers, got {}", targets.len())));
    }
    let mut rows = Vec::with_capacity(targets.len());
    for &t in targets {
        let start = Instant::now();
        let geom = FermiGeometry::for_target_n(t)?;
        let report = correlation_energy(&geom, potential, cfg)?;
        rows.push(SweepRow { n_target: t, report, wall_seconds: start.elapsed().as_secs_f64() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.report.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.report.abs_error).collect();
    Ok(Sweep { rows, fitted_exponent: fit_loglog(&xs, &ys) })
}

/// Γ^nor for the support of `potential`.
pub fn interaction_momenta(potential: &Potential) -> Result<Vec<Momentum>> {
    let all = gamma_nor(potential.support_radius())?;
    Ok(all.into_iter().filter(|k| potential.value(k) > 0.0).collect())
}
