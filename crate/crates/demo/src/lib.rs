//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; the plain functions below are what the bindings wrap.

use fermi_rpa::energy::{correlation_energy, gmb_bracket, small_v_coefficient, CorrelationConfig, Methods, Potential};
use fermi_rpa::lattice::FermiGeometry;
use fermi_rpa::patches::{default_d_tilde, PatchKind, Partition};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest Fermi momentum the page accepts.
pub const MAX_KF: f64 = 40.0;
/// Largest patch count the page draws.
pub const MAX_PATCHES: usize = 4096;

#[derive(Serialize)]
struct Cell {
    id: usize,
    cap: bool,
    theta: (f64, f64),
    phi: (f64, f64),
    theta_shaved: (f64, f64),
    phi_shaved: (f64, f64),
    center: [f64; 3],
}

#[derive(Serialize)]
struct Outline {
    m: usize,
    n: u64,
    shave: f64,
    max_diameter: f64,
    corridor_fraction: f64,
    cells: Vec<Cell>,
}

/// Northern cells of an `m`-patch partition for particle number `n` and
/// interaction radius `r`.
pub fn outline(m: usize, n: u64, r: f64) -> Result<String, String> {
    if m > MAX_PATCHES {
        return Err(format!("at most {MAX_PATCHES} patches"));
    }
    let part = Partition::build(m, n, r, default_d_tilde()).map_err(|e| e.to_string())?;
    let shaved: f64 = part.patches.iter().map(|p| p.area).sum();
    let cells = part
        .patches
        .iter()
        .filter(|p| p.north)
        .map(|p| Cell {
            id: p.id,
            cap: p.kind == PatchKind::Cap,
            theta: p.theta,
            phi: p.phi,
            theta_shaved: p.theta_shaved,
            phi_shaved: p.phi_shaved,
            center: p.center,
        })
        .collect();
    let out = Outline {
        m,
        n,
        shave: part.shave,
        max_diameter: part.max_diameter(),
        corridor_fraction: 1.0 - shaved / (4.0 * std::f64::consts::PI),
        cells,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    g: f64,
    bracket: f64,
    small_v: f64,
}

/// The per-momentum closed-form bracket against its small-coupling
/// approximation on `points` couplings in `(0, g_max]`.
pub fn curve(g_max: f64, points: usize) -> Result<String, String> {
    if !(g_max > 0.0 && g_max.is_finite()) || points == 0 || points > 2000 {
        return Err("need 0 < g_max and 1..=2000 points".into());
    }
    let c = small_v_coefficient();
    let pts = (1..=points)
        .map(|i| {
            let g = g_max * i as f64 / points as f64;
            gmb_bracket(g).map(|b| CurvePoint { g, bracket: b, small_v: c * g * g })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&pts).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Momentum {
    k: [i32; 3],
    patches: usize,
    e_trace: Option<f64>,
    e_integral: Option<f64>,
    e_symplectic: Option<f64>,
}

#[derive(Serialize)]
struct Energy {
    n: u64,
    k_f: f64,
    m: usize,
    hf_total: f64,
    e_corr_per_hbar: [Option<f64>; 3],
    gmb_per_hbar: f64,
    small_v_per_hbar: f64,
    per_k: Vec<Momentum>,
}

/// Correlation energy for `V̂ = v0` on `|k| ≤ 1` at Fermi momentum `kf`.
pub fn energy(kf: f64, v0: f64) -> Result<String, String> {
    if !(kf > 1.0 && kf <= MAX_KF) {
        return Err(format!("k_F must lie in (1, {MAX_KF}]"));
    }
    let geom = FermiGeometry::from_kf(kf).map_err(|e| e.to_string())?;
    let pot = Potential::radial([(0, v0), (1, v0)], 1.0).map_err(|e| e.to_string())?;
    let cfg = CorrelationConfig { methods: Methods::ALL, ..CorrelationConfig::default() };
    let r = correlation_energy(&geom, &pot, &cfg).map_err(|e| e.to_string())?;
    let t = r.e_corr_per_hbar;
    let out = Energy {
        n: r.n,
        k_f: r.k_f,
        m: r.m,
        hf_total: r.hf.total,
        e_corr_per_hbar: [t.trace, t.integral, t.symplectic],
        gmb_per_hbar: r.gmb_per_hbar,
        small_v_per_hbar: r.small_v_per_hbar,
        per_k: r
            .per_k
            .iter()
            .map(|p| Momentum { k: p.k.0, patches: p.i, e_trace: p.e_trace, e_integral: p.e_integral, e_symplectic: p.e_symplectic })
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn partition_outline(m: usize, n: f64, r: f64) -> Result<String, JsError> {
    outline(m, n as u64, r).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gmb_curve(g_max: f64, points: usize) -> Result<String, JsError> {
    curve(g_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn correlation(kf: f64, v0: f64) -> Result<String, JsError> {
    energy(kf, v0).map_err(|e| JsError::new(&e))
}
