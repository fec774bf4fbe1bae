//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use fermi_rpa::energy::{
    convergence_sweep, gmb_bracket, lindhard_moment, CorrelationConfig, Methods, Potential,
};
use fermi_rpa::focksandbox::run_suite;
use fermi_rpa::lattice::{fattened_shell, FermiGeometry, FermiRadius, ModeSet, Momentum, DEFAULT_MODE_BUDGET};
use fermi_rpa::paircount::{count_exact, pair_table, ShellIndex};
use fermi_rpa::patches::{default_d_tilde, index_sets, index_threshold, lift_to_shell, patch_count, Partition};
use fermi_rpa::quadratic::{energy_integral, energy_trace, symplectic_oracle, Blocks, Bogoliubov};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_blocks(rng: &mut ChaCha8Rng, size: usize) -> Blocks {
    let u_sq: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
    let v: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..1.0) / (size as f64).sqrt()).collect();
    Blocks::symmetric(&u_sq, &v, rng.gen_range(0.05..2.0)).unwrap()
}

fn cross_method() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let (mut worst_int, mut worst_sym) = (0.0f64, 0.0f64);
    for size in [1, 2, 5, 20] {
        for _ in 0..100 {
            let b = random_blocks(&mut rng, size);
            let t = energy_trace(&b).map_err(|e| e.to_string())?;
            let i = energy_integral(&b).map_err(|e| e.to_string())?.value;
            let s = symplectic_oracle(&b).map_err(|e| e.to_string())?.energy;
            worst_int = worst_int.max((t - i).abs());
            worst_sym = worst_sym.max((t - s).abs());
        }
    }
    ensure(
        worst_int <= 1e-8 && worst_sym <= 1e-10,
        format!("max |trace-integral| = {worst_int:.2e}, max |trace-symplectic| = {worst_sym:.2e}"),
    )
}

fn scalar_case() -> Outcome {
    let b = Blocks::symmetric(&[1.0], &[1.0], 1.0).unwrap();
    let want = 3f64.sqrt() - 2.0;
    let es = [
        energy_trace(&b).unwrap(),
        energy_integral(&b).unwrap().value,
        symplectic_oracle(&b).unwrap().energy,
    ];
    let err = es.iter().map(|e| (e - want).abs()).fold(0.0, f64::max);
    let kernel = Bogoliubov::new(&b).unwrap().kernel;
    let mut eig: Vec<f64> = kernel.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let q = 0.25 * 3f64.ln();
    let kerr = (eig[0] + q).abs().max((eig[1] - q).abs());
    ensure(err <= 1e-10 && kerr <= 1e-10, format!("energy error {err:.2e}, kernel eigenvalue error {kerr:.2e}"))
}

fn gmb_constants() -> Outcome {
    let m1 = lindhard_moment(1).unwrap();
    let m2 = lindhard_moment(2).unwrap();
    let e1 = (m1 - PI / 4.0).abs();
    let e2 = (m2 - PI / 3.0 * (1.0 - 2f64.ln())).abs();
    let g = 1e-3;
    let ratio = gmb_bracket(g).unwrap() / (g * g);
    let want = -8.0 * PI * PI / 3.0 * (1.0 - 2f64.ln());
    let rel = (ratio / want - 1.0).abs();
    ensure(
        e1 <= 1e-9 && e2 <= 1e-9 && rel <= 0.01,
        format!("moment errors {e1:.2e}, {e2:.2e}; F(g)/g^2 = {ratio:.5} vs {want:.5} ({:.3}%)", 100.0 * rel),
    )
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// `(q_a k₃ − q₃ k_a) sgn k₃`, the scaled projection along `k` onto `x₃ = 0`.
fn projected(q: [i64; 3], k: [i64; 3], axis: usize) -> i64 {
    (q[axis] * k[2] - q[2] * k[axis]) * k[2].signum()
}

fn in_box(q: [i64; 3], k: [i64; 3], a: i64) -> bool {
    let w = a * k[2].abs();
    (0..2).all(|ax| (-w..w).contains(&projected(q, k, ax)))
}

/// Lines of direction `k` whose projection lies in the box, enumerated by
/// their representative with `0 ≤ n₃ < |k₃|/g`.
fn lines_in_box(k: [i64; 3], a: i64, kf: f64) -> Result<i64, String> {
    let g = gcd(gcd(k[0], k[1]), k[2]);
    let reps = k[2].abs() / g;
    let reach = a + 2 * reps * (k[0].abs() + k[1].abs()) + 2;
    let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
    let mut lines = 0;
    for n3 in 0..reps {
        for n1 in -reach..=reach {
            for n2 in -reach..=reach {
                let q = [n1, n2, n3];
                if !in_box(q, k, a) {
                    continue;
                }
                // distance of the line from the origin
                let x = q.map(|c| c as f64);
                let t = (x[0] * k[0] as f64 + x[1] * k[1] as f64 + x[2] * k[2] as f64) / (kn * kn);
                let d = (0..3).map(|i| (x[i] - t * k[i] as f64).powi(2)).sum::<f64>().sqrt();
                if d > kf - 2.0 * kn {
                    return Err(format!("line through {q:?} barely meets the ball"));
                }
                lines += 1;
            }
        }
    }
    Ok(g * lines)
}

fn box_modes(shell: &ModeSet, radius: &FermiRadius, k: [i64; 3], a: i64) -> (ModeSet, ModeSet) {
    let (mut h, mut p) = (Vec::new(), Vec::new());
    for q in shell {
        let c = q.0.map(i64::from);
        if in_box(c, k, a) {
            if radius.contains(q) {
                h.push(*q);
            } else {
                p.push(*q);
            }
        }
    }
    (ModeSet::from_vec(h), ModeSet::from_vec(p))
}

/// Exit pairs `(h, h + k)` of every lattice line, grouped by line.
fn exit_lines(shell: &ModeSet, radius: &FermiRadius, k: &Momentum) -> HashMap<[i64; 3], Vec<Momentum>> {
    let kk = k.0.map(i64::from);
    let g = gcd(gcd(kk[0], kk[1]), kk[2]);
    let step = kk.map(|c| c / g);
    let mut lines: HashMap<[i64; 3], Vec<Momentum>> = HashMap::new();
    for h in shell {
        if radius.contains(h) && !radius.contains(&(*h + *k)) {
            let c = h.0.map(i64::from);
            let t = c[2].div_euclid(step[2]);
            let rep = [c[0] - t * step[0], c[1] - t * step[1], c[2] - t * step[2]];
            lines.entry(rep).or_default().push(*h);
        }
    }
    lines
}

fn counting_oracle() -> Outcome {
    let mut checked = 0;
    let mut worst_boundary = 0.0f64;
    for kf in [10.0, 20.0] {
        let radius = FermiRadius::from_kf(kf).unwrap();
        let shell = fattened_shell(&radius, 2.0, DEFAULT_MODE_BUDGET).unwrap();
        let a = (0.3 * kf).round() as i64;
        let ks: Vec<[i64; 3]> = (-2..=2i64)
            .flat_map(|x| (-2..=2i64).flat_map(move |y| (-2..=2i64).map(move |z| [x, y, z])))
            .filter(|k| k[2] != 0 && k.iter().map(|c| c * c).sum::<i64>() <= 4)
            .collect();
        for k in &ks {
            let km = Momentum::new(k[0] as i32, k[1] as i32, k[2] as i32);
            let (h, p) = box_modes(&shell, &radius, *k, a);
            let exact = count_exact(&h, &p, &km) as i64;
            let literal = lines_in_box(*k, a, kf)?;
            if exact != literal {
                return Err(format!("k_F = {kf}, k = {km}: count {exact} vs line construction {literal}"));
            }
            checked += 1;
        }
        // true patches
        let geom = FermiGeometry::from_kf(kf).unwrap();
        let part = Partition::build(patch_count(geom.n, 1.0 / 27.0), geom.n, 2.0, default_d_tilde()).unwrap();
        let lift = lift_to_shell(&part, &shell, &radius);
        for k in &ks {
            let km = Momentum::new(k[0] as i32, k[1] as i32, k[2] as i32);
            let g = gcd(gcd(k[0], k[1]), k[2]);
            let lines = exit_lines(&shell, &radius, &km);
            let sets = index_sets(&part, &km, index_threshold(geom.n, 2.0 / 27.0)).unwrap();
            for &alpha in &sets.plus {
                let exact = count_exact(&lift.holes[alpha], &lift.particles[alpha], &km) as i64;
                let (mut inside, mut boundary) = (0i64, 0i64);
                for (rep, pairs) in &lines {
                    // continuous exit point of the line
                    let x = rep.map(|c| c as f64);
                    let u = km.unit();
                    let b: f64 = (0..3).map(|i| x[i] * u[i]).sum();
                    let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - kf * kf;
                    let s = -b + (b * b - c).max(0.0).sqrt();
                    let exit = [x[0] + s * u[0], x[1] + s * u[1], x[2] + s * u[2]];
                    let exit_in = part.locate(&exit) == Some(alpha);
                    let mut members = vec![exit_in];
                    for h in pairs {
                        members.push(part.locate_momentum(h) == Some(alpha));
                        members.push(part.locate_momentum(&(*h + km)) == Some(alpha));
                    }
                    if members.iter().all(|&m| m) {
                        inside += 1;
                    } else if members.iter().any(|&m| m) {
                        boundary += 1;
                    }
                }
                let literal = g * inside;
                if (exact - literal).abs() > g * boundary {
                    return Err(format!(
                        "k_F = {kf}, k = {km}, patch {alpha}: |{exact} - {literal}| exceeds {g} x {boundary} boundary lines"
                    ));
                }
                if exact > 0 {
                    worst_boundary = worst_boundary.max(g as f64 * boundary as f64 / exact as f64);
                }
            }
        }
    }
    ensure(true, format!("{checked} boxes exact; largest boundary share on true patches {worst_boundary:.2}"))
}

fn counting_convergence() -> Outcome {
    let k = Momentum::new(0, 0, 1);
    let mut worst = Vec::new();
    for n in [10_000u64, 100_000, 1_000_000] {
        let geom = FermiGeometry::for_target_n(n).unwrap();
        let part = Partition::build(patch_count(geom.n, 1.0 / 27.0), geom.n, 1.0, default_d_tilde()).unwrap();
        let shell = fattened_shell(&geom.radius, 1.0, DEFAULT_MODE_BUDGET).unwrap();
        let lift = lift_to_shell(&part, &shell, &geom.radius);
        let index = ShellIndex::new(&lift);
        let table = pair_table(&part, &lift, &index, &k, geom.kf(), index_threshold(geom.n, 2.0 / 27.0)).unwrap();
        let kf = geom.kf();
        let w = table
            .entries
            .iter()
            .filter(|e| e.plus)
            .map(|e| {
                let p = &part.patches[e.alpha];
                let v_sq = e.n_sq as f64 / (kf * kf * k.norm());
                (v_sq / (p.area * k.unit().iter().zip(&p.center).map(|(a, b)| a * b).sum::<f64>().abs()) - 1.0).abs()
            })
            .fold(0.0, f64::max);
        worst.push(w);
    }
    ensure(
        worst.windows(2).all(|w| w[1] < w[0]),
        format!("max relative deviation {:.4} / {:.4} / {:.4}", worst[0], worst[1], worst[2]),
    )
}

fn end_to_end() -> Outcome {
    let pot = Potential::parse("radial:0=0.5,1=0.5", 1.0).unwrap();
    let cfg = CorrelationConfig { methods: Methods::TRACE, ..CorrelationConfig::default() };
    let sweep = convergence_sweep(&[10_000, 30_000, 100_000, 300_000], &pot, &cfg).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = sweep.rows.iter().map(|r| r.report.abs_error).collect();
    let negative = sweep.rows.iter().all(|r| r.report.e_corr.primary() < 0.0);
    let slope = sweep.fitted_exponent.unwrap_or(f64::NAN);
    ensure(
        errs.windows(2).all(|w| w[1] < w[0]) && slope < 0.0 && negative,
        format!(
            "errors {}; slope {slope:.3}; E_corr < 0: {negative}",
            errs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" / ")
        ),
    )
}

fn partition_quality() -> Outcome {
    let r = 1.0;
    let mut area_err = 0.0f64;
    let mut scaled = Vec::new();
    let mut min_width = f64::INFINITY;
    for m in [8usize, 16, 32, 64, 128, 256, 512, 1024, 2048] {
        let n = (m as f64).powf(3.0 / (1.0 + 3.0 / 27.0)).round() as u64;
        let geom = FermiGeometry::for_target_n(n.max(100)).unwrap();
        let part = Partition::build(m, geom.n, r, default_d_tilde()).unwrap();
        let want = 4.0 * PI / m as f64;
        for p in &part.patches {
            area_err = area_err.max((p.pre_area / want - 1.0).abs());
            let q = &part.patches[p.mirror];
            if q.mirror != p.id || q.center != p.center.map(|c| -c) || q.theta != p.theta || q.phi != p.phi {
                return Err(format!("M = {m}: patch {} is not the exact mirror of {}", q.id, p.id));
            }
        }
        scaled.push(part.max_diameter() * (m as f64).sqrt());
        min_width = min_width.min(part.min_corridor_angle(16) * geom.kf() / (2.0 * r));
    }
    let spread = scaled.iter().map(|d| d / scaled[0]).fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    ensure(
        area_err <= 1e-10 && spread.0 >= 1.0 / 1.5 && spread.1 <= 1.5 && min_width >= 1.0,
        format!(
            "area error {area_err:.1e}; diam*sqrt(M) ratio in [{:.3}, {:.3}]; corridor width / 2R >= {min_width:.4}",
            spread.0, spread.1
        ),
    )
}

fn sandbox() -> Outcome {
    let suite = run_suite(4, 0).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let disc: Vec<String> = suite.effective.iter().map(|e| format!("{:.3e}", e.discrepancy)).collect();
    let sharp = suite.ccr.iter().map(|c| c.sharp_constant).fold(0.0, f64::max);
    ensure(
        failed.is_empty() && suite.effective.len() == 4,
        format!("failed checks {failed:?}; sharp CCR constant {sharp:.3}; discrepancy {}", disc.join(" / ")),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 cross-method energy agreement", cross_method),
        ("2 scalar closed form", scalar_case),
        ("3 GMB constants", gmb_constants),
        ("4 counting oracle", counting_oracle),
        ("5 counting convergence", counting_convergence),
        ("6 end-to-end convergence", end_to_end),
        ("7 partition quality", partition_quality),
        ("8 sandbox lemmas", sandbox),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failures += 1;
                println!("FAIL criterion {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
