mod common;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tentwave::local_solver::{
    assemble, solve_tent_assembled, solve_tent_closed_form, BoundaryConstraint, TentMaterial,
};
use tentwave::marcher::{march, InitialData, MarchOptions, Problem, Solution};
use tentwave::mesh1d::{Material, Region, SpatialMesh, TentType};
use tentwave::stability::{amplification, empirical_blowup, spectral_sweep, Verdict, POWER_BOUND};
use tentwave::tent_pitcher::{pitch_slab, uniform_stencil, PitchOptions};
use tentwave::verify::{
    convergence_study, ibp_identity_check, pulse_problem, trace_check, trace_corpus, Poly2, Scheme, TraceQuadrature,
};

fn report(n: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let timed = elapsed <= limit;
    let ok = pass && timed;
    println!(
        "criterion {n} {}: {name}: {detail} [{:.2}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(timed, "criterion {n} exceeded its runtime limit");
}

const LEAPFROG_H: f64 = 1.0 / 32.0;
const LEAPFROG_LEVELS: usize = 200;
const LEAPFROG_FIELDS: u64 = 10;
const LEAPFROG_TOL: f64 = 1e-12;

#[test]
fn criterion_1_leapfrog_equivalence() {
    let start = Instant::now();
    let (h, k) = (LEAPFROG_H, 0.9 * LEAPFROG_H);
    let ac = k / h;
    let n_half = (2.0 / h).round() as usize;
    let half = 0.5 * h;
    let t_final = LEAPFROG_LEVELS as f64 * 0.5 * k;
    let mesh = uniform_stencil(1.0, h, k, t_final).unwrap();
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for seed in 0..LEAPFROG_FIELDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<[f64; 2]> = (0..=n_half).map(|_| common::random_pair(&mut rng)).collect();
        let d = data.clone();
        let init: InitialData = Arc::new(move |x| d[(x / half).round() as usize]);
        let problem = Problem::new(Material::homogeneous(1.0), 1.0, 1.0, init);
        let sol = march(&mesh, &problem, &MarchOptions::default()).unwrap();
        let mut field: HashMap<(usize, usize), [f64; 2]> = HashMap::new();
        for node in sol.nodes() {
            let j = (node.x / half).round() as usize;
            let n = (node.t / (0.5 * k)).round() as usize;
            field.insert((j, n), [node.u1, node.u2]);
        }
        // lattice[n][j]: level 0 holds every vertex, later levels alternate parity
        let mut lattice: Vec<Vec<Option<[f64; 2]>>> = vec![vec![None; n_half + 1]; LEAPFROG_LEVELS + 1];
        for j in 0..=n_half {
            lattice[0][j] = Some(data[j]);
        }
        let scale = data.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for n in 1..=LEAPFROG_LEVELS {
            let parity = if n % 2 == 1 { 0 } else { 1 };
            for j in (parity..=n_half).step_by(2) {
                if j == 0 || j == n_half {
                    lattice[n][j] = Some(field[&(j, n)]);
                    continue;
                }
                let (prev, w) = if n == 1 { (lattice[0][j].unwrap(), 0.5 * ac) } else { (lattice[n - 2][j].unwrap(), ac) };
                let (l, r) = (lattice[n - 1][j - 1].unwrap(), lattice[n - 1][j + 1].unwrap());
                let next = [prev[0] + w * (r[1] - l[1]), prev[1] + w * (r[0] - l[0])];
                let got = field[&(j, n)];
                let err = (got[0] - next[0]).abs().max((got[1] - next[1]).abs()) / scale;
                worst = worst.max(err);
                compared += 1;
                lattice[n][j] = Some(next);
            }
        }
    }
    report(
        1,
        "leapfrog equivalence",
        worst <= LEAPFROG_TOL,
        start.elapsed(),
        Duration::from_secs(5),
        format!("max relative difference {worst:.2e} over {compared} interior nodes (tol {LEAPFROG_TOL:.0e})"),
    );
}

const CLOSED_FORM_TENTS: usize = 1000;
const CLOSED_FORM_TOL: f64 = 1e-12;

#[test]
fn criterion_2_closed_form_matches_assembled() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..CLOSED_FORM_TENTS {
        let c = rng.random_range(0.5..2.0);
        let kind = common::random_kind(&mut rng);
        let tent = common::random_tent(&mut rng, kind, c, c, 0.99);
        let mut inflow = common::random_inflow(&mut rng, &tent);
        // boundary tents carry bottom values that already satisfy the unit-impedance condition
        match kind {
            TentType::Left => inflow.bottom[1] = inflow.bottom[0],
            TentType::Right => inflow.bottom[1] = -inflow.bottom[0],
            TentType::Interior => {}
        }
        let closed = solve_tent_closed_form(&tent, &inflow, c).unwrap();
        let constraint = BoundaryConstraint::for_tent(&tent, 1.0, 1.0);
        let assembled = solve_tent_assembled(&tent, &inflow, &TentMaterial::homogeneous(c), None, constraint)
            .unwrap_or_else(|e| panic!("tent {i}: {e}"))
            .apex;
        let scale = closed
            .iter()
            .chain(&inflow.bottom)
            .chain(inflow.left.iter().flatten())
            .chain(inflow.right.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (closed[0] - assembled[0]).abs().max((closed[1] - assembled[1]).abs()) / scale;
        worst = worst.max(err);
    }
    report(
        2,
        "closed form equals assembled",
        worst <= CLOSED_FORM_TOL,
        start.elapsed(),
        Duration::from_secs(5),
        format!("max relative apex difference {worst:.2e} over {CLOSED_FORM_TENTS} tents (tol {CLOSED_FORM_TOL:.0e})"),
    );
}

const SLOPE_RANGE: (f64, f64) = (1.85, 2.15);
const RATIO_RANGE: (f64, f64) = (1.0 / 3.0, 3.0);

#[test]
fn criterion_3_second_order_convergence() {
    let start = Instant::now();
    let hs: Vec<f64> = (3..=9).map(|l| 0.5f64.powi(l)).collect();
    let tp = convergence_study(Scheme::Tp, &hs, 0.9, 0.5).unwrap();
    let ctcs = convergence_study(Scheme::Ctcs, &hs, 0.9, 0.5).unwrap();
    let inside = |s: f64| s >= SLOPE_RANGE.0 && s <= SLOPE_RANGE.1;
    let ratios: Vec<f64> = tp.rows.iter().zip(&ctcs.rows).map(|(a, b)| a.err / b.err).collect();
    let ratios_ok = ratios.iter().all(|&r| r >= RATIO_RANGE.0 && r <= RATIO_RANGE.1);
    let running: Vec<String> = tp.rows.iter().skip(1).map(|r| format!("{:.2}", r.slope_running)).collect();
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    report(
        3,
        "second-order convergence",
        inside(tp.slope) && inside(ctcs.slope) && ratios_ok,
        start.elapsed(),
        Duration::from_secs(120),
        format!(
            "TP slope {:.3}, CTCS slope {:.3} (need [{}, {}]); TP/CTCS ratios in [{rmin:.2}, {rmax:.2}]; TP running slopes {}",
            tp.slope,
            ctcs.slope,
            SLOPE_RANGE.0,
            SLOPE_RANGE.1,
            running.join(" ")
        ),
    );
}

const DROP_FACTOR: f64 = 10.0;

#[test]
fn criterion_4_error_drop_after_exit() {
    let start = Instant::now();
    let h = 1.0 / 160.0;
    let problem = pulse_problem();
    let exact = problem.exact.clone().unwrap();
    let mesh = uniform_stencil(1.0, h, 0.9 * h, 2.0).unwrap();
    let sol = march(&mesh, &problem, &MarchOptions::default()).unwrap();
    let hist = sol.error_history(2.0, 200, &*exact).unwrap();
    let peak = hist.iter().filter(|(t, _)| *t <= 0.8 + 1e-12).map(|r| r.1).fold(0.0, f64::max);
    let end = hist.last().unwrap().1;
    report(
        4,
        "error drop after pulse exit",
        peak >= DROP_FACTOR * end,
        start.elapsed(),
        Duration::from_secs(30),
        format!("max error on [0, 0.8] {peak:.3e}, error at t=2 {end:.3e}, ratio {:.1} (need >= {DROP_FACTOR})", peak / end),
    );
}

const MODULUS_TOL: f64 = 1e-12;
const BLOWUP_STEPS: usize = 200;
const BLOWUP_FACTOR: f64 = 10.0;

#[test]
fn criterion_5_von_neumann() {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for ac in [0.5, 0.9, 0.99] {
        let mut dev = 0.0f64;
        for i in 0..256 {
            let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 256.0;
            for g in amplification(ac, 1.0, theta).eigenvalues {
                dev = dev.max((g.norm() - 1.0).abs());
            }
        }
        let sweep = spectral_sweep(ac, 1.0, 256);
        ok &= dev <= MODULUS_TOL && sweep.max_power_norm <= POWER_BOUND && sweep.verdict == Verdict::Stable;
        details.push(format!("ac={ac}: |g|-1 <= {dev:.1e}, max ||G^n|| {:.2}", sweep.max_power_norm));
    }
    let unstable = spectral_sweep(1.05, 1.0, 256);
    let blow = empirical_blowup(1.05, 256, BLOWUP_STEPS, 5);
    ok &= unstable.max_spectral_radius > 1.05 && unstable.verdict == Verdict::Unstable && blow.growth >= BLOWUP_FACTOR;
    details.push(format!(
        "ac=1.05: spectral radius {:.4}, growth 10^{:.1} in {BLOWUP_STEPS} steps",
        unstable.max_spectral_radius, blow.log10_growth
    ));
    report(5, "von Neumann suite", ok, start.elapsed(), Duration::from_secs(10), details.join("; "));
}

const UNISOLVENCY_TENTS: usize = 10_000;
const PIVOT_FLOOR: f64 = 1e-13;

#[test]
fn criterion_6_unisolvency() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut min_pivot = f64::INFINITY;
    let mut jumps = 0usize;
    let mut failures = 0usize;
    for _ in 0..UNISOLVENCY_TENTS {
        let (tent, material, constraint) = common::random_general_tent(&mut rng, 0.99);
        if material.left != material.right {
            jumps += 1;
        }
        let inflow = common::random_inflow(&mut rng, &tent);
        let sys = assemble(&tent, &inflow, &material, None, constraint).unwrap();
        min_pivot = min_pivot.min(sys.relative_min_pivot());
        if sys.solve().is_err() {
            failures += 1;
        }
    }
    report(
        6,
        "unisolvency",
        failures == 0 && min_pivot > PIVOT_FLOOR,
        start.elapsed(),
        Duration::from_secs(10),
        format!("{UNISOLVENCY_TENTS} tents ({jumps} with material jumps), min relative pivot {min_pivot:.3e}, {failures} failures"),
    );
}

const IBP_TOL: f64 = 1e-10;
const TRACE_RATIO_BOUND: f64 = 10.0;
const GROWTH_FACTOR: f64 = 10.0;
const STABLE_CHANGE: f64 = 0.01;

fn monomials(max_deg: u32) -> Vec<Poly2> {
    let mut out = Vec::new();
    for i in 0..=max_deg {
        for j in 0..=max_deg - i {
            out.push(Poly2::new(vec![(i, j, 1.0)]));
        }
    }
    out
}

#[test]
fn criterion_7_trace_and_ibp() {
    let start = Instant::now();
    let base = tentwave::mesh1d::Tent {
        center: 3,
        tent_type: TentType::Interior,
        x: 0.4,
        t_bottom: 0.2,
        k: 0.3,
        h_l: 0.25,
        h_r: 0.35,
        p_l: 0.6,
        p_r: -0.2,
    };
    let tents = [
        base,
        tentwave::mesh1d::Tent { tent_type: TentType::Left, x: 0.0, h_l: 0.0, p_l: 0.0, ..base },
        tentwave::mesh1d::Tent { tent_type: TentType::Right, x: 1.0, h_r: 0.0, p_r: 0.0, ..base },
    ];
    let polys = monomials(3);
    let mut ibp_worst = 0.0f64;
    for tent in &tents {
        for w in &polys {
            for v in &polys {
                ibp_worst = ibp_worst.max(ibp_identity_check(w, v, tent).unwrap().residual);
            }
        }
    }
    let quad = TraceQuadrature::Graded { layers: 40, points: 12 };
    let corpus = trace_corpus(50, 7);
    let max_ratio = corpus.iter().map(|(_, w, dw)| trace_check(&**w, &**dw, quad).ratio).fold(0.0, f64::max);
    let ratios_finite = corpus.len() == 50 && max_ratio.is_finite() && max_ratio <= TRACE_RATIO_BOUND;

    let w = |x: f64, _t: f64| x.powf(-0.5);
    let dw = |_x: f64, _t: f64| 0.0;
    let levels = [8, 32, 128, 512];
    let reps: Vec<_> =
        levels.iter().map(|&layers| trace_check(&w, &dw, TraceQuadrature::Graded { layers, points: 8 })).collect();
    let growth = reps.last().unwrap().unweighted_inflow / reps[0].unweighted_inflow;
    let graph_change = reps
        .windows(2)
        .map(|p| (p[1].graph_norm_sq - p[0].graph_norm_sq).abs() / p[1].graph_norm_sq)
        .fold(0.0, f64::max);
    let w_norm: Vec<String> = reps.iter().map(|r| format!("{:.5}", r.weighted_inflow + r.weighted_outflow + r.difference)).collect();
    report(
        7,
        "trace and integration-by-parts identities",
        ibp_worst <= IBP_TOL && ratios_finite && growth >= GROWTH_FACTOR && graph_change < STABLE_CHANGE,
        start.elapsed(),
        Duration::from_secs(30),
        format!(
            "IBP residual {ibp_worst:.1e} over {} pairs on 3 tent types; corpus max ratio {max_ratio:.3}; \
             x^-1/2 unweighted inflow growth {growth:.1}x, graph norm change {:.2}%, weighted norms {}",
            polys.len() * polys.len(),
            100.0 * graph_change,
            w_norm.join(" ")
        ),
    );
}

fn left_region_residual(sol: &Solution, t: f64) -> f64 {
    let tr = sol.snapshot(t).unwrap();
    tr.x.iter().zip(&tr.u).filter(|(x, _)| **x < 0.4).map(|(_, u)| u[0].abs()).fold(0.0, f64::max)
}

const REFLECTION_LIMIT: f64 = 0.05;
const RESIDUAL_TIME: f64 = 1.0;

#[test]
fn criterion_8_reflectionless_interface() {
    let start = Instant::now();
    let material = Material::new(1.0, vec![Region { kappa1: 2.0, kappa2: 2.0 }, Region::UNIT]).unwrap();
    let init: InitialData = Arc::new(|x| {
        let g = (-5000.0 * (x - 0.2f64).powi(2)).exp();
        [0.5 * g, -0.5 * g]
    });
    let incident = 0.5;
    let run = |scale: f64| {
        let mesh = SpatialMesh::piecewise_uniform(0.0, &[(0.5, 1e-3 * scale, 0), (1.0, 2e-3 * scale, 1)]).unwrap();
        let slab_height = 0.002 * scale;
        let slab = pitch_slab(&mesh, &material, slab_height, &PitchOptions::default()).unwrap();
        let tm = slab.stack_slabs((RESIDUAL_TIME / slab_height).round() as usize).unwrap();
        let problem = Problem::new(material.clone(), 1.0, 1.0, init.clone());
        left_region_residual(&march(&tm, &problem, &MarchOptions::default()).unwrap(), RESIDUAL_TIME)
    };
    let base = run(1.0);
    let fine = run(0.5);
    report(
        8,
        "reflectionless interface",
        base < REFLECTION_LIMIT * incident && fine < base,
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "max |u1| on x<0.4 at t={RESIDUAL_TIME}: {base:.4} ({:.2}% of incident, limit {:.0}%), refined {fine:.4}",
            100.0 * base / incident,
            100.0 * REFLECTION_LIMIT
        ),
    );
}

const BOUNDED_FACTOR: f64 = 2.0;
const ENERGY_DRIFT: f64 = 0.1;
const MIN_AMPLITUDE_FRACTION: f64 = 0.25;

#[test]
fn criterion_9_reflection_transmission() {
    let start = Instant::now();
    let left = Region { kappa1: 4.0, kappa2: 1.0 };
    let right = Region { kappa1: 0.5, kappa2: 0.5 };
    let material = Material::new(1.0, vec![left, right]).unwrap();
    let h = 1.0 / 500.0;
    let mesh = SpatialMesh::piecewise_uniform(0.0, &[(0.5, h, 0), (1.0, h, 1)]).unwrap();
    let slab_height = 0.001;
    let slab = pitch_slab(&mesh, &material, slab_height, &PitchOptions::default()).unwrap();
    let tm = slab.stack_slabs((1.0 / slab_height).round() as usize).unwrap();
    let init: InitialData = Arc::new(|x| {
        let g = (-5000.0 * (x - 0.2f64).powi(2)).exp();
        [0.25 * g, -0.5 * g]
    });
    let problem = Problem::new(material, 0.0, 0.0, init);
    let sol = march(&tm, &problem, &MarchOptions::default()).unwrap();

    // admittances sqrt(k1/k2) of the two sides
    let (y1, y2) = (left.matched_impedance(), right.matched_impedance());
    let (r_theory, t_theory) = (0.25 * (y1 - y2) / (y1 + y2), 0.25 * 2.0 * y1 / (y1 + y2));
    let tr = sol.snapshot(0.7).unwrap();
    let peak_in = |lo: f64, hi: f64| {
        tr.x.iter().zip(&tr.u).filter(|(x, _)| **x >= lo && **x <= hi).map(|(_, u)| u[0].abs()).fold(0.0, f64::max)
    };
    let reflected = peak_in(0.3, 0.5);
    let transmitted = peak_in(0.5, 1.0);
    let mut max_abs = 0.0f64;
    for i in 0..=20 {
        let tr = sol.snapshot(i as f64 * 0.05).unwrap();
        max_abs = tr.u.iter().flatten().fold(max_abs, |m, v| m.max(v.abs()));
    }
    let (e0, e1) = (sol.energy(0.0).unwrap(), sol.energy(1.0).unwrap());
    let drift = (e1 / e0 - 1.0).abs();
    let ok = sol.covered_time() >= 1.0
        && reflected >= MIN_AMPLITUDE_FRACTION * r_theory
        && transmitted >= MIN_AMPLITUDE_FRACTION * t_theory
        && max_abs <= BOUNDED_FACTOR * 0.5
        && drift <= ENERGY_DRIFT;
    report(
        9,
        "reflection and transmission",
        ok,
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "{} tents; at t=0.7 reflected |u1| {reflected:.4} (plane-wave {r_theory:.4}), transmitted {transmitted:.4} \
             (plane-wave {t_theory:.4}); max |u| on [0,1] {max_abs:.3}; E(1)/E(0) = {:.4}",
            tm.n_tents(),
            e1 / e0
        ),
    );
}
