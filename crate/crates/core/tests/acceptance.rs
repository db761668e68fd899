//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p plic-core --test acceptance -- --nocapture` to see
//! the report.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plic::bench::{generate_grid, run_benchmark, AggregateRow, BenchConfig, Method};
use plic::oracle::{clip_convex_volume, McSampler};
use plic::positioning::{initial_guess, initial_guess_normalized, position, PositionQuery};
use plic::shapes::{
    make_cuboid, make_dodecahedron, make_letter_a, make_torus, make_torus_strict, make_unit_cube,
    make_unit_tetrahedron, CuboidSpec, ShapeKind, TorusSpec,
};
use plic::truncation::{local_cubic, precompute};
use plic::{Polyhedron, Vec3};

fn report(name: &str, pass: bool, detail: impl AsRef<str>) {
    println!(
        "{} {name}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(pass, "{name}: {}", detail.as_ref());
}

fn standard_shapes() -> Vec<(String, Polyhedron)> {
    ShapeKind::standard()
        .iter()
        .map(|k| (k.id(), k.build().unwrap()))
        .collect()
}

fn sweep(method: Method) -> Vec<AggregateRow> {
    let grid = generate_grid(80, 50).unwrap();
    let config = BenchConfig {
        method,
        tol: 1e-12,
        keep_records: false,
    };
    standard_shapes()
        .iter()
        .map(|(id, p)| run_benchmark(p, id, &grid, &config).unwrap().aggregate)
        .collect()
}

fn proposed() -> &'static [AggregateRow] {
    static CELL: OnceLock<Vec<AggregateRow>> = OnceLock::new();
    CELL.get_or_init(|| sweep(Method::Proposed))
}

fn newton() -> &'static [AggregateRow] {
    static CELL: OnceLock<Vec<AggregateRow>> = OnceLock::new();
    CELL.get_or_init(|| sweep(Method::Newton))
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[test]
fn convergence_contract() {
    let started = Instant::now();
    let rows = proposed();
    let mut pass = true;
    let mut detail = Vec::new();
    for r in rows {
        let rate = r.fallbacks as f64 / r.instances as f64;
        pass &= r.instances == 777_600 && r.violations == 0 && rate <= 1e-3;
        detail.push(format!(
            "{} fallbacks={} violations={} max_err={:.1e}",
            r.shape, r.fallbacks, r.violations, r.max_error
        ));
    }
    detail.push(format!("{:.1}s", started.elapsed().as_secs_f64()));
    report("convergence on full grid", pass, detail.join("; "));
}

#[test]
fn truncation_averages() {
    let expected = [
        ("cube", 1.13),
        ("dodeca", 1.18),
        ("torus", 1.52),
        ("letterA", 1.46),
        ("tetra", 1.14),
    ];
    let rows = proposed();
    let mut pass = true;
    let mut detail = Vec::new();
    for (shape, reference) in expected {
        let r = rows.iter().find(|r| r.shape == shape).unwrap();
        pass &= (r.n_av - reference).abs() <= 0.10;
        detail.push(format!("{shape} {:.3} (ref {reference})", r.n_av));
    }
    report("average truncations", pass, detail.join("; "));
}

#[test]
fn symmetric_fraction_averages() {
    let mut pass = true;
    let mut detail = Vec::new();
    for r in proposed() {
        let pf = &r.per_fraction;
        let worst = (0..pf.len())
            .map(|i| (pf[i].n_av - pf[pf.len() - 1 - i].n_av).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.5;
        detail.push(format!("{} {worst:.3}", r.shape));
    }
    report("symmetry about one half", pass, detail.join("; "));
}

#[test]
fn newton_baseline_comparison() {
    let started = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (p, n) in proposed().iter().zip(newton()) {
        let ratio = n.n_av / p.n_av;
        let pf = &n.per_fraction;
        let k = pf.len();
        // Averages grow towards 1e-9 and towards 1 - 1e-9.
        let low = (0..4).all(|i| pf[i].n_av > pf[i + 1].n_av);
        let high = (k - 5..k - 1).all(|i| pf[i].n_av < pf[i + 1].n_av);
        pass &= ratio >= 3.0 && low && high;
        detail.push(format!(
            "{} ratio {ratio:.2} monotone {}",
            p.shape,
            low && high
        ));
    }
    detail.push(format!("{:.1}s", started.elapsed().as_secs_f64()));
    report("newton baseline", pass, detail.join("; "));
}

#[test]
fn clipping_oracle_agreement() {
    let shapes = [
        make_unit_cube(),
        make_cuboid(CuboidSpec {
            psi1: 2.0,
            psi2: 0.5,
        })
        .unwrap(),
        make_unit_tetrahedron(),
        make_dodecahedron(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = &shapes[rng.random_range(0..shapes.len())];
        let c = precompute(p, random_unit(&mut rng));
        let s = rng.random_range(c.s_min()..=c.s_max());
        let exact = c.truncated_volume(s).volume;
        let clipped = clip_convex_volume(p, &c.frame(s)).unwrap();
        worst = worst.max((exact - clipped).abs() / p.total_volume());
    }
    report(
        "clipping oracle",
        worst <= 1e-10,
        format!("10000 triples, max relative deviation {worst:.2e}"),
    );
}

#[test]
fn monte_carlo_oracle_agreement() {
    let started = Instant::now();
    let shapes = [make_torus(TorusSpec::default()).unwrap(), make_letter_a()];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut outliers = 0;
    let mut worst = 0.0f64;
    for p in &shapes {
        let sampler = McSampler::new(p, 10_000_000, 42);
        for _ in 0..50 {
            let c = precompute(p, random_unit(&mut rng));
            let s = rng.random_range(c.s_min()..=c.s_max());
            let exact = c.truncated_volume(s).volume;
            let est = sampler.estimate(&c.frame(s));
            let z = if est.std_error > 0.0 {
                (est.volume - exact).abs() / est.std_error
            } else {
                (est.volume - exact).abs() / (p.total_volume() * 1e-12)
            };
            worst = worst.max(z);
            outliers += (z > 3.0) as usize;
        }
    }
    report(
        "monte carlo oracle",
        outliers == 0,
        format!(
            "100 triples at 1e7 samples, max {worst:.2} sigma, {outliers} beyond 3 sigma, {:.1}s",
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn derivative_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = (0.0f64, 0.0f64);
    for (_, p) in standard_shapes() {
        let mut checked = 0;
        while checked < 100 {
            let c = precompute(&p, random_unit(&mut rng));
            let l = c.span();
            let s = rng.random_range(c.s_min()..c.s_max());
            let margin = 1e-5 * l;
            if c.bracket_bounds().iter().any(|b| (s - b).abs() < margin) {
                continue;
            }
            let h = 1e-6 * l;
            let (lo, mid, hi) = (
                c.truncated_volume(s - h),
                c.truncated_volume(s),
                c.truncated_volume(s + h),
            );
            let vol = c.total_volume();
            let d1 = (hi.volume - lo.volume) / (2.0 * h);
            let d2 = (hi.d1 - lo.d1) / (2.0 * h);
            let e1 = (d1 - mid.d1).abs() / mid.d1.abs().max(vol / l);
            let e2 = (d2 - mid.d2).abs() / mid.d2.abs().max(vol / (l * l));
            worst = (worst.0.max(e1), worst.1.max(e2));
            checked += 1;
        }
    }
    report(
        "finite-difference derivatives",
        worst.0 <= 1e-6 && worst.1 <= 1e-4,
        format!("first {:.1e}, second {:.1e}", worst.0, worst.1),
    );
}

#[test]
fn cubic_exact_in_bracket() {
    let shapes = standard_shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut brackets = 0;
    while brackets < 1000 {
        let (_, p) = &shapes[rng.random_range(0..shapes.len())];
        let c = precompute(p, random_unit(&mut rng));
        let i = rng.random_range(0..c.bracket_count());
        let (a, b) = c.bracket(i);
        if b - a < 1e-9 * c.span() {
            continue;
        }
        let inner = |r: &mut ChaCha8Rng| a + (b - a) * r.random_range(0.001..0.999);
        let cubic = local_cubic(&c.truncated_volume(inner(&mut rng)));
        for _ in 0..5 {
            let s = inner(&mut rng);
            let err = (cubic.eval(s) - c.truncated_volume(s).volume).abs() / p.total_volume();
            worst = worst.max(err);
        }
        brackets += 1;
    }
    report(
        "cubic exact within bracket",
        worst <= 1e-10,
        format!("1000 brackets, max relative deviation {worst:.2e}"),
    );
}

#[test]
fn initial_guess_closed_form() {
    let c = precompute(&make_dodecahedron(), Vec3::new(0.3, -0.2, 0.9).normalize());
    let half_exact = initial_guess(&c, 0.5) == c.s_min() + c.span() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(f64::EPSILON..1.0);
        let z = initial_guess_normalized(a);
        worst = worst.max((3.0 * z * z - 2.0 * z * z * z - a).abs());
    }
    report(
        "initial guess",
        half_exact && worst <= 1e-12,
        format!("midpoint exact {half_exact}, max residual {worst:.1e}"),
    );
}

#[test]
fn shape_fidelity() {
    let counts = |p: &Polyhedron| (p.face_count(), p.edge_count(), p.vertex_count());
    let torus = make_torus_strict(TorusSpec::default()).unwrap();
    let dodeca = make_dodecahedron();
    let letter = make_letter_a();
    let checks = [
        ("cube", counts(&make_unit_cube()) == (6, 12, 8)),
        ("dodeca", counts(&dodeca) == (12, 30, 20)),
        ("tetra", counts(&make_unit_tetrahedron()) == (4, 6, 4)),
        ("letterA", counts(&letter) == (15, 33, 22)),
        (
            "torus",
            torus.face_count() == 63 && torus.vertex_count() == 63,
        ),
        (
            "dodeca volume",
            (dodeca.total_volume() - (15.0 + 7.0 * 5f64.sqrt()) / 4.0).abs() <= 1e-10,
        ),
        (
            "letterA volume",
            (letter.total_volume() - 235.0 / 1372.0).abs() <= 1e-12,
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        "shape fidelity",
        failed.is_empty(),
        if failed.is_empty() {
            "all counts and volumes match".to_string()
        } else {
            format!("mismatch: {}", failed.join(", "))
        },
    );
}

/// Mean over a reduced grid of the per-instance minimum over repeated runs,
/// which filters out preemption by concurrently running tests.
fn robust_mean_time_ns(p: &Polyhedron) -> f64 {
    let grid = generate_grid(12, 20).unwrap();
    let mut total = 0.0;
    for dir in &grid.normals {
        for &alpha in &grid.fractions {
            let best = (0..5)
                .map(|_| {
                    let start = Instant::now();
                    let c = precompute(p, dir.normal);
                    let r = position(&PositionQuery::new(&c, alpha).unwrap());
                    std::hint::black_box(r.s_star);
                    start.elapsed().as_nanos()
                })
                .min()
                .unwrap();
            total += best as f64;
        }
    }
    total / grid.instance_count() as f64
}

#[test]
fn timing_order() {
    let shapes = [
        ("tetra", make_unit_tetrahedron()),
        ("cube", make_unit_cube()),
        ("dodeca", make_dodecahedron()),
        ("letterA", make_letter_a()),
        ("torus", make_torus(TorusSpec::default()).unwrap()),
    ];
    let times: Vec<f64> = shapes.iter().map(|(_, p)| robust_mean_time_ns(p)).collect();
    let ordered = times.windows(2).all(|w| w[0] < w[1]);
    let detail: Vec<String> = shapes
        .iter()
        .zip(&times)
        .map(|((name, _), t)| format!("{name} {:.2}us", t / 1e3))
        .collect();
    report("relative timing order", ordered, detail.join(" < "));
}
