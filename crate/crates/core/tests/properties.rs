use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

use plic::oracle::clip_convex_volume;
use plic::positioning::{initial_guess, position, position_newton_baseline, PositionQuery, Status};
use plic::shapes::{
    make_cuboid, make_dodecahedron, make_letter_a, make_torus, make_unit_cube,
    make_unit_tetrahedron, parse_off, write_off, CuboidSpec, TorusSpec,
};
use plic::truncation::{local_cubic, precompute, StaticCoefficients};
use plic::{Polyhedron, Vec3};

fn shape(i: usize) -> Polyhedron {
    match i % 5 {
        0 => make_unit_cube(),
        1 => make_dodecahedron(),
        2 => make_torus(TorusSpec::default()).unwrap(),
        3 => make_letter_a(),
        _ => make_unit_tetrahedron(),
    }
}

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate direction", |(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            n > 1e-2 && n <= 1.0
        })
        .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
}

/// Normals that are also likely to hit faces and edges exactly.
fn normal() -> impl Strategy<Value = Vec3> {
    prop_oneof![
        4 => unit(),
        1 => (0usize..13).prop_map(|i| {
            let axes = [
                (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (-1.0, 0.0, 0.0),
                (0.0, -1.0, 0.0), (0.0, 0.0, -1.0), (1.0, 1.0, 0.0), (1.0, 0.0, -1.0),
                (0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (-1.0, 1.0, 1.0), (1.0, -3.0, 2.0),
                (0.0, 1.0, -1.0),
            ];
            let (x, y, z) = axes[i];
            Vec3::new(x, y, z).normalize()
        }),
    ]
}

fn at_fraction(c: &StaticCoefficients, t: f64) -> f64 {
    c.s_min() + t * c.span()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn volume_is_monotone(i in 0usize..5, n in normal(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let p = shape(i);
        let c = precompute(&p, n);
        let (lo, hi) = (a.min(b), a.max(b));
        let (vl, vh) = (c.truncated_volume(at_fraction(&c, lo)), c.truncated_volume(at_fraction(&c, hi)));
        prop_assert!(vl.volume <= vh.volume + 1e-14 * p.total_volume());
        prop_assert!(vl.d1 >= 0.0 && vh.d1 >= 0.0);
    }

    #[test]
    fn complement_symmetry(i in 0usize..5, n in normal(), t in -0.1..1.1f64) {
        let p = shape(i);
        let up = precompute(&p, n);
        let down = precompute(&p, -n);
        let s = at_fraction(&up, t);
        let sum = up.truncated_volume(s).volume + down.truncated_volume(-s).volume;
        prop_assert!((sum - p.total_volume()).abs() <= 1e-12 * p.total_volume());
    }

    #[test]
    fn rigid_motion_invariance(
        i in 0usize..5,
        n in unit(),
        axis in unit(),
        angle in -3.2..3.2f64,
        shift in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        t in 0.0..1.0f64,
    ) {
        let p = shape(i);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let shift = Vec3::new(shift.0, shift.1, shift.2);
        let q = p.map_vertices(|x| rot * x + shift).unwrap();
        let vol = p.total_volume();
        prop_assert!((q.total_volume() - vol).abs() <= 1e-12 * vol);
        prop_assert!(q.vector_area().norm() <= 1e-12 * q.diameter().powi(2));
        let (cp, cq) = (precompute(&p, n), precompute(&q, rot * n));
        let s = at_fraction(&cp, t);
        let (vp, vq) = (cp.truncated_volume(s).volume, cq.truncated_volume(s).volume);
        prop_assert!((vp - vq).abs() <= 1e-11 * vol, "{vp} vs {vq}");
    }

    #[test]
    fn boundary_derivatives_vanish(i in 0usize..5, n in unit()) {
        let p = shape(i);
        let aligned = p.face_geometry().iter().any(|g| g.normal.dot(&n).abs() > 1.0 - 1e-9);
        prop_assume!(!aligned);
        let c = precompute(&p, n);
        prop_assert!(c.truncated_volume(c.s_min()).d1.abs() <= 1e-10);
        prop_assert!(c.truncated_volume(c.s_max()).d1.abs() <= 1e-10);
    }

    #[test]
    fn local_cubic_reproduces_bracket(i in 0usize..5, n in normal(), k in any::<prop::sample::Index>(), u in 0.0..1.0f64, w in 0.0..1.0f64) {
        let p = shape(i);
        let c = precompute(&p, n);
        let (a, b) = c.bracket(k.index(c.bracket_count()));
        prop_assume!(b - a > 1e-9 * c.span());
        let inner = |x: f64| a + (b - a) * (1e-3 + x * (1.0 - 2e-3));
        let cubic = local_cubic(&c.truncated_volume(inner(u)));
        let s = inner(w);
        prop_assert!((cubic.eval(s) - c.truncated_volume(s).volume).abs() <= 1e-10 * p.total_volume());
    }

    #[test]
    fn fixed_point(i in 0usize..5, n in normal(), t in 0.0..1.0f64) {
        let p = shape(i);
        let c = precompute(&p, n);
        let target = c.truncated_volume(at_fraction(&c, t)).volume / c.total_volume();
        prop_assume!(target > 1e-14 && target < 1.0 - 1e-14);
        let r = position(&PositionQuery::new(&c, target).unwrap());
        let got = c.truncated_volume(r.s_star).volume / c.total_volume();
        prop_assert!((got - target).abs() <= 1e-12, "{got} vs {target}");
        prop_assert!(r.n_trunc >= 1);
    }

    #[test]
    fn positioning_symmetry(i in 0usize..5, n in normal(), target in 1e-9..(1.0 - 1e-9)) {
        let p = shape(i);
        let up = precompute(&p, n);
        let down = precompute(&p, -n);
        let a = position(&PositionQuery::new(&up, target).unwrap());
        let b = position(&PositionQuery::new(&down, 1.0 - target).unwrap());
        let fa = up.truncated_volume(a.s_star).volume / p.total_volume();
        let fb = down.truncated_volume(b.s_star).volume / p.total_volume();
        prop_assert!((fa + fb - 1.0).abs() <= 2e-12 + 2.0 * f64::EPSILON);
    }

    #[test]
    fn one_truncation_when_guess_hits_bracket(i in 0usize..5, n in normal(), target in 1e-6..(1.0 - 1e-6)) {
        let p = shape(i);
        let c = precompute(&p, n);
        let r = position(&PositionQuery::new(&c, target).unwrap());
        let guess = initial_guess(&c, target);
        let (a, b) = c.bracket(c.bracket_index(guess));
        let vol = c.total_volume();
        let (va, vb) = (c.truncated_volume(a).volume / vol, c.truncated_volume(b).volume / vol);
        // Strictly inside the guessed bracket, away from rounding at its ends.
        prop_assume!(va + 1e-10 < target && target < vb - 1e-10);
        prop_assert_eq!(r.n_trunc, 1);
        prop_assert!(matches!(r.status, Status::CubicSolved | Status::Converged));
    }

    #[test]
    fn iterates_stay_admissible(i in 0usize..5, n in normal(), target in 1e-9..(1.0 - 1e-9), newton in any::<bool>()) {
        let p = shape(i);
        let c = precompute(&p, n);
        let q = PositionQuery::new(&c, target).unwrap().with_trace(true);
        let r = if newton { position_newton_baseline(&q) } else { position(&q) };
        for e in r.trace.unwrap() {
            prop_assert!(e.s >= c.s_min() && e.s <= c.s_max());
        }
    }

    #[test]
    fn convex_truncation_matches_clipping(
        psi in (0.1..10.0f64, 0.1..10.0f64),
        n in normal(),
        t in -0.05..1.05f64,
    ) {
        let p = make_cuboid(CuboidSpec { psi1: psi.0, psi2: psi.1 }).unwrap();
        let c = precompute(&p, n);
        let s = at_fraction(&c, t);
        let clipped = clip_convex_volume(&p, &c.frame(s)).unwrap();
        prop_assert!((c.truncated_volume(s).volume - clipped).abs() <= 1e-10 * p.total_volume());
    }

    #[test]
    fn pentagon_area_matches_clipped_polygon(k in 0usize..12, n in unit(), t in 0.0..1.0f64) {
        let p = make_dodecahedron();
        let c = precompute(&p, n);
        let s = at_fraction(&c, t);
        let frame = c.frame(s);
        let loop_pts: Vec<Vec3> = p.faces()[k].iter().map(|&i| p.vertices()[i]).collect();
        let mut clipped = Vec::new();
        for m in 0..loop_pts.len() {
            let (x, y) = (loop_pts[m], loop_pts[(m + 1) % loop_pts.len()]);
            let (lx, ly) = (frame.level(&x), frame.level(&y));
            if lx <= 0.0 {
                clipped.push(x);
            }
            if (lx < 0.0) != (ly < 0.0) && lx != 0.0 && ly != 0.0 {
                clipped.push(x + (y - x) * (lx / (lx - ly)));
            }
        }
        let area = if clipped.len() < 3 {
            0.0
        } else {
            let nf = p.face_geometry()[k].normal;
            (0..clipped.len())
                .map(|m| clipped[m].cross(&clipped[(m + 1) % clipped.len()]))
                .sum::<Vec3>()
                .dot(&nf)
                * 0.5
        };
        prop_assert!((c.face_area(k, s).area - area).abs() <= 1e-12);
    }

    #[test]
    fn off_round_trip_is_bit_exact(i in 0usize..5, axis in unit(), angle in -3.2..3.2f64) {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let p = shape(i).map_vertices(|x| rot * x).unwrap();
        let mut buf = Vec::new();
        write_off(&p, &mut buf).unwrap();
        let q = parse_off(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(p.faces(), q.faces());
        for (a, b) in p.vertices().iter().zip(q.vertices()) {
            for d in 0..3 {
                prop_assert_eq!(a[d].to_bits(), b[d].to_bits());
            }
        }
    }
}

#[test]
fn builders_are_closed() {
    for i in 0..5 {
        let p = shape(i);
        assert!(p.vector_area().norm() <= 1e-12 * p.diameter().powi(2));
    }
}
