use bakeoff::mesh::{build_cube_mesh, HexElement, HexMesh};
use bakeoff::operators::{
    apply_bp1, apply_bp3, apply_bp35, interpolate_to_gl, project_to_gll, AccessCounters, Benchmark, FieldVector,
    OperatorInstance, Variant,
};
use bakeoff::oracle;
use bakeoff::perf_model::{flop_model, traffic};
use bakeoff::quadrature::{gl_rule, gll_rule};
use bakeoff::reference_ops::{interp_matrix, Tensor3};
use bakeoff::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> HexMesh {
    HexMesh::from_elements(vec![HexElement::reference()], 2.0)
}

fn curved() -> HexMesh {
    build_cube_mesh(2, 2.0).unwrap().perturbed(0.25, 17).unwrap()
}

fn op(bp: Benchmark, n: usize, lambda: f64, mesh: &HexMesh, v: Variant) -> OperatorInstance {
    OperatorInstance::new(bp, n, lambda, mesh, v).unwrap()
}

fn random_tensor(dims: [usize; 3], seed: u64) -> Tensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_fn(dims, |_, _, _| rng.gen_range(-1.0..1.0))
}

fn kron_interp(n: usize, transpose: bool) -> DMatrix<f64> {
    let m = interp_matrix(n).unwrap();
    let d = DMatrix::from_fn(m.rows(), m.cols(), |a, i| m.get(a, i));
    let d = if transpose { d.transpose() } else { d };
    d.kronecker(&d).kronecker(&d)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn interpolation_preserves_constants_and_linears() {
    let i = interp_matrix(1).unwrap();
    let c = interpolate_to_gl(&Tensor3::from_fn([2, 2, 2], |_, _, _| 3.5), &i).unwrap();
    assert!(c.data().iter().all(|v| (v - 3.5).abs() < 1e-14));

    let gll = gll_rule(2).unwrap().nodes;
    let gl = gl_rule(3).unwrap().nodes;
    let x = interpolate_to_gl(&Tensor3::from_fn([2, 2, 2], |a, _, _| gll[a]), &i).unwrap();
    for k in 0..3 {
        for j in 0..3 {
            for (a, g) in gl.iter().enumerate() {
                assert!((x.get(a, j, k) - g).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn interpolation_and_projection_match_kronecker() {
    for n in 1..=4 {
        let (nq, ng) = (n + 1, n + 2);
        let i = interp_matrix(n).unwrap();
        let u = random_tensor([nq; 3], n as u64);
        let got = interpolate_to_gl(&u, &i).unwrap();
        let want = kron_interp(n, false) * DVector::from_column_slice(u.data());
        assert!(max_diff(got.data(), want.as_slice()) <= 1e-13);

        let v = random_tensor([ng; 3], 100 + n as u64);
        let got = project_to_gll(&v, &i).unwrap();
        let want = kron_interp(n, true) * DVector::from_column_slice(v.data());
        assert!(max_diff(got.data(), want.as_slice()) <= 1e-13);

        let lhs = interpolate_to_gl(&u, &i).unwrap().dot(&v);
        let rhs = u.dot(&project_to_gll(&v, &i).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

        let zero = project_to_gll(&Tensor3::zeros([ng; 3]), &i).unwrap();
        assert!(zero.data().iter().all(|&z| z == 0.0));
    }
    let i = interp_matrix(2).unwrap();
    assert!(matches!(
        interpolate_to_gl(&Tensor3::zeros([4, 3, 3]), &i),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn mass_of_ones_is_volume() {
    for n in 1..=6 {
        let mut c = AccessCounters::default();
        let m = op(Benchmark::Bp1, n, 0.0, &reference(), Variant::Fused);
        let out = apply_bp1(&m, &FieldVector::constant(1, m.points_per_element(), 1.0), &mut c).unwrap();
        assert!((out.sum() - 8.0).abs() <= 1e-12, "N={n}");

        let mesh = build_cube_mesh(2, 2.0).unwrap();
        let m = op(Benchmark::Bp1, n, 0.0, &mesh, Variant::Baseline);
        let out = m
            .apply_untallied(&FieldVector::constant(8, m.points_per_element(), 1.0))
            .unwrap();
        assert!((out.sum() - 8.0).abs() <= 1e-10, "N={n}");
    }
}

#[test]
fn stiffness_kills_constants_and_reduces_to_mass() {
    let mesh = curved();
    let volume = mesh.volume().unwrap();
    for n in 1..=6 {
        for bp in [Benchmark::Bp35, Benchmark::Bp3] {
            for v in bp.variants() {
                let s = op(bp, n, 0.0, &mesh, v);
                let ones = FieldVector::constant(mesh.len(), s.points_per_element(), 1.0);
                let out = s.apply_untallied(&ones).unwrap();
                assert!(out.max_abs() <= 1e-10, "BP{bp} {v} N={n}: {:e}", out.max_abs());
                let out = s.with_lambda(1.0).unwrap().apply_untallied(&ones).unwrap();
                assert!((out.sum() - volume).abs() <= 1e-10, "BP{bp} {v} N={n}");
            }
        }
    }
    let s = op(Benchmark::Bp3, 3, 1.0, &reference(), Variant::Fused);
    let out = s.apply_untallied(&FieldVector::constant(1, 64, 1.0)).unwrap();
    assert!((out.sum() - 8.0).abs() <= 1e-11);
}

#[test]
fn matches_dense_oracle() {
    let mesh = curved();
    let lambda = 0.8;
    for bp in Benchmark::ALL {
        let tol = match bp {
            Benchmark::Bp1 => 1e-12,
            Benchmark::Bp35 => 1e-11,
            Benchmark::Bp3 => 1e-10,
        };
        for n in 1..=3 {
            let dense: Vec<_> = (0..mesh.len())
                .map(|e| oracle::assemble(bp, &mesh, e, n, lambda).unwrap())
                .collect();
            for v in bp.variants() {
                let a = op(bp, n, lambda, &mesh, v);
                let q = FieldVector::random(mesh.len(), a.points_per_element(), 5 + n as u64);
                let mut c = AccessCounters::default();
                let out = match bp {
                    Benchmark::Bp1 => apply_bp1(&a, &q, &mut c),
                    Benchmark::Bp35 => apply_bp35(&a, &q, &mut c),
                    Benchmark::Bp3 => apply_bp3(&a, &q, &mut c),
                }
                .unwrap();
                for (e, d) in dense.iter().enumerate() {
                    let want = d.matvec(q.element(e));
                    let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    let err = max_diff(out.element(e), &want) / scale;
                    assert!(err <= tol, "BP{bp} {v} N={n} e={e}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn wrong_benchmark_and_bad_input_rejected() {
    let mesh = reference();
    let m = op(Benchmark::Bp1, 2, 0.0, &mesh, Variant::Fused);
    let mut c = AccessCounters::default();
    assert!(apply_bp35(&m, &m.zeros(), &mut c).is_err());
    assert!(matches!(
        m.apply(&FieldVector::zeros(1, 8), &mut c),
        Err(Error::Shape { .. })
    ));
    let mut q = m.zeros();
    q.data_mut()[3] = f64::NAN;
    assert_eq!(m.apply(&q, &mut c).unwrap_err(), Error::NonFinite);
    assert!(matches!(
        OperatorInstance::new(Benchmark::Bp35, 2, 0.0, &mesh, Variant::SymFused),
        Err(Error::UnsupportedVariant { .. })
    ));
    assert!(OperatorInstance::new(Benchmark::Bp3, 2, -1.0, &mesh, Variant::Fused).is_err());
    assert!(OperatorInstance::new(Benchmark::Bp3, 16, 0.0, &mesh, Variant::Fused).is_err());
}

#[test]
fn variants_agree() {
    let mesh = curved();
    for bp in Benchmark::ALL {
        for n in [1, 4, 7] {
            let base = op(bp, n, 0.3, &mesh, Variant::Baseline);
            for seed in 0..5 {
                let q = FieldVector::random(mesh.len(), base.points_per_element(), seed);
                let want = base.apply_untallied(&q).unwrap();
                for v in bp.variants() {
                    let got = base.with_variant(v).unwrap().apply_untallied(&q).unwrap();
                    assert!(got.rel_diff(&want) <= 1e-12, "BP{bp} {v} N={n}");
                }
            }
        }
    }
}

#[test]
fn element_order_is_irrelevant() {
    let mesh = curved();
    let perm = [5, 2, 7, 0, 1, 6, 3, 4];
    let permuted = HexMesh::from_elements(perm.iter().map(|&e| mesh.elements[e]).collect(), mesh.extent);
    for bp in Benchmark::ALL {
        let a = op(bp, 3, 0.5, &mesh, Variant::Fused);
        let b = op(bp, 3, 0.5, &permuted, Variant::Fused);
        let np = a.points_per_element();
        let q = FieldVector::random(8, np, 9);
        let qp = FieldVector::from_fn(8, np, |e, p| q.element(perm[e])[p]);
        let out = a.apply_untallied(&q).unwrap();
        let outp = b.apply_untallied(&qp).unwrap();
        for (e, &src) in perm.iter().enumerate() {
            assert_eq!(outp.element(e), out.element(src));
        }
    }
}

#[test]
fn counters_match_models() {
    let mesh = reference();
    for n in 1..=15 {
        let ng = n as u64 + 2;
        for bp in Benchmark::ALL {
            let t = traffic(bp, n, 1).unwrap();
            let fused = op(bp, n, 1.0, &mesh, Variant::Fused).element_counters();
            assert_eq!(fused.global_reads, 8 * t.reads, "BP{bp} N={n}");
            assert_eq!(fused.global_writes, 8 * t.writes, "BP{bp} N={n}");
            for v in bp.variants() {
                let c = op(bp, n, 1.0, &mesh, v).element_counters();
                assert_eq!(c.flops, flop_model(bp, v, n).unwrap(), "BP{bp} {v} N={n}");
            }
            let base = op(bp, n, 1.0, &mesh, Variant::Baseline).element_counters();
            assert!(base.global_bytes() > fused.global_bytes());
            let (bs, fs) = match bp {
                Benchmark::Bp1 => (5 * ng + 1, 5),
                Benchmark::Bp35 => (1, 2),
                Benchmark::Bp3 => (5 * ng + 3, 7),
            };
            assert_eq!((base.syncs, fused.syncs), (bs, fs), "BP{bp} N={n}");
            if bp.interpolates() {
                let sym = op(bp, n, 1.0, &mesh, Variant::SymFused).element_counters();
                assert_eq!(2 * sym.interp_loads, fused.interp_loads, "BP{bp} N={n}");
                assert_eq!(sym.syncs, fused.syncs);
                assert_eq!(sym.global_bytes(), fused.global_bytes());
                assert!(sym.scratch_reads < fused.scratch_reads);
            }
        }
    }
    let m = op(Benchmark::Bp1, 12, 0.0, &mesh, Variant::Baseline).element_counters();
    assert_eq!(m.syncs, 71);
}

#[test]
fn counters_scale_with_elements_and_thread_count() {
    let mesh = curved();
    for bp in Benchmark::ALL {
        let a = op(bp, 4, 0.2, &mesh, Variant::Baseline);
        let q = FieldVector::random(mesh.len(), a.points_per_element(), 1);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut c = AccessCounters::default();
                let out = a.apply(&q, &mut c).unwrap();
                (c, out)
            })
        };
        let (c1, o1) = run(1);
        let (c4, o4) = run(4);
        assert_eq!(c1, c4);
        assert!(o1.rel_diff(&o4) <= 1e-13);
        let e = a.element_counters();
        assert_eq!(c1.flops, 8 * e.flops);
        assert_eq!(c1.global_reads, 8 * e.global_reads);
        assert_eq!(c1.syncs, 8 * e.syncs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_symmetric_and_semidefinite(
        bp_idx in 0usize..3,
        v_idx in 0usize..3,
        n in 1usize..=6,
        lambda in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let bp = Benchmark::ALL[bp_idx];
        let v = Variant::ALL[v_idx];
        prop_assume!(bp.supports(v));
        let mesh = build_cube_mesh(2, 2.0).unwrap().perturbed(0.2, seed % 1000).unwrap();
        let a = op(bp, n, lambda, &mesh, v);
        let u = FieldVector::random(8, a.points_per_element(), seed);
        let w = FieldVector::random(8, a.points_per_element(), seed ^ 0xabcdef);
        let au = a.apply_untallied(&u).unwrap();
        let aw = a.apply_untallied(&w).unwrap();
        let scale = au.norm() * w.norm();
        prop_assert!((au.dot(&w) - u.dot(&aw)).abs() <= 1e-11 * scale);
        prop_assert!(au.dot(&u) >= -1e-10);
    }
}
