use glhkit::circuits::{gate_unitary, regularize_with, Circuit, CzConjugation, Gate};
use glhkit::decider::{monte_carlo, EnergySampler, GlhleInstance, QpeConfig, Rule};
use glhkit::excited::build_hc;
use glhkit::glhle::{make_instance, PromiseParams};
use glhkit::operators::eigen::{eigh, eigvalsh};
use glhkit::operators::small::{gates, matmul};
use glhkit::operators::{assemble_weighted, operator_norm, restrict, LocalTerm, RegisterLayout, SparseHermitian, SubspaceBasis, TermSum, Triplets};
use glhkit::state::GuidingState;
use glhkit::verify::{check_projection_lemma, Direction, SpectralReport};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = (usize, usize, f64, f64)> {
    (0usize..8, 0usize..8, -2.0f64..2.0, -2.0f64..2.0)
}

fn hermitian(dim: usize, raw: &[(usize, usize, f64, f64)]) -> SparseHermitian {
    let mut t = Triplets::new(dim);
    for &(r, c, re, im) in raw {
        let (r, c) = (r % dim, c % dim);
        let (r, c) = (r.min(c), r.max(c));
        t.push(r, c, C64::new(re, if r == c { 0.0 } else { im }));
    }
    t.build().unwrap()
}

fn single_qubit() -> impl Strategy<Value = Vec<C64>> {
    prop::sample::select(vec![gates::x(), gates::z(), gates::h(), gates::t(), gates::i2(), gates::y()])
}

fn one_local_sum(n: usize, coeffs: &[(f64, usize, Vec<C64>)]) -> TermSum {
    let mut s = TermSum::new(RegisterLayout::flat(n).unwrap(), 2);
    for (a, q, m) in coeffs {
        let mh = glhkit::operators::small::plus_adjoint(m);
        s.push(LocalTerm::new(*a, vec![q % n], mh, "p").unwrap()).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_json_is_byte_identical(raw in prop::collection::vec(entry(), 1..20)) {
        let h = hermitian(8, &raw);
        let s = serde_json::to_string(&h).unwrap();
        let back: SparseHermitian = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn state_json_is_byte_identical(support in prop::collection::btree_set(0usize..64, 1..10)) {
        let u = GuidingState::new(64, support.into_iter().collect()).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        let back: GuidingState = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn assembly_is_linear(
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        t1 in prop::collection::vec((-1.0f64..1.0, 0usize..3, single_qubit()), 1..4),
        t2 in prop::collection::vec((-1.0f64..1.0, 0usize..3, single_qubit()), 1..4),
    ) {
        let (s1, s2) = (one_local_sum(3, &t1), one_local_sum(3, &t2));
        let joint = assemble_weighted(&[(a, &s1), (b, &s2)]).unwrap();
        let sep = SparseHermitian::lin_comb(&[(a, &s1.assemble().unwrap()), (b, &s2.assemble().unwrap())]).unwrap();
        prop_assert!(joint.max_abs_diff(&sep) <= 1e-12);
    }

    #[test]
    fn restriction_never_exceeds_the_norm(
        raw in prop::collection::vec(entry(), 1..20),
        cols in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 8), 1..4),
    ) {
        let h = hermitian(8, &raw);
        let cols: Vec<Vec<C64>> = cols.iter().map(|c| c.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        let Ok(s) = SubspaceBasis::orthonormalize("s", 8, &cols, 1e-6) else { return Ok(()) };
        if s.dim() == 0 { return Ok(()); }
        let r = restrict(&h, &s).unwrap();
        let top = *eigvalsh(&r).unwrap().last().unwrap();
        prop_assert!(top <= operator_norm(&h).unwrap() + 1e-9);
    }

    #[test]
    fn eigenvalues_sum_to_trace(raw in prop::collection::vec(entry(), 1..30)) {
        let h = hermitian(8, &raw);
        let s: f64 = eigvalsh(&h).unwrap().iter().sum();
        prop_assert!((s - h.trace()).abs() <= 1e-8);
    }

    #[test]
    fn padding_preserves_acceptance(
        singles in prop::collection::vec(single_qubit(), 0..4),
        cz_after in 0usize..4,
        m in 2usize..5,
        conj in prop::bool::ANY,
    ) {
        let mut gs: Vec<Gate> = Vec::new();
        for (i, g) in singles.iter().enumerate() {
            gs.push(Gate::single(0, i % 2, g.clone()).unwrap());
            if i == cz_after { gs.push(Gate::cz(0, 0, 1).unwrap()); }
        }
        if gs.is_empty() { gs.push(Gate::named(0, 0, "H").unwrap()); }
        let c = Circuit::sequential(1, 1, vec![0], gs).unwrap();
        let conj = if conj { CzConjugation::ZConjugated } else { CzConjugation::Plain };
        let Ok(r) = regularize_with(&c, m, 1, conj) else { return Ok(()) };
        let p0 = c.acceptance_probability().unwrap();
        prop_assert!((r.acceptance_probability().unwrap() - p0).abs() <= 1e-10);
        prop_assert_eq!(r.t1().len() + r.t2(), r.total_steps());
    }

    #[test]
    fn trajectory_matches_dense_product(singles in prop::collection::vec((single_qubit(), 0usize..3, prop::bool::ANY), 1..6)) {
        let mut gs = Vec::new();
        for (g, q, cz) in &singles {
            gs.push(Gate::single(0, *q, g.clone()).unwrap());
            if *cz { gs.push(Gate::cz(0, *q, (*q + 1) % 3).unwrap()); }
        }
        let c = Circuit::sequential(2, 1, vec![1, 0], gs).unwrap();
        let w = c.width();
        let traj = c.trajectory().unwrap();
        let d = 1usize << w;
        let mut u = glhkit::operators::small::identity(d);
        for (t, g) in c.gates.iter().enumerate() {
            u = matmul(&gate_unitary(g, w), &u);
            let i = c.input_index();
            for z in 0..d {
                prop_assert!((u[z * d + i] - traj[t + 1][z]).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn sandwich_holds_for_random_pairs(
        raw1 in prop::collection::vec(entry(), 1..12),
        diag in prop::collection::vec(0.5f64..2.0, 5),
        s_dim in 1usize..4,
    ) {
        // H2 = diag(0,..,0, d...) has null space = first s_dim coordinates
        let h1 = hermitian(8, &raw1);
        let n1 = operator_norm(&h1).unwrap();
        let mut t = Triplets::new(8);
        for i in s_dim..8 { t.push(i, i, C64::new(diag[i % 5], 0.0)); }
        let h2_unit = t.build().unwrap();
        let j = (2.0 * n1 + 1.0) / 0.5;
        let h2 = h2_unit.scaled(j);
        let idx: Vec<usize> = (0..s_dim).collect();
        let s = SubspaceBasis::coordinate("S", 8, &idx);
        let reports = check_projection_lemma(&h1, &h2, &s, j * 0.5).unwrap();
        for r in reports.iter().filter(|r| r.check != "projection_lemma.psd_equality") {
            prop_assert!(r.passed(), "{:?}", r);
        }
    }

    #[test]
    fn verdicts_match_margin_sign(claimed in -5.0f64..5.0, measured in -5.0f64..5.0, tol in 0.0f64..1.0) {
        let lo = SpectralReport::bound("c", "a", Direction::Lower, "x", claimed, measured, tol);
        let up = SpectralReport::bound("c", "a", Direction::Upper, "x", claimed, measured, tol);
        prop_assert_eq!(lo.margin, measured - claimed);
        prop_assert_eq!(lo.pass, Some(measured - claimed >= -tol));
        prop_assert_eq!(up.pass, Some(measured - claimed <= tol));
        if lo.pass == Some(false) { prop_assert_eq!(up.pass, Some(true)); }
    }

    #[test]
    fn excited_operator_is_block_diagonal(coeffs in prop::collection::vec((0.05f64..0.5, 0usize..2, single_qubit()), 1..3), c in 1usize..4) {
        let h = one_local_sum(2, &coeffs);
        let Ok(e) = build_hc(&h, c) else { return Ok(()) };
        let hc = e.hc.assemble().unwrap();
        // flag is the last qubit: entries must not connect even and odd indices
        for r in 0..hc.dim() {
            for (col, v) in hc.row(r) {
                if (r ^ col) & 1 == 1 { prop_assert!(v.norm() <= 1e-12); }
            }
        }
        let u = GuidingState::new(4, vec![0, 3]).unwrap();
        prop_assert_eq!(e.lift(&u).support.len(), 2);
    }
}

/// Levels 0.1, 0.6, 0.9 (twice); `|0>` has weight `ground_weight` on the ground state.
fn diagonal_instance(ground_weight: f64) -> GlhleInstance {
    let th = ground_weight.sqrt().acos();
    let (v0, v1) = ([th.cos(), th.sin()], [-th.sin(), th.cos()]);
    let m = faer::Mat::from_fn(4, 4, |i, j| {
        let x = if i < 2 && j < 2 {
            0.1 * v0[i] * v0[j] + 0.6 * v1[i] * v1[j]
        } else if i == j {
            0.9
        } else {
            0.0
        };
        C64::new(x, 0.0)
    });
    let h = SparseHermitian::from_dense(&m).unwrap();
    let u = GuidingState::new(4, vec![0]).unwrap();
    make_instance(&h, &u, &PromiseParams::around(0.1, 0.3, true, ground_weight * 0.999, 0, "test")).unwrap()
}

#[test]
fn sampled_cluster_frequencies_are_close_in_total_variation() {
    for w in [0.3, 0.5, 0.8] {
        let inst = diagonal_instance(w);
        let s = EnergySampler::new(&inst).unwrap();
        let shots = 10_000u64;
        let f = s.cluster_frequencies(11, shots);
        let total: f64 = s.weights.iter().sum();
        let tv: f64 = f.iter().zip(&s.weights).map(|(a, b)| (a - b / total).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 4.0 / (shots as f64).sqrt(), "w = {w}, tv = {tv}");
    }
}

#[test]
fn ground_success_is_monotone_in_repetitions() {
    let inst = diagonal_instance(0.2);
    let mut prev: Option<f64> = None;
    for reps in [1, 2, 4, 8] {
        let cfg = QpeConfig { bits: 10, p: 0.9, reps, seed: 5 };
        let r = monte_carlo(&inst, &cfg, Rule::Min, 1000).unwrap();
        if let Some(p) = prev {
            let sigma = (p * (1.0 - p) / 1000.0).sqrt();
            assert!(r.rate >= p - 2.0 * sigma, "reps {reps}: {} < {p}", r.rate);
        }
        prev = Some(r.rate);
    }
}

#[test]
fn exact_dense_eigensolver_agrees_with_sampler_spectrum() {
    let inst = diagonal_instance(0.5);
    let s = EnergySampler::new(&inst).unwrap();
    let (vals, _) = eigh(&inst.h).unwrap();
    assert_eq!(vals, s.spectrum);
}
