//! Worked examples with independently computed expected values.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use becnet::analysis::{
    extract_decay_rate, fit_scaling, predict_rates, predict_rates_for, zero_crossing_frequency, ScalingMode,
};
use becnet::error::Error;
use becnet::estimates::{parameter_table, LabParams};
use becnet::fockspace::{
    bilinear_operator, collective_spin_operator, enumerate_basis, excitation_operator, expectation, node_number_operator,
    number_operator, spin_coherent_state, Axis, BasisIndex, DensityMatrix, Level, Mode, ModeSpec, Operator, Sector,
    StateVector, C64,
};
use becnet::hamiltonians::{
    build_collective_entangler, build_effective_blocked, build_effective_entangler, build_effective_two_node,
    build_interaction_hamiltonian, build_lambda_hamiltonian, build_pump_hamiltonian, build_szsz, build_total_effective,
    verify_fiber_diagonalization, PhysicalParams,
};
use becnet::lindblad::{
    analytic_z_dephasing, evolve_master, evolve_unitary, make_cavity_loss_channel, make_dephasing_channels,
    make_spontaneous_emission_channels, propagate_master, propagate_unitary, EvolveOptions, LindbladModel, Trajectory,
};
use becnet::moments::{
    compare_exact, moment_rhs, solve_moments, tanh_k0, tanh_law, MomentOptions, MomentState,
};
use becnet::protocols::{
    analytic_cat_state, analytic_entangled_state, cavity_basis, run_dephasing_echo, run_echo_experiment,
    run_gate_protocol, two_node_basis, DephasingSetup,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn occupation(basis: &BasisIndex, modes: &[(Mode, u32)]) -> Vec<u32> {
    let mut occ = vec![0; basis.spec().n_modes()];
    for &(m, k) in modes {
        occ[basis.spec().slot(m).unwrap()] = k;
    }
    occ
}

fn single_ab(n: u32) -> Arc<BasisIndex> {
    enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B], n)).unwrap()
}

fn max_dense_diff(a: &Operator, b: &Operator) -> f64 {
    (&a.to_dense() - &b.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Purity of the node-1 reduced state of a two-node `{a, b}` vector.
fn node1_purity(psi: &StateVector) -> f64 {
    let basis = psi.basis();
    let n = basis.spec().bosons_per_node as usize;
    let mut m = vec![vec![C64::new(0.0, 0.0); n + 1]; n + 1];
    for (i, amp) in psi.amplitudes().iter().enumerate() {
        let k1 = basis.occupation(i, Mode::a(0)).unwrap() as usize;
        let k2 = basis.occupation(i, Mode::a(1)).unwrap() as usize;
        m[k1][k2] = *amp;
    }
    let mut rho = vec![vec![C64::new(0.0, 0.0); n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            rho[i][j] = (0..=n).map(|k| m[i][k] * m[j][k].conj()).sum();
        }
    }
    let mut p = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            p += (rho[i][j] * rho[j][i]).re;
        }
    }
    p
}

// ---------------------------------------------------------------- fockspace

#[test]
fn basis_single_node_stars_and_bars() {
    let b = single_ab(2);
    assert_eq!(b.dim(), 3);
    assert_eq!(b.states(), &[vec![0, 2], vec![1, 1], vec![2, 0]]);
    for (i, s) in b.states().iter().enumerate() {
        assert_eq!(b.index_of(s), Some(i));
    }
}

#[test]
fn basis_two_node_product() {
    assert_eq!(two_node_basis(1).unwrap().dim(), 4);
    let full = enumerate_basis(ModeSpec::atoms(2, &[Level::A, Level::B, Level::E], 3)).unwrap();
    assert_eq!(full.dim(), 10 * 10);
}

#[test]
fn basis_excitation_sector_matches_tuple_scan() {
    let n = 2u32;
    let basis = enumerate_basis(
        ModeSpec::atoms(2, &[Level::B, Level::E], n).with_photon(1).with_sector(Sector::Exactly(2 * n)),
    )
    .unwrap();
    // k counts excited atoms here, so 2N - k1 - k2 + n with k = ground atoms.
    let mut count = 0;
    for k1 in 0..=n {
        for k2 in 0..=n {
            for p in 0..=1 {
                if 2 * n - k1 - k2 + p == 2 * n {
                    count += 1;
                }
            }
        }
    }
    assert_eq!(basis.dim(), count);
    for i in 0..basis.dim() {
        assert_eq!(basis.excitation(i), 2 * n);
    }
}

#[test]
fn basis_unsatisfiable_is_an_error() {
    let r = enumerate_basis(ModeSpec::atoms(1, &[Level::B, Level::E], 2).with_sector(Sector::Exactly(5)));
    assert!(matches!(r, Err(Error::EmptyBasis(_))));
}

#[test]
fn coherent_state_all_in_a() {
    let b = single_ab(3);
    let psi = spin_coherent_state(c(1.0), c(0.0), 3, &b).unwrap();
    for (i, amp) in psi.amplitudes().iter().enumerate() {
        let want = if b.state(i) == [3, 0] { 1.0 } else { 0.0 };
        assert!((amp - c(want)).norm() < 1e-14);
    }
}

#[test]
fn coherent_state_binomial_amplitudes() {
    let b = single_ab(2);
    let r = c(FRAC_1_SQRT_2);
    let psi = spin_coherent_state(r, r, 2, &b).unwrap();
    for (k, want) in [(2u32, 0.5), (1, FRAC_1_SQRT_2), (0, 0.5)] {
        let i = b.index_of(&[k, 2 - k]).unwrap();
        assert!((psi.amplitudes()[i] - c(want)).norm() < 1e-14);
    }
}

#[test]
fn coherent_state_random_norm_and_sz() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let b = single_ab(7);
    let sz = collective_spin_operator(&b, 0, Axis::Z).unwrap();
    for _ in 0..20 {
        let th: f64 = rng.random_range(0.0..PI);
        let (pa, pb): (f64, f64) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
        let alpha = C64::from_polar((th / 2.0).cos(), pa);
        let beta = C64::from_polar((th / 2.0).sin(), pb);
        let psi = spin_coherent_state(alpha, beta, 7, &b).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let want = 7.0 * (alpha.norm_sqr() - beta.norm_sqr());
        let got = expectation(&psi, &sz).unwrap();
        // Direct sum over the binomial weights.
        let direct: f64 = (0..=7u32)
            .map(|k| {
                let w = binom(7, k) * alpha.norm_sqr().powi(k as i32) * beta.norm_sqr().powi(7 - k as i32);
                w * (2.0 * k as f64 - 7.0)
            })
            .sum();
        assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12);
        assert!((direct - want).abs() < 1e-12);
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn coherent_state_rejects_bad_input() {
    let b = single_ab(2);
    assert!(matches!(spin_coherent_state(c(1.0), c(1.0), 2, &b), Err(Error::NotNormalized(_))));
    assert!(spin_coherent_state(c(1.0), c(0.0), 3, &b).is_err());
}

#[test]
fn bilinear_single_hop() {
    let b = single_ab(1);
    let ab = bilinear_operator(&b, Mode::a(0), Mode::b(0)).unwrap();
    let out = StateVector::fock(&b, &[0, 1]).unwrap().apply(&ab).unwrap();
    let i = b.index_of(&[1, 0]).unwrap();
    assert!((out.amplitudes()[i] - c(1.0)).norm() < 1e-15);
    assert!(out.amplitudes().iter().enumerate().all(|(j, a)| j == i || a.norm() == 0.0));
}

#[test]
fn number_operator_eigenvalues() {
    let b = single_ab(5);
    let na = bilinear_operator(&b, Mode::a(0), Mode::a(0)).unwrap();
    for k in 0..=5u32 {
        let i = b.index_of(&[k, 5 - k]).unwrap();
        assert!((na.get(i, i) - c(k as f64)).norm() < 1e-15);
    }
    assert!(na.off_diagonal().max_abs() == 0.0);
}

#[test]
fn bilinear_cross_node_pairing_names_the_law() {
    let b = two_node_basis(2).unwrap();
    match bilinear_operator(&b, Mode::a(0), Mode::b(1)) {
        Err(Error::Conservation { law, .. }) => assert!(law.contains("node")),
        other => panic!("expected a conservation error, got {other:?}"),
    }
}

/// Ladder matrices on the unconstrained two-mode space with cutoff `n` per
/// mode, projected onto the `n_a + n_b = n` shell.
fn dense_projected(n: u32, create_a: bool, annihilate_a: bool) -> Vec<Vec<f64>> {
    let d = (n + 1) as usize;
    let idx = |na: usize, nb: usize| na * d + nb;
    let mut full = vec![vec![0.0; d * d]; d * d];
    for na in 0..d {
        for nb in 0..d {
            let (mut xa, mut xb, mut amp) = (na as i64, nb as i64, 1.0);
            if annihilate_a {
                amp *= (xa as f64).sqrt();
                xa -= 1;
            } else {
                amp *= (xb as f64).sqrt();
                xb -= 1;
            }
            if xa < 0 || xb < 0 {
                continue;
            }
            if create_a {
                xa += 1;
                amp *= (xa as f64).sqrt();
            } else {
                xb += 1;
                amp *= (xb as f64).sqrt();
            }
            if xa as usize >= d || xb as usize >= d {
                continue;
            }
            full[idx(xa as usize, xb as usize)][idx(na, nb)] = amp;
        }
    }
    let shell: Vec<(usize, usize)> = (0..d).map(|k| (k, d - 1 - k)).collect();
    shell.iter().map(|&(ra, rb)| shell.iter().map(|&(ca, cb)| full[idx(ra, rb)][idx(ca, cb)]).collect()).collect()
}

#[test]
fn bilinears_match_dense_projection() {
    for n in 1..=4u32 {
        let b = single_ab(n);
        for (ca, aa) in [(true, false), (false, true), (true, true), (false, false)] {
            let cm = if ca { Mode::a(0) } else { Mode::b(0) };
            let am = if aa { Mode::a(0) } else { Mode::b(0) };
            let op = bilinear_operator(&b, cm, am).unwrap();
            let dense = dense_projected(n, ca, aa);
            for (r, row) in dense.iter().enumerate() {
                for (col, v) in row.iter().enumerate() {
                    let ri = b.index_of(&[r as u32, n - r as u32]).unwrap();
                    let ci = b.index_of(&[col as u32, n - col as u32]).unwrap();
                    assert!((op.get(ri, ci) - c(*v)).norm() < 1e-14, "n={n} {cm}†{am}");
                }
            }
        }
    }
}

#[test]
fn hop_commutator_is_sz() {
    let b = single_ab(3);
    let ab = bilinear_operator(&b, Mode::a(0), Mode::b(0)).unwrap();
    let ba = bilinear_operator(&b, Mode::b(0), Mode::a(0)).unwrap();
    let lhs = &(&ab * &ba) - &(&ba * &ab);
    let sz = collective_spin_operator(&b, 0, Axis::Z).unwrap();
    assert!(max_dense_diff(&lhs, &sz) < 1e-13);
}

#[test]
fn spin_half_is_pauli() {
    let b = single_ab(1);
    let up = b.index_of(&[1, 0]).unwrap();
    let dn = b.index_of(&[0, 1]).unwrap();
    let i = C64::new(0.0, 1.0);
    let pauli = [
        (Axis::X, [[c(0.0), c(1.0)], [c(1.0), c(0.0)]]),
        (Axis::Y, [[c(0.0), -i], [i, c(0.0)]]),
        (Axis::Z, [[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]),
    ];
    for (axis, m) in pauli {
        let s = collective_spin_operator(&b, 0, axis).unwrap();
        let order = [up, dn];
        for r in 0..2 {
            for col in 0..2 {
                assert!((s.get(order[r], order[col]) - m[r][col]).norm() < 1e-15, "{axis}");
            }
        }
    }
}

#[test]
fn spin_algebra_n4() {
    let b = single_ab(4);
    let sx = collective_spin_operator(&b, 0, Axis::X).unwrap();
    let sy = collective_spin_operator(&b, 0, Axis::Y).unwrap();
    let sz = collective_spin_operator(&b, 0, Axis::Z).unwrap();
    let lhs = sx.commutator(&sy).unwrap();
    assert!(max_dense_diff(&lhs, &(C64::new(0.0, 2.0) * &sz)) < 1e-12);
}

#[test]
fn sz_ladder_spectrum() {
    for n in 1..=9u32 {
        let sz = collective_spin_operator(&single_ab(n), 0, Axis::Z).unwrap();
        let mut ev: Vec<f64> = sz.diagonal_entries().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let want: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 - n as f64).collect();
        assert_eq!(ev, want);
    }
}

#[test]
fn expectation_examples() {
    let b = single_ab(10);
    let r = c(FRAC_1_SQRT_2);
    let sz = collective_spin_operator(&b, 0, Axis::Z).unwrap();
    let sx = collective_spin_operator(&b, 0, Axis::X).unwrap();
    let psi = spin_coherent_state(r, r, 10, &b).unwrap();
    assert!(expectation(&psi, &sz).unwrap().norm() < 1e-12);
    assert!((expectation(&psi, &Operator::identity(&b)).unwrap() - c(1.0)).norm() < 1e-12);
    let up = spin_coherent_state(c(1.0), c(0.0), 10, &b).unwrap();
    assert!((expectation(&up, &sz).unwrap() - c(10.0)).norm() < 1e-12);
    let fock = StateVector::fock(&b, &[4, 6]).unwrap();
    assert!(expectation(&fock, &sx).unwrap().norm() == 0.0);
    let rho = DensityMatrix::from_pure(&psi);
    assert!((expectation(&rho, &sx).unwrap() - c(10.0)).norm() < 1e-12);
}

// ------------------------------------------------------------- hamiltonians

#[test]
fn interaction_without_coupling_is_diagonal() {
    let p = PhysicalParams { cavity_g: 0.0, omega: 0.7, ..Default::default() };
    let b = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], 2).with_photon(2)).unwrap();
    let h = build_interaction_hamiltonian(&p, &b).unwrap();
    assert!(h.is_diagonal());
    for i in 0..b.dim() {
        let e = b.occupation(i, Mode::e(0)).unwrap() + b.occupation(i, Mode::e(1)).unwrap();
        let ph = b.occupation(i, Mode::Photon).unwrap();
        let want = p.omega0() * e as f64 + p.omega * ph as f64;
        assert!((h.get(i, i) - c(want)).norm() < 1e-13);
    }
}

#[test]
fn pump_examples() {
    let p = PhysicalParams { pump_g: 0.0, ..Default::default() };
    let b = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], 2)).unwrap();
    let h = build_pump_hamiltonian(&p, &b).unwrap();
    let ne = &number_operator(&b, Mode::e(0)).unwrap() + &number_operator(&b, Mode::e(1)).unwrap();
    assert!(max_dense_diff(&h, &(p.delta * &ne)) < 1e-15);

    // One atom: the two-level Rabi matrix [[0, g], [g, Δ]] on {b, e}.
    let p = PhysicalParams { pump_g: 0.3, delta: 4.0, ..Default::default() };
    let b = enumerate_basis(ModeSpec::atoms(1, &[Level::B, Level::E], 1)).unwrap();
    let h = build_pump_hamiltonian(&p, &b).unwrap();
    let (ib, ie) = (b.index_of(&occupation(&b, &[(Mode::b(0), 1)])).unwrap(), b.index_of(&occupation(&b, &[(Mode::e(0), 1)])).unwrap());
    assert_eq!(h.get(ib, ib), c(0.0));
    assert_eq!(h.get(ie, ie), c(4.0));
    assert_eq!(h.get(ib, ie), c(0.3));
    assert_eq!(h.get(ie, ib), c(0.3));

    let b3 = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], 3)).unwrap();
    assert!(build_pump_hamiltonian(&p, &b3).unwrap().hermiticity_residual() < 1e-14);
}

#[test]
fn effective_couplings() {
    let p = PhysicalParams { cavity_g: 1.0, pump_g: 1.0, delta: 10.0, ..Default::default() };
    assert!((p.omega_eff() - 5e-4).abs() < 1e-18);
    assert!((p.omega_blocked(10.0) - 1e-3).abs() < 1e-18);
    assert_eq!(p.omega_blocked(-10.0), -p.omega_blocked(10.0));
    let b = two_node_basis(3).unwrap();
    assert!(build_effective_blocked(&p, -10.0, &b).unwrap().is_diagonal());
    assert!(build_effective_two_node(&p, &b).unwrap().is_diagonal());

    // φ = π/2 removes the S1 S2 term: H(s1, s2) is additive in s1 and s2.
    let p = PhysicalParams { phi: FRAC_PI_2, ..p };
    let h = build_effective_two_node(&p, &b).unwrap();
    let e = |k1: u32, k2: u32| h.get(b.index_of(&[k1, 3 - k1, k2, 3 - k2]).unwrap(), b.index_of(&[k1, 3 - k1, k2, 3 - k2]).unwrap()).re;
    let mixed = e(3, 3) - e(3, 0) - e(0, 3) + e(0, 0);
    assert!(mixed.abs() < 1e-15, "{mixed}");
}

#[test]
fn lambda_examples() {
    let p = PhysicalParams { pump_g: 0.0, ..Default::default() };
    let b = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 3)).unwrap();
    let h = build_lambda_hamiltonian(&p, &b).unwrap();
    assert!(max_dense_diff(&h, &(p.delta * &number_operator(&b, Mode::e(0)).unwrap())) < 1e-15);

    let p = PhysicalParams { pump_g: 0.4, delta: 7.0, ..Default::default() };
    let b1 = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 1)).unwrap();
    let h = build_lambda_hamiltonian(&p, &b1).unwrap();
    let ia = b1.index_of(&[1, 0, 0]).unwrap();
    let ib = b1.index_of(&[0, 1, 0]).unwrap();
    let ie = b1.index_of(&[0, 0, 1]).unwrap();
    let want = [[0.0, 0.0, 0.4], [0.0, 0.0, 0.4], [0.4, 0.4, 7.0]];
    for (r, ri) in [ia, ib, ie].into_iter().enumerate() {
        for (col, ci) in [ia, ib, ie].into_iter().enumerate() {
            assert_eq!(h.get(ri, ci), c(want[r][col]));
        }
    }

    let b4 = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 4)).unwrap();
    let h = build_lambda_hamiltonian(&p, &b4).unwrap();
    assert!(h.commutator(&node_number_operator(&b4, 0).unwrap()).unwrap().max_abs() < 1e-14);
}

#[test]
fn collective_entangler_examples() {
    let b = cavity_basis(2).unwrap();
    let p = PhysicalParams { cavity_g: 0.0, omega: 0.3, ..Default::default() };
    assert!(build_collective_entangler(&p, &b).unwrap().is_diagonal());

    let p = PhysicalParams { cavity_g: 0.8, omega: 0.3, ..Default::default() };
    let h = build_collective_entangler(&p, &b).unwrap();
    assert!(h.commutator(&excitation_operator(&b)).unwrap().max_abs() < 1e-14);

    // One excitation, one atom per node: {e b 0, b e 0, b b 1}.
    let b1 = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], 1).with_photon(1).with_sector(Sector::Exactly(1))).unwrap();
    assert_eq!(b1.dim(), 3);
    let h = build_collective_entangler(&p, &b1).unwrap();
    let s1 = b1.index_of(&occupation(&b1, &[(Mode::e(0), 1), (Mode::b(1), 1)])).unwrap();
    let s2 = b1.index_of(&occupation(&b1, &[(Mode::b(0), 1), (Mode::e(1), 1)])).unwrap();
    let s3 = b1.index_of(&occupation(&b1, &[(Mode::b(0), 1), (Mode::b(1), 1), (Mode::Photon, 1)])).unwrap();
    let w0 = p.omega0();
    let want = [[w0, 0.0, 0.8], [0.0, w0, 0.8], [0.8, 0.8, p.omega]];
    let idx = [s1, s2, s3];
    for r in 0..3 {
        for col in 0..3 {
            assert!((h.get(idx[r], idx[col]) - c(want[r][col])).norm() < 1e-15);
        }
    }
}

#[test]
fn effective_entangler_examples() {
    let p = PhysicalParams { cavity_g: 1.0, delta: 10.0, ..Default::default() };
    assert!((p.omega_exchange() - 0.1).abs() < 1e-16);

    // Single excitation hops between the nodes: P(e2) = sin²(Ω₂ t).
    let b = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], 1)).unwrap();
    let h = build_effective_entangler(&p, &b).unwrap();
    let start = occupation(&b, &[(Mode::e(0), 1), (Mode::b(1), 1)]);
    let target = b.index_of(&occupation(&b, &[(Mode::b(0), 1), (Mode::e(1), 1)])).unwrap();
    let psi0 = StateVector::fock(&b, &start).unwrap();
    for t in [0.0, 1.3, 7.0, 15.7, 31.0] {
        let psi = propagate_unitary(&h, &psi0, t).unwrap();
        let want = (0.1 * t).sin().powi(2);
        assert!((psi.amplitudes()[target].norm_sqr() - want).abs() < 1e-12);
    }

    let far = PhysicalParams { delta: 1e13, ..p };
    assert!(build_effective_entangler(&far, &b).unwrap().max_abs() < 1e-12);
}

#[test]
fn fiber_mode_examples() {
    let rep = verify_fiber_diagonalization(&PhysicalParams { nu: 1.0, phi: 0.0, ..Default::default() }, 2);
    assert!(rep.offdiagonal_residue < 1e-10 && rep.passed(1e-10), "{rep:?}");
    let rep = verify_fiber_diagonalization(&PhysicalParams { nu: 1.0, phi: PI / 3.0, ..Default::default() }, 2);
    assert!(rep.spectrum_error < 1e-10 && rep.passed(1e-10), "{rep:?}");
    let rep = verify_fiber_diagonalization(&PhysicalParams { nu: 0.0, ..Default::default() }, 2);
    assert!(rep.passed(1e-12), "{rep:?}");
}

// ----------------------------------------------------------------- lindblad

#[test]
fn photon_decay_is_exponential() {
    let p = PhysicalParams { gamma_c: 0.7, ..Default::default() };
    let b = cavity_basis(1).unwrap();
    let model = LindbladModel::new(Operator::zero(&b), vec![make_cavity_loss_channel(&p, &b).unwrap()]).unwrap();
    let one = occupation(&b, &[(Mode::b(0), 1), (Mode::b(1), 1), (Mode::Photon, 1)]);
    let rho0 = DensityMatrix::from_pure(&StateVector::fock(&b, &one).unwrap());
    let np = number_operator(&b, Mode::Photon).unwrap();
    let run = evolve_master(&model, &rho0, 5.0, &[("n", &np)], &EvolveOptions::default().with_samples(41)).unwrap();
    let tr = &run.trajectory;
    for (t, v) in tr.times.iter().zip(tr.observable("n").unwrap()) {
        assert!((v - (-0.7 * t).exp()).abs() < 1e-9, "t={t}");
    }
}

#[test]
fn closed_master_matches_unitary() {
    let p = PhysicalParams { pump_g: 0.9, delta: 2.0, ..Default::default() };
    let b = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 3)).unwrap();
    let h = build_lambda_hamiltonian(&p, &b).unwrap();
    let psi0 = StateVector::fock(&b, &[3, 0, 0]).unwrap();
    let sz = collective_spin_operator(&b, 0, Axis::Z).unwrap();
    let ne = number_operator(&b, Mode::e(0)).unwrap();
    let obs = [("Sz", &sz), ("ne", &ne)];
    let opts = EvolveOptions::default().with_samples(101);
    let m = evolve_master(&LindbladModel::closed(h.clone()), &DensityMatrix::from_pure(&psi0), 12.0, &obs, &opts).unwrap();
    let u = evolve_unitary(&h, &psi0, 12.0, &obs, &opts).unwrap();
    for name in ["Sz", "ne"] {
        let worst = diff(&m.trajectory, &u.trajectory, name);
        assert!(worst < 1e-8, "{name}: {worst:e}");
    }
}

fn diff(a: &Trajectory, b: &Trajectory, name: &str) -> f64 {
    a.observable(name).unwrap().iter().zip(b.observable(name).unwrap()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn unitary_examples() {
    let b = two_node_basis(2).unwrap();
    let energies: Vec<f64> = (0..b.dim()).map(|i| 0.37 * i as f64 - 1.1).collect();
    let h = Operator::diagonal(&b, "H", &energies);
    let r = c(FRAC_1_SQRT_2);
    let psi0 = spin_coherent_state(r, r, 2, &b).unwrap();
    let t = 3.7;
    let psi = propagate_unitary(&h, &psi0, t).unwrap();
    for (k, e) in energies.iter().enumerate() {
        let want = psi0.amplitudes()[k] * C64::from_polar(1.0, -e * t);
        assert!((psi.amplitudes()[k] - want).norm() < 1e-13);
    }
    let same = propagate_unitary(&Operator::zero(&b), &psi0, t).unwrap();
    assert!((1.0 - same.fidelity(&psi0).unwrap()).abs() < 1e-14);

    let b6 = two_node_basis(6).unwrap();
    let psi0 = analytic_entangled_state(6, 1.0, 0.0, &b6).unwrap();
    let evolved = propagate_unitary(&build_szsz(0.4, &b6).unwrap(), &psi0, 1.7).unwrap();
    assert!(1.0 - analytic_entangled_state(6, 0.4, 1.7, &b6).unwrap().fidelity(&evolved).unwrap() < 1e-10);
}

#[test]
fn emission_channels() {
    let b = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 3)).unwrap();
    let ch = make_spontaneous_emission_channels(&PhysicalParams { gamma_s: 0.1, ..Default::default() }, &b).unwrap();
    assert_eq!(ch.len(), 2);
    assert!(ch.iter().all(|c| c.rate == 0.1));
    let ch0 = make_spontaneous_emission_channels(&PhysicalParams { gamma_s: 0.0, ..Default::default() }, &b).unwrap();
    assert!(ch0.iter().all(|c| c.rate == 0.0));
    let total = node_number_operator(&b, 0).unwrap();
    for c in &ch {
        assert!(c.jump.commutator(&total).unwrap().max_abs() < 1e-15, "{}", c.label);
    }
}

#[test]
fn cavity_loss_channel() {
    let p = PhysicalParams { gamma_c: 1.0, ..Default::default() };
    let b = cavity_basis(2).unwrap();
    let ch = make_cavity_loss_channel(&p, &b).unwrap();
    assert_eq!(ch.rate, 1.0);
    for (i, j, v) in ch.jump.triplets() {
        if v.norm() > 0.0 {
            assert_eq!(b.excitation(i) + 1, b.excitation(j));
        }
    }
    let dark = StateVector::fock(&b, &occupation(&b, &[(Mode::e(0), 1), (Mode::b(0), 1), (Mode::b(1), 2)])).unwrap();
    assert!(dark.apply(&ch.jump).unwrap().norm() == 0.0);
    let rho = DensityMatrix::from_pure(&dark);
    let model = LindbladModel::new(Operator::zero(&b), vec![ch]).unwrap();
    let out = propagate_master(&model, &rho, 4.0, &EvolveOptions::default()).unwrap().final_state;
    assert!(out.max_abs_diff(&rho).unwrap() < 1e-12);
}

#[test]
fn dephasing_channels_are_hermitian() {
    let p = PhysicalParams { gamma_z: 0.1, gamma_x: 0.01, ..Default::default() };
    let b = two_node_basis(3).unwrap();
    for (axis, rate) in [(Axis::Z, 0.1), (Axis::X, 0.01)] {
        let ch = make_dephasing_channels(&p, &b, axis).unwrap();
        assert_eq!(ch.len(), 2);
        for c in &ch {
            assert_eq!(c.rate, rate);
            assert!(c.jump.hermiticity_residual() == 0.0);
        }
    }
    assert!(make_dephasing_channels(&p, &b, Axis::Y).is_err());
}

#[test]
fn analytic_z_dephasing_examples() {
    let b = two_node_basis(3).unwrap();
    let r = c(FRAC_1_SQRT_2);
    let psi0 = spin_coherent_state(r, r, 3, &b).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi0);

    let t = 1.9;
    let pure = DensityMatrix::from_pure(&propagate_unitary(&build_szsz(1.0, &b).unwrap(), &psi0, t).unwrap());
    assert!(analytic_z_dephasing(&rho0, 0.0, 1.0, t).unwrap().max_abs_diff(&pure).unwrap() < 1e-12);

    let mut diag = vec![C64::new(0.0, 0.0); b.dim() * b.dim()];
    for i in 0..b.dim() {
        diag[i * b.dim() + i] = c(1.0 / b.dim() as f64);
    }
    let rd = DensityMatrix::new(&b, diag).unwrap();
    assert!(analytic_z_dephasing(&rd, 0.3, 1.0, 5.0).unwrap().max_abs_diff(&rd).unwrap() == 0.0);

    let b5 = two_node_basis(5).unwrap();
    let rho5 = DensityMatrix::from_pure(&spin_coherent_state(r, r, 5, &b5).unwrap());
    let sx = collective_spin_operator(&b5, 0, Axis::X).unwrap();
    for t in [0.05, 0.31, 0.77, 1.42, 2.9] {
        let noisy = expectation(&analytic_z_dephasing(&rho5, 0.1, 1.0, t).unwrap(), &sx).unwrap().re;
        let free = expectation(&analytic_z_dephasing(&rho5, 0.0, 1.0, t).unwrap(), &sx).unwrap().re;
        assert!((noisy - (-0.2 * t).exp() * free).abs() < 1e-12);
    }
}

// ------------------------------------------------------------------ moments

#[test]
fn decoupled_moments_stay_decoupled() {
    let p = PhysicalParams { pump_g: 0.0, gamma_s: 0.1, ..Default::default() };
    let s = MomentState { ee: c(3.0), aa: c(2.0), ..MomentState::all_in_a(5.0) };
    let d = moment_rhs(&s, &p);
    assert_eq!(d.ae, c(0.0));
    assert_eq!(d.be, c(0.0));
}

#[test]
fn moments_rabi_frequency_converges() {
    // ⟨Sz⟩ swings at twice the Raman coupling g²/Δ.
    let mut errors = Vec::new();
    for d in [10.0, 20.0, 40.0] {
        let p = PhysicalParams { pump_g: 1.0, delta: d, gamma_s: 0.0, ..Default::default() };
        let om1 = predict_rates(&p).omega1;
        let opts = MomentOptions { samples: 20000, ..Default::default() };
        let (tr, _) = solve_moments(&MomentState::all_in_a(10.0), &p, 20.0 * PI / om1, &opts).unwrap();
        let w = zero_crossing_frequency(&tr.times, tr.observable("Sz").unwrap()).unwrap();
        errors.push((w / (2.0 * om1) - 1.0).abs());
        let total = tr.observable("total").unwrap();
        assert!(total.iter().all(|v| (v - 10.0).abs() < 1e-9));
    }
    assert!(errors[0] < 0.05, "{errors:?}");
    assert!(errors[1] < 0.6 * errors[0] && errors[2] < 0.6 * errors[1], "{errors:?}");
}

#[test]
fn moments_without_pump_follow_tanh_law() {
    // Half the atoms excited, the rest in a; inversion is e†e minus both
    // ground levels.
    let n = 100.0;
    let p = PhysicalParams { pump_g: 0.0, gamma_s: 0.1, ..Default::default() };
    let s0 = MomentState { aa: c(n / 2.0), ee: c(n / 2.0), ..MomentState::all_in_a(n) };
    let opts = MomentOptions { samples: 301, ..Default::default() };
    let (tr, _) = solve_moments(&s0, &p, 3.0 / (0.1 * (n + 1.0)), &opts).unwrap();
    let (ee, aa, bb) = (tr.observable("ee").unwrap(), tr.observable("aa").unwrap(), tr.observable("bb").unwrap());
    let k0 = tanh_k0(n, 0.0);
    let worst = tr
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| (ee[i] - aa[i] - bb[i] - tanh_law(n, 0.1, k0, t)).abs() / n)
        .fold(0.0, f64::max);
    assert!(worst < 0.03, "{worst}");
}

#[test]
fn moments_lossless_envelope_is_flat() {
    let p = PhysicalParams { pump_g: 1.0, delta: 10.0, gamma_s: 0.0, n: 100, ..Default::default() };
    let (tr, _) = solve_moments(&MomentState::all_in_a(100.0), &p, 400.0, &MomentOptions { samples: 8000, ..Default::default() }).unwrap();
    let fit = extract_decay_rate(&tr, "Sz").unwrap();
    assert!(fit.gamma_eff.abs() < 1e-3, "{fit:?}");
}

#[test]
fn compare_exact_lossless_is_exact() {
    let p = PhysicalParams { pump_g: 1.0, delta: 10.0, gamma_s: 0.0, ..Default::default() };
    for n in [1, 3] {
        let r = compare_exact(&p, n, 60.0, &EvolveOptions::default().with_samples(601)).unwrap();
        assert!(r.max_deviation < 1e-6, "N={n}: {}", r.max_deviation);
    }
}

// ---------------------------------------------------------------- protocols

#[test]
fn gate_protocol_examples() {
    let p = PhysicalParams { phi: 0.0, ..Default::default() };
    let b = two_node_basis(4).unwrap();
    let psi0 = analytic_entangled_state(4, 1.0, 0.0, &b).unwrap();
    let same = run_gate_protocol(&p, 0.0, &psi0).unwrap();
    assert!(1.0 - same.fidelity(&psi0).unwrap() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let total = build_total_effective(&p, &b).unwrap();
    for _ in 0..5 {
        let tau = rng.random_range(1.0..3000.0);
        let got = run_gate_protocol(&p, tau, &psi0).unwrap();
        let want = propagate_unitary(&total, &psi0, tau).unwrap();
        assert!(1.0 - got.fidelity(&want).unwrap() < 1e-10, "tau={tau}");
    }

    let p = PhysicalParams { phi: FRAC_PI_2, ..Default::default() };
    for tau in [500.0, 1234.5] {
        let out = run_gate_protocol(&p, tau, &psi0).unwrap();
        assert!((node1_purity(&out) - 1.0).abs() < 1e-10);
    }
    assert!(run_gate_protocol(&p, -1.0, &psi0).is_err());
}

#[test]
fn entangled_state_examples() {
    let b = two_node_basis(3).unwrap();
    let r = c(FRAC_1_SQRT_2);
    let product = spin_coherent_state(r, r, 3, &b).unwrap();
    assert!(1.0 - analytic_entangled_state(3, 1.0, 0.0, &b).unwrap().fidelity(&product).unwrap() < 1e-14);

    // N = 1 at Ωt = π/4 against exp(−iΩt σz⊗σz) on |+⟩|+⟩.
    let b1 = two_node_basis(1).unwrap();
    let psi = analytic_entangled_state(1, 1.0, FRAC_PI_4, &b1).unwrap();
    for (i, amp) in psi.amplitudes().iter().enumerate() {
        let s1 = if b1.occupation(i, Mode::a(0)).unwrap() == 1 { 1.0 } else { -1.0 };
        let s2 = if b1.occupation(i, Mode::a(1)).unwrap() == 1 { 1.0 } else { -1.0 };
        let want = 0.5 * C64::from_polar(1.0, -s1 * s2 * FRAC_PI_4);
        assert!((amp - want).norm() < 1e-14);
    }
    assert!((node1_purity(&psi) - 0.5).abs() < 1e-14);

    let b12 = two_node_basis(12).unwrap();
    for t in [0.13, 0.9, 2.2] {
        assert!((analytic_entangled_state(12, 1.0, t, &b12).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cat_state_examples() {
    let b1 = two_node_basis(1).unwrap();
    assert!((node1_purity(&analytic_cat_state(1, &b1).unwrap()) - 0.5).abs() < 1e-14);
    for n in [4, 5] {
        let b = two_node_basis(n).unwrap();
        let psi0 = analytic_entangled_state(n, 1.0, 0.0, &b).unwrap();
        let evolved = propagate_unitary(&build_szsz(1.0, &b).unwrap(), &psi0, FRAC_PI_4).unwrap();
        assert!(1.0 - analytic_cat_state(n, &b).unwrap().fidelity(&evolved).unwrap() < 1e-10);
    }
}

#[test]
fn echo_examples() {
    let setup = DephasingSetup { n: 3, coupling: 1.0, axis: Axis::Z, rate: 0.0 };
    let echo = run_dephasing_echo(&setup, 0.7, 20, &EvolveOptions::default()).unwrap();
    assert_eq!(echo.cycle_errors.len(), 20);
    assert!(echo.cycle_errors.iter().all(|e| e.abs() < 1e-8));

    let b = setup.basis().unwrap();
    let model = setup.model(&b).unwrap();
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&b).unwrap());
    for bad in [0.0, -0.5] {
        assert!(run_echo_experiment(&model, &rho0, bad, 1, &[], &EvolveOptions::default()).is_err());
    }
    assert!(run_echo_experiment(&model, &rho0, 0.3, 0, &[], &EvolveOptions::default()).is_err());
}

// ----------------------------------------------------------------- analysis

#[test]
fn synthetic_decay_fits() {
    let times: Vec<f64> = (0..2000).map(|i| 60.0 * i as f64 / 1999.0).collect();
    let mut tr = Trajectory::new(times.clone());
    tr.push_observable("damped", times.iter().map(|t| (-0.1 * t).exp() * (5.0 * t).cos()).collect()).unwrap();
    tr.push_observable("flat", times.iter().map(|t| (5.0 * t).cos()).collect()).unwrap();
    let g = extract_decay_rate(&tr, "damped").unwrap().gamma_eff;
    assert!((g - 0.1).abs() < 0.002, "{g}");
    assert!(extract_decay_rate(&tr, "flat").unwrap().gamma_eff.abs() < 1e-3);

    let short = Trajectory::new(vec![0.0, 1.0, 2.0]);
    let mut short = short;
    short.push_observable("x", vec![1.0, 0.5, 0.2]).unwrap();
    assert!(matches!(extract_decay_rate(&short, "x"), Err(Error::TooFewPeaks { .. })));
}

#[test]
fn scaling_and_prediction_examples() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
    let fit = fit_scaling(&pts, ScalingMode::Linear).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);

    let p = PhysicalParams { cavity_g: 1.0, pump_g: 1.0, delta: 10.0, gamma_c: 1.0, gamma_s: 0.01, gamma_x: 0.01, n: 100, ..Default::default() };
    let r = predict_rates(&p);
    assert!((r.gamma1 - 0.0101).abs() < 1e-15);
    assert!((r.gamma2 - 0.01).abs() < 1e-15);
    assert!((r.omega1 - 0.1).abs() < 1e-15 && (r.omega2 - 0.1).abs() < 1e-15);
    assert!((r.gamma_x_eff - 4.0).abs() < 1e-12);
    assert!((r.omega - 5e-4).abs() < 1e-15);
    assert!((predict_rates_for(&p, 0.0).gamma1 - 1e-4).abs() < 1e-18);
}

// ---------------------------------------------------------------- estimates

#[test]
fn laboratory_table() {
    let t = parameter_table(&LabParams::default()).unwrap();
    assert!((t.omega1 - 1350.0).abs() < 1e-9);
    assert!((t.gamma1 - 19.0).abs() < 1e-9);
    assert!((t.omega2 - 1350.0).abs() < 1e-9);
    assert!((t.gamma2 - 0.33).abs() < 1e-12);
    assert!((t.omega - 0.675).abs() < 1e-12);
    // t_CNOT = π/(4NΩ); ratio = (1/Γ₁)/t_CNOT = 4NΩ/(πΓ₁).
    let t_cnot = PI / (4.0 * 1000.0 * 0.675);
    assert!((t.t_cnot - t_cnot).abs() < 1e-15);
    assert!((t.ratio - 4.0 * 1000.0 * 0.675 / (PI * 19.0)).abs() < 1e-10);
    assert!((t.ratio - 45.233510).abs() < 1e-5, "{}", t.ratio);
    assert!(((t.ratio - 44.0) / 44.0).abs() < 0.10);
}

#[test]
fn laboratory_power_laws() {
    let base = LabParams::default();
    let t1 = parameter_table(&base).unwrap();
    let t10 = parameter_table(&LabParams { d: 10.0, ..base.clone() }).unwrap();
    assert!((t1.gamma1 / t10.gamma1 - 100.0).abs() < 1e-9);
    assert!((t1.omega / t10.omega - 1000.0).abs() < 1e-9);
    assert!(parameter_table(&LabParams { n: 0.0, ..base }).is_err());
}
