use num_complex::Complex64;
use proptest::prelude::*;

use velobound_core::fft;
use velobound_core::multiplier::apply_multiplier;
use velobound_core::observables::*;
use velobound_core::potentials::{admissibility_check, LongPart, ShortPart, ShortProfile};
use velobound_core::propagator::split_step;
use velobound_core::*;

fn grid(n: usize, l: f64) -> GridSpec {
    GridSpec::new(1, n, l).unwrap()
}

fn well(depth: f64) -> PotentialSpec {
    PotentialSpec::zero().with_short(ShortPart {
        amplitude: -depth,
        gamma_short: 2.0,
        profile: ShortProfile::PowerLaw,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(seed in any::<u64>(), dim in 1usize..=2) {
        let g = GridSpec::new(dim, 16, 3.0).unwrap();
        let psi = WaveFunction::random(g, seed);
        let mut data = psi.values().to_vec();
        fft::forward(&g, &mut data);
        let momentum: f64 = data.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume() / g.len() as f64;
        prop_assert!((momentum - psi.norm_sqr()).abs() <= 1e-12 * psi.norm_sqr());
    }

    #[test]
    fn real_multiplier_is_hermitian(a in any::<u64>(), b in any::<u64>(), rho in 0.1f64..=1.0) {
        let g = grid(64, 5.0);
        let sym = FractionalSymbol::new(rho).unwrap();
        let m = |xi: &[f64]| sym.value(xi[0] * xi[0]);
        let (psi, phi) = (WaveFunction::random(g, a), WaveFunction::random(g, b));
        let lhs = apply_multiplier(&psi, m).unwrap().inner(&phi).unwrap();
        let rhs = psi.inner(&apply_multiplier(&phi, m).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0));
    }

    #[test]
    fn multipliers_compose(seed in any::<u64>(), c in -2.0f64..2.0) {
        let g = grid(32, 4.0);
        let psi = WaveFunction::random(g, seed);
        let m1 = |xi: &[f64]| (c * xi[0]).cos();
        let m2 = |xi: &[f64]| 1.0 / (1.0 + xi[0] * xi[0]);
        let lhs = apply_multiplier(&apply_multiplier(&psi, m2).unwrap(), m1).unwrap();
        let rhs = apply_multiplier(&psi, |xi| m1(xi) * m2(xi)).unwrap();
        prop_assert!(lhs.l2_distance(&rhs).unwrap() <= 1e-12 * psi.norm().max(1.0));
    }

    #[test]
    fn symbol_identity(rho in 0.01f64..=1.0, s in 0.0f64..1e4) {
        let sym = FractionalSymbol::new(rho).unwrap();
        let lhs = sym.derivative(s);
        let rhs = rho / (1.0 + sym.value(s)).powf((1.0 - rho) / rho);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs());
    }

    #[test]
    fn hamiltonian_is_symmetric(a in any::<u64>(), b in any::<u64>(), depth in 0.0f64..4.0) {
        let g = grid(64, 8.0);
        let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(depth)).unwrap();
        let (psi, phi) = (WaveFunction::random(g, a), WaveFunction::random(g, b));
        let lhs = h.apply(&psi).unwrap().inner(&phi).unwrap();
        let rhs = psi.inner(&h.apply(&phi).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0));
    }

    #[test]
    fn admissibility_monotone_in_epsilon(eps in 0.0f64..0.99, bump in 0.0f64..1.0, rho in 0.05f64..=1.0, dim in 1usize..=3) {
        let eps2 = eps + bump * (1.0 - eps) * 0.999;
        if admissibility_check(&SingularPart::softened(-1.0, eps), rho, dim).is_admissible() {
            prop_assert!(admissibility_check(&SingularPart::softened(-1.0, eps2), rho, dim).is_admissible());
        }
    }

    #[test]
    fn admissibility_ignores_kappa(eps in 0.0f64..0.99, rho in 0.05f64..=1.0, dim in 1usize..=3, kappa in -5.0f64..5.0) {
        prop_assert_eq!(
            admissibility_check(&SingularPart::softened(kappa, eps), rho, dim),
            admissibility_check(&SingularPart::softened(1.0, eps), rho, dim)
        );
    }

    #[test]
    fn split_step_time_reversal(seed in 0u64..1000, t in 0.1f64..3.0) {
        let g = grid(64, 8.0);
        let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(1.0)).unwrap();
        let psi = WaveFunction::random_band_limited(g, 2.0, seed).normalized().unwrap();
        let forward = split_step(&h, &psi, t, 1e-2).unwrap();
        let back = split_step(&h, &forward, -t, 1e-2).unwrap();
        prop_assert!(back.l2_distance(&psi).unwrap() <= 1e-9);
    }

    #[test]
    fn rfunction_hessian_nonnegative(theta in 0.1f64..3.0, x in prop::array::uniform2(-5.0f64..5.0), y in prop::array::uniform2(-1.0f64..1.0)) {
        let r = RFunction::new(theta).unwrap();
        let hess = r.hessian(&x);
        let q: f64 = (0..2).map(|i| (0..2).map(|j| y[i] * hess[i][j] * y[j]).sum::<f64>()).sum();
        prop_assert!(q >= -1e-14);
    }

    #[test]
    fn rfunction_derivatives(theta in 0.1f64..3.0, s in 0.0f64..20.0, ds in 0.0f64..1.0) {
        let r = RFunction::new(theta).unwrap();
        let d = r.r_prime(s);
        prop_assert!((0.0..=0.5).contains(&d));
        prop_assert!(r.r_prime(s + ds) >= d);
        prop_assert!(r.r_second(s) >= 0.0);
    }

    #[test]
    fn window_additivity(a in 0.0f64..1.0, w1 in 0.01f64..1.0, w2 in 0.01f64..1.0, t in 0.5f64..10.0) {
        let g = grid(256, 30.0);
        let (b, c) = (a + w1, a + w1 + w2);
        let ab = radial_cutoff(&g, t, &VelocityWindow::sharp(a, b).unwrap()).unwrap();
        let bc = radial_cutoff(&g, t, &VelocityWindow::sharp(b, c).unwrap()).unwrap();
        let ac = radial_cutoff(&g, t, &VelocityWindow::sharp(a, c).unwrap()).unwrap();
        for i in 0..g.len() {
            prop_assert_eq!(ab[i] + bc[i], ac[i]);
        }
    }

    #[test]
    fn scalar_mourre_inequality(rho in 0.05f64..=1.0, l1 in 0.1f64..2.0, width in 0.0f64..3.0, u in 0.0f64..=1.0) {
        let l2 = l1 + width;
        let lambda = l1 + u * width;
        let lhs = 2.0 * lambda * (1.0 + lambda).powf(-(1.0 - rho) / rho);
        prop_assert!(lhs >= velobound_core::mourre::mourre_constant(rho, l1, l2) * (1.0 - 1e-14));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn report_bilinearity(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let g = grid(256, 64.0);
        let h = HamiltonianHandle::free(g, FractionalSymbol::new(0.5).unwrap());
        let f = make_bump(0.02, 0.4, 0.5, 1.2).unwrap();
        let exp = VelocityExperiment::new(&h, f, Dynamics::Free, Schedule::new(8.0)).unwrap();
        let phi = WaveFunction::gaussian(g, &[0.0], &[1.0], 1.5).unwrap();
        let c = Complex64::new(re, im);
        let base = middle_bound_integral(&exp, 0.1, 0.4, &phi).unwrap();
        let scaled = middle_bound_integral(&exp, 0.1, 0.4, &phi.scale(c)).unwrap();
        prop_assert!(base.is_monotone());
        prop_assert!(base.rows.iter().all(|r| r.integrand >= 0.0));
        for (a, b) in base.rows.iter().zip(&scaled.rows) {
            prop_assert!((b.cumulative - c.norm_sqr() * a.cumulative).abs() <= 1e-12 * b.cumulative.abs().max(1e-300));
        }
    }
}

#[test]
fn deeper_well_lowers_every_eigenvalue() {
    let g = grid(128, 12.0);
    let sym = FractionalSymbol::new(0.5).unwrap();
    let spectra: Vec<Vec<f64>> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&d| HamiltonianHandle::new(g, sym, &well(d)).unwrap().diagonalize().unwrap().eigenvalues().to_vec())
        .collect();
    for pair in spectra.windows(2) {
        for (shallow, deep) in pair[0].iter().zip(&pair[1]) {
            assert!(deep <= &(shallow + 1e-12));
        }
    }
}

#[test]
fn kinetic_block_is_diagonal_in_fourier_basis() {
    let g = grid(64, 6.0);
    let sym = FractionalSymbol::new(0.75).unwrap();
    let h = HamiltonianHandle::free(g, sym);
    for k in 0..g.len() {
        let wave = WaveFunction::plane_wave(g, k);
        let image = h.apply(&wave).unwrap();
        let diagonal = wave.scale(Complex64::new(sym.value(g.momentum_sq(k)), 0.0));
        assert!(image.l2_distance(&diagonal).unwrap() <= 1e-10 * wave.norm());
    }
}

#[test]
fn unitarity_over_many_steps() {
    let g = grid(64, 8.0);
    let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(1.0)).unwrap();
    let psi = WaveFunction::gaussian(g, &[0.0], &[1.0], 1.0).unwrap();
    let dt = 1e-3;
    let stepped = split_step(&h, &psi, 1e4 * dt, dt).unwrap();
    assert!((stepped.norm() - psi.norm()).abs() <= 1e-10);
    let d = h.diagonalize().unwrap();
    let exact = propagator::evolve_exact(&d, &psi, 1e4 * dt).unwrap();
    assert!((exact.norm() - psi.norm()).abs() <= 1e-10);
}

#[test]
fn energy_conservation() {
    let g = grid(128, 10.0);
    let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(2.0)).unwrap();
    let d = h.diagonalize().unwrap();
    let psi = WaveFunction::gaussian(g, &[-2.0], &[1.0], 1.0).unwrap();
    let energy = |p: &WaveFunction| p.inner(&h.apply(p).unwrap()).unwrap().re;
    let e0 = energy(&psi);
    for t in [0.5, 2.0, 5.0] {
        let exact = propagator::evolve_exact(&d, &psi, t).unwrap();
        assert!((energy(&exact) - e0).abs() <= 1e-8 * e0.abs());
    }
    let drift = |dt: f64| (energy(&split_step(&h, &psi, 2.0, dt).unwrap()) - e0).abs();
    let (coarse, fine) = (drift(1e-2), drift(5e-3));
    assert!(coarse <= 1e-3);
    assert!(fine <= coarse / 3.0, "{coarse} {fine}");
}

#[test]
fn filter_commutes_with_evolution() {
    let g = grid(128, 10.0);
    let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(2.0)).unwrap();
    let d = std::sync::Arc::new(h.diagonalize().unwrap());
    let f = calculus::f_of_h_dense(d.clone(), &make_bump(0.0, 1.5, 3.0, 5.0).unwrap());
    let psi = WaveFunction::random(g, 7);
    let lhs = f.apply(&propagator::evolve_exact(&d, &psi, 3.0).unwrap()).unwrap();
    let rhs = propagator::evolve_exact(&d, &f.apply(&psi).unwrap(), 3.0).unwrap();
    assert!(lhs.l2_distance(&rhs).unwrap() <= 1e-8);
}

#[test]
fn filter_annihilates_excluded_eigenvectors() {
    let g = grid(128, 10.0);
    let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &well(2.0)).unwrap();
    let d = std::sync::Arc::new(h.diagonalize().unwrap());
    let ground = d.eigenvalues()[0];
    assert!(ground < 0.0);
    let f = make_bump(0.0, 1.5, 3.0, 5.0).unwrap();
    let filtered = calculus::f_of_h_dense(d.clone(), &f);
    assert!(filtered.apply(&d.eigenstate(0)).unwrap().norm() <= 1e-10);
    assert!(calculus::check_spectrum_avoidance(&[ground], &f).is_ok());
    assert!(calculus::check_spectrum_avoidance(&[2.0], &f).is_err());
}

#[test]
fn weighted_norm_converges_under_refinement() {
    let rho = 0.8;
    let mut sing = SingularPart::softened(-1.0, 0.6);
    sing.mollify_radius = Some(0.05);
    let Verdict::Admissible(range) = admissibility_check(&sing, rho, 1) else {
        panic!("softened Coulomb should be admissible");
    };
    let p = range.representative();
    let spec = PotentialSpec::zero().with_sing(sing);
    let norms: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|&n| {
            let g = grid(n, 4.0);
            let field = spec.sample_singular(&g).unwrap();
            potentials::weighted_lp_norm(&field, sing.gamma_sing, p, &g).unwrap()
        })
        .collect();
    assert!((norms[2] - norms[1]).abs() <= 0.05 * norms[2]);
    assert!((norms[2] - norms[1]).abs() <= (norms[1] - norms[0]).abs() + 1e-12);
}

#[test]
fn long_range_dilation_identity() {
    let g = grid(256, 16.0);
    let spec = PotentialSpec::zero().with_long(LongPart {
        amplitude: 0.3,
        gamma_long: 0.5,
    });
    let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &spec).unwrap();
    let r = mourre::dilation_commutator_check(&h, &spec).unwrap();
    assert!(r.residual <= 1e-5, "{}", r.residual);
    assert!(r.scalar_inequality_holds());
}
