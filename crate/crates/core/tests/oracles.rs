mod common;

use common::*;
use rldeconv::blur::{adjoint_convolve, conservation_defect, convolve, BoundaryMode, SpaceInvariantBlur};
use rldeconv::diffusion::{divergence_term, squared_gradient};
use rldeconv::metrics::{energy, snr};
use rldeconv::penaliser::{DataPenaliser, SmoothnessPenaliser};
use rldeconv::solver::{regularised_rl_step, rl_step, rrrl_step, rrrl_step_multichannel, SolverConfig};
use rldeconv::{Image, PointSpreadFunction};

const TOL: f64 = 1e-12;

fn mode(cyclic: bool) -> BoundaryMode {
    if cyclic {
        BoundaryMode::Cyclic
    } else {
        BoundaryMode::Reflect
    }
}

#[test]
fn ramp_matches_direct_sum() {
    let ramp = Image::from_fn(4, 4, 1, |x, y, _| (x + 4 * y) as f64);
    let psf = PointSpreadFunction::binomial(3).unwrap();
    for cyclic in [true, false] {
        let fast = convolve(&ramp, &psf, mode(cyclic));
        assert!(max_abs_diff(&fast, &direct_convolve(&ramp, &psf, cyclic)) < TOL);
    }
}

#[test]
fn random_kernels_match_direct_sums() {
    let mut r = rng(1);
    for (w, h, kw, kh) in [(8, 8, 3, 3), (8, 8, 5, 3), (4, 4, 3, 5), (4, 4, 7, 7), (8, 5, 9, 1)] {
        let psf = random_psf(&mut r, kw, kh);
        let img = random_image(&mut r, w, h, 2, 0.0, 255.0);
        for cyclic in [true, false] {
            let fwd = convolve(&img, &psf, mode(cyclic));
            assert!(max_abs_diff(&fwd, &direct_convolve(&img, &psf, cyclic)) < TOL);
            let adj = adjoint_convolve(&img, &psf, mode(cyclic));
            assert!(max_abs_diff(&adj, &direct_adjoint(&img, &psf, cyclic)) < TOL);
        }
    }
}

#[test]
fn adjoint_of_one_in_reflect_mode() {
    let psf = PointSpreadFunction::binomial(3).unwrap();
    let defect = conservation_defect(&psf, 8, 8, BoundaryMode::Reflect);
    let oracle = direct_adjoint(&Image::filled(8, 8, 1, 1.0), &psf, false);
    assert!(max_abs_diff(&defect, &oracle) < TOL);
    // Symmetric kernels keep mass under mirroring.
    assert!(defect.data().iter().all(|v| (v - 1.0).abs() < TOL));

    let mut r = rng(2);
    let skew = random_psf(&mut r, 5, 5);
    let defect = conservation_defect(&skew, 8, 8, BoundaryMode::Reflect);
    assert!(interior_max_diff(&defect, &Image::filled(8, 8, 1, 1.0), 2) < TOL);
    assert!(max_abs_diff(&defect, &direct_adjoint(&Image::filled(8, 8, 1, 1.0), &skew, false)) < TOL);
    let cyclic = conservation_defect(&skew, 8, 8, BoundaryMode::Cyclic);
    assert!(cyclic.data().iter().all(|v| (v - 1.0).abs() < TOL));
}

#[test]
fn divergence_matches_flux_assembly() {
    let mut r = rng(3);
    let penalisers = [
        SmoothnessPenaliser::WhittakerTikhonov,
        SmoothnessPenaliser::TotalVariation { eps: 1e-3 },
        SmoothnessPenaliser::PeronaMalik { lambda: 2.0 },
    ];
    for (w, h, c) in [(4, 4, 1), (8, 8, 1), (8, 6, 3)] {
        let u = random_image(&mut r, w, h, c, 0.5, 5.0);
        for p in &penalisers {
            for coupled in [false, true] {
                let fast = divergence_term(&u, p, coupled).into_image();
                assert!(max_abs_diff(&fast, &stencil_divergence(&u, p, coupled)) < TOL, "{p:?} {coupled}");
            }
        }
    }
}

#[test]
fn replicated_channels_scale_the_coupled_argument() {
    let mut r = rng(4);
    let base = random_image(&mut r, 6, 6, 1, 0.5, 5.0);
    let triple = Image::from_fn(6, 6, 3, |x, y, _| base.get(x, y, 0));
    let lambda = 1.5;
    let coupled = divergence_term(&triple, &SmoothnessPenaliser::PeronaMalik { lambda }, true).into_image();
    // Psi'(3 s2) for Perona-Malik equals Psi'(s2) with lambda scaled by 1/sqrt(3).
    let scaled = SmoothnessPenaliser::PeronaMalik {
        lambda: lambda / 3f64.sqrt(),
    };
    let single = stencil_divergence(&base, &scaled, false);
    for c in 0..3 {
        assert!(max_abs_diff(&coupled.channel(c), &single) < TOL);
    }
    let s2 = squared_gradient(&triple, true);
    let s2_single = stencil_s2(&base, 0);
    for (a, b) in s2[0].iter().zip(&s2_single) {
        assert!((a - 3.0 * b).abs() < TOL);
    }
}

#[test]
fn steps_match_composition_oracles() {
    let mut r = rng(5);
    let psf = PointSpreadFunction::binomial(3).unwrap();
    let skew = random_psf(&mut r, 3, 5);
    for (kernel, cyclic) in [(&psf, false), (&psf, true), (&skew, false), (&skew, true)] {
        let blur = SpaceInvariantBlur::new(kernel.clone(), mode(cyclic));
        let f = random_image(&mut r, 8, 8, 1, 1.0, 10.0);
        let u = random_image(&mut r, 8, 8, 1, 1.0, 10.0);
        let none = SmoothnessPenaliser::WhittakerTikhonov;

        let rl = rl_step(&u, &f, &blur).unwrap();
        assert!(max_abs_diff(&rl, &oracle_step(&u, &f, kernel, cyclic, None, &none, 0.0, false)) < TOL);
        // u = f, the usual starting iterate.
        let rl_f = rl_step(&f, &f, &blur).unwrap();
        assert!(max_abs_diff(&rl_f, &oracle_step(&f, &f, kernel, cyclic, None, &none, 0.0, false)) < TOL);

        let cfg = SolverConfig {
            alpha: 0.05,
            smoothness_penaliser: none,
            ..Default::default()
        };
        let reg = regularised_rl_step(&u, &f, &blur, &cfg).unwrap();
        assert!(max_abs_diff(&reg, &oracle_step(&u, &f, kernel, cyclic, None, &none, 0.05, true)) < TOL);

        let tv = SmoothnessPenaliser::TotalVariation { eps: 1e-3 };
        let robust = DataPenaliser::RobustSqrt { eps: 1e-2 };
        let cfg = SolverConfig {
            alpha: 0.01,
            data_penaliser: robust,
            smoothness_penaliser: tv,
            ..Default::default()
        };
        let rr = rrrl_step(&u, &f, &blur, &cfg).unwrap();
        assert!(max_abs_diff(&rr, &oracle_step(&u, &f, kernel, cyclic, Some(robust), &tv, 0.01, false)) < TOL);
    }
}

#[test]
fn multichannel_step_matches_composition_oracle() {
    let mut r = rng(6);
    let psf = random_psf(&mut r, 3, 3);
    let blur = SpaceInvariantBlur::spatial(psf.clone());
    let f = random_image(&mut r, 8, 8, 3, 1.0, 10.0);
    let u = random_image(&mut r, 8, 8, 3, 1.0, 10.0);
    let robust = DataPenaliser::RobustSqrt { eps: 1e-2 };
    let pm = SmoothnessPenaliser::PeronaMalik { lambda: 3.0 };
    let cfg = SolverConfig {
        alpha: 0.02,
        data_penaliser: robust,
        smoothness_penaliser: pm,
        ..Default::default()
    };
    let fast = rrrl_step_multichannel(&u, &f, &blur, &cfg).unwrap();
    assert!(max_abs_diff(&fast, &oracle_step(&u, &f, &psf, false, Some(robust), &pm, 0.02, true)) < TOL);
    let separate = rrrl_step(&u, &f, &blur, &cfg).unwrap();
    assert!(max_abs_diff(&separate, &oracle_step(&u, &f, &psf, false, Some(robust), &pm, 0.02, false)) < TOL);
}

#[test]
fn energy_matches_direct_sum() {
    let mut r = rng(7);
    let psf = random_psf(&mut r, 3, 3);
    for (w, h, c) in [(4, 4, 1), (8, 8, 1), (4, 4, 3)] {
        let f = random_image(&mut r, w, h, c, 1.0, 10.0);
        let u = random_image(&mut r, w, h, c, 1.0, 10.0);
        for phi in [DataPenaliser::Identity, DataPenaliser::RobustSqrt { eps: 1e-2 }] {
            let psi = SmoothnessPenaliser::TotalVariation { eps: 1e-3 };
            let cfg = SolverConfig {
                alpha: 0.3,
                data_penaliser: phi,
                smoothness_penaliser: psi,
                ..Default::default()
            };
            let fast = energy(&u, &f, &psf, &cfg).unwrap();
            assert!((fast - oracle_energy(&u, &f, &psf, &phi, &psi, 0.3)).abs() < TOL);
        }
    }
}

#[test]
fn identity_energy_vanishes_only_at_exact_fit() {
    let mut r = rng(8);
    let psf = PointSpreadFunction::binomial(3).unwrap();
    let u = random_image(&mut r, 8, 8, 1, 1.0, 10.0);
    let f = convolve(&u, &psf, BoundaryMode::Reflect);
    let cfg = SolverConfig {
        data_penaliser: DataPenaliser::Identity,
        ..Default::default()
    };
    assert!(energy(&u, &f, &psf, &cfg).unwrap().abs() < 1e-12);
    let v = u.map(|x| x * 1.01);
    assert!(energy(&v, &f, &psf, &cfg).unwrap() > 0.0);
}

#[test]
fn snr_hand_value() {
    let g = Image::new(2, 1, 1, vec![0.0, 2.0]).unwrap();
    let u = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
    assert!((snr(&u, &g).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);
    assert_eq!(snr(&g, &g).unwrap(), f64::INFINITY);
    assert!(snr(&g, &Image::filled(2, 1, 1, 3.0)).is_err());
}
