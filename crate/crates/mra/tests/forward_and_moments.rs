use orbit_core::{Complex64, SeededRng, Workers};
use orbit_mra::metrics::relative_error_fourier;
use orbit_mra::moments::relative_error_moments;
use orbit_mra::signal::{dft, rotate, shift_fourier};
use orbit_mra::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_signal(n: usize, rng: &mut StdRng) -> MraSignal {
    MraSignal::from_real((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_density(n: usize, rng: &mut StdRng) -> MraDensity {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    MraDensity::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

fn two_gaussians(n: usize) -> (MraSignal, MraDensity) {
    let v = MixtureSpec1D {
        components: vec![
            Component { weight: 0.6, mean: -0.2, stddev: 0.06 },
            Component { weight: 0.4, mean: 0.25, stddev: 0.12 },
        ],
        wrap: true,
    };
    let rho = MixtureSpec1D { components: vec![Component { weight: 1.0, mean: 0.1, stddev: 0.15 }], wrap: true };
    (v.signal(n).unwrap(), rho.density(n).unwrap())
}

/// Moments by explicit enumeration: shift the real signal by every grid
/// step, transform, and average with the density weights.
fn brute_force(v: &MraSignal, rho: &MraDensity) -> MomentPair {
    let n = v.n;
    let c = (n / 2) as i64;
    let mut m1 = vec![Complex64::default(); n];
    let mut m2 = vec![Complex64::default(); n * n];
    for j in 0..n {
        let f = dft(&rotate(&v.values, j as i64 - c));
        for a in 0..n {
            m1[a] += rho.mass[j] * f[a];
            for b in 0..n {
                m2[a * n + b] += rho.mass[j] * f[a] * f[b].conj();
            }
        }
    }
    MomentPair { m1, m2, kind: MomentKind::Analytic, sigma: None, count: None }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn delta_density_gives_rank_one() {
    let mut rng = StdRng::seed_from_u64(1);
    let v = random_signal(9, &mut rng);
    let m = analytic_moments(&v, &MraDensity::delta(9)).unwrap();
    assert!(max_diff(&m.m1, &v.fourier) < 1e-14);
    for a in 0..9 {
        for b in 0..9 {
            assert!((m.m2[a * 9 + b] - v.fourier[a] * v.fourier[b].conj()).norm() < 1e-14);
        }
    }
}

#[test]
fn uniform_density_kills_non_zero_frequencies() {
    let mut rng = StdRng::seed_from_u64(2);
    let v = random_signal(10, &mut rng);
    let m = analytic_moments(&v, &MraDensity::uniform(10)).unwrap();
    for (a, x) in m.m1.iter().enumerate() {
        let want = if a == 5 { v.fourier[5] } else { Complex64::default() };
        assert!((x - want).norm() < 1e-14);
    }
}

#[test]
fn matches_exhaustive_shift_oracle() {
    for (n, seed) in [(3, 3), (4, 4), (8, 5), (41, 6)] {
        let mut rng = StdRng::seed_from_u64(seed);
        let v = random_signal(n, &mut rng);
        let rho = random_density(n, &mut rng);
        let got = analytic_moments(&v, &rho).unwrap();
        let want = brute_force(&v, &rho);
        assert!(max_diff(&got.m1, &want.m1) < 1e-12);
        assert!(max_diff(&got.m2, &want.m2) < 1e-12);
    }
}

#[test]
fn group_ambiguity_is_exact() {
    let mut rng = StdRng::seed_from_u64(7);
    for n in [7, 8] {
        let v = random_signal(n, &mut rng);
        let rho = random_density(n, &mut rng);
        let base = analytic_moments(&v, &rho).unwrap();
        for o in 0..n as i64 {
            let vs = MraSignal::from_real(rotate(&v.values, o)).unwrap();
            let rs = MraDensity::new(rotate(&rho.mass, -o)).unwrap();
            let m = analytic_moments(&vs, &rs).unwrap();
            assert!(max_diff(&m.m1, &base.m1) < 1e-10 && max_diff(&m.m2, &base.m2) < 1e-10, "n={n} o={o}");
        }
    }
}

#[test]
fn analytic_m2_is_hermitian_psd_with_power_trace() {
    let mut rng = StdRng::seed_from_u64(8);
    let n = 12;
    let v = random_signal(n, &mut rng);
    let rho = random_density(n, &mut rng);
    let m = analytic_moments(&v, &rho).unwrap();
    assert!(m.hermitian_defect() < 1e-12);
    let trace: f64 = (0..n).map(|a| m.m2[a * n + a].re).sum();
    let power: f64 = v.fourier.iter().map(|c| c.norm_sqr()).sum();
    assert!((trace - power).abs() < 1e-10);
    let mat = nalgebra::DMatrix::from_row_slice(n, n, &m.m2);
    let eig = nalgebra::SymmetricEigen::new(mat);
    assert!(eig.eigenvalues.iter().all(|&l| l > -1e-8));
    assert!((m.m1[n / 2] - v.fourier[n / 2]).norm() < 1e-12);
}

#[test]
fn noiseless_delta_observations_equal_signal() {
    let (v, _) = two_gaussians(21);
    let obs = simulate_observations(&v, &MraDensity::delta(21), 50, 0.0, &SeededRng::new(1, "obs"), &Workers::new(1)).unwrap();
    for row in obs.rows.data().chunks(21) {
        assert_eq!(row, v.values.as_slice());
    }
}

#[test]
fn noiseless_observations_are_rotations() {
    let (v, rho) = two_gaussians(21);
    let obs = simulate_observations(&v, &rho, 200, 0.0, &SeededRng::new(2, "obs"), &Workers::new(1)).unwrap();
    for (row, &j) in obs.rows.data().chunks(21).zip(&obs.shifts) {
        assert_eq!(row, rotate(&v.values, j as i64 - 10).as_slice());
    }
}

#[test]
fn shift_histogram_follows_density() {
    let (v, rho) = two_gaussians(21);
    let count = 100_000;
    let obs = simulate_observations(&v, &rho, count, 1.0, &SeededRng::new(3, "hist"), &Workers::new(2)).unwrap();
    let mut hist = vec![0usize; 21];
    obs.shifts.iter().for_each(|&j| hist[j] += 1);
    for (j, &h) in hist.iter().enumerate() {
        let p = rho.mass[j];
        let expected = p * count as f64;
        let se = (count as f64 * p * (1.0 - p)).sqrt();
        assert!((h as f64 - expected).abs() <= 3.0 * se + 1.0, "bin {j}: {h} vs {expected:.1}");
    }
}

#[test]
fn noise_only_second_moment_vanishes() {
    let v = MraSignal::from_real(vec![0.0; 15]).unwrap();
    let rho = MraDensity::uniform(15);
    let m = simulate_moments(&v, &rho, 200_000, 1.0, &SeededRng::new(4, "noise"), &Workers::new(1)).unwrap();
    let fro = orbit_core::tensor::cnorm(&m.m2);
    // each entry fluctuates with standard deviation about 1/sqrt(N)
    assert!(fro < 4.0 * 15.0 / (200_000f64).sqrt(), "{fro}");
}

#[test]
fn single_clean_observation_is_rank_one() {
    let mut rng = StdRng::seed_from_u64(9);
    let v = random_signal(6, &mut rng);
    let batch = orbit_core::RTensor::new(vec![1, 6], v.values.clone()).unwrap();
    let m = empirical_moments(&batch, 0.0, &Workers::new(1)).unwrap();
    assert!(max_diff(&m.m1, &v.fourier) < 1e-14);
    for a in 0..6 {
        for b in 0..6 {
            assert!((m.m2[a * 6 + b] - v.fourier[a] * v.fourier[b].conj()).norm() < 1e-13);
        }
    }
}

#[test]
fn empirical_converges_to_analytic() {
    let (v, rho) = two_gaussians(41);
    let m = simulate_moments(&v, &rho, 100_000, 1.0, &SeededRng::new(5, "conv"), &Workers::new(1)).unwrap();
    let a = analytic_moments(&v, &rho).unwrap();
    let (e1, e2) = relative_error_moments(&a, &m).unwrap();
    assert!(e1 <= 0.05 && e2 <= 0.05, "{e1} {e2}");
    assert_eq!(m.hermitian_defect(), 0.0);
}

#[test]
fn streaming_equals_batch_and_ignores_worker_count() {
    let (v, rho) = two_gaussians(21);
    let rng = SeededRng::new(6, "stream");
    let obs = simulate_observations(&v, &rho, 5000, 0.7, &rng, &Workers::new(1)).unwrap();
    let batch = empirical_moments(&obs.rows, 0.7, &Workers::new(1)).unwrap();
    for w in [1, 4, 8] {
        let s = simulate_moments(&v, &rho, 5000, 0.7, &rng, &Workers::new(w)).unwrap();
        assert_eq!(s, batch);
        assert_eq!(empirical_moments(&obs.rows, 0.7, &Workers::new(w)).unwrap(), batch);
    }
}

#[test]
fn moment_error_definition() {
    let (v, rho) = two_gaussians(9);
    let a = analytic_moments(&v, &rho).unwrap();
    assert_eq!(relative_error_moments(&a, &a).unwrap(), (0.0, 0.0));
    let mut b = a.clone();
    b.m1.iter_mut().for_each(|c| *c *= 2.0);
    assert!((relative_error_moments(&a, &b).unwrap().0 - 1.0).abs() < 1e-14);
}

#[test]
fn invalid_inputs_rejected() {
    let (v, rho) = two_gaussians(9);
    let rng = SeededRng::new(0, "x");
    assert!(simulate_observations(&v, &rho, 10, -1.0, &rng, &Workers::new(1)).is_err());
    assert!(simulate_observations(&v, &rho, 0, 1.0, &rng, &Workers::new(1)).is_err());
    assert!(empirical_moments(&orbit_core::RTensor::zeros(vec![0, 9]), 1.0, &Workers::new(1)).is_err());
    assert!(MraDensity::new(vec![0.5, 0.6]).is_err());
}

fn unit_modulus_instance(n: usize, seed: u64) -> (MraSignal, MraDensity) {
    let mut rng = StdRng::seed_from_u64(seed);
    let c = n / 2;
    let mut f = vec![Complex64::default(); n];
    // Hermitian, unit modulus: real signal with flat spectrum
    for a in 0..n {
        let k = a as i64 - c as i64;
        let partner = (c as i64 - k).rem_euclid(n as i64) as usize;
        if partner == a || (k == -(c as i64) && n % 2 == 0) {
            f[a] = Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0);
        } else if k > 0 {
            let z = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            f[a] = z;
            f[partner] = z.conj();
        }
    }
    let mut raw: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 + rng.random_range(0.0..0.5)).collect();
    // distinct entries in random order
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        raw.swap(i, j);
    }
    let s: f64 = raw.iter().sum();
    (MraSignal::from_fourier(f).unwrap(), MraDensity::new(raw.iter().map(|v| v / s).collect()).unwrap())
}

fn aligned_density_error(est: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as i64;
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..n)
        .map(|o| rotate(est, o).iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn spectral_inversion_recovers_unit_modulus_instances() {
    for (n, seed) in [(8, 1), (16, 2), (9, 3)] {
        let (v, rho) = unit_modulus_instance(n, seed);
        let m = analytic_moments(&v, &rho).unwrap();
        for method in [EigenMethod::Dense, EigenMethod::Power] {
            let opts = SpectralOptions { method, ..Default::default() };
            let r = spectral_invert(&m.m2, Some(&m.m1), &opts).unwrap();
            assert!(!r.degenerate);
            let mut sorted = r.rho.clone();
            sorted.sort_by(f64::total_cmp);
            let mut want = rho.mass.clone();
            want.sort_by(f64::total_cmp);
            assert!(sorted.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-8), "{method:?} n={n}");
            assert!(aligned_density_error(&r.rho, &rho.mass) < 1e-6);
            assert!(relative_error_fourier(&r.vhat, &v.fourier).unwrap() < 1e-6, "{method:?} n={n}");
        }
    }
}

#[test]
fn spectral_inversion_of_delta_is_rank_one() {
    let (v, _) = unit_modulus_instance(8, 4);
    let m = analytic_moments(&v, &MraDensity::delta(8)).unwrap();
    let r = spectral_invert(&m.m2, None, &SpectralOptions::default()).unwrap();
    assert!((r.eigenvalues[0] - 8.0).abs() < 1e-10);
    assert!(r.eigenvalues[1..].iter().all(|l| l.abs() < 1e-10));
    assert!((r.rho.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-10);
    assert!(r.degenerate, "repeated zero eigenvalues are flagged");
}

#[test]
fn spectral_inversion_requires_unit_modulus_flag() {
    let (v, rho) = unit_modulus_instance(8, 5);
    let m = analytic_moments(&v, &rho).unwrap();
    let opts = SpectralOptions { assume_unit_modulus: false, ..Default::default() };
    assert!(spectral_invert(&m.m2, None, &opts).is_err());
}

proptest! {
    #[test]
    fn shift_group_law(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, seed in 0u64..100) {
        let mut rng = StdRng::seed_from_u64(seed);
        let v = random_signal(11, &mut rng);
        let a = shift_fourier(&shift_fourier(&v.fourier, s1), s2);
        let b = shift_fourier(&v.fourier, (s1 + s2).rem_euclid(1.0));
        prop_assert!(max_diff(&a, &b) < 1e-11);
    }

    #[test]
    fn empirical_m2_always_hermitian(seed in 0u64..50, sigma in 0.0f64..2.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let v = random_signal(7, &mut rng);
        let rho = random_density(7, &mut rng);
        let m = simulate_moments(&v, &rho, 300, sigma, &SeededRng::new(seed, "h"), &Workers::new(1)).unwrap();
        prop_assert_eq!(m.hermitian_defect(), 0.0);
    }
}
